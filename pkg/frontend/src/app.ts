/**
 * Browser wiring: local file loading, canvas rendering, input handling.
 *
 * Fully client-side: the user picks a sequence directory (manifest.json
 * plus frame PNGs); annotations leave the page only through the export
 * download.
 */

import { ExportError, exportAnnotations } from "./export.js";
import { BLUSH_OPTIONS, PATHWAY_OPTIONS, SEGMENT_OPTIONS, validateManifest } from "./schema.js";
import { PlacementMode, ViewerState } from "./state.js";
import { imageToScreen, panBy, zoomAt } from "./transform.js";

const MARKER_COLORS: Record<string, string> = {
  collateral: "#ff5252",
  donor: "#40c4ff",
  receiver: "#69f0ae",
};

let state: ViewerState | null = null;
let frames: HTMLImageElement[] = [];

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function canvas(): HTMLCanvasElement {
  return $("viewer") as HTMLCanvasElement;
}

function banner(message: string, isError = false): void {
  const el = $("banner");
  el.textContent = message;
  el.className = isError ? "banner error" : "banner";
}

async function loadSequence(files: FileList): Promise<void> {
  const byName = new Map<string, File>();
  for (const f of Array.from(files)) byName.set(f.name, f);
  const manifestFile = byName.get("manifest.json");
  if (!manifestFile) {
    banner("no manifest.json among the selected files", true);
    return;
  }
  let manifest;
  try {
    manifest = validateManifest(JSON.parse(await manifestFile.text()));
  } catch (err) {
    banner(`malformed manifest: ${(err as Error).message}`, true);
    return;
  }
  const loaded: HTMLImageElement[] = [];
  for (let i = 0; i < manifest.frame_count; i++) {
    const name = `frame_${String(i).padStart(4, "0")}.png`;
    const file = byName.get(name);
    if (!file) {
      banner(`missing frame file ${name}`, true);
      return;
    }
    const img = new Image();
    img.src = URL.createObjectURL(file);
    await img.decode();
    if (img.naturalWidth !== manifest.width || img.naturalHeight !== manifest.height) {
      banner(`frame ${name} is ${img.naturalWidth}x${img.naturalHeight}, `
        + `manifest says ${manifest.width}x${manifest.height}`, true);
      return;
    }
    loaded.push(img);
  }
  frames = loaded;
  state = new ViewerState(manifest);
  banner(`${manifest.patient_id}/${manifest.ica_id}: ${manifest.frame_count} frames `
    + `${manifest.width}x${manifest.height}`);
  render();
}

function render(): void {
  if (!state) return;
  const c = canvas();
  const ctx = c.getContext("2d");
  if (!ctx) return;
  ctx.imageSmoothingEnabled = false;
  ctx.fillStyle = "#111";
  ctx.fillRect(0, 0, c.width, c.height);
  const frame = frames[state.currentFrameIndex];
  if (frame) {
    const t = state.transform;
    ctx.drawImage(frame, t.panX, t.panY, frame.naturalWidth * t.zoom, frame.naturalHeight * t.zoom);
  }
  for (const [kind, pt] of Object.entries(state.landmarks)) {
    if (!pt) continue;
    const s = imageToScreen(state.transform, { x: pt[0], y: pt[1] });
    ctx.strokeStyle = MARKER_COLORS[kind] ?? "#fff";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.arc(s.x, s.y, 6, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(kind[0]?.toUpperCase() ?? "?", s.x + 8, s.y - 8);
  }
  for (const p of state.measurePoints) {
    const s = imageToScreen(state.transform, p);
    ctx.strokeStyle = "#ffd740";
    ctx.strokeRect(s.x - 3, s.y - 3, 6, 6);
  }
  $("frame-label").textContent =
    `frame ${state.currentFrameIndex + 1} / ${state.manifest.frame_count}`
    + (state.annotatedFrame !== undefined ? ` (annotated: ${state.annotatedFrame})` : "");
  $("zoom-label").textContent = `${state.transform.zoom.toFixed(2)}x`;
  const size = state.collateralSizePx;
  $("size-label").textContent = size === undefined ? "size: not measured" : `size: ${size.toFixed(2)} px`;
  const problems = state.exportProblems();
  ($("export") as HTMLButtonElement).disabled = problems.length > 0;
  $("problems").textContent = problems.length ? `blocking export: ${problems.join("; ")}` : "ready to export";
}

function fillSelect(id: string, options: readonly (string | number)[], placeholder: string): void {
  const sel = $(id) as HTMLSelectElement;
  sel.innerHTML = "";
  const blank = document.createElement("option");
  blank.value = "";
  blank.textContent = placeholder;
  sel.appendChild(blank);
  for (const opt of options) {
    const el = document.createElement("option");
    el.value = String(opt);
    el.textContent = String(opt);
    sel.appendChild(el);
  }
}

function wireGrades(): void {
  fillSelect("rentrop", [0, 1, 2, 3], "rentrop");
  fillSelect("flow", [1, 2, 3, 4], "flow");
  fillSelect("blush", BLUSH_OPTIONS, "blush");
  fillSelect("pathway", PATHWAY_OPTIONS, "pathway");
  fillSelect("donor-segment", SEGMENT_OPTIONS, "donor seg");
  fillSelect("receiving-segment", SEGMENT_OPTIONS, "receiving seg");
  const bind = (id: string, apply: (v: string) => void) => {
    ($(id) as HTMLSelectElement).addEventListener("change", (ev) => {
      const v = (ev.target as HTMLSelectElement).value;
      if (v !== "") apply(v);
      render();
    });
  };
  bind("rentrop", (v) => state?.setGrades({ rentrop_grade: Number(v) }));
  bind("flow", (v) => state?.setGrades({ flow_grade: Number(v) }));
  bind("blush", (v) => state?.setGrades({ blush_grade: Number(v) }));
  bind("pathway", (v) => state?.setGrades({ pathway: v }));
  bind("donor-segment", (v) => state?.setGrades({ donor_segment: v }));
  bind("receiving-segment", (v) => state?.setGrades({ receiving_segment: v }));
}

function wireViewer(): void {
  const c = canvas();
  c.addEventListener("click", (ev) => {
    if (!state) return;
    const rect = c.getBoundingClientRect();
    const result = state.clickAt({ x: ev.clientX - rect.left, y: ev.clientY - rect.top });
    if (!result.accepted && result.reason) banner(result.reason, true);
    render();
  });
  c.addEventListener("wheel", (ev) => {
    if (!state) return;
    ev.preventDefault();
    const rect = c.getBoundingClientRect();
    const factor = ev.deltaY < 0 ? 1.25 : 0.8;
    state.transform = zoomAt(state.transform, factor, {
      x: ev.clientX - rect.left,
      y: ev.clientY - rect.top,
    });
    render();
  });
  let dragging = false;
  let last = { x: 0, y: 0 };
  c.addEventListener("mousedown", (ev) => {
    if (ev.button === 1 || ev.shiftKey) {
      dragging = true;
      last = { x: ev.clientX, y: ev.clientY };
      ev.preventDefault();
    }
  });
  window.addEventListener("mousemove", (ev) => {
    if (!dragging || !state) return;
    state.transform = panBy(state.transform, ev.clientX - last.x, ev.clientY - last.y);
    last = { x: ev.clientX, y: ev.clientY };
    render();
  });
  window.addEventListener("mouseup", () => {
    dragging = false;
  });
  window.addEventListener("keydown", (ev) => {
    if (!state) return;
    if (ev.key === "ArrowRight") state.stepFrame(1);
    else if (ev.key === "ArrowLeft") state.stepFrame(-1);
    else return;
    render();
  });
}

function wireControls(): void {
  ($("files") as HTMLInputElement).addEventListener("change", (ev) => {
    const files = (ev.target as HTMLInputElement).files;
    if (files && files.length) void loadSequence(files);
  });
  for (const mode of ["collateral", "donor", "receiver", "measure", "none"] as PlacementMode[]) {
    $(`mode-${mode}`).addEventListener("click", () => {
      state?.setMode(mode);
      banner(`placement mode: ${mode}`);
      render();
    });
  }
  $("prev").addEventListener("click", () => {
    state?.stepFrame(-1);
    render();
  });
  $("next").addEventListener("click", () => {
    state?.stepFrame(1);
    render();
  });
  $("export").addEventListener("click", () => {
    if (!state) return;
    try {
      const text = exportAnnotations([state.toDraft()]);
      const blob = new Blob([text], { type: "application/json" });
      const a = document.createElement("a");
      a.href = URL.createObjectURL(blob);
      a.download = `annotations_${state.manifest.ica_id}.json`;
      a.click();
      banner("annotation exported");
    } catch (err) {
      if (err instanceof ExportError) banner(err.message, true);
      else throw err;
    }
  });
}

export function start(): void {
  wireGrades();
  wireViewer();
  wireControls();
  banner("select a sequence directory (manifest.json + frame PNGs)");
}

if (typeof document !== "undefined") {
  start();
}
