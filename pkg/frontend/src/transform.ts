/**
 * Screen/image coordinate mapping under zoom and pan.
 *
 * screen = image * zoom + pan, in canvas pixels.  The two directions are
 * exact algebraic inverses, so annotations land on the same anatomical
 * pixel at any zoom level.
 */

export interface ViewTransform {
  zoom: number;
  panX: number;
  panY: number;
}

export interface Point {
  x: number;
  y: number;
}

export const MIN_ZOOM = 0.25;
export const MAX_ZOOM = 16;

export function identityTransform(): ViewTransform {
  return { zoom: 1, panX: 0, panY: 0 };
}

export function imageToScreen(t: ViewTransform, pt: Point): Point {
  return { x: pt.x * t.zoom + t.panX, y: pt.y * t.zoom + t.panY };
}

export function screenToImage(t: ViewTransform, pt: Point): Point {
  return { x: (pt.x - t.panX) / t.zoom, y: (pt.y - t.panY) / t.zoom };
}

/** Zoom by a factor keeping the given screen point fixed on the image. */
export function zoomAt(t: ViewTransform, factor: number, anchor: Point): ViewTransform {
  const zoom = Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, t.zoom * factor));
  const applied = zoom / t.zoom;
  return {
    zoom,
    panX: anchor.x - (anchor.x - t.panX) * applied,
    panY: anchor.y - (anchor.y - t.panY) * applied,
  };
}

export function panBy(t: ViewTransform, dx: number, dy: number): ViewTransform {
  return { zoom: t.zoom, panX: t.panX + dx, panY: t.panY + dy };
}

export function setZoom(t: ViewTransform, zoom: number): ViewTransform {
  return { zoom: Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, zoom)), panX: t.panX, panY: t.panY };
}
