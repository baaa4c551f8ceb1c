"""Command-line entry point.

Subcommands: gen-synth, pretrain, train, crossval, evaluate, subgroups,
grad-check.  Every run writes its fully resolved config next to its
outputs; flags override config-file values; identical resolved configs and
seeds reproduce identical outputs byte for byte.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = os.environ.get("CCC_LOG_LEVEL", "info").lower()
    if level not in LOG_LEVELS:
        print(f"warning: CCC_LOG_LEVEL={level!r} not in {sorted(LOG_LEVELS)}, using info",
              file=sys.stderr)
        level = "info"
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s")


class CliError(Exception):
    pass


def _load_config_file(path):
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise CliError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise CliError(f"config file {path} must hold a flat JSON object")
    return cfg


def _resolve(args, file_cfg: dict, keys: dict) -> dict:
    """Merge config-file values and CLI flags (flags win), with defaults."""
    resolved = {}
    for key, default in keys.items():
        flag_val = getattr(args, key.replace("-", "_"), None)
        if flag_val is not None:
            resolved[key] = flag_val
        elif key in file_cfg:
            resolved[key] = file_cfg[key]
        else:
            resolved[key] = default
    unknown = set(file_cfg) - set(keys)
    if unknown:
        raise CliError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    return resolved


def _write_resolved(out_dir: Path, resolved: dict, name="config.json"):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")


# ----- subcommands -----

def cmd_gen_synth(args):
    from cccdetect.data import SynthConfig, save_dataset_dir, synth_generate
    from cccdetect.data.synth import hard_variant

    file_cfg = _load_config_file(args.config)
    resolved = _resolve(args, file_cfg, {
        "seed": 0, "n": 20, "positive-ratio": 0.5, "image-size": 64,
        "frames": 15, "hard": False, "max-icas-per-patient": 1,
    })
    cfg = SynthConfig(
        n_sequences=int(resolved["n"]),
        positive_ratio=float(resolved["positive-ratio"]),
        image_size=int(resolved["image-size"]),
        frames_per_sequence=int(resolved["frames"]),
        seed=int(resolved["seed"]),
        max_icas_per_patient=int(resolved["max-icas-per-patient"]),
    )
    if resolved["hard"]:
        cfg = hard_variant(cfg)
    dataset = synth_generate(cfg)
    out = Path(args.out)
    save_dataset_dir(dataset, out)
    _write_resolved(out, resolved, name="synth_config.json")
    print(f"wrote {len(dataset.samples)} sequences "
          f"({len(dataset.positives())} positive) to {out}")
    return 0


def cmd_pretrain(args):
    from cccdetect.data import load_dataset_dir
    from cccdetect.training import PretrainConfig, pretrain_segmentation

    file_cfg = _load_config_file(args.config)
    resolved = _resolve(args, file_cfg, {
        "seed": 0, "epochs": 100, "learning-rate": 0.0001, "batch-size": 4, "data": None, "out": None,
    })
    if not resolved["data"] or not resolved["out"]:
        raise CliError("pretrain requires --data and --out")
    samples = load_dataset_dir(resolved["data"])
    pairs = [(s.sequence, s.centerlines) for s in samples if s.centerlines is not None]
    if not pairs:
        raise CliError(f"no sequences with centerlines under {resolved['data']}")
    cfg = PretrainConfig(
        epochs=int(resolved["epochs"]),
        learning_rate=float(resolved["learning-rate"]),
        batch_size=int(resolved["batch-size"]),
        seed=int(resolved["seed"]),
    )
    result = pretrain_segmentation(pairs, cfg)
    out = Path(resolved["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_resolved(out, resolved)
    ckpt = result.model.save(out / "segmentation.ckpt", {
        "seed": cfg.seed, "epochs": result.best_epoch,
        "config_hash": _hash_dict(resolved),
    })
    (out / "pretrain_result.json").write_text(json.dumps({
        "best_epoch": result.best_epoch,
        "val_losses": result.val_losses,
        "test_dice": result.test_dice,
        "test_sensitivity": result.test_sensitivity,
        "test_specificity": result.test_specificity,
        "split": result.split,
    }, indent=2) + "\n")
    print(f"pretrained: best epoch {result.best_epoch}, "
          f"test dice {result.test_dice:.3f} "
          f"(sens {result.test_sensitivity:.3f}, spec {result.test_specificity:.3f})")
    print(f"checkpoint: {ckpt}")
    return 0


_TRAIN_KEYS = {
    "seed": 0, "epochs": 100, "learning-rate": 0.0001, "batch-size": 4,
    "mode": "fsl", "freeze": "frozen", "pretrained": None, "data": None, "out": None,
    "k": 4, "k-shot": 5, "n-query": 5, "episodes-per-epoch": 100,
}

_FREEZE_ALIASES = {
    "none": "none",
    "unfrozen": "pretrained_unfrozen",
    "pretrained_unfrozen": "pretrained_unfrozen",
    "frozen": "pretrained_frozen",
    "pretrained_frozen": "pretrained_frozen",
}


def _train_setup(resolved):
    from cccdetect.data import load_dataset_dir
    from cccdetect.nn import load_checkpoint
    from cccdetect.training import EpisodeConfig, TrainConfig

    if not resolved["data"] or not resolved["out"]:
        raise CliError("--data and --out are required")
    freeze = _FREEZE_ALIASES.get(resolved["freeze"])
    if freeze is None:
        raise CliError(f"freeze must be one of {sorted(set(_FREEZE_ALIASES))}, got {resolved['freeze']!r}")
    if resolved["mode"] not in ("vanilla", "fsl"):
        raise CliError(f"mode must be vanilla or fsl, got {resolved['mode']!r}")
    ckpt = None
    if resolved["pretrained"]:
        ckpt = load_checkpoint(resolved["pretrained"])
    elif freeze != "none":
        raise CliError(f"freeze={resolved['freeze']} requires --pretrained <checkpoint>")
    samples = load_dataset_dir(resolved["data"])
    cfg = TrainConfig(
        epochs=int(resolved["epochs"]),
        learning_rate=float(resolved["learning-rate"]),
        batch_size=int(resolved["batch-size"]),
        seed=int(resolved["seed"]),
        mode=resolved["mode"],
        freeze=freeze,
    )
    ep_cfg = EpisodeConfig(
        k_shot=int(resolved["k-shot"]),
        n_query=int(resolved["n-query"]),
        episodes_per_epoch=int(resolved["episodes-per-epoch"]),
    )
    return samples, cfg, ep_cfg, ckpt


def cmd_crossval(args):
    from cccdetect.training import run_crossval, write_run_dir

    file_cfg = _load_config_file(args.config)
    resolved = _resolve(args, file_cfg, _TRAIN_KEYS)
    samples, cfg, ep_cfg, ckpt = _train_setup(resolved)
    result = run_crossval(samples, cfg, k=int(resolved["k"]), ep_cfg=ep_cfg, pretrained=ckpt)
    out = write_run_dir(result, resolved["out"], resolved)
    m = result.metrics
    print(f"crossval done: selected epoch {result.selected_epoch}, "
          f"accuracy {m.accuracy:.3f}, sensitivity {m.sensitivity:.3f}, "
          f"specificity {m.specificity:.3f}")
    print(f"run directory: {out}")
    return 0


def cmd_train(args):
    from cccdetect.models import CccClassifier, apply_freeze, load_pretrained
    from cccdetect.training import build_clips, train_fsl, train_vanilla
    from cccdetect.training.classify import FrozenFeatureCache
    from cccdetect.models import SegmentationModel

    file_cfg = _load_config_file(args.config)
    resolved = _resolve(args, file_cfg, _TRAIN_KEYS)
    samples, cfg, ep_cfg, ckpt = _train_setup(resolved)
    seg_model = SegmentationModel.from_checkpoint(ckpt) if ckpt is not None else None
    clips = build_clips(samples, seg_model=seg_model)
    model = CccClassifier(seed=cfg.seed)
    if ckpt is not None and cfg.freeze != "none":
        load_pretrained(model, ckpt)
    apply_freeze(model, cfg.freeze)
    cache = FrozenFeatureCache() if cfg.freeze == "pretrained_frozen" else None
    if cfg.mode == "vanilla":
        history = train_vanilla(model, clips, cfg, feature_cache=cache)
    else:
        history = train_fsl(model, clips, cfg, ep_cfg, feature_cache=cache)
    out = Path(resolved["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_resolved(out, resolved)
    model.save(out / "classifier.ckpt", {
        "seed": cfg.seed, "epochs": cfg.epochs, "config_hash": _hash_dict(resolved)})
    payload = {"train_losses": history.train_losses}
    if cfg.mode == "fsl":
        payload["prototypes"] = {k: [float(x) for x in v]
                                 for k, v in history.prototypes[-1].items()}
    (out / "train_result.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(f"trained {cfg.mode} ({cfg.freeze}) for {cfg.epochs} epochs; "
          f"final loss {history.train_losses[-1]:.5f}")
    return 0


def cmd_evaluate(args):
    from cccdetect.evaluation import confusion, metrics
    from cccdetect.report import emit_report

    run = Path(args.run)
    result_path = run / "result.json"
    if not result_path.exists():
        raise CliError(f"no result.json under {run}")
    result = json.loads(result_path.read_text())
    rows_csv = (run / "predictions.csv").read_text().splitlines()[1:]
    selected = int(result["selected_epoch"])
    preds = []
    for line in rows_csv:
        ica_id, epoch, fold, prob, label = line.split(",")
        if int(epoch) == selected:
            preds.append((float(prob), int(label)))
    report = metrics(confusion(preds))
    out = Path(args.out) if args.out else run / "report"
    row = {
        "model": result.get("mode", "?"),
        "pretrain": result.get("freeze", "none") != "none",
        "freeze": result.get("freeze") == "pretrained_frozen",
        "metrics": report,
    }
    written = emit_report([row], out, epoch_accuracy=result.get("epoch_accuracy"))
    print(f"accuracy {report.accuracy:.3f}, sensitivity {report.sensitivity:.3f}, "
          f"specificity {report.specificity:.3f}")
    print(f"report files: {', '.join(str(p) for p in written)}")
    return 0


def cmd_subgroups(args):
    from cccdetect.data import load_dataset_dir
    from cccdetect.evaluation import subgroup_sensitivity
    from cccdetect.report import emit_report
    from cccdetect.evaluation import confusion, metrics

    run = Path(args.run)
    result = json.loads((run / "result.json").read_text())
    selected = int(result["selected_epoch"])
    samples = load_dataset_dir(args.data)
    ann_by_ica = {s.sequence.ica_id: s.annotation for s in samples}
    positive_preds = []
    all_preds = []
    for line in (run / "predictions.csv").read_text().splitlines()[1:]:
        ica_id, epoch, fold, prob, label = line.split(",")
        if int(epoch) != selected:
            continue
        all_preds.append((float(prob), int(label)))
        if int(label) == 1:
            positive_preds.append((ica_id, float(prob), ann_by_ica.get(ica_id)))
    subgroups = [subgroup_sensitivity(positive_preds, g)
                 for g in ("rentrop", "flow_grade", "size_tercile")]
    out = Path(args.out) if args.out else run / "subgroups"
    row = {
        "model": result.get("mode", "?"),
        "pretrain": result.get("freeze", "none") != "none",
        "freeze": result.get("freeze") == "pretrained_frozen",
        "metrics": metrics(confusion(all_preds)),
    }
    written = emit_report([row], out, subgroups=subgroups)
    for sg in subgroups:
        parts = ", ".join(f"{label}: n={n} sens={s:.2f}" for label, n, s in sg.groups)
        print(f"{sg.grouping}: {parts}")
    print(f"report files: {', '.join(str(p) for p in written)}")
    return 0


def cmd_grad_check(args):
    from cccdetect.acceptance_checks import layer_grad_check_suite

    seed = args.seed if args.seed is not None else 0
    n_seeds = args.seeds if args.seeds is not None else 20
    failures, lines = layer_grad_check_suite(base_seed=int(seed), n_seeds=int(n_seeds))
    for line in lines:
        print(line)
    if failures:
        print(f"FAILED: {failures} gradient check(s) above tolerance")
        return 1
    print("all gradient checks passed")
    return 0


def _hash_dict(d: dict) -> str:
    import hashlib
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


# ----- parser -----

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cccdetect",
        description="Collateral-circulation detection pipeline on angiography sequences.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True):
        p.add_argument("--seed", type=int, default=None)
        if config:
            p.add_argument("--config", type=str, default=None, help="flat JSON config file")

    p = sub.add_parser("gen-synth", help="generate a synthetic dataset directory")
    add_common(p)
    p.add_argument("--n", type=int, default=None, help="number of sequences")
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--positive-ratio", dest="positive_ratio", type=float, default=None)
    p.add_argument("--image-size", dest="image_size", type=int, default=None)
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--max-icas-per-patient", dest="max_icas_per_patient", type=int, default=None)
    p.add_argument("--hard", action="store_true", default=None,
                   help="harder variant: more noise, thinner collaterals")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("pretrain", help="segmentation pretraining on centerline masks")
    add_common(p)
    p.add_argument("--data", type=str, default=None)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.set_defaults(func=cmd_pretrain)

    for name, fn, help_text in (
            ("train", cmd_train, "train one classifier on the full dataset"),
            ("crossval", cmd_crossval, "patient-level k-fold cross-validation")):
        p = sub.add_parser(name, help=help_text)
        add_common(p)
        p.add_argument("--data", type=str, default=None)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--mode", choices=["vanilla", "fsl"], default=None)
        p.add_argument("--freeze", choices=sorted(set(_FREEZE_ALIASES)), default=None)
        p.add_argument("--pretrained", type=str, default=None, help="segmentation checkpoint")
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
        p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
        p.add_argument("--k", type=int, default=None, help="number of folds")
        p.add_argument("--k-shot", dest="k_shot", type=int, default=None)
        p.add_argument("--n-query", dest="n_query", type=int, default=None)
        p.add_argument("--episodes-per-epoch", dest="episodes_per_epoch", type=int, default=None)
        p.set_defaults(func=fn)

    p = sub.add_parser("evaluate", help="metrics report from a crossval run directory")
    p.add_argument("--run", type=str, required=True)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("subgroups", help="subgroup sensitivity analyses for a run")
    p.add_argument("--run", type=str, required=True)
    p.add_argument("--data", type=str, required=True)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=cmd_subgroups)

    p = sub.add_parser("grad-check", help="finite-difference checks for every layer")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--seeds", type=int, default=None, help="number of random seeds (default 20)")
    p.set_defaults(func=cmd_grad_check)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
