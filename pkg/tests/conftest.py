import time

import pytest

# criterion name -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE_RESULTS = {}


def record_criterion(name, passed, detail):
    ACCEPTANCE_RESULTS[name] = (bool(passed), detail)
    line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    print(line)
    return passed


@pytest.fixture(scope="session")
def seg_pretraining(tmp_path_factory):
    """Shared segmentation pretraining run at the acceptance scale:
    504 frames (42 sequences x 12) at 64x64, seed 7."""
    from cccdetect.data import SynthConfig, synth_generate
    from cccdetect.nn import load_checkpoint
    from cccdetect.training import PretrainConfig, pretrain_segmentation

    dataset = synth_generate(SynthConfig(
        n_sequences=42, positive_ratio=0.0, image_size=64,
        frames_per_sequence=12, seed=7))
    pairs = [(s.sequence, s.centerlines) for s in dataset.samples]
    cfg = PretrainConfig(epochs=10, seed=7)
    start = time.monotonic()
    result = pretrain_segmentation(pairs, cfg)
    elapsed = time.monotonic() - start
    ckpt_path = tmp_path_factory.mktemp("ckpt") / "segmentation.ckpt"
    result.model.save(ckpt_path, {"seed": cfg.seed, "epochs": result.best_epoch,
                                  "config_hash": "acceptance"})
    return {
        "result": result,
        "elapsed_s": elapsed,
        "checkpoint": load_checkpoint(ckpt_path),
        "checkpoint_path": ckpt_path,
        "n_frames": sum(s.sequence.frame_count for s in dataset.samples),
    }


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, (passed, detail) in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
