"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from cccdetect.nn.optim import Parameter

FD_STEP = 1e-3
ABS_FLOOR = 1e-4


@dataclass
class GradCheckReport:
    tolerance: float
    per_param: dict = field(default_factory=dict)  # name -> (max_rel_err, passed)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok in self.per_param.values())

    def lines(self):
        for name, (err, ok) in self.per_param.items():
            yield f"{'PASS' if ok else 'FAIL'}  {name:<32s} max_rel_err={err:.3e}"


def _rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), ABS_FLOOR)


def grad_check(
    loss_and_grad: Callable[[np.ndarray], float],
    params: Sequence[Parameter],
    x: np.ndarray,
    tolerance: float = 1e-2,
    fd_step: float = FD_STEP,
    sample_per_param: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare analytic parameter gradients with central finite differences.

    ``loss_and_grad(x)`` must deterministically return a scalar loss and
    leave each parameter's ``grad`` populated.  During the check every
    parameter value is swapped for a float64 copy so finite differences
    evaluate at 64-bit precision (the layers pass float64 through); the
    analytic gradients come from the same closure at the unperturbed
    point.  ``sample_per_param`` optionally limits the check to a seeded
    subset of entries per parameter (all entries when None).
    """
    loss0 = loss_and_grad(x)
    if not np.isfinite(loss0):
        raise ValueError(f"grad_check: loss is not finite ({loss0})")
    analytic = {p.name: p.grad.astype(np.float64) for p in params}

    originals = [p.value for p in params]
    for p in params:
        p.value = p.value.astype(np.float64)
    try:
        rng = np.random.default_rng(seed)
        report = GradCheckReport(tolerance=tolerance)
        for p in params:
            flat_value = p.value.reshape(-1)
            flat_analytic = analytic[p.name].reshape(-1)
            n_entries = flat_value.size
            if sample_per_param is not None and sample_per_param < n_entries:
                entries = rng.choice(n_entries, size=sample_per_param, replace=False)
                entries.sort()
            else:
                entries = range(n_entries)
            max_err = 0.0
            for i in entries:
                orig = flat_value[i]
                flat_value[i] = orig + fd_step
                loss_plus = loss_and_grad(x)
                flat_value[i] = orig - fd_step
                loss_minus = loss_and_grad(x)
                flat_value[i] = orig
                if not (np.isfinite(loss_plus) and np.isfinite(loss_minus)):
                    raise ValueError(f"grad_check: non-finite loss while perturbing {p.name}[{i}]")
                numeric = (float(loss_plus) - float(loss_minus)) / (2.0 * fd_step)
                max_err = max(max_err, _rel_err(float(flat_analytic[i]), numeric))
            report.per_param[p.name] = (max_err, max_err <= tolerance)
    finally:
        for p, orig in zip(params, originals):
            p.value = orig
    # restore analytic grads for the caller
    loss_and_grad(x)
    return report
