"""Patient-level k-fold assignment.

All ICAs of a patient land in one fold by construction: folds are drawn
over patient ids, never over individual sequences.
"""

from __future__ import annotations

import numpy as np

from cccdetect.data.types import FoldAssignment, ValidationError


def _patient_ids(patients) -> list:
    ids = []
    for entry in patients:
        if isinstance(entry, str):
            ids.append(entry)
        else:  # (patient_id, ica_count) pairs are accepted; counts don't affect assignment
            ids.append(entry[0])
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate patient ids in fold input")
    return ids


def patient_kfold(patients, k: int, seed: int) -> FoldAssignment:
    """Seeded shuffle of patient ids followed by round-robin assignment.

    Fold sizes differ by at most one.  The shuffle runs over the sorted id
    list so the assignment is independent of input ordering.
    """
    ids = sorted(_patient_ids(patients))
    if len(ids) < k:
        raise ValidationError(f"need at least k={k} patients, got {len(ids)}")
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    rng = np.random.default_rng(seed)
    order = list(rng.permutation(len(ids)))
    by_patient = {ids[j]: pos % k for pos, j in enumerate(order)}
    return FoldAssignment(k=k, by_patient=by_patient, seed=seed)
