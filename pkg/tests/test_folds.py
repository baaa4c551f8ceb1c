import numpy as np
import pytest

from cccdetect.data import ValidationError, patient_kfold


class TestPatientKfold:
    def test_even_division(self):
        fa = patient_kfold([f"P{i}" for i in range(8)], k=4, seed=0)
        assert sorted(fa.fold_sizes()) == [2, 2, 2, 2]

    def test_nine_patients_round_robin(self):
        fa = patient_kfold([f"P{i}" for i in range(9)], k=4, seed=1)
        assert sorted(fa.fold_sizes()) == [2, 2, 2, 3]

    def test_icas_follow_their_patient(self):
        # a patient with 3 ICAs resolves each ICA to the same fold by construction
        fa = patient_kfold([("A", 3), ("B", 1), ("C", 2), ("D", 1)], k=4, seed=2)
        icas = [("A", "A-I0"), ("A", "A-I1"), ("A", "A-I2")]
        folds = {fa.fold_of(p) for p, _ in icas}
        assert len(folds) == 1

    def test_partition_property(self):
        patients = [f"P{i}" for i in range(17)]
        fa = patient_kfold(patients, k=4, seed=3)
        assert sorted(fa.by_patient) == sorted(patients)
        assert set(fa.by_patient.values()) <= set(range(4))

    def test_same_seed_same_assignment(self):
        patients = [f"P{i}" for i in range(12)]
        a = patient_kfold(patients, k=4, seed=9)
        b = patient_kfold(patients, k=4, seed=9)
        assert a.by_patient == b.by_patient

    def test_input_order_irrelevant(self):
        patients = [f"P{i}" for i in range(12)]
        a = patient_kfold(patients, k=4, seed=5)
        b = patient_kfold(list(reversed(patients)), k=4, seed=5)
        assert a.by_patient == b.by_patient

    def test_too_few_patients(self):
        with pytest.raises(ValidationError, match="at least"):
            patient_kfold(["A", "B", "C"], k=4, seed=0)

    def test_duplicate_patients_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            patient_kfold(["A", "A", "B", "C"], k=2, seed=0)

    def test_property_suite_100_random_datasets(self):
        # partition, <=1 size spread, determinism
        rng = np.random.default_rng(123)
        for trial in range(100):
            n = int(rng.integers(4, 60))
            k = int(rng.integers(2, min(n, 8) + 1))
            seed = int(rng.integers(0, 10_000))
            patients = [f"P{i:03d}" for i in range(n)]
            fa = patient_kfold(patients, k=k, seed=seed)
            fb = patient_kfold(patients, k=k, seed=seed)
            assert fa.by_patient == fb.by_patient
            assert sorted(fa.by_patient) == patients
            sizes = fa.fold_sizes()
            assert sum(sizes) == n
            assert max(sizes) - min(sizes) <= 1
