import json

import numpy as np
import numpy.testing as npt
import pytest

from cccdetect.data import (
    CenterlineSet,
    SynthConfig,
    ValidationError,
    load_centerline_file,
    load_dataset_dir,
    load_sequence_dir,
    parse_annotation_file,
    save_dataset_dir,
    save_sequence_dir,
    synth_generate,
    write_annotation_file,
    write_centerline_file,
)

from test_clips import make_ann, make_seq


class TestSequenceStore:
    def test_round_trip(self, tmp_path):
        seq = make_seq(12)
        # land exactly on the 8-bit grid so the round trip is lossless
        seq.frames = np.round(seq.frames * 255.0) / 255.0
        save_sequence_dir(seq, tmp_path)
        loaded = load_sequence_dir(tmp_path / seq.ica_id)
        assert loaded.patient_id == seq.patient_id
        assert loaded.ica_id == seq.ica_id
        npt.assert_allclose(loaded.frames, seq.frames, atol=1e-7)

    def test_manifest_fields(self, tmp_path):
        seq = make_seq(11)
        seq.pixel_spacing_mm = 0.35
        out = save_sequence_dir(seq, tmp_path)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["frame_count"] == 11
        assert manifest["height"] == 8 and manifest["width"] == 8
        assert manifest["pixel_spacing_mm"] == 0.35

    def test_dimension_mismatch_names_frame(self, tmp_path):
        seq = make_seq(11)
        out = save_sequence_dir(seq, tmp_path)
        manifest = json.loads((out / "manifest.json").read_text())
        manifest["height"] = 9
        (out / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(ValidationError, match="frame 0"):
            load_sequence_dir(out)


class TestAnnotationFile:
    def test_round_trip_structural_identity(self, tmp_path):
        anns = [make_ann(5), make_ann(7, patient="P2", ica="P2-I0")]
        path = write_annotation_file(anns, tmp_path / "annotations.json")
        loaded = parse_annotation_file(path)
        assert loaded == anns

    def test_flow_grade_out_of_range_names_field(self, tmp_path):
        ann = make_ann(5)
        ann.flow_grade = 5
        path = write_annotation_file([ann], tmp_path / "a.json")
        with pytest.raises(ValidationError, match="flow_grade 5 outside 1..4"):
            parse_annotation_file(path)

    def test_missing_field_names_record(self, tmp_path):
        records = json.loads(write_annotation_file([make_ann(5)], tmp_path / "a.json").read_text())
        del records[0]["rentrop_grade"]
        (tmp_path / "b.json").write_text(json.dumps(records))
        with pytest.raises(ValidationError, match="record 0.*rentrop_grade"):
            parse_annotation_file(tmp_path / "b.json")

    def test_rentrop_counts_preserved(self, tmp_path):
        grades = [1, 2, 3, 3, 2, 3]
        anns = []
        for i, g in enumerate(grades):
            a = make_ann(5, patient=f"P{i}", ica=f"P{i}-I0")
            a.rentrop_grade = g
            anns.append(a)
        path = write_annotation_file(anns, tmp_path / "a.json")
        loaded = parse_annotation_file(path)
        assert sum(1 for a in loaded if a.rentrop_grade == 3) == 3
        assert [a.rentrop_grade for a in loaded] == grades

    def test_landmark_outside_image_with_index(self, tmp_path):
        ann = make_ann(5)
        ann.landmarks["donor"] = (99.0, 1.0)
        path = write_annotation_file([ann], tmp_path / "a.json")
        index = {("P1", "P1-I0"): (20, 8, 8)}
        with pytest.raises(ValidationError, match="donor.*outside"):
            parse_annotation_file(path, sequence_index=index)

    def test_frame_index_out_of_bounds_with_index(self, tmp_path):
        ann = make_ann(25)
        path = write_annotation_file([ann], tmp_path / "a.json")
        index = {("P1", "P1-I0"): (20, 8, 8)}
        with pytest.raises(ValidationError, match="frame_index 25"):
            parse_annotation_file(path, sequence_index=index)


class TestCenterlineFile:
    def test_round_trip(self, tmp_path):
        cl = CenterlineSet([[(1.0, 2.0, 0.5), (3.5, 4.25, 1.5)], [(0.0, 0.0, 2.0), (5.0, 5.0, 2.0)]])
        path = write_centerline_file(cl, tmp_path / "cl.json")
        loaded = load_centerline_file(path)
        assert len(loaded) == 2
        for a, b in zip(cl.polylines, loaded.polylines):
            npt.assert_array_equal(a, b)


class TestDatasetDir:
    def test_save_load_round_trip(self, tmp_path):
        ds = synth_generate(SynthConfig(n_sequences=4, positive_ratio=0.5, image_size=32,
                                        frames_per_sequence=11, seed=2))
        root = save_dataset_dir(ds, tmp_path / "data")
        samples = load_dataset_dir(root)
        assert len(samples) == 4
        by_ica = {s.sequence.ica_id: s for s in ds.samples}
        for loaded in samples:
            orig = by_ica[loaded.sequence.ica_id]
            npt.assert_allclose(loaded.sequence.frames, orig.sequence.frames, atol=1e-7)
            assert (loaded.annotation is None) == (orig.annotation is None)
            assert len(loaded.centerlines) == len(orig.centerlines)
            # synth render metadata survives the manifest round trip
            assert loaded.sequence.meta["synth"]["alpha"] == orig.sequence.meta["synth"]["alpha"]

    def test_write_twice_byte_identical(self, tmp_path):
        ds = synth_generate(SynthConfig(n_sequences=3, positive_ratio=0.4, image_size=32,
                                        frames_per_sequence=11, seed=8))
        r1 = save_dataset_dir(ds, tmp_path / "d1")
        r2 = save_dataset_dir(ds, tmp_path / "d2")
        files1 = sorted(p.relative_to(r1) for p in r1.rglob("*") if p.is_file())
        files2 = sorted(p.relative_to(r2) for p in r2.rglob("*") if p.is_file())
        assert files1 == files2
        for rel in files1:
            assert (r1 / rel).read_bytes() == (r2 / rel).read_bytes(), rel
