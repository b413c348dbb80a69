import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from phosphor import (
    Category,
    StimulusCatalog,
    StimulusClip,
    generate_synthetic_catalog,
    generate_synthetic_clip,
    load_catalog,
    load_clip_frames,
    save_catalog,
)
from phosphor.errors import CategoryImbalance, ManifestParse, MissingFrames
from phosphor.scene import LABEL_BACKGROUND, LABEL_CAR, LABEL_PERSON, SURFACE_LABELS


def dir_hash(d: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(d.rglob("*")):
        if p.is_file():
            h.update(p.name.encode())
            h.update(p.read_bytes())
    return h.hexdigest()


class TestCategory:
    def test_ground_truth_mapping(self):
        assert not Category.N.has_people and not Category.N.has_cars
        assert not Category.C.has_people and Category.C.has_cars
        assert Category.CP.has_people and Category.CP.has_cars
        assert Category.P.has_people and not Category.P.has_cars


class TestClipValidation:
    def test_inconsistent_ground_truth_rejected(self):
        with pytest.raises(ManifestParse):
            StimulusClip(clip_id="x", frame_dir="x", fps=25.0, duration_s=5.0,
                         category=Category.C, has_people=True, has_cars=True)

    def test_n_frames(self):
        clip = StimulusClip(clip_id="x", frame_dir="x", fps=25.0, duration_s=5.0,
                            category=Category.N, has_people=False, has_cars=False)
        assert clip.n_frames == 125


class TestCatalog:
    def test_balanced(self, balanced_catalog):
        assert balanced_catalog.balanced
        assert len(balanced_catalog.clips) == 16

    def test_unbalanced(self, balanced_catalog):
        assert not StimulusCatalog(clips=balanced_catalog.clips[:15]).balanced

    def test_clip_lookup(self, balanced_catalog):
        assert balanced_catalog.clip("CP_01").category == Category.CP
        with pytest.raises(KeyError):
            balanced_catalog.clip("nope")

    def test_save_load_round_trip(self, tmp_path, balanced_catalog):
        path = tmp_path / "catalog.json"
        save_catalog(balanced_catalog, path)
        back = load_catalog(path, check_frames=False)
        assert back == balanced_catalog

    def test_imbalance_rejected_on_load(self, tmp_path, balanced_catalog):
        path = tmp_path / "catalog.json"
        save_catalog(StimulusCatalog(clips=balanced_catalog.clips[:15]), path)
        with pytest.raises(CategoryImbalance):
            load_catalog(path, check_frames=False)

    def test_garbage_manifest(self, tmp_path):
        path = tmp_path / "catalog.json"
        path.write_text('{"clips": [{"bogus": 1}]}')
        with pytest.raises(ManifestParse):
            load_catalog(path, check_frames=False)

    def test_missing_frames_detected(self, tmp_path, balanced_catalog):
        path = tmp_path / "catalog.json"
        save_catalog(balanced_catalog, path)
        with pytest.raises(MissingFrames):
            load_catalog(path)


class TestSyntheticClips:
    @pytest.fixture
    def root(self, tmp_path):
        return tmp_path

    def test_n_clip_labels(self, root):
        from phosphor import pnm

        generate_synthetic_clip(Category.N, 3, root / "n", fps=5.0, duration_s=0.6,
                                frame_size=(32, 32))
        labels = np.concatenate([
            pnm.read_pgm(p).ravel()
            for p in sorted((root / "n").glob("labels_*.pgm"))
        ])
        assert set(np.unique(labels)) <= {LABEL_BACKGROUND, *SURFACE_LABELS}

    def test_cp_clip_has_both_objects(self, root):
        generate_synthetic_clip(Category.CP, 3, root / "cp", fps=5.0, duration_s=1.0,
                                frame_size=(48, 48))
        from phosphor import pnm

        frames = sorted((root / "cp").glob("labels_*.pgm"))
        with_both = sum(
            1 for p in frames
            if {LABEL_CAR, LABEL_PERSON} <= set(np.unique(pnm.read_pgm(p)))
        )
        assert with_both >= 0.9 * len(frames)

    def test_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        generate_synthetic_clip(Category.CP, 11, a, fps=5.0, duration_s=0.4,
                                frame_size=(32, 32))
        generate_synthetic_clip(Category.CP, 11, b, fps=5.0, duration_s=0.4,
                                frame_size=(32, 32))
        assert dir_hash(a) == dir_hash(b)

    def test_catalog_generation(self, tmp_path):
        catalog = generate_synthetic_catalog(tmp_path / "set", seed=2, fps=5.0,
                                             duration_s=0.4, frame_size=(32, 32))
        assert catalog.balanced
        back = load_catalog(tmp_path / "set" / "catalog.json", standard_design=False)
        assert back == catalog

    def test_load_clip_frames(self, tmp_path):
        clip = generate_synthetic_clip(Category.C, 5, tmp_path / "c", fps=5.0,
                                       duration_s=0.6, frame_size=(32, 32))
        save_catalog(StimulusCatalog(clips=(clip,)), tmp_path / "catalog.json")
        pairs = list(load_clip_frames(tmp_path / "catalog.json", clip))
        assert len(pairs) == clip.n_frames
        frame, aux = pairs[0]
        assert frame.shape == (32, 32)
        assert aux.depth is not None and aux.labels is not None
        assert aux.saliency is not None
        assert LABEL_CAR in np.unique(aux.labels)
