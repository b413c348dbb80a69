"""Stimulus catalog management and the synthetic clip generator.

The standard catalog design holds 16 five-second clips balanced over four
categories: N (neither people nor cars), C (cars only), P (people only), and
CP (both).  Real campus footage is referenced by manifest and never bundled;
``generate_synthetic_clip`` renders moving textured rectangles with exact
label/depth maps so the whole pipeline can run hermetically.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import pnm, scene
from .errors import CategoryImbalance, ManifestParse, MissingFrames


class Category(enum.Enum):
    N = "N"
    C = "C"
    CP = "CP"
    P = "P"

    @property
    def has_people(self) -> bool:
        return self in (Category.P, Category.CP)

    @property
    def has_cars(self) -> bool:
        return self in (Category.C, Category.CP)


@dataclass(frozen=True)
class StimulusClip:
    clip_id: str
    frame_dir: str
    fps: float
    duration_s: float
    category: Category
    has_people: bool
    has_cars: bool

    def __post_init__(self):
        if (self.has_people, self.has_cars) != (
            self.category.has_people,
            self.category.has_cars,
        ):
            raise ManifestParse(
                f"clip {self.clip_id}: ground truth inconsistent with category "
                f"{self.category.value}"
            )

    @property
    def n_frames(self) -> int:
        return int(round(self.fps * self.duration_s))


@dataclass(frozen=True)
class StimulusCatalog:
    clips: tuple[StimulusClip, ...]

    @property
    def balanced(self) -> bool:
        """True for the standard design: 16 clips, 4 per category."""
        if len(self.clips) != 16:
            return False
        counts = {c: 0 for c in Category}
        for clip in self.clips:
            counts[clip.category] += 1
        return all(v == 4 for v in counts.values())

    def clip(self, clip_id: str) -> StimulusClip:
        for c in self.clips:
            if c.clip_id == clip_id:
                return c
        raise KeyError(clip_id)

    def to_json(self) -> dict:
        return {
            "clips": [
                {
                    "clip_id": c.clip_id,
                    "dir": c.frame_dir,
                    "fps": c.fps,
                    "duration_s": c.duration_s,
                    "category": c.category.value,
                    "has_people": c.has_people,
                    "has_cars": c.has_cars,
                }
                for c in self.clips
            ]
        }


def save_catalog(catalog: StimulusCatalog, path) -> None:
    Path(path).write_text(json.dumps(catalog.to_json(), indent=2))


def load_catalog(path, standard_design: bool = True, check_frames: bool = True) -> StimulusCatalog:
    """Load and validate a catalog manifest.

    With ``standard_design`` the 16-clip / 4-per-category balance and the 5 s
    duration are enforced.  ``check_frames`` verifies each frame directory
    exists and holds fps*duration frames.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
        clips = tuple(
            StimulusClip(
                clip_id=entry["clip_id"],
                frame_dir=entry["dir"],
                fps=float(entry["fps"]),
                duration_s=float(entry["duration_s"]),
                category=Category(entry["category"]),
                has_people=bool(entry["has_people"]),
                has_cars=bool(entry["has_cars"]),
            )
            for entry in raw["clips"]
        )
    except ManifestParse:
        raise
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ManifestParse(f"cannot parse catalog {path}: {exc}") from exc
    catalog = StimulusCatalog(clips=clips)
    if standard_design:
        if not catalog.balanced:
            raise CategoryImbalance(
                f"standard design needs 16 clips, 4 per category; got {len(clips)}"
            )
        for clip in clips:
            if clip.duration_s != 5.0:
                raise ManifestParse(f"clip {clip.clip_id}: standard-design clips last 5 s")
    if check_frames:
        for clip in clips:
            frame_dir = path.parent / clip.frame_dir
            if not frame_dir.is_dir():
                raise MissingFrames(f"clip {clip.clip_id}: missing directory {frame_dir}")
            n_found = len(sorted(frame_dir.glob("frame_*.pgm"))) + len(
                sorted(frame_dir.glob("frame_*.ppm"))
            )
            if n_found != clip.n_frames:
                raise MissingFrames(
                    f"clip {clip.clip_id}: expected {clip.n_frames} frames, found {n_found}"
                )
    return catalog


# ---------------------------------------------------------------------------
# synthetic stimuli


def _background(height: int, width: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Static gradient scene with a road band and sidewalk band.

    Returns (pixels, labels, depth); depth grows with image height (top rows
    are farthest).
    """
    rows = np.arange(height)[:, None]
    pixels = np.broadcast_to(60.0 + 80.0 * rows / max(height - 1, 1), (height, width)).copy()
    labels = np.zeros((height, width), dtype=np.uint8)
    road_top = int(height * 0.65)
    walk_top = int(height * 0.55)
    labels[road_top:, :] = scene.LABEL_ROAD
    labels[walk_top:road_top, :] = scene.LABEL_SIDEWALK
    pixels[road_top:, :] = 90.0
    pixels[walk_top:road_top, :] = 140.0
    depth = np.broadcast_to(20.0 + 60.0 * (1.0 - rows / max(height - 1, 1)), (height, width)).copy()
    return pixels, labels, depth


def _object_track(rng, kind: str, height: int, width: int, n_frames: int):
    """Seeded ping-pong motion track and box size for one object."""
    if kind == "car":
        h = max(int(height * 0.16), 4)
        w = max(int(h * 2.2), int(1.8 * h) + 1)  # wide: aspect >= 1.8
        speed = rng.uniform(1.5, 2.5)
        y0 = int(height * 0.62)
    else:
        h = max(int(height * 0.30), 6)
        w = max(int(h * 0.5), 2)  # tall: aspect <= 0.6
        speed = rng.uniform(0.4, 0.9)
        y0 = int(height * 0.45)
    x0 = rng.integers(0, max(width - w, 1))
    direction = 1 if rng.random() < 0.5 else -1
    xs = []
    x = float(x0)
    for _ in range(n_frames):
        xs.append(int(round(x)))
        x += direction * speed
        if x < 0 or x > width - w:
            direction *= -1
            x = min(max(x, 0.0), float(width - w))
    texture = rng.uniform(170, 250, size=(h, w))
    return xs, y0, h, w, texture


def generate_synthetic_clip(
    category: Category,
    seed: int,
    out_dir,
    fps: float = 25.0,
    duration_s: float = 5.0,
    frame_size: tuple[int, int] = (64, 64),
    clip_id: str | None = None,
) -> StimulusClip:
    """Render a deterministic synthetic clip with exact aux maps on disk.

    Cars are wide boxes in horizontal motion on the road; people are tall,
    slower boxes.  Objects stay fully in frame, so the category ground truth
    holds on every frame.  Emits frame/labels PGMs and depth/saliency PFMs.
    """
    category = Category(category)
    height, width = frame_size
    n_frames = int(round(fps * duration_s))
    rng = np.random.default_rng(seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    bg_pixels, bg_labels, bg_depth = _background(height, width)
    objects = []
    if category.has_cars:
        objects.append(("car", scene.LABEL_CAR, 12.0, _object_track(rng, "car", height, width, n_frames)))
    if category.has_people:
        objects.append(("person", scene.LABEL_PERSON, 10.0, _object_track(rng, "person", height, width, n_frames)))

    for t in range(n_frames):
        pixels = bg_pixels.copy()
        labels = bg_labels.copy()
        depth = bg_depth.copy()
        for _, label, obj_depth, (xs, y0, h, w, texture) in objects:
            x = xs[t]
            y1 = min(y0 + h, height)
            pixels[y0:y1, x : x + w] = texture[: y1 - y0]
            labels[y0:y1, x : x + w] = label
            depth[y0:y1, x : x + w] = obj_depth
        saliency = scene.fallback_saliency(pixels)
        pnm.write_pgm(pnm.frame_path(out_dir, "frame", t, "pgm"), pixels.astype(np.uint8))
        pnm.write_pgm(pnm.frame_path(out_dir, "labels", t, "pgm"), labels)
        pnm.write_pfm(pnm.frame_path(out_dir, "depth", t, "pfm"), depth)
        pnm.write_pfm(pnm.frame_path(out_dir, "saliency", t, "pfm"), saliency)

    if clip_id is None:
        clip_id = f"{category.value}_{seed:04d}"
    return StimulusClip(
        clip_id=clip_id,
        frame_dir=out_dir.name,
        fps=fps,
        duration_s=duration_s,
        category=category,
        has_people=category.has_people,
        has_cars=category.has_cars,
    )


def generate_synthetic_catalog(
    root,
    seed: int = 0,
    fps: float = 25.0,
    duration_s: float = 5.0,
    frame_size: tuple[int, int] = (64, 64),
) -> StimulusCatalog:
    """16 balanced synthetic clips plus a catalog.json under ``root``."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    clips = []
    counter = 0
    for category in (Category.N, Category.C, Category.CP, Category.P):
        for k in range(4):
            clip_seed = seed * 1000 + counter
            clip_id = f"{category.value}_{k:02d}"
            clip = generate_synthetic_clip(
                category,
                clip_seed,
                root / clip_id,
                fps=fps,
                duration_s=duration_s,
                frame_size=frame_size,
                clip_id=clip_id,
            )
            clips.append(clip)
            counter += 1
    catalog = StimulusCatalog(clips=tuple(clips))
    save_catalog(catalog, root / "catalog.json")
    return catalog


def load_clip_frames(catalog_path, clip: StimulusClip):
    """Yield (frame, AuxMaps) pairs for every frame of a clip."""
    base = Path(catalog_path).parent / clip.frame_dir
    for t in range(clip.n_frames):
        frame = pnm.read_image(pnm.frame_path(base, "frame", t, "pgm"))
        labels_p = pnm.frame_path(base, "labels", t, "pgm")
        depth_p = pnm.frame_path(base, "depth", t, "pfm")
        sal_p = pnm.frame_path(base, "saliency", t, "pfm")
        aux = scene.AuxMaps(
            saliency=pnm.read_pfm(sal_p) if sal_p.exists() else None,
            depth=pnm.read_pfm(depth_p) if depth_p.exists() else None,
            labels=pnm.read_pgm(labels_p) if labels_p.exists() else None,
        )
        yield frame, aux
