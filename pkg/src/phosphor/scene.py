"""Scene simplification strategies and grayscale-to-amplitude encoding.

Four per-frame transforms reduce a camera frame (plus auxiliary saliency,
depth, and semantic-label maps) to a grayscale importance image in [0, 255]:

* ``strategy_saliency``      -- linear map of the saliency map
* ``strategy_depth``         -- exponential near-to-far ramp, far 20% removed
* ``strategy_segmentation``  -- object masks, else road/sidewalk edges
* ``strategy_combination``   -- top-10% saliency OR objects, depth-scaled

``encode_amplitudes`` then box-averages the grayscale image down to the
electrode grid and normalizes to [0, 1].  The deep models that would produce
the aux maps in production are external; ``fallback_saliency`` is a classical
local-contrast stand-in so everything runs hermetically.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import MissingAuxMap, ShapeMismatch
from .render import AmplitudeFrame, ElectrodeGrid

#: semantic label ids ingested from segmentation maps
LABEL_BACKGROUND = 0
LABEL_PERSON = 1
LABEL_BICYCLE = 2
LABEL_CAR = 3
LABEL_BUS = 4
LABEL_ROAD = 10
LABEL_SIDEWALK = 11
OBJECT_LABELS = (LABEL_PERSON, LABEL_BICYCLE, LABEL_CAR, LABEL_BUS)
SURFACE_LABELS = (LABEL_ROAD, LABEL_SIDEWALK)
KNOWN_LABELS = (LABEL_BACKGROUND,) + OBJECT_LABELS + SURFACE_LABELS

#: Rec. 601 luma weights for RGB -> gray
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class Provenance(enum.Enum):
    SALIENCY = "saliency"
    DEPTH = "depth"
    SEGMENTATION = "segmentation"
    COMBINATION = "combination"


class Strategy(enum.Enum):
    SALIENCY = "saliency"
    DEPTH = "depth"
    SEGMENTATION = "segmentation"
    COMBINATION = "combination"


@dataclass(frozen=True)
class GrayFrame:
    pixels: np.ndarray  # (H, W) float in [0, 255]
    provenance: Provenance

    def __post_init__(self):
        self.pixels.setflags(write=False)


@dataclass(frozen=True)
class AuxMaps:
    """Per-frame auxiliary maps; any subset may be present."""

    saliency: np.ndarray | None = None  # [0, 1]
    depth: np.ndarray | None = None  # relative, larger = farther
    labels: np.ndarray | None = None  # integer class ids

    def __post_init__(self):
        shapes = {m.shape for m in (self.saliency, self.depth, self.labels) if m is not None}
        if len(shapes) > 1:
            raise ShapeMismatch(f"aux map shapes disagree: {shapes}")
        if self.saliency is not None and (
            np.any(self.saliency < 0) or np.any(self.saliency > 1)
        ):
            raise ValueError("saliency must lie in [0, 1]")
        if self.labels is not None and not np.isin(self.labels, KNOWN_LABELS).all():
            bad = sorted(set(np.unique(self.labels)) - set(KNOWN_LABELS))
            raise ValueError(f"unknown label ids {bad}")


def to_gray(frame: np.ndarray) -> np.ndarray:
    """RGB or grayscale frame -> float grayscale in [0, 255] (Rec. 601 luma)."""
    arr = np.asarray(frame, dtype=float)
    if arr.ndim == 3:
        r, g, b = LUMA_WEIGHTS
        return arr[..., 0] * r + arr[..., 1] * g + arr[..., 2] * b
    return arr


def strategy_saliency(frame: np.ndarray, aux: AuxMaps) -> GrayFrame:
    """Importance values map linearly onto [0, 255]; nothing else."""
    if aux.saliency is None:
        raise MissingAuxMap("saliency strategy needs a saliency map")
    return GrayFrame(pixels=255.0 * aux.saliency.astype(float), provenance=Provenance.SALIENCY)


def strategy_depth(frame: np.ndarray, aux: AuxMaps, decay_rate: float = 2.0) -> GrayFrame:
    """Near-to-far exponential ramp over retained depths.

    Depths above the per-frame 80th percentile (0th = nearest) are removed
    (mapped to 0).  Retained depths map through an affine-adjusted exponential
    pinned to 180 at the nearest depth and exactly 0 at the cutoff:

        g(d) = 180 * (exp(-k t) - exp(-k)) / (1 - exp(-k)),
        t = (d - d_min) / (d_cut - d_min),  k = decay_rate.

    A constant depth map degenerates to 180 everywhere.
    """
    if aux.depth is None:
        raise MissingAuxMap("depth strategy needs a depth map")
    depth = aux.depth.astype(float)
    d_min = float(depth.min())
    d_cut = float(np.percentile(depth, 80.0))
    out = np.zeros_like(depth)
    retained = depth <= d_cut
    if d_cut == d_min:
        out[retained] = 180.0
    else:
        k = float(decay_rate)
        t = (depth[retained] - d_min) / (d_cut - d_min)
        out[retained] = 180.0 * (np.exp(-k * t) - np.exp(-k)) / (1.0 - np.exp(-k))
    return GrayFrame(pixels=out, provenance=Provenance.DEPTH)


def strategy_segmentation(frame: np.ndarray, aux: AuxMaps) -> GrayFrame:
    """Object masks at full intensity; with no objects, road/sidewalk edges."""
    if aux.labels is None:
        raise MissingAuxMap("segmentation strategy needs a label map")
    labels = aux.labels
    objects = np.isin(labels, OBJECT_LABELS)
    if objects.any():
        out = np.where(objects, 255.0, 0.0)
    else:
        out = np.where(_surface_edges(labels), 255.0, 0.0)
    return GrayFrame(pixels=out, provenance=Provenance.SEGMENTATION)


def _surface_edges(labels: np.ndarray) -> np.ndarray:
    """Road/sidewalk pixels with a 4-connected neighbor of a different label."""
    padded = np.pad(labels, 1, mode="edge")
    diff = (
        (padded[1:-1, :-2] != labels)
        | (padded[1:-1, 2:] != labels)
        | (padded[:-2, 1:-1] != labels)
        | (padded[2:, 1:-1] != labels)
    )
    return diff & np.isin(labels, SURFACE_LABELS)


def strategy_combination(
    frame: np.ndarray,
    aux: AuxMaps,
    normalized_depth: bool = False,
) -> GrayFrame:
    """Top-10% saliency OR object mask, intensity scaled by a depth quadratic.

    The default scaling evaluates the published quadratic literally on raw
    depth x with the frame's depth extremes,

        y = -45/16 * ((8 x - 16) / (d_max - d_min))**2 + 180,

    clipped to [0, 180].  That quadratic peaks at raw depth x = 2 regardless of
    the depth range, which is suspicious; ``normalized_depth=True`` substitutes
    normalized depth t = (x - d_min)/(d_max - d_min) and uses y = 180 (1 - t^2).
    """
    if aux.saliency is None or aux.depth is None or aux.labels is None:
        raise MissingAuxMap("combination strategy needs saliency, depth, and labels")
    sal = aux.saliency.astype(float)
    depth = aux.depth.astype(float)
    threshold = np.percentile(sal, 90.0)
    mask = (sal >= threshold) | np.isin(aux.labels, OBJECT_LABELS)
    d_min, d_max = float(depth.min()), float(depth.max())
    if d_max == d_min:
        y = np.full_like(depth, 180.0)
    elif normalized_depth:
        t = (depth - d_min) / (d_max - d_min)
        y = 180.0 * (1.0 - t**2)
    else:
        y = -45.0 / 16.0 * ((8.0 * depth - 16.0) / (d_max - d_min)) ** 2 + 180.0
    out = np.where(mask, np.clip(y, 0.0, 180.0), 0.0)
    return GrayFrame(pixels=out, provenance=Provenance.COMBINATION)


STRATEGIES = {
    Strategy.SALIENCY: strategy_saliency,
    Strategy.DEPTH: strategy_depth,
    Strategy.SEGMENTATION: strategy_segmentation,
    Strategy.COMBINATION: strategy_combination,
}


def apply_strategy(strategy: Strategy, frame: np.ndarray, aux: AuxMaps, **kwargs) -> GrayFrame:
    return STRATEGIES[strategy](frame, aux, **kwargs)


def _area_weights(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) row-stochastic box-average weights (exact area overlap)."""
    w = np.zeros((n_out, n_in))
    span = n_in / n_out
    for o in range(n_out):
        lo, hi = o * span, (o + 1) * span
        for i in range(int(np.floor(lo)), min(int(np.ceil(hi)), n_in)):
            w[o, i] = min(hi, i + 1) - max(lo, i)
    return w / span


def encode_amplitudes(gray: GrayFrame, grid: ElectrodeGrid) -> AmplitudeFrame:
    """Box-average the grayscale frame down to the grid, divide by 255."""
    pixels = gray.pixels
    if pixels.size == 0:
        raise ShapeMismatch("empty gray frame")
    wr = _area_weights(pixels.shape[0], grid.rows)
    wc = _area_weights(pixels.shape[1], grid.cols)
    values = wr @ pixels @ wc.T / 255.0
    return AmplitudeFrame(values=np.clip(values, 0.0, 1.0))


def fallback_saliency(frame: np.ndarray) -> np.ndarray:
    """Local-contrast saliency: |box3 mean - box21 mean|, max-normalized.

    A constant frame normalizes 0/0 to all zeros.  Desk-scale stand-in for an
    external saliency network.
    """
    gray = to_gray(frame)
    fine = ndimage.uniform_filter(gray, size=3, mode="nearest")
    coarse = ndimage.uniform_filter(gray, size=21, mode="nearest")
    sal = np.abs(fine - coarse)
    peak = sal.max()
    return sal / peak if peak > 0 else np.zeros_like(sal)


class SceneEncoder(BaseEstimator, TransformerMixin):
    """Estimator-style pipeline stage: (frame, aux) pairs -> amplitude frames."""

    def __init__(self, strategy="segmentation", grid_size=16, grid_span_um=6000.0,
                 decay_rate=2.0, normalized_depth=False):
        self.strategy = strategy
        self.grid_size = grid_size
        self.grid_span_um = grid_span_um
        self.decay_rate = decay_rate
        self.normalized_depth = normalized_depth

    def fit(self, X=None, y=None):
        self.strategy_ = Strategy(self.strategy)
        self.grid_ = ElectrodeGrid.square(self.grid_size, self.grid_span_um)
        return self

    def transform(self, X) -> list[AmplitudeFrame]:
        check_is_fitted(self, "grid_")
        kwargs = {}
        if self.strategy_ == Strategy.DEPTH:
            kwargs["decay_rate"] = self.decay_rate
        elif self.strategy_ == Strategy.COMBINATION:
            kwargs["normalized_depth"] = self.normalized_depth
        out = []
        for i, (frame, aux) in enumerate(X):
            gray = apply_strategy(self.strategy_, frame, aux, **kwargs)
            amps = encode_amplitudes(gray, self.grid_)
            out.append(AmplitudeFrame(values=amps.values, frame_index=i))
        return out
