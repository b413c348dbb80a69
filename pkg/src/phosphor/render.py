"""Axon-map phosphene rendering: electrode grids, brute-force oracle, and fast path.

Brightness of a percept pixel is the maximum over its axon's segments of

    axon_weight(segment) * sum_e amp_e * exp(-dist(segment, e)^2 / (2 rho^2))

clipped to [0, 1], where axon_weight = exp(-path_len^2 / (2 lambda^2)) and for
lambda = 0 only the soma segment counts.  ``render_oracle`` evaluates this
literally; ``build_sensitivity_table`` + ``render_fast`` precompute the pruned
(pixel, segment) pairs and the per-axis Gaussian kernels so repeated frames
reduce to small matrix products, matching the oracle to the pruning tolerance.

Pixels whose soma falls inside the optic disc have no ganglion cells and
render black (the blind spot).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import ShapeMismatch, SomaInsideDisc, TableMismatch
from .retina import (
    DEFAULT_BUNDLE_MODEL,
    DEFAULT_FRAME,
    AxonBundle,
    BundleModelConfig,
    PerceptGrid,
    RetinalCoordinateFrame,
    build_percept_grid,
    trace_bundle,
)

STANDARD_GRID_SIZES = (8, 16, 32)
STANDARD_RHOS = (100.0, 300.0, 500.0)
STANDARD_LAMBDAS = (0.0, 1000.0, 5000.0)


@dataclass(frozen=True)
class AxonMapParams:
    """Phosphene shape parameters: rho (perpendicular spread, um) and
    lam (spread along the fiber, um; 0 = isolated circular phosphenes)."""

    rho: float
    lam: float

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be > 0")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")


@dataclass(frozen=True)
class ElectrodeGrid:
    rows: int
    cols: int
    pitch: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.pitch <= 0:
            raise ValueError("bad electrode grid")
        if not (self.rows in STANDARD_GRID_SIZES and self.cols in STANDARD_GRID_SIZES):
            warnings.warn(
                f"{self.rows}x{self.cols} is not one of the standard grid sizes "
                f"{STANDARD_GRID_SIZES}",
                stacklevel=3,
            )

    @classmethod
    def square(cls, n: int, span_um: float = 6000.0, center=(0.0, 0.0)) -> "ElectrodeGrid":
        """n x n grid spanning ``span_um`` on a side (pitch = span/(n-1))."""
        return cls(rows=n, cols=n, pitch=span_um / (n - 1), center=tuple(center))

    @property
    def is_standard_config(self) -> bool:
        return self.rows == self.cols and self.rows in STANDARD_GRID_SIZES

    @property
    def xs(self) -> np.ndarray:
        return self.center[0] + self.pitch * (np.arange(self.cols) - (self.cols - 1) / 2.0)

    @property
    def ys(self) -> np.ndarray:
        """Row-major top row first (largest y), matching image convention."""
        return self.center[1] + self.pitch * ((self.rows - 1) / 2.0 - np.arange(self.rows))

    @property
    def electrode_positions(self) -> np.ndarray:
        """(rows*cols, 2) positions, row-major."""
        xx, yy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([xx.ravel(), yy.ravel()])

    def cache_key(self):
        return (self.rows, self.cols, self.pitch, self.center)


@dataclass(frozen=True)
class AmplitudeFrame:
    """Normalized current amplitudes in [0, 1], one per electrode."""

    values: np.ndarray  # (rows, cols)
    frame_index: int = 0
    timestamp_ms: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ShapeMismatch("amplitude frame must be 2-D")
        if np.any(values < 0) or np.any(values > 1) or not np.all(np.isfinite(values)):
            raise ValueError("amplitudes must lie in [0, 1]")
        object.__setattr__(self, "values", values)
        values.setflags(write=False)


@dataclass(frozen=True)
class PerceptFrame:
    brightness: np.ndarray  # (height, width) in [0, 1]
    grid_ref: PerceptGrid

    def __post_init__(self):
        self.brightness.setflags(write=False)


# ---------------------------------------------------------------------------
# bundle tracing over a percept grid, memoized (tracing dominates build time)

_BUNDLE_CACHE: dict = {}
_BUNDLE_CACHE_MAX = 8


def trace_percept_bundles(
    percept: PerceptGrid,
    frame: RetinalCoordinateFrame = DEFAULT_FRAME,
    model: BundleModelConfig = DEFAULT_BUNDLE_MODEL,
) -> list[AxonBundle | None]:
    """Axon bundle for every percept pixel (row-major); None inside the disc."""
    key = (percept.cache_key(), frame, model)
    cached = _BUNDLE_CACHE.get(key)
    if cached is not None:
        return cached
    somata = percept.soma_positions.reshape(-1, 2)
    bundles: list[AxonBundle | None] = []
    for soma in somata:
        try:
            bundles.append(trace_bundle(soma, frame, model))
        except SomaInsideDisc:
            bundles.append(None)
    if len(_BUNDLE_CACHE) >= _BUNDLE_CACHE_MAX:
        _BUNDLE_CACHE.pop(next(iter(_BUNDLE_CACHE)))
    _BUNDLE_CACHE[key] = bundles
    return bundles


def _check_amps(amps: AmplitudeFrame, grid: ElectrodeGrid) -> np.ndarray:
    if amps.values.shape != (grid.rows, grid.cols):
        raise ShapeMismatch(
            f"amplitude frame {amps.values.shape} does not match grid "
            f"({grid.rows}, {grid.cols})"
        )
    return amps.values


def render_oracle(
    amps: AmplitudeFrame,
    grid: ElectrodeGrid,
    params: AxonMapParams,
    percept: PerceptGrid,
    bundles: BundleModelConfig = DEFAULT_BUNDLE_MODEL,
    frame: RetinalCoordinateFrame = DEFAULT_FRAME,
) -> PerceptFrame:
    """Brute-force reference renderer: every segment, no pruning, no caching."""
    a = _check_amps(amps, grid).ravel()
    elec = grid.electrode_positions
    traced = trace_percept_bundles(percept, frame, bundles)
    inv2rho2 = 1.0 / (2.0 * params.rho**2)
    out = np.zeros(percept.height * percept.width)
    for i, bundle in enumerate(traced):
        if bundle is None:
            continue
        segs = bundle.segments
        d2 = ((segs[:, None, :] - elec[None, :, :]) ** 2).sum(axis=2)
        spatial = np.exp(-d2 * inv2rho2) @ a
        if params.lam == 0.0:
            val = spatial[0]
        else:
            w = np.exp(-bundle.cumulative_path_length**2 / (2.0 * params.lam**2))
            val = np.max(w * spatial)
        out[i] = val
    brightness = np.clip(out, 0.0, 1.0).reshape(percept.shape)
    return PerceptFrame(brightness=brightness, grid_ref=percept)


@dataclass
class SensitivityTable:
    """Pruned (pixel, segment) pairs for one (percept, params, bundle model) triple.

    ``offsets`` is CSR-style: pixel i owns rows offsets[i]:offsets[i+1] of
    ``seg_xy``/``weights``, ordered by descending axon weight (path order).
    """

    percept: PerceptGrid
    params: AxonMapParams
    bundle_model: BundleModelConfig
    retina: RetinalCoordinateFrame
    w_min: float
    offsets: np.ndarray  # (n_pixels + 1,)
    seg_xy: np.ndarray  # (M, 2)
    weights: np.ndarray  # (M,)
    _kernel_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_entries(self) -> int:
        return len(self.weights)


def build_sensitivity_table(
    percept: PerceptGrid,
    params: AxonMapParams,
    bundles: BundleModelConfig = DEFAULT_BUNDLE_MODEL,
    w_min: float = 1e-3,
    frame: RetinalCoordinateFrame = DEFAULT_FRAME,
) -> SensitivityTable:
    """Precompute every (pixel, segment) pair with axon weight >= w_min."""
    if not 0.0 < w_min < 1.0:
        raise ValueError("w_min must lie in (0, 1)")
    traced = trace_percept_bundles(percept, frame, bundles)
    offsets = np.zeros(len(traced) + 1, dtype=np.int64)
    xs, ws = [], []
    for i, bundle in enumerate(traced):
        if bundle is None:
            offsets[i + 1] = offsets[i]
            continue
        if params.lam == 0.0:
            xy = bundle.segments[:1]
            w = np.ones(1)
        else:
            w = np.exp(-bundle.cumulative_path_length**2 / (2.0 * params.lam**2))
            keep = w >= w_min
            xy = bundle.segments[keep]
            w = w[keep]
        xs.append(xy)
        ws.append(w)
        offsets[i + 1] = offsets[i] + len(w)
    seg_xy = np.concatenate(xs) if xs else np.zeros((0, 2))
    weights = np.concatenate(ws) if ws else np.zeros(0)
    return SensitivityTable(
        percept=percept,
        params=params,
        bundle_model=bundles,
        retina=frame,
        w_min=w_min,
        offsets=offsets,
        seg_xy=seg_xy,
        weights=weights,
    )


def _grid_kernels(table: SensitivityTable, grid: ElectrodeGrid):
    """Per-axis Gaussian kernels between table segments and grid electrode rows/cols.

    Cached on the table: these depend only on geometry and rho, not amplitudes,
    so repeated frames pay only the small matrix products.
    """
    key = grid.cache_key()
    kern = table._kernel_cache.get(key)
    if kern is None:
        inv2rho2 = 1.0 / (2.0 * table.params.rho**2)
        gx = np.exp(-((table.seg_xy[:, 0:1] - grid.xs[None, :]) ** 2) * inv2rho2)
        gy = np.exp(-((table.seg_xy[:, 1:2] - grid.ys[None, :]) ** 2) * inv2rho2)
        kern = (gy, gx)
        table._kernel_cache.clear()  # one grid at a time keeps memory bounded
        table._kernel_cache[key] = kern
    return kern


def render_fast(
    amps: AmplitudeFrame,
    grid: ElectrodeGrid,
    params: AxonMapParams,
    table: SensitivityTable,
) -> PerceptFrame:
    """Optimized renderer; equals the oracle up to the w_min pruning tolerance."""
    if params != table.params:
        raise TableMismatch(f"table built for {table.params}, got {params}")
    a = _check_amps(amps, grid)
    gy, gx = _grid_kernels(table, grid)
    # field at segment s = gy(s) . A . gx(s), exploiting the separable Gaussian
    field = ((gy @ a) * gx).sum(axis=1)
    vals = table.weights * field
    offsets = table.offsets
    counts = np.diff(offsets)
    nonempty = counts > 0
    out = np.zeros(len(counts))
    if nonempty.any():
        # consecutive nonempty starts are strictly increasing, and each reduce
        # segment ends exactly at that pixel's offsets[i+1] because empty
        # pixels contribute no rows
        out[nonempty] = np.maximum.reduceat(vals, offsets[:-1][nonempty])
    brightness = np.clip(out, 0.0, 1.0).reshape(table.percept.shape)
    return PerceptFrame(brightness=brightness, grid_ref=table.percept)


def render_video(
    frames,
    grid: ElectrodeGrid,
    params: AxonMapParams,
    table: SensitivityTable,
) -> list[PerceptFrame]:
    """Render a sequence of amplitude frames; the model is memoryless, so each
    frame is independent of the others."""
    return [render_fast(f, grid, params, table) for f in frames]


# ---------------------------------------------------------------------------
# moment-ellipse diagnostics used to characterize phosphene shape


def moment_ellipse(brightness: np.ndarray, percept: PerceptGrid):
    """Centroid, principal axis sigmas, and orientation of a brightness blob.

    Returns (cx, cy, sigma_major, sigma_minor, angle_deg) with the angle of the
    major axis measured from +x.
    """
    b = np.asarray(brightness, dtype=float)
    xx, yy = np.meshgrid(percept.xs, percept.ys)
    total = b.sum()
    if total <= 0:
        raise ValueError("cannot fit moments to an all-zero frame")
    cx = (b * xx).sum() / total
    cy = (b * yy).sum() / total
    dx, dy = xx - cx, yy - cy
    cxx = (b * dx * dx).sum() / total
    cyy = (b * dy * dy).sum() / total
    cxy = (b * dx * dy).sum() / total
    cov = np.array([[cxx, cxy], [cxy, cyy]])
    evals, evecs = np.linalg.eigh(cov)
    major, minor = math.sqrt(evals[1]), math.sqrt(max(evals[0], 0.0))
    vx, vy = evecs[:, 1]
    angle = math.degrees(math.atan2(vy, vx))
    return cx, cy, major, minor, angle


def axis_ratio(brightness: np.ndarray, percept: PerceptGrid) -> float:
    _, _, major, minor, _ = moment_ellipse(brightness, percept)
    return major / minor if minor > 0 else math.inf


class PhospheneRenderer(BaseEstimator, TransformerMixin):
    """Estimator-style wrapper: fit() precomputes the sensitivity table,
    transform() renders amplitude frames into percept frames.

    Parameters mirror the experiment sweep: ``rho``/``lam`` in um,
    ``grid_size`` electrodes per side, percept resolution and extent.
    """

    def __init__(
        self,
        rho=300.0,
        lam=1000.0,
        grid_size=16,
        grid_span_um=6000.0,
        percept_shape=(256, 256),
        percept_extent=(-4500.0, -4500.0, 4500.0, 4500.0),
        w_min=1e-3,
        bundle_model=None,
        retina=None,
    ):
        self.rho = rho
        self.lam = lam
        self.grid_size = grid_size
        self.grid_span_um = grid_span_um
        self.percept_shape = percept_shape
        self.percept_extent = percept_extent
        self.w_min = w_min
        self.bundle_model = bundle_model
        self.retina = retina

    def fit(self, X=None, y=None):
        frame = self.retina if self.retina is not None else DEFAULT_FRAME
        model = self.bundle_model if self.bundle_model is not None else DEFAULT_BUNDLE_MODEL
        h, w = self.percept_shape
        self.percept_ = build_percept_grid(frame, w, h, self.percept_extent)
        self.grid_ = ElectrodeGrid.square(self.grid_size, self.grid_span_um)
        self.params_ = AxonMapParams(rho=self.rho, lam=self.lam)
        self.table_ = build_sensitivity_table(
            self.percept_, self.params_, model, self.w_min, frame
        )
        return self

    def transform(self, X) -> np.ndarray:
        """X: (n, rows, cols) array or iterable of AmplitudeFrame.

        Returns an (n, height, width) brightness array.
        """
        check_is_fitted(self, "table_")
        frames = []
        for i, item in enumerate(X):
            if not isinstance(item, AmplitudeFrame):
                item = AmplitudeFrame(values=np.asarray(item), frame_index=i)
            frames.append(item)
        rendered = render_video(frames, self.grid_, self.params_, self.table_)
        return np.stack([p.brightness for p in rendered])
