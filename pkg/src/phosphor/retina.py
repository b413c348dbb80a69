"""Retinal coordinate frame, nerve fiber bundle trajectories, and percept-plane sampling.

Coordinates are retinal micrometers for a right eye: the fovea sits at the
origin, nasal is +x, superior is +y.  Ganglion cell axons run from their soma
toward the optic disc along stereotyped arcuate paths that never cross the
horizontal raphe (the temporal y = 0 line).

The shipped ``spiral_fan`` bundle model parameterizes trajectories in polar
coordinates (r, theta) centered on the optic disc, theta = 0 pointing
temporally (toward the fovea), theta > 0 superior.  A bundle that leaves the
disc at angle theta0 follows

    theta(r) = theta0 / (1 + (c1_deg / 100) * ((r - r0_um) / 1000) ** c2)

for r >= r0_um, and runs radially (theta = theta0) inside r0_um.  The angular
compression factor shrinks |theta| with distance from the disc, so peripheral
fibers sweep around toward the raphe the way arcuate bundles do.  Curves with
different theta0 never intersect, the meridian (theta0 = 0) is a fixed line,
and the family is mirror-symmetric about the raphe.  The constants are
engineering defaults, not measurements; only those qualitative properties are
contractual.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import BadExtent, IndexOutOfRange, OutOfExtent, SomaInsideDisc

THETA_MAX_DEG = 175.0
#: bisection tolerance for the disc-exit angle, in degrees
THETA0_TOL_DEG = 0.01


class Eye(enum.Enum):
    RIGHT = "right"


@dataclass(frozen=True)
class RetinalCoordinateFrame:
    """Geometry of the simulated (right) retina.

    ``optic_disc_center`` is nasal of the fovea (x > 0); ``um_per_degree``
    converts visual angle to retinal distance.  ``extent_halfwidth_um`` bounds
    the square patch of retina the bundle model is guaranteed to cover.
    """

    eye: Eye = Eye.RIGHT
    optic_disc_center: tuple[float, float] = (4200.0, 0.0)
    disc_radius_um: float = 900.0
    um_per_degree: float = 280.0
    extent_halfwidth_um: float = 4600.0

    def __post_init__(self):
        if self.um_per_degree <= 0:
            raise ValueError("um_per_degree must be positive")
        if self.optic_disc_center[0] <= 0:
            raise ValueError("optic disc must be nasal (+x) of the fovea for a right eye")
        if self.disc_radius_um <= 0:
            raise ValueError("disc_radius_um must be positive")

    @property
    def fovea_origin(self) -> tuple[float, float]:
        return (0.0, 0.0)


DEFAULT_FRAME = RetinalCoordinateFrame()


@dataclass(frozen=True)
class BundleModelConfig:
    """Configuration of the nerve-fiber-bundle trajectory model."""

    model: str = "spiral_fan"
    r0_um: float = 1000.0
    c1_deg: float = 15.0
    c2: float = 1.3
    step_um: float = 100.0

    def __post_init__(self):
        if self.model != "spiral_fan":
            raise ValueError(f"unknown bundle model {self.model!r}")
        if self.r0_um <= 0 or self.step_um <= 0 or self.c1_deg < 0 or self.c2 <= 0:
            raise ValueError("bundle model constants must be positive")

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "r0_um": self.r0_um,
            "c1_deg": self.c1_deg,
            "c2": self.c2,
            "step_um": self.step_um,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BundleModelConfig":
        return cls(**obj)

    def angular_factor(self, r):
        """Compression g(r) applied to the disc-exit angle; 1 at and inside r0."""
        u = np.maximum(np.asarray(r, dtype=float) - self.r0_um, 0.0) / 1000.0
        return 1.0 / (1.0 + (self.c1_deg / 100.0) * u**self.c2)


DEFAULT_BUNDLE_MODEL = BundleModelConfig()


@dataclass(frozen=True)
class AxonBundle:
    """Polyline of an axon from its soma (index 0) to the optic disc boundary."""

    soma: tuple[float, float]
    segments: np.ndarray  # (n, 2) retinal um
    cumulative_path_length: np.ndarray  # (n,), 0 at the soma

    def __post_init__(self):
        self.segments.setflags(write=False)
        self.cumulative_path_length.setflags(write=False)

    def __len__(self) -> int:
        return len(self.segments)


def _disc_polar(point, frame: RetinalCoordinateFrame):
    """(r, theta) of a retinal point around the disc; theta=0 temporal, >0 superior."""
    dx = point[0] - frame.optic_disc_center[0]
    dy = point[1] - frame.optic_disc_center[1]
    r = math.hypot(dx, dy)
    theta = math.pi - math.atan2(dy, dx)
    if theta > math.pi:
        theta -= 2.0 * math.pi
    return r, math.degrees(theta)


def _curve_points(theta0_deg, r, frame, model):
    """Cartesian points of the theta0 curve sampled at radii ``r`` (disc-centered)."""
    theta = np.radians(theta0_deg * model.angular_factor(r))
    x = frame.optic_disc_center[0] - r * np.cos(theta)
    y = frame.optic_disc_center[1] + r * np.sin(theta)
    return np.column_stack([x, y])


def _solve_theta0(r_s, theta_abs_deg, model: BundleModelConfig) -> float:
    """Disc-exit angle whose curve passes through (r_s, theta_abs_deg), by bisection."""
    g = float(model.angular_factor(r_s))

    def err(t0):
        return t0 * g - theta_abs_deg

    lo, hi = 0.0, THETA_MAX_DEG
    if err(hi) < 0:
        raise OutOfExtent(
            f"bundle model cannot reach theta={theta_abs_deg:.2f} deg at r={r_s:.0f} um"
        )
    while hi - lo > THETA0_TOL_DEG:
        mid = 0.5 * (lo + hi)
        if err(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def trace_bundle(
    soma,
    frame: RetinalCoordinateFrame = DEFAULT_FRAME,
    model: BundleModelConfig = DEFAULT_BUNDLE_MODEL,
) -> AxonBundle:
    """Trace the axon path from ``soma`` to the optic disc boundary.

    Deterministic; segments are spaced at most ``model.step_um`` apart along
    the arc and the last point lies on the disc boundary.
    """
    sx, sy = float(soma[0]), float(soma[1])
    half = frame.extent_halfwidth_um
    if abs(sx) > half or abs(sy) > half:
        raise OutOfExtent(f"soma {(sx, sy)} outside modeled retina (±{half:g} um)")
    r_s, theta_s = _disc_polar((sx, sy), frame)
    if r_s <= frame.disc_radius_um:
        raise SomaInsideDisc(f"soma {(sx, sy)} inside the optic disc")

    sign = 1.0 if theta_s >= 0 else -1.0
    theta_abs = abs(theta_s)
    if theta_abs == 0.0:
        theta0 = 0.0
    else:
        theta0 = _solve_theta0(r_s, theta_abs, model)

    # Dense sampling in radius, then exact resampling at uniform arc length so
    # every emitted point lies on the analytic curve.
    n_dense = max(int(math.ceil((r_s - frame.disc_radius_um) / (model.step_um / 8.0))), 2)
    r_dense = np.linspace(r_s, frame.disc_radius_um, n_dense + 1)
    pts = _curve_points(theta0, r_dense, frame, model)
    seg_len = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
    s_dense = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = s_dense[-1]
    n_steps = max(int(math.ceil(total / model.step_um)), 1)
    s_target = np.linspace(0.0, total, n_steps + 1)
    r_path = np.interp(s_target, s_dense, r_dense)
    r_path[0], r_path[-1] = r_s, frame.disc_radius_um
    segments = _curve_points(theta0, r_path, frame, model)
    # exact soma at index 0, mirror symmetry applied as a reflection
    segments[:, 1] *= sign
    segments[0] = (sx, sy)
    dists = np.hypot(np.diff(segments[:, 0]), np.diff(segments[:, 1]))
    cumlen = np.concatenate([[0.0], np.cumsum(dists)])
    return AxonBundle(soma=(sx, sy), segments=segments, cumulative_path_length=cumlen)


def path_length_to(bundle: AxonBundle, segment_index: int) -> float:
    """Arc length in um from the soma to ``segment_index`` along the bundle."""
    n = len(bundle)
    if not -n <= segment_index < n:
        raise IndexOutOfRange(f"segment index {segment_index} out of range for {n} segments")
    return float(bundle.cumulative_path_length[segment_index])


@dataclass(frozen=True)
class PerceptGrid:
    """Regular lattice of ganglion-cell somata representing the percept plane.

    Row 0 is the top of the rendered image (largest y); corner pixels map
    exactly to the extent corners.
    """

    width: int
    height: int
    extent: tuple[float, float, float, float]  # (x0, y0, x1, y1) um

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.extent[0], self.extent[2], self.width)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.extent[3], self.extent[1], self.height)

    @property
    def soma_positions(self) -> np.ndarray:
        """(height, width, 2) soma coordinates, row-major image order."""
        xx, yy = np.meshgrid(self.xs, self.ys)
        return np.dstack([xx, yy])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def cache_key(self):
        return (self.width, self.height, self.extent)


def build_percept_grid(
    frame: RetinalCoordinateFrame,
    width: int,
    height: int,
    extent=None,
) -> PerceptGrid:
    """Build a percept sampling grid; default extent is ±4500 um around the fovea.

    Grids of at least 8x8 are the supported configurations; anything below
    2x2 cannot pin its corners to the extent and is rejected.
    """
    if extent is None:
        extent = (-4500.0, -4500.0, 4500.0, 4500.0)
    x0, y0, x1, y1 = (float(v) for v in extent)
    if width < 2 or height < 2:
        raise BadExtent("percept grid needs width, height >= 2")
    if x1 <= x0 or y1 <= y0:
        raise BadExtent(f"degenerate extent {extent}")
    half = frame.extent_halfwidth_um
    if max(abs(x0), abs(x1), abs(y0), abs(y1)) > half:
        raise BadExtent(f"extent {extent} exceeds modeled retina (±{half:g} um)")
    return PerceptGrid(width=int(width), height=int(height), extent=(x0, y0, x1, y1))
