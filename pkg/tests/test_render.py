import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from sklearn.base import clone

from phosphor import (
    DEFAULT_FRAME,
    AmplitudeFrame,
    AxonMapParams,
    ElectrodeGrid,
    PhospheneRenderer,
    axis_ratio,
    build_percept_grid,
    build_sensitivity_table,
    moment_ellipse,
    render_fast,
    render_oracle,
    render_video,
    trace_bundle,
)
from phosphor.errors import ShapeMismatch, TableMismatch
from phosphor.render import trace_percept_bundles


def single_electrode_grid(x, y):
    return ElectrodeGrid(rows=1, cols=1, pitch=100.0, center=(x, y))


def one_amp(grid, value=1.0):
    return AmplitudeFrame(values=np.full((grid.rows, grid.cols), value))


class TestParamsAndGrids:
    def test_param_validation(self):
        with pytest.raises(ValueError):
            AxonMapParams(rho=0.0, lam=1000.0)
        with pytest.raises(ValueError):
            AxonMapParams(rho=300.0, lam=-1.0)
        assert AxonMapParams(rho=300.0, lam=0.0).lam == 0.0

    def test_square_grid_geometry(self):
        grid = ElectrodeGrid.square(16)
        assert grid.pitch == pytest.approx(6000.0 / 15.0)
        pos = grid.electrode_positions
        assert pos.shape == (256, 2)
        assert pos[:, 0].min() == pytest.approx(-3000.0)
        assert pos[:, 0].max() == pytest.approx(3000.0)
        # centered on the fovea
        assert pos.mean(axis=0) == pytest.approx((0.0, 0.0))

    def test_nonstandard_size_warns(self):
        with pytest.warns(UserWarning, match="standard grid sizes"):
            ElectrodeGrid.square(5)

    def test_amplitude_validation(self):
        with pytest.raises(ValueError):
            AmplitudeFrame(values=np.array([[1.5]]))
        with pytest.raises(ShapeMismatch):
            AmplitudeFrame(values=np.zeros(4))


class TestOracle:
    def test_zero_amps_zero_percept(self):
        percept = build_percept_grid(DEFAULT_FRAME, 16, 16)
        grid = ElectrodeGrid.square(8)
        out = render_oracle(one_amp(grid, 0.0), grid, AxonMapParams(300.0, 1000.0),
                            percept)
        assert np.all(out.brightness == 0.0)

    def test_lam0_gaussian_on_soma(self):
        # electrode exactly on a pixel's soma: brightness 1 there, Gaussian decay
        percept = build_percept_grid(DEFAULT_FRAME, 33, 33,
                                     (-1600.0, -1600.0, 1600.0, 1600.0))
        rho = 300.0
        grid = single_electrode_grid(0.0, 0.0)
        out = render_oracle(one_amp(grid), grid, AxonMapParams(rho, 0.0), percept)
        b = out.brightness
        c = 16
        assert b[c, c] == pytest.approx(1.0)
        pos = percept.soma_positions
        d = np.hypot(pos[..., 0], pos[..., 1])
        assert np.allclose(b, np.exp(-d**2 / (2 * rho**2)), atol=1e-12)
        # fitted radial sigma within 2% of rho
        _, _, major, minor, _ = moment_ellipse(b, percept)
        assert major == pytest.approx(rho, rel=0.02)
        assert minor == pytest.approx(rho, rel=0.02)

    def test_elongation_follows_bundle(self):
        # single off-meridian electrode: higher lambda stretches the phosphene
        # along the local fiber direction
        percept = build_percept_grid(DEFAULT_FRAME, 96, 96)
        grid = single_electrode_grid(-2800.0, 1400.0)
        amps = one_amp(grid)
        ratios = {}
        angles = {}
        for lam in (1000.0, 5000.0):
            out = render_oracle(amps, grid, AxonMapParams(300.0, lam), percept)
            _, _, major, minor, angle = moment_ellipse(out.brightness, percept)
            ratios[lam] = major / minor
            angles[lam] = angle
        assert ratios[5000.0] > ratios[1000.0] > 1.0
        bundle = trace_bundle((-2800.0, 1400.0))
        t = bundle.segments[1] - bundle.segments[0]
        tangent = math.degrees(math.atan2(t[1], t[0]))
        diff = abs((angles[5000.0] - tangent + 90.0) % 180.0 - 90.0)
        assert diff <= 10.0

    def test_disc_pixels_render_black(self):
        percept = build_percept_grid(DEFAULT_FRAME, 48, 48)
        bundles = trace_percept_bundles(percept)
        disc = np.array([b is None for b in bundles]).reshape(percept.shape)
        assert disc.any()  # the default extent covers the optic disc
        grid = ElectrodeGrid.square(8)
        out = render_oracle(one_amp(grid), grid, AxonMapParams(500.0, 5000.0), percept)
        assert np.all(out.brightness[disc] == 0.0)

    def test_brightness_clipped(self):
        percept = build_percept_grid(DEFAULT_FRAME, 24, 24)
        grid = ElectrodeGrid.square(8)
        out = render_oracle(one_amp(grid), grid, AxonMapParams(500.0, 1000.0), percept)
        assert out.brightness.max() <= 1.0
        assert out.brightness.min() >= 0.0


class TestSensitivityTable:
    def test_lam0_single_soma_entry(self):
        percept = build_percept_grid(DEFAULT_FRAME, 16, 16,
                                     (-2000.0, -2000.0, 2000.0, 2000.0))
        table = build_sensitivity_table(percept, AxonMapParams(300.0, 0.0))
        counts = np.diff(table.offsets)
        assert np.all(counts == 1)
        assert np.all(table.weights == 1.0)
        somata = percept.soma_positions.reshape(-1, 2)
        assert np.allclose(table.seg_xy, somata)

    def test_pruning_cutoff_is_analytic(self):
        # lambda=1000, w_min=exp(-2): keep exactly path lengths <= 2000 um
        percept = build_percept_grid(DEFAULT_FRAME, 2, 2,
                                     (-2000.0, -10.0, -1990.0, 10.0))
        lam = 1000.0
        table = build_sensitivity_table(percept, AxonMapParams(300.0, lam),
                                        w_min=math.exp(-2))
        bundles = trace_percept_bundles(percept)
        for i, bundle in enumerate(bundles):
            n_kept = table.offsets[i + 1] - table.offsets[i]
            expected = int(np.count_nonzero(bundle.cumulative_path_length <= 2000.0 + 1e-9))
            assert n_kept == expected

    def test_table_grows_with_lambda(self):
        percept = build_percept_grid(DEFAULT_FRAME, 24, 24)
        sizes = [
            build_sensitivity_table(percept, AxonMapParams(300.0, lam)).n_entries
            for lam in (1000.0, 5000.0)
        ]
        assert sizes[0] < sizes[1]

    def test_weights_descending_per_pixel(self):
        percept = build_percept_grid(DEFAULT_FRAME, 12, 12)
        table = build_sensitivity_table(percept, AxonMapParams(300.0, 2000.0))
        for i in range(len(table.offsets) - 1):
            w = table.weights[table.offsets[i]:table.offsets[i + 1]]
            assert np.all(np.diff(w) <= 1e-15)

    def test_w_min_range_enforced(self):
        percept = build_percept_grid(DEFAULT_FRAME, 8, 8)
        with pytest.raises(ValueError):
            build_sensitivity_table(percept, AxonMapParams(300.0, 1000.0), w_min=1.0)
        with pytest.raises(ValueError):
            build_sensitivity_table(percept, AxonMapParams(300.0, 1000.0), w_min=0.0)


class TestFastRenderer:
    def test_no_pruning_matches_oracle_tightly(self, rng):
        percept = build_percept_grid(DEFAULT_FRAME, 32, 32)
        params = AxonMapParams(300.0, 1000.0)
        # effectively unpruned: every weight above threshold survives
        table = build_sensitivity_table(percept, params, w_min=1e-300)
        grid = ElectrodeGrid.square(8)
        amps = AmplitudeFrame(values=rng.random((8, 8)))
        fast = render_fast(amps, grid, params, table).brightness
        oracle = render_oracle(amps, grid, params, percept).brightness
        assert np.abs(fast - oracle).max() <= 1e-9

    def test_pruned_matches_oracle_within_tolerance(self, rng):
        percept = build_percept_grid(DEFAULT_FRAME, 32, 32)
        for rho, lam in ((100.0, 0.0), (300.0, 1000.0), (500.0, 5000.0)):
            params = AxonMapParams(rho, lam)
            table = build_sensitivity_table(percept, params, w_min=1e-3)
            grid = ElectrodeGrid.square(16)
            amps = AmplitudeFrame(values=rng.random((16, 16)))
            fast = render_fast(amps, grid, params, table).brightness
            oracle = render_oracle(amps, grid, params, percept).brightness
            assert np.abs(fast - oracle).max() <= 1e-3

    def test_zero_amps(self):
        percept = build_percept_grid(DEFAULT_FRAME, 16, 16)
        params = AxonMapParams(300.0, 1000.0)
        table = build_sensitivity_table(percept, params)
        grid = ElectrodeGrid.square(8)
        out = render_fast(one_amp(grid, 0.0), grid, params, table)
        assert np.all(out.brightness == 0.0)

    def test_param_mismatch_rejected(self):
        percept = build_percept_grid(DEFAULT_FRAME, 16, 16)
        table = build_sensitivity_table(percept, AxonMapParams(300.0, 1000.0))
        grid = ElectrodeGrid.square(8)
        with pytest.raises(TableMismatch):
            render_fast(one_amp(grid), grid, AxonMapParams(300.0, 5000.0), table)

    def test_shape_mismatch_rejected(self):
        percept = build_percept_grid(DEFAULT_FRAME, 16, 16)
        params = AxonMapParams(300.0, 1000.0)
        table = build_sensitivity_table(percept, params)
        amps = AmplitudeFrame(values=np.zeros((8, 8)))
        with pytest.raises(ShapeMismatch):
            render_fast(amps, ElectrodeGrid.square(16), params, table)

    @settings(max_examples=15, deadline=None)
    @given(arrays(np.float64, (8, 8), elements=st.floats(0, 1)))
    def test_brightness_always_in_unit_interval(self, values):
        percept = build_percept_grid(DEFAULT_FRAME, 16, 16)
        params = AxonMapParams(300.0, 1000.0)
        table = build_sensitivity_table(percept, params)
        grid = ElectrodeGrid.square(8)
        out = render_fast(AmplitudeFrame(values=values), grid, params, table)
        assert out.brightness.min() >= 0.0
        assert out.brightness.max() <= 1.0


class TestVideo:
    def _setup(self, rng, n=4):
        percept = build_percept_grid(DEFAULT_FRAME, 16, 16)
        params = AxonMapParams(300.0, 1000.0)
        table = build_sensitivity_table(percept, params)
        grid = ElectrodeGrid.square(8)
        frames = [AmplitudeFrame(values=rng.random((8, 8)), frame_index=i)
                  for i in range(n)]
        return percept, params, table, grid, frames

    def test_single_frame_equals_direct_call(self, rng):
        _, params, table, grid, frames = self._setup(rng, n=1)
        video = render_video(frames, grid, params, table)
        direct = render_fast(frames[0], grid, params, table)
        assert np.array_equal(video[0].brightness, direct.brightness)

    def test_memoryless_permutation(self, rng):
        _, params, table, grid, frames = self._setup(rng)
        forward = render_video(frames, grid, params, table)
        backward = render_video(frames[::-1], grid, params, table)
        for f, b in zip(forward, backward[::-1]):
            assert np.array_equal(f.brightness, b.brightness)


class TestEstimator:
    def test_get_params_round_trip(self):
        est = PhospheneRenderer(rho=100.0, lam=0.0, grid_size=8,
                                percept_shape=(32, 32))
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_fit_transform_shapes(self, rng):
        est = PhospheneRenderer(rho=300.0, lam=1000.0, grid_size=8,
                                percept_shape=(24, 24)).fit()
        X = rng.random((3, 8, 8))
        out = est.transform(X)
        assert out.shape == (3, 24, 24)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_transform_matches_render_fast(self, rng):
        est = PhospheneRenderer(rho=300.0, lam=1000.0, grid_size=8,
                                percept_shape=(24, 24)).fit()
        values = rng.random((8, 8))
        out = est.transform(values[None])
        direct = render_fast(AmplitudeFrame(values=values), est.grid_,
                             est.params_, est.table_)
        assert np.array_equal(out[0], direct.brightness)
