import numpy as np
import pytest

from peakforge.errors import ConfigError, GridMismatch, OddPointCount, TailDominates
from peakforge.field_ops import (
    Field,
    FracOrder,
    PeakConfig,
    QuadSpec,
    default_sigma,
    fft_workers,
    frac_constant,
    frac_laplacian_pv,
    frac_laplacian_spectral,
    green_apply,
    inner_product_l2,
    make_grid,
    mean_gauge_warning,
    peak_weight,
    spectral_interpolate,
    sphere_measure,
    sphere_rule,
    weighted_sup_norm,
)
from peakforge.bubbles import BubbleParams, bubble


class TestGrid:
    def test_basic_geometry(self):
        g = make_grid(2, 4.0, 32)
        assert g.h == pytest.approx(0.25)
        assert g.shape == (32, 32)
        assert g.points.shape == (32, 32, 2)
        assert g.axis[0] == -4.0
        assert g.wavenumbers[0] == 0.0

    @pytest.mark.parametrize(
        "args, exc",
        [((1, 1.0, 33), OddPointCount), ((4, 1.0, 32), ConfigError), ((1, -1.0, 32), ConfigError), ((1, 1.0, 8), ConfigError)],
    )
    def test_rejects_bad_grids(self, args, exc):
        with pytest.raises(exc):
            make_grid(*args)

    def test_inner_box_and_ball(self):
        g = make_grid(1, 8.0, 64)
        m = g.inner_box_mask(0.5)
        assert np.all(np.abs(g.axis[m]) <= 4.0)
        assert g.contains_ball([0.0], 7.0)
        assert not g.contains_ball([5.0], 4.0)

    def test_field_checks(self):
        g = make_grid(1, 1.0, 16)
        with pytest.raises(GridMismatch):
            Field(g, np.zeros(10))
        with pytest.raises(ConfigError):
            Field(g, np.full(16, np.nan))
        other = make_grid(1, 2.0, 16)
        with pytest.raises(GridMismatch):
            Field.zeros(g) + Field.zeros(other)

    def test_field_arithmetic(self):
        g = make_grid(1, 1.0, 16)
        f = Field(g, np.arange(16.0))
        assert np.array_equal((2 * f - f).values, f.values)
        assert np.array_equal((-f + 1.0).values, 1.0 - f.values)


class TestSpectralOperators:
    def test_cosine_is_an_eigenfunction(self):
        g = make_grid(1, np.pi, 64)
        x = g.axis
        for s in (0.1, 0.5, 0.9):
            f = Field(g, np.cos(3 * x))
            out = frac_laplacian_spectral(f, s)
            np.testing.assert_allclose(out.values, 3 ** (2 * s) * np.cos(3 * x), atol=1e-12)

    def test_s_one_is_minus_laplacian(self):
        g = make_grid(2, np.pi, 32)
        X, Y = g.points[..., 0], g.points[..., 1]
        f = Field(g, np.sin(2 * X) * np.cos(Y))
        np.testing.assert_allclose(frac_laplacian_spectral(f, 1.0).values, 5 * f.values, atol=1e-11)

    def test_green_inverts_on_zero_mean(self):
        g = make_grid(1, 4.0, 128)
        x = g.axis
        f = Field(g, np.exp(-x * x) - np.exp(-x * x).mean())
        back = frac_laplacian_spectral(green_apply(f, 0.3), 0.3)
        np.testing.assert_allclose(back.values, f.values, atol=1e-12)
        assert not mean_gauge_warning(f)
        assert mean_gauge_warning(Field(g, np.ones(128)))

    def test_interpolation_exact_for_trig_polynomial(self):
        g = make_grid(2, np.pi, 16)
        fn = lambda p: np.cos(p[..., 0]) + np.sin(2 * p[..., 1]) * np.cos(3 * p[..., 0])
        f = Field.from_function(g, fn)
        pts = np.random.default_rng(1).uniform(-3, 3, (20, 2))
        np.testing.assert_allclose(spectral_interpolate(f, pts), fn(pts), atol=1e-12)

    def test_inner_product(self):
        g = make_grid(1, np.pi, 64)
        f = Field(g, np.sin(g.axis))
        assert inner_product_l2(f, f) == pytest.approx(np.pi)


class TestPrincipalValue:
    def test_constants(self):
        assert frac_constant(1, 0.5) == pytest.approx(1 / np.pi)
        assert sphere_measure(2) == pytest.approx(2 * np.pi)
        assert sphere_measure(3) == pytest.approx(4 * np.pi)
        for dim in (1, 2, 3):
            _, w = sphere_rule(dim, 16)
            assert w.sum() == pytest.approx(sphere_measure(dim))

    @pytest.mark.parametrize("N, s", [(1, 0.2), (1, 0.4), (2, 0.3)])
    def test_bubble_oracle(self, N, s):
        # (-Delta)^s U = U^{p_s} exactly
        bp = BubbleParams(1.3, (0.1,) * N, FracOrder(N, s))
        fn = lambda x: bubble(x, bp)
        x = np.full(N, 0.4)
        val = frac_laplacian_pv(fn, x, s, QuadSpec(n_angle=32))
        assert val == pytest.approx(float(fn(x[None])[0]) ** FracOrder(N, s).p, rel=1e-6)

    def test_tail_guard(self):
        slow = lambda x: (1 + np.sum(x * x, axis=-1)) ** -0.02
        with pytest.raises(TailDominates):
            frac_laplacian_pv(slow, [0.0], 0.2, QuadSpec(r_inf=10.0))


class TestOrdersAndNorms:
    def test_exponents(self):
        o = FracOrder(1, 0.2, 0.1)
        assert o.p == pytest.approx(1.4 / 0.6)
        assert o.q == pytest.approx(o.p - 0.1)
        assert 0 < o.sigma < min(o.s / 2, (1 - 4 * o.s) / 2)
        assert default_sigma(1, 0.2) == pytest.approx(o.sigma)

    def test_reduction_range(self):
        with pytest.raises(ConfigError):
            FracOrder(1, 0.3).require_reduction()
        with pytest.raises(ConfigError):
            FracOrder(1, 0.6)
        with pytest.raises(ConfigError):
            FracOrder(1, 0.2, sigma=0.15).require_reduction()

    def test_peak_config(self):
        o = FracOrder(1, 0.2)
        cfg = PeakConfig(((2.0, (-5.0,)), (3.0, (5.0,))), 1.0, o)
        cfg.validate()
        assert cfg.k == 2 and cfg.min_distance() == 10.0
        with pytest.raises(ConfigError):
            PeakConfig(((2.0, (-5.0,)), (3.0, (5.0,))), 1.5, o).validate()
        with pytest.raises(ConfigError):
            PeakConfig(((-1.0, (0.0,)),), 1.0, o)
        moved = cfg.replace(lambdas=[1.0, 1.0])
        assert moved.lambdas.tolist() == [1.0, 1.0]

    def test_weight_normalizes_itself(self):
        g = make_grid(1, 8.0, 256)
        cfg = PeakConfig(((4.0, (0.0,)),), 1.0, FracOrder(1, 0.2))
        for kind in ("star", "star_star"):
            w = Field(g, peak_weight(g.points, cfg, kind))
            assert weighted_sup_norm(w, cfg, kind) == pytest.approx(1.0)
        with pytest.raises(ConfigError):
            peak_weight(g.points, cfg, "sup")

    def test_workers_from_env(self, monkeypatch):
        monkeypatch.setenv("PEAKFORGE_THREADS", "3")
        assert fft_workers() == 3
        monkeypatch.setenv("PEAKFORGE_THREADS", "many")
        assert fft_workers() == 1
