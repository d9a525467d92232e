import numpy as np
import pytest

from peakforge.bubbles import (
    BubbleParams,
    CutoffSpec,
    basis_Z,
    bubble,
    bubble_gradient,
    bubble_source,
    cutoff,
    cutoff_grad,
    cutoff_radial,
    dbubble_dlambda,
    dbubble_dxi,
    dlambda_gradient,
    dlambda_source,
    gamma_const,
    gamma_const_printed,
    multibump,
    truncated_bubble,
)
from peakforge.errors import ConfigError
from peakforge.field_ops import FracOrder, PeakConfig


def _fd(fn, h=1e-6):
    return (fn(h) - fn(-h)) / (2 * h)


class TestNormalization:
    def test_known_value(self):
        assert gamma_const(3, 0.5) == pytest.approx(2.0, abs=1e-12)

    def test_printed_form_differs_away_from_the_special_case(self):
        assert gamma_const_printed(3, 0.5) == pytest.approx(gamma_const(3, 0.5))
        assert gamma_const_printed(1, 0.25) != pytest.approx(gamma_const(1, 0.25), rel=1e-3)

    def test_peak_height(self):
        o = FracOrder(2, 0.3)
        bp = BubbleParams(3.0, (0.5, -1.0), o)
        top = bubble(np.array([0.5, -1.0]), bp)
        assert top == pytest.approx(gamma_const(2, 0.3) * 3.0 ** ((2 - 0.6) / 2))

    def test_rejects_bad_parameters(self):
        with pytest.raises(ConfigError):
            gamma_const(1, 0.6)
        with pytest.raises(ConfigError):
            BubbleParams(0.0, (0.0,), FracOrder(1, 0.2))
        with pytest.raises(ConfigError):
            CutoffSpec(-1.0, (0.0,))


class TestDerivatives:
    x = np.array([[0.3, -0.7], [1.5, 0.2], [-2.0, 2.5]])
    o = FracOrder(2, 0.3)

    def test_lambda_derivative(self):
        bp = BubbleParams(1.7, (0.1, 0.2), self.o)
        fd = _fd(lambda h: bubble(self.x, BubbleParams(1.7 + h, (0.1, 0.2), self.o)))
        np.testing.assert_allclose(dbubble_dlambda(self.x, bp), fd, rtol=1e-7)

    @pytest.mark.parametrize("axis", [0, 1])
    def test_center_derivative(self, axis):
        bp = BubbleParams(1.7, (0.1, 0.2), self.o)

        def shifted(h):
            xi = np.array([0.1, 0.2])
            xi[axis] += h
            return bubble(self.x, BubbleParams(1.7, tuple(xi), self.o))

        np.testing.assert_allclose(dbubble_dxi(self.x, bp, axis), _fd(shifted), rtol=1e-7)
        np.testing.assert_allclose(bubble_gradient(self.x, bp)[:, axis], -_fd(shifted), rtol=1e-7)

    def test_gradient_of_lambda_derivative(self):
        bp = BubbleParams(1.7, (0.1, 0.2), self.o)
        for a in range(2):
            e = np.eye(2)[a]
            fd = _fd(lambda h: dbubble_dlambda(self.x + h * e, bp))
            np.testing.assert_allclose(dlambda_gradient(self.x, bp)[:, a], fd, rtol=1e-6, atol=1e-12)


class TestCutoff:
    def test_profile(self):
        r = np.linspace(0, 5, 501)
        eta = cutoff_radial(r, 2.0)
        assert np.all(eta[r <= 2.0] == 1.0)
        assert np.all(eta[r >= 4.0] == 0.0)
        assert np.all(np.diff(eta) <= 0)

    def test_gradient(self):
        spec = CutoffSpec(1.0, (0.0, 0.0))
        x = np.array([[1.2, 0.4], [0.3, -1.5]])
        for a in range(2):
            e = np.eye(2)[a]
            fd = _fd(lambda h: cutoff(x + h * e, spec))
            np.testing.assert_allclose(cutoff_grad(x, spec)[:, a], fd, rtol=1e-6)


class TestAnsatz:
    o = FracOrder(1, 0.2)

    def test_multibump_is_the_sum(self):
        cfg = PeakConfig(((2.0, (-6.0,)), (3.0, (6.0,))), 1.0, self.o)
        x = np.linspace(-10, 10, 201)[:, None]
        total = truncated_bubble(x, cfg, 0) + truncated_bubble(x, cfg, 1)
        np.testing.assert_array_equal(multibump(x, cfg), total)
        with pytest.raises(ConfigError):
            truncated_bubble(x, cfg, 2)

    def test_basis_matches_parameter_derivatives(self):
        x = np.linspace(-3, 3, 61)[:, None]
        cfg = PeakConfig(((2.0, (0.2,)),), 1.0, self.o)
        fd_lam = _fd(lambda h: multibump(x, cfg.replace(lambdas=[2.0 + h])))
        fd_xi = _fd(lambda h: multibump(x, cfg.replace(centers=[[0.2 + h]])))
        np.testing.assert_allclose(basis_Z(0, 0, x, cfg), fd_lam, atol=1e-7)
        np.testing.assert_allclose(basis_Z(0, 1, x, cfg), fd_xi, atol=1e-7)
        with pytest.raises(ConfigError):
            basis_Z(0, 2, x, cfg)

    def test_closed_form_sources(self):
        bp = BubbleParams(1.0, (0.0,), self.o)
        x = np.array([[0.0], [0.5], [3.0]])
        src = bubble_source(bp)
        np.testing.assert_allclose(src.frac_lap(x), bubble(x, bp) ** self.o.p)
        z = dlambda_source(bp)
        np.testing.assert_allclose(z.values(x), dbubble_dlambda(x, bp))
