import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from peakforge.bubbles import BubbleParams, CutoffSpec, bubble, cutoff, cutoff_radial
from peakforge.cli import parse_overrides
from peakforge.extension import richardson
from peakforge.field_ops import Field, FracOrder, PeakConfig, _frac_lap, green_apply, make_grid, peak_weight
from peakforge.potentials import Bump, PotentialModel, preset_k2

GRID = make_grid(1, 4.0, 64)
GRID2 = make_grid(2, 3.0, 16)

orders = st.floats(0.05, 0.95)
seeds = st.integers(0, 2**32 - 1)
lams = st.floats(0.1, 20.0)
coords = st.floats(-3.0, 3.0)


def _noise(seed, grid):
    return np.random.default_rng(seed).standard_normal(grid.shape)


@given(orders, orders, seeds)
def test_fractional_powers_compose(a, b, seed):
    f = _noise(seed, GRID2)
    lhs = _frac_lap(_frac_lap(f, GRID2, a), GRID2, b)
    scale = np.max(np.abs(_frac_lap(f, GRID2, a + b)))
    np.testing.assert_allclose(lhs, _frac_lap(f, GRID2, a + b), atol=1e-11 * scale)


@given(orders, seeds)
def test_green_inverts_on_zero_mean_fields(s, seed):
    f = _noise(seed, GRID)
    f -= f.mean()
    back = green_apply(Field(GRID, _frac_lap(f, GRID, s)), s).values
    np.testing.assert_allclose(back, f, atol=1e-11)


@given(orders, seeds, st.floats(-5, 5), st.floats(-5, 5))
def test_fractional_laplacian_is_linear(s, seed, alpha, beta):
    rng = np.random.default_rng(seed)
    f, g = rng.standard_normal(64), rng.standard_normal(64)
    lhs = _frac_lap(alpha * f + beta * g, GRID, s)
    rhs = alpha * _frac_lap(f, GRID, s) + beta * _frac_lap(g, GRID, s)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + abs(alpha) + abs(beta)) * np.max(np.abs(_frac_lap(f, GRID, s) + _frac_lap(g, GRID, s)) + 1))


@given(st.sampled_from([(1, 0.2), (1, 0.4), (2, 0.3), (3, 0.7)]), lams, coords, coords)
def test_bubble_scaling_and_translation(case, lam, xi, y):
    N, s = case
    order = FracOrder(N, s)
    x = np.full((3, N), y) + np.arange(3)[:, None] * 0.5
    center = np.full(N, xi)
    U = bubble(x, BubbleParams(lam, tuple(center), order))
    U1 = bubble(lam * (x - center), BubbleParams(1.0, (0.0,) * N, order))
    np.testing.assert_allclose(U, lam ** ((N - 2 * s) / 2) * U1, rtol=1e-12)


@given(st.lists(st.floats(0.0, 20.0), min_size=1, max_size=20), st.floats(0.1, 5.0))
def test_cutoff_is_a_partition(r, delta):
    r = np.asarray(r)
    eta = cutoff_radial(r, delta)
    assert np.all((eta >= 0) & (eta <= 1))
    assert np.all(eta[r <= delta] == 1) and np.all(eta[r >= 2 * delta] == 0)
    order = np.argsort(r)
    assert np.all(np.diff(eta[order]) <= 1e-15)


@given(coords, coords, st.floats(0.5, 3.0))
def test_cutoff_depends_on_distance_only(a, b, delta):
    spec = CutoffSpec(delta, (a,))
    x = np.array([[a + b], [a - b]])
    v = cutoff(x, spec)
    assert abs(v[0] - v[1]) < 1e-12


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(0.05, 0.5))
def test_richardson_is_exact_on_integer_powers(c, t0):
    t = t0 * 2.0 ** -np.arange(4)
    vals = c[0] + c[1] * t + c[2] * t**2 + c[3] * t**3
    best, _ = richardson(vals, [1.0, 2.0, 3.0])
    assert abs(best - c[0]) < 1e-9 * (1 + sum(map(abs, c)))


@given(st.floats(-20, 20))
def test_k2_potential_is_even_and_bounded(x):
    V = preset_k2()
    v = V.value(np.array([[x], [-x]]))
    # the two wells are summed in opposite order, so equality holds to rounding
    assert abs(v[0] - v[1]) <= 4e-16 and 0 < v[0] <= 1


@given(st.lists(st.tuples(coords, st.floats(-0.4, 0.4), st.floats(0.2, 5.0)), max_size=3), st.floats(0.5, 2.0))
def test_potential_dict_roundtrip(bumps, base):
    V = PotentialModel(1, base, tuple(Bump((c,), a, w) for c, a, w in bumps))
    W = PotentialModel.from_dict(V.to_dict())
    x = np.linspace(-5, 5, 11)[:, None]
    np.testing.assert_array_equal(W.value(x), V.value(x))


@settings(max_examples=30)
@given(lams, coords, st.sampled_from(["star", "star_star"]))
def test_weights_are_positive(lam, xi, kind):
    cfg = PeakConfig(((lam, (xi,)),), 1.0, FracOrder(1, 0.2, 0.1))
    w = peak_weight(GRID.points, cfg, kind)
    assert np.all(np.isfinite(w)) and np.all(w > 0)


keys = st.text("abcdefgh_", min_size=1, max_size=6)
values = st.one_of(st.integers(-100, 100), st.floats(-1e3, 1e3, allow_nan=False), st.booleans(), st.lists(st.integers(0, 9), max_size=3))


@given(st.dictionaries(keys, st.dictionaries(keys, values, min_size=1, max_size=3), min_size=1, max_size=3))
def test_overrides_roundtrip(tree):
    import json

    items = [f"--{a}.{b}={json.dumps(v)}" for a, sub in tree.items() for b, v in sub.items()]
    assert parse_overrides(items) == tree
