import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import zeta

from jumplab.errors import DistanceUnreachable, DivergentTail, WindowTooLarge
from jumplab.models import (
    KILLED,
    EXTERIOR_TRACKED,
    LadderKernel,
    LatticeModel,
    MuAlternating,
    PolynomialKernel,
    SuppressedPairKernel,
    _pair_rates,
    model_from_dict,
    shell_count,
    shell_tail_sum,
    truncate,
    validate_constants,
)


# ---------------------------------------------------------------------------
# shell geometry
# ---------------------------------------------------------------------------

def brute_shell(d, metric, s):
    count = 0
    for p in itertools.product(range(-s, s + 1), repeat=d):
        dist = max(abs(c) for c in p) if metric == "linf" else sum(abs(c) for c in p)
        count += dist == s
    return count


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("metric", ["linf", "l1"])
@pytest.mark.parametrize("s", [1, 2, 3, 5])
def test_shell_count_brute_force(d, metric, s):
    assert shell_count(d, metric, s) == brute_shell(d, metric, s)


def test_shell_count_closed_forms():
    assert shell_count(1, "linf", 7) == 2
    assert shell_count(2, "linf", 7) == 8 * 7
    assert shell_count(2, "l1", 7) == 4 * 7


def test_tail_sum_matches_long_partial_sum():
    # exact tail minus exact far tail == brute partial sum over 10^7 shells
    start, stop = 4097, 10_000_001
    for d, metric, expo in [(1, "linf", 2.0), (2, "linf", 3.5), (2, "l1", 3.2)]:
        s = np.arange(start, stop, dtype=float)
        if d == 1:
            counts = 2.0
        elif metric == "linf":
            counts = 8.0 * s
        else:
            counts = 4.0 * s
        brute = float(np.sum(counts * s ** (-expo)))
        exact = shell_tail_sum(d, metric, expo, start) - \
            shell_tail_sum(d, metric, expo, stop)
        assert abs(exact - brute) <= 1e-9 * brute


def test_tail_sum_divergent():
    with pytest.raises(DivergentTail):
        shell_tail_sum(2, "linf", 2.0, 10)


@given(st.integers(1, 1000))
def test_tail_sum_monotone_in_start(start):
    a = shell_tail_sum(1, "linf", 2.5, start)
    b = shell_tail_sum(1, "linf", 2.5, start + 1)
    assert 0 < b < a


# ---------------------------------------------------------------------------
# balls and distances
# ---------------------------------------------------------------------------

def test_ball_lexicographic_and_sized(z2):
    ball = z2.ball((0, 0), 2)
    assert ball == sorted(ball)
    assert len(ball) == sum(shell_count(2, "linf", s) for s in range(3))


def test_ball_cap():
    m = LatticeModel(d=2, kernel=PolynomialKernel(1.0), state_cap=10)
    with pytest.raises(WindowTooLarge):
        m.ball((0, 0), 5)


def test_explicit_distance_and_unreachable():
    m = LatticeModel(kind="explicit", vertices=("a", "b", "c", "z"),
                     edges=(("a", "b"), ("b", "c")),
                     kernel=PolynomialKernel(1.0))
    assert m.distance("a", "c") == 2
    with pytest.raises(DistanceUnreachable):
        m.distance("a", "z")


@given(st.integers(-50, 50), st.integers(-50, 50), st.integers(-50, 50))
def test_triangle_inequality(a, b, c):
    m = LatticeModel(d=1, kernel=PolynomialKernel(1.0))
    x, y, z = (a,), (b,), (c,)
    assert m.distance(x, z) <= m.distance(x, y) + m.distance(y, z)


# ---------------------------------------------------------------------------
# kernels and row sums
# ---------------------------------------------------------------------------

def test_row_sum_closed_forms():
    z1 = LatticeModel(d=1, kernel=PolynomialKernel(1.0))
    total, rem = z1.row_sum_all((3,))
    assert abs(total - 2 * zeta(2.0)) < 1e-10
    assert rem < 1e-10

    l1 = LatticeModel(d=2, metric="l1", kernel=PolynomialKernel(1.0))
    total, _ = l1.row_sum_all((0, 0))
    assert abs(total - 4 * zeta(2.0)) < 1e-10

    lad = LatticeModel(d=1, kernel=LadderKernel(alpha=1.5, ranges=(16,)))
    expect = 2 * zeta(2.5) + 2 * math.log(16) * 16.0 ** (-2.5)
    total, _ = lad.row_sum_all((0,))
    assert abs(total - expect) < 1e-10


def test_suppressed_pair_row_sum_and_symmetry():
    base = PolynomialKernel(1.0)
    m = LatticeModel(d=1, kernel=SuppressedPairKernel(base=base,
                                                      x0=(0,), y0=(8,)))
    assert m.J((0,), (8,)) == 0.0
    assert m.J((8,), (0,)) == 0.0
    assert m.J((0,), (7,)) == 7.0 ** -2
    total, _ = m.row_sum_all((0,))
    plain, _ = LatticeModel(d=1, kernel=base).row_sum_all((0,))
    assert abs(total - (plain - 8.0 ** -2)) < 1e-12


def test_row_sum_region_splits():
    m = LatticeModel(d=1, kernel=PolynomialKernel(1.0))
    total, _ = m.row_sum_all((0,))
    inside = sum(m.J((0,), (k,)) for k in range(-6, 7))
    out, _ = m.row_sum_region((0,), ("outside_ball", (0,), 6))
    assert abs(out - (total - inside)) < 1e-12
    ann, _ = m.row_sum_region((0,), ("annulus", 3, 6))
    brute = sum(m.J((0,), (k,)) for k in range(-6, 7) if 3 <= abs(k) <= 6)
    assert abs(ann - brute) < 1e-15


@settings(max_examples=30)
@given(st.integers(-20, 20), st.integers(-20, 20),
       st.integers(-20, 20), st.integers(-20, 20))
def test_pair_rates_matches_pointwise(ax, ay, bx, by):
    m = LatticeModel(d=2, kernel=PolynomialKernel(0.8))
    xs, ys = [(ax, ay)], [(bx, by)]
    assert _pair_rates(m, xs, ys)[0, 0] == pytest.approx(m.J(xs[0], ys[0]),
                                                         rel=4e-16, abs=0)


def test_pair_rates_suppression_positional():
    m = LatticeModel(d=1, kernel=SuppressedPairKernel(
        base=PolynomialKernel(1.0), x0=(0,), y0=(4,)))
    A = _pair_rates(m, [(0,), (1,)], [(4,), (5,)])
    assert A[0, 0] == 0.0
    assert A[0, 1] == m.J((0,), (5,))
    assert A[1, 0] == m.J((1,), (4,))


# ---------------------------------------------------------------------------
# windows
# ---------------------------------------------------------------------------

def test_truncate_kill_consistency(z1):
    killed = truncate(z1, (0,), 8, KILLED)
    tracked = truncate(z1, (0,), 8, EXTERIOR_TRACKED)
    recon = tracked.coupling.sum(axis=1) / tracked.mu + tracked.remainder_kill
    assert np.max(np.abs(recon - killed.kill)) < 1e-14
    assert np.max(np.abs(killed.kill - tracked.kill)) == 0.0


def test_truncate_alternating_mu():
    m = LatticeModel(d=1, kernel=PolynomialKernel(1.0),
                     mu_rule=MuAlternating(even=1.0, odd=3.0))
    fm = truncate(m, (0,), 4, KILLED)
    for v, mu in zip(fm.window, fm.mu):
        assert mu == (1.0 if v[0] % 2 == 0 else 3.0)


def test_serialization_round_trip():
    m = LatticeModel(d=2, metric="l1",
                     kernel=SuppressedPairKernel(base=PolynomialKernel(1.3),
                                                 x0=(0, 0), y0=(2, 1)),
                     mu_rule=MuAlternating(1.0, 2.0))
    m2 = model_from_dict(m.to_dict())
    assert m2.digest() == m.digest()
    assert m2.J((0, 0), (2, 1)) == 0.0
    assert m2.J((1, 0), (2, 1)) == m.J((1, 0), (2, 1))


def test_validate_constants():
    m = LatticeModel(d=1, kernel=PolynomialKernel(1.0), c_j=4.0, c_m=1.0)
    obs = validate_constants(m, [(0,), (5,)])
    assert obs["row_max"] < 4.0
    bad = LatticeModel(d=1, kernel=PolynomialKernel(1.0), c_j=1.0)
    with pytest.raises(ValueError):
        validate_constants(bad, [(0,)])
