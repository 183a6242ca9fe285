import numpy as np
import pytest
from hypothesis import given, strategies as st

from sheetlab.fracdim import (box_count, box_dimension, energy_estimate, holder_exponent,
                              max_level, oscillation_dimension)
from sheetlab.linalg import InvalidInput

X = np.linspace(0.0, 1.0, 4097)


def enumerate_boxes(f, level):
    """Oracle: boxes [i e, (i+1) e] x [k e, (k+1) e) meeting the graph of a
    monotone function given in closed form (closed horizontally, half-open
    vertically so a graph passing through a corner is not double counted)."""
    e = 2.0 ** -level
    total = 0
    for i in range(2 ** level):
        lo, hi = sorted((f(i * e), f((i + 1) * e)))
        for k in range(2 ** level + 1):
            if k * e <= hi and (k + 1) * e > lo:
                total += 1
    return total


def weierstrass(x, s, b=2.0, terms=40):
    k = np.arange(terms)
    return np.sum(b ** (-k * s)[:, None] * np.cos(np.pi * b ** k[:, None] * x[None, :]), axis=0)


def test_constant_count():
    assert box_count(np.zeros(1024), 5) == 32
    assert box_count(np.full((64, 64), 3.0), 3) == 64


def test_line_count_matches_enumeration():
    n = box_count(np.linspace(0, 1, 1024), 5)
    assert 32 <= n <= 64
    assert n == enumerate_boxes(lambda t: t, 5)


def test_level_limits():
    with pytest.raises(InvalidInput):
        box_count(np.zeros(64), 5)
    assert max_level((64,)) == 4
    with pytest.raises(InvalidInput):
        box_dimension(np.zeros(64), (1, 3))


@given(st.integers(0, 2 ** 31), st.sampled_from([256, 1000, 1024]))
def test_counts_monotone(seed, n):
    walk = np.cumsum(np.random.default_rng(seed).normal(size=n))
    counts = [box_count(walk, l) for l in range(max_level((n,)) + 1)]
    assert all(a <= b for a, b in zip(counts, counts[1:]))


@pytest.mark.parametrize("f", [lambda t: 0 * t + 2.0, lambda t: 3 * t - 1, lambda t: t ** 2,
                               lambda t: np.abs((8 * t) % 2 - 1)])
def test_smooth_graphs_have_dimension_one(f):
    est = box_dimension(f(X))
    assert est.value == pytest.approx(1.0, abs=0.05)
    assert holder_exponent(f(X)).value == pytest.approx(1.0, abs=0.05) or np.ptp(f(X)) == 0


@given(st.integers(0, 2 ** 31))
def test_sandwich(seed):
    r = np.random.default_rng(seed)
    v = np.cumsum(np.cumsum(r.normal(size=(129, 129)), 0), 1)
    est = box_dimension(v, (1, 5))
    assert 2.0 - 3 * est.stderr <= est.value <= 3.0 + 3 * est.stderr


@pytest.mark.parametrize("s", [0.3, 0.5, 0.8])
def test_weierstrass_upper_bound(s):
    v = weierstrass(np.linspace(0, 1, 2 ** 14), s)
    assert box_dimension(v).value <= 2 - s + 0.1
    assert holder_exponent(v).value == pytest.approx(s, abs=0.1)
    assert oscillation_dimension(v).value == pytest.approx(2 - s, abs=0.1)


def test_energy_deterministic_and_finite_below_dimension():
    v = np.cumsum(np.random.default_rng(0).normal(size=4096)) / 64
    a = energy_estimate(v, 0.5, n_pairs=20_000, seed=3)
    b = energy_estimate(v, 0.5, n_pairs=20_000, seed=3)
    assert a == b
    assert a.trend == "finite" and a.value > 0 and len(a.partial) == 3


def test_energy_diverges_above_dimension_of_a_line():
    # graph of a line has dimension 1: gamma = 1.5 is far beyond it
    est = energy_estimate(np.linspace(0, 1, 4096), 1.5, n_pairs=50_000, seed=1)
    assert est.trend == "diverging"


def test_energy_argument_checks():
    with pytest.raises(InvalidInput):
        energy_estimate(np.zeros(100), 0.0)
    with pytest.raises(InvalidInput):
        energy_estimate(np.zeros(100), 1.0, n_pairs=100)
