import numpy as np
import pytest
from hypothesis import given, strategies as st

from sheetlab.linalg import DomainError, InvalidInput, mat_power
from sheetlab.polar import (direction, homogeneous_norm, polar, polar_context, radial_part,
                            verify_growth_bounds)

MATRICES = {
    "diag12": np.diag([1.0, 2.0]),
    "jordan": np.array([[1.0, 1.0], [0.0, 1.0]]),
    "rotation": np.array([[1.0, -2.0], [2.0, 1.0]]),
    "mixed3": np.array([[0.8, 1.0, 0.0], [0.0, 1.5, 0.0], [0.0, 0.0, 2.5]]),
}
CTX = {k: polar_context(v) for k, v in MATRICES.items()}


@pytest.mark.parametrize("d", [1, 2, 3])
def test_identity_closed_form(d, rng):
    ctx = polar_context(np.eye(d))
    x = rng.normal(size=(200, d)) * 10.0 ** rng.uniform(-3, 3, (200, 1))
    assert np.allclose(radial_part(ctx, x), np.linalg.norm(x, axis=1), rtol=1e-6)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.5])
def test_scalar_closed_form(a, rng):
    ctx = polar_context(a * np.eye(2))
    x = rng.normal(size=(200, 2))
    expect = (np.linalg.norm(x, axis=1) / a) ** (1 / a)
    assert np.allclose(radial_part(ctx, x), expect, rtol=1e-6)


def test_scalar_matches_numeric_quadrature(rng):
    # the generic path on a nearly scalar matrix agrees with the closed form
    ctx = polar_context(np.array([[1.5, 1e-13], [0.0, 1.5]]))
    x = rng.normal(size=(50, 2))
    expect = (np.linalg.norm(x, axis=1) / 1.5) ** (1 / 1.5)
    assert np.allclose(radial_part(ctx, x), expect, rtol=1e-6)


def test_known_value_diag12():
    # ||x||_0 for x = (0, 9) under diag(1, 2) is 9/2; tau solves 9 r^-2 / 2 = 1
    assert radial_part(CTX["diag12"], [0.0, 9.0]) == pytest.approx(np.sqrt(4.5), rel=1e-9)
    assert homogeneous_norm(CTX["diag12"], [0.0, 9.0]) == pytest.approx(4.5, rel=1e-9)


@pytest.mark.parametrize("name", sorted(MATRICES))
@given(seed=st.integers(0, 2 ** 31), logc=st.floats(-3, 3))
def test_homogeneity(name, seed, logc):
    ctx = CTX[name]
    r = np.random.default_rng(seed)
    x = r.normal(size=ctx.d) * 10 ** r.uniform(-2, 2)
    c = 10.0 ** logc
    lhs = radial_part(ctx, mat_power(c, ctx.A) @ x)
    assert lhs == pytest.approx(c * radial_part(ctx, x), rel=1e-6)


@pytest.mark.parametrize("name", sorted(MATRICES))
def test_polar_roundtrip(name, rng):
    ctx = CTX[name]
    x = rng.normal(size=(100, ctx.d)) * 10 ** rng.uniform(-3, 3, (100, 1))
    tau, L = polar(ctx, x)
    assert np.allclose(homogeneous_norm(ctx, L), 1.0, atol=1e-9)
    back = np.stack([mat_power(t, ctx.A) @ l for t, l in zip(tau, L)])
    assert np.allclose(back, x, rtol=1e-8, atol=1e-12 * np.abs(x).max())


def test_origin():
    ctx = CTX["jordan"]
    assert radial_part(ctx, [0.0, 0.0]) == 0.0
    with pytest.raises(DomainError):
        direction(ctx, [0.0, 0.0])


@pytest.mark.parametrize("name", ["diag12", "jordan"])
def test_growth_bounds_finite_positive(name):
    rep = verify_growth_bounds(CTX[name], samples=2000, seed=1)
    assert rep.ok
    assert 0 < rep.K1 <= rep.K2 or np.isnan(rep.K1)
    assert 0 < rep.K3 <= rep.K4 or np.isnan(rep.K3)


def test_growth_bounds_eps_range():
    with pytest.raises(InvalidInput):
        verify_growth_bounds(CTX["diag12"], eps=0.5)


def test_rejects_non_positive_spectrum():
    with pytest.raises(ValueError):
        polar_context(np.diag([1.0, -1.0]))
