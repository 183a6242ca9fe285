import numpy as np
import pytest

from sheetlab.homogeneous import PsiSpec, ValidationFailed, psi_eval, validate_psi
from sheetlab.linalg import InvalidInput
from sheetlab.polar import polar_context


def test_radial_on_scalar_block_is_abs():
    ctx = polar_context(np.eye(1))
    xi = np.array([[-3.0], [0.5], [2.0]])
    assert np.allclose(psi_eval(PsiSpec(), ctx, xi), [3.0, 0.5, 2.0])


@pytest.mark.parametrize("A", [np.diag([1.0, 2.0]), np.array([[1.0, 0.0], [1.0, 1.0]]),
                               np.array([[1.0, 2.0], [-2.0, 1.0]])])
def test_radial_is_homogeneous(A):
    rep = validate_psi(PsiSpec(), polar_context(A), trials=300, seed=3)
    assert rep.ok and rep.worst_rel_error < 1e-6


def test_power_sum_on_eigenbasis():
    ctx = polar_context(np.diag([1.0, 2.0]))
    spec = PsiSpec.power_sum([(1, 0), (0, 1)], [1.0, 2.0], rho=2.0)
    rep = validate_psi(spec, ctx, trials=500)
    assert rep.ok
    # direct formula
    xi = np.array([[3.0, 4.0]])
    assert psi_eval(spec, ctx, xi)[0] == pytest.approx(np.sqrt(9.0 + 4.0))


def test_power_sum_wrong_directions_fails_with_witness():
    ctx = polar_context(np.diag([1.0, 2.0]))
    c, s = np.cos(0.4), np.sin(0.4)
    bad = PsiSpec.power_sum([(c, s), (-s, c)], [1.0, 2.0])
    with pytest.raises(ValidationFailed) as info:
        validate_psi(bad, ctx, trials=200)
    xi, scale = info.value.witness
    assert len(xi) == 2 and scale > 0


@pytest.mark.parametrize("kwargs", [
    dict(kind="other"),
    dict(kind="powersum", thetas=((1.0,),), exponents=()),
    dict(kind="powersum", thetas=((1.0,),), exponents=(-1.0,)),
    dict(kind="powersum", thetas=((1.0,),), exponents=(1.0,), rho=0.5),
])
def test_invalid_specs(kwargs):
    with pytest.raises(InvalidInput):
        PsiSpec(**kwargs)


def test_dict_roundtrip():
    spec = PsiSpec.power_sum([(1, 0), (0, 1)], [1.0, 2.0], rho=3.0)
    assert PsiSpec.from_dict(spec.to_dict()) == spec
    assert PsiSpec.from_dict({"kind": "radial"}) == PsiSpec()
