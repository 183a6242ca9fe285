"""Spectral shape functions psi: continuous, E^T-homogeneous
(psi(c^{E^T} xi) = c psi(xi)) and positive away from the origin."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import InvalidInput, mat_power
from .polar import PolarContext, metric_norm, radial_part

RADIAL = "radial"
POWERSUM = "powersum"


class ValidationFailed(AssertionError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class PsiSpec:
    kind: str = RADIAL
    thetas: tuple = ()        # PowerSum directions
    exponents: tuple = ()     # PowerSum b_k
    rho: float = 2.0

    def __post_init__(self):
        if self.kind not in (RADIAL, POWERSUM):
            raise InvalidInput(f"unknown psi kind {self.kind!r}")
        if self.kind == POWERSUM:
            if len(self.thetas) == 0 or len(self.thetas) != len(self.exponents):
                raise InvalidInput("PowerSum needs one exponent per direction")
            if any(b <= 0 for b in self.exponents):
                raise InvalidInput("PowerSum exponents must be positive")
            if self.rho < 1:
                raise InvalidInput("PowerSum mixing power must be >= 1")

    @classmethod
    def power_sum(cls, thetas, exponents, rho=2.0):
        return cls(POWERSUM, tuple(tuple(float(v) for v in np.atleast_1d(t)) for t in thetas),
                   tuple(float(b) for b in exponents), float(rho))

    def to_dict(self) -> dict:
        if self.kind == RADIAL:
            return {"kind": RADIAL}
        return {"kind": POWERSUM, "thetas": [list(t) for t in self.thetas],
                "exponents": list(self.exponents), "rho": self.rho}

    @classmethod
    def from_dict(cls, data) -> "PsiSpec":
        if data is None or data.get("kind", RADIAL) == RADIAL:
            return cls()
        return cls.power_sum(data["thetas"], data["exponents"], data.get("rho", 2.0))


def psi_eval(spec: PsiSpec, block_ctx: PolarContext, xi) -> np.ndarray:
    """Evaluate psi at points xi (last axis of length d_j).

    ``block_ctx`` is the polar context of the transposed block E_j^T.
    """
    if spec.kind == RADIAL:
        return radial_part(block_ctx, xi)
    xi = np.asarray(xi, dtype=float)
    if block_ctx.d == 1 and (xi.ndim == 0 or xi.shape[-1] != 1):
        xi = xi[..., None]
    thetas = np.asarray(spec.thetas, dtype=float)
    if thetas.shape[1] != block_ctx.d:
        raise InvalidInput("PowerSum directions do not match the block dimension")
    proj = np.abs(xi @ thetas.T)
    b = np.asarray(spec.exponents)
    with np.errstate(divide="ignore"):
        total = np.sum(proj ** (spec.rho / b), axis=-1)
    return total ** (1.0 / spec.rho)


@dataclass
class ValidationReport:
    trials: int
    worst_rel_error: float
    min_value: float
    witness: tuple = field(default=None)

    @property
    def ok(self) -> bool:
        return self.worst_rel_error <= 1e-6 and self.min_value > 0


def validate_psi(spec: PsiSpec, block_ctx: PolarContext, trials: int = 1000,
                 seed: int = 0, rtol: float = 1e-6, raise_on_fail: bool = True) -> ValidationReport:
    """Spot-check homogeneity psi(c^{A} xi) = c psi(xi) (A = E^T) and positivity
    off the origin on random (xi, c), c log-uniform in [1e-2, 1e2]."""
    if trials < 1:
        raise InvalidInput("trials must be >= 1")
    rng = np.random.default_rng(seed)
    d = block_ctx.d
    xi = rng.standard_normal((trials, d))
    xi *= (10.0 ** rng.uniform(-6, 6, trials) / metric_norm(block_ctx, xi))[:, None]
    cs = 10.0 ** rng.uniform(-2, 2, trials)
    base = psi_eval(spec, block_ctx, xi)
    scaled_pts = np.stack([mat_power(c, block_ctx.A) @ x for c, x in zip(cs, xi)])
    scaled = psi_eval(spec, block_ctx, scaled_pts)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(scaled - cs * base) / (cs * base)
    rel = np.where(np.isfinite(rel), rel, np.inf)
    k = int(np.argmax(rel))
    report = ValidationReport(trials=trials, worst_rel_error=float(rel[k]),
                              min_value=float(np.min(base)),
                              witness=(xi[k].tolist(), float(cs[k])))
    if raise_on_fail and (report.worst_rel_error > rtol or report.min_value <= 0):
        raise ValidationFailed(
            f"psi fails homogeneity: rel. error {report.worst_rel_error:.3g} "
            f"at xi={xi[k].tolist()}, c={cs[k]:.6g}", witness=report.witness)
    return report
