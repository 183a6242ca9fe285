"""Polar coordinates x = tau^A l with respect to a scaling matrix A.

The radial part is defined through the homogeneous norm

    ||x||_0 = int_0^1 ||t^A x|| dt / t = int_0^inf ||exp(-sA) x|| ds,

where ||.|| is an inner-product norm in which the spectral subspaces of A are
mutually orthogonal. tau_A(x) is the unique r > 0 with ||r^{-A} x||_0 = 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (DomainError, InvalidInput, NumericalError, SpectralDecomposition,
                     as_square, expm_stack, spectral_decompose)

_GL16 = np.polynomial.legendre.leggauss(16)
_LOG_R_MIN, _LOG_R_MAX = np.log(1e-30), np.log(1e30)
_CHUNK = 8192


def _composite_gl(a: float, b: float, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x0, w0 = _GL16
    panels = max(1, n_nodes // 16)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
    weights = (half[:, None] * w0[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True, eq=False)
class PolarContext:
    A: np.ndarray
    spectral: SpectralDecomposition
    metric: np.ndarray
    n_nodes: int
    horizon: float
    scalar: float | None = None          # set when A = a I
    _nodes: np.ndarray = field(repr=False, default=None)
    _weights: np.ndarray = field(repr=False, default=None)
    _quadform: np.ndarray = field(repr=False, default=None)   # exp(-sA)^T G exp(-sA)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def a_min(self) -> float:
        return self.spectral.a_min

    @property
    def a_max(self) -> float:
        return self.spectral.a_max

    @property
    def trace(self) -> float:
        return float(np.trace(self.A))


def adapted_metric(spectral: SpectralDecomposition) -> np.ndarray:
    """Gram matrix of the inner product making the concatenated (orthonormal
    within each V_i) subspace bases an orthonormal basis of R^d."""
    B = np.hstack(spectral.bases)
    Binv = np.linalg.inv(B)
    G = Binv.T @ Binv
    return 0.5 * (G + G.T)


def _quad_tables(A, G, horizon, n_nodes):
    s, w = _composite_gl(0.0, horizon, n_nodes)
    M = expm_stack(A, -s)
    Q = np.einsum("kji,jl,klm->kim", M, G, M)
    return s, w, Q


def _norm0_with(Q, w, Y):
    out = np.empty(Y.shape[0])
    for i in range(0, Y.shape[0], _CHUNK):
        y = Y[i:i + _CHUNK]
        yy = (y[:, :, None] * y[:, None, :]).reshape(y.shape[0], -1)
        sq = yy @ Q.reshape(Q.shape[0], -1).T
        out[i:i + _CHUNK] = np.sqrt(np.maximum(sq, 0.0)) @ w
    return out


def polar_context(A, n_nodes: int = 256, rtol: float = 1e-9,
                  max_nodes: int = 8192) -> PolarContext:
    """Build the polar-coordinate machinery for A.

    Quadrature of the homogeneous norm uses composite 16-point Gauss-Legendre on
    [0, 60/a_1]; the node count doubles from ``n_nodes`` until two successive
    rules agree to ``rtol`` on a set of probe vectors.
    """
    A = as_square(A, "A")
    spectral = spectral_decompose(A, require_positive=True)
    G = adapted_metric(spectral)
    d = A.shape[0]
    horizon = 60.0 / spectral.a_min
    if np.allclose(A, A[0, 0] * np.eye(d), rtol=0, atol=1e-15):
        return PolarContext(A=A, spectral=spectral, metric=G, n_nodes=0,
                            horizon=horizon, scalar=float(A[0, 0]))
    rng = np.random.default_rng(0)
    probes = np.vstack([np.eye(d), rng.standard_normal((4, d))])
    n = n_nodes
    s, w, Q = _quad_tables(A, G, horizon, n)
    prev = _norm0_with(Q, w, probes)
    while True:
        if 2 * n > max_nodes:
            raise NumericalError("homogeneous-norm quadrature did not converge")
        s2, w2, Q2 = _quad_tables(A, G, horizon, 2 * n)
        cur = _norm0_with(Q2, w2, probes)
        if np.max(np.abs(cur - prev) / cur) <= rtol:
            break
        n, s, w, Q, prev = 2 * n, s2, w2, Q2, cur
    return PolarContext(A=A, spectral=spectral, metric=G, n_nodes=n, horizon=horizon,
                        _nodes=s, _weights=w, _quadform=Q)


def _rows(ctx: PolarContext, x) -> tuple[np.ndarray, tuple]:
    x = np.asarray(x, dtype=float)
    if x.shape == () or x.shape[-1] != ctx.d:
        if ctx.d == 1:
            x = x[..., None]
        else:
            raise InvalidInput(f"expected vectors of length {ctx.d}, got shape {x.shape}")
    return x.reshape(-1, ctx.d), x.shape[:-1]


def metric_norm(ctx: PolarContext, x) -> np.ndarray:
    X, shape = _rows(ctx, x)
    sq = np.einsum("ni,ij,nj->n", X, ctx.metric, X)
    return np.sqrt(np.maximum(sq, 0.0)).reshape(shape)


def homogeneous_norm(ctx: PolarContext, x) -> np.ndarray:
    """||x||_0 = int_0^inf ||exp(-sA) x|| ds (vectorized over leading axes)."""
    X, shape = _rows(ctx, x)
    if ctx.scalar is not None:
        return (metric_norm(ctx, X) / ctx.scalar).reshape(shape)
    return _norm0_with(ctx._quadform, ctx._weights, X).reshape(shape)


def _log_norm0_shifted(ctx, X, u):
    """(log ||e^{-uA}x||_0, d/du of it) for per-row shifts u."""
    Y = np.einsum("nij,nj->ni", expm_stack(ctx.A, -u), X)
    n0 = _norm0_with(ctx._quadform, ctx._weights, Y)
    ng = np.sqrt(np.maximum(np.einsum("ni,ij,nj->n", Y, ctx.metric, Y), 0.0))
    return np.log(n0), -ng / n0


def _solve_log_radius(ctx: PolarContext, X: np.ndarray) -> np.ndarray:
    """Safeguarded Newton in u = log r on phi(u) = log ||r^{-A} x||_0 (decreasing)."""
    n = X.shape[0]
    nrm = np.sqrt(np.einsum("ni,ij,nj->n", X, ctx.metric, X))
    u = np.log(nrm) / ctx.a_min
    phi, _ = _log_norm0_shifted(ctx, X, u)
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    lo[phi > 0] = u[phi > 0]
    hi[phi <= 0] = u[phi <= 0]
    # bracket expansion by factors of 2 in r
    step = np.log(2.0)
    probe = u.copy()
    need = ~(np.isfinite(lo) & np.isfinite(hi))
    while np.any(need):
        idx = np.flatnonzero(need)
        up = ~np.isfinite(hi[idx])
        probe[idx] = np.where(up, probe[idx] + step, probe[idx] - step)
        if np.any(probe[idx] > _LOG_R_MAX) or np.any(probe[idx] < _LOG_R_MIN):
            raise NumericalError("radial bracket not found in [1e-30, 1e30]")
        p, _ = _log_norm0_shifted(ctx, X[idx], probe[idx])
        pos = p > 0
        lo[idx[pos]] = probe[idx[pos]]
        hi[idx[~pos]] = probe[idx[~pos]]
        need = ~(np.isfinite(lo) & np.isfinite(hi))
    u = np.clip(u, lo, hi)
    active = np.ones(n, dtype=bool)
    for _ in range(200):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        p, dp = _log_norm0_shifted(ctx, X[idx], u[idx])
        pos = p > 0
        lo[idx[pos]] = u[idx[pos]]
        hi[idx[~pos]] = u[idx[~pos]]
        with np.errstate(divide="ignore", invalid="ignore"):
            new = u[idx] - p / dp
        bad = ~np.isfinite(new) | (new < lo[idx]) | (new > hi[idx])
        new[bad] = 0.5 * (lo[idx[bad]] + hi[idx[bad]])
        delta = np.abs(new - u[idx])
        u[idx] = new
        done = (delta <= 1e-14 * np.maximum(1.0, np.abs(new))) | (np.abs(p) < 1e-15)
        active[idx[done]] = False
    else:
        raise NumericalError("radial-part solve did not converge")
    return u


def radial_part(ctx: PolarContext, x) -> np.ndarray:
    """tau_A(x): the unique r > 0 with ||r^{-A} x||_0 = 1; tau_A(0) = 0."""
    X, shape = _rows(ctx, x)
    if not np.all(np.isfinite(X)):
        raise InvalidInput("non-finite point")
    nrm = metric_norm(ctx, X)
    out = np.zeros(X.shape[0])
    nz = nrm > 0
    if ctx.scalar is not None:
        a = ctx.scalar
        out[nz] = (nrm[nz] / a) ** (1.0 / a)
    elif np.any(nz):
        out[nz] = np.exp(_solve_log_radius(ctx, X[nz]))
    return out.reshape(shape)


def direction(ctx: PolarContext, x) -> np.ndarray:
    """l_A(x) = tau_A(x)^{-A} x, a point of the unit sphere {tau_A = 1}."""
    X, shape = _rows(ctx, x)
    tau = radial_part(ctx, X)
    if np.any(tau == 0):
        raise DomainError("direction of the origin is undefined")
    L = np.einsum("nij,nj->ni", expm_stack(ctx.A, -np.log(tau)), X)
    return L.reshape(shape + (ctx.d,))


def polar(ctx: PolarContext, x) -> tuple[np.ndarray, np.ndarray]:
    X, shape = _rows(ctx, x)
    tau = radial_part(ctx, X)
    L = np.zeros_like(X)
    nz = tau > 0
    L[nz] = np.einsum("nij,nj->ni", expm_stack(ctx.A, -np.log(tau[nz])), X[nz])
    return tau.reshape(shape), L.reshape(shape + (ctx.d,))


@dataclass
class BoundReport:
    eps: float
    K1: float   # min tau/||x||^(1/a1+eps), tau <= 1
    K2: float   # max tau/||x||^(1/ap-eps), tau <= 1
    K3: float   # min tau/||x||^(1/ap-eps), tau >= 1
    K4: float   # max tau/||x||^(1/a1+eps), tau >= 1
    n_inner: int
    n_outer: int
    shrinks_to_zero: bool

    @property
    def ok(self) -> bool:
        ks = np.array([self.K1, self.K2, self.K3, self.K4])
        return bool(np.all(np.isfinite(ks)) and np.all(ks > 0) and self.shrinks_to_zero)


def verify_growth_bounds(ctx: PolarContext, samples: int = 10_000, eps: float = None,
                         seed: int = 0, log10_radius: tuple = (-4.0, 4.0)) -> BoundReport:
    """Empirical constants of the two-sided power bounds on tau_A in terms of
    ||x|| with exponents 1/a_1 + eps and 1/a_p - eps."""
    a1, ap = ctx.a_min, ctx.a_max
    limit = min(a1, 1.0 / a1) / 10.0
    if eps is None:
        eps = limit / 2
    if not 0 < eps < limit:
        raise InvalidInput(f"eps must lie in (0, {limit:.4g})")
    if samples < 2:
        raise InvalidInput("need at least two samples")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((samples, ctx.d))
    dirs /= metric_norm(ctx, dirs)[:, None]
    radii = 10.0 ** rng.uniform(*log10_radius, samples)
    X = dirs * radii[:, None]
    tau = radial_part(ctx, X)
    nrm = metric_norm(ctx, X)
    if np.all(tau == 0):
        raise InvalidInput("degenerate sampling: all radial parts vanish")
    lo_exp, hi_exp = 1.0 / a1 + eps, 1.0 / ap - eps
    r_lo = tau / nrm ** lo_exp
    r_hi = tau / nrm ** hi_exp
    inner, outer = tau <= 1, tau >= 1
    nan = float("nan")
    K1 = float(r_lo[inner].min()) if inner.any() else nan
    K2 = float(r_hi[inner].max()) if inner.any() else nan
    K3 = float(r_hi[outer].min()) if outer.any() else nan
    K4 = float(r_lo[outer].max()) if outer.any() else nan
    # tau -> 0 along rays as ||x|| -> 0
    ray = dirs[:8]
    scales = 10.0 ** np.linspace(0, -8, 17)
    pts = ray[:, None, :] * scales[None, :, None]
    tr = radial_part(ctx, pts)
    shrinks = bool(np.all(np.diff(tr, axis=1) < 0) and np.all(tr[:, -1] < 1e-2 * tr[:, 0]))
    return BoundReport(eps=eps, K1=K1, K2=K2, K3=K3, K4=K4,
                       n_inner=int(inner.sum()), n_outer=int(outer.sum()),
                       shrinks_to_zero=shrinks)
