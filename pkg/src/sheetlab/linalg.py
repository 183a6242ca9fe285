"""Small dense matrix kernel: matrix powers c^E, spectral decomposition by
eigenvalue real parts, and block assembly of the sheet scaling matrices."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

MAX_ORDER = 16


class InvalidInput(ValueError):
    pass


class DomainError(ValueError):
    pass


class NumericalError(ArithmeticError):
    pass


def as_square(M, name: str = "matrix") -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {M.shape}")
    if M.shape[0] > MAX_ORDER:
        raise InvalidInput(f"{name} has order {M.shape[0]} > {MAX_ORDER}")
    if not np.all(np.isfinite(M)):
        raise InvalidInput(f"{name} has non-finite entries")
    return M


def mat_exp(M) -> np.ndarray:
    """exp(M) by scaling and squaring with a Pade approximant."""
    return sla.expm(as_square(M))


def mat_power(c: float, E) -> np.ndarray:
    """c^E = exp(log(c) E) for c > 0."""
    if not (np.isfinite(c) and c > 0):
        raise InvalidInput(f"c must be positive, got {c}")
    E = as_square(E, "E")
    if c == 1.0:
        return np.eye(E.shape[0])
    return sla.expm(np.log(c) * E)


def expm_stack(A: np.ndarray, t: np.ndarray) -> np.ndarray:
    """exp(t_k A) for every entry of the 1-d array ``t``; shape (len(t), d, d)."""
    t = np.asarray(t, dtype=float).ravel()
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    if d == 1:
        return np.exp(t * A[0, 0])[:, None, None]
    if np.count_nonzero(A - np.diag(np.diag(A))) == 0:
        out = np.zeros((t.size, d, d))
        idx = np.arange(d)
        out[:, idx, idx] = np.exp(t[:, None] * np.diag(A)[None, :])
        return out
    return sla.expm(t[:, None, None] * A[None, :, :])


def trace(M) -> float:
    return float(np.trace(as_square(M)))


@dataclass(frozen=True)
class SpectralDecomposition:
    exponents: np.ndarray          # a_1 < ... < a_p
    projectors: tuple              # oblique projectors onto V_i
    bases: tuple                   # orthonormal (Euclidean) basis of each V_i
    dims: tuple

    @property
    def p(self) -> int:
        return len(self.exponents)

    @property
    def a_min(self) -> float:
        return float(self.exponents[0])

    @property
    def a_max(self) -> float:
        return float(self.exponents[-1])


def _cluster(values: np.ndarray, tol: float) -> list[float]:
    vals = np.sort(values)
    groups = [[vals[0]]]
    for v in vals[1:]:
        if v - groups[-1][-1] <= tol:
            groups[-1].append(v)
        else:
            groups.append([v])
    return [float(np.mean(g)) for g in groups]


def spectral_decompose(A, group_tol: float | None = None,
                       require_positive: bool = False) -> SpectralDecomposition:
    """Split R^d into the direct sum of A-invariant subspaces V_i collecting the
    generalized eigenspaces whose eigenvalues share the real part a_i.

    Eigenvalues whose real parts differ by at most ``group_tol`` are treated as
    one cluster. The invariant subspace of each cluster comes from a reordered
    real Schur form; projectors are oblique (along the other V_k).
    """
    A = as_square(A, "A")
    d = A.shape[0]
    if group_tol is None:
        # a defective eigenvalue splits by ~sqrt(eps) in floating point
        group_tol = 1e-6 * (1.0 + np.linalg.norm(A))
    if group_tol <= 0:
        raise InvalidInput("group_tol must be positive")
    try:
        eig = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue computation failed: {exc}") from exc
    tol = group_tol
    exps = _cluster(eig.real, tol)
    if require_positive and exps[0] <= 0:
        raise DomainError(f"eigenvalue real part {exps[0]:.6g} is not positive")

    bases = []
    for a in exps:
        T, Z, sdim = sla.schur(A, output="real",
                               sort=lambda re, im, a=a: abs(re - a) <= tol)
        k = int(np.sum(np.abs(eig.real - a) <= tol))
        if sdim != k:
            raise NumericalError(f"Schur reordering picked {sdim} of {k} eigenvalues near {a}")
        bases.append(Z[:, :k])
    B = np.hstack(bases)
    try:
        Binv = np.linalg.inv(B)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("invariant subspaces are not complementary") from exc
    projectors, start = [], 0
    for Q in bases:
        k = Q.shape[1]
        projectors.append(Q @ Binv[start:start + k, :])
        start += k
    if start != d:
        raise NumericalError("subspace dimensions do not add up to the order")
    return SpectralDecomposition(
        exponents=np.array(exps),
        projectors=tuple(projectors),
        bases=tuple(bases),
        dims=tuple(Q.shape[1] for Q in bases),
    )


@dataclass(frozen=True)
class BlockLayout:
    blocks: tuple

    def __init__(self, blocks: Sequence):
        mats = tuple(as_square(b, f"block {j}") for j, b in enumerate(blocks))
        if not mats:
            raise InvalidInput("at least one block is required")
        object.__setattr__(self, "blocks", mats)
        for j, b in enumerate(mats):
            spectral_decompose(b, require_positive=True)
        if self.d > MAX_ORDER:
            raise InvalidInput(f"total dimension {self.d} > {MAX_ORDER}")

    @property
    def m(self) -> int:
        return len(self.blocks)

    @property
    def dims(self) -> tuple:
        return tuple(b.shape[0] for b in self.blocks)

    @property
    def d(self) -> int:
        return sum(self.dims)

    def slices(self) -> list[slice]:
        out, start = [], 0
        for dj in self.dims:
            out.append(slice(start, start + dj))
            start += dj
        return out


def embed_blocks(layout: BlockLayout) -> tuple[list[np.ndarray], np.ndarray]:
    """Return (E_1..E_m, E): E_j is zero except for the j-th diagonal block."""
    d = layout.d
    E_list = []
    for sl, blk in zip(layout.slices(), layout.blocks):
        Ej = np.zeros((d, d))
        Ej[sl, sl] = blk
        E_list.append(Ej)
    return E_list, sla.block_diag(*layout.blocks)


def block_power(layout: BlockLayout, j: int, c: float, x) -> np.ndarray:
    """c^{E_j} x, touching only the coordinates of block j."""
    x = np.array(x, dtype=float, copy=True)
    sl = layout.slices()[j]
    x[..., sl] = x[..., sl] @ mat_power(c, layout.blocks[j]).T
    return x
