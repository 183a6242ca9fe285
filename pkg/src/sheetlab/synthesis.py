"""Sample paths of X_alpha on regular grids.

Gaussian path (alpha = 2): Riemann sum of the harmonizable integral over a
product frequency lattice. Each axis carries a symmetric lattice: a central
cell around 0 plus geometric cells on both sides up to the cutoff Omega, so
that every octave of frequency gets the same resolution. Each cell gets an
independent standard complex Gaussian, the field is the real part of the sum.

Stable path (alpha < 2): truncated LePage series with frequencies drawn from
the polar importance density of :mod:`sheetlab.scale`.

The kernel prod_j (exp(i<x_j, xi_j>) - 1) of a multi-axis block is written as
the telescoping sum sum_t F_1..F_{t-1} (F_t - 1), so evaluation reduces to a
few separable contractions and every point with a zero block gives exactly 0.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
import warnings
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .homogeneous import psi_eval
from .linalg import InvalidInput, mat_power
from .scale import BlockDensity, SheetSpec, existence_check

GAUSSIAN = "GaussianSpectral"
LEPAGE = "LePage"
MAX_POINTS = 2 ** 22
_THREADS = os.cpu_count() or 1


class ResourceError(MemoryError):
    pass


class DegenerateSlice(UserWarning):
    pass


@dataclass(frozen=True)
class GridSpec:
    counts: tuple
    lo: float = 0.0
    hi: float = 1.0
    max_points: int = MAX_POINTS

    def __post_init__(self):
        counts = tuple(int(n) for n in np.atleast_1d(self.counts))
        object.__setattr__(self, "counts", counts)
        if any(n < 2 for n in counts):
            raise InvalidInput("every axis needs at least 2 samples")
        if not self.hi > self.lo:
            raise InvalidInput("empty domain")
        if self.size > self.max_points:
            raise ResourceError(f"grid of {self.size} points exceeds the budget {self.max_points}")

    @classmethod
    def cube(cls, n: int, d: int, **kw) -> "GridSpec":
        return cls(tuple([n] * d), **kw)

    @property
    def d(self) -> int:
        return len(self.counts)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(self.lo, self.hi, n) for n in self.counts]


@dataclass(frozen=True)
class SliceSpec:
    j: int
    anchor: tuple


@dataclass(eq=False)
class FieldRealization:
    spec: SheetSpec
    grid: GridSpec
    values: np.ndarray
    seed: int
    method: str
    synth_params: dict
    generator: object = field(default=None, repr=False)
    error_indicator: np.ndarray = field(default=None, repr=False)


# --------------------------------------------------------------- kernels

def set_threads(n: int) -> None:
    """Worker threads used for grid evaluation (results do not depend on it)."""
    global _THREADS
    _THREADS = max(1, int(n))


def _run_chunked(shape, task) -> np.ndarray:
    """Evaluate ``task(start, stop)`` over fixed row blocks of the first axis.

    Block boundaries depend only on the grid shape and BLAS runs single
    threaded inside each block, so the values are bit-identical for any
    number of workers.
    """
    out = np.zeros(shape)
    rest = int(np.prod(shape[1:])) if len(shape) > 1 else 1
    chunk = max(1, min(512, 65536 // rest))
    starts = list(range(0, shape[0], chunk))

    def work(s):
        out[s:s + chunk] = task(s, min(s + chunk, shape[0]))

    with threadpool_limits(limits=1, user_api="blas"):
        if _THREADS == 1 or len(starts) == 1:
            for s in starts:
                work(s)
        else:
            with ThreadPoolExecutor(max_workers=_THREADS) as pool:
                list(pool.map(work, starts))
    return out


def _block_terms(spec: SheetSpec):
    """Each term is a tuple over axes of 'F' (exp), 'G' (exp - 1) or '1'."""
    per_block = []
    for dj in spec.dims:
        opts = []
        for t in range(dj):
            opts.append(tuple(["F"] * t + ["G"] + ["1"] * (dj - t - 1)))
        per_block.append(opts)
    return [sum(combo, ()) for combo in product(*per_block)]


def _axis_mats(x: np.ndarray, xi: np.ndarray):
    F = np.exp(1j * np.multiply.outer(x, xi))
    return {"F": F, "G": F - 1.0}


def _contract(core: np.ndarray, mats: list) -> np.ndarray:
    """Tucker product core x_1 M_1 ... x_d M_d, with M = None meaning sum."""
    out = core
    for ax, M in enumerate(mats):
        if M is None:
            out = np.expand_dims(out.sum(axis=ax), ax)
        else:
            out = np.moveaxis(np.tensordot(M, out, axes=([1], [ax])), 0, ax)
    return out


# --------------------------------------------------------------- Gaussian

def axis_lattice(n_cells: int, omega: float, xi_min: float):
    """Symmetric per-axis lattice: centre cell [-xi_min, xi_min] plus geometric
    cells from xi_min to omega on both sides. Returns (centres, widths, centre index)."""
    if n_cells < 16:
        raise InvalidInput("need at least 16 frequency cells per axis")
    if not (omega > xi_min > 0):
        raise InvalidInput("need 0 < xi_min < omega")
    half = (n_cells - 1) // 2
    edges = np.geomspace(xi_min, omega, half + 1)
    pos = np.sqrt(edges[:-1] * edges[1:])
    w = np.diff(edges)
    centres = np.concatenate([-pos[::-1], [0.0], pos])
    widths = np.concatenate([w[::-1], [2 * xi_min], w])
    return centres, widths, half


def _psi_ball_box(spec: SheetSpec, j: int, R: float, n_dir: int = 512) -> list:
    """Half-widths along each axis of block j of the ball {psi <= R}."""
    A = spec.layout.blocks[j].T
    if A.shape[0] == 1:
        p1 = float(np.min(psi_eval(spec.psi[j], spec.fctx[j], np.array([[1.0], [-1.0]]))))
        return [float((R / p1) ** A[0, 0])]
    if A.shape[0] > 2:
        raise InvalidInput("lattice synthesis supports blocks of dimension <= 2")
    phi = 2 * np.pi * np.arange(n_dir) / n_dir
    U = np.column_stack([np.cos(phi), np.sin(phi)])
    pu = psi_eval(spec.psi[j], spec.fctx[j], U)
    sphere = np.stack([mat_power(1.0 / p, A) @ u for p, u in zip(pu, U)])
    ball = sphere @ mat_power(R, A).T
    return [float(v) for v in np.max(np.abs(ball), axis=0)]


def axis_cutoffs(spec: SheetSpec, omega: float, n_dir: int = 512) -> list:
    """Per-axis outer cutoffs: the bounding box of the smallest psi-ball
    containing the cube [-omega, omega]^{d_j} of each block. For anisotropic
    blocks the spectral mass at |xi_1| ~ omega reaches much further out along
    the other axes, which a plain cube would cut off."""
    out = []
    for j, dj in enumerate(spec.dims):
        if dj == 1:
            out.append(float(omega))
            continue
        t = np.linspace(-1, 1, n_dir // 4 + 1)
        edge = np.concatenate([np.column_stack([t, np.full_like(t, s)]) for s in (-1, 1)]
                              + [np.column_stack([np.full_like(t, s), t]) for s in (-1, 1)])
        R = float(np.max(psi_eval(spec.psi[j], spec.fctx[j], omega * edge)))
        out.extend(1.02 * v for v in _psi_ball_box(spec, j, R, n_dir))
    return out


def axis_floors(spec: SheetSpec, core_radius: float) -> list:
    """Per-axis inner cutoffs: the box of the ball {psi <= core_radius}. Cells
    straddling a coordinate axis then see a nearly constant spectral density,
    and the excluded core carries a share O(core_radius^{2 (a_1 - H)})."""
    out = []
    for j in range(spec.m):
        out.extend(_psi_ball_box(spec, j, core_radius))
    return out


def _centre_weight(spec: SheetSpec, j: int, xi_min: float):
    """For a one-axis block, the central cell is replaced by one frequency
    xi_c = xi_min / 2 whose weight reproduces the small-x behaviour of
    int_{|xi| < xi_min} |exp(i x xi) - 1|^2 rho(xi) d xi ~ x^2 * integral of xi^2 rho."""
    E = spec.layout.blocks[j][0, 0]
    H = spec.H[j]
    c1 = psi_eval(spec.psi[j], spec.fctx[j], np.array([[1.0]]))[0]
    # rho(xi) = psi(1)^(-2H-q) |xi|^{(-2H-q)/E}, q = E
    p = (-2 * H - E) / E
    mom = 2 * c1 ** (-2 * H - E) * xi_min ** (3 + p) / (3 + p)
    xc = 0.5 * xi_min
    return xc, np.sqrt(mom) / xc


@dataclass(eq=False)
class GaussianGenerator:
    """Frozen random lattice sum; evaluate anywhere with :meth:`on_axes` or :meth:`at`."""
    spec: SheetSpec
    freqs: list            # per-axis frequencies
    weights: np.ndarray    # lattice amplitudes (cell volume^1/2 * spectral density^1/2)
    noise: np.ndarray      # complex Gaussians, same shape
    params: dict

    @property
    def core(self) -> np.ndarray:
        return self.weights * self.noise

    def on_axes(self, axes: list) -> np.ndarray:
        core = self.core
        terms = _block_terms(self.spec)

        def task(s, e):
            ax = [axes[0][s:e]] + list(axes[1:])
            mats = [_axis_mats(a, xi) for a, xi in zip(ax, self.freqs)]
            acc = 0.0
            for term in terms:
                acc = acc + _contract(core, [None if c == "1" else mats[i][c]
                                             for i, c in enumerate(term)])
            return acc.real

        return _run_chunked(tuple(len(a) for a in axes), task)

    def at(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        core = self.core
        res = np.empty(pts.shape[0])
        slices = self.spec.layout.slices()
        for k, x in enumerate(pts):
            kern = np.ones(core.shape, dtype=complex)
            for sl in slices:
                phase = np.zeros(core.shape)
                for i in range(sl.start, sl.stop):
                    shape = [1] * core.ndim
                    shape[i] = -1
                    phase = phase + (x[i] * self.freqs[i]).reshape(shape)
                kern = kern * (np.exp(1j * phase) - 1.0)
            res[k] = float(np.sum(kern * core).real)
        return res

    def variance(self, points) -> np.ndarray:
        """Exact variance of the lattice field at each point, E|noise|^2 / 2
        times the weighted kernel energy."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        w2 = np.abs(self.weights) ** 2
        out = np.empty(pts.shape[0])
        for k, x in enumerate(pts):
            kern = np.ones(w2.shape)
            for sl in self.spec.layout.slices():
                phase = np.zeros(w2.shape)
                for i in range(sl.start, sl.stop):
                    shape = [1] * w2.ndim
                    shape[i] = -1
                    phase = phase + (x[i] * self.freqs[i]).reshape(shape)
                kern = kern * np.abs(np.exp(1j * phase) - 1.0) ** 2
            out[k] = 0.5 * float(np.sum(w2 * kern))
        return out


def _lattice_weights(spec: SheetSpec, freqs, widths, centre_idx, floors):
    H, q = spec.H, spec.q
    W = np.ones(tuple(len(f) for f in freqs))
    for j, sl in enumerate(spec.layout.slices()):
        axes = list(range(sl.start, sl.stop))
        grids = np.meshgrid(*[freqs[i] for i in axes], indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        vol = np.ones(grids[0].shape)
        for k, i in enumerate(axes):
            shape = [1] * len(axes)
            shape[k] = -1
            vol = vol * widths[i].reshape(shape)
        with np.errstate(divide="ignore"):
            psi = psi_eval(spec.psi[j], spec.fctx[j], pts).reshape(vol.shape)
            wj = np.where(psi > 0, psi ** (-H[j] - q[j] / 2), 0.0) * np.sqrt(vol)
        if len(axes) == 1:
            c = centre_idx[axes[0]]
            _, wj[c] = _centre_weight(spec, j, floors[axes[0]])
        else:
            # central cell of a multi-axis block: its share of the integral is
            # O(core_radius^{2 (a_1 - H)}); dropped
            wj[tuple(centre_idx[i] for i in axes)] = 0.0
        shape = [1] * len(freqs)
        for i in axes:
            shape[i] = len(freqs[i])
        W = W * wj.reshape(shape)
    return W


_WEIGHT_CACHE: dict = {}


def spec_key(spec: SheetSpec) -> str:
    return hashlib.sha256(json.dumps(spec.to_dict(), sort_keys=True).encode()).hexdigest()


def gaussian_generator(spec: SheetSpec, seed: int, omega: float, nfreq,
                       core_radius: float = 1e-3):
    if spec.alpha != 2.0:
        raise InvalidInput("Gaussian synthesis needs alpha = 2; use synthesize_stable")
    if not existence_check(spec).ok:
        raise InvalidInput("existence criterion 0 < H_j < a_1^j fails")
    if not omega > 0:
        raise InvalidInput("omega must be positive")
    nfreq = tuple(int(n) for n in np.broadcast_to(np.atleast_1d(nfreq), (spec.d,)))
    if not 0 < core_radius < 1:
        raise InvalidInput("core_radius must lie in (0, 1)")
    cutoffs = axis_cutoffs(spec, omega)
    floors = axis_floors(spec, core_radius)
    lat = [axis_lattice(n, om, lo) for n, om, lo in zip(nfreq, cutoffs, floors)]
    freqs = [lt[0] for lt in lat]
    widths = [lt[1] for lt in lat]
    centre = [lt[2] for lt in lat]
    # the central frequency of one-axis blocks moves to xi_min / 2
    for j, sl in enumerate(spec.layout.slices()):
        if sl.stop - sl.start == 1:
            freqs[sl.start] = freqs[sl.start].copy()
            freqs[sl.start][centre[sl.start]], _ = _centre_weight(spec, j, floors[sl.start])
    key = (spec_key(spec), omega, nfreq, core_radius)
    W = _WEIGHT_CACHE.get(key)
    if W is None:
        W = _lattice_weights(spec, freqs, widths, centre, floors)
        if len(_WEIGHT_CACHE) > 8:
            _WEIGHT_CACHE.clear()
        _WEIGHT_CACHE[key] = W
    rng = np.random.Generator(np.random.Philox(key=int(seed) & (2 ** 64 - 1)))
    Z = rng.standard_normal(W.shape + (2,))
    noise = (Z[..., 0] + 1j * Z[..., 1]) / np.sqrt(2.0)
    params = {"omega": float(omega), "nfreq": list(nfreq), "core_radius": float(core_radius),
              "axis_cutoffs": cutoffs, "axis_floors": floors}
    return GaussianGenerator(spec, freqs, W, noise, params)


def default_gaussian_params(spec: SheetSpec, grid: GridSpec):
    n = max(grid.counts)
    omega = 16 * np.pi * n / (grid.hi - grid.lo)
    nfreq = 2049 if spec.d == 1 else (1025 if spec.d == 2 else 129)
    return omega, nfreq


def synthesize_gaussian(spec: SheetSpec, grid: GridSpec, omega: float = None,
                        nfreq=None, seed: int = 0, core_radius: float = 1e-3) -> FieldRealization:
    if grid.d != spec.d:
        raise InvalidInput(f"grid has {grid.d} axes, spec has {spec.d}")
    o, n = default_gaussian_params(spec, grid)
    omega = o if omega is None else omega
    nfreq = n if nfreq is None else nfreq
    if int(np.prod(np.broadcast_to(np.atleast_1d(nfreq), (spec.d,)))) > 2 ** 24:
        raise ResourceError("frequency lattice exceeds 2^24 cells")
    gen = gaussian_generator(spec, seed, omega, nfreq, core_radius)
    values = gen.on_axes(grid.axes())
    return FieldRealization(spec, grid, values, int(seed), GAUSSIAN, dict(gen.params), gen)


# --------------------------------------------------------------- LePage

@dataclass(eq=False)
class LePageGenerator:
    spec: SheetSpec
    xis: list              # per block (N, d_j)
    amps: np.ndarray       # complex amplitudes (N,)
    tail: float            # Gamma_N^{-1/alpha}
    params: dict

    def _axis_factors(self, axes: list):
        """Per axis: dict of (n_i, N) matrices F, G and ones."""
        out = []
        for j, sl in enumerate(self.spec.layout.slices()):
            for k, i in enumerate(range(sl.start, sl.stop)):
                F = np.exp(1j * np.multiply.outer(axes[i], self.xis[j][:, k]))
                out.append({"F": F, "G": F - 1.0, "1": np.ones_like(F)})
        return out

    def on_axes(self, axes: list) -> np.ndarray:
        terms = _block_terms(self.spec)
        letters = "abcdefghijklmnop"[:len(axes)]
        expr = ",".join(f"{c}z" for c in letters) + ",z->" + letters

        def task(s, e):
            fac = self._axis_factors([axes[0][s:e]] + list(axes[1:]))
            acc = 0.0
            for term in terms:
                mats = [fac[i][c] for i, c in enumerate(term)]
                acc = acc + np.einsum(expr, *mats, self.amps, optimize=True)
            return acc.real

        return _run_chunked(tuple(len(a) for a in axes), task)

    def at(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        kern = np.ones((pts.shape[0], self.amps.size), dtype=complex)
        for j, sl in enumerate(self.spec.layout.slices()):
            kern *= np.exp(1j * pts[:, sl] @ self.xis[j].T) - 1.0
        return (kern @ self.amps).real

    def error_indicator(self, points) -> np.ndarray:
        """Tail size Gamma_N^{-1/alpha} times the rms term magnitude at each point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        kern = np.ones((pts.shape[0], self.amps.size))
        for j, sl in enumerate(self.spec.layout.slices()):
            kern *= np.abs(np.exp(1j * pts[:, sl] @ self.xis[j].T) - 1.0)
        mag = np.abs(self.amps) * self.params["arrivals"] ** (1 / self.spec.alpha)
        return self.tail * np.sqrt(np.mean((kern * mag) ** 2, axis=1))


_DENSITY_CACHE: dict = {}


def lepage_generator(spec: SheetSpec, seed: int, nterms: int) -> LePageGenerator:
    if spec.alpha >= 2.0:
        raise InvalidInput("alpha = 2 is the Gaussian case; use synthesize_gaussian")
    if not existence_check(spec).ok:
        raise InvalidInput("existence criterion 0 < H_j < a_1^j fails")
    if nterms < 1000:
        raise InvalidInput("LePage series needs at least 1000 terms")
    key = spec_key(spec)
    dens = _DENSITY_CACHE.get(key)
    if dens is None:
        dens = [BlockDensity.build(spec, j) for j in range(spec.m)]
        _DENSITY_CACHE[key] = dens
    rng = np.random.Generator(np.random.Philox(key=int(seed) & (2 ** 64 - 1)))
    arrivals = np.cumsum(rng.standard_exponential(nterms))
    phases = rng.uniform(0.0, 2 * np.pi, nterms)
    xis, logr = [], np.zeros(nterms)
    for j, bd in enumerate(dens):
        U = rng.random((nterms, bd.n_uniform))
        xi, lr = bd.sample(U, spec.psi[j], spec.fctx[j])
        xis.append(xi)
        logr += lr
    a = spec.alpha
    amps = arrivals ** (-1 / a) * np.exp(logr / a) * np.exp(1j * phases)
    params = {"nterms": int(nterms), "arrivals": arrivals}
    return LePageGenerator(spec, xis, amps, float(arrivals[-1] ** (-1 / a)), params)


def synthesize_stable(spec: SheetSpec, grid: GridSpec, nterms: int = 4000,
                      seed: int = 0) -> FieldRealization:
    if grid.d != spec.d:
        raise InvalidInput(f"grid has {grid.d} axes, spec has {spec.d}")
    gen = lepage_generator(spec, seed, nterms)
    values = gen.on_axes(grid.axes())
    return FieldRealization(spec, grid, values, int(seed), LEPAGE,
                            {"nterms": int(nterms)}, gen)


def synthesize(spec: SheetSpec, grid: GridSpec, seed: int = 0, **params) -> FieldRealization:
    if spec.alpha == 2.0:
        return synthesize_gaussian(spec, grid, seed=seed, **params)
    return synthesize_stable(spec, grid, seed=seed, **params)


# --------------------------------------------------------------- slices

def slice_field(source, s: SliceSpec, grid_j: GridSpec) -> np.ndarray:
    """Evaluate the one-block field x -> X(u_1, .., x, .., u_m) on ``grid_j``.

    ``source`` is a generator or a realization that still holds its generator.
    """
    gen = source.generator if isinstance(source, FieldRealization) else source
    spec = gen.spec
    slices = spec.layout.slices()
    if not 0 <= s.j < spec.m:
        raise InvalidInput(f"block index {s.j} out of range")
    anchor = np.asarray(s.anchor, dtype=float)
    if anchor.size != spec.d:
        raise InvalidInput("anchor must have d coordinates")
    if grid_j.d != spec.dims[s.j]:
        raise InvalidInput("slice grid does not match the block dimension")
    for i, sl in enumerate(slices):
        if i != s.j and not np.any(anchor[sl]):
            warnings.warn(f"anchor block {i} is zero: the slice is the trivial zero field",
                          DegenerateSlice, stacklevel=2)
            return np.zeros(grid_j.counts)
    axes = [np.array([v]) for v in anchor]
    for k, ax in zip(range(slices[s.j].start, slices[s.j].stop), grid_j.axes()):
        axes[k] = ax
    vals = gen.on_axes(axes)
    return vals.reshape(grid_j.counts)


# --------------------------------------------------------------- OSS1 dumps

MAGIC = b"OSS1"
VERSION = 1


class FormatError(ValueError):
    pass


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


def write_field(path, real: FieldRealization, extra: dict = None) -> Path:
    path = Path(path)
    spec = real.spec
    head = MAGIC + struct.pack("<BII", VERSION, spec.d, spec.m)
    head += struct.pack(f"<{spec.m}I", *spec.dims)
    head += struct.pack(f"<{spec.d}I", *real.grid.counts)
    vals = np.ascontiguousarray(real.values, dtype="<f8")
    path.write_bytes(head + vals.tobytes(order="C"))
    meta = {"format": "OSS1", "version": VERSION, "spec": spec.to_dict(),
            "grid": {"counts": list(real.grid.counts), "lo": real.grid.lo, "hi": real.grid.hi},
            "method": real.method, "params": real.synth_params, "seed": real.seed}
    if extra:
        meta.update(extra)
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, sort_keys=True, indent=1))
    return path


def read_field(path):
    """Return (values, header dict, metadata dict or None)."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, not an OSS1 field dump")
    try:
        version, d, m = struct.unpack_from("<BII", raw, 4)
        off = 4 + 9
        dims = struct.unpack_from(f"<{m}I", raw, off)
        off += 4 * m
        counts = struct.unpack_from(f"<{d}I", raw, off)
        off += 4 * d
    except struct.error as exc:
        raise FormatError(f"{path}: truncated header") from exc
    if version != VERSION:
        raise FormatError(f"{path}: unsupported OSS1 version {version}")
    n = int(np.prod(counts))
    if len(raw) - off != 8 * n:
        raise FormatError(f"{path}: expected {n} values, found {(len(raw) - off) / 8:g}")
    values = np.frombuffer(raw, dtype="<f8", offset=off).reshape(counts).astype(float)
    side = path.with_suffix(path.suffix + ".json")
    meta = json.loads(side.read_text()) if side.exists() else None
    return values, {"version": version, "d": d, "m": m, "dims": dims, "counts": counts}, meta
