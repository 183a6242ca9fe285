"""Box counting, oscillation and Hoelder regression, and the occupation
measure energy diagnostic for graphs of gridded fields over cubes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import InvalidInput


@dataclass
class DimensionEstimate:
    value: float
    stderr: float
    scale_range: tuple
    r2: float
    counts: dict
    clamped: bool = False
    vertical_unit: float = 1.0


@dataclass
class HolderEstimate:
    value: float
    stderr: float
    scale_range: tuple
    r2: float = float("nan")
    clamped: bool = False


@dataclass
class EnergyEstimate:
    gamma: float
    value: float
    n_pairs: int
    trend: str
    partial: list = field(default_factory=list)    # estimates at n/4, n/2, n
    tail_index: float = float("nan")

    @property
    def diverging(self) -> bool:
        return self.trend == "diverging"


def _values(field_or_array) -> np.ndarray:
    vals = getattr(field_or_array, "values", field_or_array)
    vals = np.asarray(vals, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise InvalidInput("field has non-finite values")
    return vals


def rescale(values: np.ndarray):
    """Affine map onto [0, 1]; returns (scaled, vertical unit)."""
    lo, hi = float(values.min()), float(values.max())
    unit = hi - lo
    if unit == 0:
        return np.zeros_like(values), 1.0
    return (values - lo) / unit, unit


def max_level(shape) -> int:
    """Finest admissible level: 2^l <= (smallest axis count) / 4."""
    return int(np.floor(np.log2(min(shape) / 4)))


def _window_starts(n: int, level: int) -> np.ndarray:
    """First sample index of each of the 2^level boxes along an axis with
    samples at i / (n - 1)."""
    k = np.arange(2 ** level)
    return np.ceil(k * (n - 1) / 2 ** level - 1e-9).astype(int)


def _window_reduce(a: np.ndarray, axis: int, level: int):
    """Per closed box along ``axis``: min and max over the samples it contains,
    including the sample on its right edge."""
    n = a.shape[axis]
    starts = _window_starts(n, level)
    mx = np.maximum.reduceat(a, starts, axis=axis)
    mn = np.minimum.reduceat(a, starts, axis=axis)
    nxt = np.take(a, np.minimum(np.append(starts[1:], n - 1), n - 1), axis=axis)
    return np.minimum(mn, nxt), np.maximum(mx, nxt)


def box_extrema(values: np.ndarray, level: int):
    mn, mx = values, values
    for ax in range(values.ndim):
        mn = _window_reduce(mn, ax, level)[0]
        mx = _window_reduce(mx, ax, level)[1]
    return mn, mx


def box_count(field_or_array, level: int, rescaled: bool = False) -> int:
    """Number of closed boxes of side 2^-level meeting the sampled graph."""
    vals = _values(field_or_array)
    if level < 0 or level > max_level(vals.shape):
        raise InvalidInput(f"level {level} too fine for a grid of shape {vals.shape}: "
                           f"need 2^l <= {min(vals.shape)} / 4")
    if not rescaled:
        vals, _ = rescale(vals)
    mn, mx = box_extrema(vals, level)
    eps = 2.0 ** -level
    cnt = np.floor(mx / eps) - np.floor(mn / eps) + 1
    return int(cnt.sum())


def default_levels(shape) -> tuple:
    lmax = max_level(shape)
    return (3, lmax - 2)


def _slope(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    n = x.size
    sxx = np.sum((x - x.mean()) ** 2)
    se = np.sqrt(np.sum(resid ** 2) / max(n - 2, 1) / sxx) if n > 2 else float("nan")
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1 - np.sum(resid ** 2) / ss if ss > 0 else 1.0
    return float(coef[0]), float(se), float(r2)


def _check_range(shape, l_range):
    lo, hi = default_levels(shape) if l_range is None else l_range
    if lo < 0 or hi > max_level(shape):
        raise InvalidInput(f"levels {lo}..{hi} outside 0..{max_level(shape)}")
    if hi - lo + 1 < 4:
        raise InvalidInput("need at least 4 levels for a regression")
    return int(lo), int(hi)


def _resample(values: np.ndarray, per_axis: int) -> np.ndarray:
    """Nearest samples on a uniform grid of per_axis + 1 points per axis."""
    out = values
    for ax, n in enumerate(values.shape):
        if n - 1 <= per_axis:
            continue
        idx = np.round(np.arange(per_axis + 1) * (n - 1) / per_axis).astype(int)
        out = np.take(out, idx, axis=ax)
    return out


def box_dimension(field_or_array, l_range=None, vertical_unit="oscillation",
                  samples_per_box="auto") -> DimensionEstimate:
    """Slope of log2 M(2^-l) against l.

    ``vertical_unit``: "range" rescales values onto [0, 1]; "oscillation"
    (default) divides by the mean box oscillation at the finest level used, so
    that every box spans many vertical boxes and the +1 floor of the count
    does not flatten the coarse levels; a float is used as is.
    ``samples_per_box``: with "auto" every level is counted on a resampled grid
    with the same number of samples per box side as the finest level, so the
    discrete under-sampling of the oscillation is the same at every level;
    None counts on the full grid.
    """
    vals = _values(field_or_array)
    lo, hi = _check_range(vals.shape, l_range)
    base = vals - vals.min()
    if vertical_unit == "range":
        unit = float(np.ptp(vals))
    elif vertical_unit == "oscillation":
        mn, mx = box_extrema(vals, hi)
        unit = float(np.mean(mx - mn))
    else:
        unit = float(vertical_unit)
    if not unit > 0:
        unit = 1.0
    scaled = base / unit
    if samples_per_box == "auto":
        samples_per_box = max(1, (min(vals.shape) - 1) // 2 ** hi)
    levels = np.arange(lo, hi + 1)
    counts = {}
    for l in levels:
        data = scaled if samples_per_box is None \
            else _resample(scaled, int(samples_per_box) * 2 ** int(l))
        mn, mx = box_extrema(data, int(l))
        eps = 2.0 ** -int(l)
        counts[int(l)] = int((np.floor(mx / eps) - np.floor(mn / eps) + 1).sum())
    slope, se, r2 = _slope(levels, np.log2([counts[l] for l in levels]))
    d = vals.ndim
    clamped = not (d <= slope <= d + 1)
    return DimensionEstimate(float(np.clip(slope, d, d + 1)), se, (lo, hi), r2, counts,
                             clamped, unit)


def oscillations(field_or_array, l_range=None, samples_per_box="auto"):
    """Mean oscillation max - min over the closed boxes of side 2^-l.

    With ``samples_per_box="auto"`` each level is measured on a resampled grid
    carrying as many samples per box side as the finest level does.
    """
    vals = _values(field_or_array)
    lo, hi = _check_range(vals.shape, l_range)
    if samples_per_box == "auto":
        samples_per_box = max(1, (min(vals.shape) - 1) // 2 ** hi)
    levels = np.arange(lo, hi + 1)
    osc = []
    for l in levels:
        data = vals if samples_per_box is None \
            else _resample(vals, int(samples_per_box) * 2 ** int(l))
        mn, mx = box_extrema(data, int(l))
        osc.append(float(np.mean(mx - mn)))
    return levels, np.array(osc)


def holder_exponent(field_or_array, l_range=None, samples_per_box="auto") -> HolderEstimate:
    """Regression of log mean oscillation on log window size."""
    levels, osc = oscillations(field_or_array, l_range, samples_per_box)
    if np.any(osc <= 0):
        return HolderEstimate(1.0, 0.0, (int(levels[0]), int(levels[-1])), 1.0, True)
    slope, se, r2 = _slope(-levels, np.log2(osc))
    clamped = not (0 < slope <= 1)
    return HolderEstimate(float(np.clip(slope, 1e-6, 1.0)), se,
                          (int(levels[0]), int(levels[-1])), r2, clamped)


def oscillation_dimension(field_or_array, l_range=None) -> DimensionEstimate:
    """d + 1 minus the oscillation exponent."""
    vals = _values(field_or_array)
    h = holder_exponent(vals, l_range)
    d = vals.ndim
    return DimensionEstimate(d + 1 - h.value, h.stderr, h.scale_range, h.r2, {}, h.clamped)


def _hill(y: np.ndarray, k: int) -> float:
    top = np.sort(y)[-(k + 1):]
    return float(1.0 / np.mean(np.log(top[1:] / top[0])))


def energy_estimate(field_or_array, gamma: float, n_pairs: int = 100_000, seed: int = 0,
                    tail_fraction: float = 0.01) -> EnergyEstimate:
    """Monte-Carlo gamma-energy of the occupation measure,
    mean of (|x - y|^2 + |X(x) - X(y)|^2)^(-gamma/2) over uniform grid pairs.

    Partial means at n/4, n/2, n are reported. Finite versus diverging is
    decided from the tail index kappa of the sampled integrand (Hill
    estimator): pair distances have P(r < rho) ~ rho^D, so the integrand has
    tail index D / gamma and the energy is finite iff kappa > 1.
    """
    if not gamma > 0:
        raise InvalidInput("gamma must be positive")
    if n_pairs < 10_000:
        raise InvalidInput("need at least 10^4 pairs")
    vals = _values(field_or_array)
    scaled, _ = rescale(vals)
    shape = vals.shape
    rng = np.random.Generator(np.random.Philox(key=int(seed) & (2 ** 64 - 1)))
    n = scaled.size
    i = rng.integers(0, n, n_pairs)
    j = rng.integers(0, n, n_pairs)
    same = i == j
    while np.any(same):
        j[same] = rng.integers(0, n, int(same.sum()))
        same = i == j
    xi = np.stack(np.unravel_index(i, shape), axis=-1) / (np.array(shape) - 1)
    xj = np.stack(np.unravel_index(j, shape), axis=-1) / (np.array(shape) - 1)
    dv = scaled.ravel()[i] - scaled.ravel()[j]
    r2 = np.sum((xi - xj) ** 2, axis=1) + dv ** 2
    y = r2 ** (-gamma / 2)
    partial = [float(np.mean(y[:n_pairs // 4])), float(np.mean(y[:n_pairs // 2])),
               float(np.mean(y))]
    kappa = _hill(y, max(10, int(tail_fraction * n_pairs)))
    trend = "finite" if kappa > 1 else "diverging"
    return EnergyEstimate(gamma=float(gamma), value=partial[-1], n_pairs=int(n_pairs),
                          trend=trend, partial=partial, tail_index=kappa)
