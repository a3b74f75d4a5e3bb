"""Wavelet transform modulus maxima analysis.

Pipeline: continuous wavelet transform with a derivative-of-Gaussian
analyzing wavelet, modulus-maxima extraction per scale, weighted partition
functions over the maxima, and least-squares slopes against ln(scale) that
give the Holder exponents h(q), the singularity dimensions D(h), and the
spectrum extrema (h_l, h_0, h_r).
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from numpy.polynomial import hermite_e
from scipy.signal import fftconvolve

DEFAULT_ORDER = 4
DEFAULT_SUPPORT_RADIUS = 8.0
DEFAULT_MODULUS_FLOOR_RATIO = 1e-12


def default_q_grid() -> np.ndarray:
    """Moment orders -5..5 in steps of 0.25 (negative moments included)."""
    return np.round(np.arange(-5.0, 5.0 + 1e-9, 0.25), 10)


def default_scale_grid(length: int, n_scales: int = 32) -> np.ndarray:
    """Log-spaced scales in [4, length/32]."""
    hi = length / 32
    if hi <= 4:
        raise ValueError("series too short for the default scale grid")
    return np.geomspace(4.0, hi, n_scales)


def dog_wavelet(order: int, x) -> np.ndarray | float:
    """n-th derivative of exp(-x^2/2), raw sign convention.

    Uses the probabilists' Hermite closed form
    d^n/dx^n exp(-x^2/2) = (-1)^n He_n(x) exp(-x^2/2); the wavelet has
    ``order`` vanishing moments and is blind to polynomial trends of
    degree order-1.
    """
    if order < 1:
        raise ValueError("wavelet order must be >= 1")
    x = np.asarray(x, dtype=float)
    coeffs = np.zeros(order + 1)
    coeffs[order] = 1.0
    val = (-1) ** order * hermite_e.hermeval(x, coeffs) * np.exp(-0.5 * x * x)
    return val if val.shape else float(val)


@dataclass(frozen=True)
class CwtPlane:
    """Wavelet coefficients T(scale, position), rows ordered by scale.

    ``halfwidths[k]`` is the truncated kernel half-width at scale k;
    positions closer than that to either boundary carry edge effects and
    are excluded from maxima detection.
    """

    scales: np.ndarray
    positions: np.ndarray
    coeffs: np.ndarray
    halfwidths: np.ndarray


@dataclass(frozen=True)
class MaximaSet:
    """Strict local maxima of |T| along position, one entry set per scale."""

    scales: np.ndarray
    positions: list[np.ndarray]
    moduli: list[np.ndarray]


@dataclass(frozen=True)
class PartitionFunctions:
    """Z(q;tau) and Z*(q;tau) over the scales that kept >= 2 maxima."""

    q_values: np.ndarray
    scales: np.ndarray
    z: np.ndarray
    zstar: np.ndarray
    n_maxima: np.ndarray
    dropped_scales: np.ndarray


@dataclass(frozen=True)
class SingularitySpectrum:
    q_values: np.ndarray
    h_of_q: np.ndarray
    d_of_h: np.ndarray
    fit_r2: np.ndarray
    fit_range: tuple[float, float]
    auto_band: bool
    band_relaxed: bool

    @property
    def h_left(self) -> float:
        return float(self.h_of_q[np.argmax(self.q_values)])

    @property
    def h_right(self) -> float:
        return float(self.h_of_q[np.argmin(self.q_values)])

    @property
    def h_top(self) -> float:
        if np.any(self.q_values == 0.0):
            return float(self.h_of_q[self.q_values == 0.0][0])
        order = np.argsort(self.q_values)
        return float(np.interp(0.0, self.q_values[order], self.h_of_q[order]))

    @property
    def width(self) -> float:
        return self.h_right - self.h_left


def cwt(
    y: np.ndarray,
    scales: np.ndarray,
    order: int = DEFAULT_ORDER,
    support_radius: float = DEFAULT_SUPPORT_RADIUS,
) -> CwtPlane:
    """Continuous wavelet transform T(tau, b) = (1/tau) sum_t y[t] psi((t-b)/tau).

    Evaluated at every integer position, with the wavelet truncated at
    |x| <= support_radius (DOG4 magnitude < 1e-12 not far beyond 8).
    """
    y = np.asarray(y, dtype=float)
    scales = np.sort(np.asarray(scales, dtype=float))
    if len(scales) == 0 or scales[0] <= 0:
        raise ValueError("scales must be positive")
    n = len(y)
    if n < 8 * scales[-1]:
        raise ValueError(
            f"series of length {n} too short for largest scale {scales[-1]:g}"
        )
    coeffs = np.empty((len(scales), n))
    halfwidths = np.empty(len(scales), dtype=np.int64)
    for k, s in enumerate(scales):
        half = int(np.ceil(support_radius * s))
        kernel = dog_wavelet(order, np.arange(-half, half + 1) / s)
        # correlation: reverse the kernel so out[b] = sum_t y[t] psi((t-b)/s)
        coeffs[k] = fftconvolve(y, kernel[::-1], mode="same") / s
        halfwidths[k] = half
    return CwtPlane(scales, np.arange(n), coeffs, halfwidths)


def _row_maxima(row: np.ndarray, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
    """Strict local maxima of row[lo:hi+1]; plateaus count once, at their
    midpoint, and a plateau touching the window edge is not a maximum."""
    seg = row[lo : hi + 1]
    if len(seg) < 3:
        return np.empty(0, dtype=np.int64), np.empty(0)
    change = np.flatnonzero(np.diff(seg) != 0)
    starts = np.concatenate([[0], change + 1])
    ends = np.concatenate([change, [len(seg) - 1]])
    inner = (starts > 0) & (ends < len(seg) - 1)
    vals = seg[starts[inner]]
    left = seg[starts[inner] - 1]
    right = seg[ends[inner] + 1]
    keep = (vals > left) & (vals > right)
    pos = (starts[inner][keep] + ends[inner][keep]) // 2 + lo
    return pos.astype(np.int64), seg[pos - lo]


def find_maxima(
    plane: CwtPlane,
    modulus_floor_ratio: float = DEFAULT_MODULUS_FLOOR_RATIO,
) -> MaximaSet:
    """Per-scale strict local maxima of |T| along position.

    Boundary-affected positions are excluded; maxima with modulus below
    modulus_floor_ratio times the plane-wide maximum modulus are dropped to
    keep ln|T| finite downstream.
    """
    modulus = np.abs(plane.coeffs)
    floor = modulus_floor_ratio * modulus.max() if modulus.size else 0.0
    n = len(plane.positions)
    positions: list[np.ndarray] = []
    moduli: list[np.ndarray] = []
    for k in range(len(plane.scales)):
        half = int(plane.halfwidths[k])
        lo, hi = half, n - 1 - half
        if hi - lo < 2:
            positions.append(np.empty(0, dtype=np.int64))
            moduli.append(np.empty(0))
            continue
        pos, mod = _row_maxima(modulus[k], lo, hi)
        keep = mod >= floor
        positions.append(pos[keep])
        moduli.append(mod[keep])
    return MaximaSet(plane.scales.copy(), positions, moduli)


def chain_supremum(maxima: MaximaSet) -> MaximaSet:
    """Stabilize maxima across scales by the supremum along maxima lines.

    Each maximum at scale k links to the nearest maximum at the next smaller
    scale (within one scale unit) and inherits the running supremum of
    moduli along that chain. Offered as an option; the default partition
    sums use the per-scale maxima as-is.
    """
    sup: list[np.ndarray] = [m.copy() for m in maxima.moduli]
    for k in range(1, len(maxima.scales)):
        prev_pos, prev_sup = maxima.positions[k - 1], sup[k - 1]
        pos = maxima.positions[k]
        if len(prev_pos) == 0 or len(pos) == 0:
            continue
        idx = np.searchsorted(prev_pos, pos)
        idx_lo = np.clip(idx - 1, 0, len(prev_pos) - 1)
        idx_hi = np.clip(idx, 0, len(prev_pos) - 1)
        nearer = np.where(
            np.abs(prev_pos[idx_hi] - pos) < np.abs(pos - prev_pos[idx_lo]),
            idx_hi,
            idx_lo,
        )
        within = np.abs(prev_pos[nearer] - pos) <= maxima.scales[k]
        sup[k] = np.where(within, np.maximum(sup[k], prev_sup[nearer]), sup[k])
    return MaximaSet(maxima.scales.copy(), [p.copy() for p in maxima.positions], sup)


def partition_functions(
    maxima: MaximaSet, q_values: np.ndarray | None = None
) -> PartitionFunctions:
    """Weighted partition functions over the modulus maxima.

    With weights What_i = |T_i|^q / sum_i |T_i|^q at each (q, scale):
    Z = sum What_i ln|T_i| and Z* = sum What_i ln What_i. Computed in the
    log domain, so extreme q neither overflow nor underflow. Scales with
    fewer than two maxima are dropped and reported.
    """
    q = default_q_grid() if q_values is None else np.asarray(q_values, dtype=float)
    if len(q) == 0:
        raise ValueError("empty q grid")
    counts = np.array([len(m) for m in maxima.moduli])
    kept = np.flatnonzero(counts >= 2)
    if len(kept) == 0:
        raise ValueError("all scales dropped: no scale retains two maxima")
    z = np.empty((len(q), len(kept)))
    zstar = np.empty((len(q), len(kept)))
    for out_k, k in enumerate(kept):
        logm = np.log(maxima.moduli[k])
        ql = q[:, None] * logm[None, :]
        mx = ql.max(axis=1, keepdims=True)
        w = np.exp(ql - mx)
        denom = w.sum(axis=1, keepdims=True)
        weights = w / denom
        logw = ql - mx - np.log(denom)
        z[:, out_k] = (weights * logm[None, :]).sum(axis=1)
        zstar[:, out_k] = (weights * logw).sum(axis=1)
    return PartitionFunctions(
        q_values=q,
        scales=maxima.scales[kept],
        z=z,
        zstar=zstar,
        n_maxima=counts[kept],
        dropped_scales=maxima.scales[counts < 2],
    )


def _band_score(local_slopes: np.ndarray, slope_floor: float) -> float:
    spread = local_slopes.max(axis=1) - local_slopes.min(axis=1)
    med = np.abs(np.median(local_slopes, axis=1))
    return float((spread / np.maximum(med, slope_floor)).max())


def _saturation_mask(pf: PartitionFunctions, min_slope: float) -> np.ndarray:
    """True where the local slope of Z(q~0) says the scale still scales.

    Beyond the scaling regime the partition functions flatten out
    (saturation); such scales must not enter the fit band. The slope is a
    centered difference smoothed with a 3-point median.
    """
    iq = int(np.argmin(np.abs(pf.q_values)))
    z0 = pf.z[iq]
    lt = np.log(pf.scales)
    n = len(lt)
    sl = np.empty(n)
    for k in range(n):
        a, b = max(0, k - 1), min(n - 1, k + 1)
        sl[k] = (z0[b] - z0[a]) / (lt[b] - lt[a])
    smooth = np.array(
        [np.median(sl[max(0, k - 1) : k + 2]) for k in range(n)]
    )
    return smooth >= min_slope


def auto_fit_band(
    pf: PartitionFunctions,
    scale_cap: float | None = None,
    min_scales: int = 4,
    rel_tol: float = 0.15,
    slope_floor: float = 0.25,
    min_maxima: int = 10,
    widest_factor: float = 1.5,
    min_scaling_slope: float = 0.1,
) -> tuple[tuple[float, float], bool]:
    """Widest contiguous scale band where the per-q local slopes of Z and Z*
    are stable to within rel_tol (relative spread of finite-difference
    slopes). Scales above scale_cap, with fewer than min_maxima maxima, or
    inside the saturated (flat-Z) regime are excluded: all three break
    scaling, the first two at coarse scales where the boundary exclusion
    also depletes the maxima count.

    Stochastic signals rarely meet the strict tolerance; then the widest
    band whose score is within widest_factor of the best achievable is used
    and the returned flag is set.
    """
    ok = pf.n_maxima >= min_maxima
    if scale_cap is not None:
        ok &= pf.scales <= scale_cap
    with_sat = ok & _saturation_mask(pf, min_scaling_slope)
    if with_sat.sum() >= min_scales:
        ok = with_sat
    cand = np.flatnonzero(ok)
    if len(cand) < min_scales:
        raise ValueError(f"fewer than {min_scales} usable scales for band selection")
    lt = np.log(pf.scales)
    rows = np.vstack([pf.z, pf.zstar])
    ds = np.diff(rows, axis=1) / np.diff(lt)[None, :]
    best = None  # (width, -score, i, j)
    wide_scores: list[tuple[float, int, int]] = []
    wide = max(min_scales, len(cand) // 3)
    for ii in range(len(cand)):
        for jj in range(ii + min_scales - 1, len(cand)):
            i, j = int(cand[ii]), int(cand[jj])
            if j - i != jj - ii:  # holes from excluded scales break contiguity
                continue
            score = _band_score(ds[:, i:j], slope_floor)
            if score <= rel_tol:
                c = (j - i, -score, i, j)
                if best is None or c > best:
                    best = c
            if j - i + 1 >= wide:
                wide_scores.append((score, i, j))
    if best is not None:
        _, _, i, j = best
        return (float(pf.scales[i]), float(pf.scales[j])), False
    if not wide_scores:
        raise ValueError("no contiguous scale band wide enough for a fit")
    threshold = max(rel_tol, widest_factor * min(s for s, _, _ in wide_scores))
    _, _, i, j = max(
        (j - i, -s, i, j) for s, i, j in wide_scores if s <= threshold
    )
    return (float(pf.scales[i]), float(pf.scales[j])), True


def _slope_r2(x: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares slope and r^2 of each row of ys against x."""
    xc = x - x.mean()
    yc = ys - ys.mean(axis=1, keepdims=True)
    sxx = (xc**2).sum()
    slope = (yc * xc).sum(axis=1) / sxx
    ss_res = ((yc - slope[:, None] * xc[None, :]) ** 2).sum(axis=1)
    ss_tot = (yc**2).sum(axis=1)
    r2 = np.where(ss_tot > 0, 1.0 - ss_res / np.where(ss_tot > 0, ss_tot, 1.0), 0.0)
    return slope, r2


def fit_spectrum(
    pf: PartitionFunctions,
    fit_range: tuple[float, float] | None = None,
    band_scale_cap: float | None = None,
) -> SingularitySpectrum:
    """Slopes of Z and Z* against ln(scale) over the fit band.

    h(q) comes from Z, D(h(q)) from Z*; the reported r^2 is that of the
    h(q) fit. With fit_range=None the band is chosen automatically.
    """
    auto = fit_range is None
    relaxed = False
    if auto:
        fit_range, relaxed = auto_fit_band(pf, scale_cap=band_scale_cap)
    lo, hi = fit_range
    sel = (pf.scales >= lo) & (pf.scales <= hi)
    if sel.sum() < 4:
        raise ValueError(f"fewer than 4 scales inside fit range [{lo:g}, {hi:g}]")
    lt = np.log(pf.scales[sel])
    h, r2 = _slope_r2(lt, pf.z[:, sel])
    d, _ = _slope_r2(lt, pf.zstar[:, sel])
    return SingularitySpectrum(
        q_values=pf.q_values.copy(),
        h_of_q=h,
        d_of_h=d,
        fit_r2=r2,
        fit_range=(float(lo), float(hi)),
        auto_band=auto,
        band_relaxed=relaxed,
    )


def spectrum_extrema(spec: SingularitySpectrum) -> tuple[float, float, float]:
    """(h_l, h_0, h_r): strongest singularity, top, weakest singularity."""
    return spec.h_left, spec.h_top, spec.h_right


def analyze(
    y: np.ndarray,
    scales: np.ndarray | None = None,
    q_values: np.ndarray | None = None,
    order: int = DEFAULT_ORDER,
    fit_range: tuple[float, float] | None = None,
    chain: bool = True,
) -> tuple[SingularitySpectrum, PartitionFunctions]:
    """Full WTMM pass: CWT, maxima, partition functions, fitted spectrum.

    Maxima are supremum-chained across scales by default; negative-q
    partition sums over raw per-scale maxima are corrupted by arbitrarily
    small spurious maxima (set chain=False to get the raw variant).
    The automatic fit band is capped at len(y)/160 so that the boundary
    exclusion zone stays a small fraction of the series.
    """
    y = np.asarray(y, dtype=float)
    if scales is None:
        scales = default_scale_grid(len(y))
    plane = cwt(y, scales, order=order)
    maxima = find_maxima(plane)
    if chain:
        maxima = chain_supremum(maxima)
    pf = partition_functions(maxima, q_values)
    cap = len(y) / 160 if fit_range is None else None
    return fit_spectrum(pf, fit_range=fit_range, band_scale_cap=cap), pf
