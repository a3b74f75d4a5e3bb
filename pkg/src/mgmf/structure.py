"""Structure functions S_q(tau), scaling-exponent fits, and the
fractal / multifractal classification they support.

S_q(tau) = <|Y(t+tau) - Y(t)|^q> over all overlapping pairs; on a scaling
range it behaves as tau^(q h(q)). A q-independent h means the signal is
fractal; h varying with q means multifractal. Negative q is excluded here
(moment divergence) and handled by the WTMM module instead.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import numpy as np

DEFAULT_SCALING_RANGE = (6, 100)
DEFAULT_SLOPE_TOL = 0.05
DEFAULT_LINEARITY_TOL = 0.05


def default_q_grid() -> np.ndarray:
    """Moment orders 1.0 to 6.5 in steps of 0.5."""
    return np.round(np.arange(1.0, 6.5 + 1e-9, 0.5), 10)


def default_tau_grid(length: int | None = None, points: int = 24, hi: int = 1000) -> np.ndarray:
    """Log-spaced integer lags, 24 points in [1, 1000] by default,
    capped below length/2 when the series length is known."""
    if length is not None:
        hi = min(hi, length // 2 - 1)
    if hi < 1:
        raise ValueError("series too short for any lag")
    taus = np.unique(np.round(np.geomspace(1, hi, points)).astype(np.int64))
    return taus


@dataclass(frozen=True)
class SfResult:
    """S_q(tau) matrix plus, after fitting, exponents over a scaling range.

    ``zeta[i]`` is the fitted exponent q_i * h(q_i); fit_r2 the per-q
    coefficient of determination. Both are None before fit_scaling.
    """

    q_values: np.ndarray
    tau_values: np.ndarray
    sf: np.ndarray
    scaling_range: tuple[int, int] | None = None
    zeta: np.ndarray | None = None
    fit_r2: np.ndarray | None = None

    @property
    def h_of_q(self) -> np.ndarray:
        if self.zeta is None:
            raise ValueError("fit_scaling has not been applied")
        return self.zeta / self.q_values


@dataclass(frozen=True)
class StationarityResult:
    q_values: np.ndarray
    slopes: np.ndarray
    slope_tol: float

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.slopes) <= self.slope_tol))


@dataclass(frozen=True)
class SfClassification:
    kind: str  # "fractal" | "multifractal"
    hurst: float  # h(2)
    linear_fit_h: float  # H from the least-squares fit zeta(q) = H q
    max_deviation: float  # max_q |h(q) - h(2)|
    linearity_tol: float


def structure_function(
    y: np.ndarray, q_values: np.ndarray | None = None, tau_values: np.ndarray | None = None
) -> SfResult:
    """Time-averaged q-th absolute moments of increments at each lag."""
    y = np.asarray(y, dtype=float)
    q = default_q_grid() if q_values is None else np.asarray(q_values, dtype=float)
    taus = default_tau_grid(len(y)) if tau_values is None else np.asarray(tau_values, dtype=np.int64)
    if len(q) == 0 or len(taus) == 0:
        raise ValueError("empty q or tau grid")
    if np.any(q <= 0):
        raise ValueError("q must be positive (negative moments belong to WTMM)")
    if taus.min() < 1 or taus.max() >= len(y) / 2:
        raise ValueError(f"lags must satisfy 1 <= tau < {len(y) / 2:g}")
    sf = np.empty((len(q), len(taus)))
    for j, tau in enumerate(taus):
        d = np.abs(y[tau:] - y[:-tau])
        sf[:, j] = np.mean(d[None, :] ** q[:, None], axis=1)
    return SfResult(q_values=q, tau_values=taus, sf=sf)


def _loglog_slopes(result: SfResult, sel: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lt = np.log(result.tau_values[sel])
    slopes = np.empty(len(result.q_values))
    r2 = np.empty(len(result.q_values))
    xc = lt - lt.mean()
    sxx = (xc**2).sum()
    for i in range(len(result.q_values)):
        vals = result.sf[i, sel]
        if np.any(vals <= 0):
            raise ValueError("structure function vanishes inside the fit range")
        ly = np.log(vals)
        yc = ly - ly.mean()
        slopes[i] = (yc * xc).sum() / sxx
        ss_tot = (yc**2).sum()
        ss_res = ((yc - slopes[i] * xc) ** 2).sum()
        r2[i] = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return slopes, r2


def stationarity_check(
    a: np.ndarray,
    q_values: np.ndarray | None = None,
    tau_values: np.ndarray | None = None,
    slope_tol: float = DEFAULT_SLOPE_TOL,
) -> StationarityResult:
    """Log-log slopes of S_q(tau) of the RETURN series; flat means stationary."""
    result = structure_function(a, q_values, tau_values)
    slopes, _ = _loglog_slopes(result, np.ones(len(result.tau_values), dtype=bool))
    return StationarityResult(q_values=result.q_values, slopes=slopes, slope_tol=slope_tol)


def fit_scaling(result: SfResult, scaling_range: tuple[int, int] = DEFAULT_SCALING_RANGE) -> SfResult:
    """Least-squares slope of ln S_q versus ln tau inside the scaling range."""
    lo, hi = scaling_range
    sel = (result.tau_values >= lo) & (result.tau_values <= hi)
    if sel.sum() < 4:
        raise ValueError(
            f"only {int(sel.sum())} lags inside scaling range [{lo}, {hi}]; need >= 4"
        )
    zeta, r2 = _loglog_slopes(result, sel)
    return replace(result, scaling_range=(int(lo), int(hi)), zeta=zeta, fit_r2=r2)


def classify(result: SfResult, linearity_tol: float = DEFAULT_LINEARITY_TOL) -> SfClassification:
    """Fractal when h(q) is constant in q (within tolerance), else multifractal.

    The reference value is h(2), the Hurst exponent (interpolated if 2 is
    not on the q grid); the linear fit zeta(q) = H q is reported alongside.
    """
    if result.zeta is None:
        raise ValueError("fit_scaling has not been applied")
    q = result.q_values
    h = result.h_of_q
    order = np.argsort(q)
    h2 = float(np.interp(2.0, q[order], h[order]))
    max_dev = float(np.max(np.abs(h - h2)))
    linear_h = float((q * result.zeta).sum() / (q**2).sum())
    kind = "multifractal" if max_dev > linearity_tol else "fractal"
    return SfClassification(
        kind=kind,
        hurst=h2,
        linear_fit_h=linear_h,
        max_deviation=max_dev,
        linearity_tol=linearity_tol,
    )
