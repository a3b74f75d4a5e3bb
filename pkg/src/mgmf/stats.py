"""Phase-diagram statistics and scale-dependent increment distributions."""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np


@dataclass(frozen=True)
class PhasePoint:
    """One point of the phase diagram."""

    alpha: float
    sigma2: float
    h_pred: float
    kurtosis: float


@dataclass(frozen=True)
class IncrementHistogram:
    """Density histogram of standardized increments at one scale."""

    tau: int
    bin_edges: np.ndarray
    density: np.ndarray

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


def variance(a: np.ndarray) -> float:
    """Population variance of the return series."""
    a = np.asarray(a, dtype=float)
    if a.size < 2:
        raise ValueError("variance needs at least 2 samples")
    return float(np.var(a))


def predictability(a: np.ndarray, mu: np.ndarray, p_states: int) -> float:
    """Mean squared conditional time-average of A given the information state.

    H = (1/P) sum_mu <A|mu>^2; states never visited contribute 0. Zero means
    an informationally efficient market.
    """
    a = np.asarray(a, dtype=float)
    mu = np.asarray(mu)
    if len(a) != len(mu):
        raise ValueError("a and mu must have equal length")
    if p_states < 1:
        raise ValueError("p_states must be >= 1")
    if len(mu) and (mu.min() < 0 or mu.max() >= p_states):
        raise ValueError(f"mu values must lie in [0, {p_states})")
    sums = np.bincount(mu, weights=a, minlength=p_states)
    counts = np.bincount(mu, minlength=p_states)
    means = np.divide(sums, counts, out=np.zeros(p_states), where=counts > 0)
    return float((means**2).sum() / p_states)


def kurtosis(a: np.ndarray) -> float:
    """Excess kurtosis (fourth standardized central moment minus 3)."""
    a = np.asarray(a, dtype=float)
    if a.size < 4:
        raise ValueError("kurtosis needs at least 4 samples")
    c = a - a.mean()
    m2 = (c**2).mean()
    if m2 == 0:
        raise ValueError("kurtosis undefined for zero-variance series")
    return float((c**4).mean() / m2**2 - 3.0)


def _freedman_diaconis_bins(z: np.ndarray) -> int:
    q75, q25 = np.percentile(z, [75, 25])
    iqr = q75 - q25
    if iqr <= 0:
        return max(1, int(np.ceil(np.sqrt(z.size))))
    width = 2.0 * iqr * z.size ** (-1.0 / 3.0)
    span = z.max() - z.min()
    return max(1, int(np.ceil(span / width)))


def increment_pdf(
    y: np.ndarray,
    tau: int,
    n_bins: int | None = None,
    step: int = 1,
) -> IncrementHistogram:
    """Density histogram of Y(t+tau) - Y(t), standardized to mean 0, var 1.

    Increments are taken every ``step`` samples (step=tau gives
    non-overlapping increments, whose bin counts are binomial). Requires at
    least 100 increments; bins follow the Freedman-Diaconis rule unless
    n_bins is given.
    """
    y = np.asarray(y, dtype=float)
    if tau < 1 or tau >= len(y):
        raise ValueError(f"tau must satisfy 1 <= tau < {len(y)}")
    if step < 1:
        raise ValueError("step must be >= 1")
    d = y[tau:] - y[:-tau]
    d = d[::step]
    if d.size < 100:
        raise ValueError(f"only {d.size} increments at tau={tau}; need >= 100")
    sd = d.std()
    if sd == 0:
        raise ValueError(f"increments at tau={tau} are degenerate (zero variance)")
    z = (d - d.mean()) / sd
    bins = n_bins if n_bins is not None else _freedman_diaconis_bins(z)
    density, edges = np.histogram(z, bins=bins, density=True)
    return IncrementHistogram(tau=tau, bin_edges=edges, density=density)


def phase_point(alpha: float, a: np.ndarray, mu: np.ndarray, p_states: int) -> PhasePoint:
    """Bundle the three phase-diagram statistics for one realization."""
    return PhasePoint(
        alpha=alpha,
        sigma2=variance(a),
        h_pred=predictability(a, mu, p_states),
        kurtosis=kurtosis(a),
    )
