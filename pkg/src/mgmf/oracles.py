"""Reference signals with analytically known scaling.

Used to validate the analysis code independently of the game engine:
white noise (h=0.5 after integration), fractional Brownian motion with a
prescribed Hurst exponent, and the deterministic binomial cascade whose
singularity spectrum is known in closed form.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
import numpy as np

from .engine import ConfigError

ORACLE_KINDS = ("white_noise", "fbm", "cascade")


@dataclass(frozen=True)
class OracleSpec:
    kind: str
    length: int
    hurst: float = 0.5
    weight: float = 0.6
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in ORACLE_KINDS:
            raise ConfigError("kind", f"unknown oracle kind {self.kind!r}")
        if self.length < 2:
            raise ConfigError("length", "need at least two samples")
        if self.kind == "fbm" and not 0.0 < self.hurst < 1.0:
            raise ConfigError("hurst", "must lie in (0, 1)")
        if self.kind == "cascade":
            if not 0.5 < self.weight < 1.0:
                raise ConfigError("weight", "must lie in (0.5, 1)")
            if self.length & (self.length - 1):
                raise ConfigError("length", "cascade length must be a power of two")
        if self.seed < 0:
            raise ConfigError("seed", "must be non-negative")


def white_noise(length: int, seed: int = 0) -> np.ndarray:
    """I.i.d. standard Gaussian samples."""
    return np.random.default_rng(seed).standard_normal(length)


def fgn_autocovariance(lags: np.ndarray, hurst: float) -> np.ndarray:
    """Autocovariance of unit-variance fractional Gaussian noise."""
    k = np.abs(np.asarray(lags, dtype=float))
    h2 = 2.0 * hurst
    return 0.5 * ((k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


def circulant_eigenvalues(length: int, hurst: float) -> np.ndarray:
    """Eigenvalues of the 2n circulant embedding of the fGn covariance.

    The inverse FFT of this vector reproduces the target autocovariance
    exactly, which is what makes the synthesis exact.
    """
    gamma = fgn_autocovariance(np.arange(length + 1), hurst)
    c = np.concatenate([gamma, gamma[-2:0:-1]])
    return np.fft.fft(c).real


def _fgn_circulant(length: int, hurst: float, rng: np.random.Generator) -> np.ndarray:
    lam = circulant_eigenvalues(length, hurst)
    if lam.min() < -1e-8 * lam.max():
        raise FloatingPointError("circulant embedding produced negative eigenvalues")
    lam = np.clip(lam, 0.0, None)
    m = 2 * length
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    x = np.fft.fft(np.sqrt(lam) * z) / np.sqrt(m)
    return x.real[:length]

def _fgn_spectral(length: int, hurst: float, rng: np.random.Generator) -> np.ndarray:
    # Fourier-filtered white noise; approximate, only used as a fallback.
    m = 1 << (2 * length - 1).bit_length()
    freq = np.fft.rfftfreq(m)
    amp = np.zeros_like(freq)
    amp[1:] = freq[1:] ** (-(hurst + 0.5))
    phase = rng.standard_normal(len(freq)) + 1j * rng.standard_normal(len(freq))
    path = np.fft.irfft(amp * phase, n=m)[:length]
    fgn = np.diff(path, prepend=path[0])
    fgn[0] = fgn[1]
    sd = fgn.std()
    return fgn / sd if sd > 0 else fgn


def fbm(length: int, hurst: float, seed: int = 0) -> np.ndarray:
    """Fractional Brownian motion via exact circulant embedding of fGn.

    Falls back to approximate spectral synthesis (with a warning) if the
    embedding fails, which does not happen for fGn in practice.
    """
    if not 0.0 < hurst < 1.0:
        raise ConfigError("hurst", "must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    try:
        fgn = _fgn_circulant(length, hurst, rng)
    except FloatingPointError:
        warnings.warn(
            "circulant embedding failed; falling back to approximate spectral synthesis",
            RuntimeWarning,
            stacklevel=2,
        )
        fgn = _fgn_spectral(length, hurst, rng)
    return np.cumsum(fgn)


def cascade(length: int, weight: float) -> np.ndarray:
    """Integrated deterministic binomial measure with weights (p, 1-p).

    Returns the cumulative mass at the right edge of each of the
    ``length = 2**k`` dyadic cells. Construction keeps the endpoint mass at
    exactly 1.0 and makes every dyadic block sum exactly to its parent mass:
    each refinement inserts midpoint cumulatives and leaves the coarse
    cumulatives untouched.
    """
    if length < 1 or length & (length - 1):
        raise ConfigError("length", "cascade length must be a power of two")
    if not 0.0 < weight < 1.0:
        raise ConfigError("weight", "must lie in (0, 1)")
    depth = length.bit_length() - 1
    cum = np.array([1.0])
    mass = np.array([1.0])
    for _ in range(depth):
        left_mass = mass * weight
        right_mass = mass - left_mass
        new_cum = np.empty(2 * len(cum))
        new_cum[0::2] = cum - right_mass
        new_cum[1::2] = cum
        new_mass = np.empty(2 * len(mass))
        new_mass[0::2] = left_mass
        new_mass[1::2] = right_mass
        cum, mass = new_cum, new_mass
    return cum


def generate(spec: OracleSpec) -> np.ndarray:
    """Dispatch on the oracle kind; deterministic per seed."""
    spec.validate()
    if spec.kind == "white_noise":
        return white_noise(spec.length, spec.seed)
    if spec.kind == "fbm":
        return fbm(spec.length, spec.hurst, spec.seed)
    return cascade(spec.length, spec.weight)
