"""Grand-canonical minority game with trading groups on distinct time-scales.

Speculators are split into g groups; group j places orders only every ts_j
steps (all groups see the same information and update strategy payoffs
virtually on every step). A single producer group trades unconditionally at
the fastest scale. The excess demand A(t) is the return series; its
cumulative sum Y(t) is the price.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
import numpy as np

try:
    if os.environ.get("MGMF_NO_NUMBA"):
        raise ImportError
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via MGMF_NO_NUMBA
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


# Steps of pre-drawn randomness per refill; fixed so the RNG stream (and
# therefore the series) does not depend on how run() batches its work.
_CHUNK = 1024

TIMESCALE_PRESETS = {
    "daily-weekly": (1, 5),
    "daily-weekly-monthly": (1, 5, 21),
}


class ConfigError(ValueError):
    """Invalid configuration; carries the name of the offending field."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class GameConfig:
    """Full parameterization of one game.

    Exactly one of ``alpha`` and ``p_states`` must be given; the other is
    derived through alpha = P / (g * ns_per_group), with the derived alphabet
    size rounded to the nearest integer and floored at 1.
    """

    g: int = 2
    ns_per_group: int = 500
    np_producers: int = 500
    s_per_agent: int = 2
    timescales: tuple[int, ...] = (1, 5)
    alpha: float | None = None
    p_states: int | None = None
    epsilon: float = 0.01
    horizon: int = 110_000
    transient: int = 10_000
    seed: int = 0
    phases: tuple[int, ...] | None = None

    def validate(self) -> None:
        if self.g < 1:
            raise ConfigError("g", "need at least one speculator group")
        if self.ns_per_group < 1:
            raise ConfigError("ns_per_group", "need at least one speculator per group")
        if self.np_producers < 0:
            raise ConfigError("np_producers", "must be non-negative")
        if self.s_per_agent < 1:
            raise ConfigError("s_per_agent", "need at least one trading strategy")
        ts = tuple(self.timescales)
        if len(ts) != self.g:
            raise ConfigError("timescales", f"expected {self.g} entries, got {len(ts)}")
        if any(t < 1 for t in ts):
            raise ConfigError("timescales", "all time-scales must be >= 1")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ConfigError("timescales", "time-scales must be strictly increasing")
        if ts[0] != 1:
            raise ConfigError("timescales", "fastest group must trade every step (ts_1 = 1)")
        if (self.alpha is None) == (self.p_states is None):
            raise ConfigError("alpha", "give exactly one of alpha and p_states")
        if self.alpha is not None and self.alpha <= 0:
            raise ConfigError("alpha", "must be positive")
        if self.p_states is not None and self.p_states < 1:
            raise ConfigError("p_states", "information alphabet must have at least one state")
        if self.transient < 0:
            raise ConfigError("transient", "must be non-negative")
        if self.horizon <= self.transient:
            raise ConfigError("horizon", "must exceed the transient")
        if self.seed < 0:
            raise ConfigError("seed", "must be non-negative")
        if self.phases is not None:
            ph = tuple(self.phases)
            if len(ph) != self.g:
                raise ConfigError("phases", f"expected {self.g} entries, got {len(ph)}")
            if any(p < 0 or p >= t for p, t in zip(ph, ts)):
                raise ConfigError("phases", "each phase must satisfy 0 <= phase < ts_j")

    @property
    def n_speculators(self) -> int:
        return self.g * self.ns_per_group

    @property
    def effective_p_states(self) -> int:
        """Alphabet size P, derived from alpha when not given explicitly."""
        if self.p_states is not None:
            return self.p_states
        return max(1, round(self.alpha * self.g * self.ns_per_group))

    @property
    def effective_alpha(self) -> float:
        """Control parameter alpha = P / (g * ns_per_group)."""
        if self.alpha is not None:
            return self.alpha
        return self.p_states / (self.g * self.ns_per_group)

    @property
    def effective_phases(self) -> tuple[int, ...]:
        if self.phases is None:
            return (0,) * self.g
        return tuple(self.phases)


@dataclass(frozen=True)
class MarketSeries:
    """Per-step market record, transient already discarded.

    ``y`` restarts accumulation at the first retained step, so
    y[0] == a[0] and y[t] - y[t-1] == a[t] throughout.
    """

    t0: int
    mu: np.ndarray
    a: np.ndarray
    y: np.ndarray
    active: np.ndarray

    def __len__(self) -> int:
        return len(self.a)

    @property
    def t(self) -> np.ndarray:
        """Absolute step indices (transient included in the offset)."""
        return np.arange(self.t0, self.t0 + len(self.a))


@dataclass
class Speculator:
    """One adaptive agent: S frozen strategy tables plus score bookkeeping.

    ``scores`` has S+1 entries; the last is the null (abstain) strategy.
    """

    tables: np.ndarray
    scores: np.ndarray

    @property
    def n_strategies(self) -> int:
        return self.tables.shape[0]


@dataclass
class Producer:
    """Single-strategy agent; always trades, decision a function of mu only."""

    table: np.ndarray
    score: float = 0.0


def choose_best(scores: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Row-wise argmax with exact ties broken uniformly at random.

    scores: (n, k) matrix. One uniform draw per row regardless of tie count,
    keeping the RNG stream length independent of the data.
    """
    return _select(scores, rng.random(scores.shape[0]))


def _select(scores: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Pick tie number floor(u * n_ties) among each row's maxima."""
    ties = scores == scores.max(axis=1, keepdims=True)
    c = np.cumsum(ties, axis=1)
    r = u[:, None] * c[:, -1:]
    return (c > r).argmax(axis=1)


def decide(spec: Speculator, mu: int, rng: np.random.Generator) -> int:
    """Best-ranked strategy's action at mu; 0 when the null strategy wins."""
    k = int(choose_best(spec.scores[None, :], rng)[0])
    if k == spec.n_strategies:
        return 0
    return int(spec.tables[k, mu])


def decide_producer(prod: Producer, mu: int) -> int:
    """Producer action: a plain table lookup, independent of scores."""
    return int(prod.table[mu])


@njit(cache=True)
def _run_steps_numba(
    spec_tables,
    prod_tables,
    spec_scores,
    prod_scores,
    group_of,
    timescales,
    phases,
    eps,
    t0,
    mus,
    ties,
    out_a,
    out_active,
):  # pragma: no cover - compiled; cross-checked against the numpy path
    n_steps = mus.shape[0]
    n_spec, n_strat = spec_scores.shape[0], spec_scores.shape[1] - 1
    n_prod = prod_tables.shape[0]
    g = timescales.shape[0]
    group_active = np.empty(g, dtype=np.bool_)
    for step in range(n_steps):
        t = t0 + step
        mu = mus[step]
        for j in range(g):
            group_active[j] = (t - phases[j]) % timescales[j] == 0

        a_total = 0
        n_active = n_prod
        for i in range(n_prod):
            a_total += prod_tables[i, mu]
        for i in range(n_spec):
            if not group_active[group_of[i]]:
                continue
            best = spec_scores[i, 0]
            for s in range(1, n_strat + 1):
                if spec_scores[i, s] > best:
                    best = spec_scores[i, s]
            cnt = 0
            for s in range(n_strat + 1):
                if spec_scores[i, s] == best:
                    cnt += 1
            j = int(ties[step, i] * cnt)
            if j >= cnt:
                j = cnt - 1
            k = n_strat
            seen = 0
            for s in range(n_strat + 1):
                if spec_scores[i, s] == best:
                    if seen == j:
                        k = s
                        break
                    seen += 1
            if k < n_strat:
                a_total += spec_tables[i, k, mu]
                n_active += 1

        fa = float(a_total)
        for i in range(n_spec):
            for s in range(n_strat):
                spec_scores[i, s] -= spec_tables[i, s, mu] * fa
            spec_scores[i, n_strat] += eps
        for i in range(n_prod):
            prod_scores[i] -= prod_tables[i, mu] * fa

        out_a[step] = a_total
        out_active[step] = n_active


def _run_steps_numpy(
    spec_tables,
    prod_tables,
    spec_scores,
    prod_scores,
    group_of,
    timescales,
    phases,
    eps,
    t0,
    mus,
    ties,
    out_a,
    out_active,
):
    n_strat = spec_scores.shape[1] - 1
    n_prod = prod_tables.shape[0]
    for step in range(len(mus)):
        t = t0 + step
        mu = mus[step]
        acts = spec_tables[:, :, mu]
        choice = _select(spec_scores, ties[step])
        traded = np.take_along_axis(
            acts, np.minimum(choice, n_strat - 1)[:, None], axis=1
        )[:, 0]
        a_spec = np.where(choice < n_strat, traded, 0)
        active_mask = ((t - phases) % timescales == 0)[group_of]
        a_total = int(a_spec[active_mask].sum()) + int(prod_tables[:, mu].sum())

        spec_scores[:, :n_strat] -= acts * float(a_total)
        spec_scores[:, n_strat] += eps
        if n_prod:
            prod_scores -= prod_tables[:, mu] * float(a_total)

        out_a[step] = a_total
        out_active[step] = n_prod + int(np.count_nonzero(a_spec[active_mask]))


class Game:
    """Mutable simulation state. Single-threaded during run; distinct
    instances are independent and safe to run in parallel."""

    def __init__(self, config: GameConfig):
        config.validate()
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        g, ns, S = config.g, config.ns_per_group, config.s_per_agent
        P = config.effective_p_states
        n_spec = g * ns

        tables = self.rng.integers(0, 2, size=(n_spec, S, P), dtype=np.int8)
        self.spec_tables = np.asarray(tables * 2 - 1, dtype=np.int8)
        self.spec_tables.flags.writeable = False
        ptables = self.rng.integers(0, 2, size=(config.np_producers, P), dtype=np.int8)
        self.prod_tables = np.asarray(ptables * 2 - 1, dtype=np.int8)
        self.prod_tables.flags.writeable = False

        self.spec_scores = np.zeros((n_spec, S + 1))
        self.prod_scores = np.zeros(config.np_producers)
        self._group_of = np.repeat(np.arange(g, dtype=np.int64), ns)
        self._timescales = np.asarray(config.timescales, dtype=np.int64)
        self._phases = np.asarray(config.effective_phases, dtype=np.int64)
        self._p = P
        self.t = 0

        h = config.horizon
        self._mu = np.empty(h, dtype=np.int64)
        self._a = np.empty(h, dtype=np.int64)
        self._active = np.empty(h, dtype=np.int64)
        self._buf_pos = _CHUNK  # forces a refill on first use

    @property
    def p_states(self) -> int:
        return self._p

    def speculator(self, i: int) -> Speculator:
        """View onto speculator i (tables shared, scores writable)."""
        return Speculator(self.spec_tables[i], self.spec_scores[i])

    def producer(self, i: int) -> Producer:
        return Producer(self.prod_tables[i], float(self.prod_scores[i]))

    def draw_information(self) -> int:
        """Next information state, uniform over [0, P)."""
        mu = self._next_mu_buffer(1)
        self._buf_pos += 1
        return int(mu[0])

    def _refill(self) -> None:
        self._mu_buf = self.rng.integers(0, self._p, size=_CHUNK)
        self._tie_buf = self.rng.random((_CHUNK, self.config.n_speculators))
        self._buf_pos = 0

    def _next_mu_buffer(self, want: int) -> np.ndarray:
        if self._buf_pos >= _CHUNK:
            self._refill()
        end = min(self._buf_pos + want, _CHUNK)
        return self._mu_buf[self._buf_pos : end]

    def _advance(self, n_steps: int, kernel) -> None:
        cfg = self.config
        done = 0
        while done < n_steps:
            if self._buf_pos >= _CHUNK:
                self._refill()
            take = min(n_steps - done, _CHUNK - self._buf_pos)
            lo, hi = self._buf_pos, self._buf_pos + take
            kernel(
                self.spec_tables,
                self.prod_tables,
                self.spec_scores,
                self.prod_scores,
                self._group_of,
                self._timescales,
                self._phases,
                cfg.epsilon,
                self.t,
                self._mu_buf[lo:hi],
                self._tie_buf[lo:hi],
                self._a[self.t : self.t + take],
                self._active[self.t : self.t + take],
            )
            self._mu[self.t : self.t + take] = self._mu_buf[lo:hi]
            self._buf_pos = hi
            self.t += take
            done += take

    def step(self) -> int:
        """Advance one step and return the excess demand A(t).

        Order of operations: draw mu; active traders act (group j is active
        iff (t - phase_j) mod ts_j == 0, producers always); A(t) is summed;
        then every strategy of every speculator is updated virtually with
        -a^mu * A, the null strategy gains epsilon, and producer scores are
        tracked the same way (they never influence producer decisions).
        """
        if self.t >= self.config.horizon:
            raise RuntimeError("game already ran its full horizon")
        self._advance(1, _run_steps_numpy)
        return int(self._a[self.t - 1])

    def run(self) -> MarketSeries:
        """Execute the remaining steps and return the post-transient series."""
        cfg = self.config
        kernel = _run_steps_numba if _HAVE_NUMBA else _run_steps_numpy
        if self.t < cfg.horizon:
            self._advance(cfg.horizon - self.t, kernel)
        lo = cfg.transient
        a = self._a[lo:].copy()
        return MarketSeries(
            t0=lo,
            mu=self._mu[lo:].copy(),
            a=a,
            y=np.cumsum(a),
            active=self._active[lo:].copy(),
        )


def build_game(config: GameConfig) -> Game:
    """Create a game with frozen i.i.d. uniform strategy tables, scores zero."""
    return Game(config)


def run(config: GameConfig) -> MarketSeries:
    """Build and run a game in one call."""
    return Game(config).run()
