"""Engine contract tests: construction, decisions, payoff arithmetic, runs."""

import numpy as np
import pytest

from mgmf.engine import (
    ConfigError,
    Game,
    GameConfig,
    Producer,
    Speculator,
    build_game,
    choose_best,
    decide,
    decide_producer,
    run,
)


def tiny_config(**kw):
    base = dict(
        g=1,
        ns_per_group=1,
        np_producers=0,
        s_per_agent=2,
        timescales=(1,),
        p_states=4,
        epsilon=0.01,
        horizon=10,
        transient=0,
        seed=123,
    )
    base.update(kw)
    return GameConfig(**base)


class TestConfig:
    def test_build_contract(self):
        g = build_game(tiny_config())
        assert g.spec_tables.shape == (1, 2, 4)
        assert set(np.unique(g.spec_tables)) <= {-1, 1}
        assert np.all(g.spec_scores == 0.0)
        assert np.all(g.prod_scores == 0.0)

    def test_same_seed_same_tables(self):
        g1 = build_game(tiny_config(seed=9))
        g2 = build_game(tiny_config(seed=9))
        assert np.array_equal(g1.spec_tables, g2.spec_tables)
        assert np.array_equal(g1.prod_tables, g2.prod_tables)

    def test_p_zero_rejected(self):
        with pytest.raises(ConfigError, match="p_states"):
            tiny_config(p_states=0).validate()

    def test_exactly_one_of_alpha_p(self):
        with pytest.raises(ConfigError, match="alpha"):
            tiny_config(alpha=0.1, p_states=4).validate()
        with pytest.raises(ConfigError, match="alpha"):
            tiny_config(p_states=None).validate()

    def test_alpha_derivation(self):
        cfg = GameConfig(g=2, ns_per_group=500, alpha=0.1, horizon=10, transient=0)
        assert cfg.effective_p_states == 100
        cfg2 = GameConfig(g=2, ns_per_group=500, p_states=100, horizon=10, transient=0)
        assert cfg2.effective_alpha == pytest.approx(0.1)
        # derived P never drops below 1
        assert GameConfig(alpha=1e-9, horizon=10, transient=0).effective_p_states == 1

    def test_timescale_validation(self):
        with pytest.raises(ConfigError, match="timescales"):
            tiny_config(g=2, timescales=(1, 1)).validate()
        with pytest.raises(ConfigError, match="timescales"):
            tiny_config(timescales=(2,)).validate()
        with pytest.raises(ConfigError, match="timescales"):
            tiny_config(g=2, timescales=(1,)).validate()

    def test_horizon_transient(self):
        with pytest.raises(ConfigError, match="horizon"):
            tiny_config(horizon=5, transient=5).validate()
        with pytest.raises(ConfigError, match="transient"):
            tiny_config(transient=-1).validate()

    def test_phase_validation(self):
        with pytest.raises(ConfigError, match="phases"):
            tiny_config(phases=(1,)).validate()  # phase must be < ts_j = 1
        cfg = GameConfig(
            g=2, ns_per_group=2, timescales=(1, 5), phases=(0, 3), p_states=4,
            horizon=10, transient=0,
        )
        cfg.validate()


class TestInformation:
    def test_singleton_alphabet(self):
        g = build_game(tiny_config(p_states=1))
        assert all(g.draw_information() == 0 for _ in range(50))

    def test_uniformity_5_sigma(self):
        g = build_game(tiny_config(p_states=16, seed=5))
        n = 100_000
        draws = np.array([g.draw_information() for _ in range(n)])
        counts = np.bincount(draws, minlength=16)
        p = 1 / 16
        sigma = np.sqrt(n * p * (1 - p))
        assert np.all(np.abs(counts - n * p) < 5 * sigma)

    def test_same_seed_same_mu_sequence(self):
        g1 = build_game(tiny_config(seed=3))
        g2 = build_game(tiny_config(seed=3))
        s1 = [g1.draw_information() for _ in range(200)]
        s2 = [g2.draw_information() for _ in range(200)]
        assert s1 == s2


class TestDecide:
    def test_strict_argmax(self):
        # s1 maps mu->+1 and has the highest score
        spec = Speculator(
            tables=np.array([[1, 1], [-1, -1]], dtype=np.int8),
            scores=np.array([2.0, -1.0, 0.0]),
        )
        rng = np.random.default_rng(0)
        assert decide(spec, 0, rng) == 1

    def test_null_dominates(self):
        spec = Speculator(
            tables=np.array([[1, 1], [-1, -1]], dtype=np.int8),
            scores=np.array([-1.0, -1.0, 0.5]),
        )
        rng = np.random.default_rng(0)
        assert decide(spec, 1, rng) == 0

    def test_tie_break_uniform_chi2(self):
        # all three strategies tied; selection counts should be uniform
        rng = np.random.default_rng(42)
        scores = np.zeros((1, 3))
        picks = np.array([int(choose_best(scores, rng)[0]) for _ in range(10_000)])
        counts = np.bincount(picks, minlength=3)
        expected = len(picks) / 3
        chi2 = ((counts - expected) ** 2 / expected).sum()
        assert chi2 < 13.8  # chi-square(2 dof) at p = 0.001

    def test_producer_lookup_no_abstention(self):
        table = np.array([1, -1, 1, -1], dtype=np.int8)
        prod = Producer(table=table)
        assert decide_producer(prod, 3) == -1
        assert all(decide_producer(prod, mu) in (-1, 1) for mu in range(4))
        # scores never matter
        prod_scored = Producer(table=table, score=-1e9)
        assert decide_producer(prod_scored, 3) == decide_producer(prod, 3)


class TestStep:
    def test_summation_of_forced_actions(self):
        # 3 speculators forced onto their first strategy; no producers
        cfg = tiny_config(ns_per_group=3, p_states=2, horizon=5)
        g = build_game(cfg)
        g.spec_scores[:, 0] = 10.0  # strategy 0 strictly best for everyone
        a = g.step()
        mu = int(g._mu[0])
        expected = int(g.spec_tables[:, 0, mu].sum())
        assert a == expected

    def test_payoff_arithmetic_eq1_eq2(self):
        # U' = U - a*A for trading strategies, U' = U + eps for the null one
        cfg = tiny_config(ns_per_group=2, p_states=2, epsilon=0.01, horizon=5)
        g = build_game(cfg)
        g.spec_scores[:] = [[3.0, 0.0, 0.0], [3.0, 0.0, 0.0]]
        before = g.spec_scores.copy()
        a = g.step()
        mu = int(g._mu[0])
        acts = g.spec_tables[:, :, mu]
        assert np.allclose(g.spec_scores[:, :2], before[:, :2] - acts * a)
        assert np.allclose(g.spec_scores[:, 2], before[:, 2] + 0.01)

    def test_virtual_update_with_activity_gating(self):
        # group 2 (ts=5) is inactive at t=1..4 yet its scores still move
        cfg = GameConfig(
            g=2, ns_per_group=2, np_producers=1, s_per_agent=2,
            timescales=(1, 5), p_states=2, epsilon=0.0,
            horizon=10, transient=0, seed=11,
        )
        g = build_game(cfg)
        # group 1 = speculators 0,1; group 2 = speculators 2,3
        g.spec_scores[:, 0] = 5.0  # everyone prefers strategy 0 when active
        a1 = g.step()  # t=0: both groups active
        scores_after_t0 = g.spec_scores.copy()
        a2 = g.step()  # t=1: only group 1 active
        mu1 = int(g._mu[1])
        # group-2 members were inactive at t=1, but Eq. 1 still applied
        if a2 != 0:
            assert not np.allclose(g.spec_scores[2:, :2], scores_after_t0[2:, :2])
        expected = scores_after_t0[2:, :2] - g.spec_tables[2:, :, mu1] * a2
        assert np.allclose(g.spec_scores[2:, :2], expected)
        # and group 2 contributed nothing to A at t=1
        group1_act = g.spec_tables[:2, 0, mu1]
        prod_act = g.prod_tables[:, mu1].sum()
        assert a2 == int(group1_act.sum()) + int(prod_act)

    def test_step_beyond_horizon_raises(self):
        g = build_game(tiny_config(horizon=2))
        g.step()
        g.step()
        with pytest.raises(RuntimeError):
            g.step()


class TestRun:
    def test_length_contract(self):
        cfg = tiny_config(horizon=1000, transient=200, ns_per_group=5)
        series = run(cfg)
        assert len(series) == 800
        assert series.t0 == 200
        assert series.t[0] == 200 and series.t[-1] == 999

    def test_degenerate_market_all_abstain(self):
        # huge interest rate: after the first step nobody trades
        cfg = GameConfig(
            g=1, ns_per_group=10, np_producers=0, s_per_agent=2,
            timescales=(1,), p_states=4, epsilon=1e9,
            horizon=200, transient=1, seed=2,
        )
        series = run(cfg)
        assert np.all(series.a == 0)
        assert np.all(series.active == 0)

    def test_determinism_bit_identical(self):
        cfg = tiny_config(ns_per_group=20, np_producers=5, horizon=500, transient=100)
        s1, s2 = run(cfg), run(cfg)
        assert np.array_equal(s1.a, s2.a)
        assert np.array_equal(s1.mu, s2.mu)
        assert np.array_equal(s1.active, s2.active)

    def test_y_telescopes(self):
        series = run(tiny_config(ns_per_group=7, np_producers=3, horizon=300))
        assert series.y[0] == series.a[0]
        assert np.array_equal(np.diff(series.y), series.a[1:])
        assert series.y[-1] == series.a.sum()

    def test_demand_bound(self):
        cfg = GameConfig(
            g=2, ns_per_group=4, np_producers=3, timescales=(1, 5),
            p_states=8, horizon=400, transient=0, seed=7,
        )
        series = run(cfg)
        for t, a in zip(series.t, series.a):
            bound = 3 + sum(4 for ts in (1, 5) if t % ts == 0)
            assert abs(a) <= bound

    def test_tables_immutable_and_roster_fixed(self):
        cfg = tiny_config(ns_per_group=6, np_producers=2, horizon=100)
        g = build_game(cfg)
        table_hash = hash(g.spec_tables.tobytes()) ^ hash(g.prod_tables.tobytes())
        with pytest.raises(ValueError):
            g.spec_tables[0, 0, 0] = 1
        g.run()
        assert hash(g.spec_tables.tobytes()) ^ hash(g.prod_tables.tobytes()) == table_hash
        assert g.spec_tables.shape == (6, 2, 4)
        assert g.prod_tables.shape == (2, 4)
        assert g.p_states == 4

    def test_score_linearity_over_run(self):
        # final trading score must equal -sum_t a(mu_t) * A_t, null = eps * T
        cfg = tiny_config(ns_per_group=4, np_producers=2, horizon=250, epsilon=0.25)
        g = build_game(cfg)
        series = g.run()
        acts = g.spec_tables[:, :, series.mu]  # (n_spec, S, T)
        expected = -(acts * series.a[None, None, :].astype(float)).sum(axis=2)
        assert np.allclose(g.spec_scores[:, :2], expected)
        assert np.allclose(g.spec_scores[:, 2], 0.25 * cfg.horizon)
        prod_expected = -(
            g.prod_tables[:, series.mu] * series.a[None, :].astype(float)
        ).sum(axis=1)
        assert np.allclose(g.prod_scores, prod_expected)

    def test_phase_offsets_shift_activity(self):
        cfg = GameConfig(
            g=2, ns_per_group=3, np_producers=0, timescales=(1, 5),
            phases=(0, 2), p_states=2, epsilon=-1e9,
            horizon=40, transient=0, seed=1,
        )
        g = build_game(cfg)
        g.spec_scores[:, 0] = 1.0  # force trading so active == roster
        series = g.run()
        for t, n_act in zip(series.t, series.active):
            expected = 3 + (3 if (t - 2) % 5 == 0 else 0)
            assert n_act == expected

    def test_standard_mg_reduction_gaussian_kurtosis(self):
        # g=1, no producers, null never chosen: the plain minority game far
        # above the transition has near-Gaussian returns
        cfg = GameConfig(
            g=1, ns_per_group=101, np_producers=0, s_per_agent=2,
            timescales=(1,), alpha=4.0, epsilon=-1e9,
            horizon=20_000, transient=2_000, seed=17,
        )
        series = run(cfg)
        a = series.a.astype(float)
        c = a - a.mean()
        kurt = (c**4).mean() / (c**2).mean() ** 2 - 3
        assert abs(kurt) < 0.3

    def test_numpy_numba_paths_identical(self, monkeypatch):
        import subprocess, sys

        cfg_literal = (
            "GameConfig(g=2, ns_per_group=5, np_producers=3, timescales=(1, 5),"
            " p_states=6, horizon=700, transient=100, seed=21)"
        )
        code = (
            "import numpy as np\n"
            "from mgmf.engine import GameConfig, run\n"
            f"s = run({cfg_literal})\n"
            "print(repr(s.a.tolist()))\n"
        )
        out_fast = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True, check=True
        ).stdout
        out_ref = subprocess.run(
            [sys.executable, "-c", code],
            capture_output=True,
            text=True,
            check=True,
            env={"MGMF_NO_NUMBA": "1", "PATH": "/usr/bin:/bin"},
        ).stdout
        assert out_fast == out_ref
