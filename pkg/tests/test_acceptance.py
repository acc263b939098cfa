"""Acceptance gate: one test per criterion, each printing a pass line with
its runtime and enforcing the stated budget."""

import time

import numpy as np
import pytest

from oracles import oracle_stats

from beliefsafe import (
    Belief,
    HypothesisSet,
    MixedStrategy,
    PayoffMatrix,
    full_simplex_for_game,
    lambda_policy,
    maximin_strategy,
    opportunity_risk_nfg,
    theta_stats,
)
from beliefsafe.casestudies import (
    enumerate_ordinal_2x2,
    ingest_movement_csv,
    mp_amp_instances,
    raw_ordinal_pair_count,
    security_attacker_specs,
    build_green_security_game,
    synth_movement_data,
)
from beliefsafe.envelopes import (
    adversarial_matrix,
    nfg_lower_bound,
    nfg_upper_bound,
    sbg_envelopes,
)
from beliefsafe.harness import ExperimentConfig, run_tradeoff_nfg
from beliefsafe.opponents import MarkovianSpec, kernel_from_markovian
from beliefsafe.stochastic import (
    StochasticGame,
    StrategyKernel,
    blend_policy,
    game_value_sbg,
    opportunity_risk_sbg,
    safe_exploit_policy,
    single_state_game,
)

LAM_GRID_11 = tuple(np.round(np.linspace(0.0, 1.0, 11), 10))


def dedupe(members):
    out = []
    for m in members:
        if all(np.abs(np.asarray(m) - np.asarray(o)).sum() > 1e-9 for o in out):
            out.append(m)
    return out


class budget:
    """Context manager asserting the criterion's runtime budget and printing
    the one-line verdict."""

    def __init__(self, name, seconds):
        self.name = name
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        if exc_type is None:
            assert elapsed < self.seconds, (
                f"{self.name} took {elapsed:.2f}s, budget {self.seconds}s"
            )
            print(f"[PASS] {self.name} ({elapsed:.2f}s < {self.seconds}s)")
        else:
            print(f"[FAIL] {self.name} ({elapsed:.2f}s)")
        return False


def test_criterion_mp_pareto_identity():
    with budget("MP Pareto identity: opportunity + risk = 2 across the lambda grid", 1.0):
        A = PayoffMatrix([[1, -1], [-1, 1]])
        theta = full_simplex_for_game(A)
        for lam in LAM_GRID_11:
            rep = opportunity_risk_nfg(A, theta, lambda_policy(A, theta, lam), [0.0, 2.0])
            assert abs(rep.opportunity - (1 - lam)) <= 1e-9
            assert abs(rep.risk - (1 + lam)) <= 1e-9
            assert abs(rep.opportunity + rep.risk - 2.0) <= 1e-9


def test_criterion_amp_lower_bound_tightness():
    with budget("AMP tightness: exact tradeoff sits on the risk-floor line", 5.0):
        _, amp, theta = mp_amp_instances()
        stats = theta_stats(theta, amp)
        assert (stats.kappa, stats.eta) == (1.0, 2.0)
        assert stats.mu == pytest.approx(1.2) and stats.nu == pytest.approx(0.2, abs=1e-12)
        for lam in LAM_GRID_11:
            rep = opportunity_risk_nfg(amp, theta, lambda_policy(amp, theta, lam), [0.0, 2.0])
            assert abs(rep.opportunity - (1 - lam)) <= 1e-6
            assert abs(rep.risk - (1 + lam)) <= 1e-6
            up_opp, up_risk = nfg_upper_bound(stats.mu, stats.nu, stats.eta, lam)
            assert rep.opportunity <= up_opp + 1e-9
            assert rep.risk <= up_risk + 1e-9


def test_criterion_definition_stats_oracle():
    with budget("hypothesis-set statistics match the brute-force enumerator on 200 games", 10.0):
        rng = np.random.default_rng(12345)
        done = 0
        while done < 200:
            a = int(rng.integers(1, 5))
            b = int(rng.integers(2, 5))
            A = rng.uniform(-3, 3, size=(a, b))
            k = int(rng.integers(1, 7))
            members = [tuple(rng.dirichlet(np.ones(b))) for _ in range(k)]
            try:
                theta = HypothesisSet.of(members)
            except ValueError:
                continue
            s = theta_stats(theta, PayoffMatrix(A))
            o_eta, o_kappa, o_mu, o_nu = oracle_stats(
                [list(m.probs) for m in theta.members], [list(r) for r in A]
            )
            assert s.eta == o_eta
            assert s.kappa == o_kappa
            assert s.mu == o_mu
            assert s.nu == o_nu
            done += 1


def test_criterion_maximin_duality_and_guarantee():
    with budget("maximin matches the dual value on 100 zero-sum games", 10.0):
        rng = np.random.default_rng(777)
        for _ in range(100):
            A = rng.uniform(-2, 2, size=(3, 3))
            theta = HypothesisSet.simplex_vertices(3)
            primal = maximin_strategy(PayoffMatrix(A), theta)
            dual = maximin_strategy(PayoffMatrix(-A.T), HypothesisSet.simplex_vertices(3))
            assert abs(primal.value + dual.value) <= 1e-7
            for m in theta.members:
                assert primal.strategy.probs @ A @ m.probs >= primal.value - 1e-8


def test_criterion_nfg_envelopes():
    with budget("trust-blend measurements respect the achievable and floor envelopes", 60.0):
        rng = np.random.default_rng(31337)
        lams = (0.0, 0.25, 0.5, 0.75, 1.0)

        # 500 (game, type set, lambda) triples built like the experimental
        # protocol: two pure types, the opponent's game-value type, extras.
        for _ in range(100):
            a = int(rng.integers(2, 5))
            b = int(rng.integers(2, 5))
            A = PayoffMatrix(rng.uniform(-2, 2, size=(a, b)))
            value_point = maximin_strategy(
                PayoffMatrix(-A.entries.T), HypothesisSet.simplex_vertices(a)
            ).strategy
            members = [np.eye(b)[0], np.eye(b)[1], value_point.probs]
            members += [rng.dirichlet(np.ones(b)) for _ in range(int(rng.integers(0, 3)))]
            theta = HypothesisSet.of(dedupe(members))
            s = theta_stats(theta, A)
            reps = {
                lam: opportunity_risk_nfg(
                    A, theta, lambda_policy(A, theta, lam), [0.0, s.eta], mix_step=0.02
                )
                for lam in lams
            }
            for lam in lams:
                up_opp, up_risk = nfg_upper_bound(s.mu, s.nu, s.eta, lam)
                assert reps[lam].opportunity <= up_opp + 1e-8
                assert reps[lam].risk <= up_risk + 1e-8

        # adversarial instances: the measured risk reaches the floor
        for _ in range(30):
            b = int(rng.integers(2, 5))
            members = [np.eye(b)[0], np.eye(b)[1]]
            members += [rng.dirichlet(np.ones(b)) for _ in range(int(rng.integers(0, 2)))]
            theta = HypothesisSet.of(dedupe(members))
            nu = float(rng.uniform(0.0, 0.5))
            mu = nu + float(rng.uniform(0.5, 2.0))
            A = adversarial_matrix(mu, nu, theta, int(rng.integers(2, 4)), b)
            s = theta_stats(theta, A)
            for lam in (0.0, 0.5, 1.0):
                rep = opportunity_risk_nfg(
                    A, theta, lambda_policy(A, theta, lam), [0.0, s.eta], mix_step=0.02
                )
                floor = nfg_lower_bound(mu, nu, s.kappa, lam)
                assert rep.opportunity <= nfg_upper_bound(mu, nu, s.eta, lam)[0] + 1e-8
                assert rep.risk >= floor - 1e-8


def test_criterion_stateless_reduction():
    with budget("one-state reduction matches normal-form gaps at 1/(1-gamma)", 10.0):
        gamma = 0.9
        entries = np.array([[1.0, -1.0], [-1.0, 1.0]])
        game = single_state_game(entries, gamma=gamma)
        kernel = StrategyKernel.of(
            {"always0": [[1.0, 0.0]], "always1": [[0.0, 1.0]], "balanced": [[0.5, 0.5]]}
        )
        names = kernel.type_names
        gv = game_value_sbg(game, kernel, names)
        A = PayoffMatrix(entries)
        theta = HypothesisSet.of([(1, 0), (0, 1), (0.5, 0.5)])
        scale = 1.0 / (1.0 - gamma)

        def builder(t, lam):
            return blend_policy(game, kernel, names, t, lam, game_value=gv)

        for lam in LAM_GRID_11:
            rep = opportunity_risk_sbg(game, kernel, names, lam, builder)
            nfg = opportunity_risk_nfg(A, theta, lambda_policy(A, theta, lam), [0.0, 2.0])
            assert abs(rep.beta - scale * nfg.opportunity) <= 1e-6
            assert abs(rep.delta - scale * nfg.risk) <= 1e-6
        assert abs(gv.nu - scale * maximin_strategy(A, theta).value) <= 1e-6


def test_criterion_sbg_envelopes():
    with budget("stochastic envelopes hold on random games and the floor family", 300.0):
        rng = np.random.default_rng(55555)
        lams = (0.0, 0.25, 0.5, 0.75, 1.0)
        for _ in range(20):
            S = int(rng.integers(1, 5))
            An = int(rng.integers(2, 4))
            Bn = int(rng.integers(2, 4))
            Tn = int(rng.integers(2, 5))
            gamma = float(rng.uniform(0.5, 0.9))
            reward = rng.uniform(-1, 1, size=(S, An, Bn))
            transition = rng.dirichlet(np.ones(S), size=(S, An, Bn))
            game = StochasticGame(
                states=tuple(f"s{i}" for i in range(S)),
                agent_actions=tuple(f"a{i}" for i in range(An)),
                opponent_actions=tuple(f"b{i}" for i in range(Bn)),
                reward=reward,
                transition=transition,
                gamma=gamma,
                r_max=1.0,
            )
            kernel = StrategyKernel.of(
                {f"t{j}": rng.dirichlet(np.ones(Bn), size=S) for j in range(Tn)}
            )
            names = kernel.type_names
            gv = game_value_sbg(game, kernel, names)

            def builder(t, lam):
                return safe_exploit_policy(game, kernel, names, t, lam, game_value=gv)

            for lam in lams:
                rep = opportunity_risk_sbg(game, kernel, names, lam, builder)
                env = sbg_envelopes(gamma, game.r_max, gv.nu, lam)
                assert rep.beta <= env.upper_opportunity + 1e-8
                assert rep.delta <= env.upper_risk + 1e-8

        # floor family: one-state antipodal game, mixture weight chosen so the
        # opportunity is pinned to the floor level; the risk then reaches it.
        gamma, r_max = 0.9, 2.0
        game = single_state_game(r_max * np.array([[1.0, -1.0], [-1.0, 1.0]]), gamma=gamma)
        kernel = StrategyKernel.of(
            {"always0": [[1.0, 0.0]], "always1": [[0.0, 1.0]], "balanced": [[0.5, 0.5]]}
        )
        names = kernel.type_names
        gv = game_value_sbg(game, kernel, names)
        nu = gv.nu
        assert abs(nu) <= 1e-8
        for lam in LAM_GRID_11:
            pinned_beta = (r_max - nu) * (1 - lam) / (1 - lam * gamma)
            floor_delta = (r_max - nu) * (1 + lam) / (1 - lam * gamma)
            w = 1.0 - (1.0 - gamma) * (1.0 - lam) / (1.0 - lam * gamma)

            def builder(t, _l, _w=w):
                return blend_policy(game, kernel, names, t, _w, game_value=gv)

            rep = opportunity_risk_sbg(game, kernel, names, lam, builder)
            assert abs(rep.beta - pinned_beta) <= 1e-6
            assert rep.delta >= floor_delta - 1e-6


def test_criterion_topology_count():
    with budget("576 ordered rank pairs reduce to exactly 78 classes", 1.0):
        assert raw_ordinal_pair_count() == 576
        assert len(enumerate_ordinal_2x2()) == 78


def test_criterion_variance_shrinkage():
    with budget("confidence intervals shrink from 100 to 1000 runs", 30.0):
        small = ExperimentConfig(game="mp", runs=100, seed=2024, lambda_grid=LAM_GRID_11)
        big = ExperimentConfig(game="mp", runs=1000, seed=2024, lambda_grid=LAM_GRID_11)
        rows_s, _ = run_tradeoff_nfg(small)
        rows_b, _ = run_tradeoff_nfg(big)

        def mean_ci(rows):
            return float(np.mean([r["opportunity_ci"] + r["risk_ci"] for r in rows]))

        assert mean_ci(rows_b) < mean_ci(rows_s)


def test_criterion_security_game_qualitative(tmp_path):
    with budget("security game: opportunity falls and worst-pair risk rises with trust", 120.0):
        csv_path = synth_movement_data(tmp_path / "tracks.csv", seed=7)
        world = ingest_movement_csv(csv_path, (0.0, 3.0), (0.0, 3.0))
        game, attacker = build_green_security_game(world, gamma=0.9)
        specs = security_attacker_specs(world, attacker, seed=7)
        stationary = {k: v for k, v in specs.items() if isinstance(v, MarkovianSpec)}
        kernel = kernel_from_markovian(stationary)
        names = kernel.type_names
        gv = game_value_sbg(game, kernel, names)

        def builder(t, lam):
            return safe_exploit_policy(game, kernel, names, t, lam, game_value=gv)

        betas = []
        pair_gaps = {}
        for lam in LAM_GRID_11:
            rep = opportunity_risk_sbg(game, kernel, names, lam, builder)
            betas.append(rep.beta)
            for th, ts, d, g in rep.per_pair:
                if d > 1e-12:
                    pair_gaps.setdefault((th, ts), []).append(g)

        assert all(b1 <= b0 + 1e-8 for b0, b1 in zip(betas, betas[1:])), betas
        worst_pair = max(pair_gaps, key=lambda k: pair_gaps[k][-1])
        gaps = pair_gaps[worst_pair]
        assert all(g1 >= g0 - 1e-8 for g0, g1 in zip(gaps, gaps[1:])), (worst_pair, gaps)
