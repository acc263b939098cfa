import numpy as np
import pytest

from beliefsafe import (
    HypothesisSet,
    PayoffMatrix,
    lambda_policy,
    maximin_strategy,
    opportunity_risk_nfg,
)
from beliefsafe.stochastic import (
    AgentPolicy,
    StationaryAgent,
    StochasticGame,
    StrategyKernel,
    blend_policy,
    game_value_sbg,
    load_sbg_game,
    opportunity_risk_sbg,
    optimal_value,
    payoff_gap_sbg,
    policy_evaluation,
    r_matrix,
    safe_exploit_policy,
    save_sbg_game,
    simulate_episode,
    single_state_game,
)

MP = np.array([[1.0, -1.0], [-1.0, 1.0]])
MP_KERNEL = StrategyKernel.of(
    {"always0": [[1.0, 0.0]], "always1": [[0.0, 1.0]], "balanced": [[0.5, 0.5]]}
)


def two_state_chain(gamma=0.9):
    """s0 -> s1 -> s1 deterministic, rewards 1 then 0, single actions."""
    reward = np.array([[[1.0]], [[0.0]]])
    transition = np.zeros((2, 1, 1, 2))
    transition[0, 0, 0, 1] = 1.0
    transition[1, 0, 0, 1] = 1.0
    return StochasticGame(
        states=("s0", "s1"),
        agent_actions=("a",),
        opponent_actions=("b",),
        reward=reward,
        transition=transition,
        gamma=gamma,
        r_max=1.0,
    )


def uniform_policy(game):
    A = len(game.agent_actions)
    return AgentPolicy(np.full((game.n_states, A), 1.0 / A))


def uniform_sigma(game):
    B = len(game.opponent_actions)
    return np.full((game.n_states, B), 1.0 / B)


def random_game(rng, S=3, A=2, B=2, gamma=0.8, r_scale=1.0):
    reward = rng.uniform(-r_scale, r_scale, size=(S, A, B))
    transition = rng.dirichlet(np.ones(S), size=(S, A, B))
    return StochasticGame(
        states=tuple(f"s{i}" for i in range(S)),
        agent_actions=tuple(f"a{i}" for i in range(A)),
        opponent_actions=tuple(f"b{i}" for i in range(B)),
        reward=reward,
        transition=transition,
        gamma=gamma,
        r_max=r_scale,
    )


# ----------------------------------------------------------- value fixed points


def test_constant_reward_geometric_value():
    g = single_state_game(np.full((2, 2), 0.7), gamma=0.9)
    V = policy_evaluation(g, uniform_policy(g), uniform_sigma(g))
    assert V[0] == pytest.approx(0.7 / 0.1, abs=1e-8)


def test_myopic_limit_tiny_gamma():
    rng = np.random.default_rng(0)
    g = random_game(rng, gamma=1e-12)
    pi, sigma = uniform_policy(g), uniform_sigma(g)
    V = policy_evaluation(g, pi, sigma)
    one_step = np.einsum("sa,sb,sab->s", pi.probs, sigma, g.reward)
    assert np.abs(V - one_step).max() <= 1e-10


def test_two_state_chain_closed_form():
    g = two_state_chain()
    V = policy_evaluation(g, uniform_policy(g), uniform_sigma(g))
    assert V[0] == pytest.approx(1.0, abs=1e-9)
    assert V[1] == pytest.approx(0.0, abs=1e-12)


def test_optimal_value_stateless_matches_best_row():
    g = single_state_game(MP, gamma=0.9)
    sigma = np.array([[0.7, 0.3]])
    V, greedy = optimal_value(g, sigma)
    per_step = (MP @ sigma[0]).max()
    assert V[0] * (1 - 0.9) == pytest.approx(per_step, abs=1e-9)
    assert np.array_equal(greedy.probs[0], [1.0, 0.0])


def test_optimal_value_single_action_equals_evaluation():
    g = two_state_chain()
    V_opt, _ = optimal_value(g, uniform_sigma(g))
    V_eval = policy_evaluation(g, uniform_policy(g), uniform_sigma(g))
    assert np.abs(V_opt - V_eval).max() <= 1e-9


def test_value_cap_respected():
    rng = np.random.default_rng(4)
    for _ in range(5):
        g = random_game(rng, gamma=0.9, r_scale=2.0)
        V, _ = optimal_value(g, uniform_sigma(g))
        assert np.abs(V).max() <= g.value_cap() + 1e-6


# ----------------------------------------------------------- one-step lookahead


def test_r_matrix_zero_value_is_reward():
    rng = np.random.default_rng(1)
    g = random_game(rng)
    assert np.array_equal(r_matrix(g, np.zeros(3), 1), g.reward[1])


def test_r_matrix_constant_value_shift():
    rng = np.random.default_rng(2)
    g = random_game(rng)
    M = r_matrix(g, np.full(3, 2.0), 0)
    assert np.allclose(M, g.reward[0] + g.gamma * 2.0, atol=1e-12)


def test_r_matrix_chain_hand_value():
    g = two_state_chain()
    M = r_matrix(g, np.array([1.0, 0.0]), 0)
    assert M[0, 0] == pytest.approx(1.0 + 0.9 * 0.0)


# ----------------------------------------------------------- game value


def test_game_value_stateless_matches_maximin():
    g = single_state_game(MP, gamma=0.9)
    gv = game_value_sbg(g, MP_KERNEL)
    nfg = maximin_strategy(
        PayoffMatrix(MP), HypothesisSet.of([(1, 0), (0, 1), (0.5, 0.5)])
    )
    assert gv.nu * (1 - 0.9) == pytest.approx(nfg.value, abs=1e-8)
    assert np.allclose(gv.pi_bar.probs[0], nfg.strategy.probs, atol=1e-7)
    assert gv.nu_fixed_type >= gv.nu - 1e-8


def test_game_value_single_type_is_best_response():
    g = single_state_game(MP, gamma=0.9)
    kern = StrategyKernel.of({"only": [[0.3, 0.7]]})
    gv = game_value_sbg(g, kern)
    V, _ = optimal_value(g, kern.sigma("only"))
    assert np.abs(gv.values - V).max() <= 1e-7


def test_game_value_bounded():
    rng = np.random.default_rng(9)
    g = random_game(rng, gamma=0.85)
    kern = StrategyKernel.of(
        {"t0": rng.dirichlet(np.ones(2), size=3), "t1": rng.dirichlet(np.ones(2), size=3)}
    )
    gv = game_value_sbg(g, kern)
    assert abs(gv.nu) <= g.value_cap() + 1e-8


# ----------------------------------------------------------- policies


def test_safe_exploit_full_trust_is_greedy():
    g = single_state_game(MP, gamma=0.9)
    for belief in MP_KERNEL.type_names:
        pol = safe_exploit_policy(g, MP_KERNEL, MP_KERNEL.type_names, belief, 1.0)
        _, greedy = optimal_value(g, MP_KERNEL.sigma(belief))
        assert np.array_equal(pol.probs, greedy.probs)


def test_safe_exploit_zero_trust_is_safe_greedy():
    g = single_state_game(MP, gamma=0.9)
    gv = game_value_sbg(g, MP_KERNEL)
    pol = safe_exploit_policy(g, MP_KERNEL, MP_KERNEL.type_names, "always1", 0.0, game_value=gv)
    score = r_matrix(g, gv.values, 0) @ gv.sigma_bar[0]
    assert pol.probs[0, int(score.argmax())] == 1.0


def test_safe_exploit_heads_against_heads_type():
    g = single_state_game(MP, gamma=0.9)
    pol = safe_exploit_policy(g, MP_KERNEL, MP_KERNEL.type_names, "always0", 1.0)
    assert np.array_equal(pol.probs[0], [1.0, 0.0])


def test_safe_exploit_unknown_belief_rejected():
    g = single_state_game(MP, gamma=0.9)
    with pytest.raises(ValueError):
        safe_exploit_policy(g, MP_KERNEL, MP_KERNEL.type_names, "nosuch", 0.5)


def test_safe_exploit_argmax_invariant_under_reward_shift():
    rng = np.random.default_rng(31)
    g = random_game(rng, gamma=0.8)
    kern = StrategyKernel.of(
        {"t0": rng.dirichlet(np.ones(2), size=3), "t1": rng.dirichlet(np.ones(2), size=3)}
    )
    c = 1.7
    g2 = StochasticGame(
        states=g.states,
        agent_actions=g.agent_actions,
        opponent_actions=g.opponent_actions,
        reward=g.reward + c,
        transition=g.transition,
        gamma=g.gamma,
        r_max=g.r_max + c,
    )
    for lam in (0.0, 0.4, 1.0):
        p1 = safe_exploit_policy(g, kern, kern.type_names, "t0", lam)
        p2 = safe_exploit_policy(g2, kern, kern.type_names, "t0", lam)
        assert np.array_equal(p1.probs, p2.probs)


# ----------------------------------------------------------- gaps


def test_gap_zero_with_full_trust_and_correct_belief():
    g = single_state_game(MP, gamma=0.9)

    def builder(theta, lam):
        return blend_policy(g, MP_KERNEL, MP_KERNEL.type_names, theta, lam)

    pt = payoff_gap_sbg(g, MP_KERNEL, MP_KERNEL.type_names, builder, 1.0, 0.0)
    assert pt.gap == pytest.approx(0.0, abs=1e-8)


def test_stateless_reduction_matches_normal_form():
    """Every quantity of the one-state game equals 1/(1-gamma) times its
    normal-form counterpart."""
    gamma = 0.9
    g = single_state_game(MP, gamma=gamma)
    A = PayoffMatrix(MP)
    theta = HypothesisSet.of([(1, 0), (0, 1), (0.5, 0.5)])
    gv = game_value_sbg(g, MP_KERNEL)
    scale = 1.0 / (1.0 - gamma)

    nfg_mm = maximin_strategy(A, theta)
    assert gv.nu == pytest.approx(scale * nfg_mm.value, abs=1e-6)

    def builder(t, lam):
        return blend_policy(g, MP_KERNEL, MP_KERNEL.type_names, t, lam, game_value=gv)

    for lam in (0.0, 0.3, 0.7, 1.0):
        rep = opportunity_risk_sbg(g, MP_KERNEL, MP_KERNEL.type_names, lam, builder)
        nfg_rep = opportunity_risk_nfg(A, theta, lambda_policy(A, theta, lam), [0, 2])
        assert rep.beta == pytest.approx(scale * nfg_rep.opportunity, abs=1e-6)
        assert rep.delta == pytest.approx(scale * nfg_rep.risk, abs=1e-6)


def test_gap_monotone_in_eps():
    rng = np.random.default_rng(12)
    g = random_game(rng, gamma=0.8)
    kern = StrategyKernel.of(
        {
            "t0": rng.dirichlet(np.ones(2), size=3),
            "t1": rng.dirichlet(np.ones(2), size=3),
            "t2": rng.dirichlet(np.ones(2), size=3),
        }
    )
    gv = game_value_sbg(g, kern)

    def builder(t, lam):
        return safe_exploit_policy(g, kern, kern.type_names, t, lam, game_value=gv)

    g0 = payoff_gap_sbg(g, kern, kern.type_names, builder, 0.5, 0.0)
    g2 = payoff_gap_sbg(g, kern, kern.type_names, builder, 0.5, 2.0)
    assert g2.gap >= g0.gap - 1e-12


def test_report_delta_dominates_beta():
    rng = np.random.default_rng(13)
    g = random_game(rng, gamma=0.8)
    kern = StrategyKernel.of(
        {"t0": rng.dirichlet(np.ones(2), size=3), "t1": rng.dirichlet(np.ones(2), size=3)}
    )
    for lam in (0.0, 0.5, 1.0):
        rep = opportunity_risk_sbg(g, kern, kern.type_names, lam)
        assert rep.delta >= rep.beta >= 0.0
        assert len(rep.per_pair) == 4


# ----------------------------------------------------------- simulation


def test_simulate_zero_horizon():
    g = single_state_game(MP, gamma=0.9)
    out = simulate_episode(g, uniform_policy(g), StationaryAgent([[0.5, 0.5]]), 0, seed=1)
    assert out.discounted_return == 0.0
    assert out.states == ()


def test_simulate_constant_reward_geometric_sum():
    g = single_state_game(np.full((1, 1), 2.0), gamma=0.9)
    out = simulate_episode(
        g, AgentPolicy([[1.0]]), StationaryAgent([[1.0]]), 100, seed=3
    )
    assert out.discounted_return == pytest.approx(2.0 * (1 - 0.9**100) / 0.1, rel=1e-12)


def test_simulate_seed_reproducible():
    rng = np.random.default_rng(55)
    g = random_game(rng, gamma=0.8)
    opp = StationaryAgent(rng.dirichlet(np.ones(2), size=3))
    a = simulate_episode(g, uniform_policy(g), opp, 50, seed=42)
    b = simulate_episode(g, uniform_policy(g), opp, 50, seed=42)
    assert a == b
    c = simulate_episode(g, uniform_policy(g), opp, 50, seed=43)
    assert a != c


# ----------------------------------------------------------- file IO


def test_sbg_json_roundtrip(tmp_path):
    rng = np.random.default_rng(8)
    g = random_game(rng)
    kern = StrategyKernel.of(
        {"t0": rng.dirichlet(np.ones(2), size=3), "t1": rng.dirichlet(np.ones(2), size=3)}
    )
    p = tmp_path / "game.json"
    save_sbg_game(p, g, kern)
    g2, kern2 = load_sbg_game(p)
    assert g2.states == g.states
    assert np.array_equal(g2.reward, g.reward)
    assert np.array_equal(g2.transition, g.transition)
    assert kern2.type_names == kern.type_names
    assert np.array_equal(kern2.table, kern.table)


def test_simulate_initial_distribution_controls_start():
    g = two_state_chain()
    init = np.array([0.0, 1.0])
    out = simulate_episode(
        g, uniform_policy(g), StationaryAgent([[1.0], [1.0]]), 5, seed=0, init=init
    )
    assert out.states[0] == 1
    assert out.discounted_return == 0.0  # the absorbing state pays nothing
