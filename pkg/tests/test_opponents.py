import numpy as np
import pytest

from beliefsafe.opponents import (
    CoevolveConfig,
    GameContext,
    LftAgent,
    LftSpec,
    MarkovianSpec,
    NeuroAgent,
    NeuroSpec,
    Population,
    agent_for,
    coevolve,
    encode_neuro_inputs,
    kernel_from_markovian,
    lft_step,
    load_type_set,
    markovian_from_kernel,
    markovian_type,
    neuro_forward,
    save_type_set,
)

MP = np.array([[1.0, -1.0], [-1.0, 1.0]])


# ------------------------------------------------------------- markovian


def test_type1_always_first_action():
    spec = markovian_type(1, GameContext(n_actions=2))
    assert np.array_equal(spec.table, [[1.0, 0.0]])


def test_type2_always_second_action():
    spec = markovian_type(2, GameContext(n_actions=2))
    assert np.array_equal(spec.table, [[0.0, 1.0]])


def test_type3_minimax_for_matching_pennies():
    # the typed player is the column player; its own payoff table is -MP^T
    ctx = GameContext(n_actions=2, own_payoffs=-MP.T)
    spec = markovian_type(3, ctx)
    assert np.allclose(spec.table, [[0.5, 0.5]], atol=1e-9)


def test_type4_frozen_random_strategy():
    ctx = GameContext(n_actions=3, seed=11)
    s1 = markovian_type(4, ctx)
    s2 = markovian_type(4, ctx)
    assert np.array_equal(s1.table, s2.table)
    assert s1.table.shape == (1, 3)


def test_type1_security_hot_cell():
    counts = np.zeros((1, 9))
    counts[0, 1] = 5.0
    spec = markovian_type(1, GameContext(n_actions=9, counts=counts))
    assert spec.table[0, 1] == 1.0


def test_type2_security_second_cell():
    counts = np.array([[0.0, 5.0, 3.0, 0, 0, 0, 0, 0, 0]])
    spec = markovian_type(2, GameContext(n_actions=9, counts=counts))
    assert spec.table[0, 2] == 1.0


def test_markovian_missing_context():
    with pytest.raises(ValueError):
        markovian_type(3, GameContext(n_actions=2))
    with pytest.raises(ValueError):
        markovian_type(4, GameContext(n_actions=2))
    with pytest.raises(ValueError):
        markovian_type(5, GameContext(n_actions=2))


# ------------------------------------------------------------- trigger agents


def mk_lft(**kw):
    return LftSpec(
        preferred=np.array([[1.0, 0.0]]),
        punishment=np.array([[0.5, 0.5]]),
        **kw,
    )


def test_lft_triggers_on_three_of_four():
    spec = mk_lft()
    assert np.array_equal(lft_step([1, 1, 1, 0], spec), [0.5, 0.5])


def test_lft_boundary_two_of_four_stays_preferred():
    spec = mk_lft()
    assert np.array_equal(lft_step([1, 1, 0, 0], spec), [1.0, 0.0])


def test_lft_short_history_stays_preferred():
    spec = mk_lft()
    assert np.array_equal(lft_step([1, 1, 1], spec), [1.0, 0.0])


def test_lft_only_trailing_window_matters():
    spec = mk_lft()
    tail = [1, 0, 1, 1]
    short = lft_step(tail, spec)
    long = lft_step([0, 0, 0, 1, 1, 1] + tail, spec)
    assert np.array_equal(short, long)


def test_lft_majority_mode():
    spec = LftSpec(
        preferred=np.array([[1.0, 0.0]]),
        punishment=np.array([[0.0, 1.0]]),
        majority_mode=True,
        hot_cells=(0,),
    )
    assert np.array_equal(lft_step([1, 1, 0], spec), [0.0, 1.0])  # 2/3 > 1/2
    assert np.array_equal(lft_step([1, 0], spec), [1.0, 0.0])  # exactly 1/2
    assert np.array_equal(lft_step([], spec), [1.0, 0.0])


def test_lft_agent_tracks_other_player():
    spec = mk_lft()
    agent = LftAgent(spec)
    agent.reset(np.random.default_rng(0))
    for other in (1, 1, 1, 0):
        agent.observe(0, own_action=0, other_action=other)
    assert agent.marks == [1, 1, 1, 0]
    assert np.array_equal(lft_step(agent.marks, spec), [0.5, 0.5])


# ------------------------------------------------------------- neural agents


def test_neuro_zero_weights_uniform():
    spec = NeuroSpec.random(np.random.default_rng(0), 2, 2)
    spec = spec.with_weights(np.zeros(spec.flat_weights().shape[0]))
    out = neuro_forward(spec, encode_neuro_inputs(spec, [], 0))
    assert np.allclose(out, [0.5, 0.5])


def test_neuro_output_is_distribution():
    rng = np.random.default_rng(5)
    spec = NeuroSpec.random(rng, 3, 2, n_states=2)
    for _ in range(10):
        hist = [(int(rng.integers(3)), int(rng.integers(2))) for _ in range(int(rng.integers(0, 6)))]
        out = neuro_forward(spec, encode_neuro_inputs(spec, hist, int(rng.integers(2))))
        assert out.shape == (3,)
        assert np.all(out > 0)
        assert out.sum() == pytest.approx(1.0, abs=1e-12)


def test_neuro_deterministic_forward():
    spec = NeuroSpec.random(np.random.default_rng(9), 2, 2)
    x = encode_neuro_inputs(spec, [(0, 1), (1, 1)], 0)
    assert np.array_equal(neuro_forward(spec, x), neuro_forward(spec, x))


def test_neuro_shape_mismatch():
    spec = NeuroSpec.random(np.random.default_rng(1), 2, 2)
    with pytest.raises(ValueError):
        neuro_forward(spec, np.zeros(3))


def test_neuro_padding_distinguishes_history_slots():
    spec = NeuroSpec.random(np.random.default_rng(2), 2, 2)
    x_empty = encode_neuro_inputs(spec, [], 0)
    x_one = encode_neuro_inputs(spec, [(0, 0)], 0)
    assert not np.array_equal(x_empty, x_one)
    # five observations: only the trailing four encode
    x5 = encode_neuro_inputs(spec, [(1, 1), (0, 0), (0, 1), (1, 0), (0, 0)], 0)
    x4 = encode_neuro_inputs(spec, [(0, 0), (0, 1), (1, 0), (0, 0)], 0)
    assert np.array_equal(x5, x4)


# ------------------------------------------------------------- kernel round-trip


def test_markovian_kernel_roundtrip():
    specs = {
        "t1": markovian_type(1, GameContext(n_actions=2)),
        "t3": markovian_type(3, GameContext(n_actions=2, own_payoffs=-MP.T)),
    }
    kernel = kernel_from_markovian(specs)
    back = markovian_from_kernel(kernel)
    for name in specs:
        assert np.array_equal(specs[name].table, back[name].table)


def test_type_set_file_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    specs = {
        "always0": markovian_type(1, GameContext(n_actions=2)),
        "trigger": mk_lft(),
        "neural": NeuroSpec.random(rng, 2, 2),
    }
    p = tmp_path / "types.json"
    save_type_set(p, specs)
    back = load_type_set(p)
    assert set(back) == set(specs)
    assert np.array_equal(back["always0"].table, specs["always0"].table)
    assert np.array_equal(back["trigger"].preferred, specs["trigger"].preferred)
    assert np.array_equal(back["neural"].flat_weights(), specs["neural"].flat_weights())
    assert isinstance(agent_for(back["trigger"]), LftAgent)
    assert isinstance(agent_for(back["neural"]), NeuroAgent)


# ------------------------------------------------------------- co-evolution


def test_coevolve_zero_generations_identity():
    rng = np.random.default_rng(0)
    rp = Population.random(rng, 2, 2, size=4)
    cp = Population.random(rng, 2, 2, size=4)
    r2, c2 = coevolve(rp, cp, MP, -MP, generations=0, seed=1)
    assert r2 is rp and c2 is cp


def test_coevolve_keeps_population_size_and_reproducible():
    cfg = CoevolveConfig(pairings=1, rounds=5)
    rng = np.random.default_rng(0)
    rp = Population.random(rng, 2, 2, size=10)
    cp = Population.random(rng, 2, 2, size=10)
    r1, c1 = coevolve(rp, cp, MP, -MP, generations=2, seed=7, cfg=cfg)
    assert len(r1.members) == 10 and len(c1.members) == 10
    assert r1.generation == 2
    rng = np.random.default_rng(0)
    rp2 = Population.random(rng, 2, 2, size=10)
    cp2 = Population.random(rng, 2, 2, size=10)
    r2, c2 = coevolve(rp2, cp2, MP, -MP, generations=2, seed=7, cfg=cfg)
    assert all(
        np.array_equal(a.flat_weights(), b.flat_weights())
        for a, b in zip(r1.members, r2.members)
    )
    assert r1.fitness == r2.fitness


def test_coevolve_accepted_generations_improve():
    """Track acceptance by replaying the accept rule: whenever the member
    tuple changes between generations, the average fitness went up."""
    cfg = CoevolveConfig(pairings=1, rounds=5)
    rng = np.random.default_rng(0)
    rp = Population.random(rng, 2, 2, size=6)
    cp = Population.random(rng, 2, 2, size=6)
    prev_r, prev_c = coevolve(rp, cp, MP, -MP, generations=1, seed=3, cfg=cfg)
    for gen in range(2, 5):
        cur_r, cur_c = coevolve(rp, cp, MP, -MP, generations=gen, seed=3, cfg=cfg)
        for prev, cur in ((prev_r, cur_r), (prev_c, cur_c)):
            changed = any(
                not np.array_equal(a.flat_weights(), b.flat_weights())
                for a, b in zip(prev.members, cur.members)
            )
            if changed:
                assert np.mean(cur.fitness) > np.mean(prev.fitness)
        prev_r, prev_c = cur_r, cur_c
