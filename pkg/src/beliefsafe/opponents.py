"""Opponent type zoo: Markovian types, leader-follower-trigger agents, and
co-evolved neural agents. Stationary types double as strategy-kernel rows;
the history-dependent ones are simulation agents only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .normal_form import HypothesisSet, PayoffMatrix
from .stochastic import SimAgent, StrategyKernel, draw_index


@dataclass(frozen=True)
class GameContext:
    """What a Markovian type needs to instantiate itself: the typed player's
    action count, its own payoff tables for the minimax type, per-state cell
    counts for the security variants, and a seed for the random type."""

    n_actions: int
    n_states: int = 1
    own_payoffs: Optional[np.ndarray] = None  # (own, other) or (S, own, other)
    counts: Optional[np.ndarray] = None  # (S, cells)
    seed: Optional[int] = None


@dataclass(frozen=True)
class MarkovianSpec:
    """Stationary type: one action distribution per state."""

    table: np.ndarray  # (S, B)
    kind: str = "markovian"

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2 or np.any(t < 0) or np.any(np.abs(t.sum(axis=1) - 1) > 1e-9):
            raise ValueError("markovian table rows must be distributions")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)


@dataclass(frozen=True)
class LftSpec:
    """Leader-follower-trigger agent: plays its preferred strategy until the
    watched pattern in the opponent's history trips the trigger, then plays
    the punishment strategy for the next round.

    With majority_mode off, the trigger counts threshold_action in the last
    `window` opponent actions and fires at threshold_count or more. With it
    on (the security variant), the trigger fires when the opponent picked the
    state's hot cell in strictly more than half of the full recorded history.
    """

    preferred: np.ndarray  # (S, B)
    punishment: np.ndarray  # (S, B)
    window: int = 4
    threshold_action: int = 1
    threshold_count: int = 3
    majority_mode: bool = False
    hot_cells: Optional[Tuple[int, ...]] = None
    kind: str = "lft"

    def __post_init__(self):
        for name in ("preferred", "punishment"):
            t = np.asarray(getattr(self, name), dtype=float)
            if t.ndim != 2 or np.any(t < 0) or np.any(np.abs(t.sum(axis=1) - 1) > 1e-9):
                raise ValueError(f"{name} rows must be distributions")
            t.setflags(write=False)
            object.__setattr__(self, name, t)
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if self.majority_mode and self.hot_cells is None:
            raise ValueError("majority mode needs the per-state hot cells")


@dataclass(frozen=True)
class NeuroSpec:
    """Single-hidden-layer net over the last `window` action pairs (one-hot
    with a null padding symbol) plus the state one-hot; softmax output."""

    w1: np.ndarray  # (H, D)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (B, H)
    b2: np.ndarray  # (B,)
    n_self_actions: int
    n_other_actions: int
    n_states: int = 1
    window: int = 4
    kind: str = "neuro"

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=float)
        b1 = np.asarray(self.b1, dtype=float)
        w2 = np.asarray(self.w2, dtype=float)
        b2 = np.asarray(self.b2, dtype=float)
        d = self.input_dim(self.n_self_actions, self.n_other_actions, self.n_states, self.window)
        if w1.shape[1] != d or b1.shape != (w1.shape[0],):
            raise ValueError("hidden layer shape inconsistent with the input encoding")
        if w2.shape != (self.n_self_actions, w1.shape[0]) or b2.shape != (self.n_self_actions,):
            raise ValueError("output layer shape inconsistent")
        for name, arr in (("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @staticmethod
    def input_dim(n_self: int, n_other: int, n_states: int, window: int) -> int:
        return window * (n_self + 1 + n_other + 1) + n_states

    @staticmethod
    def random(
        rng: np.random.Generator,
        n_self: int,
        n_other: int,
        n_states: int = 1,
        window: int = 4,
        hidden: int = 16,
    ) -> "NeuroSpec":
        d = NeuroSpec.input_dim(n_self, n_other, n_states, window)
        return NeuroSpec(
            w1=rng.normal(0.0, 1.0 / np.sqrt(d), size=(hidden, d)),
            b1=np.zeros(hidden),
            w2=rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(n_self, hidden)),
            b2=np.zeros(n_self),
            n_self_actions=n_self,
            n_other_actions=n_other,
            n_states=n_states,
            window=window,
        )

    def flat_weights(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    def with_weights(self, flat: np.ndarray) -> "NeuroSpec":
        i = 0
        parts = []
        for arr in (self.w1, self.b1, self.w2, self.b2):
            parts.append(np.asarray(flat[i : i + arr.size]).reshape(arr.shape))
            i += arr.size
        return replace(self, w1=parts[0], b1=parts[1], w2=parts[2], b2=parts[3])


BehaviorSpec = Union[MarkovianSpec, LftSpec, NeuroSpec]


def markovian_type(kind: int, ctx: GameContext) -> MarkovianSpec:
    """The four stationary types: always the first action, always the second
    (or the highest / second-highest count cell when cell counts are given),
    the player's own minimax strategy, and a frozen seeded random strategy."""
    S, B = ctx.n_states, ctx.n_actions
    if kind in (1, 2):
        table = np.zeros((S, B))
        if ctx.counts is not None:
            counts = np.asarray(ctx.counts, dtype=float)
            if counts.shape != (S, B):
                raise ValueError("cell counts must be (states, actions)")
            for s in range(S):
                order = np.argsort(-counts[s], kind="stable")
                table[s, order[0] if kind == 1 else order[1]] = 1.0
        else:
            if kind == 2 and B < 2:
                raise ValueError("type 2 needs at least two actions")
            table[:, 0 if kind == 1 else 1] = 1.0
        return MarkovianSpec(table)
    if kind == 3:
        if ctx.own_payoffs is None:
            raise ValueError("type 3 needs the player's own payoff tables")
        pays = np.asarray(ctx.own_payoffs, dtype=float)
        if pays.ndim == 2:
            pays = np.broadcast_to(pays, (S,) + pays.shape)
        if pays.shape[0] != S or pays.shape[1] != B:
            raise ValueError("own payoff tables must be (states, own, other)")
        from .linprog import maximin_strategy

        table = np.zeros((S, B))
        for s in range(S):
            res = maximin_strategy(
                PayoffMatrix(pays[s]), HypothesisSet.simplex_vertices(pays.shape[2])
            )
            table[s] = res.strategy.probs
        return MarkovianSpec(table)
    if kind == 4:
        if ctx.seed is None:
            raise ValueError("type 4 needs a seed to freeze its distribution")
        rng = np.random.default_rng(ctx.seed)
        dist = rng.dirichlet(np.ones(B))
        return MarkovianSpec(np.tile(dist, (S, 1)))
    raise ValueError(f"unknown markovian kind {kind}; expected 1..4")


def lft_step(history: Sequence[int], spec: LftSpec, state: int = 0) -> np.ndarray:
    """Next-round action distribution given the opponent marks seen so far.

    In window mode `history` holds the opponent's actions; in majority mode
    it holds 0/1 hot-cell hit flags (the agent wrapper resolves them)."""
    hist = list(history)
    if spec.majority_mode:
        if hist and sum(hist) > 0.5 * len(hist):
            return spec.punishment[state]
        return spec.preferred[state]
    if len(hist) < spec.window:
        return spec.preferred[state]
    recent = hist[-spec.window :]
    if sum(1 for a in recent if a == spec.threshold_action) >= spec.threshold_count:
        return spec.punishment[state]
    return spec.preferred[state]


def neuro_forward(spec: NeuroSpec, inputs: np.ndarray) -> np.ndarray:
    """Affine -> tanh -> affine -> softmax; always a valid distribution."""
    x = np.asarray(inputs, dtype=float)
    if x.shape != (spec.w1.shape[1],):
        raise ValueError(f"input shape {x.shape} != ({spec.w1.shape[1]},)")
    h = np.tanh(spec.w1 @ x + spec.b1)
    logits = spec.w2 @ h + spec.b2
    logits = logits - logits.max()
    e = np.exp(logits)
    return e / e.sum()


def encode_neuro_inputs(
    spec: NeuroSpec, history: Sequence[Tuple[int, int]], state: int
) -> np.ndarray:
    """One-hot the last `window` (self, other) action pairs, padding missing
    slots with the null symbol, and append the state one-hot."""
    n_s, n_o, w = spec.n_self_actions, spec.n_other_actions, spec.window
    slot = n_s + 1 + n_o + 1
    x = np.zeros(spec.w1.shape[1])
    recent = list(history)[-w:]
    pad = w - len(recent)
    for k in range(w):
        base = k * slot
        if k < pad:
            x[base + n_s] = 1.0  # null self action
            x[base + n_s + 1 + n_o] = 1.0  # null other action
        else:
            own, other = recent[k - pad]
            x[base + own] = 1.0
            x[base + n_s + 1 + other] = 1.0
    x[w * slot + state] = 1.0
    return x


class MarkovianAgent(SimAgent):
    def __init__(self, spec: MarkovianSpec):
        self.spec = spec
        self._cum = spec.table.cumsum(axis=1)

    def act(self, state: int) -> int:
        return draw_index(self._rng, self._cum[state])


class LftAgent(SimAgent):
    """Tracks the other player's actions (or hot-cell hits) and plays the
    trigger rule each round."""

    def __init__(self, spec: LftSpec):
        self.spec = spec
        self.marks: List[int] = []

    def reset(self, rng) -> None:
        super().reset(rng)
        self.marks = []

    def act(self, state: int) -> int:
        dist = lft_step(self.marks, self.spec, state)
        return draw_index(self._rng, dist.cumsum())

    def observe(self, state: int, own_action: int, other_action: int) -> None:
        if self.spec.majority_mode:
            self.marks.append(int(other_action == self.spec.hot_cells[state]))
        else:
            self.marks.append(other_action)


class NeuroAgent(SimAgent):
    def __init__(self, spec: NeuroSpec):
        self.spec = spec
        self.history: List[Tuple[int, int]] = []

    def reset(self, rng) -> None:
        super().reset(rng)
        self.history = []

    def distribution(self, state: int) -> np.ndarray:
        return neuro_forward(self.spec, encode_neuro_inputs(self.spec, self.history, state))

    def act(self, state: int) -> int:
        return draw_index(self._rng, self.distribution(state).cumsum())

    def observe(self, state: int, own_action: int, other_action: int) -> None:
        self.history.append((own_action, other_action))


def agent_for(spec: BehaviorSpec) -> SimAgent:
    if isinstance(spec, MarkovianSpec):
        return MarkovianAgent(spec)
    if isinstance(spec, LftSpec):
        return LftAgent(spec)
    if isinstance(spec, NeuroSpec):
        return NeuroAgent(spec)
    raise TypeError(f"not a behavior spec: {spec!r}")


def kernel_from_markovian(specs: Dict[str, MarkovianSpec]) -> StrategyKernel:
    """Stationary types as a strategy kernel; lossless round-trip."""
    return StrategyKernel.of({name: spec.table for name, spec in specs.items()})


def stationary_proxy(spec: BehaviorSpec, n_states: int) -> np.ndarray:
    """A stationary stand-in kernel row for belief formation: Markovian types
    are themselves, trigger agents project to their preferred strategy, and
    neural agents to their empty-history output. Only episode simulation sees
    the true history-dependent behavior."""
    if isinstance(spec, MarkovianSpec):
        return np.array(spec.table)
    if isinstance(spec, LftSpec):
        return np.array(spec.preferred)
    if isinstance(spec, NeuroSpec):
        return np.stack(
            [
                neuro_forward(spec, encode_neuro_inputs(spec, [], s))
                for s in range(n_states)
            ]
        )
    raise TypeError(f"not a behavior spec: {spec!r}")


def markovian_from_kernel(kernel: StrategyKernel) -> Dict[str, MarkovianSpec]:
    return {name: MarkovianSpec(kernel.sigma(name)) for name in kernel.type_names}


# ------------------------------------------------------------- co-evolution


@dataclass(frozen=True)
class Population:
    members: Tuple[NeuroSpec, ...]
    fitness: Tuple[float, ...]
    generation: int = 0

    def __post_init__(self):
        if len(self.members) != len(self.fitness):
            raise ValueError("one fitness per member")
        if not all(np.isfinite(self.fitness)):
            raise ValueError("fitness must be finite")

    @staticmethod
    def random(
        rng: np.random.Generator,
        n_self: int,
        n_other: int,
        size: int = 10,
        n_states: int = 1,
        window: int = 4,
        hidden: int = 16,
    ) -> "Population":
        members = tuple(
            NeuroSpec.random(rng, n_self, n_other, n_states, window, hidden)
            for _ in range(size)
        )
        return Population(members=members, fitness=(0.0,) * size)


@dataclass(frozen=True)
class CoevolveConfig:
    """Knobs the source material leaves open; defaults are recorded in the
    harness output metadata."""

    pairings: int = 3
    rounds: int = 25
    mutation_sd: float = 0.1
    mutation_rate: float = 0.5
    crossover_rate: float = 0.5
    similarity_scale: float = 0.01

    def as_dict(self) -> Dict[str, float]:
        return {
            "pairings": self.pairings,
            "rounds": self.rounds,
            "mutation_sd": self.mutation_sd,
            "mutation_rate": self.mutation_rate,
            "crossover_rate": self.crossover_rate,
            "similarity_scale": self.similarity_scale,
        }


def _play_match(
    row: NeuroSpec, col: NeuroSpec, row_pay: np.ndarray, col_pay: np.ndarray,
    rounds: int, rng: np.random.Generator,
) -> Tuple[float, float]:
    ra, ca = NeuroAgent(row), NeuroAgent(col)
    ra.reset(rng)
    ca.reset(rng)
    r_total = c_total = 0.0
    for _ in range(rounds):
        i = ra.act(0)
        j = ca.act(0)
        r_total += row_pay[i, j]
        c_total += col_pay[i, j]
        ra.observe(0, i, j)
        ca.observe(0, j, i)
    return r_total / rounds, c_total / rounds


def _similarity_penalty(members: Sequence[NeuroSpec], scale: float) -> np.ndarray:
    flats = np.stack([m.flat_weights() for m in members])
    n = len(members)
    pen = np.zeros(n)
    for i in range(n):
        d = np.linalg.norm(flats - flats[i], axis=1)
        pen[i] = d.sum() / max(1, n - 1)
    return scale * pen


def _evaluate(
    rows: Sequence[NeuroSpec],
    cols: Sequence[NeuroSpec],
    row_pay: np.ndarray,
    col_pay: np.ndarray,
    cfg: CoevolveConfig,
    rng: np.random.Generator,
) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    r_sum = np.zeros(len(rows))
    r_cnt = np.zeros(len(rows))
    c_sum = np.zeros(len(cols))
    c_cnt = np.zeros(len(cols))
    for _ in range(cfg.pairings):
        for i in range(len(rows)):
            j = int(rng.integers(len(cols)))
            rp, cp = _play_match(rows[i], cols[j], row_pay, col_pay, cfg.rounds, rng)
            r_sum[i] += rp
            r_cnt[i] += 1
            c_sum[j] += cp
            c_cnt[j] += 1
        for j in range(len(cols)):
            i = int(rng.integers(len(rows)))
            rp, cp = _play_match(rows[i], cols[j], row_pay, col_pay, cfg.rounds, rng)
            r_sum[i] += rp
            r_cnt[i] += 1
            c_sum[j] += cp
            c_cnt[j] += 1
    r_fit = r_sum / np.maximum(r_cnt, 1) - _similarity_penalty(rows, cfg.similarity_scale)
    c_fit = c_sum / np.maximum(c_cnt, 1) - _similarity_penalty(cols, cfg.similarity_scale)
    return tuple(float(f) for f in r_fit), tuple(float(f) for f in c_fit)


def _evolve_members(
    members: Sequence[NeuroSpec],
    fitness: Sequence[float],
    cfg: CoevolveConfig,
    rng: np.random.Generator,
) -> List[NeuroSpec]:
    out = list(members)
    n = len(out)
    f = np.asarray(fitness, dtype=float)
    weights = f - f.min() + 1e-9
    weights = weights / weights.sum()
    for i in range(n):
        if rng.random() < cfg.crossover_rate:
            p1, p2 = rng.choice(n, size=2, replace=False, p=weights)
            f1 = out[int(p1)].flat_weights()
            f2 = out[int(p2)].flat_weights()
            mask = rng.random(f1.shape[0]) < 0.5
            out[i] = out[i].with_weights(np.where(mask, f1, f2))
    for i in range(n):
        if rng.random() < cfg.mutation_rate:
            flat = out[i].flat_weights()
            out[i] = out[i].with_weights(flat + rng.normal(0.0, cfg.mutation_sd, flat.shape))
    return out


def coevolve(
    row_pop: Population,
    col_pop: Population,
    row_pay: np.ndarray,
    col_pay: np.ndarray,
    generations: int,
    seed,
    cfg: CoevolveConfig = CoevolveConfig(),
) -> Tuple[Population, Population]:
    """Co-evolve both populations; each generation's candidate (top half pre
    plus top half post evolution) replaces the population only if its average
    fitness is strictly greater. Bit-reproducible for a fixed seed."""
    rng = np.random.default_rng(seed)
    row_pay = np.asarray(row_pay, dtype=float)
    col_pay = np.asarray(col_pay, dtype=float)
    rows, cols = row_pop, col_pop
    if generations == 0:
        return rows, cols
    r_fit, c_fit = _evaluate(rows.members, cols.members, row_pay, col_pay, cfg, rng)
    rows = Population(rows.members, r_fit, rows.generation)
    cols = Population(cols.members, c_fit, cols.generation)
    for _ in range(generations):
        new_r = _evolve_members(rows.members, rows.fitness, cfg, rng)
        new_c = _evolve_members(cols.members, cols.fitness, cfg, rng)

        def top_half(members, fitness):
            order = np.argsort(-np.asarray(fitness), kind="stable")
            return [members[int(i)] for i in order[: len(members) // 2]]

        nr_fit, nc_fit = _evaluate(new_r, new_c, row_pay, col_pay, cfg, rng)
        cand_r = tuple(top_half(rows.members, rows.fitness) + top_half(new_r, nr_fit))
        cand_c = tuple(top_half(cols.members, cols.fitness) + top_half(new_c, nc_fit))
        cr_fit, cc_fit = _evaluate(cand_r, cand_c, row_pay, col_pay, cfg, rng)

        if np.mean(cr_fit) > np.mean(rows.fitness):
            rows = Population(cand_r, cr_fit, rows.generation + 1)
        else:
            rows = Population(rows.members, rows.fitness, rows.generation + 1)
        if np.mean(cc_fit) > np.mean(cols.fitness):
            cols = Population(cand_c, cc_fit, cols.generation + 1)
        else:
            cols = Population(cols.members, cols.fitness, cols.generation + 1)
    return rows, cols


# ------------------------------------------------------------- type-set files


def _spec_to_json(spec: BehaviorSpec) -> Dict:
    if isinstance(spec, MarkovianSpec):
        return {"kind": "markovian", "table": spec.table.tolist()}
    if isinstance(spec, LftSpec):
        return {
            "kind": "lft",
            "preferred": spec.preferred.tolist(),
            "punishment": spec.punishment.tolist(),
            "window": spec.window,
            "threshold_action": spec.threshold_action,
            "threshold_count": spec.threshold_count,
            "majority_mode": spec.majority_mode,
            "hot_cells": list(spec.hot_cells) if spec.hot_cells else None,
        }
    if isinstance(spec, NeuroSpec):
        return {
            "kind": "neuro",
            "weights": spec.flat_weights().tolist(),
            "shapes": {
                "w1": list(spec.w1.shape),
                "b1": list(spec.b1.shape),
                "w2": list(spec.w2.shape),
                "b2": list(spec.b2.shape),
            },
            "n_self_actions": spec.n_self_actions,
            "n_other_actions": spec.n_other_actions,
            "n_states": spec.n_states,
            "window": spec.window,
        }
    raise TypeError(f"not a behavior spec: {spec!r}")


def _spec_from_json(obj: Dict) -> BehaviorSpec:
    kind = obj["kind"]
    if kind == "markovian":
        return MarkovianSpec(np.array(obj["table"], dtype=float))
    if kind == "lft":
        return LftSpec(
            preferred=np.array(obj["preferred"], dtype=float),
            punishment=np.array(obj["punishment"], dtype=float),
            window=obj["window"],
            threshold_action=obj["threshold_action"],
            threshold_count=obj["threshold_count"],
            majority_mode=obj["majority_mode"],
            hot_cells=tuple(obj["hot_cells"]) if obj.get("hot_cells") else None,
        )
    if kind == "neuro":
        shapes = obj["shapes"]
        flat = np.array(obj["weights"], dtype=float)
        sizes = {k: int(np.prod(v)) for k, v in shapes.items()}
        i = 0
        parts = {}
        for k in ("w1", "b1", "w2", "b2"):
            parts[k] = flat[i : i + sizes[k]].reshape(shapes[k])
            i += sizes[k]
        return NeuroSpec(
            w1=parts["w1"],
            b1=parts["b1"],
            w2=parts["w2"],
            b2=parts["b2"],
            n_self_actions=obj["n_self_actions"],
            n_other_actions=obj["n_other_actions"],
            n_states=obj["n_states"],
            window=obj["window"],
        )
    raise ValueError(f"unknown behavior kind {kind!r}")


def save_type_set(path, specs: Dict[str, BehaviorSpec]) -> None:
    payload = {"types": {name: _spec_to_json(s) for name, s in specs.items()}}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_type_set(path) -> Dict[str, BehaviorSpec]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return {name: _spec_from_json(obj) for name, obj in payload["types"].items()}
