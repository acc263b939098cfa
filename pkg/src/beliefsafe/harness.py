"""Seeded experiment runners: lambda-sweep tradeoff experiments for both game
classes, bound-envelope emission, the 2x2 topology dump, and security-game
simulation. Everything lands in CSV (or a JSON mirror) with a `# meta:`
header block so runs are reproducible and auditable.
"""

from __future__ import annotations

import json
import os
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import casestudies
from .envelopes import nfg_envelope, sbg_envelopes
from .normal_form import (
    Belief,
    GapPoint,
    HypothesisSet,
    LambdaPolicy,
    PayoffMatrix,
    full_simplex_for_game,
    lambda_policy,
    load_nfg_game,
    opportunity_risk_nfg,
    theta_stats,
)
from .opponents import (
    BehaviorSpec,
    MarkovianSpec,
    agent_for,
    kernel_from_markovian,
    load_type_set,
    markovian_from_kernel,
)
from .stochastic import (
    AgentPolicy,
    StochasticGame,
    StrategyKernel,
    blend_policy,
    game_value_sbg,
    load_sbg_game,
    opportunity_risk_sbg,
    optimal_value,
    policy_evaluation,
    safe_exploit_policy,
    simulate_episode,
)

THREADS_ENV = "BELIEFSAFE_THREADS"
Z95 = 1.959963984540054


class ConfigError(ValueError):
    """Unresolvable game/type set or invalid experiment parameters."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment run: game source, trust sweep, sampling budget, seed."""

    game: str = "mp"
    out: str = "out.csv"
    lambda_grid: Tuple[float, ...] = tuple(np.round(np.linspace(0, 1, 11), 10))
    runs: int = 1000
    horizon: int = 200
    seed: int = 0
    gamma: float = 0.9
    theta: Optional[str] = None
    type_set: Optional[str] = None
    eps_grid: Optional[Tuple[float, ...]] = None
    policy: str = "value"
    boost: float = 0.05
    data: Optional[str] = None
    lat_bounds: Tuple[float, float] = (0.0, 3.0)
    lon_bounds: Tuple[float, float] = (0.0, 3.0)
    fmt: str = "csv"
    deterministic: bool = False

    def __post_init__(self):
        if not self.lambda_grid or any(not 0 <= l <= 1 for l in self.lambda_grid):
            raise ConfigError("lambda grid must be nonempty within [0, 1]")
        if self.runs < 1:
            raise ConfigError("runs must be at least 1")
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1")
        if self.policy not in ("value", "blend"):
            raise ConfigError("policy must be 'value' or 'blend'")
        if self.fmt not in ("csv", "json"):
            raise ConfigError("format must be 'csv' or 'json'")


@dataclass(frozen=True)
class TradeoffRow:
    """One lambda point of a normal-form sweep: exact values, empirical
    estimates with spread, and the theorem envelope columns."""

    lam: float
    exact_opportunity: float
    exact_risk: float
    opportunity_mean: float
    opportunity_sd: float
    opportunity_ci: float
    risk_mean: float
    risk_sd: float
    risk_ci: float
    upper_opportunity: float
    upper_risk: float
    lower_risk: Optional[float]

    def as_dict(self) -> Dict[str, object]:
        return {
            "lambda": self.lam,
            "exact_opportunity": self.exact_opportunity,
            "exact_risk": self.exact_risk,
            "opportunity_mean": self.opportunity_mean,
            "opportunity_sd": self.opportunity_sd,
            "opportunity_ci": self.opportunity_ci,
            "risk_mean": self.risk_mean,
            "risk_sd": self.risk_sd,
            "risk_ci": self.risk_ci,
            "upper_opportunity": self.upper_opportunity,
            "upper_risk": self.upper_risk,
            "lower_risk": self.lower_risk,
        }


def thread_cap() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def map_cells(fn: Callable, cells: Sequence) -> List:
    """Run independent experiment cells, optionally in parallel. Each cell
    must derive its own RNG from (seed, cell index), so the thread count
    never changes results."""
    cap = thread_cap()
    if cap <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ThreadPoolExecutor(max_workers=cap) as ex:
        return list(ex.map(fn, cells))


def cell_rng(seed: int, *index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed)] + [int(i) for i in index])


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return "unknown"


def write_rows(path, rows: Sequence[Dict[str, object]], meta: Dict[str, object],
               fmt: str = "csv", deterministic: bool = False) -> str:
    """Atomic write of data rows plus a `# meta:` header block. The creation
    timestamp is suppressed under deterministic mode so identical configs
    produce byte-identical files."""
    meta = dict(meta)
    meta.setdefault("git", _git_describe())
    if not deterministic:
        from datetime import datetime, timezone

        meta["created_at"] = datetime.now(timezone.utc).isoformat()

    def fmt_val(v):
        if isinstance(v, float):
            return repr(v)
        if v is None:
            return ""
        return str(v)

    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            if fmt == "json":
                json.dump({"meta": meta, "rows": list(rows)}, fh, indent=1)
                fh.write("\n")
            else:
                for key in sorted(meta):
                    fh.write(f"# meta: {key}={meta[key]}\n")
                if rows:
                    cols = list(rows[0].keys())
                    fh.write(",".join(cols) + "\n")
                    for row in rows:
                        fh.write(",".join(fmt_val(row.get(c)) for c in cols) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return os.fspath(path)


# ------------------------------------------------------------- NFG tradeoff


def resolve_nfg(cfg: ExperimentConfig) -> Tuple[PayoffMatrix, HypothesisSet, str]:
    if cfg.game in ("mp", "amp"):
        mp, amp, theta = casestudies.mp_amp_instances(seed=cfg.seed)
        A = mp if cfg.game == "mp" else amp
    elif os.path.exists(cfg.game):
        A, theta = load_nfg_game(cfg.game)
    else:
        raise ConfigError(f"unknown game {cfg.game!r}: not a builtin (mp, amp) or a file")
    if cfg.theta in (None, "paper"):
        pass
    elif cfg.theta == "full":
        theta = full_simplex_for_game(A)
    elif os.path.exists(cfg.theta):
        _, theta = load_nfg_game(cfg.theta)
    else:
        raise ConfigError(f"unknown theta {cfg.theta!r}: expected 'paper', 'full' or a file")
    return A, theta, cfg.game


def _sample_gap(
    A: PayoffMatrix,
    theta: HypothesisSet,
    pi: LambdaPolicy,
    point: GapPoint,
    runs: int,
    rng: np.random.Generator,
) -> Tuple[float, float, float]:
    """Empirical gap at a witness: both sides sample their mixed strategies
    for `runs` one-shot plays; the optimal payoff term is exact."""
    x = pi(point.witness_rho).probs
    y = theta.members[point.witness_ystar].probs
    opt = float((A.entries @ y).max())
    ix = rng.choice(len(x), size=runs, p=x)
    iy = rng.choice(len(y), size=runs, p=y)
    gaps = opt - A.entries[ix, iy]
    mean = float(gaps.mean())
    sd = float(gaps.std(ddof=1)) if runs > 1 else 0.0
    ci = Z95 * sd / np.sqrt(runs)
    return mean, sd, float(ci)


def run_tradeoff_nfg(cfg: ExperimentConfig) -> Tuple[List[Dict[str, object]], Dict[str, object]]:
    A, theta, label = resolve_nfg(cfg)
    stats = theta_stats(theta, A)
    eps_grid = cfg.eps_grid or (0.0, stats.eta / 2.0, stats.eta)

    def one_cell(item):
        i, lam = item
        pi = lambda_policy(A, theta, lam)
        rep = opportunity_risk_nfg(A, theta, pi, eps_grid)
        env = nfg_envelope(stats.mu, stats.nu, stats.eta, stats.kappa, lam)
        if rep.opportunity > env.upper_opportunity + 1e-8 or rep.risk > env.upper_risk + 1e-8:
            raise RuntimeError(
                f"exact tradeoff ({rep.opportunity}, {rep.risk}) violates the upper "
                f"envelope ({env.upper_opportunity}, {env.upper_risk}) at lambda={lam}"
            )
        o_mean, o_sd, o_ci = _sample_gap(
            A, theta, pi, rep.witness["opportunity"], cfg.runs, cell_rng(cfg.seed, i, 0)
        )
        r_mean, r_sd, r_ci = _sample_gap(
            A, theta, pi, rep.witness["risk"], cfg.runs, cell_rng(cfg.seed, i, 1)
        )
        if cfg.runs >= 1000:
            for emp, exact, sd in ((o_mean, rep.opportunity, o_sd), (r_mean, rep.risk, r_sd)):
                se = sd / np.sqrt(cfg.runs)
                if abs(emp - exact) > max(4.0 * se, 1e-9):
                    raise RuntimeError(
                        f"empirical mean {emp} is over 4 standard errors from exact "
                        f"{exact} at lambda={lam}"
                    )
        return TradeoffRow(
            lam=lam,
            exact_opportunity=rep.opportunity,
            exact_risk=rep.risk,
            opportunity_mean=o_mean,
            opportunity_sd=o_sd,
            opportunity_ci=o_ci,
            risk_mean=r_mean,
            risk_sd=r_sd,
            risk_ci=r_ci,
            upper_opportunity=env.upper_opportunity,
            upper_risk=env.upper_risk,
            lower_risk=env.lower_risk_given_opportunity,
        ).as_dict()

    rows = map_cells(one_cell, list(enumerate(cfg.lambda_grid)))
    meta = {
        "kind": "tradeoff-nfg",
        "game": label,
        "seed": cfg.seed,
        "runs": cfg.runs,
        "lambda_grid": ":".join(repr(l) for l in cfg.lambda_grid),
        "eps_grid": ":".join(repr(e) for e in eps_grid),
        "theta_size": len(theta),
        "mu": stats.mu,
        "nu": stats.nu,
        "eta": stats.eta,
        "kappa": stats.kappa if stats.kappa is not None else "undefined",
    }
    return rows, meta


# ------------------------------------------------------------- SBG tradeoff


def resolve_sbg(
    cfg: ExperimentConfig,
) -> Tuple[StochasticGame, StrategyKernel, Dict[str, BehaviorSpec], str]:
    """Game, the stationary kernel used for exact columns, and the full
    behavioral spec set used for empirical play."""
    if cfg.game in ("mp-sbg", "amp-sbg"):
        entries = casestudies.MP_ENTRIES if cfg.game == "mp-sbg" else casestudies.AMP_ENTRIES
        from .stochastic import single_state_game

        A = PayoffMatrix(np.array(entries))
        game = single_state_game(A.entries, gamma=cfg.gamma)
        specs = casestudies.mp_amp_type_specs(A, seed=cfg.seed)
    elif cfg.game == "security-synth":
        with tempfile.TemporaryDirectory() as tmpdir:
            csv_path = casestudies.synth_movement_data(
                os.path.join(tmpdir, "tracks.csv"),
                seed=cfg.seed,
                lat_bounds=cfg.lat_bounds,
                lon_bounds=cfg.lon_bounds,
            )
            world = casestudies.ingest_movement_csv(csv_path, cfg.lat_bounds, cfg.lon_bounds)
        game, attacker = casestudies.build_green_security_game(
            world, adjacency_boost=cfg.boost, gamma=cfg.gamma
        )
        specs = casestudies.security_attacker_specs(world, attacker, seed=cfg.seed)
    elif cfg.data is not None:
        if not os.path.exists(cfg.data):
            raise ConfigError(f"movement data file {cfg.data!r} not found")
        world = casestudies.ingest_movement_csv(cfg.data, cfg.lat_bounds, cfg.lon_bounds)
        game, attacker = casestudies.build_green_security_game(
            world, adjacency_boost=cfg.boost, gamma=cfg.gamma
        )
        specs = casestudies.security_attacker_specs(world, attacker, seed=cfg.seed)
    elif os.path.exists(cfg.game):
        game, kernel = load_sbg_game(cfg.game)
        if kernel is None:
            raise ConfigError(f"game file {cfg.game!r} has no kernel block")
        specs = dict(markovian_from_kernel(kernel))
    else:
        raise ConfigError(
            f"unknown game {cfg.game!r}: not a builtin (mp-sbg, amp-sbg, security-synth) or a file"
        )
    if cfg.type_set is not None:
        if not os.path.exists(cfg.type_set):
            raise ConfigError(f"type set file {cfg.type_set!r} not found")
        specs = load_type_set(cfg.type_set)
    stationary = {k: v for k, v in specs.items() if isinstance(v, MarkovianSpec)}
    if not stationary:
        raise ConfigError("the type set needs at least one stationary (Markovian) type")
    kernel = kernel_from_markovian(stationary)
    return game, kernel, specs, cfg.game


def run_tradeoff_sbg(cfg: ExperimentConfig) -> Tuple[List[Dict[str, object]], Dict[str, object]]:
    game, kernel, specs, label = resolve_sbg(cfg)
    names = kernel.type_names
    gv = game_value_sbg(game, kernel, names)
    build = safe_exploit_policy if cfg.policy == "value" else blend_policy

    # Beliefs about history-dependent types go through their stationary
    # proxy rows; the exact gap columns only ever see the stationary kernel.
    from .opponents import stationary_proxy

    proxy_kernel = StrategyKernel.of(
        {n: stationary_proxy(s, game.n_states) for n, s in specs.items()}
    )
    tilde = {n: optimal_value(game, proxy_kernel.sigma(n))[0] for n in specs}

    def builder(theta: str, lam: float) -> AgentPolicy:
        return build(
            game, proxy_kernel, proxy_kernel.type_names, theta, lam,
            game_value=gv, tilde_value=tilde[theta],
        )

    init = np.full(game.n_states, 1.0 / game.n_states)
    cap = game.value_cap()
    truncation = 2.0 * (game.gamma ** cfg.horizon) * cap

    exact_by_lam = {}
    for lam in cfg.lambda_grid:
        rep = opportunity_risk_sbg(game, kernel, names, lam, builder)
        env = sbg_envelopes(game.gamma, game.r_max, gv.nu, lam)
        if rep.beta > env.upper_opportunity + 1e-8 or rep.delta > env.upper_risk + 1e-8:
            raise RuntimeError(
                f"exact (beta, delta) = ({rep.beta}, {rep.delta}) violates the upper "
                f"envelope at lambda={lam}"
            )
        exact_by_lam[lam] = (rep, env)

    def one_cell(item):
        ci_idx, (lam, type_name) = item
        pol = builder(type_name, lam)
        spec = specs[type_name]
        exact_value = None
        if isinstance(spec, MarkovianSpec):
            v = policy_evaluation(game, pol, kernel.sigma(type_name))
            exact_value = float(v @ init)
        returns = np.empty(cfg.runs)
        for r in range(cfg.runs):
            ep = simulate_episode(
                game,
                pol,
                agent_for(spec),
                cfg.horizon,
                seed=cell_rng(cfg.seed, ci_idx, r).integers(2**63),
                init=init,
            )
            returns[r] = ep.discounted_return
        mean = float(returns.mean())
        sd = float(returns.std(ddof=1)) if cfg.runs > 1 else 0.0
        ci = float(Z95 * sd / np.sqrt(cfg.runs))
        if exact_value is not None and cfg.runs >= 1000:
            se = sd / np.sqrt(cfg.runs)
            if abs(mean - exact_value) > max(4.0 * se, truncation, 1e-9):
                raise RuntimeError(
                    f"empirical return {mean} is over 4 standard errors from exact "
                    f"{exact_value} for type {type_name} at lambda={lam}"
                )
        rep, env = exact_by_lam[lam]
        return {
            "lambda": lam,
            "type": type_name,
            "payoff_mean": mean,
            "payoff_sd": sd,
            "payoff_ci": ci,
            "exact_value": exact_value,
            "exact_beta": rep.beta,
            "exact_delta": rep.delta,
            "upper_opportunity": env.upper_opportunity,
            "upper_risk": env.upper_risk,
            "lower_opportunity": env.lower_opportunity,
            "lower_risk": env.lower_risk,
        }

    cells = [(lam, t) for lam in cfg.lambda_grid for t in specs]
    rows = map_cells(one_cell, list(enumerate(cells)))
    meta = {
        "kind": "tradeoff-sbg",
        "game": label,
        "policy": cfg.policy,
        "seed": cfg.seed,
        "runs": cfg.runs,
        "horizon": cfg.horizon,
        "gamma": game.gamma,
        "r_max": game.r_max,
        "nu": gv.nu,
        "nu_fixed_type": gv.nu_fixed_type,
        "types": ":".join(specs),
        "lambda_grid": ":".join(repr(l) for l in cfg.lambda_grid),
    }
    return rows, meta


# ------------------------------------------------------------- bound curves


def emit_bound_curves(
    gammas: Sequence[float], r_max: float, nu: float, lambda_grid: Sequence[float]
) -> List[Dict[str, object]]:
    rows = []
    for g in gammas:
        for lam in lambda_grid:
            env = sbg_envelopes(g, r_max, nu, lam)
            if env.lower_opportunity > env.upper_opportunity + 1e-12 or env.lower_risk > env.upper_risk + 1e-12:
                raise RuntimeError(f"lower envelope exceeds upper at gamma={g}, lambda={lam}")
            rows.append(
                {
                    "gamma": g,
                    "lambda": lam,
                    "upper_opp": env.upper_opportunity,
                    "upper_risk": env.upper_risk,
                    "lower_opp": env.lower_opportunity,
                    "lower_risk": env.lower_risk,
                }
            )
    return rows


def run_topology() -> List[Dict[str, object]]:
    rows = []
    for g in casestudies.enumerate_ordinal_2x2():
        rows.append(
            {
                "canonical_id": g.canonical_id,
                "row_payoffs": ";".join(str(v) for r in g.row_payoffs for v in r),
                "col_payoffs": ";".join(str(v) for r in g.col_payoffs for v in r),
            }
        )
    return rows
