"""Experimental game constructions: the strictly-ordinal 2x2 topology, the
matching-pennies pair of bound-tightness instances, and a green security
game built from animal-movement records (real CSV or synthetic stand-in).
"""

from __future__ import annotations

import csv
import itertools
import logging
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .normal_form import HypothesisSet, MixedStrategy, PayoffMatrix
from .opponents import (
    BehaviorSpec,
    GameContext,
    LftSpec,
    MarkovianSpec,
    NeuroSpec,
    markovian_type,
)
from .stochastic import StochasticGame

log = logging.getLogger(__name__)

N_SEASON_STATES = 16
N_CELLS = 9


# ------------------------------------------------------------- 2x2 topology


Table = Tuple[Tuple[int, int], Tuple[int, int]]


@dataclass(frozen=True)
class OrdinalGame2x2:
    """A strictly ordinal 2x2 game: each player's payoff table is a
    permutation of ranks 1..4. canonical_id identifies the equivalence class
    under row swap, column swap and player transpose."""

    row_payoffs: Table
    col_payoffs: Table
    canonical_id: str

    def __post_init__(self):
        for t in (self.row_payoffs, self.col_payoffs):
            if sorted(v for row in t for v in row) != [1, 2, 3, 4]:
                raise ValueError("each payoff table must use ranks 1..4 exactly once")


def _transpose(t: Table) -> Table:
    return ((t[0][0], t[1][0]), (t[0][1], t[1][1]))


def _swap_rows(t: Table) -> Table:
    return (t[1], t[0])


def _swap_cols(t: Table) -> Table:
    return ((t[0][1], t[0][0]), (t[1][1], t[1][0]))


def _orbit(rowp: Table, colp: Table) -> Iterable[Tuple[Table, Table]]:
    for transpose in (False, True):
        r, c = ((_transpose(colp), _transpose(rowp)) if transpose else (rowp, colp))
        for rswap in (False, True):
            r1, c1 = (_swap_rows(r), _swap_rows(c)) if rswap else (r, c)
            for cswap in (False, True):
                yield (_swap_cols(r1), _swap_cols(c1)) if cswap else (r1, c1)


def _flat(t: Table) -> Tuple[int, ...]:
    return tuple(v for row in t for v in row)


def _encode(rowp: Table, colp: Table) -> Tuple[int, ...]:
    return _flat(rowp) + _flat(colp)


def canonical_form(rowp: Table, colp: Table) -> Tuple[Table, Table]:
    """Minimal lexicographic encoding over the symmetry orbit."""
    return min(_orbit(rowp, colp), key=lambda rc: _encode(*rc))


def canonical_id_of(rowp: Table, colp: Table) -> str:
    r, c = canonical_form(rowp, colp)
    return "".join(map(str, _flat(r))) + "-" + "".join(map(str, _flat(c)))


def enumerate_ordinal_2x2() -> List[OrdinalGame2x2]:
    """All 24 x 24 ordered rank-table pairs reduced to one representative per
    symmetry class. The class count is the classic 78."""
    perms = [((p[0], p[1]), (p[2], p[3])) for p in itertools.permutations((1, 2, 3, 4))]
    seen: Dict[str, OrdinalGame2x2] = {}
    for rowp in perms:
        for colp in perms:
            r, c = canonical_form(rowp, colp)
            cid = canonical_id_of(rowp, colp)
            if cid not in seen:
                seen[cid] = OrdinalGame2x2(row_payoffs=r, col_payoffs=c, canonical_id=cid)
    return [seen[k] for k in sorted(seen)]


def raw_ordinal_pair_count() -> int:
    return 24 * 24


# ------------------------------------------------------- MP / AMP instances


MP_ENTRIES = ((1.0, -1.0), (-1.0, 1.0))
AMP_ENTRIES = ((1.2, -0.8), (-0.8, 1.2))
DEFAULT_TYPE_SEED = 2024


def mp_amp_instances(seed: int = DEFAULT_TYPE_SEED) -> Tuple[PayoffMatrix, PayoffMatrix, HypothesisSet]:
    """The matching-pennies pair used for the bound-tightness study, plus the
    stationary (Markovian) part of its behavioral type set: always-first,
    always-second, the opponent's minimax point, and a frozen seeded random
    strategy. The trigger and neural types are simulation agents and come
    from mp_amp_type_specs."""
    mp = PayoffMatrix(np.array(MP_ENTRIES))
    amp = PayoffMatrix(np.array(AMP_ENTRIES))
    members = [
        markovian_type(1, GameContext(n_actions=2)).table[0],
        markovian_type(2, GameContext(n_actions=2)).table[0],
        markovian_type(3, GameContext(n_actions=2, own_payoffs=-mp.entries.T)).table[0],
        markovian_type(4, GameContext(n_actions=2, seed=seed)).table[0],
    ]
    return mp, amp, HypothesisSet.of(members)


def mp_amp_type_specs(A: PayoffMatrix, seed: int = DEFAULT_TYPE_SEED) -> Dict[str, BehaviorSpec]:
    """All six behavioral types for a 2-column game: four Markovian plus the
    leader-follower-trigger and co-evolution-style neural agents."""
    minimax = markovian_type(3, GameContext(n_actions=2, own_payoffs=-A.entries.T))
    specs: Dict[str, BehaviorSpec] = {
        "always0": markovian_type(1, GameContext(n_actions=2)),
        "always1": markovian_type(2, GameContext(n_actions=2)),
        "minimax": minimax,
        "random": markovian_type(4, GameContext(n_actions=2, seed=seed)),
        "trigger": LftSpec(
            preferred=np.array([[1.0, 0.0]]),
            punishment=minimax.table.copy(),
        ),
        "neural": NeuroSpec.random(np.random.default_rng(seed), 2, 2),
    }
    return specs


# --------------------------------------------------------- movement records


@dataclass(frozen=True)
class MovementRecord:
    timestamp: datetime
    animal_id: str
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} out of range")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} out of range")


@dataclass(frozen=True)
class GridWorld:
    """A 3x3 surveillance grid over 16 season-states with per-cell animal
    counts. States are ordered chronologically."""

    states: Tuple[str, ...]
    seasons: Tuple[str, ...]  # "dry" | "rainy" per state
    counts: np.ndarray  # (16, 9) nonnegative ints
    lat_bounds: Tuple[float, float]
    lon_bounds: Tuple[float, float]
    dims: Tuple[int, int] = (3, 3)

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=int)
        if len(self.states) != N_SEASON_STATES:
            raise ValueError(f"a grid world has exactly {N_SEASON_STATES} season-states")
        if self.dims[0] * self.dims[1] != N_CELLS:
            raise ValueError(f"a grid world has exactly {N_CELLS} cells")
        if c.shape != (N_SEASON_STATES, N_CELLS) or np.any(c < 0):
            raise ValueError("counts must be (16, 9) nonnegative integers")
        if len(self.seasons) != N_SEASON_STATES:
            raise ValueError("one season tag per state")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)


def season_of(ts: datetime) -> Tuple[int, str]:
    """(label year, season). The rainy season spans October of year Y through
    March of year Y+1 and is labeled by Y; April through September is dry."""
    if 4 <= ts.month <= 9:
        return ts.year, "dry"
    if ts.month >= 10:
        return ts.year, "rainy"
    return ts.year - 1, "rainy"


def _season_sort_key(season: Tuple[int, str]) -> Tuple[int, int]:
    year, name = season
    return year, 0 if name == "dry" else 1


def _cell_of(
    lat: float,
    lon: float,
    lat_bounds: Tuple[float, float],
    lon_bounds: Tuple[float, float],
    dims: Tuple[int, int],
) -> Optional[int]:
    """Uniform-partition bucketing with half-open [lo, hi) intervals and the
    last cell closed; None when out of bounds."""
    (lat_lo, lat_hi), (lon_lo, lon_hi) = lat_bounds, lon_bounds
    if not (lat_lo <= lat <= lat_hi and lon_lo <= lon <= lon_hi):
        return None
    nr, nc = dims
    r = min(int((lat - lat_lo) / (lat_hi - lat_lo) * nr), nr - 1)
    c = min(int((lon - lon_lo) / (lon_hi - lon_lo) * nc), nc - 1)
    return r * nc + c


def ingest_movement_csv(
    path,
    lat_bounds: Tuple[float, float],
    lon_bounds: Tuple[float, float],
    dims: Tuple[int, int] = (3, 3),
) -> GridWorld:
    """Bucket per-animal seasonal mean locations into the grid.

    Expects a header row with timestamp, animal_id, lat, lon. Malformed rows
    are skipped with a logged line number. Seasonal means falling outside
    the bounds are excluded with a warning (animals migrate out of the
    surveillance area). Requires at least 16 season buckets; the first 16 in
    chronological order become the states."""
    sums: Dict[Tuple[int, str], Dict[str, List[float]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"timestamp", "animal_id", "lat", "lon"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"CSV must have columns {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                rec = MovementRecord(
                    timestamp=datetime.fromisoformat(row["timestamp"]),
                    animal_id=row["animal_id"].strip(),
                    lat=float(row["lat"]),
                    lon=float(row["lon"]),
                )
                if not rec.animal_id:
                    raise ValueError("empty animal_id")
            except (ValueError, TypeError, KeyError) as exc:
                log.warning("skipping malformed row at line %d: %s", lineno, exc)
                continue
            bucket = sums.setdefault(season_of(rec.timestamp), {})
            acc = bucket.setdefault(rec.animal_id, [0.0, 0.0, 0])
            acc[0] += rec.lat
            acc[1] += rec.lon
            acc[2] += 1

    seasons = sorted(sums, key=_season_sort_key)
    if len(seasons) < N_SEASON_STATES:
        raise ValueError(
            f"need {N_SEASON_STATES} season buckets, found {len(seasons)}: "
            + ", ".join(f"{y}-{s}" for y, s in seasons)
        )
    seasons = seasons[:N_SEASON_STATES]

    counts = np.zeros((N_SEASON_STATES, N_CELLS), dtype=int)
    for si, season in enumerate(seasons):
        for animal, (lat_sum, lon_sum, n) in sorted(sums[season].items()):
            mean_lat, mean_lon = lat_sum / n, lon_sum / n
            cell = _cell_of(mean_lat, mean_lon, lat_bounds, lon_bounds, dims)
            if cell is None:
                log.warning(
                    "season %s-%s: %s mean location (%.4f, %.4f) outside bounds; excluded",
                    season[0], season[1], animal, mean_lat, mean_lon,
                )
                continue
            counts[si, cell] += 1
    return GridWorld(
        states=tuple(f"{y}-{s}" for y, s in seasons),
        seasons=tuple(s for _, s in seasons),
        counts=counts,
        lat_bounds=lat_bounds,
        lon_bounds=lon_bounds,
        dims=dims,
    )


# ------------------------------------------------------- green security game


def build_green_security_game(
    world: GridWorld, adjacency_boost: float = 0.05, gamma: float = 0.9
) -> Tuple[StochasticGame, np.ndarray]:
    """Defender-vs-poacher stochastic game over the grid.

    Rewards per state with n = count in the chosen cell: both pick the same
    cell -> defender +n, attacker -2; different cells -> defender -n_att,
    attacker +n_att. Transitions are action-independent, zero between
    same-season states, uniform across opposite-season states with extra
    mass on the chronological successor, renormalized. Returns the game
    (defender viewpoint) and the attacker reward table."""
    if adjacency_boost < 0:
        raise ValueError("adjacency boost must be nonnegative")
    counts = world.counts.astype(float)
    S = N_SEASON_STATES
    r_max = float(counts.max())
    if r_max <= 0:
        raise ValueError("world has no recorded animals; rewards would be all zero")

    defender = np.empty((S, N_CELLS, N_CELLS))
    attacker = np.empty((S, N_CELLS, N_CELLS))
    for s in range(S):
        for d in range(N_CELLS):
            for a in range(N_CELLS):
                if d == a:
                    defender[s, d, a] = counts[s, d]
                    attacker[s, d, a] = -2.0
                else:
                    defender[s, d, a] = -counts[s, a]
                    attacker[s, d, a] = counts[s, a]

    q = np.zeros((S, S))
    for s in range(S):
        opposite = [t for t in range(S) if world.seasons[t] != world.seasons[s]]
        if not opposite:
            raise ValueError("every state needs at least one opposite-season state")
        q[s, opposite] = 1.0 / len(opposite)
        succ = s + 1
        if succ < S and world.seasons[succ] != world.seasons[s]:
            q[s, succ] += adjacency_boost
        q[s] /= q[s].sum()
    if np.any(q < 0):
        raise AssertionError("transition mass went negative")

    transition = np.broadcast_to(q[:, None, None, :], (S, N_CELLS, N_CELLS, S)).copy()
    game = StochasticGame(
        states=world.states,
        agent_actions=tuple(f"cell{i}" for i in range(N_CELLS)),
        opponent_actions=tuple(f"cell{i}" for i in range(N_CELLS)),
        reward=defender,
        transition=transition,
        gamma=gamma,
        r_max=r_max,
    )
    return game, attacker


def security_attacker_specs(
    world: GridWorld, attacker_reward: np.ndarray, seed: int = DEFAULT_TYPE_SEED
) -> Dict[str, BehaviorSpec]:
    """The six attacker types adjusted for the grid: highest-count cell,
    second-highest cell, per-state attacker minimax, frozen random, the
    majority-trigger agent watching the hot cell, and a neural agent."""
    ctx = GameContext(
        n_actions=N_CELLS,
        n_states=N_SEASON_STATES,
        counts=world.counts.astype(float),
        # attacker's own payoff: rows = attacker action, cols = defender action
        own_payoffs=np.transpose(attacker_reward, (0, 2, 1)),
        seed=seed,
    )
    hot_cells = tuple(int(np.argmax(world.counts[s])) for s in range(N_SEASON_STATES))
    minimax = markovian_type(3, ctx)
    hot = markovian_type(1, ctx)
    return {
        "hot_cell": hot,
        "second_cell": markovian_type(2, ctx),
        "minimax": minimax,
        "random": markovian_type(4, ctx),
        "trigger": LftSpec(
            preferred=hot.table.copy(),
            punishment=minimax.table.copy(),
            majority_mode=True,
            hot_cells=hot_cells,
        ),
        "neural": NeuroSpec.random(
            np.random.default_rng(seed), N_CELLS, N_CELLS, n_states=N_SEASON_STATES
        ),
    }


# --------------------------------------------------------- synthetic tracks


def synth_movement_data(
    path,
    seed: int,
    n_animals: int = 32,
    n_years: int = 8,
    lat_bounds: Tuple[float, float] = (0.0, 3.0),
    lon_bounds: Tuple[float, float] = (0.0, 3.0),
    fixes_per_season: int = 4,
    base_year: int = 2010,
) -> str:
    """Seasonal random-walk tracks guaranteeing 16 nonempty season-states.

    Every animal gets a home location plus a season-dependent drift, and a
    few GPS fixes random-walking around it each season. Byte-identical output
    for a fixed seed; round-trips through ingest_movement_csv."""
    rng = np.random.default_rng(seed)
    (lat_lo, lat_hi), (lon_lo, lon_hi) = lat_bounds, lon_bounds
    margin_lat = 0.15 * (lat_hi - lat_lo)
    margin_lon = 0.15 * (lon_hi - lon_lo)
    drift = 0.2 * (lat_hi - lat_lo)

    homes = np.column_stack(
        [
            rng.uniform(lat_lo + 2 * margin_lat, lat_hi - 2 * margin_lat, n_animals),
            rng.uniform(lon_lo + 2 * margin_lon, lon_hi - 2 * margin_lon, n_animals),
        ]
    )

    rows = []
    for year in range(base_year, base_year + n_years):
        for season in ("dry", "rainy"):
            if season == "dry":
                start = datetime(year, 4, 1)
                days = 183
                d_lat = -drift
            else:
                start = datetime(year, 10, 1)
                days = 182
                d_lat = drift
            for a in range(n_animals):
                lat = float(np.clip(homes[a, 0] + d_lat, lat_lo + margin_lat, lat_hi - margin_lat))
                lon = homes[a, 1]
                day_offsets = np.sort(rng.integers(0, days, size=fixes_per_season))
                for off in day_offsets:
                    lat += float(rng.normal(0.0, 0.02 * (lat_hi - lat_lo)))
                    lon += float(rng.normal(0.0, 0.02 * (lon_hi - lon_lo)))
                    lat = float(np.clip(lat, lat_lo + 0.01, lat_hi - 0.01))
                    lon = float(np.clip(lon, lon_lo + 0.01, lon_hi - 0.01))
                    ts = start + timedelta(days=int(off), hours=int(rng.integers(0, 24)))
                    rows.append(
                        (
                            ts.strftime("%Y-%m-%dT%H:%M:%S"),
                            f"animal{a:02d}",
                            f"{lat:.6f}",
                            f"{lon:.6f}",
                        )
                    )

    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".csv.tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp", "animal_id", "lat", "lon"])
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return os.fspath(path)
