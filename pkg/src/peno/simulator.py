"""Forward simulation of opinion propagation and tie formation.

One run follows the evolution loop: at ``t = 0`` personalities and opinions
are initialised and a tie set is drawn; at every later moment trends are
propagated over the previous tie set, positions advance along the previous
trend, and a fresh tie set is drawn from the new positions.  Ties are never
carried over from one moment to the next.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import rng as _rng
from .core import (
    B_MIN,
    SIGMA_MIN,
    DomainError,
    NetworkSnapshot,
    OpinionState,
    Personalities,
    SystemParams,
    social_impacts,
    wrap,
)


@dataclass(frozen=True)
class NormalSpec:
    mean: float
    std: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.std)) or self.std < 0:
            raise DomainError(f"invalid normal distribution {self}")


@dataclass(frozen=True)
class LeaderOverride:
    """Personality values forced onto one node after initialisation.

    ``None`` keeps the sampled value.
    """

    node: int
    leadership: float
    agreeableness: float | None = None
    openness: float | None = None


@dataclass(frozen=True)
class TrendInversion:
    """Replace the trends of ``nodes`` by ``theta + pi`` at ``moment``."""

    moment: int
    nodes: tuple[int, ...]


@dataclass(frozen=True)
class SimulationConfig:
    node_count: int = 300
    moments: int = 200
    system: SystemParams = SystemParams(xi=0.6, velocity=0.03)
    init_position_mean: float = 4.0
    init_position_std: float = 1.0
    agreeableness: NormalSpec = NormalSpec(0.6, 1.0)
    leadership: NormalSpec = NormalSpec(0.3, 1.0)
    neuroticism: NormalSpec = NormalSpec(1.0, 1.0)
    openness: NormalSpec = NormalSpec(0.3, 1.0)
    seed: int = 0
    leader_overrides: tuple[LeaderOverride, ...] = ()
    interventions: tuple[TrendInversion, ...] = ()
    sigma_min: float = SIGMA_MIN
    b_min: float = B_MIN

    def __post_init__(self):
        if self.node_count < 1:
            raise DomainError(f"node_count must be >= 1, got {self.node_count}")
        if self.moments < 1:
            raise DomainError(f"moments must be >= 1, got {self.moments}")
        if self.init_position_std < 0:
            raise DomainError("init_position_std must be >= 0")
        _rng.check_seed(self.seed)
        for ov in self.leader_overrides:
            if not 0 <= ov.node < self.node_count:
                raise DomainError(f"leader override node {ov.node} out of range")
        for iv in self.interventions:
            if not 1 <= iv.moment < self.moments:
                raise DomainError(f"intervention moment {iv.moment} outside 1..{self.moments - 1}")
            if any(not 0 <= n < self.node_count for n in iv.nodes):
                raise DomainError("intervention node out of range")

    def with_(self, **changes) -> "SimulationConfig":
        return replace(self, **changes)


def benchmark_config(**changes) -> SimulationConfig:
    """Benchmark population: 300 nodes, 200 moments, speed 0.03."""
    return SimulationConfig(**changes)


@dataclass
class EvolutionTrace:
    """Recorded evolution: personalities plus one frame per moment.

    ``positions`` has shape ``(T, N, 2)`` and ``trends`` shape ``(T, N)``.
    Arrays are frozen once the run finishes.
    """

    profiles: Personalities
    positions: np.ndarray
    trends: np.ndarray
    snapshots: list[NetworkSnapshot]
    system: SystemParams = field(default_factory=SystemParams)

    def __post_init__(self):
        T, N = self.trends.shape
        if self.positions.shape != (T, N, 2) or len(self.snapshots) != T:
            raise DomainError("trace arrays disagree on T or N")
        if len(self.profiles) != N or any(s.node_count != N for s in self.snapshots):
            raise DomainError("trace node counts disagree")

    @property
    def moments(self):
        return self.trends.shape[0]

    @property
    def node_count(self):
        return self.trends.shape[1]

    def opinions(self, t: int) -> list[OpinionState]:
        return [OpinionState(tuple(self.positions[t, n]), self.trends[t, n])
                for n in range(self.node_count)]

    @property
    def frames(self):
        return [(self.opinions(t), self.snapshots[t]) for t in range(self.moments)]

    def freeze(self):
        for a in (self.positions, self.trends, self.profiles.r, self.profiles.l,
                  self.profiles.sigma, self.profiles.b):
            a.setflags(write=False)
        return self


# ---------------------------------------------------------------------------
# the three stages of the loop
# ---------------------------------------------------------------------------


def init_population(config: SimulationConfig, rng: np.random.Generator):
    """Draw personalities, positions and trends for ``t = 0``.

    Returns ``(profiles, positions, trends)``.  Draw order is fixed:
    positions, trends, then r, l, sigma, b.
    """
    n = config.node_count
    pos = rng.normal(config.init_position_mean, config.init_position_std, size=(n, 2))
    trends = wrap(rng.uniform(-math.pi, math.pi, size=n))
    cols = [rng.normal(spec.mean, spec.std, size=n)
            for spec in (config.agreeableness, config.leadership,
                         config.neuroticism, config.openness)]
    profiles = Personalities(*cols).clamp_(config.sigma_min, config.b_min)
    for ov in config.leader_overrides:
        profiles.l[ov.node] = max(ov.leadership, 0.0)
        if ov.agreeableness is not None:
            profiles.r[ov.node] = min(max(ov.agreeableness, 0.0), 1.0)
        if ov.openness is not None:
            profiles.b[ov.node] = max(ov.openness, config.b_min)
    return profiles, pos, trends


def _prob_rows(pos, b, inv_xi2, rows):
    d = pos[rows, None, :] - pos[None, :, :]
    q = np.einsum("ijk,ijk->ij", d, d) * inv_xi2 / np.outer(b[rows], b)
    return np.exp(-q)


def tie_probability_matrix(positions, openness, system: SystemParams, threads: int = 1):
    """Tie probabilities for all ordered pairs, optionally computed in row blocks."""
    n = positions.shape[0]
    inv_xi2 = 1.0 / system.xi ** 2
    if threads <= 1 or n < 64:
        return _prob_rows(positions, openness, inv_xi2, np.arange(n))
    blocks = np.array_split(np.arange(n), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda rows: _prob_rows(positions, openness, inv_xi2, rows),
                              blocks))
    return np.vstack(parts)


def generate_ties(positions, openness, system: SystemParams, rng: np.random.Generator,
                  threads: int = 1) -> NetworkSnapshot:
    """One Bernoulli draw per unordered pair, using only the current positions.

    Uniforms are consumed in row-major upper-triangle order, so the result
    does not depend on ``threads``.
    """
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    iu, ju = np.triu_indices(n, 1)
    u = rng.random(iu.size)
    if n < 2:
        return NetworkSnapshot(n)
    p = tie_probability_matrix(positions, np.asarray(openness, dtype=float), system, threads)
    hit = u < p[iu, ju]
    return NetworkSnapshot(n, np.column_stack([iu[hit], ju[hit]]))


def propagate_opinions(positions, trends, snapshot: NetworkSnapshot, profiles: Personalities,
                       system: SystemParams, noise):
    """Advance every node by one moment.

    The new trend is ``wrap(theta + r * impact + sigma * noise)`` with the
    impact taken over ``snapshot`` (the previous moment's ties); the new
    position moves by ``v`` along the *previous* trend.
    """
    impact, _, _ = social_impacts(snapshot.adjacency(), trends, profiles.l)
    new_trends = wrap(trends + profiles.r * impact + profiles.sigma * np.asarray(noise))
    step = system.velocity * np.column_stack([np.cos(trends), np.sin(trends)])
    return positions + step, new_trends


def run(config: SimulationConfig, threads: int = 1) -> EvolutionTrace:
    T, n = config.moments, config.node_count
    profiles, pos, trends = init_population(config, _rng.substream(config.seed, _rng.INIT))
    inversions = {}
    for iv in config.interventions:
        inversions.setdefault(iv.moment, set()).update(iv.nodes)

    all_pos = np.empty((T, n, 2))
    all_trends = np.empty((T, n))
    snapshots = []
    for t in range(T):
        if t > 0:
            noise = _rng.substream(config.seed, _rng.NOISE, t).standard_normal(n)
            pos, trends = propagate_opinions(pos, trends, snapshots[-1], profiles,
                                             config.system, noise)
            if t in inversions:
                idx = np.array(sorted(inversions[t]))
                trends[idx] = wrap(trends[idx] + math.pi)
        all_pos[t] = pos
        all_trends[t] = trends
        snapshots.append(generate_ties(pos, profiles.b, config.system,
                                       _rng.substream(config.seed, _rng.TIES, t), threads))
    return EvolutionTrace(profiles, all_pos, all_trends, snapshots, config.system).freeze()


# ---------------------------------------------------------------------------
# frame export
# ---------------------------------------------------------------------------

NODE_HEADER = ["t", "node", "z", "c", "theta", "r", "l", "sigma", "b", "degree"]
EDGE_HEADER = ["t", "i", "j"]


def _g9(x):
    return format(float(x), ".9g")


def frame_paths(stem) -> tuple[Path, Path]:
    stem = Path(stem)
    return (stem.with_name(stem.name + ".nodes.csv"), stem.with_name(stem.name + ".edges.csv"))


def export_frames(trace: EvolutionTrace, stem) -> tuple[Path, Path]:
    """Write ``<stem>.nodes.csv`` and ``<stem>.edges.csv``."""
    nodes_path, edges_path = frame_paths(stem)
    prof = trace.profiles
    static = [[_g9(prof.r[n]), _g9(prof.l[n]), _g9(prof.sigma[n]), _g9(prof.b[n])]
              for n in range(trace.node_count)]
    try:
        with open(nodes_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(NODE_HEADER)
            for t in range(trace.moments):
                deg = trace.snapshots[t].degrees()
                for n in range(trace.node_count):
                    z, c = trace.positions[t, n]
                    w.writerow([t, n, _g9(z), _g9(c), _g9(trace.trends[t, n]),
                                *static[n], int(deg[n])])
        with open(edges_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(EDGE_HEADER)
            for t, snap in enumerate(trace.snapshots):
                for i, j in snap.edges:
                    w.writerow([t, int(i), int(j)])
    except OSError as exc:
        raise OSError(f"cannot write frames to {stem}: {exc}") from exc
    return nodes_path, edges_path


def load_frames(stem, system: SystemParams | None = None) -> EvolutionTrace:
    """Read back frames written by :func:`export_frames`."""
    nodes_path, edges_path = frame_paths(stem)
    with open(nodes_path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    T = max(int(r["t"]) for r in rows) + 1
    N = max(int(r["node"]) for r in rows) + 1
    pos = np.empty((T, N, 2))
    trends = np.empty((T, N))
    cols = {k: np.empty(N) for k in ("r", "l", "sigma", "b")}
    for r in rows:
        t, n = int(r["t"]), int(r["node"])
        pos[t, n] = float(r["z"]), float(r["c"])
        trends[t, n] = float(r["theta"])
        for k in cols:
            cols[k][n] = float(r[k])
    edges: list[list[tuple[int, int]]] = [[] for _ in range(T)]
    with open(edges_path, newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            edges[int(r["t"])].append((int(r["i"]), int(r["j"])))
    snaps = [NetworkSnapshot(N, e) for e in edges]
    return EvolutionTrace(Personalities(**cols), pos, trends, snaps,
                          system or SystemParams()).freeze()

