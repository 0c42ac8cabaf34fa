"""Model kernel: domain types and the closed-form quantities of the model.

Everything here is a pure function of its arguments.  Randomness is never
drawn inside this module; callers pass noise in explicitly.

Conventions
-----------
* Opinions live in the plane, ``x = (z, c)``.
* Trend angles and angle differences are wrapped into ``(-pi, pi]``.
* A node moves at fixed speed ``v`` along ``(cos theta, sin theta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SIGMA_MIN = 1e-3
B_MIN = 1e-3
OPINION_DIM = 2

TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """Input outside the domain of a model operation."""


def _finite(name, value):
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemParams:
    """Global constants: tie-formation scale ``xi`` and opinion speed."""

    xi: float = 0.6
    velocity: float = 3e-3

    def __post_init__(self):
        for name in ("xi", "velocity"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive and finite, got {value!r}")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class PersonalityProfile:
    agreeableness: float
    leadership: float
    neuroticism: float
    openness: float
    sigma_min: float = field(default=SIGMA_MIN, repr=False, compare=False)
    b_min: float = field(default=B_MIN, repr=False, compare=False)

    def __post_init__(self):
        for name in ("agreeableness", "leadership", "neuroticism", "openness"):
            _finite(name, getattr(self, name))
        if not 0.0 <= self.agreeableness <= 1.0:
            raise DomainError(f"agreeableness must lie in [0, 1], got {self.agreeableness}")
        if self.leadership < 0.0:
            raise DomainError(f"leadership must be >= 0, got {self.leadership}")
        if self.neuroticism < self.sigma_min:
            raise DomainError(f"neuroticism must be >= {self.sigma_min}, got {self.neuroticism}")
        if self.openness < self.b_min:
            raise DomainError(f"openness must be >= {self.b_min}, got {self.openness}")

    @classmethod
    def clamped(cls, agreeableness, leadership, neuroticism, openness,
                sigma_min=SIGMA_MIN, b_min=B_MIN):
        """Build a profile, pushing each value into its valid range."""
        return cls(
            agreeableness=min(max(float(agreeableness), 0.0), 1.0),
            leadership=max(float(leadership), 0.0),
            neuroticism=max(float(neuroticism), sigma_min),
            openness=max(float(openness), b_min),
            sigma_min=sigma_min,
            b_min=b_min,
        )

    # short aliases matching the model's symbols
    @property
    def r(self):
        return self.agreeableness

    @property
    def l(self):  # noqa: E743
        return self.leadership

    @property
    def sigma(self):
        return self.neuroticism

    @property
    def b(self):
        return self.openness


@dataclass(frozen=True)
class OpinionState:
    """A node's opinion position and trend angle at one moment."""

    position: tuple[float, float]
    trend: float

    def __post_init__(self):
        if len(self.position) != OPINION_DIM:
            raise DomainError(f"position must have {OPINION_DIM} components")
        z, c = (float(p) for p in self.position)
        _finite("position", z)
        _finite("position", c)
        object.__setattr__(self, "position", (z, c))
        object.__setattr__(self, "trend", wrap_angle(float(self.trend)))


@dataclass
class Personalities:
    """Per-node personality values stored column-wise.

    This is the bulk counterpart of a list of :class:`PersonalityProfile`.
    """

    r: np.ndarray
    l: np.ndarray  # noqa: E741
    sigma: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.l = np.asarray(self.l, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        n = self.r.shape
        if len(n) != 1 or any(a.shape != n for a in (self.l, self.sigma, self.b)):
            raise DomainError("personality columns must be 1-D arrays of equal length")

    def __len__(self):
        return self.r.shape[0]

    def __getitem__(self, i) -> PersonalityProfile:
        return PersonalityProfile(float(self.r[i]), float(self.l[i]),
                                  float(self.sigma[i]), float(self.b[i]))

    def __eq__(self, other):
        if not isinstance(other, Personalities):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("r", "l", "sigma", "b"))

    @classmethod
    def from_profiles(cls, profiles: Sequence[PersonalityProfile]):
        return cls(
            r=[p.agreeableness for p in profiles],
            l=[p.leadership for p in profiles],
            sigma=[p.neuroticism for p in profiles],
            b=[p.openness for p in profiles],
        )

    def to_profiles(self):
        return [self[i] for i in range(len(self))]

    def copy(self):
        return Personalities(self.r.copy(), self.l.copy(), self.sigma.copy(), self.b.copy())

    def clamp_(self, sigma_min=SIGMA_MIN, b_min=B_MIN):
        """Clamp every column into its valid range, in place."""
        np.clip(self.r, 0.0, 1.0, out=self.r)
        np.maximum(self.l, 0.0, out=self.l)
        np.maximum(self.sigma, sigma_min, out=self.sigma)
        np.maximum(self.b, b_min, out=self.b)
        return self


class NetworkSnapshot:
    """Undirected simple graph over ``node_count`` nodes.

    Edges are kept as an ``(E, 2)`` integer array with ``i < j`` in each row,
    rows sorted lexicographically, so two snapshots with the same edge set
    compare (and serialize) identically.
    """

    __slots__ = ("node_count", "edges", "_adj")

    def __init__(self, node_count: int, edges=()):
        node_count = int(node_count)
        if node_count < 1:
            raise DomainError(f"node_count must be positive, got {node_count}")
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                         dtype=np.int64).reshape(-1, 2)
        if arr.size:
            if (arr < 0).any() or (arr >= node_count).any():
                bad = arr[((arr < 0) | (arr >= node_count)).any(axis=1)][0]
                raise DomainError(f"edge {tuple(bad)} out of range for {node_count} nodes")
            if (arr[:, 0] == arr[:, 1]).any():
                bad = arr[arr[:, 0] == arr[:, 1]][0]
                raise DomainError(f"self-loop {tuple(bad)} not allowed")
            arr = np.sort(arr, axis=1)
            order = np.lexsort((arr[:, 1], arr[:, 0]))
            arr = arr[order]
            dup = (np.diff(arr, axis=0) == 0).all(axis=1)
            if dup.any():
                raise DomainError(f"duplicate edge {tuple(arr[1:][dup][0])}")
        self.node_count = node_count
        self.edges = arr
        self.edges.setflags(write=False)
        self._adj = None

    @classmethod
    def from_adjacency(cls, adj: np.ndarray):
        adj = np.asarray(adj, dtype=bool)
        i, j = np.nonzero(np.triu(adj, 1))
        return cls(adj.shape[0], np.column_stack([i, j]))

    def adjacency(self) -> np.ndarray:
        """Symmetric boolean adjacency matrix (cached, read-only)."""
        if self._adj is None:
            adj = np.zeros((self.node_count, self.node_count), dtype=bool)
            if len(self.edges):
                adj[self.edges[:, 0], self.edges[:, 1]] = True
                adj[self.edges[:, 1], self.edges[:, 0]] = True
            adj.setflags(write=False)
            self._adj = adj
        return self._adj

    def degrees(self) -> np.ndarray:
        return self.adjacency().sum(axis=1)

    def neighbors(self, node: int) -> np.ndarray:
        _check_index(node, self.node_count)
        return np.flatnonzero(self.adjacency()[node])

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.edges}

    def has_edge(self, i, j) -> bool:
        return bool(self.adjacency()[i, j])

    def __len__(self):
        return len(self.edges)

    def __eq__(self, other):
        if not isinstance(other, NetworkSnapshot):
            return NotImplemented
        return self.node_count == other.node_count and np.array_equal(self.edges, other.edges)

    def __repr__(self):
        return f"NetworkSnapshot(node_count={self.node_count}, edges={len(self.edges)})"


class SnapshotSeries:
    """Time-ordered snapshots over a fixed node set, with optional labels.

    ``node_ids[k]`` is the external id of node index ``k``.
    """

    def __init__(self, snapshots: Sequence[NetworkSnapshot], labels=None, node_ids=None):
        snapshots = list(snapshots)
        if not snapshots:
            raise DomainError("a snapshot series needs at least one moment")
        n = snapshots[0].node_count
        if any(s.node_count != n for s in snapshots):
            raise DomainError("all snapshots in a series must share node_count")
        labels = [str(t) for t in range(len(snapshots))] if labels is None else [str(x) for x in labels]
        if len(labels) != len(snapshots):
            raise DomainError("one label per moment required")
        node_ids = [str(k) for k in range(n)] if node_ids is None else [str(x) for x in node_ids]
        if len(node_ids) != n or len(set(node_ids)) != n:
            raise DomainError("node_ids must be unique, one per node")
        self.snapshots = snapshots
        self.labels = labels
        self.node_ids = node_ids

    @property
    def node_count(self):
        return self.snapshots[0].node_count

    @property
    def moments(self):
        return len(self.snapshots)

    def __len__(self):
        return len(self.snapshots)

    def __getitem__(self, t):
        if isinstance(t, slice):
            return SnapshotSeries(self.snapshots[t], self.labels[t], self.node_ids)
        return self.snapshots[t]

    def __iter__(self):
        return iter(self.snapshots)

    def __eq__(self, other):
        if not isinstance(other, SnapshotSeries):
            return NotImplemented
        return (self.snapshots == other.snapshots and self.labels == other.labels
                and self.node_ids == other.node_ids)

    def __repr__(self):
        return f"SnapshotSeries(N={self.node_count}, T={self.moments})"


def as_snapshot_list(observed) -> list[NetworkSnapshot]:
    if isinstance(observed, SnapshotSeries):
        return observed.snapshots
    snaps = list(observed)
    if not snaps or not all(isinstance(s, NetworkSnapshot) for s in snaps):
        raise DomainError("expected a non-empty sequence of NetworkSnapshot")
    return snaps


def _check_index(node, n):
    if not 0 <= int(node) < n:
        raise DomainError(f"node index {node} out of range for {n} nodes")


# ---------------------------------------------------------------------------
# scalar operations
# ---------------------------------------------------------------------------


def wrap_angle(theta: float) -> float:
    """Wrap an angle into ``(-pi, pi]``."""
    theta = float(theta)
    _finite("theta", theta)
    if -math.pi < theta <= math.pi:
        return theta
    w = math.fmod(theta + math.pi, TWO_PI)
    if w < 0:
        w += TWO_PI
    w -= math.pi
    return math.pi if w <= -math.pi else w


def wrap(theta):
    """Vectorised :func:`wrap_angle`."""
    theta = np.asarray(theta, dtype=float)
    w = np.mod(theta + math.pi, TWO_PI) - math.pi
    w = np.where(w <= -math.pi, math.pi, w)
    # in-range angles pass through untouched
    return np.where((theta > -math.pi) & (theta <= math.pi), theta, w)


def _leadership(profiles):
    if isinstance(profiles, Personalities):
        return profiles.l
    return np.array([p.leadership for p in profiles], dtype=float)


def social_impact(node: int, snapshot: NetworkSnapshot, trends, profiles) -> float:
    """Leadership-weighted mean of the wrapped trend differences of a node's neighbours.

    Returns 0 for isolated nodes and when every neighbour has zero leadership.
    """
    _check_index(node, snapshot.node_count)
    trends = np.asarray(trends, dtype=float)
    nbrs = snapshot.neighbors(node)
    if nbrs.size == 0:
        return 0.0
    weights = _leadership(profiles)[nbrs]
    lam = weights.sum()
    if lam <= 0:
        return 0.0
    diffs = wrap(trends[nbrs] - trends[node])
    return float(np.dot(weights, diffs) / lam)


def trend_step(theta: float, impact: float, profile: PersonalityProfile, noise: float) -> float:
    """One trend update: ``wrap(theta + r * impact + sigma * noise)``."""
    for name, value in (("theta", theta), ("impact", impact), ("noise", noise)):
        _finite(name, value)
    return wrap_angle(theta + profile.agreeableness * impact + profile.neuroticism * noise)


def position_step(state: OpinionState, params: SystemParams) -> tuple[float, float]:
    z, c = state.position
    v = params.velocity
    return (z + v * math.cos(state.trend), c + v * math.sin(state.trend))


def tie_probability(x_i, x_j, b_i: float, b_j: float, params: SystemParams,
                    b_min: float = B_MIN) -> float:
    """Gaussian-affinity tie probability between two opinions."""
    if b_i < b_min or b_j < b_min:
        raise DomainError(f"openness below {b_min}: ({b_i}, {b_j})")
    dz = float(x_i[0]) - float(x_j[0])
    dc = float(x_i[1]) - float(x_j[1])
    return math.exp(-(dz * dz + dc * dc) / (params.xi ** 2 * (b_i * b_j)))


# ---------------------------------------------------------------------------
# bulk (vectorised) forms used by the simulator, trainer and evaluator
# ---------------------------------------------------------------------------


def pairwise_sq_dist(x: np.ndarray) -> np.ndarray:
    d = x[:, None, :] - x[None, :, :]
    return np.einsum("ijk,ijk->ij", d, d)


def tie_exponent(x: np.ndarray, b: np.ndarray, params: SystemParams) -> np.ndarray:
    """Matrix ``q`` with ``p = exp(-q)`` for every ordered pair."""
    return pairwise_sq_dist(x) / (params.xi ** 2 * np.outer(b, b))


def tie_probabilities(x: np.ndarray, b: np.ndarray, params: SystemParams) -> np.ndarray:
    return np.exp(-tie_exponent(x, b, params))


def social_impacts(adj: np.ndarray, trends: np.ndarray, leadership: np.ndarray):
    """Impact on every node at once.

    ``adj`` may be boolean (an observed graph) or real-valued (expected
    adjacency, e.g. tie probabilities).  Returns ``(impact, lam, diffs)``
    where ``diffs[i, k] = wrap(theta_k - theta_i)`` and ``lam[i]`` is the
    weight total of node ``i``.
    """
    weights = adj * leadership[None, :]
    np.fill_diagonal(weights, 0.0)
    lam = weights.sum(axis=1)
    diffs = wrap(trends[None, :] - trends[:, None])
    num = (weights * diffs).sum(axis=1)
    safe = lam > 0
    impact = np.zeros_like(lam)
    impact[safe] = num[safe] / lam[safe]
    return impact, lam, diffs


def propagate_positions(x0: np.ndarray, trends: np.ndarray, velocity: float) -> np.ndarray:
    """Positions at every moment from the initial opinions and the trend sequence.

    ``trends`` has shape ``(T, N)``; the result has shape ``(T, N, 2)`` with
    ``x[t] = x[t-1] + v * (cos theta[t-1], sin theta[t-1])``.
    """
    steps = velocity * np.stack([np.cos(trends[:-1]), np.sin(trends[:-1])], axis=-1)
    return np.cumsum(np.concatenate([x0[None], steps]), axis=0)
