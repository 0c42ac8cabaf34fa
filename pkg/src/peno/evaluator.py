"""Evaluation protocols: tie forecasting, AUC, span-AUC curves, personality
buckets, leader extraction and the dispersion metrics of simulated traces."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from . import rng as _rng
from .core import DomainError, NetworkSnapshot, as_snapshot_list, social_impacts, wrap
from .simulator import EvolutionTrace, tie_probability_matrix
from .trainer import ModelParams


class UndefinedAUCError(DomainError):
    """AUC requested on labels that are all positive or all negative."""


@dataclass(frozen=True)
class PredictionTask:
    observed_until: int
    horizon: int
    pairs: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        if self.observed_until < 0:
            raise DomainError("observed_until must be >= 0")


@dataclass
class PairScores:
    """Scores for a set of unordered pairs ``(i[k], j[k])`` at one moment."""

    i: np.ndarray
    j: np.ndarray
    score: np.ndarray

    def __len__(self):
        return self.score.shape[0]


def all_pairs(n: int):
    return np.triu_indices(n, 1)


def _table(mat: np.ndarray, pairs) -> PairScores:
    i, j = pairs
    return PairScores(i, j, mat[i, j].copy())


# ---------------------------------------------------------------------------
# forecasting
# ---------------------------------------------------------------------------


def _advance(x, theta, prob, params: ModelParams, noise=None):
    impact, _, _ = social_impacts(prob, theta, params.profiles.l)
    new_theta = theta + params.profiles.r * impact
    if noise is not None:
        new_theta = new_theta + params.profiles.sigma * noise
    v = params.system.velocity
    return x + v * np.column_stack([np.cos(theta), np.sin(theta)]), wrap(new_theta)


def rollout_probabilities(params: ModelParams, until: int, mode: str = "expected",
                          rollouts: int = 1, seed: int = 0) -> dict[int, np.ndarray]:
    """Tie-probability matrices for moments ``t0 + 1 .. until``.

    ``t0`` is the last moment covered by ``params``.  In ``expected`` mode the
    trend noise is dropped and social impact is taken over the expected
    adjacency (the tie-probability matrix).  In ``montecarlo`` mode each of
    ``rollouts`` runs samples ties and trend noise, and the probabilities are
    averaged across runs.
    """
    t0 = params.moments - 1
    if until <= t0:
        return {}
    x_last = params.positions[t0]
    th_last = params.trends[t0]
    b = params.profiles.b
    n = params.node_count
    if mode == "expected":
        out = {}
        x, th = x_last, th_last
        prob = tie_probability_matrix(x, b, params.system)
        for t in range(t0 + 1, until + 1):
            x, th = _advance(x, th, prob, params)
            prob = tie_probability_matrix(x, b, params.system)
            out[t] = prob
        return out
    if mode != "montecarlo":
        raise DomainError(f"unknown forecast mode {mode!r}")
    if rollouts < 1:
        raise DomainError("rollouts must be >= 1")
    acc = {t: np.zeros((n, n)) for t in range(t0 + 1, until + 1)}
    iu = np.triu_indices(n, 1)
    for k in range(rollouts):
        x, th = x_last, th_last
        prob = tie_probability_matrix(x, b, params.system)
        for t in range(t0 + 1, until + 1):
            gen = _rng.substream(seed, _rng.FORECAST, k, t)
            adj = np.zeros((n, n))
            adj[iu] = gen.random(iu[0].size) < prob[iu]
            adj = adj + adj.T
            x, th = _advance(x, th, adj, params, noise=gen.standard_normal(n))
            prob = tie_probability_matrix(x, b, params.system)
            acc[t] += prob
    return {t: a / rollouts for t, a in acc.items()}


def forecast_scores(params: ModelParams, task: PredictionTask, mode: str = "expected",
                    rollouts: int = 1, seed: int = 0) -> dict[int, PairScores]:
    """Pair scores for moments ``observed_until + 1 .. observed_until + horizon``.

    ``params`` must end at or before ``observed_until``; the model is rolled
    forward from its last moment.
    """
    t0 = params.moments - 1
    if task.observed_until < t0:
        raise DomainError(f"params run to moment {t0}, past observed_until={task.observed_until}")
    end = task.observed_until + task.horizon
    pairs = task.pairs if task.pairs is not None else all_pairs(params.node_count)
    probs = rollout_probabilities(params, end, mode, rollouts, seed)
    return {t: _table(probs[t], pairs) for t in range(task.observed_until + 1, end + 1)}


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------


def auc(scores: PairScores, truth: NetworkSnapshot) -> float:
    """Probability that a random present pair outranks a random absent one (ties count half)."""
    labels = truth.adjacency()[scores.i, scores.j]
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError(f"AUC undefined with {n_pos} positive and {n_neg} negative pairs")
    ranks = rankdata(scores.score)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


Scorer = Callable[[int, int], Mapping[int, PairScores]]


def model_scorer(params: ModelParams, mode="expected", rollouts=1, seed=0, pairs=None) -> Scorer:
    """Scorer rolling ``params`` forward; rollouts are computed once and shared."""
    cache: dict[int, np.ndarray] = {}
    scope = pairs if pairs is not None else all_pairs(params.node_count)

    def score(t_star, horizon):
        end = t_star + horizon
        if end not in cache and (not cache or end > max(cache)):
            cache.update(rollout_probabilities(params, end, mode, rollouts, seed))
        return {t: _table(cache[t], scope) for t in range(t_star + 1, end + 1)}

    return score


def last_graph_scorer(truth, pairs=None) -> Scorer:
    """Baseline: a pair scores 1 if it was tied at ``t_star``, else 0."""
    snaps = as_snapshot_list(truth)
    scope = pairs if pairs is not None else all_pairs(snaps[0].node_count)

    def score(t_star, horizon):
        adj = snaps[t_star].adjacency().astype(float)
        return {t: _table(adj, scope) for t in range(t_star + 1, t_star + horizon + 1)}

    return score


def random_scorer(n: int, seed: int = 0, pairs=None) -> Scorer:
    """Baseline: independent uniform scores, fixed per (window, moment)."""
    scope = pairs if pairs is not None else all_pairs(n)

    def score(t_star, horizon):
        out = {}
        for t in range(t_star + 1, t_star + horizon + 1):
            gen = _rng.substream(seed, _rng.EVAL, t_star, t)
            out[t] = PairScores(scope[0], scope[1], gen.random(scope[0].size))
        return out

    return score


def constant_scorer(n: int, pairs=None) -> Scorer:
    scope = pairs if pairs is not None else all_pairs(n)

    def score(t_star, horizon):
        return {t: PairScores(scope[0], scope[1], np.zeros(scope[0].size))
                for t in range(t_star + 1, t_star + horizon + 1)}

    return score


@dataclass
class SpanAUC:
    horizon: int
    mean_auc: float
    windows: int


def admissible_windows(first: int, moments: int, horizon: int) -> list[int]:
    return list(range(first, moments - horizon))


def span_auc_curve(params, truth, horizons: Sequence[int], scorer: Scorer | None = None,
                   threads: int = 1, **forecast) -> list[SpanAUC]:
    """Mean AUC per horizon over every window ``(t*, t* + h]`` in the data.

    ``params`` fixes the first admissible ``t*`` (its last fitted moment).
    Within a window the per-moment AUCs are averaged, then windows are
    averaged.  Moments whose truth has no positive (or no negative) pair
    are skipped.
    """
    snaps = as_snapshot_list(truth)
    first = params.moments - 1
    if scorer is None:
        scorer = model_scorer(params, **forecast)
    # warm the shared rollout cache once, serially
    if len(snaps) - 1 > first:
        scorer(first, len(snaps) - 1 - first)
    out = []
    for h in horizons:
        wins = admissible_windows(first, len(snaps), h)
        if not wins:
            raise DomainError(f"no admissible window for horizon {h}")

        def window_auc(t_star, h=h):
            vals = []
            for t, sc in scorer(t_star, h).items():
                try:
                    vals.append(auc(sc, snaps[t]))
                except UndefinedAUCError:
                    continue
            return float(np.mean(vals)) if vals else math.nan

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                per_window = list(pool.map(window_auc, wins))
        else:
            per_window = [window_auc(w) for w in wins]
        per_window = [a for a in per_window if not math.isnan(a)]
        if not per_window:
            raise DomainError(f"no window with defined AUC for horizon {h}")
        out.append(SpanAUC(h, float(np.mean(per_window)), len(per_window)))
    return out


# ---------------------------------------------------------------------------
# personality profiling
# ---------------------------------------------------------------------------

GENRES = ("agreeableness", "leadership", "neuroticism", "openness")
_COLUMNS = {"agreeableness": "r", "leadership": "l", "neuroticism": "sigma", "openness": "b"}


@dataclass
class GenreBuckets:
    high: int
    medium: int
    low: int
    mean: float


def bucket_values(values, margin: float = 0.2) -> GenreBuckets:
    """High above ``(1 + margin) * mean``, low below ``(1 - margin) * mean``, else medium."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DomainError("cannot bucket an empty group")
    m = float(values.mean())
    high = int((values > (1 + margin) * m).sum())
    low = int((values < (1 - margin) * m).sum())
    return GenreBuckets(high, values.size - high - low, low, m)


def bucket_personalities(profiles, margin: float = 0.2) -> dict[str, GenreBuckets]:
    return {g: bucket_values(getattr(profiles, _COLUMNS[g]), margin) for g in GENRES}


def top_leaders(leadership, periods: Mapping[int, Sequence], k: int) -> dict:
    """Per period, the ``k`` members with highest leadership (ties: lower node id first).

    ``periods`` maps a node index to the periods it belongs to.
    """
    if k < 1:
        raise DomainError("k must be positive")
    leadership = np.asarray(leadership, dtype=float)
    members: dict = {}
    for node, ps in periods.items():
        for p in ps:
            members.setdefault(p, []).append(int(node))
    return {p: sorted(nodes, key=lambda n: (-leadership[n], n))[:k]
            for p, nodes in sorted(members.items(), key=lambda kv: str(kv[0]))}


# ---------------------------------------------------------------------------
# dispersion of simulated traces
# ---------------------------------------------------------------------------


def mean_pairwise_distance(positions: np.ndarray) -> float:
    n = positions.shape[0]
    if n < 2:
        raise DomainError("mean pairwise distance needs at least two nodes")
    d = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    return float(dist[np.triu_indices(n, 1)].mean())


def circular_variance(trends) -> float:
    trends = np.asarray(trends, dtype=float)
    return float(1.0 - math.hypot(np.cos(trends).mean(), np.sin(trends).mean()))


def dispersion_metrics(trace: EvolutionTrace) -> list[tuple[float, float]]:
    """Per moment: (mean pairwise opinion distance, circular variance of trends)."""
    return [(mean_pairwise_distance(trace.positions[t]), circular_variance(trace.trends[t]))
            for t in range(trace.moments)]


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _writer(path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def write_span_auc(rows: Sequence[SpanAUC], path):
    fh, w = _writer(path)
    with fh:
        w.writerow(["horizon", "mean_auc", "windows"])
        for r in rows:
            w.writerow([r.horizon, format(r.mean_auc, ".17g"), r.windows])


def write_buckets(report: Mapping[str, GenreBuckets], path):
    fh, w = _writer(path)
    with fh:
        w.writerow(["genre", "high", "medium", "low", "mean"])
        for g, b in report.items():
            w.writerow([g, b.high, b.medium, b.low, format(b.mean, ".17g")])


def write_leaders(leaders: Mapping, leadership, path, node_ids=None):
    fh, w = _writer(path)
    with fh:
        w.writerow(["period", "rank", "node", "leadership"])
        for p, nodes in leaders.items():
            for rank, n in enumerate(nodes, 1):
                w.writerow([p, rank, node_ids[n] if node_ids else n,
                            format(float(leadership[n]), ".17g")])


def write_dispersion(metrics, path):
    fh, w = _writer(path)
    with fh:
        w.writerow(["t", "mean_pairwise_distance", "circular_variance"])
        for t, (d, cv) in enumerate(metrics):
            w.writerow([t, format(d, ".9g"), format(cv, ".9g")])
