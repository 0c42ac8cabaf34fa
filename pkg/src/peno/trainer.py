"""Maximum-likelihood inference of opinions and personalities.

The objective is the joint log-likelihood of an observed snapshot series:
every pair at every moment contributes a Bernoulli tie term, and every
trend transition contributes a Gaussian term.  Positions after ``t = 0`` are
never free; they follow from the initial opinions and the trend sequence.

Training is block-coordinate stochastic gradient ascent.  Each round updates
openness, then opinions and trends moment by moment, then agreeableness,
leadership and neuroticism.  Tie terms are estimated from sampled present
ties and sampled absent pairs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

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
    as_snapshot_list,
    propagate_positions,
    social_impacts,
    wrap,
)

log = logging.getLogger(__name__)

P_MAX = 1.0 - 1e-12
# p <= P_MAX  <=>  q >= Q_MIN
Q_MIN = -math.log1p(-1e-12)
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class Tie(NamedTuple):
    i: int
    j: int
    t: int
    present: bool = True


@dataclass
class ModelParams:
    """Fitted (or true) latent state of a series.

    ``x0`` holds the opinions at ``t = 0`` with shape ``(N, 2)``; ``trends``
    has shape ``(T, N)``.  Positions at later moments are derived.
    """

    profiles: Personalities
    x0: np.ndarray
    trends: np.ndarray
    system: SystemParams = field(default_factory=SystemParams)

    def __post_init__(self):
        self.x0 = np.array(self.x0, dtype=float)
        self.trends = wrap(np.array(self.trends, dtype=float))
        if self.trends.ndim != 2 or self.x0.shape != (self.trends.shape[1], 2):
            raise DomainError("x0 must be (N, 2) and trends (T, N)")
        if len(self.profiles) != self.x0.shape[0]:
            raise DomainError("profile count does not match N")

    @property
    def node_count(self):
        return self.x0.shape[0]

    @property
    def moments(self):
        return self.trends.shape[0]

    @property
    def positions(self) -> np.ndarray:
        return propagate_positions(self.x0, self.trends, self.system.velocity)

    def opinions(self, t: int) -> list[OpinionState]:
        x = self.positions[t]
        return [OpinionState(tuple(x[n]), self.trends[t, n]) for n in range(self.node_count)]

    def copy(self) -> "ModelParams":
        return ModelParams(self.profiles.copy(), self.x0.copy(), self.trends.copy(), self.system)

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return (self.profiles == other.profiles and np.array_equal(self.x0, other.x0)
                and np.array_equal(self.trends, other.trends) and self.system == other.system)

    @classmethod
    def from_trace(cls, trace, moments: int | None = None) -> "ModelParams":
        """Ground-truth parameters of a simulated trace, optionally truncated."""
        T = trace.moments if moments is None else moments
        return cls(trace.profiles.copy(), trace.positions[0].copy(),
                   trace.trends[:T].copy(), trace.system)


def _check(params: ModelParams, snaps: Sequence[NetworkSnapshot]):
    if len(snaps) != params.moments:
        raise DomainError(f"params cover {params.moments} moments, observed {len(snaps)}")
    if snaps[0].node_count != params.node_count:
        raise DomainError(f"params cover {params.node_count} nodes, "
                          f"observed {snaps[0].node_count}")


# ---------------------------------------------------------------------------
# likelihood
# ---------------------------------------------------------------------------


def _edge_terms(x, b, adj, xi):
    """Log-likelihood of one snapshot and ``dLL/dq`` for every ordered pair.

    Both returned matrices are symmetric with a zero diagonal; the scalar
    counts each unordered pair once.
    """
    d = x[:, None, :] - x[None, :, :]
    denom = xi * xi * np.outer(b, b)
    q = np.einsum("ijk,ijk->ij", d, d) / denom
    qc = np.maximum(q, Q_MIN)
    with np.errstate(divide="ignore", over="ignore"):
        term = np.where(adj, -qc, np.log(-np.expm1(-qc)))
        g = np.where(adj, -1.0, 1.0 / np.expm1(qc))
    g[q <= Q_MIN] = 0.0
    np.fill_diagonal(term, 0.0)
    np.fill_diagonal(g, 0.0)
    return 0.5 * term.sum(), g, q, d, denom


def _transition(theta_prev, theta_now, adj_prev, profiles):
    """Pieces of the Gaussian trend term for one transition."""
    impact, lam, diffs = social_impacts(adj_prev, theta_prev, profiles.l)
    mu = theta_prev + profiles.r * impact
    res = wrap(theta_now - mu)
    return impact, lam, diffs, res


def _transition_ll(res, sigma):
    return float(np.sum(-HALF_LOG_2PI - np.log(sigma) - res * res / (2.0 * sigma * sigma)))


def log_likelihood(params: ModelParams, observed) -> float:
    """Joint log-likelihood of the observed series under ``params``.

    Tie probabilities are capped at ``1 - 1e-12`` so both tie terms stay
    finite.  Trend residuals are wrapped into ``(-pi, pi]``.
    """
    snaps = as_snapshot_list(observed)
    _check(params, snaps)
    x = params.positions
    b = params.profiles.b
    total = 0.0
    for t, snap in enumerate(snaps):
        total += _edge_terms(x[t], b, snap.adjacency(), params.system.xi)[0]
    for t in range(1, params.moments):
        res = _transition(params.trends[t - 1], params.trends[t],
                          snaps[t - 1].adjacency(), params.profiles)[3]
        total += _transition_ll(res, params.profiles.sigma)
    return float(total)


# ---------------------------------------------------------------------------
# per-tie and per-node gradients
# ---------------------------------------------------------------------------


def _tie_factor(tie: Tie, params: ModelParams, x=None):
    """``(dlog/dq, q, x_i - x_j, xi^2 b_i b_j)`` for one tie."""
    if x is None:
        x = params.positions[tie.t]
    b = params.profiles.b
    d = x[tie.i] - x[tie.j]
    denom = params.system.xi ** 2 * b[tie.i] * b[tie.j]
    q = float(d @ d) / denom
    if q <= Q_MIN:
        g = 0.0
    elif tie.present:
        g = -1.0
    else:
        g = 1.0 / math.expm1(q)
    return g, q, d, denom


def openness_gradient(tie: Tie, params: ModelParams) -> tuple[float, float]:
    """Derivative of the tie's log-probability with respect to ``b_i`` and ``b_j``.

    For a present tie this is ``q / b_i`` with ``q = |x_i - x_j|^2 / (xi^2 b_i b_j)``;
    an absent pair scales it by ``-p / (1 - p)``.
    """
    g, q, _, _ = _tie_factor(tie, params)
    b = params.profiles.b
    return -g * q / b[tie.i], -g * q / b[tie.j]


def initial_opinion_gradient(tie: Tie, params: ModelParams) -> tuple[float, float, float, float]:
    """``(d/dz_i, d/dc_i, d/dz_j, d/dc_j)`` of the tie's log-probability.

    The derivative with respect to the moment-``t`` position equals the one
    with respect to ``x^<0>`` since later positions are shifted copies of it.
    """
    g, _, d, denom = _tie_factor(tie, params)
    gi = g * 2.0 * d / denom
    return float(gi[0]), float(gi[1]), float(-gi[0]), float(-gi[1])


def trend_tie_gradient(tie: Tie, params: ModelParams, moment: int | None = None) -> float:
    """Derivative of a tie's log-probability with respect to ``theta_i`` at ``moment``.

    ``moment`` defaults to ``tie.t - 1``, the trend that produced the tie's
    positions.  Any ``moment < tie.t`` gives the same form since each later
    position moves by ``v (cos theta, sin theta)`` per earlier trend.
    """
    t = tie.t - 1 if moment is None else moment
    if not 0 <= t < tie.t:
        raise DomainError(f"trend moment {t} does not precede tie moment {tie.t}")
    g, _, d, denom = _tie_factor(tie, params)
    th = params.trends[t, tie.i]
    v = params.system.velocity
    return float(g * 2.0 * v / denom * (d[0] * -math.sin(th) + d[1] * math.cos(th)))


def trend_prior_gradient(node: int, moment: int, params: ModelParams, observed) -> float:
    """Pull of ``theta_node`` at ``moment`` toward its propagation mean.

    Only the Gaussian term of ``moment`` itself is differentiated; the mean is
    held fixed.  Zero at ``moment = 0``, which has no predecessor.
    """
    if moment == 0:
        return 0.0
    snaps = as_snapshot_list(observed)
    res = _transition(params.trends[moment - 1], params.trends[moment],
                      snaps[moment - 1].adjacency(), params.profiles)[3]
    return float(-res[node] / params.profiles.sigma[node] ** 2)


def trend_gradient(node: int, moment: int, params: ModelParams, observed) -> float:
    """Exact ``dLL/dtheta_node^<moment>`` of the full log-likelihood."""
    return float(gradients(params, observed).trends[moment, node])


def personality_gradients(node: int, params: ModelParams, observed,
                          moment: int | None = None) -> tuple[float, float, float]:
    """``(d/dr, d/dsigma, d/dl)`` for one node.

    With ``moment`` given, only the transition into that moment contributes
    (``r`` and ``sigma`` through the node's own trend term, ``l`` through the
    terms of its neighbours at ``moment - 1``).  Otherwise all transitions.
    """
    snaps = as_snapshot_list(observed)
    _check(params, snaps)
    moments = range(1, params.moments) if moment is None else [moment]
    dr = ds = dl = 0.0
    for s in moments:
        if not 1 <= s < params.moments:
            raise DomainError(f"no transition into moment {s}")
        g = _prior_grads_at(params, snaps[s - 1].adjacency(), s)
        dr += g[2][node]
        ds += g[3][node]
        dl += g[4][node]
    return float(dr), float(ds), float(dl)


def _prior_grads_at(params: ModelParams, adj_prev, s, node_weight=None):
    """Gradients of the transition term into moment ``s``.

    Returns ``(d theta^s, d theta^(s-1), dr, dsigma, dl)``, one array each.
    ``node_weight`` scales each node's own Gaussian term (default 1).
    """
    prof = params.profiles
    impact, lam, diffs, res = _transition(params.trends[s - 1], params.trends[s], adj_prev, prof)
    c = 1.0 if node_weight is None else node_weight
    sigma2 = prof.sigma ** 2
    w = c * res / sigma2
    has = lam > 0
    safe_lam = np.where(has, lam, 1.0)
    a = np.asarray(adj_prev, dtype=float)
    np.fill_diagonal(a, 0.0)
    # row j of m holds d impact_j / d theta_k for k != j
    m = a * prof.l[None, :] / safe_lam[:, None]
    m[~has] = 0.0
    d_now = -w
    d_prev = w * (1.0 - prof.r * has) + m.T @ (w * prof.r)
    dr = w * impact
    dsig = c * (-1.0 / prof.sigma + res * res / (prof.sigma * sigma2))
    coef = np.where(has, w * prof.r / safe_lam, 0.0)
    dl = (coef[:, None] * a * (diffs - impact[:, None])).sum(axis=0)
    return d_now, d_prev, dr, dsig, dl


@dataclass
class Gradients:
    b: np.ndarray
    x0: np.ndarray
    trends: np.ndarray
    r: np.ndarray
    sigma: np.ndarray
    l: np.ndarray  # noqa: E741


def _trend_tie_part(params: ModelParams, gx: np.ndarray) -> np.ndarray:
    """Map position gradients ``(T, N, 2)`` to trend gradients ``(T, N)``."""
    # theta^t moves every x^s with s > t by v (cos, sin)
    tail = np.cumsum(gx[::-1], axis=0)[::-1]
    out = np.zeros(params.trends.shape)
    th = params.trends[:-1]
    v = params.system.velocity
    out[:-1] = v * (tail[1:, :, 0] * -np.sin(th) + tail[1:, :, 1] * np.cos(th))
    return out


def gradients(params: ModelParams, observed) -> Gradients:
    """Exact gradient of :func:`log_likelihood` with respect to every parameter."""
    snaps = as_snapshot_list(observed)
    _check(params, snaps)
    T, N = params.trends.shape
    x = params.positions
    b = params.profiles.b
    gb = np.zeros(N)
    gx = np.zeros((T, N, 2))
    for t, snap in enumerate(snaps):
        _, g, q, d, denom = _edge_terms(x[t], b, snap.adjacency(), params.system.xi)
        gb += (g * -q).sum(axis=1) / b
        gx[t] = np.einsum("ij,ijk->ik", g * 2.0 / denom, d)
    gt = _trend_tie_part(params, gx)
    gr = np.zeros(N)
    gs = np.zeros(N)
    gl = np.zeros(N)
    for s in range(1, T):
        d_now, d_prev, dr, dsig, dl = _prior_grads_at(params, snaps[s - 1].adjacency(), s)
        gt[s] += d_now
        gt[s - 1] += d_prev
        gr += dr
        gs += dsig
        gl += dl
    return Gradients(b=gb, x0=gx.sum(axis=0), trends=gt, r=gr, sigma=gs, l=gl)


# ---------------------------------------------------------------------------
# sampled tie gradients
# ---------------------------------------------------------------------------


class TieSample(NamedTuple):
    t: np.ndarray
    i: np.ndarray
    j: np.ndarray
    present: np.ndarray
    weight: np.ndarray

    def __len__(self):
        return self.t.shape[0]


def _sampled_tie_grads(params: ModelParams, sample: TieSample, x=None):
    """Weighted sum of tie-term gradients over a sample.

    Returns ``(d b, d x)`` with ``d x`` of shape ``(T, N, 2)``.
    """
    T, N = params.trends.shape
    gb = np.zeros(N)
    gx = np.zeros((T, N, 2))
    if len(sample) == 0:
        return gb, gx
    if x is None:
        x = params.positions
    b = params.profiles.b
    d = x[sample.t, sample.i] - x[sample.t, sample.j]
    denom = params.system.xi ** 2 * b[sample.i] * b[sample.j]
    q = np.einsum("ij,ij->i", d, d) / denom
    live = q > Q_MIN
    with np.errstate(divide="ignore", over="ignore"):
        g = np.where(sample.present, -1.0, 1.0 / np.expm1(np.where(live, q, 1.0)))
    g = np.where(live, g, 0.0) * sample.weight
    np.add.at(gb, sample.i, -g * q / b[sample.i])
    np.add.at(gb, sample.j, -g * q / b[sample.j])
    gpos = (g * 2.0 / denom)[:, None] * d
    np.add.at(gx, (sample.t, sample.i), gpos)
    np.add.at(gx, (sample.t, sample.j), -gpos)
    return gb, gx


class _TiePool:
    """Present ties and absent pairs of a series, for uniform sampling."""

    def __init__(self, snaps: Sequence[NetworkSnapshot]):
        self.n = snaps[0].node_count
        self.T = len(snaps)
        parts = [np.column_stack([np.full(len(s), t), s.edges]) for t, s in enumerate(snaps)
                 if len(s)]
        self.pos = np.vstack(parts) if parts else np.zeros((0, 3), dtype=np.int64)
        self.pos_by_t = [np.flatnonzero(self.pos[:, 0] == t) for t in range(self.T)]
        self.pairs = self.n * (self.n - 1) // 2
        self.adj = np.stack([s.adjacency() for s in snaps])
        self.neg_by_t = [self.pairs - len(s) for s in snaps]

    def sample(self, gen: np.random.Generator, n_pos: int, n_neg: int, moments=None) -> TieSample:
        moments = np.arange(self.T) if moments is None else np.asarray(moments)
        pos_idx = np.concatenate([self.pos_by_t[t] for t in moments]) if len(moments) else []
        pos_idx = np.asarray(pos_idx, dtype=np.int64)
        tot_pos = pos_idx.size
        tot_neg = int(sum(self.neg_by_t[t] for t in moments))
        rows = []
        if n_pos and tot_pos:
            pick = pos_idx[gen.integers(0, tot_pos, size=n_pos)]
            p = self.pos[pick]
            rows.append((p[:, 0], p[:, 1], p[:, 2], np.ones(n_pos, bool),
                         np.full(n_pos, tot_pos / n_pos)))
        if n_neg and tot_neg:
            t, i, j = self._absent(gen, n_neg, moments)
            rows.append((t, i, j, np.zeros(n_neg, bool), np.full(n_neg, tot_neg / n_neg)))
        if not rows:
            e = np.zeros(0, dtype=np.int64)
            return TieSample(e, e, e, np.zeros(0, bool), np.zeros(0))
        return TieSample(*(np.concatenate(c) for c in zip(*rows)))

    def _absent(self, gen, count, moments):
        # rejection sampling; moments weighted by their number of absent pairs
        weights = np.array([self.neg_by_t[t] for t in moments], dtype=float)
        weights /= weights.sum()
        out_t, out_i, out_j = [], [], []
        need = count
        while need > 0:
            k = 2 * need + 16
            t = moments[gen.choice(len(moments), size=k, p=weights)]
            i = gen.integers(0, self.n, size=k)
            j = gen.integers(0, self.n - 1, size=k)
            j = j + (j >= i)
            ok = ~self.adj[t, i, j]
            t, i, j = t[ok][:need], i[ok][:need], j[ok][:need]
            out_t.append(t)
            out_i.append(np.minimum(i, j))
            out_j.append(np.maximum(i, j))
            need -= t.size
        return np.concatenate(out_t), np.concatenate(out_i), np.concatenate(out_j)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

BLOCK_ORDERS = {
    "sections": ("openness", "opinions", "personality"),
    "prose": ("openness", "personality", "opinions"),
}


@dataclass(frozen=True)
class TrainingConfig:
    rounds: int = 5
    learning_rate: float = 0.01
    decay: float = 0.9
    positive_samples_per_step: int = 256
    negative_samples_per_step: int = 256
    steps_per_block: int = 50
    steps_per_moment: int = 5
    system: SystemParams = SystemParams(xi=0.6, velocity=3e-3)
    sigma_min: float = SIGMA_MIN
    b_min: float = B_MIN
    block_order: str = "sections"
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise DomainError(f"rounds must be >= 1, got {self.rounds}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise DomainError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 < self.decay <= 1:
            raise DomainError(f"decay must lie in (0, 1], got {self.decay}")
        for name in ("positive_samples_per_step", "negative_samples_per_step",
                     "steps_per_block", "steps_per_moment"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")
        if self.block_order not in BLOCK_ORDERS:
            raise DomainError(f"block_order must be one of {sorted(BLOCK_ORDERS)}")
        _rng.check_seed(self.seed)


@dataclass
class RoundLog:
    round: int
    log_likelihood: float
    learning_rate: float


def initial_params(n: int, T: int, config: TrainingConfig) -> ModelParams:
    gen = _rng.substream(config.seed, _rng.TRAIN, 0)
    x0 = gen.normal(0.0, 1.0, size=(n, 2))
    trends = wrap(gen.uniform(-math.pi, math.pi, size=(T, n)))
    prof = Personalities(np.full(n, 0.5), np.full(n, 1.0), np.full(n, 1.0), np.full(n, 1.0))
    prof.clamp_(config.sigma_min, config.b_min)
    return ModelParams(prof, x0, trends, config.system)


class _Adam:
    """Per-coordinate step normalisation for the ascent updates.

    Raw gradient magnitudes span several orders across parameter families,
    so each block keeps first and second moment estimates and moves every
    coordinate by roughly the learning rate.
    """

    def __init__(self, shape, rows=False, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        # with ``rows`` each leading row is stepped on its own schedule
        self.k = np.zeros(shape[0], dtype=np.int64) if rows else 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, grad, lr, row=None):
        m = self.m if row is None else self.m[row]
        v = self.v if row is None else self.v[row]
        m *= self.beta1
        m += (1 - self.beta1) * grad
        v *= self.beta2
        v += (1 - self.beta2) * grad * grad
        if row is None:
            self.k += 1
            k = self.k
        else:
            self.k[row] += 1
            k = self.k[row]
        mhat = m / (1 - self.beta1 ** k)
        vhat = v / (1 - self.beta2 ** k)
        return lr * mhat / (np.sqrt(vhat) + self.eps)


# block ids inside the TRAIN substream counters
_OPENNESS, _OPINIONS, _TRENDS, _PERSONALITY = 1, 2, 3, 4


class _Trainer:
    def __init__(self, snaps, config: TrainingConfig, params: ModelParams):
        self.snaps = snaps
        self.adj = [s.adjacency() for s in snaps]
        self.cfg = config
        self.p = params
        self.pool = _TiePool(snaps)
        T, N = params.trends.shape
        self.opt_b = _Adam((N,))
        self.opt_x = _Adam((N, 2))
        self.opt_t = _Adam((T, N), rows=True)
        self.opt_pers = _Adam((3, N))

    def _gen(self, rnd, block, *counters):
        return _rng.substream(self.cfg.seed, _rng.TRAIN, rnd, block, *counters)

    def _sample(self, gen, moments=None):
        return self.pool.sample(gen, self.cfg.positive_samples_per_step,
                                self.cfg.negative_samples_per_step, moments)

    def openness(self, rnd, lr):
        prof = self.p.profiles
        for k in range(self.cfg.steps_per_block):
            gb, _ = _sampled_tie_grads(self.p, self._sample(self._gen(rnd, _OPENNESS, k)))
            prof.b += self.opt_b.step(gb, lr)
            prof.clamp_(self.cfg.sigma_min, self.cfg.b_min)

    def opinions(self, rnd, lr):
        p = self.p
        T = p.moments
        for k in range(self.cfg.steps_per_block):
            _, gx = _sampled_tie_grads(p, self._sample(self._gen(rnd, _OPINIONS, k)))
            p.x0 += self.opt_x.step(gx.sum(axis=0), lr)
        v = p.system.velocity
        for t in range(T - 1):
            later = np.arange(t + 1, T)
            for k in range(self.cfg.steps_per_moment):
                x = p.positions
                sample = self._sample(self._gen(rnd, _TRENDS, t, k), later)
                _, gx = _sampled_tie_grads(p, sample, x)
                tail = gx[t + 1:].sum(axis=0)
                th = p.trends[t]
                g = v * (tail[:, 0] * -np.sin(th) + tail[:, 1] * np.cos(th))
                g += self._prior_trend_grad(t)
                p.trends[t] = wrap(th + self.opt_t.step(g, lr, row=t))
        # the last trend only enters the final transition term
        for k in range(self.cfg.steps_per_moment if T > 1 else 0):
            g = self._prior_trend_grad(T - 1)
            p.trends[T - 1] = wrap(p.trends[T - 1] + self.opt_t.step(g, lr, row=T - 1))

    def _prior_trend_grad(self, t):
        p = self.p
        g = np.zeros(p.node_count)
        if t >= 1:
            g += _prior_grads_at(p, self.adj[t - 1], t)[0]
        if t + 1 < p.moments:
            g += _prior_grads_at(p, self.adj[t], t + 1)[1]
        return g

    def personality(self, rnd, lr):
        p = self.p
        T, N = p.trends.shape
        count = self.cfg.positive_samples_per_step + self.cfg.negative_samples_per_step
        if T < 2 or count == 0:
            return
        prof = p.profiles
        for k in range(self.cfg.steps_per_block):
            gen = self._gen(rnd, _PERSONALITY, k)
            # (node, transition) contexts drawn uniformly, reweighted to the full sum
            flat = gen.integers(0, N * (T - 1), size=count)
            hits = np.bincount(flat, minlength=N * (T - 1)).reshape(T - 1, N)
            scale = N * (T - 1) / count
            grad = np.zeros((3, N))
            for s in np.flatnonzero(hits.any(axis=1)) + 1:
                _, _, dr, dsig, dl = _prior_grads_at(p, self.adj[s - 1], s,
                                                      hits[s - 1] * scale)
                grad[0] += dr
                grad[1] += dsig
                grad[2] += dl
            step = self.opt_pers.step(grad, lr)
            prof.r += step[0]
            prof.sigma += step[1]
            prof.l += step[2]
            prof.clamp_(self.cfg.sigma_min, self.cfg.b_min)


def fit(observed, config: TrainingConfig = TrainingConfig(), init: ModelParams | None = None,
        history: list | None = None) -> ModelParams:
    """Fit model parameters to an observed snapshot series.

    Starts from ``init`` (default :func:`initial_params`) and runs
    ``config.rounds`` rounds of block-coordinate sampled ascent.  Returns the
    parameters of the round with the highest log-likelihood.  Per-round
    records are appended to ``history`` when given.
    """
    snaps = as_snapshot_list(observed)
    T = len(snaps)
    if T < 2 or snaps[0].node_count < 2:
        raise DomainError("fit needs at least 2 moments and 2 nodes")
    N = snaps[0].node_count
    if init is None:
        params = initial_params(N, T, config)
    else:
        params = init.copy()
        params.system = config.system
        _check(params, snaps)
    if config.positive_samples_per_step == 0 and config.negative_samples_per_step == 0:
        return params
    if all(len(s) == 0 for s in snaps):
        log.warning("observed series has no ties; openness will be driven to its floor")
    trainer = _Trainer(snaps, config, params)
    blocks = {"openness": trainer.openness, "opinions": trainer.opinions,
              "personality": trainer.personality}
    best, best_ll = params.copy(), log_likelihood(params, snaps)
    lr = config.learning_rate
    for rnd in range(config.rounds):
        for name in BLOCK_ORDERS[config.block_order]:
            blocks[name](rnd, lr)
        ll = log_likelihood(params, snaps)
        log.info("round %d: log-likelihood %.6g", rnd + 1, ll)
        if history is not None:
            history.append(RoundLog(rnd + 1, ll, lr))
        if ll > best_ll or rnd == 0:
            best, best_ll = params.copy(), ll
        lr *= config.decay
    return best
