import logging
import math

import numpy as np
import pytest

from peno import trainer
from peno.core import NetworkSnapshot, Personalities, SystemParams
from peno.simulator import run
from peno.trainer import (
    ModelParams,
    Tie,
    TrainingConfig,
    fit,
    gradients,
    initial_opinion_gradient,
    log_likelihood,
    openness_gradient,
    personality_gradients,
    trend_gradient,
    trend_prior_gradient,
    trend_tie_gradient,
)

from .oracles import central_difference, log_likelihood_ref, random_instance, wrap_ref
from .presets import FIT_MOMENTS, recovery_sim, recovery_training


def close(analytic, numeric, rel=1e-4, floor=1e-7):
    return abs(analytic - numeric) <= rel * max(abs(analytic), abs(numeric)) + floor


def two_nodes(x0, b=(1.0, 1.0), T=1, xi=0.6, v=0.03, trends=None):
    prof = Personalities([0.5, 0.5], [1.0, 1.0], [1.0, 1.0], list(b))
    trends = np.zeros((T, 2)) if trends is None else trends
    return ModelParams(prof, np.array(x0, dtype=float), trends, SystemParams(xi, v))


def tie_logp(params, tie):
    """Reference log-probability of one tie (or absent pair)."""
    xs = params.positions[tie.t]
    d2 = float(((xs[tie.i] - xs[tie.j]) ** 2).sum())
    b = params.profiles.b
    p = min(math.exp(-d2 / (params.system.xi ** 2 * b[tie.i] * b[tie.j])), 1 - 1e-12)
    return math.log(p) if tie.present else math.log(1 - p)


def with_b(params, i, value):
    p = params.copy()
    p.profiles.b[i] = value
    return p


# log_likelihood


def test_coincident_present_tie():
    p = two_nodes([[1.0, 1.0], [1.0, 1.0]])
    ll = log_likelihood(p, [NetworkSnapshot(2, [(0, 1)])])
    assert ll == pytest.approx(math.log(1 - 1e-12), rel=1e-6)
    assert math.isfinite(log_likelihood(p, [NetworkSnapshot(2)]))


def test_single_node_trend_terms():
    prof = Personalities([0.0], [1.0], [1.0], [1.0])
    p = ModelParams(prof, np.zeros((1, 2)), np.full((3, 1), 0.4))
    ll = log_likelihood(p, [NetworkSnapshot(1)] * 3)
    assert ll == pytest.approx(2 * -0.5 * math.log(2 * math.pi), rel=1e-14)


def test_likelihood_matches_brute_force():
    gen = np.random.default_rng(2024)
    for _ in range(50):
        params, snaps = random_instance(gen)
        got = log_likelihood(params, snaps)
        want = log_likelihood_ref(params, snaps)
        assert got == pytest.approx(want, rel=1e-10)


def test_likelihood_dimension_mismatch():
    params, snaps = random_instance(np.random.default_rng(0), n=3, T=3)
    with pytest.raises(ValueError):
        log_likelihood(params, snaps[:2])
    with pytest.raises(ValueError):
        log_likelihood(params, [NetworkSnapshot(4)] * 3)


# per-tie gradients


def test_openness_gradient_examples():
    p = two_nodes([[0.0, 0.0], [0.0, 0.0]])
    assert openness_gradient(Tie(0, 1, 0), p) == (0.0, 0.0)
    p = two_nodes([[0.0, 0.0], [0.6, 0.0]])
    gi, gj = openness_gradient(Tie(0, 1, 0), p)
    assert gi == pytest.approx(1.0) and gj == pytest.approx(1.0)
    fd = central_difference(lambda b: tie_logp(with_b(p, 0, b), Tie(0, 1, 0)), 1.0)
    assert close(gi, fd)


def test_openness_gradient_absent_tie_scaling():
    p = two_nodes([[0.0, 0.0], [0.6, 0.0]])
    prob = math.exp(-1)
    gi, _ = openness_gradient(Tie(0, 1, 0, present=False), p)
    assert gi == pytest.approx(-prob / (1 - prob) * 1.0)


def test_initial_opinion_gradient_examples():
    p = two_nodes([[0.0, 0.0], [0.0, 0.0]])
    assert initial_opinion_gradient(Tie(0, 1, 0), p) == (0.0, 0.0, 0.0, 0.0)
    p = two_nodes([[0.6, 0.0], [0.0, 0.0]])
    g = initial_opinion_gradient(Tie(0, 1, 0), p)
    assert g[0] == pytest.approx(-10 / 3)
    assert g[1] == 0.0
    assert (g[2], g[3]) == (-g[0], -g[1])


def test_trend_prior_gradient_zero_at_mean():
    prof = Personalities([0.4, 0.4], [1.0, 1.0], [0.5, 0.5], [1.0, 1.0])
    snaps = [NetworkSnapshot(2), NetworkSnapshot(2)]
    p = ModelParams(prof, np.zeros((2, 2)), np.array([[0.3, -1.0], [0.3, -1.0]]))
    assert trend_prior_gradient(0, 1, p, snaps) == 0.0
    assert trend_prior_gradient(0, 0, p, snaps) == 0.0
    p.trends[1, 0] = 0.5
    assert trend_prior_gradient(0, 1, p, snaps) < 0


def test_trend_gradient_zero_at_mean_without_later_ties():
    prof = Personalities([0.4, 0.4], [1.0, 1.0], [0.5, 0.5], [1.0, 1.0])
    snaps = [NetworkSnapshot(2)] * 3
    p = ModelParams(prof, np.array([[0.0, 0.0], [0.1, 0.0]]), np.full((3, 2), 0.3))
    # node 0 sits at its mean at t = 1 and 2; later tie terms are absent pairs only
    g = trend_gradient(0, 1, p, [NetworkSnapshot(2), NetworkSnapshot(2), NetworkSnapshot(2)])
    g_ref = central_difference(lambda a: _ll_trend(p, snaps, 0, 1, a), 0.3)
    assert close(g, g_ref)


def _ll_trend(p, snaps, node, t, value):
    q = p.copy()
    q.trends[t, node] = value
    return log_likelihood(q, snaps)


def test_personality_gradient_zeros():
    # residual equals sigma and impact is zero: both scores vanish
    prof = Personalities([0.5, 0.5], [1.0, 1.0], [0.2, 0.2], [1.0, 1.0])
    p = ModelParams(prof, np.zeros((2, 2)), np.array([[0.0, 1.0], [0.2, 1.2]]))
    dr, ds, _ = personality_gradients(0, p, [NetworkSnapshot(2)] * 2, moment=1)
    assert dr == 0.0
    assert ds == pytest.approx(0.0, abs=1e-12)


def test_r_gradient_zero_without_impact():
    prof = Personalities([0.5, 0.5], [1.0, 1.0], [0.2, 0.2], [1.0, 1.0])
    p = ModelParams(prof, np.zeros((2, 2)), np.array([[0.0, 0.0], [0.9, -0.4]]))
    dr, _, _ = personality_gradients(0, p, [NetworkSnapshot(2, [(0, 1)])] * 2, moment=1)
    assert dr == 0.0


# finite-difference checks, 100 random instances per family


def _instances(seed, count=100):
    gen = np.random.default_rng(seed)
    for _ in range(count):
        params, snaps = random_instance(gen)
        yield gen, params, snaps


def _random_tie(gen, params, snaps, t=None):
    n, T = params.node_count, params.moments
    i, j = sorted(gen.choice(n, 2, replace=False))
    t = int(gen.integers(0, T)) if t is None else t
    return Tie(int(i), int(j), t, snaps[t].has_edge(i, j))


def test_fd_openness():
    for gen, params, snaps in _instances(1):
        tie = _random_tie(gen, params, snaps)
        gi, gj = openness_gradient(tie, params)
        for node, g in ((tie.i, gi), (tie.j, gj)):
            b0 = params.profiles.b[node]
            fd = central_difference(lambda b: tie_logp(with_b(params, node, b), tie), b0)
            assert close(g, fd), (tie, g, fd)


def test_fd_initial_opinion():
    for gen, params, snaps in _instances(2):
        tie = _random_tie(gen, params, snaps)
        g = initial_opinion_gradient(tie, params)
        for k, (node, axis) in enumerate([(tie.i, 0), (tie.i, 1), (tie.j, 0), (tie.j, 1)]):
            def f(val):
                q = params.copy()
                q.x0[node, axis] = val
                return tie_logp(q, tie)
            fd = central_difference(f, params.x0[node, axis])
            assert close(g[k], fd), (tie, k, g[k], fd)


def test_fd_trend_tie_term():
    for gen, params, snaps in _instances(3):
        t = int(gen.integers(1, params.moments))
        tie = _random_tie(gen, params, snaps, t)
        moment = int(gen.integers(0, t))
        g = trend_tie_gradient(tie, params, moment)

        def f(val):
            q = params.copy()
            q.trends[moment, tie.i] = val
            return tie_logp(q, tie)
        fd = central_difference(f, params.trends[moment, tie.i])
        assert close(g, fd), (tie, moment, g, fd)


def test_fd_trend_prior_term():
    for gen, params, snaps in _instances(4):
        t = int(gen.integers(1, params.moments))
        node = int(gen.integers(0, params.node_count))
        g = trend_prior_gradient(node, t, params, snaps)

        def f(val):
            # the Gaussian term of moment t alone, mean held fixed
            th_prev = params.trends[t - 1]
            adj = snaps[t - 1].adjacency()
            lam = sum(params.profiles.l[k] for k in range(params.node_count) if adj[node, k])
            acc = sum(params.profiles.l[k] * wrap_ref(th_prev[k] - th_prev[node])
                      for k in range(params.node_count) if adj[node, k])
            mu = th_prev[node] + params.profiles.r[node] * (acc / lam if lam > 0 else 0.0)
            res = wrap_ref(val - mu)
            s = params.profiles.sigma[node]
            return -math.log(s) - res * res / (2 * s * s)
        fd = central_difference(f, params.trends[t, node])
        assert close(g, fd), (node, t, g, fd)


def test_fd_full_trend_gradient():
    for gen, params, snaps in _instances(5):
        t = int(gen.integers(0, params.moments))
        node = int(gen.integers(0, params.node_count))
        g = trend_gradient(node, t, params, snaps)
        fd = central_difference(lambda a: _ll_trend(params, snaps, node, t, a), params.trends[t, node])
        assert close(g, fd), (node, t, g, fd)


@pytest.mark.parametrize("field,index", [("r", 0), ("sigma", 1), ("l", 2)])
def test_fd_personality(field, index):
    for gen, params, snaps in _instances(6 + index):
        node = int(gen.integers(0, params.node_count))
        g = personality_gradients(node, params, snaps)[index]

        def f(val):
            q = params.copy()
            getattr(q.profiles, field)[node] = val
            return log_likelihood(q, snaps)
        fd = central_difference(f, getattr(params.profiles, field)[node])
        assert close(g, fd), (field, node, g, fd)


def test_fd_all_parameters_at_once():
    for gen, params, snaps in _instances(10, count=30):
        g = gradients(params, snaps)
        base = params.copy()
        checks = [("x0", (0, 0)), ("x0", (params.node_count - 1, 1)),
                  ("trends", (0, 0)), ("trends", (params.moments - 1, 1))]
        for name, idx in checks:
            def f(val, name=name, idx=idx):
                q = base.copy()
                getattr(q, name)[idx] = val
                return log_likelihood(q, snaps)
            fd = central_difference(f, getattr(base, name)[idx])
            assert close(getattr(g, name)[idx], fd), (name, idx)
        for name in ("b", "r", "sigma", "l"):
            def f(val, name=name):
                q = base.copy()
                getattr(q.profiles, name)[0] = val
                return log_likelihood(q, snaps)
            fd = central_difference(f, getattr(base.profiles, name)[0])
            assert close(getattr(g, name)[0], fd), name


# configuration


@pytest.mark.parametrize("kw", [dict(rounds=0), dict(learning_rate=0.0), dict(decay=0.0),
                                dict(decay=1.5), dict(positive_samples_per_step=-1),
                                dict(block_order="other")])
def test_training_config_rejects(kw):
    with pytest.raises(ValueError):
        TrainingConfig(**kw)


def test_training_config_defaults():
    c = TrainingConfig()
    assert (c.rounds, c.system.xi, c.system.velocity) == (5, 0.6, 3e-3)
    assert (c.learning_rate, c.decay) == (0.01, 0.9)


def test_initial_params():
    p = trainer.initial_params(7, 4, TrainingConfig(seed=3))
    assert np.all(p.profiles.r == 0.5) and np.all(p.profiles.l == 1.0)
    assert np.all(p.profiles.sigma == 1.0) and np.all(p.profiles.b == 1.0)
    assert p.x0.shape == (7, 2) and p.trends.shape == (4, 7)


# fit


def _small_series(seed=0, n=12, T=6):
    from peno.simulator import NormalSpec, SimulationConfig
    cfg = SimulationConfig(node_count=n, moments=T, system=SystemParams(0.6, 0.1),
                           init_position_mean=0.0, openness=NormalSpec(0.8, 0.2), seed=seed)
    return run(cfg).snapshots


def _quick(**kw):
    base = dict(rounds=2, learning_rate=0.05, steps_per_block=5, steps_per_moment=2,
                positive_samples_per_step=32, negative_samples_per_step=32,
                system=SystemParams(0.6, 0.1), seed=4)
    base.update(kw)
    return TrainingConfig(**base)


def test_fit_zero_samples_is_noop():
    snaps = _small_series()
    cfg = _quick(positive_samples_per_step=0, negative_samples_per_step=0)
    init = trainer.initial_params(12, 6, cfg)
    assert fit(snaps, cfg, init=init) == init
    assert fit(snaps, cfg) == trainer.initial_params(12, 6, cfg)


def test_fit_is_deterministic():
    snaps = _small_series()
    assert fit(snaps, _quick()) == fit(snaps, _quick())
    assert fit(snaps, _quick()) != fit(snaps, _quick(seed=5))


def test_fit_block_orders_both_run():
    snaps = _small_series()
    a = fit(snaps, _quick(block_order="sections"))
    b = fit(snaps, _quick(block_order="prose"))
    assert a != b


def test_fit_requires_two_moments():
    with pytest.raises(ValueError):
        fit([NetworkSnapshot(3)], _quick())


def test_clamps_hold_after_every_step(monkeypatch):
    seen = []
    original = trainer._Adam.step

    def checked(self, grad, lr, row=None):
        prof = holder["trainer"].p.profiles
        seen.append(bool(np.all((prof.r >= 0) & (prof.r <= 1)) and np.all(prof.l >= 0)
                         and np.all(prof.sigma >= 1e-3) and np.all(prof.b >= 1e-3)))
        return original(self, grad, lr, row)

    holder = {}
    init = trainer._Trainer.__init__

    def capture(self, *a, **kw):
        init(self, *a, **kw)
        holder["trainer"] = self

    monkeypatch.setattr(trainer._Adam, "step", checked)
    monkeypatch.setattr(trainer._Trainer, "__init__", capture)
    # a large rate pushes parameters across their bounds on nearly every step
    out = fit(_small_series(), _quick(learning_rate=5.0))
    assert seen and all(seen)
    prof = out.profiles
    assert np.all((prof.r >= 0) & (prof.r <= 1)) and np.all(prof.sigma >= 1e-3)


def test_velocity_chain_holds_after_fit():
    out = fit(_small_series(), _quick())
    step = np.linalg.norm(np.diff(out.positions, axis=0), axis=-1)
    assert np.allclose(step, 0.1, rtol=0, atol=1e-12)


def test_fit_without_edges_drives_openness_down(caplog):
    snaps = [NetworkSnapshot(6)] * 4
    with caplog.at_level(logging.WARNING, logger="peno.trainer"):
        out = fit(snaps, _quick(rounds=3, steps_per_block=40))
    assert "no ties" in caplog.text
    assert np.all(out.profiles.b < 1.0)


def test_fit_history_records_rounds():
    hist = []
    fit(_small_series(), _quick(rounds=3), history=hist)
    assert [h.round for h in hist] == [1, 2, 3]
    assert hist[1].learning_rate == pytest.approx(0.05 * 0.9)


@pytest.fixture(scope="module")
def recovery_fit():
    tr = run(recovery_sim(0))
    snaps = tr.snapshots[:FIT_MOMENTS]
    cfg = recovery_training(0)
    hist = []
    fitted = fit(snaps, cfg, history=hist)
    return snaps, cfg, fitted, hist


def test_fit_improves_on_initialisation(recovery_fit):
    snaps, cfg, fitted, _ = recovery_fit
    init = trainer.initial_params(snaps[0].node_count, len(snaps), cfg)
    assert log_likelihood(fitted, snaps) >= log_likelihood(init, snaps)


def test_fit_training_curve_mostly_increasing(recovery_fit):
    _, _, _, hist = recovery_fit
    lls = [h.log_likelihood for h in hist]
    assert len(lls) == 5
    # round 1 is compared with the initialisation
    steps = [b >= a for a, b in zip(lls, lls[1:])]
    assert sum(steps) + 1 >= 4


def test_fit_returns_best_round(recovery_fit):
    snaps, _, fitted, hist = recovery_fit
    assert log_likelihood(fitted, snaps) == pytest.approx(max(h.log_likelihood for h in hist))
