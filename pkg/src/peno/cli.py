"""Command-line entry point.

Every run is driven by one YAML document plus a handful of flags::

    peno simulate --config run.yaml --seed 7 --out results/
    peno train SNAPSHOTS --config run.yaml --out results/
    peno forecast-eval PARAMS TRUTH --config run.yaml --out results/
    peno project VOTES --config run.yaml --out results/

Exit codes: 0 success, 2 invalid configuration or input, 3 I/O failure,
4 numeric failure (non-finite likelihood).
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path
from typing import Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import dataio, evaluator, rng, simulator, trainer
from .core import DomainError, SystemParams

log = logging.getLogger("peno")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


class ConfigError(Exception):
    pass


class NumericError(Exception):
    pass


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Normal(_Section):
    mean: float
    std: float = Field(1.0, ge=0)


class Leader(_Section):
    node: int = Field(ge=0)
    leadership: float
    agreeableness: Optional[float] = None
    openness: Optional[float] = None


class Inversion(_Section):
    moment: int = Field(ge=1)
    nodes: list[int]


class SimulateSection(_Section):
    node_count: int = Field(300, ge=1)
    moments: int = Field(200, ge=1)
    xi: float = Field(0.6, gt=0)
    velocity: float = Field(0.03, gt=0)
    position: Normal = Normal(mean=4.0, std=1.0)
    agreeableness: Normal = Normal(mean=0.6, std=1.0)
    leadership: Normal = Normal(mean=0.3, std=1.0)
    neuroticism: Normal = Normal(mean=1.0, std=1.0)
    openness: Normal = Normal(mean=0.3, std=1.0)
    sigma_min: float = Field(simulator.SIGMA_MIN, gt=0)
    b_min: float = Field(simulator.B_MIN, gt=0)
    leaders: list[Leader] = []
    inversions: list[Inversion] = []

    def build(self, seed: int) -> simulator.SimulationConfig:
        ns = simulator.NormalSpec
        return simulator.SimulationConfig(
            node_count=self.node_count, moments=self.moments,
            system=SystemParams(self.xi, self.velocity),
            init_position_mean=self.position.mean, init_position_std=self.position.std,
            agreeableness=ns(self.agreeableness.mean, self.agreeableness.std),
            leadership=ns(self.leadership.mean, self.leadership.std),
            neuroticism=ns(self.neuroticism.mean, self.neuroticism.std),
            openness=ns(self.openness.mean, self.openness.std),
            seed=seed, sigma_min=self.sigma_min, b_min=self.b_min,
            leader_overrides=tuple(simulator.LeaderOverride(**ld.model_dump()) for ld in self.leaders),
            interventions=tuple(simulator.TrendInversion(iv.moment, tuple(iv.nodes))
                                for iv in self.inversions))


class TrainSection(_Section):
    rounds: int = Field(5, ge=1)
    learning_rate: float = Field(0.01, gt=0)
    decay: float = Field(0.9, gt=0, le=1)
    positive_samples_per_step: int = Field(256, ge=0)
    negative_samples_per_step: int = Field(256, ge=0)
    steps_per_block: int = Field(50, ge=0)
    steps_per_moment: int = Field(5, ge=0)
    xi: float = Field(0.6, gt=0)
    velocity: float = Field(3e-3, gt=0)
    sigma_min: float = Field(trainer.SIGMA_MIN, gt=0)
    b_min: float = Field(trainer.B_MIN, gt=0)
    block_order: str = "sections"

    @field_validator("block_order")
    @classmethod
    def _order(cls, v):
        if v not in trainer.BLOCK_ORDERS:
            raise ValueError(f"must be one of {sorted(trainer.BLOCK_ORDERS)}")
        return v

    def build(self, seed: int) -> trainer.TrainingConfig:
        fields = self.model_dump()
        system = SystemParams(fields.pop("xi"), fields.pop("velocity"))
        return trainer.TrainingConfig(system=system, seed=seed, **fields)


class EvaluateSection(_Section):
    horizons: list[int] = [1, 5, 10]
    mode: str = "expected"
    rollouts: int = Field(1, ge=1)
    leaders_k: int = Field(3, ge=1)
    bucket_margin: float = Field(0.2, gt=0, lt=1)
    # node id -> period labels; every node forms one period "all" when omitted
    periods: Optional[dict[str, list[str]]] = None

    @field_validator("horizons")
    @classmethod
    def _horizons(cls, v):
        if not v or any(h < 1 for h in v):
            raise ValueError("horizons must be a non-empty list of positive integers")
        return v

    @field_validator("mode")
    @classmethod
    def _mode(cls, v):
        if v not in ("expected", "montecarlo"):
            raise ValueError("mode must be 'expected' or 'montecarlo'")
        return v


class ProjectSection(_Section):
    window: int = Field(ge=1)
    stride: Optional[int] = Field(None, ge=1)
    agreement_threshold: float = Field(gt=0, le=1)
    min_common_bills: int = Field(ge=1)
    cumulative: bool = False


class RunConfig(_Section):
    seed: Optional[int] = Field(None, ge=0, le=(1 << 64) - 1)
    out: Optional[str] = None
    simulate: Optional[SimulateSection] = None
    train: Optional[TrainSection] = None
    evaluate: Optional[EvaluateSection] = None
    project: Optional[ProjectSection] = None


def _located(exc: ValidationError, path) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {loc}: {err['msg']}")
    return "\n".join(lines)


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    try:
        return RunConfig.model_validate(doc or {})
    except ValidationError as exc:
        raise ConfigError(_located(exc, path)) from exc


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _seed(args, cfg: RunConfig) -> int:
    if args.seed is not None:
        return rng.check_seed(args.seed)
    if cfg.seed is not None:
        return cfg.seed
    raise ConfigError("no seed given: pass --seed or set 'seed' in the config")


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args, cfg: RunConfig) -> int:
    if cfg.simulate is None:
        raise ConfigError("config has no 'simulate' section")
    sim_cfg = cfg.simulate.build(_seed(args, cfg))
    out = _out_dir(args, cfg)
    trace = simulator.run(sim_cfg, threads=args.threads)
    simulator.export_frames(trace, out / "trace")
    metrics = evaluator.dispersion_metrics(trace) if trace.node_count > 1 else []
    evaluator.write_dispersion(metrics, out / "dispersion.csv")
    log.info("simulated %d nodes over %d moments", trace.node_count, trace.moments)
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    train_cfg = (cfg.train or TrainSection()).build(_seed(args, cfg))
    series = dataio.load_snapshots(args.snapshots)
    if series.moments < 2 or series.node_count < 2:
        raise ConfigError(f"{args.snapshots}: training needs T >= 2 and N >= 2")
    out = _out_dir(args, cfg)
    history: list[trainer.RoundLog] = []
    params = trainer.fit(series, train_cfg, history=history)
    if not all(math.isfinite(h.log_likelihood) for h in history):
        raise NumericError("log-likelihood became non-finite during training")
    dataio.save_params(params, out / "params.peno")
    with open(out / "train_log.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", "log_likelihood", "learning_rate"])
        for h in history:
            w.writerow([h.round, format(h.log_likelihood, ".17g"), format(h.learning_rate, ".17g")])
    return EXIT_OK


def cmd_forecast_eval(args, cfg: RunConfig) -> int:
    ev = cfg.evaluate or EvaluateSection()
    seed = _seed(args, cfg)
    params = dataio.load_params(args.params)
    truth = dataio.load_snapshots(args.truth)
    if truth.node_count != params.node_count:
        raise ConfigError(f"params cover {params.node_count} nodes but truth has {truth.node_count}")
    out = _out_dir(args, cfg)
    try:
        curve = evaluator.span_auc_curve(params, truth, ev.horizons, threads=args.threads,
                                         mode=ev.mode, rollouts=ev.rollouts, seed=seed)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    evaluator.write_span_auc(curve, out / "span_auc.csv")
    evaluator.write_buckets(evaluator.bucket_personalities(params.profiles, ev.bucket_margin),
                            out / "buckets.csv")
    index = {nid: k for k, nid in enumerate(truth.node_ids)}
    if ev.periods is None:
        periods = {k: ["all"] for k in range(params.node_count)}
    else:
        unknown = sorted(set(ev.periods) - set(index))
        if unknown:
            raise ConfigError(f"evaluate.periods names unknown nodes: {', '.join(unknown[:5])}")
        periods = {index[nid]: ps for nid, ps in ev.periods.items()}
    leaders = evaluator.top_leaders(params.profiles.l, periods, ev.leaders_k)
    evaluator.write_leaders(leaders, params.profiles.l, out / "leaders.csv", truth.node_ids)
    return EXIT_OK


def cmd_project(args, cfg: RunConfig) -> int:
    if cfg.project is None:
        raise ConfigError("config has no 'project' section; window, agreement_threshold "
                          "and min_common_bills must be set explicitly")
    pj = cfg.project
    records = dataio.load_votes(args.votes)
    series = dataio.project_votes(records, pj.window, pj.agreement_threshold,
                                  pj.min_common_bills, pj.stride)
    if pj.cumulative:
        series = dataio.cumulative_expand(series)
    out = _out_dir(args, cfg)
    dataio.save_snapshots(series, out / "snapshots.peno")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "train": cmd_train,
            "forecast-eval": cmd_forecast_eval, "project": cmd_project}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="peno", description=__doc__.split("\n\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="root seed (overrides the config)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run the forward model")
    p = sub.add_parser("train", parents=[common], help="fit parameters to a snapshot series")
    p.add_argument("snapshots")
    p = sub.add_parser("forecast-eval", parents=[common], help="span-AUC, bucket and leader reports")
    p.add_argument("params")
    p.add_argument("truth")
    p = sub.add_parser("project", parents=[common], help="vote records to co-agreement snapshots")
    p.add_argument("votes")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
