"""Shared synthetic-recovery setup: 50 nodes, 40 moments, fit on the first 30."""

from peno.core import SystemParams
from peno.simulator import NormalSpec, SimulationConfig
from peno.trainer import TrainingConfig

NODES = 50
MOMENTS = 40
FIT_MOMENTS = 30
VELOCITY = 0.1


def recovery_sim(seed: int) -> SimulationConfig:
    return SimulationConfig(
        node_count=NODES, moments=MOMENTS, system=SystemParams(0.6, VELOCITY),
        init_position_mean=0.0, init_position_std=1.0,
        agreeableness=NormalSpec(0.8, 0.2), leadership=NormalSpec(1.0, 0.8),
        neuroticism=NormalSpec(0.1, 0.05), openness=NormalSpec(0.7, 0.2), seed=seed)


def recovery_training(seed: int, xi: float = 0.6, rounds: int = 5) -> TrainingConfig:
    return TrainingConfig(rounds=rounds, learning_rate=0.05, steps_per_block=200,
                          steps_per_moment=20, system=SystemParams(xi, VELOCITY), seed=seed)
