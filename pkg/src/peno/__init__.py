"""Co-evolution of opinions, personalities and social ties.

Submodules: ``core`` (model kernel), ``simulator`` (forward runs), ``trainer``
(likelihood, gradients, fitting), ``evaluator`` (forecast AUC, personality
reports, dispersion), ``dataio`` (file formats) and ``cli``.
"""

from .core import (
    DomainError,
    NetworkSnapshot,
    OpinionState,
    PersonalityProfile,
    Personalities,
    SnapshotSeries,
    SystemParams,
)
from .simulator import SimulationConfig, run
from .trainer import ModelParams, TrainingConfig, fit, log_likelihood

__all__ = [
    "DomainError", "NetworkSnapshot", "OpinionState", "PersonalityProfile", "Personalities",
    "SnapshotSeries", "SystemParams", "SimulationConfig", "run", "ModelParams",
    "TrainingConfig", "fit", "log_likelihood",
]
__version__ = "0.1.0"
