"""Decentralized nonsmooth nonconvex optimization by multi-epoch online learning."""

from .baselines import BaselineConfig, run_dgfm, run_dpsgd
from .core import RunConfig, RunResult, candidate_average, run_medol
from .errors import ConstructionError, NonFiniteError, ParameterError, ParseError
from .objectives import ObjectiveSuite, capped_l1_svm, l1_norm_objective, noisy_quadratic, svm_suite
from .schedules import ProblemConstants, make_schedule, predict_rounds
from .topology import CommMatrix, erdos_renyi_matrix, gossip, ring_matrix, uniform_matrix

__version__ = "0.1.0"

__all__ = [
    "BaselineConfig",
    "CommMatrix",
    "ConstructionError",
    "NonFiniteError",
    "ObjectiveSuite",
    "ParameterError",
    "ParseError",
    "ProblemConstants",
    "RunConfig",
    "RunResult",
    "candidate_average",
    "capped_l1_svm",
    "erdos_renyi_matrix",
    "gossip",
    "l1_norm_objective",
    "make_schedule",
    "noisy_quadratic",
    "predict_rounds",
    "ring_matrix",
    "run_dgfm",
    "run_dpsgd",
    "run_medol",
    "svm_suite",
    "uniform_matrix",
]
