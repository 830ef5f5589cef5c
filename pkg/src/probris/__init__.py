"""Probabilistic reformulation solvers for discrete RIS phase optimization."""

from .errors import DomainError, InfeasibleError, PreconditionError, ProbRisError, SizeError
from .reformulation import (
    BINARY,
    Alphabet,
    CategoricalParams,
    best_discrete,
    boxqp_transform,
    degen,
    degen_inverse,
    expectation_exact,
    sample,
)
from .scenario import ChannelSet, ScenarioConfig, SinrProblem, build_problem, capacity, gen_rician, sinr
from .egd import EgdConfig, egd_solve
from .ssa import SsaConfig, ssa_b_solve, ssa_t_bcd
from .overhead import OverheadModel, ee, p_tot, rate
from .baselines import cpp1, cpp2, exhaustive, sa_project, ua

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "BINARY",
    "CategoricalParams",
    "ChannelSet",
    "DomainError",
    "EgdConfig",
    "InfeasibleError",
    "OverheadModel",
    "PreconditionError",
    "ProbRisError",
    "ScenarioConfig",
    "SinrProblem",
    "SizeError",
    "SsaConfig",
    "best_discrete",
    "boxqp_transform",
    "build_problem",
    "capacity",
    "cpp1",
    "cpp2",
    "degen",
    "degen_inverse",
    "ee",
    "egd_solve",
    "exhaustive",
    "expectation_exact",
    "gen_rician",
    "p_tot",
    "rate",
    "sa_project",
    "sample",
    "sinr",
    "ssa_b_solve",
    "ssa_t_bcd",
    "ua",
]
