"""Annealing over finite action spaces with known or learned payoffs.

Core pieces: exact Metropolis dynamics (`chain`), annealing schedules and
the simulated-annealing driver (`schedule`), running-mean payoff learning
and ergodic annealing (`macau`), layered directed Steiner tree and TSP
problem plug-ins (`steiner`, `tsp`), and a head-to-head benchmark harness
with a CLI (`bench`, `cli`).

Long loops run on a compiled kernel core when the extension is built,
with a pure-Python fallback selected automatically at import time; see
``ergodic_annealing._kernels``.
"""

from ._kernels import backend_name
from .chain import (
    ChainConfig,
    FiniteActionSpace,
    MatrixProposal,
    ProposalKernel,
    Trajectory,
    UniformProposal,
    UtilityTable,
    acceptance_probability,
    empirical_frequency,
    gibbs_distribution,
    limit_distribution,
    metropolis_step,
    run_chain,
    total_variation,
    transition_matrix,
)
from .macau import (
    AdditiveUniformPayoff,
    DecomposedEstimator,
    DeterministicPayoff,
    MultiplicativeUniformPayoff,
    PayoffEnvironment,
    TabularEstimator,
    conjecture_report,
    ergodic_annealing,
    macau_step,
    macau_update,
)
from .schedule import (
    AnnealingSchedule,
    AnnealResult,
    StopRule,
    beta_at,
    frozen,
    geometric_schedule,
    simulated_annealing,
)

__version__ = "0.1.0"

__all__ = [
    "AnnealResult",
    "AnnealingSchedule",
    "AdditiveUniformPayoff",
    "ChainConfig",
    "DecomposedEstimator",
    "DeterministicPayoff",
    "FiniteActionSpace",
    "MatrixProposal",
    "MultiplicativeUniformPayoff",
    "PayoffEnvironment",
    "ProposalKernel",
    "StopRule",
    "TabularEstimator",
    "Trajectory",
    "UniformProposal",
    "UtilityTable",
    "acceptance_probability",
    "backend_name",
    "beta_at",
    "conjecture_report",
    "empirical_frequency",
    "ergodic_annealing",
    "frozen",
    "geometric_schedule",
    "gibbs_distribution",
    "limit_distribution",
    "macau_step",
    "macau_update",
    "metropolis_step",
    "run_chain",
    "simulated_annealing",
    "total_variation",
    "transition_matrix",
]
