"""Discrete Kiefer phi_p-optimal experimental design.

Continuous relaxation with equivalence-theorem certificates, greedy and
rounded integer designs, and approximation-factor certificates.
"""

from .bounds import (
    EfficiencyCertificate,
    build_certificate,
    greedy_factor,
    lemma_floor_bound,
    posterior_binary,
    posterior_budgeted,
    posterior_replicated,
    prior_factor_binary,
    prior_factor_replicated,
    wolsey_beta,
    wolsey_factor,
)
from .combinat import greedy, greedy_budgeted_wolsey, sviridenko_budgeted, total_curvature
from .exceptions import DesignError, DidNotConverge, NumericalError, ValidationError
from .instance import (
    Budget,
    DesignProblem,
    IntegerDesign,
    Replication,
    WeightVector,
    as_problem,
    coverage_problem,
    dump_problem,
    generate,
    load_problem,
    project_if_rank_deficient,
)
from .relax import RelaxationCertificate, equivalence_gap, solve_continuous
from .rounding import apportionment, budgeted_dp, incremental_rounding, top_n_binary
from .spectra import (
    PsdAtom,
    eig_psd,
    frechet_derivative,
    gradient_trace,
    info_matrix,
    kiefer_phi,
    phi_p,
    submodularity_slack,
    trace_power,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
