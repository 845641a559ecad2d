"""Monte Carlo identity checkers, the series oracle and closability diagnostics."""

from .closability import (
    ClosabilityReport,
    closability_diagnostic,
    fat_cantor_intervals,
    indicator_of_intervals,
    pair_potential_closability_check,
)
from .estimates import IdentityReport, MonteCarloEstimate
from .functionals import CharlierProduct, ConstantFunctional, CountFunctional, CylinderFunctional, LaplaceFunctional
from .identities import (
    AnnihilationReport,
    HFunction,
    added_point_integral,
    check_annihilation,
    laplace_closed_form,
    mc_expectation,
    verify_chaos_orthogonality,
    verify_div_duality,
    verify_form_gibbs,
    verify_form_poisson,
    verify_generator,
    verify_gnz,
    verify_ibp,
    verify_mecke,
)
from .laws import GibbsLaw, PoissonLaw, run_replicates
from .oracle import OracleConfig, OracleResult, hardcore_1d_series, oracle_expectation

__all__ = [name for name in dir() if not name.startswith("_")]
