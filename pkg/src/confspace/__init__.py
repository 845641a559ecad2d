"""Simulation and calculus on finite configuration spaces.

Poisson and finite-volume Gibbs point processes on boxes in R^d, the
intrinsic and add-one-point gradients on cylinder functions, Charlier
functions, and Monte Carlo checkers for the exact identities relating them.
"""

from .calculus import (
    CylinderFunction,
    Profile,
    ProductOfOuters,
    ProductOuter,
    Ridge,
    ConstantOuter,
    TangentVector,
    carre,
    charlier,
    charlier_batch,
    constant,
    directional_derivative,
    divergence_gamma,
    generator_cylinder,
    intrinsic_gradient,
    linear,
    log_derivative_B,
    poisson_adjoint,
    poisson_directional,
    poisson_gradient,
    sigma_pair,
)
from .configuration import Configuration, ConfigurationBatch, add_point, count, pair, remove_point
from .errors import ChainStuckError, ConfigError, ConfspaceError, PreconditionError, QuadratureError, ResourceLimitError
from .gibbs import (
    EnergyValue,
    HardCore,
    PairPotential,
    PotentialModel,
    SoftCore,
    ZeroPotential,
    conditional_energy,
    local_energy,
    rho_gamma,
    stability_spotcheck,
)
from .sampler import (
    ChainDiagnostics,
    GibbsChain,
    GibbsChainParams,
    RandomStream,
    replicate_streams,
    sample_gibbs,
    sample_gibbs_batch,
    sample_poisson,
    sample_poisson_batch,
)
from .space import (
    Bump,
    BumpIntensity,
    ComponentField,
    ConstantIntensity,
    ExpQuadraticIntensity,
    GradientField,
    IntensityModel,
    LinearCombination,
    PolyBump,
    PolynomialIntensity,
    QuadratureRule,
    RotationalField,
    SmoothTestFunction,
    SmoothVectorField,
    Window,
    WindowPolynomial,
    ZeroField,
    evaluate_jet,
    integrate,
    intensity_mass,
    l2_inner,
    log_derivative,
)

__version__ = "0.1.0"
