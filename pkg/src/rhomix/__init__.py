"""rhomix: exact maximal correlation on small systems and everything that bounds it."""

from .discrete import (
    FinitePair,
    FiniteSystem,
    conditional_maxcorr,
    density_bound,
    event_extremes,
    markov_chain_checks,
    maxcorr_blocks,
    maxcorr_pair,
    mixing_coefficients,
    subjective_maxcorr,
)
from .errors import CapExceededError, IntegratorError, NonErgodicChainError, ValidationError
from .events import (
    ChogosovModel,
    NuModel,
    chogosov_cdf,
    chogosov_opnorm,
    chogosov_quantile,
    chogosov_sample,
    chogosov_zone,
    lambda_fn,
    lambda_integral_identity,
    lstar_identity,
    nu_event_ratio,
    weak_bound,
)
from .gaussian import (
    GaussianSystem,
    OUChainParams,
    build_banded_zz,
    build_optimal_simple,
    chained_maxcorr,
    condition,
    maxcorr_gaussian,
    ou_chain_joint,
    three_lines,
)
from .glauber import exact_gap, gap_lower_bounds, glauber_simulate, sublattice_gap
from .convdecay import ToeplitzKernel, banded_inverse_constants, conv_inverse, decay_fit
from .lattice import (
    IsingTorus,
    QuadraticModel,
    clt_experiment,
    ising_epsilon,
    ising_exact,
    phase_product_bound,
    quadratic_covariance,
    quadratic_rho_report,
)
from .tensor_bounds import (
    EpsilonMatrix,
    LatticeKernel,
    TailModel,
    distance_bound,
    nm_bound,
    pf_certificate,
    simple_bound,
    sublattice_k,
    zn_bound,
    zz_bound,
)

__version__ = "0.1.0"
