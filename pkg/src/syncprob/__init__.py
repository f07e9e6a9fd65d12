"""Probability of epsilon-synchronization in networks of mismatched oscillators.

Network generators, Laplacian spectra, van der Pol network dynamics, a
generalized master stability function, analytical probability lower bounds
and Monte Carlo validation.
"""

__version__ = "0.1.0"

from .bound import (
    BoundResult,
    CovarianceModel,
    ModeWeights,
    covariance_blocks,
    error_bound_symmetric,
    pstab_for_network,
    pstab_lower_bound,
    sigma_for_model,
    weighted_chi2_cdf,
)
from .dynamics import (
    LimitCycle,
    MismatchDistribution,
    MismatchSample,
    OscillatorModel,
    TrajectoryRecord,
    VanDerPol,
    detect_period,
    integrate_network,
    sample_mismatch,
)
from .errors import (
    ContractViolation,
    DivergenceError,
    InvalidParameterError,
    NoLimitCycleError,
    NonUniqueManifoldError,
    SyncProbError,
    UnstableModeError,
)
from .montecarlo import McResult, TrialConfig, run_trials, sweep, wilson_interval
from .msf import MsfCurve, MsfPoint, lambda_phi, monodromy, msf_curve
from .netgen import Graph, build_er, build_graph, build_nw, build_ring, is_connected
from .spectral import SpectralData, null_vector_alpha, ring_eigenvalues, symmetric_eig
from .special import regularized_gamma_p, regularized_gamma_q
