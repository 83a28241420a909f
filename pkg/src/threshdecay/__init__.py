"""Low-energy resolvent machinery and dispersive decay scans for odd-dimensional
Schrodinger operators with zero-energy bound states."""

__version__ = "0.1.0"

from .config import RunConfig
from .fitting import DecayFitResult, fit_loglog
from .kernels import (
    expansion_error,
    green_constant,
    k_remainder,
    recurrence_residual,
    resolvent_kernel,
    series_coefficient,
    taylor_ladder,
    truncated_series,
)
from .operators import (
    DiscreteOperator,
    DiscretePotential,
    assemble_G,
    assemble_M,
    compute_S1,
    compute_spectral_chain,
    discretize,
    jn_inverse,
    laurent_fit,
    m_diff_slope,
)
from .potentials import (
    EigenPotential,
    PointSourceSpec,
    build_eigenpair,
    decay_slope,
    default_source_spec,
    moment_integrals,
    solve_weights,
)
from .quadrature import (
    CutoffSpec,
    SupportNodes,
    build_nodes,
    convolution_bound_probe,
    cutoff_eval,
    ibp_decay_probe,
    oscillatory_integrate,
)
from .evolution import (
    PropagatorSample,
    born_series_kernel,
    decay_scan,
    leading_term_compare,
    make_probe_pairs,
    resolvent_difference_kernel,
    stone_kernel,
)

__all__ = [name for name in dir() if not name.startswith("_")]
