"""Real-time Krylov subspace diagonalization on model spectra.

Hamiltonians are represented by their eigenvalues and states by their
eigenbasis amplitudes, so time evolution is a phase per level and every
subspace matrix element is a spectral sum.
"""

from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    EmptySubspaceError,
    IndexOutOfRangeError,
    InsufficientSamplesError,
    InvalidParameterError,
    NumericalError,
    QuadratureError,
    RTKrylovError,
    ValidationError,
    WindowViolationError,
    ZeroNormError,
    ZeroOverlapError,
)
from .spectra import (
    DensityOfStates,
    DOSKind,
    Histogram,
    PerturbationOrder,
    SpacingDistribution,
    SpacingKind,
    Spectrum,
    broadened_dos,
    dos_sampled_spectrum,
    effective_mean_spectrum,
    gapped_linear_spectrum,
    gue_matrix_spectrum,
    linear_spectrum,
    perturbed_spectrum,
    random_spacing_spectrum,
    read_spectrum,
    rescale_spectrum,
    search_spectrum,
    write_spectrum,
)
from .states import (
    StateVector,
    basis_state,
    concentrated_state,
    evolve,
    population,
    random_state,
    rayleigh_quotient,
    read_state,
    uniform_state,
    write_state,
)
from .subspace import SolveResult, SubspaceMatrices, TimeGrid, assemble, ritz_state, solve
from .analytic import (
    SingleStepAuxiliaries,
    continuum_elements,
    continuum_population,
    nested_coefficients,
    phase_trajectory,
    single_step_aux,
    single_step_population,
    suppression_center,
)
from .solver import (
    GridSpec,
    RunTrace,
    ScanResult,
    halving_grid,
    ivqpe_run,
    kappa_to_t1,
    lcu_cumulative,
    lcu_success,
    make_grid,
    optimal_kappa,
    scan,
    vqpe_run,
)
from .bounds import BoundReport, cor12_bound, rogers_szego, rs_window_check, thm11_bound
from .ensemble import Envelope, SpectrumGenerator, convergence_envelope, jensen_gap, spacing_diagnostics

__version__ = "0.1.0"
