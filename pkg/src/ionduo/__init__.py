"""Entanglement dynamics of two three-level trapped ions coupled to one
quantized vibrational mode by a time-modulated laser."""

__version__ = "0.1.0"

from .core import (
    DensityMatrix,
    HilbertLayout,
    PureState,
    Spectrum,
    hermitian_spectrum,
    partial_trace,
    purity,
    von_neumann_entropy,
)
from .dynamics import (
    EvolutionResult,
    UnsupportedRegimeError,
    evolve_milburn,
    evolve_pure,
    evolve_pure_dense,
    kraus_completeness_deficit,
    milburn_closed_form,
    milburn_kraus,
    modulation_integral,
)
from .entanglement import (
    Bipartition,
    i_concurrence_pure,
    negativity,
    relative_entropy_measure,
)
from .experiments import (
    ION_VS_ION,
    ION_VS_REST,
    FieldPreparation,
    IncompatibleMeasureError,
    MeasureSeries,
    SuddenEvents,
    coherent_amplitudes,
    detect_sudden_events,
    prepare_initial,
    report_gamma_monotonicity,
    report_nbar_smoothing,
    report_sech_birth_delay,
    run_series,
    run_sweep,
    run_theta_sweep,
    truncated_coherent,
)
from .ionmodel import (
    BlockBasis,
    BlockMatrix,
    BlockSystem,
    CutoffError,
    block_basis,
    block_indices,
    build_block,
    build_full_hamiltonian,
    full_layout,
    get_block_system,
    laguerre,
    mode_strength,
)
from .params import Constant, Modulation, Sech, SimParams

__all__ = [
    "__version__",
    "Bipartition",
    "BlockBasis",
    "BlockMatrix",
    "BlockSystem",
    "Constant",
    "CutoffError",
    "DensityMatrix",
    "EvolutionResult",
    "FieldPreparation",
    "HilbertLayout",
    "ION_VS_ION",
    "ION_VS_REST",
    "IncompatibleMeasureError",
    "MeasureSeries",
    "Modulation",
    "PureState",
    "Sech",
    "SimParams",
    "Spectrum",
    "SuddenEvents",
    "UnsupportedRegimeError",
    "block_basis",
    "block_indices",
    "build_block",
    "build_full_hamiltonian",
    "coherent_amplitudes",
    "detect_sudden_events",
    "evolve_milburn",
    "evolve_pure",
    "evolve_pure_dense",
    "full_layout",
    "get_block_system",
    "hermitian_spectrum",
    "i_concurrence_pure",
    "kraus_completeness_deficit",
    "laguerre",
    "milburn_closed_form",
    "milburn_kraus",
    "mode_strength",
    "modulation_integral",
    "negativity",
    "partial_trace",
    "prepare_initial",
    "purity",
    "relative_entropy_measure",
    "report_gamma_monotonicity",
    "report_nbar_smoothing",
    "report_sech_birth_delay",
    "run_series",
    "run_sweep",
    "run_theta_sweep",
    "truncated_coherent",
    "von_neumann_entropy",
]
