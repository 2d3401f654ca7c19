"""Affine Weyl quantization, affine Wigner functions and wavelet-Husimi fields on the half-line."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    AccuracyError,
    AffineSymbol,
    DomainError,
    HalfLineFunction,
    LogGrid,
    OperatorMatrix,
    ParameterError,
    PlanckScale,
    ResolutionError,
    StructuralError,
    apply_operator,
    default_grid,
    inner_product,
    make_log_grid,
    phase_window,
    trace,
)
from .special import GammaRangeError, PoleError, coherent_norm_constant, gamma, log_gamma  # noqa: E402
from .mellin import (  # noqa: E402
    CriticalLineGrid,
    MellinSpectrum,
    contour_for_hbar,
    default_contour,
    inverse_mellin,
    mellin_transform,
    refine_spectrum,
    symbol_mellin,
    unitarity_defect,
)
from .affine import (  # noqa: E402
    PhasePoint,
    c_action,
    identity_measure_test,
    quantize_kernel,
    quantize_superposition,
    symbol_of,
    u_action,
    v_action,
)
from .phase import (  # noqa: E402
    CoherentState,
    ComplexDisplacement,
    HusimiEvaluator,
    HusimiField,
    affine_wigner,
    coherent_state,
    cross_matrix_element,
    husimi_continuation,
    husimi_from_mellin,
    husimi_operator,
    husimi_pure,
    identity_resolution_defect,
    mellin_cross_elements,
    taylor_continuation,
)
from .evolution import (  # noqa: E402
    CONVENTIONS,
    BranchError,
    KernelWindow,
    PropagationPlan,
    conservation,
    husimi_rhs_direct,
    husimi_rhs_kernel,
    phi_kernel,
    propagate,
    verify_evolution,
)
