"""Certified bounds on generalized spectra of periodic operator pencils."""
from .catalog import (
    PRESET_NAMES,
    PhaseLayout,
    assemble_multiphase_L,
    build_preset,
    check_key_identity,
    checkerboard,
    disk_inclusion,
    laminate,
    single_phase,
)
from .errors import SpectralGateError
from .fields import Field, Grid, TensorShape, inner_product, norm, random_field, transform
from .pencil import (
    CoercivityCertificate,
    OperatorField,
    OperatorPencil,
    bound_beta,
    evaluate_pencil,
    local_alpha,
    multiphase_pencil,
    translated_alpha,
)
from .projections import SymbolMap, apply_gamma1, apply_gamma2, build_projection, verify_subspace_orthogonality
from .solvers import (
    analytic_property_check,
    dense_oracle_solve,
    inverse_form_solve,
    neumann_solve,
    splitting_solve,
)
from .spectrum import ScanSpec, SpectrumMap, bloch_assemble, bloch_scan, eigen_oracle_spectrum, map_spectrum_region
from .translations import Translation, certify_coercivity, qstar_min_eig, rotation_translation_2d, zero_translation

__all__ = [
    "PRESET_NAMES",
    "PhaseLayout",
    "assemble_multiphase_L",
    "build_preset",
    "check_key_identity",
    "checkerboard",
    "disk_inclusion",
    "laminate",
    "single_phase",
    "SpectralGateError",
    "Field",
    "Grid",
    "TensorShape",
    "inner_product",
    "norm",
    "random_field",
    "transform",
    "CoercivityCertificate",
    "OperatorField",
    "OperatorPencil",
    "bound_beta",
    "evaluate_pencil",
    "local_alpha",
    "multiphase_pencil",
    "translated_alpha",
    "SymbolMap",
    "apply_gamma1",
    "apply_gamma2",
    "build_projection",
    "verify_subspace_orthogonality",
    "analytic_property_check",
    "dense_oracle_solve",
    "inverse_form_solve",
    "neumann_solve",
    "splitting_solve",
    "ScanSpec",
    "SpectrumMap",
    "bloch_assemble",
    "bloch_scan",
    "eigen_oracle_spectrum",
    "map_spectrum_region",
    "Translation",
    "certify_coercivity",
    "qstar_min_eig",
    "rotation_translation_2d",
    "zero_translation",
]

__version__ = "0.1.0"
