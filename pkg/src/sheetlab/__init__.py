"""Operator scaling stable random sheets: scaling matrices, polar
coordinates, scale integrals, synthesis and fractal estimators."""
from .linalg import BlockLayout, DomainError, InvalidInput, NumericalError, mat_power
from .polar import polar, polar_context, radial_part
from .homogeneous import PsiSpec, ValidationFailed, psi_eval, validate_psi
from .scale import (DivergenceError, SheetSpec, existence_check, gamma, gamma_block,
                    sigma, verify_scaling_laws)
from .synthesis import (FieldRealization, GridSpec, SliceSpec, read_field, slice_field,
                        synthesize, synthesize_gaussian, synthesize_stable, write_field)
from .fracdim import box_count, box_dimension, energy_estimate, holder_exponent

__version__ = "0.1.0"
