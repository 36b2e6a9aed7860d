from .grid import DomainSpec, Grid, build_grid, box_domain
from .operators import (
    ScalarField,
    HField,
    horizontal_gradient,
    adjoint_apply,
    p_energy,
    lp_norm,
    rayleigh_quotient,
    p_laplacian_apply,
    stiffness_matrix,
    poincare_norm,
    natural_norm,
    sample_field
)

__all__ = [
    "DomainSpec",
    "Grid",
    "build_grid",
    "box_domain",
    "ScalarField",
    "HField",
    "horizontal_gradient",
    "adjoint_apply",
    "p_energy",
    "lp_norm",
    "rayleigh_quotient",
    "p_laplacian_apply",
    "stiffness_matrix",
    "poincare_norm",
    "natural_norm",
    "sample_field"
]
