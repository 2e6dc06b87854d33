"""Vertex-position optimization of affine triangulations for H1 interpolation error."""

from .field import (
    FIELDS,
    EnergyWeights,
    InterpolantP1,
    ScalarField,
    convergence_study,
    eval_p1,
    get_field,
    interpolate_p1,
    phi,
    phi_reparam_1d,
)
from .mesh import (
    Interval,
    InvalidMeshError,
    MeshParseError,
    Polygon,
    Triangulation,
    ValidationReport,
    barycentric_coords,
    edges,
    read_mesh,
    simplex_volume,
    structured_square_mesh,
    uniform_interval_mesh,
    validate,
    write_mesh,
)
from .optimizer import OptimizerConfig, OptResult, fd_gradient, optimize, stationarity_check
from .quadrature import quadrature_rule
from .whitney import FORMS, OneForm, interpolate_whitney, phi_form, whitney_d, whitney_eval

__version__ = "0.1.0"
