"""Fermi-surface topology, magnetic orbit tracing, stability zones and
asymptotic magnetotransport tensors for 3-periodic dispersion relations."""

__version__ = "0.1.0"

from .lattice import (
    LatticeBasis,
    FieldDirection,
    IntegerPlane,
    Irrationality,
    reciprocal_basis,
    default_basis,
    classify_direction,
    integer_plane_from_directions,
)
from .dispersion import (
    DispersionModel,
    EnergyLevel,
    make_anferms,
    make_thin_net,
    evaluate,
    gradient,
    hessian,
    fermi_occupation,
    net_current,
    band_range,
    model_sum,
    model_product,
    model_scale,
    model_shift,
)

__all__ = [
    "LatticeBasis", "FieldDirection", "IntegerPlane", "Irrationality",
    "reciprocal_basis", "default_basis", "classify_direction",
    "integer_plane_from_directions",
    "DispersionModel", "EnergyLevel", "make_anferms", "make_thin_net",
    "evaluate", "gradient", "hessian", "fermi_occupation", "net_current",
    "band_range", "model_sum", "model_product", "model_scale", "model_shift",
]
