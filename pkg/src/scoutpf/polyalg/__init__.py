"""Truncated multivariate Taylor arithmetic and polynomial map inversion."""

from .basis import Basis, basis_size, get_basis
from .maps import (
    DEFAULT_MAX_CONDITION,
    MapInversionError,
    PolynomialMap,
    compose,
    condition_number,
    dump_map,
    invert,
    linear_part,
    parse_dump,
    stack_maps,
)
from .poly import (
    SingularExpansionError,
    TruncatedPolynomial,
    arcsin,
    arctan,
    atan2,
    cos,
    exp,
    intrinsic,
    log,
    make_variable,
    make_variables,
    power,
    reciprocal,
    sin,
    sqrt,
)

__all__ = [
    "Basis", "basis_size", "get_basis",
    "DEFAULT_MAX_CONDITION", "MapInversionError", "PolynomialMap", "compose",
    "condition_number", "dump_map", "invert", "linear_part", "parse_dump", "stack_maps",
    "SingularExpansionError", "TruncatedPolynomial", "arcsin", "arctan", "atan2", "cos",
    "exp", "intrinsic", "log", "make_variable", "make_variables", "power", "reciprocal",
    "sin", "sqrt",
]
