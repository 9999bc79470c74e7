"""Lattice laboratory for the Yang-Mills heat flow and its linearisation."""

__version__ = "0.1.0"

from . import lie_algebra, lattice_forms, covariant_calculus, heat_flow, variational_flow  # noqa: F401
from .errors import YMLabError  # noqa: F401
