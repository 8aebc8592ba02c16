"""Brascamp–Lieb data toolkit: finiteness, gaussian constants, transversality and numerical labs."""

from .datum import BLDatum, ExponentVector, SubspaceDatum, dual, scaling_defect, to_subspace_form, validate
from .finiteness import SearchBudget, decide_finiteness, dimension_defect, transversality_defect
from .gaussian import GaussianTuple, bl_ratio, compute_constant, duality_ratio
from .linalg import Matrix, Subspace

__version__ = "0.1.0"
