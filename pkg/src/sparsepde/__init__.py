"""Identify evolutionary PDEs from noisy gridded data.

Pipeline: successively denoised differentiation (SDD) builds a feature
matrix over a fixed dictionary, Subspace Pursuit proposes sparse supports,
and either time evolution (ST) or cross validation (SC) picks one.
"""

from .dictionary import Coefficients, DictionarySpec, dictionary_for, render_pde
from .grid import Field, GridError, SpaceTimeGrid, read_field, write_field
from .identify import IdentificationReport, ScConfig, StConfig, prepare, sc, st
from .metrics import coefficient_error, residual_error
from .simulate import NoiseSpec, add_noise, builtin_experiment
from .smoothing import SmootherSpec, sdd

__all__ = [
    "Coefficients", "DictionarySpec", "Field", "GridError", "IdentificationReport",
    "NoiseSpec", "ScConfig", "SmootherSpec", "SpaceTimeGrid", "StConfig", "add_noise",
    "builtin_experiment", "coefficient_error", "dictionary_for", "prepare", "read_field",
    "render_pde", "residual_error", "sc", "sdd", "st", "write_field",
]

__version__ = "0.1.0"
