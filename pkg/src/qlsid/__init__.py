"""Quantum linear systems: analysis, global minimality and identification from power spectra."""

from .analysis import (
    find_symplectic_between,
    is_globally_minimal,
    is_hurwitz,
    is_minimal,
    spectrum_at,
    stationary_covariance,
    transfer_at,
)
from .cascade import build_cascade, cascade_minimality_check, gilbert_realization, is_proper_lbt
from .dup import delta, flat, flat_factorize, is_doubled_up, is_symplectic
from .estimation import fit_realization, identify_from_data, synthesize_dataset
from .identification import identify, reconstruct, recover_t2
from .model import GaussianInput, QlsParams, StateSpace, build_state_space, reduce_to_vacuum_input

__all__ = [
    "GaussianInput",
    "QlsParams",
    "StateSpace",
    "build_cascade",
    "build_state_space",
    "cascade_minimality_check",
    "delta",
    "find_symplectic_between",
    "fit_realization",
    "flat",
    "flat_factorize",
    "gilbert_realization",
    "identify",
    "identify_from_data",
    "is_doubled_up",
    "is_globally_minimal",
    "is_hurwitz",
    "is_minimal",
    "is_proper_lbt",
    "is_symplectic",
    "reconstruct",
    "recover_t2",
    "reduce_to_vacuum_input",
    "spectrum_at",
    "stationary_covariance",
    "synthesize_dataset",
    "transfer_at",
]
