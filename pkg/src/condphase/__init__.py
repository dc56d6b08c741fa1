"""Finite-window simulation and certification toolkit for conditional
distributions of lattice filtering models: exact brute-force oracles,
transfer-matrix inference, heat-bath MCMC with monotone sandwich couplings,
and one-sided phase certificates for the low- and high-noise regimes."""

from .lattice import (
    DisorderField,
    LatticeWindow,
    ModelParams,
    SeedSpec,
    SpinField,
    beta_from_p,
    p_from_beta,
    sample_space_time_model,
    gauge_transform,
    truncation_error_bound,
)

__all__ = [
    "DisorderField",
    "LatticeWindow",
    "ModelParams",
    "SeedSpec",
    "SpinField",
    "beta_from_p",
    "p_from_beta",
    "sample_space_time_model",
    "gauge_transform",
    "truncation_error_bound",
]

__version__ = "0.1.0"
