"""Simulation and numerical verification of a controlled heavy-tailed workload system."""
from .model import ModelParams, ParamError, PolicySpec, alpha_window, intensity_eval, policy_eval, validate_params

__all__ = ["ModelParams", "ParamError", "PolicySpec", "alpha_window", "intensity_eval",
           "policy_eval", "validate_params"]
