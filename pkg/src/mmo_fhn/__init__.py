"""Stochastic FitzHugh-Nagumo mixed-mode oscillations."""
from ._jit import BACKEND
from .core import (
    AngleState,
    angle_sde_coeffs,
    f_derivatives,
    first_integral,
    from_angle,
    implicit_f,
    original_to_scaled,
    q_drift,
    scaled_to_original,
    to_angle,
)
from .errors import FhnError
from .params import DerivedParams, ModelParams, derive_params, params_from_scaled
from .rng import RngStream, make_rng_stream

__version__ = "0.1.0"
