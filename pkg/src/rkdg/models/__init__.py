from .advection import (
    advection_model,
    heat_exact,
    heat_model,
    linear_advection_model,
    ode_model,
    rotating_hump,
    rotating_hump_model,
    rotation_velocity,
    three_body_initial,
)
from .base import Dirichlet, Domain, FluxBC, Indicator, ModelError, ModelSpec, normalize_boundary
from .euler import (
    IdealGas,
    euler_model,
    euler_preset,
    navier_stokes_model,
    no_flow_flux,
    reflect,
    shock_bubble_states,
)
from .reaction import reaction_model, reaction_velocity

__all__ = [
    "Dirichlet", "Domain", "FluxBC", "IdealGas", "Indicator", "ModelError", "ModelSpec",
    "advection_model", "euler_model", "euler_preset", "heat_exact", "heat_model",
    "linear_advection_model", "navier_stokes_model", "no_flow_flux", "normalize_boundary",
    "ode_model", "reaction_model", "reaction_velocity", "reflect", "rotating_hump",
    "rotating_hump_model", "rotation_velocity", "shock_bubble_states", "three_body_initial",
]
