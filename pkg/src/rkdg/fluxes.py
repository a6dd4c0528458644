"""Numerical face fluxes.

Advective fluxes are plain functions ``(model, t, x, UL, UR, n) -> (flux, speed)``
operating on batches of face quadrature points; new ones can be added with
:func:`register_flux`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models.base import ModelError, dot


def _normal_flux(F, n):
    return np.einsum("...rd,...d->...r", F, n)


def llf(model, t, x, UL, UR, n):
    """Local Lax-Friedrichs (Rusanov) flux."""
    if model.max_wave_speed is None:
        raise ModelError("LLF flux needs max_wave_speed")
    lam = np.maximum(model.max_wave_speed(t, x, UL, n), model.max_wave_speed(t, x, UR, n))
    flux = 0.5 * (_normal_flux(model.F_c(t, x, UL), n) + _normal_flux(model.F_c(t, x, UR), n))
    flux += 0.5 * lam[..., None] * (UL - UR)
    return flux, lam


def hll(model, t, x, UL, UR, n):
    """Two-wave HLL flux with Einfeldt-type speed bounds (ideal gas only)."""
    gas = getattr(model, "gas", None)
    if gas is None:
        raise ModelError("HLL flux requires an Euler-type model")
    rl, vl, pl = gas.to_prim(UL)
    rr, vr, pr = gas.to_prim(UR)
    unl = dot(vl, n)
    unr = dot(vr, n)
    cl = gas.sound_speed(rl, pl)
    cr = gas.sound_speed(rr, pr)
    sl = np.minimum(unl - cl, unr - cr)
    sr = np.maximum(unl + cl, unr + cr)
    FL = _normal_flux(model.F_c(t, x, UL), n)
    FR = _normal_flux(model.F_c(t, x, UR), n)
    denom = np.where(sr - sl > 0, sr - sl, 1.0)
    mid = (sr[..., None] * FL - sl[..., None] * FR + (sl * sr)[..., None] * (UR - UL)) / denom[..., None]
    flux = np.where((sl >= 0)[..., None], FL, np.where((sr <= 0)[..., None], FR, mid))
    return flux, np.maximum(np.abs(sl), np.abs(sr))


ADVECTIVE_FLUXES = {"llf": llf, "default": llf, "hll": hll}


def register_flux(name, fn):
    ADVECTIVE_FLUXES[name] = fn


def get_flux(name_or_fn):
    if callable(name_or_fn):
        return name_or_fn
    try:
        return ADVECTIVE_FLUXES[name_or_fn]
    except KeyError:
        raise ModelError(f"unknown advective flux {name_or_fn!r}") from None


def default_penalty(order, dim):
    return (order + 1) * (order + dim) / dim


@dataclass(frozen=True)
class InteriorPenalty:
    """Symmetric interior penalty treatment of F_v.

    ``face`` returns the single-valued flux {F_v(U, DU)}.n - pen/h_e F_v(avg U, [[U]] x n).n
    together with F_v(U_side, [[U]] x n) on both sides, which the operator
    contracts with the test-function gradients for the symmetrising term.
    """

    penalty: float

    def __post_init__(self):
        if not self.penalty > 0:
            raise ModelError("interior penalty parameter must be positive")

    def face(self, model, t, x, UL, UR, DUL, DUR, n, h_e):
        jn = (UL - UR)[..., :, None] * n[..., None, :]
        avg = 0.5 * (_normal_flux(model.F_v(t, x, UL, DUL), n) + _normal_flux(model.F_v(t, x, UR, DUR), n))
        pen = _normal_flux(model.F_v(t, x, 0.5 * (UL + UR), jn), n)
        flux = avg - (self.penalty / np.asarray(h_e))[..., None] * pen
        return flux, model.F_v(t, x, UL, jn), model.F_v(t, x, UR, jn)


def interior_penalty(model, t, x, UL, UR, DUL, DUR, n, h_e, penalty):
    return InteriorPenalty(penalty).face(model, t, x, UL, UR, DUL, DUR, n, h_e)
