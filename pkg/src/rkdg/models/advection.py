"""Scalar model problems: rotating three-body advection and simple test laws."""
from __future__ import annotations

import numpy as np

from .base import Dirichlet, Domain, Indicator, ModelSpec, dot


def rotation_velocity(x):
    """Solid-body rotation about (0.5, 0.5)."""
    out = np.empty_like(x, dtype=float)
    np.subtract(0.5, x[..., 1], out=out[..., 0])
    np.subtract(x[..., 0], 0.5, out=out[..., 1])
    return out


def three_body_initial(x):
    x0, x1 = x[..., 0], x[..., 1]
    cube = (x0 > 0.6) & (x0 < 0.8) & (x1 > 0.2) & (x1 < 0.4)
    in_cyl = (x0 - 0.5) ** 2 + (x1 - 0.75) ** 2 < 0.01
    slot = ((np.abs(x0 - 0.5) >= 0.02) & (x1 < 0.8)) | (x1 >= 0.8)
    r = np.sqrt((x0 - 0.25) ** 2 + (x1 - 0.5) ** 2)
    hump = np.where(r**2 < 0.01, 2.0 / 3.0 * (0.5 + np.cos(np.pi * r / 0.15)), 0.0)
    u = cube.astype(float) + (in_cyl & slot).astype(float) + hump
    return u[..., None]


def _linear_flux(velocity):
    def F_c(t, x, U):
        return U[..., :, None] * velocity(x)[..., None, :]
    return F_c


def _linear_speed(velocity):
    def max_wave_speed(t, x, U, n):
        return np.abs(dot(velocity(x), n))
    return max_wave_speed


def advection_model() -> ModelSpec:
    """Rotating cube / slotted cylinder / hump over half a revolution."""
    F_c = _linear_flux(rotation_velocity)

    def physical(t, x, U):
        return (U[..., 0] > -1e-8) & (U[..., 0] < 1.0 + 1e-8)

    return ModelSpec(
        dim_range=1,
        dim=2,
        name="three_body",
        U0=three_body_initial,
        end_time=np.pi,
        domain=Domain((0.0, 0.0), (1.0, 1.0), (10, 10)),
        F_c=F_c,
        max_wave_speed=_linear_speed(rotation_velocity),
        velocity=lambda t, x, U: rotation_velocity(x),
        jump=lambda t, x, U, V: U[..., 0] - V[..., 0],
        physical=physical,
        lower_bound=[0.0],
        upper_bound=[1.0],
        boundary={range(1, 5): Dirichlet(lambda t, x, U: np.zeros_like(U))},
        indicator=Indicator(
            eta=lambda t, x, U: U[..., 0],
            F=lambda t, x, U, DU: F_c(t, x, U)[..., 0, :],
            S=None,
            uses_gradient=False,
        ),
    )


def linear_advection_model(velocity=(1.0,), U0=None, domain=None, end_time=1.0) -> ModelSpec:
    """Constant-velocity scalar advection, periodic by default."""
    vel = np.asarray(velocity, dtype=float)
    d = len(vel)

    def v(x):
        return np.broadcast_to(vel, x.shape)

    if U0 is None:
        U0 = lambda x: np.sin(2 * np.pi * np.sum(x, axis=-1))[..., None]
    if domain is None:
        domain = Domain((0.0,) * d, (1.0,) * d, (16,) * d, periodic=(True,) * d)
    F_c = _linear_flux(v)
    return ModelSpec(
        dim_range=1, dim=d, name="linear_advection", U0=U0, end_time=end_time, domain=domain,
        F_c=F_c, max_wave_speed=_linear_speed(v),
        velocity=lambda t, x, U: v(x),
        jump=lambda t, x, U, V: U[..., 0] - V[..., 0],
        boundary={range(1, 5): Dirichlet(lambda t, x, U: np.zeros_like(U))},
        indicator=Indicator(eta=lambda t, x, U: U[..., 0],
                            F=lambda t, x, U, DU: F_c(t, x, U)[..., 0, :], uses_gradient=False),
    )


def rotating_hump(center=(0.25, 0.5), width=0.08):
    """Smooth Gaussian hump and its exact rotated position at time t."""
    c = np.asarray(center)

    def exact(t, x):
        ct, st = np.cos(t), np.sin(t)
        y = x - 0.5
        # rotate back by -t
        y0 = np.stack([ct * y[..., 0] + st * y[..., 1], -st * y[..., 0] + ct * y[..., 1]], axis=-1)
        r2 = np.sum((y0 + 0.5 - c) ** 2, axis=-1)
        return np.exp(-r2 / width**2)[..., None]

    return exact


def rotating_hump_model(end_time=np.pi / 2) -> ModelSpec:
    exact = rotating_hump()
    base = advection_model()
    return base.with_(name="rotating_hump", U0=lambda x: exact(0.0, x), end_time=end_time,
                      domain=Domain((0.0, 0.0), (1.0, 1.0), (16, 16)))


def heat_model(eps=0.01, domain=None, end_time=0.5) -> ModelSpec:
    """u_t = eps u_xx with sin(2 pi x) data on the periodic unit interval."""
    if domain is None:
        domain = Domain((0.0,), (1.0,), (16,), periodic=(True,))
    return ModelSpec(
        dim_range=1, dim=domain.dim, name="heat",
        U0=lambda x: np.sin(2 * np.pi * x[..., 0])[..., None],
        end_time=end_time, domain=domain,
        F_v=lambda t, x, U, DU: eps * DU,
        boundary={range(1, 5): Dirichlet(lambda t, x, U: np.zeros_like(U))},
    )


def heat_exact(eps):
    def exact(t, x):
        return (np.exp(-4 * np.pi**2 * eps * t) * np.sin(2 * np.pi * x[..., 0]))[..., None]
    return exact


def ode_model(rhs, u0=1.0, stiff=False, end_time=1.0) -> ModelSpec:
    """Pointwise ODE u' = rhs(t, u) on a single periodic cell.

    ``stiff`` puts the right-hand side into the implicit source slot.
    """
    def S(t, x, U, DU=None):
        return rhs(t, U)

    kw = {"S_i": S} if stiff else {"S_e": S}
    return ModelSpec(
        dim_range=1, dim=1, name="ode",
        U0=lambda x: np.full((len(x), 1), u0),
        end_time=end_time,
        domain=Domain((0.0,), (1.0,), (1,), periodic=(True,)),
        **kw,
    )
