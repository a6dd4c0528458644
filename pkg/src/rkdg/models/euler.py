"""Compressible Euler and Navier-Stokes equations and their standard test setups."""
from __future__ import annotations

import numpy as np

from .base import Dirichlet, Domain, FluxBC, Indicator, ModelError, ModelSpec, dot


class IdealGas:
    """Conversions between conserved (rho, rho v, rho E) and primitive (rho, v, p)."""

    def __init__(self, gamma=1.4, dim=2):
        if gamma <= 1.0:
            raise ModelError("gamma must exceed 1")
        self.gamma = float(gamma)
        self.dim = int(dim)

    def to_prim(self, U, check=True):
        U = np.asarray(U, dtype=float)
        d = self.dim
        rho = U[..., 0]
        if check and np.any(rho <= 0.0):
            raise ModelError("non-positive density in primitive conversion")
        with np.errstate(divide="ignore", invalid="ignore"):
            v = U[..., 1:d + 1] / rho[..., None]
        kin = 0.5 * dot(v, U[..., 1:d + 1])
        p = (self.gamma - 1.0) * (U[..., d + 1] - kin)
        return rho, v, p

    def to_cons(self, V):
        V = np.asarray(V, dtype=float)
        d = self.dim
        rho = V[..., 0]
        m = V[..., 1:d + 1] * rho[..., None]
        kin = 0.5 * dot(m, V[..., 1:d + 1])
        rE = V[..., d + 1] / (self.gamma - 1.0) + kin
        return np.concatenate([rho[..., None], m, rE[..., None]], axis=-1)

    def sound_speed(self, rho, p):
        return np.sqrt(np.maximum(self.gamma * p / rho, 0.0))

    def flux(self, U):
        rho, v, p = self.to_prim(U)
        d = self.dim
        F = np.empty(U.shape + (d,))
        F[..., 0, :] = rho[..., None] * v
        F[..., 1:d + 1, :] = U[..., 1:d + 1, None] * v[..., None, :]
        idx = np.arange(d)
        F[..., 1 + idx, idx] += p[..., None]
        F[..., d + 1, :] = (U[..., d + 1] + p)[..., None] * v
        return F

    def entropy(self, U):
        rho, _, p = self.to_prim(U, check=False)
        with np.errstate(divide="ignore", invalid="ignore"):
            return rho * np.log(p / rho**self.gamma)


def euler_model(gamma=1.4, dim=2) -> ModelSpec:
    gas = IdealGas(gamma, dim)

    def F_c(t, x, U):
        return gas.flux(U)

    def max_wave_speed(t, x, U, n):
        rho, v, p = gas.to_prim(U)
        return np.abs(dot(v, n)) + gas.sound_speed(rho, p)

    def velocity(t, x, U):
        return gas.to_prim(U, check=False)[1]

    def jump(t, x, U, V):
        pU = gas.to_prim(U, check=False)[2]
        pV = gas.to_prim(V, check=False)[2]
        with np.errstate(divide="ignore", invalid="ignore"):
            return (pU - pV) / (0.5 * (pU + pV))

    def physical(t, x, U):
        rho, _, p = gas.to_prim(U, check=False)
        return (rho > 1e-8) & (p > 1e-8)

    def eta(t, x, U):
        return gas.entropy(U)

    def ind_flux(t, x, U, DU):
        return gas.to_prim(U, check=False)[1] * gas.entropy(U)[..., None]

    return ModelSpec(
        dim_range=dim + 2, dim=dim, name="euler",
        F_c=F_c, max_wave_speed=max_wave_speed, velocity=velocity, jump=jump,
        physical=physical, indicator=Indicator(eta, ind_flux, None, uses_gradient=False), gas=gas,
    )


def navier_stokes_model(gamma=1.4, mu=1e-3, Pr=0.72) -> ModelSpec:
    """Euler plus the viscous flux with heat conduction (2D only)."""
    if mu < 0:
        raise ModelError("viscosity must be non-negative")
    base = euler_model(gamma, dim=2)
    gas = base.gas

    def F_v(t, x, U, DU):
        rho = U[..., 0]
        rhou = U[..., 1:3]
        rhoE = U[..., 3]
        grad_rho = DU[..., 0, :]
        grad_rhou = DU[..., 1:3, :]
        grad_rhoE = DU[..., 3, :]
        r2 = rho[..., None, None] ** 2
        grad_u = (grad_rhou * rho[..., None, None] - rhou[..., :, None] * grad_rho[..., None, :]) / r2
        grad_E = (grad_rhoE * rho[..., None] - rhoE[..., None] * grad_rho) / rho[..., None] ** 2
        tr = grad_u[..., 0, 0] + grad_u[..., 1, 1]
        tau = mu * (grad_u + np.swapaxes(grad_u, -1, -2) - 2.0 / 3.0 * tr[..., None, None] * np.eye(2))
        K_grad_T = mu * gas.gamma / Pr * (grad_E - np.einsum("...j,...jc->...c", rhou, grad_u) / rho[..., None])
        F = np.zeros(U.shape + (2,))
        F[..., 1:3, :] = tau
        F[..., 3, :] = np.einsum("...cj,...j->...c", tau, rhou) / rho[..., None] + K_grad_T
        return F

    return base.with_(name="navier_stokes", F_v=F_v)


def no_flow_flux(gas):
    d = gas.dim

    def flux(t, x, U, n):
        p = gas.to_prim(U)[2]
        F = np.zeros(U.shape)
        F[..., 1:d + 1] = p[..., None] * n
        return F
    return flux


def reflect(U, n):
    """Mirror the momentum of state(s) U about the plane with normal n."""
    U = np.array(U, dtype=float)
    n = np.asarray(n, dtype=float)
    d = len(n)
    m = U[..., 1:d + 1]
    U[..., 1:d + 1] = m - 2.0 * dot(m, n)[..., None] * n
    return U


def shock_bubble_states(gamma=1.4, dim=2):
    gas = IdealGas(gamma, dim)
    pinf = 5.0
    rinf = (1 - gamma + (gamma + 1) * pinf) / ((gamma + 1) + (gamma - 1) * pinf)
    vinf = (1.0 / np.sqrt(gamma)) * (pinf - 1.0) / np.sqrt(0.5 * ((gamma + 1) / gamma) * pinf
                                                            + 0.5 * (gamma - 1) / gamma)
    Ul = gas.to_cons([rinf, vinf] + (dim - 1) * [0.0] + [pinf])
    Ur = gas.to_cons([1.0] + dim * [0.0] + [1.0])
    bubble = gas.to_cons([0.1] + dim * [0.0] + [1.0])
    return Ul, Ur, bubble


PRESETS = ("sod", "shock_bubble", "shock_bubble_cylindrical", "kelvin_helmholtz")


def euler_preset(name, model=None, gamma=1.4, dim=None) -> ModelSpec:
    """Initial/boundary data for a named test on top of an Euler-type ``model``."""
    if name not in PRESETS:
        raise ModelError(f"unknown Euler preset {name!r}; choose from {PRESETS}")
    if model is None:
        dim = dim or (1 if name == "sod" else 2)
        model = euler_model(gamma, dim)
    gas = model.gas
    if gas is None:
        raise ModelError("Euler presets need a model with an ideal gas")
    d = gas.dim
    const = lambda s: Dirichlet(lambda t, x, U, s=np.asarray(s): np.broadcast_to(s, U.shape))

    if name == "sod":
        left = gas.to_cons([1.0] + d * [0.0] + [1.0])
        right = gas.to_cons([0.125] + d * [0.0] + [0.1])

        def U0(x):
            return np.where((x[..., 0] < 0.5)[..., None], left, right)

        bnd = {1: const(left), 2: const(right)}
        if d == 2:
            bnd[3] = Dirichlet(lambda t, x, U: reflect(U, [0.0, -1.0]))
            bnd[4] = Dirichlet(lambda t, x, U: reflect(U, [0.0, 1.0]))
        counts = (100,) if d == 1 else (100, 4)
        upper = (1.0,) if d == 1 else (1.0, 0.04)
        return model.with_(name="sod", U0=U0, end_time=0.2, boundary=bnd,
                           domain=Domain((0.0,) * d, upper, counts))

    if name in ("shock_bubble", "shock_bubble_cylindrical"):
        Ul, Ur, bubble = shock_bubble_states(gas.gamma, d)
        R2 = 0.2**2

        def U0(x):
            inside = np.sum(x * x, axis=-1) < R2
            u = np.where(inside[..., None], bubble, Ur)
            return np.where((x[..., 0] < -0.25)[..., None], Ul, u)

        wall = FluxBC(no_flow_flux(gas))
        bnd = {1: const(Ul), 2: const(Ur)}
        if d == 2:
            bnd.update({3: wall, 4: wall})
        if name == "shock_bubble":
            lower = (-0.5,) + (d - 1) * (-0.5,)
            upper = (1.5,) + (d - 1) * (0.5,)
            counts = (80,) + (d - 1) * (40,)
            return model.with_(name=name, U0=U0, end_time=0.5, boundary=bnd,
                               domain=Domain(lower, upper, counts))
        if d != 2:
            raise ModelError("the cylindrical shock bubble needs dim=2")
        r_min = 5e-3

        def S_e(t, x, U, DU=None):
            _, v, p = gas.to_prim(U)
            vr = v[..., 1] / x[..., 1]
            src = np.stack([U[..., 0], U[..., 1], U[..., 2], U[..., 3] + p], axis=-1)
            return -src * vr[..., None]

        ind = model.indicator

        def ind_source(t, x, U, DU):
            return -gas.entropy(U) * (U[..., 2] / U[..., 0]) / x[..., 1]

        return model.with_(name=name, U0=U0, end_time=0.5, boundary=bnd, S_e=S_e,
                           indicator=ind.__class__(ind.eta, ind.F, ind_source, uses_gradient=False),
                           domain=Domain((-0.5, r_min), (1.5, 0.5 + r_min), (80, 20)))

    # kelvin_helmholtz
    if d != 2:
        raise ModelError("Kelvin-Helmholtz needs dim=2")
    sigma = 0.05 / np.sqrt(2.0)

    def U0(x):
        inner = np.abs(x[..., 1] - 0.5) < 0.25
        rho = np.where(inner, 2.0, 1.0)
        u = np.where(inner, 0.5, -0.5)
        v = 0.1 * np.sin(4 * np.pi * x[..., 0]) * np.exp(-(x[..., 1] - 0.25) ** 2 / (2 * sigma**2))
        return gas.to_cons(np.stack([rho, u, v, np.full_like(rho, 2.5)], axis=-1))

    bnd = {3: Dirichlet(lambda t, x, U: reflect(U, [0.0, -1.0])),
           4: Dirichlet(lambda t, x, U: reflect(U, [0.0, 1.0]))}
    return model.with_(name="kelvin_helmholtz", U0=U0, end_time=1.5, boundary=bnd,
                       domain=Domain((0.0, 0.0), (1.0, 1.0), (32, 32), periodic=(True, False)))
