"""Named test problems: model factories, exact solutions and error norms."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .basis import volume_quadrature
from .models import (
    advection_model,
    euler_preset,
    heat_exact,
    heat_model,
    linear_advection_model,
    navier_stokes_model,
    reaction_model,
    rotating_hump,
    rotating_hump_model,
)
from .models.base import Domain, ModelError
from .riemann import RiemannExact


@dataclass
class Problem:
    """A model factory with an optional exact solution ``exact(t, x) -> (M, r)``."""

    name: str
    build: Callable
    exact: Optional[Callable] = None
    description: str = ""


def _sod_exact(model):
    gas = model.gas
    d = gas.dim
    left = gas.to_prim(np.asarray(model.U0(np.array([[0.25] + [0.0] * (d - 1)]))))
    right = gas.to_prim(np.asarray(model.U0(np.array([[0.75] + [0.0] * (d - 1)]))))
    prim = lambda s: (float(s[0][0]), float(s[1][0, 0]), float(s[2][0]))
    riemann = RiemannExact(gas.gamma, prim(left), prim(right))

    def exact(t, x):
        x = np.asarray(x)
        r, u, p = np.moveaxis(riemann(x[..., 0], t, 0.5), -1, 0)
        V = np.zeros(x.shape[:-1] + (d + 2,))
        V[..., 0], V[..., 1], V[..., -1] = r, u, p
        return gas.to_cons(V)

    return exact


def _advection_1d(velocity=1.0, end_time=1.0, **kw):
    return linear_advection_model((float(velocity),), end_time=end_time, **kw)


def _advection_1d_exact(model):
    v = float(np.asarray(model.velocity(0.0, np.zeros((1, 1)), None))[0, 0])
    return lambda t, x: np.sin(2 * np.pi * (x[..., 0] - v * t))[..., None]


def _kh(mu=1e-3, gamma=1.4, Pr=0.72):
    return euler_preset("kelvin_helmholtz", navier_stokes_model(gamma, mu, Pr))


def _euler(name):
    def build(gamma=1.4, dim=None):
        return euler_preset(name, gamma=gamma, dim=dim)
    return build


PROBLEMS = {
    "three_body": Problem("three_body", advection_model, None,
                          "rotating cube, slotted cylinder and hump"),
    "rotating_hump": Problem("rotating_hump", rotating_hump_model, lambda m: rotating_hump(),
                             "smooth rotating Gaussian"),
    "advection_1d": Problem("advection_1d", _advection_1d, _advection_1d_exact,
                            "periodic sin(2 pi x) transport"),
    "heat": Problem("heat", heat_model, None, "periodic heat equation"),
    "sod": Problem("sod", _euler("sod"), _sod_exact, "Sod shock tube"),
    "shock_bubble": Problem("shock_bubble", _euler("shock_bubble"), None, "shock hitting a light bubble"),
    "shock_bubble_cylindrical": Problem("shock_bubble_cylindrical", _euler("shock_bubble_cylindrical"),
                                        None, "axisymmetric shock-bubble in (x, r)"),
    "kelvin_helmholtz": Problem("kelvin_helmholtz", _kh, None, "compressible Navier-Stokes shear layer"),
    "reaction": Problem("reaction", reaction_model, None, "advected three-species reaction"),
}


def get_problem(name) -> Problem:
    try:
        return PROBLEMS[name]
    except KeyError:
        raise ModelError(f"unknown problem {name!r}; known: {sorted(PROBLEMS)}") from None


def build_problem(name, **params):
    """Model and exact solution (or None) for a registered problem."""
    prob = get_problem(name)
    if name == "heat":
        eps = float(params.pop("eps", 0.01))
        model = heat_model(eps, **params)
        return model, heat_exact(eps)
    model = prob.build(**params)
    exact = prob.exact(model) if prob.exact is not None else None
    return model, exact


def with_domain(model, counts=None, lower=None, upper=None, periodic=None):
    """Copy of ``model`` whose default domain has the given overrides."""
    dom = model.domain
    new = Domain(tuple(lower or dom.lower), tuple(upper or dom.upper), tuple(counts or dom.counts),
                 tuple(periodic if periodic is not None else dom.periodic))
    return model.with_(domain=new)


def error_norms(U, exact, t, component=None, extra_order=2):
    """L1, L2 and Linf errors against ``exact`` using a (k+1+extra_order)-point Gauss rule per axis."""
    mesh = U.mesh
    sp = U.space
    q = volume_quadrature("gauss", sp.order + extra_order, sp.dim)
    vals = U.values(q.points)                                   # (N, nq, r)
    x = mesh.corner[:, None, :] + mesh.h[:, None, :] * q.points[None]
    ex = np.asarray(exact(t, x.reshape(-1, sp.dim))).reshape(vals.shape)
    err = vals - ex
    if component is not None:
        err = err[..., [component]]
    w = mesh.volumes[:, None] * q.weights[None, :]
    l1 = float(np.sum(w[..., None] * np.abs(err)))
    l2 = float(np.sqrt(np.sum(w[..., None] * err**2)))
    return {"l1": l1, "l2": l2, "linf": float(np.max(np.abs(err))) if err.size else 0.0}
