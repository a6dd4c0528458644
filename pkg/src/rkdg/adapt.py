"""Residual-based refinement indicator and the mesh adaptation driver.

For an auxiliary scalar law  d_t eta(U) + div F(U, DU) = S(U, DU)  satisfied by
smooth solutions, the per-cell indicator over one time step is

    eta_E^2 = h_E^2 |R_vol|^2_E + 1/2 sum_e ( h_e |R_e2|^2_e + |R_e1|^2_e / h_e )

with R_vol the discrete residual of the law at the step midpoint, R_e2 the
jump of the normal midpoint flux and R_e1 the jump of the midpoint eta over
interior faces.  h_E is the largest cell edge and h_e the mean volume of the
two cells divided by the face area.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .dgop import DiscreteFunction, interpolate
from .models.base import ModelError, dot
from .plan import MeshPlan

FD_STEP = 1e-4  # finite-difference step for div F, relative to the cell size


def _as_dofs(U):
    return U.dofs if isinstance(U, DiscreteFunction) else np.asarray(U, dtype=float)


def _shifted(plan, dofs, shift, grads=True):
    """Points, values and gradients (None unless ``grads``) at the volume nodes moved by ``shift``."""
    sp = plan.space
    key = tuple(float(v) for v in shift)
    cache = sp.__dict__.setdefault("_shifted_bases", {})
    if key not in cache:
        xi = sp.quad.points + np.asarray(shift)[None, :]
        cache[key] = (xi, sp.eval(xi), sp.eval_grad(xi))
    xi, B, G = cache[key]
    points = plan.__dict__.setdefault("_shifted_points", {})
    if key not in points:
        points[key] = plan.mesh.corner[:, None, :] + plan.h[:, None, :] * xi[None]
    x = points[key]
    U = kernels.cell_eval(dofs, B, plan.s)
    DU = None
    if grads:
        DU = np.empty(U.shape + (plan.dim,))
        for a in range(plan.dim):
            DU[..., a] = kernels.cell_eval(dofs, G[a], plan.ginv[:, a])
    return x, U, DU


def _flat(x, U, DU):
    d = x.shape[-1]
    r = U.shape[-1]
    return x.reshape(-1, d), U.reshape(-1, r), None if DU is None else DU.reshape(-1, r, d)


def _div_flux(ind, plan, dofs, t):
    """Divergence of the indicator flux at the volume points by central differences."""
    d = plan.dim
    div = np.zeros((plan.N, plan.nq))
    for a in range(d):
        e = np.zeros(d)
        e[a] = FD_STEP
        xp, Up, Dp = _shifted(plan, dofs, e, ind.uses_gradient)
        xm, Um, Dm = _shifted(plan, dofs, -e, ind.uses_gradient)
        Fp = np.asarray(ind.F(t, *_flat(xp, Up, Dp)))[:, a].reshape(plan.N, plan.nq)
        Fm = np.asarray(ind.F(t, *_flat(xm, Um, Dm)))[:, a].reshape(plan.N, plan.nq)
        div += (Fp - Fm) / (2.0 * FD_STEP * plan.h[:, a, None])
    return div


def estimate(model, plan: MeshPlan, U_old, U_new, t, dt):
    """Per-cell squared indicator eta_E^2 for the step (t, U_old) -> (t+dt, U_new)."""
    ind = model.indicator
    if ind is None:
        raise ModelError("the residual estimator needs an Indicator on the model")
    if not dt > 0:
        raise ValueError("time step must be positive")
    old, new = _as_dofs(U_old), _as_dofs(U_new)
    d = plan.dim
    N, nq = plan.N, plan.nq
    r = old.shape[1]
    t1 = t + dt

    def vol(dofs, tt):
        x, U, DU = _shifted(plan, dofs, np.zeros(d), ind.uses_gradient)
        xf, Uf, Df = _flat(x, U, DU)
        eta = np.asarray(ind.eta(tt, xf, Uf)).reshape(N, nq)
        S = np.zeros((N, nq)) if ind.S is None else np.asarray(ind.S(tt, xf, Uf, Df)).reshape(N, nq)
        return eta, S

    eta0, S0 = vol(old, t)
    eta1, S1 = vol(new, t1)
    R_vol = (eta1 - eta0) / dt + 0.5 * (_div_flux(ind, plan, old, t) + _div_flux(ind, plan, new, t1)) \
        - 0.5 * (S0 + S1)
    hT = np.max(plan.h, axis=1)
    est = hT**2 * np.sum(plan.wq * R_vol**2, axis=1)

    inter = plan.interior
    inter = inter[plan.inside[inter] != plan.outside[inter]]
    if len(inter):
        nqf = plan.nqf
        n = np.repeat(plan.normal[inter], nqf, axis=0)
        x = plan.xf[inter].reshape(-1, d)
        eta_mid = {}
        flux_mid = {}
        for dofs, tt in ((old, t), (new, t1)):
            UL, UR = plan.face_values(dofs)
            DL, DR = plan.face_grads(dofs) if ind.uses_gradient else (UL, UR)
            for side, Us, Ds in (("in", UL, DL), ("out", UR, DR)):
                u = Us[inter].reshape(-1, r)
                du = Ds[inter].reshape(-1, r, d) if ind.uses_gradient else None
                e = 0.5 * np.asarray(ind.eta(tt, x, u))
                f = 0.5 * dot(np.asarray(ind.F(tt, x, u, du)), n)
                eta_mid[side] = eta_mid.get(side, 0.0) + e
                flux_mid[side] = flux_mid.get(side, 0.0) + f
        R_e1 = (eta_mid["in"] - eta_mid["out"]).reshape(-1, nqf)
        R_e2 = (flux_mid["in"] - flux_mid["out"]).reshape(-1, nqf)
        w = plan.wf[inter]
        he = plan.h_e[inter]
        face = 0.5 * (he * np.sum(w * R_e2**2, axis=1) + np.sum(w * R_e1**2, axis=1) / he)
        est += np.bincount(plan.inside[inter], face, minlength=N)
        est += np.bincount(plan.outside[inter], face, minlength=N)
    return np.maximum(est, 0.0)


@dataclass
class AdaptDriver:
    """Initial refinement bootstrap and per-step marking/adaptation.

    ``op`` and ``stepper`` are the spatial operator and time stepper acting on
    the solution; ``initial_coarsen`` and ``step_coarsen`` are the factors
    applied to the refinement tolerance when marking.
    """

    op: object
    stepper: object
    max_level: int
    min_level: int = 0
    initial_coarsen: float = 0.2
    step_coarsen: float = 0.1
    time_tol: float = None
    last_indicator: np.ndarray = None

    @property
    def mesh(self):
        return self.op.mesh

    @property
    def model(self):
        return self.op.model

    def max_size(self, base_cells=None):
        mesh = self.mesh
        n0 = int(np.prod(mesh.counts)) if base_cells is None else base_cells
        return n0 * 2 ** (mesh.dim * self.max_level)

    def _refresh_estimate(self, U):
        # the cached CFL estimate belongs to the old mesh
        self.stepper.dt_estimate = None
        self.op.last_estimate = None

    def initial_adapt(self, U: DiscreteFunction, U0=None):
        """Refine towards the initial data; returns the time tolerance."""
        model = self.model
        U0 = U0 or model.U0
        max_size = self.max_size()
        T = model.end_time
        if not T > 0:
            raise ValueError("initial adaptation needs a positive end time")
        t0 = self.op.time
        for _ in range(self.max_level + 1):
            trial = U.copy()
            dt = self.stepper(trial)
            self.op.set_time(t0)
            eta2 = estimate(model, self.op.plan, U, trial, t0, dt)
            self.last_indicator = eta2
            self.time_tol = float(np.sum(eta2)) / T / max_size
            h_tol = self.time_tol * dt
            self.mesh.mark(eta2, h_tol, self.initial_coarsen * h_tol, self.min_level, self.max_level)
            self.mesh.adapt([U])
            fresh = interpolate(U.space, self.mesh, U0)
            U.dofs = fresh.dofs
            U.mesh_version = fresh.mesh_version
            self.op.apply_limiter(U)
            self._refresh_estimate(U)
        self.stepper.ledger[:] = 0.0
        return self.time_tol

    def adapt_step(self, U_old, U_new: DiscreteFunction, t, dt):
        """Estimate the last step, mark and adapt; ``U_new`` is transferred in place."""
        if self.time_tol is None:
            raise ValueError("initial_adapt must run before adapt_step")
        eta2 = estimate(self.model, self.op.plan, U_old, U_new, t, dt)
        self.last_indicator = eta2
        h_tol = self.time_tol * dt
        n_ref, n_coarse = self.mesh.mark(eta2, h_tol, self.step_coarsen * h_tol, self.min_level, self.max_level)
        if n_ref or n_coarse:
            version = self.mesh.version
            self.mesh.adapt([U_new])
            if self.mesh.version != version:
                self._refresh_estimate(U_new)
                # transferred polynomials may leave the admissible set at new nodes
                self.op.apply_limiter(U_new)
        return n_ref, n_coarse


def initial_adapt(driver: AdaptDriver, U, U0=None):
    return driver.initial_adapt(U, U0)


def adapt_step(driver: AdaptDriver, U_old, U_new, t, dt):
    return driver.adapt_step(U_old, U_new, t, dt)
