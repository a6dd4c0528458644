"""Discrete functions and the DG spatial operator.

For a model  d_t U + div(F_c(U) - F_v(U, DU)) = S_e + S_i  the operator returns
the mass-inverted right-hand side of the semi-discrete system, with the
limiter applied to its argument first (L~ = L o Pi).  The split parts are
``EXPLICIT`` (F_c and S_e) and ``IMPLICIT`` (F_v and S_i).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import kernels
from .basis import Space, project_cells
from .fluxes import InteriorPenalty, default_penalty, get_flux
from .mesh import Mesh
from .models.base import Dirichlet, FluxBC, ModelSpec
from .plan import MeshPlan
from .stabilize import Limiter, LimiterConfig

FULL = "full"
EXPLICIT = "explicit"
IMPLICIT = "implicit"
PARTS = (FULL, EXPLICIT, IMPLICIT)


class OperatorError(RuntimeError):
    pass


class DiscreteFunction:
    """Coefficient blocks ``dofs`` (cells, dim_range, basis_size) on one mesh version."""

    def __init__(self, space: Space, mesh: Mesh, dofs=None, name="u_h"):
        self.space = space
        self.mesh = mesh
        self.name = name
        shape = (mesh.n_cells, space.dim_range, space.basis_size)
        if dofs is None:
            dofs = np.zeros(shape)
        dofs = np.array(dofs, dtype=float)
        if dofs.shape != shape:
            raise ValueError(f"dof array has shape {dofs.shape}, expected {shape}")
        self.dofs = dofs
        self.mesh_version = mesh.version

    def copy(self, name=None) -> "DiscreteFunction":
        return DiscreteFunction(self.space, self.mesh, self.dofs, name or self.name)

    def is_current(self) -> bool:
        return self.mesh_version == self.mesh.version and len(self.dofs) == self.mesh.n_cells

    def means(self) -> np.ndarray:
        return self.space.means(self.dofs, self.mesh.volumes)

    def totals(self) -> np.ndarray:
        """Integral of every component over the domain."""
        return self.mesh.volumes @ self.means()

    def values(self, xi) -> np.ndarray:
        """Point values (cells, M, r) at reference points ``xi``."""
        B = self.space.eval(xi)
        s = self.space.scale(self.mesh.volumes)
        return np.einsum("qb,nrb->nqr", B, self.dofs) * s[:, None, None]

    def quadrature_values(self) -> np.ndarray:
        """All values at volume and face quadrature points, (cells, M, r)."""
        sp = self.space
        pts = [sp.quad.points] + [sp.face_points(tt) for tt in range(0, 6 * sp.dim, 3)]
        return self.values(np.concatenate(pts))


def interpolate(space: Space, mesh: Mesh, f, name="u_h") -> DiscreteFunction:
    """Projection (ONB) or nodal interpolation (nodal kinds) of ``f(x) -> (M, r)``."""
    dofs = project_cells(space, mesh.corner, mesh.h, f)
    if dofs.shape[1] != space.dim_range:
        raise ValueError("function range does not match the space")
    return DiscreteFunction(space, mesh, dofs, name)


class SpatialOperator:
    """Assembled DG right-hand side for a model on a (possibly adapted) mesh.

    Parameters
    ----------
    model
        Problem description.
    space
        Discrete space; its ``dim_range`` must match the model.
    mesh
        Mesh the solution lives on (held by reference; adaptation is picked up).
    flux
        Name or callable of the advective numerical flux.
    penalty
        Interior penalty parameter; defaults to (k+1)(k+d)/d.
    limiter
        A :class:`LimiterConfig` or a mode name ("none", "default", "scaling", ...).
    cfl_order_factor
        Denominator factor of the time-step estimate, 2k+1 by default.
    workers
        Number of threads for the volume terms.
    """

    def __init__(self, model: ModelSpec, space: Space, mesh: Mesh, flux="llf", penalty=None,
                 limiter=None, cfl_order_factor=None, workers=1):
        if space.dim_range != model.dim_range or space.dim != model.dim:
            raise OperatorError("space does not match the model's range or dimension")
        model.validate(mesh)
        self.model = model
        self.space = space
        self.mesh = mesh
        self.flux = get_flux(flux) if model.F_c is not None else None
        k, d = space.order, space.dim
        self.ip = InteriorPenalty(default_penalty(k, d) if penalty is None else penalty)
        if limiter is None or isinstance(limiter, str):
            limiter = LimiterConfig(mode=limiter or "none")
        self.limiter = Limiter(model, space, limiter)
        self.order_factor = 2 * k + 1 if cfl_order_factor is None else cfl_order_factor
        self.workers = max(1, int(workers))
        self._plan = None
        self.time = 0.0
        self.stage_time = 0.0
        self.last_estimate = None
        self.boundary_flux = np.zeros(model.dim_range)
        self.last_report = None

    # ------------------------------------------------------------- state
    @property
    def plan(self) -> MeshPlan:
        if self._plan is None or not self._plan.check(self.mesh):
            self._plan = MeshPlan(self.space, self.mesh)
        return self._plan

    def set_time(self, t):
        self.time = float(t)
        self.stage_time = float(t)

    def set_stage_time(self, c, dt):
        self.stage_time = self.time + float(c) * float(dt)

    step_time = set_stage_time

    def _dofs(self, U):
        if isinstance(U, DiscreteFunction):
            if U.mesh is not self.mesh or not U.is_current():
                raise OperatorError("discrete function does not live on the operator's current mesh")
            return U.dofs
        U = np.asarray(U, dtype=float)
        if U.shape != (self.mesh.n_cells, self.space.dim_range, self.space.basis_size):
            raise OperatorError(f"dof array of shape {U.shape} does not fit the current mesh")
        return U

    # -------------------------------------------------------------- apply
    def apply(self, U, part=FULL, limit=None) -> np.ndarray:
        """Mass-inverted DG right-hand side M^-1 L_h(Pi_h U) for the requested part."""
        if part not in PARTS:
            raise OperatorError(f"unknown operator part {part!r}")
        dofs = self._dofs(U)
        plan = self.plan
        t = self.stage_time
        m = self.model
        if limit is None:
            limit = part != IMPLICIT
        if limit and self.limiter.active:
            dofs, self.last_report = self.limiter.limit(plan, dofs, t)
        use_c = m.F_c is not None and part != IMPLICIT
        use_v = m.F_v is not None and part != EXPLICIT
        sources = []
        if m.S_e is not None and part != IMPLICIT:
            sources.append(m.S_e)
        if m.S_i is not None and part != EXPLICIT:
            sources.append(m.S_i)

        R = self._volume(plan, dofs, t, use_c, use_v, sources)
        if use_c or use_v:
            self._faces(plan, dofs, t, use_c, use_v, R)
        else:
            self.boundary_flux = np.zeros(m.dim_range)
        R *= plan.inverse_mass()[:, None, :]
        if not np.all(np.isfinite(R)):
            bad = np.flatnonzero(~np.all(np.isfinite(R), axis=(1, 2)))
            raise OperatorError(f"non-finite operator value in cell {int(bad[0])} "
                                f"(centre {self.mesh.centers[bad[0]].tolist()}) at t={t:g}")
        return R

    def _volume(self, plan, dofs, t, use_c, use_v, sources):
        N = plan.N
        chunks = np.array_split(np.arange(N), min(self.workers, max(N, 1)))

        def work(cells):
            sl = slice(int(cells[0]), int(cells[-1]) + 1) if len(cells) else slice(0, 0)
            return sl, self._volume_chunk(plan, dofs, t, use_c, use_v, sources, sl)

        if self.workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                parts = list(pool.map(work, chunks))
        else:
            parts = [work(chunks[0])] if N else []
        R = np.zeros(dofs.shape)
        for sl, Rc in parts:
            if Rc is not None:
                R[sl] = Rc
        return R

    def _volume_chunk(self, plan, dofs, t, use_c, use_v, sources, sl):
        m = self.model
        sp = self.space
        d = sp.dim
        s = plan.s[sl]
        block = dofs[sl]
        n = len(block)
        if n == 0 or not (use_c or use_v or sources):
            return None
        r = block.shape[1]
        Uq = kernels.cell_eval(block, sp.V, s)
        M = n * plan.nq
        x = plan.xq[sl].reshape(M, d)
        U = Uq.reshape(M, r)
        DU = None
        if use_v or sources:
            DU = np.empty((n, plan.nq, r, d))
            for a in range(d):
                DU[..., a] = kernels.cell_eval(block, sp.G[a], plan.ginv[sl, a])
            DU = DU.reshape(M, r, d)
        flux = None
        if use_c:
            flux = np.array(m.F_c(t, x, U), dtype=float)
        if use_v:
            Fv = m.F_v(t, x, U, DU)
            flux = -Fv if flux is None else flux - Fv
        src = None
        for S in sources:
            val = S(t, x, U, DU)
            src = val if src is None else src + val
        wq = plan.wq[sl]
        R = np.zeros(block.shape)
        if flux is not None:
            flux = np.asarray(flux).reshape(n, plan.nq, r, d)
            for a in range(d):
                A = flux[..., a] * (wq * plan.ginv[sl, a, None])[:, :, None]
                R += kernels.cell_test(A, sp.G[a])
        if src is not None:
            A = np.asarray(src, dtype=float).reshape(n, plan.nq, r) * (wq * s[:, None])[:, :, None]
            R += kernels.cell_test(A, sp.V)
        return R

    def _faces(self, plan, dofs, t, use_c, use_v, R):
        m = self.model
        d = plan.dim
        r = dofs.shape[1]
        F, nqf = plan.F, plan.nqf
        UL, UR = plan.face_values(dofs)
        DL = DR = None
        if use_v:
            DL, DR = plan.face_grads(dofs)
        normal = np.broadcast_to(plan.normal[:, None, :], (F, nqf, d))
        numerical = np.zeros(F, dtype=bool)
        numerical[plan.interior] = True
        flux_faces = []
        bid = plan.faces.boundary_id
        for b in np.unique(bid[plan.boundary]):
            ids = plan.boundary[bid[plan.boundary] == b]
            cond = m.boundary[int(b)]
            if isinstance(cond, Dirichlet):
                x = plan.xf[ids].reshape(-1, d)
                UR[ids] = np.asarray(cond(t, x, UL[ids].reshape(-1, r))).reshape(len(ids), nqf, r)
                if use_v:
                    DR[ids] = DL[ids]
                numerical[ids] = True
            elif isinstance(cond, FluxBC):
                flux_faces.append((ids, cond))
            else:
                raise OperatorError(f"unsupported boundary condition for id {int(b)}")

        Fhat = np.zeros((F, nqf, r))
        lam = np.zeros(F)
        std = np.flatnonzero(numerical)
        every = np.arange(F)

        def sel(A, ids):
            block = A if len(ids) == F and np.array_equal(ids, every) else A[ids]
            return block.reshape((len(ids) * nqf,) + A.shape[2:])

        if use_c:
            if len(std):
                fl, sp = self.flux(m, t, sel(plan.xf, std), sel(UL, std), sel(UR, std), sel(normal, std))
                Fhat[std] = fl.reshape(len(std), nqf, r)
                lam[std] = np.max(np.asarray(sp).reshape(len(std), nqf), axis=1)
            for ids, cond in flux_faces:
                x, Ub, nb = sel(plan.xf, ids), sel(UL, ids), sel(normal, ids)
                Fhat[ids] += np.asarray(cond.advective(t, x, Ub, nb)).reshape(len(ids), nqf, r)
                lam[ids] = np.max(np.asarray(m.max_wave_speed(t, x, Ub, nb)).reshape(len(ids), nqf), axis=1)
        a_in = a_out = None
        if use_v:
            if len(std):
                fv, symL, symR = self.ip.face(m, t, sel(plan.xf, std), sel(UL, std), sel(UR, std),
                                              sel(DL, std), sel(DR, std), sel(normal, std),
                                              np.repeat(plan.h_pen[std], nqf))
                Fhat[std] -= fv.reshape(len(std), nqf, r)
                w = plan.wf[std][:, :, None, None]
                half = np.where(plan.outside[std] >= 0, 0.5, 1.0)[:, None, None, None]
                a_in = np.zeros((F, nqf, r, d))
                a_out = np.zeros((F, nqf, r, d))
                a_in[std] = half * w * symL.reshape(len(std), nqf, r, d)
                a_out[std] = 0.5 * w * symR.reshape(len(std), nqf, r, d)
            for ids, cond in flux_faces:
                if cond.diffusive is None:
                    raise OperatorError("flux boundary without a diffusive flux in a diffusive model")
                gv = cond.diffusive(t, sel(plan.xf, ids), sel(UL, ids), sel(DL, ids), sel(normal, ids))
                Fhat[ids] -= np.asarray(gv).reshape(len(ids), nqf, r)
        c = plan.wf[:, :, None] * Fhat
        plan.scatter(R, -c, c)
        if a_in is not None:
            plan.scatter_grad(R, a_in, a_out)
        self.boundary_flux = np.einsum("fqr->r", c[plan.boundary]) if len(plan.boundary) else np.zeros(r)
        if use_c:
            self._record_estimate(plan, lam)

    # ------------------------------------------------------------ estimate
    def _record_estimate(self, plan, lam):
        cell_lam = plan.axis_max(lam)
        rate = np.sum(cell_lam / plan.h, axis=1)
        top = np.max(rate) if len(rate) else 0.0
        self.last_estimate = np.inf if top <= 0 else 1.0 / (self.order_factor * top)

    def timestep_estimate(self) -> float:
        """min over cells of 1 / ((2k+1) sum_a lambda_a / h_a); +inf without advection."""
        if self.model.F_c is None:
            return np.inf
        if self.last_estimate is None:
            raise OperatorError("time-step estimate requested before the operator was applied")
        return self.last_estimate

    # -------------------------------------------------------------- limiter
    def apply_limiter(self, U):
        """Apply Pi_h in place; returns the indicator report (or None without a limiter)."""
        dofs = self._dofs(U)
        if not self.limiter.active:
            return None
        new, report = self.limiter.limit(self.plan, dofs, self.stage_time)
        dofs[...] = new
        self.last_report = report
        return report

    def __call__(self, U, part=FULL):
        return self.apply(U, part)
