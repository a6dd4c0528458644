"""Strong-stability-preserving Runge-Kutta time steppers.

Explicit, diagonally implicit and IMEX schemes are all written as (pairs of)
Butcher tableaus and advanced by one generic additive RK loop.  Implicit
stages are solved with a Jacobian-free Newton-Krylov method.  The n^2-stage
third order scheme ``ExplSSP3`` keeps its low-storage formulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .dgop import EXPLICIT as PART_EXPLICIT
from .dgop import FULL
from .dgop import IMPLICIT as PART_IMPLICIT
from .dgop import DiscreteFunction, OperatorError

DEFAULT = "default"
EXPLICIT = "explicit"
IMPLICIT = "implicit"
IMEX = "imex"
EXPL_SSP3 = "expl_ssp3"
RK_TYPES = (DEFAULT, EXPLICIT, IMPLICIT, IMEX, EXPL_SSP3)


class SolverError(RuntimeError):
    """Newton or Krylov iteration failed; ``trace`` holds the residual history."""

    def __init__(self, message, trace=()):
        super().__init__(message + (f" (residual history: {[f'{r:.3e}' for r in trace]})" if trace else ""))
        self.trace = list(trace)


@dataclass(frozen=True)
class Tableau:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @classmethod
    def of(cls, A, b, c=None):
        A = np.array(A, dtype=float)
        b = np.array(b, dtype=float)
        c = A.sum(axis=1) if c is None else np.array(c, dtype=float)
        return cls(A, b, c)

    @property
    def stages(self) -> int:
        return len(self.b)

    def check(self, tol=1e-12):
        if not np.allclose(self.A.sum(axis=1), self.c, atol=tol, rtol=0):
            raise ValueError("row sums of A differ from c")
        if abs(self.b.sum() - 1.0) > tol:
            raise ValueError("weights do not sum to one")
        return self


def _lower(rows, s):
    A = np.zeros((s, s))
    for i, row in enumerate(rows):
        A[i, :len(row)] = row
    return A


_GAMMA2 = 1.0 - 1.0 / math.sqrt(2.0)
_ALPHA3 = 0.4358665215084590
_TAU3 = 0.5 * (1.0 + _ALPHA3)
_B31 = -(6 * _ALPHA3**2 - 16 * _ALPHA3 + 1) / 4.0
_B32 = (6 * _ALPHA3**2 - 20 * _ALPHA3 + 5) / 4.0

EXPLICIT_TABLEAUS = {
    1: Tableau.of([[0.0]], [1.0]),
    2: Tableau.of([[0, 0], [1, 0]], [0.5, 0.5]),
    3: Tableau.of([[0, 0, 0], [1, 0, 0], [0.25, 0.25, 0]], [1 / 6, 1 / 6, 2 / 3]),
}

DIRK_TABLEAUS = {
    1: Tableau.of([[1.0]], [1.0]),
    2: Tableau.of([[_GAMMA2, 0], [1 - _GAMMA2, _GAMMA2]], [1 - _GAMMA2, _GAMMA2]),
    3: Tableau.of([[_ALPHA3, 0, 0], [_TAU3 - _ALPHA3, _ALPHA3, 0], [_B31, _B32, _ALPHA3]],
                  [_B31, _B32, _ALPHA3]),
}

_A = 0.24169426078821
_B = 0.06042356519705
_H = 0.12915286960590
IMEX_TABLEAUS = {
    # forward/backward Euler
    1: (Tableau.of([[0, 0], [1, 0]], [1, 0]), Tableau.of([[0, 0], [0, 1]], [0, 1])),
    # SSP2(3,3,2) of Pareschi and Russo
    2: (Tableau.of(_lower([[0], [0.5], [0.5, 0.5]], 3), [1 / 3] * 3),
        Tableau.of(_lower([[0.25], [0, 0.25], [1 / 3, 1 / 3, 1 / 3]], 3), [1 / 3] * 3)),
    # SSP3(4,3,3) of Pareschi and Russo
    3: (Tableau.of(_lower([[0], [0, 0], [0, 1, 0], [0, 0.25, 0.25, 0]], 4), [0, 1 / 6, 1 / 6, 2 / 3]),
        Tableau.of(_lower([[_A], [-_A, _A], [0, 1 - _A, _A], [_B, _H, 0.5 - _B - _H - _A, _A]], 4),
                   [0, 1 / 6, 1 / 6, 2 / 3])),
}


@dataclass
class StepperConfig:
    rk_type: str = DEFAULT
    order: int = 3
    cfl: float = 0.45
    dt: Optional[float] = None
    stages: int = 4
    newton_rtol: float = 1e-8
    newton_atol: float = 1e-12
    max_newton: int = 25
    krylov_rtol: float = 1e-3
    krylov_restart: int = 30
    max_krylov: int = 200
    limit_stages: Optional[bool] = None
    explicit_tableau: Optional[Tableau] = field(default=None, repr=False)

    def __post_init__(self):
        self.rk_type = str(self.rk_type).lower()
        if self.rk_type not in RK_TYPES:
            raise ValueError(f"unknown rk type {self.rk_type!r}; choose from {RK_TYPES}")
        if self.order not in (1, 2, 3):
            raise ValueError("order must be 1, 2 or 3")
        if self.cfl <= 0:
            raise ValueError("cfl must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("a fixed time step must be positive")


# ---------------------------------------------------------------- solvers
def _norm(v):
    return float(np.linalg.norm(np.ravel(v)))


def jfnk_solve(G, u0, rtol=1e-8, atol=1e-12, max_newton=25, krylov_rtol=1e-3, restart=30,
               max_krylov=200):
    """Solve G(u) = 0 by Newton's method with finite-difference GMRES solves.

    Returns ``(u, info)`` with ``info = {"newton": its, "krylov": total, "trace": norms}``.
    """
    u = np.array(u0, dtype=float)
    shape = u.shape
    g = np.asarray(G(u), dtype=float)
    r0 = _norm(g)
    trace = [r0]
    target = max(atol, rtol * r0)
    total_krylov = 0
    its = 0
    eps = math.sqrt(np.finfo(float).eps)
    while trace[-1] > target:
        if its >= max_newton:
            raise SolverError(f"Newton did not converge in {max_newton} iterations", trace)
        u_norm = _norm(u)
        g_flat = g.ravel()

        def jv(v, u=u, g_flat=g_flat, u_norm=u_norm):
            vn = np.linalg.norm(v)
            if vn == 0:
                return np.zeros_like(v)
            e = eps * (1.0 + u_norm) / vn
            return (np.asarray(G(u + e * v.reshape(shape))).ravel() - g_flat) / e

        n = g_flat.size
        J = LinearOperator((n, n), matvec=jv, dtype=float)
        counter = []
        m = max(1, min(restart, max_krylov, n))
        inner_tol = max(krylov_rtol, 0.5 * target / max(trace[-1], 1e-300))
        du, info = gmres(J, -g_flat, rtol=min(inner_tol, 0.5), atol=0.0, restart=m,
                         maxiter=max(1, math.ceil(max_krylov / m)),
                         callback=lambda rk: counter.append(rk), callback_type="pr_norm")
        total_krylov += len(counter)
        if info > 0:
            raise SolverError(f"GMRES did not converge within {max_krylov} iterations", trace)
        if info < 0:
            raise SolverError("GMRES reported an illegal input or breakdown", trace)
        u = u + du.reshape(shape)
        g = np.asarray(G(u), dtype=float)
        trace.append(_norm(g))
        its += 1
        if not np.isfinite(trace[-1]):
            raise SolverError("Newton iteration produced non-finite residuals", trace)
    return u, {"newton": its, "krylov": total_krylov, "trace": trace}


# ---------------------------------------------------------------- steppers
class TimeStepper:
    """Common time-step selection and bookkeeping.

    Calling the stepper advances ``U`` (a :class:`DiscreteFunction` or dof
    array, modified in place) by one step and returns the step size used.
    ``ledger`` accumulates the time integral of the boundary flux, so for a
    source-free problem ``totals(U) + ledger`` is invariant.
    """

    def __init__(self, op, config: StepperConfig):
        self.op = op
        self.config = config
        self.fixed_dt = config.dt
        self.dt_estimate = None
        self.ledger = np.zeros(op.model.dim_range)
        self.newton_iterations = 0
        self.krylov_iterations = 0
        self.steps = 0

    @property
    def deltaT(self):
        return self.fixed_dt

    @deltaT.setter
    def deltaT(self, value):
        self.fixed_dt = None if value is None else float(value)

    @property
    def time(self) -> float:
        return self.op.time

    def _bootstrap_part(self):
        return FULL

    def _cfl(self):
        return self.config.cfl

    def _choose_dt(self, dofs, dt):
        if dt is not None:
            return float(dt)
        if self.fixed_dt is not None:
            return self.fixed_dt
        if self.dt_estimate is None:
            self.op.set_stage_time(0.0, 0.0)
            self.op.apply(dofs, self._bootstrap_part())
            self.dt_estimate = self._cfl() * self.op.timestep_estimate()
        if not np.isfinite(self.dt_estimate):
            raise OperatorError("no CFL time-step estimate available (no advection); set a fixed dt")
        return self.dt_estimate

    def __call__(self, U, dt=None, max_dt=None) -> float:
        """Advance one step; ``max_dt`` caps the chosen step (e.g. to land on the end time)."""
        dofs = U.dofs if isinstance(U, DiscreteFunction) else U
        if isinstance(U, DiscreteFunction):
            self.op._dofs(U)
        dt = self._choose_dt(dofs, dt)
        if max_dt is not None:
            dt = min(dt, float(max_dt))
        t0 = self.op.time
        new = self._advance(dofs, dt)
        dofs[...] = new
        self.op.set_time(t0 + dt)
        if self.op.limiter.active:
            self.op.apply_limiter(dofs)
        self.steps += 1
        return dt

    step = __call__

    def _advance(self, dofs, dt):
        raise NotImplementedError


class AdditiveRK(TimeStepper):
    """Explicit, diagonally implicit or IMEX Runge-Kutta in Butcher form.

    ``explicit``/``implicit`` are tableaus (either may be None) applied to the
    operator parts ``explicit_part``/``implicit_part``.
    """

    def __init__(self, op, config, explicit=None, implicit=None,
                 explicit_part=FULL, implicit_part=FULL):
        super().__init__(op, config)
        for tab in (explicit, implicit):
            if tab is not None:
                tab.check()
        if explicit is not None and implicit is not None and explicit.stages != implicit.stages:
            raise ValueError("IMEX tableaus need the same number of stages")
        self.explicit = explicit
        self.implicit = implicit
        self.explicit_part = explicit_part
        self.implicit_part = implicit_part
        self.limit_stages = True if config.limit_stages is None else bool(config.limit_stages)

    def _bootstrap_part(self):
        return self.explicit_part if self.explicit is not None else self.implicit_part

    @staticmethod
    def _needed(tab):
        if tab is None:
            return None
        s = tab.stages
        return [tab.b[i] != 0 or np.any(tab.A[i + 1:, i] != 0) for i in range(s)]

    def _advance(self, dofs, dt):
        op = self.op
        ex, im = self.explicit, self.implicit
        s = (ex or im).stages
        need_e, need_i = self._needed(ex), self._needed(im)
        ke = [None] * s
        ki = [None] * s
        ledger = np.zeros_like(self.ledger)
        est = np.inf
        cfg = self.config
        for i in range(s):
            rhs = dofs.copy()
            for j in range(i):
                if ex is not None and ex.A[i, j] != 0:
                    rhs += dt * ex.A[i, j] * ke[j]
                if im is not None and im.A[i, j] != 0:
                    rhs += dt * im.A[i, j] * ki[j]
            Y = rhs
            if im is not None and im.A[i, i] != 0:
                a = dt * im.A[i, i]
                op.set_stage_time(im.c[i], dt)
                part = self.implicit_part

                def G(u, rhs=rhs, a=a, part=part):
                    return u - rhs - a * op.apply(u, part, limit=False)

                Y, info = jfnk_solve(G, rhs, cfg.newton_rtol, cfg.newton_atol, cfg.max_newton,
                                     cfg.krylov_rtol, cfg.krylov_restart, cfg.max_krylov)
                self.newton_iterations += info["newton"]
                self.krylov_iterations += info["krylov"]
            if ex is not None and need_e[i]:
                op.set_stage_time(ex.c[i], dt)
                ke[i] = op.apply(Y, self.explicit_part, limit=self.limit_stages)
                ledger += dt * ex.b[i] * op.boundary_flux
                if op.last_estimate is not None:
                    est = min(est, op.last_estimate)
            if im is not None and need_i[i]:
                op.set_stage_time(im.c[i], dt)
                ki[i] = op.apply(Y, self.implicit_part, limit=False)
                ledger += dt * im.b[i] * op.boundary_flux
                if self.explicit is None and op.last_estimate is not None:
                    est = min(est, op.last_estimate)
        new = dofs.copy()
        for i in range(s):
            if ex is not None and ex.b[i] != 0:
                new += dt * ex.b[i] * ke[i]
            if im is not None and im.b[i] != 0:
                new += dt * im.b[i] * ki[i]
        self.ledger += ledger
        self.dt_estimate = self._cfl() * est
        op.set_stage_time(0.0, 0.0)
        return new


class ExplSSP3(TimeStepper):
    """Third order SSP scheme with n^2 stages in low-storage form.

    The effective CFL number is ``cfl * n^2 * (1 - 1/n)``.  By default the
    limiter is applied once at the end of the step and not inside the stage
    evaluations.
    """

    def __init__(self, op, config):
        super().__init__(op, config)
        n = math.isqrt(int(config.stages))
        if n * n != config.stages or n < 2:
            raise ValueError("the number of stages must be a square n^2 with n >= 2")
        self.n = n
        self.stages = n * n
        self.r = self.stages - n
        self.cfl = config.cfl * self.stages * (1 - 1 / n)
        self.limit_stages = bool(config.limit_stages) if config.limit_stages is not None else False

    def _cfl(self):
        return self.cfl

    def c(self, i):
        n = self.n
        if i <= (n + 2) * (n - 1) / 2 + 1:
            return (i - 1) / (n * n - n)
        return (i - n - 1) / (n * n - n)

    def _advance(self, dofs, dt):
        op = self.op
        n = self.n
        u = dofs.copy()
        fac = dt / self.r
        est = np.inf
        led = np.zeros_like(self.ledger)

        def stage(i):
            nonlocal est, led
            op.set_stage_time(self.c(i), dt)
            tmp = op.apply(u, FULL, limit=self.limit_stages)
            if op.last_estimate is not None:
                est = min(est, op.last_estimate)
            led = led + fac * op.boundary_flux
            return tmp

        i = 1
        while i <= (n - 1) * (n - 2) / 2:
            u += fac * stage(i)
            i += 1
        q2 = u.copy()
        q2_led = led.copy()
        while i <= n * (n + 1) / 2:
            u += fac * stage(i)
            i += 1
        w = (n - 1) / (2 * n - 1)
        u = w * u + (n / (2 * n - 1)) * q2
        led = w * led + (n / (2 * n - 1)) * q2_led
        while i <= self.stages:
            u += fac * stage(i)
            i += 1
        self.ledger += led
        if np.isfinite(est):
            self.dt_estimate = self.cfl * est
        op.set_stage_time(0.0, 0.0)
        return u


def resolve_rk_type(rk_type, model):
    if rk_type != DEFAULT:
        return rk_type
    if model.F_v is None:
        return EXPLICIT
    if model.F_c is None:
        return IMPLICIT
    return IMEX


def make_stepper(config: StepperConfig, op) -> TimeStepper:
    """Build the stepper selected by ``config`` for the operator ``op``."""
    model = op.model
    kind = resolve_rk_type(config.rk_type, model)
    if kind == EXPL_SSP3:
        return ExplSSP3(op, config)
    if kind == EXPLICIT:
        tab = config.explicit_tableau or EXPLICIT_TABLEAUS[config.order]
        return AdditiveRK(op, config, explicit=tab)
    if kind == IMPLICIT:
        return AdditiveRK(op, config, implicit=DIRK_TABLEAUS[config.order])
    if model.F_v is None and model.S_i is None:
        raise ValueError("an IMEX stepper needs a diffusive flux or an implicit source")
    ex, im = IMEX_TABLEAUS[config.order]
    return AdditiveRK(op, config, explicit=ex, implicit=im,
                      explicit_part=PART_EXPLICIT, implicit_part=PART_IMPLICIT)


def femdg_stepper(*, order, operator, rk_type=None, cfl=0.45, **kwargs) -> TimeStepper:
    return make_stepper(StepperConfig(rk_type=rk_type or DEFAULT, order=order, cfl=cfl, **kwargs), operator)
