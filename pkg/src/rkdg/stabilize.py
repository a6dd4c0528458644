"""Troubled-cell detection, limited linear reconstruction and the scaling limiter.

A cell is troubled when its smoothness indicator exceeds ``tol`` or when the
solution takes unphysical values at one of its quadrature nodes.  Troubled
cells are replaced by their mean plus a least-squares slope fitted to the
neighbour means, damped so that face values stay inside the range of the
local means.  The scaling limiter contracts every cell towards its mean until
all node values respect the model's component bounds.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .basis import ONB
from .models.base import ModelError, dot

NONE = "none"
DEFAULT = "default"
SCALING = "scaling"
DEFAULT_PLUS_SCALING = "default_plus_scaling"
MODES = (NONE, DEFAULT, SCALING, DEFAULT_PLUS_SCALING)
_ALIASES = {"default+scaling": DEFAULT_PLUS_SCALING, "default_scaling": DEFAULT_PLUS_SCALING, "": NONE}
LIMITER_MODES = MODES + tuple(_ALIASES)

JUMP = "jump"
MODAL = "modal"
CUSTOM = "custom"

REASON_NONE, REASON_SMOOTHNESS, REASON_UNPHYSICAL = 0, 1, 2


@dataclass(frozen=True)
class LimiterConfig:
    """Limiter selection.

    ``indicator`` is "jump", "modal" or a callable ``(plan, dofs, t) -> values``
    (one value per cell); cells with a value above ``tol`` are troubled.
    ``h_kind`` selects the cell size in the jump indicator ("diameter" or
    "volume", the latter meaning |E|^(1/d)).
    """

    mode: str = NONE
    tol: float = 1.0
    indicator: object = JUMP
    h_kind: str = "diameter"

    def __post_init__(self):
        mode = _ALIASES.get(str(self.mode).lower(), str(self.mode).lower())
        if mode not in MODES:
            raise ModelError(f"unknown limiter mode {self.mode!r}; choose from {MODES}")
        object.__setattr__(self, "mode", mode)
        if not callable(self.indicator) and self.indicator not in (JUMP, MODAL):
            raise ModelError(f"unknown troubled-cell indicator {self.indicator!r}")
        if self.tol < 0:
            raise ModelError("indicator tolerance must be non-negative")
        if self.h_kind not in ("diameter", "volume"):
            raise ModelError("h_kind must be 'diameter' or 'volume'")

    @property
    def reconstructs(self) -> bool:
        return self.mode in (DEFAULT, DEFAULT_PLUS_SCALING)

    @property
    def scales(self) -> bool:
        return self.mode in (SCALING, DEFAULT_PLUS_SCALING)


@dataclass
class IndicatorReport:
    value: np.ndarray
    troubled: np.ndarray
    reason: np.ndarray
    bad_means: np.ndarray = None

    @property
    def n_troubled(self) -> int:
        return int(np.sum(self.troubled))


def alpha(d, k):
    """Scaling factor (2/125) d 5^k of the jump indicator."""
    return 2.0 / 125.0 * d * 5.0**k


# ----------------------------------------------------------------- indicators
def _cell_size(plan, h_kind):
    if h_kind == "volume":
        return plan.vol ** (1.0 / plan.dim)
    return plan.mesh.diameters


def jump_indicator(plan, model, dofs, t=0.0, h_kind="diameter"):
    """J_E: sum over inflow faces of |int_e jump| / (alpha h_E^((k+1)/4) |e|)."""
    if model.jump is None or model.velocity is None:
        raise ModelError("the jump indicator needs model.jump and model.velocity")
    sp = plan.space
    k, d, r = sp.order, plan.dim, dofs.shape[1]
    J = np.zeros(plan.N)
    inter = plan.interior
    if len(inter) == 0:
        return J
    UL, UR = plan.face_values(dofs)
    nqf = plan.nqf
    x = plan.xf[inter].reshape(-1, d)
    uL, uR = UL[inter].reshape(-1, r), UR[inter].reshape(-1, r)
    w = plan.wf[inter]
    I_in = np.sum(w * np.asarray(model.jump(t, x, uL, uR)).reshape(-1, nqf), axis=1)
    I_out = np.sum(w * np.asarray(model.jump(t, x, uR, uL)).reshape(-1, nqf), axis=1)
    means = sp.means(dofs, plan.vol)
    a, b = plan.inside[inter], plan.outside[inter]
    n = plan.normal[inter]
    xc = plan.faces.center[inter]
    vin = dot(np.asarray(model.velocity(t, xc, means[a])), n)
    vout = -dot(np.asarray(model.velocity(t, xc, means[b])), n)
    area = plan.faces.area[inter]
    scale = alpha(d, k) * _cell_size(plan, h_kind) ** ((k + 1) / 4.0)
    with np.errstate(invalid="ignore"):
        contrib_a = np.where(vin < 0, np.abs(I_in) / (scale[a] * area), 0.0)
        contrib_b = np.where(vout < 0, np.abs(I_out) / (scale[b] * area), 0.0)
    J += np.bincount(a, np.nan_to_num(contrib_a, nan=np.inf), minlength=plan.N)
    J += np.bincount(b, np.nan_to_num(contrib_b, nan=np.inf), minlength=plan.N)
    return J


def physicality_check(plan, model, dofs, t=0.0):
    """True per cell iff model.physical holds at every volume and face node."""
    if model.physical is None:
        return np.ones(plan.N, dtype=bool)
    vals = plan.check_values(dofs)
    _, _, x = plan.check_points()
    N, P, r = vals.shape
    with np.errstate(all="ignore"):
        ok = np.asarray(model.physical(t, x.reshape(-1, plan.dim), vals.reshape(-1, r)))
    ok = ok.reshape(N, P).astype(bool) & np.all(np.isfinite(vals), axis=2)
    return np.all(ok, axis=1)


def onb_size(i, d):
    """Number of tensor ONB functions of maximal degree <= i."""
    return (i + 1) ** d


def modal_smoothness(block, order, dim, volume):
    """Decay exponent s of the modal coefficients of component 0 (1000 constant, 100 linear)."""
    P = int(order)
    if P == 0:
        return 1000.0
    u = np.asarray(block, dtype=float)[0]
    factor = 1.0 / np.sqrt(volume)
    q = np.zeros(P + 1)
    b2 = np.zeros(P + 1)
    f = 0.0
    k = onb_size(0, dim)
    q[0] = u[0] * u[0]
    l2norm2 = 0.0
    for i in range(1, P + 1):
        nof = onb_size(i, dim) - k
        while k < onb_size(i, dim):
            q[i] += u[k] * u[k] / nof
            l2norm2 += u[k] * u[k] / nof
            b2[i] += (1.0 / i) ** (2 * P) / nof
            f += (1.0 / i) ** (2 * P) / nof
            k += 1
    for i in range(1, P + 1):
        q[i] = np.sqrt(q[i] + l2norm2 * b2[i] / f) / factor
    maxQ = max(q[P], q[P - 1])
    significant = 0
    for i in range(P, 0, -1):
        maxQ = max(maxQ, q[i])
        if maxQ > 1e-14:
            significant = i
            break
    if significant == 0:
        return 1000.0
    if significant == 1:
        return 100.0
    matrix = np.zeros((significant, 2))
    rhs = np.zeros(significant)
    for r in range(significant - 1, -1, -1):
        maxQ = max(maxQ, q[r + 1])
        rhs[r] = np.log(maxQ)
        matrix[r, 0] = 1.0
        matrix[r, 1] = -np.log(r + 1.0)
    A = matrix.T @ matrix
    b = matrix.T @ rhs
    return float(np.linalg.solve(A, b)[1])


def modal_indicator(plan, dofs, t=0.0):
    """Per-cell value 1/s of the modal decay exponent (0 when s vanishes)."""
    sp = plan.space
    if sp.kind != ONB:
        raise ModelError("the modal indicator needs an orthonormal modal basis")
    s = kernels.modal_values(dofs, sp.order, sp.dim, plan.vol)
    with np.errstate(divide="ignore"):
        return np.where(np.abs(s) > 1e-14, 1.0 / s, 0.0)


# ------------------------------------------------------------ reconstruction
def _neighbour_pairs(plan):
    """Directed (cell, neighbour, centre offset) triples from interior faces."""
    if not hasattr(plan, "_pairs"):
        inter = plan.interior
        a, b = plan.inside[inter], plan.outside[inter]
        keep = a != b
        a, b, f = a[keep], b[keep], inter[keep]
        dx = plan.mesh.centers[b] - plan.mesh.centers[a]
        ax = plan.faces.axis[f]
        rows = np.arange(len(f))
        # across periodic boundaries the offset along the face normal is the local one
        dx[rows, ax] = plan.faces.sign[f] * 0.5 * (plan.h[a, ax] + plan.h[b, ax])
        src, dst, dx = np.concatenate([a, b]), np.concatenate([b, a]), np.concatenate([dx, -dx])
        order = np.argsort(src, kind="stable")
        src, dst, dx = src[order], dst[order], dx[order]
        plan._pairs = (src, dst, dx)
        # segment starts for grouped reductions over the neighbours of each cell
        cells, starts = np.unique(src, return_index=True)
        plan._pair_segments = (cells, starts)
        A = np.zeros((plan.N, plan.dim, plan.dim))
        for i in range(plan.dim):
            for j in range(plan.dim):
                A[:, i, j] = np.bincount(src, dx[:, i] * dx[:, j], minlength=plan.N)
        plan._lsq_normal = A
    return plan._pairs


def _neighbour_reduce(plan, ufunc, values, initial):
    """ufunc-reduce ``values`` (pairs, r) onto the source cell of every pair, starting from ``initial``."""
    _neighbour_pairs(plan)
    cells, starts = plan._pair_segments
    out = initial.copy()
    if len(starts):
        out[cells] = ufunc(out[cells], ufunc.reduceat(values, starts, axis=0))
    return out


def least_squares_slopes(plan, means, cells):
    """Slopes (len(cells), r, d) minimising sum_K |mean_E + s.(x_K - x_E) - mean_K|^2."""
    d = plan.dim
    r = means.shape[1]
    src, dst, dx = _neighbour_pairs(plan)
    diff = means[dst] - means[src]
    B = np.zeros((len(cells), d, r))
    for i in range(d):
        for q in range(r):
            B[:, i, q] = np.bincount(src, dx[:, i] * diff[:, q], minlength=plan.N)[cells]
    A = plan._lsq_normal[cells]
    regular = np.abs(np.linalg.det(A)) > 1e-14 * np.max(np.abs(A), axis=(1, 2)) ** d
    out = np.empty((len(cells), d, r))
    out[regular] = np.linalg.solve(A[regular], B[regular])
    if not np.all(regular):
        out[~regular] = np.linalg.pinv(A[~regular]) @ B[~regular]
    return out.transpose(0, 2, 1)


def reconstruct(plan, dofs, troubled, model=None, t=0.0):
    """Replace troubled cells by a limited linear function with the same mean."""
    cells = np.flatnonzero(troubled)
    out = np.array(dofs, dtype=float)
    if len(cells) == 0:
        return out
    sp = plan.space
    d = plan.dim
    means = sp.means(dofs, plan.vol)
    slopes = least_squares_slopes(plan, means, cells)
    src, dst, _ = _neighbour_pairs(plan)
    lo = _neighbour_reduce(plan, np.minimum, means[dst], means)
    hi = _neighbour_reduce(plan, np.maximum, means[dst], means)
    # offsets of all face nodes from the cell centre, in units of h
    xi = np.concatenate([sp.face_points(tt) for tt in range(0, 6 * d, 3)]) - 0.5
    off = xi[None, :, :] * plan.h[cells][:, None, :]                 # (n, P, d)
    delta = np.einsum("npd,nrd->npr", off, slopes)
    ub = means[cells]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(delta > 0, (hi[cells] - ub)[:, None, :] / delta,
                         np.where(delta < 0, (lo[cells] - ub)[:, None, :] / delta, np.inf))
    theta = np.clip(np.min(ratio, axis=1), 0.0, 1.0)                 # (n, r)
    slopes = slopes * theta[:, :, None]
    lin = sp.linear_ref                                              # (d+1, nb)
    s = plan.s[cells]
    coef = ub[:, :, None] * lin[0][None, None, :]
    for a in range(d):
        coef = coef + (slopes[:, :, a] * plan.h[cells, a][:, None])[:, :, None] * lin[a + 1][None, None, :]
    out[cells] = coef / s[:, None, None]
    if model is not None and model.physical is not None:
        ok = physicality_check(plan, model, out, t)
        flat = cells[~ok[cells]]
        if len(flat):
            out[flat] = sp.from_means(means[flat], plan.vol[flat])
    return out


def scaling_limit(plan, dofs, lower, upper):
    """Zhang-Shu scaling towards the cell mean; returns (dofs, theta, cells with means out of bounds)."""
    sp = plan.space
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    vals = plan.check_values(dofs)                    # (N, P, r)
    means = sp.means(dofs, plan.vol)                  # (N, r)
    umin = vals.min(axis=1)
    umax = vals.max(axis=1)
    theta = np.ones_like(means)
    with np.errstate(divide="ignore", invalid="ignore"):
        dlo = means - umin
        t_lo = np.where((dlo > 0) & np.isfinite(lower), (means - lower) / dlo, 1.0)
        dhi = umax - means
        t_hi = np.where((dhi > 0) & np.isfinite(upper), (upper - means) / dhi, 1.0)
    theta = np.clip(np.minimum(theta, np.minimum(t_lo, t_hi)), 0.0, 1.0)
    bad = np.flatnonzero(np.any((means < lower) | (means > upper), axis=1))
    mean_dofs = sp.from_means(means, plan.vol)
    out = mean_dofs + theta[:, :, None] * (dofs - mean_dofs)
    return out, theta, bad


# ------------------------------------------------------------------- driver
class Limiter:
    """Limiter Pi_h bound to a model and space."""

    def __init__(self, model, space, config: Optional[LimiterConfig] = None):
        self.model = model
        self.space = space
        self.config = config or LimiterConfig()
        cfg = self.config
        self.use_jump = False
        if cfg.reconstructs:
            if cfg.indicator == JUMP:
                self.use_jump = model.jump is not None and model.velocity is not None
                if not self.use_jump and model.physical is None:
                    raise ModelError("the default limiter needs jump and velocity, or physical, on the model")
            elif cfg.indicator == MODAL and space.kind != ONB:
                raise ModelError("the modal indicator needs an ONB space")
        if cfg.scales:
            lo, hi = model.bounds()
            if not (np.any(np.isfinite(lo)) or np.any(np.isfinite(hi))):
                raise ModelError("the scaling limiter needs lower_bound or upper_bound on the model")
            self.bounds = (lo, hi)

    @property
    def active(self) -> bool:
        return self.config.mode != NONE

    def indicator_values(self, plan, dofs, t=0.0):
        cfg = self.config
        if callable(cfg.indicator):
            return np.asarray(cfg.indicator(plan, dofs, t), dtype=float)
        if cfg.indicator == MODAL:
            return modal_indicator(plan, dofs, t)
        if self.use_jump:
            return jump_indicator(plan, self.model, dofs, t, cfg.h_kind)
        return np.zeros(plan.N)

    def troubled_cells(self, plan, dofs, t=0.0) -> IndicatorReport:
        value = self.indicator_values(plan, dofs, t)
        rough = value > self.config.tol
        phys = physicality_check(plan, self.model, dofs, t)
        reason = np.full(plan.N, REASON_NONE, dtype=np.int8)
        reason[rough] = REASON_SMOOTHNESS
        reason[~phys] = REASON_UNPHYSICAL
        return IndicatorReport(value, rough | ~phys, reason)

    def limit(self, plan, dofs, t=0.0):
        """Return (Pi_h dofs, report); the input array is left untouched."""
        cfg = self.config
        out = dofs
        report = None
        if cfg.reconstructs:
            report = self.troubled_cells(plan, dofs, t)
            out = reconstruct(plan, dofs, report.troubled, self.model, t)
        if cfg.scales:
            out, _, bad = scaling_limit(plan, out, *self.bounds)
            if report is None:
                report = IndicatorReport(np.zeros(plan.N), np.zeros(plan.N, bool),
                                         np.zeros(plan.N, np.int8))
            report.bad_means = bad
        if out is dofs:
            out = np.array(dofs)
        return out, report


def troubled_cells(plan, model, dofs, config: LimiterConfig, t=0.0) -> IndicatorReport:
    return Limiter(model, plan.space, config).troubled_cells(plan, dofs, t)


def limit(plan, model, dofs, config: LimiterConfig, t=0.0):
    return Limiter(model, plan.space, config).limit(plan, dofs, t)
