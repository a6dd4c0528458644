"""Problem description contract shared by all models.

All callbacks are vectorised: points come in as arrays with a leading batch
axis, ``x`` shaped (M, d), ``U`` shaped (M, r), gradients ``DU`` (M, r, d) and
normals ``n`` (M, d).  Return shapes are (M, r, d) for fluxes, (M, r) for
sources and boundary states, and (M,) for scalar hooks.
"""
from __future__ import annotations

import inspect
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from ..mesh import Mesh


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Dirichlet:
    """Exterior state g(t, x, U) fed to both numerical fluxes."""

    value: Callable

    def __call__(self, t, x, U):
        g = self.value(t, x, U)
        return np.broadcast_to(np.asarray(g, dtype=float), U.shape)


@dataclass(frozen=True)
class FluxBC:
    """Prescribed boundary fluxes: advective g_c(t,x,U,n) and optional diffusive g_v(t,x,U,DU,n)."""

    advective: Optional[Callable] = None
    diffusive: Optional[Callable] = None


@dataclass(frozen=True)
class Indicator:
    """Auxiliary scalar law d_t eta + div F = S driving the residual estimator."""

    eta: Callable
    F: Callable
    S: Optional[Callable] = None
    # False when F and S ignore DU, which saves the gradient evaluation
    uses_gradient: bool = True


@dataclass(frozen=True)
class Domain:
    lower: tuple
    upper: tuple
    counts: tuple
    periodic: tuple = ()

    @property
    def dim(self) -> int:
        return len(self.counts)

    def make_mesh(self, counts=None) -> Mesh:
        return Mesh(self.lower, self.upper, counts or self.counts, periodic=self.periodic or None)


def dot(a, b):
    """Contraction over the last axis."""
    return np.einsum("...i,...i->...", a, b)


def _arity(fn) -> int:
    try:
        params = inspect.signature(fn).parameters.values()
    except (TypeError, ValueError):
        return -1
    return sum(1 for p in params if p.default is inspect.Parameter.empty
               and p.kind in (p.POSITIONAL_ONLY, p.POSITIONAL_OR_KEYWORD))


def _as_condition(value):
    if isinstance(value, (Dirichlet, FluxBC)):
        return value
    if isinstance(value, (list, tuple)) and len(value) in (1, 2) and all(callable(v) for v in value):
        return FluxBC(*value)
    if callable(value):
        n = _arity(value)
        if n == 4:
            return FluxBC(value)
        return Dirichlet(value)
    const = np.asarray(value, dtype=float)
    return Dirichlet(lambda t, x, U: np.broadcast_to(const, U.shape))


def normalize_boundary(mapping) -> Dict[int, object]:
    """Expand keys given as ranges/tuples and wrap plain callables.

    Three-argument callables are Dirichlet states, four-argument callables
    are advective boundary fluxes, a pair of callables is an
    (advective, diffusive) flux pair and a constant is a fixed state.
    """
    out = {}
    for key, value in (mapping or {}).items():
        keys = [key] if isinstance(key, (int, np.integer)) else list(key)
        cond = _as_condition(value)
        for k in keys:
            out[int(k)] = cond
    return out


@dataclass
class ModelSpec:
    """Callbacks and data describing d_t U = -div(F_c - F_v) + S_i + S_e."""

    dim_range: int
    dim: int
    U0: Optional[Callable] = None
    end_time: float = 1.0
    domain: Optional[Domain] = None
    F_c: Optional[Callable] = None
    F_v: Optional[Callable] = None
    S_e: Optional[Callable] = None
    S_i: Optional[Callable] = None
    max_wave_speed: Optional[Callable] = None
    velocity: Optional[Callable] = None
    jump: Optional[Callable] = None
    physical: Optional[Callable] = None
    lower_bound: Optional[Sequence] = None
    upper_bound: Optional[Sequence] = None
    boundary: Dict[int, object] = field(default_factory=dict)
    indicator: Optional[Indicator] = None
    gas: object = None
    name: str = "model"

    def __post_init__(self):
        self.boundary = normalize_boundary(self.boundary)

    def with_(self, **changes) -> "ModelSpec":
        return replace(self, **changes)

    @property
    def has_advection(self) -> bool:
        return self.F_c is not None

    @property
    def has_diffusion(self) -> bool:
        return self.F_v is not None

    def bounds(self):
        """Per-component (lower, upper) arrays with +-inf for missing entries."""
        r = self.dim_range
        lo = np.full(r, -np.inf)
        hi = np.full(r, np.inf)
        for arr, src in ((lo, self.lower_bound), (hi, self.upper_bound)):
            if src is not None:
                for i, v in enumerate(src):
                    if v is not None:
                        arr[i] = float(v)
        return lo, hi

    def validate(self, mesh: Optional[Mesh] = None):
        if not any(f is not None for f in (self.F_c, self.F_v, self.S_e, self.S_i)):
            raise ModelError("model defines no flux and no source")
        if self.F_c is not None and self.max_wave_speed is None:
            raise ModelError("an advective flux requires max_wave_speed")
        if mesh is not None and (self.F_c is not None or self.F_v is not None):
            missing = mesh.boundary_ids() - set(self.boundary)
            if missing:
                raise ModelError(f"no boundary condition for ids {sorted(missing)}")
            for bid in mesh.boundary_ids():
                cond = self.boundary[bid]
                if isinstance(cond, FluxBC) and self.F_v is not None and cond.diffusive is None:
                    raise ModelError(f"flux boundary {bid} needs a diffusive flux as well")
        return self
