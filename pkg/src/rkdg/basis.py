"""Reference-element bases on [0,1]^d and quadrature rules.

Three representations of the tensor polynomial space Q_k are available:

``ONB``
    Tensor products of shifted Legendre polynomials, orthonormal on
    [0,1]^d.  Coefficients are stored scaled by ``sqrt(|E|)`` so that the
    element mass matrix is the identity on every Cartesian cell, i.e.
    ``u(x) = sum_i c_i phi_i(xi(x)) / sqrt(|E|)``.
``GAUSS_NODAL`` / ``LOBATTO_NODAL``
    Lagrange polynomials through the tensor Gauss-Legendre or
    Lobatto-Gauss-Legendre points.  Coefficients are point values, and the
    mass matrix is taken as ``|E| diag(w)`` (exact for Gauss, lumped for
    Lobatto).

The ONB functions are ordered by their maximal per-axis degree, so the first
``(m+1)**d`` functions span Q_m.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre as leg

from .mesh import SUB_FULL, SUB_HI, SUB_LO, n_trace_types, trace_embedding

ONB = "onb"
GAUSS_NODAL = "gauss"
LOBATTO_NODAL = "lobatto"
KINDS = (ONB, GAUSS_NODAL, LOBATTO_NODAL)

_SUB_RANGE = {SUB_FULL: (0.0, 1.0), SUB_LO: (0.0, 0.5), SUB_HI: (0.5, 0.5)}


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (nq, d) in [0,1]^d
    weights: np.ndarray  # (nq,), sum to 1

    @property
    def size(self) -> int:
        return len(self.weights)


def gauss_1d(n: int):
    """n-point Gauss-Legendre rule on [0,1]."""
    x, w = leg.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def lobatto_1d(n: int):
    """n-point Lobatto-Gauss-Legendre rule on [0,1] (n >= 2)."""
    if n < 2:
        raise ValueError("Lobatto rule needs at least two points")
    c = np.zeros(n)
    c[-1] = 1.0
    interior = leg.legroots(leg.legder(c)) if n > 2 else np.array([])
    x = np.concatenate([[-1.0], np.sort(interior), [1.0]])
    w = 2.0 / (n * (n - 1) * leg.legval(x, c) ** 2)
    return 0.5 * (x + 1.0), 0.5 * w


def _rule_1d(kind: str, k: int):
    if kind == LOBATTO_NODAL and k >= 1:
        return lobatto_1d(k + 1)
    return gauss_1d(k + 1)


def _tensor(x, w, d):
    if d == 0:
        return QuadratureRule(np.zeros((1, 0)), np.ones(1))
    pts = np.array(list(itertools.product(x, repeat=d)))[:, ::-1]
    wts = np.prod(np.array(list(itertools.product(w, repeat=d))), axis=1)
    return QuadratureRule(np.ascontiguousarray(pts), wts)


def volume_quadrature(kind: str, k: int, d: int) -> QuadratureRule:
    """Tensor rule with (k+1)**d points; axis 0 runs fastest."""
    if d not in (1, 2):
        raise ValueError(f"unsupported dimension {d}")
    if k < 0:
        raise ValueError("order must be >= 0")
    return _tensor(*_rule_1d(kind, k), d)


def face_quadrature(kind: str, k: int, d: int) -> QuadratureRule:
    if d not in (1, 2):
        raise ValueError(f"unsupported dimension {d}")
    return _tensor(*_rule_1d(kind, k), d - 1)


# ----------------------------------------------------------- 1D building blocks
def _onb_1d(x, k):
    V = leg.legvander(2.0 * x - 1.0, k)
    D = np.zeros_like(V)
    for n in range(1, k + 1):
        c = np.zeros(n + 1)
        c[n] = 1.0
        D[:, n] = 2.0 * leg.legval(2.0 * x - 1.0, leg.legder(c))
    norm = np.sqrt(2 * np.arange(k + 1) + 1.0)
    return V * norm, D * norm


class _Lagrange1D:
    def __init__(self, nodes):
        self.nodes = nodes
        k = len(nodes) - 1
        self.k = k
        self.coef = np.linalg.inv(leg.legvander(2.0 * nodes - 1.0, k))

    def __call__(self, x):
        k = self.k
        V = leg.legvander(2.0 * x - 1.0, k)
        D = np.zeros_like(V)
        for n in range(1, k + 1):
            c = np.zeros(n + 1)
            c[n] = 1.0
            D[:, n] = 2.0 * leg.legval(2.0 * x - 1.0, leg.legder(c))
        return V @ self.coef, D @ self.coef


def onb_multi_indices(k: int, d: int):
    idx = list(itertools.product(range(k + 1), repeat=d))
    idx.sort(key=lambda m: (max(m), m[::-1]))
    return np.array(idx, dtype=int).reshape(-1, d)


@dataclass(eq=False)
class Space:
    """Discontinuous piecewise-Q_k space descriptor with cached reference data."""

    kind: str
    order: int
    dim: int
    dim_range: int = 1
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.dim not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if self.order < 0 or self.dim_range < 1:
            raise ValueError("order must be >= 0 and dim_range >= 1")
        k, d = self.order, self.dim
        if self.kind == ONB:
            self.multi = onb_multi_indices(k, d)
        else:
            self.multi = np.array(list(itertools.product(range(k + 1), repeat=d)))[:, ::-1].reshape(-1, d)
            x, _ = _rule_1d(self.kind, k)
            self._lag = _Lagrange1D(x)
        self.quad = volume_quadrature(self.kind, k, d)
        self.fquad = face_quadrature(self.kind, k, d)
        self.V = self.eval(self.quad.points)
        self.G = self.eval_grad(self.quad.points)

    def __repr__(self):
        return f"Space(kind={self.kind!r}, order={self.order}, dim={self.dim}, dim_range={self.dim_range})"

    @property
    def basis_size(self) -> int:
        return (self.order + 1) ** self.dim

    # ------------------------------------------------------------ evaluation
    def _eval_1d(self, x):
        if self.kind == ONB:
            return _onb_1d(x, self.order)
        return self._lag(x)

    def eval(self, xi) -> np.ndarray:
        """Basis values at reference points ``xi`` (M, d) -> (M, nb)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        out = np.ones((len(xi), self.basis_size))
        for a in range(self.dim):
            v, _ = self._eval_1d(xi[:, a])
            out *= v[:, self.multi[:, a]]
        return out

    def eval_grad(self, xi) -> np.ndarray:
        """Reference gradients (d, M, nb)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        vals = [self._eval_1d(xi[:, a]) for a in range(self.dim)]
        out = np.ones((self.dim, len(xi), self.basis_size))
        for g in range(self.dim):
            for a in range(self.dim):
                v, dv = vals[a]
                out[g] *= (dv if a == g else v)[:, self.multi[:, a]]
        return out

    # --------------------------------------------------------------- scaling
    def scale(self, volumes):
        """Factor s with u = s * sum_i c_i phi_i."""
        volumes = np.asarray(volumes, dtype=float)
        if self.kind == ONB:
            return 1.0 / np.sqrt(volumes)
        return np.ones_like(volumes)

    @cached_property
    def mass_ref(self) -> np.ndarray:
        """Diagonal of the reference mass matrix used by the scheme."""
        if self.kind == ONB:
            return np.ones(self.basis_size)
        return self.quad.weights.copy()

    def mass_diagonal(self, volumes) -> np.ndarray:
        """(ncells, nb) diagonal of M = s^2 |E| M_ref."""
        volumes = np.atleast_1d(np.asarray(volumes, dtype=float))
        s = self.scale(volumes)
        return (s**2 * volumes)[:, None] * self.mass_ref[None, :]

    @cached_property
    def _exact(self):
        rule = _tensor(*gauss_1d(self.order + 2), self.dim)
        phi = self.eval(rule.points)
        M = phi.T @ (rule.weights[:, None] * phi)
        return rule, phi, M

    @cached_property
    def mean_weights(self) -> np.ndarray:
        """Reference integrals of the basis functions."""
        rule, phi, _ = self._exact
        return rule.weights @ phi

    def means(self, dofs, volumes) -> np.ndarray:
        """Cell averages (ncells, r) of a dof array (ncells, r, nb)."""
        s = self.scale(volumes)
        return s[:, None] * np.einsum("nrb,b->nr", dofs, self.mean_weights)

    def from_means(self, means, volumes) -> np.ndarray:
        """Dofs of the piecewise constant function with the given means."""
        s = self.scale(volumes)
        c0 = self.project_ref(lambda xi: np.ones(len(xi)))
        return (means / s[:, None])[:, :, None] * c0[None, None, :]

    def project_ref(self, g) -> np.ndarray:
        """Exact-mass L2 projection of a reference function (unscaled coefficients)."""
        rule, phi, M = self._exact
        return np.linalg.solve(M, phi.T @ (rule.weights * g(rule.points)))

    @cached_property
    def linear_ref(self) -> np.ndarray:
        """Unscaled coefficients of [1, xi_0 - 1/2, ..., xi_{d-1} - 1/2] -> (d+1, nb)."""
        rows = [self.project_ref(lambda xi: np.ones(len(xi)))]
        for a in range(self.dim):
            rows.append(self.project_ref(lambda xi, a=a: xi[:, a] - 0.5))
        return np.array(rows)

    # ------------------------------------------------------------------ traces
    def face_points(self, tt: int) -> np.ndarray:
        """Reference points (nqf, d) of the face quadrature embedded by trace type."""
        axis, pos, sub = trace_embedding(tt)
        s = self.fquad.points
        xi = np.zeros((self.fquad.size, self.dim))
        xi[:, axis] = float(pos)
        if self.dim == 2:
            off, sc = _SUB_RANGE[sub]
            xi[:, 1 - axis] = off + sc * s[:, 0]
        return xi

    @cached_property
    def traces(self) -> np.ndarray:
        """Basis values at face quadrature points per trace type (ntypes, nqf, nb)."""
        return np.array([self.eval(self.face_points(t)) for t in range(n_trace_types(self.dim))])

    @cached_property
    def trace_grads(self) -> np.ndarray:
        """Reference gradients per trace type (ntypes, d, nqf, nb)."""
        return np.array([self.eval_grad(self.face_points(t)) for t in range(n_trace_types(self.dim))])

    # ---------------------------------------------------------------- transfer
    def prolong_matrix(self, rel, up: int = 1) -> np.ndarray:
        """Map parent dofs to the dofs of the descendant at offset ``rel`` (``up`` levels down)."""
        key = ("prolong", tuple(rel), up)
        if key not in self._cache:
            rule, phi, M = self._exact
            xi = (np.asarray(rel, float)[None, :] + rule.points) / 2.0**up
            T = np.linalg.solve(M, phi.T @ (rule.weights[:, None] * self.eval(xi)))
            if self.kind == ONB:
                T *= 2.0 ** (-0.5 * self.dim * up)
            self._cache[key] = T
        return self._cache[key]

    def restrict_matrices(self):
        """Per-child matrices (offsets in itertools.product order) summing to the parent L2 projection."""
        key = ("restrict",)
        if key not in self._cache:
            rule, phi, M = self._exact
            mats = []
            for off in itertools.product((0, 1), repeat=self.dim):
                xi = (np.asarray(off, float)[None, :] + rule.points) / 2.0
                T = np.linalg.solve(M, self.eval(xi).T @ (rule.weights[:, None] * phi)) * 2.0**-self.dim
                if self.kind == ONB:
                    T *= 2.0 ** (0.5 * self.dim)
                mats.append(T)
            self._cache[key] = mats
        return self._cache[key]

    def conversion_matrix(self, other: "Space") -> np.ndarray:
        """Reference matrix C with phi_other-coefficients = C @ phi_self-coefficients (unscaled)."""
        rule, phi_o, M_o = other._exact
        return np.linalg.solve(M_o, phi_o.T @ (rule.weights[:, None] * self.eval(rule.points)))


# ------------------------------------------------------------ free functions
def eval_basis(space: Space, xi) -> np.ndarray:
    return space.eval(xi)


def eval_basis_grad(space: Space, xi) -> np.ndarray:
    """Reference gradients shaped (M, nb, d)."""
    return np.moveaxis(space.eval_grad(xi), 0, -1)


def mass_matrix(space: Space, volume: float) -> np.ndarray:
    return np.diag(space.mass_diagonal([volume])[0])


def project(space: Space, corner, h, f) -> np.ndarray:
    """Dofs (r, nb) of a pointwise function on the box ``corner + [0,h]``.

    ONB uses the L2 projection by the volume rule; nodal kinds interpolate.
    ``f`` maps points (M, d) to values (M, r) or (M,).
    """
    blocks = project_cells(space, np.atleast_2d(corner), np.atleast_2d(h), f)
    return blocks[0]


def project_cells(space: Space, corner, h, f) -> np.ndarray:
    corner = np.asarray(corner, dtype=float)
    h = np.asarray(h, dtype=float)
    n = len(corner)
    xq = corner[:, None, :] + h[:, None, :] * space.quad.points[None, :, :]
    vals = np.asarray(f(xq.reshape(-1, space.dim)), dtype=float).reshape(n, space.quad.size, -1)
    if not np.all(np.isfinite(vals)):
        raise ValueError("projected function produced non-finite values")
    vol = np.prod(h, axis=1)
    if space.kind == ONB:
        c = np.einsum("q,qb,nqr->nrb", space.quad.weights, space.V, vals)
        return c / space.scale(vol)[:, None, None]
    return np.ascontiguousarray(np.swapaxes(vals, 1, 2))


def evaluate(space: Space, block, xi, volume) -> np.ndarray:
    """Values (M, r) of one cell's dof block at reference points."""
    s = space.scale(volume)
    return s * (space.eval(xi) @ np.asarray(block).T)


def evaluate_grad(space: Space, block, xi, h) -> np.ndarray:
    """Physical gradients (M, r, d) of one cell's dof block."""
    h = np.asarray(h, dtype=float)
    s = space.scale(np.prod(h))
    G = space.eval_grad(xi)  # (d, M, nb)
    return s * np.einsum("gmb,rb->mrg", G, np.asarray(block)) / h[None, None, :]
