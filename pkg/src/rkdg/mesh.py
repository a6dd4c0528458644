"""Cartesian 1D/2D meshes with nonconforming (quadtree) refinement.

Cells are addressed by ``(level, index)`` where ``index`` is the integer
position of the cell in the uniform grid of that level, i.e. a grid with
``counts * 2**level`` cells per axis.  Only leaves are stored; parents are
implied by integer division of the index.

Boundary ids follow the usual convention: left=1, right=2, bottom=3, top=4.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

REFINE = 1
KEEP = 0
COARSEN = -1

# sub-position of a face on one side: whole face, lower half, upper half
SUB_FULL, SUB_LO, SUB_HI = 0, 1, 2


class MeshError(ValueError):
    pass


def trace_type(axis: int, pos: int, sub: int) -> int:
    """Index of the reference-face embedding (axis, xi_axis in {0,1}, tangential sub-range)."""
    return (axis * 2 + pos) * 3 + sub


def n_trace_types(dim: int) -> int:
    return dim * 2 * 3


def trace_embedding(tt: int):
    """Inverse of :func:`trace_type`."""
    axis, rest = divmod(tt, 6)
    pos, sub = divmod(rest, 3)
    return axis, pos, sub


_LEVEL_SHIFT = 56
_AXIS_BITS = 27


def _encode(level, index):
    """Pack (level, index) pairs into sortable int64 keys."""
    index = np.asarray(index, dtype=np.int64)
    code = np.asarray(level, dtype=np.int64) << _LEVEL_SHIFT
    d = index.shape[1]
    for a in range(d):
        code = code | (index[:, a] << (_AXIS_BITS * (d - 1 - a)))
    return code


class _LeafTable:
    """Vectorised membership queries on a set of leaves."""

    def __init__(self, level, index):
        codes = _encode(level, index)
        self.order = np.argsort(codes, kind="stable")
        self.sorted = codes[self.order]
        self.level = np.asarray(level)

    def find(self, level, index):
        """Leaf id of every (level, index) pair, -1 where it is not a leaf."""
        if len(self.sorted) == 0 or len(index) == 0:
            return np.full(len(index), -1, dtype=np.int64)
        code = _encode(level, index)
        pos = np.minimum(np.searchsorted(self.sorted, code), len(self.sorted) - 1)
        return np.where(self.sorted[pos] == code, self.order[pos], -1)

    def cover(self, level, index):
        """Leaf of level <= ``level`` containing the given cell, -1 if it is split finer."""
        level = np.asarray(level, dtype=np.int64)
        out = np.full(len(level), -1, dtype=np.int64)
        if len(level) == 0:
            return out
        for up in range(int(level.max()) + 1):
            sel = np.flatnonzero((out < 0) & (level >= up))
            if len(sel) == 0:
                break
            out[sel] = self.find(level[sel] - up, index[sel] >> up)
        return out


def _split(level, index, mask):
    """Replace the masked leaves by their 2**d children."""
    if not np.any(mask):
        return level, index
    d = index.shape[1]
    offsets = np.array(list(itertools.product((0, 1), repeat=d)), dtype=np.int64)
    kl = np.repeat(level[mask] + 1, len(offsets))
    ki = (2 * index[mask][:, None, :] + offsets[None]).reshape(-1, d)
    return np.concatenate([level[~mask], kl]), np.concatenate([index[~mask], ki])


@dataclass(frozen=True)
class CellGeometry:
    center: np.ndarray
    volume: float
    diameter: float
    level: int


@dataclass(frozen=True)
class Face:
    inside: int
    outside: Optional[int]
    boundary_id: Optional[int]
    normal: np.ndarray
    area: float
    center: np.ndarray
    hanging: bool


@dataclass
class FaceArrays:
    """Struct-of-arrays view of all faces, used by the vectorised kernels.

    ``outside`` is -1 and ``boundary_id`` > 0 on boundary faces.  The normal
    is ``sign * e_axis`` and points from ``inside`` to ``outside``.  At a
    hanging interface ``inside`` is always the fine cell.
    """

    inside: np.ndarray
    outside: np.ndarray
    axis: np.ndarray
    sign: np.ndarray
    boundary_id: np.ndarray
    in_type: np.ndarray
    out_type: np.ndarray
    area: np.ndarray
    center: np.ndarray
    h_e: np.ndarray

    @property
    def n(self) -> int:
        return len(self.inside)

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(self.outside >= 0)

    @property
    def boundary(self) -> np.ndarray:
        return np.flatnonzero(self.outside < 0)

    def normals(self, dim: int) -> np.ndarray:
        nrm = np.zeros((self.n, dim))
        nrm[np.arange(self.n), self.axis] = self.sign
        return nrm


class Mesh:
    """Axis-aligned tessellation of an interval or rectangle.

    Parameters
    ----------
    lower, upper
        Domain corners.
    counts
        Number of level-0 cells per axis.
    periodic
        Per-axis periodicity; periodic axes produce no boundary faces.
    """

    def __init__(self, lower, upper, counts, periodic=None):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        counts = tuple(int(c) for c in np.atleast_1d(counts))
        if not (len(lower) == len(upper) == len(counts)) or len(lower) not in (1, 2):
            raise MeshError("bounds and counts must agree and have dimension 1 or 2")
        if any(c < 1 for c in counts):
            raise MeshError(f"cell counts must be >= 1, got {counts}")
        if np.any(upper <= lower):
            raise MeshError("upper bounds must exceed lower bounds")
        self.dim = len(counts)
        self.lower = lower
        self.upper = upper
        self.counts = counts
        if periodic is None:
            periodic = (False,) * self.dim
        self.periodic = tuple(bool(p) for p in periodic)
        self.base_h = (upper - lower) / np.array(counts)
        grids = np.meshgrid(*[np.arange(c) for c in counts], indexing="ij")
        index = np.stack([g.ravel(order="F") for g in grids], axis=1)
        self.level = np.zeros(len(index), dtype=np.int64)
        self.index = index.astype(np.int64)
        self.version = 0
        self._marks = None
        self._rebuild()

    # ------------------------------------------------------------------ setup
    def _rebuild(self):
        self._table = _LeafTable(self.level, self.index)
        scale = 2.0 ** (-self.level.astype(float))
        self.h = self.base_h[None, :] * scale[:, None]
        self.corner = self.lower[None, :] + self.index * self.h
        self.centers = self.corner + 0.5 * self.h
        self.volumes = np.prod(self.h, axis=1)
        self.diameters = np.sqrt(np.sum(self.h**2, axis=1))
        self._faces = self._build_faces()
        self._marks = None

    @property
    def n_cells(self) -> int:
        return len(self.level)

    @property
    def domain_volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def copy(self) -> "Mesh":
        other = object.__new__(Mesh)
        other.__dict__.update(self.__dict__)
        other.level = self.level.copy()
        other.index = self.index.copy()
        other._rebuild()
        other.version = self.version
        return other

    def geometry(self, cell: int) -> CellGeometry:
        return CellGeometry(self.centers[cell].copy(), float(self.volumes[cell]),
                            float(self.diameters[cell]), int(self.level[cell]))

    def _shift(self, level, index, axis, step):
        """Same-level neighbour indices, wrapped on periodic axes, and a mask of those inside."""
        j = index.copy()
        j[:, axis] += step
        n = np.int64(self.counts[axis]) << level
        outside = (j[:, axis] < 0) | (j[:, axis] >= n)
        if self.periodic[axis]:
            j[:, axis] %= n
            outside[:] = False
        return j, ~outside

    def _build_faces(self) -> FaceArrays:
        d = self.dim
        table = self._table
        cells = np.arange(self.n_cells, dtype=np.int64)
        level, index = self.level, self.index
        parts = []

        def add(c, o, axis, step, bid, tin, tout):
            n = len(c)
            parts.append(np.column_stack([c, o, np.full(n, axis), np.full(n, step), np.broadcast_to(bid, n),
                                          np.broadcast_to(tin, n), np.broadcast_to(tout, n)]))

        for axis in range(d):
            for step in (-1, 1):
                pos_in = 1 if step > 0 else 0
                t_in = trace_type(axis, pos_in, SUB_FULL)
                j, valid = self._shift(level, index, axis, step)
                bc = cells[~valid]
                add(bc, np.full(len(bc), -1), axis, step, 1 + 2 * axis + pos_in, t_in, -1)
                c = cells[valid]
                j, lv = j[valid], level[valid]
                nb = table.find(lv, j)
                if step > 0:
                    hit = nb >= 0
                    add(c[hit], nb[hit], axis, step, 0, t_in, trace_type(axis, 1 - pos_in, SUB_FULL))
                rest = (nb < 0) & (lv > 0)
                c, j, lv = c[rest], j[rest], lv[rest]
                coarse = table.find(lv - 1, j >> 1)
                hit = coarse >= 0
                c, coarse = c[hit], coarse[hit]
                if d == 1:
                    sub = np.full(len(c), SUB_FULL)
                else:
                    sub = np.where(index[c, 1 - axis] % 2 == 0, SUB_LO, SUB_HI)
                add(c, coarse, axis, step, 0, t_in, (axis * 2 + 1 - pos_in) * 3 + sub)
                # otherwise the neighbour is finer and owns the face
        arr = np.concatenate(parts).astype(np.int64) if parts else np.zeros((0, 7), dtype=np.int64)
        arr = arr[np.lexsort((arr[:, 3], arr[:, 2], arr[:, 0]))]
        inside, outside, axis, sign, bid, tin, tout = (np.ascontiguousarray(col) for col in arr.T)
        if d == 1:
            area = np.ones(len(inside))
        else:
            area = self.h[inside, 1 - axis]
        center = self.centers[inside].copy()
        center[np.arange(len(inside)), axis] += 0.5 * sign * self.h[inside, axis]
        vol_out = np.where(outside >= 0, self.volumes[np.maximum(outside, 0)], self.volumes[inside])
        h_e = 0.5 * (self.volumes[inside] + vol_out) / area
        return FaceArrays(inside, outside, axis, sign, bid, tin, tout, area, center, h_e)

    # ------------------------------------------------------------ face access
    @property
    def face_arrays(self) -> FaceArrays:
        return self._faces

    def faces(self) -> Iterator[Face]:
        fa = self._faces
        nrm = fa.normals(self.dim)
        for f in range(fa.n):
            out = int(fa.outside[f])
            yield Face(
                inside=int(fa.inside[f]),
                outside=out if out >= 0 else None,
                boundary_id=int(fa.boundary_id[f]) if out < 0 else None,
                normal=nrm[f],
                area=float(fa.area[f]),
                center=fa.center[f],
                hanging=bool(out >= 0 and self.level[out] != self.level[fa.inside[f]]),
            )

    def boundary_ids(self) -> set:
        return {int(b) for b in self._faces.boundary_id if b > 0}

    def neighbors(self):
        """List of face-neighbour cell indices per cell."""
        nbrs = [[] for _ in range(self.n_cells)]
        fa = self._faces
        for f in fa.interior:
            a, b = int(fa.inside[f]), int(fa.outside[f])
            if a == b:
                continue
            nbrs[a].append(b)
            nbrs[b].append(a)
        return [sorted(set(n)) for n in nbrs]

    # --------------------------------------------------------------- refining
    def global_refine(self, levels: int = 1):
        """Split every leaf into 2**dim children, ``levels`` times."""
        if levels < 0:
            raise MeshError("levels must be >= 0")
        if levels == 0:
            return self
        offsets = np.array(list(itertools.product((0, 1), repeat=self.dim)), dtype=np.int64)
        level, index = self.level, self.index
        for _ in range(levels):
            level = np.repeat(level + 1, len(offsets))
            index = (2 * index[:, None, :] + offsets[None, :, :]).reshape(-1, self.dim)
        self._set_leaves(level, index)
        return self

    def _set_leaves(self, level, index):
        order = np.lexsort(tuple(index[:, a] for a in range(self.dim)) + (level,))
        self.level = np.ascontiguousarray(level[order])
        self.index = np.ascontiguousarray(index[order])
        self.version += 1
        self._rebuild()

    def max_level_jump(self) -> int:
        fa = self._faces
        inter = fa.interior
        if len(inter) == 0:
            return 0
        return int(np.max(np.abs(self.level[fa.inside[inter]] - self.level[fa.outside[inter]])))

    def mark(self, indicator, refine_tol, coarsen_tol, min_level=0, max_level=0):
        """Flag leaves for refinement or coarsening.

        A leaf is flagged for refinement when its indicator exceeds
        ``refine_tol`` and its level is below ``max_level``; every face
        neighbour of such a leaf is flagged as well (subject to the same
        level cap).  Leaves below ``coarsen_tol`` above ``min_level`` are
        flagged for coarsening unless already flagged for refinement.

        Returns ``(n_refine, n_coarsen)``.
        """
        eta = np.asarray(indicator, dtype=float).ravel()
        if eta.shape != (self.n_cells,):
            raise MeshError("indicator must have one value per leaf")
        if refine_tol < 0 or coarsen_tol < 0:
            raise MeshError("tolerances must be non-negative")
        if not 0 <= min_level <= max_level:
            raise MeshError("require 0 <= min_level <= max_level")
        can_refine = self.level < max_level
        seed = (eta > refine_tol) & can_refine
        flags = np.zeros(self.n_cells, dtype=np.int8)
        flags[seed] = REFINE
        fa = self._faces
        inter = fa.interior
        a, b = fa.inside[inter], fa.outside[inter]
        spread = np.zeros(self.n_cells, dtype=bool)
        spread[b[seed[a]]] = True
        spread[a[seed[b]]] = True
        flags[spread & can_refine] = REFINE
        coarse = (eta < coarsen_tol) & (self.level > min_level) & (flags != REFINE)
        flags[coarse] = COARSEN
        self._marks = flags
        return int(np.sum(flags == REFINE)), int(np.sum(flags == COARSEN))

    def adapt(self, functions: Sequence = ()):
        """Execute pending marks, keeping 2:1 balance, and transfer ``functions``.

        Each function must expose ``space``, ``dofs`` (cells x range x basis)
        and ``mesh_version``; their dof arrays are replaced in place.
        """
        for fn in functions:
            if fn.mesh_version != self.version:
                raise MeshError("discrete function lives on a stale mesh")
        flags = self._marks
        self._marks = None
        if flags is None or not np.any(flags != KEEP):
            return self
        d = self.dim
        level, index = _split(self.level, self.index, flags == REFINE)
        # 2:1 balance closure
        while True:
            table = _LeafTable(level, index)
            need = np.zeros(len(level), dtype=bool)
            for axis in range(d):
                for step in (-1, 1):
                    j, valid = self._shift(level, index, axis, step)
                    lv = level[valid]
                    cov = table.cover(lv, j[valid])
                    bad = (cov >= 0) & (lv - level[np.maximum(cov, 0)] >= 2)
                    need[cov[bad]] = True
            if not np.any(need):
                break
            level, index = _split(level, index, need)
        level, index = self._coarsen(level, index, table, flags)
        old_level, old_index = self.level, self.index
        self._set_leaves(level, index)
        self._transfer(functions, old_level, old_index)
        return self

    def _coarsen(self, level, index, table, flags):
        """Merge complete sibling groups flagged for coarsening where balance allows."""
        d = self.dim
        cand = np.flatnonzero(flags == COARSEN)
        ids = table.find(self.level[cand], self.index[cand])
        ids = np.unique(ids[ids >= 0])
        if len(ids) == 0:
            return level, index
        lv, idx = level[ids], index[ids]
        pcode = _encode(lv - 1, idx >> 1)
        uniq, inv, cnt = np.unique(pcode, return_inverse=True, return_counts=True)
        ok_group = cnt == 2**d
        for axis in range(d):
            for step in (-1, 1):
                j, valid = self._shift(lv, idx, axis, step)
                sibling = np.all((j >> 1) == (idx >> 1), axis=1)
                check = valid & ~sibling
                cov = np.full(len(ids), 0)
                cov[check] = table.cover(lv[check], j[check])
                bad = check & (cov < 0)
                ok_group[inv[bad]] = False
        merge = ok_group[inv]
        if not np.any(merge):
            return level, index
        keep = np.ones(len(level), dtype=bool)
        keep[ids[merge]] = False
        first = np.unique(inv[merge], return_index=True)[1]
        kids = np.flatnonzero(merge)[first]
        plev = lv[kids] - 1
        pidx = idx[kids] >> 1
        return np.concatenate([level[keep], plev]), np.concatenate([index[keep], pidx])

    def _transfer(self, functions, old_level, old_index):
        d = self.dim
        old = _LeafTable(old_level, old_index)
        n = self.n_cells
        src_same = old.find(self.level, self.index)
        copy_new = np.flatnonzero(src_same >= 0)
        copy_old = src_same[copy_new]
        todo = np.flatnonzero(src_same < 0)
        prolong = []   # (up, rel offset, new ids, old ids)
        found = np.zeros(len(todo), dtype=bool)
        top = int(self.level.max()) if n else 0
        for up in range(1, top + 1):
            sel = ~found & (self.level[todo] >= up)
            if not np.any(sel):
                continue
            cells = todo[sel]
            anc = old.find(self.level[cells] - up, self.index[cells] >> up)
            hit = anc >= 0
            cells, anc = cells[hit], anc[hit]
            found[np.flatnonzero(sel)[hit]] = True
            rel = self.index[cells] - (old_index[anc] << up)
            keys, inv = np.unique(rel, axis=0, return_inverse=True)
            inv = inv.ravel()
            for g, key in enumerate(keys):
                m = inv == g
                prolong.append((up, tuple(int(v) for v in key), cells[m], anc[m]))
        restrict = todo[~found]
        kids = []
        if len(restrict):
            for off in itertools.product((0, 1), repeat=d):
                k = old.find(self.level[restrict] + 1, 2 * self.index[restrict] + np.array(off))
                if np.any(k < 0):
                    raise MeshError("coarsened cell without a complete set of old children")
                kids.append(k)
        for fn in functions:
            space = fn.space
            src = fn.dofs
            dst = np.empty((n,) + src.shape[1:], dtype=src.dtype)
            dst[copy_new] = src[copy_old]
            for up, rel, new_ids, old_ids in prolong:
                T = space.prolong_matrix(rel, up)
                dst[new_ids] = np.einsum("ij,nrj->nri", T, src[old_ids])
            if len(restrict):
                acc = np.zeros((len(restrict),) + src.shape[1:])
                for T, k in zip(space.restrict_matrices(), kids):
                    acc += np.einsum("ij,nrj->nri", T, src[k])
                dst[restrict] = acc
            fn.dofs = dst
            fn.mesh_version = self.version


def create_cartesian(lower, upper, counts, periodic=None) -> Mesh:
    """Uniform level-0 mesh of ``counts`` cells spanning ``[lower, upper]``."""
    return Mesh(lower, upper, counts, periodic=periodic)


def global_refine(mesh: Mesh, levels: int) -> Mesh:
    return mesh.global_refine(levels)


def mark(mesh: Mesh, indicator, refine_tol, coarsen_tol, min_level=0, max_level=0):
    return mesh.mark(indicator, refine_tol, coarsen_tol, min_level, max_level)


def adapt(mesh: Mesh, functions=()) -> Mesh:
    return mesh.adapt(functions)
