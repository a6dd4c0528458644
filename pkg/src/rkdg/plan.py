"""Per-mesh precomputed geometry and trace evaluation shared by the operator,
the limiters and the estimator.

A plan is tied to one (space, mesh version) pair.  Faces are grouped by the
reference embedding of their trace on each side; inside one group every cell
occurs at most once, so scatters can use plain fancy-index updates.
"""
from __future__ import annotations

import numpy as np

from . import kernels
from .basis import Space
from .mesh import Mesh


class MeshPlan:
    def __init__(self, space: Space, mesh: Mesh):
        if space.dim != mesh.dim:
            raise ValueError("space and mesh dimensions differ")
        self.space = space
        self.mesh = mesh
        self.version = mesh.version
        d = mesh.dim
        self.dim = d
        self.N = mesh.n_cells
        self.h = mesh.h
        self.vol = mesh.volumes
        self.s = space.scale(self.vol)
        q = space.quad
        self.nq = q.size
        # physical volume points (N, nq, d) and weights |E| w_q
        self.xq = mesh.corner[:, None, :] + mesh.h[:, None, :] * q.points[None, :, :]
        self.wq = self.vol[:, None] * q.weights[None, :]
        # derivative factors s / h_a for reference gradients
        self.ginv = self.s[:, None] / self.h

        fa = mesh.face_arrays
        self.faces = fa
        self.F = fa.n
        self.nqf = space.fquad.size
        self.inside = fa.inside
        self.outside = fa.outside
        self.interior = fa.interior
        self.boundary = fa.boundary
        self.normal = fa.normals(d)
        self.wf = fa.area[:, None] * space.fquad.weights[None, :]
        xf = np.empty((self.F, self.nqf, d))
        self.in_groups = self._group(fa.in_type, np.arange(self.F))
        self.out_groups = self._group(fa.out_type[self.interior], self.interior)
        for tt, ids in self.in_groups:
            c = self.inside[ids]
            xf[ids] = mesh.corner[c][:, None, :] + mesh.h[c][:, None, :] * space.face_points(tt)[None]
        self.xf = xf
        vin = self.vol[self.inside]
        vout = np.where(self.outside >= 0, self.vol[np.maximum(self.outside, 0)], vin)
        # face size used by the interior penalty: smaller neighbour volume over face area
        self.h_pen = np.minimum(vin, vout) / fa.area
        self.h_e = fa.h_e

    @staticmethod
    def _group(types, ids):
        out = []
        for tt in np.unique(types):
            out.append((int(tt), ids[types == tt]))
        return out

    def axis_max(self, lam):
        """(N, d) maximum of a per-face value over the faces of each cell, split by face axis."""
        if not hasattr(self, "_incidence"):
            ax = self.faces.axis
            inter = self.interior
            keys = np.concatenate([self.inside * self.dim + ax, self.outside[inter] * self.dim + ax[inter]])
            faces = np.concatenate([np.arange(self.F), inter])
            order = np.argsort(keys, kind="stable")
            uniq, starts = np.unique(keys[order], return_index=True)
            self._incidence = (faces[order], uniq, starts)
        faces, uniq, starts = self._incidence
        out = np.zeros(self.N * self.dim)
        if len(faces):
            out[uniq] = np.maximum.reduceat(lam[faces], starts)
        return out.reshape(self.N, self.dim)

    def check(self, mesh: Mesh):
        return mesh is self.mesh and mesh.version == self.version

    # ------------------------------------------------------------ volume
    def vol_values(self, dofs):
        """(N, nq, r) point values."""
        return kernels.cell_eval(dofs, self.space.V, self.s)

    def vol_grads(self, dofs):
        """(N, nq, r, d) physical gradients."""
        G = self.space.G
        out = np.empty((self.N, self.nq, dofs.shape[1], self.dim))
        for a in range(self.dim):
            out[..., a] = kernels.cell_eval(dofs, G[a], self.ginv[:, a])
        return out

    def vol_residual(self, flux=None, source=None):
        """Reference-weighted volume terms: s|E| sum_q w_q (F : grad phi + S phi)."""
        sp = self.space
        R = None
        if flux is not None:
            for a in range(self.dim):
                A = flux[..., a] * (self.wq * self.ginv[:, a, None])[:, :, None]
                term = kernels.cell_test(A, sp.G[a])
                R = term if R is None else R + term
        if source is not None:
            A = source * (self.wq * self.s[:, None])[:, :, None]
            term = kernels.cell_test(A, sp.V)
            R = term if R is None else R + term
        return R

    # ------------------------------------------------------------- faces
    def face_values(self, dofs, ids_out=True):
        """Traces (F, nqf, r) from the inside cell and, on interior faces, the outside cell."""
        tr = self.space.traces
        r = dofs.shape[1]
        UL = np.empty((self.F, self.nqf, r))
        for tt, ids in self.in_groups:
            c = self.inside[ids]
            UL[ids] = kernels.cell_eval(dofs[c], tr[tt], self.s[c])
        UR = np.full((self.F, self.nqf, r), np.nan)
        if ids_out:
            for tt, ids in self.out_groups:
                c = self.outside[ids]
                UR[ids] = kernels.cell_eval(dofs[c], tr[tt], self.s[c])
        return UL, UR

    def face_grads(self, dofs):
        tg = self.space.trace_grads
        r = dofs.shape[1]
        DL = np.empty((self.F, self.nqf, r, self.dim))
        DR = np.full((self.F, self.nqf, r, self.dim), np.nan)
        for groups, cells, out in ((self.in_groups, self.inside, DL), (self.out_groups, self.outside, DR)):
            for tt, ids in groups:
                c = cells[ids]
                for a in range(self.dim):
                    out[ids, ..., a] = kernels.cell_eval(dofs[c], tg[tt, a], self.ginv[c, a])
        return DL, DR

    def scatter(self, R, c_in, c_out=None):
        """Add sum_q c[f,q,r] phi_b(x_q) to the face cells; c already carries weights and signs."""
        tr = self.space.traces
        for tt, ids in self.in_groups:
            c = self.inside[ids]
            R[c] += kernels.cell_test(c_in[ids] * self.s[c, None, None], tr[tt])
        if c_out is not None:
            for tt, ids in self.out_groups:
                c = self.outside[ids]
                R[c] += kernels.cell_test(c_out[ids] * self.s[c, None, None], tr[tt])

    def scatter_grad(self, R, a_in, a_out=None):
        """Add sum_q sum_a A[f,q,r,a] d_a phi_b(x_q) to the face cells."""
        tg = self.space.trace_grads
        for groups, cells, A in ((self.in_groups, self.inside, a_in), (self.out_groups, self.outside, a_out)):
            if A is None:
                continue
            for tt, ids in groups:
                c = cells[ids]
                for a in range(self.dim):
                    R[c] += kernels.cell_test(A[ids, ..., a] * self.ginv[c, a, None, None], tg[tt, a])

    def check_points(self):
        """Reference points, basis values and physical points of all volume and face nodes."""
        if not hasattr(self, "_check"):
            sp = self.space
            xi = np.concatenate([sp.quad.points] + [sp.face_points(tt) for tt in range(0, 6 * self.dim, 3)])
            B = sp.eval(xi)
            x = self.mesh.corner[:, None, :] + self.mesh.h[:, None, :] * xi[None]
            self._check = (xi, B, x)
        return self._check

    def check_values(self, dofs):
        """(N, P, r) values at all volume and face quadrature nodes."""
        return kernels.cell_eval(dofs, self.check_points()[1], self.s)

    def inverse_mass(self):
        if not hasattr(self, "_minv"):
            self._minv = 1.0 / self.space.mass_diagonal(self.vol)
        return self._minv
