"""Pure numpy versions of the element kernels (fallback for the compiled module)."""
import numpy as np


def cell_eval(dofs, B, scale):
    """out[n, q, r] = scale[n] * sum_b B[q, b] dofs[n, r, b]."""
    n, r, nb = dofs.shape
    out = (dofs.reshape(n * r, nb) @ B.T).reshape(n, r, -1)
    out *= np.asarray(scale, dtype=float).reshape(-1, 1, 1)
    return np.ascontiguousarray(out.transpose(0, 2, 1))


def cell_test(A, B):
    """out[n, r, b] = sum_q A[n, q, r] B[q, b]."""
    n, nq, r = A.shape
    At = np.ascontiguousarray(A.transpose(0, 2, 1)).reshape(n * r, nq)
    return (At @ B).reshape(n, r, -1)


def modal_values(dofs, order, dim, volumes):
    """Decay exponent of component 0 for every cell."""
    from .stabilize import modal_smoothness
    return np.array([modal_smoothness(dofs[c], order, dim, volumes[c]) for c in range(len(dofs))])
