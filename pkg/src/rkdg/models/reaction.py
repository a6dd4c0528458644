"""Three-species reaction with advection along closed streamlines and weak diffusion."""
from __future__ import annotations

import numpy as np

from .base import Dirichlet, Domain, ModelSpec, dot

# stream function psi = 2.5 sin(x) sin(y) solves -lap(psi) = 5 sin(x) sin(y), psi=0 on the box
PSI_AMPLITUDE = 2.5


def reaction_velocity(x):
    """Divergence-free curl of the stream function: (-d_y psi, d_x psi)."""
    s0, c0 = np.sin(x[..., 0]), np.cos(x[..., 0])
    s1, c1 = np.sin(x[..., 1]), np.cos(x[..., 1])
    return PSI_AMPLITUDE * np.stack([-s0 * c1, c0 * s1], axis=-1)


def reaction_rate(U):
    uv = U[..., 0] * U[..., 1]
    return 10.0 * np.stack([uv, uv, -2.0 * uv], axis=-1)


def reaction_model(mu_d=0.02, counts=(20, 20)) -> ModelSpec:
    P1 = np.array([0.2 * np.pi, 0.2 * np.pi])
    P2 = np.array([1.8 * np.pi, 1.8 * np.pi])

    def S_e(t, x, U, DU=None):
        f = np.zeros(U.shape)
        if t < 5:
            f[..., 0] = np.sum((x - P1) ** 2, axis=-1) < 0.2
            f[..., 1] = np.sum((x - P2) ** 2, axis=-1) < 0.2
        return f - reaction_rate(U)

    def F_c(t, x, U):
        return U[..., :, None] * reaction_velocity(x)[..., None, :]

    def max_wave_speed(t, x, U, n):
        return np.abs(dot(reaction_velocity(x), n))

    return ModelSpec(
        dim_range=3, dim=2, name="reaction",
        U0=lambda x: np.zeros(x.shape[:-1] + (3,)),
        end_time=10.0,
        domain=Domain((0.0, 0.0), (2 * np.pi, 2 * np.pi), counts),
        F_c=F_c, F_v=lambda t, x, U, DU: mu_d * DU, S_e=S_e,
        max_wave_speed=max_wave_speed,
        velocity=lambda t, x, U: reaction_velocity(x),
        lower_bound=[0.0, 0.0, 0.0],
        physical=lambda t, x, U: np.all(U > -1e-8, axis=-1),
        boundary={range(1, 5): Dirichlet(lambda t, x, U: np.zeros_like(U))},
    )
