"""Exact solution of the 1D Riemann problem for an ideal gas."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class RiemannError(ValueError):
    pass


@dataclass
class RiemannExact:
    """Self-similar solution for primitive states (rho, u, p) left and right of x0 at t=0."""

    gamma: float
    left: tuple
    right: tuple

    def __post_init__(self):
        g = self.gamma
        rl, ul, pl = map(float, self.left)
        rr, ur, pr = map(float, self.right)
        if min(rl, rr, pl, pr) <= 0:
            raise RiemannError("Riemann data must have positive density and pressure")
        self.cl = np.sqrt(g * pl / rl)
        self.cr = np.sqrt(g * pr / rr)
        if 2.0 / (g - 1.0) * (self.cl + self.cr) <= ur - ul:
            raise RiemannError("the data generate a vacuum")
        self.p_star, self.u_star = self._star()

    def _f(self, p, rho, pk, ck):
        g = self.gamma
        if p > pk:
            A = 2.0 / ((g + 1.0) * rho)
            B = (g - 1.0) / (g + 1.0) * pk
            q = np.sqrt(A / (p + B))
            return (p - pk) * q, q * (1.0 - 0.5 * (p - pk) / (B + p))
        e = (g - 1.0) / (2.0 * g)
        return (2.0 * ck / (g - 1.0)) * ((p / pk) ** e - 1.0), (p / pk) ** (-(g + 1.0) / (2.0 * g)) / (rho * ck)

    def _star(self, tol=1e-14, maxit=100):
        rl, ul, pl = map(float, self.left)
        rr, ur, pr = map(float, self.right)
        du = ur - ul
        # two-rarefaction guess
        g = self.gamma
        e = (g - 1.0) / (2.0 * g)
        p = ((self.cl + self.cr - 0.5 * (g - 1.0) * du) / (self.cl / pl**e + self.cr / pr**e)) ** (1.0 / e)
        p = max(p, 1e-12)
        for _ in range(maxit):
            fl, dl = self._f(p, rl, pl, self.cl)
            fr, dr = self._f(p, rr, pr, self.cr)
            p_new = max(p - (fl + fr + du) / (dl + dr), 1e-14)
            if abs(p_new - p) <= tol * 0.5 * (p_new + p):
                p = p_new
                break
            p = p_new
        else:
            raise RiemannError("pressure iteration did not converge")
        fl, _ = self._f(p, rl, pl, self.cl)
        fr, _ = self._f(p, rr, pr, self.cr)
        return p, 0.5 * (ul + ur) + 0.5 * (fr - fl)

    def sample(self, xi):
        """Primitive states (M, 3) at similarity coordinates xi = (x - x0) / t."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.empty((len(xi), 3))
        for n, s in enumerate(xi):
            out[n] = self._sample_one(s)
        return out

    def _side(self, s, state, c, sgn):
        """Solution on one side of the contact; sgn=-1 for the left wave, +1 for the right."""
        g = self.gamma
        rho, u, p = map(float, state)
        ps, us = self.p_star, self.u_star
        s = sgn * s
        u, us = sgn * u, sgn * us
        if ps > p:
            ratio = ps / p
            gm = (g - 1.0) / (g + 1.0)
            shock = u + c * np.sqrt((g + 1.0) / (2.0 * g) * ratio + (g - 1.0) / (2.0 * g))
            if s >= shock:
                return rho, sgn * u, p
            return rho * (ratio + gm) / (gm * ratio + 1.0), sgn * us, ps
        c_star = c * (ps / p) ** ((g - 1.0) / (2.0 * g))
        head = u + c
        tail = us + c_star
        if s >= head:
            return rho, sgn * u, p
        if s <= tail:
            return rho * (ps / p) ** (1.0 / g), sgn * us, ps
        f = 2.0 / (g + 1.0) - (g - 1.0) / ((g + 1.0) * c) * (u - s)
        rf = rho * f ** (2.0 / (g - 1.0))
        uf = 2.0 / (g + 1.0) * (-c + 0.5 * (g - 1.0) * u + s)
        return rf, sgn * uf, p * f ** (2.0 * g / (g - 1.0))

    def _sample_one(self, s):
        if s <= self.u_star:
            return self._side(s, self.left, self.cl, -1.0)
        return self._side(s, self.right, self.cr, 1.0)

    def __call__(self, x, t, x0=0.0):
        x = np.asarray(x, dtype=float)
        if t <= 0:
            return np.where((x < x0)[..., None], np.array(self.left, float), np.array(self.right, float))
        return self.sample((x.ravel() - x0) / t).reshape(x.shape + (3,))


def exact_riemann(gamma, left, right, xi):
    return RiemannExact(gamma, left, right).sample(xi)


def godunov_flux(gamma, left, right):
    """Euler flux (mass, momentum, energy) of the exact solution at x/t = 0."""
    rho, u, p = exact_riemann(gamma, left, right, [0.0])[0]
    E = p / (gamma - 1.0) + 0.5 * rho * u * u
    return np.array([rho * u, rho * u * u + p, (E + p) * u])
