"""Small analytic game problems driving the VI solver core in tests."""

from __future__ import annotations

import math

import numpy as np

from safeweave.grid import GridField, GridSpec


def pursuit_1d(n=61, span=3.0):
    """Matched-capability 1D pursuit: dx = u_h - u_r, |u_h|,|u_r| <= 1.

    H(p) = max_r min_h p (u_h - u_r) = -|p| + |p| = 0, and the envelope
    derivative dH/dp = u_h* - u_r* vanishes at the optimizers, so the
    dissipation bound is zero. V_inf = terminal = |x| - 1 exactly.
    """
    spec = GridSpec(lo=(-span,), hi=(span,), shape=(n,))
    terminal = GridField(spec, np.abs(spec.axis(0)) - 1.0)

    def ham(costates, sl=slice(None)):
        (p,) = costates
        return np.zeros_like(p)

    return spec, terminal, ham, np.array([0.0])


def drift_1d(n=121, span=3.0):
    """Uncontrolled rightward drift dx = +1 over terminal |x| - 1.

    States left of the target sweep through it, so the converged tube value
    is V_inf(x) = max(x, 0) - 1.
    """
    spec = GridSpec(lo=(-span,), hi=(span,), shape=(n,))
    terminal = GridField(spec, np.abs(spec.axis(0)) - 1.0)

    def ham(costates, sl=slice(None)):
        (p,) = costates
        return p.copy()

    return spec, terminal, ham, np.array([1.0])


def pursuit_1d_strong_human(n=121, span=3.0):
    """Totally eroding game (human twice as fast): H(p) = -2|p| + |p| = -|p|.

    The human closes in at net rate 1 from anywhere, so the tube swallows
    the whole domain and V_inf equals the terminal minimum, -1, everywhere.
    """
    spec = GridSpec(lo=(-span,), hi=(span,), shape=(n,))
    terminal = GridField(spec, np.abs(spec.axis(0)) - 1.0)

    def ham(costates, sl=slice(None)):
        (p,) = costates
        return -np.abs(p)

    return spec, terminal, ham, np.array([1.0])


class DubinsGame:
    """Relative collision avoidance between two constant-speed cars with
    bounded turn rates (evader maximizes, pursuer minimizes)."""

    def __init__(self, n_xy=31, n_psi=30, span=5.0, v_e=1.0, v_p=1.0, w_e=1.0, w_p=1.0, radius=1.0):
        self.v_e, self.v_p, self.w_e, self.w_p = v_e, v_p, w_e, w_p
        self.radius = radius
        self.spec = GridSpec(
            lo=(-span, -span, -math.pi),
            hi=(span, span, math.pi),
            shape=(n_xy, n_xy, n_psi),
            periodic=(False, False, True),
        )
        self.X = self.spec.axis(0).reshape(-1, 1, 1)
        self.Y = self.spec.axis(1).reshape(1, -1, 1)
        psi = self.spec.axis(2).reshape(1, 1, -1)
        self.cos_p = np.cos(psi)
        self.sin_p = np.sin(psi)

    def terminal(self) -> GridField:
        vals = np.sqrt(self.X**2 + self.Y**2) - self.radius
        return GridField(self.spec, np.broadcast_to(vals, self.spec.shape).copy())

    def ham(self, costates, sl=slice(None)):
        p1, p2, p3 = costates
        x = self.X[sl] if self.X.shape[0] > 1 else self.X
        drift = p1 * (-self.v_e + self.v_p * self.cos_p) + p2 * (self.v_p * self.sin_p)
        evader = self.w_e * np.abs(p1 * self.Y - p2 * x - p3)
        pursuer = -self.w_p * np.abs(p3)
        return drift + evader + pursuer

    def alphas(self) -> np.ndarray:
        span = max(abs(self.spec.lo[0]), self.spec.hi[0])
        return np.array(
            [
                self.v_e + self.v_p + self.w_e * span,
                self.v_p + self.w_e * span,
                self.w_e + self.w_p,
            ]
        )
