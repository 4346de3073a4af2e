"""Nominal trajectories for the tracker: time-parameterized kinematic paths
with tire-consistent feedforward, quintic lane-swap generation (the scripted
stand-in for a higher-level planner), closest-point projection, and the
time/speed/acceleration rescaling used to move between speed regimes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError
from .geometry import wrap_angle
from .vehicle import G, VehicleParams

__all__ = ["NominalTrajectory", "lane_swap", "scale_trajectory"]


@dataclass
class NominalTrajectory:
    """Sampled trajectory; headings are stored unwrapped for interpolation."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    psi: np.ndarray
    s: np.ndarray
    u_x: np.ndarray
    u_y: np.ndarray
    r: np.ndarray
    kappa: np.ndarray
    delta_ff: np.ndarray
    f_x_ff: np.ndarray
    ident: int = 0

    def __post_init__(self):
        if not np.all(np.diff(self.t) > 0):
            raise ValueError("time must be strictly increasing")

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def sample(self, t):
        """Interpolate all channels at a time (clamped to the span)."""
        tq = np.clip(t, self.t[0], self.t[-1])
        out = {}
        for name in ("x", "y", "psi", "s", "u_x", "u_y", "r", "kappa", "delta_ff", "f_x_ff"):
            out[name] = float(np.interp(tq, self.t, getattr(self, name)))
        return out

    def sample_many(self, times):
        """Vectorized interpolation of all channels at an array of times."""
        tq = np.clip(np.asarray(times, dtype=float), self.t[0], self.t[-1])
        return {
            name: np.interp(tq, self.t, getattr(self, name))
            for name in ("x", "y", "psi", "s", "u_x", "u_y", "r", "kappa", "delta_ff", "f_x_ff")
        }

    def project(self, px, py, s_hint=None, window=25.0):
        """Closest-point projection of a position onto the path polyline.

        Returns (s_proj, e, psi_path, kappa). e is the signed lateral offset,
        positive to the left of the path.
        """
        if s_hint is None:
            lo, hi = 0, len(self.t) - 1
        else:
            lo = int(np.searchsorted(self.s, s_hint - window))
            hi = int(np.searchsorted(self.s, s_hint + window))
            lo, hi = max(lo - 1, 0), min(hi + 1, len(self.t) - 1)
        xs, ys = self.x[lo : hi + 1], self.y[lo : hi + 1]
        d2 = (xs - px) ** 2 + (ys - py) ** 2
        i = lo + int(np.argmin(d2))

        best = None
        for j in (i - 1, i):
            if j < 0 or j + 1 >= len(self.t):
                continue
            ax, ay = self.x[j], self.y[j]
            bx, by = self.x[j + 1], self.y[j + 1]
            vx, vy = bx - ax, by - ay
            seg2 = vx * vx + vy * vy
            if seg2 == 0.0:
                continue
            tau = np.clip(((px - ax) * vx + (py - ay) * vy) / seg2, 0.0, 1.0)
            qx, qy = ax + tau * vx, ay + tau * vy
            dist2 = (px - qx) ** 2 + (py - qy) ** 2
            if best is None or dist2 < best[0]:
                s_proj = self.s[j] + tau * (self.s[j + 1] - self.s[j])
                psi_path = self.psi[j] + tau * (self.psi[j + 1] - self.psi[j])
                kappa = self.kappa[j] + tau * (self.kappa[j + 1] - self.kappa[j])
                cross = vx * (py - qy) - vy * (px - qx)
                e = math.copysign(math.sqrt(dist2), cross) if dist2 > 0 else 0.0
                best = (dist2, float(s_proj), float(e), float(psi_path), float(kappa))
        _, s_proj, e, psi_path, kappa = best
        return s_proj, e, psi_path, kappa


def _quintic_coeffs(t_end, y0, v0, a0, y1, v1=0.0, a1=0.0):
    """Quintic matching position/velocity/acceleration at both ends."""
    rows = []
    for t in (0.0, t_end):
        rows.append([t**k for k in range(6)])
        rows.append([k * t ** (k - 1) if k >= 1 else 0.0 for k in range(6)])
        rows.append([k * (k - 1) * t ** (k - 2) if k >= 2 else 0.0 for k in range(6)])
    return np.linalg.solve(np.array(rows), np.array([y0, v0, a0, y1, v1, a1]))


def _polyval(c, t):
    return sum(c[k] * t**k for k in range(6))


def _polyder(c, t, order=1):
    if order == 1:
        return sum(k * c[k] * t ** (k - 1) for k in range(1, 6))
    return sum(k * (k - 1) * c[k] * t ** (k - 2) for k in range(2, 6))


def _feedforward(speed, kappa, p: VehicleParams):
    """Steady-state cornering feedforward from the linear tire model."""
    wheelbase = p.a_cg + p.b_cg
    a_y = speed * speed * kappa
    f_yf = p.m * a_y * p.b_cg / wheelbase
    f_yr = p.m * a_y * p.a_cg / wheelbase
    alpha_f = -f_yf / p.c_alpha_f
    alpha_r = -f_yr / p.c_alpha_r
    r = kappa * speed
    u_y = speed * alpha_r + p.b_cg * r
    delta = (u_y + p.a_cg * r) / np.maximum(speed, 0.5) - alpha_f
    return u_y, r, delta


def lane_swap(
    p: VehicleParams,
    start_x: float,
    start_y: float,
    speed: float,
    target_y: float,
    duration: float,
    horizon: float,
    start_vy: float = 0.0,
    t0: float = 0.0,
    dt: float = 0.02,
    ident: int = 0,
) -> NominalTrajectory:
    """Quintic lateral lane change at constant longitudinal speed.

    Lateral velocity and acceleration vanish at both ends (the start may
    carry a nonzero lateral velocity when replanning mid-maneuver); after
    `duration` the trajectory holds the target lane. Raises ConfigError if
    the peak lateral acceleration exceeds the friction budget.
    """
    if duration <= 0:
        raise ConfigError("lane swap duration must be positive")
    coeffs = _quintic_coeffs(duration, start_y, start_vy, 0.0, target_y)
    n = max(int(round(horizon / dt)) + 1, 2)
    ts = t0 + dt * np.arange(n)
    tau = np.clip(ts - t0, 0.0, duration)
    y = np.where(ts - t0 < duration, _polyval(coeffs, tau), target_y)
    vy = np.where(ts - t0 < duration, _polyder(coeffs, tau, 1), 0.0)
    ay = np.where(ts - t0 < duration, _polyder(coeffs, tau, 2), 0.0)
    if np.max(np.abs(ay)) > p.mu * G:
        raise ConfigError(
            f"lane swap needs {np.max(np.abs(ay)):.2f} m/s^2 lateral, "
            f"budget is {p.mu * G:.2f}"
        )

    vx = np.full(n, speed)
    x = start_x + speed * (ts - t0)
    psi = np.arctan2(vy, vx)
    path_speed = np.hypot(vx, vy)
    kappa = (vx * ay) / np.maximum(path_speed, 0.5) ** 3
    s = np.concatenate([[0.0], np.cumsum(0.5 * (path_speed[1:] + path_speed[:-1]) * np.diff(ts))])
    u_y, r, delta_ff = _feedforward(path_speed, kappa, p)
    u_x = np.sqrt(np.maximum(path_speed**2 - u_y**2, 0.25))
    f_x_ff = -p.drag_force(u_x)
    return NominalTrajectory(
        t=ts, x=x, y=y, psi=psi, s=s, u_x=u_x, u_y=u_y, r=r,
        kappa=kappa, delta_ff=delta_ff, f_x_ff=f_x_ff, ident=ident,
    )


def scale_trajectory(traj: NominalTrajectory, time_factor: float, p: VehicleParams) -> NominalTrajectory:
    """Reparameterize time by `time_factor`, leaving the path geometry fixed.

    Speeds scale by 1/time_factor and accelerations by 1/time_factor^2;
    dynamic feedforwards are recomputed for the new speeds.
    """
    lam = float(time_factor)
    speed = np.hypot(traj.u_x, traj.u_y) / lam
    u_y, r, delta_ff = _feedforward(speed, traj.kappa, p)
    u_x = np.sqrt(np.maximum(speed**2 - u_y**2, 0.25))
    return NominalTrajectory(
        t=traj.t * lam,
        x=traj.x.copy(),
        y=traj.y.copy(),
        psi=traj.psi.copy(),
        s=traj.s.copy(),
        u_x=u_x,
        u_y=u_y,
        r=r,
        kappa=traj.kappa.copy(),
        delta_ff=delta_ff,
        f_x_ff=-p.drag_force(u_x),
        ident=traj.ident,
    )
