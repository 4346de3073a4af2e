"""Vehicle models: robot single-track (bicycle) dynamics, human dynamically
extended unicycle, brush tire model with friction-circle derating, and the
7-state relative dynamics used by the reachability game.

Default parameters are plausible full-size testbed values, not measured ones;
override any of them via a flat YAML file (see `VehicleParams.from_file`).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .config import dataclass_from_mapping, load_flat_mapping, save_flat_mapping
from .geometry import wrap_angle

__all__ = [
    "G",
    "VehicleParams",
    "RobotState",
    "HumanState",
    "RelativeState",
    "RobotControl",
    "HumanControl",
    "tire_lateral_force",
    "tire_force_derivatives",
    "relative_state",
    "relative_dynamics",
    "robot_plant_step",
    "human_plant_step",
    "control_jacobian",
]

G = 9.81

_HALF_PI = 0.5 * math.pi
_TAN_CLIP = _HALF_PI - 1e-9


@dataclass(frozen=True)
class VehicleParams:
    """Shared physical parameters and control limits for both cars.

    The human car's steady-state limits are equated to the robot's:
    a_max = f_x_max / m, and the yaw-rate bound is the state-dependent
    lateral-friction limit omega_max(v) = mu*g / max(v, 1).
    """

    m: float = 1900.0
    i_zz: float = 3000.0
    a_cg: float = 1.2
    b_cg: float = 1.6
    c_alpha_f: float = 100e3
    c_alpha_r: float = 100e3
    mu: float = 0.9
    f_z_f: float = None
    f_z_r: float = None
    drag_c0: float = 0.0
    drag_c1: float = 0.35
    delta_max: float = 0.6
    delta_rate_max: float = 1.2
    f_x_min: float = None
    f_x_max: float = None
    drive_split_front: float = 0.6
    brake_split_front: float = 0.55

    def __post_init__(self):
        wheelbase = self.a_cg + self.b_cg
        if self.f_z_f is None:
            object.__setattr__(self, "f_z_f", self.m * G * self.b_cg / wheelbase)
        if self.f_z_r is None:
            object.__setattr__(self, "f_z_r", self.m * G * self.a_cg / wheelbase)
        if self.f_x_max is None:
            object.__setattr__(self, "f_x_max", 0.5 * self.m * G)
        if self.f_x_min is None:
            object.__setattr__(self, "f_x_min", -1.0 * self.m * G)
        for name in ("m", "i_zz", "a_cg", "b_cg", "c_alpha_f", "c_alpha_r", "mu", "f_z_f", "f_z_r"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.f_x_max <= 0.0 or self.f_x_min >= 0.0:
            raise ValueError("force bounds must straddle zero")
        balance = self.a_cg * self.f_z_f / (self.b_cg * self.f_z_r)
        if not 0.99 < balance < 1.01:
            raise ValueError("static load balance violated: a_cg*f_z_f != b_cg*f_z_r")
        for name in ("drive_split_front", "brake_split_front"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")

    @property
    def a_max(self) -> float:
        """Human longitudinal acceleration limit (symmetric)."""
        return self.f_x_max / self.m

    def omega_max(self, v) -> float:
        """Human yaw-rate limit keeping lateral acceleration within mu*g."""
        return self.mu * G / np.maximum(v, 1.0)

    def drag_force(self, u_x):
        return -(self.drag_c0 + self.drag_c1 * u_x * np.abs(u_x))

    def without_drag(self) -> "VehicleParams":
        return dataclasses.replace(self, drag_c0=0.0, drag_c1=0.0)

    def axle_force_bounds(self):
        """((f_xf_lo, f_xf_hi), (f_xr_lo, f_xr_hi)) from the fixed split."""
        front = (self.brake_split_front * self.f_x_min, self.drive_split_front * self.f_x_max)
        rear = (
            (1.0 - self.brake_split_front) * self.f_x_min,
            (1.0 - self.drive_split_front) * self.f_x_max,
        )
        return front, rear

    def split_force(self, f_x):
        """Total longitudinal force -> (front, rear) with the fixed split."""
        sf = np.where(f_x >= 0.0, self.drive_split_front, self.brake_split_front)
        return sf * f_x, (1.0 - sf) * f_x

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, mapping: dict) -> "VehicleParams":
        return dataclass_from_mapping(cls, mapping)

    @classmethod
    def from_file(cls, path) -> "VehicleParams":
        return cls.from_dict(load_flat_mapping(path))

    def to_file(self, path) -> None:
        save_flat_mapping(self.to_dict(), path)


@dataclass
class RobotState:
    """Single-track model state plus the plant-side steering position."""

    x: float
    y: float
    psi: float
    u_x: float
    u_y: float = 0.0
    r: float = 0.0
    delta_actual: float = 0.0


@dataclass
class HumanState:
    x: float
    y: float
    psi: float
    v: float


@dataclass
class RelativeState:
    """Human state expressed in a frame centered on and aligned with the robot."""

    x_rel: float
    y_rel: float
    psi_rel: float
    u_x: float
    u_y: float
    v_h: float
    r: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x_rel, self.y_rel, self.psi_rel, self.u_x, self.u_y, self.v_h, self.r])

    @classmethod
    def from_array(cls, arr) -> "RelativeState":
        return cls(*(float(v) for v in arr))


@dataclass
class RobotControl:
    delta: float
    f_xf: float
    f_xr: float

    @property
    def f_x(self) -> float:
        return self.f_xf + self.f_xr

    def as_array(self) -> np.ndarray:
        return np.array([self.delta, self.f_xf, self.f_xr])


@dataclass
class HumanControl:
    omega: float
    a: float

    def as_array(self) -> np.ndarray:
        return np.array([self.omega, self.a])


def tire_lateral_force(alpha, f_x_axle, f_z, c_alpha, mu):
    """Brush-model lateral tire force with friction-circle derating.

    Longitudinal force beyond the friction circle is clamped to it (which
    zeroes the available lateral force). Accepts scalars or arrays.
    """
    f_max = mu * f_z
    fx = np.clip(f_x_axle, -f_max, f_max)
    eta = np.sqrt(np.maximum(f_max * f_max - fx * fx, 0.0))
    t = np.tan(np.clip(alpha, -_TAN_CLIP, _TAN_CLIP))
    eta_safe = np.maximum(eta, 1e-12)
    t_sat = 3.0 * eta / c_alpha
    cubic = (
        -c_alpha * t
        + (c_alpha * c_alpha) / (3.0 * eta_safe) * np.abs(t) * t
        - (c_alpha**3) / (27.0 * eta_safe * eta_safe) * t**3
    )
    out = np.where(np.abs(t) < t_sat, cubic, -eta * np.sign(t))
    if np.ndim(out) == 0:
        return float(out)
    return out


def friction_circle_exceeded(f_x_axle, f_z, mu):
    """Flag raised when a commanded axle force violates the friction circle."""
    return np.abs(f_x_axle) > mu * f_z


def tire_force_derivatives(alpha, f_x_axle, f_z, c_alpha, mu):
    """(dF_y/dalpha, dF_y/dF_x_axle) of the brush model, zero in clamped zones."""
    f_max = mu * f_z
    clamped = np.abs(f_x_axle) > f_max
    fx = np.clip(f_x_axle, -f_max, f_max)
    eta = np.sqrt(np.maximum(f_max * f_max - fx * fx, 0.0))
    eta_safe = np.maximum(eta, 1e-9)
    t = np.tan(np.clip(alpha, -_TAN_CLIP, _TAN_CLIP))
    t_sat = 3.0 * eta / c_alpha
    saturated = np.abs(t) >= t_sat

    dphi_dt = -c_alpha + (2.0 * c_alpha**2) / (3.0 * eta_safe) * np.abs(t) - (c_alpha**3) / (
        9.0 * eta_safe**2
    ) * t * t
    d_alpha = np.where(saturated, 0.0, dphi_dt * (1.0 + t * t))

    dphi_deta = np.where(
        saturated,
        -np.sign(t),
        -(c_alpha**2) / (3.0 * eta_safe**2) * np.abs(t) * t + (2.0 * c_alpha**3) / (27.0 * eta_safe**3) * t**3,
    )
    deta_dfx = -fx / eta_safe
    d_fx = np.where(clamped | (eta <= 1e-9), 0.0, dphi_deta * deta_dfx)
    if np.ndim(d_alpha) == 0:
        return float(d_alpha), float(d_fx)
    return d_alpha, d_fx


def slip_angles(u_x, u_y, r, delta, p: VehicleParams):
    alpha_f = np.arctan2(u_y + p.a_cg * r, u_x) - delta
    alpha_r = np.arctan2(u_y - p.b_cg * r, u_x)
    return alpha_f, alpha_r


def relative_state(robot: RobotState, human: HumanState) -> RelativeState:
    """Express the human pose in the robot body frame."""
    dx = human.x - robot.x
    dy = human.y - robot.y
    c, s = math.cos(robot.psi), math.sin(robot.psi)
    return RelativeState(
        x_rel=c * dx + s * dy,
        y_rel=-s * dx + c * dy,
        psi_rel=wrap_angle(human.psi - robot.psi),
        u_x=robot.u_x,
        u_y=robot.u_y,
        v_h=human.v,
        r=robot.r,
    )


def relative_dynamics(x: RelativeState, u_r: RobotControl, u_h: HumanControl, p: VehicleParams) -> np.ndarray:
    """Time derivative of the 7 relative states.

    The longitudinal row carries the body-frame Coriolis term +r*U_y (and
    the lateral row -r*U_x), which is what differentiation of the joint
    robot/human propagation yields. Axle forces beyond the friction circle
    are clamped to it before delivery, matching the tire model.
    """
    alpha_f, alpha_r = slip_angles(x.u_x, x.u_y, x.r, u_r.delta, p)
    f_xf = float(np.clip(u_r.f_xf, -p.mu * p.f_z_f, p.mu * p.f_z_f))
    f_xr = float(np.clip(u_r.f_xr, -p.mu * p.f_z_r, p.mu * p.f_z_r))
    f_yf = tire_lateral_force(alpha_f, f_xf, p.f_z_f, p.c_alpha_f, p.mu)
    f_yr = tire_lateral_force(alpha_r, f_xr, p.f_z_r, p.c_alpha_r, p.mu)
    f_x = f_xf + f_xr
    return np.array(
        [
            x.v_h * math.cos(x.psi_rel) - x.u_x + x.y_rel * x.r,
            x.v_h * math.sin(x.psi_rel) - x.u_y - x.x_rel * x.r,
            u_h.omega - x.r,
            (f_x + p.drag_force(x.u_x)) / p.m + x.r * x.u_y,
            (f_yf + f_yr) / p.m - x.r * x.u_x,
            u_h.a,
            (p.a_cg * f_yf - p.b_cg * f_yr) / p.i_zz,
        ]
    )


def _tire_scalar(alpha: float, fx: float, f_z: float, c_alpha: float, mu: float) -> float:
    """Scalar brush-model force (plant integration hot path)."""
    f_max = mu * f_z
    eta_sq = f_max * f_max - fx * fx
    eta = math.sqrt(eta_sq) if eta_sq > 0.0 else 0.0
    t = math.tan(min(max(alpha, -_TAN_CLIP), _TAN_CLIP))
    if eta <= 0.0 or abs(t) >= 3.0 * eta / c_alpha:
        return -eta if t > 0 else (eta if t < 0 else 0.0)
    return (
        -c_alpha * t
        + (c_alpha * c_alpha) / (3.0 * eta) * abs(t) * t
        - (c_alpha**3) / (27.0 * eta * eta) * t**3
    )


def _robot_rates(y, delta: float, f_xf: float, f_xr: float, p: VehicleParams):
    x, yy, psi, u_x, u_y, r = y
    alpha_f = math.atan2(u_y + p.a_cg * r, u_x) - delta
    alpha_r = math.atan2(u_y - p.b_cg * r, u_x)
    f_xf = min(max(f_xf, -p.mu * p.f_z_f), p.mu * p.f_z_f)
    f_xr = min(max(f_xr, -p.mu * p.f_z_r), p.mu * p.f_z_r)
    f_yf = _tire_scalar(alpha_f, f_xf, p.f_z_f, p.c_alpha_f, p.mu)
    f_yr = _tire_scalar(alpha_r, f_xr, p.f_z_r, p.c_alpha_r, p.mu)
    c, s = math.cos(psi), math.sin(psi)
    drag = -(p.drag_c0 + p.drag_c1 * u_x * abs(u_x))
    return (
        u_x * c - u_y * s,
        u_x * s + u_y * c,
        r,
        (f_xf + f_xr + drag) / p.m + r * u_y,
        (f_yf + f_yr) / p.m - r * u_x,
        (p.a_cg * f_yf - p.b_cg * f_yr) / p.i_zz,
    )


def robot_plant_step(
    s: RobotState, u: RobotControl, dt: float, p: VehicleParams, slew_limited: bool = False
) -> RobotState:
    """RK4 step of the single-track model.

    With `slew_limited` the executed steering angle tracks the command at a
    rate bounded by delta_rate_max; otherwise it jumps to the command.
    Commands are clamped to the steering and per-axle force limits.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    target = min(max(u.delta, -p.delta_max), p.delta_max)
    (ff_lo, ff_hi), (fr_lo, fr_hi) = p.axle_force_bounds()
    f_xf = min(max(u.f_xf, ff_lo), ff_hi)
    f_xr = min(max(u.f_xr, fr_lo), fr_hi)

    if slew_limited:
        d0 = s.delta_actual
        gap = target - d0

        def delta_at(tau):
            step = p.delta_rate_max * tau
            return d0 + math.copysign(min(step, abs(gap)), gap) if gap != 0.0 else d0

    else:

        def delta_at(tau):
            return target

    y0 = (s.x, s.y, s.psi, s.u_x, s.u_y, s.r)
    k1 = _robot_rates(y0, delta_at(0.0), f_xf, f_xr, p)
    y_mid1 = tuple(a + 0.5 * dt * b for a, b in zip(y0, k1))
    k2 = _robot_rates(y_mid1, delta_at(0.5 * dt), f_xf, f_xr, p)
    y_mid2 = tuple(a + 0.5 * dt * b for a, b in zip(y0, k2))
    k3 = _robot_rates(y_mid2, delta_at(0.5 * dt), f_xf, f_xr, p)
    y_end = tuple(a + dt * b for a, b in zip(y0, k3))
    k4 = _robot_rates(y_end, delta_at(dt), f_xf, f_xr, p)
    y1 = tuple(
        a + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
        for a, b1, b2, b3, b4 in zip(y0, k1, k2, k3, k4)
    )
    return RobotState(
        x=y1[0],
        y=y1[1],
        psi=wrap_angle(y1[2]),
        u_x=y1[3],
        u_y=y1[4],
        r=y1[5],
        delta_actual=delta_at(dt),
    )


def human_plant_step(s: HumanState, u: HumanControl, dt: float, p: VehicleParams) -> HumanState:
    """RK4 step of the dynamically extended unicycle with clamped controls.

    Heading and speed have closed forms for piecewise-constant controls, so
    only the positions are integrated numerically; speed is floored at zero.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    om_lim = float(p.omega_max(s.v))
    omega = min(max(u.omega, -om_lim), om_lim)
    a = min(max(u.a, -p.a_max), p.a_max)

    def v_at(tau):
        return max(s.v + a * tau, 0.0)

    def psi_at(tau):
        return s.psi + omega * tau

    def rates(tau):
        v = v_at(tau)
        return v * math.cos(psi_at(tau)), v * math.sin(psi_at(tau))

    k1 = rates(0.0)
    k2 = rates(0.5 * dt)
    k4 = rates(dt)
    x1 = s.x + dt / 6.0 * (k1[0] + 4 * k2[0] + k4[0])
    y1 = s.y + dt / 6.0 * (k1[1] + 4 * k2[1] + k4[1])
    return HumanState(x=x1, y=y1, psi=wrap_angle(psi_at(dt)), v=v_at(dt))


def control_jacobian(x: RelativeState, u_r: RobotControl, u_h: HumanControl, p: VehicleParams) -> np.ndarray:
    """d(relative_dynamics)/d(delta, f_xf, f_xr), shape (7, 3).

    Force columns are exact where the model is affine in force; the steering
    column follows the brush-model slope at the current slip angle.
    """
    alpha_f, alpha_r = slip_angles(x.u_x, x.u_y, x.r, u_r.delta, p)
    dfyf_da, dfyf_dfx = tire_force_derivatives(alpha_f, u_r.f_xf, p.f_z_f, p.c_alpha_f, p.mu)
    _, dfyr_dfx = tire_force_derivatives(alpha_r, u_r.f_xr, p.f_z_r, p.c_alpha_r, p.mu)
    dfyf_dd = -dfyf_da  # alpha_f = atan2(...) - delta
    jac = np.zeros((7, 3))
    # friction-circle clamp zeroes force authority beyond the circle
    front_free = abs(u_r.f_xf) < p.mu * p.f_z_f
    rear_free = abs(u_r.f_xr) < p.mu * p.f_z_r
    jac[3, 1] = front_free / p.m
    jac[3, 2] = rear_free / p.m
    jac[4, 0] = dfyf_dd / p.m
    jac[4, 1] = dfyf_dfx / p.m
    jac[4, 2] = dfyr_dfx / p.m
    jac[6, 0] = p.a_cg * dfyf_dd / p.i_zz
    jac[6, 1] = p.a_cg * dfyf_dfx / p.i_zz
    jac[6, 2] = -p.b_cg * dfyr_dfx / p.i_zz
    return jac
