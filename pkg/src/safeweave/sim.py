"""Closed-loop traffic-weaving harness.

Two cars start in adjacent lanes and swap within a bounded track. The robot
tracks quintic lane-swap nominals (replanned at a few Hz from its current
state) under one of three controller modes; the human follows a scripted
policy (its own lane swap, a careless blind swerve, the game-optimal
worst case) or an external command stream. Plant integration runs at 1 kHz,
control at 100 Hz, and every trial is bit-reproducible from (seed, config).
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, dataclass_from_mapping, load_flat_mapping, save_flat_mapping
from .geometry import OrientedBox, obb_signed_distance, wrap_angle
from .mpc import MPCConfig, TrackingController
from .safety import SafetyConfig, value_and_grad, worst_case_human
from .trajectory import NominalTrajectory, lane_swap
from .vehicle import (
    G,
    HumanControl,
    HumanState,
    RobotState,
    VehicleParams,
    human_plant_step,
    relative_state,
    robot_plant_step,
)

__all__ = [
    "ScenarioConfig",
    "TrialLog",
    "Metrics",
    "TrialRunner",
    "run_trial",
    "compare_controllers",
    "compute_metrics",
    "make_policy",
]

_ADVERSARIES = ("nominal-swap", "careless-swerve", "worst-case", "external")
_STATUS_CODES = {"solved": 0, "max-iter": 1, "infeasible-detected": 2, "skipped": 3}
_MODE_CODES = {"tracking": 0, "filtered": 1, "switching": 2, "avoidance": 3, "avoidance-fallback": 4, "hold": 5}


@dataclass(frozen=True)
class ScenarioConfig:
    """Traffic-weaving scenario. All distances in meters, speeds in m/s."""

    lane_width: float = 3.7
    track_length: float = 135.0
    initial_gap: float = 10.0  # human starts this far ahead of the robot
    robot_speed: float = 8.0
    human_speed: float = 8.0
    replan_hz: float = 4.0
    control_hz: float = 100.0
    plant_dt: float = 0.001
    seed: int = 0
    obs_noise_pos: float = 0.0
    obs_noise_vel: float = 0.0
    slew_limited: bool = False
    plant_drag: bool = True
    mode: str = "filtered"
    adversary: str = "nominal-swap"
    eps: float = 0.05
    duration: float = 20.0
    swap_start: float = 0.5
    swap_duration: float = 4.0
    human_swap_start: float = 0.5
    human_swap_duration: float = 4.0
    robot_box_length: float = 4.8
    robot_box_width: float = 1.8
    human_box_length: float = 4.8
    human_box_width: float = 1.8
    trigger_gap: float = 15.0
    swerve_rate: float = 0.5

    def __post_init__(self):
        plant_hz = 1.0 / self.plant_dt
        if abs(plant_hz / self.control_hz - round(plant_hz / self.control_hz)) > 1e-9:
            raise ConfigError("control rate must divide the plant rate")
        for v in (self.robot_speed, self.human_speed):
            if not 1.0 <= v <= 12.0:
                raise ConfigError("initial speeds must lie in the solved domain [1, 12]")
        if self.adversary not in _ADVERSARIES:
            raise ConfigError(f"adversary must be one of {_ADVERSARIES}")
        if self.mode not in ("tracking", "filtered", "switching"):
            raise ConfigError("mode must be tracking, filtered, or switching")

    @property
    def substeps(self) -> int:
        return int(round(1.0 / (self.plant_dt * self.control_hz)))

    @property
    def replan_every(self) -> int:
        return max(int(round(self.control_hz / self.replan_hz)), 1)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        return dataclass_from_mapping(cls, load_flat_mapping(path))

    def to_file(self, path) -> None:
        save_flat_mapping(dataclasses.asdict(self), path)


# ---------------------------------------------------------------------------
# Trial log

_COLUMNS = [
    "tick", "t",
    "robot_x", "robot_y", "robot_psi", "robot_ux", "robot_uy", "robot_r", "robot_delta_actual",
    "human_x", "human_y", "human_psi", "human_v",
    "x_rel", "y_rel", "psi_rel", "ux_rel", "uy_rel", "vh_rel", "r_rel",
    "value", "active", "extrapolated",
    "cmd_delta", "cmd_fxf", "cmd_fxr",
    "human_omega", "human_a",
    "sigma_hji", "qp_status", "qp_iterations", "mode_applied",
    "lateral_error", "nominal_id", "separation",
]


@dataclass
class TrialLog:
    """Columnar per-control-tick record; column order is `TrialLog.COLUMNS`."""

    data: dict
    end_reason: str = "timeout"

    COLUMNS = _COLUMNS

    def __len__(self):
        return len(self.data["t"])

    def column(self, name) -> np.ndarray:
        return self.data[name]

    def equals(self, other: "TrialLog") -> bool:
        if self.end_reason != other.end_reason or len(self) != len(other):
            return False
        return all(np.array_equal(self.data[c], other.data[c]) for c in _COLUMNS)

    def to_csv(self, path_or_buf) -> None:
        close = False
        if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
            fh = open(path_or_buf, "w", encoding="utf-8")
            close = True
        else:
            fh = path_or_buf
        try:
            fh.write(",".join(_COLUMNS) + "\n")
            mat = [self.data[c] for c in _COLUMNS]
            for i in range(len(self)):
                fh.write(",".join(repr(float(col[i])) for col in mat) + "\n")
        finally:
            if close:
                fh.close()

    def to_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for i in range(len(self)):
                rec = {c: float(self.data[c][i]) for c in _COLUMNS}
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def from_csv(cls, path) -> "TrialLog":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            raw = np.loadtxt(fh, delimiter=",", ndmin=2)
        if header != _COLUMNS:
            raise ConfigError("unexpected trial log columns")
        data = {c: raw[:, j].copy() for j, c in enumerate(_COLUMNS)}
        return cls(data=data)


@dataclass
class Metrics:
    min_separation: float
    min_value: float
    collision: bool
    rms_lateral_error: float
    max_lane_excursion: float
    task_completed: bool
    mean_qp_time: float
    max_qp_time: float
    end_reason: str
    ticks: int

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["collision"] = bool(out["collision"])
        out["task_completed"] = bool(out["task_completed"])
        return out


# ---------------------------------------------------------------------------
# Adversary policies


class NominalSwapPolicy:
    """Tracks the human car's own lane-swap nominal with a simple
    heading/cross-error steering law and proportional speed hold."""

    k_cross = 1.3
    k_heading = 2.5
    k_speed = 1.0

    def __init__(self, cfg: ScenarioConfig, params: VehicleParams, nominal: NominalTrajectory):
        self.cfg = cfg
        self.p = params
        self.nominal = nominal

    def lane_keep_command(self, human: HumanState, t: float) -> HumanControl:
        ref = self.nominal.sample(t)
        s_proj, e, psi_path, kappa = self.nominal.project(human.x, human.y, s_hint=ref["s"])
        heading_des = psi_path + math.atan2(-self.k_cross * e, max(human.v, 1.0))
        omega = human.v * kappa + self.k_heading * wrap_angle(heading_des - human.psi)
        a = self.k_speed * (ref["u_x"] - human.v)
        return HumanControl(omega=omega, a=a)

    def command(self, t, tick, robot, human) -> HumanControl:
        return self.lane_keep_command(human, t)


class CarelessSwervePolicy(NominalSwapPolicy):
    """Follows its own swap until the cars are longitudinally close, then
    swerves blindly toward the robot's current lateral position."""

    deadband = 0.2

    def command(self, t, tick, robot, human) -> HumanControl:
        gap = abs(human.x - robot.x)
        if t < self.cfg.human_swap_start or gap >= self.cfg.trigger_gap:
            return self.lane_keep_command(human, t)
        err = robot.y - human.y
        if abs(err) < self.deadband:
            # hold heading toward the robot without oscillating
            omega = -2.0 * wrap_angle(human.psi - math.copysign(0.05, err))
        else:
            omega = math.copysign(self.cfg.swerve_rate, err)
        return HumanControl(omega=omega, a=0.0)


class WorstCasePolicy:
    """Game-optimal adversary: the analytic minimizer of the cached value's
    directional derivative."""

    def __init__(self, cfg: ScenarioConfig, params: VehicleParams, cache):
        if cache is None:
            raise ConfigError("worst-case adversary requires a value cache")
        self.p = params
        self.cache = cache

    def command(self, t, tick, robot, human) -> HumanControl:
        rel = relative_state(robot, human)
        _, grad, _ = value_and_grad(self.cache, rel)
        return worst_case_human(rel, grad, self.p)


class ExternalPolicy:
    """Replays a per-tick (omega, a) command sequence; holds zero beyond."""

    def __init__(self, stream):
        self.stream = np.asarray(stream, dtype=float).reshape(-1, 2)

    def command(self, t, tick, robot, human) -> HumanControl:
        if tick < len(self.stream):
            om, a = self.stream[tick]
            return HumanControl(omega=float(om), a=float(a))
        return HumanControl(omega=0.0, a=0.0)


def make_policy(cfg: ScenarioConfig, params: VehicleParams, human_nominal, cache=None, stream=None):
    if cfg.adversary == "nominal-swap":
        return NominalSwapPolicy(cfg, params, human_nominal)
    if cfg.adversary == "careless-swerve":
        return CarelessSwervePolicy(cfg, params, human_nominal)
    if cfg.adversary == "worst-case":
        return WorstCasePolicy(cfg, params, cache)
    if cfg.adversary == "external":
        if stream is None:
            raise ConfigError("external adversary requires a command stream")
        return ExternalPolicy(stream)
    raise ConfigError(f"unknown adversary {cfg.adversary}")


# ---------------------------------------------------------------------------
# Human state estimation (noisy-observation stand-in)


class AlphaBetaGammaEstimator:
    """Fixed-gain position/velocity/acceleration tracker per axis, plus a
    first-order speed smoother; a lightweight stand-in for a full filter."""

    def __init__(self, alpha=0.6, beta=0.35, gamma=0.06):
        self.alpha, self.beta, self.gamma = alpha, beta, gamma
        self.state = None  # (pos(2), vel(2), acc(2))

    def update(self, z: np.ndarray, dt: float):
        if self.state is None:
            self.state = (z.copy(), np.zeros(2), np.zeros(2))
            return
        pos, vel, acc = self.state
        pred = pos + vel * dt + 0.5 * acc * dt * dt
        vel_pred = vel + acc * dt
        resid = z - pred
        pos = pred + self.alpha * resid
        vel = vel_pred + self.beta / dt * resid
        acc = acc + 2.0 * self.gamma / (dt * dt) * resid
        self.state = (pos, vel, acc)

    def human_view(self, fallback: HumanState) -> HumanState:
        if self.state is None:
            return fallback
        pos, vel, _ = self.state
        speed = float(np.hypot(vel[0], vel[1]))
        psi = math.atan2(vel[1], vel[0]) if speed > 0.3 else fallback.psi
        return HumanState(x=float(pos[0]), y=float(pos[1]), psi=psi, v=speed)


# ---------------------------------------------------------------------------
# Trial runner


def _feasible_swap_duration(p: VehicleParams, dy: float, requested: float) -> float:
    """Smallest duration >= requested for which the quintic stays within a
    0.8 mu g lateral budget."""
    needed = math.sqrt(10.0 * abs(dy) / (math.sqrt(3.0) * 0.8 * p.mu * G)) if dy else requested
    return max(requested, needed, 0.5)


def _robust_swap(p, x, y, speed, target, duration, horizon, vy, t0, ident):
    """Lane swap that extends its time budget until dynamically feasible
    (replans during an evasive maneuver can start with large lateral
    velocity)."""
    d = duration
    last = None
    for _ in range(16):
        try:
            return lane_swap(
                p, x, y, speed, target_y=target, duration=d, horizon=horizon,
                start_vy=vy, t0=t0, ident=ident,
            )
        except ConfigError as exc:
            last = exc
            d *= 1.4
    raise last


class TrialRunner:
    """Deterministic co-simulation of one trial, steppable per control tick
    so the realtime bridge can drive it too."""

    def __init__(self, cfg: ScenarioConfig, cache=None, params=None, mpc_cfg=None, stream=None):
        self.cfg = cfg
        params = params or VehicleParams()
        if not cfg.plant_drag:
            params = params.without_drag()
        self.p = params
        self.cache = cache
        self.mpc_cfg = mpc_cfg or MPCConfig()
        if cfg.mode in ("filtered", "switching") or cfg.adversary == "worst-case":
            if cache is None:
                raise ConfigError(f"mode {cfg.mode!r} / adversary {cfg.adversary!r} needs a cache")
            cache.require_converged()
        self.rng = np.random.default_rng(cfg.seed)

        self.robot = RobotState(x=0.0, y=0.0, psi=0.0, u_x=cfg.robot_speed)
        self.human = HumanState(x=cfg.initial_gap, y=cfg.lane_width, psi=0.0, v=cfg.human_speed)
        self.robot_box = (cfg.robot_box_length, cfg.robot_box_width)
        self.human_box = (cfg.human_box_length, cfg.human_box_width)

        # the human's scripted swap is stretched over lead-in plus maneuver
        # time, completing around human_swap_start + human_swap_duration
        human_total = cfg.human_swap_start + _feasible_swap_duration(
            params, cfg.lane_width, cfg.human_swap_duration
        )
        self.human_nominal = lane_swap(
            params,
            self.human.x,
            self.human.y,
            cfg.human_speed,
            target_y=0.0,
            duration=human_total,
            horizon=cfg.duration + 2.0,
            t0=0.0,
        )

        self.policy = make_policy(cfg, params, self.human_nominal, cache=cache, stream=stream)
        self.controller = TrackingController(
            params, self.mpc_cfg, mode=cfg.mode, cache=cache,
            safety_cfg=SafetyConfig(eps=cfg.eps),
        )
        self.estimator = AlphaBetaGammaEstimator() if (cfg.obs_noise_pos > 0 or cfg.obs_noise_vel > 0) else None

        self.nominal = None
        self.nominal_id = -1
        self.tick_index = 0
        self.done = False
        self.end_reason = "timeout"
        self.qp_times = []
        self.rows = {c: [] for c in _COLUMNS}
        self._replan(0.0)

    # -- replanning --------------------------------------------------------

    def _replan(self, t: float):
        cfg, p = self.cfg, self.p
        target = cfg.lane_width
        swap_end = cfg.swap_start + cfg.swap_duration
        if t < cfg.swap_start:
            # straight lead-in, then the swap begins on schedule
            remaining = cfg.swap_duration
            start_delay = cfg.swap_start - t
        else:
            remaining = max(swap_end - t, 0.0)
            start_delay = 0.0
        dy = target - self.robot.y
        speed = max(math.hypot(self.robot.u_x, self.robot.u_y), 1.0)
        vy = self.robot.u_x * math.sin(self.robot.psi) + self.robot.u_y * math.cos(self.robot.psi)
        horizon = cfg.duration - t + 4.0
        self.nominal_id += 1
        if abs(dy) < 0.02 and abs(vy) < 0.05:
            self.nominal = lane_swap(
                p, self.robot.x, self.robot.y, speed, target_y=target,
                duration=max(remaining, 1.0), horizon=horizon, t0=t, ident=self.nominal_id,
            )
            return
        if start_delay > 0.05:
            duration = start_delay + _feasible_swap_duration(p, dy, remaining)
        else:
            duration = _feasible_swap_duration(p, dy, max(remaining, 1.2))
        self.nominal = _robust_swap(
            p, self.robot.x, self.robot.y, speed, target, duration, horizon, vy, t,
            self.nominal_id,
        )

    # -- per-tick state ----------------------------------------------------

    def _human_view(self, dt: float) -> HumanState:
        if self.estimator is None:
            return self.human
        cfg = self.cfg
        z = np.array(
            [
                self.human.x + self.rng.normal() * cfg.obs_noise_pos,
                self.human.y + self.rng.normal() * cfg.obs_noise_pos,
            ]
        )
        self.estimator.update(z, dt)
        view = self.estimator.human_view(self.human)
        if cfg.obs_noise_vel > 0:
            v = view.v + self.rng.normal() * cfg.obs_noise_vel
            view = HumanState(x=view.x, y=view.y, psi=view.psi, v=max(v, 0.0))
        return view

    def separation(self) -> float:
        a = OrientedBox(self.robot.x, self.robot.y, self.robot.psi, *self.robot_box)
        b = OrientedBox(self.human.x, self.human.y, self.human.psi, *self.human_box)
        return obb_signed_distance(a, b)

    def tick(self, human_override: HumanControl = None):
        """Advance one control period. Returns the appended record index or
        None when the trial already ended."""
        if self.done:
            return None
        cfg = self.cfg
        k = self.tick_index
        t = k / cfg.control_hz
        if k > 0 and k % cfg.replan_every == 0:
            self._replan(t)

        dt_ctrl = 1.0 / cfg.control_hz
        human_view = self._human_view(dt_ctrl)
        if human_override is not None:
            u_h = human_override
        else:
            u_h = self.policy.command(t, k, self.robot, self.human)
        # clamp to model limits
        u_h = HumanControl(
            omega=float(np.clip(u_h.omega, -self.p.omega_max(self.human.v), self.p.omega_max(self.human.v))),
            a=float(np.clip(u_h.a, -self.p.a_max, self.p.a_max)),
        )

        u_r, info = self.controller.step(self.robot, human_view, self.nominal, t)
        self.qp_times.append(info.solve_time)

        rel = relative_state(self.robot, self.human)
        if self.cache is not None:
            v_true, _, extra = value_and_grad(self.cache, rel)
        else:
            v_true, extra = math.nan, False
        sep = self.separation()
        from .mpc import error_state as _err

        e_lat = _err(self.robot, self.nominal, t).e

        row = {
            "tick": float(k),
            "t": t,
            "robot_x": self.robot.x, "robot_y": self.robot.y, "robot_psi": self.robot.psi,
            "robot_ux": self.robot.u_x, "robot_uy": self.robot.u_y, "robot_r": self.robot.r,
            "robot_delta_actual": self.robot.delta_actual,
            "human_x": self.human.x, "human_y": self.human.y, "human_psi": self.human.psi,
            "human_v": self.human.v,
            "x_rel": rel.x_rel, "y_rel": rel.y_rel, "psi_rel": rel.psi_rel,
            "ux_rel": rel.u_x, "uy_rel": rel.u_y, "vh_rel": rel.v_h, "r_rel": rel.r,
            "value": v_true, "active": float(info.active), "extrapolated": float(extra),
            "cmd_delta": u_r.delta, "cmd_fxf": u_r.f_xf, "cmd_fxr": u_r.f_xr,
            "human_omega": u_h.omega, "human_a": u_h.a,
            "sigma_hji": info.sigma_hji,
            "qp_status": float(_STATUS_CODES.get(info.qp_status, 9)),
            "qp_iterations": float(info.qp_iterations),
            "mode_applied": float(_MODE_CODES.get(info.mode_applied, 9)),
            "lateral_error": e_lat,
            "nominal_id": float(self.nominal.ident),
            "separation": sep,
        }
        for c in _COLUMNS:
            self.rows[c].append(row[c])

        # plant substeps under zero-order hold
        for _ in range(cfg.substeps):
            self.robot = robot_plant_step(self.robot, u_r, cfg.plant_dt, self.p, cfg.slew_limited)
            self.human = human_plant_step(self.human, u_h, cfg.plant_dt, self.p)

        self.tick_index += 1
        if self.separation() < 0.0:
            self.done, self.end_reason = True, "collision"
        elif self.robot.x >= cfg.track_length:
            self.done, self.end_reason = True, "track-end"
        elif self.tick_index >= int(cfg.duration * cfg.control_hz):
            self.done, self.end_reason = True, "timeout"
        elif info.fault_count >= 3 and self.cache is None:
            self.done, self.end_reason = True, "fault-cascade"
        return k

    def _closing_row(self):
        """Snapshot of the terminal state, so e.g. a collision's negative
        separation is present in the log."""
        rel = relative_state(self.robot, self.human)
        if self.cache is not None:
            v_true, _, extra = value_and_grad(self.cache, rel)
        else:
            v_true, extra = math.nan, False
        from .mpc import error_state as _err

        last = {c: (self.rows[c][-1] if self.rows[c] else 0.0) for c in _COLUMNS}
        k = self.tick_index
        row = dict(last)
        row.update(
            tick=float(k), t=k / self.cfg.control_hz,
            robot_x=self.robot.x, robot_y=self.robot.y, robot_psi=self.robot.psi,
            robot_ux=self.robot.u_x, robot_uy=self.robot.u_y, robot_r=self.robot.r,
            robot_delta_actual=self.robot.delta_actual,
            human_x=self.human.x, human_y=self.human.y, human_psi=self.human.psi,
            human_v=self.human.v,
            x_rel=rel.x_rel, y_rel=rel.y_rel, psi_rel=rel.psi_rel,
            ux_rel=rel.u_x, uy_rel=rel.u_y, vh_rel=rel.v_h, r_rel=rel.r,
            value=v_true, extrapolated=float(extra),
            lateral_error=_err(self.robot, self.nominal, k / self.cfg.control_hz).e,
            separation=self.separation(),
        )
        for c in _COLUMNS:
            self.rows[c].append(row[c])

    def finish(self) -> TrialLog:
        if self.done and self.rows["t"] and self.rows["tick"][-1] < self.tick_index:
            self._closing_row()
        return TrialLog(
            data={c: np.array(self.rows[c]) for c in _COLUMNS}, end_reason=self.end_reason
        )

    def run(self):
        while not self.done:
            self.tick()
        log = self.finish()
        return log, compute_metrics(log, self.cfg, qp_times=self.qp_times)


def run_trial(cfg: ScenarioConfig, cache=None, params=None, mpc_cfg=None, stream=None):
    """Simulate one full trial; returns (TrialLog, Metrics)."""
    return TrialRunner(cfg, cache=cache, params=params, mpc_cfg=mpc_cfg, stream=stream).run()


def compute_metrics(log: TrialLog, cfg: ScenarioConfig, qp_times=None) -> Metrics:
    if len(log) == 0:
        raise ValueError("empty trial log")
    sep = np.empty(len(log))
    for i in range(len(log)):
        a = OrientedBox(
            log.data["robot_x"][i], log.data["robot_y"][i], log.data["robot_psi"][i],
            cfg.robot_box_length, cfg.robot_box_width,
        )
        b = OrientedBox(
            log.data["human_x"][i], log.data["human_y"][i], log.data["human_psi"][i],
            cfg.human_box_length, cfg.human_box_width,
        )
        sep[i] = obb_signed_distance(a, b)
    lane_lo = -0.5 * cfg.lane_width
    lane_hi = 1.5 * cfg.lane_width
    ry = log.data["robot_y"]
    excursion = np.maximum(np.maximum(lane_lo - ry, ry - lane_hi), 0.0)
    target = cfg.lane_width
    completed = log.end_reason == "track-end" and abs(ry[-1] - target) < 0.6
    vals = log.data["value"]
    qp_times = np.asarray(qp_times if qp_times is not None else [0.0])
    return Metrics(
        min_separation=float(sep.min()),
        min_value=float(np.nanmin(vals)) if not np.all(np.isnan(vals)) else math.nan,
        collision=bool(sep.min() < 0.0 or log.end_reason == "collision"),
        rms_lateral_error=float(np.sqrt(np.mean(log.data["lateral_error"] ** 2))),
        max_lane_excursion=float(excursion.max()),
        task_completed=bool(completed),
        mean_qp_time=float(qp_times.mean()),
        max_qp_time=float(qp_times.max()),
        end_reason=log.end_reason,
        ticks=len(log),
    )


def compare_controllers(cfg: ScenarioConfig, modes, cache=None, params=None, mpc_cfg=None):
    """Run one trial per controller mode against an identical human stream.

    The first mode is simulated against the configured adversary; its
    applied human commands are replayed (not re-simulated) for the others,
    so the human motion is identical across modes. Returns
    {mode: (log, metrics)} in input order.
    """
    modes = list(modes)
    if not modes:
        raise ConfigError("need at least one mode")
    results = {}
    ref_cfg = dataclasses.replace(cfg, mode=modes[0])
    ref_log, ref_metrics = run_trial(ref_cfg, cache=cache, params=params, mpc_cfg=mpc_cfg)
    results[modes[0]] = (ref_log, ref_metrics)
    stream = np.column_stack([ref_log.data["human_omega"], ref_log.data["human_a"]])
    for mode in modes[1:]:
        mode_cfg = dataclasses.replace(cfg, mode=mode, adversary="external")
        log, metrics = run_trial(mode_cfg, cache=cache, params=params, mpc_cfg=mpc_cfg, stream=stream)
        n = min(len(log), len(ref_log))
        for col in ("human_x", "human_y", "human_psi", "human_v"):
            if not np.array_equal(log.data[col][:n], ref_log.data[col][:n]):
                raise RuntimeError("replay fidelity violated: human motion diverged")
        results[mode] = (log, metrics)
    return results
