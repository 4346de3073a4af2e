"""Offline backward-reachable-tube solver.

Integrates the variational inequality  D_tau V = min{0, H}  (freeze form, so
node values never increase) with a global Lax-Friedrichs numerical
Hamiltonian over one-sided upwind gradients and explicit Euler steps at a
CFL-limited time step, until the residual max|dV|/dt falls below tolerance.

The two-player Hamiltonian for the 7-state relative dynamics is evaluated
analytically for the human (bang-bang in yaw rate and acceleration) and by
steering/force sampling with friction-circle-aware force refinement for the
robot. Costate-independent node quantities live in small broadcastable
tables, and the per-step hot path uses only arithmetic on them, which keeps
results bit-identical across worker counts.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cache import ValueCache, fingerprint
from .geometry import OrientedBox, obb_signed_distance
from .grid import GridField, GridSpec, gradient
from .vehicle import VehicleParams

__all__ = [
    "TerminalValueSpec",
    "SolverConfig",
    "terminal_value",
    "RelativeGame",
    "hamiltonian",
    "lf_numerical_hamiltonian",
    "solve_vi",
    "solve_brs",
    "default_grid",
    "desk_grid",
    "paper_grid",
]

_BEYOND = 0.5 * math.pi - 1e-9


def paper_grid() -> GridSpec:
    """Published 7D discretization: 13 x 13 x 9^5 (about 16 h to solve)."""
    return GridSpec(
        lo=(-15.0, -5.0, -math.pi / 2, 1.0, -2.0, 1.0, -1.0),
        hi=(15.0, 5.0, math.pi / 2, 12.0, 2.0, 12.0, 1.0),
        shape=(13, 13, 9, 9, 9, 9, 9),
    )


def desk_grid() -> GridSpec:
    """Default desk-scale 7D discretization over the same bounds."""
    return GridSpec(
        lo=(-15.0, -5.0, -math.pi / 2, 1.0, -2.0, 1.0, -1.0),
        hi=(15.0, 5.0, math.pi / 2, 12.0, 2.0, 12.0, 1.0),
        shape=(9, 9, 7, 5, 5, 5, 5),
    )


def test_grid_tiny() -> GridSpec:
    """Very coarse 7D grid for fast tests."""
    return GridSpec(
        lo=(-15.0, -5.0, -math.pi / 2, 1.0, -2.0, 1.0, -1.0),
        hi=(15.0, 5.0, math.pi / 2, 12.0, 2.0, 12.0, 1.0),
        shape=(7, 7, 5, 3, 3, 3, 3),
    )


default_grid = desk_grid


@dataclass(frozen=True)
class TerminalValueSpec:
    """Boundary condition of the game: bounding-box separation, optionally
    replaced inside collision by a negative severity proportional to the
    squared relative speed."""

    mode: str = "geometric"
    robot_length: float = 4.8
    robot_width: float = 1.8
    human_length: float = 4.8
    human_width: float = 1.8
    severity_weight: float = 0.05  # value units per (m/s)^2

    def __post_init__(self):
        if self.mode not in ("geometric", "severity"):
            raise ValueError("mode must be geometric or severity")
        for name in ("robot_length", "robot_width", "human_length", "human_width"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "robot_length": self.robot_length,
            "robot_width": self.robot_width,
            "human_length": self.human_length,
            "human_width": self.human_width,
            "severity_weight": self.severity_weight,
        }


@dataclass(frozen=True)
class SolverConfig:
    grid: GridSpec = field(default_factory=desk_grid)
    cfl: float = 0.8
    tol: float = 1e-3  # residual max|dV|/dt, value units per second
    max_time: float = 30.0  # pseudo-time horizon cap
    max_dt: float = 0.1
    n_delta: int = 9
    n_force: int = 7
    use_drag: bool = False  # keep the game symmetric by default
    workers: int = 1
    snapshot_every: int = 0
    dissipation: str = "global"

    def __post_init__(self):
        if self.tol <= 0 or not (0.0 < self.cfl <= 1.0):
            raise ValueError("need tol > 0 and cfl in (0, 1]")
        if self.n_delta < 3 or self.n_force < 3:
            raise ValueError("need at least 3 control samples per axis")
        if self.dissipation != "global":
            raise ValueError("only global Lax-Friedrichs dissipation is implemented")


def terminal_value(tspec: TerminalValueSpec, grid: GridSpec) -> GridField:
    """Sample the terminal value over the grid.

    Geometric mode depends only on the three pose dimensions; the field is
    broadcast over the velocity coordinates. Severity mode additionally caps
    in-collision values by minus the weighted squared relative speed.
    """
    if grid.ndim != 7:
        raise ValueError("terminal value is defined on the 7D relative grid")
    robot = OrientedBox(0.0, 0.0, 0.0, tspec.robot_length, tspec.robot_width)
    xs, ys, psis = grid.axis(0), grid.axis(1), grid.axis(2)
    pose_vals = np.empty((len(xs), len(ys), len(psis)))
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            for k, psi in enumerate(psis):
                human = OrientedBox(x, y, psi, tspec.human_length, tspec.human_width)
                pose_vals[i, j, k] = obb_signed_distance(robot, human)
    full = np.broadcast_to(pose_vals[:, :, :, None, None, None, None], grid.shape).copy()
    if tspec.mode == "severity":
        ux = grid.axis(3).reshape(1, 1, 1, -1, 1, 1, 1)
        uy = grid.axis(4).reshape(1, 1, 1, 1, -1, 1, 1)
        vh = grid.axis(5).reshape(1, 1, 1, 1, 1, -1, 1)
        cos_p = np.cos(psis).reshape(1, 1, -1, 1, 1, 1, 1)
        sin_p = np.sin(psis).reshape(1, 1, -1, 1, 1, 1, 1)
        rel_speed_sq = (vh * cos_p - ux) ** 2 + (vh * sin_p - uy) ** 2
        severity = -tspec.severity_weight * rel_speed_sq
        inside = full < 0.0
        full = np.where(inside, np.minimum(full, np.broadcast_to(severity, grid.shape)), full)
    return GridField(grid, full)


# ---------------------------------------------------------------------------
# Relative-dynamics game Hamiltonian


def _sl(arr, sl):
    """Slice a broadcast table along axis 0 unless it is size-1 there."""
    if arr.ndim == 0 or arr.shape[0] == 1:
        return arr
    return arr[sl]


def _phi(t, beyond_sign, eta, c_alpha):
    """Brush-model lateral force from tan(slip); slips beyond +-pi/2 pin to
    the (derated) plateau with the slip's sign."""
    eta_safe = np.maximum(eta, 1e-12)
    cubic = (
        -c_alpha * t
        + (c_alpha * c_alpha) / (3.0 * eta_safe) * np.abs(t) * t
        - (c_alpha**3) / (27.0 * eta_safe * eta_safe) * t**3
    )
    val = np.where(np.abs(t) < 3.0 * eta / c_alpha, cubic, -eta * np.sign(t))
    return np.where(beyond_sign != 0.0, -eta * beyond_sign, val)


def _axle_max(c, k, t0, alpha0, bounds, f_max, c_alpha, deltas, n_force, want_arg=False):
    """max over steering samples and axle force of c*F + k*F_y(slip, F).

    `deltas` is an iterable of steering samples (None means "no steering
    input on this axle", i.e. the rear). Force candidates: zero, a uniform
    table over the friction-circle-clamped box, the analytic circle optimum,
    and one 3-point quadratic refinement around the winning table node.
    Candidates are scanned smallest-magnitude-first with strict-improvement
    updates, so exact ties break toward zero effort.
    """
    f_lo, f_hi = bounds
    table = np.linspace(f_lo, f_hi, n_force)
    h_f = float(table[1] - table[0])
    scan_order = np.argsort(np.abs(table), kind="stable")

    best_val = None
    best_arg = None

    for delta in deltas:
        if delta is None or delta == 0.0:
            beyond = np.where(np.abs(alpha0) >= _BEYOND, np.sign(alpha0), 0.0)
            t = t0
            d_used = 0.0
        else:
            td = math.tan(delta)
            alpha = alpha0 - delta
            beyond = np.where(np.abs(alpha) >= _BEYOND, np.sign(alpha), 0.0)
            denom = 1.0 + t0 * td
            safe = np.where(np.abs(denom) < 1e-12, 1e-12, denom)
            t = np.where(beyond != 0.0, 0.0, (t0 - td) / safe)
            d_used = delta

        # zero-force candidate first: smallest-magnitude tie-break
        local_val = k * _phi(t, beyond, f_max, c_alpha) + np.zeros_like(c)
        local_F = np.zeros_like(local_val)
        tbl_val = None
        tbl_idx = None
        for j in scan_order:
            F = float(table[j])
            eta = math.sqrt(max(f_max * f_max - F * F, 0.0))
            v = c * F + k * _phi(t, beyond, eta, c_alpha)
            if tbl_val is None:
                tbl_val = v + np.zeros_like(local_val)
                tbl_idx = np.zeros(local_val.shape, dtype=np.intp) + j
            else:
                better = v > tbl_val
                tbl_val = np.where(better, v, tbl_val)
                tbl_idx = np.where(better, j, tbl_idx)
        better = tbl_val > local_val
        local_val = np.where(better, tbl_val, local_val)
        local_F = np.where(better, table[tbl_idx], local_F)

        # analytic friction-circle optimum (plateau branch) as a candidate
        fc = np.clip(f_max * c / np.sqrt(c * c + k * k + 1e-300), f_lo, f_hi)
        eta_c = np.sqrt(np.maximum((f_max - fc) * (f_max + fc), 0.0))
        v = c * fc + k * _phi(t, beyond, eta_c, c_alpha)
        better = v > local_val
        local_val = np.where(better, v, local_val)
        local_F = np.where(better, fc, local_F)

        # one 3-point quadratic refinement around the winning table node
        interior = (tbl_idx > 0) & (tbl_idx < n_force - 1)
        fl = table[np.maximum(tbl_idx - 1, 0)]
        fr = table[np.minimum(tbl_idx + 1, n_force - 1)]
        eta_l = np.sqrt(np.maximum((f_max - fl) * (f_max + fl), 0.0))
        eta_r = np.sqrt(np.maximum((f_max - fr) * (f_max + fr), 0.0))
        v_l = c * fl + k * _phi(t, beyond, eta_l, c_alpha)
        v_r = c * fr + k * _phi(t, beyond, eta_r, c_alpha)
        curv = v_l - 2.0 * tbl_val + v_r
        ok = interior & (curv < 0.0)
        fhat = np.where(
            ok,
            np.clip(table[tbl_idx] + 0.5 * h_f * (v_l - v_r) / np.where(ok, curv, -1.0), f_lo, f_hi),
            local_F,
        )
        eta_h = np.sqrt(np.maximum((f_max - fhat) * (f_max + fhat), 0.0))
        v = c * fhat + k * _phi(t, beyond, eta_h, c_alpha)
        better = v > local_val
        local_val = np.where(better, v, local_val)
        local_F = np.where(better, fhat, local_F)

        if best_val is None:
            best_val = local_val
            if want_arg:
                best_arg = (np.full(local_val.shape, d_used), local_F)
        else:
            better = local_val > best_val
            best_val = np.where(better, local_val, best_val)
            if want_arg:
                best_arg = (
                    np.where(better, d_used, best_arg[0]),
                    np.where(better, local_F, best_arg[1]),
                )
    if want_arg:
        return best_val, best_arg
    return best_val


class RelativeGame:
    """Hamiltonian of the pursuit game over the 7D relative state.

    max over robot (steering, axle forces), min over human (yaw rate,
    acceleration) of costate . f. The human minimizer is analytic. The robot
    objective is monotone in the steering angle for these dynamics (the
    brush force is nonincreasing in slip), so the sampled steering endpoints
    attain the exact steering optimum; the solver therefore scans just the
    two endpoints, while the pointwise `hamiltonian` op uses the full sample
    set to report a tie-broken argmax.
    """

    def __init__(self, spec: GridSpec, params: VehicleParams, n_delta: int = 9, n_force: int = 7):
        self.spec = spec
        self.p = params
        self.n_delta = n_delta
        self.n_force = n_force
        self.delta_endpoints = [params.delta_max, -params.delta_max]

        def bview(d):
            a = spec.axis(d)
            shape = [1] * spec.ndim
            shape[d] = len(a)
            return a.reshape(shape)

        X, Y, PSI = bview(0), bview(1), bview(2)
        UX, UY, VH, R = bview(3), bview(4), bview(5), bview(6)
        cos_p, sin_p = np.cos(PSI), np.sin(PSI)
        p_ = params
        self.f1 = VH * cos_p - UX + Y * R
        self.f2 = VH * sin_p - UY - X * R
        self.f3 = np.broadcast_to(-R, R.shape)
        self.f4 = p_.drag_force(UX) / p_.m + R * UY
        self.f5 = -R * UX
        self.om_max = p_.omega_max(VH)
        self.t0f = (UY + p_.a_cg * R) / UX
        self.t0r = (UY - p_.b_cg * R) / UX
        self.alpha0f = np.arctan(self.t0f)
        self.alpha0r = np.arctan(self.t0r)
        (ff_lo, ff_hi), (fr_lo, fr_hi) = p_.axle_force_bounds()
        self.front_bounds = (max(ff_lo, -p_.mu * p_.f_z_f), min(ff_hi, p_.mu * p_.f_z_f))
        self.rear_bounds = (max(fr_lo, -p_.mu * p_.f_z_r), min(fr_hi, p_.mu * p_.f_z_r))

    def eval(self, costates, sl=slice(None)):
        """H at the given costates over a slab; node tables are sliced here,
        costates arrive already sliced."""
        p1, p2, p3, p4, p5, p6, p7 = costates
        p = self.p
        drift = (
            p1 * _sl(self.f1, sl)
            + p2 * _sl(self.f2, sl)
            + p3 * _sl(self.f3, sl)
            + p4 * _sl(self.f4, sl)
            + p5 * _sl(self.f5, sl)
        )
        human = -np.abs(p3) * _sl(self.om_max, sl) - np.abs(p6) * p.a_max
        c = p4 / p.m
        kf = p5 / p.m + p7 * (p.a_cg / p.i_zz)
        kr = p5 / p.m - p7 * (p.b_cg / p.i_zz)
        front = _axle_max(
            c, kf, _sl(self.t0f, sl), _sl(self.alpha0f, sl), self.front_bounds,
            p.mu * p.f_z_f, p.c_alpha_f, self.delta_endpoints, self.n_force,
        )
        rear = _axle_max(
            c, kr, _sl(self.t0r, sl), _sl(self.alpha0r, sl), self.rear_bounds,
            p.mu * p.f_z_r, p.c_alpha_r, [None], self.n_force,
        )
        return drift + human + front + rear

    def dissipation(self) -> np.ndarray:
        """Per-dimension bounds on |dH/dp| over domain and control boxes."""
        spec, p = self.spec, self.p
        lo, hi = np.array(spec.lo), np.array(spec.hi)
        absmax = np.maximum(np.abs(lo), np.abs(hi))
        v_max, ux_max, uy_max = hi[5], hi[3], absmax[4]
        x_max, y_max, r_max = absmax[0], absmax[1], absmax[6]
        f_abs = max(abs(p.f_x_min), p.f_x_max)
        drag_abs = abs(p.drag_c0) + abs(p.drag_c1) * ux_max * ux_max
        mu_f = p.mu * (p.f_z_f + p.f_z_r)
        return np.array(
            [
                v_max + ux_max + y_max * r_max,
                v_max + uy_max + x_max * r_max,
                p.omega_max(max(lo[5], 1.0)) + r_max,
                (f_abs + drag_abs) / p.m + r_max * uy_max,
                mu_f / p.m + r_max * ux_max,
                p.a_max,
                (p.a_cg * p.mu * p.f_z_f + p.b_cg * p.mu * p.f_z_r) / p.i_zz,
            ]
        )


def hamiltonian(x, costate, params: VehicleParams, n_delta: int = 9, n_force: int = 17):
    """Point evaluation of the game Hamiltonian with its optimizers.

    Returns (H, RobotControl, HumanControl). Ties in any argmax/argmin break
    toward the smallest-magnitude control.
    """
    from .vehicle import HumanControl, RelativeState, RobotControl

    arr = x.as_array() if isinstance(x, RelativeState) else np.asarray(x, dtype=float)
    p_vec = np.asarray(costate, dtype=float)
    p = params
    xr, yr, pr, ux, uy, vh, r = arr
    p1, p2, p3, p4, p5, p6, p7 = p_vec

    drift = (
        p1 * (vh * math.cos(pr) - ux + yr * r)
        + p2 * (vh * math.sin(pr) - uy - xr * r)
        + p3 * (-r)
        + p4 * (p.drag_force(ux) / p.m + r * uy)
        + p5 * (-r * ux)
    )
    om_max = float(p.omega_max(vh))
    human = -abs(p3) * om_max - abs(p6) * p.a_max

    c = np.full(1, p4 / p.m)
    kf = np.full(1, p5 / p.m + p7 * (p.a_cg / p.i_zz))
    kr = np.full(1, p5 / p.m - p7 * (p.b_cg / p.i_zz))
    t0f = np.full(1, (uy + p.a_cg * r) / ux)
    t0r = np.full(1, (uy - p.b_cg * r) / ux)
    samples = np.linspace(-p.delta_max, p.delta_max, n_delta)
    deltas = [float(samples[i]) for i in np.argsort(np.abs(samples), kind="stable")]
    (ff_lo, ff_hi), (fr_lo, fr_hi) = p.axle_force_bounds()
    front_bounds = (max(ff_lo, -p.mu * p.f_z_f), min(ff_hi, p.mu * p.f_z_f))
    rear_bounds = (max(fr_lo, -p.mu * p.f_z_r), min(fr_hi, p.mu * p.f_z_r))
    front, (d_star, ff_star) = _axle_max(
        c, kf, t0f, np.arctan(t0f), front_bounds, p.mu * p.f_z_f, p.c_alpha_f, deltas, n_force, want_arg=True
    )
    rear, (_, fr_star) = _axle_max(
        c, kr, t0r, np.arctan(t0r), rear_bounds, p.mu * p.f_z_r, p.c_alpha_r, [None], n_force, want_arg=True
    )
    h_val = float(drift + human + front[0] + rear[0])
    om = 0.0 if p3 == 0.0 else -om_max * math.copysign(1.0, p3)
    a = 0.0 if p6 == 0.0 else -p.a_max * math.copysign(1.0, p6)
    return (
        h_val,
        RobotControl(delta=float(d_star[0]), f_xf=float(ff_star[0]), f_xr=float(fr_star[0])),
        HumanControl(omega=om, a=a),
    )


# ---------------------------------------------------------------------------
# Lax-Friedrichs integration of the variational inequality


def lf_numerical_hamiltonian(ham, d_minus, d_plus, alphas, sl=slice(None)):
    """Standard-form Lax-Friedrichs numerical Hamiltonian for D_tau V + H = 0:
    H((p- + p+)/2) minus the gradient-jump dissipation."""
    pbar = [0.5 * (m + p) for m, p in zip(d_minus, d_plus)]
    out = ham(pbar, sl)
    for i, a in enumerate(alphas):
        if a != 0.0:
            out = out - 0.5 * a * (d_plus[i] - d_minus[i])
    return out


def _lf_game_hamiltonian(ham, d_minus, d_plus, alphas, sl=slice(None)):
    """LF numerical Hamiltonian oriented for the tube equation
    D_tau V = min{0, H_game}.

    Rewriting as D_tau V + G = 0 with G = -min{0, H_game} and applying the
    standard LF form to G gives  min{0, H_game(pbar) + sum_i a_i (p+ - p-)/2}
    for the update: dissipation enters with the opposite sign relative to
    the forward-equation convention (value information flows downstream
    along f). With the minus sign the scheme digs runaway pits at convex
    kinks of V instead of freezing them.
    """
    pbar = [0.5 * (m + p) for m, p in zip(d_minus, d_plus)]
    out = ham(pbar, sl)
    for i, a in enumerate(alphas):
        if a != 0.0:
            out = out + 0.5 * a * (d_plus[i] - d_minus[i])
    return out


def _one_sided_gradients(v: np.ndarray, spec: GridSpec):
    """Left/right difference quotients with linear-extrapolation ghosts on
    non-periodic boundaries and wrapped ghosts on periodic ones."""
    d_minus, d_plus = [], []
    for d in range(spec.ndim):
        h = spec.spacing[d]
        sl_first = [slice(None)] * spec.ndim
        sl_last = [slice(None)] * spec.ndim
        if spec.periodic[d]:
            sl_first[d] = slice(-1, None)
            sl_last[d] = slice(0, 1)
            lo_ghost = v[tuple(sl_first)]
            hi_ghost = v[tuple(sl_last)]
        else:
            sl0, sl1 = [slice(None)] * spec.ndim, [slice(None)] * spec.ndim
            sl0[d], sl1[d] = slice(0, 1), slice(1, 2)
            lo_ghost = 2.0 * v[tuple(sl0)] - v[tuple(sl1)]
            sl0[d], sl1[d] = slice(-1, None), slice(-2, -1)
            hi_ghost = 2.0 * v[tuple(sl0)] - v[tuple(sl1)]
        padded = np.concatenate([lo_ghost, v, hi_ghost], axis=d)
        diff = np.diff(padded, axis=d) / h
        slm, slp = [slice(None)] * spec.ndim, [slice(None)] * spec.ndim
        slm[d] = slice(0, -1)
        slp[d] = slice(1, None)
        d_minus.append(diff[tuple(slm)])
        d_plus.append(diff[tuple(slp)])
    return d_minus, d_plus


def solve_vi(
    spec: GridSpec,
    terminal: GridField,
    ham,
    alphas,
    *,
    cfl: float = 0.8,
    tol: float = 1e-3,
    max_time: float = 30.0,
    max_dt: float = 0.1,
    workers: int = 1,
    snapshot_every: int = 0,
):
    """Integrate D_tau V = min{0, Hhat} from the terminal condition.

    Returns (GridField V, meta dict, snapshots). Values are pointwise
    nonincreasing by construction; `meta["max_increase"]` records the largest
    observed per-step increase as a witness. Non-convergence within max_time
    returns the best iterate with meta["converged"] = False.
    """
    v = terminal.values.astype(float).copy()
    alphas = np.asarray(alphas, dtype=float)
    h = np.array(spec.spacing)
    speed_sum = float(np.sum(alphas / h))
    dt_cfl = cfl / speed_sum if speed_sum > 0 else max_dt
    dt = min(dt_cfl, max_dt)
    # Freeze-form integration cannot recover eroded nodes, so a value
    # collapsing far below the terminal range signals a runaway pit
    # (possible on pure-erosion games); flag instead of overflowing.
    t_lo, t_hi = float(terminal.values.min()), float(terminal.values.max())
    collapse_floor = t_lo - 2.0 * max(t_hi - t_lo, 1.0)

    slabs = None
    pool = None
    if workers > 1:
        edges = np.linspace(0, spec.shape[0], workers + 1).astype(int)
        slabs = [slice(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]
        pool = ThreadPoolExecutor(max_workers=len(slabs))

    t = 0.0
    iters = 0
    resid = math.inf
    max_increase = -math.inf
    converged = False
    collapsed = False
    snapshots = []
    t_start = time.perf_counter()
    try:
        while t < max_time - 1e-12:
            step = min(dt, max_time - t)
            d_minus, d_plus = _one_sided_gradients(v, spec)

            if slabs is None:
                hhat = _lf_game_hamiltonian(ham, d_minus, d_plus, alphas)
                dv = step * np.minimum(0.0, hhat)
            else:
                dv = np.empty_like(v)

                def run(sl):
                    dm = [g[sl] for g in d_minus]
                    dp = [g[sl] for g in d_plus]
                    hh = _lf_game_hamiltonian(ham, dm, dp, alphas, sl)
                    dv[sl] = step * np.minimum(0.0, hh)

                list(pool.map(run, slabs))

            v += dv
            iters += 1
            t += step
            resid = float(np.max(np.abs(dv))) / step
            max_increase = max(max_increase, float(np.max(dv)))
            if snapshot_every and iters % snapshot_every == 0:
                snapshots.append((t, v.copy()))
            if resid < tol:
                converged = True
                break
            if float(v.min()) < collapse_floor:
                collapsed = True
                break
    finally:
        if pool is not None:
            pool.shutdown()

    meta = {
        "iterations": iters,
        "residual": resid,
        "pseudo_time": t,
        "dt": dt,
        "converged": converged,
        "collapsed": collapsed,
        "tol": tol,
        "max_increase": max_increase,
        "alphas": [float(a) for a in alphas],
    }
    return GridField(spec, v), meta, snapshots, time.perf_counter() - t_start


def solve_brs(config: SolverConfig, terminal: GridField, params: VehicleParams) -> ValueCache:
    """Solve the infinite-horizon avoid tube for the relative dynamics and
    package value, gradients, fingerprint, and metadata."""
    spec = config.grid
    if terminal.spec != spec:
        raise ValueError("terminal field grid does not match solver grid")
    effective = params if config.use_drag else params.without_drag()
    game = RelativeGame(spec, effective, n_delta=config.n_delta, n_force=config.n_force)
    v, meta, _, wall = solve_vi(
        spec,
        terminal,
        game.eval,
        game.dissipation(),
        cfl=config.cfl,
        tol=config.tol,
        max_time=config.max_time,
        max_dt=config.max_dt,
        workers=config.workers,
    )
    meta["use_drag"] = config.use_drag
    grads = gradient(v)
    fp = fingerprint(effective, terminal.values, spec)
    return ValueCache(spec=spec, v=v, grads=grads, fingerprint=fp, meta=meta, wall_time=wall)
