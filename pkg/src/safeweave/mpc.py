"""100 Hz tracking controller: error-state prediction model about a nominal
trajectory, exact first-order-hold discretization of the per-node
linearization, stable handling envelope, slack-penalized objective, and the
injected safety half-space rows; one QP per control step with the solution
interpolated to seed the next step's linearization nodes.

Control modes:
  tracking  - QP without safety rows
  filtered  - QP with the half-space rows whenever the cached value <= eps
  switching - optimal avoidance control replaces the QP whenever value <= eps
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import qp as qp_mod
from .config import dataclass_from_mapping, load_flat_mapping
from .geometry import wrap_angle
from .safety import HalfSpaceConstraint, SafetyConfig, optimal_avoidance, safe_halfspace
from .trajectory import NominalTrajectory
from .vehicle import (
    G,
    HumanState,
    RelativeState,
    RobotControl,
    RobotState,
    VehicleParams,
    relative_state,
    tire_lateral_force,
)

__all__ = [
    "MPCConfig",
    "ErrorState",
    "StepInfo",
    "TrackingController",
    "error_state",
    "handling_envelope",
    "linearize_foh",
    "build_qp",
]

_MODES = ("tracking", "filtered", "switching")


@dataclass(frozen=True)
class MPCConfig:
    """Horizon, weights, and limits of the tracking QP.

    Weights are tracking-dominant with the safety slack penalty strictly
    dominating the envelope slacks. The varying-step horizon covers about
    1.5 s: 8 steps at 10 ms, 8 at 50 ms, 7 at 150 ms.
    """

    horizon: int = 24
    dt_fine: float = 0.01
    dt_mid: float = 0.05
    dt_coarse: float = 0.15
    q_ds: float = 1.0
    q_dpsi: float = 40.0
    q_e: float = 30.0
    r_ddelta: float = 1000.0
    r_dfx: float = 1e-5
    w_beta: float = 1e4
    w_r: float = 1e4
    w_hji: float = 1e6
    fx_rate_max: float = 60000.0  # N/s
    v_min: float = 1.0
    v_max: float = 12.0
    t_hji: int = 3
    qp_tol: float = 1e-4
    qp_max_iter: int = 2000

    def __post_init__(self):
        if self.horizon < 4:
            raise ValueError("horizon too short")
        if self.t_hji > self.horizon:
            raise ValueError("t_hji cannot exceed the horizon")
        if min(self.w_beta, self.w_r, self.w_hji) < 0 or self.w_hji < 10 * max(self.w_beta, self.w_r):
            raise ValueError("safety slack weight must dominate envelope slacks")

    @property
    def dts(self) -> np.ndarray:
        n = self.horizon - 1
        out = [self.dt_fine] * min(8, n) + [self.dt_mid] * min(8, max(n - 8, 0))
        out += [self.dt_coarse] * max(n - 16, 0)
        return np.array(out[:n])

    @classmethod
    def from_file(cls, path) -> "MPCConfig":
        return dataclass_from_mapping(cls, load_flat_mapping(path))


@dataclass
class ErrorState:
    """Tracking state: [longitudinal error, U_x, U_y, r, heading error,
    lateral error]."""

    d_s: float
    u_x: float
    u_y: float
    r: float
    d_psi: float
    e: float

    def as_array(self) -> np.ndarray:
        return np.array([self.d_s, self.u_x, self.u_y, self.r, self.d_psi, self.e])


def error_state(robot: RobotState, nominal: NominalTrajectory, t: float) -> ErrorState:
    """Tracking errors of the robot against the time-indexed nominal point.

    Longitudinal error is the arc-length lead over the nominal schedule,
    lateral error is the signed offset at the closest path point (left
    positive), heading error the difference to the path tangent there.
    """
    ref = nominal.sample(t)
    s_proj, e, psi_path, _ = nominal.project(robot.x, robot.y, s_hint=ref["s"])
    return ErrorState(
        d_s=s_proj - ref["s"],
        u_x=robot.u_x,
        u_y=robot.u_y,
        r=robot.r,
        d_psi=wrap_angle(robot.psi - psi_path),
        e=e,
    )


def handling_envelope(u_x: float, p: VehicleParams):
    """Stable handling envelope rows (H, G): |H [U_y; r]| <= G.

    First row bounds the rear-axle slip by its saturation angle, second the
    yaw rate by the friction-limited value mu*g/U_x.
    """
    u = max(u_x, 0.5)
    alpha_sat = math.atan(3.0 * p.mu * p.f_z_r / p.c_alpha_r)
    H = np.array([[1.0 / u, -p.b_cg / u], [0.0, 1.0]])
    Gv = np.array([alpha_sat, p.mu * 9.81 / u])
    return H, Gv


@dataclass
class _NodeContext:
    """Per-node frozen nominal data for the prediction model."""

    u_x_nom: np.ndarray  # (T,)
    kappa: np.ndarray  # (T,)


def _error_rates(q: np.ndarray, u: np.ndarray, ctx_ux, ctx_kappa, p: VehicleParams) -> np.ndarray:
    """Continuous error dynamics, vectorized over leading axes."""
    d_s, u_x, u_y, r, d_psi, e = (q[..., i] for i in range(6))
    delta, f_x = u[..., 0], u[..., 1]
    f_xf, f_xr = p.split_force(f_x)
    f_xf = np.clip(f_xf, -p.mu * p.f_z_f, p.mu * p.f_z_f)
    f_xr = np.clip(f_xr, -p.mu * p.f_z_r, p.mu * p.f_z_r)
    alpha_f = np.arctan2(u_y + p.a_cg * r, u_x) - delta
    alpha_r = np.arctan2(u_y - p.b_cg * r, u_x)
    f_yf = tire_lateral_force(alpha_f, f_xf, p.f_z_f, p.c_alpha_f, p.mu)
    f_yr = tire_lateral_force(alpha_r, f_xr, p.f_z_r, p.c_alpha_r, p.mu)
    cos_dp, sin_dp = np.cos(d_psi), np.sin(d_psi)
    denom = 1.0 - ctx_kappa * e
    denom = np.where(np.abs(denom) < 0.1, np.copysign(0.1, denom), denom)
    s_dot = (u_x * cos_dp - u_y * sin_dp) / denom
    return np.stack(
        [
            s_dot - ctx_ux,
            (f_xf + f_xr + p.drag_force(u_x)) / p.m + r * u_y,
            (f_yf + f_yr) / p.m - r * u_x,
            (p.a_cg * f_yf - p.b_cg * f_yr) / p.i_zz,
            r - ctx_kappa * s_dot,
            u_x * sin_dp + u_y * cos_dp,
        ],
        axis=-1,
    )


_FD_STEPS_Q = np.array([1e-4, 1e-4, 1e-4, 1e-5, 1e-5, 1e-4])
_FD_STEPS_U = np.array([1e-5, 1.0])

# Pade-13 coefficients for the scaling-and-squaring matrix exponential
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
    33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)


def _expm_batch(M: np.ndarray) -> np.ndarray:
    """Matrix exponential of a stack of small matrices (Pade-13 with shared
    scaling). Accuracy matches scipy.linalg.expm on the operating range."""
    b = _PADE13
    norms = np.abs(M).sum(axis=-1).max(axis=-1)
    theta13 = 4.25
    s = max(0, int(np.ceil(np.log2(max(float(norms.max()), 1e-300) / theta13))))
    A = M / (2.0**s)
    n = M.shape[-1]
    ident = np.broadcast_to(np.eye(n), M.shape)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
    R = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    return R


def linearize_foh(nodes_q: np.ndarray, nodes_u: np.ndarray, dts, ctx: _NodeContext, p: VehicleParams):
    """Exact first-order-hold discretization of the Jacobian linearization
    about each node.

    Returns per-interval (A_k, B_k_minus, B_k_plus, c_k) such that
    q_{k+1} = A_k q_k + B- u_k + B+ u_{k+1} + c_k reproduces the linearized
    continuous dynamics under linearly interpolated controls.
    """
    T = nodes_q.shape[0]
    n_int = len(dts)

    # all central-difference perturbations in one batched evaluation
    stacks_q = [nodes_q]
    stacks_u = [nodes_u]
    for j in range(6):
        dq = np.zeros(6)
        dq[j] = _FD_STEPS_Q[j]
        stacks_q += [nodes_q + dq, nodes_q - dq]
        stacks_u += [nodes_u, nodes_u]
    for j in range(2):
        du = np.zeros(2)
        du[j] = _FD_STEPS_U[j]
        stacks_q += [nodes_q, nodes_q]
        stacks_u += [nodes_u + du, nodes_u - du]
    rates = _error_rates(
        np.stack(stacks_q), np.stack(stacks_u), ctx.u_x_nom, ctx.kappa, p
    )
    base = rates[0]
    Jq = np.empty((T, 6, 6))
    for j in range(6):
        Jq[:, :, j] = (rates[1 + 2 * j] - rates[2 + 2 * j]) / (2 * _FD_STEPS_Q[j])
    Ju = np.empty((T, 6, 2))
    for j in range(2):
        Ju[:, :, j] = (rates[13 + 2 * j] - rates[14 + 2 * j]) / (2 * _FD_STEPS_U[j])

    # Van Loan block exponentials, batched over intervals
    dts = np.asarray(dts, dtype=float)
    c0 = base[:n_int] - np.einsum("kij,kj->ki", Jq[:n_int], nodes_q[:n_int])
    c0 -= np.einsum("kij,kj->ki", Ju[:n_int], nodes_u[:n_int])
    M = np.zeros((n_int, 12, 12))
    M[:, :6, :6] = Jq[:n_int]
    M[:, :6, 6:8] = Ju[:n_int]
    M[:, :6, 8] = c0
    M[:, 6:9, 9:12] = np.eye(3)
    E = _expm_batch(M * dts[:, None, None])
    out = []
    for k in range(n_int):
        Ad = E[k, :6, :6]
        H1 = E[k, :6, 6:9]
        H2 = E[k, :6, 9:12]
        Bm = H1[:, :2] - H2[:, :2] / dts[k]
        Bp = H2[:, :2] / dts[k]
        cd = H1[:, 2]
        out.append((Ad, Bm, Bp, cd))
    return out


def foh_discretize(A: np.ndarray, B: np.ndarray, c: np.ndarray, dt: float):
    """Exact first-order-hold discretization of q' = A q + B u + c.

    Computes the Van Loan block exponential to obtain
    q_{k+1} = Ad q_k + Bm u_k + Bp u_{k+1} + cd
    for controls varying linearly over the interval.
    """
    n = A.shape[0]
    m = B.shape[1] + 1
    B_aug = np.column_stack([B, np.asarray(c, dtype=float)])
    M = np.zeros((n + 2 * m, n + 2 * m))
    M[:n, :n] = A
    M[:n, n : n + m] = B_aug
    M[n : n + m, n + m :] = np.eye(m)
    E = scipy.linalg.expm(M * dt)
    Ad = E[:n, :n]
    H1 = E[:n, n : n + m]  # int e^{A(dt-s)} B_aug ds
    H2 = E[:n, n + m :]  # int e^{A(dt-s)} B_aug s ds
    Bm = H1[:, :-1] - H2[:, :-1] / dt
    Bp = H2[:, :-1] / dt
    cd = H1[:, -1]
    return Ad, Bm, Bp, cd


def _halfspace_2d(hs: HalfSpaceConstraint, p: VehicleParams, f_x_sign: float):
    """Map the (delta, f_xf, f_xr) half-space onto (delta, F_x) through the
    fixed drive/brake split chosen by the sign of the current total force."""
    sf = p.drive_split_front if f_x_sign >= 0 else p.brake_split_front
    m2 = np.array([hs.m_hji[0], sf * hs.m_hji[1] + (1.0 - sf) * hs.m_hji[2]])
    return m2, hs.b_hji


class _QPStructure:
    """Fixed sparsity pattern of the tracking QP for one (horizon, t_hji,
    active) combination; per-step assembly only fills value and bound
    vectors in the recorded block order."""

    def __init__(self, T: int, t_hji: int, active: bool):
        self.T, self.t_hji, self.active = T, t_hji, active
        n_d = T - 1
        self.off_u = 6 * T
        self.off_dd = self.off_u + 2 * T
        self.off_df = self.off_dd + n_d
        self.off_sb = self.off_df + n_d
        self.off_sr = self.off_sb + T
        self.off_sh = self.off_sr + T
        self.n = self.off_sh + (t_hji if active else 0)

        rows, cols = [], []
        r = 0

        def block(rr, cc):
            nonlocal r
            rows.append(np.asarray(rr, dtype=np.int32))
            cols.append(np.asarray(cc, dtype=np.int32))

        # init pins: q_1, u_1
        block(np.arange(6), np.arange(6))
        block(6 + np.arange(2), self.off_u + np.arange(2))
        r = 8
        # dynamics: identity on q_{k+1}
        k = np.arange(n_d)
        dyn_row0 = r
        block(
            (r + 6 * k[:, None] + np.arange(6)).ravel(),
            (6 * (k[:, None] + 1) + np.arange(6)).ravel(),
        )
        # -Ad on q_k: rows repeat per i, cols tile per j
        rr = (r + 6 * k[:, None, None] + np.arange(6)[None, :, None] + np.zeros((1, 1, 6), int)).ravel()
        cc = (6 * k[:, None, None] + np.zeros((1, 6, 1), int) + np.arange(6)[None, None, :]).ravel()
        block(rr, cc)
        # -Bm on u_k, -Bp on u_{k+1}
        rr = (r + 6 * k[:, None, None] + np.arange(6)[None, :, None] + np.zeros((1, 1, 2), int)).ravel()
        cc = (self.off_u + 2 * k[:, None, None] + np.arange(2)[None, None, :] + np.zeros((1, 6, 1), int)).ravel()
        block(rr, cc)
        cc2 = (self.off_u + 2 * (k[:, None, None] + 1) + np.arange(2)[None, None, :] + np.zeros((1, 6, 1), int)).ravel()
        block(rr, cc2)
        r += 6 * n_d
        self.dyn_rows = (dyn_row0, r)
        # increment definitions: u_{k+1} - u_k - d_k = 0, per channel
        dd_row0 = r
        for off_var, ch in ((self.off_dd, 0), (self.off_df, 1)):
            block(r + np.arange(n_d), self.off_u + 2 * (k + 1) + ch)
            block(r + np.arange(n_d), self.off_u + 2 * k + ch)
            block(r + np.arange(n_d), off_var + k)
            r += n_d
        # increment bound rows
        self.ddb_rows = (r, r + n_d)
        block(r + np.arange(n_d), self.off_dd + k)
        r += n_d
        self.dfb_rows = (r, r + n_d)
        block(r + np.arange(n_d), self.off_df + k)
        r += n_d
        # absolute boxes: delta, F_x, U_x
        kk = np.arange(T)
        self.delta_rows = (r, r + T)
        block(r + kk, self.off_u + 2 * kk)
        r += T
        self.fx_rows = (r, r + T)
        block(r + kk, self.off_u + 2 * kk + 1)
        r += T
        self.ux_rows = (r, r + T)
        block(r + kk, 6 * kk + 1)
        r += T
        # envelope: 4 rows per node, entries (U_y, r, slack)
        self.env_rows = (r, r + 4 * T)
        er = r + 4 * kk[:, None] + np.arange(4)
        uy_col = 6 * kk + 2
        r_col = 6 * kk + 3
        slack_cols = np.stack(
            [self.off_sb + kk, self.off_sb + kk, self.off_sr + kk, self.off_sr + kk], axis=1
        )
        block(er.ravel(), np.stack([uy_col] * 4, axis=1).ravel())
        block(er.ravel(), np.stack([r_col] * 4, axis=1).ravel())
        block(er.ravel(), slack_cols.ravel())
        r += 4 * T
        # slack nonnegativity
        self.slack_rows = (r, r + 2 * T)
        block(r + np.arange(2 * T), self.off_sb + np.arange(2 * T))
        r += 2 * T
        if active:
            self.hji_rows = (r, r + t_hji)
            j = np.arange(t_hji)
            block(r + j, self.off_u + 2 * j)
            block(r + j, self.off_u + 2 * j + 1)
            block(r + j, self.off_sh + j)
            r += t_hji
            self.hji_slack_rows = (r, r + t_hji)
            block(r + j, self.off_sh + j)
            r += t_hji
        self.nrow = r
        self.rows = np.concatenate(rows)
        self.cols = np.concatenate(cols)
        self.n_d = n_d


_STRUCTURES = {}


def _structure(T, t_hji, active) -> _QPStructure:
    key = (T, t_hji, active)
    if key not in _STRUCTURES:
        _STRUCTURES[key] = _QPStructure(T, t_hji, active)
    return _STRUCTURES[key]


def build_qp(
    q_curr: np.ndarray,
    u_curr: np.ndarray,
    nodes_q: np.ndarray,
    nodes_u: np.ndarray,
    dts,
    ctx: _NodeContext,
    p: VehicleParams,
    cfg: MPCConfig,
    halfspace: HalfSpaceConstraint = None,
):
    """Assemble the tracking QP in standard form.

    Decision variables: states q_1..T, controls u_1..T, steering and force
    increments, envelope slacks, and (when the half-space is active) the
    safety slacks. Initial state and control are pinned; safety rows cover
    the first t_hji steps with one frozen half-space.
    """
    T = cfg.horizon
    active = halfspace is not None and halfspace.active
    st = _structure(T, cfg.t_hji, active)
    n_d = st.n_d
    dts = np.asarray(dts, dtype=float)

    lin = linearize_foh(nodes_q, nodes_u, dts, ctx, p)
    Ad = np.stack([m[0] for m in lin])
    Bm = np.stack([m[1] for m in lin])
    Bp = np.stack([m[2] for m in lin])
    cd = np.stack([m[3] for m in lin])

    # handling envelope coefficients per node
    ux = np.maximum(nodes_q[:, 1], 0.5)
    alpha_sat = math.atan(3.0 * p.mu * p.f_z_r / p.c_alpha_r)
    h00 = 1.0 / ux
    h01 = -p.b_cg / ux
    g0 = np.full(T, alpha_sat)
    g1 = p.mu * G / ux

    vals = [
        np.ones(8),
        np.ones(6 * n_d),  # dynamics identity
        -Ad.reshape(-1),
        -Bm.reshape(-1),
        -Bp.reshape(-1),
        np.ones(n_d), -np.ones(n_d), -np.ones(n_d),  # d-delta definition
        np.ones(n_d), -np.ones(n_d), -np.ones(n_d),  # d-Fx definition
        np.ones(2 * n_d),  # increment bound rows
        np.ones(3 * T),  # absolute boxes
        # envelope entries, grouped by column kind then (node, row)
        np.stack([h00, -h00, np.zeros(T), np.zeros(T)], axis=1).ravel(),
        np.stack([h01, -h01, np.ones(T), -np.ones(T)], axis=1).ravel(),
        -np.ones(4 * T),
        np.ones(2 * T),  # slack nonnegativity
    ]
    lo = np.empty(st.nrow)
    hi = np.empty(st.nrow)
    lo[0:6] = hi[0:6] = q_curr
    lo[6:8] = hi[6:8] = u_curr
    lo[st.dyn_rows[0] : st.dyn_rows[1]] = hi[st.dyn_rows[0] : st.dyn_rows[1]] = cd.reshape(-1)
    dd0 = st.dyn_rows[1]
    lo[dd0 : dd0 + 2 * n_d] = hi[dd0 : dd0 + 2 * n_d] = 0.0
    lim_d = p.delta_rate_max * dts
    lim_f = cfg.fx_rate_max * dts
    lo[st.ddb_rows[0] : st.ddb_rows[1]] = -lim_d
    hi[st.ddb_rows[0] : st.ddb_rows[1]] = lim_d
    lo[st.dfb_rows[0] : st.dfb_rows[1]] = -lim_f
    hi[st.dfb_rows[0] : st.dfb_rows[1]] = lim_f
    lo[st.delta_rows[0] : st.delta_rows[1]] = -p.delta_max
    hi[st.delta_rows[0] : st.delta_rows[1]] = p.delta_max
    lo[st.fx_rows[0] : st.fx_rows[1]] = p.f_x_min
    hi[st.fx_rows[0] : st.fx_rows[1]] = p.f_x_max
    lo[st.ux_rows[0] : st.ux_rows[1]] = cfg.v_min
    hi[st.ux_rows[0] : st.ux_rows[1]] = cfg.v_max
    lo[st.env_rows[0] : st.env_rows[1]] = -np.inf
    hi[st.env_rows[0] : st.env_rows[1]] = np.stack([g0, g0, g1, g1], axis=1).ravel()
    lo[st.slack_rows[0] : st.slack_rows[1]] = 0.0
    hi[st.slack_rows[0] : st.slack_rows[1]] = np.inf
    if active:
        m2, b2 = _halfspace_2d(halfspace, p, float(u_curr[1]))
        vals += [
            np.full(cfg.t_hji, m2[0]),
            np.full(cfg.t_hji, m2[1]),
            np.ones(cfg.t_hji),
            np.ones(cfg.t_hji),
        ]
        lo[st.hji_rows[0] : st.hji_rows[1]] = -b2
        hi[st.hji_rows[0] : st.hji_rows[1]] = np.inf
        lo[st.hji_slack_rows[0] : st.hji_slack_rows[1]] = 0.0
        hi[st.hji_slack_rows[0] : st.hji_slack_rows[1]] = np.inf

    A = sp.csc_matrix(
        (np.concatenate(vals), (st.rows, st.cols)), shape=(st.nrow, st.n)
    )

    p_diag = np.zeros(st.n)
    p_diag[0 : 6 * T : 6] = 2.0 * cfg.q_ds
    p_diag[4 : 6 * T : 6] = 2.0 * cfg.q_dpsi
    p_diag[5 : 6 * T : 6] = 2.0 * cfg.q_e
    p_diag[st.off_dd : st.off_dd + n_d] = 2.0 * cfg.r_ddelta
    p_diag[st.off_df : st.off_df + n_d] = 2.0 * cfg.r_dfx
    q_lin = np.zeros(st.n)
    q_lin[st.off_sb : st.off_sb + T] = cfg.w_beta
    q_lin[st.off_sr : st.off_sr + T] = cfg.w_r
    if active:
        q_lin[st.off_sh : st.off_sh + cfg.t_hji] = cfg.w_hji

    problem = qp_mod.QuadraticProgram(sp.diags(p_diag, format="csc"), q_lin, A, lo, hi)
    layout = {"off_u": st.off_u, "off_sh": st.off_sh if active else None, "n": st.n}
    return problem, layout


@dataclass
class StepInfo:
    value: float = math.nan
    active: bool = False
    extrapolated: bool = False
    sigma_hji: float = 0.0
    qp_status: str = "skipped"
    qp_iterations: int = 0
    mode_applied: str = "tracking"
    solve_time: float = 0.0
    fault_count: int = 0


class TrackingController:
    """Stateful 100 Hz controller; not reentrant. Holds the previous QP
    solution for next-step linearization, the previous command as the QP's
    pinned initial control, and a fault counter for solver failures."""

    def __init__(
        self,
        params: VehicleParams,
        cfg: MPCConfig,
        mode: str = "tracking",
        cache=None,
        safety_cfg: SafetyConfig = None,
    ):
        if mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if mode in ("filtered", "switching") and cache is None:
            raise ValueError(f"{mode} mode requires a value cache")
        self.p = params
        self.cfg = cfg
        self.mode = mode
        self.cache = cache
        self.safety_cfg = safety_cfg or SafetyConfig()
        self.prev_solution = None  # (node_times, q (T,6), u (T,2))
        self.prev_command = np.array([0.0, 0.0])  # (delta, F_x)
        self.warm = None
        self.fault_count = 0

    # -- helpers -----------------------------------------------------------

    def _node_times(self, t: float) -> np.ndarray:
        return t + np.concatenate([[0.0], np.cumsum(self.cfg.dts)])

    def _linearization_nodes(self, t: float, q_curr: np.ndarray, nominal: NominalTrajectory):
        times = self._node_times(t)
        T = self.cfg.horizon
        ref = nominal.sample_many(times)
        nodes_q = np.empty((T, 6))
        nodes_u = np.empty((T, 2))
        if self.prev_solution is not None:
            pt, pq, pu = self.prev_solution
            for i in range(6):
                nodes_q[:, i] = np.interp(times, pt, pq[:, i])
            for i in range(2):
                nodes_u[:, i] = np.interp(times, pt, pu[:, i])
            nodes_q[0] = q_curr
        else:
            nodes_q[:, 0] = 0.0
            nodes_q[:, 1] = ref["u_x"]
            nodes_q[:, 2] = ref["u_y"]
            nodes_q[:, 3] = ref["r"]
            nodes_q[:, 4] = 0.0
            nodes_q[:, 5] = 0.0
            nodes_u[:, 0] = ref["delta_ff"]
            nodes_u[:, 1] = ref["f_x_ff"]
            nodes_q[0] = q_curr
        return times, nodes_q, nodes_u, _NodeContext(u_x_nom=ref["u_x"], kappa=ref["kappa"])

    def _command_from(self, u2: np.ndarray) -> RobotControl:
        f_xf, f_xr = self.p.split_force(float(u2[1]))
        return RobotControl(delta=float(u2[0]), f_xf=float(f_xf), f_xr=float(f_xr))

    def _fallback(self, x_rel, info) -> RobotControl:
        if self.cache is not None and self.fault_count >= 3:
            info.mode_applied = "avoidance-fallback"
            return optimal_avoidance(self.cache, x_rel, self.p)
        info.mode_applied = "hold"
        return self._command_from(self.prev_command)

    # -- main entry --------------------------------------------------------

    def step(
        self, robot: RobotState, human: HumanState, nominal: NominalTrajectory, t: float
    ) -> tuple:
        """One control period: returns (RobotControl, StepInfo)."""
        t_start = time.perf_counter()
        info = StepInfo(fault_count=self.fault_count)
        x_rel = relative_state(robot, human)

        halfspace = None
        if self.mode in ("filtered", "switching"):
            u_prev = self._command_from(self.prev_command)
            halfspace = safe_halfspace(self.cache, x_rel, u_prev, self.p, self.safety_cfg)
            info.value = halfspace.value
            info.active = halfspace.active
            info.extrapolated = halfspace.extrapolated

        if self.mode == "switching" and halfspace.active:
            u_r = optimal_avoidance(self.cache, x_rel, self.p)
            info.mode_applied = "avoidance"
            self.prev_solution = None
            self.warm = None
            self.prev_command = np.array([u_r.delta, u_r.f_x])
            info.solve_time = time.perf_counter() - t_start
            return u_r, info

        q_curr = error_state(robot, nominal, t).as_array()
        u_curr = self.prev_command
        times, nodes_q, nodes_u, ctx = self._linearization_nodes(t, q_curr, nominal)
        hs_rows = halfspace if (self.mode == "filtered") else None
        problem, layout = build_qp(
            q_curr, u_curr, nodes_q, nodes_u, self.cfg.dts, ctx, self.p, self.cfg, hs_rows
        )
        warm = self.warm if (self.warm is not None and self.warm[0].shape[0] == layout["n"]) else None
        sol = qp_mod.solve(
            problem,
            warm=warm,
            tol_primal=self.cfg.qp_tol,
            tol_dual=self.cfg.qp_tol,
            max_iter=self.cfg.qp_max_iter,
        )
        info.qp_status = sol.status
        info.qp_iterations = sol.iterations

        if sol.status != "solved":
            self.fault_count += 1
            info.fault_count = self.fault_count
            u_r = self._fallback(x_rel, info)
            info.solve_time = time.perf_counter() - t_start
            return u_r, info

        self.fault_count = 0
        off_u = layout["off_u"]
        T = self.cfg.horizon
        u_traj = sol.z[off_u : off_u + 2 * T].reshape(T, 2)
        q_traj = sol.z[: 6 * T].reshape(T, 6)
        if layout["off_sh"] is not None:
            info.sigma_hji = float(np.max(sol.z[layout["off_sh"] : layout["off_sh"] + self.cfg.t_hji]))
        self.prev_solution = (times, q_traj, u_traj)
        self.warm = (sol.z, sol.y)
        # u_1 is pinned to the previous command, so the first free node is
        # the command for the upcoming interval
        u2 = u_traj[1].copy()
        self.prev_command = u2
        info.mode_applied = self.mode if (hs_rows is not None and hs_rows.active) else "tracking"
        info.solve_time = time.perf_counter() - t_start
        return self._command_from(u2), info
