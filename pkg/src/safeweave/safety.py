"""Online queries against the cached game value: value/gradient lookup, the
optimal avoidance control, the worst-case human action, and the
safety-preserving half-space constraint in linearized form
M . u_R + b >= 0 over the robot control coordinates (delta, f_xf, f_xr).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cache import ValueCache
from .grid import interp_stack
from .hji import hamiltonian
from .vehicle import (
    HumanControl,
    RelativeState,
    RobotControl,
    VehicleParams,
    control_jacobian,
    relative_dynamics,
)

__all__ = [
    "SafetyConfig",
    "HalfSpaceConstraint",
    "value_and_grad",
    "worst_case_human",
    "optimal_avoidance",
    "safe_halfspace",
]


@dataclass(frozen=True)
class SafetyConfig:
    """Safety buffer and the policy for queries outside the solved domain."""

    eps: float = 0.05
    out_of_domain: str = "conservative-active"  # or "inactive"

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.out_of_domain not in ("conservative-active", "inactive"):
            raise ValueError("unknown out-of-domain policy")


@dataclass
class HalfSpaceConstraint:
    """Linearized safety-preserving control set {u : m_hji . u + b_hji >= 0}."""

    m_hji: np.ndarray  # (3,) coefficients over (delta, f_xf, f_xr)
    b_hji: float
    state: RelativeState
    control: RobotControl  # linearization point
    value: float
    active: bool
    extrapolated: bool


def value_and_grad(cache: ValueCache, x: RelativeState):
    """Interpolated (V, grad V, extrapolated) at a relative state.

    Refuses unconverged caches; out-of-domain queries clamp to the boundary
    and raise the extrapolated flag.
    """
    cache.require_converged()
    vals, extrapolated = interp_stack([cache.v] + cache.grads, x.as_array())
    return float(vals[0]), vals[1:], extrapolated


def worst_case_human(x: RelativeState, grad, params: VehicleParams) -> HumanControl:
    """Analytic minimizer of grad . f over the human control box.

    Bang-bang in yaw rate and acceleration with ties broken to zero.
    """
    g = np.asarray(grad, dtype=float)
    om_max = float(params.omega_max(x.v_h))
    omega = 0.0 if g[2] == 0.0 else -om_max * float(np.sign(g[2]))
    a = 0.0 if g[5] == 0.0 else -params.a_max * float(np.sign(g[5]))
    return HumanControl(omega=omega, a=a)


def optimal_avoidance(cache: ValueCache, x: RelativeState, params: VehicleParams) -> RobotControl:
    """Robot maximizer of the game Hamiltonian at the cached gradient.

    The switching controller applies this directly when V <= eps.
    """
    _, grad, _ = value_and_grad(cache, x)
    _, u_r, _ = hamiltonian(x, grad, params, n_force=33)
    return u_r


def safe_halfspace(
    cache: ValueCache,
    x: RelativeState,
    u_r_current: RobotControl,
    params: VehicleParams,
    cfg: SafetyConfig,
) -> HalfSpaceConstraint:
    """Half-space whose interior keeps the value nondecreasing under the
    worst-case human action, linearized at the current robot control.

    Exact in the force coordinates (the dynamics are affine there inside the
    friction circle); first-order in steering. Active iff V <= eps, or when
    the query left the domain under the conservative-active policy.
    """
    v, grad, extrapolated = value_and_grad(cache, x)
    u_h = worst_case_human(x, grad, params)
    jac = control_jacobian(x, u_r_current, u_h, params)
    m = grad @ jac
    flow = float(grad @ relative_dynamics(x, u_r_current, u_h, params))
    b = flow - float(m @ u_r_current.as_array())
    # conservative-active treats the clamped boundary value as authoritative
    # so the filter still engages outside the domain; inactive never fires
    # there. Either way, activation requires V <= eps.
    active = v <= cfg.eps
    if extrapolated and cfg.out_of_domain == "inactive":
        active = False
    return HalfSpaceConstraint(
        m_hji=m,
        b_hji=b,
        state=x,
        control=u_r_current,
        value=v,
        active=bool(active),
        extrapolated=bool(extrapolated),
    )
