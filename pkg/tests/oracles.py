"""Independent brute-force oracles shared by module and acceptance tests.

Everything here deliberately avoids the library's own algorithms: overlap
tests use point containment plus edge intersection, distances use dense
sampling and bisection, optimizers use exhaustive enumeration.
"""

from __future__ import annotations

import math

import numpy as np

from safeweave.geometry import OrientedBox

# ---------------------------------------------------------------------------
# Oriented-box geometry


def _to_frame(box: OrientedBox, pts: np.ndarray) -> np.ndarray:
    c, s = math.cos(box.heading), math.sin(box.heading)
    d = pts - box.center
    return np.column_stack([c * d[:, 0] + s * d[:, 1], -s * d[:, 0] + c * d[:, 1]])


def points_in_box(box: OrientedBox, pts: np.ndarray, tol: float = 0.0) -> np.ndarray:
    local = _to_frame(box, np.atleast_2d(pts))
    return (np.abs(local[:, 0]) <= 0.5 * box.length + tol) & (
        np.abs(local[:, 1]) <= 0.5 * box.width + tol
    )


def _segments_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if v == 0 else (1 if v > 0 else -1)

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p1, p2, p3):
        return True
    if o2 == 0 and on_seg(p1, p2, p4):
        return True
    if o3 == 0 and on_seg(p3, p4, p1):
        return True
    if o4 == 0 and on_seg(p3, p4, p2):
        return True
    return False


def boxes_overlap_oracle(a: OrientedBox, b: OrientedBox) -> bool:
    """Exhaustive overlap test: vertex containment or any edge intersection."""
    ca, cb = a.corners(), b.corners()
    if points_in_box(b, ca).any() or points_in_box(a, cb).any():
        return True
    for i in range(4):
        for j in range(4):
            if _segments_intersect(ca[i], ca[(i + 1) % 4], cb[j], cb[(j + 1) % 4]):
                return True
    return False


def _perimeter_samples(box: OrientedBox, spacing: float) -> np.ndarray:
    corners = box.corners()
    pts = []
    for i in range(4):
        p0, p1 = corners[i], corners[(i + 1) % 4]
        n = max(2, int(np.ceil(np.linalg.norm(p1 - p0) / spacing)) + 1)
        t = np.linspace(0.0, 1.0, n)
        pts.append(p0 + t[:, None] * (p1 - p0))
    return np.vstack(pts)


def _distance_to_box(box: OrientedBox, pts: np.ndarray) -> np.ndarray:
    local = _to_frame(box, pts)
    dx = np.maximum(np.abs(local[:, 0]) - 0.5 * box.length, 0.0)
    dy = np.maximum(np.abs(local[:, 1]) - 0.5 * box.width, 0.0)
    return np.hypot(dx, dy)


def _translated(box: OrientedBox, offset) -> OrientedBox:
    return OrientedBox(box.cx + offset[0], box.cy + offset[1], box.heading, box.length, box.width)


def box_distance_oracle(a: OrientedBox, b: OrientedBox, tol: float = 1e-4) -> float:
    """Sampled gap (disjoint) or bisected minimal translation (overlap)."""
    if not boxes_overlap_oracle(a, b):
        gap = math.inf
        for src, dst in ((a, b), (b, a)):
            pts = _perimeter_samples(src, spacing=1e-3)
            gap = min(gap, float(_distance_to_box(dst, pts).min()))
        return gap
    # Penetration: sweep translation directions, bisect the separating length.
    t_hi0 = a.length + a.width + b.length + b.width
    best = math.inf
    for theta in np.linspace(0.0, 2.0 * math.pi, 1441):
        u = np.array([math.cos(theta), math.sin(theta)])
        lo, hi = 0.0, t_hi0
        if boxes_overlap_oracle(a, _translated(b, hi * u)):
            continue
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if boxes_overlap_oracle(a, _translated(b, mid * u)):
                lo = mid
            else:
                hi = mid
        best = min(best, hi)
    return -best


# ---------------------------------------------------------------------------
# Dense primal active-set QP reference (small strictly convex problems)


def active_set_qp(P, q, A, l, u, z0=None, max_iter=500, tol=1e-10):
    """Textbook primal active-set method for min 0.5 z'Pz + q'z, l <= Az <= u.

    Requires P positive definite and a feasible starting point (defaults to
    the origin, so generated instances must satisfy l <= 0 <= u).
    Returns (z, lam_rows) where lam_rows are signed row multipliers matching
    the two-sided convention (positive at upper bounds, negative at lower).
    """
    P = np.asarray(P, dtype=float)
    q = np.asarray(q, dtype=float).ravel()
    A = np.asarray(A, dtype=float)
    l = np.asarray(l, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    n = P.shape[0]
    m = A.shape[0]

    # one-sided rows: (normal, rhs, parent_row, side)
    rows = []
    for i in range(m):
        if np.isfinite(u[i]):
            rows.append((A[i], u[i], i, +1))
        if np.isfinite(l[i]):
            rows.append((-A[i], -l[i], i, -1))
    N = np.array([r[0] for r in rows]) if rows else np.zeros((0, n))
    b = np.array([r[1] for r in rows])

    z = np.zeros(n) if z0 is None else np.array(z0, dtype=float)
    if rows and np.any(N @ z > b + 1e-9):
        raise ValueError("active-set oracle needs a feasible start")

    work = [k for k in range(len(rows)) if abs(N[k] @ z - b[k]) < tol]
    # keep only independent rows in the working set
    for _ in range(max_iter):
        W = np.array(sorted(set(work)), dtype=int)
        nw = len(W)
        g = P @ z + q
        kkt = np.zeros((n + nw, n + nw))
        kkt[:n, :n] = P
        rhs = np.concatenate([-g, np.zeros(nw)])
        if nw:
            kkt[:n, n:] = N[W].T
            kkt[n:, :n] = N[W]
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        p = sol[:n]
        lam = sol[n:]
        if np.linalg.norm(p, np.inf) < 1e-11:
            if nw == 0 or np.all(lam >= -1e-9):
                lam_rows = np.zeros(m)
                for j, k in enumerate(W):
                    _, _, parent, side = rows[k]
                    lam_rows[parent] += side * lam[j]
                return z, lam_rows
            work.remove(W[int(np.argmin(lam))])
            continue
        alpha = 1.0
        blocking = None
        for k in range(len(rows)):
            if k in work:
                continue
            denom = N[k] @ p
            if denom > tol:
                a_k = (b[k] - N[k] @ z) / denom
                if a_k < alpha - 1e-12:
                    alpha = max(a_k, 0.0)
                    blocking = k
        z = z + alpha * p
        if blocking is not None:
            work.append(blocking)
    raise RuntimeError("active-set oracle did not converge")


# ---------------------------------------------------------------------------
# Discrete minimax game oracle for the relative Dubins problem


def dubins_game_oracle(game, dt=0.05, tol=1e-6, max_sweeps=2000):
    """Value iteration of the discretized game on the solver's grid.

    Semi-Lagrangian: V_{k+1}(x) = min(g(x), max_ue min_up V_k(x + dt f)).
    Independent of the PDE solver: interpolation via scipy on a
    periodic-padded grid, bang/coast/bang control samples.
    """
    from scipy.interpolate import RegularGridInterpolator

    spec = game.spec
    xs, ys, psis = spec.axes()
    psis_pad = np.concatenate([psis, [psis[0] + 2 * np.pi]])

    g = game.terminal().values
    pts = np.stack(
        np.meshgrid(xs, ys, psis, indexing="ij"), axis=-1
    ).reshape(-1, 3)

    ue_set = np.array([-game.w_e, 0.0, game.w_e])
    up_set = np.array([-game.w_p, 0.0, game.w_p])

    V = g.copy()
    for _ in range(max_sweeps):
        vals_pad = np.concatenate([V, V[:, :, :1]], axis=2)
        itp = RegularGridInterpolator(
            (xs, ys, psis_pad), vals_pad, method="linear", bounds_error=False, fill_value=None
        )
        best_e = None
        for ue in ue_set:
            worst_p = None
            for up in up_set:
                nxt = np.empty_like(pts)
                nxt[:, 0] = pts[:, 0] + dt * (-game.v_e + game.v_p * np.cos(pts[:, 2]) + ue * pts[:, 1])
                nxt[:, 1] = pts[:, 1] + dt * (game.v_p * np.sin(pts[:, 2]) - ue * pts[:, 0])
                nxt[:, 2] = np.mod(pts[:, 2] + dt * (up - ue) + np.pi, 2 * np.pi) - np.pi
                nxt[:, 0] = np.clip(nxt[:, 0], xs[0], xs[-1])
                nxt[:, 1] = np.clip(nxt[:, 1], ys[0], ys[-1])
                v = itp(nxt)
                worst_p = v if worst_p is None else np.minimum(worst_p, v)
            best_e = worst_p if best_e is None else np.maximum(best_e, worst_p)
        V_new = np.minimum(g, best_e.reshape(spec.shape))
        change = np.max(np.abs(V_new - V))
        V = V_new
        if change < tol:
            break
    return V


# ---------------------------------------------------------------------------
# Dense control-enumeration oracle for the 7D game Hamiltonian


def dense_hamiltonian_oracle(x_arr, p_vec, params, n=41):
    """max over an n^3 robot control lattice of min over an n^2 human lattice
    of costate . f, with f assembled row by row from the relative dynamics."""
    from safeweave.vehicle import tire_lateral_force

    xr, yr, pr, ux, uy, vh, r = x_arr
    p1, p2, p3, p4, p5, p6, p7 = p_vec
    p = params

    # human lattice, fully enumerated
    om_grid = np.linspace(-p.omega_max(vh), p.omega_max(vh), n)
    a_grid = np.linspace(-p.a_max, p.a_max, n)
    human_tensor = p3 * om_grid[:, None] + p6 * a_grid[None, :]
    human_min = human_tensor.min()

    drift = (
        p1 * (vh * np.cos(pr) - ux + yr * r)
        + p2 * (vh * np.sin(pr) - uy - xr * r)
        + p3 * (-r)
        + p4 * (p.drag_force(ux) / p.m + r * uy)
        + p5 * (-r * ux)
    )

    (ff_lo, ff_hi), (fr_lo, fr_hi) = p.axle_force_bounds()
    d_grid = np.linspace(-p.delta_max, p.delta_max, n)
    # delivered axle force saturates at the friction circle, like the plant
    ff_grid = np.clip(np.linspace(ff_lo, ff_hi, n), -p.mu * p.f_z_f, p.mu * p.f_z_f)
    fr_grid = np.clip(np.linspace(fr_lo, fr_hi, n), -p.mu * p.f_z_r, p.mu * p.f_z_r)

    alpha_f = np.arctan2(uy + p.a_cg * r, ux) - d_grid  # (n,)
    fyf = tire_lateral_force(
        alpha_f[:, None], ff_grid[None, :], p.f_z_f, p.c_alpha_f, p.mu
    )  # (n_delta, n_ff)
    alpha_r = np.arctan2(uy - p.b_cg * r, ux)
    fyr = tire_lateral_force(alpha_r, fr_grid, p.f_z_r, p.c_alpha_r, p.mu)  # (n_fr,)

    robot = (
        p4 * (ff_grid[None, :, None] + fr_grid[None, None, :]) / p.m
        + (p5 / p.m + p7 * p.a_cg / p.i_zz) * fyf[:, :, None]
        + (p5 / p.m - p7 * p.b_cg / p.i_zz) * fyr[None, None, :]
    )
    return float(drift + human_min + robot.max())
