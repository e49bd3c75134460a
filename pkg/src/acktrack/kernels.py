"""Hot numeric kernels.

Everything here is plain scalar/array math so it compiles under numba's
``@njit`` (see :mod:`acktrack.accel`); with ``ACKTRACK_NUMBA=0`` the same
functions run as ordinary Python.  Public modules wrap these in friendlier
signatures; nothing in this file validates inputs.
"""

import math

import numpy as np

from .accel import njit


@njit(cache=True)
def wrap_angle(a):
    """Wrap an angle to (-pi, pi]."""
    w = (a + math.pi) % (2.0 * math.pi)
    if w == 0.0:
        return math.pi
    return w - math.pi


@njit(cache=True)
def _clamp(x, lo, hi):
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


# ---------------------------------------------------------------------------
# Kinematic bicycle: state (x, y, theta, delta), inputs (v, delta_dot)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _kin_rhs(theta, delta, v, delta_dot, wheelbase, delta_max):
    d = _clamp(delta, -delta_max, delta_max)
    return (
        v * math.cos(theta),
        v * math.sin(theta),
        v * math.tan(d) / wheelbase,
        delta_dot,
    )


@njit(cache=True)
def kinematic_step(x, y, theta, delta, v, delta_dot, dt, wheelbase, delta_max, use_rk4):
    if use_rk4:
        k1 = _kin_rhs(theta, delta, v, delta_dot, wheelbase, delta_max)
        k2 = _kin_rhs(theta + 0.5 * dt * k1[2], delta + 0.5 * dt * k1[3],
                      v, delta_dot, wheelbase, delta_max)
        k3 = _kin_rhs(theta + 0.5 * dt * k2[2], delta + 0.5 * dt * k2[3],
                      v, delta_dot, wheelbase, delta_max)
        k4 = _kin_rhs(theta + dt * k3[2], delta + dt * k3[3],
                      v, delta_dot, wheelbase, delta_max)
        x += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        y += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        theta += dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        delta += dt / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
    else:
        k1 = _kin_rhs(theta, delta, v, delta_dot, wheelbase, delta_max)
        x += dt * k1[0]
        y += dt * k1[1]
        theta += dt * k1[2]
        delta += dt * k1[3]
    return x, y, wrap_angle(theta), _clamp(delta, -delta_max, delta_max)


@njit(cache=True)
def kinematic_rollout(x, y, theta, delta, v, delta_dot, dt, n_steps,
                      wheelbase, delta_max, use_rk4):
    """Integrate many steps with constant inputs; used by tests and benchmarks."""
    for _ in range(n_steps):
        x, y, theta, delta = kinematic_step(
            x, y, theta, delta, v, delta_dot, dt, wheelbase, delta_max, use_rk4)
    return x, y, theta, delta


# ---------------------------------------------------------------------------
# Dynamic bicycle: lateral states (v_y, omega_z) under the 2x2 linear model,
# pose advanced with the full planar velocity.  Matrix entries are
# precomputed by the caller (they depend on params and v_x).
# ---------------------------------------------------------------------------


@njit(cache=True)
def _dyn_rhs(theta, v_y, omega_z, v_x, delta,
             a11, a12, a21, a22, b1, b2):
    vy_dot = a11 * v_y + a12 * omega_z + b1 * delta
    wz_dot = a21 * v_y + a22 * omega_z + b2 * delta
    x_dot = v_x * math.cos(theta) - v_y * math.sin(theta)
    y_dot = v_x * math.sin(theta) + v_y * math.cos(theta)
    return x_dot, y_dot, omega_z, vy_dot, wz_dot


@njit(cache=True)
def dynamic_step(x, y, theta, v_y, omega_z, v_x, delta, dt,
                 a11, a12, a21, a22, b1, b2, use_rk4):
    if use_rk4:
        k1 = _dyn_rhs(theta, v_y, omega_z, v_x, delta, a11, a12, a21, a22, b1, b2)
        k2 = _dyn_rhs(theta + 0.5 * dt * k1[2], v_y + 0.5 * dt * k1[3],
                      omega_z + 0.5 * dt * k1[4], v_x, delta,
                      a11, a12, a21, a22, b1, b2)
        k3 = _dyn_rhs(theta + 0.5 * dt * k2[2], v_y + 0.5 * dt * k2[3],
                      omega_z + 0.5 * dt * k2[4], v_x, delta,
                      a11, a12, a21, a22, b1, b2)
        k4 = _dyn_rhs(theta + dt * k3[2], v_y + dt * k3[3],
                      omega_z + dt * k3[4], v_x, delta,
                      a11, a12, a21, a22, b1, b2)
        x += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        y += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        theta += dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        v_y += dt / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
        omega_z += dt / 6.0 * (k1[4] + 2.0 * k2[4] + 2.0 * k3[4] + k4[4])
    else:
        k1 = _dyn_rhs(theta, v_y, omega_z, v_x, delta, a11, a12, a21, a22, b1, b2)
        x += dt * k1[0]
        y += dt * k1[1]
        theta += dt * k1[2]
        v_y += dt * k1[3]
        omega_z += dt * k1[4]
    return x, y, wrap_angle(theta), v_y, omega_z


# ---------------------------------------------------------------------------
# Path-frame error dynamics: xdot = A x + B delta + C omega_p (4-state)
# ---------------------------------------------------------------------------


@njit(cache=True)
def path_frame_step(state, A, B, C, delta, omega_p, dt, use_rk4):
    if use_rk4:
        k1 = np.dot(A, state) + B * delta + C * omega_p
        k2 = np.dot(A, state + 0.5 * dt * k1) + B * delta + C * omega_p
        k3 = np.dot(A, state + 0.5 * dt * k2) + B * delta + C * omega_p
        k4 = np.dot(A, state + dt * k3) + B * delta + C * omega_p
        out = state + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        out = state + dt * (np.dot(A, state) + B * delta + C * omega_p)
    out[2] = wrap_angle(out[2])
    return out


# ---------------------------------------------------------------------------
# MPC: kinematic rollout in the vehicle frame against a cubic path fit,
# quadratic cost, projected gradient descent with backtracking line search.
# State per step: (x, y, theta, cte, psi); v is constant over the horizon.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _poly3(c, x):
    return c[0] + x * (c[1] + x * (c[2] + x * c[3]))


@njit(cache=True)
def _poly3_d1(c, x):
    return c[1] + x * (2.0 * c[2] + x * 3.0 * c[3])


@njit(cache=True)
def _poly3_d2(c, x):
    return 2.0 * c[2] + 6.0 * c[3] * x


@njit(cache=True)
def mpc_rollout(u, coeffs, state0, v, wheelbase, dt):
    """Roll the prediction model forward; returns (traj, cost_state_part).

    ``traj`` has one row per horizon step (including the initial state) with
    columns (x, y, theta, cte, psi).
    """
    n = u.shape[0] + 1
    traj = np.empty((n, 5))
    traj[0, :] = state0
    for k in range(n - 1):
        x = traj[k, 0]
        y = traj[k, 1]
        th = traj[k, 2]
        psi = traj[k, 4]
        traj[k + 1, 0] = x + v * math.cos(th) * dt
        traj[k + 1, 1] = y + v * math.sin(th) * dt
        traj[k + 1, 2] = th + (v / wheelbase) * u[k] * dt
        traj[k + 1, 3] = _poly3(coeffs, x) - y + v * math.sin(psi) * dt
        traj[k + 1, 4] = th - math.atan(_poly3_d1(coeffs, x)) + (v / wheelbase) * u[k] * dt
    return traj


@njit(cache=True)
def mpc_cost(u, coeffs, state0, v, wheelbase, dt,
             w_cte, w_psi, w_delta, w_ddelta):
    traj = mpc_rollout(u, coeffs, state0, v, wheelbase, dt)
    n = u.shape[0] + 1
    j = 0.0
    for k in range(1, n):
        j += w_cte * traj[k, 3] ** 2 + w_psi * traj[k, 4] ** 2
    for k in range(n - 1):
        j += w_delta * u[k] ** 2
    for k in range(1, n - 1):
        j += w_ddelta * (u[k] - u[k - 1]) ** 2
    return j


@njit(cache=True)
def mpc_grad(u, coeffs, state0, v, wheelbase, dt,
             w_cte, w_psi, w_delta, w_ddelta):
    """Analytic cost gradient by reverse accumulation through the rollout."""
    traj = mpc_rollout(u, coeffs, state0, v, wheelbase, dt)
    n_u = u.shape[0]
    grad = np.zeros(n_u)
    # Adjoint lam = dJ/d(state_k), seeded at the last step and pulled back.
    lam = np.zeros(5)
    k_state = n_u  # index of final state
    lam[3] = 2.0 * w_cte * traj[k_state, 3]
    lam[4] = 2.0 * w_psi * traj[k_state, 4]
    for k in range(n_u - 1, -1, -1):
        # Input channel: theta' and psi' both carry (v/L)*dt per unit input.
        grad[k] = (lam[2] + lam[4]) * (v / wheelbase) * dt
        grad[k] += 2.0 * w_delta * u[k]
        if k >= 1:
            grad[k] += 2.0 * w_ddelta * (u[k] - u[k - 1])
        if k <= n_u - 2:
            grad[k] -= 2.0 * w_ddelta * (u[k + 1] - u[k])
        # Pull the adjoint through the transition s_k -> s_{k+1}.
        x = traj[k, 0]
        th = traj[k, 2]
        psi = traj[k, 4]
        d1 = _poly3_d1(coeffs, x)
        new = np.zeros(5)
        new[0] = lam[0] + lam[3] * d1 - lam[4] * _poly3_d2(coeffs, x) / (1.0 + d1 * d1)
        new[1] = lam[1] - lam[3]
        new[2] = (lam[0] * (-v * math.sin(th) * dt)
                  + lam[1] * (v * math.cos(th) * dt)
                  + lam[2] + lam[4])
        new[3] = 0.0
        new[4] = lam[3] * v * math.cos(psi) * dt
        if k >= 1:
            new[3] += 2.0 * w_cte * traj[k, 3]
            new[4] += 2.0 * w_psi * traj[k, 4]
        lam = new
    return grad


@njit(cache=True)
def mpc_solve_pgd(u0, coeffs, state0, v, wheelbase, dt,
                  w_cte, w_psi, w_delta, w_ddelta,
                  bound, max_iter, tol):
    """Projected gradient descent with backtracking; cost never increases.

    Returns (u, cost, iterations, converged).
    """
    n_u = u0.shape[0]
    u = np.empty(n_u)
    for i in range(n_u):
        u[i] = _clamp(u0[i], -bound, bound)
    cost = mpc_cost(u, coeffs, state0, v, wheelbase, dt,
                    w_cte, w_psi, w_delta, w_ddelta)
    alpha = 1.0e-3
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        g = mpc_grad(u, coeffs, state0, v, wheelbase, dt,
                     w_cte, w_psi, w_delta, w_ddelta)
        step = alpha
        accepted = False
        new_cost = cost
        u_new = u
        for _ in range(40):
            cand = np.empty(n_u)
            for i in range(n_u):
                cand[i] = _clamp(u[i] - step * g[i], -bound, bound)
            decrease = 0.0
            for i in range(n_u):
                decrease += g[i] * (u[i] - cand[i])
            c = mpc_cost(cand, coeffs, state0, v, wheelbase, dt,
                         w_cte, w_psi, w_delta, w_ddelta)
            if c <= cost - 1.0e-4 * decrease and c <= cost:
                u_new = cand
                new_cost = c
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # No descent direction left at the smallest step: stationary.
            converged = True
            break
        if step == alpha:
            alpha *= 2.0
        else:
            alpha = step
        improvement = cost - new_cost
        u = u_new
        cost = new_cost
        if improvement <= tol * (1.0 + abs(cost)):
            converged = True
            break
    return u, cost, it, converged


# ---------------------------------------------------------------------------
# Planar EKF on (x, y, theta): unicycle dead-reckoning prediction from wheel
# speed + yaw rate, heading pseudo-measurement updates.
# ---------------------------------------------------------------------------


@njit(cache=True)
def ekf_predict_kernel(mean, cov, v, omega, dt, q_xy, q_theta):
    st = math.sin(mean[2])
    ct = math.cos(mean[2])
    mean[0] += v * ct * dt
    mean[1] += v * st * dt
    mean[2] = wrap_angle(mean[2] + omega * dt)
    # F = [[1,0,-v*st*dt],[0,1,v*ct*dt],[0,0,1]]; P <- F P F^T + Q*dt
    f02 = -v * st * dt
    f12 = v * ct * dt
    p00 = cov[0, 0] + f02 * (cov[2, 0] + cov[0, 2]) + f02 * f02 * cov[2, 2]
    p01 = cov[0, 1] + f02 * cov[2, 1] + f12 * cov[0, 2] + f02 * f12 * cov[2, 2]
    p02 = cov[0, 2] + f02 * cov[2, 2]
    p11 = cov[1, 1] + f12 * (cov[2, 1] + cov[1, 2]) + f12 * f12 * cov[2, 2]
    p12 = cov[1, 2] + f12 * cov[2, 2]
    p22 = cov[2, 2]
    cov[0, 0] = p00 + q_xy * dt
    cov[0, 1] = p01
    cov[0, 2] = p02
    cov[1, 0] = p01
    cov[1, 1] = p11 + q_xy * dt
    cov[1, 2] = p12
    cov[2, 0] = p02
    cov[2, 1] = p12
    cov[2, 2] = p22 + q_theta * dt


@njit(cache=True)
def ekf_update_heading_kernel(mean, cov, z, r):
    s = cov[2, 2] + r
    k0 = cov[0, 2] / s
    k1 = cov[1, 2] / s
    k2 = cov[2, 2] / s
    nu = wrap_angle(z - mean[2])
    mean[0] += k0 * nu
    mean[1] += k1 * nu
    mean[2] = wrap_angle(mean[2] + k2 * nu)
    # Joseph form keeps the covariance PSD: P <- (I-KH) P (I-KH)^T + K r K^T
    a02 = -k0
    a12 = -k1
    a22 = 1.0 - k2
    p00 = cov[0, 0] + a02 * (cov[2, 0] + cov[0, 2]) + a02 * a02 * cov[2, 2]
    p01 = cov[0, 1] + a02 * cov[2, 1] + a12 * cov[0, 2] + a02 * a12 * cov[2, 2]
    p02 = a22 * (cov[0, 2] + a02 * cov[2, 2])
    p11 = cov[1, 1] + a12 * (cov[2, 1] + cov[1, 2]) + a12 * a12 * cov[2, 2]
    p12 = a22 * (cov[1, 2] + a12 * cov[2, 2])
    p22 = a22 * a22 * cov[2, 2]
    cov[0, 0] = p00 + k0 * k0 * r
    cov[0, 1] = p01 + k0 * k1 * r
    cov[0, 2] = p02 + k0 * k2 * r
    cov[1, 0] = cov[0, 1]
    cov[1, 1] = p11 + k1 * k1 * r
    cov[1, 2] = p12 + k1 * k2 * r
    cov[2, 0] = cov[0, 2]
    cov[2, 1] = cov[1, 2]
    cov[2, 2] = p22 + k2 * k2 * r


@njit(cache=True)
def ekf_chain(mean0, cov0, v_arr, w_arr, dt, q_xy, q_theta,
              z_arr, z_step, r_heading):
    """Run predict steps with periodic heading updates.

    ``z_arr[i]`` is applied after predict step k when k == z_step*i.  Returns
    (means, var_diag, min_minor) where min_minor is the smallest normalized
    leading principal minor of the covariance seen anywhere in the chain.
    """
    n = v_arr.shape[0]
    means = np.empty((n + 1, 3))
    var_diag = np.empty((n + 1, 3))
    mean = mean0.copy()
    cov = cov0.copy()
    means[0, :] = mean
    var_diag[0, 0] = cov[0, 0]
    var_diag[0, 1] = cov[1, 1]
    var_diag[0, 2] = cov[2, 2]
    min_minor = np.inf
    n_z = z_arr.shape[0]
    zi = 0
    for k in range(n):
        ekf_predict_kernel(mean, cov, v_arr[k], w_arr[k], dt, q_xy, q_theta)
        if z_step > 0 and zi < n_z and (k + 1) % z_step == 0:
            ekf_update_heading_kernel(mean, cov, z_arr[zi], r_heading)
            zi += 1
        m1 = cov[0, 0]
        m2 = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
        m3 = (cov[0, 0] * (cov[1, 1] * cov[2, 2] - cov[1, 2] * cov[2, 1])
              - cov[0, 1] * (cov[1, 0] * cov[2, 2] - cov[1, 2] * cov[2, 0])
              + cov[0, 2] * (cov[1, 0] * cov[2, 1] - cov[1, 1] * cov[2, 0]))
        scale = cov[0, 0] + cov[1, 1] + cov[2, 2]
        if scale > 0.0:
            m1n = m1 / scale
            m2n = m2 / (scale * scale)
            m3n = m3 / (scale * scale * scale)
            if m1n < min_minor:
                min_minor = m1n
            if m2n < min_minor:
                min_minor = m2n
            if m3n < min_minor:
                min_minor = m3n
        means[k + 1, :] = mean
        var_diag[k + 1, 0] = cov[0, 0]
        var_diag[k + 1, 1] = cov[1, 1]
        var_diag[k + 1, 2] = cov[2, 2]
    return means, var_diag, min_minor
