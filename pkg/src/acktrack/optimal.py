"""LQR synthesis (ZOH discretization, iterative DARE, curvature feedforward)
and linear MPC (kinematic prediction model, quadratic error cost, projected
gradient descent with box constraints).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .course import Course, nearest_point
from .errors import DareConvergenceError, DomainError, EndOfCourse
from .models import (PathFrameState, SimState, VehicleParams,
                     path_frame_matrices)


@dataclass(frozen=True)
class LateralLtiModel:
    """Continuous path-frame error model xdot = A x + B delta + C omega_p."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    v_x: float


def build_lateral_matrices(params: VehicleParams, v_x: float) -> LateralLtiModel:
    """Fill the 4-state error-system matrices for a given speed."""
    A, B, C = path_frame_matrices(params, v_x)
    if not np.all(np.isfinite(A)):
        raise DomainError("non-finite entries in lateral model")
    return LateralLtiModel(A, B, C, v_x)


def expm(M: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring of the Taylor series."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    norm = np.max(np.sum(np.abs(M), axis=1))
    squarings = 0
    if norm > 0.5:
        squarings = int(math.ceil(math.log2(norm / 0.5)))
    A = M / (2.0 ** squarings)
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 40):
        term = term @ A / k
        result = result + term
        if np.max(np.abs(term)) < 1e-18:
            break
    for _ in range(squarings):
        result = result @ result
    return result


def discretize_zoh(A: np.ndarray, B: np.ndarray, dt: float):
    """Zero-order-hold discretization via the augmented-matrix exponential."""
    if dt <= 0.0:
        raise DomainError("dt must be positive")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    b2d = B.reshape(A.shape[0], -1)
    n, m = A.shape[0], b2d.shape[1]
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = A * dt
    aug[:n, n:] = b2d * dt
    big = expm(aug)
    A_d = big[:n, :n]
    B_d = big[:n, n:]
    return A_d, B_d.reshape(B.shape)


def solve_dare(A_d, B_d, Q, R, max_iter: int = 500, tol: float = 1e-8):
    """Fixed-point iteration for the discrete algebraic Riccati equation.

    Iterates P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA from P0 = Q until the
    max-abs change drops below tol; returns (P, G) with
    G = (R + B'PB)^-1 B'PA.  Raises DareConvergenceError otherwise.
    """
    A = np.atleast_2d(np.asarray(A_d, dtype=float))
    B = np.asarray(B_d, dtype=float).reshape(A.shape[0], -1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if not np.allclose(Q, Q.T):
        raise DomainError("Q must be symmetric")
    if not np.allclose(R, R.T) or np.any(np.linalg.eigvalsh(R) <= 0.0):
        raise DomainError("R must be symmetric positive definite")
    P = Q.copy()
    residual = math.inf
    for it in range(1, max_iter + 1):
        BtP = B.T @ P
        S = R + BtP @ B
        G = np.linalg.solve(S, BtP @ A)
        P_new = Q + A.T @ P @ (A - B @ G)
        P_new = 0.5 * (P_new + P_new.T)
        residual = float(np.max(np.abs(P_new - P)))
        P = P_new
        if residual < tol:
            BtP = B.T @ P
            G = np.linalg.solve(R + BtP @ B, BtP @ A)
            return P, G
    raise DareConvergenceError(
        f"DARE iteration residual {residual:.3e} > tol {tol:.1e} "
        f"after {max_iter} iterations", residual, max_iter)


@dataclass(frozen=True)
class LqrConfig:
    q1: float = 1.0
    q2: float = 0.0
    q3: float = 0.0
    q4: float = 0.0
    q_u: float = 1.0
    dt: float = 0.02
    max_iter: int = 500
    tol: float = 1e-8
    # "simple" adds L*kappa; "full" also cancels the understeer and
    # steady-heading residuals so the steady cross-track error vanishes;
    # "none" disables the term.
    feedforward: str = "full"

    def __post_init__(self):
        if min(self.q1, self.q2, self.q3, self.q4) < 0.0 or self.q_u <= 0.0:
            raise DomainError("state weights must be >= 0 and Q_u > 0")
        if self.feedforward not in ("none", "simple", "full"):
            raise DomainError(f"unknown feedforward mode {self.feedforward!r}")


def synthesize_lqr_gain(params: VehicleParams, v_x: float, cfg: LqrConfig):
    """Discretize the lateral model at v_x and solve the DARE; returns the
    1x4 feedback gain as a flat array."""
    model = build_lateral_matrices(params, v_x)
    A_d, B_d = discretize_zoh(model.A, model.B, cfg.dt)
    Q = np.diag([cfg.q1, cfg.q2, cfg.q3, cfg.q4])
    R = np.array([[cfg.q_u]])
    _, G = solve_dare(A_d, B_d.reshape(4, 1), Q, R, cfg.max_iter, cfg.tol)
    return G.reshape(4)


def steady_heading_error(params: VehicleParams, v_x: float, kappa: float) -> float:
    """Path-frame heading error at steady cornering: the rear axle runs
    slip-free at low speed, so the nose points outward by about l_r*kappa."""
    return kappa * (-params.l_r
                    + params.l_f * params.mass * v_x ** 2
                    / (params.c_r * params.wheelbase))


def full_feedforward(params: VehicleParams, v_x: float, kappa: float,
                     gain: np.ndarray) -> float:
    """Steering feedforward that cancels the whole curvature residual.

    L*kappa alone leaves two steady offsets: the understeer-gradient term
    and the gain-weighted steady heading error that the feedback would
    otherwise convert into cross-track error.
    """
    lf, lr, cf, cr = params.l_f, params.l_r, params.c_f, params.c_r
    understeer = (params.mass * v_x ** 2 * kappa * (lr * cr - lf * cf)
                  / (cf * cr * params.wheelbase))
    return (params.wheelbase * kappa + understeer
            + float(gain[2]) * steady_heading_error(params, v_x, kappa))


def lqr_steering(path_state: PathFrameState, gain: np.ndarray, kappa: float,
                 params: VehicleParams, feedforward: str = "simple",
                 v_x: float | None = None) -> float:
    """delta = -G x + feedforward.

    The "simple" mode adds L*kappa; "full" (needs v_x) cancels the complete
    curvature residual so the steady cross-track error is zero.
    """
    delta = -float(np.dot(gain, path_state.as_array()))
    if feedforward == "simple":
        delta += params.wheelbase * kappa
    elif feedforward == "full":
        if v_x is None:
            raise DomainError("full feedforward needs v_x")
        delta += full_feedforward(params, v_x, kappa, gain)
    elif feedforward != "none":
        raise DomainError(f"unknown feedforward mode {feedforward!r}")
    return params.clamp_delta(delta)


# ---------------------------------------------------------------------------
# MPC
# ---------------------------------------------------------------------------


def fit_path_local(course: Course, pose, window: float = 20.0,
                   hint: int | None = None) -> np.ndarray:
    """Least-squares cubic y = f(x) over nearby path points in the vehicle
    frame, with the window centered ahead of the pose.

    Returns ascending coefficients (c0, c1, c2, c3).  Raises EndOfCourse when
    fewer than 4 points remain in the window.
    """
    x, y, theta = pose
    _, near = nearest_point(course, (x, y), hint)
    spacing = course.nominal_spacing
    n_back = int(round(0.2 * window / spacing))
    n_fwd = int(round(0.8 * window / spacing))
    if course.closed:
        idxs = (near + np.arange(-n_back, n_fwd + 1)) % course.n
    else:
        idxs = np.arange(max(0, near - n_back), min(course.n, near + n_fwd + 1))
        if near + 4 > course.n:
            raise EndOfCourse("not enough path ahead to fit")
    if len(idxs) < 4:
        raise EndOfCourse("not enough path points in window")
    dx = course.xs[idxs] - x
    dy = course.ys[idxs] - y
    ct, st = math.cos(theta), math.sin(theta)
    xl = ct * dx + st * dy
    yl = -st * dx + ct * dy
    V = np.vander(xl, 4, increasing=True)
    coeffs, *_ = np.linalg.lstsq(V, yl, rcond=None)
    return coeffs


@dataclass(frozen=True)
class MpcConfig:
    n_horizon: int = 10          # prediction steps
    dt: float = 0.1
    w_cte: float = 2000.0
    w_psi: float = 2000.0
    w_delta: float = 5.0
    w_ddelta: float = 200.0
    delta_bound: float = 0.436
    max_iter: int = 100
    tol: float = 1e-6
    fit_window: float = 20.0

    def __post_init__(self):
        if self.n_horizon < 2:
            raise DomainError("horizon must be at least 2 steps")
        if min(self.w_cte, self.w_psi, self.w_delta, self.w_ddelta) < 0.0:
            raise DomainError("weights must be non-negative")
        if self.delta_bound <= 0.0:
            raise DomainError("delta bound must be positive")


@dataclass(frozen=True)
class MpcSolution:
    deltas: np.ndarray       # length N-1
    states: np.ndarray       # (N, 6): x, y, theta, v, cte, psi
    cost: float
    iterations: int
    converged: bool


def mpc_initial_state(coeffs: np.ndarray) -> np.ndarray:
    """Vehicle-frame initial state (x, y, theta, cte, psi) against the fit."""
    cte0 = float(coeffs[0])
    psi0 = -math.atan(float(coeffs[1]))
    return np.array([0.0, 0.0, 0.0, cte0, psi0])


def mpc_solve(cfg: MpcConfig, state: SimState, coeffs: np.ndarray,
              params: VehicleParams, warm_start: np.ndarray | None = None) -> MpcSolution:
    """Minimize the tracking cost over the steering sequence.

    The rollout model and cost run in the vehicle frame against the local
    cubic fit; the caller applies only deltas[0].  A non-converged solve
    still returns the best iterate, flagged.
    """
    if state.v_x <= 0.0:
        raise DomainError("MPC prediction needs v_x > 0")
    coeffs = np.asarray(coeffs, dtype=float)
    n_u = cfg.n_horizon - 1
    if warm_start is not None and len(warm_start) == n_u:
        u0 = np.concatenate((warm_start[1:], warm_start[-1:]))
    else:
        u0 = np.zeros(n_u)
    state0 = mpc_initial_state(coeffs)
    bound = min(cfg.delta_bound, params.delta_max)
    u, cost, iters, converged = kernels.mpc_solve_pgd(
        u0, coeffs, state0, state.v_x, params.wheelbase, cfg.dt,
        cfg.w_cte, cfg.w_psi, cfg.w_delta, cfg.w_ddelta,
        bound, cfg.max_iter, cfg.tol)
    traj = kernels.mpc_rollout(u, coeffs, state0, state.v_x,
                               params.wheelbase, cfg.dt)
    states = np.empty((cfg.n_horizon, 6))
    states[:, [0, 1, 2]] = traj[:, [0, 1, 2]]
    states[:, 3] = state.v_x
    states[:, [4, 5]] = traj[:, [3, 4]]
    return MpcSolution(u, states, float(cost), int(iters), bool(converged))
