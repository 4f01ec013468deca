"""Direct multiple shooting with a condensed Gauss-Newton SQP.

The control sequence is the only decision variable: node states are always
reconstructed by forward shooting, so the defect constraints hold to machine
precision at every iterate. Each SQP iteration linearizes the least-squares
residuals along the shot trajectory, condenses them into a dense quadratic
model over the control increments, solves that model subject to the control
box by projected Newton, and globalizes with an Armijo backtracking search on
the true objective. State bounds enter the objective as a quadratic penalty.
"""
from __future__ import annotations

import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from . import dynamics
from .params import (Bounds, ConfigError, CostWeights, OcpConfig, PlannerConfig, SafetyParams,
                     TaskSpec, VehicleParams)
from .prediction import SvPrediction
from .safety import attention_matrix, enhancement_B, enhancement_B_dh

ARMIJO = 1e-4
MAX_HALVINGS = 20


class InvalidWarmStart(ValueError):
    """The objective is not finite at the initial guess."""


@dataclass(frozen=True)
class OcpProblem:
    x0: np.ndarray
    task: TaskSpec
    predictions: tuple[SvPrediction, ...]
    vehicle: VehicleParams
    safety: SafetyParams
    weights: CostWeights
    bounds: Bounds
    ocp: OcpConfig

    @classmethod
    def build(cls, x0, predictions: Sequence[SvPrediction], cfg: PlannerConfig) -> OcpProblem:
        return cls(np.asarray(x0, dtype=float), cfg.task, tuple(predictions), cfg.vehicle,
                   cfg.safety, cfg.weights, cfg.bounds, cfg.ocp)


@dataclass
class SolveResult:
    states: np.ndarray
    controls: np.ndarray
    cost: float
    iterations: int
    converged: bool
    kkt_like_residual: float
    solve_time: float
    cost_breakdown: dict
    guess: np.ndarray = field(repr=False, default=None)
    cost_history: list = field(repr=False, default_factory=list)
    status: str = ""

    @property
    def first_control(self) -> np.ndarray:
        return self.controls[0]

    def defect_residual(self, problem: OcpProblem) -> float:
        """Max-norm of ``x[k+1] - Phi(x[k], u[k])`` over the horizon."""
        p = problem.vehicle.as_array()
        cfg = problem.ocp
        worst = 0.0
        for k in range(len(self.controls)):
            xn = dynamics._shoot(self.states[k], self.controls[k], cfg.Ts, cfg.substeps, p)
            worst = max(worst, float(np.max(np.abs(self.states[k + 1] - xn))))
        return worst


class Transcription:
    """Least-squares residual structure of one multiple-shooting problem.

    Residual blocks, in order: goal (2 per stage k = 0..N-1), safety (one per
    stage per SV), control (2 per stage) and terminal (2). The state-bound
    penalty is kept as a separate block of ``6 N`` residuals on nodes 1..N.
    """

    def __init__(self, problem: OcpProblem):
        self.problem = problem
        ocp = problem.ocp
        self.N = N = int(ocp.N)
        x0 = np.asarray(problem.x0, dtype=float)
        if x0.shape != (6,) or not np.all(np.isfinite(x0)):
            raise ConfigError("x0 must be a finite 6-vector")
        self.x0 = np.ascontiguousarray(x0)
        sp = problem.safety
        preds = problem.predictions[: sp.M]
        for pr in preds:
            if pr.states.shape != (N + 1, 4):
                raise ConfigError(
                    f"prediction for SV {pr.sv_id!r} has {pr.states.shape[0]} nodes, expected {N + 1}")
        self.n_sv = len(preds)
        self.sv_pos = (np.stack([pr.positions[:N] for pr in preds], axis=1)
                       if preds else np.zeros((N, 0, 2)))
        self.att = attention_matrix(self.n_sv, N, sp)
        self.sqrt_att = np.sqrt(self.att)
        w = problem.weights
        self.p = problem.vehicle.as_array()
        self.Ts, self.substeps = float(ocp.Ts), int(ocp.substeps)
        b = problem.bounds
        self.u_lo = np.tile(b.control_lower(), N)
        self.u_hi = np.tile(b.control_upper(), N)
        self.x_lo, self.x_hi = b.state_lower(), b.state_upper()
        self.r_u = np.tile([w.r_accel, w.r_steer], N)
        self.rho = float(ocp.rho_state)
        self.inv_a2 = 1.0 / sp.a_axis ** 2
        self.inv_b2 = 1.0 / sp.b_axis ** 2

    @property
    def residual_blocks(self) -> dict:
        N = self.N
        return {"goal": 2 * N, "safety": N * self.n_sv, "control": 2 * N, "terminal": 2}

    @property
    def n_residuals(self) -> int:
        return sum(self.residual_blocks.values())

    def rollout(self, U) -> np.ndarray:
        U = np.ascontiguousarray(np.asarray(U, dtype=float).reshape(self.N, 2))
        return dynamics.rollout(self.x0, U, self.Ts, self.substeps, self.p)

    def _barrier(self, X):
        d = X[: self.N, None, :2] - self.sv_pos
        h = d[..., 0] ** 2 * self.inv_a2 + d[..., 1] ** 2 * self.inv_b2 - 1.0
        return d, h

    def residuals(self, X, U) -> dict:
        """Residual vectors per block (the penalty block included)."""
        pr = self.problem
        w, task, sp = pr.weights, pr.task, pr.safety
        U = np.asarray(U, dtype=float).reshape(self.N, 2)
        Xs = X[: self.N]
        goal = np.stack([math.sqrt(w.q_lat) * (Xs[:, 1] - task.py_d),
                         math.sqrt(w.q_vel) * (Xs[:, 3] - task.v_d)], axis=1).ravel()
        _, h = self._barrier(X)
        H = enhancement_B(h, sp) / (sp.lam + h)
        safety = (self.sqrt_att * H).ravel()
        control = (np.sqrt([w.r_accel, w.r_steer]) * U).ravel()
        terminal = np.array([math.sqrt(w.qT_phi) * X[-1, 2], math.sqrt(w.qT_omega) * X[-1, 5]])
        viol = X[1:] - np.clip(X[1:], self.x_lo, self.x_hi)
        return {"goal": goal, "safety": safety, "control": control, "terminal": terminal,
                "penalty": math.sqrt(self.rho) * viol.ravel()}

    def breakdown(self, X, U) -> dict:
        return {k: float(r @ r) for k, r in self.residuals(X, U).items()}

    def objective_from(self, X, U) -> float:
        return float(sum(self.breakdown(X, U).values()))

    def objective(self, U) -> float:
        # trial steps may blow up the integrator; those come back as inf/nan
        with np.errstate(over="ignore", invalid="ignore"):
            return self.objective_from(self.rollout(U), U)

    def linearize(self, U):
        """Shoot, then return ``(X, f, grad, gn_hessian)`` of the objective w.r.t. ``vec(U)``."""
        pr = self.problem
        w, task, sp = pr.weights, pr.task, pr.safety
        N = self.N
        U = np.ascontiguousarray(np.asarray(U, dtype=float).reshape(N, 2))
        X, S = dynamics.rollout_sens(self.x0, U, self.Ts, self.substeps, self.p)

        gx = np.zeros((N + 1, 6))
        Qx = np.zeros((N + 1, 6, 6))
        gx[:N, 1] = w.q_lat * (X[:N, 1] - task.py_d)
        gx[:N, 3] = w.q_vel * (X[:N, 3] - task.v_d)
        Qx[:N, 1, 1] = w.q_lat
        Qx[:N, 3, 3] = w.q_vel
        if self.n_sv:
            d, h = self._barrier(X)
            den = sp.lam + h
            Bv = enhancement_B(h, sp)
            r = self.sqrt_att * Bv / den
            dH = enhancement_B_dh(h, sp) / den - Bv / den ** 2
            j = (self.sqrt_att * dH)[..., None] * np.stack(
                [2.0 * d[..., 0] * self.inv_a2, 2.0 * d[..., 1] * self.inv_b2], axis=-1)
            gx[:N, :2] += np.einsum("ki,kij->kj", r, j)
            Qx[:N, :2, :2] += np.einsum("kia,kib->kab", j, j)
        gx[N, 2] += w.qT_phi * X[N, 2]
        gx[N, 5] += w.qT_omega * X[N, 5]
        Qx[N, 2, 2] += w.qT_phi
        Qx[N, 5, 5] += w.qT_omega
        if self.rho > 0:
            viol = X[1:] - np.clip(X[1:], self.x_lo, self.x_hi)
            gx[1:] += self.rho * viol
            idx = np.arange(6)
            Qx[1:, idx, idx] += self.rho * (viol != 0.0)

        n = 2 * N
        grad = 2.0 * (np.einsum("kia,ki->a", S, gx) + self.r_u * U.ravel())
        Sf = S.reshape(-1, n)
        T = np.matmul(Qx, S).reshape(-1, n)
        hess = 2.0 * (Sf.T @ T)
        hess[np.diag_indices(n)] += 2.0 * self.r_u
        return X, self.objective_from(X, U), grad, hess


def transcribe(problem: OcpProblem) -> Transcription:
    """Residual/constraint structure of ``problem`` (validates shapes)."""
    return Transcription(problem)


def solve_box_qp(g, H, lo, hi, max_iter: int = 50, tol: float = 1e-12):
    """Minimize ``g.d + 0.5 d.H.d`` over ``lo <= d <= hi`` by projected Newton.

    ``H`` must be symmetric positive definite and ``lo <= 0 <= hi``. Variables
    sitting on a bound with the gradient pushing outward are frozen; the
    Newton step on the rest is projected back onto the box with an Armijo
    search on the quadratic model.
    """
    n = len(g)
    d = np.clip(np.zeros(n), lo, hi)

    def q(v):
        return g @ v + 0.5 * v @ (H @ v)

    qd = q(d)
    for _ in range(max_iter):
        grad = g + H @ d
        eps = 1e-12 * (1.0 + np.abs(d))
        bind = ((d <= lo + eps) & (grad > 0)) | ((d >= hi - eps) & (grad < 0))
        pg = np.where(bind, 0.0, grad)
        if np.max(np.abs(pg), initial=0.0) <= tol * (1.0 + np.max(np.abs(g))):
            break
        free = ~bind
        p = np.zeros(n)
        Hff = H[np.ix_(free, free)]
        try:
            p[free] = -cho_solve(cho_factor(Hff), grad[free])
        except LinAlgError:
            p[free] = -grad[free] / np.maximum(np.diag(Hff), 1e-12)
        alpha = 1.0
        for _ in range(40):
            dn = np.clip(d + alpha * p, lo, hi)
            qn = q(dn)
            if qn <= qd + ARMIJO * grad @ (dn - d):
                break
            alpha *= 0.5
        else:
            break
        step = dn - d
        d, qd_old, qd = dn, qd, qn
        if np.max(np.abs(step)) <= 1e-14 * (1.0 + np.max(np.abs(d))) or qd_old - qd <= 1e-15 * abs(qd_old):
            break
    return d


def sqp_solve(problem: OcpProblem, guess, max_iters: int) -> SolveResult:
    """Gauss-Newton SQP from the control sequence ``guess`` (N x 2).

    Stops on a small control step, a small relative cost decrease or after
    ``max_iters`` iterations, or early when the linearization is not finite.
    The returned iterate is always the best one found; ``converged`` reports whether a tolerance was met.
    """
    t0 = time.perf_counter()
    tr = Transcription(problem)
    cfg = problem.ocp
    N = tr.N
    guess = np.asarray(guess, dtype=float)
    if guess.shape != (N, 2):
        raise ConfigError(f"guess must have shape ({N}, 2), got {guess.shape}")
    u = np.clip(guess.ravel(), tr.u_lo, tr.u_hi)
    f = tr.objective(u)
    if not math.isfinite(f):
        raise InvalidWarmStart("invalid warm start: objective is not finite at the guess")

    history = [f]
    converged = False
    status = "max_iters"
    step_norm = math.inf
    iters = 0
    for _ in range(max_iters):
        with np.errstate(over="ignore", invalid="ignore"):
            _, f_lin, grad, hess = tr.linearize(u)
        if not (np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
            # sensitivities overflow when the RK4 step is unstable along the
            # iterate (very low speed makes the tire modes stiff)
            status = "linearization_failed"
            break
        d = solve_box_qp(grad, hess, tr.u_lo - u, tr.u_hi - u)
        slope = float(grad @ d)
        if np.linalg.norm(d) < cfg.step_tol:
            step_norm = float(np.linalg.norm(d))
            converged, status = True, "step_tol"
            break
        alpha = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            un = np.clip(u + alpha * d, tr.u_lo, tr.u_hi)
            fn = tr.objective(un)
            if math.isfinite(fn) and fn <= f + ARMIJO * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            status = "line_search_failed"
            break
        step_norm = float(np.linalg.norm(un - u))
        decrease = f - fn
        u, f = un, fn
        history.append(f)
        iters += 1
        if step_norm < cfg.step_tol:
            converged, status = True, "step_tol"
            break
        if decrease <= cfg.cost_tol * max(1.0, abs(history[-2])):
            converged, status = True, "cost_tol"
            break

    U = u.reshape(N, 2)
    X = tr.rollout(U)
    return SolveResult(states=X, controls=U.copy(), cost=f, iterations=iters,
                       converged=converged, kkt_like_residual=step_norm,
                       solve_time=time.perf_counter() - t0,
                       cost_breakdown=tr.breakdown(X, U), guess=guess.copy(),
                       cost_history=history, status=status)


def warm_start_shift(prev: SolveResult) -> np.ndarray:
    """Drop the applied control and repeat the last one."""
    U = np.asarray(prev.controls)
    return np.vstack([U[1:], U[-1:]])


def zero_guess(N: int) -> np.ndarray:
    return np.zeros((N, 2))


def numeric_gradient(problem: OcpProblem, point, step: float = 1e-6) -> np.ndarray:
    tr = Transcription(problem)
    u = np.asarray(point, dtype=float).ravel()
    g = np.empty_like(u)
    for i in range(len(u)):
        e = np.zeros_like(u)
        e[i] = step
        g[i] = (tr.objective(u + e) - tr.objective(u - e)) / (2 * step)
    return g


def gradient_check(problem: OcpProblem, point, step: float = 1e-6) -> float:
    """Relative error between the condensed analytic gradient and central differences.

    Meaningful only away from the enhancement-function kink and from active
    state bounds.
    """
    tr = Transcription(problem)
    _, _, g, _ = tr.linearize(point)
    g_fd = numeric_gradient(problem, point, step)
    return float(np.linalg.norm(g - g_fd) / max(np.linalg.norm(g_fd), 1e-300))
