"""Dynamic bicycle model with linear tire forces and its RK4 discretization.

The heavy lifting lives in numba kernels operating on flat float arrays:
``x`` is ``[px, py, phi, v_lon, v_lat, omega]``, ``u`` is ``[accel, steer]``
and the vehicle parameters are packed as ``VehicleParams.as_array()``. The
public wrappers accept the named tuples from :mod:`strhc.params` as well.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .params import VehicleParams, VehicleState

NX = 6
NU = 2


@njit(cache=True)
def _tire_forces(x, u, p):
    kf, kr, lf, lr, floor = p[4], p[5], p[2], p[3], p[6]
    vx = max(x[3], floor)
    ff = kf * ((x[4] + lf * x[5]) / vx - u[1])
    fr = kr * (x[4] - lr * x[5]) / vx
    return ff, fr


@njit(cache=True)
def _f(x, u, p):
    m, iz, lf, lr = p[0], p[1], p[2], p[3]
    ff, fr = _tire_forces(x, u, p)
    cphi, sphi = math.cos(x[2]), math.sin(x[2])
    cd, sd = math.cos(u[1]), math.sin(u[1])
    out = np.empty(6)
    out[0] = x[3] * cphi - x[4] * sphi
    out[1] = x[4] * cphi + x[3] * sphi
    out[2] = x[5]
    out[3] = u[0] + x[4] * x[5] - ff * sd / m
    out[4] = -x[3] * x[5] + (ff * cd + fr) / m
    out[5] = (lf * ff * cd - lr * fr) / iz
    return out


@njit(cache=True)
def _f_jac(x, u, p):
    m, iz, lf, lr, kf, kr, floor = p[0], p[1], p[2], p[3], p[4], p[5], p[6]
    phi, vlon, vlat, w = x[2], x[3], x[4], x[5]
    delta = u[1]
    if vlon > floor:
        vx = vlon
        dc = -1.0 / (vlon * vlon)
    else:
        vx = floor
        dc = 0.0
    c = 1.0 / vx
    ff = kf * ((vlat + lf * w) * c - delta)
    fr = kr * (vlat - lr * w) * c
    ff_vlon = kf * (vlat + lf * w) * dc
    ff_vlat = kf * c
    ff_w = kf * lf * c
    ff_d = -kf
    fr_vlon = kr * (vlat - lr * w) * dc
    fr_vlat = kr * c
    fr_w = -kr * lr * c
    cphi, sphi = math.cos(phi), math.sin(phi)
    cd, sd = math.cos(delta), math.sin(delta)

    A = np.zeros((6, 6))
    B = np.zeros((6, 2))
    A[0, 2] = -vlon * sphi - vlat * cphi
    A[0, 3] = cphi
    A[0, 4] = -sphi
    A[1, 2] = -vlat * sphi + vlon * cphi
    A[1, 3] = sphi
    A[1, 4] = cphi
    A[2, 5] = 1.0
    A[3, 3] = -ff_vlon * sd / m
    A[3, 4] = w - ff_vlat * sd / m
    A[3, 5] = vlat - ff_w * sd / m
    A[4, 3] = -w + (ff_vlon * cd + fr_vlon) / m
    A[4, 4] = (ff_vlat * cd + fr_vlat) / m
    A[4, 5] = -vlon + (ff_w * cd + fr_w) / m
    A[5, 3] = (lf * ff_vlon * cd - lr * fr_vlon) / iz
    A[5, 4] = (lf * ff_vlat * cd - lr * fr_vlat) / iz
    A[5, 5] = (lf * ff_w * cd - lr * fr_w) / iz
    B[3, 0] = 1.0
    B[3, 1] = -(ff_d * sd + ff * cd) / m
    B[4, 1] = (ff_d * cd - ff * sd) / m
    B[5, 1] = lf * (ff_d * cd - ff * sd) / iz
    return A, B


@njit(cache=True)
def _rk4(x, u, h, p):
    k1 = _f(x, u, p)
    k2 = _f(x + 0.5 * h * k1, u, p)
    k3 = _f(x + 0.5 * h * k2, u, p)
    k4 = _f(x + h * k3, u, p)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def _rk4_sens(x, u, h, p):
    eye = np.eye(6)
    k1 = _f(x, u, p)
    A1, B1 = _f_jac(x, u, p)
    x2 = x + 0.5 * h * k1
    k2 = _f(x2, u, p)
    A2, B2 = _f_jac(x2, u, p)
    K2x = A2 @ (eye + 0.5 * h * A1)
    K2u = A2 @ (0.5 * h * B1) + B2
    x3 = x + 0.5 * h * k2
    k3 = _f(x3, u, p)
    A3, B3 = _f_jac(x3, u, p)
    K3x = A3 @ (eye + 0.5 * h * K2x)
    K3u = A3 @ (0.5 * h * K2u) + B3
    x4 = x + h * k3
    k4 = _f(x4, u, p)
    A4, B4 = _f_jac(x4, u, p)
    K4x = A4 @ (eye + h * K3x)
    K4u = A4 @ (h * K3u) + B4
    xn = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    Ad = eye + (h / 6.0) * (A1 + 2.0 * K2x + 2.0 * K3x + K4x)
    Bd = (h / 6.0) * (B1 + 2.0 * K2u + 2.0 * K3u + K4u)
    return xn, Ad, Bd


@njit(cache=True)
def _shoot(x, u, Ts, substeps, p):
    h = Ts / substeps
    for _ in range(substeps):
        x = _rk4(x, u, h, p)
    return x


@njit(cache=True)
def _shoot_sens(x, u, Ts, substeps, p):
    h = Ts / substeps
    Ad = np.eye(6)
    Bd = np.zeros((6, 2))
    for _ in range(substeps):
        x, A, B = _rk4_sens(x, u, h, p)
        Bd = A @ Bd + B
        Ad = A @ Ad
    return x, Ad, Bd


@njit(cache=True)
def rollout(x0, U, Ts, substeps, p):
    """Forward-shoot the control sequence ``U`` (N x 2) from ``x0``; returns N+1 states."""
    n = U.shape[0]
    X = np.empty((n + 1, 6))
    X[0] = x0
    for k in range(n):
        X[k + 1] = _shoot(X[k], U[k], Ts, substeps, p)
    return X


@njit(cache=True)
def rollout_sens(x0, U, Ts, substeps, p):
    """Forward shooting plus the condensed state sensitivities.

    Returns ``X`` (N+1, 6) and ``S`` (N+1, 6, 2N) with ``S[k] = dX[k]/dvec(U)``
    where ``vec(U)`` stacks ``[a_0, delta_0, a_1, delta_1, ...]``.
    """
    n = U.shape[0]
    X = np.empty((n + 1, 6))
    S = np.zeros((n + 1, 6, 2 * n))
    X[0] = x0
    for k in range(n):
        xn, A, B = _shoot_sens(X[k], U[k], Ts, substeps, p)
        X[k + 1] = xn
        if k > 0:
            S[k + 1, :, : 2 * k] = A @ np.ascontiguousarray(S[k, :, : 2 * k])
        S[k + 1, :, 2 * k: 2 * k + 2] = B
    return X, S


def _vec(x):
    return np.ascontiguousarray(np.asarray(x, dtype=float))


def tire_forces(x, u, p: VehicleParams) -> tuple[float, float]:
    """Front and rear lateral tire forces (N) with the slip-angle denominator
    floored at ``p.v_lon_floor``."""
    ff, fr = _tire_forces(_vec(x), _vec(u), p.as_array())
    return float(ff), float(fr)


def continuous_dynamics(x, u, p: VehicleParams) -> np.ndarray:
    return _f(_vec(x), _vec(u), p.as_array())


def dynamics_jacobians(x, u, p: VehicleParams) -> tuple[np.ndarray, np.ndarray]:
    """Analytic ``(df/dx, df/du)`` of the continuous model."""
    return _f_jac(_vec(x), _vec(u), p.as_array())


def rk4_step(x, u, dt: float, p: VehicleParams) -> VehicleState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    return VehicleState(*map(float, _rk4(_vec(x), _vec(u), float(dt), p.as_array())))


def shoot_interval(x, u, Ts: float, substeps: int, p: VehicleParams) -> VehicleState:
    """Integrate one shooting interval with the control held constant.

    ``substeps`` RK4 steps of length ``Ts / substeps`` are chained.
    """
    if substeps < 1:
        raise ValueError("substeps must be at least 1")
    if not Ts > 0:
        raise ValueError("Ts must be positive")
    return VehicleState(*map(float, _shoot(_vec(x), _vec(u), float(Ts), int(substeps), p.as_array())))


def shoot_interval_sens(x, u, Ts: float, substeps: int, p: VehicleParams):
    """Like :func:`shoot_interval` but also returns the discrete Jacobians."""
    return _shoot_sens(_vec(x), _vec(u), float(Ts), int(substeps), p.as_array())
