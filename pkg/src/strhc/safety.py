"""Spatiotemporal safety barrier.

An axis-aligned ellipse centred on the ego vehicle defines the barrier
``h = (dx/a)^2 + (dy/b)^2 - 1``; ``h < 0`` means a surrounding vehicle is inside.
The enhancement function ``B`` is a smooth step that is ~2 below the margin
``c`` and ~0 above it, the spatial kernel is ``H = B / (lam + h)``, and each
vehicle's squared kernel is weighted by ``w_i * exp(-k / gamma)``.

All functions broadcast over numpy arrays.
"""
from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from .params import SafetyParams


def barrier_h(ev_pos, sv_pos, sp: SafetyParams):
    ev_pos = np.asarray(ev_pos, dtype=float)
    sv_pos = np.asarray(sv_pos, dtype=float)
    d = ev_pos[..., :2] - sv_pos[..., :2]
    return (d[..., 0] / sp.a_axis) ** 2 + (d[..., 1] / sp.b_axis) ** 2 - 1.0


def enhancement_B(h, sp: SafetyParams):
    d = np.asarray(h, dtype=float) - sp.c
    return 1.0 - d / (sp.eta + np.abs(d))


def enhancement_B_dh(h, sp: SafetyParams):
    d = np.asarray(h, dtype=float) - sp.c
    return -sp.eta / (sp.eta + np.abs(d)) ** 2


def spatial_H_of_h(h, sp: SafetyParams):
    h = np.asarray(h, dtype=float)
    return enhancement_B(h, sp) / (sp.lam + h)


def spatial_H_dh(h, sp: SafetyParams):
    h = np.asarray(h, dtype=float)
    den = sp.lam + h
    return enhancement_B_dh(h, sp) / den - enhancement_B(h, sp) / den ** 2


def spatial_H(ev, sv, sp: SafetyParams):
    """Spatial safety kernel between the ego state ``ev`` and an SV state ``sv``.

    Only the positions are used (first two entries of each).
    """
    return spatial_H_of_h(barrier_h(ev, sv, sp), sp)


def attention_weight(i: int, t, sp: SafetyParams):
    """Temporal attention ``w_i * exp(-t / gamma)`` for the 1-based SV index ``i``."""
    if not 1 <= i <= sp.M:
        raise IndexError(f"SV index {i} outside 1..{sp.M}")
    w = sp.weight_vector()[i - 1]
    return w * np.exp(-np.asarray(t, dtype=float) / sp.gamma)


def attention_matrix(n_sv: int, n_steps: int, sp: SafetyParams) -> np.ndarray:
    """Attention weights for steps ``0..n_steps-1`` and the first ``n_sv`` SVs, shape (n_steps, n_sv)."""
    w = sp.weight_vector()[:n_sv]
    decay = np.exp(-np.arange(n_steps) / sp.gamma)
    return decay[:, None] * w[None, :]


def safety_cost(ev, svs: Sequence, t, sp: SafetyParams) -> float:
    """Attention-weighted sum of squared spatial kernels at prediction step ``t``.

    SVs past index ``M`` are ignored; fewer than ``M`` simply contribute less.
    """
    svs = list(svs)[: sp.M]
    if not svs:
        return 0.0
    H = spatial_H(np.asarray(ev, dtype=float)[None, :2],
                  np.asarray([s[:2] for s in svs], dtype=float), sp)
    w = sp.weight_vector()[: len(svs)]
    return float(np.exp(-t / sp.gamma) * np.sum(w * H ** 2))


def min_barrier(ev, svs: Sequence, sp: SafetyParams) -> float:
    svs = list(svs)
    if not svs:
        raise ValueError("no vehicles")
    h = barrier_h(np.asarray(ev, dtype=float)[None, :2],
                  np.asarray([s[:2] for s in svs], dtype=float), sp)
    return float(np.min(h))


def near_kink(h, sp: SafetyParams, width: float = 10.0) -> bool:
    """True when any barrier value sits within ``width * eta`` of the margin ``c``."""
    return bool(np.any(np.abs(np.asarray(h) - sp.c) < width * sp.eta))


NO_VEHICLE_H = math.inf
