"""Nonlocal velocity fields and their a-priori bounds.

The solver only ever sees a field through two things: point evaluations
``V[mu](x_i)`` against the current atomic state, and the constants
``c1..c4`` (sup norm, spatial Lipschitz, Wasserstein Lipschitz, gradient
Lipschitz) that enter the CFL condition and the stability estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .measures import DiscreteMeasure, Grid2D

__all__ = [
    "VelocityBounds",
    "KuramotoIdentical",
    "KuramotoNonIdentical",
    "KernelField",
    "kuramoto_drift",
    "eval_velocity_1d",
    "eval_velocity_2d",
    "check_bounds",
    "BoundsReport",
]


@dataclass(frozen=True)
class VelocityBounds:
    """Constants of the structural assumptions on V[mu]."""

    c1: float
    c2: float
    c3: float
    c4: float

    def __post_init__(self) -> None:
        vals = (self.c1, self.c2, self.c3, self.c4)
        if not all(math.isfinite(c) and c >= 0 for c in vals):
            raise ValueError(f"bounds must be finite and nonnegative, got {vals}")
        if self.c1 <= 0:
            raise ValueError("c1 must be positive (it appears in the CFL condition)")


@dataclass(frozen=True)
class KuramotoIdentical:
    """Mean-field coupling V[mu](x) = -k * integral sin(x - y) dmu(y).

    ``k = 0`` is allowed (the field vanishes identically); its sup bound
    degenerates to 0, so ``bounds`` substitutes 1 there to keep the CFL
    step well defined. Any positive value is valid for a zero field.
    """

    k: float

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError(f"coupling strength must be nonnegative, got {self.k}")

    @property
    def bounds(self) -> VelocityBounds:
        return VelocityBounds(self.k if self.k > 0 else 1.0, self.k, self.k, self.k)


@dataclass(frozen=True)
class KuramotoNonIdentical:
    """Phase/frequency coupling with natural frequencies supported in an interval.

    First component ``omega - k * integral sin(theta - theta*) dmu``, second
    component identically zero.
    """

    k: float
    omega_support: tuple[float, float]

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError(f"coupling strength must be nonnegative, got {self.k}")
        lo, hi = self.omega_support
        if not lo <= hi:
            raise ValueError(f"empty frequency support [{lo}, {hi}]")

    @property
    def bounds(self) -> VelocityBounds:
        lo, hi = self.omega_support
        c1 = self.k + max(abs(lo), abs(hi))
        return VelocityBounds(c1 if c1 > 0 else 1.0, 1.0 + self.k, self.k, self.k)


@dataclass(frozen=True)
class KernelField:
    """Generic convolution field V[mu](x) = sum_j W(x - x_j) m_j.

    Bounds are declared by the caller; they are trusted by the solver and
    spot-checked by :func:`check_bounds`.
    """

    kernel: Callable[[np.ndarray], np.ndarray]
    bounds: VelocityBounds


def kuramoto_drift(k: float, sinx: np.ndarray, cosx: np.ndarray, theta_mass: np.ndarray) -> np.ndarray:
    """Order-parameter form of the sine coupling, O(N).

    ``-k (sin x_i * C - cos x_i * S)`` with ``C = sum cos(x_j) m_j`` and
    ``S = sum sin(x_j) m_j``. Shared by the 1D and 2D evaluators and by the
    time loop, so there is exactly one copy of the formula.
    """
    c = float(cosx @ theta_mass)
    s = float(sinx @ theta_mass)
    return -k * (sinx * c - cosx * s)


def eval_velocity_1d(field, m: DiscreteMeasure) -> np.ndarray:
    """Velocity at every cell center of a 1D state.

    Kuramoto fields use the O(N) order-parameter expansion; kernel fields
    fall back to the O(N^2) direct sum.
    """
    if isinstance(m.grid, Grid2D):
        raise ValueError("eval_velocity_1d expects a 1D state")
    x = m.grid.centers()
    if isinstance(field, KuramotoIdentical):
        return kuramoto_drift(field.k, np.sin(x), np.cos(x), m.masses)
    if isinstance(field, KernelField):
        return np.asarray(field.kernel(x[:, None] - x[None, :]), dtype=float) @ m.masses
    raise TypeError(f"unsupported field for 1D evaluation: {type(field).__name__}")


def eval_velocity_2d(field: KuramotoNonIdentical, m: DiscreteMeasure):
    """Both velocity components on a tensor grid, O(#cells).

    The angular component at ``(x_i, y_j)`` is ``y_j - k (sin x_i C - cos x_i S)``
    with the order parameters summed over all cells; the frequency component
    is identically zero.
    """
    if not isinstance(field, KuramotoNonIdentical):
        raise TypeError("2D evaluation is defined for KuramotoNonIdentical fields")
    if not isinstance(m.grid, Grid2D):
        raise ValueError("eval_velocity_2d expects a 2D state")
    x = m.grid.grid_theta.centers()
    y = m.grid.grid_omega.centers()
    drift = kuramoto_drift(field.k, np.sin(x), np.cos(x), m.masses.sum(axis=1))
    v1 = drift[:, None] + y[None, :]
    return v1, np.zeros_like(v1)


@dataclass(frozen=True)
class BoundsReport:
    passed: bool
    worst_sup_ratio: float
    worst_slope_ratio: float
    messages: tuple[str, ...]


def check_bounds(field, samples) -> BoundsReport:
    """Spot-check the declared sup and Lipschitz constants on sample states.

    Verifies ``max |V_i| <= c1`` and the discrete difference quotient
    ``|V_{i+1} - V_i| / dx <= c2 * (1 + 1e-6)`` over the supplied measures.
    For 2D fields the sup check is restricted to rows with frequency inside
    the declared support (mass projected from supported data vanishes
    outside, and the sup bound only holds there), and the two directional
    quotients are checked separately.
    """
    eps = 1e-6
    bounds = field.bounds
    worst_sup = 0.0
    worst_slope = 0.0
    messages = []
    for m in samples:
        if isinstance(m.grid, Grid2D):
            v1, _ = eval_velocity_2d(field, m)
            y = m.grid.grid_omega.centers()
            lo, hi = field.omega_support
            rows = (y >= lo - 1e-12) & (y <= hi + 1e-12)
            sup = float(np.abs(v1[:, rows]).max()) if rows.any() else 0.0
            slope_theta = float(
                np.abs(np.diff(v1, axis=0, append=v1[:1, :])).max() / m.grid.dx
            )
            slope_omega = (
                float(np.abs(np.diff(v1, axis=1)).max() / m.grid.dy)
                if v1.shape[1] > 1
                else 0.0
            )
            slope = max(slope_theta, slope_omega)
        else:
            v = eval_velocity_1d(field, m)
            sup = float(np.abs(v).max())
            if m.grid.periodic:
                slope = float(np.abs(np.diff(v, append=v[:1])).max() / m.grid.dx)
            else:
                slope = float(np.abs(np.diff(v)).max() / m.grid.dx) if v.size > 1 else 0.0
        worst_sup = max(worst_sup, sup / bounds.c1)
        if bounds.c2 > 0:
            worst_slope = max(worst_slope, slope / bounds.c2)
        elif slope > 0:
            worst_slope = math.inf
    if worst_sup > 1.0:
        messages.append(
            f"sup bound violated: max |V| reaches {worst_sup:.6g} * c1 (c1={bounds.c1})"
        )
    if worst_slope > 1.0 + eps:
        messages.append(
            f"Lipschitz bound violated: difference quotient reaches "
            f"{worst_slope:.6g} * c2 (c2={bounds.c2})"
        )
    return BoundsReport(not messages, worst_sup, worst_slope, tuple(messages))
