"""Exact-solution oracle for atomic initial data.

A finite collection of atoms evolves under the coupled ODE system
``dx_i/dt = V[mu](x_i)`` with the empirical measure itself as ``mu``; for
atomic data this IS the measure-valued solution, so an accurately
integrated particle system serves as ground truth for the grid scheme.
Positions are kept unwrapped while integrating (the field is periodic, so
wrapping changes nothing dynamically and would put jumps into the
trajectories) and wrapped when a system is constructed or returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import DiscreteMeasure, Grid2D, wasserstein1_line, wasserstein1_torus
from .velocity import KernelField, KuramotoIdentical, KuramotoNonIdentical, kuramoto_drift

__all__ = ["ParticleSystem", "particle_rhs", "rk4_run", "compare_to_grid"]

TWO_PI = 2.0 * np.pi


def _wrap(positions: np.ndarray) -> np.ndarray:
    out = np.array(positions, dtype=float)
    if out.ndim == 2:
        out[:, 0] = np.mod(out[:, 0], TWO_PI)
    else:
        out = np.mod(out, TWO_PI)
    return out


@dataclass(frozen=True)
class ParticleSystem:
    """Atoms ``sum_i masses[i] * delta(positions[i])`` moving in a field.

    Positions are scalars (angle) or ``(angle, frequency)`` rows; angles are
    stored wrapped to [0, 2*pi). Masses are positive and sum to one.
    """

    positions: np.ndarray
    masses: np.ndarray
    field: object

    def __post_init__(self) -> None:
        pos = _wrap(np.atleast_1d(np.asarray(self.positions, dtype=float)))
        w = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if pos.ndim not in (1, 2) or (pos.ndim == 2 and pos.shape[1] != 2):
            raise ValueError(f"positions must be (M,) or (M, 2), got shape {pos.shape}")
        if w.shape != (pos.shape[0],):
            raise ValueError("masses must be one scalar per particle")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(w))):
            raise ValueError("positions and masses must be finite")
        if w.size == 0 or w.min() <= 0.0:
            raise ValueError("masses must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"masses must sum to 1, got {w.sum()!r}")
        if pos.ndim == 2 and not isinstance(self.field, KuramotoNonIdentical):
            raise ValueError("2D particles require a KuramotoNonIdentical field")
        if pos.ndim == 1 and isinstance(self.field, KuramotoNonIdentical):
            raise ValueError("KuramotoNonIdentical particles carry (angle, frequency) pairs")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "masses", w)


def _rhs(positions: np.ndarray, masses: np.ndarray, field) -> np.ndarray:
    if positions.ndim == 2:
        theta = positions[:, 0]
        drift = kuramoto_drift(field.k, np.sin(theta), np.cos(theta), masses)
        out = np.zeros_like(positions)
        out[:, 0] = positions[:, 1] + drift
        return out
    if isinstance(field, KuramotoIdentical):
        return kuramoto_drift(field.k, np.sin(positions), np.cos(positions), masses)
    if isinstance(field, KernelField):
        return np.asarray(
            field.kernel(positions[:, None] - positions[None, :]), dtype=float
        ) @ masses
    raise TypeError(f"unsupported field for particles: {type(field).__name__}")


def particle_rhs(ps: ParticleSystem) -> np.ndarray:
    """Velocity of each particle under its own empirical measure."""
    return _rhs(ps.positions, ps.masses, ps.field)


def rk4_run(ps: ParticleSystem, t_final: float, dt: float) -> ParticleSystem:
    """Classical Runge-Kutta integration to ``t_final``, final step clamped.

    Requires ``dt <= 0.1 / c2`` so that the step resolves the Lipschitz
    scale of the field by a comfortable margin.
    """
    if not t_final >= 0.0:
        raise ValueError(f"t_final must be >= 0, got {t_final}")
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    c2 = ps.field.bounds.c2
    if c2 > 0.0 and dt > 0.1 / c2 * (1.0 + 1e-12):
        raise ValueError(f"dt={dt:.6g} exceeds the oracle ceiling 0.1/c2 = {0.1 / c2:.6g}")
    y = np.array(ps.positions, dtype=float)
    w = ps.masses
    t = 0.0
    while t < t_final - 1e-14 * max(1.0, t_final):
        step = min(dt, t_final - t)
        k1 = _rhs(y, w, ps.field)
        k2 = _rhs(y + 0.5 * step * k1, w, ps.field)
        k3 = _rhs(y + 0.5 * step * k2, w, ps.field)
        k4 = _rhs(y + step * k3, w, ps.field)
        y = y + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += step
    return ParticleSystem(y, w, ps.field)


def compare_to_grid(ps_final: ParticleSystem, grid_solution: DiscreteMeasure) -> float:
    """W1 distance between the particle empirical measure and a grid state."""
    if ps_final.positions.ndim != 1 or isinstance(grid_solution.grid, Grid2D):
        raise ValueError("grid comparison is provided in one dimension")
    atoms = (ps_final.positions, ps_final.masses)
    if grid_solution.grid.periodic:
        return wasserstein1_torus(atoms, grid_solution)
    return wasserstein1_line(atoms, grid_solution)
