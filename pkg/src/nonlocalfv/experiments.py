"""Canned initial data, mesh-refinement studies, and error/EOC tables.

The built-in data are the four benchmark configurations: a parabolic bump,
a piecewise-constant profile, a singular mixture with two atoms on a
plateau, and a separable polynomial on the cylinder. A study solves one
configuration on a ladder of meshes plus a pinned reference mesh and
tabulates distances to the reference at the final time: 1-Wasserstein on
the atomic (cell-mass) representations, L1 on the piecewise-constant
density representations over the nested common refinement.

Time steps follow the stability bound for the velocity class. 1D studies
resolve it against the measured velocity each step ("velocity" policy);
the 2D study uses the a-priori constant c1 ("bounds" policy), whose
sup-norm slack over the buffered frequency band costs accuracy only in
the diffusion constant, not the rate.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, replace
from typing import Callable, Mapping

import numpy as np

from .measures import (
    Grid1D,
    Grid2D,
    InitialDatum,
    cell_averages,
    l1_distance_nested,
    wasserstein1_torus,
)
from .scheme import SchemeConfig, run_to_time
from .velocity import KernelField, KuramotoIdentical, KuramotoNonIdentical

BUILTIN_NAMES = ("parabolic1d", "piecewise_constant1d", "singular1d", "polynomial2d")

_HALF_PI = math.pi / 2
_METRICS = ("w1", "l1")


def _parabolic_density(theta):
    theta = np.asarray(theta, dtype=float)
    inside = (theta >= _HALF_PI) & (theta <= 3 * _HALF_PI)
    bump = (6.0 / math.pi**3) * (3 * _HALF_PI - theta) * (theta - _HALF_PI)
    return np.where(inside, bump, 0.0)


def _piecewise_constant_density(theta):
    theta = np.asarray(theta, dtype=float)
    inside = (theta >= _HALF_PI) & (theta < 3 * _HALF_PI)
    return np.where(inside, 2.0 / (3.0 * math.pi), 1.0 / (3.0 * math.pi))


def _plateau_density(theta):
    theta = np.asarray(theta, dtype=float)
    inside = (theta >= _HALF_PI) & (theta <= 3 * _HALF_PI)
    return np.where(inside, 1.0 / (2.0 * math.pi), 0.0)


_POLY_SCALE = 64.0 / (3.0 * math.pi**2)


def _poly_theta_factor(theta):
    theta = np.asarray(theta, dtype=float)
    inside = (theta >= math.pi / 4) & (theta < _HALF_PI)
    return np.where(inside, _POLY_SCALE * theta, 0.0)


def _poly_omega_factor(omega):
    omega = np.asarray(omega, dtype=float)
    inside = (omega >= 0.0) & (omega <= 1.0)
    return np.where(inside, omega, 0.0)


def _poly_density(theta, omega):
    return _poly_theta_factor(theta) * _poly_omega_factor(omega)


def _verify_unit_mass(name: str, datum: InitialDatum) -> None:
    total = sum(m for _, m in datum.atoms)
    if datum.density is not None:
        if datum.factors is not None:
            grid = Grid2D(Grid1D.torus(64), Grid1D.line(64, -0.5, 1.5))
            part = cell_averages(
                datum.density, grid, datum.breakpoints, datum.breakpoints_omega
            )
        else:
            part = cell_averages(datum.density, Grid1D.torus(64), datum.breakpoints)
        total += part.as_measure().total_mass()
    if abs(total - 1.0) > 1e-10:
        raise ValueError(f"datum {name!r} has mass {total!r}, expected 1")


def builtin_datum(name: str):
    """Return ``(InitialDatum, velocity field)`` for a named benchmark.

    Valid names are listed in ``BUILTIN_NAMES``. The three 1D data live on
    the torus [0, 2pi) and come with an identical-oscillator field at
    coupling 1; ``polynomial2d`` is supported on [pi/4, pi/2) x [0, 1] and
    pairs with the non-identical field whose frequency support is [0, 1].
    Total mass is verified to be 1 (to 1e-10) before returning.
    """
    if name == "parabolic1d":
        datum = InitialDatum(
            density=_parabolic_density, breakpoints=(_HALF_PI, 3 * _HALF_PI)
        )
        field = KuramotoIdentical(k=1.0)
    elif name == "piecewise_constant1d":
        datum = InitialDatum(
            density=_piecewise_constant_density, breakpoints=(_HALF_PI, 3 * _HALF_PI)
        )
        field = KuramotoIdentical(k=1.0)
    elif name == "singular1d":
        datum = InitialDatum(
            atoms=((3 * math.pi / 4, 0.25), (5 * math.pi / 4, 0.25)),
            density=_plateau_density,
            breakpoints=(_HALF_PI, 3 * _HALF_PI),
        )
        field = KuramotoIdentical(k=1.0)
    elif name == "polynomial2d":
        datum = InitialDatum(
            density=_poly_density,
            breakpoints=(math.pi / 4, _HALF_PI),
            breakpoints_omega=(0.0, 1.0),
            factors=(_poly_theta_factor, _poly_omega_factor),
        )
        field = KuramotoNonIdentical(k=1.0, omega_support=(0.0, 1.0))
    else:
        raise ValueError(
            f"unknown datum {name!r}; valid names: {', '.join(BUILTIN_NAMES)}"
        )
    _verify_unit_mass(name, datum)
    return datum, field


@dataclass(frozen=True)
class ExperimentSpec:
    """One refinement study: datum, field, mesh ladder, and comparison setup.

    ``reference_n`` must be a multiple of every entry of ``resolutions`` so
    densities nest. ``metrics`` is a subset of {"w1", "l1"}; "w1" requires
    1D data. ``dt_policy``, ``mode`` and ``boundary_defect_tol`` are passed
    through to the scheme configuration; ``omega_range`` is the frequency
    window of the 2D grid (the datum support needs interior margin).
    """

    name: str
    datum: InitialDatum
    field: KuramotoIdentical | KuramotoNonIdentical | KernelField
    resolutions: tuple
    reference_n: int
    t_final: float
    cfl_number: float
    metrics: tuple = ("w1", "l1")
    mode: str = "measure"
    dt_policy: str = "velocity"
    boundary_defect_tol: float = 1e-8
    omega_range: tuple = (-0.5, 1.5)

    def __post_init__(self):
        res = tuple(int(n) for n in self.resolutions)
        if not res or any(n < 2 for n in res):
            raise ValueError("resolutions must be a nonempty list of integers >= 2")
        if tuple(sorted(set(res))) != res:
            raise ValueError("resolutions must be strictly increasing")
        object.__setattr__(self, "resolutions", res)
        object.__setattr__(self, "metrics", tuple(self.metrics))
        ref = int(self.reference_n)
        object.__setattr__(self, "reference_n", ref)
        for n in res:
            if ref % n:
                raise ValueError(f"reference_n={ref} is not a multiple of N={n}")
        if not (self.t_final > 0 and math.isfinite(self.t_final)):
            raise ValueError("t_final must be positive")
        for m in self.metrics:
            if m not in _METRICS:
                raise ValueError(f"unknown metric {m!r}, expected subset of {_METRICS}")
        if len(set(self.metrics)) != len(self.metrics):
            raise ValueError("metrics must not repeat")
        if self.is_2d and "w1" in self.metrics:
            raise ValueError("the w1 metric is only computed for 1D experiments")

    @property
    def is_2d(self) -> bool:
        return isinstance(self.field, KuramotoNonIdentical)


@dataclass(frozen=True)
class ErrorRow:
    n: int
    errors: Mapping[str, float]
    eoc: Mapping[str, float | None]


@dataclass(frozen=True)
class ErrorTable:
    """Rows ordered by N; ``eoc`` of the first row is the undefined marker."""

    metrics: tuple
    rows: tuple
    reference_n: int
    complete: bool = True


class StudyAborted(RuntimeError):
    """A resolution failed; ``partial`` holds whatever rows did complete."""

    def __init__(self, message: str, partial: ErrorTable):
        super().__init__(message)
        self.partial = partial


def eoc(e_coarse: float, e_fine: float):
    """log2 error ratio under mesh halving; None when undefined.

    Zero or negative errors make the order undefined (reference-vs-self
    comparisons produce exact zeros); tables render the marker as a blank
    field rather than failing.
    """
    if e_coarse <= 0 or e_fine <= 0:
        return None
    return math.log2(e_coarse / e_fine)


def _grid_for(spec: ExperimentSpec, n: int):
    if spec.is_2d:
        lo, hi = spec.omega_range
        return Grid2D(Grid1D.torus(n), Grid1D.line(n, lo, hi))
    return Grid1D.torus(n)


def _solve(spec: ExperimentSpec, n: int):
    cfg = SchemeConfig(
        cfl_number=spec.cfl_number,
        t_final=spec.t_final,
        variant="unstaggered2d" if spec.is_2d else "unstaggered1d",
        mode=spec.mode,
        dt_policy=spec.dt_policy,
        boundary_defect_tol=spec.boundary_defect_tol,
    )
    record = run_to_time(spec.datum, spec.field, cfg, _grid_for(spec, n), tv_stride=0)
    return record.final_state


def _assemble(spec: ExperimentSpec, states: dict, complete: bool) -> ErrorTable:
    reference = states.get(spec.reference_n)
    ref_density = reference.as_density() if reference is not None else None
    rows = []
    previous = {}
    for n in spec.resolutions:
        if reference is None:
            break
        if n not in states:
            continue
        errors = {}
        if "w1" in spec.metrics:
            errors["w1"] = wasserstein1_torus(states[n], reference)
        if "l1" in spec.metrics:
            errors["l1"] = l1_distance_nested(states[n].as_density(), ref_density)
        orders = {
            m: eoc(previous[m], errors[m]) if m in previous else None
            for m in spec.metrics
        }
        rows.append(ErrorRow(n=n, errors=errors, eoc=orders))
        previous = errors
    return ErrorTable(
        metrics=spec.metrics,
        rows=tuple(rows),
        reference_n=spec.reference_n,
        complete=complete,
    )


def run_convergence_study(
    spec: ExperimentSpec,
    *,
    max_workers: int | None = None,
    progress: Callable[[int, float], None] | None = None,
) -> ErrorTable:
    """Solve at every resolution and the reference, tabulate errors and EOC.

    1D resolutions run concurrently in a thread pool (the array kernels
    drop the interpreter lock); the 2D study runs sequentially because the
    compiled kernel's threading layer is not re-entrant. A solver failure
    at any resolution aborts the study with ``StudyAborted`` carrying the
    rows that were already comparable.

    ``progress``, when given, is called as ``progress(n, seconds)`` after
    each completed solve.
    """
    jobs = sorted(set(spec.resolutions) | {spec.reference_n})
    if max_workers is None:
        max_workers = 1 if spec.is_2d else min(len(jobs), os.cpu_count() or 1)
    states: dict = {}
    failures: dict = {}

    def timed_solve(n):
        t0 = time.perf_counter()
        return _solve(spec, n), time.perf_counter() - t0

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {pool.submit(timed_solve, n): n for n in jobs}
        for future in as_completed(futures):
            n = futures[future]
            try:
                states[n], elapsed = future.result()
            except Exception as exc:  # noqa: BLE001 - flagged, not swallowed
                failures[n] = exc
                continue
            if progress is not None:
                progress(n, elapsed)
    if failures:
        n_bad = min(failures)
        table = _assemble(spec, states, complete=False)
        raise StudyAborted(
            f"resolution {n_bad} failed: {failures[n_bad]}", table
        ) from failures[n_bad]
    return _assemble(spec, states, complete=True)


def _with_coupling(field, k: float):
    if isinstance(field, KuramotoNonIdentical):
        return KuramotoNonIdentical(k=k, omega_support=field.omega_support)
    return KuramotoIdentical(k=k)


def preset(name: str, **overrides) -> ExperimentSpec:
    """Build the shipped study configuration for a built-in datum.

    1D presets: meshes 32..512, reference 4096, T=0.5, CFL 0.4, both
    metrics, velocity-resolved time steps. The 2D preset: meshes 32..1024
    per dimension, reference 4096, L1 only, a-priori time steps, and a
    relaxed boundary-defect tolerance (the frequency buffer absorbs a few
    percent of mass on the coarsest meshes before converging away).

    ``coupling_k`` rescales the field; other keyword overrides replace the
    corresponding ``ExperimentSpec`` fields.
    """
    datum, field = builtin_datum(name)
    coupling_k = overrides.pop("coupling_k", None)
    if coupling_k is not None:
        field = _with_coupling(field, coupling_k)
    if name == "polynomial2d":
        spec = ExperimentSpec(
            name=name,
            datum=datum,
            field=field,
            resolutions=(32, 64, 128, 256, 512, 1024),
            reference_n=4096,
            t_final=0.5,
            cfl_number=0.4,
            metrics=("l1",),
            dt_policy="bounds",
            boundary_defect_tol=0.05,
        )
    else:
        spec = ExperimentSpec(
            name=name,
            datum=datum,
            field=field,
            resolutions=(32, 64, 128, 256, 512),
            reference_n=4096,
            t_final=0.5,
            cfl_number=0.4,
        )
    return replace(spec, **overrides) if overrides else spec
