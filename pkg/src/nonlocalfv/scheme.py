"""Lax-Friedrichs steppers and the time-loop driver.

Three variants of the explicit update are provided: the unstaggered 1D
scheme, its staggered cousin (output cells sit between input cells, so the
grid shifts by half a cell each step), and the unstaggered 2D scheme on a
tensor grid that is periodic in the angle and truncated in the frequency.
All three are written as convex combinations of neighbour masses, so under
the CFL condition every output mass is a nonnegative combination of
nonnegative inputs and positivity holds exactly, not just approximately.

Time steps come in two policies. ``bounds`` uses the uniform step
``cfl_number * h / c1`` derived from the declared velocity bound and keeps
it fixed for the whole run. ``velocity`` re-evaluates ``max |V[mu^n]|``
every step and divides by that instead, which takes visibly larger steps
whenever the state has relaxed below its worst case. Both shorten the final
step to land exactly on ``t_final``; a shorter step never violates CFL.

The driver records per-step diagnostics (mass, minimum mass, total
variation, cumulative mass lost over truncated boundaries) and snapshots at
requested times, interpolating linearly between the two bracketing steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .measures import (
    DiscreteMeasure,
    Grid1D,
    Grid2D,
    GridDensity,
    InitialDatum,
    TimeInterpolant,
    cell_averages,
    interpolate_in_time,
    project_hat,
    total_variation,
)
from .velocity import (
    KuramotoNonIdentical,
    VelocityBounds,
    eval_velocity_1d,
    eval_velocity_2d,
    kuramoto_drift,
)

__all__ = [
    "SchemeConfig",
    "RunRecord",
    "SpaceTimeTestFunction",
    "CFLViolationError",
    "BoundaryLeakError",
    "cfl_dt",
    "lxf_step_unstaggered_1d",
    "lxf_step_staggered_1d",
    "lxf_step_2d",
    "run_to_time",
    "weak_residual",
]

_VARIANTS = ("unstaggered1d", "staggered1d", "unstaggered2d")
_MODES = ("measure", "density")
_DT_POLICIES = ("bounds", "velocity")

# Slack on realized-CFL checks: admits the half-ulp rounding of dt * vmax / dx
# without admitting any actually unstable step.
_CFL_SLACK = 1.0 + 1e-12


class CFLViolationError(RuntimeError):
    """A step was attempted outside the stability region of its stencil."""


class BoundaryLeakError(RuntimeError):
    """Mass lost over a truncated boundary exceeded the configured tolerance."""


@dataclass(frozen=True)
class SchemeConfig:
    """Parameters of one run.

    ``cfl_number`` is the fraction of the stability limit actually used; the
    unstaggered 1D stencil tolerates up to 1, the staggered and 2D stencils
    up to 1/2. ``lambda0`` is the promised lower bound on the mesh ratio
    dt/dx; it is checked against the nominal step at run start. ``dt_policy``
    selects the uniform step ("bounds") or the per-step adaptive one
    ("velocity"). ``boundary_defect_tol`` aborts a run once the cumulative
    relative mass loss over truncated boundaries exceeds it.
    """

    cfl_number: float
    t_final: float
    variant: str = "unstaggered1d"
    mode: str = "measure"
    lambda0: float = 1e-6
    dt_policy: str = "bounds"
    boundary_defect_tol: float = 1e-8

    def __post_init__(self) -> None:
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {_VARIANTS}")
        if self.mode not in _MODES:
            raise ValueError(f"unknown mode {self.mode!r}, expected one of {_MODES}")
        if self.dt_policy not in _DT_POLICIES:
            raise ValueError(
                f"unknown dt_policy {self.dt_policy!r}, expected one of {_DT_POLICIES}"
            )
        limit = 1.0 if self.variant == "unstaggered1d" else 0.5
        if not 0.0 < self.cfl_number <= limit:
            raise ValueError(
                f"cfl_number must lie in (0, {limit}] for variant {self.variant!r}, "
                f"got {self.cfl_number}"
            )
        if not (math.isfinite(self.t_final) and self.t_final >= 0.0):
            raise ValueError(f"t_final must be finite and >= 0, got {self.t_final}")
        if not (math.isfinite(self.lambda0) and self.lambda0 > 0.0):
            raise ValueError(f"lambda0 must be positive, got {self.lambda0}")
        if not (math.isfinite(self.boundary_defect_tol) and self.boundary_defect_tol > 0.0):
            raise ValueError(
                f"boundary_defect_tol must be positive, got {self.boundary_defect_tol}"
            )


@dataclass(frozen=True)
class RunRecord:
    """Everything a run leaves behind.

    ``snapshots`` holds ``(time, state)`` pairs at the requested times.
    The remaining arrays are aligned with steps: entry ``n`` describes the
    state after step ``n+1``. ``tv`` is NaN on steps where total-variation
    tracking was skipped. ``boundary_defect`` is the cumulative mass lost
    over truncated boundaries up to and including that step. ``history``,
    present only when requested, stores ``(t, state, velocity, dt)`` at the
    start of every step for the weak-residual diagnostic.
    """

    snapshots: tuple
    step_times: np.ndarray
    step_sizes: np.ndarray
    mass: np.ndarray
    min_mass: np.ndarray
    tv: np.ndarray
    boundary_defect: np.ndarray
    final_state: DiscreteMeasure
    final_time: float
    history: tuple | None = None

    def __post_init__(self) -> None:
        n = self.step_times.size
        for name in ("step_sizes", "mass", "min_mass", "tv", "boundary_defect"):
            if getattr(self, name).size != n:
                raise ValueError(f"diagnostic array {name!r} not aligned with steps")
        if n and np.any(np.diff(self.step_times) <= 0.0):
            raise ValueError("step times must be strictly increasing")
        times = [t for t, _ in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot times must be strictly increasing")


def cfl_dt(cfg: SchemeConfig, grid: Grid1D | Grid2D, bounds: VelocityBounds) -> float:
    """Uniform step ``cfl_number * h / c1`` with h the smallest cell width.

    The variant-specific ceilings (1 for unstaggered 1D, 1/2 for staggered
    and 2D) are enforced by ``SchemeConfig`` itself, so the returned step
    always satisfies ``dt * c1 / h <= cfl_number``.
    """
    if isinstance(grid, Grid2D):
        if cfg.variant != "unstaggered2d":
            raise ValueError(f"variant {cfg.variant!r} does not apply to a 2D grid")
        h = min(grid.dx, grid.dy)
    else:
        if cfg.variant == "unstaggered2d":
            raise ValueError("variant 'unstaggered2d' requires a 2D grid")
        h = grid.dx
    return cfg.cfl_number * h / bounds.c1


def _coeff(base: float, signed: np.ndarray) -> np.ndarray:
    # Convex-combination weights; the floor only acts within rounding error
    # of the CFL boundary and keeps positivity exact there.
    return np.maximum(0.0, base + signed)


def lxf_step_unstaggered_1d(
    m: DiscreteMeasure, v: np.ndarray, dt: float, dx: float
) -> DiscreteMeasure:
    """One unstaggered step.

    Written in donor form: cell i sends ``m_i (1 + lam v_i)/2`` to its right
    neighbour and ``m_i (1 - lam v_i)/2`` to its left one, which is the
    average-minus-flux-difference update rearranged as a convex combination.
    Periodic grids wrap; line grids use zero ghost cells, so mass reaching
    the outermost cells leaks (the driver sizes a buffer to prevent that).
    """
    if isinstance(m.grid, Grid2D):
        raise ValueError("1D stepper got a 2D state")
    v = np.asarray(v, dtype=float)
    lam = dt / dx
    vmax = float(np.abs(v).max()) if v.size else 0.0
    if lam * vmax > _CFL_SLACK:
        raise CFLViolationError(
            f"dt*max|v|/dx = {lam * vmax:.6g} exceeds 1 (dt={dt:.6g}, dx={dx:.6g})"
        )
    to_right = m.masses * _coeff(0.5, (0.5 * lam) * v)
    to_left = m.masses * _coeff(0.5, -(0.5 * lam) * v)
    if m.grid.periodic:
        out = np.roll(to_right, 1) + np.roll(to_left, -1)
    else:
        out = np.zeros_like(m.masses)
        out[1:] += to_right[:-1]
        out[:-1] += to_left[1:]
    return DiscreteMeasure(m.grid, out)


def lxf_step_staggered_1d(
    m: DiscreteMeasure, v: np.ndarray, dt: float, dx: float
) -> DiscreteMeasure:
    """One staggered step; the output lives on the grid shifted by dx/2.

    Output cell between input cells i and i+1 receives
    ``m_i (1/2 + lam v_i) + m_{i+1} (1/2 - lam v_{i+1})``, so the stability
    ceiling is ``lam |v| <= 1/2``. Only periodic grids are supported.
    """
    if isinstance(m.grid, Grid2D):
        raise ValueError("1D stepper got a 2D state")
    if not m.grid.periodic:
        raise ValueError("the staggered stepper is implemented on the torus only")
    v = np.asarray(v, dtype=float)
    lam = dt / dx
    vmax = float(np.abs(v).max()) if v.size else 0.0
    if lam * vmax > 0.5 * _CFL_SLACK:
        raise CFLViolationError(
            f"dt*max|v|/dx = {lam * vmax:.6g} exceeds the staggered ceiling 1/2"
        )
    from_left = m.masses * _coeff(0.5, lam * v)
    from_right = m.masses * _coeff(0.5, -lam * v)
    out = from_left + np.roll(from_right, -1)
    half = 0.5 * dx
    shifted = Grid1D(m.grid.n_cells, m.grid.x_min + half, m.grid.x_max + half, periodic=True)
    return DiscreteMeasure(shifted, out)


def lxf_step_2d(
    m: DiscreteMeasure,
    v1: np.ndarray,
    v2: np.ndarray,
    dt: float,
    dx: float,
    dy: float,
) -> DiscreteMeasure:
    """One unstaggered 2D step (quarter-average plus directional fluxes).

    Periodic axes wrap; truncated axes use zero ghost cells, so mass in the
    outermost cells can leave the domain (the driver monitors that defect).
    Stability requires ``dt max|v1|/dx <= 1/2`` and ``dt max|v2|/dy <= 1/2``.
    """
    grid = m.grid
    if not isinstance(grid, Grid2D):
        raise ValueError("2D stepper got a 1D state")
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    lam_x = dt / dx
    lam_y = dt / dy
    vmax_x = float(np.abs(v1).max()) if v1.size else 0.0
    vmax_y = float(np.abs(v2).max()) if v2.size else 0.0
    if lam_x * vmax_x > 0.5 * _CFL_SLACK or lam_y * vmax_y > 0.5 * _CFL_SLACK:
        raise CFLViolationError(
            f"2D CFL violated: dt*max|v1|/dx = {lam_x * vmax_x:.6g}, "
            f"dt*max|v2|/dy = {lam_y * vmax_y:.6g}, ceiling 1/2"
        )
    to_right = m.masses * _coeff(0.25, (0.5 * lam_x) * v1)
    to_left = m.masses * _coeff(0.25, -(0.5 * lam_x) * v1)
    to_up = m.masses * _coeff(0.25, (0.5 * lam_y) * v2)
    to_down = m.masses * _coeff(0.25, -(0.5 * lam_y) * v2)
    out = np.roll(to_right, 1, axis=0) + np.roll(to_left, -1, axis=0)
    if grid.grid_omega.periodic:
        out += np.roll(to_up, 1, axis=1) + np.roll(to_down, -1, axis=1)
    else:
        out[:, 1:] += to_up[:, :-1]
        out[:, :-1] += to_down[:, 1:]
    return DiscreteMeasure(grid, out)


@dataclass(frozen=True)
class SpaceTimeTestFunction:
    """Smooth compactly supported phi(x, t) with explicit first derivatives."""

    value: Callable
    time_derivative: Callable
    space_derivative: Callable


def weak_residual(record: RunRecord, test_fn: SpaceTimeTestFunction) -> float:
    """Discrete residual of the distributional form of the equation.

    Returns ``|sum_n dt^n sum_i m_i^n (phi_t + V_i^n phi_x)(x_i, t^n)
    + sum_i m_i^0 phi(x_i, 0)|``, which vanishes at first order in the mesh
    for exact solutions when phi vanishes at the final time. Requires a
    record produced with ``keep_history=True``.
    """
    if record.history is None:
        raise ValueError("weak_residual needs a record produced with keep_history=True")
    t0, state0, _, _ = record.history[0]
    if isinstance(state0.grid, Grid2D):
        raise ValueError("the weak-residual diagnostic is implemented for 1D records")
    total = float(state0.masses @ np.asarray(test_fn.value(state0.grid.centers(), t0)))
    for t_n, state, v, dt_n in record.history:
        x = state.grid.centers()
        integrand = np.asarray(test_fn.time_derivative(x, t_n)) + v * np.asarray(
            test_fn.space_derivative(x, t_n)
        )
        total += dt_n * float(state.masses @ integrand)
    return abs(total)


def _buffered_line_grid(grid: Grid1D, n_buffer: int) -> Grid1D:
    if n_buffer == 0:
        return grid
    dx = grid.dx
    return Grid1D(
        grid.n_cells + 2 * n_buffer,
        grid.x_min - n_buffer * dx,
        grid.x_max + n_buffer * dx,
        periodic=False,
    )


def _project(datum: InitialDatum, grid: Grid1D | Grid2D, mode: str) -> DiscreteMeasure:
    if mode == "measure":
        return project_hat(datum, grid)
    if datum.atoms:
        raise ValueError("density mode requires a purely absolutely continuous datum")
    dens = cell_averages(datum.density, grid, datum.breakpoints, datum.breakpoints_omega)
    return dens.as_measure()


def run_to_time(
    datum: InitialDatum,
    field,
    cfg: SchemeConfig,
    grid: Grid1D | Grid2D,
    snapshot_times: Sequence[float] = (),
    *,
    keep_history: bool = False,
    tv_stride: int = 1,
) -> RunRecord:
    """Project the datum onto the grid and advance it to ``cfg.t_final``.

    Snapshots are recorded at the requested times, linearly interpolated
    between the bracketing steps where necessary. ``tv_stride`` thins out
    the total-variation diagnostic (0 disables it), which matters on large
    2D grids where it would dominate the runtime. Line domains in 1D are
    widened by one ghost-buffer cell per prospective step so that no mass
    reaches the boundary; the returned states live on the widened grid.
    """
    bounds = field.bounds
    is_2d = isinstance(grid, Grid2D)
    snap = np.unique(np.asarray(list(snapshot_times), dtype=float))
    eps_t = 1e-12 * max(1.0, cfg.t_final)
    if snap.size and (snap[0] < -eps_t or snap[-1] > cfg.t_final + eps_t):
        raise ValueError("snapshot times must lie within [0, t_final]")

    work_grid = grid
    if is_2d:
        if cfg.variant != "unstaggered2d":
            raise ValueError(f"variant {cfg.variant!r} does not apply to a 2D grid")
    else:
        if cfg.variant == "unstaggered2d":
            raise ValueError("variant 'unstaggered2d' requires a 2D grid")
        if not grid.periodic:
            if cfg.variant == "staggered1d":
                raise ValueError("the staggered variant is implemented on the torus only")
            if cfg.t_final > 0.0:
                n_buffer = int(math.ceil(cfg.t_final / cfl_dt(cfg, grid, bounds)))
                work_grid = _buffered_line_grid(grid, n_buffer)

    state = _project(datum, work_grid, cfg.mode)

    dt_static = cfl_dt(cfg, work_grid, bounds)
    dx = work_grid.dx
    if cfg.lambda0 > (dt_static / dx) * (1.0 + 1e-12):
        raise ValueError(
            f"lambda0={cfg.lambda0:.6g} exceeds the nominal mesh ratio "
            f"dt/dx={dt_static / dx:.6g}"
        )

    if is_2d:
        if not isinstance(field, KuramotoNonIdentical):
            raise TypeError("2D runs require a KuramotoNonIdentical field")
        theta = work_grid.grid_theta.centers()
        y = work_grid.grid_omega.centers()
        sin_theta, cos_theta = np.sin(theta), np.cos(theta)
        dy = work_grid.dy
        h = min(dx, dy)
        from . import _kernels  # deferred: 1D runs never pay the jit import

        kernel = _kernels.kuramoto_lxf_2d
        cur = state.masses
        theta_mass = cur.sum(axis=1)
        buf = np.empty_like(cur)
        row_sum = np.empty(cur.shape[0])
        row_min = np.empty(cur.shape[0])
        # The two grid buffers may only alternate when no intermediate state
        # can be retained outside the loop.
        reuse_buffers = not keep_history and snap.size == 0
    else:
        h = dx

    snapshots: list[tuple[float, DiscreteMeasure]] = []
    snap_idx = 0
    while snap_idx < snap.size and snap[snap_idx] <= eps_t:
        snapshots.append((float(snap[snap_idx]), state))
        snap_idx += 1

    step_times: list[float] = []
    step_sizes: list[float] = []
    mass_arr: list[float] = []
    min_arr: list[float] = []
    tv_arr: list[float] = []
    defect_arr: list[float] = []
    history: list | None = [] if keep_history else None

    total0 = state.total_mass()
    prev_mass = total0
    cum_defect = 0.0
    t = 0.0
    step_idx = 0

    while t < cfg.t_final - eps_t:
        if is_2d:
            drift = kuramoto_drift(field.k, sin_theta, cos_theta, theta_mass)
            lo, hi = float(drift.min()), float(drift.max())
            # v1 = drift[:, None] + y[None, :] is monotone in both terms, so
            # its extrema sit at the four corner combinations.
            vmax = max(abs(lo + y[0]), abs(lo + y[-1]), abs(hi + y[0]), abs(hi + y[-1]))
        else:
            v = eval_velocity_1d(field, state)
            vmax = float(np.abs(v).max()) if v.size else 0.0

        if cfg.dt_policy == "bounds" or vmax == 0.0:
            dt = dt_static
        else:
            dt = cfg.cfl_number * h / vmax
        if t + dt >= cfg.t_final - eps_t:
            dt = cfg.t_final - t
            t_next = cfg.t_final
        else:
            t_next = t + dt

        if keep_history:
            if is_2d:
                v_hist = drift[:, None] + y[None, :]
                history.append((t, DiscreteMeasure(work_grid, cur), v_hist, dt))
            else:
                history.append((t, state, v, dt))

        if is_2d:
            if (dt / dx) * vmax > 0.5 * _CFL_SLACK:
                raise CFLViolationError(
                    f"2D CFL violated at t={t:.6g}: dt*max|v1|/dx = {(dt / dx) * vmax:.6g}"
                )
            kernel(cur, drift, y, 0.5 * dt / dx, buf, row_sum, row_min)
            msum = float(row_sum.sum())
            mmin = float(row_min.min())
            # the row sums double as the angular marginal of the next step
            theta_mass = row_sum
            new_state = None if reuse_buffers else DiscreteMeasure(work_grid, buf)
        else:
            if cfg.variant == "unstaggered1d":
                new_state = lxf_step_unstaggered_1d(state, v, dt, dx)
            else:
                new_state = lxf_step_staggered_1d(state, v, dt, dx)
            msum = new_state.total_mass()
            mmin = float(new_state.masses.min())

        cum_defect += prev_mass - msum
        if cum_defect > cfg.boundary_defect_tol * total0:
            raise BoundaryLeakError(
                f"cumulative boundary mass defect {cum_defect:.3e} exceeds "
                f"{cfg.boundary_defect_tol:.1e} of the initial mass after "
                f"{step_idx + 1} steps (t={t_next:.6g})"
            )
        step_times.append(t_next)
        step_sizes.append(dt)
        mass_arr.append(msum)
        min_arr.append(mmin)
        if tv_stride > 0 and step_idx % tv_stride == 0:
            stepped = DiscreteMeasure(work_grid, buf) if new_state is None else new_state
            tv_arr.append(total_variation(stepped.as_density()))
        else:
            tv_arr.append(math.nan)
        defect_arr.append(cum_defect)

        while snap_idx < snap.size and snap[snap_idx] <= t_next + eps_t:
            ts = float(snap[snap_idx])
            if ts >= t_next - eps_t:
                snapshots.append((ts, new_state))
            elif ts <= t + eps_t:
                snapshots.append((ts, state))
            else:
                if state.grid is not new_state.grid and cfg.variant == "staggered1d":
                    raise ValueError(
                        "snapshot times between staggered steps are not supported; "
                        "request times that coincide with step times"
                    )
                bridge = TimeInterpolant(state, new_state, t, t_next)
                snapshots.append((ts, interpolate_in_time(bridge, ts)))
            snap_idx += 1

        if is_2d:
            if reuse_buffers:
                cur, buf = buf, cur
            else:
                state = new_state
                cur = new_state.masses
                buf = np.empty_like(cur)
        else:
            state = new_state
        prev_mass = msum
        t = t_next
        step_idx += 1

    if is_2d:
        state = DiscreteMeasure(work_grid, cur)
    return RunRecord(
        snapshots=tuple(snapshots),
        step_times=np.asarray(step_times),
        step_sizes=np.asarray(step_sizes),
        mass=np.asarray(mass_arr),
        min_mass=np.asarray(min_arr),
        tv=np.asarray(tv_arr),
        boundary_defect=np.asarray(defect_arr),
        final_state=state,
        final_time=t,
        history=tuple(history) if keep_history else None,
    )
