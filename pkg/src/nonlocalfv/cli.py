"""Command line front end: run simulations, refinement studies, and checks.

Three subcommands share one JSON config format (all keys lower_snake_case,
unknown keys rejected):

``simulate``
    one resolution; writes ``solution_N<k>.csv``, ``diagnostics.csv`` and,
    with ``emit_svg``, ``solution_N<k>.svg``.
``converge``
    a resolution ladder; writes ``table.csv`` and ``convergence.svg``.
``check``
    the randomized invariant suite; prints one line per invariant.

Exit codes: 0 success, 2 configuration error (including ``ValueError``
raised while setting a run up), 3 solver failure mid-run, 4 invariant
failure from ``check``. Every CSV cell holding a float is serialized with
17 significant digits so values round-trip exactly; files end with a
newline and use LF separators on every platform.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from ._checks import run_invariant_suite
from ._svg import convergence_plot, heatmap, step_plot
from .experiments import (
    StudyAborted,
    _with_coupling,
    builtin_datum,
    preset,
    run_convergence_study,
)
from .measures import Grid1D, Grid2D, wasserstein1_torus
from .scheme import BoundaryLeakError, CFLViolationError, SchemeConfig, run_to_time
from .velocity import KuramotoNonIdentical

_CONFIG_FIELDS = {
    "experiment",
    "variant",
    "mode",
    "cfl_number",
    "t_final",
    "resolutions",
    "reference_n",
    "coupling_k",
    "omega_min",
    "omega_max",
    "metrics",
    "emit_svg",
    "seed",
    "inject",
}

_TABLE_HEADER = ("N", "err_w1", "eoc_w1", "err_l1", "eoc_l1")


class ConfigError(Exception):
    pass


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{float(x):.17g}"


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        config = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(config) - _CONFIG_FIELDS)
    if unknown:
        raise ConfigError(
            f"unknown config fields: {', '.join(unknown)}; "
            f"allowed: {', '.join(sorted(_CONFIG_FIELDS))}"
        )
    return config


def _require_experiment(config: dict) -> str:
    name = config.get("experiment")
    if not isinstance(name, str):
        raise ConfigError("config must name an 'experiment'")
    return name


def _resolutions(config: dict, override: int | None):
    if override is not None:
        return (int(override),)
    value = config.get("resolutions")
    if value is None:
        return None
    if not isinstance(value, (list, tuple)) or not all(
        isinstance(n, int) and not isinstance(n, bool) for n in value
    ):
        raise ConfigError("'resolutions' must be a list of integers")
    return tuple(value)


def _build_spec(config: dict, resolutions):
    name = _require_experiment(config)
    overrides = {}
    if resolutions is not None:
        overrides["resolutions"] = resolutions
    for key, field in (
        ("cfl_number", "cfl_number"),
        ("t_final", "t_final"),
        ("reference_n", "reference_n"),
        ("coupling_k", "coupling_k"),
        ("mode", "mode"),
    ):
        if key in config:
            overrides[field] = config[key]
    if "metrics" in config:
        overrides["metrics"] = tuple(config["metrics"])
    if "omega_min" in config or "omega_max" in config:
        overrides["omega_range"] = (
            float(config.get("omega_min", -0.5)),
            float(config.get("omega_max", 1.5)),
        )
    return preset(name, **overrides)


def cmd_simulate(config: dict, out_dir: Path, resolution: int | None, quiet: bool) -> int:
    resolutions = _resolutions(config, resolution)
    if resolutions is None or len(resolutions) != 1:
        raise ConfigError("simulate needs exactly one resolution")
    n = resolutions[0]
    name = _require_experiment(config)
    datum, field = builtin_datum(name)
    if "coupling_k" in config:
        field = _with_coupling(field, float(config["coupling_k"]))
    is_2d = isinstance(field, KuramotoNonIdentical)
    variant = config.get("variant")
    if variant is None:
        variant = "unstaggered2d" if is_2d else "unstaggered1d"
    if is_2d != (variant == "unstaggered2d"):
        raise ConfigError(f"variant {variant!r} does not fit experiment {name!r}")

    t_final = float(config.get("t_final", 0.5))
    cfg = SchemeConfig(
        cfl_number=float(config.get("cfl_number", 0.4)),
        t_final=t_final,
        variant=variant,
        mode=config.get("mode", "measure"),
        dt_policy="bounds" if is_2d else "velocity",
        boundary_defect_tol=0.05 if is_2d else 1e-8,
    )
    if is_2d:
        lo = float(config.get("omega_min", -0.5))
        hi = float(config.get("omega_max", 1.5))
        grid = Grid2D(Grid1D.torus(n), Grid1D.line(n, lo, hi))
    else:
        grid = Grid1D.torus(n)
    keep_history = not is_2d
    record = run_to_time(datum, field, cfg, grid, keep_history=keep_history, tv_stride=1)
    if not quiet:
        print(
            f"{name}: N={n}, {record.step_times.size} steps to "
            f"t={record.final_time:g}",
            file=sys.stderr,
        )

    state = record.final_state
    density = state.as_density().values
    if is_2d:
        gt, gw = state.grid.grid_theta, state.grid.grid_omega
        tc, oc = gt.centers(), gw.centers()
        rows = [
            (_fmt(tc[i]), _fmt(oc[j]), _fmt(state.masses[i, j]), _fmt(density[i, j]))
            for i in range(gt.n_cells)
            for j in range(gw.n_cells)
        ]
        header = ("theta_center", "omega_center", "mass", "density_value")
    else:
        centers = state.grid.centers()
        rows = [
            (_fmt(centers[i]), _fmt(state.masses[i]), _fmt(density[i]))
            for i in range(state.grid.n_cells)
        ]
        header = ("cell_center", "mass", "density_value")
    _write_csv(out_dir / f"solution_N{n}.csv", header, rows)

    increments = _w1_increments(record) if keep_history else None
    diag_rows = []
    for k in range(record.step_times.size):
        diag_rows.append(
            (
                str(k + 1),
                _fmt(record.step_times[k]),
                _fmt(record.mass[k]),
                _fmt(record.min_mass[k]),
                _fmt(record.tv[k]),
                _fmt(increments[k]) if increments is not None else "",
                _fmt(record.boundary_defect[k]),
            )
        )
    _write_csv(
        out_dir / "diagnostics.csv",
        ("step", "time", "mass", "min_mass", "tv", "w1_step_increment", "boundary_defect"),
        diag_rows,
    )

    if config.get("emit_svg"):
        if is_2d:
            svg = heatmap(
                state.grid.grid_theta.interfaces(),
                state.grid.grid_omega.interfaces(),
                state.masses,
                title=f"{name} at t={t_final:g}, N={n}",
            )
        else:
            svg = step_plot(
                state.grid.interfaces(),
                density,
                title=f"{name} at t={t_final:g}, N={n}",
            )
        (out_dir / f"solution_N{n}.svg").write_text(svg, encoding="ascii", newline="\n")
    return 0


def _w1_increments(record) -> list:
    states = [state for _, state, _, _ in record.history]
    states.append(record.final_state)
    return [wasserstein1_torus(a, b) for a, b in zip(states, states[1:])]


def cmd_converge(config: dict, out_dir: Path, resolution: int | None, quiet: bool) -> int:
    resolutions = _resolutions(config, resolution)
    if resolutions is not None and len(resolutions) < 2:
        raise ConfigError("converge needs at least two resolutions")
    spec = _build_spec(config, resolutions)

    def progress(n, seconds):
        if not quiet:
            print(f"{spec.name}: N={n} solved in {seconds:.2f}s", file=sys.stderr)

    table = run_convergence_study(spec, progress=progress)

    rows = []
    for row in table.rows:
        rows.append(
            (
                str(row.n),
                _fmt(row.errors.get("w1")),
                _fmt(row.eoc.get("w1")),
                _fmt(row.errors.get("l1")),
                _fmt(row.eoc.get("l1")),
            )
        )
    _write_csv(out_dir / "table.csv", _TABLE_HEADER, rows)

    series = {
        metric: [row.errors.get(metric) for row in table.rows]
        for metric in table.metrics
    }
    if series:
        svg = convergence_plot(
            [row.n for row in table.rows],
            series,
            title=f"{spec.name}: error vs N (reference {table.reference_n})",
        )
        (out_dir / "convergence.svg").write_text(svg, encoding="ascii", newline="\n")
    return 0


def cmd_check(config: dict, quiet: bool) -> int:
    seed = config.get("seed", 0)
    cfl = config.get("cfl_number", 0.4)
    inject = config.get("inject")
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("'seed' must be an integer")
    results = run_invariant_suite(seed=seed, cfl=float(cfl), inject=inject)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    if failed:
        print(f"{len(failed)} invariant(s) failed", file=sys.stderr)
        return 4
    if not quiet:
        print(f"all {len(results)} invariants passed", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nonlocalfv",
        description="Finite-volume solver for nonlocal continuity equations",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "converge", "check"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="path to a JSON config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--resolution", type=int, help="override the mesh resolution")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
    args = parser.parse_args(argv)

    try:
        config = _load_config(args.config)
        if args.command == "check":
            return cmd_check(config, args.quiet)
        out_dir = Path(args.out)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory: {exc}") from exc
        if args.command == "simulate":
            return cmd_simulate(config, out_dir, args.resolution, args.quiet)
        return cmd_converge(config, out_dir, args.resolution, args.quiet)
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StudyAborted as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except (CFLViolationError, BoundaryLeakError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
