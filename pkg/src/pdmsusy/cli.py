"""Command-line front end.

    pdmsusy ladder --config run.cfg [--out DIR] [--set system.m0=2.0 ...]
    pdmsusy solve  --config run.cfg
    pdmsusy susy   --config run.cfg [--jobs N]
    pdmsusy verify --config run.cfg

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical failure.  All outputs are plain data files: CSV (UTF-8, comma
separated, header row, x first, floats with 17 significant digits) and JSON
with sorted keys, so identical configs produce byte-identical reports.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import bdd_solver, ladder, susy
from .config import (
    RunConfig,
    boundary_condition,
    build_profile,
    load_config,
    make_system,
    seed_energy,
    sweep_values,
)
from .errors import InvalidArgumentError, NumericalError, PdmsusyError
from .numerics import SampledFunction, subgrid
from .verify import run_verification

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL = 3


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    rows = len(columns[0])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(rows):
            fh.write(",".join(_fmt(float(col[i])) for col in columns) + "\n")


def write_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _grid_payload(grid) -> dict:
    return {
        "x_min": grid.x_min,
        "x_max": grid.x_max,
        "n_points": grid.n_points,
        "spacing": grid.spacing,
    }


def _values_or_nan(f: SampledFunction) -> np.ndarray:
    vals = f.values.copy()
    if f.mask is not None:
        vals[f.mask] = np.nan
    return vals


def cmd_ladder(config: RunConfig, out: Path) -> int:
    sys = make_system(config)
    bc = boundary_condition(config)
    states = [
        ladder.nth_state(sys, n, bc=bc, bc_tolerance=config.tolerances.bc_tolerance)
        for n in range(config.system.n_states)
    ]
    write_csv(out / "potential.csv", ["x", "V"], [sys.grid.points, sys.potential.values])
    write_csv(
        out / "states.csv",
        ["x"] + [f"psi_{s.index}" for s in states],
        [sys.grid.points] + [s.wavefunction.values for s in states],
    )
    write_json(out / "spectrum.json", {
        "profile": sys.profile.label,
        "delta_e": sys.delta_e,
        "e0": sys.e0,
        "grid": _grid_payload(sys.grid),
        "energies": [s.energy for s in states],
        "bc_satisfied": [s.satisfies_bc for s in states],
    })
    return EXIT_OK


def cmd_solve(config: RunConfig, out: Path) -> int:
    sys = make_system(config)
    bc = boundary_condition(config)
    k = config.solve.k
    op = bdd_solver.discretize(sys.profile, sys.potential, bc, sys.hbar)
    report = bdd_solver.solve_spectrum(op, k)
    formal = []
    n = 0
    while len(formal) < k and n < 4 * k + 8:
        state = ladder.nth_state(
            sys, n, bc=bc, bc_tolerance=config.tolerances.bc_tolerance
        )
        if state.satisfies_bc:
            formal.append(state.energy)
        n += 1
    formal_arr = np.array(formal[:k])
    deviations = np.abs(report.eigenvalues[: len(formal_arr)] - formal_arr)
    payload = {
        "profile": sys.profile.label,
        "grid": _grid_payload(sys.grid),
        "eigenvalues": report.eigenvalues.tolist(),
        "node_counts": report.node_counts.tolist(),
        "bc_residuals": report.bc_residuals.tolist(),
        "formal_energies": formal_arr.tolist(),
        "max_deviation": float(np.max(deviations)) if deviations.size else None,
    }
    if config.solve.widen_check:
        profile = build_profile(config)

        def rebuild(grid):
            return ladder.build_ladder_system(
                profile, grid, sys.delta_e, a=sys.a, hbar=sys.hbar
            ).potential

        _, wide_grid, movement = bdd_solver.converged_spectrum(
            profile, rebuild, sys.grid, k, bc, sys.hbar,
            tolerance=config.tolerances.widen_movement,
        )
        payload["widen_check"] = {
            "movement": movement,
            "final_grid": _grid_payload(wide_grid),
        }
    write_json(out / "oracle_spectrum.json", payload)
    write_csv(
        out / "deviation.csv",
        ["level", "oracle_energy", "formal_energy", "deviation"],
        [
            np.arange(len(formal_arr), dtype=float),
            report.eigenvalues[: len(formal_arr)],
            formal_arr,
            deviations,
        ],
    )
    return EXIT_OK


def _largest_regular_slice(report: susy.SingularityReport, grid) -> tuple[int, int]:
    if report.is_regular:
        return 0, grid.n_points - 1
    lo, hi = max(report.subdomains, key=lambda ab: ab[1] - ab[0])
    margin = susy.MASK_RADIUS + 1
    i_lo = max(0, grid.index_of(lo) + margin)
    i_hi = min(grid.n_points - 1, grid.index_of(hi) - margin)
    return i_lo, i_hi


def _partner_spectrum(profile, potential, grid, report, k, hbar) -> dict:
    i_lo, i_hi = _largest_regular_slice(report, grid)
    sub = subgrid(grid, i_lo, i_hi)
    vals = potential.values[i_lo : i_hi + 1]
    sub_potential = SampledFunction(sub, vals)
    op = bdd_solver.discretize(
        profile, sub_potential, bdd_solver.BoundaryCondition.dirichlet(), hbar
    )
    rep = bdd_solver.solve_spectrum(op, k)
    return {
        "domain": [sub.x_min, sub.x_max],
        "eigenvalues": rep.eigenvalues.tolist(),
        "node_counts": rep.node_counts.tolist(),
    }


def _singularity_payload(report: susy.SingularityReport) -> dict:
    return {
        "locations": report.locations.tolist(),
        "subdomains": [list(ab) for ab in report.subdomains],
        "regular": report.is_regular,
    }


def _sweep_case(args) -> dict:
    config, d = args
    sys = make_system(config)
    index1 = config.transform.seed_index
    u1, du1 = ladder.closed_form_state(sys, index1)
    t = susy.confluent_transform(
        sys, u1, seed_energy(config, index1, 1), d,
        anchor=config.transform.anchor, u1_derivative=du1,
        validate_tolerance=config.tolerances.seed_residual,
    )
    return {
        "d": float(d),
        "singular": not t.singularities.is_regular,
        "pole_count": int(len(t.singularities.locations)),
        "pole_locations": t.singularities.locations.tolist(),
    }


def cmd_susy(config: RunConfig, out: Path, jobs: int = 1) -> int:
    order = config.transform.order or "first"
    sys = make_system(config)
    grid = sys.grid
    index1 = config.transform.seed_index
    eps1 = seed_energy(config, index1, 1)
    if config.transform.seed_csv:
        u1 = _load_seed(config.transform.seed_csv, grid)
        du1 = None
    else:
        u1, du1 = ladder.closed_form_state(sys, index1)
    tol = config.tolerances
    k = config.solve.k

    t1 = susy.first_order_transform(
        sys, u1, eps1, du1, validate_tolerance=tol.seed_residual
    )
    write_csv(out / "V1.csv", ["x", "V1"], [grid.points, _values_or_nan(t1.partner_potential)])
    write_csv(out / "W1.csv", ["x", "W1"], [grid.points, _values_or_nan(t1.superpotential)])
    mapped = []
    for n in range(config.system.n_states):
        psi_n, dpsi_n = ladder.closed_form_state(sys, n)
        mapped.append(_values_or_nan(susy.map_state_first(t1, psi_n, dpsi_n)))
    write_csv(
        out / "mapped_states.csv",
        ["x"] + [f"phi_{n}" for n in range(len(mapped))],
        [grid.points] + mapped,
    )
    missing1 = susy.missing_state_first(t1)
    write_csv(out / "missing_state_V1.csv", ["x", "phi_eps1"],
              [grid.points, _values_or_nan(missing1)])
    payload = {
        "order": order,
        "epsilon1": eps1,
        "seed_index": index1,
        "seed_residual": t1.seed_residual,
        "two_route_deviation": t1.riccati_deviation,
        "singularities_V1": _singularity_payload(t1.singularities),
        "missing_state_normalizable": susy.looks_normalizable(missing1),
        "spectrum_V1": _partner_spectrum(
            sys.profile, t1.partner_potential, grid, t1.singularities, k, sys.hbar
        ),
    }

    if order == "nonconfluent":
        index2 = config.transform.seed_index2
        eps2 = seed_energy(config, index2, 2)
        u2, du2 = ladder.closed_form_state(sys, index2)
        t2 = susy.second_order_nonconfluent(
            sys, u1, eps1, u2, eps2, du1, du2, validate_tolerance=tol.seed_residual
        )
        write_csv(out / "V2.csv", ["x", "V2"],
                  [grid.points, _values_or_nan(t2.partner_potential2)])
        write_csv(out / "W2.csv", ["x", "W2"],
                  [grid.points, _values_or_nan(t2.superpotential2)])
        missing2 = susy.missing_state_second(t2)
        write_csv(out / "missing_state_V2.csv", ["x", "chi_eps2"],
                  [grid.points, _values_or_nan(missing2)])
        payload["epsilon2"] = eps2
        payload["singularities_V2"] = _singularity_payload(t2.singularities)
        payload["missing_state2_normalizable"] = susy.looks_normalizable(missing2)
        payload["spectrum_V2"] = _partner_spectrum(
            sys.profile, t2.partner_potential2, grid, t2.singularities, k, sys.hbar
        )
    elif order == "confluent":
        t2 = susy.confluent_transform(
            sys, u1, eps1, config.transform.d,
            anchor=config.transform.anchor, u1_derivative=du1,
            validate_tolerance=tol.seed_residual,
        )
        write_csv(out / "V2_confluent.csv", ["x", "V2"],
                  [grid.points, _values_or_nan(t2.partner_potential2)])
        write_csv(out / "w_function.csv", ["x", "w"],
                  [grid.points, t2.w_function.values])
        payload["d"] = config.transform.d
        payload["singularities_V2"] = _singularity_payload(t2.singularities)
        if t2.singularities.is_regular:
            payload["spectrum_V2"] = _partner_spectrum(
                sys.profile, t2.partner_potential2, grid, t2.singularities, k, sys.hbar
            )
        d_crit, regular_everywhere = susy.critical_d(
            sys, u1, eps1, anchor=config.transform.anchor,
            u1_derivative=du1, validate_tolerance=tol.seed_residual,
        )
        payload["critical_d"] = d_crit
        payload["regular_for_all_d"] = regular_everywhere
        sweeps = sweep_values(config)
        if sweeps is not None:
            cases = [(config, float(d)) for d in sweeps]
            if jobs > 1:
                with ProcessPoolExecutor(max_workers=jobs) as pool:
                    entries = list(pool.map(_sweep_case, cases))
            else:
                entries = [_sweep_case(c) for c in cases]
            for entry in entries:
                d_dir = out / f"d_{entry['d']:.4f}"
                d_dir.mkdir(parents=True, exist_ok=True)
                write_json(d_dir / "singularities.json", entry)
            payload["sweep"] = entries
    write_json(out / "susy_report.json", payload)
    return EXIT_OK


def _load_seed(path: str, grid) -> SampledFunction:
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = data.dtype.names
    if names is None or len(names) < 2:
        raise InvalidArgumentError(f"seed file {path} needs two named columns")
    x = np.asarray(data[names[0]], dtype=float)
    u = np.asarray(data[names[1]], dtype=float)
    if np.any(np.diff(x) <= 0):
        raise InvalidArgumentError(f"seed file {path} abscissae must increase")
    return SampledFunction(grid, np.interp(grid.points, x, u))


def cmd_verify(config: RunConfig, out: Path) -> int:
    results = run_verification(config)
    all_pass = all(r.passed for r in results)
    write_json(out / "verify_report.json", {
        "all_pass": all_pass,
        "checks": [r.as_dict() for r in results],
    })
    width = max(len(r.name) for r in results)
    for r in results:
        status = "pass" if r.passed else "FAIL"
        print(
            f"{r.name:<{width}}  {status}  residual={r.residual:.3e}  "
            f"tolerance={r.tolerance:.3e}"
        )
    print("verification:", "all checks passed" if all_pass else "FAILED")
    return EXIT_OK if all_pass else EXIT_VERIFY_FAILED


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdmsusy",
        description=(
            "Position-dependent-mass systems with equidistant spectra: "
            "build them, solve them independently, and construct their "
            "SUSY partners."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("ladder", "build the ladder system and its formal states"),
        ("solve", "run the independent Sturm-Liouville eigensolver"),
        ("susy", "construct SUSY partner systems"),
        ("verify", "run the full invariant suite"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="run configuration file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel workers for parameter sweeps")
        p.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL",
                       help="override a config entry (repeatable; wins over file)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config, overrides=args.set)
    except PdmsusyError as exc:
        print(f"configuration error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG_ERROR
    out = Path(args.out) if args.out else Path(config.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "ladder":
            return cmd_ladder(config, out)
        if args.command == "solve":
            return cmd_solve(config, out)
        if args.command == "susy":
            return cmd_susy(config, out, jobs=args.jobs)
        return cmd_verify(config, out)
    except InvalidArgumentError as exc:
        print(f"configuration error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG_ERROR
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
