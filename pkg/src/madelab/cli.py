"""Command-line entry point: analyze a state, solve for eigenstates, or run
a grid-refinement convergence study. Emits a JSON report plus field dumps
(CSV, binary, or gnuplot tables).

Exit codes: 0 success; 1 hard failure (bad input, empty interior);
2 diagnostics complete but J~ undefined because of vortices; 3 eigensolver
non-convergence (partial report still written).
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analytic, currents, exprlang, fieldio, madelung, spectral
from .currents import PhysicalParams
from .grid import ComplexField, GridSpec, ScalarField, max_norm, rms_norm

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VORTEX = 2
EXIT_NO_CONVERGENCE = 3

_DUMP = {
    "csv": (".csv", fieldio.write_csv),
    "bin": (".mfld", fieldio.write_binary),
    "gnuplot": (".dat", fieldio.write_gnuplot),
}


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for the vortex
    # outcome, so route usage errors to the hard-failure code instead
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(message)


# flags whose values may start with '-' (negative coordinates, complex
# coefficients); fold them into --flag=value so argparse accepts them
_DASH_VALUE_FLAGS = ("--domain", "--grid-raw", "--combine", "--energy")


def _fold_dash_values(argv: list[str]) -> list[str]:
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _DASH_VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


# --- argument plumbing -------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid", default="65x65", metavar="NXxNY",
                   help="grid resolution (default 65x65)")
    p.add_argument("--domain", default="-3,3,-3,3", metavar="X0,X1,Y0,Y1",
                   help="physical domain; cells sit at interior points "
                        "x0 + k*h with h = (x1-x0)/(nx+1)")
    p.add_argument("--grid-raw", default=None, metavar="NX,NY,X0,Y0,DX,DY",
                   help="explicit grid spec; overrides --grid/--domain")
    p.add_argument("--hbar", type=float, default=1.0)
    p.add_argument("--mass", type=float, default=1.0)
    p.add_argument("--kb", type=float, default=1.0)
    p.add_argument("--node-threshold", type=float, default=madelung.DEFAULT_NODE_THRESHOLD)
    p.add_argument("--tol", type=float, default=None,
                   help="property tolerance (default: max(10 h^2, 1e-8) scaled)")
    p.add_argument("--energy", type=float, default=None,
                   help="state energy for the Hamilton-Jacobi residual")
    p.add_argument("--potential", default=None, metavar="EXPR",
                   help="potential V(x,y) expression")
    p.add_argument("--out", default=None, metavar="DIR",
                   help="output directory (default $MADELUNG_OUT or ./madelab-out)")
    p.add_argument("--dump", choices=sorted(_DUMP), default="bin",
                   help="field dump format (default bin)")


def _add_state_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--psi", default=None, metavar="EXPR",
                     help="wavefunction expression in x, y")
    src.add_argument("--builtin", default=None, choices=spectral.BUILTIN_NAMES,
                     help="closed-form catalog state")
    p.add_argument("--k1", type=float, default=1.0, help="plane_wave k1")
    p.add_argument("--k2", type=float, default=0.0, help="plane_wave k2")
    p.add_argument("--l", type=int, default=1, help="ho_vortex winding")
    p.add_argument("--n1", type=int, default=1, help="box_mode n1")
    p.add_argument("--n2", type=int, default=1, help="box_mode n2")
    p.add_argument("--sigma", type=float, default=1.0, help="gauss_real width")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="madelab",
        description="Amplitude/phase decomposition diagnostics for stationary "
                    "quantum states on 2D grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="diagnose a closed-form or builtin state")
    _add_common(pa)
    _add_state_source(pa)

    ps = sub.add_parser("solve", help="solve the Schrodinger eigenproblem, then diagnose")
    _add_common(ps)
    ps.add_argument("--count", type=int, default=1, help="number of eigenpairs")
    ps.add_argument("--solver-tol", type=float, default=1e-6,
                    help="eigenpair residual tolerance")
    ps.add_argument("--max-iter", type=int, default=5000)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--combine", default=None, metavar="I,J,...:C1,C2,...",
                    help="combine degenerate eigenstates, e.g. 1,2:1,i")
    ps.add_argument("--state-index", type=int, default=0,
                    help="eigenstate to diagnose when --combine is absent")

    pc = sub.add_parser("convergence", help="refinement study; CSV on stdout")
    _add_common(pc)
    _add_state_source(pc)
    pc.add_argument("--levels", type=int, default=3, help="number of refinements")
    return parser


def _parse_grid(args) -> GridSpec:
    if args.grid_raw is not None:
        parts = args.grid_raw.split(",")
        if len(parts) != 6:
            raise CliError("--grid-raw needs NX,NY,X0,Y0,DX,DY")
        nx, ny = int(parts[0]), int(parts[1])
        x0, y0, dx, dy = (float(t) for t in parts[2:])
        return GridSpec(nx, ny, x0, y0, dx, dy)
    try:
        nx, ny = (int(t) for t in args.grid.lower().split("x"))
    except ValueError as err:
        raise CliError(f"bad --grid {args.grid!r}: expected NXxNY") from err
    try:
        x0, x1, y0, y1 = (float(t) for t in args.domain.split(","))
    except ValueError as err:
        raise CliError(f"bad --domain {args.domain!r}") from err
    if not (x1 > x0 and y1 > y0):
        raise CliError("--domain needs x1 > x0 and y1 > y0")
    dx = (x1 - x0) / (nx + 1)
    dy = (y1 - y0) / (ny + 1)
    return GridSpec(nx, ny, x0 + dx, y0 + dy, dx, dy)


def _params(args) -> PhysicalParams:
    return PhysicalParams(hbar=args.hbar, mass=args.mass, kB=args.kb)


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("MADELUNG_OUT") or "madelab-out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _builtin_params(args) -> dict:
    return {"k1": args.k1, "k2": args.k2, "l": args.l,
            "n1": args.n1, "n2": args.n2, "sigma": args.sigma}


def _state_from_args(args, spec: GridSpec, p: PhysicalParams):
    """Returns (psi, energy-or-None, provenance dict)."""
    if args.psi is not None:
        expr = exprlang.parse(args.psi)
        psi = exprlang.eval_field(expr, spec)
        return psi, args.energy, {"source": "expression", "psi": args.psi}
    psi, energy = spectral.builtin_state(args.builtin, _builtin_params(args), spec, p)
    if args.energy is not None:
        energy = args.energy
    prov = {"source": "builtin", "name": args.builtin,
            "params": _builtin_params(args)}
    return psi, energy, prov


def _potential_field(args, spec: GridSpec) -> ScalarField | None:
    if args.potential is None:
        return None
    expr = exprlang.parse(args.potential)
    vf = exprlang.eval_field(expr, spec)
    return ScalarField(spec, vf.values.real.copy(), vf.mask.copy())


def _parse_combine(text: str) -> tuple[list[int], list[complex]]:
    try:
        idx_part, coeff_part = text.split(":")
        indices = [int(t) for t in idx_part.split(",")]
        coeffs = [exprlang.evaluate(exprlang.parse(t), 0.0, 0.0)
                  for t in coeff_part.split(",")]
    except (ValueError, exprlang.ParseError) as err:
        raise CliError(f"bad --combine {text!r}: {err}") from err
    if len(indices) != len(coeffs):
        raise CliError("--combine needs as many coefficients as indices")
    return indices, coeffs


# --- diagnostics pipeline ----------------------------------------------------

def run_pipeline(
    psi: ComplexField,
    p: PhysicalParams,
    node_threshold: float,
    tol: float | None = None,
    V: ScalarField | None = None,
    E: float | None = None,
):
    m = madelung.decompose(psi, node_threshold)
    c = currents.compute_currents(m, p, V=V, E=E)
    r = analytic.analyze(m)
    if tol is None:
        tol = analytic.default_tolerance(m)
    verdicts = analytic.check_properties(m, c, r, tol)
    return m, c, r, verdicts, tol


def _norm_entry(values, mask) -> dict | str:
    mx = max_norm(values, mask)
    if mx is None:
        return "masked"
    return {"max": mx, "rms": rms_norm(values, mask)}


def norm_table(m, c, r) -> dict:
    table = {
        "orth": _norm_entry(r.orth.values, r.orth.mask),
        "crStrict": _norm_entry(r.crStrict.values, r.crStrict.mask),
        "harmS": _norm_entry(r.harmS.values, r.harmS.mask),
        "harmI": _norm_entry(r.harmI.values, r.harmI.mask),
        "defectC": _norm_entry(c.defectC.values, c.defectC.mask),
        "defectA": _norm_entry(c.defectA.values, c.defectA.mask),
        "divJ": _norm_entry(c.divJ.values, c.divJ.mask),
    }
    # raw div J~ carries the anchor-dependent e^{2I} prefactor; the report
    # norm is rescaled by (m/hbar) e^{-2I} so it is gauge/anchor independent
    if c.divJtilde is not None and m.I_unwrapped is not None:
        with np.errstate(over="ignore", invalid="ignore"):
            scaled = c.divJtilde.values * np.exp(-2.0 * m.I_unwrapped.values)
        mask = c.divJtilde.mask & m.I_unwrapped.mask & np.isfinite(scaled)
        table["divJtilde_scaled"] = _norm_entry(scaled, mask)
    else:
        table["divJtilde_scaled"] = "n/a"
    if c.qhjResidual is not None:
        table["qhjResidual"] = _norm_entry(c.qhjResidual.values, c.qhjResidual.mask)
    else:
        table["qhjResidual"] = "n/a"
    return table


def vortex_summary(m) -> dict:
    plaquettes = m.vortex_plaquettes()
    tears = []
    if m.unwrap_error is not None:
        tears = [list(t) for t in m.unwrap_error.plaquettes if t not in
                 [(j, i, w) for j, i, w in plaquettes]]
    return {
        "plaquettes": [list(t) for t in plaquettes[:50]],
        "count": len(plaquettes),
        "total_winding": int(sum(w for _, _, w in plaquettes)),
        "unwrapped": m.I_unwrapped is not None,
        "tears": tears[:50],
    }


def _verdicts_json(verdicts: dict) -> dict:
    out = {}
    for name, v in verdicts.items():
        out[name] = {
            "status": v.status,
            "residuals": v.residuals,
            "tol": v.tol,
        }
        if v.note:
            out[name]["note"] = v.note
    return out


def _collect_fields(psi, m, c, r) -> dict:
    fields = {
        "S": m.S,
        "gradS.x": ScalarField(m.spec, m.gradS.vx, m.gradS.mask),
        "gradS.y": ScalarField(m.spec, m.gradS.vy, m.gradS.mask),
        "gradI.x": ScalarField(m.spec, m.gradI.vx, m.gradI.mask),
        "gradI.y": ScalarField(m.spec, m.gradI.vy, m.gradI.mask),
        "rho": c.rho,
        "J.x": ScalarField(m.spec, c.J.vx, c.J.mask),
        "J.y": ScalarField(m.spec, c.J.vy, c.J.mask),
        "divJ": c.divJ,
        "defectC": c.defectC,
        "defectA": c.defectA,
        "U": c.U,
        "deBroglie": c.deBroglie,
        "orth": r.orth,
        "crStrict": r.crStrict,
        "harmS": r.harmS,
        "harmI": r.harmI,
    }
    if m.I_unwrapped is not None:
        fields["I"] = m.I_unwrapped
    if c.Jtilde is not None:
        fields["Jtilde.x"] = ScalarField(m.spec, c.Jtilde.vx, c.Jtilde.mask)
        fields["Jtilde.y"] = ScalarField(m.spec, c.Jtilde.vy, c.Jtilde.mask)
        fields["divJtilde"] = c.divJtilde
    if c.qhjResidual is not None:
        fields["qhjResidual"] = c.qhjResidual
    return fields


def dump_fields(psi, fields: dict, out_dir: Path, fmt: str) -> list[dict]:
    ext, writer = _DUMP[fmt]
    manifest = []
    re_path, im_path = fieldio.write_complex(
        psi, out_dir / f"psi{ext}",
        writer=writer if fmt != "gnuplot" else fieldio.write_binary,
    )
    for path in (re_path, im_path):
        manifest.append({"path": path.name, "sha256": _sha256(path)})
    for name, f in sorted(fields.items()):
        path = out_dir / f"{name}{ext}"
        writer(f, path)
        manifest.append({"path": path.name, "sha256": _sha256(path)})
    return manifest


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_report(report: dict, out_dir: Path) -> Path:
    path = out_dir / "report.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path


def _config_echo(args) -> dict:
    skip = {"command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# --- subcommands -------------------------------------------------------------

def cmd_analyze(args) -> int:
    spec = _parse_grid(args)
    p = _params(args)
    out_dir = _out_dir(args)
    psi, energy, provenance = _state_from_args(args, spec, p)
    V = _potential_field(args, spec)
    m, c, r, verdicts, tol = run_pipeline(
        psi, p, args.node_threshold, tol=args.tol, V=V, E=energy
    )
    report = {
        "schema": "madelab-report/1",
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": _config_echo(args),
        "state": {**provenance, "energy": energy if energy is not None else "n/a"},
        "grid": {"nx": spec.nx, "ny": spec.ny, "x0": spec.x0, "y0": spec.y0,
                 "dx": spec.dx, "dy": spec.dy},
        "tolerance": tol,
        "norms": norm_table(m, c, r),
        "vortices": vortex_summary(m),
        "properties": _verdicts_json(verdicts),
    }
    report["manifest"] = dump_fields(psi, _collect_fields(psi, m, c, r), out_dir, args.dump)
    path = write_report(report, out_dir)
    print(f"report written to {path}")
    if m.I_unwrapped is None:
        print("note: phase has vortices; J~ is unavailable", file=sys.stderr)
        return EXIT_VORTEX
    return EXIT_OK


def cmd_solve(args) -> int:
    spec = _parse_grid(args)
    p = _params(args)
    out_dir = _out_dir(args)
    if args.potential is None:
        raise CliError("solve requires --potential")
    V = _potential_field(args, spec)
    H = spectral.assemble(V, p)
    try:
        sol = spectral.solve_lowest(
            H, args.count, tol=args.solver_tol, max_iter=args.max_iter, seed=args.seed
        )
    except spectral.EigenConvergenceError as err:
        report = {
            "schema": "madelab-report/1",
            "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "config": _config_echo(args),
            "error": str(err),
            "energies": err.energies or [],
            "solver_residuals": err.residuals or [],
        }
        path = write_report(report, out_dir)
        print(f"eigensolver did not converge; partial report at {path}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE

    if args.combine is not None:
        indices, coeffs = _parse_combine(args.combine)
        psi, energy = spectral.combine(sol, indices, coeffs)
        provenance = {"source": "solve+combine", "potential": args.potential,
                      "combine": args.combine}
    else:
        idx = args.state_index
        if not 0 <= idx < len(sol.states):
            raise CliError(f"--state-index {idx} out of range 0..{len(sol.states) - 1}")
        psi, energy = sol.states[idx], sol.energies[idx]
        provenance = {"source": "solve", "potential": args.potential,
                      "state_index": idx}

    m, c, r, verdicts, tol = run_pipeline(
        psi, p, args.node_threshold, tol=args.tol, V=V, E=energy
    )
    report = {
        "schema": "madelab-report/1",
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": _config_echo(args),
        "state": {**provenance, "energy": energy},
        "grid": {"nx": spec.nx, "ny": spec.ny, "x0": spec.x0, "y0": spec.y0,
                 "dx": spec.dx, "dy": spec.dy},
        "energies": sol.energies,
        "solver_residuals": sol.residuals,
        "tolerance": tol,
        "norms": norm_table(m, c, r),
        "vortices": vortex_summary(m),
        "properties": _verdicts_json(verdicts),
    }
    report["manifest"] = dump_fields(psi, _collect_fields(psi, m, c, r), out_dir, args.dump)
    path = write_report(report, out_dir)
    print(f"report written to {path}")
    if m.I_unwrapped is None:
        print("note: phase has vortices; J~ is unavailable", file=sys.stderr)
        return EXIT_VORTEX
    return EXIT_OK


_CONV_METRICS = ("orth", "crStrict", "harmI", "defectC", "defectA", "divJ", "qhjResidual")
ROUNDOFF_FLOOR = 1e-12


def cmd_convergence(args) -> int:
    base = _parse_grid(args)
    p = _params(args)
    levels = max(args.levels, 2)
    rows = []
    for k in range(levels):
        factor = 2**k
        nx = (base.nx + 1) * factor - 1
        ny = (base.ny + 1) * factor - 1
        spec = GridSpec(nx, ny, base.x0 - base.dx + base.dx / factor,
                        base.y0 - base.dy + base.dy / factor,
                        base.dx / factor, base.dy / factor, base.boundary)
        psi, energy, _ = _state_from_args(args, spec, p)
        V = _potential_field(args, spec)
        m, c, r, _, _ = run_pipeline(psi, p, args.node_threshold, V=V, E=energy)
        norms = {
            "orth": max_norm(r.orth.values, r.orth.mask),
            "crStrict": max_norm(r.crStrict.values, r.crStrict.mask),
            "harmI": max_norm(r.harmI.values, r.harmI.mask),
            "defectC": max_norm(c.defectC.values, c.defectC.mask),
            "defectA": max_norm(c.defectA.values, c.defectA.mask),
            "divJ": max_norm(c.divJ.values, c.divJ.mask),
            "qhjResidual": (
                max_norm(c.qhjResidual.values, c.qhjResidual.mask)
                if c.qhjResidual is not None else None
            ),
        }
        rows.append((max(spec.dx, spec.dy), norms))

    def fmt(v):
        return "na" if v is None else repr(v)

    print("h," + ",".join(_CONV_METRICS))
    for h, norms in rows:
        print(repr(h) + "," + ",".join(fmt(norms[k]) for k in _CONV_METRICS))
    orders = []
    for key in _CONV_METRICS:
        vals = [norms[key] for _, norms in rows]
        if any(v is None or v < ROUNDOFF_FLOOR for v in vals):
            orders.append("na")
            continue
        hs = np.log([h for h, _ in rows])
        ys = np.log(vals)
        slope = float(np.polyfit(hs, ys, 1)[0])
        orders.append(f"{slope:.3f}")
    print("order," + ",".join(orders))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    try:
        args = parser.parse_args(_fold_dash_values(list(argv)))
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAILURE
    handler = {"analyze": cmd_analyze, "solve": cmd_solve,
               "convergence": cmd_convergence}[args.command]
    try:
        return handler(args)
    except (CliError, exprlang.ParseError, madelung.DecomposeError,
            analytic.EmptyInteriorError, spectral.DegeneracyError,
            ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
