"""Command-line interface.

Subcommands ``check``, ``evolve``, ``verify``, ``jet``, ``spinor`` and
``report``.  Every command writes JSON/CSV/snapshot files into ``--out``;
identical configurations produce byte-identical files.

Exit codes: 0 success, 1 input error, 2 failed check (constraints, Einstein
or spinor residual above tolerance), 3 metric degeneration, 4 blow-up.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .clifford import (
    SpinorField,
    dirac,
    extend_parallel,
    gks_implies_constraints,
    gks_residual,
    killing_constant,
    spin_curvature_residual,
    stress_energy_from_spinor,
)
from .config import build_state, load_config
from .constraints import GRID_TOL, CLOSED_FORM_TOL, constraint_residual, einstein_residual
from .errors import CauchyLabError, PreconditionError
from .evolution import evolve
from .io import (
    einstein_csv,
    format_field,
    git_blob_hash,
    jet_residual_csv,
    residual_csv,
    write_jet,
    write_spinor,
)
from .jets import formal_solution, jet_einstein_residual
from .tensor import Field

log = logging.getLogger("cauchylab")

EXIT_OK, EXIT_INPUT, EXIT_CHECK, EXIT_DEGENERATE, EXIT_BLOWUP = 0, 1, 2, 3, 4
_STATUS_EXIT = {"ok": EXIT_OK, "degenerate": EXIT_DEGENERATE, "blow-up": EXIT_BLOWUP}


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _dump(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    Path(path).write_text(text)
    return text


def _header(cfg, command):
    return {
        "command": command,
        "version": __version__,
        "config_hash": cfg.hash,
        "scenario": cfg["scenario"],
    }


def _run_id(cfg, command):
    return f"{command}-{cfg.hash[:12]}"


def _constraint_tol(cfg, chart):
    tol = cfg["tolerances"].get("constraint")
    if tol is not None:
        return float(tol)
    return GRID_TOL if chart.is_grid else CLOSED_FORM_TOL


def _evolve(cfg, state, backfill=None):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        traj = evolve(
            state,
            float(cfg["T"]),
            float(cfg["dt"]),
            kmax=cfg["kmax"],
            backfill=int(cfg["backfill"] if backfill is None else backfill),
        )
    for w in caught:
        log.warning("%s", w.message)
    return traj


# ---------------------------------------------------------------------------
# commands

def cmd_check(cfg, out):
    state = build_state(cfg)
    res = constraint_residual(state)
    tol = _constraint_tol(cfg, state.chart)
    f = np.asarray(res.f.data)
    report = _header(cfg, "check")
    report.update(res.as_dict())
    report.update(
        f_min=float(np.min(f)),
        f_max=float(np.max(f)),
        tolerance=tol,
        satisfied=res.satisfied(tol),
        lam=state.lam,
        chart=state.chart.describe(),
    )
    _dump(out / "check.json", report)
    print(f"f_sup={res.f_sup:.6g} (f in [{report['f_min']:.6g}, {report['f_max']:.6g}]) "
          f"omega_sup={res.omega_sup:.6g} tol={tol:g}")
    if not report["satisfied"]:
        print("constraints violated")
        return EXIT_CHECK
    print("constraints satisfied")
    return EXIT_OK


def cmd_evolve(cfg, out):
    state = build_state(cfg)
    traj = _evolve(cfg, state)
    files = {}
    g0 = format_field(state.g)
    W0 = format_field(state.W)
    (out / "g0.efield").write_text(g0)
    (out / "W0.efield").write_text(W0)
    every = int(cfg["snap_every"])
    snaps = []
    if every > 0:
        snapdir = out / "snapshots"
        snapdir.mkdir(exist_ok=True)
        for k in range(0, len(traj), every):
            st = traj.state(k)
            for name, fld in (("g", st.g), ("W", st.W)):
                p = snapdir / f"{name}_{k:06d}.efield"
                p.write_text(format_field(fld))
                snaps.append(p.name)
    (out / "residuals.csv").write_text(residual_csv(traj))
    files["residuals"] = "residuals.csv"
    if not traj.chart.is_grid and traj.n == 3:
        (out / "diagonal.csv").write_text(traj.to_diagonal_csv())
        files["diagonal"] = "diagonal.csv"
    manifest = _header(cfg, "evolve")
    manifest.update(
        run_id=_run_id(cfg, "evolve"),
        chart=traj.chart.describe(),
        dt=float(cfg["dt"]),
        T=float(cfg["T"]),
        lam=state.lam,
        kmax=traj.kmax,
        integrator=traj.integrator,
        samples=len(traj),
        t_final=float(traj.times[-1]),
        status=traj.status,
        status_time=traj.status_time,
        message=traj.message,
        initial_snapshots={"g0.efield": git_blob_hash(g0), "W0.efield": git_blob_hash(W0)},
        snapshots=snaps,
        files=files,
    )
    _dump(out / "manifest.json", manifest)
    print(f"{len(traj)} samples to t={traj.times[-1]:.6g}: {traj.message}")
    return _STATUS_EXIT[traj.status]


def cmd_verify(cfg, out):
    state = build_state(cfg)
    traj = _evolve(cfg, state)
    if len(traj) < 5:
        print(f"too few samples to verify: {traj.message}")
        return _STATUS_EXIT[traj.status] or EXIT_INPUT
    (out / "einstein.csv").write_text(einstein_csv(traj))
    _, res = einstein_residual(traj)
    tol = float(cfg["tolerances"]["einstein"])
    worst = float(np.max(res))
    report = _header(cfg, "verify")
    report.update(
        samples=len(traj),
        status=traj.status,
        message=traj.message,
        einstein_sup=worst,
        tolerance=tol,
        passed=worst <= tol,
    )
    _dump(out / "verify.json", report)
    print(f"einstein_sup={worst:.6g} over {len(res)} interior samples ({traj.message})")
    if traj.status != "ok":
        return _STATUS_EXIT[traj.status]
    return EXIT_OK if worst <= tol else EXIT_CHECK


def cmd_jet(cfg, out):
    state = build_state(cfg)
    K = int(cfg["K"])
    jet = formal_solution(state, K)
    digest = write_jet(out / "jet.ejet", jet)
    res = jet_einstein_residual(jet, K - 2)
    (out / "jet_residuals.csv").write_text(jet_residual_csv(res))
    report = _header(cfg, "jet")
    report.update(K=K, lam=state.lam, jet_hash=digest, max_residual=res.max_norm(),
                  residuals=[list(r) for r in res.as_rows()])
    _dump(out / "jet.json", report)
    print(f"jet of order {K}; max residual coefficient {res.max_norm():.6g} through order {K - 2}")
    return EXIT_OK


def _spinor(cfg, chart):
    spec = cfg["spinor"]
    dim = 2 ** (chart.n // 2)
    raw = np.asarray(spec.get("psi", [1.0, 0.0] * dim), dtype=float)
    if raw.size != 2 * dim:
        raise PreconditionError(f"spinor.psi needs {2 * dim} numbers (interleaved re/im)")
    psi = raw[0::2] + 1j * raw[1::2]
    psi = psi / np.linalg.norm(psi)
    return SpinorField(chart, np.broadcast_to(psi, chart.grid_shape + (dim,)))


def cmd_spinor(cfg, out):
    state = build_state(cfg)
    chart = state.chart
    psi = _spinor(cfg, chart)
    write_spinor(out / "spinor.espin", psi)
    tols = cfg["tolerances"]
    report = _header(cfg, "spinor")
    _, gks = gks_residual(psi, state.W, state.g)
    D = dirac(psi, state.g).psi
    report.update(gks_residual=gks, dirac_norm=float(np.max(np.abs(D))),
                  spin_curvature_residual=spin_curvature_residual(psi, state.g))
    if not chart.is_grid:
        kappa, kres = killing_constant(psi, state.g)
        report.update(killing_constant=kappa, killing_residual=kres)
    if chart.n == 3:
        se = stress_energy_from_spinor(psi, state.g)
        report["stress_energy"] = {
            "A": se.A,
            "symmetry_defect": se.symmetry_defect,
            "reconstruction": se.reconstruction,
        }
    passed = gks <= float(tols["gks"])
    if passed:
        gc = gks_implies_constraints(psi, state.W, state.g)
        report["implied_constraints"] = {
            "lambda": gc.lam,
            "f_sup": gc.f_sup,
            "omega_sup": gc.omega_sup,
            "ric1_residual": gc.ric1_residual,
        }
    code = EXIT_OK if passed else EXIT_CHECK
    if passed and cfg["spinor"].get("extend", True) and state.lam == 0.0 and chart.n == 3:
        traj = _evolve(cfg, state, backfill=0)
        if traj.status != "ok":
            code = _STATUS_EXIT[traj.status]
        elif len(traj) >= 5:
            ext = extend_parallel(psi, traj, gks_tol=float(tols["gks"]),
                                  einstein_tol=float(tols["einstein"]))
            a_max = float(np.max(ext.a))
            report["extension"] = {
                "t_final": float(ext.times[-1]),
                "a_max": a_max,
                "restriction_residual": ext.restriction_residual,
                "einstein_residual": ext.einstein_residual,
                "passed": a_max <= float(tols["extension"]),
            }
            lines = ["t,a"] + [f"{t:.17g},{a:.17g}" for t, a in zip(ext.times, ext.a)]
            (out / "extension.csv").write_text("\n".join(lines) + "\n")
            if a_max > float(tols["extension"]):
                code = EXIT_CHECK
    report["passed"] = code == EXIT_OK
    _dump(out / "spinor.json", report)
    print(f"gks_residual={gks:.3g}" + (f" extension a_max={report['extension']['a_max']:.3g}"
                                       if "extension" in report else ""))
    return code


def cmd_report(cfg, out):
    rows = []
    for p in sorted(out.glob("*.json")):
        if p.name == "report.json":
            continue
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError:
            continue
        keys = ("satisfied", "passed", "status", "einstein_sup", "f_sup", "gks_residual", "max_residual")
        rows.append({"file": p.name, "command": data.get("command"),
                     **{k: data[k] for k in keys if k in data}})
    report = _header(cfg, "report")
    report["entries"] = rows
    _dump(out / "report.json", report)
    for r in rows:
        extras = " ".join(f"{k}={v}" for k, v in r.items() if k not in ("file", "command"))
        print(f"{r['file']:<16} {r['command'] or '-':<8} {extras}")
    if not rows:
        print(f"no reports found in {out}")
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "evolve": cmd_evolve,
    "verify": cmd_verify,
    "jet": cmd_jet,
    "spinor": cmd_spinor,
    "report": cmd_report,
}


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(p):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", default=None, help="output directory (default: ./run-<command>)")
    p.add_argument("--seed", type=int, default=None, help="seed for random data (default 42)")
    p.add_argument("--scenario", help="flat-torus, round-sphere, berger, conformal-perturbation or file")
    p.add_argument("--chart", choices=["grid", "frame"], help="chart kind for flat-torus")
    p.add_argument("-N", type=int, help="grid points per axis")
    p.add_argument("--chirality", choices=["left", "right"])
    p.add_argument("--scale", type=float, help="round-sphere scale s (metric s*sigma)")
    p.add_argument("--lambda", dest="lam", type=float, help="Einstein constant")
    p.add_argument("--W", dest="W", help="umbilical, killing, scalar:<a>, diag:<a,b,c> or file:<path>")
    p.add_argument("--alpha", type=float, help="umbilical factor (overrides the computed one)")
    p.add_argument("--metric-file", help="EFIELD snapshot of the metric")
    p.add_argument("--dt", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--kmax", type=int)
    p.add_argument("-K", type=int, help="jet order")
    p.add_argument("--backfill", type=int)
    p.add_argument("--snap-every", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def _parse_W(text):
    if text in ("umbilical", "killing"):
        return {"type": text}
    kind, _, arg = text.partition(":")
    if kind == "scalar":
        return {"type": "scalar", "value": float(arg)}
    if kind == "diag":
        return {"type": "diagonal", "values": [float(x) for x in arg.split(",")]}
    if kind == "file":
        return {"type": "file", "path": arg}
    raise PreconditionError(f"cannot parse W spec {text!r}")


def _overrides(args):
    o = {}
    simple = {"scenario": args.scenario, "scale": args.scale, "lambda": args.lam, "dt": args.dt,
              "T": args.T, "kmax": args.kmax, "K": args.K, "backfill": args.backfill,
              "snap_every": args.snap_every, "metric_file": args.metric_file, "seed": args.seed}
    o.update({k: v for k, v in simple.items() if v is not None})
    chart = {k: v for k, v in (("kind", args.chart), ("N", args.N), ("chirality", args.chirality))
             if v is not None}
    if chart:
        o["chart"] = chart
    if args.W:
        o["W"] = _parse_W(args.W)
    if args.alpha is not None:
        o.setdefault("W", {"type": "umbilical"})
        o["W"]["alpha"] = args.alpha
    return o


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cauchylab",
        description="Cauchy data, normal-geodesic evolution and generalized Killing spinors.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "check": "evaluate the constraint equations on the initial data",
        "evolve": "integrate the evolution system and write trajectory files",
        "verify": "re-evolve and report the ambient Einstein residual",
        "jet": "compute the formal Taylor solution and its residuals",
        "spinor": "spinor checks: generalized Killing residual, stress-energy, extension",
        "report": "summarise the JSON reports in the output directory",
    }
    for name, text in helps.items():
        _add_common(sub.add_parser(name, help=text, description=text))
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        out = Path(args.out) if args.out else Path(f"run-{args.command}")
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except (CauchyLabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
