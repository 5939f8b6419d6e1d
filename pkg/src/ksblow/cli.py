"""Command line interface.

Subcommands mirror the library surface: the algebraic criteria (classify,
kappa, gamma-window), parameter-plane exports (region-grid, thm2-grid), the
simulation pipelines (simulate, pipeline), trajectory verification (verify)
and a debug solver for the concentration BVP (solve-bvp).

Exit codes: 0 success, 2 validation error (bad flags or config), 3 runtime
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import regions as reg
from .elliptic import solve_chemo_bvp
from .grids import MassGrid
from .params import ParamValidationError
from .scenario import (
    ScenarioValidationError,
    load_scenario,
    read_trajectory_csv,
    run_scenario,
    verify_trajectory,
    write_grid_csv,
)


def _add_param_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", type=Path, help="JSON file mirroring ModelParams fields (or a full scenario)")
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--q", type=float)
    sp.add_argument("--m", type=float)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--kappa", type=float)


def _algebra_inputs(args) -> dict:
    """Merge --config values with flag overrides for the algebra commands."""
    vals: dict = {}
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        if "params" in doc:
            doc = doc["params"]
        vals.update(doc)
    for key in ("n", "p", "q", "m", "alpha", "kappa"):
        v = getattr(args, key, None)
        if v is not None:
            vals[key] = v
    vals.setdefault("q", 0.0)
    vals.setdefault("kappa", 1.0)
    missing = [k for k in ("n", "p", "m", "alpha") if k not in vals]
    if missing:
        raise ScenarioValidationError(
            [f"{k}: required (flag --{k} or config field)" for k in missing])
    return vals


def _emit(doc: dict, out: Path | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_classify(args) -> int:
    v = _algebra_inputs(args)
    labels = reg.classify_region(v["n"], v["p"], v["m"], v["alpha"])
    doc = {
        "labels": [lab.tag for lab in labels],
        "coarse": sorted({lab.coarse for lab in labels}),
        "thm2_label": reg.classify_thm2(v["n"], v["m"], v["alpha"]),
    }
    _emit(doc, args.out)
    return 0


def cmd_kappa(args) -> int:
    v = _algebra_inputs(args)
    per = reg.kappa_thresholds(v["n"], v["p"], v["q"], v["m"], v["alpha"])
    doc = {
        "kappa_thresholds": per,
        "kappa_max": min(per.values()) if per else None,
        "kappa_max_thm2": None,
    }
    if reg.classify_thm2(v["n"], v["m"], v["alpha"]) is not None:
        doc["kappa_max_thm2"] = reg.kappa_threshold_thm2(
            v["n"], v["q"], v["m"], v["alpha"])
    _emit(doc, args.out)
    return 0


def cmd_gamma_window(args) -> int:
    v = _algebra_inputs(args)
    labels = reg.classify_region(v["n"], v["p"], v["m"], v["alpha"])
    if not labels:
        raise ScenarioValidationError(
            ["no region matches (n, p, m, alpha); gamma window undefined"])
    win = reg.gamma_window(v["n"], v["p"], v["q"], v["m"], v["alpha"], v["kappa"])
    doc = {
        "lower": win.lower, "upper": win.upper, "lemma": win.lemma,
        "feasible": win.feasible,
        "theta": reg.theta_exponent(v["n"], v["p"], v["q"], v["m"],
                                    v["alpha"], v["kappa"], win.lemma)
        if win.feasible else None,
    }
    _emit(doc, args.out)
    return 0


def _range(args) -> tuple[tuple[float, float], tuple[float, float]]:
    return (args.m_min, args.m_max), (args.alpha_min, args.alpha_max)


def cmd_region_grid(args) -> int:
    vals: dict = {}
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        vals.update(doc.get("params", doc))
    for key in ("n", "p", "q"):
        v = getattr(args, key, None)
        if v is not None:
            vals[key] = v
    vals.setdefault("q", 0.0)
    missing = [k for k in ("n", "p") if k not in vals]
    if missing:
        raise ScenarioValidationError(
            [f"{k}: required (flag --{k} or config field)" for k in missing])
    m_range, a_range = _range(args)
    cells = reg.region_grid(vals["n"], vals["p"], m_range, a_range,
                            args.res, vals["q"])
    out = args.out or Path(f"regions_thm1_n{vals['n']}.csv")
    write_grid_csv(cells, out)
    print(f"wrote {out}", file=sys.stderr)
    return 0


def cmd_thm2_grid(args) -> int:
    vals: dict = {}
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        vals.update(doc.get("params", doc))
    if args.n is not None:
        vals["n"] = args.n
    if args.q is not None:
        vals["q"] = args.q
    vals.setdefault("q", 0.0)
    if "n" not in vals:
        raise ScenarioValidationError(["n: required (flag --n or config field)"])
    m_range, a_range = _range(args)
    cells = reg.thm2_grid(vals["n"], m_range, a_range, args.res, vals["q"])
    out = args.out or Path(f"regions_thm2_n{vals['n']}.csv")
    write_grid_csv(cells, out, thm2=True)
    print(f"wrote {out}", file=sys.stderr)
    return 0


def _out_dir(args) -> Path:
    out = args.out or Path("ksblow-out")
    out = Path(out)
    if out.suffix == ".csv":
        # `--out traj.csv` form: the parent holds the bundle
        return out.parent if str(out.parent) != "" else Path(".")
    return out


def cmd_simulate(args) -> int:
    scn = load_scenario(args.config)
    out_dir = _out_dir(args)
    bundle = run_scenario(scn, out_dir, seed=args.seed)
    if args.out and Path(args.out).suffix == ".csv":
        target = Path(args.out)
        if target.name != "traj.csv":
            (out_dir / "traj.csv").replace(target)
    rep = bundle.get("blowup_report", {})
    if rep:
        print(f"trigger={rep['trigger']} detected={rep['detected']} "
              f"T*={rep['T_star_numeric']} K_fit={rep['K_fit']:.6g}",
              file=sys.stderr)
    return 0


def cmd_pipeline(args) -> int:
    scn = load_scenario(args.config)
    scn.mode = "thm2-pipeline"
    bundle = run_scenario(scn, _out_dir(args), seed=args.seed)
    t2 = bundle["thm2"]
    print(f"label={t2['label']} kappa_max={t2['kappa_max']:.6g} p={t2['p']:.6g} "
          f"chain_held={t2.get('hypothesis_chain_held')}", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    scn = load_scenario(args.config)
    params = scn.params
    states, grid = read_trajectory_csv(args.traj)
    s0_list = args.s0 if args.s0 else list(scn.probes.s0_list)
    labels = reg.classify_region(params.n, params.p, params.m, params.alpha)
    if not labels:
        raise ScenarioValidationError(["no region matches the scenario parameters"])
    win = reg.gamma_window(params.n, params.p, params.q, params.m,
                           params.alpha, params.kappa)
    if args.gamma is not None:
        gamma = args.gamma
    elif not isinstance(scn.probes.gamma, str):
        gamma = float(scn.probes.gamma)
    else:
        gamma = win.midpoint()
    if args.theta is not None:
        theta = args.theta
    else:  # --theta-from-regions is the default behaviour
        theta = reg.theta_exponent(params.n, params.p, params.q, params.m,
                                   params.alpha, params.kappa, win.lemma)
    doc = verify_trajectory(states, params, s0_list, gamma, theta, win.lemma)
    doc.pop("_samples", None)
    _emit(doc, args.out)
    return 0


def cmd_solve_bvp(args) -> int:
    rows = []
    with open(args.input) as fh:
        for row in csv.reader(fh):
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                continue  # header or blank line
    if len(rows) < 17:
        raise ScenarioValidationError(
            ["--input: need at least 17 (s, w) rows with s from 0 to R^n"])
    rows.sort()
    s = np.array([r[0] for r in rows])
    w = np.array([r[1] for r in rows])
    grid = MassGrid(s=s, grading=1.0)
    field = solve_chemo_bvp(w, grid, args.n, tol=args.tol)
    out = args.out or Path(args.input).with_suffix(".z.csv")
    with open(out, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["s", "z", "v"])
        for i in range(s.size):
            wr.writerow([repr(float(s[i])), repr(float(field.z[i])),
                         repr(float(field.v[i]))])
    print(f"wrote {out} (residual {field.residual_norm:.3e})", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ksblow",
        description="Blow-up criteria and radial simulation for a quasilinear "
                    "chemotaxis system with logistic source")
    ap.add_argument("--seed", type=int, default=0,
                    help="seed for any sampled diagnostics (default 0)")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, fn in (("classify", cmd_classify), ("kappa", cmd_kappa),
                     ("gamma-window", cmd_gamma_window)):
        sp = sub.add_parser(name)
        _add_param_flags(sp)
        sp.add_argument("--out", type=Path)
        sp.set_defaults(fn=fn)

    sp = sub.add_parser("region-grid")
    _add_param_flags(sp)
    sp.add_argument("--res", type=int, default=200)
    sp.add_argument("--m-min", type=float, default=0.0)
    sp.add_argument("--m-max", type=float, default=2.0)
    sp.add_argument("--alpha-min", type=float, default=0.0)
    sp.add_argument("--alpha-max", type=float, default=2.0)
    sp.add_argument("--out", type=Path)
    sp.set_defaults(fn=cmd_region_grid)

    sp = sub.add_parser("thm2-grid")
    sp.add_argument("--config", type=Path)
    sp.add_argument("--n", type=int)
    sp.add_argument("--q", type=float)
    sp.add_argument("--res", type=int, default=200)
    sp.add_argument("--m-min", type=float, default=0.0)
    sp.add_argument("--m-max", type=float, default=2.0)
    sp.add_argument("--alpha-min", type=float, default=0.0)
    sp.add_argument("--alpha-max", type=float, default=2.0)
    sp.add_argument("--out", type=Path)
    sp.set_defaults(fn=cmd_thm2_grid)

    for name, fn in (("simulate", cmd_simulate), ("pipeline", cmd_pipeline)):
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, required=True)
        sp.add_argument("--out", type=Path)
        sp.set_defaults(fn=fn)

    sp = sub.add_parser("verify")
    sp.add_argument("--traj", type=Path, required=True)
    sp.add_argument("--config", type=Path, required=True,
                    help="scenario JSON the trajectory was produced from")
    sp.add_argument("--s0", type=float, action="append")
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--theta", type=float)
    sp.add_argument("--theta-from-regions", action="store_true",
                    help="derive theta from the matched region (default)")
    sp.add_argument("--out", type=Path)
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("solve-bvp")
    sp.add_argument("--input", type=Path, required=True,
                    help="CSV of (s, w) rows with s from 0 to R^n")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--out", type=Path)
    sp.set_defaults(fn=cmd_solve_bvp)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ScenarioValidationError, ParamValidationError) as exc:
        problems = getattr(exc, "problems", [str(exc)])
        for p in problems:
            print(f"validation error: {p}", file=sys.stderr)
        return 2
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # anything else is a runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
