"""Scenario configuration, orchestration pipelines and artifact persistence.

A scenario is a JSON document with four blocks: ``params`` (the model
parameters), ``numerics`` (grid and stepping controls), ``probes`` (moment
probe locations and initial-data knobs) and ``mode``.  Field names match the
dataclass fields verbatim; unknown fields are rejected and every invalid
field is reported at once.  All outputs are deterministic: floats are written
with shortest round-trip formatting and any sampling is seeded.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import dynamics as dyn
from . import moments as mom
from . import regions as reg
from .elliptic import get_solver
from .grids import MassGrid
from .params import ModelParams, ParamValidationError, RadialTable


class ScenarioValidationError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(problems))


MODES = ("classify-only", "simulate", "simulate-and-verify", "thm2-pipeline")


@dataclass
class Numerics:
    N: int = 256
    grading: float = 2.0
    cfl: float = 0.35
    u_cap: float | None = None
    dt_min: float = 1e-12
    T_end: float = 1.0
    snapshot_every: float | None = None
    moment_every: float | None = None


@dataclass
class Probes:
    s0_list: list[float] = field(default_factory=lambda: [0.05])
    gamma: float | str = "auto"
    eta: float = 0.5
    r1: float = 0.3
    L: float | None = None     # initial-data cap; defaults to params.K
    eps: float = 0.1           # increment above the derived decay exponent p0


@dataclass
class Scenario:
    params: ModelParams
    numerics: Numerics = field(default_factory=Numerics)
    probes: Probes = field(default_factory=Probes)
    mode: str = "simulate"
    lambda_table: str | None = None   # CSV path with (r, lambda) rows
    mu_table: str | None = None

    def to_dict(self) -> dict:
        d = {
            "params": {k: v for k, v in dataclasses.asdict(self.params).items()},
            "numerics": dataclasses.asdict(self.numerics),
            "probes": dataclasses.asdict(self.probes),
            "mode": self.mode,
        }
        if self.lambda_table is not None:
            d["lambda_table"] = self.lambda_table
        if self.mu_table is not None:
            d["mu_table"] = self.mu_table
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _take(block: dict, cls, label: str, problems: list[str]):
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = set(block) - allowed
    for k in sorted(unknown):
        problems.append(f"{label}.{k}: unknown field")
    return {k: v for k, v in block.items() if k in allowed}


def scenario_from_dict(doc: dict) -> Scenario:
    problems: list[str] = []
    if not isinstance(doc, dict):
        raise ScenarioValidationError(["config root must be a JSON object"])
    top_allowed = {"params", "numerics", "probes", "mode", "lambda_table", "mu_table"}
    for k in sorted(set(doc) - top_allowed):
        problems.append(f"{k}: unknown field")
    if "params" not in doc:
        problems.append("params: missing required block")
        raise ScenarioValidationError(problems)

    pkw = _take(dict(doc["params"]), ModelParams, "params", problems)
    params = None
    try:
        params = ModelParams(**pkw)
    except ParamValidationError as exc:
        problems.extend(f"params.{p}" for p in exc.problems)
    except TypeError as exc:
        problems.append(f"params: {exc}")

    nkw = _take(dict(doc.get("numerics", {})), Numerics, "numerics", problems)
    numerics = Numerics(**nkw)
    if numerics.N < 16:
        problems.append(f"numerics.N: must be >= 16, got {numerics.N}")
    if numerics.grading < 1:
        problems.append(f"numerics.grading: must be >= 1, got {numerics.grading}")
    if numerics.T_end <= 0:
        problems.append(f"numerics.T_end: must be > 0, got {numerics.T_end}")
    if not 0 < numerics.cfl <= 0.5:
        problems.append(f"numerics.cfl: must lie in (0, 0.5], got {numerics.cfl}")

    bkw = _take(dict(doc.get("probes", {})), Probes, "probes", problems)
    probes = Probes(**bkw)
    if isinstance(probes.gamma, str) and probes.gamma != "auto":
        problems.append(f"probes.gamma: must be a number or 'auto', got {probes.gamma!r}")
    if not isinstance(probes.gamma, str) and not 0 < float(probes.gamma) < 1:
        problems.append(f"probes.gamma: must lie in (0, 1), got {probes.gamma}")
    if not 0 < probes.eta < 1:
        problems.append(f"probes.eta: must lie in (0, 1), got {probes.eta}")
    if not probes.s0_list:
        problems.append("probes.s0_list: must not be empty")

    mode = doc.get("mode", "simulate")
    if mode not in MODES:
        problems.append(f"mode: must be one of {MODES}, got {mode!r}")

    if problems:
        raise ScenarioValidationError(problems)
    return Scenario(params=params, numerics=numerics, probes=probes, mode=mode,
                    lambda_table=doc.get("lambda_table"),
                    mu_table=doc.get("mu_table"))


def load_scenario(path: str | Path) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))


# -- CSV / JSON writers -------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    return repr(float(x))


def write_grid_csv(cells: list[reg.GridCell], path: Path, thm2: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        if thm2:
            wr.writerow(["m", "alpha", "label", "kappa_max", "p0"])
            for c in cells:
                wr.writerow([_fmt(c.m), _fmt(c.alpha), c.label,
                             _fmt(c.kappa_max), _fmt(c.p0)])
        else:
            wr.writerow(["m", "alpha", "label", "kappa_max", "gamma_lo", "gamma_hi"])
            for c in cells:
                wr.writerow([_fmt(c.m), _fmt(c.alpha), c.label,
                             _fmt(c.kappa_max), _fmt(c.gamma_lo), _fmt(c.gamma_hi)])


def export_region_figure_data(n: int, p: float, resolution: int, out_dir: Path,
                              m_range=(0.0, 2.0), alpha_range=(0.0, 2.0),
                              q: float = 0.0) -> dict[str, Path]:
    """Emit the parameter-plane grids (both families) as plot-ready CSVs."""
    if n not in (3, 4, 5, 6):
        raise ScenarioValidationError([f"n must be in 3..6 for figure export, got {n}"])
    if p < n:
        raise ScenarioValidationError([f"p must be >= n, got {p}"])
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    thm1 = out_dir / f"regions_thm1_n{n}.csv"
    thm2 = out_dir / f"regions_thm2_n{n}.csv"
    write_grid_csv(reg.region_grid(n, p, m_range, alpha_range, resolution, q), thm1)
    write_grid_csv(reg.thm2_grid(n, m_range, alpha_range, resolution, q), thm2,
                   thm2=True)
    return {"thm1": thm1, "thm2": thm2}


def write_trajectory_csv(snapshots: list[dyn.MassState], params: ModelParams,
                         path: Path) -> None:
    solver = get_solver(snapshots[0].grid, params.n)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "s", "w", "u", "z"])
        for st in snapshots:
            u = dyn.reconstruct_u(st, params.n)
            z = solver.solve(st.w, with_v=False).z
            for i in range(st.grid.s.size):
                wr.writerow([_fmt(st.t), _fmt(st.grid.s[i]), _fmt(st.w[i]),
                             _fmt(u[i]), _fmt(z[i])])


def read_trajectory_csv(path: Path) -> tuple[list[dyn.MassState], MassGrid]:
    rows_by_t: dict[float, list[tuple[float, float]]] = {}
    with open(path) as fh:
        rd = csv.reader(fh)
        header = next(rd)
        ci = {name: header.index(name) for name in ("t", "s", "w")}
        for row in rd:
            t = float(row[ci["t"]])
            rows_by_t.setdefault(t, []).append(
                (float(row[ci["s"]]), float(row[ci["w"]])))
    times = sorted(rows_by_t)
    first = sorted(rows_by_t[times[0]])
    s = np.array([r[0] for r in first])
    grid = MassGrid(s=s, grading=1.0)
    states = []
    for t in times:
        rows = sorted(rows_by_t[t])
        states.append(dyn.MassState(grid=grid,
                                    w=np.array([r[1] for r in rows]), t=t))
    return states, grid


def write_moments_csv(samples: list[mom.MomentSample], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "s0", "gamma", "phi", "psi_alpha",
                     "I1", "I2", "I3", "I4", "dphi_dt_fd", "ineq_margin", "theta"])
        for smp in samples:
            wr.writerow([_fmt(smp.t), _fmt(smp.s0), _fmt(smp.gamma),
                         _fmt(smp.phi), _fmt(smp.psi_alpha),
                         *(_fmt(v) for v in smp.I),
                         _fmt(smp.dphi_dt_fd), _fmt(smp.ineq_margin),
                         _fmt(smp.theta)])


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_json(doc: dict, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


# -- orchestration ------------------------------------------------------------

def _initial_moment_checks(state0: dyn.MassState, probes: Probes,
                           params: ModelParams, gamma: float) -> list[dict]:
    """Initial moment vs its closed-form lower bound, per probe location.

    The bound eta^2 M1 / omega_{n-1} * s0^(2-gamma) applies when the inner
    mass M1 sits inside the ball of radius ((1-eta) s0)^(1/n); probes whose
    r1 exceeds that radius are reported as not applicable.
    """
    out = []
    for s0 in probes.s0_list:
        _, s0s = mom.snap_probe(state0.grid, s0)
        r1_required = ((1 - probes.eta) * s0s) ** (1.0 / params.n)
        applicable = probes.r1 <= r1_required * (1 + 1e-12)
        entry = {
            "s0": s0s, "eta": probes.eta, "r1_required": r1_required,
            "applicable": applicable,
            "phi0": mom.phi(state0, s0s, gamma),
            "bound": mom.phi0_lower_bound(probes.eta, params.M1, params.n,
                                          gamma, s0s),
        }
        entry["ok"] = entry["phi0"] >= entry["bound"] if applicable else None
        out.append(entry)
    return out


def classify_report(params: ModelParams) -> dict:
    labels = reg.classify_region(params.n, params.p, params.m, params.alpha)
    doc: dict[str, Any] = {
        "labels": [lab.tag for lab in labels],
        "coarse": sorted({lab.coarse for lab in labels}),
        "thm2_label": reg.classify_thm2(params.n, params.m, params.alpha),
    }
    if labels:
        doc["kappa_thresholds"] = reg.kappa_thresholds(
            params.n, params.p, params.q, params.m, params.alpha)
        doc["kappa_max"] = reg.kappa_threshold(
            params.n, params.p, params.q, params.m, params.alpha)
        doc["kappa_admissible"] = params.kappa < doc["kappa_max"]
        win = reg.gamma_window(params.n, params.p, params.q, params.m,
                               params.alpha, params.kappa)
        doc["gamma_window"] = {
            "lower": win.lower, "upper": win.upper,
            "lemma": win.lemma, "feasible": win.feasible,
        }
        if win.feasible:
            doc["theta"] = reg.theta_exponent(
                params.n, params.p, params.q, params.m, params.alpha,
                params.kappa, win.lemma)
    if doc["thm2_label"] is not None:
        doc["kappa_max_thm2"] = reg.kappa_threshold_thm2(
            params.n, params.q, params.m, params.alpha)
        doc["p0"] = reg.exponent_p0(params.n, params.m, params.alpha)
    return doc


def _resolve_gamma(scn: Scenario, params: ModelParams) -> tuple[float, str, float]:
    """Returns (gamma, lemma, theta); 'auto' takes the window midpoint."""
    labels = reg.classify_region(params.n, params.p, params.m, params.alpha)
    if not labels:
        raise ScenarioValidationError(
            ["probes.gamma: no parameter region matches; gamma='auto' undefined"])
    win = reg.gamma_window(params.n, params.p, params.q, params.m,
                           params.alpha, params.kappa)
    if isinstance(scn.probes.gamma, str):
        if not win.feasible:
            raise ScenarioValidationError(
                ["probes.gamma: window infeasible; cannot use 'auto'"])
        gamma = win.midpoint()
    else:
        gamma = float(scn.probes.gamma)
    theta = reg.theta_exponent(params.n, params.p, params.q, params.m,
                               params.alpha, params.kappa, win.lemma)
    return gamma, win.lemma, theta


def _coefficient_fns(scn: Scenario):
    lam = RadialTable.from_csv(scn.lambda_table) if scn.lambda_table else None
    mu = RadialTable.from_csv(scn.mu_table) if scn.mu_table else None
    return lam, mu


def verify_trajectory(states: list[dyn.MassState], params: ModelParams,
                      s0_list: list[float], gamma: float, theta: float,
                      lemma: str, K: float | None = None) -> dict:
    """Moment evaluation + inequality verification over a state series."""
    solver = get_solver(states[0].grid, params.n)
    samples: list[mom.MomentSample] = []
    lemma_reports = []
    for st in states:
        ch = solver.solve(st.w, with_v=False)
        samples.extend(mom.sample_moments(st, ch, s0_list, gamma, params, theta))
        for s0 in s0_list:
            lemma_reports.append(
                mom.verify_lemma_bounds(st, ch, s0, gamma, params, K=K, lemma=lemma))
    groups = mom.finalize_moment_series(samples)
    per_probe = {}
    for s0, grp in sorted(groups.items()):
        entry: dict[str, Any] = {"n_samples": len(grp)}
        if len(grp) >= 3:
            ok, worst = mom.check_paphi_inequality(grp)
            ki = mom.verify_keyineq(grp, s0, gamma, theta, params)
            c1, c2 = (mom.riccati_coefficients(ki.C_fit, s0, gamma, theta,
                                               params.p, params.n, params.alpha)
                      if ki.C_fit > 0 else (None, None))
            for smp in grp:
                smp.c1, smp.c2 = c1, c2
            entry.update({
                "paphi_ok": ok, "paphi_worst_margin": worst,
                "keyineq_C_fit": ki.C_fit, "keyineq_worst_t": ki.worst_t,
                "riccati_c1": c1, "riccati_c2": c2,
            })
            phi0 = grp[0].phi
            if c1 is not None:
                entry["riccati_T_blowup"] = mom.riccati_blowup_time(phi0, c1, c2)
        per_probe[repr(float(s0))] = entry
    checks_by_name: dict[str, dict] = {}
    for repo in lemma_reports:
        for c in repo.checks:
            agg = checks_by_name.setdefault(c.name, {
                "evaluated": 0, "hypothesis_met": 0, "passed": 0,
                "worst_margin": math.inf, "max_fitted_C": 0.0})
            agg["evaluated"] += 1
            if c.hypothesis_met:
                agg["hypothesis_met"] += 1
                if c.passed:
                    agg["passed"] += 1
                if c.margin is not None:
                    agg["worst_margin"] = min(agg["worst_margin"], c.margin)
                if c.constant is not None:
                    agg["max_fitted_C"] = max(agg["max_fitted_C"], c.constant)
    for agg in checks_by_name.values():
        if agg["worst_margin"] is math.inf:
            agg["worst_margin"] = None
    return {
        "gamma": gamma, "theta": theta, "lemma": lemma,
        "probes": per_probe,
        "lemma_checks": checks_by_name,
        "gamma_tilde": lemma_reports[0].gamma_tilde if lemma_reports else None,
        "all_passed": all(
            agg["passed"] == agg["hypothesis_met"]
            for agg in checks_by_name.values()),
        "_samples": samples,
    }


def run_scenario(scn: Scenario, out_dir: str | Path, seed: int = 0) -> dict:
    """Execute a scenario and persist its artifact bundle under out_dir.

    Runtime failures are written into report.json before propagating, so a
    partially produced bundle always records what went wrong.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle: dict[str, Any] = {"mode": scn.mode, "seed": seed}
    (out_dir / "scenario.json").write_text(scn.to_json() + "\n")
    try:
        return _run_scenario_inner(scn, out_dir, bundle)
    except ScenarioValidationError:
        raise
    except Exception as exc:
        bundle["error"] = f"{type(exc).__name__}: {exc}"
        write_json(bundle, out_dir / "report.json")
        raise


def _run_scenario_inner(scn: Scenario, out_dir: Path, bundle: dict) -> dict:
    params = scn.params

    if scn.mode == "classify-only":
        bundle["classification"] = classify_report(params)
        write_json(bundle, out_dir / "report.json")
        return bundle

    if scn.mode == "thm2-pipeline":
        label = reg.classify_thm2(params.n, params.m, params.alpha)
        if label is None:
            raise ScenarioValidationError(
                ["mode: thm2-pipeline requires a matching construction region "
                 "(classify_thm2 returned None)"])
        kmax = reg.kappa_threshold_thm2(params.n, params.q, params.m, params.alpha)
        p_run = reg.exponent_p0(params.n, params.m, params.alpha, scn.probes.eps)
        bundle["thm2"] = {
            "label": label, "kappa_max": kmax,
            "kappa_admissible": params.kappa < kmax,
            "p0": p_run - scn.probes.eps, "eps": scn.probes.eps, "p": p_run,
        }
        params = dataclasses.replace(params, p=p_run)

    gamma, lemma, theta = _resolve_gamma(scn, params)
    bundle["gamma"] = gamma
    bundle["theta"] = theta
    bundle["classification"] = classify_report(params)

    grid = MassGrid.graded(params.R, params.n, scn.numerics.N, scn.numerics.grading)
    L = scn.probes.L if scn.probes.L is not None else params.K
    state0 = dyn.init_profile(params, grid, r1=scn.probes.r1, L=L, p=params.p)
    lam_fn, mu_fn = _coefficient_fns(scn)

    verify = scn.mode in ("simulate-and-verify", "thm2-pipeline")
    hook = None
    if verify:
        def hook(st, ch, s0l, gm):
            return mom.sample_moments(st, ch, s0l, gm, params, theta)

    result = dyn.run(
        params, state0, scn.numerics.T_end,
        s0_list=list(scn.probes.s0_list), gamma=gamma, moment_hook=hook,
        cfl=scn.numerics.cfl, u_cap=scn.numerics.u_cap,
        dt_min=scn.numerics.dt_min,
        snapshot_every=scn.numerics.snapshot_every,
        moment_every=scn.numerics.moment_every,
        lambda_fn=lam_fn, mu_fn=mu_fn)
    rep = result.report
    bundle["blowup_report"] = {
        "detected": rep.detected,
        "T_star_numeric": rep.T_star_numeric,
        "trigger": rep.trigger,
        "K_fit": rep.K_fit,
        "power_bound_ok_throughout": all(ok for _, ok in rep.power_bound_ok),
        "sup_u_history": [[t, v] for t, v in rep.sup_u_history],
        "power_bound_ok": [[t, bool(ok)] for t, ok in rep.power_bound_ok],
    }
    write_trajectory_csv(result.snapshots, params, out_dir / "traj.csv")

    if verify:
        ver = verify_trajectory(
            [dyn.MassState(grid=grid, w=st.w, t=st.t) for st in result.snapshots],
            params, list(scn.probes.s0_list), gamma, theta, lemma)
        samples = mom.finalize_moment_series(result.moment_series)
        write_moments_csv(
            [smp for grp in samples.values() for smp in grp],
            out_dir / "moments.csv")
        in_run = {}
        for s0, grp in sorted(samples.items()):
            if len(grp) < 3:
                continue
            ok, worst = mom.check_paphi_inequality(grp)
            ki = mom.verify_keyineq(grp, s0, gamma, theta, params)
            in_run[repr(float(s0))] = {
                "n_samples": len(grp), "paphi_ok": ok,
                "paphi_worst_margin": worst, "keyineq_C_fit": ki.C_fit,
            }
        ver.pop("_samples", None)
        ver["initial_moment"] = _initial_moment_checks(
            state0, scn.probes, params, gamma)
        bundle["verification"] = ver
        bundle["verification_in_run"] = in_run
        if scn.mode == "thm2-pipeline":
            bundle["thm2"]["hypothesis_chain_held"] = bool(
                bundle["blowup_report"]["power_bound_ok_throughout"]
                and bundle["classification"]["labels"]
                and bundle["classification"]["kappa_admissible"]
                and bundle["classification"]["gamma_window"]["feasible"])

    write_json(bundle, out_dir / "report.json")
    return bundle
