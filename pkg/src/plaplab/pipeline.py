"""End-to-end orchestration: gates, stages, reproducible artifacts.

Stage order is fixed: hypothesis checks, eigenpair, behavior/growth
conditions, sub-solution, growth bounds, continuation, reaction
recovery, strong residual.  A failed gate short-circuits the run with
a structured report; no solve runs after a failed gate.  Outputs are
byte-reproducible for a fixed config and seed; wall-clock timings are
kept out of the hashed report.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fields import DiscreteField, DistanceField
from .measure import (
    BoxSet,
    GridField,
    LipschitzMap,
    jacobian_counterexample,
    verify_locality,
    verify_null_projection,
)
from .mesh import build_mesh, save_mesh
from .mollify import growth_bounds_check, make_reactions
from .nonlinearity import check_conditions, check_hypotheses_f, check_hypotheses_g
from .plap import PlapConfig, first_eigenpair
from .scheme import (
    build_subsolution,
    recover_reaction_fields,
    run_continuation,
    strong_residual_check,
    verify_subsolution,
)

GATE_ORDER = (
    "hypotheses",
    "eigenpair",
    "conditions",
    "subsolution",
    "growth_bounds",
    "continuation",
    "recovery",
    "strong_residual",
)


@dataclass
class GateResult:
    name: str
    passed: bool
    details: dict


@dataclass
class RunReport:
    status: str  # PASS | GATE_FAIL | ERROR
    gates: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    mesh: object = None
    eig: object = None
    condition_report: object = None
    sub: object = None
    trace: object = None
    strong_report: object = None
    residual_stats: object = None

    def gate(self, name):
        for g in self.gates:
            if g.name == name:
                return g
        return None

    @property
    def all_passed(self):
        return self.status == "PASS"


def _timer(report, name):
    class _T:
        def __enter__(self):
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, *exc):
            report.timings[name] = time.perf_counter() - self.t0

    return _T()


def run_pipeline(cfg, stop_after=None):
    """Execute the gated pipeline; see module docstring for the order."""
    report = RunReport(status="PASS")
    summary = report.summary
    summary["seed"] = cfg.seed
    summary["p"] = cfg.p
    summary["gamma"] = cfg.gamma
    summary["h"] = cfg.h

    def fail(gate_name, details):
        report.gates.append(GateResult(gate_name, False, details))
        report.status = "GATE_FAIL"
        return report

    def ok(gate_name, details):
        report.gates.append(GateResult(gate_name, True, details))

    # -- hypotheses ----------------------------------------------------
    with _timer(report, "hypotheses"):
        hf = check_hypotheses_f(cfg.fspec)
        hg = check_hypotheses_g(cfg.gspec, seed=cfg.seed)
    details = {"hf_flags": list(hf), "hg_flags": list(hg)}
    if not (all(hf) and all(hg)):
        return fail("hypotheses", details)
    ok("hypotheses", details)

    # -- mesh + eigenpair ---------------------------------------------
    with _timer(report, "eigenpair"):
        mesh = build_mesh(cfg.polygon, cfg.h)
        report.mesh = mesh
        pcfg = PlapConfig(
            p=cfg.p,
            tol_residual=cfg.tol_solver,
            max_iter=400,
            validation_mode=cfg.validation_mode,
        )
        try:
            eig = first_eigenpair(pcfg, mesh, eig_tol=1e-12)
        except Exception as exc:
            return fail("eigenpair", {"error": str(exc)})
    report.eig = eig
    details = {
        "lambda1": eig.lambda1,
        "iterations": eig.iterations,
        "mesh_vertices": mesh.num_vertices,
        "mesh_triangles": mesh.num_triangles,
        "mesh_degraded": mesh.degraded,
    }
    summary["lambda1"] = eig.lambda1
    ok("eigenpair", details)
    if stop_after == "eigenpair":
        return report

    # -- conditions ----------------------------------------------------
    with _timer(report, "conditions"):
        cond = check_conditions(cfg.fspec, cfg.gspec, eig.lambda1, cfg.p)
        cond = cond.with_hypothesis_flags(hf, hg)
    report.condition_report = cond
    details = {
        "c0_branch": cond.c0_branch,
        "Lf": cond.Lf,
        "Lg": cond.Lg,
        "theta": cond.theta,
        "sigma": cond.sigma,
        "coercivity_margin": cond.coercivity_margin,
        "growth_ok": cond.growth_ok,
        "c0_indeterminate": cond.c0_indeterminate,
    }
    summary["conditions"] = details
    if cond.c0_branch == "FAIL":
        return fail("conditions", details)
    if not cond.growth_ok or cond.coercivity_margin <= 0:
        return fail("conditions", details)
    ok("conditions", details)
    if stop_after == "conditions":
        return report

    # -- sub-solution ----------------------------------------------------
    with _timer(report, "subsolution"):
        try:
            sub = build_subsolution(cond, eig, cfg.fspec, cfg.gspec, cfg.p)
        except Exception as exc:
            return fail("subsolution", {"error": str(exc)})
        margin = verify_subsolution(sub, cfg.fspec, cfg.gspec, cfg.p)
    report.sub = sub
    details = {
        "branch": sub.branch,
        "delta": sub.delta,
        "k": sub.k,
        "theta": sub.theta,
        "sup_norm": sub.field.sup_norm(),
        "weak_inequality_margin": margin,
    }
    summary["subsolution"] = details
    if margin < -1e-9 * max(1.0, eig.lambda1):
        return fail("subsolution", details)
    ok("subsolution", details)
    if stop_after == "subsolution":
        return report

    # -- growth bounds ---------------------------------------------------
    schedule = cfg.epsilon_schedule
    if schedule == "auto":
        schedule = [sub.delta / 2.0 ** (k + 1) for k in range(cfg.epsilon_steps)]
    else:
        schedule = [e for e in schedule if e < sub.delta]
        if not schedule:
            return fail(
                "growth_bounds",
                {"error": f"no schedule entry below delta={sub.delta}"},
            )
    with _timer(report, "growth_bounds"):
        reactions0 = make_reactions(cfg.fspec, cfg.gspec, sub.field, schedule[0])
        growth = growth_bounds_check(
            reactions0, cond, cfg.p, cfg.gamma, seed=cfg.seed
        )
    details = {
        "violation_f": growth.violation_f,
        "violation_g": growth.violation_g,
        "c_f": growth.c_f,
        "c_g": growth.c_g,
        "floor_slope": growth.floor_slope,
    }
    summary["growth_bounds"] = details
    if max(growth.violation_f, growth.violation_g) > 1e-9:
        return fail("growth_bounds", details)
    ok("growth_bounds", details)

    # -- continuation ------------------------------------------------------
    with _timer(report, "continuation"):
        trace = run_continuation(
            schedule,
            sub,
            cfg.fspec,
            cfg.gspec,
            PlapConfig(
                p=cfg.p,
                tol_residual=cfg.tol_solver,
                max_iter=400,
                validation_mode=cfg.validation_mode,
            ),
            report=cond,
            tol_fixed=cfg.tol_fixed_point,
        )
    report.trace = trace
    details = {
        "epsilons": trace.epsilons,
        "sup_norms": [r.sup_norm for r in trace.records],
        "grad_sup_norms": [r.grad_sup_norm for r in trace.records],
        "comparison_margins": [r.comparison_margin for r in trace.records],
        "residuals": [r.residual_norm for r in trace.records],
        "sup_diffs": trace.sup_diffs(),
        "outer_iterations": [r.outer_iterations for r in trace.records],
        "failure": trace.failure,
    }
    summary["continuation"] = details
    if trace.failure is not None or len(trace.records) < 2:
        return fail("continuation", details)
    comparison_floor = -cfg.tol_comparison if not report.mesh.degraded else -np.inf
    if min(r.comparison_margin for r in trace.records) < comparison_floor:
        return fail("continuation", details)
    ok("continuation", details)

    # -- recovery ----------------------------------------------------------
    with _timer(report, "recovery"):
        strong = recover_reaction_fields(
            trace, cfg.fspec, cfg.gspec, bracket_tol=cfg.tol_bracket
        )
    report.strong_report = strong
    details = {
        "bracket_violations": strong.bracket_violations,
        "bracket_violations_f": strong.bracket_violations_f,
        "bracket_violations_g": strong.bracket_violations_g,
        "discontinuity_zone_fraction": strong.discontinuity_zone_fraction,
        "epsilon_final": strong.epsilon_final,
    }
    summary["recovery"] = details
    if strong.bracket_violations > 0.01:
        return fail("recovery", details)
    ok("recovery", details)

    # -- strong residual -----------------------------------------------------
    with _timer(report, "strong_residual"):
        stats = strong_residual_check(
            strong, cfg.fspec, cfg.gspec, cfg.p, tol_dist=cfg.tol_dist
        )
    report.residual_stats = stats
    details = {
        "p90": stats.p90,
        "median": stats.median,
        "max": stats.max,
        "n_included": stats.n_included,
        "excluded_fraction": stats.excluded_fraction,
    }
    summary["strong_residual"] = details
    ok("strong_residual", details)
    return report


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _dump_json(payload, path):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_outputs(report, outdir):
    """Write fields, mesh, trace, and report; return the hash manifest.

    Timings go to a separate volatile file so report.json is
    byte-identical across reruns of the same config and seed.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    payload = {
        "status": report.status,
        "gates": [
            {"name": g.name, "passed": g.passed, "details": g.details}
            for g in report.gates
        ],
        "summary": report.summary,
    }
    _dump_json(payload, out / "report.json")
    written.append("report.json")

    if report.mesh is not None:
        save_mesh(report.mesh, out / "mesh.txt")
        written.append("mesh.txt")
    if report.eig is not None:
        report.eig.phi1.export_csv(out / "phi1.csv")
        written.append("phi1.csv")
    if report.sub is not None:
        report.sub.field.export_csv(out / "subsolution.csv")
        written.append("subsolution.csv")
    if report.trace is not None and report.trace.records:
        report.trace.records[-1].u_eps.export_csv(out / "u.csv")
        written.append("u.csv")
        _dump_json(report.summary.get("continuation", {}), out / "trace.json")
        written.append("trace.json")

    manifest = {
        "files": {name: _sha256(out / name) for name in written},
        "volatile": ["timings.json"],
    }
    _dump_json(report.timings, out / "timings.json")
    _dump_json(manifest, out / "manifest.json")
    return manifest


# -- measure-lab demonstrations -------------------------------------------

def run_measure_lab(outdir, p=1.5, seed=0, plateau_n=512):
    """The three Section-style demonstrations as report records."""
    out = Path(outdir) / "measure"
    out.mkdir(parents=True, exist_ok=True)
    records = {}

    # Lipschitz image of an axis-null set: covering-construction bound
    def power_map(pts):
        r = np.linalg.norm(pts, axis=1, keepdims=True)
        return r ** (p - 2.0) * pts

    psi = LipschitzMap(
        fn=power_map, dim_in=2, dim_out=2, r_inner=0.5, r_outer=2.0, seed=seed
    )
    rng = np.random.default_rng(seed)
    # tiny boxes well inside the annulus (clearance >> N * max eps)
    rad = 0.9 + 0.6 * rng.random(16)
    ang = 2 * np.pi * rng.random(16)
    centers = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    side = 1e-8
    boxes = [((c[0] - side, c[0] + side), (c[1] - side, c[1] + side)) for c in centers]
    D = BoxSet(2, boxes)
    eps_runs = []
    for eps in (1e-3, 5e-4, 2.5e-4, 1.25e-4, 1e-4):
        rep = verify_null_projection(psi, D, eps)
        eps_runs.append(
            {
                "eps": eps,
                "sums": list(rep.sums),
                "bound": rep.bound,
                "passed": rep.passed,
                "n_rectangles": rep.n_rectangles,
            }
        )
    records["null_projection"] = {"lip": psi.lip, "runs": eps_runs}

    # collapse-map counterexample: null image, nonzero Jacobian
    cx = jacobian_counterexample(n_grid=128)
    records["jacobian_counterexample"] = {
        "image_measure_estimate": cx.image_measure_estimate,
        "cell_area_bound": cx.cell_area_bound,
        "jacobian_entry": cx.jacobian_entry,
        "projection_lengths": list(cx.projection_lengths),
    }

    # plateau test: flat region forces a vanishing partial derivative;
    # the probe set sits one stencil-width inside the plateau so the
    # finite differences never straddle its edge
    ax = np.linspace(0.0, 1.0, plateau_n)
    plateau = BoxSet(2, [((0.31, 0.69), (0.31, 0.69))])

    def plateau_field(x, y):
        cap = 0.3 + 0.0 * x
        return np.minimum(np.minimum(x, 1 - x), np.minimum(np.minimum(y, 1 - y), cap))

    phi = GridField.sample(plateau_field, (ax, ax))
    loc = verify_locality(phi, plateau, i=0, tol=1e-10)
    records["plateau_locality"] = {
        "hypothesis_met": loc.hypothesis_met,
        "certified_fraction": loc.certified_fraction,
        "pass_fraction": loc.pass_fraction,
        "n_points": loc.n_points,
    }

    _dump_json(records, out / "records.json")
    return records
