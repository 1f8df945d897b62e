"""Command-line front end.

Subcommands:

- ``validate``: load a scenario and audit the structural assumptions the
  safety analysis relies on (enough joints, full-rank grasp map,
  orthogonal charts, in-domain contact targets).
- ``run``: execute one closed-loop simulation, writing ``trace.csv`` and
  ``summary.json`` into the output directory.
- ``envelope``: tabulate the barrier-induced velocity envelopes for the
  three built-in class-K kinds.
- ``batch``: run a manifest of scenarios with bounded parallelism and
  aggregate their summaries.

``--json`` switches stdout to machine-parsable JSON.  The environment
variable ``BARRIERGRASP_LOG`` (error, warn, info, debug) controls log
verbosity.  ``--plot`` additionally renders PNG figures next to the
delimited outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from barriergrasp import geometry as G
from barriergrasp.barrier import ExtendedClassK, PositionConstraint, velocity_envelope
from barriergrasp.models import ModelError, ScenarioConfig, load_scenario
from barriergrasp import simulator as sim

log = logging.getLogger("barriergrasp")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_BAD_INPUT = 2


def _setup_logging():
    level = _LOG_LEVELS.get(os.environ.get("BARRIERGRASP_LOG", "warn").lower(),
                            logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


# ---------------------------------------------------------------------------
# validate


def scenario_audits(cfg: ScenarioConfig) -> list:
    """Structural audits of a scenario; list of dicts with pass/fail and
    numeric evidence."""
    audits = []
    m = cfg.hand.dof
    n = len(cfg.contacts)
    audits.append({
        "name": "joint_count",
        "description": "at least three joints per contact (m >= 3n)",
        "passed": m >= 3 * n,
        "evidence": {"dof": m, "required": 3 * n},
    })

    worst = 0.0
    for i, finger in enumerate(cfg.hand.fingers):
        for xi in finger.tip_patch.domain_grid(20):
            c_a, c_b = finger.tip_patch.d_chart(xi)
            worst = max(worst, abs(float(c_a @ c_b)))
    for j, face in enumerate(cfg.obj.faces):
        for xi in face.patch.domain_grid(20):
            c_a, c_b = face.patch.d_chart(xi)
            worst = max(worst, abs(float(c_a @ c_b)))
    audits.append({
        "name": "chart_orthogonality",
        "description": "tangent partials orthogonal over every chart domain",
        "passed": worst <= 1e-9,
        "evidence": {"max_abs_inner_product": worst},
    })

    domain_ok = True
    detail = []
    for spec in cfg.contacts:
        ok = cfg.obj.faces[spec.face].patch.in_domain(spec.xi_co)
        domain_ok &= ok
        detail.append({"finger": spec.finger, "face": spec.face, "in_domain": ok})
    init_error = None
    state = None
    try:
        state = sim.grasp_initializer(cfg)
        for i, spec in enumerate(cfg.contacts):
            ok = cfg.hand.fingers[spec.finger].tip_patch.in_domain(state.xi_cf[i])
            domain_ok &= ok
            detail.append({"finger": spec.finger, "fingertip_in_domain": ok})
    except sim.SimulationError as exc:
        domain_ok = False
        init_error = str(exc)
    audits.append({
        "name": "chart_domains",
        "description": "contact targets and initial fingertip coordinates in-domain",
        "passed": domain_ok,
        "evidence": {"contacts": detail, "initializer_error": init_error},
    })

    if state is not None:
        hc = sim._hand_contacts(cfg.hand, state.q, state.xi_cf)
        Gm = sim._grasp_map(hc.contact_points, state.p_o)
        sv = np.linalg.svd(Gm, compute_uv=False)
        rank = int(np.sum(sv > 1e-8))
        audits.append({
            "name": "grasp_map_rank",
            "description": "grasp map has full row rank at the initial grasp",
            "passed": rank == 6,
            "evidence": {"rank": rank, "smallest_singular_value": float(sv[-1])},
        })
    else:
        audits.append({
            "name": "grasp_map_rank",
            "description": "grasp map has full row rank at the initial grasp",
            "passed": False,
            "evidence": {"error": "initial grasp unavailable"},
        })
    return audits


def cmd_validate(args) -> int:
    try:
        cfg = load_scenario(args.scenario, args.override)
    except (ModelError, OSError, ValueError) as exc:
        print(json.dumps({"error": str(exc)}) if args.json else f"error: {exc}",
              file=sys.stderr)
        return EXIT_BAD_INPUT
    audits = scenario_audits(cfg)
    ok = all(a["passed"] for a in audits)
    if args.json:
        print(json.dumps({"scenario": cfg.name, "passed": ok, "audits": audits},
                         indent=2, sort_keys=True))
    else:
        for a in audits:
            tag = "PASS" if a["passed"] else "FAIL"
            print(f"{tag} {a['name']}: {a['description']}  {json.dumps(a['evidence'])}")
        print(f"{'all audits passed' if ok else 'audit failures present'}")
    return EXIT_OK if ok else EXIT_FAILED


# ---------------------------------------------------------------------------
# run


def _write_run_outputs(trace, summary, out_dir: str, plot: bool):
    os.makedirs(out_dir, exist_ok=True)
    trace.write_csv(os.path.join(out_dir, "trace.csv"))
    summary.write_json(os.path.join(out_dir, "summary.json"))
    if plot:
        from barriergrasp.report import render_trace_figures
        render_trace_figures(trace, out_dir)


def cmd_run(args) -> int:
    try:
        cfg = load_scenario(args.scenario, args.override)
    except (ModelError, OSError, ValueError) as exc:
        print(json.dumps({"error": str(exc)}) if args.json else f"error: {exc}",
              file=sys.stderr)
        return EXIT_BAD_INPUT
    log.info("running scenario %s for %.3f s", cfg.name, cfg.duration)
    trace, summary = sim.run(cfg)
    _write_run_outputs(trace, summary, args.out, args.plot)
    if args.json:
        print(json.dumps(summary.data, indent=2, sort_keys=True))
    else:
        d = summary.data
        print(f"scenario {d['scenario']}: {d['status']} after {d['samples']} samples "
              f"(t_final={d['t_final']:.3f} s)")
        print(f"min h per family: {d['min_h']}")
        print(f"violations: {d['violation']}")
    status = summary.data["status"]
    return EXIT_OK if not status.startswith("engine_error") else EXIT_FAILED


# ---------------------------------------------------------------------------
# envelope

_ENVELOPE_KINDS = (("linear", 1.0), ("cubic", 0.15), ("arctan", 2.0))


def envelope_table(x_min: float = 1.0, x_max: float = 4.0, points: int = 400):
    """(q grid, {kind: (v_lo, v_hi)}) for the built-in class-K kinds."""
    q = np.linspace(x_min, x_max, points)
    lower = PositionConstraint.affine([1.0], -x_min)
    upper = PositionConstraint.affine([-1.0], x_max)
    out = {}
    for kind, gain in _ENVELOPE_KINDS:
        alpha1 = ExtendedClassK(kind, gain)
        rows = velocity_envelope(lower, upper, alpha1, q)
        lo = np.array([r[1] for r in rows])
        hi = np.array([r[2] for r in rows])
        out[kind] = (lo, hi)
    return q, out


def cmd_envelope(args) -> int:
    q, bounds = envelope_table()
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "envelope.csv")
    cols = ["q"]
    for kind, _ in _ENVELOPE_KINDS:
        cols += [f"v_lo_{kind}", f"v_hi_{kind}"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for k in range(q.size):
            row = [q[k]]
            for kind, _ in _ENVELOPE_KINDS:
                lo, hi = bounds[kind]
                row += [lo[k], hi[k]]
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    if args.plot:
        from barriergrasp.report import render_envelope_figure
        render_envelope_figure(q, bounds, args.out)
    if args.json:
        print(json.dumps({"file": path, "points": int(q.size),
                          "kinds": [k for k, _ in _ENVELOPE_KINDS]}))
    else:
        print(f"wrote {path} ({q.size} points)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# batch


def _batch_entry(entry: dict, out_root: str, plot: bool) -> dict:
    name = entry["name"]
    out_dir = os.path.join(out_root, name)
    try:
        cfg = load_scenario(entry["scenario"], entry.get("overrides", []))
        trace, summary = sim.run(cfg)
        _write_run_outputs(trace, summary, out_dir, plot)
        failed = summary.data["status"].startswith("engine_error")
        return {"name": name, "failed": failed, "summary": summary.data}
    except Exception as exc:  # a bad entry must not sink the batch
        log.error("batch entry %s failed: %s", name, exc)
        return {"name": name, "failed": True, "error": str(exc)}


def cmd_batch(args) -> int:
    try:
        with open(args.manifest) as fh:
            manifest = json.load(fh)
        runs = manifest["runs"]
        for k, entry in enumerate(runs):
            entry.setdefault("name", f"run{k}")
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(json.dumps({"error": str(exc)}) if args.json else f"error: {exc}",
              file=sys.stderr)
        return EXIT_BAD_INPUT

    os.makedirs(args.out, exist_ok=True)
    if args.parallel > 1 and len(runs) > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(_batch_entry, runs,
                                    [args.out] * len(runs), [args.plot] * len(runs)))
    else:
        results = [_batch_entry(entry, args.out, args.plot) for entry in runs]

    report = {"runs": results, "n_failed": sum(r["failed"] for r in results)}
    path = os.path.join(args.out, "batch_report.json")
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        for r in results:
            print(f"{'FAILED' if r['failed'] else 'ok'}  {r['name']}")
        print(f"report: {path}")
    return EXIT_OK if report["n_failed"] == 0 else EXIT_FAILED


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="barriergrasp",
        description="Safety-filtered grasp simulation and barrier analysis tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", required=True,
                           help="scenario JSON path or preset name")
            p.add_argument("--override", action="append", default=[],
                           metavar="K=V", help="dotted-path scenario override")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--json", action="store_true",
                       help="machine-parsable JSON on stdout")
        p.add_argument("--plot", action="store_true",
                       help="also render PNG figures into the output directory")

    p = sub.add_parser("validate", help="audit scenario assumptions")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run one closed-loop simulation")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("envelope", help="tabulate velocity envelopes")
    common(p, scenario=False)
    p.set_defaults(func=cmd_envelope)

    p = sub.add_parser("batch", help="run a manifest of scenarios")
    p.add_argument("--manifest", required=True, help="batch manifest JSON")
    p.add_argument("--parallel", type=int, default=1, metavar="N",
                   help="number of concurrent runs")
    common(p, scenario=False)
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
