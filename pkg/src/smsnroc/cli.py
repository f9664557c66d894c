"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 numerical failure (unbracketed or
degenerate cutoff, failed fit), 4 a simulation summary outside its bands.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import distributions as dist
from . import pipeline, simulation
from .cutoff import CutoffError, DecisionConfig
from .distributions import Family
from .fitting import fit, select_model
from .roc import roc_curve, tangent_line

log = logging.getLogger("smsnroc")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_BANDS = 0, 2, 3, 4
DENSITY_GRID = 512


class NumericalFailure(RuntimeError):
    pass


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serialisable: {type(o).__name__}")


def write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, default=_json_default) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> DecisionConfig:
    try:
        return DecisionConfig.from_prevalence(args.lambda0, args.lambda1, args.pi0)
    except ValueError as exc:
        raise pipeline.InputError(str(exc)) from None


def _parse_configs(items) -> dict[str, DecisionConfig]:
    """``LABEL=l0,l1,pi0`` strings, or the default A-D sweep."""
    if not items:
        return dict(pipeline.SENSITIVITY_CONFIGS)
    out = {}
    for k, item in enumerate(items):
        label, _, body = item.rpartition("=")
        try:
            l0, l1, p0 = (float(v) for v in body.split(","))
            out[label or f"S{k + 1}"] = DecisionConfig.from_prevalence(l0, l1, p0)
        except ValueError:
            raise pipeline.InputError(f"bad --config {item!r}; expected LABEL=lambda0,lambda1,pi0") from None
    return out


def _read(args) -> pipeline.GroupData:
    return pipeline.read_groups(args.input, args.value_col, args.group_col, args.neg_label, args.log10)


def _write_report(report: pipeline.AnalysisReport, out: Path, stem: str, biomarker: str) -> dict:
    d = report.to_dict()
    d["outputs"] = {"roc": f"{stem}_roc.csv", "model_selection": f"{stem}_model_selection.csv",
                    "decisions": f"{stem}_decisions.csv"}
    write_json(d, out / f"{stem}.json")
    pipeline.roc_export(report.theta, out / d["outputs"]["roc"])
    pipeline.write_model_selection_csv(report, out / d["outputs"]["model_selection"], biomarker)
    pipeline.write_decisions_csv(report, out / d["outputs"]["decisions"])
    return d


def _summary_line(report: pipeline.AnalysisReport) -> str:
    lines = [f"AUC = {report.auc:.4f}"]
    for r in report.rows:
        c, i = r.cutoff, r.inference
        tag = f"[{r.label}] " if r.label else ""
        line = (f"{tag}ratio {c.target_ratio:g}: c* = {c.c_star:.4f} (SE {i.se:.4f}, "
                f"CI [{i.ci_lo:.4f}, {i.ci_hi:.4f}]), c_Y = {c.c_youden:.4f}, dR = {c.delta_risk:.4f}")
        if report.groups.log10:
            line += f"; original scale c* = {10 ** c.c_star:.2f}"
        lines.append(line)
    return "\n".join(lines)


def cmd_analyze(args) -> int:
    groups = _read(args)
    cfgs = {"": _config(args)}
    report = pipeline.analyze(groups, cfgs, args.lo, args.hi, args.alpha)
    _write_report(report, _out_dir(args), "report", args.value_col)
    print(_summary_line(report))
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    groups = _read(args)
    cfgs = _parse_configs(args.config)
    report = pipeline.analyze(groups, cfgs, args.lo, args.hi, args.alpha)
    d = _write_report(report, _out_dir(args), "sensitivity", args.value_col)
    ok = pipeline.ordering_holds(report)
    d["ordering_holds"] = ok
    write_json(d, _out_dir(args) / "sensitivity.json")
    print(_summary_line(report))
    print("ordering by target ratio: " + ("holds" if ok else "VIOLATED"))
    return EXIT_OK


def cmd_fit(args) -> int:
    groups = _read(args)
    out = _out_dir(args)
    entries = []
    for label, x in ((groups.neg_label, groups.x0), (groups.pos_label, groups.x1)):
        if args.family == "auto":
            sel = select_model(x)
            chosen = sel.selected
            entry = {"group": label, "selected": chosen.family.value.upper(), "bic_sn": sel.bic_sn,
                     "bic_st": sel.bic_st, "delta_bic": sel.delta_bic,
                     "fits": {k.value: (None if v is None else v.to_dict()) for k, v in sel.fits.items()},
                     "warning": sel.warning}
        else:
            chosen = fit(x, Family(args.family))
            entry = {"group": label, "selected": chosen.family.value.upper(),
                     "fits": {chosen.family.value: chosen.to_dict()}}
        if not chosen.converged:
            raise NumericalFailure(f"fit for group {label!r} did not converge: {chosen.message}")
        entries.append(entry)
        print(f"{label}: {chosen.family.value.upper()} {chosen.spec.to_dict()}")
    write_json({"schema": pipeline.SCHEMA, "log10": groups.log10, "fits": entries}, out / "fit.json")
    return EXIT_OK


def cmd_simulate(args) -> int:
    B = simulation.FULL_B if args.full else args.b
    sizes = args.n or [400]
    scen = simulation.load_scenarios(args.scenarios_file, B=B, seed=args.seed)
    names = args.scenario or list(scen)
    unknown = [s for s in names if s not in scen]
    if unknown:
        raise pipeline.InputError(f"unknown scenario(s): {', '.join(unknown)}; have {', '.join(scen)}")
    summaries, failures = [], {}
    for name in names:
        for n in sizes:
            s = simulation.run_scenario(scen[name].with_(n_total=n), workers=args.workers)
            summaries.append(s)
            bad = simulation.check_bands(s)
            if bad:
                failures[f"{name}/n={n}"] = bad
            print(f"{name} n={n}: bias {s.bias:+.4f} ratio {s.ratio:.3f} coverage {s.coverage:.3f} "
                  f"bracket {s.bracket_rate:.3f} success {s.success_rate:.3f}"
                  + (f"  FAIL {','.join(bad)}" if bad else ""))
    out = _out_dir(args)
    simulation.write_summary_csv(summaries, out / "simulation_summary.csv")
    simulation.write_wn_csv(summaries, out / "wn_samples.csv")
    write_json({
        "schema": pipeline.SCHEMA, "B": B, "seed": args.seed,
        "summaries": [{**s.row(), "exclusions": s.exclusions, "unreliable": s.unreliable} for s in summaries],
        "band_failures": failures,
    }, out / "simulation.json")
    return EXIT_BANDS if failures else EXIT_OK


def _densities(d: dict, out: Path) -> None:
    theta = pipeline.theta_from_report(d)
    decisions = d["decisions"]
    lo = min(r["interval"]["a"] for r in decisions)
    hi = max(r["interval"]["b"] for r in decisions)
    x = np.linspace(lo, hi, DENSITY_GRID)
    f0, f1 = dist.pdf(theta[0], x), dist.pdf(theta[1], x)
    np.savetxt(out / "densities.csv", np.column_stack([x, f0, f1]), delimiter=",",
               header="x,f0,f1", comments="", fmt="%.10g")
    markers = []
    for r in decisions:
        m = {"label": r["label"], "target_ratio": r["target_ratio"], "c_star": r["c_star"],
             "c_youden": r["c_youden"], "c_youden_emp": r["c_youden_emp"]}
        if d.get("log10"):
            m["original_scale"] = r["original_scale"]
        markers.append(m)
    write_json({"schema": pipeline.SCHEMA, "log10": d.get("log10", False), "markers": markers},
               out / "density_markers.json")


def _roc_tangents(d: dict, out: Path) -> None:
    theta = pipeline.theta_from_report(d)
    roc_curve(theta).to_csv(out / "roc_points.csv")
    rows = []
    for r in d["decisions"]:
        # at c* the ROC slope equals the target ratio; at c_Y it equals one
        t = tangent_line(theta, r["c_star"], r["target_ratio"])
        rows.append({"label": r["label"], "point": "c_star", **t})
        t = tangent_line(theta, r["c_youden"], 1.0)
        rows.append({"label": r["label"], "point": "c_youden", **t})
    with open(out / "roc_tangents.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["label", "point", "c", "fpf", "tpf", "slope", "intercept"])
        w.writeheader()
        w.writerows(rows)


def _qq(path: Path, out: Path) -> None:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "w_n" not in reader.fieldnames:
            raise pipeline.InputError("qq input must be a W_n CSV with a 'w_n' column")
        groups: dict[tuple, list[float]] = {}
        for row in reader:
            key = (row.get("scenario", ""), row.get("n", ""))
            groups.setdefault(key, []).append(float(row["w_n"]))
    with open(out / "qq.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "n", "i", "normal_quantile", "w_n"])
        for (name, n), vals in groups.items():
            ref, ws = simulation.qq_pairs(vals)
            for i, (q, v) in enumerate(zip(ref, ws), start=1):
                w.writerow([name, n, i, f"{q:.8g}", f"{v:.8g}"])


def cmd_plotdata(args) -> int:
    path = Path(args.input)
    if not path.exists():
        raise pipeline.InputError(f"input file not found: {path}")
    out = _out_dir(args)
    if args.kind == "qq":
        _qq(path, out)
        return EXIT_OK
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise pipeline.InputError(f"{path} is not JSON: {exc}") from None
    if d.get("schema") != pipeline.SCHEMA or "decisions" not in d:
        raise pipeline.InputError(f"{path} is not a {pipeline.SCHEMA} analysis report")
    (_densities if args.kind == "densities" else _roc_tangents)(d, out)
    return EXIT_OK


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--value-col", default="value")
    p.add_argument("--group-col", default="group")
    p.add_argument("--neg-label", required=True, help="label of the non-diseased group")
    p.add_argument("--log10", action="store_true", help="analyse log10 of the values")
    p.add_argument("--out", default=".")


def _decision_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lo", type=float, default=0.005, help="lower pooled percentile of the interval")
    p.add_argument("--hi", type=float, default=0.995, help="upper pooled percentile of the interval")
    p.add_argument("--alpha", type=float, default=0.05, help="CI miscoverage; the level is 1 - alpha")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="smsnroc", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="fit both groups and estimate the optimal cutoff")
    _data_args(p)
    _decision_args(p)
    p.add_argument("--lambda0", type=float, default=1.0, help="cost of a false positive")
    p.add_argument("--lambda1", type=float, default=3.0, help="cost of a false negative")
    p.add_argument("--pi0", type=float, default=0.9, help="prevalence of the negative class")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sensitivity", help="optimal cutoffs across several cost/prevalence settings")
    _data_args(p)
    _decision_args(p)
    p.add_argument("--config", action="append", metavar="LABEL=l0,l1,pi0",
                   help="repeatable; default is the A-D sweep with target ratios 1, 9, 3, 27")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("fit", help="fit SN and ST laws to each group")
    _data_args(p)
    p.add_argument("--family", choices=["auto", "sn", "st"], default="auto")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="Monte Carlo validation over the shipped scenarios")
    p.add_argument("--scenario", action="append", help="repeatable; default all")
    p.add_argument("--n", type=int, action="append", help="total sample size; repeatable (default 400)")
    p.add_argument("--b", type=int, default=simulation.DEFAULT_B, help="replications per scenario")
    p.add_argument("--full", action="store_true", help=f"use B={simulation.FULL_B}")
    p.add_argument("--seed", type=int, default=simulation.DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--scenarios-file", default=None, help="JSON scenario table (default: shipped)")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plotdata", help="export data for density, ROC-tangent and Q-Q plots")
    p.add_argument("--input", required=True, help="analysis report JSON, or W_n CSV for qq")
    p.add_argument("--kind", choices=["densities", "roc-tangents", "qq"], required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_plotdata)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "b", 1) is not None and getattr(args, "b", 1) < 1:
        print("error: --b must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    if hasattr(args, "alpha") and not 0 < args.alpha < 1:
        print("error: --alpha must lie in (0, 1)", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except pipeline.InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CutoffError as exc:
        print(f"numerical failure ({exc.status}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (RuntimeError, np.linalg.LinAlgError, ZeroDivisionError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # remaining ValueErrors come from fitting on unusable samples
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
