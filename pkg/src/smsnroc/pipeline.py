"""Two-group analysis: ingestion, model selection, cutoffs and inference."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cutoff import (
    CutoffResult,
    DecisionConfig,
    UnbracketedError,
    admissible_interval_empirical,
    optimal_cutoff,
)
from .distributions import DistSpec
from .fitting import ModelSelection, joint_covariance, select_model
from .inference import CutoffInference, variance_plugin
from .roc import auc, roc_curve

SCHEMA = "roc-smsn/1"
DEFAULT_CONFIG = DecisionConfig(1.0, 3.0, 0.9, 0.1)
SENSITIVITY_CONFIGS = {
    "A": DecisionConfig(1.0, 1.0, 0.5, 0.5),
    "B": DecisionConfig(1.0, 1.0, 0.9, 0.1),
    "C": DecisionConfig(1.0, 3.0, 0.9, 0.1),
    "D": DecisionConfig(3.0, 1.0, 0.9, 0.1),
}


class InputError(ValueError):
    """Bad or unusable input data."""


@dataclass
class GroupData:
    x0: np.ndarray
    x1: np.ndarray
    neg_label: str
    pos_label: str
    log10: bool = False


def read_groups(path, value_col: str, group_col: str, neg_label: str, log10: bool = False,
                min_size: int = 20) -> GroupData:
    """Read a two-group CSV; ``neg_label`` marks the non-diseased class."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise InputError("input CSV has no header")
        missing = [c for c in (value_col, group_col) if c not in reader.fieldnames]
        if missing:
            raise InputError(f"missing column(s): {', '.join(missing)}")
        values, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            raw = (row[value_col] or "").strip()
            if raw == "":
                continue
            try:
                values.append(float(raw))
            except ValueError:
                raise InputError(f"line {lineno}: non-numeric value {raw!r}") from None
            labels.append((row[group_col] or "").strip())
    values = np.asarray(values)
    labels = np.asarray(labels)
    distinct = sorted(set(labels.tolist()))
    if len(distinct) != 2:
        raise InputError(f"expected exactly two group labels, found {len(distinct)}: {distinct}")
    if neg_label not in distinct:
        raise InputError(f"negative label {neg_label!r} not among {distinct}")
    pos_label = distinct[0] if distinct[1] == neg_label else distinct[1]
    if not np.all(np.isfinite(values)):
        raise InputError("values must be finite")
    if log10:
        if np.any(values <= 0):
            raise InputError("log10 transform requires strictly positive values")
        values = np.log10(values)
    x0 = values[labels == neg_label]
    x1 = values[labels == pos_label]
    for lab, x in ((neg_label, x0), (pos_label, x1)):
        if x.size < min_size:
            raise InputError(f"group {lab!r} has {x.size} observations; need at least {min_size}")
    return GroupData(x0, x1, neg_label, pos_label, log10)


def back(value, log10: bool):
    if value is None:
        return None
    return 10.0 ** value if log10 else value


@dataclass
class DecisionRow:
    label: str
    cfg: DecisionConfig
    cutoff: CutoffResult
    inference: CutoffInference

    def to_dict(self, log10: bool) -> dict:
        d = self.cutoff.to_dict(log10=False)
        d["label"] = self.label
        d["inference"] = self.inference.to_dict()
        if log10:
            d["original_scale"] = {
                "c_star": back(self.cutoff.c_star, True),
                "c_youden": back(self.cutoff.c_youden, True),
                "c_youden_emp": back(self.cutoff.c_youden_emp, True),
                "ci_lo": back(self.inference.ci_lo, True),
                "ci_hi": back(self.inference.ci_hi, True),
            }
        return d


@dataclass
class AnalysisReport:
    groups: GroupData
    selection: tuple[ModelSelection, ModelSelection]
    rows: list[DecisionRow]
    auc: float
    alpha: float = 0.05
    interval_percentiles: tuple[float, float] = (0.005, 0.995)
    notes: list[str] = field(default_factory=list)

    @property
    def theta(self) -> tuple[DistSpec, DistSpec]:
        return (self.selection[0].selected.spec, self.selection[1].selected.spec)

    def to_dict(self) -> dict:
        g = self.groups
        fits = []
        for label, sel in ((g.neg_label, self.selection[0]), (g.pos_label, self.selection[1])):
            fits.append({
                "group": label,
                "selected": sel.selected.family.value.upper(),
                "bic_sn": sel.bic_sn,
                "bic_st": sel.bic_st,
                "delta_bic": sel.delta_bic,
                "fit": sel.selected.to_dict(),
                "warning": sel.warning,
            })
        return {
            "schema": SCHEMA,
            "log10": g.log10,
            "groups": {"negative": g.neg_label, "positive": g.pos_label,
                       "n0": int(g.x0.size), "n1": int(g.x1.size)},
            "alpha": self.alpha,
            "interval_percentiles": list(self.interval_percentiles),
            "fits": fits,
            "auc": self.auc,
            "decisions": [r.to_dict(g.log10) for r in self.rows],
            "notes": self.notes,
        }


def decide(theta, cfg: DecisionConfig, groups: GroupData, sel, lo: float, hi: float, alpha: float,
           label: str = "") -> DecisionRow:
    pooled = np.concatenate([groups.x0, groups.x1])
    interval = admissible_interval_empirical(pooled, theta, cfg, lo, hi)
    res = optimal_cutoff(theta, cfg, interval, groups.x0, groups.x1)
    sigma = joint_covariance(sel[0].selected, sel[1].selected)
    inf = variance_plugin(theta, cfg, res.c_star, sigma, alpha)
    return DecisionRow(label, cfg, res, inf)


def analyze(groups: GroupData, configs: dict[str, DecisionConfig] | None = None, lo: float = 0.005,
            hi: float = 0.995, alpha: float = 0.05) -> AnalysisReport:
    """Fit both groups, then solve and infer the cutoff for every decision setting."""
    configs = {"": DEFAULT_CONFIG} if configs is None else configs
    sel = (select_model(groups.x0), select_model(groups.x1))
    theta = (sel[0].selected.spec, sel[1].selected.spec)
    rows = [decide(theta, cfg, groups, sel, lo, hi, alpha, label) for label, cfg in configs.items()]
    report = AnalysisReport(groups, sel, rows, auc(theta), alpha, (lo, hi))
    if len(rows) > 1:
        ordered = sorted(rows, key=lambda r: r.cfg.target_ratio)
        cs = [r.cutoff.c_star for r in ordered]
        mono = all(b > a for a, b in zip(cs, cs[1:]))
        report.notes.append("cutoffs increase with the target ratio" if mono
                            else "cutoffs are NOT monotone in the target ratio")
    return report


def ordering_holds(report: AnalysisReport) -> bool:
    ordered = sorted(report.rows, key=lambda r: r.cfg.target_ratio)
    cs = [r.cutoff.c_star for r in ordered]
    return all(b > a for a, b in zip(cs, cs[1:]))


def _fmt(v, digits=4):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.{digits}f}"
    return v


def write_model_selection_csv(report: AnalysisReport, path, biomarker: str = "") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["biomarker", "group", "selected", "BIC_SN", "BIC_ST", "dBIC"])
        g = report.groups
        for label, sel in ((g.neg_label, report.selection[0]), (g.pos_label, report.selection[1])):
            w.writerow([biomarker, label, sel.selected.family.value.upper(),
                        _fmt(sel.bic_sn, 2), _fmt(sel.bic_st, 2), _fmt(sel.delta_bic, 2)])


DECISION_COLUMNS = [
    "scenario", "lambda0", "lambda1", "pi0", "pi1", "c_star", "c_youden", "c_youden_emp",
    "c_star_orig", "c_youden_orig", "c_youden_emp_orig", "risk_c_star", "risk_youden",
    "risk_youden_emp", "delta_risk", "se", "ci_lo", "ci_hi", "ci_lo_orig", "ci_hi_orig",
    "abs_dphi_dc", "a", "b", "bracket",
]


def write_decisions_csv(report: AnalysisReport, path) -> None:
    log10 = report.groups.log10
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DECISION_COLUMNS)
        for r in report.rows:
            c, i, cfg = r.cutoff, r.inference, r.cfg
            orig = (lambda v: _fmt(back(v, True), 2)) if log10 else (lambda v: "")
            w.writerow([
                r.label, _fmt(cfg.lambda0, 3), _fmt(cfg.lambda1, 3), _fmt(cfg.pi0, 3), _fmt(cfg.pi1, 3),
                _fmt(c.c_star), _fmt(c.c_youden), _fmt(c.c_youden_emp),
                orig(c.c_star), orig(c.c_youden), orig(c.c_youden_emp),
                _fmt(c.risk_at_c_star), _fmt(c.risk_at_youden), _fmt(c.risk_at_youden_emp),
                _fmt(c.delta_risk), _fmt(i.se), _fmt(i.ci_lo), _fmt(i.ci_hi),
                orig(i.ci_lo), orig(i.ci_hi), _fmt(c.slope_diag),
                _fmt(c.interval.a), _fmt(c.interval.b),
                "Yes" if c.interval.initially_bracketed else ("Expanded" if c.interval.bracketed else "No"),
            ])


def theta_from_report(d: dict) -> tuple[DistSpec, DistSpec]:
    specs = [DistSpec.from_dict(f["fit"]["spec"]) for f in d["fits"]]
    return specs[0], specs[1]


def roc_export(theta, path, m: int = 200) -> None:
    roc_curve(theta, m).to_csv(path)


__all__ = [
    "AnalysisReport", "DEFAULT_CONFIG", "DecisionRow", "GroupData", "InputError", "SCHEMA",
    "SENSITIVITY_CONFIGS", "UnbracketedError", "analyze", "ordering_holds", "read_groups",
    "roc_export", "theta_from_report", "write_decisions_csv", "write_model_selection_csv",
]
