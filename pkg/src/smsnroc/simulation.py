"""Monte Carlo validation of the plug-in cutoff estimator.

Every replication draws from its own Philox stream keyed by
``(seed, scenario name, replication index)``, so results do not depend on
execution order or on the number of worker processes.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import special

from . import distributions as dist
from .cutoff import CutoffError, DecisionConfig, admissible_interval, optimal_cutoff
from .distributions import DistSpec
from .fitting import SingularInformationError, fit, joint_covariance
from .inference import FLAT_SLOPE, IdentifiabilityError, variance_plugin

log = logging.getLogger(__name__)

DEFAULT_B = 500
FULL_B = 2000
DEFAULT_SEED = 20240601


class Exclusion(str, enum.Enum):
    FIT_FAIL = "FitFail"
    NO_SIGN_CHANGE = "NoSignChange"
    SINGULAR_INFO = "SingularInfo"
    NONFINITE_VAR = "NonfiniteVar"
    FLAT_SLOPE = "FlatSlope"


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    spec0: DistSpec
    spec1: DistSpec
    cfg: DecisionConfig
    n_total: int = 400
    B: int = DEFAULT_B
    seed: int = DEFAULT_SEED
    description: str = ""

    @property
    def n0(self) -> int:
        return self.n_total // 2

    @property
    def n1(self) -> int:
        return self.n_total - self.n_total // 2

    @property
    def theta(self):
        return (self.spec0, self.spec1)

    def with_(self, **kw) -> "ScenarioSpec":
        return replace(self, **kw)

    @classmethod
    def from_dict(cls, name: str, d: dict, **kw) -> "ScenarioSpec":
        return cls(
            name=name,
            spec0=DistSpec.from_dict(d["spec0"]),
            spec1=DistSpec.from_dict(d["spec1"]),
            cfg=DecisionConfig(**{k: float(v) for k, v in d["config"].items()}),
            description=d.get("description", ""),
            **kw,
        )


def load_scenarios(path=None, **kw) -> dict[str, ScenarioSpec]:
    """Scenario table shipped with the package, or from a JSON file."""
    if path is None:
        text = resources.files("smsnroc").joinpath("data/scenarios.json").read_text()
    else:
        text = Path(path).read_text()
    raw = json.loads(text)
    return {name: ScenarioSpec.from_dict(name, d, **kw) for name, d in raw.items()}


def replication_rng(seed: int, name: str, index: int) -> np.random.Generator:
    key = np.random.SeedSequence([int(seed), zlib.crc32(name.encode()), int(index)])
    return np.random.Generator(np.random.Philox(key))


def true_cutoff(scenario: ScenarioSpec) -> float:
    """Root of the estimating function at the generating parameters."""
    theta = scenario.theta
    return optimal_cutoff(theta, scenario.cfg, admissible_interval(theta, scenario.cfg)).c_star


@dataclass
class ReplicationRecord:
    index: int
    exclusion: Exclusion | None = None
    detail: str = ""
    c_hat: float = float("nan")
    v_hat: float = float("nan")
    se: float = float("nan")
    ci_lo: float = float("nan")
    ci_hi: float = float("nan")
    covered: bool = False
    slope: float = float("nan")
    bracketed: bool | None = None
    initially_bracketed: bool | None = None
    expansions: int = 0

    @property
    def success(self) -> bool:
        return self.exclusion is None

    def key(self) -> tuple:
        return (self.index, self.exclusion, self.c_hat, self.v_hat, self.se, self.ci_lo, self.ci_hi,
                self.covered, self.slope, self.bracketed, self.expansions)


def run_replication(scenario: ScenarioSpec, index: int, c_true: float | None = None) -> ReplicationRecord:
    """One simulated data set through fit, cutoff and variance."""
    rec = ReplicationRecord(index)
    if c_true is None:
        c_true = true_cutoff(scenario)
    rng = replication_rng(scenario.seed, scenario.name, index)
    x0 = dist.sample(scenario.spec0, scenario.n0, rng)
    x1 = dist.sample(scenario.spec1, scenario.n1, rng)

    fits = []
    for x, spec in ((x0, scenario.spec0), (x1, scenario.spec1)):
        try:
            f = fit(x, spec.family, rng=rng)
        except ValueError as exc:
            rec.exclusion, rec.detail = Exclusion.FIT_FAIL, str(exc)
            return rec
        if not f.converged:
            rec.exclusion, rec.detail = Exclusion.FIT_FAIL, f.message
            return rec
        if f.obs_info is None:
            rec.exclusion, rec.detail = Exclusion.SINGULAR_INFO, f.message
            return rec
        fits.append(f)
    theta_hat = (fits[0].spec, fits[1].spec)

    interval = admissible_interval(theta_hat, scenario.cfg)
    rec.bracketed = interval.bracketed
    rec.initially_bracketed = interval.initially_bracketed
    rec.expansions = interval.expansions
    try:
        res = optimal_cutoff(theta_hat, scenario.cfg, interval, allow_unbracketed=True)
    except CutoffError as exc:
        rec.exclusion, rec.detail = Exclusion.NO_SIGN_CHANGE, str(exc)
        return rec
    rec.c_hat = res.c_star
    rec.slope = res.slope_diag
    if res.multi_root:
        rec.exclusion, rec.detail = Exclusion.NO_SIGN_CHANGE, f"{res.local_minima} local risk minima"
        return rec

    try:
        sigma = joint_covariance(fits[0], fits[1])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            inf = variance_plugin(theta_hat, scenario.cfg, res.c_star, sigma)
    except (SingularInformationError, np.linalg.LinAlgError) as exc:
        rec.exclusion, rec.detail = Exclusion.SINGULAR_INFO, str(exc)
        return rec
    except IdentifiabilityError as exc:
        rec.exclusion, rec.detail = Exclusion.FLAT_SLOPE, str(exc)
        return rec
    rec.v_hat, rec.se, rec.ci_lo, rec.ci_hi = inf.v_hat, inf.se, inf.ci_lo, inf.ci_hi
    rec.covered = bool(inf.ci_lo <= c_true <= inf.ci_hi)
    if not (np.isfinite(inf.v_hat) and inf.v_hat > 0):
        rec.exclusion = Exclusion.NONFINITE_VAR
    elif res.slope_diag <= FLAT_SLOPE:
        rec.exclusion = Exclusion.FLAT_SLOPE
    return rec


@dataclass
class ScenarioSummary:
    name: str
    n: int
    B: int
    c_star_true: float
    mean_c_hat: float
    bias: float
    rmse: float
    sd: float
    var_emp: float
    var_th: float
    ratio: float
    mean_slope: float
    coverage: float
    mean_ci_length: float
    success_rate: float
    bracket_rate: float
    w_n_samples: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    exclusions: dict = field(default_factory=dict)
    unreliable: bool = False

    def row(self) -> dict:
        return {
            "Scenario": self.name,
            "c*": self.c_star_true,
            "n": self.n,
            "Succ.": self.success_rate,
            "mean(c_hat)": self.mean_c_hat,
            "Bias": self.bias,
            "RMSE": self.rmse,
            "SD": self.sd,
            "Var_emp": self.var_emp,
            "Var_th": self.var_th,
            "Ratio": self.ratio,
            "|dphi_dc|": self.mean_slope,
            "Cov.": self.coverage,
            "Len.": self.mean_ci_length,
            "Bracket": self.bracket_rate,
        }


TABLE_COLUMNS = [
    "Scenario", "c*", "n", "Succ.", "mean(c_hat)", "Bias", "RMSE", "SD", "Var_emp", "Var_th",
    "Ratio", "|dphi_dc|", "Cov.", "Len.", "Bracket",
]


def summarize(scenario: ScenarioSpec, records: list[ReplicationRecord], c_true: float) -> ScenarioSummary:
    """Reduce replication records (in index order) to the validation panel."""
    records = sorted(records, key=lambda r: r.index)
    ok = [r for r in records if r.success]
    n = scenario.n_total
    tried = [r for r in records if r.bracketed is not None]
    bracket_rate = float(np.mean([r.initially_bracketed for r in tried])) if tried else float("nan")
    exclusions = {e.value: sum(1 for r in records if r.exclusion is e) for e in Exclusion}
    success = len(ok) / len(records) if records else 0.0
    if not ok:
        nan = float("nan")
        return ScenarioSummary(scenario.name, n, len(records), c_true, nan, nan, nan, nan, nan, nan, nan,
                               nan, nan, nan, success, bracket_rate, np.empty(0), exclusions, True)
    c = np.array([r.c_hat for r in ok])
    v = np.array([r.v_hat for r in ok])
    mean_c = float(c.mean())
    bias = mean_c - c_true
    sd = float(c.std())
    rmse = float(np.sqrt(np.mean((c - c_true) ** 2)))
    var_emp = n * sd**2
    var_th = float(v.mean())
    w = math.sqrt(n) * (c - c_true) / math.sqrt(var_th)
    return ScenarioSummary(
        name=scenario.name,
        n=n,
        B=len(records),
        c_star_true=c_true,
        mean_c_hat=mean_c,
        bias=bias,
        rmse=rmse,
        sd=sd,
        var_emp=var_emp,
        var_th=var_th,
        ratio=var_emp / var_th,
        mean_slope=float(np.mean([r.slope for r in ok])),
        coverage=float(np.mean([r.covered for r in ok])),
        mean_ci_length=float(np.mean([r.ci_hi - r.ci_lo for r in ok])),
        success_rate=success,
        bracket_rate=bracket_rate,
        w_n_samples=w,
        exclusions=exclusions,
        unreliable=success < 0.5,
    )


def _run_chunk(args):
    scenario, indices, c_true = args
    return [run_replication(scenario, i, c_true) for i in indices]


def run_scenario(scenario: ScenarioSpec, workers: int = 1, progress=None) -> ScenarioSummary:
    """All ``scenario.B`` replications, optionally across worker processes."""
    c_true = true_cutoff(scenario)
    idx = list(range(scenario.B))
    if workers <= 1:
        records = []
        for i in idx:
            records.append(run_replication(scenario, i, c_true))
            if progress is not None:
                progress(i + 1, scenario.B)
    else:
        chunks = [idx[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_chunk, [(scenario, ch, c_true) for ch in chunks]))
        records = [r for part in parts for r in part]
    summary = summarize(scenario, records, c_true)
    if summary.unreliable:
        log.warning("%s: success rate %.3f below 0.5", scenario.name, summary.success_rate)
    return summary


def write_summary_csv(summaries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS)
        w.writeheader()
        for s in summaries:
            w.writerow({k: (f"{v:.4f}" if isinstance(v, float) else v) for k, v in s.row().items()})


def qq_pairs(w) -> tuple[np.ndarray, np.ndarray]:
    """Sorted statistics paired with normal plotting positions (i - 0.5) / m."""
    w = np.sort(np.asarray(w, dtype=float))
    m = w.size
    ref = special.ndtri((np.arange(1, m + 1) - 0.5) / m)
    return ref, w


def write_wn_csv(summaries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "n", "i", "w_n", "normal_quantile"])
        for s in summaries:
            ref, ws = qq_pairs(s.w_n_samples)
            for i, (q, x) in enumerate(zip(ref, ws), start=1):
                w.writerow([s.name, s.n, i, f"{x:.8g}", f"{q:.8g}"])


@dataclass(frozen=True)
class Bands:
    """Acceptance bands for a scenario summary."""

    coverage: tuple[float, float]
    ratio: tuple[float, float]
    max_abs_bias: float = 0.01
    min_bracket: float = 0.90


# B=2000 reproduces the published panel: coverage 0.95 +/- 3 MC standard errors
# and the variance ratio within 10% for SN laws at n >= 400.
FULL_BANDS = Bands((0.935, 0.965), (0.90, 1.10))
# desk scale: wider bands absorb the larger MC error of B=500
DESK_BANDS = Bands((0.925, 0.97), (0.88, 1.12))


def bands_for(B: int) -> Bands:
    return FULL_BANDS if B >= FULL_B else DESK_BANDS


def check_bands(summary: ScenarioSummary, bands: Bands | None = None) -> list[str]:
    """Names of the bands ``summary`` violates (empty when all pass)."""
    bands = bands_for(summary.B) if bands is None else bands
    fails = []
    if summary.unreliable or not np.isfinite(summary.bias):
        return ["success"]
    if abs(summary.bias) >= bands.max_abs_bias:
        fails.append("bias")
    lo, hi = bands.coverage
    if not lo <= summary.coverage <= hi:
        fails.append("coverage")
    # the ratio band is only asserted where asymptotics are trusted; the
    # desk bands are wide enough to cover the ST laws as well
    ratio_checked = summary.n >= 400 and (summary.name.startswith("SN") or bands is DESK_BANDS)
    if ratio_checked:
        lo, hi = bands.ratio
        if not lo <= summary.ratio <= hi:
            fails.append("ratio")
    if not (summary.name == "ST3" and summary.n <= 200) and summary.bracket_rate < bands.min_bracket:
        fails.append("bracket")
    return fails
