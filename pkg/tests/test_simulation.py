import csv
import math

import numpy as np
import pytest
from scipy import special

from smsnroc import simulation as S
from smsnroc.distributions import DistSpec


def test_six_scenarios(scenarios):
    assert list(scenarios) == ["SN1", "SN2", "SN3", "ST1", "ST2", "ST3"]
    st2 = scenarios["ST2"]
    assert st2.spec0 == DistSpec.st(0, 1, 1.5, 7)
    assert st2.spec1 == DistSpec.st(2, 1.2, 2, 7)
    assert (st2.cfg.lambda0, st2.cfg.lambda1, st2.cfg.pi0, st2.cfg.pi1) == (1, 3, 0.8, 0.2)


def test_group_sizes(scenarios):
    s = scenarios["SN1"].with_(n_total=401)
    assert (s.n0, s.n1) == (200, 201)


def test_typical_replication_succeeds(scenarios):
    rec = S.run_replication(scenarios["SN1"], 0)
    assert rec.success
    assert rec.ci_lo < rec.c_hat < rec.ci_hi
    assert rec.se == pytest.approx(math.sqrt(rec.v_hat / 400))


def test_tiny_sample_is_fit_failure(scenarios):
    rec = S.run_replication(scenarios["SN1"].with_(n_total=10), 0)
    assert rec.exclusion is S.Exclusion.FIT_FAIL
    assert "at least" in rec.detail


def test_replication_is_deterministic(scenarios):
    s = scenarios["ST1"]
    assert S.run_replication(s, 7).key() == S.run_replication(s, 7).key()
    assert S.run_replication(s, 7).key() != S.run_replication(s, 8).key()


def test_streams_depend_on_name_seed_and_index():
    a = S.replication_rng(1, "SN1", 0).random(3)
    assert np.array_equal(a, S.replication_rng(1, "SN1", 0).random(3))
    for other in (S.replication_rng(2, "SN1", 0), S.replication_rng(1, "SN2", 0), S.replication_rng(1, "SN1", 1)):
        assert not np.array_equal(a, other.random(3))


def test_single_replication_summary(scenarios):
    s = scenarios["SN2"].with_(B=1)
    summ = S.run_scenario(s)
    rec = S.run_replication(s, 0)
    assert summ.mean_c_hat == rec.c_hat
    assert summ.bias == pytest.approx(rec.c_hat - summ.c_star_true)
    assert summ.var_th == rec.v_hat
    assert summ.coverage == float(rec.covered)
    assert summ.sd == 0.0
    assert summ.mean_ci_length == pytest.approx(rec.ci_hi - rec.ci_lo)


def test_worker_count_does_not_change_summary(scenarios):
    s = scenarios["SN3"].with_(B=6)
    one, two = S.run_scenario(s, workers=1), S.run_scenario(s, workers=2)
    assert one.row() == two.row()
    assert np.array_equal(one.w_n_samples, two.w_n_samples)


def test_unreliable_flag(scenarios):
    s = scenarios["SN1"]
    recs = [S.ReplicationRecord(i, exclusion=S.Exclusion.FIT_FAIL) for i in range(3)]
    recs.append(S.ReplicationRecord(3, c_hat=1.6, v_hat=0.8, ci_lo=1.5, ci_hi=1.7, covered=True))
    summ = S.summarize(s, recs, 1.6101)
    assert summ.unreliable
    assert summ.success_rate == 0.25
    assert summ.exclusions["FitFail"] == 3


def test_w_n_definition(scenarios):
    s = scenarios["SN1"].with_(n_total=100)
    recs = [S.ReplicationRecord(i, c_hat=c, v_hat=v, covered=True, ci_lo=0, ci_hi=1)
            for i, (c, v) in enumerate([(1.0, 0.5), (1.2, 1.5), (0.9, 1.0)])]
    summ = S.summarize(s, recs, 1.0)
    assert np.allclose(summ.w_n_samples, 10 * (np.array([1.0, 1.2, 0.9]) - 1.0) / 1.0)
    assert summ.var_emp == pytest.approx(100 * np.var([1.0, 1.2, 0.9]))


def test_qq_plotting_positions():
    ref, w = S.qq_pairs([3.0, -1.0, 0.5, 2.0])
    assert np.array_equal(w, [-1.0, 0.5, 2.0, 3.0])
    assert np.allclose(ref, special.ndtri((np.arange(1, 5) - 0.5) / 4))


def test_summary_csv_columns(scenarios, tmp_path):
    summ = S.run_scenario(scenarios["SN1"].with_(B=2))
    S.write_summary_csv([summ], tmp_path / "t.csv")
    S.write_wn_csv([summ], tmp_path / "w.csv")
    with open(tmp_path / "t.csv") as fh:
        header = next(csv.reader(fh))
    assert header == S.TABLE_COLUMNS
    with open(tmp_path / "w.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 and rows[0]["scenario"] == "SN1"


class TestBands:
    @staticmethod
    def summary(**kw):
        base = dict(name="SN1", n=400, B=500, c_star_true=1.61, mean_c_hat=1.61, bias=0.0, rmse=0.04, sd=0.04,
                    var_emp=0.8, var_th=0.8, ratio=1.0, mean_slope=0.38, coverage=0.95, mean_ci_length=0.17,
                    success_rate=1.0, bracket_rate=1.0)
        base.update(kw)
        return S.ScenarioSummary(**base)

    def test_passes(self):
        assert S.check_bands(self.summary()) == []

    @pytest.mark.parametrize("field,value,band", [("bias", 0.02, "bias"), ("coverage", 0.92, "coverage"),
                                                  ("ratio", 1.15, "ratio"), ("bracket_rate", 0.85, "bracket")])
    def test_failures(self, field, value, band):
        assert band in S.check_bands(self.summary(**{field: value}))

    def test_st3_small_n_bracket_exempt(self):
        assert S.check_bands(self.summary(name="ST3", n=200, bracket_rate=0.82)) == []

    def test_full_scale_bands_are_tighter(self):
        s = self.summary(B=2000, coverage=0.93)
        assert "coverage" in S.check_bands(s)
        assert S.check_bands(self.summary(B=500, coverage=0.93)) == []
