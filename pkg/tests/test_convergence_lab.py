import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats
from scipy.special import gamma

from corrctrw.convergence_lab import (
    ExperimentReport,
    energy_distance,
    increment_dependence_check,
    ks_distance,
    ks_standard_error,
    ltbm_ensemble,
    mittag_leffler_moment,
    run_theorem_experiment,
    self_similarity_check,
    trend_verdict,
)
from corrctrw.ctrw_engine import CtrwConfig, Innovation, WeightScheme, limit_sampler
from corrctrw.errors import ParameterError
from corrctrw.frac_pde import subordinated_density
from corrctrw.process_gen import sample_fbm_of_inverse, sample_inverse_subordinator, sample_levy_of_inverse
from corrctrw.stable_rng import RngStream, StableParams, WaitingTimeLaw


# -- KS -------------------------------------------------------------------------

def test_ks_identical():
    x = np.random.default_rng(0).standard_normal(100)
    assert ks_distance(x, x) == 0.0


def test_ks_disjoint():
    assert ks_distance([-3.0, -2.0, -1.0], [2.0, 3.0]) == 1.0


def test_ks_hand_value():
    assert ks_distance([1, 2, 3], [1, 2, 3, 4, 5, 6]) == pytest.approx(0.5)


def test_ks_empty():
    with pytest.raises(ParameterError) as err:
        ks_distance([], [1.0])
    assert err.value.code == "empty_sample"


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40),
       st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40))
def test_ks_matches_scipy(a, b):
    assert ks_distance(a, b) == pytest.approx(stats.ks_2samp(a, b).statistic, abs=1e-12)


def test_ks_standard_error_matches_null_spread():
    rng = np.random.default_rng(1)
    d = [ks_distance(rng.random(400), rng.random(400)) for _ in range(2000)]
    assert np.std(d) == pytest.approx(ks_standard_error(400, 400), rel=0.15)


def test_energy_distance_zero_for_same_law():
    rng = np.random.default_rng(2)
    a, b = rng.standard_normal((1500, 2)), rng.standard_normal((1500, 2))
    c = rng.standard_normal((1500, 2)) + 1.0
    assert energy_distance(a, b) < 0.05 < energy_distance(a, c)


# -- trend ----------------------------------------------------------------------

def test_trend_verdicts():
    assert trend_verdict([0.1], [0.01]) == "insufficient-scales"
    assert trend_verdict([0.1, 0.05, 0.02], [0.01] * 3) == "pass"
    assert trend_verdict([0.05, 0.06, 0.02], [0.01] * 3) == "pass"  # within noise
    assert trend_verdict([0.02, 0.1], [0.01, 0.01]) == "fail"


def _report(rows, scales=(1e2, 1e3)):
    return ExperimentReport("T1", list(scales), rows, 0.05, 0, {})


def test_report_verdicts_are_functions_of_rows(tmp_path):
    rows = [{"c": 1e2, "t": 1.0, "m": 10, "m_limit": 10, "ks": 0.04, "se": 0.01},
            {"c": 1e3, "t": 1.0, "m": 10, "m_limit": 10, "ks": 0.03, "se": 0.01}]
    rep = _report(rows)
    assert rep.verdicts() == {"trend": "pass", "final_ks": "pass"}
    rep.to_json(tmp_path / "r.json")
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["verdicts"]["trend"] in ("pass", "fail", "insufficient-scales")
    rep.to_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().startswith("theorem,c,t,m,m_limit,ks,se,pass")


def test_single_scale_has_no_trend():
    cfg = CtrwConfig(WeightScheme("finite", explicit_weights=(1.0,)), Innovation.gaussian(),
                     WaitingTimeLaw.pareto(0.8), "T4", 100.0)
    rep = run_theorem_experiment("T4", cfg, [100.0], m=500, master_seed=3)
    assert len(rep.rows) == 1 and rep.trend == "insufficient-scales"
    assert rep.rows[0]["se"] == pytest.approx(ks_standard_error(500, 500))


def test_experiment_rejects_decreasing_scales():
    cfg = CtrwConfig(WeightScheme("finite", explicit_weights=(1.0,)), Innovation.gaussian(),
                     WaitingTimeLaw.pareto(0.8), "T4", 100.0)
    with pytest.raises(ParameterError):
        run_theorem_experiment("T4", cfg, [1e3, 1e2], m=10)


def test_brownian_time_change_limit_matches_subordinated_density():
    cfg = CtrwConfig(WeightScheme("finite", explicit_weights=(1.0, 0.5)), Innovation.gaussian(),
                     WaitingTimeLaw.pareto(0.75), "T4", 1e3)
    x = limit_sampler(cfg)(1.0, 100_000, RngStream(4, 0))
    edges = np.linspace(-5, 5, 41)
    mids = 0.5 * (edges[1:] + edges[:-1])
    pts = np.sort(np.concatenate([edges, mids]))
    d = subordinated_density(StableParams(2.0, a=0.5), 0.75, pts, 1.0)
    probs = np.diff(edges) / 6 * (d[0:-1:2] + 4 * d[1::2] + d[2::2])
    counts, _ = np.histogram(x, edges)
    l1 = np.sum(np.abs(counts / x.size - probs)) + abs(np.mean(np.abs(x) > 5) - (1 - probs.sum()))
    assert l1 < 0.05


# -- self-similarity --------------------------------------------------------------

@pytest.mark.parametrize("t", [1.0, 2.0])
def test_deterministic_sampler_scales_exactly(t):
    rep = self_similarity_check(lambda s, n, g: np.full(n, s**0.5), 0.5, 4.0, 100,
                                RngStream(0, 0), t=t)
    assert rep["ks"] == 0.0 and rep["pass"]


def test_levy_of_inverse_self_similarity():
    p = StableParams(1.7)
    rep = self_similarity_check(lambda t, n, g: sample_levy_of_inverse(p, 0.68, t, n, g),
                                0.68 / 1.7, 3.0, 100_000, RngStream(5, 0))
    assert rep["pass"], rep


def test_fbm_of_inverse_self_similarity():
    rep = self_similarity_check(lambda t, n, g: sample_fbm_of_inverse(0.6, 0.5, t, n, g),
                                0.3, 3.0, 100_000, RngStream(5, 1))
    assert rep["pass"], rep


def test_self_similarity_rejects_bad_scale():
    with pytest.raises(ParameterError):
        self_similarity_check(lambda t, n, g: np.zeros(n), 0.5, 1.0, 10, RngStream(0, 0))


# -- Mittag-Leffler moments -----------------------------------------------------------

def test_ml_moment_values():
    assert mittag_leffler_moment(0.5, 1.0, 1) == pytest.approx(1 / gamma(1.5))
    assert mittag_leffler_moment(0.5, 4.0, 1) == pytest.approx(2.25676, abs=1e-5)
    for b in (0.2, 0.5, 0.9):
        assert mittag_leffler_moment(b, 1.0, 0) == 1.0


@pytest.mark.parametrize("beta", [0.3, 0.5, 0.7, 0.9])
def test_ml_moments_against_inversion(beta):
    E = sample_inverse_subordinator(beta, 1.0, 20_000, RngStream(6, int(10 * beta)))[:, 0]
    for n in (1, 2):
        v = E**n
        se = v.std(ddof=1) / math.sqrt(v.size)
        # grid first passage overshoots by at most one mesh step
        bias = n * 2e-3 * v.mean()
        assert abs(v.mean() - mittag_leffler_moment(beta, 1.0, n)) < 4 * se + bias


# -- increments of the time-changed Brownian motion ------------------------------------

def test_ltbm_uncorrelated_but_dependent():
    v = ltbm_ensemble(0.6, [1e-12, 1.0, 2.0], 100_000, RngStream(7, 0))
    v[:, 0] = 0.0  # W(E_0) = 0
    rep = increment_dependence_check(v)
    assert abs(rep["rho"]) < 0.013 and rep["uncorrelated"]
    assert rep["rho_squared"] > 0.013 and rep["dependent"]


def test_iid_control():
    v = np.cumsum(np.random.default_rng(8).standard_normal((100_000, 3)), axis=1)
    rep = increment_dependence_check(v)
    assert rep["uncorrelated"] and abs(rep["rho_squared"]) < rep["gate"]


def test_too_few_paths():
    with pytest.raises(ParameterError) as err:
        increment_dependence_check(np.zeros((100, 3)))
    assert err.value.code == "too_few_paths"
