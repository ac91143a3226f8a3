import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.signal import fftconvolve
from scipy.special import gamma

from corrctrw.convergence_lab import ks_distance
from corrctrw.ctrw_engine import (
    CtrwConfig,
    Innovation,
    WeightScheme,
    b_norming,
    btilde,
    classical_ctrw,
    exact_sigma_n,
    gen_jumps,
    gen_waiting_and_counting,
    k1_constant,
    limit_sampler,
    make_weights,
    simulate_scaled_ctrw,
)
from corrctrw.errors import ConfigurationError, ParameterError
from corrctrw.frac_pde import stable_cdf
from corrctrw.stable_rng import RngStream, StableParams, WaitingTimeLaw
from conftest import mean_se


def finite(*w):
    return WeightScheme("finite", explicit_weights=tuple(w))


# -- weights ------------------------------------------------------------------

def test_finite_weights_sum():
    assert make_weights(finite(1, 1, 1)).w == 3.0


def test_power_law_coefficient():
    ws = WeightScheme("power_law", c0=1.0, H=0.8, alpha=1.5, L=10_000)
    c = make_weights(ws).coefficients
    assert c[0] == 1.0
    assert c[100] == pytest.approx(100 ** (0.8 - 1 - 1 / 1.5), rel=1e-14)
    assert c[100] == pytest.approx(0.018478, abs=1e-6)


def test_zero_sum_enforced():
    ws = WeightScheme("zero_sum", c0=1.0, H=0.4, alpha=1.25, L=1000)
    c = make_weights(ws).coefficients
    assert abs(c.sum()) < 1e-12
    assert abs(ws.total()) < 1e-12


def test_zero_sum_untruncated_total():
    ws = WeightScheme("zero_sum", c0=1.0, H=0.4, alpha=1.25)
    assert abs(ws.total()) < 1e-12


def test_zero_sum_infeasible():
    with pytest.raises(ConfigurationError) as err:
        WeightScheme("zero_sum", H=0.4, alpha=1.25, L=0)
    assert err.value.code == "zero_sum_infeasible"
    with pytest.raises(ConfigurationError):
        WeightScheme("zero_sum", H=0.9, alpha=1.25)  # tail not summable


def test_summability_failure():
    ws = WeightScheme("power_law", H=0.9, alpha=1.5, rho=1.0)
    with pytest.raises(ConfigurationError) as err:
        make_weights(ws)
    assert err.value.code == "summability"


def test_partial_sums_beyond_table_continue_smoothly():
    ws = WeightScheme("power_law", H=0.75, alpha=2.0)
    m = np.array([2**21 - 1, 2**21, 2**21 + 1, 2**21 + 2])
    d = np.diff(ws.partial_sums(m))
    exact = ws.c0 * (m[1:].astype(float)) ** ws.exponent
    assert np.allclose(d, exact, rtol=1e-9)


@given(st.floats(0.05, 0.95), st.floats(1.05, 2.0))
def test_zero_sum_partial_sums_decay(H, alpha):
    if H >= 1 / alpha:
        return
    ws = WeightScheme("zero_sum", H=H, alpha=alpha)
    # C(m) = -sum_{j > m} c_j, negative and shrinking in magnitude
    c = ws.partial_sums(np.array([10, 100, 1000]))
    assert np.all(c < 0) and np.all(np.diff(np.abs(c)) < 0)


# -- K1 -----------------------------------------------------------------------

@pytest.mark.parametrize("args,val", [((1, 1.5, 0.8), 7.5), ((1, 1.25, 0.4), -2.5),
                                      ((2, 1.5, 0.8), 15.0)])
def test_k1_values(args, val):
    assert k1_constant(*args) == pytest.approx(val)


def test_k1_degenerate():
    with pytest.raises(ConfigurationError) as err:
        k1_constant(1.0, 1.25, 0.8)
    assert err.value.code == "k1_degenerate"


# -- jumps ----------------------------------------------------------------------

def test_identity_filter():
    z = Innovation.gaussian().sample(50, RngStream(1, 0))
    y = gen_jumps(finite(1.0), Innovation.gaussian(), 50, RngStream(1, 0))
    assert np.array_equal(y, z)


def test_ma1_moments():
    y = gen_jumps(finite(1.0, 1.0), Innovation.gaussian(), 100_000, RngStream(2, 0))
    m, se = mean_se(y**2)
    assert abs(m - 2.0) < 4 * se
    m, se = mean_se(y[1:] * y[:-1])
    assert abs(m - 1.0) < 4 * se


def test_burn_in_below_lag():
    with pytest.raises(ConfigurationError) as err:
        gen_jumps(finite(1.0, 0.5, 0.25), Innovation.gaussian(), 10, RngStream(0, 0), burn_in=1)
    assert err.value.code == "burn_in"


def test_long_range_dependence_slope():
    ws = WeightScheme("power_law", H=0.75, alpha=2.0, L=2**17)
    c = ws.coefficients()
    acov = fftconvolve(c, c[::-1])[c.size - 1:]
    lags = np.unique(np.geomspace(10, 1000, 20).astype(int))
    slope = np.polyfit(np.log(lags), np.log(acov[lags] / acov[0]), 1)[0]
    assert abs(slope - (2 * 0.75 - 2)) < 0.1
    # the generator reproduces that autocovariance at short lags
    y = gen_jumps(ws, Innovation.gaussian(), 2**17, RngStream(3, 0))
    for k in (1, 10):
        m, se = mean_se(y[k:] * y[:-k])
        # neighbouring products are strongly dependent under LRD; inflate the error bar
        assert abs(m - acov[k]) < 0.25 * acov[0]


def test_stationarity_windows():
    ws = finite(1.0, 0.6, 0.3, 0.1)
    y = gen_jumps(ws, Innovation.gaussian(), 200_000, RngStream(4, 0))
    a, b = y[:100_000], y[100_000:]
    for f in (lambda v: v, lambda v: v**2):
        m1, s1 = mean_se(f(a))
        m2, s2 = mean_se(f(b))
        assert abs(m1 - m2) < 4 * math.hypot(s1, s2) * 2  # factor 2 for serial correlation


def test_pareto_innovations_reach_stable_limit():
    alpha, n = 1.5, 1000
    inn = Innovation.pareto_symmetric(alpha)
    z = inn.sample(20_000 * n, RngStream(5, 0)).reshape(20_000, n)
    x = np.sort(z.sum(axis=1) * n ** (-1 / alpha))
    F = stable_cdf(inn.limit_params(), x)
    emp = np.arange(1, x.size + 1) / x.size
    ks = max(np.max(np.abs(emp - F)), np.max(np.abs(emp - 1 / x.size - F)))
    assert ks < 0.02


# -- exact variance -------------------------------------------------------------

def test_sigma_identity_filter():
    assert exact_sigma_n(finite(1.0), 10) ** 2 == pytest.approx(10.0)


def test_sigma_hand_expansion():
    assert exact_sigma_n(finite(1.0, 1.0), 2) ** 2 == pytest.approx(6.0)


def test_sigma_regular_variation():
    ws = WeightScheme("power_law", H=0.75, alpha=2.0, head="zeta")
    r = [exact_sigma_n(ws, n) ** 2 / n**1.5 for n in (1000, 10_000)]
    assert abs(r[1] / r[0] - 1) < 0.05


def test_sigma_matches_monte_carlo():
    ws = WeightScheme("power_law", H=0.75, alpha=2.0, L=30)
    c = ws.coefficients()
    n, m = 100, 100_000
    Z = RngStream(6, 0).generator().standard_normal((m, n + ws.L))
    Y = fftconvolve(Z, c[None, :], mode="valid", axes=1)
    S = Y.sum(axis=1)
    v = S.var(ddof=1)
    target = exact_sigma_n(ws, n) ** 2
    assert abs(v - target) < 4 * target * math.sqrt(2.0 / (m - 1))


# -- waiting times and counting ------------------------------------------------

def test_deterministic_counting():
    T, N = gen_waiting_and_counting(WaitingTimeLaw.finite_mean(1.0, "deterministic"), 50.0,
                                    RngStream(0, 0))
    t = np.linspace(0, 50, 201)
    assert np.array_equal(N(t), np.floor(t).astype(int))


def test_counting_nondecreasing():
    _, N = gen_waiting_and_counting(WaitingTimeLaw.pareto(0.7), 1e4, RngStream(0, 1))
    assert np.all(np.diff(N(np.linspace(0, 1e4, 1000))) >= 0)


def test_counting_mittag_leffler_mean():
    beta, c = 0.6, 1e5
    law = WaitingTimeLaw.pareto(beta)
    g = RngStream(7, 0).generator()
    x = np.array([gen_waiting_and_counting(law, c, g)[1](c) for _ in range(20_000)])
    x = x / btilde(c, law)
    assert abs(x.mean() * gamma(1 + beta) - 1) < 0.02


def test_btilde_power_law():
    law = WaitingTimeLaw.pareto(0.6)
    r1 = btilde(1e3, law) / 1e3**0.6
    r2 = btilde(1e5, law) / 1e5**0.6
    assert abs(r1 - r2) < 1e-12
    assert 0 < btilde(1e3, law) < np.inf


def test_btilde_inverse_identity():
    t = 1e6
    assert abs(t * float(b_norming(btilde(t, WaitingTimeLaw.pareto(0.5)), 0.5)) - 1) < 1e-6


def test_btilde_finite_mean_not_applicable():
    with pytest.raises(ConfigurationError) as err:
        btilde(10.0, WaitingTimeLaw.finite_mean(1.0))
    assert err.value.code == "btilde_not_applicable"


# -- hypothesis gating ----------------------------------------------------------

PARETO = WaitingTimeLaw.pareto(0.8)


def test_t3_rejects_positive_weights():
    with pytest.raises(ConfigurationError) as err:
        CtrwConfig(WeightScheme("power_law", H=0.4, alpha=1.25, L=100),
                   Innovation.pareto_symmetric(1.25), PARETO, "T3", 100.0)
    assert err.value.code == "T3_zero_sum"


@pytest.mark.parametrize("ws,inn,th,code", [
    (finite(0.5, -0.1), Innovation.pareto_symmetric(1.7), "T1", "T1_nonnegative_weights"),
    (WeightScheme("power_law", H=0.5, alpha=1.5), Innovation.pareto_symmetric(1.5), "T2",
     "T2_H_range"),
    (WeightScheme("power_law", H=0.8, alpha=1.5), Innovation.gaussian(), "T2", "alpha_mismatch"),
    (WeightScheme("zero_sum", H=0.9, alpha=1.25, L=100), Innovation.pareto_symmetric(1.25), "T3",
     "T3_H_range"),
    (finite(1.0), Innovation.pareto_symmetric(1.5), "T4", "T4_gaussian"),
    (finite(1.0), Innovation.gaussian(), "T9", "theorem_id"),
])
def test_gating_codes(ws, inn, th, code):
    with pytest.raises(ConfigurationError) as err:
        CtrwConfig(ws, inn, PARETO, th, 100.0)
    assert err.value.code == code


def test_t1_records_conditions():
    cfg = CtrwConfig(finite(0.5, 0.3, 0.2), Innovation.pareto_symmetric(1.7), PARETO, "T1", 10.0)
    assert cfg.hypotheses["conditions_held"] == ["b", "c"]


def test_t1_nonmonotone_infinite_weights_warn():
    ws = WeightScheme("power_law", c0=1.0, H=0.2, alpha=1.5, head="c0")
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        cfg = CtrwConfig(ws, Innovation.pareto_symmetric(1.5), PARETO, "T1", 10.0)
    assert cfg.hypotheses["conditions_held"] == ["c"]


@given(st.sampled_from(["T1", "T2", "T3", "T4"]), st.sampled_from(["power_law", "zero_sum"]),
       st.floats(0.05, 0.95), st.sampled_from([1.25, 1.5, 1.7, 2.0]))
def test_gating_never_accepts_incompatible(th, kind, H, alpha):
    inn = Innovation.gaussian() if alpha == 2.0 else Innovation.pareto_symmetric(alpha)
    try:
        ws = WeightScheme(kind, H=H, alpha=alpha, L=200)
        CtrwConfig(ws, inn, PARETO, th, 10.0)
    except (ConfigurationError, ParameterError):
        return
    if th == "T2":
        assert kind == "power_law" and 1 < alpha < 2 and 1 / alpha < H
    if th == "T3":
        assert kind == "zero_sum" and alpha < 2 and H < 1 / alpha
    if th == "T4":
        assert alpha == 2.0
    if th == "T1":
        assert kind == "power_law"


def test_config_round_trip():
    cfg = CtrwConfig(WeightScheme("zero_sum", H=0.4, alpha=1.25), Innovation.pareto_symmetric(1.25),
                     PARETO, "T3", 1e3, t_grid=(0.5, 1.0))
    again = CtrwConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()


# -- scaled CTRW ------------------------------------------------------------------

def test_identity_weights_match_classical_ctrw_pathwise():
    cfg = CtrwConfig(finite(1.0), Innovation.pareto_symmetric(1.7), PARETO, "T1", 1e3,
                     t_grid=(0.5, 1.0))
    a = simulate_scaled_ctrw(cfg, RngStream(8, 0), m=500)
    b = classical_ctrw(cfg, RngStream(8, 0), m=500)
    assert np.array_equal(a.values, b.values)


def test_finite_mean_brownian_limit():
    inn = Innovation.gaussian(2.0)  # a = 1
    cfg = CtrwConfig(finite(1.0), inn, WaitingTimeLaw.finite_mean(1.0), "T1", 1e3)
    x = simulate_scaled_ctrw(cfg, RngStream(9, 0), m=10_000).at(1.0)
    y = limit_sampler(cfg)(1.0, 20_000, RngStream(9, 1))
    assert abs(y.var() - 2.0) < 0.1
    assert ks_distance(x, y) < 0.03


def test_t4_marginal_against_limit():
    ws = WeightScheme("power_law", H=0.75, alpha=2.0)
    cfg = CtrwConfig(ws, Innovation.gaussian(), WaitingTimeLaw.pareto(0.8), "T4", 1e4)
    x = simulate_scaled_ctrw(cfg, RngStream(10, 0), m=10_000).at(1.0)
    y = limit_sampler(cfg)(1.0, 10_000, RngStream(10, 1))
    assert ks_distance(x, y) < 0.05


def test_scaled_ctrw_deterministic():
    cfg = CtrwConfig(WeightScheme("power_law", H=0.75, alpha=2.0), Innovation.gaussian(),
                     WaitingTimeLaw.pareto(0.8), "T4", 100.0, t_grid=(0.5, 1.0))
    a = simulate_scaled_ctrw(cfg, RngStream(11, 3), m=64)
    b = simulate_scaled_ctrw(cfg, RngStream(11, 3), m=64)
    assert a.values.tobytes() == b.values.tobytes()
