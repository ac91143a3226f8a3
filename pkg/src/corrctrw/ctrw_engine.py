"""Pre-limit processes: correlated jumps, waiting times, counting process, scaled CTRWs.

The jump sequence is the linear process Y_n = sum_j c_j Z_{n-j}. Writing
C(m) = c_0 + ... + c_m (capped at the truncation lag), the partial sum is

    S(n) = sum_{i=1}^{n} C(n-i) Z_i + sum_{u>=0} [C(n+u) - C(u)] Z_{-u},

which is what :func:`simulate_scaled_ctrw` evaluates. The recent innovations and
the near past are drawn one by one; the far past is grouped into geometric blocks
whose innovation sums are replaced by the matching stable (or Gaussian) law.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import zeta

from .errors import ConfigurationError, ParameterError
from .process_gen import (
    PathGrid,
    sample_fbm_of_inverse,
    sample_inverse_subordinator,
    sample_levy_of_inverse,
    sample_lfsm_of_inverse,
    lfsm_marginal,
)
from .stable_rng import (
    RngLike,
    StableParams,
    WaitingTimeLaw,
    as_generator,
    pareto_innovation_scale,
    sample_pareto,
    sample_stable,
    sample_waiting_times,
)

THEOREMS = ("T1", "T2", "T3", "T4")
_TABLE_MAX = 2**21
_GL3 = np.polynomial.legendre.leggauss(3)


# ---------------------------------------------------------------------------
# Innovations


@dataclass(frozen=True)
class Innovation:
    """IID innovations Z_n: ``pareto_symmetric`` (tail index alpha) or ``gaussian``.

    Pareto innovations are scaled so that n^(-1/alpha) (Z_1 + ... + Z_n) converges
    to A(1) with ``StableParams(alpha, 1/2, 1/2, a)``.
    """

    kind: str
    alpha: float = 2.0
    a: float = 1.0
    variance: float = 1.0

    def __post_init__(self):
        if self.kind == "pareto_symmetric":
            if not (0.0 < self.alpha < 2.0):
                raise ParameterError(f"pareto innovations need alpha in (0,2), got {self.alpha}",
                                     code="alpha_range", alpha=self.alpha)
            if not self.a > 0:
                raise ParameterError("innovation scale must be positive", code="scale_positive")
        elif self.kind == "gaussian":
            if not self.variance > 0:
                raise ParameterError("variance must be positive", code="variance_positive")
            object.__setattr__(self, "alpha", 2.0)
        else:
            raise ParameterError(f"unknown innovation kind {self.kind!r}", code="innovation_kind")

    @classmethod
    def pareto_symmetric(cls, alpha, a=1.0):
        return cls("pareto_symmetric", alpha=alpha, a=a)

    @classmethod
    def gaussian(cls, variance=1.0):
        return cls("gaussian", variance=variance)

    def limit_params(self) -> StableParams:
        """Law of A(1), the limit of n^(-1/alpha) times the innovation sums."""
        if self.kind == "gaussian":
            return StableParams(2.0, a=0.5 * self.variance)
        return StableParams(self.alpha, a=self.a)

    def sample(self, n, rng) -> np.ndarray:
        g = as_generator(rng)
        if self.kind == "gaussian":
            return math.sqrt(self.variance) * g.standard_normal(n)
        scale = pareto_innovation_scale(self.alpha) * self.a ** (1.0 / self.alpha)
        return scale * sample_pareto(self.alpha, n, g, symmetric=True)

    def sample_block_sums(self, sizes, rng) -> np.ndarray:
        """Approximate sums of ``sizes`` innovations (exact for Gaussian)."""
        g = as_generator(rng)
        sizes = np.asarray(sizes, dtype=float)
        if self.kind == "gaussian":
            return np.sqrt(sizes * self.variance) * g.standard_normal(sizes.shape)
        return sample_stable(self.limit_params(), sizes.ravel(), sizes.size, g).reshape(sizes.shape)

    def to_dict(self):
        if self.kind == "gaussian":
            return {"kind": "gaussian", "variance": self.variance}
        return {"kind": "pareto_symmetric", "alpha": self.alpha, "a": self.a}


# ---------------------------------------------------------------------------
# Weights


@lru_cache(maxsize=16)
def _power_table(expo: float, size: int) -> np.ndarray:
    """P(m) = sum_{j=1}^m j^expo for m = 0..size."""
    out = np.zeros(size + 1)
    np.cumsum(np.arange(1, size + 1, dtype=float) ** expo, out=out[1:])
    return out


def _power_partial_sums(expo: float, m, limit: int) -> np.ndarray:
    """P(m) for integer m >= 0; Euler-Maclaurin continuation beyond the table."""
    m = np.asarray(m, dtype=float)
    m0 = min(limit, _TABLE_MAX)
    table = _power_table(expo, m0)
    small = m <= m0
    out = np.empty_like(m)
    out[small] = table[m[small].astype(np.int64)]
    if np.any(~small):
        x = m[~small]
        x0 = float(m0)
        if abs(expo + 1.0) < 1e-14:
            integral = np.log(x / x0)
        else:
            integral = (x ** (expo + 1) - x0 ** (expo + 1)) / (expo + 1)
        corr = 0.5 * (x**expo - x0**expo) + expo / 12.0 * (x ** (expo - 1) - x0 ** (expo - 1))
        corr -= expo * (expo - 1) * (expo - 2) / 720.0 * (x ** (expo - 3) - x0 ** (expo - 3))
        out[~small] = table[m0] + integral + corr
    return out


@dataclass(frozen=True)
class WeightScheme:
    """Coefficients c_j of the linear process.

    ``power_law``: c_j = c0 j^(H - 1 - 1/alpha) for 1 <= j <= L and c_0 = c0
    (or -c0 zeta(1 + 1/alpha - H) when ``head="zeta"``, which removes the constant
    term of the partial sums). ``zero_sum``: same tail, c_0 chosen so the weights
    sum to zero. ``finite``: ``explicit_weights``. ``L=None`` means no truncation.
    """

    kind: str
    c0: float = 1.0
    H: Optional[float] = None
    alpha: Optional[float] = None
    L: Optional[int] = None
    explicit_weights: Optional[tuple] = None
    rho: Optional[float] = None
    head: str = "c0"

    def __post_init__(self):
        if self.kind == "finite":
            if not self.explicit_weights:
                raise ParameterError("finite scheme needs explicit_weights",
                                     code="weights_missing")
            object.__setattr__(self, "explicit_weights",
                               tuple(float(c) for c in self.explicit_weights))
            object.__setattr__(self, "L", len(self.explicit_weights) - 1)
        elif self.kind in ("power_law", "zero_sum"):
            if self.H is None or not (0.0 < self.H < 1.0):
                raise ParameterError(f"H={self.H} outside (0,1)", code="H_range")
            if self.alpha is None or not (0.0 < self.alpha <= 2.0):
                raise ParameterError(f"alpha={self.alpha} outside (0,2]", code="alpha_range")
            if not self.c0 > 0:
                raise ParameterError("c0 must be positive", code="c0_positive")
            if self.L is not None:
                object.__setattr__(self, "L", int(self.L))
                if self.L < 1:
                    raise ConfigurationError(f"truncation lag L={self.L} leaves no tail",
                                             code="zero_sum_infeasible" if self.kind == "zero_sum"
                                             else "lag_positive", L=self.L)
            if self.head not in ("c0", "zeta"):
                raise ParameterError(f"unknown head rule {self.head!r}", code="head_rule")
            if self.kind == "zero_sum" and self.L is None and self.exponent >= -1.0:
                raise ConfigurationError("untruncated zero-sum weights need H < 1/alpha",
                                         code="zero_sum_infeasible", H=self.H, alpha=self.alpha)
            if self.head == "zeta" and self.kind == "power_law" and self.exponent <= -1.0:
                raise ParameterError("zeta head needs H > 1/alpha", code="head_rule")
        else:
            raise ParameterError(f"unknown weight kind {self.kind!r}", code="weights_kind")
        if self.rho is not None and not (0.0 < self.rho):
            raise ParameterError("rho must be positive", code="rho_positive")

    # -- coefficients --------------------------------------------------------

    @property
    def exponent(self) -> float:
        return self.H - 1.0 - 1.0 / self.alpha

    @property
    def is_finite(self) -> bool:
        return self.L is not None

    @property
    def head_value(self) -> float:
        if self.kind == "finite":
            return self.explicit_weights[0]
        if self.kind == "zero_sum":
            if self.L is None:
                return -self.c0 * float(zeta(-self.exponent))
            return -self.c0 * float(_power_partial_sums(self.exponent, [self.L], self.L)[0])
        if self.head == "zeta":
            return -self.c0 * float(zeta(-self.exponent))
        return self.c0

    def partial_sums(self, m) -> np.ndarray:
        """C(m) = c_0 + ... + c_min(m, L); zero for m < 0."""
        m = np.asarray(m)
        if self.kind == "finite":
            table = np.cumsum(self.explicit_weights)
            out = table[np.clip(m, 0, self.L).astype(np.int64)]
            return np.where(m < 0, 0.0, out)
        limit = self.L if self.L is not None else np.iinfo(np.int64).max
        mc = np.clip(m, 0, limit)
        val = self.head_value + self.c0 * _power_partial_sums(self.exponent, mc, limit)
        return np.where(m < 0, 0.0, val)

    def coefficients(self, max_lag: Optional[int] = None) -> np.ndarray:
        n = self.L if max_lag is None else max_lag
        if n is None:
            raise ConfigurationError("explicit coefficients need a finite lag", code="lag_infinite")
        if self.kind == "finite":
            return np.asarray(self.explicit_weights[: n + 1])
        j = np.arange(1, n + 1, dtype=float)
        return np.concatenate([[self.head_value], self.c0 * j**self.exponent])

    def total(self) -> float:
        """w = sum_j c_j (inf when the tail is not summable)."""
        if self.is_finite:
            return float(self.partial_sums(self.L))
        if self.exponent >= -1.0:
            return math.inf
        return self.head_value + self.c0 * float(zeta(-self.exponent))

    def nonnegative(self) -> bool:
        if self.kind == "finite":
            return min(self.explicit_weights) >= 0
        return self.head_value >= 0

    def monotone(self) -> bool:
        if self.kind == "finite":
            d = np.diff(self.explicit_weights)
            return bool(np.all(d <= 0) or np.all(d >= 0))
        # tail is decreasing; head must not break it
        return self.head_value >= self.c0

    def rho_interval(self):
        """Open interval of rho with sum |c_j|^rho < inf (upper end alpha)."""
        top = self.alpha if self.alpha is not None else 2.0
        if self.is_finite:
            return 0.0, top
        return -1.0 / self.exponent, top

    def rho_norm(self, rho: float) -> float:
        if self.is_finite:
            return float(np.sum(np.abs(self.coefficients()) ** rho))
        if rho * self.exponent >= -1.0:
            return math.inf
        return abs(self.head_value) ** rho + self.c0**rho * float(zeta(-rho * self.exponent))

    def to_dict(self):
        d = {"kind": self.kind, "c0": self.c0, "H": self.H, "alpha": self.alpha, "L": self.L,
             "rho": self.rho, "head": self.head}
        if self.explicit_weights is not None:
            d["explicit_weights"] = list(self.explicit_weights)
        return d


@dataclass
class Weights:
    scheme: WeightScheme
    coefficients: Optional[np.ndarray]
    w: float
    rho: float
    rho_norm: float


def make_weights(scheme: WeightScheme, max_explicit: int = 10**7) -> Weights:
    """Validate a scheme and report its coefficients, w and rho-norm."""
    lo, hi = scheme.rho_interval()
    rho = scheme.rho
    if rho is None:
        rho = 0.5 * (lo + hi) if scheme.is_finite is False else min(1.0, hi)
    norm = scheme.rho_norm(rho)
    if not math.isfinite(norm):
        raise ConfigurationError(f"sum |c_j|^rho diverges at rho={rho}", code="summability",
                                 rho=rho, rho_min=lo)
    coeffs = None
    if scheme.is_finite and scheme.L <= max_explicit:
        coeffs = scheme.coefficients()
    return Weights(scheme, coeffs, scheme.total(), rho, norm)


def k1_constant(c0: float, alpha: float, H: float) -> float:
    d = H * alpha - 1.0
    if d == 0:
        raise ConfigurationError("H alpha = 1: the limit is stable Levy motion, K1 undefined",
                                 code="k1_degenerate", alpha=alpha, H=H)
    return c0 * alpha / d


def gen_jumps(scheme: WeightScheme, innovation: Innovation, n: int, rng: RngLike,
              burn_in: Optional[int] = None) -> np.ndarray:
    """Y_1..Y_n by exact convolution of innovations with the truncated weights."""
    if not scheme.is_finite:
        raise ConfigurationError("gen_jumps needs a finite truncation lag", code="lag_infinite")
    c = scheme.coefficients()
    L = scheme.L
    burn = L if burn_in is None else int(burn_in)
    if burn < L:
        raise ConfigurationError(f"burn_in={burn} below truncation lag {L}", code="burn_in",
                                 burn_in=burn, L=L)
    z = innovation.sample(n + burn, rng)
    return np.convolve(z, c, mode="valid")[burn - L:]


def exact_sigma_n(scheme: WeightScheme, n: int, variance: float = 1.0) -> float:
    """sigma_n with sigma_n^2 = variance * sum_i g_n(i)^2, g_n(i) the weight of Z_i in S(n)."""
    n = int(n)
    if n < 1:
        raise ParameterError("n must be positive", code="n_positive")
    recent = scheme.partial_sums(np.arange(n))
    total = float(np.sum(recent**2))
    top = scheme.L if scheme.is_finite else _TABLE_MAX
    u = np.arange(top)
    past = scheme.partial_sums(n + u) - scheme.partial_sums(u)
    total += float(np.sum(past**2))
    if not scheme.is_finite:
        def g(logv):  # tail sum approximated by the integral, in log variable
            v = math.exp(logv)
            return _past_weight_continuous(scheme, n, v) ** 2 * v

        tail = integrate.quad(g, math.log(top - 0.5), math.log(top) + 80.0, limit=400,
                              epsrel=1e-10)[0]
        total += tail
    return math.sqrt(variance * total)


def _past_weight_continuous(scheme, n, v):
    expo = scheme.exponent
    e1 = expo + 1.0
    # C(n + v) - C(v) for large v from the integral term plus first correction
    if abs(e1) < 1e-14:
        main = math.log1p(n / v)
    else:
        main = v**e1 * math.expm1(e1 * math.log1p(n / v)) / e1
    corr = 0.5 * ((v + n) ** expo - v**expo)
    return scheme.c0 * (main + corr)


# ---------------------------------------------------------------------------
# Waiting times and counting


def btilde(c: float, waiting: WaitingTimeLaw) -> float:
    """Asymptotic inverse of 1/b(t); equals c^beta for the calibrated Pareto law."""
    if waiting.kind != "pareto":
        raise ConfigurationError("btilde applies to heavy-tailed waiting times only; "
                                 "finite-mean laws normalize by c directly",
                                 code="btilde_not_applicable")
    if not c > 0:
        raise ParameterError("c must be positive", code="c_positive")
    return float(c) ** waiting.beta


def b_norming(t, beta: float):
    """b(t) = b_[t] with b_n = n^(-1/beta)."""
    return np.floor(np.asarray(t, dtype=float)) ** (-1.0 / beta)


@dataclass
class CountingProcess:
    arrival_times: np.ndarray  # T_1 <= T_2 <= ...
    horizon: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t > self.horizon):
            raise ParameterError("N evaluated beyond its horizon", code="t_range")
        return np.searchsorted(self.arrival_times, t, side="right")


def gen_waiting_and_counting(waiting: WaitingTimeLaw, horizon: float, rng: RngLike):
    """(T_n, N) with T covering ``horizon``; N(t) = max{n : T_n <= t}."""
    if not horizon > 0:
        raise ParameterError("horizon must be positive", code="horizon_positive")
    g = as_generator(rng)
    parts, last = [], 0.0
    chunk = 1024
    while last <= horizon:
        J = sample_waiting_times(waiting, chunk, g)
        T = last + np.cumsum(J)
        parts.append(T)
        last = T[-1]
        chunk *= 2
    T = np.concatenate(parts)
    return T, CountingProcess(T, horizon)


def _batch_counts(waiting, levels, rows, g, guess):
    """N at each of the sorted ``levels`` for ``rows`` independent renewal paths."""
    out = np.zeros((rows, levels.size), dtype=np.int64)
    done = np.zeros((rows, levels.size), dtype=bool)
    total = np.zeros(rows)
    count = np.zeros(rows, dtype=np.int64)
    active = np.arange(rows)
    chunk = max(64, int(guess))
    while active.size:
        J = sample_waiting_times(waiting, active.size * chunk, g).reshape(active.size, chunk)
        T = total[active, None] + np.cumsum(J, axis=1)
        for k, lev in enumerate(levels):
            rows_k = ~done[active, k] & (T[:, -1] > lev)
            if np.any(rows_k):
                idx = np.argmax(T[rows_k] > lev, axis=1)
                out[active[rows_k], k] = count[active[rows_k]] + idx
                done[active[rows_k], k] = True
        total[active] = T[:, -1]
        count[active] += chunk
        active = active[~done[active, -1]]
    return out


# ---------------------------------------------------------------------------
# Configuration and theorem gating


@dataclass
class CtrwConfig:
    weights: WeightScheme
    innovation: Innovation
    waiting: WaitingTimeLaw
    theorem: str
    c: float
    t_grid: tuple = (1.0,)
    burn_in: Optional[int] = None
    past_growth: float = 1.05
    near_past_factor: float = 2.0
    past_tol: float = 1e-3
    hypotheses: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.t_grid = tuple(float(t) for t in np.atleast_1d(self.t_grid))
        if not self.c > 0:
            raise ParameterError("scale c must be positive", code="c_positive")
        if any(t <= 0 for t in self.t_grid) or list(self.t_grid) != sorted(set(self.t_grid)):
            raise ParameterError("t_grid must be positive and strictly increasing",
                                 code="t_grid")
        if self.burn_in is not None and self.weights.is_finite and self.burn_in < self.weights.L:
            raise ConfigurationError(f"burn_in={self.burn_in} below truncation lag",
                                     code="burn_in", L=self.weights.L)
        self.hypotheses = check_hypotheses(self)

    @property
    def n_scale(self) -> int:
        """[b~(c)] for heavy-tailed waits, [c] for finite-mean ones."""
        if self.waiting.kind == "pareto":
            return max(1, int(math.floor(btilde(self.c, self.waiting))))
        return max(1, int(math.floor(self.c)))

    def norm(self) -> float:
        n = self.n_scale
        if self.theorem == "T1":
            return n ** (-1.0 / self.innovation.alpha) / self.weights.total()
        if self.theorem in ("T2", "T3"):
            return n ** (-self.weights.H)
        return 1.0 / exact_sigma_n(self.weights, n, self.innovation.variance)

    def to_dict(self):
        return {"theorem": self.theorem, "c": self.c, "t_grid": list(self.t_grid),
                "burn_in": self.burn_in, "weights": self.weights.to_dict(),
                "innovation": self.innovation.to_dict(), "waiting": self.waiting.to_dict(),
                "past_growth": self.past_growth, "near_past_factor": self.near_past_factor,
                "past_tol": self.past_tol}

    @classmethod
    def from_dict(cls, d):
        w = dict(d["weights"])
        if "explicit_weights" in w and w["explicit_weights"] is not None:
            w["explicit_weights"] = tuple(w["explicit_weights"])
        inn = dict(d["innovation"])
        kind = inn.pop("kind")
        wt = dict(d["waiting"])
        return cls(weights=WeightScheme(**w), innovation=Innovation(kind, **inn),
                   waiting=WaitingTimeLaw(**wt), theorem=d["theorem"], c=d["c"],
                   t_grid=tuple(d.get("t_grid", (1.0,))), burn_in=d.get("burn_in"),
                   past_growth=d.get("past_growth", 1.05),
                   near_past_factor=d.get("near_past_factor", 2.0),
                   past_tol=d.get("past_tol", 1e-3))


def _reject(code, message, **details):
    raise ConfigurationError(message, code=code, **details)


def check_hypotheses(cfg: CtrwConfig) -> dict:
    """Raise ConfigurationError unless cfg satisfies its theorem; report what held."""
    th, ws, inn = cfg.theorem, cfg.weights, cfg.innovation
    alpha = inn.alpha
    if th not in THEOREMS:
        _reject("theorem_id", f"unknown theorem {th!r}", theorem=th)
    if ws.kind != "finite" and ws.alpha != alpha:
        _reject("alpha_mismatch", "weight exponent alpha differs from the innovation index",
                weights_alpha=ws.alpha, innovation_alpha=alpha)
    rep = {"theorem": th}
    if th == "T1":
        if not ws.nonnegative():
            _reject("T1_nonnegative_weights", "T1 needs c_j >= 0")
        w = ws.total()
        if not (math.isfinite(w) and w > 0):
            _reject("T1_weight_sum", "T1 needs 0 < w = sum c_j < inf", w=w)
        lo, hi = ws.rho_interval()
        if alpha < 2 and not lo < min(alpha, 1.0):
            _reject("T1_summability", "no rho in (0, alpha), rho <= 1 with sum c_j^rho < inf",
                    rho_min=lo)
        cond_a = alpha <= 1.0
        cond_b = ws.is_finite
        summable_below_one = lo < 1.0
        cond_c_rest = 1.0 < alpha < 2.0 and summable_below_one
        cond_c = cond_c_rest and ws.monotone()
        rep.update(condition_a=cond_a, condition_b=cond_b, condition_c=cond_c)
        if alpha == 2.0:
            rep["gaussian_reduction"] = True
            if not (cond_b or summable_below_one):
                _reject("T1_conditions", "gaussian T1 needs summable weights")
        elif not (cond_a or cond_b or cond_c):
            if cond_c_rest:
                warnings.warn("weights are not monotone; condition (c) of T1 only partly holds",
                              RuntimeWarning)
                rep["monotonicity_warning"] = True
            else:
                _reject("T1_conditions", "none of the T1 conditions (a), (b), (c) holds",
                        alpha=alpha)
        held = [k for k in ("a", "b", "c") if rep[f"condition_{k}"]]
        rep["conditions_held"] = held
    elif th == "T2":
        if inn.kind != "pareto_symmetric" or not (1.0 < alpha < 2.0):
            _reject("T2_alpha", "T2 needs heavy-tailed innovations with 1 < alpha < 2", alpha=alpha)
        if ws.kind != "power_law":
            _reject("T2_power_law", "T2 needs power-law weights")
        if not (1.0 / alpha < ws.H < 1.0):
            _reject("T2_H_range", "T2 needs 1/alpha < H < 1", H=ws.H, alpha=alpha)
    elif th == "T3":
        if inn.kind != "pareto_symmetric":
            _reject("T3_alpha", "T3 needs heavy-tailed innovations with 0 < alpha < 2")
        if ws.kind != "zero_sum":
            _reject("T3_zero_sum", "T3 needs zero-sum weights (sum c_j = 0)", kind=ws.kind)
        if not (0.0 < ws.H < 1.0 / alpha):
            _reject("T3_H_range", "T3 needs 0 < H < 1/alpha", H=ws.H, alpha=alpha)
    else:
        if inn.kind != "gaussian":
            _reject("T4_gaussian", "T4 needs gaussian innovations", kind=inn.kind)
        if ws.kind == "zero_sum":
            _reject("T4_weights", "T4 is implemented for power-law or finite weights")
        if ws.kind == "finite" and ws.total() == 0:
            _reject("T4_weights", "finite weights with w = 0 have bounded variance")
        if ws.kind == "power_law" and not ws.is_finite and 2 * ws.exponent >= -1:
            _reject("T4_square_summable", "T4 needs sum c_j^2 < inf")
    return rep


def limit_hurst(cfg: CtrwConfig) -> float:
    if cfg.theorem == "T4" and cfg.weights.kind == "finite":
        return 0.5
    return cfg.weights.H


def limit_sampler(cfg: CtrwConfig) -> Callable:
    """sampler(t, n, rng) drawing the theorem's limit marginal at time t."""
    th, inn = cfg.theorem, cfg.innovation
    params = inn.limit_params()
    wt = cfg.waiting
    finite_mean = wt.kind == "finite_mean"
    beta = wt.beta

    def inner(t, n, g):
        if finite_mean:
            return np.full(n, t / wt.mu)
        return sample_inverse_subordinator(beta, t, n, g, method="exact")[:, 0]

    def sampler(t, n, rng):
        g = as_generator(rng)
        E = inner(t, n, g)
        if th == "T1":
            return sample_levy_of_inverse(params, beta, t, n, g, E=E)
        if th in ("T2", "T3"):
            k1 = k1_constant(cfg.weights.c0, inn.alpha, cfg.weights.H)
            return k1 * sample_lfsm_of_inverse(params, cfg.weights.H, beta, t, n, g, E=E)
        return sample_fbm_of_inverse(limit_hurst(cfg), beta, t, n, g, E=E)

    return sampler


# ---------------------------------------------------------------------------
# Scaled CTRW simulation


def _past_edges(u0, u_end, growth):
    edges = [float(u0)]
    while edges[-1] < u_end:
        nxt = max(edges[-1] + 1.0, math.floor(edges[-1] * growth))
        edges.append(min(nxt, float(u_end)))
    return np.array(edges)


def _past_horizon(cfg: CtrwConfig, n_max: int, recent_norm: float) -> float:
    """Lag beyond which the neglected past carries less than past_tol of the alpha-norm."""
    ws = cfg.weights
    if ws.is_finite:
        return float(ws.L)
    alpha = cfg.innovation.alpha
    expo = alpha * ws.exponent + 1.0  # < 0
    coef = (n_max * ws.c0) ** alpha / (-expo)
    budget = cfg.past_tol**alpha * recent_norm
    return max(float(n_max), (budget / coef) ** (1.0 / expo))


def _block_weights(ws, n, a, b, alpha):
    """Signed alpha-mean of g_n(u) = C(n+u) - C(u) over blocks [a, b), shape (len(n), nb)."""
    x, w = _GL3
    mid, half = 0.5 * (a + b - 1), 0.5 * (b - 1 - a)
    acc = np.zeros((n.size, a.size))
    sign = None
    for xi, wi in zip(x, w):
        u = np.rint(mid + half * xi)
        gvals = ws.partial_sums(n[:, None] + u[None, :]) - ws.partial_sums(u)[None, :]
        acc += 0.5 * wi * np.abs(gvals) ** alpha
        if sign is None:
            sign = np.sign(gvals)
    return sign * acc ** (1.0 / alpha)


def _simulate_raw(cfg: CtrwConfig, rows: int, g: np.random.Generator) -> np.ndarray:
    """S(N_{ct}) for ``rows`` replicates at every t in cfg.t_grid, shape (rows, k)."""
    ws, inn = cfg.weights, cfg.innovation
    levels = cfg.c * np.asarray(cfg.t_grid)
    guess = 1.5 * (btilde(levels[-1], cfg.waiting) if cfg.waiting.kind == "pareto"
                   else levels[-1] / cfg.waiting.mu)
    N = _batch_counts(cfg.waiting, levels, rows, g, guess)
    n_max = int(N.max())
    k = levels.size
    r = np.arange(rows)[:, None]

    # recent innovations Z_1..Z_nmax
    Z = inn.sample(rows * n_max, g).reshape(rows, n_max) if n_max else np.zeros((rows, 0))
    cs = np.zeros((rows, n_max + 1))
    np.cumsum(Z, axis=1, out=cs[:, 1:])
    L = ws.L
    S = np.zeros((rows, k))
    lr = n_max if L is None else min(L, n_max)
    if L is not None:
        w = float(ws.partial_sums(L))
        S += w * cs[r, np.maximum(N - L, 0)]
    if lr > 0:
        C = ws.partial_sums(np.arange(lr))
        for j in range(k):
            n = N[:, j]
            m = np.arange(lr)[None, :]
            idx = n[:, None] - 1 - m
            valid = idx >= 0
            vals = np.where(valid, Z[r, np.maximum(idx, 0)], 0.0)
            S[:, j] += vals @ C if L is None or L >= n_max else (vals * C).sum(axis=1)

    if L == 0:
        return S

    # near past Z_0, Z_{-1}, ..., Z_{-(u0-1)}
    recent_norm = float(np.sum(np.abs(ws.partial_sums(np.arange(max(n_max, 1)))) ** inn.alpha))
    u_end = _past_horizon(cfg, max(n_max, 1), recent_norm)
    u0 = int(min(u_end, max(cfg.near_past_factor * n_max, 1000)))
    if u0 > 0:
        Zp = inn.sample(rows * u0, g).reshape(rows, u0)
        u = np.arange(u0)
        Cu = ws.partial_sums(u)
        for j in range(k):
            gw = ws.partial_sums(N[:, j, None] + u[None, :]) - Cu[None, :]
            S[:, j] += np.einsum("ij,ij->i", gw, Zp)
    if u_end > u0:
        edges = _past_edges(u0, u_end, cfg.past_growth)
        a, b = edges[:-1], edges[1:]
        Zb = inn.sample_block_sums(np.broadcast_to(b - a, (rows, a.size)), g)
        for j in range(k):
            nu, inv = np.unique(N[:, j], return_inverse=True)
            Wb = _block_weights(ws, nu.astype(float), a, b, inn.alpha)
            S[:, j] += np.einsum("ij,ij->i", Wb[inv], Zb)
    return S


def simulate_scaled_ctrw(cfg: CtrwConfig, rng: RngLike, m: Optional[int] = None,
                         batch: int = 256) -> PathGrid:
    """norm(c) * S(N_{ct}) on cfg.t_grid; ``m`` replicates give a (m, k) ensemble."""
    g = as_generator(rng)
    total = 1 if m is None else int(m)
    norm = cfg.norm()
    out = np.empty((total, len(cfg.t_grid)))
    for start in range(0, total, batch):
        stop = min(total, start + batch)
        out[start:stop] = norm * _simulate_raw(cfg, stop - start, g)
    values = out[0] if m is None else out
    return PathGrid(np.asarray(cfg.t_grid), values)


def classical_ctrw(cfg: CtrwConfig, rng: RngLike, m: Optional[int] = None,
                   batch: int = 256) -> PathGrid:
    """Uncorrelated CTRW n^(-1/alpha) (Z_1 + ... + Z_N) using the same draw order."""
    g = as_generator(rng)
    total = 1 if m is None else int(m)
    levels = cfg.c * np.asarray(cfg.t_grid)
    guess = 1.5 * (btilde(levels[-1], cfg.waiting) if cfg.waiting.kind == "pareto"
                   else levels[-1] / cfg.waiting.mu)
    norm = cfg.n_scale ** (-1.0 / cfg.innovation.alpha)
    out = np.empty((total, levels.size))
    for start in range(0, total, batch):
        rows = min(total, start + batch) - start
        N = _batch_counts(cfg.waiting, levels, rows, g, guess)
        n_max = int(N.max())
        Z = cfg.innovation.sample(rows * n_max, g).reshape(rows, n_max)
        for i in range(rows):
            partial = np.concatenate([[0.0], np.cumsum(Z[i])])
            out[start + i] = norm * partial[N[i]]
    return PathGrid(np.asarray(cfg.t_grid), out[0] if m is None else out)
