"""Random variate generation for stable, Pareto, Gaussian and waiting-time laws.

Stable laws are parametrized by ``StableParams(alpha, p, q, a)``. The
characteristic function of ``A(t)`` is taken to be

    E exp(ikA(t)) = exp(-t a |cos(pi alpha/2)| |k|^alpha (1 - i theta sgn(k) tan(pi alpha/2)))

with skewness ``theta = p - q`` (alpha != 1). This is the S1 parametrization
with scale ``(t a |cos(pi alpha/2)|)^(1/alpha)`` and it coincides with the
operator ``a p d^alpha/dx^alpha + a q d^alpha/d(-x)^alpha`` for 1 < alpha <= 2,
so at alpha = 2 the law is N(0, 2 a t). At alpha = 1 the scale is ``t a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import gamma

from .errors import ParameterError

HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class StableParams:
    alpha: float
    p: float = 0.5
    q: float = 0.5
    a: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise ParameterError(f"alpha={self.alpha} outside (0, 2]", code="alpha_range",
                                 alpha=self.alpha)
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.q <= 1.0):
            raise ParameterError("p and q must lie in [0, 1]", code="weights_range",
                                 p=self.p, q=self.q)
        if abs(self.p + self.q - 1.0) > 1e-12:
            raise ParameterError(f"p + q = {self.p + self.q} != 1", code="p_plus_q",
                                 p=self.p, q=self.q)
        if not self.a > 0:
            raise ParameterError(f"scale a={self.a} must be positive", code="scale_positive",
                                 a=self.a)

    @property
    def theta(self) -> float:
        return self.p - self.q

    def s1_scale(self, t=1.0):
        """S1 scale parameter of A(t); array-valued if ``t`` is."""
        t = np.asarray(t, dtype=float)
        if self.alpha == 1.0:
            return self.a * t
        return (t * self.a * abs(math.cos(HALF_PI * self.alpha))) ** (1.0 / self.alpha)

    def log_cf(self, k, t=1.0):
        """log E exp(ik A(t)) on an array of frequencies."""
        k = np.asarray(k, dtype=float)
        ak = np.abs(k)
        if self.alpha == 1.0:
            with np.errstate(divide="ignore", invalid="ignore"):
                lg = np.where(ak > 0, np.log(np.where(ak > 0, ak, 1.0)), 0.0)
            return -t * self.a * ak * (1 + 1j * self.theta * (2 / math.pi) * np.sign(k) * lg)
        c = self.a * abs(math.cos(HALF_PI * self.alpha))
        if self.alpha == 2.0:
            return -t * c * ak**2 + 0j
        tan = math.tan(HALF_PI * self.alpha)
        return -t * c * ak**self.alpha * (1 - 1j * self.theta * np.sign(k) * tan)

    def to_dict(self):
        return {"alpha": self.alpha, "p": self.p, "q": self.q, "a": self.a}


@dataclass(frozen=True)
class WaitingTimeLaw:
    """Waiting-time law: ``pareto`` (tail index beta in (0,1)) or ``finite_mean``.

    For ``finite_mean`` the ``law`` is ``"deterministic"`` or ``"exponential"``.
    """

    kind: str
    beta: Optional[float] = None
    mu: Optional[float] = None
    law: str = "exponential"

    def __post_init__(self):
        if self.kind == "pareto":
            if self.beta is None or not (0.0 < self.beta < 1.0):
                raise ParameterError(f"pareto waiting times need beta in (0,1), got {self.beta}",
                                     code="beta_range", beta=self.beta)
        elif self.kind == "finite_mean":
            if self.mu is None or not (0.0 < self.mu < math.inf):
                raise ParameterError(f"finite_mean waiting times need 0 < mu < inf, got {self.mu}",
                                     code="mu_positive", mu=self.mu)
            if self.law not in ("deterministic", "exponential"):
                raise ParameterError(f"unknown finite-mean law {self.law!r}", code="law_id",
                                     law=self.law)
        else:
            raise ParameterError(f"unknown waiting-time kind {self.kind!r}", code="waiting_kind",
                                 kind=self.kind)

    @classmethod
    def pareto(cls, beta):
        return cls("pareto", beta=beta)

    @classmethod
    def finite_mean(cls, mu=1.0, law="exponential"):
        return cls("finite_mean", mu=mu, law=law)

    def to_dict(self):
        if self.kind == "pareto":
            return {"kind": "pareto", "beta": self.beta}
        return {"kind": "finite_mean", "mu": self.mu, "law": self.law}


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(master_seed, stream_id)``."""

    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))


RngLike = Union[RngStream, np.random.Generator, int, None]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


def _uniform_open(rng, size):
    # (0, 1]; never exactly zero
    return 1.0 - rng.random(size)


def _cms_standard(alpha, beta, size, rng):
    """Chambers-Mallows-Stuck draws from S1(alpha, beta, scale 1, location 0)."""
    v = math.pi * (_uniform_open(rng, size) - 0.5)
    w = rng.standard_exponential(size)
    if alpha == 1.0:
        bv = HALF_PI + beta * v
        return (bv * np.tan(v) - beta * np.log(HALF_PI * w * np.cos(v) / bv)) / HALF_PI
    zeta = -beta * math.tan(HALF_PI * alpha)
    xi = math.atan(-zeta) / alpha
    s = (1.0 + zeta * zeta) ** (0.5 / alpha)
    av = alpha * (v + xi)
    return (s * np.sin(av) / np.cos(v) ** (1.0 / alpha)
            * (np.cos(v - av) / w) ** ((1.0 - alpha) / alpha))


def sample_stable(params: StableParams, t, n: int, rng: RngLike) -> np.ndarray:
    """Draw ``n`` IID copies of A(t); ``t`` may be an array of per-draw times."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr > 0)):
        raise ParameterError("stable time parameter must be positive", code="t_positive")
    if n < 1:
        raise ParameterError(f"n={n} must be at least 1", code="n_positive")
    g = as_generator(rng)
    sigma = params.s1_scale(t_arr)
    if params.alpha == 2.0:
        return math.sqrt(2.0) * sigma * g.standard_normal(n)
    x = _cms_standard(params.alpha, params.theta, n, g)
    if params.alpha == 1.0:
        return sigma * x + (2 / math.pi) * params.theta * sigma * np.log(sigma)
    return sigma * x


def sample_subordinator_increment(beta: float, dt, n: int, rng: RngLike) -> np.ndarray:
    """Positive beta-stable draws with E exp(-sX) = exp(-dt s^beta)."""
    if not (0.0 < beta < 1.0):
        raise ParameterError(f"subordinator index beta={beta} outside (0,1)", code="beta_range",
                             beta=beta)
    dt = np.asarray(dt, dtype=float)
    if np.any(~(dt > 0)):
        raise ParameterError("subordinator increment length must be positive", code="dt_positive")
    g = as_generator(rng)
    sigma = (dt * math.cos(HALF_PI * beta)) ** (1.0 / beta)
    x = sigma * _cms_standard(beta, 1.0, n, g)
    return np.maximum(x, np.finfo(float).tiny)


def sample_pareto(tail_index: float, n: int, rng: RngLike, symmetric: bool = False) -> np.ndarray:
    """P(|X| > x) = x^-tail_index on [1, inf); random sign if ``symmetric``."""
    if not tail_index > 0:
        raise ParameterError(f"tail index {tail_index} must be positive", code="tail_positive",
                             tail_index=tail_index)
    g = as_generator(rng)
    x = _uniform_open(g, n) ** (-1.0 / tail_index)
    if symmetric:
        x = np.where(g.random(n) < 0.5, -x, x)
    return x


def pareto_innovation_scale(alpha: float) -> float:
    """Factor making n^(-1/alpha) * (sum of scaled symmetric Pareto) -> StableParams(alpha)."""
    if alpha == 1.0:
        return 2.0 / math.pi
    return (abs(1.0 - alpha) / gamma(2.0 - alpha)) ** (1.0 / alpha)


def waiting_time_scale(beta: float) -> float:
    """Factor making n^(-1/beta) T_n -> D with E exp(-sD) = exp(-s^beta)."""
    return gamma(1.0 - beta) ** (-1.0 / beta)


def sample_waiting_times(law: WaitingTimeLaw, n: int, rng: RngLike) -> np.ndarray:
    g = as_generator(rng)
    if law.kind == "pareto":
        return waiting_time_scale(law.beta) * _uniform_open(g, n) ** (-1.0 / law.beta)
    if law.law == "deterministic":
        return np.full(n, float(law.mu))
    return law.mu * g.standard_exponential(n)
