"""Densities and solvers for the fractional diffusion equations.

Densities of stable laws come from Fourier inversion of the characteristic
function (composite Gauss-Legendre in the frequency variable, with an
asymptotic tail series far from the origin). The limit density of A(E_t)
is computed two ways: by the subordination integral over the law of E_t,
and by an implicit finite-difference scheme (L1 in time, shifted
Grunwald-Letnikov in space).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, interpolate, linalg
from scipy.special import gamma, gammaln

from .errors import ConfigurationError, DomainTooSmallError, NumericError, ParameterError
from .stable_rng import HALF_PI, StableParams

# |y| beyond which the asymptotic tail series replaces Fourier inversion
_SERIES_CUTOFF = 25.0
_SERIES_TERMS = 40
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


# ---------------------------------------------------------------------------
# Mittag-Leffler function


def mittag_leffler_fn(beta: float, z):
    """E_beta(z) = sum z^k / Gamma(1 + beta k) for real z <= 0."""
    if not (0.0 < beta <= 1.0):
        raise ParameterError(f"beta={beta} outside (0, 1]", code="beta_range", beta=beta)
    z = np.asarray(z, dtype=float)
    if np.any(z > 0):
        raise ParameterError("mittag_leffler_fn supports z <= 0 only", code="z_nonpositive")
    if beta == 1.0:
        return np.exp(z)
    out = np.empty_like(z)
    flat = out.reshape(-1)
    for i, zi in enumerate(z.reshape(-1)):
        flat[i] = _ml_series(beta, zi) if zi >= -1.0 else _ml_integral(beta, -zi)
    return out if out.ndim else float(out)


def _ml_series(beta, z):
    k = np.arange(0, 200)
    terms = np.exp(k * np.log(abs(z)) - gammaln(1.0 + beta * k)) if z != 0 else (k == 0) * 1.0
    return float(np.sum(terms * np.where(k % 2 == 1, np.sign(z), 1.0)))


def _ml_integral(beta, x):
    # E_beta(-x) = sin(pi beta)/(pi beta) int_0^inf exp(-(u x)^(1/beta)) / (u^2 + 2u cos(pi beta) + 1) du
    c = math.cos(math.pi * beta)

    def f(u):
        return math.exp(-((u * x) ** (1.0 / beta))) / (u * u + 2 * u * c + 1.0)

    # exp term negligible beyond u_hi
    u_hi = 45.0 ** beta / x
    pts = [p for p in (1.0,) if p < u_hi]
    val, err = integrate.quad(f, 0.0, u_hi, points=pts or None, epsabs=1e-14, epsrel=1e-12,
                              limit=400)
    return math.sin(math.pi * beta) / (math.pi * beta) * val


# ---------------------------------------------------------------------------
# Stable densities


def _phase_coeff(alpha, theta):
    return theta * math.tan(HALF_PI * alpha) if alpha != 1.0 else 0.0


def _frequency_nodes(alpha, ymax, smooth=0.0):
    """Gauss-Legendre nodes on [0, kmax] with geometric panels near 0."""
    kmax = 39.0 ** (1.0 / alpha)
    if smooth > 0:
        kmax = min(kmax, math.sqrt(78.0) / smooth)
    h = min(0.5, 2.0 * math.pi / max(ymax, 1.0))
    geo = h * 2.0 ** -np.arange(60, -1, -1, dtype=float)
    uni = np.arange(h, kmax + h, h)[1:]
    edges = np.concatenate([[0.0], geo, uni])
    lo, hi = edges[:-1], edges[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    k = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return k, w


def _std_density_fourier(y, alpha, theta, smooth=0.0):
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        return y.copy()
    k, w = _frequency_nodes(alpha, float(np.max(np.abs(y))), smooth)
    amp = np.exp(-(k**alpha) - 0.5 * (smooth * k) ** 2) * w
    if alpha == 1.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            ph = -theta * (2.0 / math.pi) * k * np.log(k)
    else:
        ph = _phase_coeff(alpha, theta) * k**alpha
    out = np.empty(y.shape)
    for s in range(0, y.size, 256):
        ys = y.ravel()[s:s + 256]
        out.ravel()[s:s + 256] = np.cos(np.outer(ys, k) - ph) @ amp / math.pi
    return out


def _tail_series(y, alpha, theta, cdf=False):
    """Asymptotic expansion of the standardized density (or tail mass) for large |y|."""
    b = 1.0 - 1j * _phase_coeff(alpha, theta)
    n = np.arange(1, _SERIES_TERMS + 1)
    logc = gammaln(n * alpha + 1.0) - gammaln(n + 1.0)
    if cdf:
        logc = logc - np.log(n * alpha)
    coef = np.exp(logc) * (-b) ** n
    ay = np.abs(y)[..., None]
    sgn = np.where(np.asarray(y)[..., None] > 0, -1.0, 1.0)
    expo = n * alpha + (0.0 if cdf else 1.0)
    rot = np.exp(sgn * 1j * HALF_PI * (n * alpha + 1.0))
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        terms = coef * rot * ay ** (-expo)
        terms = np.where(np.isfinite(terms), terms, 0.0)
    # truncate at the smallest term (optimal truncation of an asymptotic series)
    mag = np.abs(terms)
    idx = np.argmin(mag, axis=-1)
    mask = n[None, :] <= (idx[..., None] + 1) if mag.ndim > 1 else n <= idx + 1
    return np.real(np.sum(terms * mask, axis=-1)) / math.pi


def standardized_stable_density(y, alpha: float, theta: float = 0.0):
    """Density of the law with characteristic function exp(-|k|^alpha (1 - i theta sgn(k) tan(pi alpha/2)))."""
    y = np.asarray(y, dtype=float)
    out = np.empty(y.shape)
    far = np.abs(y) > _SERIES_CUTOFF
    if alpha == 2.0:
        out[far] = 0.0
    elif alpha == 1.0:
        far = np.zeros_like(far)
    else:
        out[far] = _tail_series(y[far], alpha, theta)
    out[~far] = _std_density_fourier(y[~far], alpha, theta)
    return out


def _std_cdf_fourier(y, alpha, theta):
    k, w = _frequency_nodes(alpha, float(np.max(np.abs(y))) if y.size else 1.0)
    amp = np.exp(-(k**alpha)) * w / k
    if alpha == 1.0:
        ph = -theta * (2.0 / math.pi) * k * np.log(k)
    else:
        ph = _phase_coeff(alpha, theta) * k**alpha
    out = np.empty(y.shape)
    for s in range(0, y.size, 256):
        ys = y.ravel()[s:s + 256]
        out.ravel()[s:s + 256] = 0.5 + np.sin(np.outer(ys, k) - ph) @ amp / math.pi
    return out


def standardized_stable_cdf(y, alpha: float, theta: float = 0.0):
    y = np.asarray(y, dtype=float)
    out = np.empty(y.shape)
    far = np.abs(y) > _SERIES_CUTOFF
    if alpha in (1.0, 2.0):
        far = np.zeros_like(far)
    tail = _tail_series(y[far], alpha, theta, cdf=True)
    out[far] = np.where(y[far] > 0, 1.0 - tail, tail)
    out[~far] = _std_cdf_fourier(y[~far], alpha, theta)
    return out


def _affine(params: StableParams, t):
    """(scale, shift) with A(t) = scale * X_std + shift."""
    if params.alpha == 1.0:
        s = params.a * t
        return s, (2.0 / math.pi) * params.theta * s * np.log(s)
    return params.s1_scale(t), 0.0


def stable_density(params: StableParams, x, t=1.0, mollifier=0.0):
    """Density of A(t) at ``x`` by numerical Fourier inversion.

    With ``mollifier`` > 0 returns the density of A(t) + N(0, mollifier^2).
    """
    if not t > 0:
        raise ParameterError("t must be positive", code="t_positive")
    s, m = _affine(params, t)
    x = np.asarray(x, dtype=float)
    if mollifier > 0:
        val = _std_density_fourier((x - m) / s, params.alpha, params.theta, mollifier / s) / s
    else:
        val = standardized_stable_density((x - m) / s, params.alpha, params.theta) / s
    if not np.all(np.isfinite(val)):
        raise NumericError("non-finite stable density", code="quadrature_failure",
                           alpha=params.alpha, t=t)
    return val


def stable_cdf(params: StableParams, x, t=1.0):
    s, m = _affine(params, t)
    x = np.asarray(x, dtype=float)
    return np.clip(standardized_stable_cdf((x - m) / s, params.alpha, params.theta), 0.0, 1.0)


# ---------------------------------------------------------------------------
# Subordinator and inverse subordinator densities


def positive_stable_density(beta: float, x):
    """Density g_beta of D(1) with E exp(-sD(1)) = exp(-s^beta).

    Zolotarev's integral near the mode, the convergent tail series far out.
    """
    if not (0.0 < beta < 1.0):
        raise ParameterError(f"beta={beta} outside (0,1)", code="beta_range", beta=beta)
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    sigma = math.cos(HALF_PI * beta) ** (1.0 / beta)
    far = x / sigma > _SERIES_CUTOFF
    out[far] = _tail_series(x[far] / sigma, beta, 1.0) / sigma
    r = 1.0 / (1.0 - beta)
    flat = out.reshape(-1)
    near = ((x > 0) & ~far).reshape(-1)
    for i, xi in zip(np.flatnonzero(near), x.reshape(-1)[near]):
        flat[i] = _zolotarev(beta, r, float(xi))
    return out if out.ndim else float(out)


def _zolotarev(beta, r, x):
    z = x ** (-beta * r)
    sb, s1b = math.sin, math.sin

    def a_of(phi):
        return (sb(beta * phi) / sb(phi)) ** r * s1b((1.0 - beta) * phi) / sb(beta * phi)

    a0 = (1.0 - beta) * beta ** (beta * r)
    if a0 * z > 745.0:
        return 0.0

    def f(phi):
        a = a_of(phi)
        return a * math.exp(-a * z)

    val, _ = integrate.quad(f, 0.0, math.pi, epsabs=0.0, epsrel=1e-12, limit=500)
    return beta * r / math.pi * x ** (-r) * val


@lru_cache(maxsize=16)
def _log_positive_density_spline(beta):
    """Cubic spline of log g_beta in log x; used inside the subordination integral."""
    r = 1.0 / (1.0 - beta)
    a0 = (1.0 - beta) * beta ** (beta * r)
    # below x_lo the density is below exp(-700)
    x_lo = (a0 / 700.0) ** (1.0 / (beta * r))
    lx = np.linspace(math.log(x_lo), math.log(1e8), 4001)
    g = positive_stable_density(beta, np.exp(lx))
    return interpolate.CubicSpline(lx, np.log(g)), lx[0], lx[-1]


def _fast_positive_density(beta, x):
    spl, lo, hi = _log_positive_density_spline(beta)
    x = np.asarray(x, dtype=float)
    lx = np.log(np.where(x > 0, x, 1.0))
    out = np.where((x > 0) & (lx >= lo), np.exp(spl(np.clip(lx, lo, hi))), 0.0)
    big = lx > hi
    if np.any(big):
        out[big] = positive_stable_density(beta, x[big])
    return out


def inverse_subordinator_density(beta: float, u, t=1.0, fast=False):
    """Density of E_t at ``u``: (t/beta) u^(-1-1/beta) g_beta(t u^(-1/beta)).

    ``fast`` evaluates g_beta from a cached spline (relative error ~1e-9).
    """
    if not t > 0:
        raise ParameterError("t must be positive", code="t_positive")
    u = np.asarray(u, dtype=float)
    out = np.zeros(u.shape)
    pos = u > 0
    up = u[pos]
    g = _fast_positive_density if fast else positive_stable_density
    out[pos] = (t / beta) * up ** (-1.0 - 1.0 / beta) * g(beta, t * up ** (-1.0 / beta))
    return out


def subordinated_density(outer: StableParams, beta: float, x, t=1.0, mollifier=0.0,
                         epsabs=1e-10):
    """h(x, t) = int_0^inf p_outer(x, u) f_{E_t}(u) du by adaptive quadrature (vector in x).

    ``mollifier`` > 0 gives the solution started from N(0, mollifier^2) instead of delta_0,
    i.e. h convolved with that Gaussian.
    """
    if not t > 0:
        raise ParameterError("t must be positive", code="t_positive")
    if outer.alpha == 1.0:
        raise ParameterError("subordinated_density needs alpha != 1", code="alpha_one")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    tb = t**beta
    v_lo, v_hi = math.log(1e-12 * tb), math.log(80.0 * tb)

    def integrand(v):
        u = math.exp(v)
        fe = float(inverse_subordinator_density(beta, u, t, fast=True))
        if fe == 0.0:
            return np.zeros_like(x)
        return stable_density(outer, x, u, mollifier) * fe * u

    val, err = integrate.quad_vec(integrand, v_lo, v_hi, epsabs=epsabs, epsrel=1e-8,
                                  norm="max", limit=2000)
    if not np.all(np.isfinite(val)):
        raise NumericError("subordination integral failed", code="quadrature_failure")
    return val


def fourier_subordinated_density(outer: StableParams, beta: float, x, t=1.0):
    """Symmetric-case density of A(E_t) from its Fourier transform E_beta(-t^beta c |k|^alpha).

    Independent of ``subordinated_density``; used as a cross-check.
    """
    if outer.p != outer.q:
        raise ParameterError("Fourier-Mittag-Leffler route needs p = q", code="symmetric_only")
    c = outer.a * abs(math.cos(HALF_PI * outer.alpha))
    x = np.atleast_1d(np.asarray(x, dtype=float))

    def ft(k):
        return float(mittag_leffler_fn(beta, -(t**beta) * c * k**outer.alpha))

    out = np.empty(x.shape)
    for i, xi in enumerate(x):
        if xi == 0:
            raise ParameterError("x = 0 not supported by the oscillatory route", code="x_nonzero")
        val, _ = integrate.quad(ft, 0.0, np.inf, weight="cos", wvar=abs(xi), limlst=200)
        out[i] = val / math.pi
    return out


# ---------------------------------------------------------------------------
# Finite differences


@dataclass
class DensitySurface:
    x_grid: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray  # shape (len(t_grid), len(x_grid))

    def __post_init__(self):
        self.x_grid = np.asarray(self.x_grid, dtype=float)
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.t_grid.size, self.x_grid.size):
            raise ParameterError("values must have shape (len(t_grid), len(x_grid))",
                                 code="surface_shape")

    @property
    def dx(self):
        return float(self.x_grid[1] - self.x_grid[0])

    def mass(self):
        return self.values.sum(axis=1) * self.dx

    def at(self, t):
        i = int(np.argmin(np.abs(self.t_grid - t)))
        return self.values[i]

    def to_csv(self, path, stride=1):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "t", "h"])
            for i in range(0, self.t_grid.size, stride):
                for xj, hj in zip(self.x_grid, self.values[i]):
                    w.writerow([repr(float(xj)), repr(float(self.t_grid[i])), repr(float(hj))])


@dataclass
class FracDiffusionProblem:
    """d_t^beta h = a p d_x^alpha h + a q d_{-x}^alpha h, h(x, 0) = delta_0, on [-x_max, x_max]."""

    beta: float
    stable: StableParams
    x_max: float = 20.0
    t_final: float = 1.0
    boundary_tol: float = 1e-4
    boundary_fraction: float = 0.01

    def __post_init__(self):
        if not (0.0 < self.beta <= 1.0):
            raise ParameterError(f"beta={self.beta} outside (0,1]", code="beta_range")
        if not (self.x_max > 0 and self.t_final > 0):
            raise ParameterError("x_max and t_final must be positive", code="domain_positive")


def grunwald_weights(alpha: float, n: int) -> np.ndarray:
    g = np.empty(n)
    g[0] = 1.0
    for k in range(1, n):
        g[k] = g[k - 1] * (k - 1 - alpha) / k
    return g


def shifted_gl_matrix(alpha: float, n: int, dx: float, p: float, q: float) -> np.ndarray:
    """p * (left-sided) + q * (right-sided) shifted Grunwald-Letnikov operator on n nodes."""
    g = grunwald_weights(alpha, n + 1)
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    kl = i - j + 1  # left: f(x_{i-k+1}), k = i - j + 1
    kr = j - i + 1  # right: f(x_{i+k-1}), k = j - i + 1
    left = np.where(kl >= 0, g[np.clip(kl, 0, n)], 0.0)
    right = np.where(kr >= 0, g[np.clip(kr, 0, n)], 0.0)
    return (p * left + q * right) / dx**alpha


def l1_weights(beta: float, n: int) -> np.ndarray:
    k = np.arange(n, dtype=float)
    return (k + 1.0) ** (1.0 - beta) - k ** (1.0 - beta)


def solve_gl_l1(problem: FracDiffusionProblem, n_x: int = 512, n_t: int = 512) -> DensitySurface:
    """Implicit L1 / shifted Grunwald-Letnikov solution with mollified point-mass start.

    The implicit scheme is unconditionally stable for 1 < alpha <= 2; alpha <= 1
    is rejected because the shifted operator loses its M-matrix structure there.
    """
    alpha, beta = problem.stable.alpha, problem.beta
    if not (1.0 < alpha <= 2.0):
        raise ConfigurationError(f"finite-difference path needs 1 < alpha <= 2, got {alpha}",
                                 code="stability_alpha", alpha=alpha)
    if n_x < 16 or n_t < 1:
        raise ConfigurationError("grid too small", code="stability_grid", n_x=n_x, n_t=n_t)
    x = np.linspace(-problem.x_max, problem.x_max, n_x)
    dx = x[1] - x[0]
    dt = problem.t_final / n_t
    st = problem.stable
    A = st.a * shifted_gl_matrix(alpha, n_x, dx, st.p, st.q)

    h0 = np.exp(-0.5 * (x / (2.0 * dx)) ** 2)
    h0 /= h0.sum() * dx

    mu = gamma(2.0 - beta) * dt**beta
    lu = linalg.lu_factor(np.eye(n_x) - mu * A)
    b = l1_weights(beta, n_t)
    values = np.empty((n_t + 1, n_x))
    values[0] = h0
    diffs = np.empty((n_t, n_x))  # diffs[m] = h^{m+1} - h^m
    for n in range(1, n_t + 1):
        rhs = values[n - 1].copy()
        if n > 1:
            # sum_{k=1}^{n-1} b_k (h^{n-k} - h^{n-k-1}) = b[1:n] . diffs[n-2::-1]
            rhs -= b[1:n] @ diffs[n - 2::-1]
        values[n] = linalg.lu_solve(lu, rhs)
        diffs[n - 1] = values[n] - values[n - 1]

    t = np.arange(n_t + 1) * dt
    surf = DensitySurface(x, t, values)
    edge = max(1, int(round(problem.boundary_fraction * n_x)))
    bmass = (values[-1, :edge].sum() + values[-1, -edge:].sum()) * dx
    if bmass > problem.boundary_tol:
        raise DomainTooSmallError(f"boundary mass {bmass:.3g} exceeds {problem.boundary_tol}",
                                  boundary_mass=bmass, x_max=problem.x_max)
    return surf


def solve_time_scaled(outer: StableParams, H: float, t: float, x_grid) -> np.ndarray:
    """Density of the H-self-similar process with stable marginals: p_outer(x, t^(alpha H))."""
    if not (0.0 < H < 1.0):
        raise ParameterError(f"H={H} outside (0,1)", code="H_range")
    if not t > 0:
        raise ParameterError("t must be positive", code="t_positive")
    return stable_density(outer, x_grid, t ** (outer.alpha * H))
