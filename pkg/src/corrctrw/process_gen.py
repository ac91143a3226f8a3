"""Sample paths of the limit processes on uniform grids.

Every generator returns a :class:`PathGrid`. Ensembles are stored as a 2-D
``values`` array with one replicate per row.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, ParameterError, RangeError
from .stable_rng import (
    RngLike,
    StableParams,
    as_generator,
    sample_stable,
    sample_subordinator_increment,
)


@dataclass
class PathGrid:
    times: np.ndarray
    values: np.ndarray  # shape (n,) or (m, n)
    continuous: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.times.size == 0:
            raise ParameterError("times must be a nonempty 1-D sequence", code="path_times")
        if self.values.shape[-1] != self.times.size:
            raise ParameterError("values and times lengths differ", code="path_length",
                                 n_times=int(self.times.size), n_values=int(self.values.shape[-1]))
        if self.times[0] < 0 or np.any(np.diff(self.times) <= 0):
            raise ParameterError("times must be non-negative and strictly increasing",
                                 code="path_times")

    @property
    def n_paths(self) -> int:
        return 1 if self.values.ndim == 1 else self.values.shape[0]

    def rows(self) -> np.ndarray:
        return np.atleast_2d(self.values)

    def at(self, t) -> np.ndarray:
        """Values at the grid time nearest to ``t`` (one per replicate)."""
        i = int(np.argmin(np.abs(self.times - t)))
        return self.rows()[:, i]

    def to_csv(self, path):
        """Columns ``t, value`` for a single path; ``t, value_0, value_1, ...`` for ensembles."""
        rows = self.rows()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if rows.shape[0] == 1:
                w.writerow(["t", "value"])
            else:
                w.writerow(["t"] + [f"value_{i}" for i in range(rows.shape[0])])
            for j, t in enumerate(self.times):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in rows[:, j]])


def _uniform_times(T, n):
    if not T > 0:
        raise ParameterError(f"horizon T={T} must be positive", code="T_positive")
    if int(n) != n or n < 1:
        raise ParameterError(f"n={n} must be a positive integer", code="n_positive")
    return np.linspace(0.0, T, int(n) + 1)


def _with_origin(incr):
    out = np.zeros(incr.shape[:-1] + (incr.shape[-1] + 1,))
    np.cumsum(incr, axis=-1, out=out[..., 1:])
    return out


def _squeeze(values, m):
    return values[0] if m is None else values


# ---------------------------------------------------------------------------
# Levy motion and the subordinator


def gen_stable_levy(params: StableParams, T: float, n: int, rng: RngLike,
                    m: Optional[int] = None) -> PathGrid:
    """Cumulative sums of IID A(T/n) increments, starting at 0."""
    times = _uniform_times(T, n)
    k = 1 if m is None else int(m)
    incr = sample_stable(params, T / n, k * n, rng).reshape(k, n)
    return PathGrid(times, _squeeze(_with_origin(incr), m), continuous=params.alpha == 2.0)


def gen_subordinator(beta: float, X: float, n: int, rng: RngLike,
                     m: Optional[int] = None) -> PathGrid:
    times = _uniform_times(X, n)
    k = 1 if m is None else int(m)
    incr = sample_subordinator_increment(beta, X / n, k * n, rng).reshape(k, n)
    return PathGrid(times, _squeeze(_with_origin(incr), m))


def invert_subordinator(D_path: PathGrid, t_grid) -> PathGrid:
    """E(t) = smallest grid x with D(x) > t, row by row."""
    t_grid = np.asarray(t_grid, dtype=float)
    rows = D_path.rows()
    if np.any(np.diff(rows, axis=1) < 0):
        raise ParameterError("subordinator path must be nondecreasing", code="path_monotone")
    if np.any(t_grid < 0):
        raise RangeError("t_grid must be non-negative", code="t_range")
    tmax = float(t_grid.max())
    short = rows[:, -1] <= tmax
    if np.any(short):
        raise RangeError(f"t={tmax} beyond subordinator range; extend the D path",
                         code="subordinator_range", n_short=int(short.sum()))
    out = np.empty((rows.shape[0], t_grid.size))
    for i, r in enumerate(rows):
        out[i] = D_path.times[np.searchsorted(r, t_grid, side="right")]
    return PathGrid(t_grid, out[0] if D_path.values.ndim == 1 else out, continuous=True)


def sample_inverse_subordinator(beta: float, t_points, m: int, rng: RngLike,
                                dx: Optional[float] = None, method: str = "grid",
                                batch: int = 8192, chunk: int = 256) -> np.ndarray:
    """Draws of (E_{t_1}, ..., E_{t_k}) with shape (m, k).

    ``method="grid"`` simulates D on the mesh ``dx`` until every requested level is
    passed and records first-passage grid points, so rows are jointly distributed
    like the inverse of one subordinator path (bias below one mesh width).
    ``method="exact"`` uses E_t = (t / D(1))^beta, exact for each single time
    but only valid for k = 1.
    """
    t_points = np.atleast_1d(np.asarray(t_points, dtype=float))
    if np.any(t_points <= 0):
        raise ParameterError("inverse subordinator times must be positive", code="t_positive")
    if int(m) != m or m < 1:
        raise ParameterError(f"m={m} must be a positive integer", code="m_positive")
    g = as_generator(rng)
    if method == "exact":
        if t_points.size != 1:
            raise ParameterError("exact method gives single-time marginals only",
                                 code="exact_single_time")
        d1 = sample_subordinator_increment(beta, 1.0, int(m), g)
        return ((t_points[0] / d1) ** beta)[:, None]
    if method != "grid":
        raise ParameterError(f"unknown method {method!r}", code="method_id")
    order = np.argsort(t_points)
    ts = t_points[order]
    if dx is None:
        dx = 2e-3 * ts[-1] ** beta
    out = np.empty((int(m), ts.size))
    for start in range(0, int(m), batch):
        stop = min(int(m), start + batch)
        out[start:stop] = _first_passage(beta, ts, stop - start, g, dx, chunk)
    res = np.empty_like(out)
    res[:, order] = out
    return res


def _first_passage(beta, ts, m, g, dx, chunk):
    E = np.full((m, ts.size), np.nan)
    level = np.zeros(m)
    active = np.arange(m)
    steps = 0
    while active.size:
        inc = sample_subordinator_increment(beta, dx, active.size * chunk, g)
        path = level[active, None] + np.cumsum(inc.reshape(active.size, chunk), axis=1)
        for j, t in enumerate(ts):
            rows = np.isnan(E[active, j]) & (path[:, -1] > t)
            if np.any(rows):
                idx = np.argmax(path[rows] > t, axis=1)
                E[active[rows], j] = (steps + idx + 1) * dx
        level[active] = path[:, -1]
        steps += chunk
        active = active[np.isnan(E[active, -1])]
    return E


# ---------------------------------------------------------------------------
# Fractional Brownian motion


def fgn_autocovariance(H: float, n: int, dt: float = 1.0) -> np.ndarray:
    k = np.arange(n, dtype=float)
    return 0.5 * dt ** (2 * H) * (np.abs(k + 1) ** (2 * H) - 2 * k ** (2 * H)
                                  + np.abs(k - 1) ** (2 * H))


def fbm_covariance(H: float, s, t):
    s, t = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
    return 0.5 * (np.abs(t) ** (2 * H) + np.abs(s) ** (2 * H) - np.abs(t - s) ** (2 * H))


def circulant_eigenvalues(H: float, n: int, dt: float = 1.0) -> np.ndarray:
    r = fgn_autocovariance(H, n + 1, dt)
    row = np.concatenate([r, r[-2:0:-1]])
    return np.fft.fft(row).real


def embedded_increment_covariance(H: float, n: int, dt: float = 1.0) -> np.ndarray:
    """Covariance of the increments actually produced by the circulant generator."""
    lam = np.maximum(circulant_eigenvalues(H, n, dt), 0.0)
    N = lam.size
    F = np.fft.fft(np.eye(N))
    C = (F * (lam / N)) @ F.conj().T
    return C.real[:n, :n]


def gen_fbm(H: float, T: float, n: int, rng: RngLike, m: Optional[int] = None) -> PathGrid:
    """Exact FBM on k T/n, k = 0..n, by circulant embedding (Cholesky fallback)."""
    if not (0.0 < H < 1.0):
        raise ParameterError(f"H={H} outside (0,1)", code="H_range")
    times = _uniform_times(T, n)
    g = as_generator(rng)
    k = 1 if m is None else int(m)
    dt = T / n
    lam = circulant_eigenvalues(H, n, dt)
    if lam.min() < -1e-10 * lam.max():
        incr = _fgn_cholesky(H, n, dt, k, g)
    else:
        lam = np.maximum(lam, 0.0)
        N = lam.size
        pairs = (k + 1) // 2
        w = g.standard_normal((pairs, N)) + 1j * g.standard_normal((pairs, N))
        z = np.fft.fft(np.sqrt(lam / N) * w, axis=1)[:, :n]
        incr = np.concatenate([z.real, z.imag])[:k]
    return PathGrid(times, _squeeze(_with_origin(incr), m), continuous=True)


def _fgn_cholesky(H, n, dt, k, g):
    r = fgn_autocovariance(H, n, dt)
    idx = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    L = np.linalg.cholesky(r[idx])
    return g.standard_normal((k, n)) @ L.T


def sample_fbm_at(H: float, times, rng: RngLike) -> np.ndarray:
    """Exact W_H evaluated at per-row times (shape (m, k)), rows independent."""
    times = np.atleast_2d(np.asarray(times, dtype=float))
    g = as_generator(rng)
    cov = fbm_covariance(H, times[:, :, None], times[:, None, :])
    lam, vec = np.linalg.eigh(cov)  # tolerates coincident times
    z = g.standard_normal(times.shape) * np.sqrt(np.maximum(lam, 0.0))
    return np.einsum("mij,mj->mi", vec, z)


# ---------------------------------------------------------------------------
# Linear fractional stable motion


def lfsm_kernel(t, s, alpha: float, H: float):
    """(t - s)_+^(H - 1/alpha) - (-s)_+^(H - 1/alpha)."""
    gam = H - 1.0 / alpha
    t, s = np.asarray(t, dtype=float), np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(t - s > 0, np.abs(t - s) ** gam, 0.0)
        b = np.where(-s > 0, np.abs(s) ** gam, 0.0)
    return a - b


def _past_alpha_integrals(alpha, H):
    """int_0^inf of the positive and negative parts of |(1+u)^g - u^g|^alpha."""
    gam = H - 1.0 / alpha

    def f(u):
        return abs((1.0 + u) ** gam - u**gam) ** alpha

    head = integrate.quad(f, 0.0, 1.0, limit=200)[0]
    tail = integrate.quad(f, 1.0, np.inf, limit=200)[0]
    return head + tail


def lfsm_norm(alpha: float, H: float) -> tuple:
    """(I_plus, I_minus): alpha-th power integrals of the kernel at t = 1 split by sign."""
    gam = H - 1.0 / alpha
    recent = 1.0 / (alpha * gam + 1.0)
    past = _past_alpha_integrals(alpha, H) if gam != 0 else 0.0
    if gam > 0:
        return recent + past, 0.0
    return recent, past


def lfsm_marginal_params(params: StableParams, H: float) -> StableParams:
    """Parameters P such that L(t) has the law of A_P(t^(alpha H))."""
    alpha = params.alpha
    if abs(H * alpha - 1.0) < 1e-14:
        return params
    if alpha == 1.0 and params.theta != 0:
        raise ConfigurationError("skewed LFSM with alpha = 1 is not supported", code="lfsm_alpha1")
    ip, im = lfsm_norm(alpha, H)
    total = ip + im
    theta = params.theta * (ip - im) / total
    return StableParams(alpha, 0.5 * (1 + theta), 0.5 * (1 - theta), params.a * total)


def lfsm_marginal(params: StableParams, H: float, t, n: int, rng: RngLike) -> np.ndarray:
    """Exact draws of L(t); ``t`` may be an array of per-draw times."""
    t = np.asarray(t, dtype=float)
    return sample_stable(lfsm_marginal_params(params, H), t ** (params.alpha * H), n, rng)


def lfsm_required_truncation(alpha: float, H: float, T: float, tol: float = 1e-3) -> float:
    """Smallest M whose neglected far-past kernel mass meets the budget at horizon T.

    For s < -M the kernel is bounded by |gamma| T (-s)^(gamma - 1) (gamma = H - 1/alpha),
    so the alpha-norm of the neglected part is at most
    (|gamma| T)^alpha M^(alpha(gamma-1)+1) / (alpha(1-gamma) - 1), solved here for M.
    """
    gam = H - 1.0 / alpha
    if gam == 0:
        return 0.0
    ip, im = lfsm_norm(alpha, H)
    budget = (tol * T**H) ** alpha * (ip + im)
    expo = alpha * (1.0 - gam) - 1.0
    coef = (abs(gam) * T) ** alpha / expo
    return max(T, (coef / budget) ** (1.0 / expo))


@dataclass
class LfsmConfig:
    alpha: float
    H: float
    T: float = 1.0
    n_steps: int = 100
    M: Optional[float] = None  # None selects the smallest admissible truncation
    delta: Optional[float] = None  # None means T / (10 n_steps)
    tol: float = 1e-3
    growth: float = 1.05  # ratio of consecutive far-past cells

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0):
            raise ParameterError(f"LFSM needs alpha in (0,2), got {self.alpha}", code="alpha_range")
        if not (0.0 < self.H < 1.0):
            raise ParameterError(f"H={self.H} outside (0,1)", code="H_range")
        if self.H - 1.0 / self.alpha <= -1.0:
            raise ConfigurationError("kernel not locally integrable (H - 1/alpha <= -1)",
                                     code="lfsm_kernel")
        if not (self.T > 0 and self.n_steps >= 1 and self.growth > 1):
            raise ParameterError("T, n_steps and growth must be positive", code="lfsm_grid")
        step = self.T / self.n_steps
        if self.delta is None:
            self.delta = step / 10
        ratio = step / self.delta
        if self.delta <= 0 or abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigurationError("delta must divide T / n_steps", code="lfsm_mesh",
                                     delta=self.delta, step=step)
        need = lfsm_required_truncation(self.alpha, self.H, self.T, self.tol)
        if self.M is None:
            self.M = need
        elif self.M < need:
            raise ConfigurationError(
                f"past truncation M={self.M:.4g} violates the tail budget (need {need:.4g})",
                code="lfsm_tail_budget", M=self.M, required=need)

    def to_dict(self):
        return {"alpha": self.alpha, "H": self.H, "T": self.T, "n_steps": self.n_steps,
                "M": self.M, "delta": self.delta, "tol": self.tol, "growth": self.growth}


def _lfsm_cells(cfg: LfsmConfig):
    """Cell edges: uniform mesh on [-T, T], geometric cells from -T back to -M."""
    n_fine = int(round(cfg.T / cfg.delta))
    fine = np.linspace(-cfg.T, cfg.T, 2 * n_fine + 1)
    far = [-cfg.T]
    while far[-1] > -cfg.M:
        far.append(far[-1] * cfg.growth)
    far[-1] = min(far[-1], -cfg.M)
    return np.concatenate([np.array(far[::-1]), fine[1:]])


def lfsm_cell_weights(cfg: LfsmConfig, times, edges) -> np.ndarray:
    """Average of the kernel over each cell, shape (len(times), n_cells)."""
    gam = cfg.H - 1.0 / cfg.alpha
    e1 = gam + 1.0
    a, b = edges[:-1], edges[1:]
    width = b - a
    t = np.asarray(times, dtype=float)[:, None]

    def d(u):  # (u + t)^(g+1) - u^(g+1), u >= 0, without cancellation
        u = np.broadcast_to(u, np.broadcast_shapes(u.shape, t.shape))
        with np.errstate(divide="ignore", invalid="ignore"):
            val = u**e1 * np.expm1(e1 * np.log1p(t / u))
        return np.where(u > 0, val, t**e1)

    past = (d(-a) - d(np.maximum(-b, 0.0))) / (e1 * width)
    bp, ap = np.minimum(b, t), np.minimum(a, t)
    recent = ((t - ap) ** e1 - (t - bp) ** e1) / (e1 * width)
    return np.where(b <= 0, past, np.where(a >= 0, recent, 0.0))


def gen_lfsm(cfg: LfsmConfig, params: StableParams, rng: RngLike,
             m: Optional[int] = None) -> PathGrid:
    """LFSM on k T/n by a cell-averaged Riemann sum of the moving-average integral."""
    if params.alpha != cfg.alpha:
        raise ParameterError("params.alpha and cfg.alpha differ", code="alpha_mismatch")
    times = _uniform_times(cfg.T, cfg.n_steps)
    if abs(cfg.H * cfg.alpha - 1.0) < 1e-14:
        return gen_stable_levy(params, cfg.T, cfg.n_steps, rng, m)
    edges = _lfsm_cells(cfg)
    W = lfsm_cell_weights(cfg, times, edges)
    k = 1 if m is None else int(m)
    g = as_generator(rng)
    widths = np.diff(edges)
    dA = sample_stable(params, np.tile(widths, k), k * widths.size, g).reshape(k, widths.size)
    values = dA @ W.T
    values[:, 0] = 0.0
    return PathGrid(times, _squeeze(values, m), continuous=cfg.H > 1.0 / cfg.alpha)


# ---------------------------------------------------------------------------
# Composition


def compose(outer: PathGrid, inner: PathGrid, continuous: Optional[bool] = None) -> PathGrid:
    """outer(inner(t)): previous-point lookup for jump paths, linear for continuous ones."""
    lin = outer.continuous if continuous is None else continuous
    orows, irows = outer.rows(), inner.rows()
    if orows.shape[0] != irows.shape[0] and orows.shape[0] != 1:
        raise ParameterError("outer and inner ensembles differ in size", code="ensemble_size")
    lo, hi = outer.times[0], outer.times[-1]
    if np.any(irows < lo) or np.any(irows > hi):
        raise RangeError(f"inner values leave the outer time range [{lo}, {hi}]",
                         code="compose_range", lo=float(lo), hi=float(hi),
                         inner_max=float(irows.max()), inner_min=float(irows.min()))
    idx = np.searchsorted(outer.times, irows, side="right") - 1
    if orows.shape[0] == 1:
        orows = np.broadcast_to(orows, (irows.shape[0], orows.shape[1]))
    r = np.arange(irows.shape[0])[:, None]
    if not lin:
        out = orows[r, idx]
    else:
        i0 = np.clip(idx, 0, outer.times.size - 2)
        t0, t1 = outer.times[i0], outer.times[i0 + 1]
        w = (irows - t0) / (t1 - t0)
        out = (1.0 - w) * orows[r, i0] + w * orows[r, i0 + 1]
    single = outer.values.ndim == 1 and inner.values.ndim == 1
    return PathGrid(inner.times, out[0] if single else out, continuous=lin and inner.continuous)


# ---------------------------------------------------------------------------
# Marginal samplers of the composed limits


def sample_levy_of_inverse(params: StableParams, beta: float, t: float, n: int, rng: RngLike,
                           E: Optional[np.ndarray] = None) -> np.ndarray:
    """Draws of A(E_t); ``E`` may supply inverse-subordinator draws (else exact)."""
    g = as_generator(rng)
    if E is None:
        E = sample_inverse_subordinator(beta, t, n, g, method="exact")[:, 0]
    return sample_stable(params, np.maximum(E, np.finfo(float).tiny), n, g)


def sample_fbm_of_inverse(H: float, beta: float, t: float, n: int, rng: RngLike,
                          E: Optional[np.ndarray] = None) -> np.ndarray:
    """Draws of W_H(E_t)."""
    g = as_generator(rng)
    if E is None:
        E = sample_inverse_subordinator(beta, t, n, g, method="exact")[:, 0]
    return E**H * g.standard_normal(n)


def sample_lfsm_of_inverse(params: StableParams, H: float, beta: float, t: float, n: int,
                           rng: RngLike, E: Optional[np.ndarray] = None) -> np.ndarray:
    """Draws of L_{alpha,H}(E_t)."""
    g = as_generator(rng)
    if E is None:
        E = sample_inverse_subordinator(beta, t, n, g, method="exact")[:, 0]
    return lfsm_marginal(params, H, np.maximum(E, np.finfo(float).tiny), n, g)
