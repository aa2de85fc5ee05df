"""Upward rate: degree cumulant generating function, Cramer tilt, per-vertex
rate ``J_r(x, beta)`` and its infimum over ``x``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit, logit

from .graphon import (
    GridReference,
    ReferenceGraphon,
    as_reference,
    block_average,
    degree_function,
    row_integral,
)
from .spectral import laplacian_spectrum

__all__ = [
    "TiltedRow",
    "RatePoint",
    "RateCurve",
    "log_mgf",
    "solve_tilt_rows",
    "solve_tilt",
    "degree_rate",
    "degree_rate_profile",
    "tilt_derivatives",
    "degree_variance",
    "psi_hat",
    "c_r",
    "c_r1",
    "curvature",
    "psi_hat_curve",
    "sup_over_x",
]

TILT_TOL = 1e-12
DUAL_ROUTE_TOL = 1e-9
BISECT_WIDTH = 1e-3
DEFAULT_X_GRID = 257
SUP_GRID = 1025
GAP_PROXY_BLOCKS = 256


def _log1p_tilt(theta, r):
    """``log(1 - r + r e^theta)`` without overflow or cancellation."""
    theta = np.asarray(theta, dtype=float)
    pos = theta > 0
    t_neg = np.where(pos, 0.0, theta)
    t_pos = np.where(pos, theta, 0.0)
    return np.where(
        pos,
        t_pos + np.log1p((1.0 - r) * np.expm1(-t_pos)),
        np.log1p(np.expm1(t_neg) * r),
    )


def solve_tilt_rows(logit_r: np.ndarray, weights: np.ndarray, beta, tol: float = TILT_TOL,
                    max_iter: int = 200):
    """Solve ``sum_j w_j sigmoid(theta + logit_r[k, j]) = beta_k * sum_j w_j`` per row ``k``.

    The left side is strictly increasing in ``theta``.  Evaluating it at the
    smallest and largest logit in the row gives a guaranteed bracket;
    bisection narrows it to ``BISECT_WIDTH`` and a safeguarded Newton step on
    the same bracket finishes.  Returns ``(theta, iterations)``.
    """
    logit_r = np.atleast_2d(np.asarray(logit_r, dtype=float))
    w = np.asarray(weights, dtype=float) / np.sum(weights)
    k = logit_r.shape[0]
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (k,)).copy()
    if np.any((beta <= 0) | (beta >= 1)):
        raise ValueError("tilt target must lie strictly between 0 and 1")
    lb = logit(beta)
    lo = lb - logit_r.max(axis=1)
    hi = lb - logit_r.min(axis=1)

    def resid(theta):
        return expit(theta[:, None] + logit_r) @ w - beta

    def slope(theta):
        s = expit(theta[:, None] + logit_r)
        return (s * (1.0 - s)) @ w

    iters = np.zeros(k, dtype=int)
    while True:
        wide = (hi - lo) > BISECT_WIDTH
        if not np.any(wide):
            break
        mid = 0.5 * (lo + hi)
        f = resid(mid)
        lo = np.where(wide & (f < 0), mid, lo)
        hi = np.where(wide & (f >= 0), mid, hi)
        iters += wide

    theta = 0.5 * (lo + hi)
    done = np.zeros(k, dtype=bool)
    for _ in range(max_iter):
        f = resid(theta)
        done = np.abs(f) <= tol
        if np.all(done):
            break
        lo = np.where(f < 0, np.maximum(lo, theta), lo)
        hi = np.where(f > 0, np.minimum(hi, theta), hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = theta - f / slope(theta)
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        step = np.where(bad, 0.5 * (lo + hi), step)
        theta = np.where(done, theta, step)
        iters += ~done
        if np.all(done | (hi - lo <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(theta)))):
            f = resid(theta)
            done = np.abs(f) <= tol
            break
    if not np.all(done):
        worst = float(np.max(np.abs(resid(theta))))
        if worst > 1e3 * tol:
            raise RuntimeError(f"tilt solver residual {worst:.3e} above tolerance")
    return theta, iters


def _row_logits(r: ReferenceGraphon, x):
    nodes, w = r.row_rule()
    vals = r(np.atleast_1d(np.asarray(x, dtype=float))[:, None], nodes[None, :])
    return logit(vals), vals, w


@dataclass(frozen=True, eq=False)
class TiltedRow:
    """Cramer transform ``y -> sigmoid(theta + logit r(x, y))`` of one row."""

    reference: ReferenceGraphon
    x: float
    beta: float
    theta: float
    iterations: int = 0

    def row(self, y):
        r = self.reference(np.full(np.shape(y), self.x), np.asarray(y, dtype=float))
        return expit(self.theta + logit(r))

    def __call__(self, y):
        return self.row(y)

    @property
    def degree(self) -> float:
        return float(row_integral(self.reference, [self.x], lambda v: expit(self.theta + logit(v)))[0])


def _require(r):
    r = as_reference(r)
    r.require_interior("upward rate computations")
    return r


def _check_beta(beta):
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie strictly between 0 and 1")


def log_mgf(r, x, theta) -> float:
    """``Lambda_r(x, theta) = int log(1 - r(x, y) + r(x, y) e^theta) dy``."""
    r = _require(r)
    val = row_integral(r, [x], lambda v: _log1p_tilt(theta, v))
    return float(val[0])


def _thetas(r, xs, beta):
    lr, _, w = _row_logits(r, xs)
    theta, iters = solve_tilt_rows(lr, w, beta)
    return theta, iters, lr, w


def solve_tilt(r, x: float, beta: float) -> TiltedRow:
    r = _require(r)
    _check_beta(beta)
    theta, iters, _, _ = _thetas(r, [x], beta)
    return TiltedRow(r, float(x), float(beta), float(theta[0]), int(iters[0]))


def _rates(lr, w, theta, beta, check=True):
    # Legendre route: theta * beta - Lambda(theta)
    rv = expit(lr)
    legendre = theta * beta - _log1p_tilt(theta[:, None], rv) @ w
    if check:
        t = theta[:, None] + lr
        rhat = expit(t)
        log_ratio = np.logaddexp(0.0, -lr) - np.logaddexp(0.0, -t)
        log_ratio_c = np.logaddexp(0.0, lr) - np.logaddexp(0.0, t)
        entropy = (rhat * log_ratio + (1.0 - rhat) * log_ratio_c) @ w
        gap = float(np.max(np.abs(legendre - entropy)))
        if gap > DUAL_ROUTE_TOL:
            raise RuntimeError(f"Legendre and entropy routes for J disagree by {gap:.3e}")
    return np.maximum(legendre, 0.0)


def degree_rate_profile(r, xs, beta, check: bool = True):
    """``(J_r(x, beta), theta(x, beta), iterations)`` for an array of ``x``."""
    r = _require(r)
    _check_beta(beta)
    theta, iters, lr, w = _thetas(r, xs, beta)
    return _rates(lr, w, theta, beta, check), theta, iters


def degree_rate(r, x: float, beta: float) -> float:
    """Per-vertex rate ``J_r(x, beta) = theta beta - Lambda_r(x, theta)``.

    Also evaluated as ``int R(rhat | r) dy``; the two must agree to 1e-9.
    """
    j, _, _ = degree_rate_profile(r, [x], beta)
    return float(j[0])


def tilt_derivatives(r, x: float, beta: float, k: int = 1) -> float:
    """``theta`` (derivative of J, ``k=1``) or ``d theta / d beta`` (``k=2``)."""
    r = _require(r)
    _check_beta(beta)
    theta, _, lr, w = _thetas(r, [x], beta)
    if k == 1:
        return float(theta[0])
    if k == 2:
        s = expit(theta[:, None] + lr)
        return float(1.0 / ((s * (1.0 - s)) @ w)[0])
    raise ValueError("k must be 1 or 2")


def degree_variance(r, x) -> float | np.ndarray:
    """``v_r(x) = int r(x, y)(1 - r(x, y)) dy``."""
    r = as_reference(r)
    out = row_integral(r, np.atleast_1d(x), lambda v: v * (1.0 - v))
    return float(out[0]) if np.ndim(x) == 0 else out


def sup_over_x(fun, n_grid: int = SUP_GRID, maximise: bool = True, breaks=(), xtol: float = 1e-12):
    """Global extremum of a vectorised ``fun`` on [0, 1].

    Scans ``n_grid`` points (plus ``breaks``), then refines with bounded
    Brent search between the neighbours of the best point.  Ties go to the
    smallest ``x``; the refined point replaces the grid point only if it is
    strictly better.  Returns ``(value, x)``.
    """
    sign = -1.0 if maximise else 1.0
    xs = np.unique(np.concatenate([np.linspace(0.0, 1.0, n_grid), np.asarray(breaks, float)]))
    vals = sign * np.asarray(fun(xs), dtype=float)
    i = int(np.argmin(vals))  # first occurrence -> smallest x
    best_x, best_v = float(xs[i]), float(vals[i])
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
    if b > a:
        res = minimize_scalar(lambda t: sign * float(np.asarray(fun(np.array([t])))[0]),
                              bounds=(a, b), method="bounded", options={"xatol": xtol})
        if res.success and res.fun < best_v:
            best_x, best_v = float(res.x), float(res.fun)
    return sign * best_v, best_x


def c_r(r):
    """``(C_r, gap_ok)``: sup of the degree function and an advisory gap check.

    ``gap_ok`` reports whether the largest eigenvalue of the reduced
    Laplacian matrix of the 256-block average of ``r`` is at most
    ``||d_r||_inf`` (up to 1e-9).  It is a finite-dimensional proxy for the
    operator statement and not a proof.
    """
    r = as_reference(r)
    if isinstance(r, GridReference):
        c = float(r.graphon.degrees.max())
    else:
        c, _ = sup_over_x(lambda xs: row_integral(r, xs), breaks=r.breakpoints)
    summary = laplacian_spectrum(block_average(r, GAP_PROXY_BLOCKS))
    gap_ok = bool(summary.reduced_eigs[-1] <= c + 1e-9)
    return c, gap_ok


def argmax_degree(r):
    r = as_reference(r)
    if isinstance(r, GridReference):
        d = r.graphon.degrees
        i = int(np.argmax(d))
        return float(d[i]), (i + 0.5) / r.n_blocks
    return sup_over_x(lambda xs: row_integral(r, xs), breaks=r.breakpoints)


def c_r1(r) -> float:
    """``C_r^1 = inf_x int -log r(x, y) dy``, the upward rate at ``beta = 1``."""
    r = as_reference(r)
    if r.lower_bound <= 0.0:
        raise ValueError("C_r^1 needs a reference bounded away from 0")
    val, _ = sup_over_x(lambda xs: row_integral(r, xs, lambda v: -np.log(v)),
                        maximise=False, breaks=r.breakpoints)
    return float(val)


def curvature(r, n_grid: int = 4097, tol: float = 1e-9):
    """``(K_hat, description)`` with ``K_hat = inf over argmax d_r of 1/(2 v_r)``.

    The argmax set is taken as the grid points with ``d_r >= C_r - tol``,
    plus the refined maximiser itself.
    """
    r = as_reference(r)
    if not r.continuous:
        raise ValueError("curvature constant requires a continuous reference graphon")
    c, x_star = argmax_degree(r)
    xs = np.linspace(0.0, 1.0, n_grid)
    d = row_integral(r, xs)
    pts = np.unique(np.concatenate([xs[d >= c - tol], [x_star]]))
    v = degree_variance(r, pts)
    k_hat = float(np.min(1.0 / (2.0 * v)))
    desc = {"points": int(len(pts)), "intervals": _intervals(xs, d >= c - tol, x_star),
            "v_min": float(np.min(v)), "v_max": float(np.max(v))}
    return k_hat, desc


def _intervals(xs, mask, extra=None):
    out = []
    i = 0
    n = len(xs)
    while i < n:
        if mask[i]:
            j = i
            while j + 1 < n and mask[j + 1]:
                j += 1
            out.append([float(xs[i]), float(xs[j])])
            i = j + 1
        else:
            i += 1
    if not out and extra is not None:
        out.append([float(extra), float(extra)])
    return out


def psi_hat(r, beta: float, n_grid: int = DEFAULT_X_GRID, full: bool = False):
    """Upward rate ``inf_x J_r(x, beta)`` for ``beta`` in ``[C_r, 1]``.

    Returns ``(value, argmin_x)``; with ``full=True`` a dict that also holds
    the multiplier and solver iteration count at the minimiser.
    """
    r = _require(r)
    c, _ = argmax_degree(r)
    if beta < c - 1e-12:
        raise ValueError(f"upward rate is defined for beta >= C_r = {c!r}")
    if beta >= 1.0:
        if beta > 1.0:
            raise ValueError("beta must not exceed 1")
        val, xb = sup_over_x(lambda xs: row_integral(r, xs, lambda v: -np.log(v)),
                             maximise=False, breaks=r.breakpoints)
        out = {"value": val, "argmin_x": xb, "theta": np.inf, "iters": 0}
        return out if full else (val, xb)
    beta = max(beta, c) if beta < c else beta

    def j_of(xs):
        return degree_rate_profile(r, xs, beta, check=False)[0]

    val, xb = sup_over_x(j_of, n_grid=n_grid, maximise=False, breaks=(), xtol=1e-10)
    j, theta, iters = degree_rate_profile(r, [xb], beta, check=True)
    out = {"value": float(j[0]), "argmin_x": xb, "theta": float(theta[0]), "iters": int(iters[0])}
    return out if full else (out["value"], xb)


@dataclass(frozen=True)
class RatePoint:
    beta: float
    value: float
    argmin_x: float
    theta: float
    iters: int
    scaling_ratio: float | None = None


@dataclass(frozen=True)
class RateCurve:
    points: list
    constants: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["beta,psi_hat,argmin_x,theta,iters"]
        for p in self.points:
            lines.append(f"{p.beta!r},{p.value!r},{p.argmin_x!r},{p.theta!r},{p.iters}")
        return "\n".join(lines) + "\n"

    @property
    def betas(self):
        return np.array([p.beta for p in self.points])

    @property
    def values(self):
        return np.array([p.value for p in self.points])


SCALING_WINDOW = 0.05


def psi_hat_curve(r, beta_grid, n_grid: int = DEFAULT_X_GRID) -> RateCurve:
    """Upward rate on a grid of ``beta`` with constants and scaling ratios.

    For ``0 < beta - C_r <= 0.05`` each point also carries
    ``psi_hat(beta) / (beta - C_r)^2``, which tends to ``K_hat`` as
    ``beta`` decreases to ``C_r``.
    """
    r = _require(r)
    c, gap_ok = c_r(r)
    constants = {"C_r": c, "C_r1": c_r1(r), "gap_ok": gap_ok}
    if r.continuous:
        constants["K_hat"] = curvature(r)[0]
    pts = []
    for b in beta_grid:
        b = float(b)
        res = psi_hat(r, b, n_grid=n_grid, full=True)
        ratio = None
        if 0.0 < b - c <= SCALING_WINDOW:
            ratio = res["value"] / (b - c) ** 2
        pts.append(RatePoint(b, res["value"], res["argmin_x"], res["theta"], res["iters"], ratio))
    return RateCurve(pts, constants)
