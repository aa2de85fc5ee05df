"""Sampling of inhomogeneous random graphs and Monte Carlo checks.

Edges are drawn from a counter-based generator: the uniform for pair
``(i, j)`` is a hash of ``(seed, i, j)``, so a graph does not depend on the
order in which pairs are filled and can be generated in parallel.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import expit, logit
from scipy.stats import norm as _normal

from .graphon import BlockGraphon, ReferenceGraphon, as_reference, block_average
from .spectral import laplacian_spectrum, matrix_spectra
from .upward import psi_hat, solve_tilt_rows

__all__ = [
    "GraphSample",
    "TailEstimate",
    "DegreeStats",
    "edge_uniforms",
    "sample_graph",
    "finite_reference",
    "degree_stats",
    "weyl_check",
    "tail_prob_direct",
    "tail_prob_tilted",
    "hoeffding_check",
    "fkg_check",
    "norm_convergence_check",
    "adjacency_min_eig_scaling",
    "wilson_interval",
    "EVENTS",
]

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_ROW = np.uint64(0xD6E8FEB86659FD93)

Z95 = float(_normal.ppf(0.975))


def _splitmix(z: np.ndarray) -> np.ndarray:
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _u64(x) -> np.ndarray:
    return np.asarray(np.asarray(x, dtype=object) % (1 << 64), dtype=np.uint64) if np.ndim(x) == 0 \
        else np.asarray(x, dtype=np.uint64)


def derive_seed(seed: int, index: int) -> int:
    """Deterministic 64-bit seed for sub-stream ``index`` of ``seed``."""
    with np.errstate(over="ignore"):
        z = _splitmix(_splitmix(_u64(seed)) ^ _splitmix(_u64(index) * _ROW))
    return int(z)


def edge_uniforms(seed: int, i, j) -> np.ndarray:
    """Uniforms in [0, 1) keyed by ``(seed, i, j)``."""
    with np.errstate(over="ignore"):
        z = _splitmix(_u64(seed))
        z = _splitmix(z ^ (np.asarray(i, dtype=np.uint64) * _ROW))
        z = _splitmix(z ^ np.asarray(j, dtype=np.uint64))
    return (z >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


@dataclass(frozen=True, eq=False)
class GraphSample:
    n: int
    adjacency: np.ndarray
    seed: int
    reference: BlockGraphon


def finite_reference(r, n: int) -> BlockGraphon:
    """``r_N``: the given block graphon refined to ``n`` blocks, or the ``n``-block average."""
    if isinstance(r, BlockGraphon):
        if r.n_blocks == n:
            return r
        if n % r.n_blocks == 0:
            return r.refine(n // r.n_blocks)
        raise ValueError(f"cannot map a {r.n_blocks}-block graphon onto {n} vertices")
    return block_average(r, n)


def sample_graph(r_n, n: int, seed: int) -> GraphSample:
    """Inhomogeneous random graph: edge ``{i, j}`` present with probability ``(r_N)_ij``."""
    if n < 1:
        raise ValueError("vertex count must be positive")
    ref = finite_reference(r_n, n)
    iu, ju = np.triu_indices(n, k=1)
    u = edge_uniforms(seed, iu, ju)
    a = np.zeros((n, n), dtype=np.uint8)
    hit = u < ref.values[iu, ju]
    a[iu[hit], ju[hit]] = 1
    a[ju[hit], iu[hit]] = 1
    a.setflags(write=False)
    return GraphSample(n, a, int(seed), ref)


class DegreeStats(NamedTuple):
    degrees: np.ndarray
    max_degree: float
    index_of: Callable[[float], int]


def vertex_index(x: float, n: int) -> int:
    """0-based vertex ``ceil(x n) - 1`` (vertex 1 for ``x = 0``)."""
    return int(min(max(math.ceil(x * n) - 1, 0), n - 1))


def degree_stats(sample: GraphSample) -> DegreeStats:
    n = sample.n
    deg = sample.adjacency.sum(axis=1).astype(float) / n
    return DegreeStats(deg, float(deg.max()), lambda x: vertex_index(x, n))


def weyl_check(sample: GraphSample | np.ndarray):
    """``(lambda_max(D), lambda_max(L), lambda_max(D) - lambda_min(A), ok)``."""
    a = sample.adjacency if isinstance(sample, GraphSample) else np.asarray(sample)
    lmax_d, lmax_l, lmin_a = matrix_spectra(a)
    rhs = lmax_d - lmin_a
    ok = bool(lmax_d <= lmax_l + 1e-10 and lmax_l <= rhs + 1e-10)
    return lmax_d, lmax_l, rhs, ok


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailEstimate:
    log_prob: float
    rate_estimate: float
    ci_low: float
    ci_high: float
    n_samples: int
    method: str
    ess: float | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "log_prob": self.log_prob, "rate_estimate": self.rate_estimate,
            "ci_low": self.ci_low, "ci_high": self.ci_high, "n_samples": self.n_samples,
            "method": self.method, "ess": self.ess, "details": self.details,
        }


def wilson_interval(hits: int, n: int, z: float = Z95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need at least one sample")
    p = hits / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    # at 0 or n hits the exact endpoint is p itself; rounding must not move it
    return min(max(centre - half, 0.0), p), max(min(centre + half, 1.0), p)


def _log(x):
    return math.log(x) if x > 0 else -math.inf


def _workers():
    env = os.environ.get("GRAPHON_LDP_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _map(fn, items):
    items = list(items)
    nw = _workers()
    if nw > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


EVENTS = ("max_deg_ge", "lap_norm_le", "lap_norm_ge")
_DOWNWARD = {"lap_norm_le"}


def _event_indicator(event: str, beta: float, n: int):
    thr = beta * n
    if event == "max_deg_ge":
        k = math.ceil(thr - 1e-9)
        return lambda a: bool(a.sum(axis=1).max() >= k) if n > 0 else k <= 0
    if event in ("lap_norm_le", "lap_norm_ge"):
        def lap(a):
            deg = a.sum(axis=1).astype(float)
            return float(np.linalg.eigvalsh(np.diag(deg) - a)[-1])
        if event == "lap_norm_le":
            return lambda a: lap(a) <= thr + 1e-9 * max(n, 1)
        return lambda a: lap(a) >= thr - 1e-9 * max(n, 1)
    raise ValueError(f"unknown event {event!r}; expected one of {EVENTS}")


def _ensure_samples(n_samples):
    if int(n_samples) < 1:
        raise ValueError("n_samples must be at least 1")
    return int(n_samples)


def tail_prob_direct(r_n, n: int, event: str, beta: float, n_samples: int, seed: int) -> TailEstimate:
    """Plain Monte Carlo frequency of ``event`` with a Wilson 95% interval.

    ``rate_estimate`` is ``-log_prob / N`` for upward events and
    ``-log_prob / binom(N, 2)`` for ``lap_norm_le``.
    """
    n_samples = _ensure_samples(n_samples)
    ref = finite_reference(r_n, n)
    ind = _event_indicator(event, beta, n)

    def one(k):
        return ind(sample_graph(ref, n, derive_seed(seed, k)).adjacency.astype(float))

    hits = int(sum(_map(one, range(n_samples))))
    lo, hi = wilson_interval(hits, n_samples)
    p = hits / n_samples
    rate = n * (n - 1) / 2 if event in _DOWNWARD else n
    lp = _log(p)
    return TailEstimate(
        log_prob=lp, rate_estimate=(-lp / rate) if rate > 0 else math.nan,
        ci_low=_log(lo), ci_high=_log(hi), n_samples=n_samples, method="direct",
        details={"hits": hits, "event": event, "beta": beta, "n": n},
    )


def tail_prob_tilted(r, n: int, beta: float, n_samples: int, seed: int,
                     chunk: int = 10000) -> TailEstimate:
    """Importance-sampling estimate of ``P(d_{i*} >= beta N)``.

    ``i*`` is the vertex at ``x* = argmin_x J_r(x, beta)``.  Its ``N - 1``
    edges are drawn from the tilted probabilities ``sigmoid(theta +
    logit p_j)``, with ``theta`` chosen so their sum is ``beta N``, and
    weighted by ``exp(-theta d + sum_j log(1 - p_j + p_j e^theta))``.  The
    event depends on that row only, so the rest of the graph is not drawn.

    ``log_prob`` is the single-vertex estimate.  ``details`` holds the
    bracket ``[P_1, N P_1]`` for the maximum degree, the
    positive-correlation bound ``1 - (1 - P_1)^N`` and its rate.
    """
    n_samples = _ensure_samples(n_samples)
    if n < 2:
        raise ValueError("need at least two vertices")
    ref = as_reference(r)
    ref.require_interior("tilted sampling")
    _, x_star = psi_hat(ref, beta)
    i_star = vertex_index(x_star, n)
    rn = finite_reference(r if isinstance(r, BlockGraphon) else ref, n)
    p = np.delete(rn.values[i_star], i_star)
    target = beta * n / (n - 1)
    if not 0.0 < target < 1.0:
        raise ValueError("beta N must lie strictly between 0 and N - 1")
    theta = float(solve_tilt_rows(logit(p)[None, :], np.ones_like(p), target)[0][0])
    q = expit(theta + logit(p))
    log_mgf = float(np.sum(np.log1p(p * np.expm1(theta))))
    k = math.ceil(beta * n - 1e-9)

    gen = np.random.Generator(np.random.Philox(seed))
    sum_w = 0.0
    sum_w2 = 0.0
    hits = 0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        d = (gen.random((m, n - 1)) < q[None, :]).sum(axis=1)
        w = np.where(d >= k, np.exp(-theta * d + log_mgf), 0.0)
        sum_w += float(w.sum())
        sum_w2 += float((w * w).sum())
        hits += int((d >= k).sum())
        done += m
    p1 = sum_w / n_samples
    var = max(sum_w2 / n_samples - p1 * p1, 0.0)
    se = math.sqrt(var / n_samples)
    ess = (sum_w * sum_w / sum_w2) if sum_w2 > 0 else 0.0
    lo, hi = max(p1 - Z95 * se, 0.0), p1 + Z95 * se
    lp = _log(p1)
    fkg_upper = -math.expm1(n * math.log1p(-p1)) if p1 < 1 else 1.0
    details = {
        "x_star": x_star, "vertex": i_star, "theta": theta, "threshold": k, "hits": hits,
        "std_error": se, "unreliable": bool(ess < 10),
        "single_vertex": p1,
        "max_degree_bracket": [p1, min(n * p1, 1.0)],
        "max_degree_upper_fkg": fkg_upper,
        "max_degree_rate": -_log(fkg_upper) / n,
        "max_degree_rate_union": -_log(min(n * p1, 1.0)) / n,
    }
    return TailEstimate(lp, -lp / n, _log(lo), _log(hi), n_samples, "tilted", ess, details)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def _sample_degrees(ref: BlockGraphon, n: int, n_samples: int, seed: int) -> np.ndarray:
    def one(k):
        return sample_graph(ref, n, derive_seed(seed, k)).adjacency.sum(axis=1)
    return np.array(_map(one, range(n_samples)))


def hoeffding_check(r_n, n: int, t: float, n_samples: int, seed: int) -> dict:
    """Frequency of ``max_i |d_i / N - E d_i / N| >= t`` against ``2 N exp(-2 N t^2)``.

    Passes if the frequency is at most the bound plus three half-widths of
    its Wilson interval.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    n_samples = _ensure_samples(n_samples)
    ref = finite_reference(r_n, n)
    vals = ref.values
    mean_deg = (vals.sum(axis=1) - np.diag(vals)) / n
    deg = _sample_degrees(ref, n, n_samples, seed) / n
    dev = np.max(np.abs(deg - mean_deg[None, :]), axis=1)
    hits = int(np.sum(dev >= t - 1e-12))
    freq = hits / n_samples
    lo, hi = wilson_interval(hits, n_samples)
    bound = 2.0 * n * math.exp(-2.0 * n * t * t)
    ok = freq <= bound + 3.0 * (hi - lo) / 2.0
    return {"empirical_freq": freq, "bound": bound, "ci": [lo, hi], "hits": hits, "ok": bool(ok)}


def fkg_check(r_n, n: int, beta: float, n_samples: int, seed: int) -> dict:
    """``P(max_i d_i <= beta N)`` against the product of the vertex marginals.

    Both sides come from the same samples.  Passes if
    ``lhs >= rhs - 3 (h_lhs + h_rhs)`` with Wilson and delta-method
    half-widths.
    """
    n_samples = _ensure_samples(n_samples)
    ref = finite_reference(r_n, n)
    deg = _sample_degrees(ref, n, n_samples, seed)
    k = math.floor(beta * n + 1e-9)
    below = deg <= k
    lhs_hits = int(np.sum(np.all(below, axis=1)))
    lhs = lhs_hits / n_samples
    lo, hi = wilson_interval(lhs_hits, n_samples)
    h_lhs = (hi - lo) / 2.0
    marg = below.mean(axis=0)
    rhs = float(np.prod(marg))
    if rhs > 0:
        rel = math.sqrt(float(np.sum((1.0 - marg) / (marg * n_samples))))
        h_rhs = Z95 * rhs * rel
    else:
        h_rhs = 0.0
    ok = lhs >= rhs - 3.0 * (h_lhs + h_rhs)
    return {"lhs": lhs, "rhs": rhs, "lhs_halfwidth": h_lhs, "rhs_halfwidth": h_rhs, "ok": bool(ok)}


def _norm_target(r) -> float:
    if isinstance(r, BlockGraphon):
        return laplacian_spectrum(r).laplacian_norm
    ref = as_reference(r)
    from .upward import c_r

    c, _ = c_r(ref)
    lam = laplacian_spectrum(block_average(ref, 256)).reduced_eigs[-1]
    return float(max(c, lam))


def norm_convergence_check(r, n_grid, samples_per_n: int, seed: int) -> dict:
    """Mean ``| ||L_N|| / N - ||L_r|| |`` for each ``N`` and a trend check.

    The trend passes when each mean is at most the previous one plus two
    combined confidence half-widths.
    """
    samples_per_n = _ensure_samples(samples_per_n)
    target = _norm_target(r)
    rows = []
    for n in n_grid:
        n = int(n)
        ref = finite_reference(r, n)

        def one(k, n=n, ref=ref):
            a = sample_graph(ref, n, derive_seed(seed, n * 1_000_003 + k)).adjacency.astype(float)
            return abs(matrix_spectra(a)[1] / n - target)

        dev = np.array(_map(one, range(samples_per_n)))
        sd = float(dev.std(ddof=1)) if len(dev) > 1 else 0.0
        rows.append({"n": n, "mean_deviation": float(dev.mean()),
                     "halfwidth": Z95 * sd / math.sqrt(len(dev)), "target": target})
    trend = all(b["mean_deviation"] <= a["mean_deviation"] + 2.0 * (a["halfwidth"] + b["halfwidth"])
                for a, b in zip(rows, rows[1:]))
    return {"rows": rows, "trend_ok": bool(trend), "target": target}


def adjacency_min_eig_scaling(r, n_grid, samples_per_n: int, seed: int) -> list[dict]:
    """Mean ``|lambda_min(A_N)| / N`` over samples for each ``N``."""
    samples_per_n = _ensure_samples(samples_per_n)
    rows = []
    for n in n_grid:
        n = int(n)
        ref = finite_reference(r, n)

        def one(k, n=n, ref=ref):
            a = sample_graph(ref, n, derive_seed(seed, n * 1_000_003 + k)).adjacency.astype(float)
            return abs(matrix_spectra(a)[2]) / n

        vals = np.array(_map(one, range(samples_per_n)))
        rows.append({"n": n, "mean_abs_lambda_min": float(vals.mean()),
                     "std": float(vals.std(ddof=1)) if len(vals) > 1 else 0.0})
    return rows
