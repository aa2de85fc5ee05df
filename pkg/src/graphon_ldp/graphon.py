"""Graphon data model: block and analytic kernels, degrees, norms, cut distance
and the integrated Bernoulli relative entropy."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np
from scipy.special import xlogy

from . import _quadrature as quad

__all__ = [
    "BlockGraphon",
    "ReferenceGraphon",
    "ConstantReference",
    "Rank1Reference",
    "GridReference",
    "BilinearReference",
    "DegreeProfile",
    "CutNorm",
    "constant",
    "rank1",
    "grid",
    "bilinear",
    "reference_from_dict",
    "evaluate",
    "degree_function",
    "cut_norm",
    "cut_distance",
    "cut_metric_blocks",
    "cut_metric_search",
    "bernoulli_relative_entropy",
    "rate_I",
    "block_average",
    "block_log_means",
    "lp_distance",
    "common_refinement",
]

EXACT_CUT_MAX_BLOCKS = 20
EXACT_PERMUTATION_MAX_BLOCKS = 8
SYMMETRY_TOL = 1e-12


def _check_unit(*coords):
    for c in coords:
        a = np.asarray(c, dtype=float)
        if np.any(~np.isfinite(a)) or np.any(a < 0.0) or np.any(a > 1.0):
            raise ValueError("graphon coordinates must lie in [0, 1]")


def _block_index(x, n: int):
    # right-open blocks [(i-1)/n, i/n), x = 1 in the last block
    return np.minimum(np.floor(np.asarray(x, dtype=float) * n).astype(int), n - 1)


@dataclass(frozen=True, eq=False)
class BlockGraphon:
    """Symmetric step graphon, constant on an ``n x n`` grid of equal squares."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
            raise ValueError("block graphon values must be a non-empty square matrix")
        if not np.all(np.isfinite(v)):
            raise ValueError("block graphon values must be finite")
        if np.max(np.abs(v - v.T)) > SYMMETRY_TOL:
            raise ValueError("block graphon values must be symmetric")
        if v.min() < -SYMMETRY_TOL or v.max() > 1 + SYMMETRY_TOL:
            raise ValueError("block graphon values must lie in [0, 1]")
        v = np.clip(0.5 * (v + v.T), 0.0, 1.0)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_blocks(self) -> int:
        return self.values.shape[0]

    @classmethod
    def constant(cls, p: float, n: int = 1) -> "BlockGraphon":
        return cls(np.full((n, n), float(p)))

    @classmethod
    def zero(cls, n: int = 1) -> "BlockGraphon":
        return cls(np.zeros((n, n)))

    def __call__(self, x, y):
        n = self.n_blocks
        return self.values[_block_index(x, n), _block_index(y, n)]

    @property
    def degrees(self) -> np.ndarray:
        """Degree function value on each block."""
        return self.values.mean(axis=1)

    def permuted(self, perm) -> "BlockGraphon":
        perm = np.asarray(perm)
        return BlockGraphon(self.values[np.ix_(perm, perm)])

    def refine(self, factor: int) -> "BlockGraphon":
        return BlockGraphon(np.kron(self.values, np.ones((factor, factor))))

    def scaled(self, factor: float) -> "BlockGraphon":
        return BlockGraphon(self.values * factor)

    def to_dict(self) -> dict:
        return {"n": self.n_blocks, "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "BlockGraphon":
        values = np.asarray(data["values"], dtype=float)
        if "n" in data and int(data["n"]) != values.shape[0]:
            raise ValueError("block count 'n' does not match the values matrix")
        return cls(values)

    def __eq__(self, other):
        if not isinstance(other, BlockGraphon):
            return NotImplemented
        return self.values.shape == other.values.shape and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"BlockGraphon(n_blocks={self.n_blocks})"


class ReferenceGraphon:
    """Evaluable symmetric kernel ``r(x, y)`` with declared bounds.

    Subclasses provide vectorised evaluation and the breakpoints across which
    the kernel is not smooth.  Bounds default to the exact range of the kernel
    and may be widened (never narrowed) at construction.
    """

    family: str = ""
    continuous: bool = True

    def __init__(self, lower_bound=None, upper_bound=None):
        lo, hi = self._range()
        if lower_bound is not None:
            if lower_bound > lo + 1e-12:
                raise ValueError(f"declared lower bound {lower_bound} exceeds kernel minimum {lo}")
            lo = float(lower_bound)
        if upper_bound is not None:
            if upper_bound < hi - 1e-12:
                raise ValueError(f"declared upper bound {upper_bound} is below kernel maximum {hi}")
            hi = float(upper_bound)
        if lo < 0.0 or hi > 1.0:
            raise ValueError("reference graphon must take values in [0, 1]")
        self.lower_bound = float(lo)
        self.upper_bound = float(hi)
        self._cache: dict = {}

    # -- subclass interface -------------------------------------------------
    def _eval(self, x, y):
        raise NotImplementedError

    def _range(self) -> tuple[float, float]:
        raise NotImplementedError

    @property
    def breakpoints(self) -> np.ndarray:
        return np.array([0.0, 1.0])

    def _params(self) -> dict:
        return {}

    # -- public -----------------------------------------------------------------
    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self._eval(x, y)

    @property
    def bounded_away(self) -> bool:
        return self.lower_bound > 0.0 and self.upper_bound < 1.0

    def require_interior(self, what: str = "rate computations"):
        if not self.bounded_away:
            raise ValueError(
                f"{what} need a reference bounded away from 0 and 1; "
                f"declared range is [{self.lower_bound}, {self.upper_bound}]"
            )

    def row_rule(self) -> tuple[np.ndarray, np.ndarray]:
        """Fixed quadrature rule in ``y`` resolving ``r(x, .)`` to ~1e-13.

        Built once per kernel by panel halving on a set of probe integrands.
        """
        if "row_rule" not in self._cache:
            self._cache["row_rule"] = self._build_row_rule()
        return self._cache["row_rule"]

    def _build_row_rule(self):
        b = quad.normalise_breaks(self.breakpoints)
        order = 10
        probe_x = np.array([0.0, 0.137, 0.5, 0.862, 1.0])

        def probes(nodes):
            r = np.clip(self(probe_x[:, None], nodes[None, :]), 1e-300, 1 - 1e-16)
            return np.concatenate([r, np.log(r), np.log1p(-r), r * (1 - r)])

        nodes, w = quad.panel_rule(b, order)
        prev = probes(nodes) @ w
        for _ in range(quad.MAX_LEVELS):
            b2 = quad.halve(b)
            n2, w2 = quad.panel_rule(b2, order)
            cur = probes(n2) @ w2
            if np.max(np.abs(cur - prev)) <= 1e-14:
                return nodes, w
            b, nodes, w, prev = b2, n2, w2, cur
        return nodes, w

    def to_dict(self) -> dict:
        out = {"family": self.family, **self._params()}
        out["lower_bound"] = self.lower_bound
        out["upper_bound"] = self.upper_bound
        return out

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self._params().items() if k != "values")
        return f"{type(self).__name__}({params})"


class ConstantReference(ReferenceGraphon):
    family = "constant"
    continuous = True

    def __init__(self, p: float, **bounds):
        if not 0.0 <= p <= 1.0:
            raise ValueError("constant graphon value must lie in [0, 1]")
        self.p = float(p)
        super().__init__(**bounds)

    def _eval(self, x, y):
        return np.full(np.broadcast(x, y).shape, self.p)

    def _range(self):
        return self.p, self.p

    def _build_row_rule(self):
        return np.array([0.5]), np.array([1.0])

    def _params(self):
        return {"p": self.p}


class Rank1Reference(ReferenceGraphon):
    """``r(x, y) = f(x) f(y)`` with ``f`` a polynomial (ascending coefficients)."""

    family = "rank1"
    continuous = True

    def __init__(self, coefficients, **bounds):
        self.poly = np.polynomial.Polynomial(np.asarray(coefficients, dtype=float))
        super().__init__(**bounds)

    @property
    def coefficients(self):
        return self.poly.coef.tolist()

    def f(self, x):
        return self.poly(np.asarray(x, dtype=float))

    def _range(self):
        crit = [0.0, 1.0]
        if self.poly.degree() >= 2:
            roots = self.poly.deriv().roots()
            crit += [float(z.real) for z in roots if abs(z.imag) < 1e-12 and 0 <= z.real <= 1]
        vals = self.f(np.array(crit))
        fmin, fmax = float(vals.min()), float(vals.max())
        if fmin < 0.0 or fmax > 1.0:
            raise ValueError("rank-1 factor must map [0, 1] into [0, 1]")
        return fmin * fmin, fmax * fmax

    def _eval(self, x, y):
        return self.f(x) * self.f(y)

    def _params(self):
        return {"coefficients": self.coefficients}


class GridReference(ReferenceGraphon):
    """Step reference graphon backed by a :class:`BlockGraphon`."""

    family = "grid"
    continuous = False

    def __init__(self, graphon: BlockGraphon, **bounds):
        self.graphon = graphon if isinstance(graphon, BlockGraphon) else BlockGraphon(graphon)
        super().__init__(**bounds)
        if np.ptp(self.graphon.values) == 0.0:
            # a constant grid is a continuous kernel
            self.continuous = True

    @property
    def n_blocks(self):
        return self.graphon.n_blocks

    def _eval(self, x, y):
        return self.graphon(x, y)

    def _range(self):
        return float(self.graphon.values.min()), float(self.graphon.values.max())

    @property
    def breakpoints(self):
        return np.arange(self.n_blocks + 1) / self.n_blocks

    def _build_row_rule(self):
        n = self.n_blocks
        return (np.arange(n) + 0.5) / n, np.full(n, 1.0 / n)

    def _params(self):
        return {"n": self.n_blocks, "values": self.graphon.values.tolist()}


class BilinearReference(ReferenceGraphon):
    """Continuous kernel interpolating grid values placed at block centres.

    Interpolation is bilinear between centres and constant beyond the outer
    centres.
    """

    family = "bilinear"
    continuous = True

    def __init__(self, graphon: BlockGraphon, **bounds):
        self.graphon = graphon if isinstance(graphon, BlockGraphon) else BlockGraphon(graphon)
        super().__init__(**bounds)

    @property
    def n_blocks(self):
        return self.graphon.n_blocks

    def _weights(self, x):
        n = self.n_blocks
        if n == 1:
            z = np.zeros(np.shape(x), dtype=int)
            return z, z, np.zeros(np.shape(x))
        s = np.clip(np.asarray(x) * n - 0.5, 0.0, n - 1.0)
        i0 = np.minimum(np.floor(s).astype(int), n - 2)
        return i0, i0 + 1, s - i0

    def _eval(self, x, y):
        v = self.graphon.values
        i0, i1, tx = self._weights(x)
        j0, j1, ty = self._weights(y)
        return ((1 - tx) * (1 - ty) * v[i0, j0] + (1 - tx) * ty * v[i0, j1]
                + tx * (1 - ty) * v[i1, j0] + tx * ty * v[i1, j1])

    def _range(self):
        return float(self.graphon.values.min()), float(self.graphon.values.max())

    @property
    def breakpoints(self):
        n = self.n_blocks
        return np.concatenate([[0.0], (np.arange(n) + 0.5) / n, [1.0]])

    def _params(self):
        return {"n": self.n_blocks, "values": self.graphon.values.tolist()}


def constant(p: float, **bounds) -> ConstantReference:
    return ConstantReference(p, **bounds)


def rank1(coefficients, **bounds) -> Rank1Reference:
    return Rank1Reference(coefficients, **bounds)


def grid(values, **bounds) -> GridReference:
    return GridReference(values if isinstance(values, BlockGraphon) else BlockGraphon(values), **bounds)


def bilinear(values, **bounds) -> BilinearReference:
    return BilinearReference(values if isinstance(values, BlockGraphon) else BlockGraphon(values), **bounds)


def reference_from_dict(data: dict) -> ReferenceGraphon:
    """Build a reference graphon from its JSON description."""
    bounds = {k: data[k] for k in ("lower_bound", "upper_bound") if data.get(k) is not None}
    family = data.get("family")
    if family == "constant":
        return constant(float(data["p"]), **bounds)
    if family == "rank1":
        return rank1(data["coefficients"], **bounds)
    if family in ("grid", "bilinear"):
        g = BlockGraphon.from_dict(data)
        return (grid if family == "grid" else bilinear)(g, **bounds)
    raise ValueError(f"unknown reference family {family!r}")


Graphon = Union[BlockGraphon, ReferenceGraphon]


def as_reference(g: Graphon) -> ReferenceGraphon:
    return GridReference(g) if isinstance(g, BlockGraphon) else g


# ---------------------------------------------------------------------------
# evaluation and degrees
# ---------------------------------------------------------------------------

def evaluate(g: Graphon, x, y):
    """Value of the graphon at ``(x, y)``; coordinates must lie in [0, 1]."""
    _check_unit(x, y)
    out = g(x, y)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class DegreeProfile:
    x: np.ndarray
    d: np.ndarray
    sup_norm: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "sup_norm", float(np.max(self.d)))

    def to_csv(self) -> str:
        lines = ["x,d"] + [f"{xi!r},{di!r}" for xi, di in zip(self.x.tolist(), self.d.tolist())]
        return "\n".join(lines) + "\n"


def row_integral(r: ReferenceGraphon, x, fun=None) -> np.ndarray:
    """``int_0^1 fun(r(x, y)) dy`` for each ``x``, on the kernel's row rule."""
    nodes, w = r.row_rule()
    vals = r(np.atleast_1d(np.asarray(x, dtype=float))[:, None], nodes[None, :])
    if fun is not None:
        vals = fun(vals)
    return vals @ w


def degree_function(g: Graphon, resolution: int = 257) -> DegreeProfile:
    """Degree function ``d(x) = int g(x, y) dy``.

    Block graphons give exact per-block values at block midpoints; analytic
    kernels are sampled on ``resolution`` equispaced points of [0, 1].
    """
    if resolution < 1:
        raise ValueError("resolution must be a positive integer")
    if isinstance(g, BlockGraphon):
        n = g.n_blocks
        return DegreeProfile((np.arange(n) + 0.5) / n, g.degrees.copy())
    if isinstance(g, GridReference):
        return degree_function(g.graphon)
    x = np.array([0.5]) if resolution == 1 else np.linspace(0.0, 1.0, resolution)
    return DegreeProfile(x, np.clip(row_integral(g, x), 0.0, 1.0))


# ---------------------------------------------------------------------------
# cut norm / cut distance
# ---------------------------------------------------------------------------

class CutNorm(NamedTuple):
    value: float
    exact: bool
    rows: np.ndarray
    cols: np.ndarray


def _subset_bits(start: int, stop: int, n: int) -> np.ndarray:
    k = np.arange(start, stop, dtype=np.int64)
    return ((k[:, None] >> np.arange(n, dtype=np.int64)[None, :]) & 1).astype(float)


def _exact_cut(w: np.ndarray) -> CutNorm:
    n = w.shape[0]
    best, best_s, best_sign = -1.0, 0, 1.0
    chunk = 1 << 14
    for start in range(0, 1 << n, chunk):
        bits = _subset_bits(start, min(start + chunk, 1 << n), n)
        sums = bits @ w
        pos = np.where(sums > 0, sums, 0.0).sum(axis=1)
        neg = -np.where(sums < 0, sums, 0.0).sum(axis=1)
        for vals, sign in ((pos, 1.0), (neg, -1.0)):
            i = int(np.argmax(vals))
            if vals[i] > best:
                best, best_s, best_sign = float(vals[i]), start + i, sign
    rows = _subset_bits(best_s, best_s + 1, n)[0].astype(bool)
    cols = best_sign * (rows.astype(float) @ w) > 0
    return CutNorm(best / (n * n), True, rows, cols)


def _greedy_cut(w: np.ndarray, restarts: int = 32, seed: int = 0) -> CutNorm:
    n = w.shape[0]
    rng = np.random.default_rng(seed)
    best = CutNorm(0.0, False, np.zeros(n, bool), np.zeros(n, bool))
    for k in range(restarts):
        sign = 1.0 if k % 2 == 0 else -1.0
        s = rng.random(n) < 0.5
        for _ in range(100):
            t = sign * (s.astype(float) @ w) > 0
            s_new = sign * (w @ t.astype(float)) > 0
            if np.array_equal(s_new, s):
                break
            s = s_new
        t = sign * (s.astype(float) @ w) > 0
        val = sign * float(s.astype(float) @ w @ t.astype(float)) / (n * n)
        if val > best.value:
            best = CutNorm(val, False, s, t)
    return best


def cut_norm(w, restarts: int = 32, seed: int = 0) -> CutNorm:
    """Cut norm of the step kernel with block values ``w`` (any sign).

    The supremum over measurable ``S, T`` is attained on unions of blocks, so
    it is computed exactly by subset enumeration up to
    ``EXACT_CUT_MAX_BLOCKS`` blocks; beyond that an alternating maximisation
    returns a lower bound flagged ``exact=False``.
    """
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    if np.all(w >= 0) or np.all(w <= 0):
        full = np.ones(n, bool)
        return CutNorm(abs(float(w.sum())) / (n * n), True, full, full)
    if n <= EXACT_CUT_MAX_BLOCKS:
        return _exact_cut(w)
    return _greedy_cut(w, restarts=restarts, seed=seed)


def _as_block(g) -> BlockGraphon:
    if isinstance(g, BlockGraphon):
        return g
    if isinstance(g, GridReference):
        return g.graphon
    raise TypeError("expected a block graphon")


def cut_distance(g1, g2) -> float:
    """Cut distance between two block graphons with the same number of blocks."""
    a, b = _as_block(g1), _as_block(g2)
    if a.n_blocks != b.n_blocks:
        raise ValueError("cut distance needs equal block counts; refine to a common grid first")
    return cut_norm(a.values - b.values).value


class CutMetric(NamedTuple):
    value: float
    exact: bool
    permutation: tuple


def _batch_cut_exact(ws: np.ndarray) -> np.ndarray:
    n = ws.shape[-1]
    bits = _subset_bits(0, 1 << n, n)
    sums = np.einsum("sk,pkj->psj", bits, ws)
    pos = np.where(sums > 0, sums, 0.0).sum(axis=2)
    neg = -np.where(sums < 0, sums, 0.0).sum(axis=2)
    return np.maximum(pos, neg).max(axis=1) / (n * n)


def cut_metric_search(g1, g2, seed: int = 0, steps: int = 20000) -> CutMetric:
    """Minimum cut distance over block relabellings of ``g2``.

    Exhaustive over all permutations up to ``EXACT_PERMUTATION_MAX_BLOCKS``
    blocks; simulated annealing on transpositions otherwise (an upper bound).
    Only block permutations are searched, not general measure-preserving maps.
    """
    a, b = _as_block(g1), _as_block(g2)
    if a.n_blocks != b.n_blocks:
        raise ValueError("cut metric needs equal block counts")
    n = a.n_blocks
    if n <= EXACT_PERMUTATION_MAX_BLOCKS:
        best_val, best_perm = np.inf, tuple(range(n))
        perms = itertools.permutations(range(n))
        while True:
            batch = list(itertools.islice(perms, 2048))
            if not batch:
                break
            idx = np.array(batch)
            ws = a.values[None, :, :] - b.values[idx[:, :, None], idx[:, None, :]]
            vals = _batch_cut_exact(ws)
            i = int(np.argmin(vals))
            if vals[i] < best_val - 1e-15:
                best_val, best_perm = float(vals[i]), batch[i]
        return CutMetric(best_val, True, best_perm)

    rng = np.random.default_rng(seed)
    perm = np.arange(n)
    cur = cut_norm(a.values - b.values[np.ix_(perm, perm)]).value
    best_val, best_perm = cur, perm.copy()
    temp0 = max(cur, 1e-12) * 0.1
    for step in range(steps):
        temp = temp0 * (1.0 - step / steps) + 1e-15
        i, j = rng.choice(n, size=2, replace=False)
        cand = perm.copy()
        cand[i], cand[j] = cand[j], cand[i]
        val = cut_norm(a.values - b.values[np.ix_(cand, cand)]).value
        if val <= cur or rng.random() < math.exp(-(val - cur) / temp):
            perm, cur = cand, val
            if cur < best_val:
                best_val, best_perm = cur, perm.copy()
    return CutMetric(best_val, False, tuple(int(k) for k in best_perm))


def cut_metric_blocks(g1, g2) -> float:
    return cut_metric_search(g1, g2).value


# ---------------------------------------------------------------------------
# relative entropy
# ---------------------------------------------------------------------------

def bernoulli_relative_entropy(a, b):
    """Relative entropy ``R(a | b)`` of Bernoulli(a) with respect to Bernoulli(b).

    Uses ``0 log 0 = 0``; the closed forms ``-log(1 - b)`` and ``-log b`` at
    ``a = 0`` and ``a = 1``, and log1p of relative differences when ``a`` is
    near ``b`` so that small values keep their relative accuracy.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any((b <= 0.0) | (b >= 1.0) | ~np.isfinite(b)):
        raise ValueError("reference probability b must lie in (0, 1)")
    if np.any((a < 0.0) | (a > 1.0) | ~np.isfinite(a)):
        raise ValueError("probability a must lie in [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        near1 = np.abs(a - b) <= 0.5 * b
        near2 = np.abs(a - b) <= 0.5 * (1 - b)
        l1 = np.where(near1, np.log1p((a - b) / b), np.log(a) - np.log(b))
        l2 = np.where(near2, np.log1p((b - a) / (1 - b)), np.log1p(-a) - np.log1p(-b))
        t1 = np.where(a > 0, a * l1, 0.0)
        t2 = np.where(a < 1, (1 - a) * l2, 0.0)
    out = np.maximum(t1 + t2, 0.0)
    return float(out) if out.ndim == 0 else out


def block_log_means(r: ReferenceGraphon, n: int, tol: float = 1e-12):
    """Block means of ``log r`` and ``log(1 - r)`` on the ``n x n`` grid."""
    key = ("log_means", n)
    if key not in r._cache:
        r.require_interior()
        r._cache[key] = (
            _blockwise(lambda x, y: np.log(r(x, y)), n, r.breakpoints, tol),
            _blockwise(lambda x, y: np.log1p(-r(x, y)), n, r.breakpoints, tol),
        )
    return r._cache[key]


def _blockwise(fun, n, breaks, tol):
    """Block means of ``fun`` over the ``n x n`` grid."""
    m, _ = quad.block_integrals(fun, n, breaks, tol=tol / (n * n))
    return m * n * n


def _blockwise_constant(r: ReferenceGraphon, n: int) -> bool:
    return isinstance(r, ConstantReference) or (
        isinstance(r, GridReference) and n % r.n_blocks == 0
    )


def rate_I(h: BlockGraphon, r: Graphon, tol: float = 1e-12) -> float:
    """Integrated relative entropy ``I_r(h) = iint R(h(x, y) | r(x, y))``.

    ``R(a | b)`` is affine in ``log b`` and ``log(1 - b)``, so only block
    means of those two functions are needed.  When ``r`` is itself constant
    on each block of ``h`` the pointwise form is used, which stays accurate
    as ``h`` approaches ``r``.
    """
    h = _as_block(h)
    r = as_reference(r)
    r.require_interior("relative entropy")
    v = h.values
    n = h.n_blocks
    if _blockwise_constant(r, n):
        c = (np.arange(n) + 0.5) / n
        dens = bernoulli_relative_entropy(v, r(c[:, None], c[None, :]))
    else:
        lr, l1r = block_log_means(r, n, tol)
        dens = xlogy(v, v) + xlogy(1 - v, 1 - v) - v * lr - (1 - v) * l1r
    return float(max(np.mean(dens), 0.0))


def block_average(r: Graphon, n: int, tol: float = 1e-10) -> BlockGraphon:
    """``n``-block approximant: the average of ``r`` over each block square."""
    if n < 1:
        raise ValueError("block count must be positive")
    if isinstance(r, BlockGraphon):
        r = GridReference(r)
    if isinstance(r, ConstantReference):
        return BlockGraphon.constant(r.p, n)
    if isinstance(r, GridReference) and n % r.n_blocks == 0:
        return r.graphon.refine(n // r.n_blocks)
    m = _blockwise(lambda x, y: r(x, y), n, r.breakpoints, tol)
    return BlockGraphon(np.clip(0.5 * (m + m.T), 0.0, 1.0))


# ---------------------------------------------------------------------------
# Lp distances
# ---------------------------------------------------------------------------

MAX_REFINEMENT = 4096


def common_refinement(g1, g2) -> tuple[BlockGraphon, BlockGraphon]:
    a, b = _as_block(g1), _as_block(g2)
    n = math.lcm(a.n_blocks, b.n_blocks)
    if n > MAX_REFINEMENT:
        raise ValueError(f"common refinement of {a.n_blocks} and {b.n_blocks} blocks is too large")
    return a.refine(n // a.n_blocks), b.refine(n // b.n_blocks)


def lp_distance(g1, g2, p=1) -> float:
    """L1, L2 or L-infinity distance between step graphons on [0, 1]^2."""
    a, b = common_refinement(g1, g2)
    diff = np.abs(a.values - b.values)
    if p == 1:
        return float(diff.mean())
    if p == 2:
        return float(np.sqrt(np.mean(diff ** 2)))
    if p in (np.inf, "inf", math.inf):
        return float(diff.max())
    raise ValueError("p must be 1, 2 or inf")
