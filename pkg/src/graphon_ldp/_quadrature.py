"""Composite Gauss-Legendre rules on [0, 1] with panel-halving adaptivity.

Kernels in this package are smooth between known breakpoints (block edges,
interpolation nodes), so a composite rule whose panels respect those
breakpoints converges spectrally.  Adaptivity is by halving every panel and
comparing successive estimates.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

MAX_LEVELS = 10


@lru_cache(maxsize=None)
def _gauss_unit(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1.0) / 2.0, w / 2.0


def normalise_breaks(breaks, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    b = np.asarray(list(breaks) + [lo, hi], dtype=float)
    b = b[(b >= lo) & (b <= hi)]
    b = np.unique(b)
    # drop slivers produced by round-off in block edges
    keep = np.concatenate([[True], np.diff(b) > 1e-14 * max(hi - lo, 1.0)])
    return b[keep]


def halve(breaks: np.ndarray) -> np.ndarray:
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    out = np.empty(2 * len(breaks) - 1)
    out[0::2] = breaks
    out[1::2] = mids
    return out


def panel_rule(breaks: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the composite rule with the given panel edges."""
    t, w = _gauss_unit(order)
    a = breaks[:-1, None]
    h = np.diff(breaks)[:, None]
    nodes = (a + h * t[None, :]).ravel()
    weights = (h * w[None, :]).ravel()
    return nodes, weights


def integrate(fun, breaks, tol: float = 1e-12, order: int = 8):
    """Adaptive composite integral of a vectorised ``fun`` over ``[breaks[0], breaks[-1]]``.

    ``fun`` maps a 1-D node array to values whose last axis runs over nodes,
    so vector-valued integrands are supported.  Returns ``(value, error)``.
    """
    b = np.asarray(breaks, dtype=float)
    nodes, w = panel_rule(b, order)
    prev = np.asarray(fun(nodes)) @ w
    err = np.inf
    for _ in range(MAX_LEVELS):
        b = halve(b)
        nodes, w = panel_rule(b, order)
        cur = np.asarray(fun(nodes)) @ w
        err = float(np.max(np.abs(cur - prev))) if np.size(cur) else 0.0
        prev = cur
        if err <= tol:
            break
    return prev, err


def membership(nodes: np.ndarray, n_blocks: int) -> np.ndarray:
    """Block index of each node under the right-open block convention."""
    return np.minimum((nodes * n_blocks).astype(int), n_blocks - 1)


def block_integrals(fun, n_blocks: int, breaks=(), tol: float = 1e-12, order: int = 6,
                    max_nodes: int = 4096, max_levels: int = MAX_LEVELS, chunk: int = 256):
    """Matrix of integrals of ``fun(x, y)`` over the squares of an n-by-n block grid.

    ``fun`` is evaluated on outer grids ``fun(X[:, None], Y[None, :])``, a
    chunk of rows at a time.  Panels always contain the block edges, so each
    panel lies in one block.  Refinement halves panels while the node count
    stays below ``max_nodes`` and raises the Gauss order after that.  With
    ``max_levels=0`` the first estimate is returned with an infinite error.
    """
    edges = np.arange(n_blocks + 1) / n_blocks
    b = normalise_breaks(list(edges) + list(breaks))

    def estimate(b, q):
        nodes, w = panel_rule(b, q)
        mids = np.repeat(0.5 * (b[:-1] + b[1:]), q)
        p = np.zeros((len(nodes), n_blocks))
        p[np.arange(len(nodes)), membership(mids, n_blocks)] = w
        out = np.zeros((n_blocks, n_blocks))
        for start in range(0, len(nodes), chunk):
            sl = slice(start, start + chunk)
            vals = fun(nodes[sl, None], nodes[None, :])
            out += p[sl].T @ (vals @ p)
        return out

    q = order
    prev = estimate(b, q)
    err = np.inf
    for _ in range(max_levels):
        if 2 * (len(b) - 1) * q <= max_nodes:
            b = halve(b)
        else:
            q += 4
        cur = estimate(b, q)
        err = float(np.max(np.abs(cur - prev)))
        prev = cur
        if err <= tol:
            break
    return prev, err
