"""Spectra of the adjacency, degree and Laplacian operators of block graphons.

On a block graphon the space L^2[0, 1] splits into block-constant functions,
where the Laplacian acts as the reduced matrix ``K = diag(d) - G/n``, and
functions with zero mean on every block, where the adjacency operator
vanishes and the Laplacian multiplies by the block degree.  So the spectrum is
``eig(K)`` together with the degree values, with no discretisation error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigen import symmetric_eigh, symmetric_eigvalsh
from .graphon import BlockGraphon

__all__ = [
    "SpectralSummary",
    "reduced_matrix",
    "laplacian_spectrum",
    "laplacian_norm",
    "quadratic_form_norm",
    "matrix_laplacian_norm",
    "matrix_spectra",
    "adjacency_min_eig",
    "empirical_graphon",
    "validate_adjacency",
    "star_adjacency",
]


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    laplacian_norm: float
    reduced_eigs: np.ndarray
    degree_values: np.ndarray
    adjacency_min_eig: float
    adjacency_max_eig: float

    def to_dict(self) -> dict:
        return {
            "laplacian_norm": self.laplacian_norm,
            "reduced_eigs": self.reduced_eigs.tolist(),
            "degree_values": self.degree_values.tolist(),
            "adjacency_min_eig": self.adjacency_min_eig,
            "adjacency_max_eig": self.adjacency_max_eig,
        }


def reduced_matrix(g: BlockGraphon) -> np.ndarray:
    """Matrix of the Laplacian restricted to block-constant functions."""
    v = g.values
    n = g.n_blocks
    return np.diag(v.mean(axis=1)) - v / n


def laplacian_spectrum(g: BlockGraphon, method: str = "auto") -> SpectralSummary:
    n = g.n_blocks
    k_eigs = symmetric_eigvalsh(reduced_matrix(g), method)
    t_eigs = symmetric_eigvalsh(g.values / n, method)
    degrees = g.degrees.copy()
    norm = max(float(k_eigs[-1]), float(degrees.max()))
    # the block-mean-zero complement is infinite dimensional and T vanishes there
    return SpectralSummary(
        laplacian_norm=norm,
        reduced_eigs=k_eigs,
        degree_values=degrees,
        adjacency_min_eig=min(float(t_eigs[0]), 0.0),
        adjacency_max_eig=max(float(t_eigs[-1]), 0.0),
    )


def laplacian_norm(g: BlockGraphon, method: str = "auto") -> float:
    """Operator norm of the graphon Laplacian of ``g``."""
    k_eigs = symmetric_eigvalsh(reduced_matrix(g), method)
    return max(float(k_eigs[-1]), float(g.degrees.max()))


def laplacian_top(g: BlockGraphon, method: str = "lapack"):
    """Eigen-decomposition of the reduced matrix, used by gradient code."""
    return symmetric_eigh(reduced_matrix(g), method)


def adjacency_min_eig(g: BlockGraphon, method: str = "auto") -> float:
    """Smallest point of the spectrum of the adjacency operator of ``g``."""
    t_eigs = symmetric_eigvalsh(g.values / g.n_blocks, method)
    return min(float(t_eigs[0]), 0.0)


def _quadratic_ratio(w: np.ndarray, u: np.ndarray) -> np.ndarray:
    # 0.5 * sum_ab w_ab (u_a - u_b)^2 / m^2, over ||u||^2 = sum u_a^2 / m; u has shape (k, m)
    m = w.shape[0]
    diff2 = (u[:, :, None] - u[:, None, :]) ** 2
    num = 0.5 * np.einsum("ab,kab->k", w, diff2) / (m * m)
    den = np.sum(u * u, axis=1) / m
    return num / den


def quadratic_form_norm(g: BlockGraphon, trials: int = 64, seed=0, max_iter: int = 20000) -> float:
    """Lower bound on the Laplacian norm from the quadratic form alone.

    Maximises ``0.5 * iint g(x, y) (u(x) - u(y))^2`` over unit ``u`` that
    are constant on the halves of each block, by normalised gradient ascent
    from ``trials`` random starts.  Mean-zero probes supported in one block
    are added; on those the form equals the block degree.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    n = g.n_blocks
    w = np.kron(g.values, np.ones((2, 2)))
    m = 2 * n
    rng = np.random.default_rng(seed)

    probes = np.zeros((n, m))
    probes[np.arange(n), 2 * np.arange(n)] = 1.0
    probes[np.arange(n), 2 * np.arange(n) + 1] = -1.0
    best = float(np.max(_quadratic_ratio(w, probes)))

    # m * (grad of the quadratic form) = 2 (diag(deg) - w/m) u
    deg = w.mean(axis=1)
    lap = np.diag(deg) - w / m
    step = 1.0 / max(2.0 * float(np.abs(lap).sum(axis=1).max()), 1e-300)
    u = rng.standard_normal((trials, m))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    prev = _quadratic_ratio(w, u)
    for it in range(max_iter):
        lu = u @ lap
        q = np.sum(u * lu, axis=1)
        u = u + step * 2.0 * (lu - q[:, None] * u)
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        if it % 50 == 49:
            cur = _quadratic_ratio(w, u)
            if np.all(np.abs(cur - prev) <= 1e-16 + 1e-15 * np.abs(cur)):
                break
            prev = cur
    best = max(best, float(np.max(_quadratic_ratio(w, u))))
    return best


def validate_adjacency(adjacency) -> np.ndarray:
    a = np.asarray(adjacency)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("adjacency must be a square matrix")
    a = a.astype(float)
    if not np.all((a == 0) | (a == 1)):
        raise ValueError("adjacency entries must be 0 or 1")
    if not np.array_equal(a, a.T):
        raise ValueError("adjacency must be symmetric")
    if np.any(np.diag(a) != 0):
        raise ValueError("adjacency must have zero diagonal")
    return a


def matrix_laplacian_norm(adjacency, method: str = "auto") -> float:
    """``lambda_max(D - A) / N`` for a simple graph."""
    a = validate_adjacency(adjacency)
    n = a.shape[0]
    if n == 0:
        return 0.0
    lap = np.diag(a.sum(axis=1)) - a
    return float(symmetric_eigvalsh(lap, method)[-1]) / n


def matrix_spectra(adjacency, method: str = "lapack") -> tuple[float, float, float]:
    """``(lambda_max(D), lambda_max(D - A), lambda_min(A))`` of a simple graph."""
    a = np.asarray(adjacency, dtype=float)
    if a.shape[0] == 0:
        return 0.0, 0.0, 0.0
    deg = a.sum(axis=1)
    lmax_l = float(symmetric_eigvalsh(np.diag(deg) - a, method)[-1])
    lmin_a = float(symmetric_eigvalsh(a, method)[0])
    return float(deg.max()), lmax_l, lmin_a


def empirical_graphon(adjacency) -> BlockGraphon:
    """Block graphon whose ``N x N`` block values are the adjacency entries."""
    a = validate_adjacency(adjacency)
    if a.shape[0] == 0:
        raise ValueError("empirical graphon of the empty vertex set is undefined")
    return BlockGraphon(a)


def star_adjacency(n: int) -> np.ndarray:
    a = np.zeros((n, n))
    a[0, 1:] = 1.0
    a[1:, 0] = 1.0
    return a
