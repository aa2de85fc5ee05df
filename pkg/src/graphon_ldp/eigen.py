"""Symmetric eigendecomposition by parallel cyclic Jacobi rotations.

Each sweep visits every index pair once using a round-robin tournament
ordering, so the ``n/2`` rotations of a round act on disjoint rows and
columns and can be applied together as array operations.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = ["JacobiError", "jacobi_eigh", "symmetric_eigh", "symmetric_eigvalsh", "JACOBI_MAX_N"]

JACOBI_MAX_N = 64
OFF_TOL = 1e-12
MAX_SWEEPS = 100


class JacobiError(RuntimeError):
    """Raised when the Jacobi sweep cap is reached before convergence."""


def _round_robin(m: int) -> list[tuple[np.ndarray, np.ndarray]]:
    # circle method: player 0 fixed, the rest rotate
    players = np.arange(m)
    rounds = []
    for _ in range(m - 1):
        top = players[: m // 2]
        bot = players[m // 2:][::-1]
        p = np.minimum(top, bot)
        q = np.maximum(top, bot)
        rounds.append((p, q))
        players = np.concatenate([[players[0]], [players[-1]], players[1:-1]])
    return rounds


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def jacobi_eigh(a, tol: float = OFF_TOL, max_sweeps: int = MAX_SWEEPS, vectors: bool = True):
    """Eigenvalues (ascending) and optionally eigenvectors of a symmetric matrix.

    Iterates until the off-diagonal Frobenius norm is at most
    ``tol * ||A||_F``; raises :class:`JacobiError` after ``max_sweeps``.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    n = a.shape[0]
    if n == 0:
        return (np.zeros(0), np.zeros((0, 0))) if vectors else np.zeros(0)
    a = 0.5 * (a + a.T)
    m = n + (n % 2)
    if m != n:
        a = np.pad(a, ((0, 1), (0, 1)))
    v = np.eye(m)
    scale = float(np.linalg.norm(a))
    rounds = _round_robin(m) if m > 1 else []

    for sweep in range(max_sweeps + 1):
        if scale == 0.0 or _off_norm(a) <= tol * scale:
            break
        if sweep == max_sweeps:
            raise JacobiError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            # a huge theta means a negligible rotation; t -> 0 is the right limit
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                theta = np.where(active, (a[q, q] - a[p, p]) / (2.0 * np.where(active, apq, 1.0)), 0.0)
                t = np.where(active, np.sign(theta + (theta == 0)) / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # rows:  A <- P^T A
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            # columns: A <- A P
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = ap * c[None, :] - aq * s[None, :]
            a[:, q] = ap * s[None, :] + aq * c[None, :]
            a[p, q] = 0.0
            a[q, p] = 0.0
            if vectors:
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = vp * c[None, :] - vq * s[None, :]
                v[:, q] = vp * s[None, :] + vq * c[None, :]

    w = np.diag(a)[:n].copy()
    order = np.argsort(w, kind="stable")
    if not vectors:
        return w[order]
    return w[order], v[:n, :n][:, order]


def symmetric_eigh(a, method: str = "auto"):
    """Eigen-decomposition dispatcher: ``jacobi``, ``lapack`` or ``auto``.

    ``auto`` uses Jacobi up to ``JACOBI_MAX_N`` rows and LAPACK beyond.
    """
    a = np.asarray(a, dtype=float)
    if method == "auto":
        method = "jacobi" if a.shape[0] <= JACOBI_MAX_N else "lapack"
    if method == "jacobi":
        return jacobi_eigh(a)
    if method == "lapack":
        return scipy.linalg.eigh(a)
    raise ValueError(f"unknown eigen method {method!r}")


def symmetric_eigvalsh(a, method: str = "auto") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if method == "auto":
        method = "jacobi" if a.shape[0] <= JACOBI_MAX_N else "lapack"
    if method == "jacobi":
        return jacobi_eigh(a, vectors=False)
    if method == "lapack":
        return scipy.linalg.eigvalsh(a)
    raise ValueError(f"unknown eigen method {method!r}")
