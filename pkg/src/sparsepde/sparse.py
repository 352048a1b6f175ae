"""Dense least squares and Subspace Pursuit."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


def least_squares(A: np.ndarray, b: np.ndarray, return_rank: bool = False):
    """Minimum-norm solution of ``min ||A x - b||_2``.

    Uses LAPACK ``gelsy`` (QR with column pivoting), so rank-deficient
    problems get the minimum-norm completion.  With ``return_rank`` the
    numerical rank is returned as well.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if A.ndim != 2 or A.shape[1] < 1:
        raise ValueError("A must be a matrix with at least one column")
    if A.shape[0] != b.size:
        raise ValueError(f"shape mismatch: A{A.shape} vs b({b.size})")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValueError("least_squares inputs must be finite")
    if A.shape[0] == 0:
        x, rank = np.zeros(A.shape[1]), 0
    else:
        x, _, rank, _ = scipy.linalg.lstsq(A, b, lapack_driver="gelsy", check_finite=False)
    return (x, int(rank)) if return_rank else x


def top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest ``|scores|``; ties go to the lower index."""
    order = np.argsort(-np.abs(scores), kind="stable")
    return np.sort(order[:k])


@dataclass
class SpResult:
    support: tuple[int, ...]
    coefficients: np.ndarray
    iterations: int
    residual_norms: list[float] = field(default_factory=list)
    hit_cap: bool = False


def _residual(G: np.ndarray, cols, b: np.ndarray) -> np.ndarray:
    cols = list(cols)
    return b - G[:, cols] @ least_squares(G[:, cols], b)


def subspace_pursuit(k: int, F: np.ndarray, b: np.ndarray, max_iter: int | None = None,
                     ) -> SpResult:
    """Subspace Pursuit with sparsity ``k``.

    Columns are normalized for selection; the returned coefficients are the
    least-squares fit of ``b`` on the selected *original* columns.  The loop
    stops (keeping the previous support) as soon as the residual norm fails
    to strictly decrease.
    """
    F = np.asarray(F, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    K = F.shape[1]
    if not 1 <= k <= K:
        raise ValueError(f"sparsity k={k} must be in 1..{K}")
    coef = np.zeros(K)
    if not np.any(b):
        return SpResult(tuple(range(k)), coef, 0, [0.0])
    max_iter = 10 * k if max_iter is None else max_iter

    norms = np.linalg.norm(F, axis=0)
    G = np.divide(F, norms, out=np.zeros_like(F), where=norms > 0)

    support = top_k(G.T @ b, k)
    res = _residual(G, support, b)
    res_norms = [float(np.linalg.norm(res))]
    best = (res_norms[0], support)
    it = 0
    hit_cap = False
    while True:
        if it >= max_iter:
            hit_cap = True
            support = best[1]
            break
        it += 1
        candidate = np.union1d(support, top_k(G.T @ res, k))
        cp = least_squares(G[:, candidate], b)
        new_support = np.sort(candidate[top_k(cp, k)])
        new_res = _residual(G, new_support, b)
        new_norm = float(np.linalg.norm(new_res))
        if new_norm >= res_norms[-1]:
            break
        support, res = new_support, new_res
        res_norms.append(new_norm)
        if new_norm < best[0]:
            best = (new_norm, support)

    support = tuple(int(j) for j in support)
    coef[list(support)] = least_squares(F[:, list(support)], b)
    return SpResult(support, coef, it, res_norms, hit_cap)
