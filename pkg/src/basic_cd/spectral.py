"""Bipartite-assisted spectral clustering and the plain SCORE baseline.

The pipeline aggregates ``M = A A^T + sum_q B_q B_q^T``, takes the K leading
eigenvectors of ``M``, divides the trailing ones entrywise by the leading
one (clamped at ``T_n``), and runs k-means on the rows of that ratio matrix.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .clustering import KMeansOptions, kmeans
from .errors import DomainError, NumericError
from .graph import BipartiteAdjacency, SymmetricAdjacency

logger = logging.getLogger(__name__)

DENSE_LIMIT = 5000
EIGEN_TIE_TOL = 1e-6


class EigenTieWarning(UserWarning):
    """The K-th and (K+1)-th eigenvalues are numerically tied."""


@dataclass(frozen=True)
class EigenPack:
    values: np.ndarray   # length K, descending by |value|
    vectors: np.ndarray  # n x K, orthonormal columns
    next_value: float | None = None  # (K+1)-th eigenvalue when available


@dataclass(frozen=True)
class RatioMatrix:
    values: np.ndarray  # n x (K-1)
    threshold: float


def aggregate(a: SymmetricAdjacency | np.ndarray, bs=()) -> np.ndarray:
    """Dense ``A A^T + sum_q B_q B_q^T``."""
    A = a.to_csr() if isinstance(a, SymmetricAdjacency) else sp.csr_matrix(np.asarray(a, dtype=float))
    n = A.shape[0]
    M = (A @ A.T).toarray()
    for q, b in enumerate(bs):
        B = b.to_csr() if isinstance(b, BipartiteAdjacency) else sp.csr_matrix(np.asarray(b, dtype=float))
        if B.shape[0] != n:
            raise DomainError(f"bipartite network {q} has {B.shape[0]} rows, primary has {n}")
        M += (B @ B.T).toarray()
    return M


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    vectors = vectors.copy()
    if vectors.shape[1] == 0:
        return vectors
    if vectors[:, 0].sum() < 0:
        vectors[:, 0] *= -1
    # remaining columns: largest-magnitude entry made positive, which is
    # equivariant under node relabeling
    for k in range(1, vectors.shape[1]):
        col = vectors[:, k]
        if col[np.argmax(np.abs(col))] < 0:
            vectors[:, k] = -col
    return vectors


def top_k_eigen(m, K: int, dense_limit: int = DENSE_LIMIT, check: bool = True) -> EigenPack:
    """K eigenpairs of largest absolute eigenvalue of a symmetric matrix.

    Dense ``eigh`` up to ``dense_limit`` rows, restarted Lanczos (ARPACK)
    beyond. The leading vector is oriented to have a positive entry sum.
    """
    n = m.shape[0]
    if not 1 <= K <= n:
        raise DomainError(f"K={K} outside 1..{n}")
    want = min(K + 1, n)
    if n <= dense_limit:
        M = m.toarray() if sp.issparse(m) else np.asarray(m, dtype=float)
        w, V = np.linalg.eigh(M)
        order = np.argsort(-np.abs(w), kind="stable")[:want]
        w, V = w[order], V[:, order]
    else:
        try:
            w, V = eigsh(m, k=min(want, n - 1), which="LM", tol=1e-10, maxiter=300 * K)
        except ArpackNoConvergence as exc:
            raise NumericError(
                f"Lanczos did not converge: {len(exc.eigenvalues)} of {want} eigenpairs after {300 * K} iterations"
            ) from exc
        order = np.argsort(-np.abs(w), kind="stable")
        w, V = w[order], V[:, order]
    values, vectors = w[:K], _fix_signs(V[:, :K])
    nxt = float(w[K]) if len(w) > K else None
    if check:
        norm = max(abs(values[0]), np.finfo(float).tiny)
        resid = np.linalg.norm(m @ vectors - vectors * values, axis=0)
        if resid.max() > 1e-8 * norm:
            raise NumericError(f"eigen residual {resid.max():.3e} exceeds 1e-8 * |M|_op")
    if nxt is not None and values[-1] != 0 and 1 - abs(nxt) / abs(values[-1]) < EIGEN_TIE_TOL:
        warnings.warn(
            f"eigenvalues {K} and {K + 1} are tied ({values[-1]:.6g} vs {nxt:.6g}); "
            "the leading eigenspace is not identified",
            EigenTieWarning,
            stacklevel=2,
        )
    return EigenPack(values, vectors, nxt)


def score_ratio(eig: EigenPack | np.ndarray, T_n: float) -> RatioMatrix:
    """Entrywise ``sgn(u_{k+1}) * min(|u_{k+1} / u_1|, T_n)``.

    Where the leading entry is exactly zero the magnitude is ``T_n``.
    """
    U = eig.vectors if isinstance(eig, EigenPack) else np.asarray(eig, dtype=float)
    if U.ndim != 2 or U.shape[1] < 2:
        raise DomainError("ratio matrix needs K >= 2 eigenvectors")
    if not T_n > 0:
        raise DomainError("T_n must be positive")
    lead = U[:, :1]
    rest = U[:, 1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = np.abs(rest) / np.abs(lead)
    mag = np.where(lead == 0, T_n, np.minimum(mag, T_n))
    return RatioMatrix(np.sign(rest) * mag, float(T_n))


@dataclass
class Detection:
    labels: np.ndarray
    eigen: EigenPack
    ratio: RatioMatrix
    inertia: float


def basic_pipeline(a, bs, K: int, opts: KMeansOptions | None = None, rng=None,
                   T_n: float | None = None) -> Detection:
    if K < 2:
        raise DomainError("community detection needs K >= 2")
    M = aggregate(a, bs)
    n = M.shape[0]
    if K > n:
        raise DomainError(f"K={K} exceeds the number of nodes {n}")
    eig = top_k_eigen(M, K)
    T_n = np.log(n) if T_n is None else T_n
    ratio = score_ratio(eig, T_n)
    opts = opts or KMeansOptions(K=K)
    if opts.K != K:
        raise DomainError("k-means options disagree with K")
    res = kmeans(ratio.values, opts, rng)
    return Detection(res.labels, eig, ratio, res.inertia)


def basic_detect(a, bs, K: int, opts: KMeansOptions | None = None, rng=None,
                 T_n: float | None = None) -> np.ndarray:
    """Community labels (1..K) for the primary nodes, using bipartite side networks."""
    return basic_pipeline(a, bs, K, opts, rng, T_n).labels


def score_detect(a, K: int, opts: KMeansOptions | None = None, rng=None,
                 T_n: float | None = None) -> np.ndarray:
    """SCORE on the primary network alone."""
    return basic_detect(a, [], K, opts, rng, T_n)
