"""k-means (Lloyd with k-means++ seeding) and the Adjusted Rand Index."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class KMeansOptions:
    K: int
    max_iter: int = 300
    n_init: int = 10
    tol: float = 1e-9
    init: str = "kmeans++"
    centers: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.K < 1 or self.max_iter < 1 or self.n_init < 1:
            raise DomainError("K, max_iter and n_init must all be >= 1")
        if self.init not in ("kmeans++", "provided-centers"):
            raise DomainError(f"unknown init {self.init!r}")
        if self.init == "provided-centers" and self.centers is None:
            raise DomainError("init='provided-centers' needs centers")


@dataclass
class KMeansResult:
    labels: np.ndarray  # 1-based
    centers: np.ndarray
    inertia: float
    n_iter: int = 0
    history: list[float] = field(default_factory=list)


def _sq_dists(X, C):
    # exact differences rather than the expanded |x|^2 - 2x.c + |c|^2 form
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def kmeans_plusplus(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    for k in range(1, K):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centers[k] = X[idx]
        closest = np.minimum(closest, ((X - centers[k]) ** 2).sum(axis=1))
    return centers


def _lloyd(X, centers, max_iter, tol):
    K = centers.shape[0]
    history = []
    labels = None
    for it in range(1, max_iter + 1):
        d = _sq_dists(X, centers)
        new_labels = d.argmin(axis=1)
        cost = d[np.arange(len(X)), new_labels]
        history.append(float(cost.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        new_centers = centers.copy()
        counts = np.bincount(labels, minlength=K)
        for k in range(K):
            if counts[k]:
                new_centers[k] = X[labels == k].mean(axis=0)
        for k in np.flatnonzero(counts == 0):
            # re-seed at the point farthest from its own center
            far = int(cost.argmax())
            new_centers[k] = X[far]
            cost[far] = -1.0
        shift = ((new_centers - centers) ** 2).sum()
        centers = new_centers
        if shift <= tol:
            d = _sq_dists(X, centers)
            labels = d.argmin(axis=1)
            history.append(float(d[np.arange(len(X)), labels].sum()))
            break
    inertia = float(((X - centers[labels]) ** 2).sum())
    return labels, centers, inertia, it, history


def kmeans(points, opts: KMeansOptions, rng=None) -> KMeansResult:
    """Best-of-``n_init`` Lloyd runs, each seeded from its own child stream.

    Ties in inertia go to the lowest restart index.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n < opts.K:
        raise DomainError(f"need at least K={opts.K} points, got {n}")
    rng = np.random.default_rng(rng)
    best = None
    if opts.init == "provided-centers":
        starts = [np.asarray(opts.centers, dtype=float).reshape(opts.K, X.shape[1])]
    else:
        children = rng.spawn(opts.n_init)
        starts = [kmeans_plusplus(X, opts.K, child) for child in children]
    for c0 in starts:
        labels, centers, inertia, n_iter, history = _lloyd(X, c0.copy(), opts.max_iter, opts.tol)
        if best is None or inertia < best.inertia:
            best = KMeansResult(labels + 1, centers, inertia, n_iter, history)
    return best


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2


def contingency(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def ari(a, b) -> float:
    """Adjusted Rand Index (Hubert and Arabie), 1.0 when both partitions are trivial and equal."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError("labelings must be 1-D and of equal length")
    n = len(a)
    if n == 0:
        raise DomainError("labelings are empty")
    table = contingency(a, b)
    index = _comb2(table).sum()
    sa = _comb2(table.sum(axis=1)).sum()
    sb = _comb2(table.sum(axis=0)).sum()
    total = _comb2(n)
    expected = sa * sb / total if total > 0 else 0.0
    top = 0.5 * (sa + sb)
    if top == expected:
        return 1.0
    return float((index - expected) / (top - expected))
