"""DCBM / BiDCBM parameter construction and network sampling.

Community labels are 1-based integer arrays throughout.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, ValidationError
from .graph import BipartiteAdjacency, SymmetricAdjacency

logger = logging.getLogger(__name__)

# network index reserved for the k-means stream of a replication
CLUSTER_STREAM = 1000
# replication key used when theta/delta are held fixed across replications
FIXED_DEGREE_REPLICATION = 2**32 - 1


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``.

    Each tuple of keys maps to its own ``SeedSequence``, so changing one
    network's parameters never perturbs another network's draws.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def sequential_membership(sizes) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=np.int64)
    if sizes.ndim != 1 or sizes.size == 0:
        raise DomainError("sizes must be a non-empty vector")
    if np.any(sizes < 1):
        raise DomainError("every community needs at least one node")
    return np.repeat(np.arange(1, len(sizes) + 1), sizes)


def membership_matrix(labels, K: int | None = None) -> np.ndarray:
    """0/1 matrix with ``X[i, k-1] = 1`` iff ``labels[i] == k``."""
    labels = np.asarray(labels, dtype=np.int64)
    K = int(labels.max()) if K is None else K
    if labels.min() < 1 or labels.max() > K:
        raise DomainError(f"labels must lie in 1..{K}")
    X = np.zeros((len(labels), K))
    X[np.arange(len(labels)), labels - 1] = 1.0
    return X


def out_in_transition(beta: float, K: int) -> np.ndarray:
    """``(1 - beta) I + beta 11^T``: unit diagonal, ``beta`` elsewhere."""
    if not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta={beta} outside [0, 1]")
    if K < 1:
        raise DomainError("K must be >= 1")
    return (1.0 - beta) * np.eye(K) + beta * np.ones((K, K))


def power_law_degrees(count: int, alpha: float = 5.0, lower: float = 1.0, rng=None,
                      normalize: str | None = "max"):
    """Pareto(``lower``, ``alpha``) draws mapped into [0, 1].

    ``normalize="max"`` divides by the sample maximum (entries in (0, 1]);
    ``"minmax"`` maps the sample range onto [0, 1]; ``None`` returns the raw
    draws. A constant sample normalizes to all ones.
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    if alpha <= 1 or lower <= 0:
        raise DomainError("need alpha > 1 and lower > 0")
    if normalize not in ("max", "minmax", None):
        raise DomainError(f"unknown normalization {normalize!r}")
    rng = np.random.default_rng(rng)
    # 1 - U lies in (0, 1], avoiding u = 0
    u = 1.0 - rng.random(count)
    d = lower * u ** (-1.0 / alpha)
    if normalize is None:
        return d
    lo, hi = d.min(), d.max()
    if normalize == "max" or hi == lo:
        return d / hi if hi != lo else np.ones(count)
    return (d - lo) / (hi - lo)


def _scale_and_clip(W: np.ndarray, avg_degree: float, rows: int):
    total = W.sum()
    if not total > 0:
        raise DomainError("mean matrix is identically zero; cannot scale to a target degree")
    if avg_degree <= 0:
        raise DomainError("avg_degree must be positive")
    omega = W * (avg_degree * rows / total)
    clipped = int(np.count_nonzero(omega > 1.0))
    if clipped:
        logger.debug("clipped %d mean-matrix entries to 1", clipped)
        np.minimum(omega, 1.0, out=omega)
    return omega, clipped


def dcbm_mean(theta, labels, trans, avg_degree: float | None = None, return_clipped: bool = False):
    """Edge-probability matrix ``diag(theta) X P X^T diag(theta)`` with zero diagonal.

    The matrix is rescaled so the mean expected degree is ``avg_degree`` and
    clipped to [0, 1]. ``avg_degree=None`` returns the unscaled product.
    """
    theta = np.asarray(theta, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    trans = np.asarray(trans, dtype=float)
    if trans.ndim != 2 or trans.shape[0] != trans.shape[1]:
        raise DomainError("transition matrix must be square")
    if not np.allclose(trans, trans.T):
        raise DomainError("transition matrix must be symmetric")
    if theta.shape != labels.shape:
        raise DomainError("theta and labels differ in length")
    if labels.min() < 1 or labels.max() > trans.shape[0]:
        raise DomainError("label outside transition matrix range")
    idx = labels - 1
    W = np.outer(theta, theta) * trans[np.ix_(idx, idx)]
    np.fill_diagonal(W, 0.0)
    clipped = 0
    if avg_degree is not None:
        W, clipped = _scale_and_clip(W, avg_degree, len(theta))
    return (W, clipped) if return_clipped else W


def bidcbm_mean(theta, delta, labels_t, labels_s, trans, avg_degree: float | None = None,
                return_clipped: bool = False):
    """Rectangular mean matrix ``diag(theta) X_t F X_s^T diag(delta)``.

    Scaling targets the mean expected degree of the primary (row) nodes.
    """
    theta = np.asarray(theta, dtype=float)
    delta = np.asarray(delta, dtype=float)
    lt = np.asarray(labels_t, dtype=np.int64)
    ls = np.asarray(labels_s, dtype=np.int64)
    F = np.atleast_2d(np.asarray(trans, dtype=float))
    if theta.shape != lt.shape or delta.shape != ls.shape:
        raise DomainError("degree vectors and labels differ in length")
    if lt.min() < 1 or lt.max() > F.shape[0] or ls.min() < 1 or ls.max() > F.shape[1]:
        raise DomainError("label outside transition matrix range")
    W = np.outer(theta, delta) * F[np.ix_(lt - 1, ls - 1)]
    clipped = 0
    if avg_degree is not None:
        W, clipped = _scale_and_clip(W, avg_degree, len(theta))
    return (W, clipped) if return_clipped else W


def sample_symmetric(omega, rng=None) -> SymmetricAdjacency:
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
        raise DomainError("omega must be square")
    if not np.array_equal(omega, omega.T):
        raise DomainError("omega must be symmetric")
    if np.any(np.diag(omega) != 0):
        raise DomainError("omega must have a zero diagonal")
    if omega.min() < 0 or omega.max() > 1:
        raise DomainError("omega entries must lie in [0, 1]")
    rng = np.random.default_rng(rng)
    n = omega.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    hit = rng.random(len(iu)) < omega[iu, ju]
    return SymmetricAdjacency.from_edges(n, np.stack([iu[hit], ju[hit]], axis=1))


def sample_bipartite(omega, rng=None) -> BipartiteAdjacency:
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 2:
        raise DomainError("omega must be 2-D")
    if omega.min() < 0 or omega.max() > 1:
        raise DomainError("omega entries must lie in [0, 1]")
    rng = np.random.default_rng(rng)
    r, c = np.nonzero(rng.random(omega.shape) < omega)
    return BipartiteAdjacency.from_edges(omega.shape[0], omega.shape[1], np.stack([r, c], axis=1))


def balanced_sizes(total: int, K: int) -> list[int]:
    """``K`` near-equal sizes summing to ``total``; extras go to the first blocks."""
    base, extra = divmod(total, K)
    return [base + (1 if k < extra else 0) for k in range(K)]


@dataclass
class ScenarioConfig:
    n: int
    m: int
    K: int
    K_prime: int | None = None
    Q: int | None = None  # defaults to len(beta_bipartite)
    community_sizes: list[int] | None = None
    bipartite_community_sizes: list[int] | None = None
    beta_primary: float = 0.5
    beta_bipartite: list[float] = field(default_factory=lambda: [0.5] * 5)
    avg_degree: float = 40.0
    avg_degree_bipartite: float | None = None
    replications: int = 200
    seed: int = 0
    alpha: float = 5.0
    degree_normalization: str = "minmax"
    redraw_degrees: bool = True

    def __post_init__(self):
        if self.Q is None:
            self.Q = len(self.beta_bipartite)
        if self.K_prime is None:
            self.K_prime = self.K
        if self.community_sizes is None and self.K >= 1 and self.n >= 0:
            self.community_sizes = balanced_sizes(self.n, self.K)
        if self.bipartite_community_sizes is None and self.K_prime >= 1 and self.m >= 0:
            self.bipartite_community_sizes = balanced_sizes(self.m, self.K_prime)
        if self.avg_degree_bipartite is None:
            self.avg_degree_bipartite = self.avg_degree
        self.community_sizes = [int(v) for v in self.community_sizes]
        self.bipartite_community_sizes = [int(v) for v in self.bipartite_community_sizes]
        self.beta_bipartite = [float(b) for b in self.beta_bipartite]
        self.validate()

    def validate(self) -> None:
        problems = []
        if self.n < 1:
            problems.append("n must be >= 1")
        if self.K < 1:
            problems.append("K must be >= 1")
        if self.Q < 0:
            problems.append("Q must be >= 0")
        if self.Q > 0 and (self.m < 1 or self.K_prime < 1):
            problems.append("m and K_prime must be >= 1 when Q > 0")
        if len(self.community_sizes) != self.K or sum(self.community_sizes) != self.n:
            problems.append("community_sizes must have K entries summing to n")
        if any(s < 1 for s in self.community_sizes):
            problems.append("community_sizes entries must be >= 1")
        if self.Q > 0:
            bs = self.bipartite_community_sizes
            if len(bs) != self.K_prime or sum(bs) != self.m or any(s < 1 for s in bs):
                problems.append("bipartite_community_sizes must have K_prime positive entries summing to m")
        if not 0 <= self.beta_primary <= 1:
            problems.append("beta_primary must lie in [0, 1]")
        if len(self.beta_bipartite) != self.Q:
            problems.append("beta_bipartite must have Q entries")
        if any(not 0 <= b <= 1 for b in self.beta_bipartite):
            problems.append("beta_bipartite entries must lie in [0, 1]")
        if self.avg_degree <= 0 or self.avg_degree_bipartite <= 0:
            problems.append("average degrees must be positive")
        if self.degree_normalization not in ("max", "minmax"):
            problems.append("degree_normalization must be 'max' or 'minmax'")
        if self.replications < 1:
            problems.append("replications must be >= 1")
        if not 0 <= self.seed < 2**64:
            problems.append("seed must be a 64-bit unsigned integer")
        if problems:
            raise ValidationError(problems)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValidationError([f"unknown field {k!r}" for k in unknown])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ValidationError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Scenario:
    """One draw of a simulation cell."""

    primary: SymmetricAdjacency
    bipartite: list[BipartiteAdjacency]
    labels: np.ndarray
    theta: np.ndarray
    deltas: list[np.ndarray]
    clipped: int = 0


def build_scenario(cfg: ScenarioConfig, replication: int = 0, scenario_index: int = 0) -> Scenario:
    """Draw the primary network and all bipartite networks for one replication.

    Network ``0`` is the primary, ``q`` the q-th bipartite network; each uses
    the stream ``(cfg.seed, scenario_index, replication, q)``.
    """
    labels = sequential_membership(cfg.community_sizes)
    deg_rep = replication if cfg.redraw_degrees else FIXED_DEGREE_REPLICATION

    theta = power_law_degrees(cfg.n, cfg.alpha, rng=substream(cfg.seed, scenario_index, deg_rep, 0, 0),
                              normalize=cfg.degree_normalization)
    omega, clipped = dcbm_mean(theta, labels, out_in_transition(cfg.beta_primary, cfg.K),
                               cfg.avg_degree, return_clipped=True)
    primary = sample_symmetric(omega, substream(cfg.seed, scenario_index, replication, 0, 1))

    bipartite, deltas = [], []
    if cfg.Q:
        labels_s = sequential_membership(cfg.bipartite_community_sizes)
        for q in range(1, cfg.Q + 1):
            delta = power_law_degrees(cfg.m, cfg.alpha, rng=substream(cfg.seed, scenario_index, deg_rep, q, 0),
                                      normalize=cfg.degree_normalization)
            F = _bipartite_transition(cfg.beta_bipartite[q - 1], cfg.K, cfg.K_prime)
            om, c = bidcbm_mean(theta, delta, labels, labels_s, F, cfg.avg_degree_bipartite, return_clipped=True)
            clipped += c
            bipartite.append(sample_bipartite(om, substream(cfg.seed, scenario_index, replication, q, 1)))
            deltas.append(delta)
    if clipped:
        logger.info("scenario %d rep %d: %d mean entries clipped", scenario_index, replication, clipped)
    return Scenario(primary, bipartite, labels, theta, deltas, clipped)


def _bipartite_transition(beta: float, K: int, K_prime: int) -> np.ndarray:
    """Out-in matrix aligning bipartite community k with primary community k."""
    size = max(K, K_prime)
    return out_in_transition(beta, size)[:K, :K_prime]
