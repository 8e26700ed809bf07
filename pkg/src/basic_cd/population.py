"""Population-level quantities and numerical checks of the eigen-structure results.

Everything here works with expected matrices rather than sampled networks,
except :func:`deviation_check`, which compares a draw with its expectation.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import DomainError, NumericError, ValidationError
from .spectral import aggregate, score_ratio, top_k_eigen

logger = logging.getLogger(__name__)

WEAK_SIGNAL_GAP = 0.1


@dataclass
class PopulationSpec:
    theta: np.ndarray
    delta: np.ndarray
    labels_t: np.ndarray  # 1-based, values in 1..K
    labels_s: np.ndarray  # 1-based, values in 1..K'
    E: np.ndarray
    Fs: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.delta = np.asarray(self.delta, dtype=float)
        self.labels_t = np.asarray(self.labels_t, dtype=np.int64)
        self.labels_s = np.asarray(self.labels_s, dtype=np.int64)
        self.E = np.atleast_2d(np.asarray(self.E, dtype=float))
        self.Fs = [np.atleast_2d(np.asarray(F, dtype=float)) for F in self.Fs]
        self.validate()

    @property
    def K(self) -> int:
        return self.E.shape[0]

    @property
    def K_prime(self) -> int:
        return self.Fs[0].shape[1] if self.Fs else int(self.labels_s.max())

    @property
    def Q(self) -> int:
        return len(self.Fs)

    def validate(self) -> None:
        problems = []
        K = self.E.shape[0]
        if self.E.shape != (K, K) or not np.allclose(self.E, self.E.T, rtol=0, atol=1e-14):
            problems.append("E must be square and symmetric")
        if self.theta.shape != self.labels_t.shape:
            problems.append("theta and labels_t differ in length")
        if self.delta.shape != self.labels_s.shape:
            problems.append("delta and labels_s differ in length")
        if np.any(self.theta < 0) or np.any(self.delta < 0):
            problems.append("degree parameters must be non-negative")
        if set(np.unique(self.labels_t).tolist()) != set(range(1, K + 1)):
            problems.append(f"labels_t must use every community 1..{K}")
        Kp = self.K_prime
        if set(np.unique(self.labels_s).tolist()) != set(range(1, Kp + 1)):
            problems.append(f"labels_s must use every community 1..{Kp}")
        for q, F in enumerate(self.Fs):
            if F.shape != (K, Kp):
                problems.append(f"F[{q}] must be {K}x{Kp}")
        mats = [self.E, *self.Fs]
        if any(M.min() < 0 or M.max() > 1 for M in mats):
            problems.append("transition entries must lie in [0, 1]")
        if problems:
            raise ValidationError(problems)

    def scaled(self, c: float) -> "PopulationSpec":
        """Copy with the primary degree parameters multiplied by ``c``."""
        return PopulationSpec(self.theta * c, self.delta, self.labels_t, self.labels_s, self.E, self.Fs)

    def to_dict(self) -> dict:
        return {
            "theta": self.theta.tolist(),
            "delta": self.delta.tolist(),
            "labels_t": self.labels_t.tolist(),
            "labels_s": self.labels_s.tolist(),
            "E": self.E.tolist(),
            "Fs": [F.tolist() for F in self.Fs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PopulationSpec":
        missing = [k for k in ("theta", "labels_t", "E") if k not in d]
        if missing:
            raise ValidationError([f"missing field {k!r}" for k in missing])
        delta = d.get("delta", [1.0])
        labels_s = d.get("labels_s", [1] * len(delta))
        return cls(d["theta"], delta, d["labels_t"], labels_s, d["E"], d.get("Fs", []))

    @classmethod
    def from_json(cls, path) -> "PopulationSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def random_spec(n: int, K: int, Q: int, seed: int, m: int | None = None,
                K_prime: int | None = None, max_condition: float = 1e4) -> PopulationSpec:
    """Random valid spec with strictly positive transition entries.

    Degrees are uniform on [0.2, 1]; every community gets at least one node.
    Draws whose aggregated transition matrix has ``|sigma_1 / sigma_K|`` above
    ``max_condition`` are rejected: near-singular draws make the population
    eigenvectors ill-conditioned, and tight tolerances then measure rounding.
    """
    rng = np.random.default_rng(seed)
    K_prime = K if K_prime is None else K_prime
    m = max(n // 2, K_prime) if m is None else m
    if n < K or m < K_prime:
        raise DomainError("too few nodes for the requested communities")

    def labels(size, k):
        lab = np.concatenate([np.arange(1, k + 1), rng.integers(1, k + 1, size - k)])
        return rng.permutation(lab)

    for _ in range(1000):
        E = rng.uniform(0.05, 1.0, (K, K))
        E = (E + E.T) / 2
        E[np.diag_indices(K)] = rng.uniform(0.5, 1.0, K)
        Fs = [rng.uniform(0.05, 1.0, (K, K_prime)) for _ in range(Q)]
        spec = PopulationSpec(
            rng.uniform(0.2, 1.0, n), rng.uniform(0.2, 1.0, m), labels(n, K), labels(m, K_prime), E, Fs
        )
        if sbar_condition(spec) <= max_condition:
            return spec
    raise NumericError(f"no draw with condition <= {max_condition:g} in 1000 attempts")


def _membership_factors(weights, labels, K):
    # Theta (orthonormal columns) and the diagonal of Psi for one side
    norms = np.sqrt(np.bincount(labels - 1, weights=weights**2, minlength=K))
    if np.any(norms == 0):
        raise DomainError("a community has zero total degree weight")
    Theta = np.zeros((len(weights), K))
    Theta[np.arange(len(weights)), labels - 1] = weights / norms[labels - 1]
    return Theta, norms / np.linalg.norm(weights), norms


def population_means(spec: PopulationSpec, zero_diagonal: bool = True, check: bool = True):
    """Expected primary adjacency and expected bipartite adjacencies.

    The primary mean carries a zero diagonal by default (the expectation of
    a loop-free adjacency); ``zero_diagonal=False`` keeps the ``theta_i^2 E``
    terms of the factored model.
    """
    t, d = spec.theta, spec.delta
    lt, ls = spec.labels_t - 1, spec.labels_s - 1
    omega0 = np.outer(t, t) * spec.E[np.ix_(lt, lt)]
    omegas = [np.outer(t, d) * F[np.ix_(lt, ls)] for F in spec.Fs]
    if check:
        Th, psi_t, _ = _membership_factors(t, spec.labels_t, spec.K)
        Td, psi_d, _ = _membership_factors(d, spec.labels_s, spec.K_prime) if spec.Fs else (None, None, None)
        nt, nd = np.linalg.norm(t), np.linalg.norm(d)
        S0 = psi_t[:, None] * spec.E * psi_t[None, :]
        dev = np.abs(nt**2 * Th @ S0 @ Th.T - omega0).max()
        for F, om in zip(spec.Fs, omegas):
            Sq = psi_t[:, None] * F * psi_d[None, :]
            dev = max(dev, np.abs(nt * nd * Th @ Sq @ Td.T - om).max())
        if dev > 1e-12:
            raise NumericError(f"factored and entrywise means disagree by {dev:.3e}")
    if zero_diagonal:
        np.fill_diagonal(omega0, 0.0)
    return omega0, omegas


@dataclass
class PopulationDecomposition:
    omega_m: np.ndarray
    sbar: np.ndarray
    theta_memb: np.ndarray
    delta_memb: np.ndarray
    psi_theta: np.ndarray
    psi_delta: np.ndarray
    J: np.ndarray
    sigma: np.ndarray
    U: np.ndarray
    lambdas: np.ndarray
    labels: np.ndarray
    theta: np.ndarray
    reconstruction_error: float
    diagonal_discrepancy: float
    rank_deficient: bool


def _sbar(spec: PopulationSpec, psi_t, psi_d) -> np.ndarray:
    t, d = spec.theta, spec.delta
    S0 = psi_t[:, None] * spec.E * psi_t[None, :]
    sbar = (t @ t) / (d @ d) * S0 @ S0.T
    for F in spec.Fs:
        Sq = psi_t[:, None] * F * psi_d[None, :]
        sbar = sbar + Sq @ Sq.T
    return (sbar + sbar.T) / 2


def sbar_condition(spec: PopulationSpec) -> float:
    """``|sigma_1 / sigma_K|`` of the aggregated transition matrix (inf if singular)."""
    _, psi_t, _ = _membership_factors(spec.theta, spec.labels_t, spec.K)
    _, psi_d, _ = _membership_factors(spec.delta, spec.labels_s, int(spec.labels_s.max()))
    w = np.abs(np.linalg.eigvalsh(_sbar(spec, psi_t, psi_d)))
    return float(w.max() / w.min()) if w.min() > 0 else math.inf


def population_aggregate(spec: PopulationSpec) -> PopulationDecomposition:
    t, d = spec.theta, spec.delta
    K = spec.K
    Th, psi_t, _ = _membership_factors(t, spec.labels_t, K)
    Td, psi_d, _ = _membership_factors(d, spec.labels_s, int(spec.labels_s.max()))
    nt2, nd2 = t @ t, d @ d

    sbar = _sbar(spec, psi_t, psi_d)
    factored = nt2 * nd2 * Th @ sbar @ Th.T

    omega0, omegas = population_means(spec, zero_diagonal=False)
    gram = aggregate(omega0, omegas)
    scale = max(np.linalg.norm(gram), np.finfo(float).tiny)
    recon = np.linalg.norm(gram - factored) / scale
    if recon > 1e-10:
        raise NumericError(f"Gram-sum and factored aggregates differ (rel. Frobenius {recon:.3e})")

    omega0_zd = omega0.copy()
    np.fill_diagonal(omega0_zd, 0.0)
    diag_disc = np.linalg.norm(aggregate(omega0_zd, omegas) - gram) / scale

    sigma, J = np.linalg.eigh(sbar)
    order = np.argsort(-np.abs(sigma), kind="stable")
    sigma, J = sigma[order], J[:, order]
    if J[:, 0].sum() < 0:
        J[:, 0] *= -1
    rank_def = bool(np.abs(sigma).min() <= 1e-12 * max(np.abs(sigma).max(), np.finfo(float).tiny))
    if rank_def:
        logger.warning("aggregated transition matrix has fewer than K=%d nonzero eigenvalues", K)
    return PopulationDecomposition(
        omega_m=gram, sbar=sbar, theta_memb=Th, delta_memb=Td,
        psi_theta=np.diag(psi_t), psi_delta=np.diag(psi_d), J=J, sigma=sigma,
        U=Th @ J, lambdas=nt2 * nd2 * sigma, labels=spec.labels_t.copy(), theta=t.copy(),
        reconstruction_error=float(recon), diagonal_discrepancy=float(diag_disc),
        rank_deficient=rank_def,
    )


def _eig_desc(M):
    w, V = np.linalg.eigh(M)
    order = np.argsort(-np.abs(w), kind="stable")
    return w[order], V[:, order]


def _multiplicity_groups(values, tol):
    groups, cur = [], [0]
    for i in range(1, len(values)):
        if abs(values[i] - values[cur[-1]]) < tol:
            cur.append(i)
        else:
            groups.append(cur)
            cur = [i]
    groups.append(cur)
    return groups


def check_proposition1(decomp: PopulationDecomposition, tol: float = 1e-9) -> dict:
    """Compare a direct eigendecomposition of the population aggregate with the closed forms.

    Clauses: ``eigenvalues`` (leading K match the scaled eigenvalues of the
    small matrix, the rest vanish), ``rows`` (eigenvector rows equal
    ``theta_i / ||theta^(l_i)|| * J[l_i]``, via subspace distance inside
    eigenvalue clusters), ``row_norms``.
    """
    K = decomp.J.shape[0]
    w, V = _eig_desc(decomp.omega_m)
    lam1 = max(abs(w[0]), np.finfo(float).tiny)
    dev_a = np.abs(w[:K] - decomp.lambdas).max() / lam1
    if len(w) > K:
        dev_a = max(dev_a, np.abs(w[K:]).max() / lam1)

    nonzero = np.abs(decomp.lambdas) > 1e-12 * lam1
    dev_b = 0.0
    used_subspace = False
    for grp in _multiplicity_groups(decomp.lambdas, 1e-8 * lam1):
        idx = [i for i in grp if nonzero[i]]
        if not idx:
            continue
        Vd, Ut = V[:, idx], decomp.U[:, idx]
        if len(idx) == 1:
            s = np.sign(Vd[:, 0] @ Ut[:, 0]) or 1.0
            dev_b = max(dev_b, np.abs(s * Vd[:, 0] - Ut[:, 0]).max())
        else:
            used_subspace = True
            dev_b = max(dev_b, np.linalg.norm(Vd @ Vd.T - Ut @ Ut.T, 2))

    lab = decomp.labels - 1
    comm_norm = np.sqrt(np.bincount(lab, weights=decomp.theta**2, minlength=K))
    expected = decomp.theta / comm_norm[lab]
    cols = np.flatnonzero(nonzero)
    dev_c = np.abs(np.linalg.norm(V[:, cols], axis=1) - expected).max() if len(cols) == K else float("nan")

    clauses = {
        "eigenvalues": {"max_deviation": float(dev_a), "passed": bool(dev_a <= tol)},
        "rows": {"max_deviation": float(dev_b), "passed": bool(dev_b <= tol), "subspace": used_subspace},
        "row_norms": {
            "max_deviation": float(dev_c),
            # clause undefined when the small matrix is rank deficient
            "passed": bool(dev_c <= tol) if not math.isnan(dev_c) else True,
        },
    }
    return {
        "clauses": clauses,
        "passed": all(c["passed"] for c in clauses.values()),
        "rank_deficient": decomp.rank_deficient,
        "tolerance": tol,
    }


def population_ratio(decomp_or_spec, T_n: float = math.inf) -> np.ndarray:
    """Ratio matrix of the population aggregate's leading eigenvectors (unclamped by default)."""
    decomp = decomp_or_spec if isinstance(decomp_or_spec, PopulationDecomposition) else population_aggregate(decomp_or_spec)
    K = decomp.J.shape[0]
    eig = top_k_eigen(decomp.omega_m, K, check=False)
    return score_ratio(eig, T_n).values


def check_separation(spec: PopulationSpec, tol: float = 1e-9) -> dict:
    """Within-community spread and minimum cross-community distance of population ratio rows."""
    if spec.K < 2:
        raise DomainError("separation needs K >= 2")
    R = population_ratio(spec)
    lab = spec.labels_t
    spread = 0.0
    for k in range(1, spec.K + 1):
        rows = R[lab == k]
        if len(rows) > 1:
            spread = max(spread, pdist(rows).max())
    cross = math.inf
    for k in range(1, spec.K + 1):
        for j in range(k + 1, spec.K + 1):
            cross = min(cross, cdist(R[lab == k], R[lab == j]).min())
    return {
        "within_spread": float(spread),
        "cross_min": float(cross),
        "passed": bool(spread <= tol and cross >= 2 - tol),
    }


def _sv_extremes(F):
    s = np.linalg.svd(F, compute_uv=False)
    return s.min(), s.max()


def _eig_extremes(E):
    w = np.abs(np.linalg.eigvalsh(np.asarray(E, dtype=float)))
    return w.min(), w.max()


def snr_primary(E) -> float:
    """Smallest squared |eigenvalue| over the largest |eigenvalue|."""
    lo, hi = _eig_extremes(E)
    if hi == 0:
        raise DomainError("transition matrix is zero")
    return float(lo**2 / hi)


def snr_basic(E, Fs=()) -> float:
    lo, hi = _eig_extremes(E)
    num, den = lo**2, hi
    for F in Fs:
        smin, smax = _sv_extremes(np.atleast_2d(F))
        num += smin**2
        den = max(den, smax)
    if den == 0:
        raise DomainError("all transition matrices are zero")
    return float(num / den)


def eigengap_ratio(values, K: int) -> float:
    """``1 - lambda_{K+1} / lambda_K`` from absolute-descending eigenvalues (1-based K)."""
    values = np.asarray(values, dtype=float)
    if K < 1 or len(values) < K + 1:
        raise DomainError(f"need at least K+1={K + 1} eigenvalues")
    if values[K - 1] == 0:
        raise DomainError("K-th eigenvalue is zero")
    return float(1 - values[K] / values[K - 1])


def degree_complexity(spec: PopulationSpec) -> float:
    """``max(theta_max, delta_max) * max(|theta|_1, |delta|_1)``."""
    t, d = spec.theta, spec.delta
    return float(max(t.max(), d.max()) * max(t.sum(), d.sum()))


def _largest_signal(spec: PopulationSpec) -> float:
    sig = _eig_extremes(spec.E)[1]
    for F in spec.Fs:
        sig = max(sig, _sv_extremes(F)[1])
    return float(sig)


def assumption2_check(spec: PopulationSpec) -> dict:
    """Largest transition signal versus ``sqrt(log(n) Z) / (|theta| |delta|)``."""
    n = len(spec.theta)
    threshold = math.sqrt(math.log(n) * degree_complexity(spec)) / (
        np.linalg.norm(spec.theta) * np.linalg.norm(spec.delta)
    )
    signal = _largest_signal(spec)
    return {"signal": signal, "threshold": float(threshold), "satisfied": bool(signal > threshold)}


def deviation_check(a, bs, spec: PopulationSpec) -> dict:
    """Operator-norm deviation of the sampled aggregate from its population counterpart.

    Returns the deviation, the right-hand side
    ``|theta| |delta| sqrt(log(n) Z) * max(sigma_max(F_q), lambda_max(E))``
    and their ratio.
    """
    M = aggregate(a, bs)
    omega0, omegas = population_means(spec, zero_diagonal=True, check=False)
    omega_m = aggregate(omega0, omegas)
    if M.shape != omega_m.shape:
        raise DomainError("sample and spec have different sizes")
    D = M - omega_m
    lhs = float(np.abs(np.linalg.eigvalsh(D)).max()) if D.size else 0.0
    n = len(spec.theta)
    rhs = float(
        np.linalg.norm(spec.theta) * np.linalg.norm(spec.delta)
        * math.sqrt(math.log(n) * degree_complexity(spec)) * _largest_signal(spec)
    )
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return {"lhs": lhs, "rhs": rhs, "ratio": ratio}


def deviation_study(spec: PopulationSpec, draws: int = 20, seed: int = 0) -> dict:
    """Ratio statistics over independent draws from ``spec``."""
    from .genmodel import sample_bipartite, sample_symmetric, substream

    omega0, omegas = population_means(spec, zero_diagonal=True, check=False)
    ratios = []
    for r in range(draws):
        a = sample_symmetric(omega0, substream(seed, r, 0))
        bs = [sample_bipartite(om, substream(seed, r, q + 1)) for q, om in enumerate(omegas)]
        ratios.append(deviation_check(a, bs, spec)["ratio"])
    return {"max": float(np.max(ratios)), "mean": float(np.mean(ratios)), "ratios": ratios}
