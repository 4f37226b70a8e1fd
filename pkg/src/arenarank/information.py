"""Fisher information of the Bradley-Terry likelihood and the total-variance
objective ``tr[I(theta)^-1] = alpha^-2 tr[L(w)^+]``.

Also holds the threshold-breakpoint analysis: the change of
``phi(h) = tr[L(w(h))^+]`` when the proximity threshold ``h`` crosses a pairwise
rating gap, split into a benefit term (new pairs) and a cost term (budget
spread thinner over the pairs already present).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.special import expit, log_expit

from .core import ComparisonMatrices, RatingVector, same_roster
from .exceptions import DisconnectedBelowBreakpoint, EmptyProximitySet, InputError, RosterMismatch


@dataclass(frozen=True, eq=False)
class InformationSummary:
    fim: np.ndarray
    laplacian: np.ndarray
    connected: bool
    trace_pinv: float
    null_dim: int
    alpha: float

    @property
    def trace_inv_fim(self) -> float:
        """``tr[I^-1]`` in Elo^2, or +inf when ratings are not identifiable."""
        if not self.connected:
            return float("inf")
        return self.trace_pinv / self.alpha**2


def pair_variance(scores, alpha: float) -> np.ndarray:
    """f_ij = p_ij (1 - p_ij) for every ordered pair."""
    u = np.asarray(scores, dtype=float)
    p = expit(alpha * (u[:, None] - u[None, :]))
    return p * (1.0 - p)


def laplacian(weights) -> np.ndarray:
    """Weighted graph Laplacian of a symmetric weight matrix (diagonal ignored)."""
    w = np.array(weights, dtype=float)
    np.fill_diagonal(w, 0.0)
    return np.diag(w.sum(axis=1)) - w


def spectrum_pinv_trace(lap) -> tuple[float, int]:
    """(tr[L^+], null dimension) from a full symmetric eigendecomposition."""
    lap = np.asarray(lap, dtype=float)
    n = lap.shape[0]
    if n == 0:
        return 0.0, 0
    evals = np.linalg.eigvalsh(lap)
    lam_max = max(float(evals[-1]), 0.0)
    cutoff = n * np.finfo(float).eps * lam_max
    live = evals > cutoff
    if lam_max == 0.0:
        return 0.0, n
    return float(np.sum(1.0 / evals[live])), int(n - live.sum())


def pinv_psd(lap) -> np.ndarray:
    lap = np.asarray(lap, dtype=float)
    n = lap.shape[0]
    evals, evecs = np.linalg.eigh(lap)
    lam_max = max(float(evals[-1]), 0.0) if n else 0.0
    live = evals > n * np.finfo(float).eps * lam_max if lam_max > 0 else np.zeros(n, bool)
    inv = np.zeros_like(evals)
    inv[live] = 1.0 / evals[live]
    return (evecs * inv) @ evecs.T


def _per_match_fim(scores, counts, alpha) -> np.ndarray:
    """Sum of the single-match information blocks, pair by pair."""
    u = np.asarray(scores, dtype=float)
    n = len(u)
    fim = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            c = counts[i, j]
            if c == 0:
                continue
            p = 1.0 / (1.0 + np.exp(-alpha * (u[i] - u[j])))
            block = c * alpha**2 * p * (1.0 - p)
            fim[i, i] += block
            fim[j, j] += block
            fim[i, j] -= block
            fim[j, i] -= block
    return fim


def _is_connected(weights) -> bool:
    n = weights.shape[0]
    if n <= 1:
        return n == 1
    k, _ = connected_components(np.asarray(weights) > 0, directed=False)
    return k == 1


def fisher_matrix(theta: RatingVector, matrices: ComparisonMatrices) -> InformationSummary:
    """Expected information at ``theta`` for the battle counts in ``matrices``."""
    if not same_roster(theta.roster, matrices.roster):
        raise RosterMismatch("theta and matrices must share one roster order")
    counts = matrices.counts
    fim = _per_match_fim(theta.scores, counts, theta.alpha)
    weights = counts * pair_variance(theta.scores, theta.alpha)
    lap = laplacian(weights)
    trace, null_dim = spectrum_pinv_trace(lap)
    return InformationSummary(
        fim=fim,
        laplacian=lap,
        connected=_is_connected(counts),
        trace_pinv=trace,
        null_dim=null_dim,
        alpha=theta.alpha,
    )


def trace_inv_fim(scores, counts, alpha) -> float:
    """Fast path used by the sweeps: alpha^-2 tr[L^+], +inf if disconnected."""
    counts = np.asarray(counts, dtype=float)
    if not _is_connected(counts):
        return float("inf")
    trace, _ = spectrum_pinv_trace(laplacian(counts * pair_variance(scores, alpha)))
    return trace / alpha**2


def expected_neg_log_likelihood(scores, ref_scores, counts, alpha) -> float:
    """-E[l(scores)] with each outcome replaced by its probability under ``ref_scores``."""
    u = alpha * np.asarray(scores, dtype=float)
    r = alpha * np.asarray(ref_scores, dtype=float)
    total = 0.0
    n = len(u)
    for i in range(n):
        for j in range(i + 1, n):
            c = counts[i, j]
            if c == 0:
                continue
            p = 1.0 / (1.0 + np.exp(-(r[i] - r[j])))
            d = u[i] - u[j]
            total -= c * (p * log_expit(d) + (1.0 - p) * log_expit(-d))
    return float(total)


def fim_vs_hessian_check(theta: RatingVector, matrices: ComparisonMatrices, step: float = 1e-3) -> float:
    """Largest deviation between a central-difference Hessian of the expected
    negative log-likelihood and the analytic FIM, relative to the FIM's largest
    entry. Zero battles give 0.
    """
    if not step > 0:
        raise InputError("step must be positive")
    if not same_roster(theta.roster, matrices.roster):
        raise RosterMismatch("theta and matrices must share one roster order")
    u0 = theta.scores
    n = len(u0)
    counts = matrices.counts

    def f(u):
        return expected_neg_log_likelihood(u, u0, counts, theta.alpha)

    hess = np.zeros((n, n))
    eye = np.eye(n) * step
    for i in range(n):
        for j in range(i, n):
            if i == j:
                val = (f(u0 + eye[i]) - 2 * f(u0) + f(u0 - eye[i])) / step**2
            else:
                val = (
                    f(u0 + eye[i] + eye[j])
                    - f(u0 + eye[i] - eye[j])
                    - f(u0 - eye[i] + eye[j])
                    + f(u0 - eye[i] - eye[j])
                ) / (4 * step**2)
            hess[i, j] = hess[j, i] = val
    fim = fisher_matrix(theta, matrices).fim
    scale = np.max(np.abs(fim))
    if scale == 0:
        return float(np.max(np.abs(hess))) if hess.size else 0.0
    return float(np.max(np.abs(hess - fim)) / scale)


# --- threshold analysis ----------------------------------------------------

def proximity_pairs(scores, h: float) -> np.ndarray:
    """Boolean upper-triangular mask of pairs with |u_i - u_j| < h."""
    u = np.asarray(scores, dtype=float)
    gaps = np.abs(u[:, None] - u[None, :])
    return np.triu(gaps < h, k=1)


def ideal_allocation(theta: RatingVector, h: float, budget: float) -> np.ndarray:
    """Symmetric matrix spreading ``budget`` evenly over all pairs closer than ``h``."""
    if not h > 0 or not budget > 0:
        raise InputError("h and budget must be positive")
    mask = proximity_pairs(theta.scores, h)
    n_pairs = int(mask.sum())
    if n_pairs == 0:
        raise EmptyProximitySet(f"no pair of models lies within h={h:g}")
    alloc = np.where(mask, budget / n_pairs, 0.0)
    return alloc + alloc.T


def phi(theta: RatingVector, h: float, budget: float) -> float:
    """tr[L(w(h))^+] under the ideal allocation; +inf when disconnected or empty."""
    try:
        alloc = ideal_allocation(theta, h, budget)
    except EmptyProximitySet:
        return float("inf")
    if not _is_connected(alloc):
        return float("inf")
    weights = alloc * pair_variance(theta.scores, theta.alpha)
    return spectrum_pinv_trace(laplacian(weights))[0]


def breakpoints(scores, rtol: float = 1e-9) -> np.ndarray:
    """Distinct pairwise gaps, ascending; gaps equal to within ``rtol`` merge."""
    u = np.asarray(scores, dtype=float)
    gaps = np.sort(np.abs(u[:, None] - u[None, :])[np.triu_indices(len(u), k=1)])
    gaps = gaps[gaps > 0]
    out: list[float] = []
    for g in gaps:
        if not out or g - out[-1] > rtol * max(abs(g), 1.0):
            out.append(float(g))
    return np.array(out)


@dataclass(frozen=True)
class DeltaPhiEntry:
    breakpoint: float
    benefit: float
    cost: float
    approx_delta_phi: float
    actual_delta_phi: float
    phi_below: float
    phi_above: float
    pairs_added: int


@dataclass(frozen=True)
class DeltaPhiReport:
    entries: list[DeltaPhiEntry]
    skipped: list[float] = field(default_factory=list)  # disconnected below

    @property
    def breakpoints(self):
        return [e.breakpoint for e in self.entries]


def _pair_sets(scores, hb, rtol=1e-9):
    u = np.asarray(scores, dtype=float)
    gaps = np.abs(u[:, None] - u[None, :])
    upper = np.triu(np.ones_like(gaps, dtype=bool), k=1)
    tol = rtol * max(abs(hb), 1.0)
    on = upper & (np.abs(gaps - hb) <= tol)
    below = upper & (gaps < hb - tol)
    return below, on


def delta_phi_decomposition(theta: RatingVector, budget: float, t: int) -> DeltaPhiEntry:
    """First-order benefit/cost split of the jump in phi at the t-th breakpoint."""
    if not budget > 0:
        raise InputError("budget must be positive")
    bps = breakpoints(theta.scores)
    if not 0 <= t < len(bps):
        raise IndexError(f"breakpoint index {t} out of range (0..{len(bps) - 1})")
    hb = bps[t]
    below, added = _pair_sets(theta.scores, hb)
    above = below | added
    n_minus, n_plus, m_t = int(below.sum()), int(above.sum()), int(added.sum())
    f = pair_variance(theta.scores, theta.alpha)

    def lap_of(mask, n_pairs):
        alloc = np.where(mask, budget / n_pairs, 0.0)
        alloc = alloc + alloc.T
        return alloc, laplacian(alloc * f)

    alloc_plus, lap_plus = lap_of(above, n_plus)
    phi_above = spectrum_pinv_trace(lap_plus)[0] if _is_connected(alloc_plus) else float("inf")
    if n_minus == 0:
        raise DisconnectedBelowBreakpoint(hb, phi_above)
    alloc_minus, lap_minus = lap_of(below, n_minus)
    if not _is_connected(alloc_minus):
        raise DisconnectedBelowBreakpoint(hb, phi_above)
    phi_below = spectrum_pinv_trace(lap_minus)[0]

    lp = pinv_psd(lap_minus)
    lp2 = lp @ lp
    d2 = np.diag(lp2)
    # |d phi / d w_ij| = (e_i - e_j)^T (L^+)^2 (e_i - e_j)
    sens = d2[:, None] + d2[None, :] - 2 * lp2
    benefit = float(np.sum(sens[added] * budget * f[added] / n_plus))
    cost = float(np.sum(sens[below] * budget * f[below] * m_t / (n_minus * n_plus)))
    return DeltaPhiEntry(
        breakpoint=float(hb),
        benefit=benefit,
        cost=cost,
        approx_delta_phi=-benefit + cost,
        actual_delta_phi=phi_above - phi_below,
        phi_below=phi_below,
        phi_above=phi_above,
        pairs_added=m_t,
    )


def delta_phi_report(theta: RatingVector, budget: float) -> DeltaPhiReport:
    entries, skipped = [], []
    for t, hb in enumerate(breakpoints(theta.scores)):
        try:
            entries.append(delta_phi_decomposition(theta, budget, t))
        except DisconnectedBelowBreakpoint:
            skipped.append(float(hb))
    return DeltaPhiReport(entries, skipped)


def phi_gradient(weights) -> np.ndarray:
    """d tr[L(w)^+] / d w_ij for every pair (connected graphs)."""
    lp = pinv_psd(laplacian(weights))
    lp2 = lp @ lp
    d2 = np.diag(lp2)
    return -(d2[:, None] + d2[None, :] - 2 * lp2)


def optimal_threshold(theta: RatingVector, budget: float, candidates) -> float:
    """Candidate ``h`` with the smallest ideal-allocation total variance."""
    values = [phi(theta, h, budget) for h in candidates]
    return float(candidates[int(np.argmin(values))])
