"""Analytical oracles and bounds: support-aware MMSE estimation and its
Bayesian Cramér-Rao bound, a dense LMMSE baseline, expected erroneous-path
counts for the tree code, decoder complexity, chi-square validity levels,
and missed-detection/false-alarm bounds."""

from __future__ import annotations

import numpy as np

from .numerics import chi2_inv


def oracle_mmse(g: np.ndarray, y: np.ndarray, support, prior_var, noise_var: float):
    """Support-aware MMSE estimate.

    X_hat restricted to the true support solves (G_O^H G_O / sigma_n^2 +
    Sigma_x^-1) X_O = G_O^H Y / sigma_n^2; off-support rows are zero.
    Returns (x_hat full-size, exact Bayesian MSE = M * Tr(J^-1), J).
    """
    support = np.asarray(support, dtype=np.int64)
    g_o = g[:, support]
    prior_var = np.broadcast_to(np.asarray(prior_var, dtype=float), support.shape)
    j = g_o.conj().T @ g_o / noise_var + np.diag(1.0 / prior_var)
    rhs = g_o.conj().T @ y / noise_var
    x_o = np.linalg.solve(j, rhs)
    x_hat = np.zeros((g.shape[1], y.shape[1]), dtype=complex)
    x_hat[support] = x_o
    j_inv_trace = float(np.trace(np.linalg.inv(j)).real)
    mse = y.shape[1] * j_inv_trace
    return x_hat, mse, j


def bcrb(g_o: np.ndarray, prior_var, noise_var: float, m_dim: int) -> float:
    """Lower bound M * Tr(J^-1) with J = G_O^H G_O / sigma_n^2 + Sigma_x^-1."""
    prior_var = np.broadcast_to(np.asarray(prior_var, dtype=float), (g_o.shape[1],))
    j = g_o.conj().T @ g_o / noise_var + np.diag(1.0 / prior_var)
    return m_dim * float(np.trace(np.linalg.inv(j)).real)


def bcrb_from_fim(j: np.ndarray, m_dim: int) -> float:
    return m_dim * float(np.trace(np.linalg.inv(j)).real)


def lmmse_dense(g: np.ndarray, y: np.ndarray, prior_var: float, noise_var: float) -> np.ndarray:
    """Support-blind LMMSE baseline: every row gets the same scalar prior."""
    s_dim = g.shape[0]
    cov = prior_var * (g @ g.conj().T) + noise_var * np.eye(s_dim)
    return prior_var * (g.conj().T @ np.linalg.solve(cov, y))


def expected_erroneous_paths(k: int, parity_alloc, stage_j: int) -> float:
    """Expected surviving wrong paths at a stage:
    sum_{q=2}^{j} K^(j-q) (K-1) prod_{l=q}^{j} 2^(-p_l)."""
    if k <= 1:
        return 0.0
    total = 0.0
    for q in range(2, stage_j + 1):
        prod = 1.0
        for l in range(q, stage_j + 1):
            prod *= 2.0 ** (-parity_alloc[l - 1])
        total += k ** (stage_j - q) * (k - 1) * prod
    return total


def tree_complexity(k: int, parity_alloc, t_p: int) -> float:
    """Expected parity-check evaluations per root:
    (T_p - 1) K + sum_{j=2}^{T_p-1} E[L^(j)] K."""
    total = (t_p - 1) * k
    for j in range(2, t_p):
        total += expected_erroneous_paths(k, parity_alloc, j) * k
    return float(total)


def solve_validity_level(ratio: float, dof: int, kind: str = "valid", tol: float = 1e-6) -> float:
    """Smallest test level making the chi-square quantile inequality hold.

    kind "valid": ratio < Q(d/2) / Q(1 - d/2)  (false-invalidation level);
    kind "invalid": ratio < Q(d/2) / Q(1 - d/4) (false-validation level);
    Q is the inverse chi-square CDF at the given dof. The right side is
    increasing in d, so bisection applies.
    """
    denom_p = 0.5 if kind == "valid" else 0.25

    def bound(d: float) -> float:
        return chi2_inv(dof, d / 2.0) / chi2_inv(dof, 1.0 - denom_p * d)

    lo, hi = 1e-12, 1.0 - 1e-12
    if bound(hi) <= ratio:
        return 1.0
    if bound(lo) > ratio:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bound(mid) > ratio:
            hi = mid
        else:
            lo = mid
    return hi


def md_fa_bounds(k_a: int, t_p: int, delta: float, delta_prime: float, parity_alloc):
    """Markov bounds on the path miss and false-alarm probabilities:
    E[L_md] = delta^C K_a and E[L_fa] = delta'^C E[L^(T_p)], C = C(T_p, 2)."""
    c = t_p * (t_p - 1) // 2
    p_md = delta**c * k_a
    p_fa = delta_prime**c * expected_erroneous_paths(k_a, parity_alloc, t_p)
    return p_md, p_fa
