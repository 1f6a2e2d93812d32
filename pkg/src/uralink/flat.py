"""Flat-fading receiver pieces: closed-form preamble estimation with the
identity pilot codebook, multi-user LMMSE symbol separation for the coding
part, the constellation-spread statistic rho, and offset refinement with
channel re-estimation."""

from __future__ import annotations

import numpy as np

from .config import SystemConfig
from .channel import phase_rotation
from .graph import collision_threshold, detect_collisions, derot_factor, retrieve_channel


def lmmse_preamble(y: np.ndarray, cfg: SystemConfig, noise_variance: float | None = None) -> np.ndarray:
    """X_hat = Y / (sigma_n^2 + 1); rows are per-pilot channel estimates."""
    if cfg.codebook_kind != "identity":
        raise ValueError("closed-form preamble estimation needs the identity codebook")
    sigma2 = cfg.noise_variance if noise_variance is None else noise_variance
    return np.asarray(y) / (sigma2 + 1.0)


def detect_flat_support(x_hat: np.ndarray, cfg: SystemConfig, noise_variance: float | None = None) -> np.ndarray:
    """Rows with energy above support_scale times the noise-only row mean
    M * sigma^2 / (1 + sigma^2)^2. Returns 1-based codeword values."""
    sigma2 = cfg.noise_variance if noise_variance is None else noise_variance
    v = cfg.support_scale * cfg.n_antennas * sigma2 / (1.0 + sigma2) ** 2
    energy = np.sum(np.abs(x_hat) ** 2, axis=1)
    if energy.size:
        # relative floor so noise-free runs ignore numerically-zero rows
        v = max(v, 1e-10 * float(energy.max()))
    return np.flatnonzero(energy > v) + 1


def flat_error_variance(noise_variance: float) -> float:
    """Per-entry estimator error variance of Y/(1+sigma^2) on an active row."""
    return noise_variance / (1.0 + noise_variance)


def lmmse_symbols(y_c: np.ndarray, h_hat: np.ndarray, noise_variance: float):
    """Separate users in the coding part.

    y_c: L_c x M received, h_hat: K x M per-user channels (rows).
    Returns (s_hat K x L_c, gains K x K, noise_var per user K).
    Ŝ = H* (Hᵀ H* + sigma^2 I_M)^-1 Y_cᵀ; gains[k, j] is user j's leakage
    into output row k, and gains[k, k] the useful coefficient.
    """
    h_hat = np.atleast_2d(h_hat)
    m_dim = h_hat.shape[1]
    gram = h_hat.T @ np.conj(h_hat) + noise_variance * np.eye(m_dim)
    gram[np.diag_indices_from(gram)] += 1e-9
    w = np.conj(h_hat) @ np.linalg.inv(gram)        # K x M
    s_hat = w @ y_c.T
    gains = w @ h_hat.T                              # K x K
    noise_out = noise_variance * np.sum(np.abs(w) ** 2, axis=1)
    return s_hat, gains, noise_out


def effective_llr_stats(gains: np.ndarray, noise_out: np.ndarray):
    """Per-user (useful gain, interference-plus-noise variance) from the
    LMMSE gain matrix; residual multiuser leakage is treated as Gaussian."""
    mu = np.diag(gains).copy()
    leak = np.sum(np.abs(gains) ** 2, axis=1) - np.abs(mu) ** 2
    return mu, leak + noise_out


def payload_rotation(tau: int, eps: float, cfg: SystemConfig) -> np.ndarray:
    """Rotation hypothesis for every coding-part position, symbol-major:
    position l sits on subcarrier ((l-1) mod S_c)+1 of OFDM symbol
    T_p + ceil(l/S_c)."""
    parts = [
        phase_rotation(tau, eps, cfg.preamble_slots + t_c, cfg, subcarriers=cfg.coding_sub)
        for t_c in range(1, cfg.coding_slots + 1)
    ]
    return np.concatenate(parts)


def residual_rotation_rho(seq: np.ndarray) -> complex:
    """rho = sum of symbols with positive real part minus sum of the rest;
    its magnitude peaks when the residual rotation is fully compensated."""
    seq = np.asarray(seq)
    pos = seq[seq.real > 0]
    neg = seq[seq.real < 0]
    return complex(pos.sum() - neg.sum())


def refine_offsets(candidates, s_row: np.ndarray, cfg: SystemConfig):
    """Pick the candidate (tau, eps) maximizing |rho| after derotation.

    candidates: (tau, eps, weight) triples ascending by weight; ties on
    |rho| resolve toward the lower-weight candidate.
    """
    best = None
    for tau, eps, weight in candidates:
        derot = s_row / payload_rotation(tau, eps, cfg)
        score = abs(residual_rotation_rho(derot))
        if best is None or score > best[0]:
            best = (score, tau, eps)
    return int(best[1]), float(best[2])


def reestimate_channels(users, refined_offsets, stage_blocks, cfg: SystemConfig, sigma_e2: float):
    """Re-run retrieval and SIC on fresh preamble blocks with offsets fixed.

    users: RecoveredUser list in original recovery order; refined_offsets:
    matching (tau, eps) list; stage_blocks: per-stage value->block dicts
    (pristine copies, pre-SIC). Returns the updated channel list.
    """
    blocks = [{v: b.copy() for v, b in stage.items()} for stage in stage_blocks]
    gamma_c = collision_threshold(sigma_e2, cfg.collision_test_level, 1, cfg.n_antennas)
    out = []
    for user, (tau, eps) in zip(users, refined_offsets):
        node_blocks = [blocks[t][v] for t, v in enumerate(user.path)]
        qs = [
            derot_factor(t + 1, v, tau, eps, cfg, "flat")
            for t, v in enumerate(user.path)
        ]
        flags = detect_collisions(node_blocks, qs, gamma_c)
        h_hat = retrieve_channel(node_blocks, qs, flags)
        out.append(h_hat)
        for t, (v, q, collided) in enumerate(zip(user.path, qs, flags)):
            if collided:
                blocks[t][v] = blocks[t][v] - q * h_hat
    return out
