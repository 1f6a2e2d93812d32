"""Coding-part decoding per recovered user: rotation compensation,
de-interleaving, pad removal, LDPC belief propagation, and assembly of the
final message list."""

from __future__ import annotations

import numpy as np

from .config import SystemConfig
from .encoder import PayloadEncoding, derive_interleaver
from .flat import payload_rotation
from .ldpc import bp_decode


def compensate_and_deinterleave(
    s_row: np.ndarray, tau: int, eps: float, interleaver: np.ndarray, pe: PayloadEncoding, cfg: SystemConfig
) -> np.ndarray:
    """Derotate each position, invert the user's permutation, drop padding.

    Returns the soft codeword (length n of the inner code).
    """
    derot = np.asarray(s_row) / payload_rotation(tau, eps, cfg)
    padded = np.empty(cfg.coding_len, dtype=complex)
    padded[np.asarray(interleaver)] = derot
    return padded[: pe.code.n]


def llrs(soft: np.ndarray, mu: complex, sigma_eff2: float) -> np.ndarray:
    """BPSK log-likelihood ratios log p(bit=0)/p(bit=1); bit b maps to 1-2b."""
    sigma_eff2 = max(float(sigma_eff2), 1e-30)
    return 4.0 * (np.conj(mu) * np.asarray(soft)).real / sigma_eff2


def decode_payload(soft: np.ndarray, mu: complex, sigma_eff2: float, pe: PayloadEncoding, cfg: SystemConfig):
    """(info bits, converged flag) via sum-product decoding."""
    hard, converged = bp_decode(pe.code, llrs(soft, mu, sigma_eff2), max_iter=cfg.ldpc_max_iter)
    return pe.code.extract_info(hard), converged


def decode_user_payload(
    s_row: np.ndarray, user, mu: complex, sigma_eff2: float, pe: PayloadEncoding, cfg: SystemConfig
):
    """Full per-user chain given a RecoveredUser (preamble bits fix the
    interleaver), the LMMSE output row, and its effective statistics."""
    tau = user.tau_hat if user.tau_hat is not None else 0
    interleaver = derive_interleaver(list(user.path), cfg.coding_len, cfg.interleaver_seed)
    soft = compensate_and_deinterleave(s_row, tau, user.eps_hat, interleaver, pe, cfg)
    return decode_payload(soft, mu, sigma_eff2, pe, cfg)


def assemble_messages(users, payload_results) -> set[tuple]:
    """Message list: unique [preamble bits || payload bits] for every user
    whose decoder converged; non-converged users are dropped (they count
    as misses downstream)."""
    out = set()
    for user, (bits, converged) in zip(users, payload_results):
        if converged:
            msg = np.concatenate([user.preamble_bits, bits])
            out.add(tuple(int(b) for b in msg))
    return out
