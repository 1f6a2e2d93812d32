"""Shared fixtures.

The SBL sweep fixture is session scoped because it is by far the most
expensive computation in the suite; its per-trial records feed both the
module-level estimator tests and the receiver-quality acceptance checks.
"""

import time

import numpy as np
import pytest

from uralink.analysis import bcrb_from_fim, lmmse_dense, oracle_mmse
from uralink.channel import assemble_fd_model, build_dictionary, draw_users
from uralink.config import preset
from uralink.encoder import TreeCode, build_codebook, encode_user
from uralink.metrics import noise_for_snr
from uralink.numerics import RngStream
from uralink.sbl import detect_support, sbl_single_slot

SWEEP_SEED = 20260814
SWEEP_TRIALS = {0: 8, 5: 8, 10: 50}


@pytest.fixture()
def desk_fsf():
    return preset("desk_fsf")


@pytest.fixture()
def desk_flat():
    return preset("desk_flat")


@pytest.fixture(scope="session")
def fsf_codebook():
    return build_codebook(preset("desk_fsf"))


@pytest.fixture(scope="session")
def flat_codebook():
    return build_codebook(preset("desk_flat"))


def statistical_row_priors(users, cfg):
    """Per-row prior variances of the frequency-sparse coefficient matrix.

    Each tap of each user contributes n_fft * tap_power / n_taps to its row;
    codeword collisions accumulate.
    """
    n = cfg.n_codewords
    prior = {}
    for u in users:
        d = u.enc.indices[0] - 1
        for delay in u.delays:
            row = (int(delay) + u.tau) * n + d
            prior[row] = prior.get(row, 0.0) + cfg.n_fft * cfg.tap_power / u.n_taps
    return prior


def run_sweep_trial(cfg, g, codebook, tree, stream, sigma2):
    """One desk-scale frequency-selective trial: simulate, estimate, score."""
    users = draw_users(cfg, stream)
    for u in users:
        u.enc = encode_user(u.msg_bits, cfg, tree, None)
    _, x, y = assemble_fd_model(users, codebook, 1, cfg, stream, sigma2)
    t0 = time.perf_counter()
    res = sbl_single_slot(y, g, cfg, dtype=np.complex64, tol=1e-5, x_true=x)
    sbl_seconds = time.perf_counter() - t0

    support = np.flatnonzero(np.sum(np.abs(x) ** 2, axis=1) > 0)
    priors = statistical_row_priors(users, cfg)
    prior_vec = np.array([priors[int(r)] for r in support])
    x_or, mse_or, j = oracle_mmse(g, y, support, prior_vec, sigma2)
    x_lm = lmmse_dense(g, y, cfg.n_active * cfg.n_fft / g.shape[1], sigma2)

    detected = detect_support(res, cfg)
    true_set, det_set = set(int(r) for r in support), set(int(r) for r in detected)

    return {
        "err_sbl": float(np.linalg.norm(res.x_hat - x) ** 2),
        "err_or": float(np.linalg.norm(x_or - x) ** 2),
        "err_lm": float(np.linalg.norm(x_lm - x) ** 2),
        "ref": float(np.linalg.norm(x) ** 2),
        "bcrb": bcrb_from_fim(j, cfg.n_antennas),
        "mse_or_analytic": mse_or,
        "converged": res.converged,
        "n_iters": res.n_iters,
        "tp": len(true_set & det_set),
        "fp": len(det_set - true_set),
        "fn": len(true_set - det_set),
        "sbl_seconds": sbl_seconds,
    }


@pytest.fixture(scope="session")
def sbl_sweep(fsf_codebook):
    """Monte Carlo sweep of the desk fsf scenario at SNR 0/5/10 dB."""
    cfg = preset("desk_fsf")
    g = build_dictionary(fsf_codebook, cfg)
    tree = TreeCode(cfg.subblock_len, cfg.parity_alloc, cfg.tree_seed)
    out = {}
    for snr, n_trials in SWEEP_TRIALS.items():
        sigma2 = noise_for_snr(cfg, snr)
        trials = []
        t0 = time.perf_counter()
        for i in range(n_trials):
            stream = RngStream(SWEEP_SEED, "sweep", snr, i)
            trials.append(run_sweep_trial(cfg, g, fsf_codebook, tree, stream, sigma2))
        out[snr] = {
            "trials": trials,
            "sigma2": sigma2,
            "elapsed": time.perf_counter() - t0,
        }
    return out


def nmse_db_from(trials, err_key):
    num = sum(t[err_key] for t in trials)
    den = sum(t["ref"] for t in trials)
    return 10.0 * np.log10(num / den)


def bcrb_db_from(trials):
    num = sum(t["bcrb"] for t in trials)
    den = sum(t["ref"] for t in trials)
    return 10.0 * np.log10(num / den)
