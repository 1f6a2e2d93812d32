"""Monte Carlo orchestration: per-trial pipelines for the flat and
frequency-selective scenarios, aggregation, and CSV/JSON emission.

Scenario names: flat_sync, flat_async, fsf_sync, fsf_async. Flat scenarios
run the full chain through payload decoding; fsf scenarios stop after
collision resolution and score message recovery at the preamble level.
Ground-truth observations come from the exact time-domain simulation by
default; channel_model="fd" switches to the diagonal-rotation model.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict

import numpy as np

from . import channel as ch
from . import flat as fl
from . import graph as gr
from . import payload as pl
from .analysis import bcrb_from_fim
from .config import SystemConfig, preset, validate as validate_config
from .encoder import TreeCode, build_codebook, build_payload_encoding, encode_user
from .metrics import (
    MetricsReport,
    RunningMean,
    detection_rates,
    expected_signal_energy_per_slot,
    nmse_db,
    noise_for_snr,
    offset_errors,
    snr_and_ebn0,
)
from .numerics import RngStream, sample_complex_gaussian
from .sbl import detect_support, run_jadce

SCENARIOS = ("flat_sync", "flat_async", "fsf_sync", "fsf_async")


def default_config(scenario: str) -> SystemConfig:
    return preset("desk_flat" if scenario.startswith("flat") else "desk_fsf")


def _check_scenario(cfg: SystemConfig, scenario: str) -> None:
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    want = "flat" if scenario.startswith("flat") else "fsf"
    if cfg.channel_kind != want:
        raise ValueError(
            f"scenario {scenario} needs channel_kind={want!r}, got {cfg.channel_kind!r}"
        )
    if want == "flat" and cfg.codebook_kind != "identity":
        raise ValueError("flat scenarios use the identity codebook")


def _flat_truth_rows(users, t: int, cfg: SystemConfig) -> np.ndarray:
    """Model-domain truth for the flat preamble slot t (N x M rows)."""
    x = np.zeros((cfg.preamble_len, cfg.n_antennas), dtype=complex)
    scale = np.sqrt(cfg.preamble_len) if cfg.identity_scaled else 1.0
    for u in users:
        d = u.enc.indices[t - 1]
        n_d = cfg.occupied[d - 1]
        p = ch.diag_gain(u.eps, t, cfg) * np.exp(2j * np.pi * u.tau * (1 - n_d) / cfg.n_fft)
        x[d - 1] += scale * p * u.gains[0]
    return x


def _fd_observe_flat(users, cfg: SystemConfig, rng, noise_variance: float):
    """Diagonal-model observation for flat mode, preamble plus coding part."""
    pre = []
    for t in range(1, cfg.preamble_slots + 1):
        y = _flat_truth_rows(users, t, cfg)
        if noise_variance > 0:
            y = y + sample_complex_gaussian(
                rng.child("pre-noise", t), y.shape, noise_variance
            )
        pre.append(y)
    s_c = len(cfg.coding_sub)
    y_c = np.zeros((cfg.coding_len, cfg.n_antennas), dtype=complex)
    for u in users:
        sym = np.asarray(u.enc.payload_symbols, dtype=complex)
        rot = np.concatenate(
            [
                ch.phase_rotation(
                    u.tau, u.eps, cfg.preamble_slots + t_c, cfg, subcarriers=cfg.coding_sub
                )
                for t_c in range(1, cfg.coding_slots + 1)
            ]
        )
        rot = rot * abs(ch.attenuation(u.eps, cfg))
        y_c += (rot * sym)[:, None] * u.gains[0][None, :]
    if noise_variance > 0:
        y_c = y_c + sample_complex_gaussian(
            rng.child("pay-noise"), y_c.shape, noise_variance
        )
    return pre, y_c


def _path_level_eps(paths, true_paths) -> int:
    """Erroneous paths: symmetric mismatch count between decoded and true."""
    decoded = set(map(tuple, paths))
    truth = set(map(tuple, true_paths))
    return len(decoded - truth) + len(truth - decoded)


def run_flat_trial(cfg: SystemConfig, sync: bool, stream: RngStream, shared, noise_variance: float, channel_model: str):
    tree, codebook, pe = shared
    users = ch.draw_users(cfg, stream.child("users"), sync=sync)
    for u in users:
        u.enc = encode_user(u.msg_bits, cfg, tree, pe)

    if channel_model == "td":
        obs = ch.observe(
            users, codebook, cfg, stream.child("chan"), include_payload=True,
            noise_variance=noise_variance,
        )
        pre_slots, y_c = obs.preamble, obs.coding
    else:
        pre_slots, y_c = _fd_observe_flat(users, cfg, stream.child("chan"), noise_variance)

    # preamble estimation and support detection
    x_hats = [fl.lmmse_preamble(y, cfg, noise_variance) for y in pre_slots]
    truth_x = [_flat_truth_rows(users, t + 1, cfg) for t in range(cfg.preamble_slots)]
    nmse = nmse_db(np.concatenate(x_hats), np.concatenate(truth_x))

    stage_values = [
        list(fl.detect_flat_support(x, cfg, noise_variance)) for x in x_hats
    ]
    paths, parity_evals = gr.tree_decode(stage_values, tree, cfg)
    true_paths = [tuple(u.enc.indices) for u in users]
    ep_tree = _path_level_eps(paths, true_paths)

    stages = [
        {int(v): x_hats[t][v - 1].copy() for v in stage_values[t]}
        for t in range(cfg.preamble_slots)
    ]
    pristine = [{v: b.copy() for v, b in stage.items()} for stage in stages]
    graph = gr.DecodingGraph(stages=stages, paths=list(paths), mode="flat", parity_evals=parity_evals)
    sigma_e2 = fl.flat_error_variance(noise_variance)
    recovered, k_hat = gr.run_gb_cr2(graph, cfg, sigma_e2)
    ep_gbcr2 = _path_level_eps([u.path for u in recovered], true_paths)

    # payload separation, offset refinement, re-estimation, decoding
    messages = set()
    matches = []
    if recovered:
        h_stack = np.vstack([u.h_hat for u in recovered])
        s_hat, gains, noise_out = fl.lmmse_symbols(y_c, h_stack, noise_variance)
        refined = [
            fl.refine_offsets(u.candidates, s_hat[k], cfg)
            for k, u in enumerate(recovered)
        ]
        h_updated = fl.reestimate_channels(recovered, refined, pristine, cfg, sigma_e2)
        h_stack = np.vstack(h_updated)
        s_hat, gains, noise_out = fl.lmmse_symbols(y_c, h_stack, noise_variance)
        mu, sig_eff = fl.effective_llr_stats(gains, noise_out)

        results = []
        for k, u in enumerate(recovered):
            u.tau_hat, u.eps_hat = refined[k]
            u.h_hat = h_updated[k]
            results.append(
                pl.decode_user_payload(s_hat[k], u, mu[k], sig_eff[k], pe, cfg)
            )
        messages = pl.assemble_messages(recovered, results)

        by_msg = {tuple(int(b) for b in u.msg_bits): u for u in users}
        for u_hat, (bits, converged) in zip(recovered, results):
            if not converged:
                continue
            key = tuple(int(b) for b in np.concatenate([u_hat.preamble_bits, bits]))
            if key in by_msg:
                u = by_msg[key]
                matches.append((u.tau, u_hat.tau_hat, u.eps, u_hat.eps_hat))

    p_md, p_fa = detection_rates([u.msg_bits for u in users], messages)
    tee, fee = offset_errors(matches)
    return {
        "nmse_db": nmse, "tee": tee, "fee": fee, "p_md": p_md, "p_fa": p_fa,
        "p_e": p_md + p_fa, "ep_tree": float(ep_tree), "ep_gbcr2": float(ep_gbcr2),
        "k_hat": float(k_hat),
    }


def run_fsf_trial(cfg: SystemConfig, sync: bool, stream: RngStream, shared, noise_variance: float, channel_model: str):
    tree, codebook, _ = shared
    users = ch.draw_users(cfg, stream.child("users"), sync=sync)
    for u in users:
        u.enc = encode_user(u.msg_bits, cfg, tree, None)

    g = ch.build_dictionary(codebook, cfg)
    truth_x = [
        ch.build_truth_x(users, t, cfg, codebook.n_codewords)
        for t in range(1, cfg.preamble_slots + 1)
    ]
    if channel_model == "td":
        obs = ch.observe(
            users, codebook, cfg, stream.child("chan"), include_payload=False,
            noise_variance=noise_variance,
        )
        y_slots = obs.preamble
    else:
        rng = stream.child("chan")
        y_slots = []
        for t, x in enumerate(truth_x, start=1):
            y = g @ x
            if noise_variance > 0:
                y = y + sample_complex_gaussian(rng.child("noise", t), y.shape, noise_variance)
            y_slots.append(y)

    results = run_jadce(y_slots, g, cfg, dtype=np.complex64)
    nmse = nmse_db(
        np.concatenate([r.x_hat for r in results]), np.concatenate(truth_x)
    )

    stage_blocks = []
    sigma_e2_terms = []
    for res in results:
        support = detect_support(res, cfg)
        blocks = gr.reconstruct_fd_channels(res.x_hat, support, cfg, codebook.n_codewords)
        stage_blocks.append(blocks)
        if len(support):
            g_o = g[:, support]
            j = g_o.conj().T @ g_o * res.lam + np.diag(res.gamma[support])
            sigma_e2_terms.append(bcrb_from_fim(j, 1) / len(support))
    sigma_e2 = float(np.mean(sigma_e2_terms)) if sigma_e2_terms else 1e-6

    stage_values = [sorted(blocks.keys()) for blocks in stage_blocks]
    paths, parity_evals = gr.tree_decode(stage_values, tree, cfg)
    true_paths = [tuple(u.enc.indices) for u in users]
    ep_tree = _path_level_eps(paths, true_paths)

    graph = gr.DecodingGraph(
        stages=stage_blocks, paths=list(paths), mode="fsf", parity_evals=parity_evals
    )
    recovered, k_hat = gr.run_gb_cr2(graph, cfg, sigma_e2)
    ep_gbcr2 = _path_level_eps([u.path for u in recovered], true_paths)

    # preamble-level message scoring and CFO accuracy
    true_pre = [u.enc.preamble_bits for u in users]
    messages = {tuple(int(b) for b in u.preamble_bits) for u in recovered}
    p_md, p_fa = detection_rates(true_pre, messages)
    by_pre = {tuple(int(b) for b in u.enc.preamble_bits): u for u in users}
    matches = []
    for u_hat in recovered:
        key = tuple(int(b) for b in u_hat.preamble_bits)
        if key in by_pre:
            u = by_pre[key]
            matches.append((0, 0, u.eps, u_hat.eps_hat))
    _, fee = offset_errors(matches)
    return {
        "nmse_db": nmse, "tee": math.nan, "fee": fee, "p_md": p_md, "p_fa": p_fa,
        "p_e": p_md + p_fa, "ep_tree": float(ep_tree), "ep_gbcr2": float(ep_gbcr2),
        "k_hat": float(k_hat),
    }


def run_scenario(
    cfg: SystemConfig,
    scenario: str,
    trials: int,
    seed: int,
    snr_db: float | None = None,
    channel_model: str = "td",
    with_timing: bool = True,
) -> MetricsReport:
    """Aggregate MetricsReport over independent trials; fully determined by
    (cfg, scenario, trials, seed, snr_db, channel_model)."""
    _check_scenario(cfg, scenario)
    if channel_model not in ("td", "fd"):
        raise ValueError("channel_model must be 'td' or 'fd'")
    errors = validate_config(cfg)
    if errors:
        raise ValueError("invalid config: " + "; ".join(errors))

    noise_variance = cfg.noise_variance if snr_db is None else noise_for_snr(cfg, snr_db)
    sync = scenario.endswith("_sync")
    flat = scenario.startswith("flat")

    tree = TreeCode(cfg.subblock_len, cfg.parity_alloc, cfg.tree_seed)
    codebook = build_codebook(cfg)
    pe = build_payload_encoding(cfg) if flat else None
    shared = (tree, codebook, pe)
    run_trial = run_flat_trial if flat else run_fsf_trial

    keys = ("nmse_db", "tee", "fee", "p_md", "p_fa", "p_e", "ep_tree", "ep_gbcr2", "k_hat")
    acc = {k: RunningMean() for k in keys}
    t0 = time.perf_counter()
    for i in range(trials):
        stream = RngStream(seed, "trial", i)
        out = run_trial(cfg, sync, stream, shared, noise_variance, channel_model)
        for k in keys:
            acc[k].add(out[k])
    elapsed = time.perf_counter() - t0

    snr_out, ebn0 = snr_and_ebn0(cfg, expected_signal_energy_per_slot(cfg), noise_variance)
    if snr_db is not None:
        snr_out = snr_db
    report = MetricsReport(
        scenario=scenario,
        snr_db=snr_out,
        ebn0_db=ebn0,
        trials=trials,
        nmse_db=acc["nmse_db"].mean,
        tee=acc["tee"].mean,
        fee=acc["fee"].mean,
        p_md=acc["p_md"].mean,
        p_fa=acc["p_fa"].mean,
        p_e=acc["p_e"].mean,
        ep_tree=acc["ep_tree"].mean,
        ep_gbcr2=acc["ep_gbcr2"].mean,
        k_hat_mean=acc["k_hat"].mean,
        seconds=elapsed if with_timing else math.nan,
        stderr={k: acc[k].stderr for k in keys},
    )
    return report


CSV_COLUMNS = [
    "scenario", "snr_db", "ebn0_db", "trials", "nmse_db", "tee", "fee",
    "p_md", "p_fa", "p_e", "ep_tree", "ep_gbcr2", "k_hat_mean", "seconds",
]


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.6g}"
    return str(value)


def write_csv(reports, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in reports:
            row = asdict(r)
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])


def write_json(reports, path: str) -> None:
    def clean(value):
        if isinstance(value, float) and (math.isnan(value) or math.isinf(value)):
            return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
        return value

    out = []
    for r in reports:
        d = asdict(r)
        d["stderr"] = {k: clean(v) for k, v in d["stderr"].items()}
        out.append({k: clean(v) if not isinstance(v, dict) else v for k, v in d.items()})
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2)
