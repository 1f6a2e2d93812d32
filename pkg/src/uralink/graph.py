"""Graph-based channel reconstruction and collision resolution.

Stages are preamble slots; nodes are detected codeword indices carrying
reconstructed channel blocks; paths are parity-consistent node tuples from
tree decoding. The engine repeatedly extracts the minimum-weight path over
quantized offset grids, validates it by relative block distances, splits
collided from non-collided nodes with a chi-square energy test, averages
the clean blocks into the user's channel, and cancels that channel from
the collided blocks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig
from .channel import slot_phase
from .encoder import TreeCode, index_to_subblock
from .numerics import chi2_inv


@dataclass
class DecodingGraph:
    """Per-stage node blocks plus the surviving path set."""

    stages: list            # list of dict: codeword value -> block array
    paths: list             # list of tuples of per-stage values
    mode: str               # "fsf" or "flat"
    parity_evals: int = 0


@dataclass
class RecoveredUser:
    path: tuple
    preamble_bits: np.ndarray
    h_hat: np.ndarray
    eps_hat: float
    tau_hat: int | None = None
    weight: float = 0.0
    candidates: list = field(default_factory=list)  # (tau, eps, weight) ascending


# ---------------------------------------------------------------------- #
# FD channel reconstruction from the sparse estimate (fsf mode)

def reconstruct_fd_channels(
    x_hat: np.ndarray, support: np.ndarray, cfg: SystemConfig, n_codewords: int
) -> dict[int, np.ndarray]:
    """Collapse supported rows into per-codeword S x M blocks.

    Row I (0-based) belongs to codeword I % N (0-based) and tap I // N; the
    tap delay re-enters as the subcarrier phase exp(-j*2*pi*(n_s-1)*tap/N_c).
    """
    sub = np.asarray(cfg.occupied)
    out: dict[int, np.ndarray] = {}
    for row in np.asarray(support, dtype=np.int64):
        value = int(row % n_codewords) + 1
        tap = int(row // n_codewords)
        phase = np.exp(-2j * np.pi * (sub - 1) * tap / cfg.n_fft)
        block = phase[:, None] * x_hat[row][None, :]
        if value in out:
            out[value] = out[value] + block
        else:
            out[value] = block
    return out


# ---------------------------------------------------------------------- #
# tree decoding

def tree_decode(stage_values, tree: TreeCode, cfg: SystemConfig):
    """Stage-by-stage parity splicing.

    stage_values: per stage, the detected codeword indices (1-based).
    Returns (paths, parity_evals) where parity_evals counts every
    (partial path, candidate node) check, the complexity unit used by the
    analysis formulas.
    """
    info_alloc = cfg.info_alloc
    parity_alloc = cfg.parity_alloc
    j = cfg.subblock_len
    stages = []
    for t, values in enumerate(stage_values, start=1):
        values = sorted(set(int(v) for v in values))
        if values:
            bits = np.array([index_to_subblock(v, j) for v in values], dtype=np.uint8)
        else:
            bits = np.zeros((0, j), dtype=np.uint8)
        b_t = info_alloc[t - 1]
        stages.append((values, bits[:, :b_t], bits[:, b_t:]))
    if not stages or not stages[0][0]:
        return [], 0

    values0, info0, _ = stages[0]
    paths = [(v,) for v in values0]
    acc_info = info0.copy()
    evals = 0
    for t in range(2, len(stages) + 1):
        values, info_t, parity_t = stages[t - 1]
        n_cand = len(values)
        evals += len(paths) * n_cand
        if not paths or n_cand == 0:
            return [], evals
        p_t = parity_alloc[t - 1]
        if p_t:
            stack = np.vstack(
                [
                    tree.parity_mats[(s, t)].T
                    for s in range(1, t)
                    if info_alloc[s - 1]
                ]
            )
            expected = (acc_info @ stack) % 2            # (n_paths, p_t)
            match = np.all(
                expected[:, None, :] == parity_t[None, :, :], axis=2
            )
        else:
            match = np.ones((len(paths), n_cand), dtype=bool)
        pairs = np.argwhere(match)
        paths = [paths[i] + (values[k],) for i, k in pairs]
        if info_t.shape[1]:
            acc_info = np.hstack([acc_info[pairs[:, 0]], info_t[pairs[:, 1]]])
        else:
            acc_info = acc_info[pairs[:, 0]]
    return paths, evals


def preamble_bits_from_path(path, cfg: SystemConfig) -> np.ndarray:
    """Concatenated per-stage information bits encoded by the node values."""
    bits = []
    for t, value in enumerate(path, start=1):
        sub = index_to_subblock(int(value), cfg.subblock_len)
        bits.append(sub[: cfg.info_alloc[t - 1]])
    return np.concatenate(bits) if bits else np.zeros(0, dtype=np.uint8)


# ---------------------------------------------------------------------- #
# weights and offset grids

def derot_factor(stage: int, value: int, tau: int, eps: float, cfg: SystemConfig, mode: str):
    """Unit-modulus rotation hypothesis q for one node."""
    q = slot_phase(eps, stage, cfg)
    if mode == "flat":
        n_v = cfg.occupied[value - 1]
        q *= np.exp(2j * np.pi * tau * (1 - n_v) / cfg.n_fft)
    return q


def edge_weight_fsf(block_i, i, block_j, j, eps, cfg: SystemConfig) -> float:
    """Squared distance of the two derotated blocks under CFO hypothesis eps."""
    qi = slot_phase(eps, i, cfg)
    qj = slot_phase(eps, j, cfg)
    return float(np.linalg.norm(block_i / qi - block_j / qj) ** 2)


def _pair_terms(blocks):
    """Energies and cross inner products reused across the grid sweep."""
    energies = [float(np.vdot(b, b).real) for b in blocks]
    inner = {}
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            inner[(i, j)] = complex(np.vdot(blocks[i], blocks[j]))
    return energies, inner


def path_weights_on_grid(path, blocks, cfg: SystemConfig, mode: str):
    """Total weight Omega for every grid offset hypothesis.

    Returns a list of (tau, eps, weight); tau is 0 for fsf (unused).
    The pairwise term is E_i + E_j - 2 Re((q_i/q_j) <B_i, B_j>).
    """
    t_p = len(path)
    energies, inner = _pair_terms(blocks)
    base = sum(
        energies[i] + energies[j] for i in range(t_p) for j in range(i + 1, t_p)
    )
    span = cfg.cp_len + cfg.n_fft
    eps_grid = cfg.cfo_grid
    tau_grid = list(cfg.to_grid) if mode == "flat" else [0]
    out = []
    for tau in tau_grid:
        for eps in eps_grid:
            omega = 2 * np.pi * eps / cfg.n_fft
            cross = 0.0
            for (i, j), ip in inner.items():
                phase = omega * span * (i - j)
                if mode == "flat":
                    n_i = cfg.occupied[path[i] - 1]
                    n_j = cfg.occupied[path[j] - 1]
                    phase += 2 * np.pi * tau * (n_j - n_i) / cfg.n_fft
                cross += (np.exp(1j * phase) * ip).real
            out.append((tau, float(eps), base - 2.0 * cross))
    return out


def mwp_search(graph: DecodingGraph, cfg: SystemConfig):
    """Minimum-weight path over paths x offset grid.

    Ties break toward the lexicographically smallest path. Returns
    (path, tau, eps, weight, candidates) where candidates is the winning
    path's offset grid ranked ascending by weight (flat refinement input).
    """
    best = None
    for path in sorted(graph.paths):
        blocks = [graph.stages[t][v] for t, v in enumerate(path)]
        grid = path_weights_on_grid(path, blocks, cfg, graph.mode)
        tau, eps, w = min(grid, key=lambda g: g[2])
        if best is None or w < best[3]:
            best = (path, tau, eps, w, sorted(grid, key=lambda g: g[2]))
    return best


def validate_path(blocks, qs) -> bool:
    """All-pairs relative distance test on derotated blocks."""
    derot = [b / q for b, q in zip(blocks, qs)]
    energies = [float(np.vdot(u, u).real) for u in derot]
    for i in range(len(derot)):
        for j in range(i + 1, len(derot)):
            dist = float(np.linalg.norm(derot[i] - derot[j]) ** 2)
            if dist >= max(energies[i], energies[j]):
                return False
    return True


def collision_threshold(sigma_e2: float, zeta: float, s_dim: int, m_dim: int) -> float:
    """Energy-test threshold: sigma_e2 * inverse chi-square CDF at 1-zeta
    with 2*S*M degrees of freedom (2*M per flat node via s_dim=1)."""
    if not 0.0 < zeta < 1.0:
        raise ValueError("test level must lie strictly between 0 and 1")
    return sigma_e2 * chi2_inv(2 * s_dim * m_dim, 1.0 - zeta)


def detect_collisions(blocks, qs, gamma_c: float) -> list[bool]:
    """Flag nodes whose derotated block strays from the lowest-energy
    reference by more than gamma_c; the reference itself is non-collided."""
    derot = [b / q for b, q in zip(blocks, qs)]
    energies = [float(np.vdot(u, u).real) for u in derot]
    ref = int(np.argmin(energies))
    flags = []
    for i, u in enumerate(derot):
        if i == ref:
            flags.append(False)
        else:
            flags.append(float(np.linalg.norm(u - derot[ref]) ** 2) > gamma_c)
    return flags


def retrieve_channel(blocks, qs, flags) -> np.ndarray:
    """Average of derotated blocks over non-collided nodes."""
    clean = [b / q for b, q, f in zip(blocks, qs, flags) if not f]
    if not clean:
        raise ValueError("no non-collided node to average")
    return sum(clean) / len(clean)


def run_gb_cr2(graph: DecodingGraph, cfg: SystemConfig, sigma_e2: float):
    """Path extraction loop with validity check, collision split, channel
    retrieval, and SIC; returns (recovered users, K_hat)."""
    if graph.mode == "flat":
        entries_s = 1
    elif graph.stages and graph.stages[0]:
        entries_s = next(iter(graph.stages[0].values())).shape[0]
    else:
        entries_s = len(cfg.occupied)
    gamma_c = collision_threshold(sigma_e2, cfg.collision_test_level, entries_s, cfg.n_antennas)

    recovered = []
    deferred_once = set()
    while graph.paths:
        path, tau, eps, weight, cands = mwp_search(graph, cfg)
        graph.paths.remove(path)
        blocks = [graph.stages[t][v] for t, v in enumerate(path)]
        qs = [
            derot_factor(t + 1, v, tau, eps, cfg, graph.mode)
            for t, v in enumerate(path)
        ]
        if not validate_path(blocks, qs):
            continue
        flags = detect_collisions(blocks, qs, gamma_c)
        if all(flags):
            # degenerate: every node collided; give SIC one chance to clean up
            if path not in deferred_once and graph.paths:
                deferred_once.add(path)
                graph.paths.append(path)
            continue
        h_hat = retrieve_channel(blocks, qs, flags)
        recovered.append(
            RecoveredUser(
                path=path,
                preamble_bits=preamble_bits_from_path(path, cfg),
                h_hat=h_hat,
                eps_hat=float(eps),
                tau_hat=int(tau) if graph.mode == "flat" else None,
                weight=float(weight),
                candidates=cands[: cfg.rho_list_len],
            )
        )
        for t, (v, q, collided) in enumerate(zip(path, qs, flags)):
            if collided:
                graph.stages[t][v] = graph.stages[t][v] - q * h_hat
        clean_nodes = {(t, v) for t, (v, f) in enumerate(zip(path, flags)) if not f}
        graph.paths = [
            p
            for p in graph.paths
            if not any((t, v) in clean_nodes for t, v in enumerate(p))
        ]
    return recovered, len(recovered)


def write_graph_json(graph: DecodingGraph, path: str) -> None:
    """Debug dump: nodes with energies, plus surviving paths."""
    payload = {
        "mode": graph.mode,
        "parity_evals": graph.parity_evals,
        "stages": [
            {
                str(v): float(np.vdot(b, b).real)
                for v, b in sorted(stage.items())
            }
            for stage in graph.stages
        ],
        "paths": [list(map(int, p)) for p in graph.paths],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
