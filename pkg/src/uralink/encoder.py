"""Per-user transmit chain: tree-coded preamble slots mapped to codebook
indices, and the LDPC-coded, BPSK-modulated, zero-padded, user-interleaved
payload.

Slot t carries b_t = J - p_t fresh information bits followed by p_t parity
bits r_t = sum_{s<t} G_{s,t-1} v_{p,s} (mod 2); the J-bit subblock picks
codeword d = [subblock]_10 + 1. Parity matrices, the codebook, and each
user's interleaver are all derived from public seeds so the receiver can
rebuild them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ldpc
from .config import SystemConfig
from .numerics import RngStream, sample_complex_gaussian


class TreeCode:
    """Outer code splicing per-slot subblocks via parity checks."""

    def __init__(self, subblock_len: int, parity_alloc, seed: int):
        self.subblock_len = int(subblock_len)
        self.parity_alloc = tuple(int(p) for p in parity_alloc)
        if self.parity_alloc and self.parity_alloc[0] != 0:
            raise ValueError("slot 1 carries no parity bits")
        self.info_alloc = tuple(self.subblock_len - p for p in self.parity_alloc)
        if any(b < 0 for b in self.info_alloc):
            raise ValueError("parity allocation exceeds the subblock length")
        self.seed = int(seed)
        rng = RngStream(seed, "tree-code")
        # G[(s, t)] has shape (p_t, b_s) for 1-based s < t
        self.parity_mats = {}
        for t in range(2, len(self.parity_alloc) + 1):
            p_t = self.parity_alloc[t - 1]
            for s in range(1, t):
                b_s = self.info_alloc[s - 1]
                self.parity_mats[(s, t)] = rng.integers(
                    0, 2, size=(p_t, b_s), dtype=np.uint8
                )

    @property
    def n_slots(self) -> int:
        return len(self.parity_alloc)

    @property
    def n_info_bits(self) -> int:
        return sum(self.info_alloc)

    def split_info(self, bits) -> list[np.ndarray]:
        """Chop B_p bits into the per-slot information pieces v_{p,t}."""
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape != (self.n_info_bits,):
            raise ValueError(f"expected {self.n_info_bits} bits, got {bits.shape}")
        out, pos = [], 0
        for b_t in self.info_alloc:
            out.append(bits[pos:pos + b_t])
            pos += b_t
        return out

    def parity_bits(self, info_pieces, t: int) -> np.ndarray:
        """r_t for slot t (1-based) from the earlier slots' info bits."""
        p_t = self.parity_alloc[t - 1]
        acc = np.zeros(p_t, dtype=np.uint8)
        for s in range(1, t):
            acc ^= (self.parity_mats[(s, t)] @ info_pieces[s - 1]).astype(np.uint8) % 2
        return acc

    def encode(self, bits) -> np.ndarray:
        """B_p bits -> (T_p, J) array of subblocks [info || parity]."""
        pieces = self.split_info(bits)
        out = np.zeros((self.n_slots, self.subblock_len), dtype=np.uint8)
        for t in range(1, self.n_slots + 1):
            info = pieces[t - 1]
            out[t - 1, :info.size] = info
            out[t - 1, info.size:] = self.parity_bits(pieces, t)
        return out

    def encode_indices(self, bits) -> tuple[int, ...]:
        return tuple(subblock_to_index(sb) for sb in self.encode(bits))


def subblock_to_index(subblock) -> int:
    """J bits (MSB first) -> codeword index in [1, 2^J]."""
    bits = np.asarray(subblock, dtype=np.uint8)
    val = 0
    for b in bits:
        val = (val << 1) | int(b)
    return val + 1


def index_to_subblock(index: int, subblock_len: int) -> np.ndarray:
    """Inverse of subblock_to_index."""
    if not 1 <= index <= 2 ** subblock_len:
        raise ValueError("index out of range")
    val = index - 1
    return np.array(
        [(val >> (subblock_len - 1 - i)) & 1 for i in range(subblock_len)],
        dtype=np.uint8,
    )


@dataclass(frozen=True)
class Codebook:
    """Columns a_1..a_N of length L_p; kind in {gaussian, identity}."""

    matrix: np.ndarray
    kind: str

    @property
    def n_codewords(self) -> int:
        return self.matrix.shape[1]

    def column(self, index: int) -> np.ndarray:
        """1-based codeword index d -> column a_d."""
        return self.matrix[:, index - 1]


def build_codebook(cfg: SystemConfig, seed: int | None = None) -> Codebook:
    """Gaussian columns rescaled to norm^2 = L_p exactly, or the identity
    (optionally scaled to meet the same norm) for the sparse-pilot mode."""
    n, l_p = cfg.n_codewords, cfg.preamble_len
    if cfg.codebook_kind == "identity":
        if n != l_p:
            raise ValueError("identity codebook requires N = L_p")
        scale = np.sqrt(l_p) if cfg.identity_scaled else 1.0
        return Codebook(matrix=np.eye(l_p, dtype=complex) * scale, kind="identity")
    if cfg.codebook_kind != "gaussian":
        raise ValueError(f"unknown codebook kind {cfg.codebook_kind!r}")
    rng = RngStream(cfg.codebook_seed if seed is None else seed, "codebook")
    a = sample_complex_gaussian(rng, (l_p, n), 1.0)
    a *= np.sqrt(l_p) / np.linalg.norm(a, axis=0, keepdims=True)
    return Codebook(matrix=a, kind="gaussian")


def derive_interleaver(indices, coding_len: int, seed: int) -> np.ndarray:
    """Deterministic permutation of [coding_len] keyed by (seed, d_1..d_Tp)."""
    rng = RngStream(seed, "interleaver", *(int(d) for d in indices))
    return rng.permutation(coding_len)


@dataclass(frozen=True)
class PayloadEncoding:
    """LDPC code plus the pad/interleave geometry of the coding part."""

    code: ldpc.LdpcCode
    coding_len: int

    @property
    def pad_len(self) -> int:
        return self.coding_len - self.code.n


def build_payload_encoding(cfg: SystemConfig) -> PayloadEncoding:
    if cfg.ldpc_alist:
        code = ldpc.load_alist(cfg.ldpc_alist)
    else:
        code = ldpc.make_regular_code(cfg.payload_bits, cfg.tree_seed)
    if code.k != cfg.payload_bits:
        raise ValueError(
            f"LDPC dimension {code.k} does not match payload_bits {cfg.payload_bits}"
        )
    if code.n > cfg.coding_len:
        raise ValueError("codeword longer than the coding part")
    return PayloadEncoding(code=code, coding_len=cfg.coding_len)


def encode_payload(bits, pe: PayloadEncoding, interleaver) -> np.ndarray:
    """LDPC encode, BPSK map (0 -> +1), zero-pad at the tail, interleave."""
    cw = pe.code.encode(np.asarray(bits, dtype=np.uint8))
    symbols = 1.0 - 2.0 * cw.astype(float)
    padded = np.concatenate([symbols, np.zeros(pe.pad_len)])
    return padded[np.asarray(interleaver)]


@dataclass
class EncodedUser:
    """Everything the channel needs to transmit one user."""

    indices: tuple[int, ...]            # d_{k,t}, 1-based
    interleaver: np.ndarray             # pi_k over [L_c]
    preamble_bits: np.ndarray           # B_p
    payload_bits: np.ndarray            # B_c
    payload_symbols: np.ndarray | None  # length L_c, real BPSK/zeros


def encode_user(
    msg_bits,
    cfg: SystemConfig,
    tree: TreeCode,
    pe: PayloadEncoding | None,
) -> EncodedUser:
    """Full transmit-side chain for one user's B message bits."""
    msg_bits = np.asarray(msg_bits, dtype=np.uint8)
    if msg_bits.shape != (cfg.msg_bits,):
        raise ValueError(f"expected {cfg.msg_bits} message bits")
    pre = msg_bits[: cfg.preamble_bits]
    pay = msg_bits[cfg.preamble_bits:]
    indices = tree.encode_indices(pre)
    pi = derive_interleaver(indices, cfg.coding_len, cfg.interleaver_seed)
    symbols = encode_payload(pay, pe, pi) if pe is not None else None
    return EncodedUser(
        indices=indices,
        interleaver=pi,
        preamble_bits=pre,
        payload_bits=pay,
        payload_symbols=symbols,
    )
