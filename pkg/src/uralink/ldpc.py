"""Binary LDPC code: alist I/O, a seeded regular rate-1/2 construction,
GF(2) systematic encoding, and sum-product belief-propagation decoding.

The default code is (3,6)-regular with k information bits and n = 2k, built
deterministically from a public seed and checked for full parity rank.
"""

from __future__ import annotations

import numpy as np

from .numerics import RngStream

_TANH_CLIP = 1.0 - 1e-12
_MAG_FLOOR = 1e-30


def _gf2_rref(mat: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2); returns (rref, pivot columns)."""
    h = (mat.copy() % 2).astype(np.uint8)
    m, n = h.shape
    pivots = []
    r = 0
    for c in range(n):
        hit = np.nonzero(h[r:, c])[0]
        if hit.size == 0:
            continue
        pr = r + hit[0]
        if pr != r:
            h[[r, pr]] = h[[pr, r]]
        others = np.nonzero(h[:, c])[0]
        others = others[others != r]
        h[others] ^= h[r]
        pivots.append(c)
        r += 1
        if r == m:
            break
    return h, pivots


class LdpcCode:
    """Parity-check matrix plus the derived systematic encoder.

    Information bits occupy the non-pivot columns of the RREF of H; parity
    positions are solved from them, so encode()->H@c = 0 by construction.
    """

    def __init__(self, h: np.ndarray):
        h = np.asarray(h, dtype=np.uint8) % 2
        if h.ndim != 2:
            raise ValueError("H must be a 2-D binary matrix")
        self.h = h
        self.m, self.n = h.shape
        rref, pivots = _gf2_rref(h)
        if len(pivots) != self.m:
            raise ValueError("parity-check matrix is rank deficient")
        self.pivot_cols = np.array(pivots, dtype=np.int64)
        mask = np.ones(self.n, dtype=bool)
        mask[self.pivot_cols] = False
        self.info_cols = np.nonzero(mask)[0]
        self.k = self.info_cols.size
        # c[pivot] = Q @ c[info] (mod 2) from the RREF rows
        self._q = rref[:, self.info_cols]
        # edge lists for BP, sorted by check row for reduceat segments
        rows, cols = np.nonzero(h)
        order = np.argsort(rows, kind="stable")
        self.edge_row = rows[order]
        self.edge_col = cols[order]
        counts = np.bincount(self.edge_row, minlength=self.m)
        self.row_ptr = np.concatenate(([0], np.cumsum(counts)))[:-1]

    def encode(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape != (self.k,):
            raise ValueError(f"expected {self.k} information bits, got {bits.shape}")
        cw = np.zeros(self.n, dtype=np.uint8)
        cw[self.info_cols] = bits
        cw[self.pivot_cols] = (self._q @ bits) % 2
        return cw

    def syndrome(self, bits) -> np.ndarray:
        return (self.h @ np.asarray(bits, dtype=np.uint8)) % 2

    def extract_info(self, codeword) -> np.ndarray:
        return np.asarray(codeword, dtype=np.uint8)[self.info_cols]


def make_regular_code(k: int, seed: int, col_weight: int = 3) -> LdpcCode:
    """Seeded (col_weight, 2*col_weight)-regular code with n = 2k.

    Edge stubs are shuffled into columns, duplicate check assignments are
    repaired by swaps, and rank-deficient draws are rejected.
    """
    n, m = 2 * k, k
    row_weight = col_weight * n // m
    if col_weight * n != row_weight * m:
        raise ValueError("degree bookkeeping failed")
    for attempt in range(64):
        rng = RngStream(seed, "ldpc", attempt)
        stubs = rng.permutation(np.repeat(np.arange(m), row_weight))
        cols = stubs.reshape(n, col_weight)
        ok = True
        for _ in range(10 * n):
            bad = [i for i in range(n) if np.unique(cols[i]).size < col_weight]
            if not bad:
                break
            for i in bad:
                j = int(rng.integers(n))
                a = int(rng.integers(col_weight))
                b = int(rng.integers(col_weight))
                cols[i, a], cols[j, b] = cols[j, b], cols[i, a]
        else:
            ok = False
        if not ok:
            continue
        h = np.zeros((m, n), dtype=np.uint8)
        for i in range(n):
            h[cols[i], i] = 1
        try:
            return LdpcCode(h)
        except ValueError:
            continue
    raise RuntimeError("could not build a full-rank regular code; change the seed")


def bp_decode(code: LdpcCode, llr, max_iter: int = 50) -> tuple[np.ndarray, bool]:
    """Sum-product decoding. Positive LLR favors bit 0 (BPSK +1).

    Returns (hard codeword bits, converged). Early exit on zero syndrome;
    a non-converged result still carries the best hard decision.
    """
    llr = np.asarray(llr, dtype=float)
    if llr.shape != (code.n,):
        raise ValueError(f"expected {code.n} LLRs, got {llr.shape}")
    er, ec, ptr = code.edge_row, code.edge_col, code.row_ptr
    v2c = llr[ec]
    hard = (llr < 0).astype(np.uint8)
    for _ in range(max_iter):
        t = np.tanh(v2c / 2.0)
        sign = np.where(t < 0, -1.0, 1.0)
        mag = np.clip(np.abs(t), _MAG_FLOOR, _TANH_CLIP)
        logmag = np.log(mag)
        row_log = np.add.reduceat(logmag, ptr)
        neg = (sign < 0).astype(np.int64)
        row_neg = np.add.reduceat(neg, ptr)
        ext_sign = np.where((row_neg[er] - neg) % 2 == 1, -1.0, 1.0)
        ext_mag = np.exp(row_log[er] - logmag)
        c2v = 2.0 * np.arctanh(np.clip(ext_sign * ext_mag, -_TANH_CLIP, _TANH_CLIP))
        col_sum = np.zeros(code.n)
        np.add.at(col_sum, ec, c2v)
        total = llr + col_sum
        v2c = total[ec] - c2v
        hard = (total < 0).astype(np.uint8)
        if not code.syndrome(hard).any():
            return hard, True
    return hard, False


# ---------------------------------------------------------------------- #
# alist text format (1-based indices, zero-padded rows per convention)

def format_alist(code: LdpcCode) -> str:
    h = code.h
    m, n = h.shape
    col_deg = h.sum(axis=0)
    row_deg = h.sum(axis=1)
    max_c, max_r = int(col_deg.max()), int(row_deg.max())
    lines = [f"{n} {m}", f"{max_c} {max_r}"]
    lines.append(" ".join(str(int(d)) for d in col_deg))
    lines.append(" ".join(str(int(d)) for d in row_deg))
    for j in range(n):
        idx = (np.nonzero(h[:, j])[0] + 1).tolist()
        idx += [0] * (max_c - len(idx))
        lines.append(" ".join(str(i) for i in idx))
    for i in range(m):
        idx = (np.nonzero(h[i, :])[0] + 1).tolist()
        idx += [0] * (max_r - len(idx))
        lines.append(" ".join(str(i) for i in idx))
    return "\n".join(lines) + "\n"


def parse_alist(text: str) -> LdpcCode:
    tokens = text.split()
    it = iter(tokens)
    n, m = int(next(it)), int(next(it))
    max_c, _max_r = int(next(it)), int(next(it))
    for _ in range(n + m):  # skip the degree lists
        next(it)
    h = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        for _ in range(max_c):
            r = int(next(it))
            if r > 0:
                h[r - 1, j] = 1
    # row lists are redundant with the column lists; ignore the remainder
    return LdpcCode(h)


def load_alist(path: str) -> LdpcCode:
    with open(path, encoding="utf-8") as fh:
        return parse_alist(fh.read())


def save_alist(code: LdpcCode, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_alist(code))
