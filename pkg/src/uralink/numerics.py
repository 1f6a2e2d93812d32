"""Shared numerical primitives: partial DFT matrices, chi-square tail
utilities, and reproducible random-number streams.

Everything here is pure given its inputs; RNG streams are derived from a
(seed, key...) tuple so that parallel trials never share state.
"""

from __future__ import annotations

import zlib

import numpy as np
from scipy import special


def partial_dft(n_fft: int, subcarriers, n_cols: int) -> np.ndarray:
    """Rows of the unitary DFT matrix restricted to `subcarriers`.

    Entry (r, c) = exp(-j*2*pi*(subcarriers[r]-1)*c / n_fft) / sqrt(n_fft),
    with 1-based subcarrier indices and columns c = 0..n_cols-1 (delays).
    """
    sub = np.asarray(subcarriers, dtype=np.int64)
    if sub.ndim != 1 or sub.size == 0:
        raise ValueError("subcarriers must be a nonempty 1-D index sequence")
    if sub.min() < 1 or sub.max() > n_fft:
        raise ValueError("subcarrier indices must lie in [1, n_fft]")
    if not 1 <= n_cols <= n_fft:
        raise ValueError("n_cols must lie in [1, n_fft]")
    rows = sub[:, None] - 1
    cols = np.arange(n_cols)[None, :]
    return np.exp(-2j * np.pi * rows * cols / n_fft) / np.sqrt(n_fft)


def chi2_cdf(dof: int, x) -> np.ndarray | float:
    """Chi-square CDF with `dof` degrees of freedom (regularized lower
    incomplete gamma)."""
    if dof < 1:
        raise ValueError("dof must be >= 1")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    out = special.gammainc(dof / 2.0, x / 2.0)
    return float(out) if out.ndim == 0 else out


def chi2_inv(dof: int, p) -> np.ndarray | float:
    """Chi-square quantile function, the exact inverse of chi2_cdf.

    p = 1 has no finite quantile and raises.
    """
    if dof < 1:
        raise ValueError("dof must be >= 1")
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p >= 1)):
        raise ValueError("p must lie in [0, 1); the quantile at 1 is unbounded")
    out = 2.0 * special.gammaincinv(dof / 2.0, p)
    return float(out) if out.ndim == 0 else out


def _key_to_ints(key) -> tuple[int, ...]:
    """Map a mixed (str | int) key tuple to a stable integer tuple."""
    out = []
    for part in key:
        if isinstance(part, str):
            out.append(zlib.crc32(part.encode("utf-8")))
        elif isinstance(part, (int, np.integer)):
            if part < 0:
                raise ValueError("stream key integers must be nonnegative")
            out.append(int(part))
        else:
            raise TypeError(f"stream key parts must be str or int, got {type(part)!r}")
    return tuple(out)


class RngStream:
    """A reproducible random stream keyed by (seed, *key).

    The same (seed, key) always yields the same sample sequence; distinct
    keys yield statistically independent streams (SeedSequence spawn keys).
    """

    def __init__(self, seed: int, *key):
        self.seed = int(seed)
        self.key = _key_to_ints(key)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        self._gen = np.random.default_rng(seq)

    def child(self, *key) -> "RngStream":
        """Derive an independent stream under this stream's namespace."""
        return RngStream(self.seed, *(self.key + _key_to_ints(key)))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    # passthroughs used throughout the package
    def standard_normal(self, *a, **kw):
        return self._gen.standard_normal(*a, **kw)

    def integers(self, *a, **kw):
        return self._gen.integers(*a, **kw)

    def uniform(self, *a, **kw):
        return self._gen.uniform(*a, **kw)

    def permutation(self, *a, **kw):
        return self._gen.permutation(*a, **kw)

    def choice(self, *a, **kw):
        return self._gen.choice(*a, **kw)


def sample_complex_gaussian(stream: RngStream, n, variance: float) -> np.ndarray:
    """i.i.d. circularly-symmetric complex Gaussian samples.

    Total per-sample variance equals `variance` (variance/2 per component).
    `n` may be an int or a shape tuple.
    """
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    shape = (n,) if isinstance(n, (int, np.integer)) else tuple(n)
    z = stream.standard_normal(shape) + 1j * stream.standard_normal(shape)
    return z * np.sqrt(variance / 2.0)
