"""Ground-truth user generation and the two channel pipelines: an exact
time-domain simulation (per-sample timing shift, CFO ramp, circular tap
convolution) and the frequency-domain dictionary model it is measured
against.

Conventions. The partial DFT F carries 1/sqrt(N_c), so the dictionary
G = [a_n (.) f_l] has column energy L_p/N_c and the ground-truth coefficient
rows carry sqrt(N_c) * (diagonal CFO gain) * (tap gain); their product then
reproduces the physical subcarrier response H(s,m) = sum_l alpha_l *
exp(-j*2*pi*(n_s-1)*(tau_l + tau)/N_c) without stray scale factors. The
timing offset enters the time-domain path as an exact cyclic delay and the
frequency-domain path as an extra tap delay; both live inside the CP.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig
from .encoder import Codebook, EncodedUser
from .numerics import RngStream, partial_dft, sample_complex_gaussian


@dataclass
class UserGroundTruth:
    """One active user: message, offsets, taps, and (once encoded) its
    codeword indices and interleaver."""

    msg_bits: np.ndarray          # B bits
    tau: int                      # timing offset, samples
    eps: float                    # CFO normalized to subcarrier spacing
    delays: np.ndarray            # tap delays, first is 0
    gains: np.ndarray             # (L_k, M) complex tap gains
    enc: EncodedUser | None = None

    @property
    def n_taps(self) -> int:
        return len(self.delays)


@dataclass
class SlotObservation:
    """FD-demodulated receive matrices: per-preamble-slot Y^t plus the
    stacked coding-part observation."""

    preamble: list[np.ndarray]            # T_p matrices, S x M
    coding: np.ndarray | None = None      # L_c x M
    noise_variance: float = 0.0


def draw_users(cfg: SystemConfig, rng: RngStream, sync: bool = False) -> list[UserGroundTruth]:
    """K_a users with random messages, taps, and (unless sync) offsets.

    Flat mode: one tap at delay 0. FSF: L_k distinct delays starting at 0.
    Per-tap variance tap_power/L_k keeps unit average subcarrier power.
    """
    lo, hi = cfg.tap_count_range
    users = []
    for k in range(cfg.n_active):
        r = rng.child("user", k)
        bits = r.child("bits").integers(0, 2, size=cfg.msg_bits, dtype=np.uint8)
        if cfg.channel_kind == "flat":
            delays = np.zeros(1, dtype=np.int64)
        else:
            n_taps = int(r.child("ntaps").integers(lo, hi + 1))
            extra = r.child("delays").choice(
                np.arange(1, cfg.delay_spread), size=n_taps - 1, replace=False
            )
            delays = np.sort(np.concatenate([[0], extra])).astype(np.int64)
        gains = sample_complex_gaussian(
            r.child("gains"), (len(delays), cfg.n_antennas), cfg.tap_power / len(delays)
        )
        tau = 0 if sync else int(r.child("to").choice(np.asarray(cfg.to_grid)))
        eps = 0.0 if sync else float(r.child("cfo").uniform(-cfg.cfo_max, cfg.cfo_max))
        if delays[-1] + tau >= cfg.cp_len:
            raise ValueError("drawn offsets violate the no-ISI condition")
        users.append(UserGroundTruth(bits, tau, eps, delays, gains))
    return users


def fd_channel(user: UserGroundTruth, cfg: SystemConfig, part: str = "preamble") -> np.ndarray:
    """Subcarrier response including the timing offset as extra delay:
    H(s,m) = sum_l gains[l,m] * exp(-j*2*pi*(n_s-1)*(delay_l+tau)/N_c)."""
    sub = np.asarray(cfg.occupied if part == "preamble" else cfg.coding_sub)
    eq_delay = user.delays + user.tau
    phase = np.exp(
        -2j * np.pi * (sub[:, None] - 1) * eq_delay[None, :] / cfg.n_fft
    )
    return phase @ user.gains


def slot_phase(eps: float, t: int, cfg: SystemConfig) -> complex:
    """Per-slot accumulated CFO phase omega^((L+N_c)t - (N_c+1)/2)."""
    omega_exp = (cfg.cp_len + cfg.n_fft) * t - (cfg.n_fft + 1) / 2.0
    return complex(np.exp(2j * np.pi * eps * omega_exp / cfg.n_fft))


def phase_rotation(tau: int, eps: float, t: int, cfg: SystemConfig, subcarriers=None) -> np.ndarray:
    """Diagonal rotation vector p^t(s) = slot_phase * psi^(1-n_s) with
    psi = exp(j*2*pi*tau/N_c); the pure-phase diagonal-CFO approximation."""
    sub = np.asarray(cfg.occupied if subcarriers is None else subcarriers)
    psi_exp = 1 - sub
    psi = np.exp(2j * np.pi * tau * psi_exp / cfg.n_fft)
    return slot_phase(eps, t, cfg) * psi


def attenuation(eps: float, cfg: SystemConfig) -> complex:
    """Common ICI attenuation P(eps); P(0) = 1 by continuity, |P| < 1 else."""
    if eps == 0.0:
        return 1.0 + 0.0j
    n_c = cfg.n_fft
    mag = np.sin(np.pi * eps) / (n_c * np.sin(np.pi * eps / n_c))
    return complex(mag * np.exp(1j * np.pi * eps * (n_c - 1) / n_c))


def diag_gain(eps: float, t: int, cfg: SystemConfig) -> complex:
    """Exact common diagonal value phi^t * P(eps) = slot_phase * |P(eps)|."""
    return slot_phase(eps, t, cfg) * abs(attenuation(eps, cfg))


# ---------------------------------------------------------------------- #
# time-domain pipeline (exact model)

def preamble_symbols(users, codebook: Codebook, cfg: SystemConfig) -> np.ndarray:
    """(K, T_p, S) transmitted preamble symbols A c_k^t."""
    out = np.zeros((len(users), cfg.preamble_slots, cfg.preamble_len), dtype=complex)
    for k, u in enumerate(users):
        for t, d in enumerate(u.enc.indices):
            out[k, t] = codebook.column(d)
    return out


def payload_slot_symbols(users, cfg: SystemConfig) -> np.ndarray:
    """(K, T_c, S_c) coding-part symbols; position l = (t_c-1)*S_c + s."""
    s_c = len(cfg.coding_sub)
    out = np.zeros((len(users), cfg.coding_slots, s_c), dtype=complex)
    for k, u in enumerate(users):
        out[k] = np.asarray(u.enc.payload_symbols, dtype=complex).reshape(
            cfg.coding_slots, s_c
        )
    return out


def simulate_td(
    users,
    symbols: np.ndarray,
    cfg: SystemConfig,
    rng: RngStream | None = None,
    subcarriers=None,
    slot_offset: int = 0,
    noise_variance: float | None = None,
) -> np.ndarray:
    """Exact time-domain receive signal, shape (T, N_c, M).

    Per user and slot: inverse partial DFT, cyclic delay by tau, CFO ramp
    scaled by phi^t = omega^(L + (t-1)(L+N_c)) with the absolute slot index,
    circular convolution with the tap vector, then superposition and noise.
    """
    symbols = np.asarray(symbols)
    n_slots = symbols.shape[1]
    sub0 = np.asarray(cfg.occupied if subcarriers is None else subcarriers) - 1
    n_c, n_ant = cfg.n_fft, cfg.n_antennas
    sigma2 = cfg.noise_variance if noise_variance is None else noise_variance
    out = np.zeros((n_slots, n_c, n_ant), dtype=complex)

    # per-user tap spectra are slot-independent
    tap_ffts = []
    for u in users:
        taps = np.zeros((n_c, n_ant), dtype=complex)
        taps[u.delays, :] = u.gains
        tap_ffts.append(np.fft.fft(taps, axis=0))

    ramp = np.arange(n_c)
    for t in range(n_slots):
        abs_t = slot_offset + t + 1
        for k, u in enumerate(users):
            full = np.zeros(n_c, dtype=complex)
            full[sub0] = symbols[k, t]
            xt = np.fft.ifft(full) * np.sqrt(n_c)
            shifted = np.roll(xt, u.tau)
            phi = np.exp(
                2j * np.pi * u.eps * (cfg.cp_len + (abs_t - 1) * (cfg.cp_len + n_c)) / n_c
            )
            rotated = phi * np.exp(2j * np.pi * u.eps * ramp / n_c) * shifted
            spec = np.fft.fft(rotated)
            out[t] += np.fft.ifft(spec[:, None] * tap_ffts[k], axis=0)
        if rng is not None and sigma2 > 0:
            out[t] += sample_complex_gaussian(rng.child("noise", t), (n_c, n_ant), sigma2)
    return out


def demodulate_fd(td: np.ndarray, cfg: SystemConfig, subcarriers=None) -> list[np.ndarray]:
    """Partial-DFT demodulation of each slot: Y^t = F_[s,:] y~^t."""
    sub0 = np.asarray(cfg.occupied if subcarriers is None else subcarriers) - 1
    out = []
    for t in range(td.shape[0]):
        spec = np.fft.fft(td[t], axis=0) / np.sqrt(cfg.n_fft)
        out.append(spec[sub0, :])
    return out


def observe(
    users,
    codebook: Codebook,
    cfg: SystemConfig,
    rng: RngStream | None,
    include_payload: bool = False,
    noise_variance: float | None = None,
) -> SlotObservation:
    """TD-simulate and FD-demodulate the preamble (and optionally the
    coding part, flat mode)."""
    sigma2 = cfg.noise_variance if noise_variance is None else noise_variance
    pre_td = simulate_td(
        users,
        preamble_symbols(users, codebook, cfg),
        cfg,
        rng.child("pre") if rng is not None else None,
        noise_variance=sigma2,
    )
    obs = SlotObservation(preamble=demodulate_fd(pre_td, cfg), noise_variance=sigma2)
    if include_payload:
        pay_td = simulate_td(
            users,
            payload_slot_symbols(users, cfg),
            cfg,
            rng.child("pay") if rng is not None else None,
            subcarriers=cfg.coding_sub,
            slot_offset=cfg.preamble_slots,
            noise_variance=sigma2,
        )
        slots = demodulate_fd(pay_td, cfg, subcarriers=cfg.coding_sub)
        obs.coding = np.concatenate(slots, axis=0)  # symbol-major stacking
    return obs


# ---------------------------------------------------------------------- #
# frequency-domain dictionary model

def build_dictionary(codebook: Codebook, cfg: SystemConfig) -> np.ndarray:
    """G = [G_1 .. G_L], G_l = [a_1 (.) f_l, ..., a_N (.) f_l]; S x (N*L).

    1-based column I maps to codeword ((I-1) mod N)+1 and tap ceil(I/N),
    i.e. delay ceil(I/N)-1.
    """
    f = partial_dft(cfg.n_fft, cfg.occupied, cfg.cp_len)  # S x L
    # (S, L, N) -> columns ordered delay-major, codeword fastest
    g = f[:, :, None] * codebook.matrix[:, None, :]
    return g.reshape(cfg.preamble_len, cfg.cp_len * codebook.n_codewords)


def build_truth_x(users, t: int, cfg: SystemConfig, n_codewords: int) -> np.ndarray:
    """Ground-truth coefficient matrix X^t (N*L x M) for slot t (1-based).

    Row (tau_l + tau)*N + (d-1) accumulates sqrt(N_c) * diag_gain * tap gain;
    colliding (tap, codeword) pairs superpose.
    """
    x = np.zeros((cfg.cp_len * n_codewords, cfg.n_antennas), dtype=complex)
    root = np.sqrt(cfg.n_fft)
    for u in users:
        p = diag_gain(u.eps, t, cfg)
        d0 = u.enc.indices[t - 1] - 1
        for l, delay in enumerate(u.delays):
            eq = delay + u.tau
            if eq >= cfg.cp_len:
                raise ValueError("equivalent tap index exceeds the CP length")
            x[eq * n_codewords + d0] += root * p * u.gains[l]
    return x


def assemble_fd_model(
    users,
    codebook: Codebook,
    t: int,
    cfg: SystemConfig,
    rng: RngStream | None = None,
    noise_variance: float | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(G, X^t, Y^t = G X^t + Z) for preamble slot t under the diagonal-CFO
    approximation."""
    g = build_dictionary(codebook, cfg)
    x = build_truth_x(users, t, cfg, codebook.n_codewords)
    y = g @ x
    sigma2 = cfg.noise_variance if noise_variance is None else noise_variance
    if rng is not None and sigma2 > 0:
        y = y + sample_complex_gaussian(rng.child("noise", t), y.shape, sigma2)
    return g, x, y


# ---------------------------------------------------------------------- #
# debugging dump: shape-prefixed little-endian complex64 tensors

def dump_tensors(path: str, arrays) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(arrays)))
        for arr in arrays:
            arr = np.ascontiguousarray(arr, dtype=np.complex64)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype("<c8").tobytes())


def load_tensors(path: str) -> list[np.ndarray]:
    out = []
    with open(path, "rb") as fh:
        (count,) = struct.unpack("<I", fh.read(4))
        for _ in range(count):
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            n_items = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(fh.read(8 * n_items), dtype="<c8")
            out.append(data.reshape(shape).copy())
    return out
