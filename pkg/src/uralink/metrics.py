"""Per-trial and aggregate performance metrics: NMSE, offset estimation
errors, detection rates, SNR and energy-per-bit accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig


@dataclass
class MetricsReport:
    scenario: str = ""
    snr_db: float = math.nan
    ebn0_db: float = math.nan
    trials: int = 0
    nmse_db: float = math.nan
    tee: float = math.nan
    fee: float = math.nan
    p_md: float = math.nan
    p_fa: float = math.nan
    p_e: float = math.nan
    ep_tree: float = math.nan
    ep_gbcr2: float = math.nan
    k_hat_mean: float = math.nan
    seconds: float = math.nan
    stderr: dict = field(default_factory=dict)


def nmse_db(x_hat: np.ndarray, x: np.ndarray) -> float:
    """10 log10(||X_hat - X||^2 / ||X||^2)."""
    num = float(np.linalg.norm(np.asarray(x_hat) - np.asarray(x)) ** 2)
    den = float(np.linalg.norm(x) ** 2)
    if den == 0.0:
        raise ValueError("reference has zero energy")
    if num == 0.0:
        return -math.inf
    return 10.0 * math.log10(num / den)


def detection_rates(true_msgs, recovered: set) -> tuple[float, float]:
    """P_md = fraction of true messages absent from the list; P_fa =
    fraction of list entries matching no true message (0 for empty list)."""
    truth = [tuple(int(b) for b in m) for m in true_msgs]
    truth_set = set(truth)
    missed = sum(1 for m in truth if m not in recovered)
    p_md = missed / len(truth) if truth else 0.0
    if recovered:
        phantoms = sum(1 for m in recovered if m not in truth_set)
        p_fa = phantoms / len(recovered)
    else:
        p_fa = 0.0
    return p_md, p_fa


def offset_errors(matches) -> tuple[float, float]:
    """Mean |tau_hat - tau| and |eps_hat - eps| over matched users.

    matches: iterable of (tau, tau_hat, eps, eps_hat). Empty -> NaN.
    """
    taus, epss = [], []
    for tau, tau_hat, eps, eps_hat in matches:
        taus.append(abs(tau_hat - tau))
        epss.append(abs(eps_hat - eps))
    if not taus:
        return math.nan, math.nan
    return float(np.mean(taus)), float(np.mean(epss))


def expected_signal_energy_per_slot(cfg: SystemConfig) -> float:
    """Analytic E||signal||^2 of one preamble slot across antennas.

    Unit-norm-squared-L_p codebooks (gaussian, scaled identity) put L_p
    times the per-user energy of the unscaled identity codebook.
    """
    per_user = cfg.n_antennas * cfg.tap_power * cfg.tx_power
    if cfg.codebook_kind == "gaussian" or cfg.identity_scaled:
        per_user *= cfg.preamble_len
    return cfg.n_active * per_user


def noise_for_snr(cfg: SystemConfig, snr_db: float) -> float:
    """Invert SNR = 10 log10(E_slot / (L_p M sigma^2)) for sigma^2."""
    e_slot = expected_signal_energy_per_slot(cfg)
    return e_slot / (cfg.preamble_len * cfg.n_antennas * 10.0 ** (snr_db / 10.0))


def snr_and_ebn0(cfg: SystemConfig, signal_energy_per_slot: float, noise_variance: float) -> tuple[float, float]:
    """(SNR dB, Eb/N0 dB); SNR from measured or analytic slot energy,
    Eb/N0 = L_tot * P / (B * N_0). Noise-free -> both +inf."""
    if noise_variance <= 0.0:
        return math.inf, math.inf
    snr = 10.0 * math.log10(
        signal_energy_per_slot / (cfg.preamble_len * cfg.n_antennas * noise_variance)
    )
    ebn0 = 10.0 * math.log10(
        cfg.total_len * cfg.tx_power / (cfg.msg_bits * noise_variance)
    )
    return snr, ebn0


class RunningMean:
    """Order-independent streamed mean via exact summation."""

    def __init__(self) -> None:
        self._values: list[float] = []

    def add(self, value: float) -> None:
        if not math.isnan(value):
            self._values.append(float(value))

    @property
    def n(self) -> int:
        return len(self._values)

    @property
    def mean(self) -> float:
        if not self._values:
            return math.nan
        return math.fsum(self._values) / len(self._values)

    @property
    def stderr(self) -> float:
        n = len(self._values)
        if n < 2:
            return math.nan
        mu = self.mean
        var = math.fsum((v - mu) ** 2 for v in self._values) / (n - 1)
        return math.sqrt(var / n)
