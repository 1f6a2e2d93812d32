"""Asynchronous grant-free massive random access over MIMO-OFDM with
codeword collisions: transmit chain, channel simulation, sparse recovery,
graph-based collision resolution, payload decoding, and Monte Carlo tooling.
"""

from .config import SystemConfig, load_config, preset, save_config, validate
from .encoder import (
    Codebook,
    EncodedUser,
    PayloadEncoding,
    TreeCode,
    build_codebook,
    build_payload_encoding,
    derive_interleaver,
    encode_user,
)
from .channel import (
    SlotObservation,
    UserGroundTruth,
    assemble_fd_model,
    build_dictionary,
    build_truth_x,
    draw_users,
    fd_channel,
    observe,
    simulate_td,
)
from .sbl import SblResult, detect_support, run_jadce, sbl_single_slot
from .graph import (
    DecodingGraph,
    RecoveredUser,
    reconstruct_fd_channels,
    run_gb_cr2,
    tree_decode,
)
from .flat import detect_flat_support, lmmse_preamble, lmmse_symbols, refine_offsets
from .payload import assemble_messages, decode_user_payload
from .metrics import MetricsReport, detection_rates, nmse_db
from .runner import run_scenario, write_csv, write_json

__version__ = "0.1.0"

__all__ = [
    "SystemConfig", "load_config", "preset", "save_config", "validate",
    "Codebook", "EncodedUser", "PayloadEncoding", "TreeCode",
    "build_codebook", "build_payload_encoding", "derive_interleaver", "encode_user",
    "SlotObservation", "UserGroundTruth", "assemble_fd_model",
    "build_dictionary", "build_truth_x", "draw_users", "fd_channel",
    "observe", "simulate_td",
    "SblResult", "detect_support", "run_jadce", "sbl_single_slot",
    "DecodingGraph", "RecoveredUser", "reconstruct_fd_channels",
    "run_gb_cr2", "tree_decode",
    "detect_flat_support", "lmmse_preamble", "lmmse_symbols", "refine_offsets",
    "assemble_messages", "decode_user_payload",
    "MetricsReport", "detection_rates", "nmse_db",
    "run_scenario", "write_csv", "write_json",
    "__version__",
]
