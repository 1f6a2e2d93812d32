"""Tree code, codebooks, interleavers, and payload encoding."""

import numpy as np
import pytest

from uralink.config import preset
from uralink.encoder import (
    Codebook,
    TreeCode,
    build_codebook,
    build_payload_encoding,
    derive_interleaver,
    encode_payload,
    encode_user,
    index_to_subblock,
    subblock_to_index,
)


class TestTreeCode:
    def test_worked_two_bit_parity(self):
        """v = [1, 0] against G = [[1, 0], [1, 1]] yields r_2 = [1, 1]."""
        tree = TreeCode(2, (0, 2), seed=0)
        tree.parity_mats[(1, 2)] = np.array([[1, 0], [1, 1]])
        subblocks = tree.encode(np.array([1, 0]))
        np.testing.assert_array_equal(subblocks[0], [1, 0])
        np.testing.assert_array_equal(subblocks[1], [1, 1])

    def test_all_zero_message(self):
        tree = TreeCode(6, (0, 0, 6, 6), seed=2024)
        subblocks = tree.encode(np.zeros(12, dtype=int))
        np.testing.assert_array_equal(subblocks, np.zeros((4, 6), dtype=int))
        assert tree.encode_indices(np.zeros(12, dtype=int)) == (1, 1, 1, 1)

    def test_linearity_over_gf2(self):
        tree = TreeCode(6, (0, 0, 6, 6), seed=2024)
        rng = np.random.default_rng(1)
        u = rng.integers(0, 2, 12)
        v = rng.integers(0, 2, 12)
        lhs = tree.encode((u + v) % 2)
        rhs = (tree.encode(u) + tree.encode(v)) % 2
        np.testing.assert_array_equal(lhs, rhs)

    def test_tail_stages_are_pure_parity(self):
        tree = TreeCode(6, (0, 0, 6, 6), seed=2024)
        assert tree.info_alloc == (6, 6, 0, 0)
        rng = np.random.default_rng(3)
        bits = rng.integers(0, 2, 12)
        v1, v2 = bits[:6], bits[6:]
        subblocks = tree.encode(bits)
        want3 = (tree.parity_mats[(1, 3)] @ v1 + tree.parity_mats[(2, 3)] @ v2) % 2
        np.testing.assert_array_equal(subblocks[2], want3)

    def test_seed_determinism(self):
        a = TreeCode(6, (0, 0, 6, 6), seed=5)
        b = TreeCode(6, (0, 0, 6, 6), seed=5)
        c = TreeCode(6, (0, 0, 6, 6), seed=6)
        for key, mat in a.parity_mats.items():
            np.testing.assert_array_equal(mat, b.parity_mats[key])
        assert any(
            not np.array_equal(mat, c.parity_mats[key]) for key, mat in a.parity_mats.items()
        )

    def test_first_stage_parity_rejected(self):
        with pytest.raises(ValueError):
            TreeCode(2, (1, 1), seed=0)


class TestSubblockIndexing:
    def test_extremes(self):
        assert subblock_to_index(np.zeros(7, dtype=int)) == 1
        assert subblock_to_index(np.ones(7, dtype=int)) == 128

    def test_round_trip(self):
        for d in range(1, 65):
            assert subblock_to_index(index_to_subblock(d, 6)) == d


class TestCodebook:
    def test_gaussian_column_energy(self, desk_fsf):
        cb = build_codebook(desk_fsf)
        norms = np.sum(np.abs(cb.matrix) ** 2, axis=0)
        np.testing.assert_allclose(norms, desk_fsf.preamble_len, rtol=1e-10)

    def test_identity_structure(self, desk_flat):
        cb = build_codebook(desk_flat)
        np.testing.assert_array_equal(cb.matrix, np.eye(64))
        np.testing.assert_array_equal(cb.column(3), np.eye(64)[:, 2])

    def test_identity_needs_square(self, desk_flat):
        bad = desk_flat.replace(occupied=tuple(range(1, 33)))
        with pytest.raises(ValueError):
            build_codebook(bad)

    def test_seed_determinism(self, desk_fsf):
        a = build_codebook(desk_fsf, seed=9)
        b = build_codebook(desk_fsf, seed=9)
        c = build_codebook(desk_fsf, seed=10)
        np.testing.assert_array_equal(a.matrix, b.matrix)
        assert not np.allclose(a.matrix, c.matrix)


class TestInterleaver:
    def test_is_permutation(self):
        pi = derive_interleaver((3, 1, 4, 1), 2688, seed=11)
        np.testing.assert_array_equal(np.sort(pi), np.arange(2688))

    def test_deterministic_in_indices(self):
        a = derive_interleaver((3, 1, 4, 1), 256, seed=11)
        b = derive_interleaver((3, 1, 4, 1), 256, seed=11)
        c = derive_interleaver((3, 1, 4, 2), 256, seed=11)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)


class TestPayloadEncoding:
    def test_flat_padding_arithmetic(self):
        pe = build_payload_encoding(preset("flat"))
        assert pe.code.k == 86
        assert pe.code.n == 172
        assert pe.pad_len == 2688 - 172

    def test_zero_message_maps_to_plus_ones(self, desk_flat):
        pe = build_payload_encoding(desk_flat)
        identity = np.arange(desk_flat.coding_len)
        sym = encode_payload(np.zeros(desk_flat.payload_bits, dtype=int), pe, identity)
        np.testing.assert_array_equal(sym[: pe.code.n], np.ones(pe.code.n))
        np.testing.assert_array_equal(sym[pe.code.n:], np.zeros(pe.pad_len))

    def test_interleaved_symbols_demap_to_codeword(self, desk_flat):
        pe = build_payload_encoding(desk_flat)
        rng = np.random.default_rng(7)
        bits = rng.integers(0, 2, desk_flat.payload_bits)
        pi = derive_interleaver((2, 5, 9, 1), desk_flat.coding_len, seed=11)
        sym = encode_payload(bits, pe, pi)
        padded = np.zeros(desk_flat.coding_len)
        padded[pi] = sym
        hard = (padded[: pe.code.n] < 0).astype(int)
        assert not np.any(pe.code.syndrome(hard))
        np.testing.assert_array_equal(pe.code.extract_info(hard), bits)


class TestEncodeUser:
    def test_full_chain_fields(self, desk_flat):
        tree = TreeCode(desk_flat.subblock_len, desk_flat.parity_alloc, desk_flat.tree_seed)
        pe = build_payload_encoding(desk_flat)
        rng = np.random.default_rng(0)
        msg = rng.integers(0, 2, desk_flat.msg_bits)
        enc = encode_user(msg, desk_flat, tree, pe)
        assert len(enc.indices) == desk_flat.preamble_slots
        assert all(1 <= d <= desk_flat.n_codewords for d in enc.indices)
        np.testing.assert_array_equal(enc.preamble_bits, msg[: desk_flat.preamble_bits])
        np.testing.assert_array_equal(enc.payload_bits, msg[desk_flat.preamble_bits:])
        assert enc.payload_symbols.shape == (desk_flat.coding_len,)
        np.testing.assert_array_equal(np.sort(enc.interleaver), np.arange(desk_flat.coding_len))

    def test_preamble_only_when_no_payload_encoding(self, desk_fsf):
        tree = TreeCode(desk_fsf.subblock_len, desk_fsf.parity_alloc, desk_fsf.tree_seed)
        msg = np.zeros(desk_fsf.msg_bits, dtype=int)
        enc = encode_user(msg, desk_fsf, tree, None)
        assert enc.payload_symbols is None
        assert enc.indices == (1, 1, 1, 1)
