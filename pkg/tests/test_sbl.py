"""Sparse Bayesian learning estimator: update equations, invariances,
stopping behavior, and detection quality on the desk scenario."""

import csv
import math

import numpy as np
import pytest

from uralink.channel import assemble_fd_model, build_dictionary, draw_users
from uralink.encoder import TreeCode, encode_user
from uralink.numerics import RngStream, sample_complex_gaussian
from uralink.sbl import SblResult, detect_support, run_jadce, sbl_single_slot, write_trace_csv


def synthetic_instance(seed, s_dim=16, n_dim=12, m_dim=2, active=(3, 7), sigma2=0.05):
    st = RngStream(seed, "syn")
    g = sample_complex_gaussian(st.child("g"), (s_dim, n_dim), 1.0)
    x = np.zeros((n_dim, m_dim), dtype=complex)
    for r in active:
        x[r] = sample_complex_gaussian(st.child("x", r), m_dim, 4.0)
    y = g @ x + sample_complex_gaussian(st.child("n"), (s_dim, m_dim), sigma2)
    return g, x, y


class TestSingleSweepAlgebra:
    def test_scalar_posterior_mean(self, desk_fsf):
        """g = 2, y = 6, unit prior and noise precisions: mu = 12/5."""
        g = np.array([[2.0 + 0j]])
        y = np.array([[6.0 + 0j]])
        res = sbl_single_slot(y, g, desk_fsf, max_iter=1)
        assert res.x_hat[0, 0] == pytest.approx(2.4, abs=1e-12)

    def test_scalar_precision_update(self, desk_fsf):
        g = np.array([[2.0 + 0j]])
        y = np.array([[6.0 + 0j]])
        res = sbl_single_slot(y, g, desk_fsf, max_iter=1)
        want = (1e-3 + 1) / (1e-4 + 2.4 ** 2 + 0.2)
        assert res.gamma[0] == pytest.approx(want, rel=1e-9)

    def test_zero_observation_stays_zero(self, desk_fsf):
        """Unit-modulus columns keep every row precision identical, so the
        shape hyperparameter (a dispersion measure) must stay at zero."""
        from uralink.numerics import partial_dft

        g = partial_dft(8, range(1, 9), 6)
        y = np.zeros((8, 3), dtype=complex)
        res = sbl_single_slot(y, g, desk_fsf, max_iter=5)
        np.testing.assert_allclose(res.x_hat, 0.0, atol=1e-12)
        assert res.eps == 0.0


class TestInvariances:
    def test_column_permutation_equivariance(self, desk_fsf):
        g, _, y = synthetic_instance(1)
        perm = np.random.default_rng(2).permutation(g.shape[1])
        a = sbl_single_slot(y, g, desk_fsf, max_iter=10, tol=0.0)
        b = sbl_single_slot(y, g[:, perm], desk_fsf, max_iter=10, tol=0.0)
        np.testing.assert_allclose(b.x_hat, a.x_hat[perm], atol=1e-8)

    def test_duplicated_antennas_stay_identical(self, desk_fsf):
        g, _, y = synthetic_instance(3, m_dim=1)
        y2 = np.hstack([y, y])
        res = sbl_single_slot(y2, g, desk_fsf, max_iter=12, tol=0.0)
        np.testing.assert_allclose(res.x_hat[:, 0], res.x_hat[:, 1], atol=1e-12)

    def test_antennas_decouple_within_first_sweep(self, desk_fsf):
        """Sweep 1 runs on the shared initial hyperparameters, so column 0 of
        the estimate cannot depend on the other antenna's data yet."""
        g, _, y = synthetic_instance(4, m_dim=2)
        both = sbl_single_slot(y, g, desk_fsf, max_iter=1)
        solo = sbl_single_slot(y[:, :1], g, desk_fsf, max_iter=1)
        np.testing.assert_allclose(both.x_hat[:, 0], solo.x_hat[:, 0], atol=1e-12)


class TestStopping:
    def test_converged_implies_small_relative_change(self, desk_fsf):
        g, _, y = synthetic_instance(5)
        res = sbl_single_slot(y, g, desk_fsf, tol=1e-3)
        assert res.converged
        assert res.trace[-1][2] < 1e-3
        assert res.n_iters == len(res.trace)

    def test_iteration_cap_reported(self, desk_fsf):
        g, _, y = synthetic_instance(6)
        res = sbl_single_slot(y, g, desk_fsf, max_iter=3, tol=0.0)
        assert not res.converged
        assert res.n_iters == 3

    def test_forced_full_run_stays_finite(self, desk_fsf, fsf_codebook):
        users = draw_users(desk_fsf, RngStream(7, "u"))
        tree = TreeCode(desk_fsf.subblock_len, desk_fsf.parity_alloc, desk_fsf.tree_seed)
        for u in users:
            u.enc = encode_user(u.msg_bits, desk_fsf, tree, None)
        _, x, y = assemble_fd_model(users, fsf_codebook, 1, desk_fsf, RngStream(7, "n"), 1.0)
        g = build_dictionary(fsf_codebook, desk_fsf)
        res = sbl_single_slot(y, g, desk_fsf, dtype=np.complex64, tol=0.0, x_true=x)
        assert res.n_iters == desk_fsf.sbl_max_iter
        assert np.all(np.isfinite(res.x_hat))
        assert np.all(np.isfinite(res.gamma))
        assert res.trace[0][2] == math.inf
        for it, nmse, rel, lam, gmean in res.trace[1:]:
            assert math.isfinite(nmse) and math.isfinite(rel)
            assert math.isfinite(lam) and math.isfinite(gmean)


class TestSupportDetection:
    def _result(self, energies):
        x = np.sqrt(np.asarray(energies, dtype=float))[:, None].astype(complex)
        return SblResult(x_hat=x, gamma=np.ones(len(energies)), lam=1.0, eps=0.0, n_iters=1)

    def test_explicit_threshold(self, desk_fsf):
        res = self._result([0.0, 10.0, 0.5])
        assert detect_support(res, desk_fsf, v=1.0).tolist() == [1]
        assert detect_support(res, desk_fsf, v=0.1).tolist() == [1, 2]

    def test_infinite_threshold_empty(self, desk_fsf):
        res = self._result([0.0, 10.0, 0.5])
        assert detect_support(res, desk_fsf, v=np.inf).size == 0

    def test_relative_floor_kills_numerical_dust(self, desk_fsf):
        res = self._result([1.0, 1e-14])
        assert detect_support(res, desk_fsf, v=1e-20).tolist() == [0]


class TestMultiSlot:
    def test_slots_processed_independently(self, desk_fsf):
        g, x, y = synthetic_instance(8)
        out = run_jadce([y, y.copy()], g, desk_fsf, max_iter=15, x_true_slots=[x, None])
        assert len(out) == 2
        np.testing.assert_array_equal(out[0].x_hat, out[1].x_hat)
        assert math.isfinite(out[0].trace[-1][1])
        assert math.isnan(out[1].trace[-1][1])

    def test_trace_csv_layout(self, desk_fsf, tmp_path):
        g, x, y = synthetic_instance(9)
        out = run_jadce([y, y], g, desk_fsf, max_iter=6, tol=0.0, x_true_slots=[x, None])
        p = str(tmp_path / "trace.csv")
        write_trace_csv(out, p)
        with open(p, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["slot", "iteration", "nmse", "lambda_hat", "gamma_mean"]
        assert len(rows) == 1 + 12
        assert rows[1][0] == "1" and rows[7][0] == "2"
        assert rows[1][2] != "" and rows[7][2] == ""
        want = float(np.linalg.norm(out[0].x_hat - x) ** 2 / np.linalg.norm(x) ** 2)
        assert float(rows[6][2]) == pytest.approx(want, rel=1e-5)


class TestNullScenario:
    def test_no_users_stays_at_noise_floor(self, desk_fsf, fsf_codebook):
        """With nothing transmitted the estimate keeps no spurious support."""
        g = build_dictionary(fsf_codebook, desk_fsf)
        sigma2 = 1.0
        y = sample_complex_gaussian(RngStream(10, "null"), (g.shape[0], desk_fsf.n_antennas), sigma2)
        res = sbl_single_slot(y, g, desk_fsf, dtype=np.complex64, tol=1e-5)
        assert float(np.mean(np.abs(res.x_hat) ** 2)) < sigma2 / 4
        assert 1 / (5 * sigma2) < res.lam < 5 / sigma2
        assert detect_support(res, desk_fsf).size == 0


class TestDeskScenarioQuality:
    def test_converges_within_budget_at_all_snrs(self, sbl_sweep):
        for snr, block in sbl_sweep.items():
            for t in block["trials"]:
                assert t["converged"], f"SNR {snr}: trial failed to converge"
                assert t["n_iters"] <= 80

    def test_support_recall_and_precision(self, sbl_sweep):
        trials = sbl_sweep[10]["trials"]
        tp = sum(t["tp"] for t in trials)
        fp = sum(t["fp"] for t in trials)
        fn = sum(t["fn"] for t in trials)
        assert tp / (tp + fn) >= 0.95
        assert tp / (tp + fp) >= 0.9
