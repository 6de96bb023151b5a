import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asymspec.exceptions import InputError
from asymspec.optim import TrainConfig, asymmetric_train
from asymspec.quadbench import (
    QuadParams,
    gpnr_at,
    gpnr_bound_trial,
    random_theorem_trials,
    synth_quadratic,
    theorem_trial,
)


class TestSynth:
    @settings(max_examples=30, deadline=None)
    @given(
        dt=st.integers(1, 10),
        dw=st.integers(1, 20),
        lt=st.floats(0.01, 100.0),
        lw=st.floats(0.01, 100.0),
        c=st.floats(0.0, 0.95),
        seed=st.integers(0, 10**6),
    )
    def test_psd_and_reported_maxima(self, dt, dw, lt, lw, c, seed):
        q = synth_quadratic(dt, dw, lt, lw, c, seed=seed)
        assert np.array_equal(q.H, q.H.T)
        assert np.linalg.eigvalsh(q.H)[0] >= -1e-10 * q.lambda_max
        ref_t = np.linalg.eigvalsh(q.H[:dt, :dt])[-1]
        ref_w = np.linalg.eigvalsh(q.H[dt:, dt:])[-1]
        assert q.lambda_theta == pytest.approx(ref_t, rel=1e-10)
        assert q.lambda_w == pytest.approx(ref_w, rel=1e-10)
        if not q.projected:
            assert q.lambda_theta == pytest.approx(lt, rel=1e-10)
            assert q.lambda_w == pytest.approx(lw, rel=1e-10)

    def test_two_by_two(self):
        q = synth_quadratic(1, 1, 10.0, 1.0)
        np.testing.assert_array_equal(q.H, np.diag([10.0, 1.0]))
        assert q.kappa_block == 10.0

    def test_rejects_bad_targets(self):
        with pytest.raises(InputError):
            synth_quadratic(2, 2, -1.0, 1.0)
        with pytest.raises(InputError):
            synth_quadratic(2, 2, 1.0, 1.0, cross_coupling=1.0)

    def test_objective_gradient_exact(self):
        q = synth_quadratic(2, 3, 3.0, 2.0, 0.4, seed=1)
        psi = np.arange(5.0)
        loss, g = q.objective().loss_and_grad(q.params(psi))
        np.testing.assert_allclose(g.flat(), q.H @ (psi - q.psi_star), atol=1e-14)
        assert isinstance(g, QuadParams)


class TestTheorem:
    def test_forced_equal_scales_keep_kappa(self):
        q = synth_quadratic(3, 4, 10.0, 1.0, 0.2, seed=0)
        tr = theorem_trial(q, q.psi_star + 1.0, 0.01, n_iter=20, force_equal_scales=True)
        for it in tr.iterations:
            assert it.kappa_pre == it.kappa

    def test_block_diagonal_reduction(self):
        # theta is small in norm and large in curvature: s_theta < s_w
        q = synth_quadratic(1, 1, 10.0, 1.0, psi_star=np.array([0.0, 0.0]))
        tr = theorem_trial(q, np.array([0.1, 5.0]), 0.01, n_iter=1)
        it = tr.iterations[0]
        assert it.mild_scaling and it.proportional_gpnr
        assert it.kappa_pre < it.kappa
        # s_theta = 1/10, s_w = 1, so both scaled blocks have unit curvature
        assert it.kappa_pre == pytest.approx(1.0, abs=1e-12)

    def test_identity_exact(self):
        for tr in random_theorem_trials(50, seed=5):
            for it in tr.iterations:
                if it.identity_error is not None:
                    assert it.identity_error <= 1e-12

    def test_start_at_minimizer(self):
        q = synth_quadratic(1, 1, 2.0, 1.0)
        with pytest.raises(InputError):
            theorem_trial(q, q.psi_star.copy(), 0.1)

    def test_hypotheses_imply_reduction_small(self):
        trials = random_theorem_trials(100, seed=11)
        met = [it for tr in trials for it in tr.hypotheses_met]
        assert met
        assert all(it.theorem_holds for it in met)

    def test_matches_training_loop_scales(self):
        # theorem_trial is GD with beta = 0; the generic loop must agree
        q = synth_quadratic(3, 5, 4.0, 0.5, 0.3, seed=2)
        start = q.psi_star + 0.7
        eta = 0.05
        tr = theorem_trial(q, start, eta, n_iter=50)
        cfg = TrainConfig(optimizer="gd", lr_theta=eta, lr_w=eta, beta_theta=0.0, beta_w=0.0, t_max=49, patience=None)
        res = asymmetric_train(q.objective(), q.params(start), cfg, True)
        assert len(res.records) == len(tr.iterations) == 50
        for a, b in zip(tr.iterations, res.records):
            assert b.s_theta == pytest.approx(a.s_theta, rel=1e-12)
            assert b.s_w == pytest.approx(a.s_w, rel=1e-12)
            assert b.rho_theta == pytest.approx(a.rho_theta, rel=1e-12)


class TestGpnrBound:
    def test_hand_computed_rho(self):
        q = synth_quadratic(1, 1, 2.0, 1.0, psi_star=np.array([1.0, 0.0]))
        # grad = H (psi - psi*) = (2 * 1, 1 * 1); ||psi|| = sqrt(5)
        assert gpnr_at(q, np.array([2.0, 1.0])) == pytest.approx(np.sqrt(5.0) / np.sqrt(5.0))

    def test_near_minimizer_all_satisfied(self):
        q = synth_quadratic(4, 8, 5.0, 0.5, 0.5, seed=3, psi_star=np.full(12, 2.0))
        rep = gpnr_bound_trial(q, 0.5, 2000, seed=0)
        assert rep.n_valid + rep.n_excluded == 2000
        assert rep.n_satisfied == rep.n_valid and rep.max_ratio <= 1.0

    def test_excluded_points_counted(self):
        q = synth_quadratic(1, 1, 1.0, 1.0, psi_star=np.zeros(2))
        rep = gpnr_bound_trial(q, 1.0, 100, seed=0)
        # psi* = 0 means ||eps|| = ||psi||, all on the boundary and valid
        assert rep.n_valid == 100
