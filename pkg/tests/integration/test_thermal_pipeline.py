"""
Integration tests: Cartan decomposition + RBM circuit against exact
diagonalization.
"""

import numpy as np
import pytest

pytestmark = pytest.mark.integration


def _trace_distance(a, b):
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a - b))))


class TestThermalState:
    """K e^{-beta h} K^dagger / Z against the exact Gibbs state."""

    @pytest.mark.parametrize("beta", [0.0, 0.5, 1.0, 2.0])
    def test_mixed_start(self, xxz3, decomposition3, beta):
        from carbm.engine.experiments import apply_k, ed_gibbs_state
        from carbm.engine.simulator import prepare_initial, run_ite

        run = run_ite(prepare_initial(3), decomposition3.h, beta)
        thermal = apply_k(run.state, decomposition3)
        rho = thermal.reduced([0, 1, 2])
        assert _trace_distance(rho, ed_gibbs_state(xxz3, beta)) < 1e-6
        assert thermal.check(psd=True, tol=1e-10) == []

    def test_gibbs_of_h_is_exact(self, decomposition3):
        """Before K the circuit state is the Gibbs state of h itself."""
        from carbm.engine.experiments import ed_gibbs_state
        from carbm.engine.simulator import prepare_initial, run_ite

        run = run_ite(prepare_initial(3), decomposition3.h, 1.0)
        assert _trace_distance(run.state.reduced([0, 1, 2]), ed_gibbs_state(decomposition3.h, 1.0)) < 1e-8

    def test_tfd_matches_mixed(self, decomposition3):
        from carbm.engine.experiments import apply_k
        from carbm.engine.simulator import prepare_initial, run_ite

        mixed = apply_k(run_ite(prepare_initial(3), decomposition3.h, 1.0).state, decomposition3)
        tfd_run = run_ite(prepare_initial(3, "tfd_purified"), decomposition3.h, 1.0)
        tfd = apply_k(tfd_run.state, decomposition3)
        np.testing.assert_allclose(tfd.reduced([0, 1, 2]), mixed.reduced([0, 1, 2]), atol=1e-10)
        assert tfd.purity() == pytest.approx(1.0, abs=1e-10)

    def test_partition_function(self, xxz3, decomposition3):
        from carbm.engine.correction import build_layers, plan_corrections
        from carbm.engine.experiments import ed_complex_beta_oracle
        from carbm.engine.simulator import prepare_initial, run_ite

        h = decomposition3.h
        exact = ed_complex_beta_oracle(xxz3, 1.0, 0.0).real
        for limit in (0, 3):
            plan = plan_corrections(build_layers(h, 1.0), limit)
            run = run_ite(prepare_initial(3), h, 1.0, plan)
            assert run.partition_function() == pytest.approx(exact, rel=1e-6)

    def test_corrected_expectation(self, xxz3, decomposition3):
        from carbm.engine.experiments import ed_thermal_expectation, make_plan, thermal_expectation

        plan = make_plan(decomposition3.h, 1.5, max_corrections=3)
        value, run = thermal_expectation(decomposition3, 1.5, xxz3, plan)
        assert value == pytest.approx(ed_thermal_expectation(xxz3, 1.5, xxz3), abs=1e-6)
        assert plan.n_corrected >= 1
        assert plan.verify() == []

    def test_correction_never_lowers_success(self, decomposition3):
        from carbm.engine.experiments import make_plan
        from carbm.engine.simulator import prepare_initial, run_ite

        h = decomposition3.h
        for beta in (0.3, 1.0, 3.0):
            plain = run_ite(prepare_initial(3), h, beta, make_plan(h, beta, 0))
            corrected = run_ite(prepare_initial(3), h, beta, make_plan(h, beta, 3))
            assert corrected.success_probability >= plain.success_probability - 1e-12
            np.testing.assert_allclose(corrected.state.data, plain.state.data, atol=1e-10)


    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_oversized_correction_request_capped(self, n):
        """Asking for every layer corrected still corrects only n of them."""
        import itertools

        from carbm.engine.experiments import ed_gibbs_state, make_plan
        from carbm.engine.pauli_algebra import PauliSentence
        from carbm.engine.simulator import prepare_initial, run_ite

        texts = ["".join(t) for t in itertools.product("IZ", repeat=n) if "Z" in t]
        h = PauliSentence.from_terms(n, [(text, 0.2 + 0.1 * k) for k, text in enumerate(texts)])
        plain = run_ite(prepare_initial(n), h, 1.0, make_plan(h, 1.0, 0))
        plan = make_plan(h, 1.0, max_corrections=len(texts))
        corrected = run_ite(prepare_initial(n), h, 1.0, plan)

        assert plan.n_corrected == n
        assert plan.verify() == []
        np.testing.assert_allclose(corrected.state.data, plain.state.data, atol=1e-10)
        assert corrected.success_probability >= plain.success_probability - 1e-12
        rho = corrected.state.reduced(list(range(n)))
        assert _trace_distance(rho, ed_gibbs_state(h, 1.0)) < 1e-8


class TestDecompositionModels:
    """Decompositions of the model Hamiltonians."""

    def test_gross_neveu(self, gn_spec):
        from carbm.engine.cartan import decompose, z_product_hint
        from carbm.engine.models import build_gross_neveu

        H = build_gross_neveu(gn_spec)
        d = decompose(H, csa_hint=z_product_hint(H.n), seed=0)
        assert d.residual < 1e-6
        np.testing.assert_allclose(
            np.linalg.eigvalsh(d.h.to_matrix()), np.linalg.eigvalsh(H.to_matrix()), atol=1e-5
        )

    @pytest.mark.slow
    @pytest.mark.parametrize("g_r", [0.0, 0.3])
    @pytest.mark.parametrize("J,Jz", [(0.1, 1.0), (1.0, 1.0), (10.0, 1.0), (1.0, 4.0)])
    def test_four_site_xxz(self, J, Jz, g_r):
        from carbm.engine.cartan import decompose, z_product_hint
        from carbm.engine.experiments import ed_gibbs_state
        from carbm.engine.models import XXZSpec, build_xxz

        H = build_xxz(XXZSpec(L=4, J=J, Jz=Jz, g_r=g_r))
        d = decompose(H, csa_hint=z_product_hint(4), seed=0)
        assert d.residual < 1e-6
        assert d.h.without_identity().is_abelian()

        # K e^{-h} K^dagger / Z against e^{-H} / Z at beta = 1
        bound = max(1e-6, 10 * d.residual * np.linalg.norm(H.to_matrix()))
        rho = d.apply_k(ed_gibbs_state(d.h, 1.0))
        assert _trace_distance(rho, ed_gibbs_state(H, 1.0)) < bound


class TestValidationSuite:
    """The validate command's invariant checks."""

    def test_default_suite_passes(self):
        from carbm.engine.validation import run_validation_suite

        report = run_validation_suite()
        assert report.is_valid, report.issues
        names = [c.name for c in report.checks]
        assert names == [
            "rbm_identity",
            "success_formula",
            "decomposition_residual",
            "thermal_trace_distance",
            "partition_relative",
            "correction_state",
        ]

    def test_individual_checks(self):
        from carbm.engine.validation import check_rbm_identity, check_success_formula

        assert check_rbm_identity().passed
        assert check_success_formula(seed=3, samples=5).passed
