"""
Unit tests for RBM parameters, the Clifford reduction and the
block-encoding gadget.
"""

import math

import numpy as np
import pytest
from scipy.linalg import expm

pytestmark = pytest.mark.unit


class TestParams:
    """Tests for the two parameterizations."""

    def test_standard_zero_kappa(self):
        from carbm.engine.rbm_encoding import params_standard

        p = params_standard(0.0)
        assert (p.A, p.W, p.b) == (0.5, 0.0, 0.0)

    def test_standard_half(self):
        from carbm.engine.rbm_encoding import params_standard

        p = params_standard(0.5)
        assert p.A == pytest.approx(0.824361, abs=1e-6)
        assert p.W == pytest.approx(0.597034, abs=1e-6)
        assert p.W == pytest.approx(0.5 * math.acos(math.exp(-1.0)))
        assert p.b == p.W

    def test_standard_negative_kappa_flips_bias(self):
        from carbm.engine.rbm_encoding import params_standard

        pos, neg = params_standard(0.5), params_standard(-0.5)
        assert neg.A == pos.A
        assert neg.W == pos.W
        assert neg.b == -pos.W
        assert neg.s == -1

    def test_correctable_zero_kappa(self):
        from carbm.engine.rbm_encoding import params_correctable

        p = params_correctable(0.0)
        assert p.A == pytest.approx(math.sqrt(0.5))
        assert p.W == pytest.approx(0.0, abs=1e-15)
        assert p.b == pytest.approx(math.pi / 4)

    def test_correctable_half(self):
        from carbm.engine.rbm_encoding import params_correctable

        p = params_correctable(0.5)
        assert p.A == pytest.approx(math.sqrt(math.cosh(1.0) / 2.0))
        assert p.A == pytest.approx(0.878374, abs=1e-6)
        assert p.W == pytest.approx(math.atan(math.e) - math.pi / 4)
        assert p.W == pytest.approx(0.43288, abs=1e-5)

    def test_unknown_scheme(self):
        from carbm.engine.rbm_encoding import make_params

        with pytest.raises(ValueError):
            make_params(0.5, "exact")


class TestReduceToZ:
    """Tests for the Clifford pre-circuit."""

    def test_z_needs_no_gates(self):
        from carbm.engine.pauli_algebra import PauliString
        from carbm.engine.rbm_encoding import reduce_to_z

        gates, target = reduce_to_z(PauliString.from_text("ZI"))
        assert gates == []
        assert target == 0

    def test_x_gets_hadamard(self):
        from carbm.engine.pauli_algebra import PauliString
        from carbm.engine.rbm_encoding import CliffordGate, reduce_to_z

        gates, target = reduce_to_z(PauliString.from_text("X"))
        assert gates == [CliffordGate("h", (0,))]
        assert target == 0

    @pytest.mark.parametrize("text", ["ZZZ", "XIY", "IYX", "YZX", "IIZ", "XXXX"])
    def test_conjugation_gives_single_z(self, text):
        """U sigma U^dagger = Z_target densely."""
        from carbm.engine.pauli_algebra import PauliString
        from carbm.engine.rbm_encoding import reduce_to_z
        from carbm.engine.simulator import circuit_unitary

        sigma = PauliString.from_text(text)
        gates, target = reduce_to_z(sigma)
        u = circuit_unitary(gates, sigma.n)
        z_target = PauliString.from_sites(sigma.n, {target: "Z"}).to_matrix()
        np.testing.assert_allclose(u @ sigma.to_matrix() @ u.conj().T, z_target, atol=1e-12)
        assert target == sigma.support[0]

    def test_identity_rejected(self):
        from carbm.core.errors import IdentityStringError
        from carbm.engine.pauli_algebra import PauliString
        from carbm.engine.rbm_encoding import reduce_to_z

        with pytest.raises(IdentityStringError):
            reduce_to_z(PauliString.from_text("II"))

    def test_inverse_circuit(self):
        from carbm.engine.pauli_algebra import PauliString
        from carbm.engine.rbm_encoding import invert_circuit, reduce_to_z
        from carbm.engine.simulator import circuit_unitary

        gates, _ = reduce_to_z(PauliString.from_text("YXZ"))
        u = circuit_unitary(gates, 3)
        v = circuit_unitary(invert_circuit(gates), 3)
        np.testing.assert_allclose(v @ u, np.eye(8), atol=1e-12)


class TestBlockEncoding:
    """Tests for the gadget identity 2A <0|U|0> = e^{-kappa Z}."""

    @pytest.mark.parametrize("scheme", ["standard", "correctable"])
    @pytest.mark.parametrize("kappa", [-1.2, -0.5, 0.0, 0.3, 0.5, 2.0])
    def test_success_branch(self, scheme, kappa):
        from carbm.engine.rbm_encoding import block_unitary, make_params

        params = make_params(kappa, scheme)
        u = block_unitary(params, target=0, ancilla=1)
        # ancilla is qubit 1 (least significant): |0>_a rows/cols 0 and 2
        block = 2.0 * params.A * u[np.ix_([0, 2], [0, 2])]
        np.testing.assert_allclose(block, np.diag([math.exp(-kappa), math.exp(kappa)]), atol=1e-12)

    @pytest.mark.parametrize("kappa", [-0.8, 0.4, 1.5])
    def test_correctable_failure_branch(self, kappa):
        """The failure branch applies -i e^{+kappa Z}."""
        from carbm.engine.rbm_encoding import block_unitary, make_params

        params = make_params(kappa, "correctable")
        u = block_unitary(params, target=0, ancilla=1)
        block = 2.0 * params.A * u[np.ix_([1, 3], [0, 2])]
        np.testing.assert_allclose(
            block, -1j * np.diag([math.exp(kappa), math.exp(-kappa)]), atol=1e-12
        )

    def test_block_unitary_is_unitary(self):
        from carbm.engine.rbm_encoding import block_unitary, make_params

        u = block_unitary(make_params(0.7), target=1, ancilla=0, n_qubits=3)
        np.testing.assert_allclose(u @ u.conj().T, np.eye(8), atol=1e-12)

    def test_target_ancilla_collision(self):
        from carbm.core.errors import IndexCollisionError
        from carbm.engine.rbm_encoding import make_params, rbm_generators

        with pytest.raises(IndexCollisionError):
            rbm_generators(make_params(0.5), target=1, ancilla=1, n_qubits=2)


class TestSuccessProbability:
    """Tests for success_probability."""

    def test_standard_mixed(self):
        from carbm.engine.pauli_algebra import PauliString
        from carbm.engine.rbm_encoding import make_params, success_probability

        rho = np.eye(4) / 4
        for kappa in (0.1, 0.5, -1.0):
            p = success_probability(make_params(kappa), rho, PauliString.from_text("ZX"))
            assert p == pytest.approx((1 + math.exp(-4 * abs(kappa))) / 2, abs=1e-12)

    def test_correctable_mixed_is_half(self):
        from carbm.engine.pauli_algebra import PauliString
        from carbm.engine.rbm_encoding import make_params, success_probability

        rho = np.eye(2) / 2
        for kappa in (-2.0, 0.0, 0.7, 3.0):
            p = success_probability(make_params(kappa, "correctable"), rho, PauliString.from_text("Y"))
            assert p == pytest.approx(0.5, abs=1e-12)

    def test_standard_favourable_eigenstate(self):
        """alpha = 0: the state lies in the e^{+|kappa|} eigenspace, p = 1."""
        from carbm.engine.pauli_algebra import PauliString
        from carbm.engine.rbm_encoding import make_params, success_probability

        one = np.diag([0.0, 1.0]).astype(complex)
        p = success_probability(make_params(0.8), one, PauliString.from_text("Z"))
        assert p == pytest.approx(1.0)

    def test_zero_kappa_always_succeeds(self, random_density):
        from carbm.engine.pauli_algebra import PauliString
        from carbm.engine.rbm_encoding import make_params, success_probability

        p = success_probability(make_params(0.0), random_density(2), PauliString.from_text("XY"))
        assert p == pytest.approx(1.0)

    @pytest.mark.parametrize("scheme", ["standard", "correctable"])
    def test_closed_form_matches_cos_squared(self, scheme, random_density):
        """Closed forms agree with Tr[cos^2(W sigma + b) rho]."""
        from scipy.linalg import cosm

        from carbm.engine.pauli_algebra import PauliString
        from carbm.engine.rbm_encoding import (
            make_params,
            success_probability,
            success_probability_trace,
        )

        sigma = PauliString.from_text("XZ")
        for seed, kappa in enumerate((-1.3, -0.2, 0.4, 1.1)):
            rho = random_density(2, seed=seed)
            params = make_params(kappa, scheme)
            c = cosm(params.W * sigma.to_matrix() + params.b * np.eye(4))
            exact = float(np.real(np.trace(c @ c @ rho)))
            assert success_probability(params, rho, sigma) == pytest.approx(exact, abs=1e-12)
            assert success_probability_trace(params, rho, sigma) == pytest.approx(exact, abs=1e-12)

    def test_matches_gadget(self, random_density):
        """Branch probability of the dense gadget equals the formula."""
        from carbm.engine.pauli_algebra import PauliString
        from carbm.engine.rbm_encoding import block_unitary, make_params, success_probability

        rho = random_density(1, seed=9)
        params = make_params(0.9)
        u = block_unitary(params, target=0, ancilla=1)
        full = u @ np.kron(rho, np.diag([1.0, 0.0])) @ u.conj().T
        p_dense = float(np.real(full[0, 0] + full[2, 2]))
        assert success_probability(params, rho, PauliString.from_text("Z")) == pytest.approx(p_dense)

    def test_unnormalized_state_rejected(self):
        from carbm.core.errors import StateNormalizationError
        from carbm.engine.pauli_algebra import PauliString
        from carbm.engine.rbm_encoding import make_params, success_probability

        with pytest.raises(StateNormalizationError):
            success_probability(make_params(0.5), np.eye(2), PauliString.from_text("Z"))


class TestITELayer:
    """Tests for ITELayer validation."""

    def test_identity_layer_rejected(self):
        from carbm.core.errors import IdentityStringError
        from carbm.engine.pauli_algebra import PauliString
        from carbm.engine.rbm_encoding import ITELayer, make_params

        with pytest.raises(IdentityStringError):
            ITELayer(PauliString.from_text("II"), 0.5, make_params(0.5))

    def test_commuting_correction_rejected(self):
        from carbm.engine.pauli_algebra import PauliString
        from carbm.engine.rbm_encoding import ITELayer, make_params

        with pytest.raises(ValueError):
            ITELayer(
                PauliString.from_text("ZI"), 0.5, make_params(0.5, "correctable"),
                PauliString.from_text("IX"),
            )

    def test_record(self):
        from carbm.engine.pauli_algebra import PauliString
        from carbm.engine.rbm_encoding import ITELayer, make_params

        layer = ITELayer(
            PauliString.from_text("ZI"), 0.5, make_params(0.5, "correctable"),
            PauliString.from_text("XI"),
        )
        assert layer.is_corrected
        assert layer.to_record() == {
            "sigma": "ZI", "kappa": 0.5, "scheme": "correctable", "correction": "XI",
        }
