"""
Integration tests for the Lee-Yang, Fisher and Gross-Neveu scan drivers.

Every grid is checked point by point against exact diagonalization.
"""

import math

import numpy as np
import pytest

pytestmark = pytest.mark.integration


# =============================================================================
# Helpers
# =============================================================================

def _axes(name1, lo1, hi1, n1, name2, lo2, hi2, n2):
    from carbm.engine.experiments import GridAxis

    return GridAxis(name1, lo1, hi1, n1), GridAxis(name2, lo2, hi2, n2)


def _single_qubit_model():
    from carbm.engine.pauli_algebra import PauliSentence

    return PauliSentence.zero(1), PauliSentence.from_terms(1, [("Z", 1.0)])


# =============================================================================
# Lee-Yang
# =============================================================================

class TestLeeYangScan:
    """Z(beta, g_r + i g_i) / Z0 via the probe coherence."""

    def test_single_qubit_toy(self):
        from carbm.engine.experiments import lee_yang_scan

        axis1, axis2 = _axes("g_r", 0.0, 0.0, 1, "g_i", 0.0, math.pi, 5)
        grid = lee_yang_scan(_single_qubit_model(), beta=1.0, axis1=axis1, axis2=axis2)
        np.testing.assert_allclose(grid.values[0], np.cos(axis2.values), atol=1e-12)
        assert grid.values[0, 0] == pytest.approx(1.0)

    def test_xxz_matches_exact_ratio(self):
        from carbm.engine.experiments import ed_partition_oracle, lee_yang_scan
        from carbm.engine.models import XXZSpec, split_xxz

        spec = XXZSpec(L=2, J=1.0, Jz=0.5)
        h_s, h_i = split_xxz(spec)
        axis1, axis2 = _axes("g_r", -0.5, 0.5, 3, "g_i", 0.0, 2.0, 4)
        grid = lee_yang_scan(spec, beta=1.0, axis1=axis1, axis2=axis2)

        for i, g_r in enumerate(axis1.values):
            h0 = h_s + h_i.scale(g_r)
            z0 = ed_partition_oracle(h0, h_i, 1.0, 0.0)
            for j, g_i in enumerate(axis2.values):
                exact = ed_partition_oracle(h0, h_i, 1.0, g_i) / z0
                assert abs(grid.values[i, j] - exact) <= 1e-6
        assert np.all(grid.success > 0.0)
        assert len(grid.metadata["decompositions"]) == 3

    def test_corrections_leave_values_unchanged(self):
        from carbm.engine.experiments import lee_yang_scan
        from carbm.engine.models import XXZSpec

        spec = XXZSpec(L=2, J=1.0, Jz=0.5)
        axis1, axis2 = _axes("g_r", 0.2, 0.6, 2, "g_i", 0.0, 1.5, 3)
        plain = lee_yang_scan(spec, 1.0, axis1, axis2, max_corrections=0)
        corrected = lee_yang_scan(spec, 1.0, axis1, axis2, max_corrections=2)
        np.testing.assert_allclose(corrected.values, plain.values, atol=1e-10)
        assert np.all(corrected.success >= plain.success - 1e-12)

    def test_absolute_z(self):
        from carbm.engine.experiments import lee_yang_scan
        from carbm.engine.models import XXZSpec

        axis1, axis2 = _axes("g_r", -0.3, 0.3, 2, "g_i", 0.0, 1.0, 2)
        grid = lee_yang_scan(XXZSpec(L=2, Jz=0.5), 0.7, axis1, axis2, absolute_z=True)
        assert grid.z0 is not None and grid.z0.shape == (2,)
        assert grid.metadata["z0_relative_deviation"] < 1e-6
        frame = grid.to_frame()
        assert frame["re_z"].iloc[0] == pytest.approx(grid.z0[0])

    def test_cache_reused_across_runs(self, cache_manager):
        from carbm.engine.experiments import lee_yang_scan
        from carbm.engine.models import XXZSpec

        axis1, axis2 = _axes("g_r", 0.1, 0.1, 1, "g_i", 0.0, 1.0, 2)
        first = lee_yang_scan(XXZSpec(L=2, Jz=0.5), 1.0, axis1, axis2, cache=cache_manager)
        second = lee_yang_scan(XXZSpec(L=2, Jz=0.5), 1.0, axis1, axis2, cache=cache_manager)
        assert first.metadata["decompositions"][0]["cache_hit"] is False
        assert second.metadata["decompositions"][0]["cache_hit"] is True
        np.testing.assert_allclose(second.values, first.values, atol=1e-12)

    @pytest.mark.parametrize(
        "g_r_axis, g_i_axis",
        [
            ((-1.0, 1.0, 5), (0.0, math.pi, 5)),
            ((-1.0, 1.2, 7), (0.0, 3.0, 7)),
            ((-1.0, 1.2, 13), (0.0, 3.0, 13)),
        ],
    )
    def test_single_qubit_zero_at_nearest_point(self, g_r_axis, g_i_axis):
        """cos(g_i) + i tanh(g_r) sin(g_i) vanishes only at (0, pi/2)."""
        from carbm.engine.experiments import lee_yang_scan, locate_zeros

        axis1, axis2 = _axes("g_r", *g_r_axis, "g_i", *g_i_axis)
        grid = lee_yang_scan(_single_qubit_model(), beta=1.0, axis1=axis1, axis2=axis2)
        zeros = locate_zeros(grid, threshold=0.3)

        assert len(zeros) == 1
        i = int(np.argmin(np.abs(axis1.values)))
        j = int(np.argmin(np.abs(axis2.values - math.pi / 2)))
        assert (zeros[0]["i"], zeros[0]["j"]) == (i, j)
        assert zeros[0]["abs_value"] == pytest.approx(float(np.min(np.abs(grid.values))))

    def test_refined_grid_moves_zero_less_than_a_cell(self):
        from carbm.engine.experiments import lee_yang_scan, locate_zeros

        located = []
        for steps in (7, 13):
            axis1, axis2 = _axes("g_r", -1.0, 1.2, steps, "g_i", 0.0, 3.0, steps)
            grid = lee_yang_scan(_single_qubit_model(), beta=1.0, axis1=axis1, axis2=axis2)
            (zero,) = locate_zeros(grid, threshold=0.3)
            located.append((zero["g_r"], zero["g_i"]))

        coarse_cell = (2.2 / 6, 3.0 / 6)
        (r0, i0), (r1, i1) = located
        assert abs(r1 - r0) < coarse_cell[0]
        assert abs(i1 - i0) < coarse_cell[1]

    def test_non_commuting_probe_rejected(self, xxz2):
        from carbm.core.errors import CommutationPreconditionError
        from carbm.engine.experiments import lee_yang_scan
        from carbm.engine.pauli_algebra import PauliSentence

        probe = PauliSentence.from_terms(2, [("XI", 1.0)])
        with pytest.raises(CommutationPreconditionError):
            lee_yang_scan((xxz2, probe), beta=1.0)


@pytest.mark.slow
class TestLeeYangPhases:
    """Four-site XXZ at beta = 1: where the zeros sit on either side of the transition."""

    @staticmethod
    def _scan_against_exact(J, Jz):
        from carbm.engine.experiments import ed_partition_oracle, lee_yang_scan
        from carbm.engine.models import XXZSpec, split_xxz

        spec = XXZSpec(L=4, J=J, Jz=Jz)
        axis1, axis2 = _axes("g_r", -1.0, 1.0, 11, "g_i", 0.0, math.pi, 41)
        grid = lee_yang_scan(spec, beta=1.0, axis1=axis1, axis2=axis2)

        h_s, h_i = split_xxz(spec)
        for i, g_r in enumerate(axis1.values):
            h0 = h_s + h_i.scale(g_r)
            z0 = ed_partition_oracle(h0, h_i, 1.0, 0.0)
            exact = np.array([ed_partition_oracle(h0, h_i, 1.0, g_i) / z0 for g_i in axis2.values])
            np.testing.assert_allclose(grid.values[i], exact, atol=1e-6)
        return grid

    def test_ising_regime_zeros_on_zero_field_line(self):
        from carbm.engine.experiments import locate_zeros

        grid = self._scan_against_exact(J=0.1, Jz=1.0)
        column = grid.values[5]
        assert grid.axis1.values[5] == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(column.imag, 0.0, atol=1e-6)
        assert np.any(np.diff(np.sign(column.real)) != 0)

        zeros = locate_zeros(grid, threshold=0.15)
        assert zeros
        cell = grid.axis1.values[1] - grid.axis1.values[0]
        assert all(abs(z["g_r"]) <= cell + 1e-12 for z in zeros)

    def test_xy_regime_zeros_on_half_pi_line(self):
        from carbm.engine.experiments import locate_zeros

        grid = self._scan_against_exact(J=1.0, Jz=0.1)
        row = grid.values[:, 20]
        assert grid.axis2.values[20] == pytest.approx(math.pi / 2)
        np.testing.assert_allclose(row.imag, 0.0, atol=1e-6)
        assert np.any(np.diff(np.sign(row.real)) != 0)

        zeros = locate_zeros(grid, threshold=0.15)
        assert zeros
        cell = grid.axis2.values[1] - grid.axis2.values[0]
        assert all(abs(z["g_i"] - math.pi / 2) <= cell + 1e-12 for z in zeros)


# =============================================================================
# Fisher
# =============================================================================

class TestFisherScan:
    """Z(beta_r + i beta_i) / Z(beta_r) with the probe coupled to h0."""

    def test_matches_exact_ratio(self, xxz2):
        from carbm.engine.experiments import ed_complex_beta_oracle, fisher_scan

        axis1, axis2 = _axes("beta_r", 0.5, 1.5, 3, "beta_i", 0.0, 2.0, 4)
        grid = fisher_scan(xxz2, axis1, axis2)
        for i, beta_r in enumerate(axis1.values):
            z0 = ed_complex_beta_oracle(xxz2, beta_r, 0.0)
            for j, beta_i in enumerate(axis2.values):
                exact = ed_complex_beta_oracle(xxz2, beta_r, beta_i) / z0
                assert abs(grid.values[i, j] - exact) <= 1e-6
        assert grid.metadata["full_k"] is False

    def test_full_k_agrees(self, xxz2):
        from carbm.engine.experiments import fisher_scan

        axis1, axis2 = _axes("beta_r", 0.5, 1.0, 2, "beta_i", 0.0, 2.0, 3)
        reduced = fisher_scan(xxz2, axis1, axis2)
        full = fisher_scan(xxz2, axis1, axis2, full_k=True)
        np.testing.assert_allclose(full.values, reduced.values, atol=1e-6)
        assert full.metadata["full_k"] is True

    def test_spec_input_and_identity_phase(self):
        """A constant shift only multiplies the ratio by e^{-i beta_i c}."""
        from carbm.engine.experiments import fisher_scan
        from carbm.engine.models import XXZSpec, build_xxz
        from carbm.engine.pauli_algebra import PauliSentence, PauliString

        spec = XXZSpec(L=2, Jz=0.5, g_r=0.3)
        axis1, axis2 = _axes("beta_r", 1.0, 1.0, 1, "beta_i", 0.5, 1.5, 3)
        base = fisher_scan(spec, axis1, axis2)
        shift = PauliSentence.from_terms(2, [(PauliString.identity(2), 0.7)])
        shifted = fisher_scan(build_xxz(spec) + shift, axis1, axis2)
        phase = np.exp(-1j * 0.7 * axis2.values)
        np.testing.assert_allclose(shifted.values[0], base.values[0] * phase, atol=1e-8)


# =============================================================================
# Gross-Neveu
# =============================================================================

class TestGrossNeveuScan:
    """Condensate and success-probability grids over beta x mu."""

    @pytest.fixture
    def scans(self, gn_spec):
        from carbm.engine.experiments import gn_phase_scan

        axis1, axis2 = _axes("beta", 0.0, 1.0, 3, "mu", 0.0, 0.5, 2)
        corrected = gn_phase_scan(gn_spec, axis1, axis2, correction=True)
        plain = gn_phase_scan(gn_spec, axis1, axis2, correction=False)
        return axis1, axis2, corrected, plain

    def test_zero_beta_row(self, scans):
        _, _, (observable, success), _ = scans
        np.testing.assert_allclose(observable.values[0].real, 1.0, atol=1e-10)
        np.testing.assert_allclose(success.values[0].real, 1.0, atol=1e-10)

    def test_observable_matches_exact(self, gn_spec, scans):
        from carbm.engine.experiments import ed_thermal_expectation
        from carbm.engine.models import GrossNeveuSpec, build_condensate_observable, build_gross_neveu

        axis1, axis2, (observable, _), (plain_observable, _) = scans
        obs = build_condensate_observable(gn_spec)
        for j, mu in enumerate(axis2.values):
            H = build_gross_neveu(GrossNeveuSpec(gn_spec.N, gn_spec.L, gn_spec.G, mu, gn_spec.m))
            for i, beta in enumerate(axis1.values):
                exact = ed_thermal_expectation(H, beta, obs)
                assert observable.values[i, j].real == pytest.approx(exact, abs=1e-6)
                assert plain_observable.values[i, j].real == pytest.approx(exact, abs=1e-6)

    def test_correction_raises_success(self, scans):
        _, _, (_, corrected), (_, plain) = scans
        assert np.all(corrected.values.real >= plain.values.real - 1e-12)
        assert corrected.metadata["correction"] is True
        assert plain.metadata["max_corrections"] == 0

    def test_grids_share_metadata_shape(self, scans):
        _, _, (observable, success), _ = scans
        assert observable.shape == success.shape == (3, 2)
        assert len(observable.metadata["corrected_layers"]) == 2

    def test_condensate_pattern_at_low_temperature(self, gn_spec):
        """At L = 2 the bond hop scales with 1 - mu; mu = 1 leaves |1111> as ground state."""
        from carbm.engine.experiments import ed_thermal_expectation, gn_phase_scan
        from carbm.engine.models import GrossNeveuSpec, build_condensate_observable, build_gross_neveu

        axis1, axis2 = _axes("beta", 0.0, 2.0, 2, "mu", 0.0, 1.0, 2)
        observable, _ = gn_phase_scan(gn_spec, axis1, axis2)
        cold_hopping, cold_frozen = observable.values[1].real

        # one fermion per flavor spread over both sites vs both sites filled
        assert cold_hopping < 0.5
        assert cold_frozen > 1.5
        obs = build_condensate_observable(gn_spec)
        for j, mu in enumerate(axis2.values):
            H = build_gross_neveu(GrossNeveuSpec(gn_spec.N, gn_spec.L, gn_spec.G, mu, gn_spec.m))
            assert observable.values[1, j].real == pytest.approx(ed_thermal_expectation(H, 2.0, obs), abs=1e-6)

    @pytest.mark.slow
    @pytest.mark.parametrize("N,L", [(1, 4), (2, 3)])
    def test_spot_column(self, N, L):
        from carbm.engine.experiments import ed_thermal_expectation, gn_phase_scan
        from carbm.engine.models import GrossNeveuSpec, build_condensate_observable, build_gross_neveu

        spec = GrossNeveuSpec(N=N, L=L, G=1.0, mu=0.0)
        axis1, axis2 = _axes("beta", 0.5, 2.0, 4, "mu", 0.5, 0.5, 1)
        corrected, corrected_success = gn_phase_scan(spec, axis1, axis2, correction=True)
        _, plain_success = gn_phase_scan(spec, axis1, axis2, correction=False)

        H = build_gross_neveu(GrossNeveuSpec(N, L, 1.0, 0.5))
        obs = build_condensate_observable(spec)
        for i, beta in enumerate(axis1.values):
            assert corrected.values[i, 0].real == pytest.approx(ed_thermal_expectation(H, beta, obs), abs=1e-6)
        assert np.all(corrected_success.values.real >= plain_success.values.real - 1e-12)
