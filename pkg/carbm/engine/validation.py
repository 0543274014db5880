"""
Invariant Validation Module.

Dense checks behind the ``validate`` command: the RBM block-encoding
identity, success-probability formulas, correction plans, the Cartan
decomposition, thermal states and partition-function reconstruction.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from scipy.linalg import cosm, expm

from carbm.engine.cache_manager import CacheManager
from carbm.engine.cartan import KHKDecomposition, decompose, z_product_hint
from carbm.engine.correction import build_layers, plan_corrections
from carbm.engine.experiments import apply_k, ed_complex_beta_oracle, ed_gibbs_state
from carbm.engine.models import XXZSpec, build_xxz
from carbm.engine.pauli_algebra import PauliString
from carbm.engine.rbm_encoding import SCHEMES, block_unitary, make_params, reduce_to_z, success_probability
from carbm.engine.simulator import circuit_unitary, prepare_initial, run_ite

logger = logging.getLogger(__name__)


# Pass/fail tolerances per invariant
THRESHOLDS = {
    "rbm_identity": 1e-10,
    "success_formula": 1e-12,
    "decomposition_residual": 1e-6,
    "thermal_trace_distance": 1e-6,
    "partition_relative": 1e-6,
    "correction_state": 1e-10,
}

# kappa values exercised by the block-encoding check
KAPPA_SAMPLES = (-3.0, -0.5, 0.0, 0.25, 0.5, 1.5, 3.0)


@dataclass
class InvariantCheck:
    """Result of one invariant check."""
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


@dataclass
class ValidationReport:
    """Result of the validation suite."""
    is_valid: bool
    checks: List[InvariantCheck] = field(default_factory=list)
    issues: List[str] = field(default_factory=list)
    elapsed_seconds: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "is_valid": self.is_valid,
            "issues": self.issues,
            "elapsed_seconds": self.elapsed_seconds,
            "checks": [
                {
                    "name": c.name,
                    "passed": c.passed,
                    "value": c.value,
                    "threshold": c.threshold,
                    "detail": c.detail,
                }
                for c in self.checks
            ],
        }


def _check(name: str, value: float, detail: str = "") -> InvariantCheck:
    threshold = THRESHOLDS[name]
    passed = bool(np.isfinite(value) and value <= threshold)
    if not passed:
        logger.warning(f"Invariant {name} failed: {value:.3e} > {threshold:.1e} {detail}")
    return InvariantCheck(name, passed, float(value), threshold, detail)


def check_rbm_identity() -> InvariantCheck:
    """2A <0|_a Pre^dag U Pre |psi, 0> = e^{-kappa sigma} for sigma in X, Y, Z."""
    worst = 0.0
    # qubit 0 system, qubit 1 ancilla; ancilla-|0> block is rows/cols 0 and 2
    zero = [0, 2]
    one = [1, 3]
    for letter in "XYZ":
        sigma = PauliString.from_text(letter + "I")
        sigma_1q = PauliString.from_text(letter).to_matrix()
        pre, target = reduce_to_z(sigma)
        pre_u = circuit_unitary(pre, 2)
        for scheme in SCHEMES:
            for kappa in KAPPA_SAMPLES:
                params = make_params(kappa, scheme)
                v = pre_u.conj().T @ block_unitary(params, target, 1, 2) @ pre_u
                success = 2.0 * params.A * v[np.ix_(zero, zero)]
                worst = max(worst, float(np.max(np.abs(success - expm(-kappa * sigma_1q)))))
                if scheme == "correctable":
                    failure = 2.0 * params.A * v[np.ix_(one, zero)]
                    expected = -1j * expm(kappa * sigma_1q)
                    worst = max(worst, float(np.max(np.abs(failure - expected))))
    return _check("rbm_identity", worst)


def check_success_formula(seed: int = 0, samples: int = 20) -> InvariantCheck:
    """Closed-form success probability against Tr[cos^2(W sigma + b) rho]."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    n = 2
    dim = 1 << n
    for _ in range(samples):
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        rho = g @ g.conj().T
        rho /= np.trace(rho).real
        sigma = PauliString(n, int(rng.integers(0, dim)), int(rng.integers(0, dim)))
        if sigma.is_identity:
            continue
        kappa = float(rng.uniform(-2.0, 2.0))
        for scheme in SCHEMES:
            params = make_params(kappa, scheme)
            c = cosm(params.W * sigma.to_matrix() + params.b * np.eye(dim))
            exact = float(np.real(np.trace(c @ c @ rho)))
            worst = max(worst, abs(success_probability(params, rho, sigma) - exact))
    return _check("success_formula", worst)


def check_decomposition(decomposition: KHKDecomposition) -> InvariantCheck:
    detail = f"{len(decomposition.factors)} factors, abelian h={decomposition.h.without_identity().is_abelian()}"
    value = decomposition.residual
    if not decomposition.h.without_identity().is_abelian():
        value = float("inf")
    return _check("decomposition_residual", value, detail)


def check_thermal_state(decomposition: KHKDecomposition, H, beta: float) -> InvariantCheck:
    """Trace distance of K e^{-beta h} K^dag / Z to the exact Gibbs state."""
    run = run_ite(prepare_initial(decomposition.n), decomposition.h, beta)
    state = apply_k(run.state, decomposition)
    rho_sys = state.reduced(list(state.layout.system))
    exact = ed_gibbs_state(H, beta)
    distance = 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(rho_sys - exact))))
    return _check("thermal_trace_distance", distance, f"beta={beta}")


def check_partition_function(decomposition: KHKDecomposition, H, beta: float) -> InvariantCheck:
    """2^n exp(log_weight) against Tr e^{-beta H}, with and without corrections."""
    exact = ed_complex_beta_oracle(H, beta, 0.0).real
    worst = 0.0
    h = decomposition.h
    for limit in (0, h.n):
        plan = plan_corrections(build_layers(h, beta), limit)
        run = run_ite(prepare_initial(h.n), h, beta, plan)
        worst = max(worst, abs(run.partition_function(h.n) - exact) / abs(exact))
    return _check("partition_relative", worst, f"Z={exact:.12g}")


def check_correction_plan(decomposition: KHKDecomposition, beta: float) -> InvariantCheck:
    """
    Plan commutation pattern, plus equality of the conditioned states with
    and without corrections.
    """
    h = decomposition.h
    plain = run_ite(prepare_initial(h.n), h, beta, plan_corrections(build_layers(h, beta), 0))
    plan = plan_corrections(build_layers(h, beta), h.n)
    corrected = run_ite(prepare_initial(h.n), h, beta, plan)
    diff = float(np.max(np.abs(plain.state.data - corrected.state.data)))
    issues = plan.verify()
    if issues or corrected.success_probability + 1e-12 < plain.success_probability:
        diff = float("inf")
    return _check(
        "correction_state",
        diff,
        f"{plan.n_corrected} corrected, p {plain.success_probability:.6g} -> "
        f"{corrected.success_probability:.6g}",
    )


def run_validation_suite(
    spec: Optional[XXZSpec] = None,
    beta: float = 1.0,
    seed: int = 0,
    cache: Optional[CacheManager] = None,
    **cartan_options,
) -> ValidationReport:
    """
    Run every invariant check on an XXZ example.

    Returns:
        ValidationReport with one InvariantCheck per invariant
    """
    started = time.perf_counter()
    spec = spec or XXZSpec(L=3, J=1.0, Jz=0.5, g_r=0.2)
    H = build_xxz(spec)
    decomposition = decompose(H, csa_hint=z_product_hint(H.n), seed=seed, cache=cache, **cartan_options)

    steps: List[Callable[[], InvariantCheck]] = [
        check_rbm_identity,
        lambda: check_success_formula(seed),
        lambda: check_decomposition(decomposition),
        lambda: check_thermal_state(decomposition, H, beta),
        lambda: check_partition_function(decomposition, H, beta),
        lambda: check_correction_plan(decomposition, beta),
    ]
    checks = [step() for step in steps]
    issues = [
        f"{c.name}: {c.value:.3e} exceeds {c.threshold:.1e}" for c in checks if not c.passed
    ]
    report = ValidationReport(
        is_valid=not issues,
        checks=checks,
        issues=issues,
        elapsed_seconds=time.perf_counter() - started,
    )
    logger.info(
        f"Validation: {sum(c.passed for c in checks)}/{len(checks)} checks passed "
        f"in {report.elapsed_seconds:.2f}s"
    )
    return report
