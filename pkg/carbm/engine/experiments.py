"""
Experiment Drivers.

- lee_yang_scan: partition-function zeros in a complex probe field
- fisher_scan: zeros in complex inverse temperature
- gn_phase_scan: Gross-Neveu condensate over (beta, mu), with and without
  correction layers

Each driver prepares a thermal state with the RBM circuit, couples a |+>
probe and reads its coherence 2 rho_p[0,1] = Z(beta, g) / Z0. Grid columns
are independent tasks on the GridRunner; results are merged by index.
Exact-diagonalization oracles for every driver live here as well.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.linalg import eigh, expm

from carbm.core.config import derive_seed
from carbm.core.errors import CommutationPreconditionError, SizeLimitError
from carbm.engine.cache_manager import CacheManager
from carbm.engine.cartan import KHKDecomposition, decompose, z_product_hint
from carbm.engine.correction import CorrectionPlan, build_layers, plan_corrections
from carbm.engine.grid_runner import GridRunner
from carbm.engine.models import (
    GrossNeveuSpec,
    XXZSpec,
    build_condensate_observable,
    build_gross_neveu,
    build_xxz,
    split_xxz,
)
from carbm.engine.pauli_algebra import PauliSentence, PauliString
from carbm.engine.rbm_encoding import Scheme
from carbm.engine.simulator import (
    DenseUnitary,
    DensityMatrix,
    PauliExponential,
    RunResult,
    ancilla_coherence,
    apply_gate,
    attach_probe,
    expectation,
    prepare_initial,
    run_ite,
)

logger = logging.getLogger(__name__)

ED_MAX_QUBITS = 12
ZERO_THRESHOLD = 0.05
CSV_FLOAT_FORMAT = "%.15g"
CSV_COLUMNS = ["axis1", "axis2", "re_value", "im_value", "abs_value", "log_abs", "success_prob"]


# =============================================================================
# Grid containers
# =============================================================================

@dataclass(frozen=True)
class GridAxis:
    """Labeled closed range lo..hi with ``steps`` points."""
    name: str
    lo: float
    hi: float
    steps: int = 41

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"Axis {self.name} needs at least one point")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "lo": self.lo, "hi": self.hi, "steps": self.steps}


DEFAULT_AXES = {
    "lee-yang": (GridAxis("g_r", -1.0, 1.0), GridAxis("g_i", 0.0, math.pi)),
    "fisher": (GridAxis("beta_r", 0.05, 2.0), GridAxis("beta_i", 0.0, math.pi)),
    "gn-scan": (GridAxis("beta", 0.05, 2.0), GridAxis("mu", 0.0, 2.0)),
}


@dataclass
class ScanGrid:
    """Values and success probabilities over axis1 x axis2."""
    axis1: GridAxis
    axis2: GridAxis
    values: np.ndarray
    success: np.ndarray
    z0: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        shape = (self.axis1.steps, self.axis2.steps)
        if self.values.shape != shape or self.success.shape != shape:
            raise ValueError(
                f"Grid arrays {self.values.shape}/{self.success.shape} do not match axes {shape}"
            )
        if np.any(self.success < -1e-12) or np.any(self.success > 1.0 + 1e-12):
            raise ValueError("Success probabilities must lie in [0, 1]")
        if self.z0 is not None and self.z0.shape != (self.axis1.steps,):
            raise ValueError(f"z0 must have one entry per {self.axis1.name} value")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def to_frame(self) -> pd.DataFrame:
        a1, a2 = np.meshgrid(self.axis1.values, self.axis2.values, indexing="ij")
        values = np.asarray(self.values, dtype=complex)
        magnitude = np.abs(values)
        with np.errstate(divide="ignore"):
            log_abs = np.log(magnitude)
        frame = pd.DataFrame({
            "axis1": a1.ravel(),
            "axis2": a2.ravel(),
            "re_value": values.real.ravel(),
            "im_value": values.imag.ravel(),
            "abs_value": magnitude.ravel(),
            "log_abs": log_abs.ravel(),
            "success_prob": np.asarray(self.success, dtype=float).ravel(),
        })
        if self.z0 is not None:
            absolute = values * self.z0[:, None]
            frame["re_z"] = absolute.real.ravel()
            frame["im_z"] = absolute.imag.ravel()
        return frame

    def write_csv(self, path: Union[str, Path], config_hash: str) -> Path:
        """CSV with a leading ``# config_hash=`` comment line."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(f"# config_hash={config_hash}\n")
            self.to_frame().to_csv(f, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        logger.info(f"Wrote {self.shape[0]}x{self.shape[1]} grid to {path}")
        return path

    def sidecar(self, config_hash: str, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        payload = {
            "config_hash": config_hash,
            "axis1": self.axis1.to_dict(),
            "axis2": self.axis2.to_dict(),
            **self.metadata,
        }
        if self.z0 is not None:
            payload["z0"] = [float(v) for v in self.z0]
        if extra:
            payload.update(extra)
        return payload

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> pd.DataFrame:
        return pd.read_csv(path, comment="#")


def write_sidecar(path: Union[str, Path], payload: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")
    return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"Cannot serialize {type(value).__name__}")


# =============================================================================
# Exact-diagonalization oracles
# =============================================================================

def _check_ed_size(n: int) -> None:
    if n > ED_MAX_QUBITS:
        raise SizeLimitError(
            f"Exact diagonalization limited to {ED_MAX_QUBITS} qubits, got {n}",
            key="n",
            details={"qubits": n, "max_qubits": ED_MAX_QUBITS},
        )


def ed_partition_oracle(H0: PauliSentence, H_I: PauliSentence, beta: float, g_i: float) -> complex:
    """Tr exp(-beta H0 - i beta g_i H_I)."""
    _check_ed_size(H0.n)
    generator = -beta * H0.to_matrix() - 1j * beta * g_i * H_I.to_matrix()
    return complex(np.trace(expm(generator)))


def ed_complex_beta_oracle(H0: PauliSentence, beta_r: float, beta_i: float) -> complex:
    """Tr exp(-(beta_r + i beta_i) H0)."""
    _check_ed_size(H0.n)
    energies = eigh(H0.to_matrix(), eigvals_only=True)
    return complex(np.sum(np.exp(-(beta_r + 1j * beta_i) * energies)))


def ed_gibbs_state(H: PauliSentence, beta: float) -> np.ndarray:
    """e^{-beta H} / Tr e^{-beta H}."""
    _check_ed_size(H.n)
    energies, vectors = eigh(H.to_matrix())
    weights = np.exp(-beta * (energies - energies.min()))
    weights /= weights.sum()
    return (vectors * weights) @ vectors.conj().T


def ed_thermal_expectation(H: PauliSentence, beta: float, obs: PauliSentence) -> float:
    rho = ed_gibbs_state(H, beta)
    return float(np.real(np.trace(rho @ obs.to_matrix())))


# =============================================================================
# Circuit building blocks
# =============================================================================

def apply_k(state: DensityMatrix, decomposition: KHKDecomposition) -> DensityMatrix:
    """rho -> K rho K^dagger, K = prod_j exp(i theta_j k_j), as Pauli-exponential gates."""
    m = state.n_qubits
    for theta, k in reversed(decomposition.factors):
        state = apply_gate(state, PauliExponential(-theta, k.embed(m, 0)))
    return state


def make_plan(
    h: PauliSentence,
    beta: float,
    max_corrections: int = 0,
    scheme: Scheme = "standard",
) -> CorrectionPlan:
    """Layers for e^{-beta h/2} with up to ``max_corrections`` corrections."""
    return plan_corrections(build_layers(h, beta, scheme), max_corrections)


def thermal_expectation(
    decomposition: KHKDecomposition,
    beta: float,
    observable: PauliSentence,
    plan: Optional[CorrectionPlan] = None,
    scheme: Scheme = "standard",
) -> Tuple[float, RunResult]:
    """
    <O> in K e^{-beta h} K^dagger / Z from a maximally mixed start.

    Returns the expectation and the ITE run (success probability, weights).
    """
    state = prepare_initial(decomposition.n, "mixed_density")
    run = run_ite(state, decomposition.h, beta, plan, scheme)
    thermal = apply_k(run.state, decomposition)
    return expectation(thermal, observable), run


def _probe_evolution(
    state: DensityMatrix, coupling: PauliSentence, angle_scale: float
) -> DensityMatrix:
    """exp(-i angle_scale * coupling (x) Z_probe), one commuting exponential per term."""
    m = state.n_qubits
    probe_z = PauliString.from_sites(m, {state.layout.probe: "Z"})
    for p, c in coupling.items():
        string = p.embed(m, 0).product(probe_z)
        state = apply_gate(state, PauliExponential(angle_scale * c, string))
    return state


def _decompose(
    H: PauliSentence,
    seed: Optional[int],
    cache: Optional[CacheManager],
    use_z_hint: bool,
    **cartan_options,
) -> KHKDecomposition:
    hint = z_product_hint(H.n) if use_z_hint and H.n > 1 else None
    return decompose(H, csa_hint=hint, seed=seed, cache=cache, **cartan_options)


def _column_seed(seed: Optional[int], index: int) -> Optional[int]:
    return None if seed is None else derive_seed(seed, index)


def _decomposition_record(decomposition: KHKDecomposition) -> Dict[str, Any]:
    return {
        "residual": decomposition.residual,
        "converged": decomposition.converged,
        "cache_key": decomposition.cache_key,
        "cache_hit": decomposition.cache_hit,
        "factors": len(decomposition.factors),
    }


def _require_commuting(h_s: PauliSentence, h_i: PauliSentence) -> None:
    if not h_s.commutes_with(h_i):
        raise CommutationPreconditionError(
            "System Hamiltonian does not commute with the probe operator",
            key="model",
        )


# =============================================================================
# Drivers
# =============================================================================

ModelInput = Union[XXZSpec, Tuple[PauliSentence, PauliSentence]]


def lee_yang_scan(
    model: ModelInput,
    beta: float,
    axis1: Optional[GridAxis] = None,
    axis2: Optional[GridAxis] = None,
    max_corrections: int = 0,
    scheme: Scheme = "standard",
    seed: Optional[int] = 0,
    cache: Optional[CacheManager] = None,
    runner: Optional[GridRunner] = None,
    absolute_z: bool = False,
    use_z_hint: bool = True,
    **cartan_options,
) -> ScanGrid:
    """
    Z(beta, g_r + i g_i) / Z0(beta, g_r) over g_r (axis1) x g_i (axis2).

    ``model`` is an XXZSpec (its g_r is ignored) or a pair (H_s, H_I) of
    commuting sentences. Per g_r: decompose H0 = H_s + g_r H_I, prepare
    K e^{-beta h0} K^dagger / Z0, attach the probe, then for each g_i evolve
    under exp(-i beta g_i/2 H_I (x) Z_p) and read the probe coherence.

    Raises:
        CommutationPreconditionError: [H_s, H_I] != 0
    """
    axis1 = axis1 or DEFAULT_AXES["lee-yang"][0]
    axis2 = axis2 or DEFAULT_AXES["lee-yang"][1]
    h_s, h_i = split_xxz(model) if isinstance(model, XXZSpec) else model
    _require_commuting(h_s, h_i)
    runner = runner or GridRunner()
    n = h_s.n

    def column(idx: int, g_r: float):
        def task():
            h0 = h_s + h_i.scale(g_r)
            decomposition = _decompose(h0, _column_seed(seed, idx), cache, use_z_hint, **cartan_options)
            plan = make_plan(decomposition.h, beta, max_corrections, scheme)
            run = run_ite(prepare_initial(n), decomposition.h, beta, plan, scheme)
            base = attach_probe(apply_k(run.state, decomposition))
            row = np.empty(axis2.steps, dtype=complex)
            for j, g_i in enumerate(axis2.values):
                row[j] = ancilla_coherence(_probe_evolution(base, h_i, 0.5 * beta * g_i))
            return row, run, decomposition, plan
        return task

    results = runner.run(
        [column(i, g_r) for i, g_r in enumerate(axis1.values)], label="lee-yang"
    )
    return _assemble(axis1, axis2, results, n, beta, absolute_z, oracle_h=lambda i: h_s + h_i.scale(axis1.values[i]))


def fisher_scan(
    model: Union[XXZSpec, PauliSentence],
    axis1: Optional[GridAxis] = None,
    axis2: Optional[GridAxis] = None,
    max_corrections: int = 0,
    scheme: Scheme = "standard",
    seed: Optional[int] = 0,
    cache: Optional[CacheManager] = None,
    runner: Optional[GridRunner] = None,
    full_k: bool = False,
    absolute_z: bool = False,
    use_z_hint: bool = True,
    **cartan_options,
) -> ScanGrid:
    """
    Z(beta_r + i beta_i) / Z(beta_r) over beta_r (axis1) x beta_i (axis2).

    H_I = H0, so K cancels under the trace: the state is e^{-beta_r h0}/Z and
    the probe couples through exp(-i beta_i/2 h0 (x) Z_p), identity term
    included. With ``full_k`` the state carries K and the probe couples to
    the dense exp(-i beta_i/2 H0 (x) Z_p) instead.
    """
    axis1 = axis1 or DEFAULT_AXES["fisher"][0]
    axis2 = axis2 or DEFAULT_AXES["fisher"][1]
    h0_full = build_xxz(model) if isinstance(model, XXZSpec) else model
    n = h0_full.n
    runner = runner or GridRunner()
    decomposition = _decompose(h0_full, _column_seed(seed, 0), cache, use_z_hint, **cartan_options)
    h0 = decomposition.h
    h_dense = h0_full.to_matrix()
    z_probe = np.diag([1.0, -1.0]).astype(complex)

    def column(beta_r: float):
        def task():
            plan = make_plan(h0, beta_r, max_corrections, scheme)
            run = run_ite(prepare_initial(n), h0, beta_r, plan, scheme)
            state = run.state
            if full_k:
                state = apply_k(state, decomposition)
            base = attach_probe(state)
            qubits = tuple(range(n)) + (base.layout.probe,)
            row = np.empty(axis2.steps, dtype=complex)
            for j, beta_i in enumerate(axis2.values):
                if full_k:
                    unitary = expm(-0.5j * beta_i * np.kron(h_dense, z_probe))
                    evolved = apply_gate(base, DenseUnitary(unitary, qubits))
                else:
                    evolved = _probe_evolution(base, h0, 0.5 * beta_i)
                row[j] = ancilla_coherence(evolved)
            return row, run, decomposition, plan
        return task

    results = runner.run([column(b) for b in axis1.values], label="fisher")
    grid = _assemble(axis1, axis2, results, n, None, absolute_z, oracle_h=lambda i: h0_full)
    grid.metadata["full_k"] = full_k
    return grid


def _assemble(
    axis1: GridAxis,
    axis2: GridAxis,
    results: Sequence[Tuple[np.ndarray, RunResult, KHKDecomposition, CorrectionPlan]],
    n: int,
    beta: Optional[float],
    absolute_z: bool,
    oracle_h,
) -> ScanGrid:
    values = np.stack([row for row, _, _, _ in results])
    success = np.array([[run.success_probability] * axis2.steps for _, run, _, _ in results])
    metadata: Dict[str, Any] = {
        "decompositions": [_decomposition_record(d) for _, _, d, _ in results],
        "correction_plans": [plan.to_records() for _, _, _, plan in results],
    }
    z0 = None
    if absolute_z:
        z0 = np.array([run.partition_function(n) for _, run, _, _ in results])
        deviations = []
        for i, value in enumerate(z0):
            b = beta if beta is not None else axis1.values[i]
            exact = ed_complex_beta_oracle(oracle_h(i), b, 0.0).real
            deviations.append(abs(value - exact) / max(abs(exact), 1e-300))
        metadata["z0_relative_deviation"] = float(max(deviations))
        logger.info(f"Z0 reconstruction: max relative deviation from ED {max(deviations):.3e}")
    return ScanGrid(axis1, axis2, values, success, z0=z0, metadata=metadata)


def gn_phase_scan(
    spec: GrossNeveuSpec,
    axis1: Optional[GridAxis] = None,
    axis2: Optional[GridAxis] = None,
    correction: bool = True,
    max_corrections: Optional[int] = None,
    scheme: Scheme = "standard",
    seed: Optional[int] = 0,
    cache: Optional[CacheManager] = None,
    runner: Optional[GridRunner] = None,
    use_z_hint: bool = True,
    **cartan_options,
) -> Tuple[ScanGrid, ScanGrid]:
    """
    Condensate sum_i <Z_i Z_0> and success probability over beta (axis1) x mu (axis2).

    One decomposition per mu; ``correction=False`` runs every layer
    probabilistically. Returns (observable grid, success grid).
    """
    axis1 = axis1 or DEFAULT_AXES["gn-scan"][0]
    axis2 = axis2 or DEFAULT_AXES["gn-scan"][1]
    _check_ed_size(spec.n_qubits)
    runner = runner or GridRunner()
    observable = build_condensate_observable(spec)
    limit = 0 if not correction else (spec.n_qubits if max_corrections is None else max_corrections)

    def column(idx: int, mu: float):
        def task():
            H = build_gross_neveu(GrossNeveuSpec(spec.N, spec.L, spec.G, mu, spec.m))
            decomposition = _decompose(H, _column_seed(seed, idx), cache, use_z_hint, **cartan_options)
            obs_col = np.empty(axis1.steps)
            succ_col = np.empty(axis1.steps)
            plans = []
            for i, beta in enumerate(axis1.values):
                plan = make_plan(decomposition.h, beta, limit, scheme)
                value, run = thermal_expectation(decomposition, beta, observable, plan, scheme)
                obs_col[i] = value
                succ_col[i] = run.success_probability
                plans.append(plan.n_corrected)
            return obs_col, succ_col, decomposition, plans
        return task

    results = runner.run(
        [column(j, mu) for j, mu in enumerate(axis2.values)], label="gn-scan"
    )
    obs = np.stack([col for col, _, _, _ in results], axis=1)
    success = np.stack([col for _, col, _, _ in results], axis=1)
    metadata = {
        "decompositions": [_decomposition_record(d) for _, _, d, _ in results],
        "corrected_layers": [counts for _, _, _, counts in results],
        "correction": correction,
        "max_corrections": limit,
    }
    observable_grid = ScanGrid(axis1, axis2, obs.astype(complex), success, metadata=metadata)
    success_grid = ScanGrid(axis1, axis2, success.astype(complex), success, metadata=dict(metadata))
    return observable_grid, success_grid


# =============================================================================
# Zero extraction
# =============================================================================

def locate_zeros(grid: ScanGrid, threshold: float = ZERO_THRESHOLD) -> List[Dict[str, float]]:
    """
    Strict local minima of |value| below ``threshold``.

    A point qualifies when its magnitude is strictly smaller than every
    existing 8-neighbor (edge points compare against fewer neighbors).
    """
    magnitude = np.abs(grid.values)
    n1, n2 = magnitude.shape
    a1, a2 = grid.axis1.values, grid.axis2.values
    zeros = []
    for i in range(n1):
        for j in range(n2):
            value = magnitude[i, j]
            if value >= threshold:
                continue
            neighbors = [
                magnitude[i + di, j + dj]
                for di in (-1, 0, 1)
                for dj in (-1, 0, 1)
                if (di or dj) and 0 <= i + di < n1 and 0 <= j + dj < n2
            ]
            if neighbors and all(value < other for other in neighbors):
                zeros.append({
                    "i": i,
                    "j": j,
                    grid.axis1.name: float(a1[i]),
                    grid.axis2.name: float(a2[j]),
                    "abs_value": float(value),
                })
    logger.info(f"Located {len(zeros)} zeros below {threshold}")
    return zeros
