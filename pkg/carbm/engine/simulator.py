"""
Dense Density-Matrix Simulator.

Exact simulation of RBM imaginary-time circuits with branch arithmetic
(conditioning on ancilla outcomes instead of sampling them).

Register layout (qubit 0 is the most significant tensor factor):

    [ system (n) | copy (n, tfd only) | rbm ancilla (1) | probe (1, optional) ]

Gates:
- CliffordGate     h / s / sdg / cx basis changes
- PauliExponential exp(-i theta P)
- ControlledPauli  |0><0| (x) I + |1><1| (x) O
- DenseUnitary     arbitrary unitary on a few qubits
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from carbm.core.config import get_settings
from carbm.core.errors import (
    AncillaNotResetError,
    NonCommutingLayersError,
    PauliLengthError,
    QubitIndexError,
    SizeLimitError,
    StateNormalizationError,
)
from carbm.engine.correction import CorrectionPlan, build_layers
from carbm.engine.pauli_algebra import (
    PauliSentence,
    PauliString,
    conjugate_dense,
    left_multiply,
    pauli_trace,
    right_multiply,
)
from carbm.engine.rbm_encoding import (
    CliffordGate,
    ITELayer,
    Scheme,
    invert_circuit,
    rbm_generators,
    reduce_to_z,
)

logger = logging.getLogger(__name__)

InitialMode = Literal["mixed_density", "tfd_purified"]
MAX_QUBITS = 12
STATE_TOLERANCE = 1e-12


# =============================================================================
# Layout and state
# =============================================================================

@dataclass(frozen=True)
class RegisterLayout:
    """Qubit positions of the registers."""
    n_system: int
    n_copy: int = 0
    has_ancilla: bool = True
    has_probe: bool = False

    @property
    def system(self) -> Tuple[int, ...]:
        return tuple(range(self.n_system))

    @property
    def copy(self) -> Tuple[int, ...]:
        return tuple(range(self.n_system, self.n_system + self.n_copy))

    @property
    def ancilla(self) -> int:
        if not self.has_ancilla:
            raise QubitIndexError("Layout has no RBM ancilla", key="ancilla")
        return self.n_system + self.n_copy

    @property
    def probe(self) -> int:
        if not self.has_probe:
            raise QubitIndexError("Layout has no probe qubit", key="probe")
        return self.n_system + self.n_copy + int(self.has_ancilla)

    @property
    def n_qubits(self) -> int:
        return self.n_system + self.n_copy + int(self.has_ancilla) + int(self.has_probe)


@dataclass
class DensityMatrix:
    """Dense 2^m x 2^m density matrix over a RegisterLayout."""
    data: np.ndarray
    layout: RegisterLayout

    def __post_init__(self):
        dim = 1 << self.layout.n_qubits
        if self.data.shape != (dim, dim):
            raise PauliLengthError(
                f"Data shape {self.data.shape} does not match {self.layout.n_qubits} qubits"
            )

    @property
    def n_qubits(self) -> int:
        return self.layout.n_qubits

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(self.data.copy(), self.layout)

    def trace(self) -> float:
        return float(np.real(np.trace(self.data)))

    def purity(self) -> float:
        return float(np.real(np.sum(self.data * self.data.T)))

    def check(self, psd: bool = False, tol: float = STATE_TOLERANCE) -> List[str]:
        """
        Invariant violations; eigenvalue check only when ``psd`` is set.

        The eigenvalue floor is ``simulator.psd_tolerance`` from settings.
        """
        issues = []
        herm = float(np.max(np.abs(self.data - self.data.conj().T)))
        if herm > tol:
            issues.append(f"not Hermitian (deviation {herm:.3e})")
        tr = complex(np.trace(self.data))
        if abs(tr - 1.0) > tol:
            issues.append(f"trace {tr.real:.15g} != 1")
        if psd:
            min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (self.data + self.data.conj().T))))
            if min_eig < -get_settings().simulator.psd_tolerance:
                issues.append(f"negative eigenvalue {min_eig:.3e}")
        return issues

    def reduced(self, qubits: Sequence[int]) -> np.ndarray:
        """Reduced density matrix on ``qubits`` (kept in the given order)."""
        m = self.n_qubits
        for q in qubits:
            if not 0 <= q < m:
                raise QubitIndexError(f"Qubit {q} outside 0..{m - 1}", key="qubits")
        keep = list(qubits)
        drop = [q for q in range(m) if q not in keep]
        t = self.data.reshape([2] * (2 * m))
        perm = keep + drop + [m + q for q in keep] + [m + q for q in drop]
        t = t.transpose(perm)
        dk, dd = 1 << len(keep), 1 << len(drop)
        t = t.reshape(dk, dd, dk, dd)
        return np.einsum("ajbj->ab", t)

    def to_dict(self) -> Dict:
        return {
            "layout": {
                "n_system": self.layout.n_system,
                "n_copy": self.layout.n_copy,
                "has_ancilla": self.layout.has_ancilla,
                "has_probe": self.layout.has_probe,
            },
            "trace": self.trace(),
            "purity": self.purity(),
            "real": np.real(self.data).tolist(),
            "imag": np.imag(self.data).tolist(),
        }


@dataclass
class RunResult:
    """Outcome of run_ite."""
    state: DensityMatrix
    success_probability: float = 1.0
    log_norm: float = 0.0
    log_weight: float = 0.0
    layer_probabilities: List[float] = field(default_factory=list)

    def partition_function(self, n_system: Optional[int] = None) -> float:
        """Tr e^{-beta h} for a maximally mixed start: 2^n exp(log_weight)."""
        n = self.state.layout.n_system if n_system is None else n_system
        return float((1 << n) * math.exp(self.log_weight))


def _check_size(m: int, max_qubits: int) -> None:
    if m > max_qubits:
        raise SizeLimitError(
            f"Register of {m} qubits exceeds the dense limit of {max_qubits}",
            key="max_qubits",
            details={"qubits": m, "max_qubits": max_qubits},
        )


def _ket0_projector() -> np.ndarray:
    return np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)


def prepare_initial(
    n: int,
    mode: InitialMode = "mixed_density",
    max_qubits: int = MAX_QUBITS,
) -> DensityMatrix:
    """
    I/2^n on the system (mixed_density) or n Bell pairs between system and
    copy registers (tfd_purified), followed by the RBM ancilla in |0>.
    """
    if mode == "mixed_density":
        layout = RegisterLayout(n)
        _check_size(layout.n_qubits, max_qubits)
        system = np.eye(1 << n, dtype=complex) / (1 << n)
        return DensityMatrix(np.kron(system, _ket0_projector()), layout)

    if mode == "tfd_purified":
        layout = RegisterLayout(n, n_copy=n)
        _check_size(layout.n_qubits, max_qubits)
        dim = 1 << layout.n_qubits
        data = np.zeros((dim, dim), dtype=complex)
        data[0, 0] = 1.0
        state = DensityMatrix(data, layout)
        for i in range(n):
            state = apply_gate(state, CliffordGate("h", (i,)))
            state = apply_gate(state, CliffordGate("cx", (i, n + i)))
        return state

    raise ValueError(f"Unknown initial mode {mode!r}")


def attach_probe(state: DensityMatrix) -> DensityMatrix:
    """Append a probe qubit in |+>."""
    if state.layout.has_probe:
        raise QubitIndexError("Probe already attached", key="probe")
    plus = np.full((2, 2), 0.5, dtype=complex)
    return DensityMatrix(np.kron(state.data, plus), replace(state.layout, has_probe=True))


# =============================================================================
# Gates
# =============================================================================

@dataclass(frozen=True)
class PauliExponential:
    """exp(-i theta P) with P on the full register."""
    theta: float
    pauli: PauliString


@dataclass(frozen=True)
class ControlledPauli:
    """Apply O when ``control`` is |1>."""
    control: int
    pauli: PauliString


@dataclass(frozen=True)
class DenseUnitary:
    """Unitary ``matrix`` on ``qubits`` (first listed qubit is most significant)."""
    matrix: np.ndarray
    qubits: Tuple[int, ...]


Gate = Union[CliffordGate, PauliExponential, ControlledPauli, DenseUnitary]


def apply_local(mat: np.ndarray, local: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """(L on ``qubits``) @ M for M with 2^n rows."""
    k = len(qubits)
    cols = mat.shape[1]
    t = mat.reshape([2] * n + [cols])
    t = np.tensordot(local.reshape([2] * (2 * k)), t, axes=(list(range(k, 2 * k)), list(qubits)))
    t = np.moveaxis(t, list(range(k)), list(qubits))
    return t.reshape(1 << n, cols)


def embed_local(local: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Dense 2^n x 2^n matrix of ``local`` acting on ``qubits``."""
    return apply_local(np.eye(1 << n, dtype=complex), local, qubits, n)


def circuit_unitary(gates: Sequence[CliffordGate], n: int) -> np.ndarray:
    """Dense product of basis gates in application order."""
    out = np.eye(1 << n, dtype=complex)
    for gate in gates:
        out = apply_local(out, gate.local_matrix(), gate.qubits, n)
    return out


def _check_qubits(qubits: Sequence[int], m: int) -> None:
    if len(set(qubits)) != len(qubits):
        raise QubitIndexError(f"Repeated qubit in {tuple(qubits)}", key="qubits")
    for q in qubits:
        if not 0 <= q < m:
            raise QubitIndexError(f"Qubit {q} outside 0..{m - 1}", key="qubits")


def _check_width(p: PauliString, m: int) -> None:
    if p.n != m:
        raise QubitIndexError(f"Pauli {p} has {p.n} qubits, register has {m}", key="pauli")


def _conjugate_local(data: np.ndarray, local: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    left = apply_local(data, local, qubits, n)
    return apply_local(left.conj().T, local, qubits, n).conj().T


def apply_gate(state: DensityMatrix, gate: Gate) -> DensityMatrix:
    """rho -> U rho U^dagger."""
    m = state.n_qubits
    if isinstance(gate, CliffordGate):
        _check_qubits(gate.qubits, m)
        data = _conjugate_local(state.data, gate.local_matrix(), gate.qubits, m)
    elif isinstance(gate, DenseUnitary):
        _check_qubits(gate.qubits, m)
        data = _conjugate_local(state.data, np.asarray(gate.matrix, dtype=complex), gate.qubits, m)
    elif isinstance(gate, PauliExponential):
        _check_width(gate.pauli, m)
        if gate.theta == 0.0:
            return state
        data = conjugate_dense(state.data, gate.pauli, gate.theta)
    elif isinstance(gate, ControlledPauli):
        _check_qubits([gate.control], m)
        _check_width(gate.pauli, m)
        if (gate.pauli.x | gate.pauli.z) >> gate.control & 1:
            raise QubitIndexError(
                f"Controlled Pauli {gate.pauli} acts on its control {gate.control}", key="control"
            )
        data = _apply_controlled(state.data, gate.control, gate.pauli, m)
    else:
        raise TypeError(f"Unsupported gate {type(gate).__name__}")
    return DensityMatrix(data, state.layout)


def _apply_controlled(data: np.ndarray, control: int, o: PauliString, m: int) -> np.ndarray:
    bit = (np.arange(1 << m) >> (m - 1 - control)) & 1
    on = bit.astype(bool)
    o_rho = left_multiply(o, data)
    rho_o = right_multiply(data, o)
    o_rho_o = right_multiply(o_rho, o)
    out = data.copy()
    out[np.ix_(~on, on)] = rho_o[np.ix_(~on, on)]
    out[np.ix_(on, ~on)] = o_rho[np.ix_(on, ~on)]
    out[np.ix_(on, on)] = o_rho_o[np.ix_(on, on)]
    return out


# =============================================================================
# Ancilla handling
# =============================================================================

def _ancilla_mask(layout: RegisterLayout) -> np.ndarray:
    m = layout.n_qubits
    return ((np.arange(1 << m) >> (m - 1 - layout.ancilla)) & 1).astype(bool)


def _check_ancilla_reset(state: DensityMatrix, atol: float = 1e-10) -> None:
    rho_a = state.reduced([state.layout.ancilla])
    if abs(rho_a[1, 1]) > atol or abs(rho_a[0, 1]) > atol:
        raise AncillaNotResetError(
            f"RBM ancilla is not in |0> (population {rho_a[1, 1].real:.3e})",
            key="ancilla",
        )


def reset_ancilla(state: DensityMatrix) -> DensityMatrix:
    """Trace out the RBM ancilla and re-prepare it in |0>."""
    on = _ancilla_mask(state.layout)
    data = np.zeros_like(state.data)
    off_idx = np.nonzero(~on)[0]
    on_idx = np.nonzero(on)[0]
    data[np.ix_(off_idx, off_idx)] = (
        state.data[np.ix_(off_idx, off_idx)] + state.data[np.ix_(on_idx, on_idx)]
    )
    return DensityMatrix(data, state.layout)


def _project_ancilla_zero(state: DensityMatrix) -> Tuple[DensityMatrix, float]:
    on = _ancilla_mask(state.layout)
    data = state.data.copy()
    data[on, :] = 0.0
    data[:, on] = 0.0
    p = float(np.real(np.trace(data)))
    if p <= 0.0:
        raise StateNormalizationError("Success branch has zero probability", key="layer")
    return DensityMatrix(data / p, state.layout), p


def _apply_circuit(state: DensityMatrix, gates: Sequence[Gate]) -> DensityMatrix:
    for gate in gates:
        state = apply_gate(state, gate)
    return state


# =============================================================================
# Imaginary-time evolution
# =============================================================================

def apply_rbm_layer(state: DensityMatrix, layer: ITELayer) -> Tuple[DensityMatrix, float]:
    """
    Apply e^{-kappa sigma} through the RBM gadget.

    Uncorrected layers condition on the ancilla-|0> branch and return its
    probability. Corrected layers apply the correction controlled on the
    ancilla, discard it and return 1.

    Raises:
        AncillaNotResetError: ancilla not in |0> on entry
    """
    layout = state.layout
    m = state.n_qubits
    _check_ancilla_reset(state)

    sigma = layer.sigma.embed(m, 0) if layer.sigma.n != m else layer.sigma
    pre, target = reduce_to_z(sigma)
    post = invert_circuit(pre)
    rbm = [PauliExponential(theta, p) for theta, p in rbm_generators(layer.params, target, layout.ancilla, m)]

    state = _apply_circuit(state, pre)
    state = _apply_circuit(state, rbm)

    if layer.correction is None:
        state, p = _project_ancilla_zero(state)
        state = _apply_circuit(state, post)
        logger.debug(f"Layer {layer.sigma} kappa={layer.kappa:.6g}: branch p={p:.12g}")
        return state, p

    state = _apply_circuit(state, post)
    o = layer.correction.embed(m, 0) if layer.correction.n != m else layer.correction
    state = apply_gate(state, ControlledPauli(layout.ancilla, o))
    state = reset_ancilla(state)
    logger.debug(f"Layer {layer.sigma} kappa={layer.kappa:.6g}: corrected by {layer.correction}")
    return state, 1.0


def _check_kappas(plan: CorrectionPlan, h: PauliSentence, beta: float, atol: float = 1e-12) -> None:
    expected = {p: 0.5 * beta * c for p, c in h.without_identity().items()}
    actual = plan.kappas()
    if set(expected) != set(actual):
        raise ValueError("Correction plan layers do not match the terms of h")
    for p, kappa in expected.items():
        if abs(actual[p] - kappa) > atol * max(1.0, abs(kappa)):
            raise ValueError(f"Layer {p} has kappa {actual[p]}, expected beta*c/2 = {kappa}")


def run_ite(
    state: DensityMatrix,
    h: PauliSentence,
    beta: float,
    plan: Optional[CorrectionPlan] = None,
    scheme: Scheme = "standard",
) -> RunResult:
    """
    e^{-beta h/2} rho e^{-beta h/2} / Z through one RBM layer per term of h.

    Layer kappas are beta*c/2. Identity terms of h only scale the weight.
    ``log_weight`` accumulates log Tr of the unnormalized map, so that
    RunResult.partition_function gives Tr e^{-beta h} for a mixed start.

    Raises:
        NonCommutingLayersError: terms of h do not commute
    """
    if not h.without_identity().is_abelian():
        raise NonCommutingLayersError("Terms of h do not mutually commute", key="h")

    if plan is None:
        layers = build_layers(h, beta, scheme)
        layers.sort(key=lambda layer: -abs(layer.kappa))
        plan = CorrectionPlan(layers)
    else:
        _check_kappas(plan, h, beta)

    result = RunResult(state=state, log_weight=-beta * h.identity_coefficient)
    for layer in plan.layers:
        result.state, p = apply_rbm_layer(result.state, layer)
        two_a = layer.params.norm_factor
        result.log_norm += math.log(two_a)
        result.layer_probabilities.append(p)
        if layer.correction is None:
            result.success_probability *= p
            result.log_weight += math.log(p) + 2.0 * math.log(two_a)
        else:
            result.log_weight += 2.0 * math.log(two_a) - math.log(2.0)

    logger.debug(
        f"ITE beta={beta:.6g}: {len(plan.layers)} layers, "
        f"p={result.success_probability:.6g}, log_weight={result.log_weight:.6g}"
    )
    return result


# =============================================================================
# Readout
# =============================================================================

def expectation(state: DensityMatrix, obs: PauliSentence, imag_tol: float = 1e-10) -> float:
    """Tr(rho O); observables on fewer qubits act on the leading ones."""
    m = state.n_qubits
    if obs.n > m:
        raise PauliLengthError(f"Observable on {obs.n} qubits, state has {m}", key="observable")
    if obs.n < m:
        obs = obs.embed(m, 0)
    value = sum(c * pauli_trace(p, state.data) for p, c in obs.items())
    value = complex(value)
    if abs(value.imag) > imag_tol:
        raise StateNormalizationError(
            f"Expectation has imaginary part {value.imag:.3e}", key="observable"
        )
    return value.real


def ancilla_coherence(state: DensityMatrix, qubit: Optional[int] = None) -> complex:
    """2 rho_q[0, 1] = <X> - i<Y> of ``qubit`` (default: the probe)."""
    q = state.layout.probe if qubit is None else qubit
    return complex(2.0 * state.reduced([q])[0, 1])


def sample_shots(
    state: DensityMatrix,
    basis: Union[str, Dict[int, str]],
    shots: int,
    seed: Optional[int] = None,
) -> Dict[str, int]:
    """
    Multinomial measurement counts in a Pauli product basis.

    ``basis`` is a text string over the whole register (I marks unmeasured
    qubits) or a {qubit: letter} map. Keys are bitstrings over the measured
    qubits in ascending order; outcomes with zero counts are omitted.
    """
    if shots <= 0:
        raise ValueError(f"shots must be positive, got {shots}")
    m = state.n_qubits
    if isinstance(basis, str):
        if len(basis) != m:
            raise PauliLengthError(f"Basis {basis!r} does not cover {m} qubits", key="basis")
        basis = {q: ch for q, ch in enumerate(basis) if ch != "I"}
    measured = sorted(basis)
    _check_qubits(measured, m)

    rotated = state
    for q in measured:
        letter = basis[q]
        if letter == "X":
            rotated = apply_gate(rotated, CliffordGate("h", (q,)))
        elif letter == "Y":
            rotated = apply_gate(rotated, CliffordGate("sdg", (q,)))
            rotated = apply_gate(rotated, CliffordGate("h", (q,)))
        elif letter != "Z":
            raise ValueError(f"Invalid basis letter {letter!r}")

    probs = np.clip(np.real(np.diag(rotated.reduced(measured))), 0.0, None)
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, probs)
    width = len(measured)
    return {
        format(i, f"0{width}b"): int(c) for i, c in enumerate(counts) if c > 0
    }
