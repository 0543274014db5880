"""
RBM Encoding of Imaginary-Time Factors.

A single ancilla and the unitary

    U = exp(-i (W Z_t + b I) (x) X_a)

realize e^{-kappa Z_t} on the ancilla-|0> branch:

    2A <0|_a U |psi>|0>_a = e^{-kappa Z_t} |psi>

A general Pauli string sigma is first reduced to a single-qubit Z by a
Clifford pre-circuit (reduce_to_z).

Two parameterizations:
- standard: A = e^{|kappa|}/2, W = arccos(e^{-2|kappa|})/2, b = sW
- correctable: A = sqrt(cosh(2 kappa)/2), W = arctan(e^{2 kappa}) - pi/4,
  b = pi/4; the failure branch applies e^{+kappa sigma}, which a Pauli O
  anticommuting with sigma turns back into e^{-kappa sigma}
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

from carbm.core.errors import IdentityStringError, IndexCollisionError, StateNormalizationError
from carbm.engine.pauli_algebra import PauliString, pauli_trace

logger = logging.getLogger(__name__)

Scheme = Literal["standard", "correctable"]
SCHEMES = ("standard", "correctable")

_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)
_S = np.diag([1.0, 1j])
_CX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


@dataclass(frozen=True)
class RBMParams:
    """Gadget parameters for one factor e^{-kappa sigma}."""
    scheme: Scheme
    kappa: float
    A: float
    W: float
    b: float
    s: int

    @property
    def norm_factor(self) -> float:
        """2A, the block-encoding normalization."""
        return 2.0 * self.A


def _sign(kappa: float) -> int:
    return -1 if kappa < 0 else 1


def params_standard(kappa: float) -> RBMParams:
    kappa = float(kappa)
    s = _sign(kappa)
    W = 0.5 * math.acos(math.exp(-2.0 * abs(kappa)))
    return RBMParams("standard", kappa, 0.5 * math.exp(abs(kappa)), W, s * W, s)


def params_correctable(kappa: float) -> RBMParams:
    kappa = float(kappa)
    # the bias stays at +pi/4 for both signs of kappa; W carries the sign
    A = math.sqrt(math.cosh(2.0 * kappa) / 2.0)
    W = math.atan(math.exp(2.0 * kappa)) - math.pi / 4.0
    return RBMParams("correctable", kappa, A, W, math.pi / 4.0, _sign(kappa))


def make_params(kappa: float, scheme: Scheme = "standard") -> RBMParams:
    if scheme == "standard":
        return params_standard(kappa)
    if scheme == "correctable":
        return params_correctable(kappa)
    raise ValueError(f"Unknown RBM scheme {scheme!r}; expected one of {SCHEMES}")


@dataclass(frozen=True)
class ITELayer:
    """One imaginary-time layer e^{-kappa sigma}, optionally with a correction O."""
    sigma: PauliString
    kappa: float
    params: RBMParams
    correction: Optional[PauliString] = None

    def __post_init__(self):
        if self.sigma.is_identity:
            raise IdentityStringError("An ITE layer needs a non-identity string", key="sigma")
        if self.correction is not None:
            if self.params.scheme != "correctable":
                raise ValueError("Corrected layers must use the correctable scheme")
            if self.correction.commutes(self.sigma):
                raise ValueError(
                    f"Correction {self.correction} must anticommute with {self.sigma}"
                )

    @property
    def is_corrected(self) -> bool:
        return self.correction is not None

    def to_record(self) -> dict:
        return {
            "sigma": self.sigma.to_text(),
            "kappa": self.kappa,
            "scheme": self.params.scheme,
            "correction": self.correction.to_text() if self.correction is not None else None,
        }


# =============================================================================
# Clifford basis change
# =============================================================================

@dataclass(frozen=True)
class CliffordGate:
    """Basis gate: h, s, sdg on one qubit, or cx on (control, target)."""
    name: Literal["h", "s", "sdg", "cx"]
    qubits: Tuple[int, ...]

    def local_matrix(self) -> np.ndarray:
        if self.name == "h":
            return _HADAMARD
        if self.name == "s":
            return _S
        if self.name == "sdg":
            return _S.conj()
        if self.name == "cx":
            return _CX
        raise ValueError(f"Unknown gate {self.name!r}")

    def inverse(self) -> "CliffordGate":
        swap = {"s": "sdg", "sdg": "s"}
        return CliffordGate(swap.get(self.name, self.name), self.qubits)


def invert_circuit(gates: Sequence[CliffordGate]) -> List[CliffordGate]:
    return [g.inverse() for g in reversed(gates)]


def reduce_to_z(sigma: PauliString) -> Tuple[List[CliffordGate], int]:
    """
    Clifford circuit U (gates in application order) with U sigma U^dagger = Z_target.

    X sites get H, Y sites get Sdg then H; a CX ladder then folds the Z's
    down onto the lowest-index site of the support, which is the target.
    """
    if sigma.is_identity:
        raise IdentityStringError("Cannot reduce the identity string", key="sigma")

    gates: List[CliffordGate] = []
    support = sigma.support
    for q in support:
        letter = sigma.letter(q)
        if letter == "X":
            gates.append(CliffordGate("h", (q,)))
        elif letter == "Y":
            gates.append(CliffordGate("sdg", (q,)))
            gates.append(CliffordGate("h", (q,)))

    for i in range(len(support) - 1, 0, -1):
        gates.append(CliffordGate("cx", (support[i], support[i - 1])))

    return gates, support[0]


# =============================================================================
# Gadget
# =============================================================================

def rbm_generators(
    params: RBMParams, target: int, ancilla: int, n_qubits: int
) -> List[Tuple[float, PauliString]]:
    """
    U as commuting Pauli exponentials: exp(-i W Z_t X_a) exp(-i b X_a).
    """
    if target == ancilla:
        raise IndexCollisionError(
            f"Target and ancilla share qubit {target}", key="ancilla"
        )
    zx = PauliString.from_sites(n_qubits, {target: "Z", ancilla: "X"})
    xa = PauliString.from_sites(n_qubits, {ancilla: "X"})
    return [(params.W, zx), (params.b, xa)]


def block_unitary(
    params: RBMParams,
    target: int,
    ancilla: int,
    n_qubits: Optional[int] = None,
) -> np.ndarray:
    """Dense exp(-i (W Z_target + b I) (x) X_ancilla) on ``n_qubits`` qubits."""
    if n_qubits is None:
        n_qubits = max(target, ancilla) + 1
    dim = 1 << n_qubits
    unitary = np.eye(dim, dtype=complex)
    for theta, p in rbm_generators(params, target, ancilla, n_qubits):
        unitary = (math.cos(theta) * np.eye(dim) - 1j * math.sin(theta) * p.to_matrix()) @ unitary
    return unitary


# =============================================================================
# Success probability
# =============================================================================

def _density_data(state) -> np.ndarray:
    return state.data if hasattr(state, "data") else np.asarray(state)


def sigma_mean(state, sigma: PauliString) -> float:
    """<sigma> on ``state``; sigma on fewer qubits is placed on the leading ones."""
    rho = _density_data(state)
    n_total = int(round(math.log2(rho.shape[0])))
    if sigma.n != n_total:
        sigma = sigma.embed(n_total, 0)
    return float(np.real(pauli_trace(sigma, rho)))


def success_probability(
    params: RBMParams,
    state,
    sigma: PauliString,
    atol: float = 1e-10,
) -> float:
    """
    Probability of the ancilla-|0> branch, Tr[cos^2(W sigma + b I) rho].

    standard:    1 - (1 - e^{-4|kappa|}) alpha,   alpha = Pr(sigma = s)
    correctable: 1 - 1/(1 + e^{4 kappa}) - tanh(2 kappa) alpha,
                 alpha = Pr(sigma = +1)
    """
    rho = _density_data(state)
    trace = complex(np.trace(rho))
    if abs(trace - 1.0) > atol:
        raise StateNormalizationError(
            f"State trace {trace.real:.12g} is not 1", details={"trace": trace.real}
        )

    mean = sigma_mean(rho, sigma)
    kappa = params.kappa
    if params.scheme == "standard":
        alpha = 0.5 * (1.0 + params.s * mean)
        p = 1.0 - (1.0 - math.exp(-4.0 * abs(kappa))) * alpha
    else:
        alpha = 0.5 * (1.0 + mean)
        # 1/(1+e^{4k}) written through tanh to stay finite for large |k|
        p = 0.5 * (1.0 + math.tanh(2.0 * kappa)) - math.tanh(2.0 * kappa) * alpha
    return min(1.0, max(0.0, p))


def success_probability_trace(params: RBMParams, state, sigma: PauliString) -> float:
    """Tr[cos^2(W sigma + b I) rho] expanded over {I, sigma}."""
    mean = sigma_mean(state, sigma)
    w2, b2 = 2.0 * params.W, 2.0 * params.b
    return 0.5 * (1.0 + math.cos(w2) * math.cos(b2) - math.sin(w2) * math.sin(b2) * mean)
