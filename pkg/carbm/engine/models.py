"""
Model Hamiltonians and observables as Pauli sentences.

XXZ chain (open boundaries) with a uniform Z probe field, and the staggered
N-flavor Gross-Neveu model after Jordan-Wigner. Gross-Neveu qubits are
flavor-major: flavor a, site x (0-based) sits on qubit a*L + x; the
staggered sign (-1)^n uses n = x + 1.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from carbm.core.errors import ConfigError
from carbm.engine.pauli_algebra import PauliSentence, PauliString

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class XXZSpec:
    L: int
    J: float = 1.0
    Jz: float = 1.0
    g_r: float = 0.0

    def __post_init__(self):
        if self.L < 2:
            raise ConfigError(f"XXZ chain needs L >= 2, got {self.L}", key="model.L")


@dataclass(frozen=True)
class GrossNeveuSpec:
    N: int
    L: int
    G: float = 0.0
    mu: float = 0.0
    m: float = 0.0

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError(f"Gross-Neveu needs N >= 1, got {self.N}", key="model.N")
        if self.L < 2:
            raise ConfigError(f"Gross-Neveu needs L >= 2, got {self.L}", key="model.L")

    @property
    def n_qubits(self) -> int:
        return self.N * self.L

    def qubit(self, flavor: int, site: int) -> int:
        return flavor * self.L + site


def _term(n: int, sites: dict, coeff: float) -> Tuple[PauliString, float]:
    return PauliString.from_sites(n, sites), coeff


# =============================================================================
# XXZ
# =============================================================================

def build_probe(L: int, g_r: float) -> PauliSentence:
    """g_r sum_i Z_i."""
    return PauliSentence.from_terms(L, (_term(L, {i: "Z"}, g_r) for i in range(L)))


def build_interaction(L: int) -> PauliSentence:
    """H_I = sum_i Z_i, the operator the complex probe field couples to."""
    return build_probe(L, 1.0)


def build_xxz(spec: XXZSpec) -> PauliSentence:
    """-J sum (XX + YY) - Jz sum ZZ + g_r sum Z, open chain."""
    L = spec.L
    terms: List[Tuple[PauliString, float]] = []
    for i in range(L - 1):
        terms.append(_term(L, {i: "X", i + 1: "X"}, -spec.J))
        terms.append(_term(L, {i: "Y", i + 1: "Y"}, -spec.J))
        terms.append(_term(L, {i: "Z", i + 1: "Z"}, -spec.Jz))
    return PauliSentence.from_terms(L, terms) + build_probe(L, spec.g_r)


def split_xxz(spec: XXZSpec) -> Tuple[PauliSentence, PauliSentence]:
    """(H_s, H_I) with H0 = H_s + g_r H_I."""
    h_s = build_xxz(XXZSpec(spec.L, spec.J, spec.Jz, 0.0))
    return h_s, build_interaction(spec.L)


# =============================================================================
# Gross-Neveu
# =============================================================================

def _bond_terms(spec: GrossNeveuSpec, a: int, x: int, scale: float) -> List[Tuple[PauliString, float]]:
    """scale * (-X_n Y_{n+1} + Y_n X_{n+1}) on flavor a, bond (x, x+1)."""
    n = spec.n_qubits
    q, r = spec.qubit(a, x), spec.qubit(a, x + 1)
    return [
        _term(n, {q: "X", r: "Y"}, -scale),
        _term(n, {q: "Y", r: "X"}, scale),
    ]


def build_gross_neveu(spec: GrossNeveuSpec) -> PauliSentence:
    """
    Kinetic + mass + four-fermion interaction + chemical potential.

        sum_a sum_n (-X_n Y_{n+1} + Y_n X_{n+1})
      + m sum_a sum_n (-1)^n (1 - Z_n)
      - G^2/2 sum_n sum_{a<b} (I - Z_n(a)) (I - Z_n(b))
      + mu sum_a sum_n (-1)^n (-X_n Y_{n+1} + Y_n X_{n+1})

    With chi = |0><1| (see jordan_wigner_annihilator) each bond operator
    -X_n Y_{n+1} + Y_n X_{n+1} is the hop 2i(chi_n^dag chi_{n+1} - h.c.), so
    the chemical potential scales the kinetic hop of bond n by mu (-1)^n.
    """
    n = spec.n_qubits
    identity = PauliString.identity(n)
    terms: List[Tuple[PauliString, float]] = []

    for a in range(spec.N):
        for x in range(spec.L - 1):
            stagger = (-1) ** (x + 1)
            terms.extend(_bond_terms(spec, a, x, 1.0))
            if spec.mu != 0.0:
                terms.extend(_bond_terms(spec, a, x, spec.mu * stagger))
        if spec.m != 0.0:
            for x in range(spec.L):
                stagger = (-1) ** (x + 1)
                terms.append((identity, spec.m * stagger))
                terms.append(_term(n, {spec.qubit(a, x): "Z"}, -spec.m * stagger))

    if spec.G != 0.0:
        w = -0.5 * spec.G ** 2
        for x in range(spec.L):
            for a in range(spec.N):
                for b in range(a + 1, spec.N):
                    qa, qb = spec.qubit(a, x), spec.qubit(b, x)
                    terms.append((identity, w))
                    terms.append(_term(n, {qa: "Z"}, -w))
                    terms.append(_term(n, {qb: "Z"}, -w))
                    terms.append(_term(n, {qa: "Z", qb: "Z"}, w))

    return PauliSentence.from_terms(n, terms)


def build_condensate_observable(spec: GrossNeveuSpec) -> PauliSentence:
    """sum_i Z_i Z_0 over the sites of flavor 0; the i = 0 term is I."""
    n = spec.n_qubits
    terms = [(PauliString.identity(n), 1.0)]
    for x in range(1, spec.L):
        terms.append(_term(n, {0: "Z", spec.qubit(0, x): "Z"}, 1.0))
    return PauliSentence.from_terms(n, terms)


def flavor_parity(spec: GrossNeveuSpec, flavor: int) -> PauliString:
    """prod_x Z over the sites of one flavor."""
    return PauliString.from_sites(
        spec.n_qubits, {spec.qubit(flavor, x): "Z" for x in range(spec.L)}
    )


def jordan_wigner_annihilator(spec: GrossNeveuSpec, flavor: int, site: int) -> np.ndarray:
    """Dense chi_{site}(flavor): Z on every lower qubit, then |0><1| on its own."""
    n = spec.n_qubits
    q = spec.qubit(flavor, site)
    lower = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    z = np.diag([1.0, -1.0]).astype(complex)
    out = np.array([[1.0]], dtype=complex)
    for k in range(n):
        if k < q:
            factor = z
        elif k == q:
            factor = lower
        else:
            factor = np.eye(2, dtype=complex)
        out = np.kron(out, factor)
    return out
