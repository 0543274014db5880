"""
Pauli-String Algebra over GF(2).

Binary symplectic representation of Pauli strings:
- Qubit 0 is the leftmost character of the text form ("XIZZY").
- Bit q of ``x`` / ``z`` is the X-part / Z-part of qubit q.
- ``to_symplectic`` orders the vector as (b|a): Z-part first, then X-part.
  I -> (a0,b0), X -> (a1,b0), Z -> (a0,b1), Y -> (a1,b1).

Unsigned strings (PauliString) multiply by XOR; phases live only in
SignedPauli. PauliSentence is a real-weighted Hermitian sum of strings.

Dense matrices use qubit 0 as the most significant tensor factor.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from carbm.core.errors import PauliLengthError

logger = logging.getLogger(__name__)

MAX_QUBITS = 64
LETTERS = "IXZY"  # indexed by x + 2*z
LETTER_RANK = {"X": 0, "Y": 1, "Z": 2}


def _parity(values: np.ndarray, n_bits: int) -> np.ndarray:
    """Bitwise parity of each integer in ``values`` over its low ``n_bits`` bits."""
    out = np.zeros_like(values)
    for q in range(n_bits):
        out ^= (values >> q) & 1
    return out


@dataclass(frozen=True)
class PauliString:
    """
    Unsigned Pauli word on ``n`` qubits.

    ``x`` holds the X-part bits (a), ``z`` the Z-part bits (b).
    """
    n: int
    x: int = 0
    z: int = 0

    def __post_init__(self):
        if not 0 < self.n <= MAX_QUBITS:
            raise PauliLengthError(f"Qubit count {self.n} outside 1..{MAX_QUBITS}", key="n")
        limit = 1 << self.n
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise PauliLengthError(f"Bit vectors exceed {self.n} qubits", key="n")

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def from_text(cls, text: str) -> "PauliString":
        """Parse "XIZZY" (uppercase I/X/Y/Z, qubit 0 leftmost)."""
        if not text:
            raise PauliLengthError("Empty Pauli text")
        x = z = 0
        for q, ch in enumerate(text):
            if ch not in "IXYZ":
                raise PauliLengthError(f"Invalid Pauli letter {ch!r} in {text!r}")
            if ch in "XY":
                x |= 1 << q
            if ch in "ZY":
                z |= 1 << q
        return cls(len(text), x, z)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0, 0)

    @classmethod
    def from_sites(cls, n: int, sites: Mapping[int, str]) -> "PauliString":
        """Build from ``{qubit: letter}``; missing qubits are identity."""
        x = z = 0
        for q, ch in sites.items():
            if not 0 <= q < n:
                raise PauliLengthError(f"Site {q} outside {n} qubits", key="sites")
            if ch in "XY":
                x |= 1 << q
            if ch in "ZY":
                z |= 1 << q
        return cls(n, x, z)

    # ------------------------------------------------------------------
    # Views
    # ------------------------------------------------------------------

    def letter(self, q: int) -> str:
        return LETTERS[((self.x >> q) & 1) + 2 * ((self.z >> q) & 1)]

    def to_text(self) -> str:
        return "".join(self.letter(q) for q in range(self.n))

    def __str__(self) -> str:
        return self.to_text()

    def __repr__(self) -> str:
        return f"PauliString({self.to_text()!r})"

    @property
    def support(self) -> Tuple[int, ...]:
        mask = self.x | self.z
        return tuple(q for q in range(self.n) if (mask >> q) & 1)

    @property
    def weight(self) -> int:
        return bin(self.x | self.z).count("1")

    @property
    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def canonical_key(self) -> Tuple:
        """Ordering key: weight, then support, then letters (X < Y < Z)."""
        support = self.support
        return (len(support), support, tuple(LETTER_RANK[self.letter(q)] for q in support))

    # ------------------------------------------------------------------
    # Algebra
    # ------------------------------------------------------------------

    def _check_length(self, other: "PauliString") -> None:
        if self.n != other.n:
            raise PauliLengthError(f"Length mismatch: {self.n} vs {other.n}")

    def commutes(self, other: "PauliString") -> bool:
        self._check_length(other)
        overlap = (self.x & other.z) ^ (self.z & other.x)
        return bin(overlap).count("1") % 2 == 0

    def product(self, other: "PauliString") -> "PauliString":
        """Unsigned product: bitwise sum mod 2 of the symplectic vectors."""
        self._check_length(other)
        return PauliString(self.n, self.x ^ other.x, self.z ^ other.z)

    def embed(self, n_total: int, offset: int = 0) -> "PauliString":
        """Place this string on qubits offset..offset+n-1 of a larger register."""
        if offset < 0 or offset + self.n > n_total:
            raise PauliLengthError(
                f"Cannot embed {self.n} qubits at offset {offset} into {n_total}"
            )
        return PauliString(n_total, self.x << offset, self.z << offset)

    def tensor(self, other: "PauliString") -> "PauliString":
        """Concatenate: self on the first qubits, other after it."""
        return PauliString(
            self.n + other.n,
            self.x | (other.x << self.n),
            self.z | (other.z << self.n),
        )

    # ------------------------------------------------------------------
    # Dense representation
    # ------------------------------------------------------------------

    def _index_mask(self, bits: int) -> int:
        mask = 0
        for q in range(self.n):
            if (bits >> q) & 1:
                mask |= 1 << (self.n - 1 - q)
        return mask

    @cached_property
    def action(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Permutation-with-phase form: P|c> = phase[c] |flip[c]>.

        Lets callers apply P to dense matrices in O(4^n) without building it.
        """
        dim = 1 << self.n
        cols = np.arange(dim, dtype=np.int64)
        flip = cols ^ self._index_mask(self.x)
        signs = 1 - 2 * _parity(cols & self._index_mask(self.z), self.n)
        phase = (1, 1j, -1, -1j)[bin(self.x & self.z).count("1") % 4] * signs.astype(complex)
        return flip, phase

    def to_matrix(self) -> np.ndarray:
        dim = 1 << self.n
        flip, phase = self.action
        mat = np.zeros((dim, dim), dtype=complex)
        mat[flip, np.arange(dim)] = phase
        return mat


@dataclass(frozen=True)
class SignedPauli:
    """Pauli string with a phase i**power, power in {0,1,2,3}."""
    string: PauliString
    power: int = 0

    def __post_init__(self):
        object.__setattr__(self, "power", self.power % 4)

    @property
    def phase(self) -> complex:
        return (1, 1j, -1, -1j)[self.power]

    @classmethod
    def from_text(cls, text: str, phase: complex = 1) -> "SignedPauli":
        powers = {1: 0, 1j: 1, -1: 2, -1j: 3}
        if phase not in powers:
            raise ValueError(f"Phase must be a fourth root of unity, got {phase}")
        return cls(PauliString.from_text(text), powers[phase])

    def __mul__(self, other: "SignedPauli") -> "SignedPauli":
        return multiply(self, other)

    def __repr__(self) -> str:
        sign = {0: "+", 1: "+i", 2: "-", 3: "-i"}[self.power]
        return f"SignedPauli({sign}{self.string.to_text()})"


# =============================================================================
# Symplectic operations
# =============================================================================

def to_symplectic(p: PauliString) -> np.ndarray:
    """(b|a) bit vector of length 2n."""
    bits = np.zeros(2 * p.n, dtype=np.uint8)
    for q in range(p.n):
        bits[q] = (p.z >> q) & 1
        bits[p.n + q] = (p.x >> q) & 1
    return bits


def from_symplectic(vector: Sequence[int]) -> PauliString:
    vec = np.asarray(vector, dtype=np.uint8) % 2
    if vec.size % 2:
        raise PauliLengthError(f"Symplectic vector has odd length {vec.size}")
    n = vec.size // 2
    z = sum(int(vec[q]) << q for q in range(n))
    x = sum(int(vec[n + q]) << q for q in range(n))
    return PauliString(n, x, z)


def commutation_row(p: PauliString) -> np.ndarray:
    """
    Row r with r . to_symplectic(q) = 0 iff p and q commute (mod 2).

    This is (a|b): the halves of the symplectic vector swapped.
    """
    vec = to_symplectic(p)
    return np.concatenate([vec[p.n:], vec[:p.n]])


def multiply(p: Union[SignedPauli, PauliString], q: Union[SignedPauli, PauliString]) -> SignedPauli:
    """
    Phase-tracked product.

    Writing each site as i^(xz) X^x Z^z, the exponent of i is
    |x1&z1| + |x2&z2| + 2|z1&x2| - |x3&z3| (mod 4).
    """
    if isinstance(p, PauliString):
        p = SignedPauli(p)
    if isinstance(q, PauliString):
        q = SignedPauli(q)
    s1, s2 = p.string, q.string
    s1._check_length(s2)
    x3, z3 = s1.x ^ s2.x, s1.z ^ s2.z
    k = (
        bin(s1.x & s1.z).count("1")
        + bin(s2.x & s2.z).count("1")
        + 2 * bin(s1.z & s2.x).count("1")
        - bin(x3 & z3).count("1")
    )
    return SignedPauli(PauliString(s1.n, x3, z3), p.power + q.power + k)


def commutes(p: PauliString, q: PauliString) -> bool:
    return p.commutes(q)


@dataclass
class GF2Solution:
    """Solution set of a consistent linear system over GF(2)."""
    particular: np.ndarray
    null_space: List[np.ndarray]
    rank: int

    @property
    def count(self) -> int:
        return 1 << len(self.null_space)

    def solutions(self) -> Iterator[np.ndarray]:
        """Enumerate all solutions (only sensible for small null spaces)."""
        k = len(self.null_space)
        for mask in range(1 << k):
            vec = self.particular.copy()
            for i in range(k):
                if (mask >> i) & 1:
                    vec ^= self.null_space[i]
            yield vec


def _row_reduce(matrix: np.ndarray, n_cols: int) -> Tuple[np.ndarray, List[int]]:
    """In-place Gauss-Jordan elimination mod 2 on the first ``n_cols`` columns."""
    m = matrix.shape[0]
    pivots: List[int] = []
    r = 0
    for c in range(n_cols):
        if r == m:
            break
        nz = np.nonzero(matrix[r:, c])[0]
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            matrix[[r, p]] = matrix[[p, r]]
        mask = matrix[:, c].astype(bool)
        mask[r] = False
        matrix[mask] ^= matrix[r]
        pivots.append(c)
        r += 1
    return matrix, pivots


def gf2_solve(
    rows: Sequence[Sequence[int]],
    rhs: Sequence[int],
    n_vars: Optional[int] = None,
) -> Optional[GF2Solution]:
    """
    Solve rows . x = rhs (mod 2).

    Returns a particular solution plus a null-space basis, or None when the
    system is inconsistent. ``n_vars`` is required only for an empty system.
    """
    if n_vars is None:
        if not rows:
            raise PauliLengthError("n_vars is required when rows is empty", key="n_vars")
        n_vars = len(rows[0])
    if len(rows) != len(rhs):
        raise PauliLengthError(f"{len(rows)} rows but {len(rhs)} right-hand sides")

    if not rows:
        null = [np.eye(n_vars, dtype=np.uint8)[i] for i in range(n_vars)]
        return GF2Solution(np.zeros(n_vars, dtype=np.uint8), null, 0)

    aug = np.zeros((len(rows), n_vars + 1), dtype=np.uint8)
    for i, row in enumerate(rows):
        row = np.asarray(row, dtype=np.uint8) % 2
        if row.size != n_vars:
            raise PauliLengthError(f"Row {i} has length {row.size}, expected {n_vars}")
        aug[i, :n_vars] = row
        aug[i, n_vars] = int(rhs[i]) % 2

    aug, pivots = _row_reduce(aug, n_vars)
    zero_rows = ~aug[:, :n_vars].any(axis=1)
    if np.any(zero_rows & (aug[:, n_vars] == 1)):
        return None

    particular = np.zeros(n_vars, dtype=np.uint8)
    for i, c in enumerate(pivots):
        particular[c] = aug[i, n_vars]

    pivot_set = set(pivots)
    null_space = []
    for f in range(n_vars):
        if f in pivot_set:
            continue
        vec = np.zeros(n_vars, dtype=np.uint8)
        vec[f] = 1
        for i, c in enumerate(pivots):
            vec[c] = aug[i, f]
        null_space.append(vec)

    return GF2Solution(particular, null_space, len(pivots))


def gf2_rank(vectors: Sequence[Sequence[int]]) -> int:
    if not vectors:
        return 0
    mat = np.array([np.asarray(v, dtype=np.uint8) % 2 for v in vectors], dtype=np.uint8)
    _, pivots = _row_reduce(mat, mat.shape[1])
    return len(pivots)


def is_independent(p: PauliString, basis: Iterable[PauliString]) -> bool:
    """True iff p is outside the GF(2) span of ``basis`` (up to phase)."""
    vectors = []
    for b in basis:
        p._check_length(b)
        vectors.append(to_symplectic(b))
    if p.is_identity:
        return False
    return gf2_rank(vectors + [to_symplectic(p)]) > gf2_rank(vectors)


# =============================================================================
# Pauli sentences
# =============================================================================

PauliLike = Union[PauliString, str]


def _as_string(p: PauliLike) -> PauliString:
    return PauliString.from_text(p) if isinstance(p, str) else p


@dataclass(frozen=True)
class PauliSentence:
    """
    Real-weighted sum of Pauli strings (a Hermitian operator).

    Terms are stored in canonical order; zero coefficients are dropped.
    """
    n: int
    terms: Mapping[PauliString, float] = field(default_factory=dict)

    def __post_init__(self):
        merged: Dict[PauliString, float] = {}
        for p, c in self.terms.items():
            if p.n != self.n:
                raise PauliLengthError(f"Term {p} has {p.n} qubits, sentence has {self.n}")
            merged[p] = merged.get(p, 0.0) + float(c)
        ordered = {
            p: merged[p]
            for p in sorted(merged, key=PauliString.canonical_key)
            if merged[p] != 0.0
        }
        object.__setattr__(self, "terms", ordered)

    @classmethod
    def from_terms(
        cls,
        n: int,
        terms: Iterable[Tuple[PauliLike, float]],
        cutoff: float = 0.0,
    ) -> "PauliSentence":
        """Sum (string, coefficient) pairs; drop |c| <= cutoff after merging."""
        merged: Dict[PauliString, float] = {}
        for p, c in terms:
            p = _as_string(p)
            merged[p] = merged.get(p, 0.0) + float(c)
        if cutoff > 0.0:
            merged = {p: c for p, c in merged.items() if abs(c) > cutoff}
        return cls(n, merged)

    @classmethod
    def from_records(cls, records: Sequence[Sequence]) -> "PauliSentence":
        """Build from [["XIZ", 0.5], ...] as stored in JSON."""
        if not records:
            raise PauliLengthError("Cannot infer qubit count from empty records")
        n = len(records[0][0])
        return cls.from_terms(n, ((text, coeff) for text, coeff in records))

    @classmethod
    def zero(cls, n: int) -> "PauliSentence":
        return cls(n, {})

    def to_records(self) -> List[List]:
        return [[p.to_text(), c] for p, c in self.terms.items()]

    # Container protocol
    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[PauliString]:
        return iter(self.terms)

    def items(self):
        return self.terms.items()

    def coefficient(self, p: PauliLike) -> float:
        return self.terms.get(_as_string(p), 0.0)

    @property
    def strings(self) -> List[PauliString]:
        return list(self.terms)

    @property
    def identity_coefficient(self) -> float:
        return self.terms.get(PauliString.identity(self.n), 0.0)

    def without_identity(self) -> "PauliSentence":
        return PauliSentence(self.n, {p: c for p, c in self.terms.items() if not p.is_identity})

    def __repr__(self) -> str:
        body = " + ".join(f"{c:+.6g}*{p}" for p, c in self.terms.items()) or "0"
        return f"PauliSentence({body})"

    # Arithmetic
    def __add__(self, other: "PauliSentence") -> "PauliSentence":
        if other.n != self.n:
            raise PauliLengthError(f"Length mismatch: {self.n} vs {other.n}")
        return PauliSentence.from_terms(
            self.n, list(self.terms.items()) + list(other.terms.items())
        )

    def __neg__(self) -> "PauliSentence":
        return self.scale(-1.0)

    def __sub__(self, other: "PauliSentence") -> "PauliSentence":
        return self + (-other)

    def scale(self, factor: float) -> "PauliSentence":
        return PauliSentence(self.n, {p: factor * c for p, c in self.terms.items()})

    def embed(self, n_total: int, offset: int = 0) -> "PauliSentence":
        return PauliSentence(
            n_total, {p.embed(n_total, offset): c for p, c in self.terms.items()}
        )

    def tensor(self, other: PauliString) -> "PauliSentence":
        """Every term tensored with ``other`` on the following qubits."""
        return PauliSentence(
            self.n + other.n, {p.tensor(other): c for p, c in self.terms.items()}
        )

    def commutator(self, other: "PauliSentence") -> "PauliSentence":
        """i[A, B], which is Hermitian with real coefficients."""
        if other.n != self.n:
            raise PauliLengthError(f"Length mismatch: {self.n} vs {other.n}")
        acc: List[Tuple[PauliString, float]] = []
        for p, a in self.terms.items():
            for q, b in other.terms.items():
                if p.commutes(q):
                    continue
                prod = multiply(p, q)
                # i * 2 * phase, phase is +-i for anticommuting pairs
                value = (2j * prod.phase * a * b).real
                acc.append((prod.string, value))
        return PauliSentence.from_terms(self.n, acc)

    def commutes_with(self, other: "PauliSentence", atol: float = 1e-12) -> bool:
        comm = self.commutator(other)
        return all(abs(c) <= atol for c in comm.terms.values())

    def is_abelian(self) -> bool:
        strings = self.strings
        return all(
            strings[i].commutes(strings[j])
            for i in range(len(strings))
            for j in range(i + 1, len(strings))
        )

    # Dense
    def to_matrix(self) -> np.ndarray:
        dim = 1 << self.n
        mat = np.zeros((dim, dim), dtype=complex)
        cols = np.arange(dim)
        for p, c in self.terms.items():
            flip, phase = p.action
            mat[flip, cols] += c * phase
        return mat

    def frobenius_norm(self) -> float:
        """||S||_F = sqrt(2^n * sum c^2) since Pauli strings are orthogonal."""
        return float(np.sqrt((1 << self.n) * sum(c * c for c in self.terms.values())))


# =============================================================================
# Dense actions
# =============================================================================

def left_multiply(p: PauliString, mat: np.ndarray) -> np.ndarray:
    """P @ M without forming P."""
    flip, phase = p.action
    return phase[flip][:, None] * mat[flip, :]


def right_multiply(mat: np.ndarray, p: PauliString) -> np.ndarray:
    """M @ P without forming P."""
    flip, phase = p.action
    return mat[:, flip] * phase[None, :]


def conjugate_dense(mat: np.ndarray, p: PauliString, angle: float) -> np.ndarray:
    """exp(-i angle P) M exp(+i angle P)."""
    c, s = np.cos(angle), np.sin(angle)
    pm = left_multiply(p, mat)
    mp = right_multiply(mat, p)
    pmp = right_multiply(pm, p)
    return (c * c) * mat + (s * s) * pmp - 1j * (s * c) * (pm - mp)


def pauli_trace(p: PauliString, mat: np.ndarray) -> complex:
    """Tr(P M)."""
    flip, phase = p.action
    return complex(np.sum(phase[flip] * mat[flip, np.arange(mat.shape[0])]))
