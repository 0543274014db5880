"""
Cartan (KHK) Decomposition.

Compiles H = K h K^dagger with h in an Abelian (Cartan) subalgebra of the
Lie closure of H and K = prod_j exp(i theta_j k_j), so that

    exp(-beta H) = K exp(-beta h) K^dagger

for every beta with a circuit of fixed depth.

Pipeline:
1. lie_closure: close the Hamiltonian's strings under products of
   anticommuting pairs
2. select_csa: extend a hint (or nothing) to a maximal commuting set
3. optimize_angles: cyclic single-angle minimization of
   f(theta) = <v, K^dagger H K>, v = sum_i gamma^i h_i
4. h extraction by symbolic conjugation (conjugate_by_exponential)
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from carbm.core.errors import ClosureDimensionError, CSAHintError
from carbm.engine.cache_manager import CacheManager, hamiltonian_hash
from carbm.engine.pauli_algebra import (
    PauliSentence,
    PauliString,
    conjugate_dense,
    multiply,
    pauli_trace,
)

logger = logging.getLogger(__name__)

GOLDEN_GAMMA = (math.sqrt(5.0) - 1.0) / 2.0

DEFAULTS = {
    "tolerance": 1e-9,
    "max_iter": 20000,
    "max_closure_dim": 4096,
    "dense_check_qubits": 8,
    "prune": 1e-15,
    "stall_tolerance": 1e-9,
    "stall_sweeps": 50,
}


# =============================================================================
# Domain types
# =============================================================================

@dataclass(frozen=True)
class LieClosure:
    """Pauli strings closed under products of anticommuting pairs."""
    n: int
    generators: Tuple[PauliString, ...]
    elements: Tuple[PauliString, ...]

    def __post_init__(self):
        object.__setattr__(self, "_members", frozenset(self.elements))

    def __contains__(self, p: PauliString) -> bool:
        return p in self._members

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)


@dataclass(frozen=True)
class CartanSubalgebra:
    """Ordered basis of mutually commuting Pauli strings."""
    basis: Tuple[PauliString, ...]

    def __contains__(self, p: PauliString) -> bool:
        # distinct Pauli strings are linearly independent, so span membership
        # of a single string is basis membership
        return p in self.basis

    def __len__(self) -> int:
        return len(self.basis)

    def __iter__(self):
        return iter(self.basis)

    def texts(self) -> List[str]:
        return [p.to_text() for p in self.basis]


@dataclass
class AngleOptimization:
    """Result of optimize_angles."""
    angles: np.ndarray
    converged: bool
    sweeps: int
    residual: float
    cost: float
    attempts: int = 1


@dataclass
class KHKDecomposition:
    """H = K h K^dagger with K = prod_j exp(i theta_j k_j), j in list order."""
    n: int
    factors: List[Tuple[float, PauliString]]
    h: PauliSentence
    residual: float
    csa: CartanSubalgebra
    converged: bool = True
    sweeps: int = 0
    closure_size: int = 0
    cache_hit: bool = False
    cache_key: Optional[str] = None
    elapsed_seconds: float = 0.0

    @property
    def is_trivial(self) -> bool:
        return not self.factors

    def k_matrix(self) -> np.ndarray:
        dim = 1 << self.n
        mat = np.eye(dim, dtype=complex)
        for theta, k in reversed(self.factors):
            mat = conjugate_dense(mat, k, -theta)
        return mat

    def apply_k(self, matrix: np.ndarray) -> np.ndarray:
        """K M K^dagger for a dense operator on the system register."""
        out = matrix
        for theta, k in reversed(self.factors):
            out = conjugate_dense(out, k, -theta)
        return out

    def apply_k_dagger(self, matrix: np.ndarray) -> np.ndarray:
        """K^dagger M K."""
        out = matrix
        for theta, k in self.factors:
            out = conjugate_dense(out, k, theta)
        return out

    def reconstruct(self) -> np.ndarray:
        """Dense K h K^dagger."""
        return self.apply_k(self.h.to_matrix())

    def to_dict(self) -> Dict:
        return {
            "n": self.n,
            "k_factors": [[float(theta), k.to_text()] for theta, k in self.factors],
            "h_terms": self.h.to_records(),
            "csa": self.csa.texts(),
            "residual": float(self.residual),
            "converged": bool(self.converged),
            "sweeps": int(self.sweeps),
            "closure_size": int(self.closure_size),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "KHKDecomposition":
        n = int(data["n"])
        factors = [(float(theta), PauliString.from_text(text)) for theta, text in data["k_factors"]]
        h = PauliSentence.from_terms(n, ((text, c) for text, c in data["h_terms"]))
        csa = CartanSubalgebra(tuple(PauliString.from_text(t) for t in data["csa"]))
        for _, k in factors:
            if k.n != n:
                raise ValueError(f"factor {k} does not act on {n} qubits")
        return cls(
            n=n,
            factors=factors,
            h=h,
            residual=float(data["residual"]),
            csa=csa,
            converged=bool(data.get("converged", True)),
            sweeps=int(data.get("sweeps", 0)),
            closure_size=int(data.get("closure_size", 0)),
        )


# =============================================================================
# Dense helpers
# =============================================================================

def _trace_product(a: np.ndarray, b: np.ndarray) -> float:
    """Re Tr(A B)."""
    return float(np.real(np.sum(a * b.T)))


def _off_csa_norm(mat: np.ndarray, csa: CartanSubalgebra) -> float:
    """Frobenius norm of M minus its projection onto span(I, csa)."""
    dim = mat.shape[0]
    n = csa.basis[0].n if csa.basis else int(round(math.log2(dim)))
    remainder = mat.copy()
    for p in (PauliString.identity(n),) + tuple(csa.basis):
        coeff = pauli_trace(p, mat) / dim
        flip, phase = p.action
        remainder[flip, np.arange(dim)] -= coeff * phase
    return float(np.linalg.norm(remainder))


# =============================================================================
# Operations
# =============================================================================

def lie_closure(H: PauliSentence, max_dim: int = DEFAULTS["max_closure_dim"]) -> LieClosure:
    """
    Close the (non-identity) strings of H under products of anticommuting pairs.

    Raises:
        ClosureDimensionError: closure exceeds max_dim elements
    """
    generators = tuple(p for p in H.strings if not p.is_identity)
    elements: List[PauliString] = list(generators)
    seen = set(elements)

    idx = 0
    while idx < len(elements):
        a = elements[idx]
        for j in range(idx):
            b = elements[j]
            if a.commutes(b):
                continue
            c = a.product(b)
            if c in seen:
                continue
            seen.add(c)
            elements.append(c)
            if len(elements) > max_dim:
                raise ClosureDimensionError(
                    f"Lie closure exceeded {max_dim} elements",
                    partial_size=len(elements),
                    max_dim=max_dim,
                )
        idx += 1

    ordered = tuple(sorted(elements, key=PauliString.canonical_key))
    logger.info(f"Lie closure: {len(generators)} generators -> {len(ordered)} elements")
    return LieClosure(H.n, generators, ordered)


def z_product_hint(n: int) -> List[PauliString]:
    """All products of Z's on n qubits except the identity and Z...Z."""
    full = (1 << n) - 1
    hint = [PauliString(n, 0, z) for z in range(1, full)]
    return sorted(hint, key=PauliString.canonical_key)


def select_csa(
    closure: LieClosure,
    hint: Optional[Sequence[PauliString]] = None,
) -> CartanSubalgebra:
    """
    Extend ``hint`` to a maximal commuting subset of the closure.

    Without a hint the selection is greedy over the closure in canonical order.

    Raises:
        CSAHintError: hint is not mutually commuting or not inside the closure
    """
    basis: List[PauliString] = []
    for p in dict.fromkeys(hint or []):
        if p not in closure:
            raise CSAHintError(f"Hint element {p} is not in the Lie closure", key="csa_hint")
        for q in basis:
            if not p.commutes(q):
                raise CSAHintError(f"Hint elements {p} and {q} do not commute", key="csa_hint")
        basis.append(p)

    hinted = len(basis)
    members = set(basis)
    for p in closure.elements:
        if p in members:
            continue
        if all(p.commutes(q) for q in basis):
            basis.append(p)
            members.add(p)

    if hint and len(basis) > hinted:
        logger.info(f"CSA hint extended from {hinted} to {len(basis)} elements")
    return CartanSubalgebra(tuple(basis))


def conjugate_by_exponential(
    s: PauliSentence,
    theta: float,
    k: PauliString,
    sign: int = 1,
    prune: float = DEFAULTS["prune"],
) -> PauliSentence:
    """
    exp(-i sign theta k) s exp(+i sign theta k), termwise.

    Commuting terms are unchanged; an anticommuting term sigma maps to
    cos(2 theta) sigma + sign sin(2 theta) (i sigma k).
    """
    if theta == 0.0:
        return s
    c2, s2 = math.cos(2.0 * theta), math.sin(2.0 * theta)
    acc: List[Tuple[PauliString, float]] = []
    for p, c in s.items():
        if p.commutes(k):
            acc.append((p, c))
            continue
        prod = multiply(p, k)
        real_phase = (1j * prod.phase).real
        acc.append((p, c * c2))
        acc.append((prod.string, sign * s2 * c * real_phase))
    return PauliSentence.from_terms(s.n, acc, cutoff=prune)


def _cost_matrix(csa: CartanSubalgebra, n: int, gamma: float) -> np.ndarray:
    v = PauliSentence.from_terms(
        n, ((p, gamma ** (i + 1)) for i, p in enumerate(csa.basis))
    )
    return v.to_matrix()


def _run_sweeps(
    H_dense: np.ndarray,
    V: np.ndarray,
    csa: CartanSubalgebra,
    k_basis: Sequence[PauliString],
    angles: np.ndarray,
    tol: float,
    max_iter: int,
    h_norm: float,
) -> AngleOptimization:
    dim = H_dense.shape[0]
    m = len(k_basis)
    best_residual = float("inf")
    since_best = 0
    residual = float("inf")
    cost = float("nan")

    for sweep in range(1, max_iter + 1):
        # suffix[j] = R_j V R_j^dagger with R_j = K_{j+1} ... K_m
        suffix: List[np.ndarray] = [None] * m  # type: ignore[list-item]
        cur = V
        for j in range(m - 1, -1, -1):
            suffix[j] = cur
            cur = conjugate_dense(cur, k_basis[j], -angles[j])

        Hj = H_dense
        for j in range(m):
            k = k_basis[j]
            Vj = suffix[j]
            f0 = _trace_product(Vj, Hj)
            fp = _trace_product(Vj, conjugate_dense(Hj, k, math.pi / 4))
            fm = _trace_product(Vj, conjugate_dense(Hj, k, -math.pi / 4))
            a = 0.5 * (fp + fm)
            c = 0.5 * (fp - fm)
            b = f0 - a
            angles[j] = 0.5 * math.atan2(-c, -b)
            Hj = conjugate_dense(Hj, k, angles[j])

        cost = _trace_product(V, Hj) / dim
        residual = _off_csa_norm(Hj, csa) / h_norm
        logger.debug(f"sweep {sweep}: cost={cost:.15g} residual={residual:.3e}")

        if residual <= tol:
            return AngleOptimization(angles, True, sweep, residual, cost)
        if residual < best_residual * (1.0 - DEFAULTS["stall_tolerance"]):
            best_residual, since_best = residual, 0
        else:
            since_best += 1
        # stalled: no progress on the off-subalgebra norm for stall_sweeps sweeps
        if since_best >= DEFAULTS["stall_sweeps"]:
            logger.warning(f"Angle optimization stalled at sweep {sweep}, residual={residual:.3e}")
            return AngleOptimization(angles, False, sweep, residual, cost)

    return AngleOptimization(angles, False, max_iter, residual, cost)


def optimize_angles(
    H: PauliSentence,
    csa: CartanSubalgebra,
    k_basis: Sequence[PauliString],
    seed: Optional[int] = 0,
    tol: float = DEFAULTS["tolerance"],
    max_iter: int = DEFAULTS["max_iter"],
    gamma: float = GOLDEN_GAMMA,
) -> AngleOptimization:
    """
    Find angles at a local extremum of f(theta) = <v, K^dagger H K>.

    Each sweep visits the angles in k_basis order; along one coordinate f is
    A + B cos(2 theta) + C sin(2 theta), fixed by three evaluations and
    minimized in closed form. Starts from uniform angles in (-pi, pi); a
    stalled or unconverged run is retried once from all-zero angles and the
    better of the two is returned.
    """
    if not k_basis:
        raise ValueError("k_basis must be nonempty")

    core = H.without_identity()
    H_dense = core.to_matrix()
    h_norm = max(core.frobenius_norm(), 1e-300)
    V = _cost_matrix(csa, H.n, gamma)

    rng = np.random.default_rng(seed)
    start = rng.uniform(-math.pi, math.pi, size=len(k_basis))
    result = _run_sweeps(H_dense, V, csa, k_basis, start, tol, max_iter, h_norm)
    logger.info(
        f"Angle optimization: {len(k_basis)} angles, {result.sweeps} sweeps, "
        f"residual={result.residual:.3e}, converged={result.converged}"
    )

    if not result.converged:
        logger.warning("Retrying angle optimization from zero initialization")
        retry = _run_sweeps(
            H_dense, V, csa, k_basis, np.zeros(len(k_basis)), tol, max_iter, h_norm
        )
        retry.attempts = 2
        if retry.converged or retry.residual < result.residual:
            result = retry
        else:
            result.attempts = 2

    return result


def decomposition_residual(
    H: PauliSentence,
    factors: Sequence[Tuple[float, PauliString]],
    h: PauliSentence,
    dense_check_qubits: int = DEFAULTS["dense_check_qubits"],
) -> float:
    """
    ||K h K^dagger - H||_F / ||H||_F.

    Dense for small registers; otherwise the same norm computed symbolically
    as ||K^dagger H K - h||_F.
    """
    h_norm = H.frobenius_norm()
    if h_norm == 0.0:
        return 0.0
    if H.n <= dense_check_qubits:
        rebuilt = h.to_matrix()
        for theta, k in reversed(factors):
            rebuilt = conjugate_dense(rebuilt, k, -theta)
        return float(np.linalg.norm(rebuilt - H.to_matrix()) / h_norm)
    conj = H
    for theta, k in factors:
        conj = conjugate_by_exponential(conj, theta, k, 1)
    return (conj - h).frobenius_norm() / h_norm


def decompose(
    H: PauliSentence,
    csa_hint: Optional[Iterable[PauliString]] = None,
    seed: Optional[int] = 0,
    tol: float = DEFAULTS["tolerance"],
    max_iter: int = DEFAULTS["max_iter"],
    max_dim: int = DEFAULTS["max_closure_dim"],
    gamma: float = GOLDEN_GAMMA,
    dense_check_qubits: int = DEFAULTS["dense_check_qubits"],
    cache: Optional[CacheManager] = None,
) -> KHKDecomposition:
    """
    H = K h K^dagger.

    Hint elements missing from the closure are dropped before selection.
    Identity terms pass straight into h. A cache hit skips the optimizer and
    is re-verified against H; failed verification recomputes.
    """
    started = time.perf_counter()
    core = H.without_identity()
    identity = PauliString.identity(H.n)

    if len(core) == 0:
        return KHKDecomposition(
            n=H.n, factors=[], h=H, residual=0.0, csa=CartanSubalgebra(()),
            elapsed_seconds=time.perf_counter() - started,
        )

    closure = lie_closure(core, max_dim)
    hint = None
    if csa_hint is not None:
        hint = [p for p in csa_hint if p in closure]
    csa = select_csa(closure, hint)
    logger.info(f"Cartan subalgebra: {len(csa)} elements, closure {len(closure)}")

    key = None
    if cache is not None:
        key = hamiltonian_hash(H.to_records(), csa.texts())
        cached = load_decomposition(cache, key, H, tol, dense_check_qubits)
        if cached is not None:
            cached.cache_hit = True
            cached.cache_key = key
            cached.elapsed_seconds = time.perf_counter() - started
            logger.info(f"Decomposition cache hit {key[:12]}, residual={cached.residual:.3e}")
            return cached

    csa_members = set(csa.basis)
    k_basis = [p for p in closure.elements if p not in csa_members]

    if not k_basis:
        factors: List[Tuple[float, PauliString]] = []
        opt_converged, sweeps = True, 0
        conj = core
    else:
        opt = optimize_angles(core, csa, k_basis, seed=seed, tol=tol, max_iter=max_iter, gamma=gamma)
        factors = [(float(theta), k) for theta, k in zip(opt.angles, k_basis)]
        opt_converged, sweeps = opt.converged, opt.sweeps
        conj = core
        for theta, k in factors:
            conj = conjugate_by_exponential(conj, theta, k, 1)

    h_terms = [(p, c) for p, c in conj.items() if p in csa_members]
    h_terms.append((identity, H.identity_coefficient))
    h = PauliSentence.from_terms(H.n, h_terms)

    residual = decomposition_residual(H, factors, h, dense_check_qubits)
    decomposition = KHKDecomposition(
        n=H.n,
        factors=factors,
        h=h,
        residual=residual,
        csa=csa,
        converged=opt_converged,
        sweeps=sweeps,
        closure_size=len(closure),
        cache_key=key,
        elapsed_seconds=time.perf_counter() - started,
    )
    logger.info(
        f"Decomposition: {len(factors)} factors, residual={residual:.3e}, "
        f"converged={decomposition.converged}, {decomposition.elapsed_seconds:.2f}s"
    )

    if cache is not None and key is not None:
        store_decomposition(cache, key, decomposition)
    return decomposition


# =============================================================================
# Cache (de)serialization
# =============================================================================

def store_decomposition(cache: CacheManager, key: str, decomposition: KHKDecomposition) -> None:
    cache.put(key, decomposition.to_dict())


def load_decomposition(
    cache: CacheManager,
    key: str,
    H: PauliSentence,
    tol: float = DEFAULTS["tolerance"],
    dense_check_qubits: int = DEFAULTS["dense_check_qubits"],
) -> Optional[KHKDecomposition]:
    """Load and re-verify a cached decomposition; None on miss or corruption."""
    entry = cache.get(key)
    if entry is None:
        return None
    try:
        decomposition = KHKDecomposition.from_dict(entry)
        if decomposition.n != H.n:
            raise ValueError(f"cached n={decomposition.n}, expected {H.n}")
        residual = decomposition_residual(
            H, decomposition.factors, decomposition.h, dense_check_qubits
        )
        bound = max(tol, 10.0 * decomposition.residual) + 1e-12
        if not math.isfinite(residual) or residual > bound:
            raise ValueError(f"residual {residual:.3e} exceeds {bound:.3e}")
    except (KeyError, TypeError, ValueError) as e:
        cache.mark_corrupt(key, str(e))
        return None

    decomposition.residual = residual
    return decomposition


def cache_roundtrip(
    decomposition: KHKDecomposition,
    H: PauliSentence,
    cache: CacheManager,
    tol: float = DEFAULTS["tolerance"],
) -> Optional[KHKDecomposition]:
    """
    Store a decomposition and load it back, re-verifying its residual.

    Returns None when the reloaded entry fails verification; the entry is
    then marked corrupt and the next decompose call recomputes it.
    """
    key = decomposition.cache_key or hamiltonian_hash(H.to_records(), decomposition.csa.texts())
    store_decomposition(cache, key, decomposition)
    reloaded = load_decomposition(cache, key, H, tol)
    if reloaded is not None:
        reloaded.cache_key = key
        reloaded.cache_hit = True
    return reloaded
