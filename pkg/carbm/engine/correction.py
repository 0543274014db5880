"""
Correction Planning.

For a layer e^{-kappa_j sigma_j}, a Pauli string O_j that anticommutes with
sigma_j and commutes with every earlier sigma_r turns the failure branch of a
correctable gadget into the success branch, so the layer succeeds with
probability one. O_j exists iff sigma_j is GF(2)-independent of the earlier
strings; it is found by solving the commutation constraints over GF(2).
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Callable, Dict, Iterator, List, Literal, Optional, Sequence

from carbm.core.errors import NonCommutingLayersError
from carbm.engine.pauli_algebra import (
    PauliSentence,
    PauliString,
    commutation_row,
    from_symplectic,
    gf2_solve,
)
from carbm.engine.rbm_encoding import ITELayer, Scheme, make_params, params_correctable

logger = logging.getLogger(__name__)

InitialStateKind = Literal["maximally_mixed", "general"]


@dataclass
class CorrectionPlan:
    """Layers in application order plus the corrections assigned to them."""
    layers: List[ITELayer]
    corrected_indices: List[int] = field(default_factory=list)
    operators: Dict[int, PauliString] = field(default_factory=dict)

    @property
    def n_corrected(self) -> int:
        return len(self.corrected_indices)

    def kappas(self) -> Dict[PauliString, float]:
        return {layer.sigma: layer.kappa for layer in self.layers}

    def verify(self) -> List[str]:
        """Commutation-pattern violations; empty when the plan is sound."""
        issues = []
        for j in self.corrected_indices:
            o = self.operators[j]
            sigma = self.layers[j].sigma
            if o.commutes(sigma):
                issues.append(f"layer {j}: {o} commutes with {sigma}")
            for r in range(j):
                if not o.commutes(self.layers[r].sigma):
                    issues.append(f"layer {j}: {o} anticommutes with earlier {self.layers[r].sigma}")
        return issues

    def to_records(self) -> List[dict]:
        return [layer.to_record() for layer in self.layers]


def _candidates(n: int, max_weight: int) -> Iterator[PauliString]:
    """Non-identity strings by weight, then support, then letters X < Y < Z."""
    for w in range(1, max_weight + 1):
        for support in combinations(range(n), w):
            for letters in product("XYZ", repeat=w):
                yield PauliString.from_sites(n, dict(zip(support, letters)))


def find_correction(
    previous: Sequence[PauliString],
    target: PauliString,
) -> Optional[PauliString]:
    """
    Minimum-weight O anticommuting with ``target`` and commuting with ``previous``.

    Ties are broken by the canonical Pauli order. None when ``target`` lies in
    the GF(2) span of ``previous``.
    """
    n = target.n
    rows = [commutation_row(p) for p in previous] + [commutation_row(target)]
    rhs = [0] * len(previous) + [1]
    solution = gf2_solve(rows, rhs, n_vars=2 * n)
    if solution is None:
        return None

    bound = from_symplectic(solution.particular).weight
    for o in _candidates(n, bound):
        if not o.commutes(target) and all(o.commutes(p) for p in previous):
            return o
    # unreachable: the particular solution has weight `bound`
    return from_symplectic(solution.particular)


def build_layers(
    h: PauliSentence,
    beta: float,
    scheme: Scheme = "standard",
    kappa_factor: float = 0.5,
) -> List[ITELayer]:
    """One uncorrected layer per non-identity term, kappa = kappa_factor * beta * c."""
    return [
        ITELayer(p, kappa_factor * beta * c, make_params(kappa_factor * beta * c, scheme))
        for p, c in h.without_identity().items()
    ]


def plan_corrections(
    layers: Sequence[ITELayer],
    max_corrections: int,
    initial_state_kind: InitialStateKind = "maximally_mixed",
    stabilizes: Optional[Callable[[PauliString], bool]] = None,
) -> CorrectionPlan:
    """
    Order layers by |kappa| descending and correct greedily.

    A layer is corrected when fewer than min(max_corrections, n) layers have
    been corrected, its string is independent of every earlier string and a
    correction exists. On a general initial state the correction must also
    satisfy ``stabilizes(O)``; without that check no layer is corrected.

    Raises:
        NonCommutingLayersError: layer strings do not pairwise commute
    """
    layers = list(layers)
    for i in range(len(layers)):
        for j in range(i + 1, len(layers)):
            if not layers[i].sigma.commutes(layers[j].sigma):
                raise NonCommutingLayersError(
                    f"Layers {layers[i].sigma} and {layers[j].sigma} do not commute",
                    key="layers",
                )

    ordered = sorted(layers, key=lambda layer: -abs(layer.kappa))
    if not ordered:
        return CorrectionPlan([])

    n = ordered[0].sigma.n
    limit = max(0, min(max_corrections, n))
    if initial_state_kind == "general" and stabilizes is None:
        logger.warning("General initial state without a stabilizer check; no layer is corrected")
        limit = 0

    plan_layers: List[ITELayer] = []
    corrected: List[int] = []
    operators: Dict[int, PauliString] = {}
    previous: List[PauliString] = []

    for idx, layer in enumerate(ordered):
        o = None
        if len(corrected) < limit:
            o = find_correction(previous, layer.sigma)
            if o is not None and initial_state_kind == "general" and not stabilizes(o):
                logger.debug(f"Correction {o} for {layer.sigma} does not stabilize the initial state")
                o = None

        if o is None:
            plan_layers.append(
                ITELayer(layer.sigma, layer.kappa, layer.params)
            )
        else:
            plan_layers.append(
                ITELayer(layer.sigma, layer.kappa, params_correctable(layer.kappa), o)
            )
            corrected.append(idx)
            operators[idx] = o
        previous.append(layer.sigma)

    logger.info(f"Correction plan: {len(corrected)} of {len(plan_layers)} layers corrected")
    return CorrectionPlan(plan_layers, corrected, operators)
