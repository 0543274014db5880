"""
Exception hierarchy for the CaRBM toolkit.

Every error carries an optional ``key`` naming the offending argument or
config field, plus a ``details`` dict, and renders to the JSON payload the
CLI prints on failure.
"""

from typing import Any, Dict, Optional


class CarbmError(Exception):
    """Base class for all domain errors."""

    def __init__(
        self,
        message: str,
        key: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message)
        self.message = message
        self.key = key
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable error payload."""
        return {
            "error": type(self).__name__,
            "message": self.message,
            "key": self.key,
            "details": self.details,
        }


# Pauli algebra
class PauliLengthError(CarbmError):
    """Pauli strings of different length, or malformed Pauli text."""


class IdentityStringError(CarbmError):
    """An operation that needs a non-trivial Pauli string got the identity."""


# Cartan decomposition
class ClosureDimensionError(CarbmError):
    """Lie closure grew beyond the allowed dimension."""

    def __init__(self, message: str, partial_size: int, max_dim: int):
        super().__init__(
            message,
            key="max_closure_dim",
            details={"partial_size": partial_size, "max_dim": max_dim},
        )
        self.partial_size = partial_size


class CSAHintError(CarbmError):
    """Cartan subalgebra hint is not commuting or not inside the closure."""


# Simulator
class QubitIndexError(CarbmError):
    """Qubit index outside the register."""


class IndexCollisionError(CarbmError):
    """Two roles (e.g. target and ancilla) were given the same qubit."""


class StateNormalizationError(CarbmError):
    """State is not a valid (normalized, Hermitian, PSD) density matrix."""


class AncillaNotResetError(CarbmError):
    """RBM ancilla was not in |0> before a block-encoding gadget."""


# Planning and experiments
class NonCommutingLayersError(CarbmError):
    """ITE layers that must commute do not."""


class CommutationPreconditionError(CarbmError):
    """Probe operator does not commute with the system Hamiltonian."""


class SizeLimitError(CarbmError):
    """Register too large for dense treatment."""


class GridExecutionError(CarbmError):
    """One or more grid tasks failed."""


# Configuration
class ConfigError(CarbmError):
    """Invalid run configuration (unknown key, wrong type, out of range)."""
