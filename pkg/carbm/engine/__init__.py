"""
CaRBM Engine Package.

Pipeline:
- pauli_algebra: Pauli strings, symplectic GF(2) algebra, sentences
- cartan: Lie closure, Cartan subalgebra and K h K^dag decomposition
- rbm_encoding: RBM parameters and ancilla block encodings
- correction: ITE layers and failure-correction planning
- simulator: dense density-matrix simulator
- models: XXZ and Gross-Neveu Hamiltonians
- experiments: Lee-Yang, Fisher and Gross-Neveu scans plus ED oracles
- validation: invariant checks
- cache_manager: disk cache for decompositions
- grid_runner: concurrent grid evaluation
"""

from carbm.engine.pauli_algebra import PauliSentence, PauliString
from carbm.engine.cartan import KHKDecomposition, cache_roundtrip, decompose, z_product_hint
from carbm.engine.rbm_encoding import ITELayer, RBMParams, make_params
from carbm.engine.correction import CorrectionPlan, build_layers, plan_corrections
from carbm.engine.simulator import DensityMatrix, RunResult, prepare_initial, run_ite
from carbm.engine.models import GrossNeveuSpec, XXZSpec, build_gross_neveu, build_xxz
from carbm.engine.experiments import ScanGrid, fisher_scan, gn_phase_scan, lee_yang_scan
from carbm.engine.validation import run_validation_suite
from carbm.engine.cache_manager import CacheManager, get_cache_manager
from carbm.engine.grid_runner import GridRunner, get_grid_runner

__all__ = [
    # Algebra
    'PauliString',
    'PauliSentence',

    # Decomposition
    'KHKDecomposition',
    'decompose',
    'cache_roundtrip',
    'z_product_hint',

    # Layers
    'RBMParams',
    'ITELayer',
    'make_params',
    'CorrectionPlan',
    'build_layers',
    'plan_corrections',

    # Simulation
    'DensityMatrix',
    'RunResult',
    'prepare_initial',
    'run_ite',

    # Models
    'XXZSpec',
    'GrossNeveuSpec',
    'build_xxz',
    'build_gross_neveu',

    # Experiments
    'ScanGrid',
    'lee_yang_scan',
    'fisher_scan',
    'gn_phase_scan',
    'run_validation_suite',

    # Infrastructure
    'CacheManager',
    'get_cache_manager',
    'GridRunner',
    'get_grid_runner',
]
