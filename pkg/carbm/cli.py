"""
Command-line entry point.

    python -m carbm <command> [--config FILE] [--out DIR] [--seed N] ...

Commands: decompose, thermal-state, lee-yang, fisher, gn-scan, validate.
Exit status: 0 success, 1 runtime or validation failure, 2 configuration error.
Failures print a JSON error object on stderr.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from carbm.core.config import (
    COMMANDS,
    RunConfig,
    config_hash,
    derive_seed,
    get_settings,
    parse_config,
    parse_grid_flag,
)
from carbm.core.errors import CarbmError, ConfigError
from carbm.engine.cache_manager import CacheManager, get_cache_manager
from carbm.engine.cartan import (
    KHKDecomposition,
    decompose,
    z_product_hint,
)
from carbm.engine.experiments import (
    DEFAULT_AXES,
    GridAxis,
    ScanGrid,
    apply_k,
    ed_complex_beta_oracle,
    ed_thermal_expectation,
    fisher_scan,
    gn_phase_scan,
    lee_yang_scan,
    locate_zeros,
    make_plan,
    write_sidecar,
)
from carbm.engine.grid_runner import GridRunner, get_grid_runner
from carbm.engine.models import (
    GrossNeveuSpec,
    XXZSpec,
    build_condensate_observable,
    build_gross_neveu,
    build_xxz,
)
from carbm.engine.pauli_algebra import PauliSentence
from carbm.engine.simulator import expectation, prepare_initial, run_ite
from carbm.engine.validation import run_validation_suite

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


# =============================================================================
# Argument parsing
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carbm",
        description="Thermal-state preparation with RBM imaginary-time circuits.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="Run configuration file (JSON or YAML).")
    parser.add_argument("--out", help="Output directory.")
    parser.add_argument("--seed", type=int, help="Master seed.")
    parser.add_argument("--threads", type=int, help="Grid worker threads.")
    parser.add_argument("--correction", help="'off' or the maximum number of corrected layers.")
    parser.add_argument("--scheme", choices=["standard", "correctable"])
    parser.add_argument("--grid", help='Scan axes as "a1:lo:hi:steps,a2:lo:hi:steps".')
    parser.add_argument("--beta", type=float, help="Inverse temperature.")
    parser.add_argument("--cache-dir", help="Decomposition cache directory (default: CARBM_CACHE_DIR).")
    parser.add_argument("--mode", choices=["mixed_density", "tfd_purified"])
    parser.add_argument("--threshold", type=float, help="Zero-detection threshold on |Z/Z0|.")
    parser.add_argument("--absolute-z", action="store_true", default=None, help="Also emit Z = ratio * Z0.")
    parser.add_argument("--full-k", action="store_true", default=None, help="Fisher scan with K applied.")
    parser.add_argument("--dump-state", action="store_true", default=None, help="Write the final density matrix.")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {
        "command": args.command,
        "out": args.out,
        "seed": args.seed,
        "threads": args.threads,
        "correction": args.correction,
        "scheme": args.scheme,
        "beta": args.beta,
        "cache_dir": args.cache_dir,
        "mode": args.mode,
        "threshold": args.threshold,
        "absolute_z": args.absolute_z,
        "full_k": args.full_k,
        "dump_state": args.dump_state,
    }
    if args.grid:
        overrides["grid"] = parse_grid_flag(args.grid)
    return overrides


def _emit_error(payload: Dict[str, Any]) -> None:
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


# =============================================================================
# Shared helpers
# =============================================================================

def _cache(config: RunConfig) -> CacheManager:
    return get_cache_manager(config.cache_dir)


def _runner(config: RunConfig) -> GridRunner:
    return get_grid_runner(config.threads)


def _cartan_options(config: RunConfig) -> Dict[str, Any]:
    settings = get_settings()
    return {
        "tol": config.tolerance,
        "max_iter": config.max_iter,
        "max_dim": config.max_closure_dim,
        "gamma": settings.cartan.gamma,
        "dense_check_qubits": settings.simulator.dense_check_qubits,
    }


def _model(config: RunConfig) -> Tuple[PauliSentence, Any]:
    m = config.model
    if m.kind == "xxz":
        spec = XXZSpec(L=m.L, J=m.J, Jz=m.Jz, g_r=m.g_r)
        return build_xxz(spec), spec
    spec = GrossNeveuSpec(N=m.N, L=m.L, G=m.G, mu=m.mu, m=m.m)
    return build_gross_neveu(spec), spec


def _axes(config: RunConfig, command: str) -> Tuple[GridAxis, GridAxis]:
    defaults = DEFAULT_AXES[command]
    axes = []
    for block, default in zip((config.grid.axis1, config.grid.axis2), defaults):
        if block is None:
            axes.append(default)
        else:
            axes.append(GridAxis(block.name or default.name, block.lo, block.hi, block.steps))
    return axes[0], axes[1]


def _require_kind(config: RunConfig, kind: str) -> None:
    if config.model.kind != kind:
        raise ConfigError(
            f"Command {config.command} needs model.kind={kind!r}, got {config.model.kind!r}",
            key="model.kind",
        )


def _decompose(config: RunConfig, H: PauliSentence) -> KHKDecomposition:
    hint = z_product_hint(H.n) if H.n > 1 else None
    return decompose(
        H,
        csa_hint=hint,
        seed=derive_seed(config.seed, 0),
        cache=_cache(config),
        **_cartan_options(config),
    )


def _base_payload(config: RunConfig, digest: str) -> Dict[str, Any]:
    return {
        "config": config.model_dump(mode="json"),
        "config_hash": digest,
        "seeds": {"master": config.seed, "rule": "SeedSequence(master, spawn_key=(column,))"},
    }


# =============================================================================
# Commands
# =============================================================================

def _run_decompose(config: RunConfig, out: Path, digest: str) -> Tuple[int, str]:
    H, _ = _model(config)
    decomposition = _decompose(config, H)
    payload = _base_payload(config, digest)
    payload["decomposition"] = decomposition.to_dict()
    payload["cache_hit"] = decomposition.cache_hit
    payload["cache_key"] = decomposition.cache_key
    payload["elapsed_seconds"] = decomposition.elapsed_seconds
    path = write_sidecar(out / "decompose.json", payload)
    return 0, (
        f"decompose: residual={decomposition.residual:.3e} factors={len(decomposition.factors)} "
        f"cache_hit={decomposition.cache_hit} -> {path}"
    )


def _run_thermal_state(config: RunConfig, out: Path, digest: str) -> Tuple[int, str]:
    H, spec = _model(config)
    decomposition = _decompose(config, H)
    # corrections rely on a maximally mixed start
    limit = config.max_corrections if config.mode == "mixed_density" else 0
    plan = make_plan(decomposition.h, config.beta, limit, config.scheme)
    state = prepare_initial(H.n, config.mode, get_settings().simulator.max_qubits)
    run = run_ite(state, decomposition.h, config.beta, plan, config.scheme)
    thermal = apply_k(run.state, decomposition)

    observables = {"energy": H}
    if isinstance(spec, GrossNeveuSpec):
        observables["condensate"] = build_condensate_observable(spec)
    values = {}
    for name, obs in observables.items():
        values[name] = {
            "circuit": expectation(thermal, obs),
            "exact": ed_thermal_expectation(H, config.beta, obs),
        }

    z_circuit = run.partition_function(H.n)
    z_exact = ed_complex_beta_oracle(H, config.beta, 0.0).real
    payload = _base_payload(config, digest)
    payload.update({
        "decomposition": {"residual": decomposition.residual, "cache_key": decomposition.cache_key},
        "success_probability": run.success_probability,
        "log_norm": run.log_norm,
        "partition_function": {"circuit": z_circuit, "exact": z_exact},
        "observables": values,
        "correction_plan": plan.to_records(),
    })
    path = write_sidecar(out / "thermal_state.json", payload)
    if config.dump_state:
        write_sidecar(out / "thermal_state_dump.json", {"config_hash": digest, "state": thermal.to_dict()})
    return 0, (
        f"thermal-state: residual={decomposition.residual:.3e} "
        f"success={run.success_probability:.6g} Z={z_circuit:.6g} -> {path}"
    )


def _write_grid(grid: ScanGrid, out: Path, stem: str, digest: str, payload: Dict[str, Any]) -> Path:
    path = grid.write_csv(out / f"{stem}.csv", digest)
    write_sidecar(out / f"{stem}.json", grid.sidecar(digest, payload))
    return path


def _run_lee_yang(config: RunConfig, out: Path, digest: str) -> Tuple[int, str]:
    _require_kind(config, "xxz")
    _, spec = _model(config)
    axis1, axis2 = _axes(config, "lee-yang")
    grid = lee_yang_scan(
        spec, config.beta, axis1, axis2,
        max_corrections=config.max_corrections,
        scheme=config.scheme,
        seed=config.seed,
        cache=_cache(config),
        runner=_runner(config),
        absolute_z=config.absolute_z,
        **_cartan_options(config),
    )
    zeros = locate_zeros(grid, config.threshold)
    payload = _base_payload(config, digest)
    payload["zeros"] = zeros
    path = _write_grid(grid, out, "lee_yang", digest, payload)
    return 0, (
        f"lee-yang: {grid.shape[0]}x{grid.shape[1]} points, {len(zeros)} zeros, "
        f"min success={float(grid.success.min()):.6g} -> {path}"
    )


def _run_fisher(config: RunConfig, out: Path, digest: str) -> Tuple[int, str]:
    H, _ = _model(config)
    axis1, axis2 = _axes(config, "fisher")
    grid = fisher_scan(
        H, axis1, axis2,
        max_corrections=config.max_corrections,
        scheme=config.scheme,
        seed=config.seed,
        cache=_cache(config),
        runner=_runner(config),
        full_k=config.full_k,
        absolute_z=config.absolute_z,
        **_cartan_options(config),
    )
    zeros = locate_zeros(grid, config.threshold)
    payload = _base_payload(config, digest)
    payload["zeros"] = zeros
    path = _write_grid(grid, out, "fisher", digest, payload)
    return 0, (
        f"fisher: {grid.shape[0]}x{grid.shape[1]} points, {len(zeros)} zeros, "
        f"min success={float(grid.success.min()):.6g} -> {path}"
    )


def _run_gn_scan(config: RunConfig, out: Path, digest: str) -> Tuple[int, str]:
    _require_kind(config, "gross_neveu")
    _, spec = _model(config)
    axis1, axis2 = _axes(config, "gn-scan")
    observable, success = gn_phase_scan(
        spec, axis1, axis2,
        correction=config.correction != "off",
        max_corrections=config.max_corrections,
        scheme=config.scheme,
        seed=config.seed,
        cache=_cache(config),
        runner=_runner(config),
        **_cartan_options(config),
    )
    payload = _base_payload(config, digest)
    path = _write_grid(observable, out, "gn_scan_observable", digest, payload)
    _write_grid(success, out, "gn_scan_success", digest, payload)
    return 0, (
        f"gn-scan: {observable.shape[0]}x{observable.shape[1]} points, "
        f"min success={float(success.success.min()):.6g} -> {path}"
    )


def _run_validate(config: RunConfig, out: Path, digest: str) -> Tuple[int, str]:
    spec = None
    if config.model.kind == "xxz":
        _, spec = _model(config)
    report = run_validation_suite(
        spec, beta=config.beta, seed=config.seed, cache=_cache(config), **_cartan_options(config)
    )
    payload = _base_payload(config, digest)
    payload["report"] = report.to_dict()
    path = write_sidecar(out / "validate.json", payload)
    passed = sum(c.passed for c in report.checks)
    status = 0 if report.is_valid else 1
    return status, f"validate: {passed}/{len(report.checks)} checks passed -> {path}"


COMMAND_HANDLERS = {
    "decompose": _run_decompose,
    "thermal-state": _run_thermal_state,
    "lee-yang": _run_lee_yang,
    "fisher": _run_fisher,
    "gn-scan": _run_gn_scan,
    "validate": _run_validate,
}


def dispatch(config: RunConfig) -> int:
    """Run the configured command, write its outputs and print a summary line."""
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    digest = config_hash(config)
    logger.info(f"Running {config.command} (config_hash={digest[:12]})")
    status, summary = COMMAND_HANDLERS[config.command](config, out, digest)
    print(summary)
    return status


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = args.log_level or get_settings().logging.level
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO), format=LOG_FORMAT)

    try:
        config = parse_config(args.config, _overrides(args))
    except ConfigError as e:
        _emit_error(e.to_dict())
        return 2

    try:
        return dispatch(config)
    except ConfigError as e:
        _emit_error(e.to_dict())
        return 2
    except CarbmError as e:
        logger.error(f"{config.command} failed: {e.message}")
        _emit_error(e.to_dict())
        return 1
    except Exception as e:
        logger.exception(f"{config.command} failed")
        _emit_error({"error": type(e).__name__, "message": str(e), "key": None, "details": {}})
        return 1
