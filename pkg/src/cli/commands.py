"""
Subcommand implementations: sample, estimate, oracle, scan and init-config.

Every command returns a JSON-serializable report. Reports are written with
sorted keys so that identical inputs give byte-identical output.
"""

import json
import math
import os
import sys
from typing import Optional

import numpy as np
from tqdm import tqdm

from ..core.config_manager import DEFAULT_CONFIG, ConfigManager
from ..core.errors import ConfigError, DualOptError, ObservableError, StateError
from ..core.estimation import exact_moments, standard_error
from ..core.frames import ProductDualSet, build_pauli6_povm
from ..core.logger import get_logger
from ..core.optimizer import split_estimate, split_estimate_batch
from ..core.sampler import (
    exact_expectation,
    exact_outcome_distribution,
    prepare_zero_state,
    product_outcome_distribution,
    sample_pauli6_shots,
    trotter_evolve,
)
from ..core.shots import ShotFileManager
from .run_config import RunConfig, state_from_provenance

REPORT_SCHEMA_VERSION = 1

logger = get_logger(__name__)


def render_report(document: dict) -> str:
    """
    Serialize a report deterministically.

    Raises:
        DualOptError: If the report holds NaN or infinite numbers
    """
    try:
        return json.dumps(document, sort_keys=True, indent=2, allow_nan=False) + "\n"
    except ValueError as e:
        raise DualOptError(f"report contains non-finite numbers: {e}")


def emit_report(document: dict, output: Optional[str] = None) -> str:
    """Write the report to ``output`` or stdout; returns the rendered text."""
    text = render_report(document)
    if output:
        parent = os.path.dirname(output)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(output, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        logger.info(f"Report written to {output}")
    else:
        sys.stdout.write(text)
    return text


def _optimizer_settings(run: RunConfig) -> dict:
    cfg = run.optimizer
    return {
        "n_sweeps": cfg.n_sweeps,
        "max_inner_iters": cfg.max_inner_iters,
        "grad_tol": cfg.grad_tol,
        "overfit_patience": cfg.overfit_patience,
        "overfit_ratio": cfg.overfit_ratio,
        "split_seed": cfg.rng_seed,
        "inner_solver": cfg.inner_solver,
    }


def cmd_sample(run: RunConfig, config_manager: ConfigManager) -> dict:
    """
    Prepare the configured state, sample Pauli-6 shots and write a shot file.

    Returns:
        dict: Summary report (path and header fields)
    """
    state = run.state_vector()
    dataset = sample_pauli6_shots(
        state, run.shots, run.seed, run.n_workers, show_progress=run.show_progress
    )
    path = run.output or os.path.join(
        config_manager.get_output_dir(), f"shots_n{state.n_qubits}_seed{run.seed}.txt"
    )
    files = ShotFileManager()
    files.write_shot_file(path, dataset)
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": "sample",
        "path": path,
        "size_bytes": files.get_file_info(path)["size"],
        "header": dataset.header(),
    }


def cmd_estimate(run: RunConfig, shot_path: str) -> dict:
    """
    Estimate observables from a shot file with canonical duals and, unless
    disabled, with the split/swap/combine dual optimization.
    """
    files = ShotFileManager()
    dataset = files.read_shot_file(shot_path)
    observables = run.observables(dataset.n_qubits)

    truths = run.truths
    if truths is None:
        state = state_from_provenance(dataset.state, dataset.n_qubits, run.state_cap)
        if state is not None:
            truths = [exact_expectation(state, obs) for obs in observables]
    if truths is None:
        truths = [None] * len(observables)

    povm = build_pauli6_povm()
    canonical = ProductDualSet.canonical([povm] * dataset.n_qubits)
    split_results = []
    if run.optimize:
        split_results = split_estimate_batch(
            dataset, observables, run.optimizer, truths, n_workers=run.n_workers
        )

    entries = []
    for index, (obs, truth) in enumerate(zip(observables, truths)):
        entry = {
            "observable": obs.label(),
            "canonical": standard_error(dataset, obs, canonical, truth).to_dict(),
        }
        if truth is not None:
            entry["truth"] = truth
        if split_results:
            result = split_results[index]
            entry["optimized"] = result.to_dict()
            if run.duals_dir:
                chosen = {"A": result.chosen_duals_A, "B": result.chosen_duals_B}
                for name, duals in chosen.items():
                    files.save_duals(
                        os.path.join(run.duals_dir, f"obs{index}_{name}.json"),
                        duals,
                        {"observable": obs.label(), "trained_on": name},
                    )
        entries.append(entry)

    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": "estimate",
        "dataset": dataset.header(),
        "optimizer": _optimizer_settings(run) if run.optimize else None,
        "observables": entries,
    }


def cmd_oracle(run: RunConfig) -> dict:
    """
    Exact <O> and per-shot variances for the configured state.

    Raises:
        StateError: If N exceeds the oracle cap
    """
    n_qubits = run.require_qubits()
    if n_qubits > run.oracle_cap:
        raise StateError(f"{n_qubits} qubits exceed the oracle cap {run.oracle_cap}")
    state = run.state_vector()
    if run.state == "zero" or run.steps == 0:
        distribution = product_outcome_distribution([[1.0, 0.0]] * n_qubits)
    else:
        distribution = exact_outcome_distribution(state, run.oracle_cap)

    canonical = ProductDualSet.canonical_pauli6(n_qubits)
    supplied = ShotFileManager().load_duals(run.duals) if run.duals else None
    if supplied is not None and supplied.n_qubits != n_qubits:
        raise ObservableError(
            f"duals file describes {supplied.n_qubits} qubits, state has {n_qubits}"
        )

    entries = []
    for obs in run.observables(n_qubits):
        mean, second = exact_moments(distribution, obs, canonical)
        entry = {
            "observable": obs.label(),
            "expectation": exact_expectation(state, obs),
            "canonical": {"mean": mean, "variance": second - mean * mean},
        }
        if supplied is not None:
            mean, second = exact_moments(distribution, obs, supplied)
            entry["supplied"] = {"mean": mean, "variance": second - mean * mean}
        entries.append(entry)
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": "oracle",
        "state": state.provenance,
        "n_qubits": n_qubits,
        "observables": entries,
    }


def _average(values):
    return math.fsum(values) / len(values)


def _spread(values):
    """Sample standard deviation over repetitions; 0 for a single repetition."""
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1))


def cmd_scan(run: RunConfig) -> dict:
    """
    Trotter-step scan of the Ising chain.

    For every step 0..max_steps and every repetition, samples a fresh
    dataset, estimates each observable with canonical duals on the full data
    and with the split protocol, and records sigma and the error against the
    exact value. Repetition r at step k uses seed + k * repetitions + r.
    """
    n_qubits = run.require_qubits()
    observables = run.observables(n_qubits)
    canonical = ProductDualSet.canonical_pauli6(n_qubits)

    steps_report = []
    for step in tqdm(
        range(run.max_steps + 1), desc="scan", unit="step", disable=not run.show_progress
    ):
        state = trotter_evolve(
            prepare_zero_state(n_qubits, run.state_cap), run.tfim_params(step)
        )
        truths = [exact_expectation(state, obs) for obs in observables]
        per_observable = [
            {
                "canonical_sigma": [],
                "canonical_error": [],
                "sigma": [],
                "error": [],
                "never_worse": True,
            }
            for _ in observables
        ]
        for rep in range(run.repetitions):
            seed = run.seed + step * run.repetitions + rep
            dataset = sample_pauli6_shots(state, run.shots, seed, run.n_workers)
            for obs, truth, stats in zip(observables, truths, per_observable):
                base = standard_error(dataset, obs, canonical, truth)
                result = split_estimate(dataset, obs, run.optimizer, truth=truth)
                stats["canonical_sigma"].append(base.std_error)
                stats["canonical_error"].append(base.abs_error)
                stats["sigma"].append(result.combined.std_error)
                stats["error"].append(result.combined.abs_error)
                for name in ("AB", "BA"):
                    selected = result.report_AB if name == "AB" else result.report_BA
                    if selected.std_error > result.canonical_reports[name].std_error:
                        stats["never_worse"] = False

        steps_report.append(
            {
                "step": step,
                "observables": [
                    {
                        "observable": obs.label(),
                        "truth": truth,
                        "canonical_sigma": _average(stats["canonical_sigma"]),
                        "canonical_sigma_std": _spread(stats["canonical_sigma"]),
                        "canonical_error": _average(stats["canonical_error"]),
                        "canonical_error_std": _spread(stats["canonical_error"]),
                        "optimized_sigma": _average(stats["sigma"]),
                        "optimized_sigma_std": _spread(stats["sigma"]),
                        "optimized_error": _average(stats["error"]),
                        "optimized_error_std": _spread(stats["error"]),
                        "selected_never_worse": stats["never_worse"],
                    }
                    for obs, truth, stats in zip(observables, truths, per_observable)
                ],
            }
        )
        logger.info(f"scan step {step}/{run.max_steps} done")

    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": "scan",
        "model": {"J": run.J, "h": run.h, "dt": run.dt},
        "n_qubits": n_qubits,
        "shots": run.shots,
        "repetitions": run.repetitions,
        "optimizer": _optimizer_settings(run),
        "steps": steps_report,
    }


def cmd_init_config(config_manager: ConfigManager, settings: Optional[list] = None) -> dict:
    """
    Write the default INI configuration, then apply SECTION.key=value overrides.

    Raises:
        ConfigError: On malformed overrides or unknown section/key names
    """
    config_manager.create_default_config()
    applied = {}
    for item in settings or []:
        name, sep, value = item.partition("=")
        section, dot, key = name.strip().partition(".")
        section, key = section.upper(), key.strip().lower()
        if not sep or not dot:
            raise ConfigError(f"expected SECTION.key=value, got {item!r}")
        if key not in DEFAULT_CONFIG.get(section, {}):
            raise ConfigError(f"unknown setting [{section}] {key}")
        config_manager.set(section, key, value.strip())
        applied[f"{section}.{key}"] = value.strip()
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": "init-config",
        "path": config_manager.config_file,
        "settings": applied,
    }
