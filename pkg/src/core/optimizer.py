"""
Post-measurement optimization of POVM duals.

This module provides:
- The per-qubit objective (empirical second moment) and its analytic gradient
- Per-qubit quasi-Newton updates (L-BFGS-B, or an exact least-squares solve)
- Qubit sweeps with a validation-based overfitting guard
- The split / swap / combine estimation protocol and observable batches

Every shot weight is affine in one qubit's free parameters, so each
per-qubit subproblem is a convex quadratic.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from tqdm import tqdm

from .errors import ConfigError, DatasetError, DualityError, OptimizationError
from .estimation import (
    EstimationReport,
    TraceTableCache,
    moments_from_weights,
    report_from_weights,
)
from .frames import ProductDualSet, QubitDualParams, povm_from_label
from .logger import get_logger, log_sweep_detail
from .observable import PauliObservable
from .shots import ShotDataset

INNER_SOLVERS = ("lbfgs", "lstsq")

logger = get_logger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    """
    Settings of the dual optimization.

    Attributes:
        n_sweeps (int): Maximum number of sweeps over the qubits (0 disables)
        max_inner_iters (int): Iteration cap of one per-qubit solve
        grad_tol (float): Gradient-norm stopping threshold
        overfit_patience (int): Consecutive degraded sweeps before stopping
        overfit_ratio (float): Degradation threshold on the validation objective
        rng_seed (int): Seed of the A/B split permutation
        inner_solver (str): 'lbfgs' or the exact 'lstsq' fast path
        duality_tol (float): Max duality residual accepted after each sweep
        show_progress (bool): Show a tqdm bar over sweeps
    """

    n_sweeps: int = 20
    max_inner_iters: int = 50
    grad_tol: float = 1e-8
    overfit_patience: int = 1
    overfit_ratio: float = 1.02
    rng_seed: int = 0
    inner_solver: str = "lbfgs"
    duality_tol: float = 1e-10
    show_progress: bool = False

    def __post_init__(self):
        if self.n_sweeps < 0:
            raise ConfigError(f"n_sweeps must be >= 0, got {self.n_sweeps}")
        if self.max_inner_iters < 1:
            raise ConfigError(f"max_inner_iters must be >= 1, got {self.max_inner_iters}")
        if not self.grad_tol > 0:
            raise ConfigError(f"grad_tol must be positive, got {self.grad_tol}")
        if self.overfit_patience < 1:
            raise ConfigError(f"overfit_patience must be >= 1, got {self.overfit_patience}")
        if not self.overfit_ratio > 1:
            raise ConfigError(f"overfit_ratio must exceed 1, got {self.overfit_ratio}")
        if self.rng_seed < 0:
            raise ConfigError(f"rng_seed must be >= 0, got {self.rng_seed}")
        if self.inner_solver not in INNER_SOLVERS:
            raise ConfigError(
                f"inner_solver must be one of {INNER_SOLVERS}, got '{self.inner_solver}'"
            )

    @classmethod
    def from_config_manager(cls, config_manager, **overrides) -> "OptimizerConfig":
        settings = config_manager.get_optimizer_settings()
        settings["show_progress"] = config_manager.show_progress()
        settings.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**settings)


class QubitObjective:
    """
    Empirical second moment as a function of one qubit's free parameters.

    With the other qubits fixed, w_s(theta) = offset_s + jacobian_s . theta,
    so f(theta) = mean_s w_s^2 and grad f = (2/S) jacobian^T w.
    """

    def __init__(self, cache: TraceTableCache, duals: ProductDualSet, qubit: int):
        selection = duals.per_qubit[qubit].selection
        n_shots = cache.outcomes.shape[0]
        # B[s, p]: coefficient-weighted product of the other qubits' factors,
        # summed over terms acting with Pauli p on this qubit
        weighted = cache.others_product(qubit) * cache.coefficients
        one_hot = np.eye(4)[cache.pauli_indices[:, qubit]]
        pauli_weights = weighted @ one_hot
        outcome = cache.outcomes[:, qubit]
        base = selection.base_coords[outcome]
        dependence = selection.dependence[outcome]
        self.n_free = selection.n_free
        self.offset = 2.0 * np.sum(pauli_weights * base, axis=1)
        self.jacobian = 2.0 * (dependence[:, :, None] * pauli_weights[:, None, :]).reshape(
            n_shots, self.n_free * 4
        )

    def weights(self, theta: np.ndarray) -> np.ndarray:
        return self.offset + self.jacobian @ theta

    def value_and_grad(self, theta: np.ndarray) -> Tuple[float, np.ndarray]:
        w = self.weights(theta)
        n_shots = len(w)
        return float(w @ w) / n_shots, (2.0 / n_shots) * (self.jacobian.T @ w)

    def hessian(self) -> np.ndarray:
        """(2/S) J^T J, constant because the objective is quadratic."""
        return (2.0 / self.jacobian.shape[0]) * (self.jacobian.T @ self.jacobian)

    def least_squares(self, theta: np.ndarray) -> np.ndarray:
        """Exact minimizer reached by the minimum-norm step from theta."""
        step, *_ = np.linalg.lstsq(self.jacobian, -self.weights(theta), rcond=None)
        return theta + step


def _check_finite(value: float, gradient: np.ndarray, qubit: int):
    if not (math.isfinite(value) and np.all(np.isfinite(gradient))):
        raise OptimizationError(f"qubit {qubit}: non-finite objective or gradient")


def objective_and_gradient(
    data: ShotDataset, obs: PauliObservable, duals: ProductDualSet, qubit: int
) -> Tuple[float, np.ndarray]:
    """
    Empirical second moment and its gradient in the given qubit's free
    parameters (flattened row-major, (r-4)*4 entries), other qubits fixed.
    """
    if not 0 <= qubit < duals.n_qubits:
        raise OptimizationError(f"qubit {qubit} out of range for {duals.n_qubits} qubits")
    cache = TraceTableCache(data, obs, duals)
    objective = QubitObjective(cache, duals, qubit)
    theta = duals.params(qubit).flat()
    _, gradient = objective.value_and_grad(theta)
    value = moments_from_weights(objective.weights(theta))[1]
    _check_finite(value, gradient, qubit)
    return value, gradient


def _solve_qubit(
    cache: TraceTableCache,
    obs: PauliObservable,
    duals: ProductDualSet,
    qubit: int,
    cfg: OptimizerConfig,
    tag: str = "",
) -> ProductDualSet:
    objective = QubitObjective(cache, duals, qubit)
    theta0 = duals.params(qubit).flat()
    value0, grad0 = objective.value_and_grad(theta0)
    _check_finite(value0, grad0, qubit)
    if np.linalg.norm(grad0) < cfg.grad_tol:
        return duals

    iterations = 0
    if cfg.inner_solver == "lstsq":
        theta = objective.least_squares(theta0)
    else:
        result = minimize(
            objective.value_and_grad,
            theta0,
            jac=True,
            method="L-BFGS-B",
            options={
                "maxiter": cfg.max_inner_iters,
                "gtol": cfg.grad_tol,
                "ftol": np.finfo(float).eps,
            },
        )
        theta, iterations = result.x, result.nit
    value, gradient = objective.value_and_grad(theta)
    _check_finite(value, gradient, qubit)
    if value > value0:
        # never accept an uphill step
        return duals

    log_sweep_detail(
        "qubit", qubit=qubit, before=value0, after=value, iterations=iterations, tag=tag
    )
    updated = duals.with_params(qubit, QubitDualParams.from_flat(theta, objective.n_free))
    cache.update_qubit(qubit, updated.trace_table(qubit))
    return updated


def optimize_qubit(
    data: ShotDataset,
    obs: PauliObservable,
    duals: ProductDualSet,
    qubit: int,
    cfg: OptimizerConfig,
) -> ProductDualSet:
    """
    Replace one qubit's free parameters by the minimizer of the empirical
    second moment; the objective never increases.

    Raises:
        OptimizationError: On non-finite objective or gradient
    """
    if not 0 <= qubit < duals.n_qubits:
        raise OptimizationError(f"qubit {qubit} out of range for {duals.n_qubits} qubits")
    if obs.is_identity():
        return duals
    cache = TraceTableCache(data, obs, duals)
    return _solve_qubit(cache, obs, duals, qubit, cfg)


@dataclass
class SweepRecord:
    sweep: int
    train_objective: float
    validation_objective: float
    duality_residual: float

    def to_dict(self) -> dict:
        return {
            "sweep": self.sweep,
            "train_objective": self.train_objective,
            "validation_objective": self.validation_objective,
            "duality_residual": self.duality_residual,
        }


@dataclass
class SweepTrace:
    """
    Objectives after every sweep (sweep 0 is the initial duals).

    Attributes:
        records (list): One SweepRecord per evaluated sweep
        best_sweep (int): Sweep whose duals were returned
        stopped_early (bool): Whether the overfitting guard fired
    """

    records: List[SweepRecord] = field(default_factory=list)
    best_sweep: int = 0
    stopped_early: bool = False

    def to_dict(self) -> dict:
        return {
            "records": [record.to_dict() for record in self.records],
            "best_sweep": self.best_sweep,
            "stopped_early": self.stopped_early,
        }


def sweep_optimize_traced(
    train: ShotDataset,
    validation: ShotDataset,
    obs: PauliObservable,
    init: ProductDualSet,
    cfg: OptimizerConfig,
    tag: str = "",
) -> Tuple[ProductDualSet, SweepTrace]:
    """
    Qubit sweeps with the overfitting guard; returns the duals with the
    lowest validation objective and the per-sweep trace.
    """
    if train.n_qubits != validation.n_qubits:
        raise DatasetError("training and validation data differ in qubit count")

    train_cache = TraceTableCache(train, obs, init)
    train_objective = moments_from_weights(train_cache.weights())[1]
    validation_objective = moments_from_weights(
        TraceTableCache(validation, obs, init).weights()
    )[1]
    trace = SweepTrace(
        [SweepRecord(0, train_objective, validation_objective, init.duality_residual())]
    )
    if cfg.n_sweeps == 0 or obs.is_identity():
        return init, trace

    best, best_validation = init, validation_objective
    current = init
    strikes = 0
    for sweep in tqdm(
        range(1, cfg.n_sweeps + 1), desc=f"sweeps {tag}".strip(), disable=not cfg.show_progress
    ):
        previous_train = train_objective
        for qubit in range(current.n_qubits):
            current = _solve_qubit(train_cache, obs, current, qubit, cfg, tag)
        train_cache.refresh()

        residual = current.duality_residual()
        if residual > cfg.duality_tol:
            raise DualityError(f"sweep {sweep}: duality residual {residual:.3g}")
        train_objective = moments_from_weights(train_cache.weights())[1]
        validation_objective = moments_from_weights(
            TraceTableCache(validation, obs, current).weights()
        )[1]
        trace.records.append(
            SweepRecord(sweep, train_objective, validation_objective, residual)
        )
        log_sweep_detail(
            "sweep", sweep=sweep, train=train_objective, validation=validation_objective, tag=tag
        )
        if train_objective > previous_train * (1 + 1e-9) + 1e-12:
            logger.warning(
                f"training objective rose in sweep {sweep}: "
                f"{previous_train:.12g} -> {train_objective:.12g}"
            )

        if validation_objective < best_validation:
            best, best_validation, trace.best_sweep = current, validation_objective, sweep
        if validation_objective > best_validation * cfg.overfit_ratio:
            strikes += 1
        else:
            strikes = 0
        if strikes >= cfg.overfit_patience:
            log_sweep_detail(
                "overfit",
                sweep=sweep,
                validation=validation_objective,
                best=best_validation,
                ratio=cfg.overfit_ratio,
                tag=tag,
            )
            trace.stopped_early = True
            break
    return best, trace


def sweep_optimize(
    train: ShotDataset,
    validation: ShotDataset,
    obs: PauliObservable,
    init: ProductDualSet,
    cfg: OptimizerConfig,
) -> ProductDualSet:
    """
    Sweep qubits 0..N-1 up to cfg.n_sweeps times starting from ``init`` and
    return the duals with the lowest validation objective.
    """
    return sweep_optimize_traced(train, validation, obs, init, cfg)[0]


@dataclass
class SplitResult:
    """
    Outcome of the split / swap / combine protocol for one observable.

    Attributes:
        report_AB: Selected estimate trained on A, evaluated on B
        report_BA: Selected estimate trained on B, evaluated on A
        combined: Average of the two directional estimates
        chosen_duals_A: Duals used for the AB direction
        chosen_duals_B: Duals used for the BA direction
        selection (dict): 'optimized' or 'canonical' per direction
        canonical_reports (dict): Canonical-dual estimates per direction
        optimized_reports (dict): Optimized-dual estimates per direction
        traces (dict): SweepTrace per direction
    """

    report_AB: EstimationReport
    report_BA: EstimationReport
    combined: EstimationReport
    chosen_duals_A: ProductDualSet
    chosen_duals_B: ProductDualSet
    selection: Dict[str, str]
    canonical_reports: Dict[str, EstimationReport]
    optimized_reports: Dict[str, EstimationReport]
    traces: Dict[str, SweepTrace]

    def to_dict(self) -> dict:
        directions = []
        for name in ("AB", "BA"):
            directions.append(
                {
                    "direction": name,
                    "train": name[0],
                    "estimate": name[1],
                    "selection": self.selection[name],
                    "selected": (self.report_AB if name == "AB" else self.report_BA).to_dict(),
                    "optimized": self.optimized_reports[name].to_dict(),
                    "canonical": self.canonical_reports[name].to_dict(),
                    "sweeps": self.traces[name].to_dict(),
                }
            )
        return {"combined": self.combined.to_dict(), "directions": directions}


def split_indices(n_shots: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Seeded permutation, then even positions to A and odd positions to B.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed])))
    permutation = rng.permutation(n_shots)
    return permutation[0::2], permutation[1::2]


def split_estimate(
    data: ShotDataset,
    obs: PauliObservable,
    cfg: OptimizerConfig,
    truth: Optional[float] = None,
    split: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> SplitResult:
    """
    Train on one half, estimate on the other, swap, and combine.

    In each direction the duals with the smaller standard error on the
    estimation half are used (canonical on ties). The combined sigma is
    sqrt(sigma_AB^2 + sigma_BA^2) / 2.

    Args:
        truth (float, optional): Exact <O>; fills abs_error fields
        split (tuple, optional): Precomputed (A, B) index arrays

    Raises:
        DatasetError: If the dataset has fewer than 4 shots
    """
    if data.n_shots < 4:
        raise DatasetError(f"the split protocol needs >= 4 shots, got {data.n_shots}")
    index_a, index_b = split if split is not None else split_indices(data.n_shots, cfg.rng_seed)
    if np.intersect1d(index_a, index_b).size:
        raise DatasetError("training and estimation shots overlap")
    if abs(len(index_a) - len(index_b)) > 1:
        raise DatasetError("split halves differ by more than one shot")
    halves = {"A": data.subset(index_a), "B": data.subset(index_b)}
    tag = obs.label()
    log_sweep_detail("split", n_a=len(index_a), n_b=len(index_b), seed=cfg.rng_seed, tag=tag)

    povm = povm_from_label(data.povm_label)
    canonical = ProductDualSet.canonical([povm] * data.n_qubits)

    selected, chosen, selection = {}, {}, {}
    canonical_reports, optimized_reports, traces = {}, {}, {}
    for name in ("AB", "BA"):
        train, estimate = halves[name[0]], halves[name[1]]
        optimized, trace = sweep_optimize_traced(
            train, estimate, obs, canonical, cfg, tag=f"{tag} {name}"
        )
        optimized_report = report_from_weights(
            TraceTableCache(estimate, obs, optimized).weights()
        ).with_truth(truth)
        canonical_report = report_from_weights(
            TraceTableCache(estimate, obs, canonical).weights()
        ).with_truth(truth)
        if optimized_report.std_error < canonical_report.std_error:
            selection[name], selected[name], chosen[name] = (
                "optimized",
                optimized_report,
                optimized,
            )
        else:
            selection[name], selected[name], chosen[name] = (
                "canonical",
                canonical_report,
                canonical,
            )
        log_sweep_detail(
            "selection",
            selection=selection[name],
            optimized=optimized_report.std_error,
            canonical=canonical_report.std_error,
            tag=f"{tag} {name}",
        )
        canonical_reports[name] = canonical_report
        optimized_reports[name] = optimized_report
        traces[name] = trace

    ab, ba = selected["AB"], selected["BA"]
    combined = EstimationReport(
        mean=(ab.mean + ba.mean) / 2,
        second_moment=(ab.second_moment + ba.second_moment) / 2,
        std_error=math.sqrt(ab.std_error**2 + ba.std_error**2) / 2,
        n_shots_used=ab.n_shots_used + ba.n_shots_used,
        split_details=[
            {"direction": name, "mean": selected[name].mean, "std_error": selected[name].std_error}
            for name in ("AB", "BA")
        ],
        sigma_rule="half-root-sum-of-squares",
    ).with_truth(truth)
    return SplitResult(
        ab,
        ba,
        combined,
        chosen["AB"],
        chosen["BA"],
        selection,
        canonical_reports,
        optimized_reports,
        traces,
    )


def split_estimate_batch(
    data: ShotDataset,
    observables: Sequence[PauliObservable],
    cfg: OptimizerConfig,
    truths: Optional[Sequence[Optional[float]]] = None,
    n_workers: int = 1,
) -> List[SplitResult]:
    """
    Independent split estimates for several observables on one dataset,
    sharing a single A/B split.
    """
    if truths is None:
        truths = [None] * len(observables)
    split = split_indices(data.n_shots, cfg.rng_seed) if data.n_shots >= 4 else None

    def work(item):
        obs, truth = item
        return split_estimate(data, obs, cfg, truth=truth, split=split)

    with ThreadPoolExecutor(max_workers=max(1, n_workers)) as pool:
        return list(pool.map(work, zip(observables, truths)))
