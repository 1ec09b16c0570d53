"""
Observable estimation from product-POVM shot data.

This module provides:
- Per-shot weights Tr[O D_outcome] computed from per-qubit trace tables
- TraceTableCache, the per-qubit factor cache shared with the optimizer
- Mean estimate, empirical second moment and standard error
- The exact per-shot variance oracle (brute force and tensor-factored)
- EstimationReport, the serializable result record
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import DatasetError, ObservableError, StateError
from .frames import ProductDualSet
from .observable import PauliObservable
from .sampler import DEFAULT_ORACLE_CAP, OutcomeDistribution
from .shots import ShotDataset

# relative slack on second_moment >= mean^2
MOMENT_SLACK = 1e-9
# factors below this magnitude are excluded by recomputation, not division
_DIVISION_FLOOR = 1e-8


@dataclass
class EstimationReport:
    """
    Estimate of <O> from one dataset.

    Attributes:
        mean (float): The estimate O-bar
        second_moment (float): Empirical second moment of the shot weights
        std_error (float): sigma = sqrt((second_moment - mean^2) / S)
        n_shots_used (int): Number of shots S behind the estimate
        split_details (list): Per-direction diagnostics (split protocol only)
        abs_error (float | None): |<O> - mean|, only when the truth is known
        sigma_rule (str): How std_error was obtained
    """

    mean: float
    second_moment: float
    std_error: float
    n_shots_used: int
    split_details: List[dict] = field(default_factory=list)
    abs_error: Optional[float] = None
    sigma_rule: str = "sample"

    def __post_init__(self):
        if self.std_error < 0:
            raise DatasetError(f"negative standard error {self.std_error}")
        scale = max(1.0, self.mean**2)
        if self.second_moment < self.mean**2 - MOMENT_SLACK * scale:
            raise DatasetError(
                f"second moment {self.second_moment:.12g} below mean^2 {self.mean**2:.12g}"
            )

    def with_truth(self, truth: Optional[float]) -> "EstimationReport":
        """Set abs_error from a known expectation value (None clears it)."""
        self.abs_error = None if truth is None else abs(truth - self.mean)
        return self

    def to_dict(self) -> dict:
        document = {
            "mean": self.mean,
            "second_moment": self.second_moment,
            "std_error": self.std_error,
            "n_shots_used": self.n_shots_used,
            "sigma_rule": self.sigma_rule,
        }
        if self.split_details:
            document["split_details"] = self.split_details
        if self.abs_error is not None:
            document["abs_error"] = self.abs_error
        return document


def _check_sizes(obs: PauliObservable, duals: ProductDualSet, n_qubits: int):
    if obs.n_qubits != n_qubits or duals.n_qubits != n_qubits:
        raise ObservableError(
            f"size mismatch: observable {obs.n_qubits}, duals {duals.n_qubits}, "
            f"data {n_qubits} qubits"
        )


def shot_weight(obs: PauliObservable, duals: ProductDualSet, outcome: Sequence[int]) -> float:
    """
    Tr[O D_outcome] = sum_P c_P prod_n Tr[P_n D^(n)_{i_n}].
    """
    outcome = tuple(int(i) for i in outcome)
    _check_sizes(obs, duals, len(outcome))
    tables = [duals.trace_table(q) for q in range(duals.n_qubits)]
    total = 0.0
    for (coeff, _), indices in zip(obs.terms, obs.pauli_indices):
        product = coeff
        for q, p in enumerate(indices):
            product *= tables[q][outcome[q], p]
        total += product
    return total


class TraceTableCache:
    """
    Per-shot, per-term, per-qubit factors Tr[P_n D^(n)_{i_n}].

    Keeps the S x K x N factor array and the S x K products over all
    qubits. Replacing one qubit's duals refreshes only that qubit's column
    and the products, so a full optimizer sweep stays O(S K N).
    """

    def __init__(self, data: ShotDataset, obs: PauliObservable, duals: ProductDualSet):
        _check_sizes(obs, duals, data.n_qubits)
        self.outcomes = data.outcomes.astype(np.intp)
        self.coefficients = obs.coefficients
        self.pauli_indices = obs.pauli_indices
        n_shots, n_qubits = self.outcomes.shape
        self.factors = np.empty((n_shots, len(self.coefficients), n_qubits))
        for q in range(n_qubits):
            self.factors[:, :, q] = self._column(q, duals.trace_table(q))
        self.products = np.prod(self.factors, axis=2)

    def _column(self, qubit: int, table: np.ndarray) -> np.ndarray:
        return table[self.outcomes[:, qubit][:, None], self.pauli_indices[:, qubit][None, :]]

    def others_product(self, qubit: int) -> np.ndarray:
        """S x K products over every qubit except ``qubit``."""
        column = self.factors[:, :, qubit]
        safe = np.abs(column) > _DIVISION_FLOOR
        result = np.empty_like(self.products)
        np.divide(self.products, column, out=result, where=safe)
        if not np.all(safe):
            rows, terms = np.nonzero(~safe)
            rest = np.delete(self.factors[rows, terms], qubit, axis=1)
            result[rows, terms] = np.prod(rest, axis=1)
        return result

    def update_qubit(self, qubit: int, table: np.ndarray):
        """Replace one qubit's trace table."""
        others = self.others_product(qubit)
        self.factors[:, :, qubit] = self._column(qubit, table)
        self.products = others * self.factors[:, :, qubit]

    def refresh(self):
        """Recompute the products from the factors, dropping division round-off."""
        self.products = np.prod(self.factors, axis=2)

    def weights(self) -> np.ndarray:
        return self.products @ self.coefficients


def shot_weights(data: ShotDataset, obs: PauliObservable, duals: ProductDualSet) -> np.ndarray:
    """Weights of every shot, in shot order."""
    return TraceTableCache(data, obs, duals).weights()


def _require_shots(data: ShotDataset, minimum: int):
    if data.n_shots < minimum:
        raise DatasetError(f"need at least {minimum} shots, dataset has {data.n_shots}")


def moments_from_weights(weights: np.ndarray):
    """
    (mean, second moment) with correctly rounded sums, so the result does
    not depend on how the shots were chunked.
    """
    n = len(weights)
    mean = math.fsum(weights) / n
    second = math.fsum(weights * weights) / n
    return mean, second


def mean_estimate(data: ShotDataset, obs: PauliObservable, duals: ProductDualSet) -> float:
    """O-bar = (1/S) sum_shots Tr[O D_outcome]."""
    _require_shots(data, 1)
    return moments_from_weights(shot_weights(data, obs, duals))[0]


def empirical_second_moment(
    data: ShotDataset, obs: PauliObservable, duals: ProductDualSet
) -> float:
    """(1/S) sum_shots Tr[O D_outcome]^2, the optimizer's objective."""
    _require_shots(data, 1)
    return moments_from_weights(shot_weights(data, obs, duals))[1]


def report_from_weights(weights: np.ndarray) -> EstimationReport:
    if len(weights) < 2:
        raise DatasetError(f"need at least 2 shots, dataset has {len(weights)}")
    mean, second = moments_from_weights(weights)
    variance = max(0.0, second - mean * mean)
    return EstimationReport(
        mean=mean,
        second_moment=second,
        std_error=math.sqrt(variance / len(weights)),
        n_shots_used=len(weights),
    )


def standard_error(
    data: ShotDataset,
    obs: PauliObservable,
    duals: ProductDualSet,
    truth: Optional[float] = None,
) -> EstimationReport:
    """
    Mean, second moment and sigma = sqrt(max(0, m2 - mean^2) / S).

    Args:
        truth (float, optional): Exact <O>; fills abs_error when given
    """
    _require_shots(data, 2)
    return report_from_weights(shot_weights(data, obs, duals)).with_truth(truth)


def weight_tensor(obs: PauliObservable, duals: ProductDualSet) -> np.ndarray:
    """Tr[O D_i] for every outcome tuple, shape (r,)*N."""
    _check_sizes(obs, duals, duals.n_qubits)
    tables = [duals.trace_table(q) for q in range(duals.n_qubits)]
    total = 0.0
    for (coeff, _), indices in zip(obs.terms, obs.pauli_indices):
        term = np.full((), coeff)
        for q, p in enumerate(indices):
            term = np.multiply.outer(term, tables[q][:, p])
        total = total + term
    return total


def _factored_moments(dist: OutcomeDistribution, obs: PauliObservable, duals: ProductDualSet):
    coefficients = obs.coefficients
    indices = obs.pauli_indices
    first = np.array(coefficients, dtype=float)
    second = np.outer(coefficients, coefficients)
    for q, marginal in enumerate(dist.marginals):
        table = duals.trace_table(q)
        if len(marginal) != table.shape[0]:
            raise StateError(f"qubit {q}: distribution has {len(marginal)} outcomes")
        means = marginal @ table
        gram = table.T @ (marginal[:, None] * table)
        first = first * means[indices[:, q]]
        second = second * gram[indices[:, q][:, None], indices[:, q][None, :]]
    return float(np.sum(first)), float(np.sum(second))


def _brute_moments(dist, obs, duals, n_max):
    probs = dist.full(n_max)
    weights = weight_tensor(obs, duals)
    if probs.shape != weights.shape:
        raise StateError(
            f"distribution shape {probs.shape} does not match duals {weights.shape}"
        )
    return float(np.sum(probs * weights)), float(np.sum(probs * weights * weights))


def exact_moments(
    dist: OutcomeDistribution,
    obs: PauliObservable,
    duals: ProductDualSet,
    method: str = "auto",
    n_max: int = DEFAULT_ORACLE_CAP,
):
    """
    Exact (mean, second moment) of the shot weight.

    Args:
        method (str): 'factored' (product distributions only), 'brute'
            (r^N enumeration) or 'auto' (factored when possible)
    """
    if dist.n_qubits != obs.n_qubits:
        raise StateError(
            f"distribution has {dist.n_qubits} qubits, observable {obs.n_qubits}"
        )
    _check_sizes(obs, duals, dist.n_qubits)
    if method == "auto":
        method = "factored" if dist.is_product else "brute"
    if method == "factored":
        if not dist.is_product:
            raise StateError("the factored path needs a product distribution")
        return _factored_moments(dist, obs, duals)
    if method == "brute":
        return _brute_moments(dist, obs, duals, n_max)
    raise ValueError(f"unknown method '{method}'")


def exact_mean(dist, obs, duals, method: str = "auto") -> float:
    """sum_i p_i Tr[O D_i]; equals <O> for every valid dual set."""
    return exact_moments(dist, obs, duals, method)[0]


def exact_variance(dist, obs, duals, method: str = "auto") -> float:
    """
    Per-shot variance sum_i p_i w_i^2 - (sum_i p_i w_i)^2.
    """
    mean, second = exact_moments(dist, obs, duals, method)
    return second - mean * mean
