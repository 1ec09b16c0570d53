"""
Single-qubit frame algebra for informationally over-complete POVMs.

This module provides:
- HermitianOp, a single-qubit Hermitian operator stored as Pauli coordinates
- SingleQubitPovm construction and validation (Pauli-6 and rank-1 POVMs)
- Canonical duals through the frame superoperator
- Minimal basis selection and the free-parameter dual family
- ProductDualSet, the per-qubit duals used by the estimator and optimizer

Operators are written A = a_I*I + a_X*X + a_Y*Y + a_Z*Z, so that
Tr[A] = 2*a_I and Tr[A B] = 2*<a, b>.
"""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .errors import DualityError, FrameError

PAULI_LABELS = ("I", "X", "Y", "Z")
PAULI_INDEX = {label: i for i, label in enumerate(PAULI_LABELS)}

POSITIVITY_TOL = 1e-10
COMPLETENESS_TOL = 1e-12
BIORTHOGONALITY_TOL = 1e-10
DUALITY_TOL = 1e-10
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class HermitianOp:
    """
    Single-qubit Hermitian operator in Pauli coordinates.

    Attributes:
        coeffs (tuple): (a_I, a_X, a_Y, a_Z)
    """

    coeffs: Tuple[float, float, float, float]

    def __post_init__(self):
        values = tuple(float(c) for c in self.coeffs)
        if len(values) != 4:
            raise FrameError(f"HermitianOp needs 4 Pauli coordinates, got {len(values)}")
        if not all(np.isfinite(values)):
            raise FrameError(f"HermitianOp coordinates must be finite: {values}")
        object.__setattr__(self, "coeffs", values)

    @classmethod
    def from_coords(cls, coords) -> "HermitianOp":
        return cls(tuple(np.asarray(coords, dtype=float).ravel()))

    @classmethod
    def projector(cls, amplitudes, weight: float = 1.0) -> "HermitianOp":
        """
        Build weight*|psi><psi| from the two amplitudes of a pure state.

        Args:
            amplitudes: (alpha, beta), normalized internally
            weight (float): Non-negative scale factor

        Returns:
            HermitianOp: The scaled projector
        """
        alpha, beta = np.asarray(amplitudes, dtype=complex)
        norm = abs(alpha) ** 2 + abs(beta) ** 2
        if norm <= 0:
            raise FrameError("projector needs a nonzero state")
        cross = np.conj(alpha) * beta / norm
        bloch = (
            2 * cross.real,
            2 * cross.imag,
            (abs(alpha) ** 2 - abs(beta) ** 2) / norm,
        )
        return cls((weight / 2, *(weight * b / 2 for b in bloch)))

    def as_array(self) -> np.ndarray:
        return np.array(self.coeffs)

    def trace(self) -> float:
        return 2.0 * self.coeffs[0]

    def inner(self, other: "HermitianOp") -> float:
        """Tr[A B]."""
        return 2.0 * float(np.dot(self.coeffs, other.coeffs))

    def eigenvalues(self) -> Tuple[float, float]:
        """Eigenvalues a_I -/+ |(a_X, a_Y, a_Z)| in ascending order."""
        radius = float(np.linalg.norm(self.coeffs[1:]))
        return self.coeffs[0] - radius, self.coeffs[0] + radius

    def __add__(self, other: "HermitianOp") -> "HermitianOp":
        return HermitianOp.from_coords(self.as_array() + other.as_array())

    def __sub__(self, other: "HermitianOp") -> "HermitianOp":
        return HermitianOp.from_coords(self.as_array() - other.as_array())

    def __mul__(self, scalar: float) -> "HermitianOp":
        return HermitianOp.from_coords(float(scalar) * self.as_array())

    __rmul__ = __mul__


IDENTITY = HermitianOp((1.0, 0.0, 0.0, 0.0))


@dataclass(frozen=True)
class SingleQubitPovm:
    """
    Informationally complete single-qubit POVM.

    Attributes:
        effects (tuple): The r effects, in outcome order
        label (str): Short identifier written into shot-file headers
    """

    effects: Tuple[HermitianOp, ...]
    label: str

    def __post_init__(self):
        effects = tuple(self.effects)
        object.__setattr__(self, "effects", effects)
        if len(effects) < 4:
            raise FrameError(
                f"POVM '{self.label}' has {len(effects)} effects, over-completeness needs >= 4"
            )
        for i, effect in enumerate(effects):
            low, _ = effect.eigenvalues()
            if low < -POSITIVITY_TOL:
                raise FrameError(
                    f"POVM '{self.label}' effect {i} is not positive (min eigenvalue {low:.3g})"
                )
        completeness = self.coords.sum(axis=0) - IDENTITY.as_array()
        if np.max(np.abs(completeness)) > COMPLETENESS_TOL:
            raise FrameError(
                f"POVM '{self.label}' effects do not sum to identity "
                f"(residual {np.max(np.abs(completeness)):.3g})"
            )
        if np.linalg.matrix_rank(self.coords) < 4:
            raise FrameError(f"POVM '{self.label}' is not informationally complete")

    @property
    def r(self) -> int:
        return len(self.effects)

    @property
    def coords(self) -> np.ndarray:
        """The r x 4 matrix of effect Pauli coordinates."""
        return np.array([effect.coeffs for effect in self.effects])

    @classmethod
    def from_states(cls, weights: Sequence[float], states: Sequence, label: str):
        """
        Build a rank-1 POVM with effects weights[i] * |states[i]><states[i]|.

        Args:
            weights: Non-negative effect weights
            states: Two-component amplitude vectors
            label (str): POVM label

        Returns:
            SingleQubitPovm: The validated POVM
        """
        effects = [HermitianOp.projector(s, w) for w, s in zip(weights, states)]
        return cls(tuple(effects), label)


def build_pauli6_povm() -> SingleQubitPovm:
    """
    Random Pauli measurement: Z, X or Y basis with probability 1/3 each.

    Outcome order is |0>, |1>, |+>, |->, |+i>, |-i>, i.e. outcome
    2*basis + result with bases Z=0, X=1, Y=2.
    """
    third = 1.0 / 6.0
    coords = [
        (third, 0.0, 0.0, third),
        (third, 0.0, 0.0, -third),
        (third, third, 0.0, 0.0),
        (third, -third, 0.0, 0.0),
        (third, 0.0, third, 0.0),
        (third, 0.0, -third, 0.0),
    ]
    return SingleQubitPovm(tuple(HermitianOp(c) for c in coords), "pauli6")


POVM_BUILDERS = {"pauli6": build_pauli6_povm}


def povm_from_label(label: str) -> SingleQubitPovm:
    try:
        return POVM_BUILDERS[label]()
    except KeyError:
        raise FrameError(f"Unknown POVM label '{label}'")


def effect_vectors(povm: SingleQubitPovm) -> np.ndarray:
    """
    Factor rank-1 effects as Pi_i = |v_i><v_i|.

    Returns:
        np.ndarray: r x 2 complex array of unnormalized vectors v_i

    Raises:
        FrameError: If some effect has rank 2
    """
    vectors = np.zeros((povm.r, 2), dtype=complex)
    for i, effect in enumerate(povm.effects):
        low, high = effect.eigenvalues()
        if abs(low) > POSITIVITY_TOL:
            raise FrameError(f"effect {i} of '{povm.label}' is not rank 1")
        if high <= POSITIVITY_TOL:
            continue
        nx, ny, nz = np.asarray(effect.coeffs[1:]) / np.linalg.norm(effect.coeffs[1:])
        polar = np.arccos(np.clip(nz, -1.0, 1.0))
        azimuth = np.arctan2(ny, nx)
        vectors[i] = np.sqrt(high) * np.array(
            [np.cos(polar / 2), np.exp(1j * azimuth) * np.sin(polar / 2)]
        )
    return vectors


@dataclass(frozen=True, eq=False)
class QubitDualSet:
    """
    The r dual operators of one qubit, aligned with the POVM outcome order.

    Attributes:
        coords (np.ndarray): r x 4 Pauli coordinates of the duals
    """

    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 4:
            raise FrameError(f"dual coordinates must be r x 4, got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise FrameError("dual coordinates must be finite")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def duals(self) -> List[HermitianOp]:
        return [HermitianOp.from_coords(row) for row in self.coords]

    def trace_table(self) -> np.ndarray:
        """r x 4 table with entries Tr[P D_i] for P in I, X, Y, Z."""
        return 2.0 * self.coords

    def duality_residual(self, povm: SingleQubitPovm) -> float:
        """
        Max deviation of sum_i Tr[P Pi_i] D_i from P over P in I, X, Y, Z.
        """
        reconstruction = 2.0 * self.coords.T @ povm.coords
        return float(np.max(np.abs(reconstruction - np.eye(4))))


def check_duality(povm: SingleQubitPovm, duals: QubitDualSet, tol: float = DUALITY_TOL):
    """
    Raises:
        DualityError: If the duality residual exceeds ``tol``
    """
    residual = duals.duality_residual(povm)
    if residual > tol:
        raise DualityError(f"duality residual {residual:.3g} exceeds {tol:.1g}")


def canonical_duals(povm: SingleQubitPovm) -> QubitDualSet:
    """
    Canonical duals D_i = F^-1(Pi_i), F(A) = sum_j Pi_j Tr[Pi_j A].

    In Pauli coordinates F is the 4x4 matrix 2 * P^T P.

    Raises:
        FrameError: If the frame superoperator is singular
    """
    effects = povm.coords
    frame = 2.0 * effects.T @ effects
    if np.linalg.cond(frame) > MAX_CONDITION:
        raise FrameError(f"frame operator of '{povm.label}' is singular")
    duals = np.linalg.solve(frame, effects.T).T
    return QubitDualSet(duals)


@dataclass(frozen=True, eq=False)
class MinimalBasisSelection:
    """
    Basis/redundant split of a POVM together with the basis' unique duals.

    Attributes:
        povm (SingleQubitPovm): The POVM the selection was made from
        basis_indices (tuple): 4 outcome indices, ascending
        redundant_indices (tuple): The remaining r-4 indices, ascending
        star_duals (np.ndarray): 4 x 4, row i holds D*_i of basis_indices[i]
        overlap (np.ndarray): (r-4) x 4, entry [j, i] = Tr[D*_i Pi~_j]
    """

    povm: SingleQubitPovm
    basis_indices: Tuple[int, ...]
    redundant_indices: Tuple[int, ...]
    star_duals: np.ndarray
    overlap: np.ndarray
    dependence: np.ndarray = field(init=False, repr=False)
    base_coords: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        r = self.povm.r
        n_free = len(self.redundant_indices)
        # D = base_coords + dependence @ theta (the free-parameter dual family)
        dependence = np.zeros((r, n_free))
        base = np.zeros((r, 4))
        for k, i in enumerate(self.basis_indices):
            dependence[i] = -self.overlap[:, k]
            base[i] = self.star_duals[k]
        for j, i in enumerate(self.redundant_indices):
            dependence[i, j] = 1.0
        for arr in (dependence, base, self.star_duals, self.overlap):
            arr.setflags(write=False)
        object.__setattr__(self, "dependence", dependence)
        object.__setattr__(self, "base_coords", base)

    @property
    def n_free(self) -> int:
        return len(self.redundant_indices)

    @property
    def star_ops(self) -> List[HermitianOp]:
        return [HermitianOp.from_coords(row) for row in self.star_duals]


def select_minimal_basis(povm: SingleQubitPovm, tol: float = 1e-10) -> MinimalBasisSelection:
    """
    Pick 4 linearly independent effects by greedy column-pivoted elimination.

    For each Pauli column in order I, X, Y, Z the remaining row with the
    largest magnitude becomes the pivot; equal magnitudes go to the lowest
    outcome index.

    Raises:
        FrameError: If no 4 independent effects exist
    """
    work = povm.coords.copy()
    scale = max(np.max(np.abs(work)), 1.0)
    remaining = list(range(povm.r))
    chosen = []
    for col in range(4):
        magnitudes = np.abs(work[remaining, col])
        best = magnitudes.max() if remaining else 0.0
        if best < tol * scale:
            raise FrameError(f"POVM '{povm.label}' has no 4 independent effects")
        # lowest index among (numerically) equal magnitudes
        pivot = next(
            row for row, m in zip(remaining, magnitudes) if m >= best - 1e-12 * scale
        )
        remaining.remove(pivot)
        chosen.append(pivot)
        for row in remaining:
            work[row] -= work[row, col] / work[pivot, col] * work[pivot]

    basis = tuple(sorted(chosen))
    redundant = tuple(i for i in range(povm.r) if i not in basis)
    coords = povm.coords
    basis_matrix = coords[list(basis)]
    if np.linalg.cond(basis_matrix) > MAX_CONDITION:
        raise FrameError(f"basis effects of '{povm.label}' are ill-conditioned")

    # Tr[Pi_k D*_i] = 2 <pi_k, d*_i> = delta_ik
    star = np.linalg.inv(2.0 * basis_matrix).T
    biorthogonality = 2.0 * basis_matrix @ star.T - np.eye(4)
    if np.max(np.abs(biorthogonality)) > BIORTHOGONALITY_TOL:
        raise FrameError("basis duals are not biorthogonal to the basis effects")
    overlap = 2.0 * coords[list(redundant)] @ star.T
    return MinimalBasisSelection(povm, basis, redundant, star, overlap)


@dataclass(frozen=True, eq=False)
class QubitDualParams:
    """
    Free parameters of one qubit's duals.

    Attributes:
        theta (np.ndarray): (r-4) x 4, Pauli coordinates of the free duals
    """

    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.ndim != 2 or theta.shape[1] != 4:
            raise FrameError(f"theta must be (r-4) x 4, got {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise FrameError("theta entries must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def zeros(cls, n_free: int) -> "QubitDualParams":
        return cls(np.zeros((n_free, 4)))

    @classmethod
    def from_flat(cls, vector, n_free: int) -> "QubitDualParams":
        return cls(np.asarray(vector, dtype=float).reshape(n_free, 4))

    def flat(self) -> np.ndarray:
        return self.theta.ravel().copy()


def assemble_duals(sel: MinimalBasisSelection, params: QubitDualParams) -> QubitDualSet:
    """
    Duals of the free-parameter family.

    Basis duals are D*_i - sum_j Tr[D*_i Pi~_j] D~_j and redundant duals are
    the free operators D~_j themselves. Every params value yields a valid
    dual set.
    """
    if params.theta.shape[0] != sel.n_free:
        raise FrameError(
            f"expected {sel.n_free} free operators, got {params.theta.shape[0]}"
        )
    return QubitDualSet(sel.base_coords + sel.dependence @ params.theta)


def params_for_canonical(
    sel: MinimalBasisSelection, canonical: QubitDualSet, tol: float = DUALITY_TOL
) -> QubitDualParams:
    """
    Read the free parameters off a dual set (the redundant duals).

    Raises:
        FrameError: If the basis duals are inconsistent with the constraint
            linking them to the redundant duals
    """
    params = QubitDualParams(canonical.coords[list(sel.redundant_indices)])
    rebuilt = assemble_duals(sel, params)
    residual = float(np.max(np.abs(rebuilt.coords - canonical.coords)))
    scale = max(1.0, float(np.max(np.abs(canonical.coords))))
    if residual > tol * scale:
        raise FrameError(
            f"basis duals violate the dual constraint (residual {residual:.3g})"
        )
    return params


@dataclass(frozen=True, eq=False)
class QubitDualEntry:
    """Selection, parameters and the assembled duals of one qubit."""

    selection: MinimalBasisSelection
    params: QubitDualParams
    duals: QubitDualSet

    @classmethod
    def from_params(cls, selection, params) -> "QubitDualEntry":
        return cls(selection, params, assemble_duals(selection, params))


@dataclass(frozen=True, eq=False)
class ProductDualSet:
    """
    Per-qubit duals of a product POVM; the optimization variable.

    Attributes:
        per_qubit (tuple): One QubitDualEntry per qubit
    """

    per_qubit: Tuple[QubitDualEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "per_qubit", tuple(self.per_qubit))

    @property
    def n_qubits(self) -> int:
        return len(self.per_qubit)

    @classmethod
    def canonical(cls, povms: Sequence[SingleQubitPovm]) -> "ProductDualSet":
        """Canonical duals on every qubit, expressed in the free parameters."""
        entries = []
        cache = {}
        for povm in povms:
            # qubits sharing a POVM object share the (immutable) selection
            if id(povm) not in cache:
                selection = select_minimal_basis(povm)
                params = params_for_canonical(selection, canonical_duals(povm))
                cache[id(povm)] = QubitDualEntry.from_params(selection, params)
            entries.append(cache[id(povm)])
        return cls(tuple(entries))

    @classmethod
    def canonical_pauli6(cls, n_qubits: int) -> "ProductDualSet":
        povm = build_pauli6_povm()
        return cls.canonical([povm] * n_qubits)

    @classmethod
    def from_params(
        cls, selections: Sequence[MinimalBasisSelection], params: Sequence[QubitDualParams]
    ) -> "ProductDualSet":
        if len(selections) != len(params):
            raise FrameError("one params entry per qubit is required")
        return cls(
            tuple(QubitDualEntry.from_params(s, p) for s, p in zip(selections, params))
        )

    def povm(self, qubit: int) -> SingleQubitPovm:
        return self.per_qubit[qubit].selection.povm

    def params(self, qubit: int) -> QubitDualParams:
        return self.per_qubit[qubit].params

    def with_params(self, qubit: int, params: QubitDualParams) -> "ProductDualSet":
        """Copy with one qubit's parameters replaced."""
        entries = list(self.per_qubit)
        entries[qubit] = QubitDualEntry.from_params(entries[qubit].selection, params)
        return ProductDualSet(tuple(entries))

    def with_zero_params(self) -> "ProductDualSet":
        """The star-basis duals: all free operators set to zero."""
        return ProductDualSet.from_params(
            [e.selection for e in self.per_qubit],
            [QubitDualParams.zeros(e.selection.n_free) for e in self.per_qubit],
        )

    def trace_table(self, qubit: int) -> np.ndarray:
        return self.per_qubit[qubit].duals.trace_table()

    def duality_residual(self) -> float:
        return max(
            entry.duals.duality_residual(entry.selection.povm) for entry in self.per_qubit
        )

    def check_duality(self, tol: float = DUALITY_TOL):
        for entry in self.per_qubit:
            check_duality(entry.selection.povm, entry.duals, tol)
