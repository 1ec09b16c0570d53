"""
Statevector simulation and Pauli-6 shot sampling.

This module provides:
- StateVector preparation (|0...0>, product states) and first-order Trotter
  evolution of the open transverse-field Ising chain
- Pauli-6 shot sampling by sequential per-qubit collapse
- Exact outcome distributions and expectation values used as oracles

Qubit 0 is the most significant bit of the amplitude index, so the
amplitude tensor has one axis per qubit in qubit order.

Sampling determinism: shots are produced in blocks of SAMPLING_BLOCK shots.
Block b draws from Generator(Philox(SeedSequence([seed, b]))): first an
(n_block x N) array of bases (0=Z, 1=X, 2=Y), then an (n_block x N) array
of uniforms. Workers process whole blocks, so the output does not depend on
the worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .errors import ObservableError, StateError
from .frames import SingleQubitPovm, build_pauli6_povm, effect_vectors
from .logger import get_logger
from .observable import PauliObservable
from .shots import ShotDataset

DEFAULT_STATE_CAP = 14
DEFAULT_ORACLE_CAP = 8
NORM_TOL = 1e-10
SAMPLING_BLOCK = 4096
GENERATOR_ID = f"philox4x64/seedseq/block{SAMPLING_BLOCK}"
# amplitudes handled per vectorized sub-batch
_MAX_BATCH_AMPLITUDES = 1 << 21

_SQRT_HALF = np.sqrt(0.5)
# [basis][result] eigenvectors: Z -> |0>,|1>; X -> |+>,|->; Y -> |+i>,|-i>
BASIS_VECTORS = np.array(
    [
        [[1.0, 0.0], [0.0, 1.0]],
        [[_SQRT_HALF, _SQRT_HALF], [_SQRT_HALF, -_SQRT_HALF]],
        [[_SQRT_HALF, 1j * _SQRT_HALF], [_SQRT_HALF, -1j * _SQRT_HALF]],
    ],
    dtype=complex,
)

PAULI_MATRICES = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class StateVector:
    """
    Pure N-qubit state.

    Attributes:
        n_qubits (int): Number of qubits N
        amplitudes (np.ndarray): 2^N complex amplitudes
        provenance (str): How the state was prepared (shot-file header)
    """

    n_qubits: int
    amplitudes: np.ndarray
    provenance: str = ""
    cap: int = DEFAULT_STATE_CAP

    def __post_init__(self):
        if not 1 <= self.n_qubits <= self.cap:
            raise StateError(f"n_qubits must be in 1..{self.cap}, got {self.n_qubits}")
        amplitudes = np.array(self.amplitudes, dtype=complex).ravel()
        if amplitudes.size != 2**self.n_qubits:
            raise StateError(
                f"{self.n_qubits} qubits need {2**self.n_qubits} amplitudes, "
                f"got {amplitudes.size}"
            )
        norm = float(np.vdot(amplitudes, amplitudes).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise StateError(f"state is not normalized (|psi|^2 = {norm:.12g})")
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per qubit."""
        return self.amplitudes.reshape((2,) * self.n_qubits)

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


@dataclass(frozen=True)
class TfimParams:
    """
    Trotterized H = -J sum_i Z_i Z_{i+1} + h sum_i X_i on an open chain.
    """

    n_qubits: int
    J: float = 0.5236
    h: float = 1.0
    dt: float = 0.1
    steps: int = 0

    def __post_init__(self):
        if self.n_qubits < 2:
            raise StateError("the Ising chain needs at least 2 qubits")
        if not self.dt > 0:
            raise StateError(f"dt must be positive, got {self.dt}")
        if self.steps < 0:
            raise StateError(f"steps must be >= 0, got {self.steps}")

    def provenance(self) -> str:
        return f"tfim:J={self.J!r},h={self.h!r},dt={self.dt!r},steps={self.steps}"


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    """
    Joint distribution of product-POVM outcomes.

    Either the full tensor ``probs`` (shape (r,)*N) or per-qubit
    ``marginals`` of a product state are present; the full tensor of a
    product distribution is materialized on demand.
    """

    n_qubits: int
    probs: Optional[np.ndarray] = None
    marginals: Optional[Tuple[np.ndarray, ...]] = None

    def __post_init__(self):
        if self.probs is None and self.marginals is None:
            raise StateError("an outcome distribution needs probs or marginals")
        if self.probs is not None:
            _check_probabilities(self.probs)
        if self.marginals is not None:
            if len(self.marginals) != self.n_qubits:
                raise StateError("one marginal per qubit is required")
            for marginal in self.marginals:
                _check_probabilities(marginal)

    @property
    def is_product(self) -> bool:
        return self.marginals is not None

    def full(self, n_max: int = DEFAULT_ORACLE_CAP) -> np.ndarray:
        """The (r,)*N probability tensor."""
        if self.probs is not None:
            return self.probs
        if self.n_qubits > n_max:
            raise StateError(f"{self.n_qubits} qubits exceed the oracle cap {n_max}")
        tensor = np.ones(())
        for marginal in self.marginals:
            tensor = np.multiply.outer(tensor, marginal)
        return tensor


def _check_probabilities(probs: np.ndarray):
    if np.any(probs < -1e-12):
        raise StateError("negative outcome probability")
    total = float(np.sum(probs))
    if abs(total - 1.0) > 1e-9:
        raise StateError(f"outcome probabilities sum to {total:.12g}")


def prepare_zero_state(n: int, cap: int = DEFAULT_STATE_CAP) -> StateVector:
    """|0...0> on n qubits."""
    if not 1 <= n <= cap:
        raise StateError(f"n_qubits must be in 1..{cap}, got {n}")
    amplitudes = np.zeros(2**n, dtype=complex)
    amplitudes[0] = 1.0
    return StateVector(n, amplitudes, "zero", cap)


def product_state(
    single_qubit_states: Sequence, cap: int = DEFAULT_STATE_CAP, provenance: str = ""
) -> StateVector:
    """
    Tensor product of single-qubit states, qubit 0 first.

    Args:
        single_qubit_states: Two-component amplitude vectors, normalized internally
    """
    amplitudes = np.ones(1, dtype=complex)
    for state in single_qubit_states:
        state = np.asarray(state, dtype=complex)
        amplitudes = np.kron(amplitudes, state / np.linalg.norm(state))
    return StateVector(len(single_qubit_states), amplitudes, provenance, cap)


def _apply_single_qubit(tensor: np.ndarray, matrix: np.ndarray, qubit: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(matrix, tensor, axes=([1], [qubit])), 0, qubit)


def trotter_evolve(state: StateVector, params: TfimParams) -> StateVector:
    """
    Apply ``params.steps`` first-order Trotter steps.

    Each step applies exp(+i J dt Z_i Z_{i+1}) on every bond of the open
    chain, then exp(-i h dt X_i) on every site.

    Raises:
        StateError: If the state and params sizes differ
    """
    if state.n_qubits != params.n_qubits:
        raise StateError(
            f"state has {state.n_qubits} qubits, params describe {params.n_qubits}"
        )
    n = state.n_qubits
    provenance = params.provenance() if state.provenance == "zero" else ""
    if params.steps == 0:
        return StateVector(n, state.amplitudes, provenance, state.cap)

    # z eigenvalue (+1/-1) of every qubit for every basis index
    bits = (np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    spins = 1 - 2 * bits
    bond_sum = np.sum(spins[:, :-1] * spins[:, 1:], axis=1)
    zz_phase = np.exp(1j * params.J * params.dt * bond_sum).reshape((2,) * n)
    angle = params.h * params.dt
    x_rotation = np.array(
        [[np.cos(angle), -1j * np.sin(angle)], [-1j * np.sin(angle), np.cos(angle)]]
    )

    tensor = state.tensor().copy()
    for _ in range(params.steps):
        tensor = tensor * zz_phase
        for qubit in range(n):
            tensor = _apply_single_qubit(tensor, x_rotation, qubit)
    return StateVector(n, tensor.ravel(), provenance, state.cap)


def _block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _collapse_batch(psi: np.ndarray, bases: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """
    Measure every qubit of len(bases) copies of psi, qubit 0 first.

    Args:
        psi: State tensor, one axis per qubit
        bases: (B, N) basis ids
        uniforms: (B, N) uniforms in [0, 1)

    Returns:
        np.ndarray: (B, N) outcome indices 2*basis + result
    """
    n_batch, n = bases.shape
    rows = np.arange(n_batch)
    batch = np.broadcast_to(psi, (n_batch,) + psi.shape).copy()
    outcomes = np.empty((n_batch, n), dtype=np.uint8)
    for q in range(n):
        moved = np.moveaxis(batch, q + 1, -1)
        shape = moved.shape
        flat = moved.reshape(n_batch, -1, 2)
        vectors = BASIS_VECTORS[bases[:, q]]
        components = np.einsum("brc,bkc->brk", vectors.conj(), flat)
        p0 = np.sum(np.abs(components[:, 0]) ** 2, axis=1)
        results = (uniforms[:, q] >= p0).astype(np.intp)
        chosen = components[rows, results]
        prob = np.sum(np.abs(chosen) ** 2, axis=1)
        chosen = chosen / np.sqrt(np.maximum(prob, 1e-300))[:, None]
        collapsed = chosen[:, :, None] * vectors[rows, results][:, None, :]
        batch = np.moveaxis(collapsed.reshape(shape), -1, q + 1)
        outcomes[:, q] = 2 * bases[:, q] + results
    return outcomes


def _sample_block(psi: np.ndarray, seed: int, block: int, n_block: int) -> np.ndarray:
    rng = _block_generator(seed, block)
    n = psi.ndim
    bases = rng.integers(0, 3, size=(n_block, n))
    uniforms = rng.random((n_block, n))
    step = max(1, _MAX_BATCH_AMPLITUDES // psi.size)
    parts = [
        _collapse_batch(psi, bases[i : i + step], uniforms[i : i + step])
        for i in range(0, n_block, step)
    ]
    return np.concatenate(parts, axis=0)


def sample_pauli6_shots(
    state: StateVector,
    n_shots: int,
    seed: int,
    n_workers: int = 1,
    show_progress: bool = False,
) -> ShotDataset:
    """
    Sample Pauli-6 outcomes: per shot and qubit, a uniformly random basis
    among Z, X, Y, then the projective result on the collapsed state.

    Args:
        state (StateVector): State to measure
        n_shots (int): Number of shots S >= 1
        seed (int): Non-negative sampling seed
        n_workers (int): Threads processing whole blocks
        show_progress (bool): Show a tqdm bar over blocks

    Returns:
        ShotDataset: S x N outcomes with seed/generator/state provenance
    """
    if n_shots < 1:
        raise StateError(f"n_shots must be >= 1, got {n_shots}")
    if seed < 0:
        raise StateError(f"seed must be non-negative, got {seed}")
    psi = state.tensor()
    n_blocks = -(-n_shots // SAMPLING_BLOCK)
    sizes = [min(SAMPLING_BLOCK, n_shots - b * SAMPLING_BLOCK) for b in range(n_blocks)]

    def work(block):
        return _sample_block(psi, seed, block, sizes[block])

    logger.info(
        f"Sampling {n_shots} shots on {state.n_qubits} qubits "
        f"(seed {seed}, {n_blocks} blocks, {n_workers} workers)"
    )
    with ThreadPoolExecutor(max_workers=max(1, n_workers)) as pool:
        blocks = list(
            tqdm(
                pool.map(work, range(n_blocks)),
                total=n_blocks,
                desc="sampling",
                unit="block",
                disable=not show_progress,
            )
        )
    return ShotDataset(
        np.concatenate(blocks, axis=0), "pauli6", seed, GENERATOR_ID, state.provenance
    )


def _outcome_amplitudes(tensor: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    for q in range(tensor.ndim):
        tensor = np.moveaxis(np.tensordot(tensor, vectors.conj(), axes=([q], [1])), -1, q)
    return tensor


def exact_outcome_distribution(
    state: StateVector,
    n_max: int = DEFAULT_ORACLE_CAP,
    povm: Optional[SingleQubitPovm] = None,
) -> OutcomeDistribution:
    """
    probs[i_1..i_N] = <psi| Pi_{i_1} x ... x Pi_{i_N} |psi> for all r^N tuples.

    Raises:
        StateError: If N exceeds ``n_max``
    """
    if state.n_qubits > n_max:
        raise StateError(f"{state.n_qubits} qubits exceed the oracle cap {n_max}")
    vectors = effect_vectors(povm or build_pauli6_povm())
    amplitudes = _outcome_amplitudes(state.tensor(), vectors)
    return OutcomeDistribution(state.n_qubits, probs=np.abs(amplitudes) ** 2)


def product_outcome_distribution(
    single_qubit_states: Sequence, povm: Optional[SingleQubitPovm] = None
) -> OutcomeDistribution:
    """
    Outcome distribution of a product state, kept in factored form.
    """
    vectors = effect_vectors(povm or build_pauli6_povm())
    marginals = []
    for state in single_qubit_states:
        state = np.asarray(state, dtype=complex)
        state = state / np.linalg.norm(state)
        marginals.append(np.abs(vectors.conj() @ state) ** 2)
    return OutcomeDistribution(len(marginals), marginals=tuple(marginals))


def exact_expectation(state: StateVector, obs: PauliObservable) -> float:
    """
    <psi|O|psi> by applying each Pauli string to the statevector.
    """
    if obs.n_qubits != state.n_qubits:
        raise ObservableError(
            f"observable acts on {obs.n_qubits} qubits, state has {state.n_qubits}"
        )
    psi = state.tensor()
    total = 0.0
    for (coeff, _), indices in zip(obs.terms, obs.pauli_indices):
        phi = psi
        for qubit, p in enumerate(indices):
            if p:
                phi = _apply_single_qubit(phi, PAULI_MATRICES[p], qubit)
        total += coeff * float(np.vdot(psi, phi).real)
    return total
