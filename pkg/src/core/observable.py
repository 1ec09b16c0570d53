"""
Real-weighted sums of N-qubit Pauli strings.
"""

import math
import re
from dataclasses import dataclass
from typing import Dict, Iterable, Tuple

import numpy as np

from .errors import ObservableError
from .frames import PAULI_INDEX

_WORD_RE = re.compile(r"^[IXYZ]+$")


@dataclass(frozen=True)
class PauliObservable:
    """
    Hermitian observable sum_k c_k P_k with real coefficients.

    Attributes:
        n_qubits (int): Number of qubits N
        terms (tuple): (coefficient, word) pairs; words are length-N strings
            over I, X, Y, Z, unique, in first-appearance order
    """

    n_qubits: int
    terms: Tuple[Tuple[float, str], ...]

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ObservableError("an observable needs at least one qubit")
        merged: Dict[str, float] = {}
        for coeff, word in self.terms:
            coeff = _as_real(coeff)
            word = word.strip().upper()
            if len(word) != self.n_qubits or not _WORD_RE.match(word):
                raise ObservableError(
                    f"Pauli word '{word}' is not a length-{self.n_qubits} word over IXYZ"
                )
            merged[word] = merged.get(word, 0.0) + coeff
        if not merged:
            raise ObservableError("an observable needs at least one term")
        object.__setattr__(
            self, "terms", tuple((coeff, word) for word, coeff in merged.items())
        )

    @classmethod
    def from_terms(cls, terms: Iterable[Tuple[float, str]]) -> "PauliObservable":
        terms = list(terms)
        if not terms:
            raise ObservableError("an observable needs at least one term")
        return cls(len(terms[0][1].strip()), tuple(terms))

    @classmethod
    def parse(cls, text: str) -> "PauliObservable":
        """
        Parse '0.5*ZZII + XXII + -1*YYII' style expressions.

        Terms are separated by '+'; a term is 'coef*WORD' or 'WORD'.
        """
        terms = []
        for chunk in text.split("+"):
            chunk = chunk.strip()
            if not chunk:
                raise ObservableError(f"empty term in observable '{text}'")
            if "*" in chunk:
                coeff_text, word = chunk.split("*", 1)
                try:
                    coeff = float(coeff_text)
                except ValueError:
                    raise ObservableError(f"bad coefficient '{coeff_text}' in '{text}'")
            else:
                coeff, word = 1.0, chunk
            terms.append((coeff, word.strip()))
        return cls.from_terms(terms)

    @classmethod
    def z_string(cls, n_qubits: int) -> "PauliObservable":
        return cls(n_qubits, ((1.0, "Z" * n_qubits),))

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([coeff for coeff, _ in self.terms])

    @property
    def pauli_indices(self) -> np.ndarray:
        """K x N integer array of Pauli indices (I=0, X=1, Y=2, Z=3)."""
        return np.array(
            [[PAULI_INDEX[c] for c in word] for _, word in self.terms], dtype=np.intp
        )

    def is_identity(self) -> bool:
        """True when every word is I...I, i.e. O = c * I."""
        return all(set(word) == {"I"} for _, word in self.terms)

    def label(self) -> str:
        parts = []
        for coeff, word in self.terms:
            parts.append(word if coeff == 1.0 else f"{coeff:g}*{word}")
        return "+".join(parts)

    def __str__(self) -> str:
        return self.label()


def _as_real(coeff) -> float:
    if isinstance(coeff, complex):
        if coeff.imag != 0:
            raise ObservableError(f"coefficient {coeff} is not real")
        coeff = coeff.real
    value = float(coeff)
    if not math.isfinite(value):
        raise ObservableError(f"coefficient {coeff} is not finite")
    return value
