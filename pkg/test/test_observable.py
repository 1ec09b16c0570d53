# -*- coding: utf-8 -*-
"""
测试泡利字符串可观测量的解析与校验
"""

import numpy as np
import pytest

from src.core.errors import ObservableError
from src.core.observable import PauliObservable


def test_parse_terms():
    obs = PauliObservable.parse("0.5*ZZI + XXI + -1*yyi")
    assert obs.n_qubits == 3
    assert obs.terms == ((0.5, "ZZI"), (1.0, "XXI"), (-1.0, "YYI"))
    assert obs.label() == "0.5*ZZI+XXI+-1*YYI"
    assert obs.pauli_indices.tolist() == [[3, 3, 0], [1, 1, 0], [2, 2, 0]]
    assert np.array_equal(obs.coefficients, [0.5, 1.0, -1.0])


def test_duplicate_words_merged():
    obs = PauliObservable.from_terms([(1.0, "ZZ"), (2.0, "XI"), (0.5, "ZZ")])
    assert obs.terms == ((1.5, "ZZ"), (2.0, "XI"))


def test_identity_detection():
    assert PauliObservable.parse("III").is_identity()
    assert PauliObservable.parse("2*II").is_identity()
    assert not PauliObservable.z_string(2).is_identity()


@pytest.mark.parametrize("text", ["ZA", "ZZ+Z", "", "abc*ZZ", "ZZ++XX"])
def test_malformed_observables(text):
    with pytest.raises(ObservableError):
        PauliObservable.parse(text)


def test_bad_coefficients():
    with pytest.raises(ObservableError):
        PauliObservable(1, ((1j, "Z"),))
    with pytest.raises(ObservableError):
        PauliObservable(1, ((float("inf"), "Z"),))
    assert PauliObservable(1, ((2 + 0j, "Z"),)).terms == ((2.0, "Z"),)
