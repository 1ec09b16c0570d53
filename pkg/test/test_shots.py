# -*- coding: utf-8 -*-
"""
测试测量数据集与文件格式：测量文件读写、格式错误定位、对偶文件持久化
"""

import numpy as np
import pytest

from src.core.errors import DatasetError
from src.core.frames import ProductDualSet, QubitDualParams
from src.core.sampler import (
    GENERATOR_ID,
    TfimParams,
    prepare_zero_state,
    sample_pauli6_shots,
    trotter_evolve,
)
from src.core.shots import ShotDataset, ShotFileManager

HEADER = (
    "#format=1\n#povm=pauli6\n#n_qubits=2\n#n_shots=3\n#seed=7\n"
    f"#generator={GENERATOR_ID}\n#state=zero\n"
)


def test_dataset_validation():
    with pytest.raises(DatasetError):
        ShotDataset(np.zeros((0, 2), dtype=np.uint8))
    with pytest.raises(DatasetError):
        ShotDataset(np.array([[0, 6]]))
    with pytest.raises(DatasetError):
        ShotDataset(np.zeros(5))
    data = ShotDataset(np.array([[0, 1], [2, 3], [4, 5]]))
    assert (data.n_shots, data.n_qubits) == (3, 2)
    assert not data.outcomes.flags.writeable


@pytest.mark.parametrize(
    "outcomes",
    [
        np.array([[256, 1]]),
        np.array([[-1, 0]]),
        np.array([[0.0, 2.7]]),
        np.array([[0, 1]], dtype=np.float64),
    ],
)
def test_dataset_rejects_wrapping_or_fractional_indices(outcomes):
    """越界或非整数的结果编号不能被截断成合法编号"""
    with pytest.raises(DatasetError):
        ShotDataset(outcomes)


def test_subset_keeps_provenance():
    data = ShotDataset(np.array([[0, 1], [2, 3], [4, 5]]), seed=3, state="zero")
    part = data.subset([2, 0])
    assert part.outcomes.tolist() == [[4, 5], [0, 1]]
    assert part.seed == 3 and part.state == "zero"


def test_encode_layout():
    files = ShotFileManager()
    data = ShotDataset(
        np.array([[0, 5], [1, 2], [4, 0]]), seed=7, generator=GENERATOR_ID, state="zero"
    )
    assert files.encode(data).decode("utf-8") == HEADER + "05\n12\n40\n"


def test_write_then_read_equals_sampled(tmp_path):
    """采样后写入再解析，得到相同的数据集"""
    state = trotter_evolve(prepare_zero_state(3), TfimParams(3, steps=2))
    data = sample_pauli6_shots(state, 500, seed=4)
    files = ShotFileManager()
    path = files.write_shot_file(str(tmp_path / "out" / "shots.txt"), data)
    loaded = files.read_shot_file(path)
    assert loaded == data
    assert loaded.state == "tfim:J=0.5236,h=1.0,dt=0.1,steps=2"
    assert files.get_file_info(path)["size"] == len(files.encode(data))


def test_bad_digit_names_line():
    with pytest.raises(DatasetError, match="line 9"):
        ShotFileManager().decode((HEADER + "05\n19\n40\n").encode())


def test_wrong_length_names_line():
    with pytest.raises(DatasetError, match="line 10"):
        ShotFileManager().decode((HEADER + "05\n12\n401\n").encode())


def test_count_mismatch():
    with pytest.raises(DatasetError, match="3 shots"):
        ShotFileManager().decode((HEADER + "05\n12\n").encode())


def test_missing_header_key():
    payload = HEADER.replace("#seed=7\n", "") + "05\n12\n40\n"
    with pytest.raises(DatasetError, match="seed"):
        ShotFileManager().decode(payload.encode())


def test_missing_file(tmp_path):
    with pytest.raises(DatasetError):
        ShotFileManager().read_shot_file(str(tmp_path / "absent.txt"))


def test_duals_file_round_trip(tmp_path, random_duals):
    files = ShotFileManager()
    duals = random_duals(3, seed=5)
    path = str(tmp_path / "duals.json")
    files.save_duals(path, duals, {"observable": "ZZZ"})
    loaded = files.load_duals(path)
    for q in range(3):
        assert np.allclose(loaded.per_qubit[q].duals.coords, duals.per_qubit[q].duals.coords)


def test_duals_file_rejects_bad_theta(tmp_path):
    files = ShotFileManager()
    path = str(tmp_path / "duals.json")
    duals = ProductDualSet.canonical_pauli6(1).with_params(0, QubitDualParams.zeros(2))
    files.save_duals(path, duals)
    text = open(path, encoding="utf-8").read().replace('"theta"', '"thetas"')
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    with pytest.raises(DatasetError):
        files.load_duals(path)


def test_format_file_size():
    files = ShotFileManager()
    assert files.format_file_size(0) == "0 B"
    assert files.format_file_size(1536) == "1.5 KB"
    assert files.format_file_size(3 * 1024**2) == "3.0 MB"
