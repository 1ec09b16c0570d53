# -*- coding: utf-8 -*-
"""
测试公共配置：把项目根目录加入 Python 路径，并关闭日志文件输出
"""

import os
import sys

# 必须在导入 src 之前设置，空值表示不写日志文件
os.environ["DUALOPT_LOG_DIR"] = ""

ROOT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, ROOT_DIR)

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from src.core.frames import ProductDualSet, QubitDualParams  # noqa: E402
from src.core.sampler import prepare_zero_state, sample_pauli6_shots  # noqa: E402


@pytest.fixture
def config_path(tmp_path):
    """不存在的 INI 路径，ConfigManager 会使用内置默认值"""
    return str(tmp_path / "config.ini")


@pytest.fixture
def zero_shots():
    """|0...0> 上的 Pauli-6 采样数据"""

    def make(n_qubits, n_shots, seed=0):
        return sample_pauli6_shots(prepare_zero_state(n_qubits), n_shots, seed)

    return make


@pytest.fixture
def random_duals():
    """每个量子比特随机自由参数的对偶集"""

    def make(n_qubits, seed=0, scale=1.0):
        rng = np.random.default_rng(seed)
        duals = ProductDualSet.canonical_pauli6(n_qubits)
        for q in range(n_qubits):
            theta = duals.params(q).theta + scale * rng.normal(size=(2, 4))
            duals = duals.with_params(q, QubitDualParams(theta))
        return duals

    return make
