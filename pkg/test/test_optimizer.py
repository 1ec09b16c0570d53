# -*- coding: utf-8 -*-
"""
测试对偶优化：目标函数与梯度、单比特更新、扫描与过拟合保护、A/B 分割协议
"""

import math

import numpy as np
import pytest

from src.core.errors import ConfigError, DatasetError, OptimizationError
from src.core.estimation import (
    TraceTableCache,
    empirical_second_moment,
    exact_variance,
    mean_estimate,
    standard_error,
)
from src.core.frames import ProductDualSet, QubitDualParams
from src.core.observable import PauliObservable
from src.core.optimizer import (
    OptimizerConfig,
    QubitObjective,
    objective_and_gradient,
    optimize_qubit,
    split_estimate,
    split_estimate_batch,
    split_indices,
    sweep_optimize,
    sweep_optimize_traced,
)
from src.core.sampler import (
    TfimParams,
    exact_expectation,
    prepare_zero_state,
    product_outcome_distribution,
    product_state,
    sample_pauli6_shots,
    trotter_evolve,
)
from src.core.shots import ShotDataset

OPTIMAL_THETA = np.array([[0.5, -1.5, 0.0, 0.5], [0.5, 0.0, -1.5, 0.5]])
WORDS = "IXYZ"


def _random_instance(rng, n_qubits, n_shots, n_terms=3):
    data = ShotDataset(rng.integers(0, 6, size=(n_shots, n_qubits)))
    terms = [
        (float(rng.normal()), "".join(rng.choice(list(WORDS), size=n_qubits)))
        for _ in range(n_terms)
    ]
    return data, PauliObservable.from_terms(terms)


def _zero_distribution(n):
    return product_outcome_distribution([[1.0, 0.0]] * n)


def test_config_validation():
    with pytest.raises(ConfigError):
        OptimizerConfig(overfit_ratio=1.0)
    with pytest.raises(ConfigError):
        OptimizerConfig(inner_solver="newton")
    with pytest.raises(ConfigError):
        OptimizerConfig(max_inner_iters=0)
    with pytest.raises(ConfigError):
        OptimizerConfig(grad_tol=0.0)
    assert OptimizerConfig().n_sweeps == 20


def test_gradient_matches_finite_differences(random_duals):
    """50 个随机实例上解析梯度与中心差分的相对误差 < 1e-6"""
    rng = np.random.default_rng(2024)
    step = 1e-5
    for instance in range(50):
        data, obs = _random_instance(rng, 3, 1000)
        duals = random_duals(3, seed=instance, scale=0.5)
        qubit = int(rng.integers(0, 3))
        _, gradient = objective_and_gradient(data, obs, duals, qubit)

        theta = duals.params(qubit).flat()
        numeric = np.zeros_like(theta)
        for k in range(theta.size):
            shift = np.zeros_like(theta)
            shift[k] = step
            plus = duals.with_params(qubit, QubitDualParams.from_flat(theta + shift, 2))
            minus = duals.with_params(qubit, QubitDualParams.from_flat(theta - shift, 2))
            numeric[k] = (
                empirical_second_moment(data, obs, plus)
                - empirical_second_moment(data, obs, minus)
            ) / (2 * step)
        scale = max(np.linalg.norm(gradient), 1e-12)
        assert np.linalg.norm(gradient - numeric) / scale < 1e-6


def test_objective_matches_second_moment(random_duals):
    rng = np.random.default_rng(3)
    data, obs = _random_instance(rng, 2, 400)
    duals = random_duals(2, seed=1)
    value, gradient = objective_and_gradient(data, obs, duals, 1)
    assert value == pytest.approx(empirical_second_moment(data, obs, duals), rel=1e-12)
    assert gradient.shape == (8,)


def test_objective_rejects_bad_qubit(zero_shots):
    data = zero_shots(2, 10)
    with pytest.raises(OptimizationError):
        objective_and_gradient(
            data, PauliObservable.z_string(2), ProductDualSet.canonical_pauli6(2), 2
        )


def test_hessian_positive_semidefinite(random_duals):
    """单比特目标是凸二次函数"""
    rng = np.random.default_rng(8)
    for instance in range(20):
        data, obs = _random_instance(rng, 3, 300)
        duals = random_duals(3, seed=instance)
        objective = QubitObjective(TraceTableCache(data, obs, duals), duals, instance % 3)
        eigenvalues = np.linalg.eigvalsh(objective.hessian())
        assert eigenvalues.min() >= -1e-10 * max(1.0, eigenvalues.max())


def test_zero_objective_minimizer_single_qubit(zero_shots):
    """|0> 数据中没有结果 1 时，最优对偶使每次权重恰为 1"""
    data = zero_shots(1, 20_000, seed=3)
    assert 1 not in data.outcomes
    obs = PauliObservable.z_string(1)
    canonical = ProductDualSet.canonical_pauli6(1)
    optimal = canonical.with_params(0, QubitDualParams(OPTIMAL_THETA))
    value, _ = objective_and_gradient(data, obs, optimal, 0)
    assert value == pytest.approx(1.0, abs=1e-12)


def test_optimize_qubit_single_qubit_zero_state(zero_shots):
    data = zero_shots(1, 100_000, seed=4)
    obs = PauliObservable.z_string(1)
    canonical = ProductDualSet.canonical_pauli6(1)
    before = empirical_second_moment(data, obs, canonical)
    optimized = optimize_qubit(data, obs, canonical, 0, OptimizerConfig())
    after = empirical_second_moment(data, obs, optimized)
    mean = mean_estimate(data, obs, optimized)
    assert before > 2.5
    assert after <= 1.0 + 1e-9
    assert after - mean * mean < 1e-4
    assert exact_variance(_zero_distribution(1), obs, optimized) < 1e-3
    assert optimized.duality_residual() < 1e-10


def test_optimize_qubit_monotone(random_duals):
    """100 个随机实例上目标函数不增"""
    rng = np.random.default_rng(77)
    cfg = OptimizerConfig()
    for instance in range(100):
        data, obs = _random_instance(rng, 2, 300)
        duals = random_duals(2, seed=instance)
        qubit = instance % 2
        before = empirical_second_moment(data, obs, duals)
        optimized = optimize_qubit(data, obs, duals, qubit, cfg)
        after = empirical_second_moment(data, obs, optimized)
        assert after <= before * (1 + 1e-12) + 1e-12


def test_lbfgs_and_lstsq_agree(random_duals):
    rng = np.random.default_rng(12)
    for instance in range(10):
        data, obs = _random_instance(rng, 3, 800)
        duals = random_duals(3, seed=instance)
        lbfgs = optimize_qubit(data, obs, duals, 1, OptimizerConfig(inner_solver="lbfgs"))
        lstsq = optimize_qubit(data, obs, duals, 1, OptimizerConfig(inner_solver="lstsq"))
        assert empirical_second_moment(data, obs, lbfgs) == pytest.approx(
            empirical_second_moment(data, obs, lstsq), rel=1e-6
        )


def test_already_optimal_returned_unchanged(zero_shots):
    data = zero_shots(2, 500, seed=1)
    obs = PauliObservable.z_string(2)
    cfg = OptimizerConfig(inner_solver="lstsq", grad_tol=1e-6)
    first = optimize_qubit(data, obs, ProductDualSet.canonical_pauli6(2), 0, cfg)
    assert optimize_qubit(data, obs, first, 0, cfg) is first


def test_identity_observable_short_circuits(zero_shots):
    """O = c I 时直接返回初始对偶"""
    data = zero_shots(2, 200, seed=2)
    obs = PauliObservable.parse("2*II")
    init = ProductDualSet.canonical_pauli6(2)
    cfg = OptimizerConfig()
    assert optimize_qubit(data, obs, init, 0, cfg) is init
    assert sweep_optimize(data, data.subset(range(100)), obs, init, cfg) is init


def test_zero_sweeps_returns_init(zero_shots):
    data = zero_shots(2, 200, seed=2)
    init = ProductDualSet.canonical_pauli6(2)
    duals, trace = sweep_optimize_traced(
        data, data, PauliObservable.z_string(2), init, OptimizerConfig(n_sweeps=0)
    )
    assert duals is init
    assert len(trace.records) == 1


def test_initial_record_reports_duality_residual(zero_shots, random_duals):
    """第 0 次扫描记录初始对偶的对偶残差"""
    data = zero_shots(2, 200, seed=2)
    init = random_duals(2, seed=3, scale=5.0)
    _, trace = sweep_optimize_traced(
        data, data, PauliObservable.z_string(2), init, OptimizerConfig(n_sweeps=0)
    )
    assert trace.records[0].duality_residual == init.duality_residual()
    assert trace.records[0].duality_residual < 1e-10


def test_sweeps_reduce_variance_four_qubits(zero_shots):
    """|0>^4、Z^4：优化后精确方差不超过规范对偶 (80) 的 5%"""
    train = zero_shots(4, 100_000, seed=21)
    validation = zero_shots(4, 100_000, seed=22)
    obs = PauliObservable.z_string(4)
    init = ProductDualSet.canonical_pauli6(4)
    duals, trace = sweep_optimize_traced(train, validation, obs, init, OptimizerConfig())
    dist = _zero_distribution(4)
    assert exact_variance(dist, obs, init) == pytest.approx(80.0)
    assert exact_variance(dist, obs, duals) <= 0.05 * 80.0
    assert all(record.duality_residual < 1e-10 for record in trace.records)
    train_objectives = [record.train_objective for record in trace.records]
    for before, after in zip(train_objectives, train_objectives[1:]):
        assert after <= before * (1 + 1e-9) + 1e-12


def test_overfitting_guard_on_tiny_training_set(zero_shots):
    """极小训练集：返回的对偶在验证集上不差于初始对偶"""
    obs = PauliObservable.z_string(4)
    init = ProductDualSet.canonical_pauli6(4)
    for seed in range(5):
        train = zero_shots(4, 50, seed=100 + seed)
        validation = zero_shots(4, 2000, seed=200 + seed)
        duals, trace = sweep_optimize_traced(train, validation, obs, init, OptimizerConfig())
        assert empirical_second_moment(validation, obs, duals) <= empirical_second_moment(
            validation, obs, init
        ) * (1 + 1e-12)
        best = min(record.validation_objective for record in trace.records)
        assert trace.records[trace.best_sweep].validation_objective == best


def test_split_indices():
    index_a, index_b = split_indices(11, seed=5)
    assert len(index_a) == 6 and len(index_b) == 5
    assert np.intersect1d(index_a, index_b).size == 0
    assert sorted(np.concatenate([index_a, index_b]).tolist()) == list(range(11))
    again_a, _ = split_indices(11, seed=5)
    assert np.array_equal(index_a, again_a)


def test_split_needs_four_shots(zero_shots):
    with pytest.raises(DatasetError):
        split_estimate(zero_shots(1, 3), PauliObservable.z_string(1), OptimizerConfig())


def test_split_without_optimization_matches_canonical(zero_shots):
    """n_sweeps=0：合并均值等于全数据规范均值"""
    data = zero_shots(2, 2000, seed=9)
    obs = PauliObservable.z_string(2)
    result = split_estimate(data, obs, OptimizerConfig(n_sweeps=0))
    canonical_mean = mean_estimate(data, obs, ProductDualSet.canonical_pauli6(2))
    assert result.combined.mean == pytest.approx(canonical_mean, abs=1e-12)
    assert result.selection == {"AB": "canonical", "BA": "canonical"}
    assert result.combined.mean == pytest.approx(
        (result.report_AB.mean + result.report_BA.mean) / 2
    )


def test_selection_falls_back_to_canonical():
    """训练集与估计集分布差异很大时选择规范对偶"""
    zero = sample_pauli6_shots(prepare_zero_state(1), 2000, seed=1)
    one = sample_pauli6_shots(product_state([[0.0, 1.0]]), 2000, seed=2)
    data = ShotDataset(np.vstack([zero.outcomes, one.outcomes]))
    split = (np.arange(2000), np.arange(2000, 4000))
    result = split_estimate(data, PauliObservable.z_string(1), OptimizerConfig(), split=split)
    assert result.selection == {"AB": "canonical", "BA": "canonical"}
    for name in ("AB", "BA"):
        selected = result.report_AB if name == "AB" else result.report_BA
        assert selected.std_error <= result.canonical_reports[name].std_error


def test_split_estimate_zero_state_end_to_end(zero_shots):
    """|0>^4、Z^4、S=2e5：合并 sigma 小于规范 sigma 的十分之一"""
    data = zero_shots(4, 200_000, seed=31)
    obs = PauliObservable.z_string(4)
    canonical = standard_error(data, obs, ProductDualSet.canonical_pauli6(4))
    result = split_estimate(data, obs, OptimizerConfig(), truth=1.0)
    combined = result.combined
    assert combined.std_error < 0.1 * canonical.std_error
    assert abs(combined.mean - 1.0) < 5 * combined.std_error + 1e-6
    assert combined.abs_error == pytest.approx(abs(combined.mean - 1.0))
    dist = _zero_distribution(4)
    assert exact_variance(dist, obs, result.chosen_duals_A) <= 0.05 * 80.0
    assert combined.std_error == pytest.approx(
        math.sqrt(result.report_AB.std_error**2 + result.report_BA.std_error**2) / 2
    )
    document = result.to_dict()
    assert [d["direction"] for d in document["directions"]] == ["AB", "BA"]


def test_batch_matches_individual_runs(zero_shots):
    data = zero_shots(2, 3000, seed=10)
    observables = [PauliObservable.z_string(2), PauliObservable.parse("ZI+0.5*IX")]
    cfg = OptimizerConfig(n_sweeps=3)
    batch = split_estimate_batch(data, observables, cfg, n_workers=2)
    for obs, result in zip(observables, batch):
        single = split_estimate(data, obs, cfg)
        assert result.combined.mean == single.combined.mean
        assert result.combined.std_error == single.combined.std_error


@pytest.mark.slow
def test_combined_mean_unbiased_over_seeds():
    """200 个种子：合并均值相对精确值的 z 分数 |z| < 4"""
    state = trotter_evolve(prepare_zero_state(3), TfimParams(3, steps=1))
    obs = PauliObservable.z_string(3)
    truth = exact_expectation(state, obs)
    means = []
    for seed in range(200):
        data = sample_pauli6_shots(state, 10_000, seed=seed)
        means.append(split_estimate(data, obs, OptimizerConfig(rng_seed=seed)).combined.mean)
    means = np.array(means)
    z = (means.mean() - truth) / (means.std(ddof=1) / math.sqrt(len(means)))
    assert abs(z) < 4


@pytest.mark.slow
def test_trotter_scan_reduced_scale():
    """N=6、Trotter 步 0-4、每步 2e5 次测量"""
    obs = PauliObservable.z_string(6)
    canonical_duals = ProductDualSet.canonical_pauli6(6)
    for step in range(5):
        state = trotter_evolve(prepare_zero_state(6), TfimParams(6, steps=step))
        data = sample_pauli6_shots(state, 200_000, seed=1000 + step)
        canonical = standard_error(data, obs, canonical_duals)
        result = split_estimate(data, obs, OptimizerConfig())
        for name in ("AB", "BA"):
            selected = result.report_AB if name == "AB" else result.report_BA
            assert selected.std_error <= result.canonical_reports[name].std_error
        if step == 0:
            assert result.combined.std_error < 1e-2
            assert canonical.std_error == pytest.approx(math.sqrt(728 / 200_000), rel=0.2)
