import math
import time
from concurrent.futures import ThreadPoolExecutor
from unittest.mock import patch

import numpy as np
import pytest
from scipy.stats import spearmanr

from app.core.errors import InfeasibleError
from app.models.network import CellInstance, PolicyHistogram
from app.models.params import SystemParams
from app.services import analytic, optimizer
from app.services.optimizer import AssistOptimizer


@pytest.fixture(scope="module")
def shared():
    return AssistOptimizer(SystemParams.baseline())


def _cell(shared, distances, eta=0.9, budget=2):
    return CellInstance(distances=distances, budget=budget, eta=eta, params=shared.params)


def test_h_value_limits(shared):
    base = shared.covered(2)
    assert shared.h_value(300.0, 2, 0.0) == base
    assert shared.h_value(0.0, 2, 1.0) == pytest.approx(shared.n_max)
    assert base < shared.h_value(300.0, 2, 1.0) < shared.n_max
    assert shared.h_value(100.0, 2, 0.5) > shared.h_value(600.0, 2, 0.5)


def test_h_value_rejects_fractional_overflow(shared):
    with pytest.raises(ValueError):
        shared.h_value(100.0, 1, 1.5)


def test_covered_is_cached(shared):
    first = shared.covered(3)
    assert shared._covered[3] == first
    assert shared.covered(3) is first


def test_covered_cache_computed_once_across_threads(baseline):
    solver = AssistOptimizer(baseline)
    calls = []

    def slow_mean_covered(params):
        calls.append(params.tau_m)
        time.sleep(0.05)
        return analytic.mean_covered(params)

    with patch("app.services.optimizer.mean_covered", side_effect=slow_mean_covered):
        with ThreadPoolExecutor(max_workers=8) as pool:
            values = list(pool.map(solver.covered, [4] * 8))
    assert calls == [4]
    assert len(set(values)) == 1


def test_check_feasible_shape(shared):
    cell = _cell(shared, [100.0, 200.0])
    with pytest.raises(ValueError):
        shared.check_feasible(cell, 1, (1,))
    empty = _cell(shared, [])
    assert shared.check_feasible(empty, 1, ()).feasible


def test_check_feasible_respects_budget(shared):
    cell = _cell(shared, [100.0, 200.0, 300.0], eta=0.0, budget=1)
    assert shared.check_feasible(cell, 1, (1, 0, 0)).feasible
    assert not shared.check_feasible(cell, 1, (1, 1, 0)).feasible


def test_distances_sorted_on_construction(shared):
    cell = _cell(shared, [300.0, 50.0, 120.0])
    assert cell.distances == (50.0, 120.0, 300.0)


def test_find_tau_max_is_feasible(shared):
    cell = _cell(shared, [80.0, 250.0, 400.0, 900.0], eta=0.95)
    tau = shared.find_tau_max(cell)
    full = tuple(1 if i < 2 else 0 for i in range(cell.size))
    assert shared.check_feasible(cell, tau, full).feasible


def test_solution_is_minimal_prefix(shared):
    cell = _cell(shared, [60.0, 150.0, 420.0, 700.0], eta=0.95)
    solution = shared.solve_cell(cell)
    assert solution.feasible and solution.is_prefix()
    assert solution.assisted <= cell.budget
    if solution.tau_star > 1:
        full = (1, 1, 0, 0)
        assert not shared.check_feasible(cell, solution.tau_star - 1, full).feasible
    if solution.assisted > 0:
        shorter = tuple(1 if i < solution.assisted - 1 else 0 for i in range(cell.size))
        assert not shared.check_feasible(cell, solution.tau_star, shorter).feasible


def test_empty_cell_trivial(shared):
    solution = shared.solve_cell(_cell(shared, []))
    assert solution.tau_star == 1 and solution.assist == ()


def test_greedy_matches_exhaustive_search(shared):
    rng = np.random.default_rng(606)
    for _ in range(100):
        size = int(rng.integers(0, 9))
        cell = CellInstance(
            distances=rng.uniform(5.0, 800.0, size=size),
            budget=int(rng.integers(0, 4)),
            eta=float(rng.uniform(0.6, 0.95)),
            params=shared.params,
        )
        greedy = shared.solve_cell(cell)
        oracle = shared.solve_exhaustive(cell, greedy.tau_star)
        assert oracle is not None
        assert oracle.tau_star == greedy.tau_star
        assert oracle.assisted == greedy.assisted


def test_infeasible_cell_reports_best(baseline):
    params = baseline.replace(detection_threshold=10.0, cluster_radius=250.0, eta=0.999, budget=0)
    solver = AssistOptimizer(params, tau_cap=8)
    cell = CellInstance.from_params([100.0, 400.0], params)
    with pytest.raises(InfeasibleError) as caught:
        solver.solve_cell(cell)
    assert caught.value.tau_cap == 8
    assert 0 < caught.value.best_reliability < 0.999
    assert caught.value.exit_code == 4


def test_module_level_solver_uses_instance_params(baseline):
    cell = CellInstance.from_params([90.0, 300.0], baseline)
    assert optimizer.solve_cell(cell) == AssistOptimizer(baseline).solve_cell(cell)
    assert optimizer.find_tau_max(cell) >= optimizer.solve_cell(cell).tau_star


def test_relaxed_full_assistance_equals_assisted_mean(shared):
    result = shared.evaluate_relaxed(((0.0,), (1.0,)), 2)
    assert result.resource_usage == pytest.approx(1.0)
    expected = analytic.assisted_mean_covered(shared.params.replace(tau_m=2)) / shared.n_max
    assert result.reliability == pytest.approx(expected, rel=1e-6)


def test_relaxed_no_assistance(shared):
    result = shared.evaluate_relaxed(((0.0,), (0.0,)), 3)
    assert result.resource_usage == 0.0
    assert result.reliability == pytest.approx(shared.covered(3) / shared.n_max)


def test_relaxed_step_policy_at_median_distance(shared):
    median = math.sqrt(math.log(2.0) / (math.pi * shared.params.lambda_b))
    result = shared.evaluate_relaxed(((0.0, median), (1.0, 0.0)), 1)
    assert result.resource_usage == pytest.approx(0.5, rel=1e-9)
    assert result.usage_limit == pytest.approx(shared.params.budget / 5.0)


def test_relaxed_policy_validation(shared):
    with pytest.raises(ValueError):
        shared.evaluate_relaxed(((10.0,), (1.0,)), 1)
    with pytest.raises(ValueError):
        shared.evaluate_relaxed(((0.0, 5.0), (1.0,)), 1)
    with pytest.raises(ValueError):
        shared.evaluate_relaxed(((0.0,), (1.2,)), 1)


def test_relaxed_tau_falls_with_more_assistance(shared):
    without = shared.relaxed_tau(((0.0,), (0.0,)))
    full = shared.relaxed_tau(((0.0,), (1.0,)))
    assert without is not None and full is not None
    assert full <= without
    assert shared.evaluate_relaxed(((0.0,), (1.0,)), full).reliability >= shared.params.eta
    if full > 1:
        assert shared.evaluate_relaxed(((0.0,), (1.0,)), full - 1).reliability < shared.params.eta


def test_histogram_bins_and_merge():
    histogram = PolicyHistogram.empty(25.0, 100.0)
    assert histogram.edges == (0.0, 25.0, 50.0, 75.0, 100.0)
    assert histogram.bin_of(10.0) == 0
    assert histogram.bin_of(5000.0) == 4
    assert histogram.upper_edge(4) == math.inf
    first = histogram.record([10.0, 30.0, 5000.0], [1, 0, 0])
    second = histogram.record([12.0], [0])
    merged = first.merge(second)
    assert merged.counts == [2, 1, 0, 0, 1]
    assert merged.frequencies == [0.5, 0.0, None, None, 0.0]
    assert merged.policy_values() == [0.5, 0.0, 0.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        merged.merge(PolicyHistogram.empty(50.0, 100.0))


def test_sample_cells_assign_every_transmitter(shared):
    cells = shared.sample_cells(2000.0, np.random.default_rng(5))
    assert all(all(r > 0 for r in cell.distances) for cell in cells)
    assert sum(cell.size for cell in cells) > 0
    again = shared.sample_cells(2000.0, np.random.default_rng(5))
    assert [c.distances for c in cells] == [c.distances for c in again]


def test_aggregate_independent_of_threads(shared):
    single = shared.aggregate_policy(3, extent=1500.0, seed=11, threads=1)
    pooled = shared.aggregate_policy(3, extent=1500.0, seed=11, threads=3)
    assert single.histogram == pooled.histogram
    assert single.tau_bar == pooled.tau_bar
    assert single.cells + single.empty_cells + single.infeasible_cells > 0


@pytest.mark.slow
def test_assistance_concentrates_near_base_station(shared):
    aggregate = shared.aggregate_policy(50, seed=20140617, threads=4)
    pairs = [
        (edge, frequency)
        for edge, count, frequency in zip(aggregate.histogram.edges, aggregate.histogram.counts, aggregate.histogram.frequencies)
        if count >= 20 and frequency is not None
    ]
    correlation, _ = spearmanr([e for e, _ in pairs], [f for _, f in pairs])
    assert correlation <= -0.8
    assert aggregate.relaxed_tau is not None
