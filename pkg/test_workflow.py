import logging
from unittest.mock import patch

import pytest

from app.core.errors import ConfigError
from app.core.experiment import load_experiment
from app.core.workflow import (
    cmd_coverage,
    cmd_mean_covered,
    cmd_optimize,
    cmd_reproduce,
    cmd_throughput,
    dump_cell_fixtures,
    load_cell_fixtures,
    run_reproduction_jobs,
)
from app.models.network import CellInstance
from app.models.results import CoverageEstimate, OptimizeSpec, OutputSpec, SweepSpec
from app.services.results_store import ResultsStore

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

FAKE_ESTIMATE = CoverageEstimate(estimate=0.5, trials=100, stderr=0.05, half_width=0.098)


def _config(tmp_path, mode="analytic", sweep=None, **output):
    config = load_experiment()
    return config.model_copy(update={
        "output": OutputSpec(path=str(tmp_path), mode=mode, **output),
        "sweep": sweep,
    })


def _read(summary):
    return ResultsStore.parse(open(summary["path"], encoding="utf-8").read())


def test_reproduce_is_deterministic(tmp_path):
    first = cmd_reproduce("fig2", _config(tmp_path / "one"))
    second = cmd_reproduce("fig2", _config(tmp_path / "two"))
    assert open(first["path"], "rb").read() == open(second["path"], "rb").read()
    assert first["path"].endswith("fig2.csv")
    assert first["plot_script"].endswith("fig2.gp")
    metadata, rows = _read(first)
    assert metadata["mode"] == "analytic"
    assert {row.metric for row in rows} == {"coverage_d50", "coverage_d150", "coverage_d250"}
    assert len(rows) == 3 * 19


def test_unknown_figure(tmp_path):
    with pytest.raises(ConfigError, match="fig9"):
        cmd_reproduce("fig9", _config(tmp_path))


def test_coverage_returns_curves(tmp_path):
    sweep = SweepSpec(param="distance", values=(40.0, 90.0, 300.0))
    summary = cmd_coverage(_config(tmp_path, sweep=sweep))
    [curve] = summary["curves"]
    assert curve.swept == "distance"
    assert [x for x, _ in curve.points] == [40.0, 90.0, 300.0]
    probabilities = [p for _, p in curve.points]
    assert probabilities == sorted(probabilities, reverse=True)


def test_coverage_curve_needs_increasing_values(tmp_path):
    sweep = SweepSpec(param="distance", values=(150.0, 50.0))
    with pytest.raises(ConfigError, match="coverage curve"):
        cmd_coverage(_config(tmp_path, sweep=sweep))


def test_coverage_with_simulation_and_bounds(tmp_path):
    config = _config(tmp_path, mode="both", bounds=True, sweep=SweepSpec(param="distance", values=(50.0, 100.0)))
    config = config.model_copy(update={"system": config.system.replace(tau_m=2)})
    with patch("app.core.workflow.MonteCarloSimulator") as MockSimulator:
        MockSimulator.return_value.estimate_coverage.return_value = FAKE_ESTIMATE
        summary = cmd_coverage(config)
    _, rows = _read(summary)
    main = [row for row in rows if row.metric == "coverage_tau2"]
    assert [row.sweep_value for row in main] == [50.0, 100.0]
    assert all(row.simulated == 0.5 and row.trials == 100 for row in main)
    lower = [row for row in rows if row.metric.endswith("_lower")]
    upper = [row for row in rows if row.metric.endswith("_upper")]
    assert len(lower) == len(upper) == 2
    for low, row, up in zip(lower, main, upper):
        assert low.analytic <= row.analytic <= up.analytic
    assert MockSimulator.return_value.estimate_coverage.call_count == 2


def test_mean_covered_variants(tmp_path):
    sweep = SweepSpec(param="tau_m", values=(1.0, 2.0), distances=(50.0,))
    summary = cmd_mean_covered(_config(tmp_path, sweep=sweep), variants=("static", "mobile"))
    _, rows = _read(summary)
    by_metric = {(row.metric, row.sweep_value): row.analytic for row in rows}
    assert set(m for m, _ in by_metric) == {"normalized_R50", "normalized_R50_mobile"}
    assert by_metric[("normalized_R50", 1.0)] == by_metric[("normalized_R50_mobile", 1.0)]
    assert all(0 < value <= 1 for value in by_metric.values())


def test_mean_covered_unknown_variant(tmp_path):
    with pytest.raises(ConfigError, match="turbo"):
        cmd_mean_covered(_config(tmp_path), variants=("turbo",))


def test_mean_covered_simulated_column_is_normalized(tmp_path):
    sweep = SweepSpec(param="tau_m", values=(1.0,), distances=(150.0,))
    config = _config(tmp_path, mode="sim", sweep=sweep)
    with patch("app.core.workflow.MonteCarloSimulator") as MockSimulator:
        MockSimulator.return_value.estimate_mean_covered.return_value = CoverageEstimate(
            estimate=45.0, trials=10, stderr=4.5, half_width=8.82
        )
        summary = cmd_mean_covered(config)
    _, rows = _read(summary)
    assert rows[0].analytic is None
    assert rows[0].simulated == pytest.approx(1.0)


def test_throughput_tradeoff_locus(tmp_path):
    sweep = SweepSpec(param="tau_m", values=(1.0, 2.0, 3.0), distances=(150.0,))
    summary = cmd_throughput(_config(tmp_path, sweep=sweep))
    _, rows = _read(summary)
    locus = [row for row in rows if row.metric == "xi_locus_R150"]
    assert len(locus) == 3
    assert all(row.sweep_param == "mean_covered" for row in locus)
    assert [row.sweep_value for row in locus] == sorted(row.sweep_value for row in locus)


def test_throughput_records_optimum(tmp_path):
    sweep = SweepSpec(param="detection_threshold", values=(0.5, 1.0, 4.0), db=True)
    summary = cmd_throughput(_config(tmp_path, sweep=sweep), taus=(1,))
    metadata, rows = _read(summary)
    assert "optimum_tau1_db" in metadata
    assert float(metadata["asymptotic_optimum"]) == pytest.approx(2.47, abs=0.05)
    assert [row.metric for row in rows] == ["xi_tau1"] * 3


def test_fixture_cells_solved(tmp_path):
    params = load_experiment().system
    cells = [CellInstance.from_params([80.0, 240.0, 600.0], params), CellInstance.from_params([], params)]
    fixture = tmp_path / "cells.json"
    fixture.write_bytes(dump_cell_fixtures(cells))
    assert load_cell_fixtures(str(fixture)) == cells
    summary = cmd_optimize(_config(tmp_path / "out"), fixture=str(fixture))
    _, rows = _read(summary)
    assert len(rows) == 6
    empty = {row.metric: row.analytic for row in rows if row.sweep_value == 1}
    assert empty == {"tau_star": 1.0, "assisted": 0.0, "achieved_reliability": 1.0}


def test_fixture_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_cell_fixtures(str(tmp_path / "missing.json"))
    broken = tmp_path / "broken.json"
    broken.write_text('[{"distances": [-1.0]}]', encoding="utf-8")
    with pytest.raises(ConfigError):
        load_cell_fixtures(str(broken))


def test_aggregated_policy_rows(tmp_path):
    config = _config(tmp_path).model_copy(update={
        "optimize": OptimizeSpec(realizations=1, extent=1500.0, max_distance=200.0, bin_width=50.0),
    })
    summary = cmd_optimize(config)
    metadata, rows = _read(summary)
    histogram = [row for row in rows if row.metric == "assist_frequency"]
    assert [row.sweep_value for row in histogram] == [0.0, 50.0, 100.0, 150.0, 200.0]
    assert any(row.metric == "tau_bar" for row in rows)
    assert metadata["realizations"] == "1"


def test_background_jobs_continue_after_failure(tmp_path):
    logger.info("Starting reproduction jobs (MOCKED)...")

    def fake_reproduce(figure, config=None):
        if figure == "fig3":
            raise ConfigError("simulated failure")
        return {"path": str(tmp_path / f"{figure}.csv")}

    with patch("app.core.workflow.cmd_reproduce", side_effect=fake_reproduce) as mock_reproduce:
        result = run_reproduction_jobs(["fig2", "fig3", "fig7"])

    assert result["done"] == ["fig2", "fig7"]
    assert result["failed"] == ["fig3"]
    assert mock_reproduce.call_count == 3
