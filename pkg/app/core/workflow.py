import logging
import math
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import TypeAdapter, ValidationError

from app.core.config import settings
from app.core.errors import ConfigError
from app.core.experiment import load_experiment
from app.core.units import db_to_linear
from app.models.network import CellInstance
from app.models.params import SystemParams
from app.models.results import CoverageCurve, ExperimentConfig, ResultRow, SweepSpec
from app.services import analytic
from app.services.optimizer import AssistOptimizer
from app.services.results_store import ResultsStore, params_hash
from app.services.simulator import MonteCarloSimulator

logger = logging.getLogger(__name__)

FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8")
FIGURE_RADII = (50.0, 150.0, 250.0)
CELL_FIXTURES = TypeAdapter(List[CellInstance])


def _db_sweep(start: float, stop: float, step: float = 1.0) -> SweepSpec:
    count = int(round((stop - start) / step)) + 1
    return SweepSpec(
        param="detection_threshold",
        values=tuple(db_to_linear(start + step * i) for i in range(count)),
        db=True,
    )


def _tau_sweep(top: int, radii: Sequence[float] = FIGURE_RADII) -> SweepSpec:
    return SweepSpec(param="tau_m", values=tuple(float(t) for t in range(1, top + 1)), distances=tuple(radii))


def _apply(params: SystemParams, name: str, value: float) -> SystemParams:
    if name == "tau_m":
        return params.replace(tau_m=int(round(value)))
    if name == "distance":
        return params
    return params.replace(**{name: value})


def _wants(config: ExperimentConfig) -> Tuple[bool, bool]:
    mode = config.output.mode
    return mode in ("analytic", "both"), mode in ("sim", "both")


def _store(config: ExperimentConfig, default_name: str) -> Tuple[ResultsStore, str]:
    target = config.output.path
    if target and target.endswith(".csv"):
        path = Path(target)
        return ResultsStore(str(path.parent) if str(path.parent) else "."), path.name
    return ResultsStore(target), default_name


def _metadata(config: ExperimentConfig, **notes) -> Dict[str, object]:
    return {
        "seed": config.sim.rng_seed,
        "trials": config.sim.trials,
        "mode": config.output.mode,
        "params_hash": params_hash(config.system),
        **notes,
    }


def _row(sweep: SweepSpec, value: float, metric: str, **columns) -> ResultRow:
    return ResultRow(sweep_param=sweep.label, sweep_value=sweep.display(value), metric=metric, **columns)


def _finish(config, rows, name, started, plot=None, **notes) -> Dict[str, object]:
    store, filename = _store(config, name)
    path = store.write_csv(filename, rows, _metadata(config, **notes))
    script = store.write_plot_script(path, **plot) if plot else None
    elapsed = time.perf_counter() - started
    logger.info(f"{name} complete. Rows: {len(rows)}, Elapsed: {elapsed:.1f}s, Output: {path}")
    return {"path": str(path), "plot_script": str(script) if script else None, "rows": len(rows)}


def cmd_coverage(config: ExperimentConfig, name: str = "coverage") -> Dict[str, object]:
    """p(y) against T (one series per link length) or against the link length."""
    started = time.perf_counter()
    logger.info("Starting coverage sweep...")
    sweep = config.sweep or _db_sweep(-6.0, 12.0)
    want_analytic, want_sim = _wants(config)
    tau = config.system.tau_m
    series = [None] if sweep.param == "distance" else list(sweep.distances)

    rows: List[ResultRow] = []
    metrics = []
    curves: List[CoverageCurve] = []
    for distance in series:
        metric = f"coverage_tau{tau}" if distance is None else f"coverage_d{distance:g}"
        metrics.append(metric)
        points = []
        for value in sweep.values:
            params = _apply(config.system, sweep.param, value)
            d = value if distance is None else distance
            columns = {}
            if want_analytic:
                columns["analytic"] = analytic.coverage_probability(d, params)
                points.append((sweep.display(value), columns["analytic"]))
            if want_sim:
                estimate = MonteCarloSimulator(params, config.sim).estimate_coverage(d)
                columns.update(simulated=estimate.estimate, stderr=estimate.stderr, trials=estimate.trials)
            rows.append(_row(sweep, value, metric, **columns))
            if config.output.bounds and want_analytic and tau >= 2:
                lower, upper = analytic.bonferroni_bounds(d, params, 1)
                rows.append(_row(sweep, value, f"{metric}_lower", analytic=lower))
                rows.append(_row(sweep, value, f"{metric}_upper", analytic=upper))
        if points:
            curves.append(_curve(sweep, config.system, points))

    plot = dict(metrics=metrics, title="Coverage probability", xlabel=sweep.label, ylabel="p(y)")
    summary = _finish(config, rows, name, started, plot=plot, tau_m=tau)
    summary["curves"] = curves
    return summary


def _curve(sweep: SweepSpec, params: SystemParams, points: List[Tuple[float, float]]) -> CoverageCurve:
    try:
        return CoverageCurve(swept=sweep.label, params=params, points=points)
    except ValidationError as e:
        raise ConfigError(f"[sweep] {sweep.param} values do not form a coverage curve: {e.errors()[0]['msg']}") from e


VARIANTS = ("static", "mobile", "assisted")


def cmd_mean_covered(
    config: ExperimentConfig,
    variants: Sequence[str] = ("static",),
    name: str = "mean_covered",
) -> Dict[str, object]:
    """E°[N]/(λ_r·π·R²) against τ_m, one series per cluster radius and variant."""
    unknown = set(variants) - set(VARIANTS)
    if unknown:
        raise ConfigError(f"unknown mean-covered variant(s): {', '.join(sorted(unknown))}")
    started = time.perf_counter()
    logger.info(f"Starting mean-covered sweep ({', '.join(variants)})...")
    sweep = config.sweep or _tau_sweep(8)
    want_analytic, want_sim = _wants(config)

    rows: List[ResultRow] = []
    metrics = []
    for radius in sweep.distances:
        for variant in variants:
            metric = f"normalized_R{radius:g}" + ("" if variant == "static" else f"_{variant}")
            metrics.append(metric)
            sim_config = config.sim.model_copy(update={
                "mobility": "high-mobility" if variant == "mobile" else "static",
                "assist": "nearest-bs" if variant == "assisted" else "none",
            })
            for value in sweep.values:
                params = _apply(config.system.replace(cluster_radius=radius), sweep.param, value)
                columns = {}
                if want_analytic:
                    if variant == "assisted":
                        covered = analytic.assisted_mean_covered(params)
                    else:
                        covered = analytic.mean_covered(params, mobile=variant == "mobile")
                    columns["analytic"] = covered / params.n_max
                if want_sim:
                    estimate = MonteCarloSimulator(params, sim_config).estimate_mean_covered().scaled(1.0 / params.n_max)
                    columns.update(simulated=estimate.estimate, stderr=estimate.stderr, trials=estimate.trials)
                rows.append(_row(sweep, value, metric, **columns))

    plot = dict(metrics=metrics, title="Normalized mean covered receivers", xlabel=sweep.label, ylabel="E[N] / N_max")
    return _finish(config, rows, name, started, plot=plot, radii=" ".join(f"{r:g}" for r in sweep.distances))


def _simulated_throughput(params: SystemParams, config: ExperimentConfig) -> Dict[str, object]:
    rate = math.log1p(params.detection_threshold) / params.tau_m
    if config.output.unit == "bits":
        rate /= math.log(2.0)
    estimate = MonteCarloSimulator(params, config.sim).estimate_mean_covered().scaled(rate)
    return dict(simulated=estimate.estimate, stderr=estimate.stderr, trials=estimate.trials)


def cmd_throughput(
    config: ExperimentConfig,
    taus: Sequence[int] = (1, 2, 4),
    name: str = "throughput",
) -> Dict[str, object]:
    """ξ against T per τ_m, or the (E°[N], ξ) tradeoff locus when the sweep runs over τ_m."""
    started = time.perf_counter()
    want_analytic, want_sim = _wants(config)
    unit = config.output.unit
    rows: List[ResultRow] = []

    if config.sweep is not None and config.sweep.param == "tau_m":
        sweep = config.sweep
        logger.info("Starting efficiency/reliability tradeoff sweep...")
        metrics = []
        for radius in sweep.distances:
            base = config.system.replace(cluster_radius=radius)
            taus_here = [int(round(v)) for v in sweep.values]
            for tau, covered, xi in analytic.tradeoff_locus(base, taus_here):
                if unit == "bits":
                    xi /= math.log(2.0)
                rows.append(_row(sweep, tau, f"mean_covered_R{radius:g}", analytic=covered))
                rows.append(_row(sweep, tau, f"xi_R{radius:g}", analytic=xi))
                rows.append(ResultRow(sweep_param="mean_covered", sweep_value=covered, metric=f"xi_locus_R{radius:g}", analytic=xi))
            metrics.append(f"xi_locus_R{radius:g}")
        plot = dict(metrics=metrics, title="Throughput against reliability", xlabel="E[N]", ylabel=f"xi ({unit})")
        return _finish(config, rows, name, started, plot=plot, unit=unit)

    sweep = config.sweep or _db_sweep(-10.0, 25.0)
    logger.info(f"Starting throughput sweep for tau_m in {list(taus)}...")
    notes: Dict[str, object] = {"unit": unit}
    metrics = []
    for tau in taus:
        metric = f"xi_tau{tau}"
        metrics.append(metric)
        for value in sweep.values:
            params = _apply(config.system.replace(tau_m=tau), sweep.param, value)
            columns = {}
            if want_analytic:
                columns["analytic"] = analytic.throughput(params, unit=unit).value
            if want_sim:
                columns.update(_simulated_throughput(params, config))
            rows.append(_row(sweep, value, metric, **columns))
        if want_analytic and sweep.param == "detection_threshold":
            optimum = analytic.optimal_rate_general(config.system.replace(tau_m=tau))
            notes[f"optimum_tau{tau}_db"] = f"{optimum.threshold_db:.4f}"
            logger.info(f"tau_m={tau}: throughput peaks at {optimum.threshold_db:.2f} dB (xi={optimum.throughput:.4g})")
    asymptotic = analytic.optimal_rate_asymptotic(config.system.alpha)
    notes["asymptotic_optimum"] = repr(asymptotic)
    logger.info(f"Dense-network optimum for alpha={config.system.alpha:g}: T*={asymptotic:.6f}")
    plot = dict(metrics=metrics, title="Multicast throughput", xlabel=sweep.label, ylabel=f"xi ({unit})")
    return _finish(config, rows, name, started, plot=plot, **notes)


def load_cell_fixtures(path: str) -> List[CellInstance]:
    try:
        return CELL_FIXTURES.validate_json(Path(path).read_bytes())
    except FileNotFoundError as e:
        raise ConfigError(f"fixture file not found: {path}") from e
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


def dump_cell_fixtures(cells: Sequence[CellInstance]) -> bytes:
    return CELL_FIXTURES.dump_json(list(cells), indent=2)


def cmd_optimize(
    config: ExperimentConfig,
    fixture: Optional[str] = None,
    name: str = "optimize",
) -> Dict[str, object]:
    """Per-cell solutions for a fixture file, or the aggregated assistance histogram over sampled networks."""
    started = time.perf_counter()
    optimizer = AssistOptimizer(config.system)
    rows: List[ResultRow] = []

    if fixture:
        cells = load_cell_fixtures(fixture)
        logger.info(f"Solving {len(cells)} fixture cells from {fixture}...")
        for index, cell in enumerate(cells):
            solution = AssistOptimizer(cell.params).solve_cell(cell)
            for metric, value in (
                ("tau_star", solution.tau_star),
                ("assisted", solution.assisted),
                ("achieved_reliability", solution.achieved_reliability),
            ):
                rows.append(ResultRow(sweep_param="cell", sweep_value=index, metric=metric, analytic=float(value)))
        return _finish(config, rows, name, started, cells=len(cells))

    spec = config.optimize
    logger.info(f"Aggregating assistance policy over {spec.realizations} networks...")
    aggregate = optimizer.aggregate_policy(
        spec.realizations,
        bin_width=spec.bin_width,
        extent=spec.extent,
        max_distance=spec.max_distance,
        seed=config.sim.rng_seed,
        threads=config.sim.threads,
    )
    histogram = aggregate.histogram
    for edge, count, frequency in zip(histogram.edges, histogram.counts, histogram.frequencies):
        rows.append(ResultRow(
            sweep_param="bs_distance",
            sweep_value=edge,
            metric="assist_frequency",
            simulated=math.nan if frequency is None else frequency,
            trials=count,
        ))
    rows.append(ResultRow(sweep_param="eta", sweep_value=config.system.eta, metric="tau_bar", simulated=aggregate.tau_bar, trials=aggregate.cells))
    if aggregate.relaxed_tau is not None:
        relaxed = optimizer.evaluate_relaxed(histogram, aggregate.relaxed_tau)
        rows.append(ResultRow(sweep_param="eta", sweep_value=config.system.eta, metric="relaxed_tau", analytic=float(aggregate.relaxed_tau)))
        rows.append(ResultRow(sweep_param="eta", sweep_value=config.system.eta, metric="relaxed_usage", analytic=relaxed.resource_usage))
    plot = dict(
        metrics=["assist_frequency"],
        title="Assistance frequency against BS distance",
        xlabel="distance to nearest BS (m)",
        ylabel="assist frequency",
        y_column="simulated",
    )
    return _finish(
        config, rows, name, started, plot=plot,
        realizations=spec.realizations, bin_width=spec.bin_width, extent=spec.extent,
        empty_cells=aggregate.empty_cells, infeasible_cells=aggregate.infeasible_cells,
    )


def _figure_config(config: ExperimentConfig, figure: str) -> ExperimentConfig:
    if figure == "fig2":
        return config.model_copy(update={"sweep": config.sweep or _db_sweep(-6.0, 12.0)})
    if figure in ("fig3", "fig4", "fig5"):
        return config.model_copy(update={"sweep": config.sweep or _tau_sweep(8)})
    if figure == "fig6":
        return config.model_copy(update={"system": config.system.replace(eta=0.95, budget=2)})
    if figure == "fig7":
        return config.model_copy(update={
            "system": config.system.replace(cluster_radius=150.0),
            "sweep": config.sweep or _db_sweep(-10.0, 25.0),
        })
    return config.model_copy(update={"sweep": config.sweep or _tau_sweep(16)})


def cmd_reproduce(figure: str, config: Optional[ExperimentConfig] = None) -> Dict[str, object]:
    """Run the sweep behind one figure with baseline defaults, writing `<figure>.csv` and `<figure>.gp`."""
    if figure not in FIGURES:
        raise ConfigError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")
    config = _figure_config(config or load_experiment(), figure)
    logger.info(f"Reproducing {figure} (seed {config.sim.rng_seed}, mode {config.output.mode})")
    if figure == "fig2":
        return cmd_coverage(config, name=figure)
    if figure == "fig3":
        return cmd_mean_covered(config, variants=("static",), name=figure)
    if figure == "fig4":
        return cmd_mean_covered(config, variants=("static", "mobile"), name=figure)
    if figure == "fig5":
        return cmd_mean_covered(config, variants=("static", "assisted"), name=figure)
    if figure == "fig6":
        return cmd_optimize(config, name=figure)
    if figure == "fig7":
        return cmd_throughput(config, taus=(1, 2, 4), name=figure)
    return cmd_throughput(config, name=figure)


def run_reproduction_jobs(figures: Sequence[str], config: Optional[ExperimentConfig] = None) -> Dict[str, object]:
    """Background entry point: one figure failing is logged and the rest still run.

    Plain def: Starlette runs sync background tasks on its threadpool.
    """
    done, failed = [], []
    for figure in figures:
        try:
            cmd_reproduce(figure, config)
            done.append(figure)
        except Exception as e:
            logger.error(f"Error reproducing {figure}: {e}")
            failed.append(figure)
    logger.info(f"Reproduction jobs complete. Done: {done}, Failed: {failed}")
    return {"done": done, "failed": failed, "output_dir": settings.OUTPUT_DIR}
