"""TOML experiment files: [system], [sim], [sweep], [output] and [optimize] sections."""
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from app.core.errors import ConfigError
from app.core.units import db_to_linear, dbm_to_watts, noise_power_watts
from app.models.params import SimConfig, SystemParams
from app.models.params import BASELINE_BANDWIDTH_HZ, BASELINE_NOISE_FIGURE_DB, BASELINE_NOISE_PSD_DBM_HZ
from app.models.results import ExperimentConfig, OptimizeSpec, OutputSpec, SweepSpec

logger = logging.getLogger(__name__)

SECTIONS = ("system", "sim", "sweep", "output", "optimize")
NOISE_KEYS = ("noise_psd_dbm_hz", "noise_figure_db", "bandwidth_hz")
SWEEP_KEYS = ("param", "values", "start", "stop", "step", "db", "distances")


def _unknown(section: str, keys) -> None:
    if keys:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(sorted(keys))}")


def _describe(section: str, error: ValidationError) -> str:
    return "; ".join(f"[{section}] {'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in error.errors())


def _validated(section: str, model, fields: Dict[str, Any]):
    _unknown(section, set(fields) - set(model.model_fields))
    try:
        return model(**fields)
    except ValidationError as e:
        raise ConfigError(_describe(section, e)) from e


def _system(raw: Dict[str, Any]) -> SystemParams:
    raw = dict(raw)
    if "detection_threshold_db" in raw:
        raw["detection_threshold"] = db_to_linear(raw.pop("detection_threshold_db"))
    for power in ("p_bs", "p_d2d"):
        if f"{power}_dbm" in raw:
            raw[power] = dbm_to_watts(raw.pop(f"{power}_dbm"))
    noise = {key: raw.pop(key) for key in NOISE_KEYS if key in raw}
    if noise:
        if "noise_power" in raw:
            raise ConfigError("[system] give either noise_power or the noise_psd/figure/bandwidth keys, not both")
        raw["noise_power"] = noise_power_watts(
            noise.get("noise_psd_dbm_hz", BASELINE_NOISE_PSD_DBM_HZ),
            noise.get("noise_figure_db", BASELINE_NOISE_FIGURE_DB),
            noise.get("bandwidth_hz", BASELINE_BANDWIDTH_HZ),
        )
    _unknown("system", set(raw) - set(SystemParams.model_fields))
    try:
        return SystemParams.baseline(**raw)
    except ValidationError as e:
        raise ConfigError(_describe("system", e)) from e


def _numbers(key: str, raw: Any) -> List[float]:
    try:
        return [float(v) for v in raw]
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[sweep] {key} must be numeric: {raw!r}") from e


def _sweep(raw: Dict[str, Any]) -> SweepSpec:
    _unknown("sweep", set(raw) - set(SWEEP_KEYS))
    if "param" not in raw:
        raise ConfigError("[sweep] needs a 'param' key")
    if "values" in raw:
        values = _numbers("values", raw["values"])
    elif {"start", "stop", "step"} <= set(raw):
        start, stop, step = _numbers("start/stop/step", [raw["start"], raw["stop"], raw["step"]])
        if step <= 0 or stop < start:
            raise ConfigError("[sweep] needs step > 0 and stop >= start")
        count = int(round((stop - start) / step)) + 1
        values = [float(v) for v in np.round(start + step * np.arange(count), 12)]
    else:
        raise ConfigError("[sweep] needs 'values' or all of 'start', 'stop', 'step'")
    db = bool(raw.get("db", False))
    if db:
        values = [db_to_linear(v) for v in values]
    fields = {"param": raw["param"], "values": tuple(values), "db": db}
    if "distances" in raw:
        fields["distances"] = tuple(_numbers("distances", raw["distances"]))
    return _validated("sweep", SweepSpec, fields)


def parse_experiment(data: Dict[str, Any]) -> ExperimentConfig:
    _unknown("top level", set(data) - set(SECTIONS))
    for section in SECTIONS:
        if section in data and not isinstance(data[section], dict):
            raise ConfigError(f"[{section}] must be a table")
    system = _system(data.get("system", {}))
    sim = _validated("sim", SimConfig, data.get("sim", {}))
    sweep = _sweep(data["sweep"]) if "sweep" in data else None
    output = _validated("output", OutputSpec, data.get("output", {}))
    optimize = _validated("optimize", OptimizeSpec, data.get("optimize", {}))
    return ExperimentConfig(system=system, sim=sim, sweep=sweep, output=output, optimize=optimize)


def load_experiment(path: Optional[str] = None) -> ExperimentConfig:
    """Parse an experiment file; no path means baseline defaults throughout."""
    if path is None:
        return parse_experiment({})
    try:
        with Path(path).open("rb") as handle:
            data = tomllib.load(handle)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    logger.info(f"Loaded experiment config from {path}")
    return parse_experiment(data)
