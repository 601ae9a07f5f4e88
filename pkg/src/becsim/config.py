"""Scenario configuration: JSON parsing, preset expansion and validation.

Field names carry their units (``delta_uev``, ``dt_s``, ...).  A config may
name a pulse preset; :func:`expand_config` rewrites it into a fully explicit
document before anything runs, and expanding an explicit document is the
identity.
"""

from __future__ import annotations

import copy
import json
import logging
import math
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

from .cascade import DEFAULT_GAMMA0, RATE_KEYS, PulseSpec, QDParams, calibrate_pulse_area, resonant_pump
from .errors import ConfigFileError, ConfigurationError
from .fock import HilbertLayout, make_layout
from .solver import SolverConfig

log = logging.getLogger(__name__)

PRESETS = ("pi", "five_pi", "detuned_pi")
PI_DURATION_S = 160e-12
# the 5pi pulse is stretched so its peak Rabi frequency stays moderate
FIVE_PI_DURATION_S = 3 * PI_DURATION_S
# the laser is detuned, so the two-photon detuning is twice this
DETUNED_LASER_OFFSET_HZ = 3.18e9
DEFAULT_STEPS = 2000
DECAY_WINDOW = 8.0  # cascade tail kept after the pulse, in units of 1/gamma_min

DEFAULT_OUTPUTS = {
    "traces_csv": "traces.csv",
    "metrics_json": "metrics.json",
    "kraus_json": "kraus.json",
    "plot_svg": "plot.svg",
}

_TOP_KEYS = {"name", "qd", "layout", "pulse", "solver", "outputs", "seed"}
_QD_KEYS = {"exciton_energy_ev", "binding_energy_mev", "delta_uev", "mixing_uev", "gamma0_per_s", "gammas_per_s"}
_LAYOUT_KEYS = {"fss_nonzero", "cutoff"}
_PULSE_KEYS = {"envelope", "omega0_rad_per_s", "omega_pump_rad_per_s", "t0_s", "duration_s", "samples"}
_PRESET_KEYS = {"preset", "duration_s"}
_SOLVER_KEYS = {"t0_s", "tf_s", "dt_s", "method", "record_stride", "time_unit_s"}


@dataclass(frozen=True)
class OutputPaths:
    traces_csv: str | None
    metrics_json: str | None
    kraus_json: str | None
    plot_svg: str | None = None

    def resolve(self, out_dir: str | os.PathLike) -> dict[str, Path | None]:
        base = Path(out_dir)
        return {k: (base / v if v else None) for k, v in vars(self).items()}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    params: QDParams
    layout: HilbertLayout
    pulse: PulseSpec
    solver: SolverConfig
    outputs: OutputPaths
    seed: int
    document: dict

    @property
    def gamma_min(self) -> float:
        return min(self.params.rates.values())


def _require(section: dict, key: str, where: str) -> Any:
    if key not in section:
        raise ConfigurationError(f"missing required field '{where}.{key}'", f"{where}.{key}")
    return section[key]


def _check_keys(section: Any, allowed: set[str], where: str) -> dict:
    if not isinstance(section, dict):
        raise ConfigurationError(f"'{where}' must be an object", where)
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown field '{where}.{unknown[0]}'", f"{where}.{unknown[0]}")
    return section


def _number(value: Any, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigurationError(f"'{field}' must be a finite number, got {value!r}", field)
    return float(value)


def _qd_params(doc: dict) -> QDParams:
    qd = _check_keys(_require(doc, "qd", "config"), _QD_KEYS, "qd")
    gamma0 = _number(qd.get("gamma0_per_s", DEFAULT_GAMMA0), "qd.gamma0_per_s")
    rates = dict.fromkeys(RATE_KEYS, gamma0)
    overrides = _check_keys(qd.get("gammas_per_s", {}), set(RATE_KEYS), "qd.gammas_per_s")
    for k, v in overrides.items():
        rates[k] = _number(v, f"qd.gammas_per_s.{k}")
    mixing = qd.get("mixing_uev", [0.0, 0.0])
    if not (isinstance(mixing, list) and len(mixing) == 2):
        raise ConfigurationError("'qd.mixing_uev' must be [re, im]", "qd.mixing_uev")
    mix = complex(_number(mixing[0], "qd.mixing_uev"), _number(mixing[1], "qd.mixing_uev")) * 1e-6
    return QDParams(
        exciton_energy=_number(_require(qd, "exciton_energy_ev", "qd"), "qd.exciton_energy_ev"),
        binding_energy=_number(_require(qd, "binding_energy_mev", "qd"), "qd.binding_energy_mev") * 1e-3,
        fss=_number(qd.get("delta_uev", 0.0), "qd.delta_uev") * 1e-6,
        mixing=mix,
        rates=rates,
    )


def preset_pulse(name: str, params: QDParams, duration_s: float | None = None) -> PulseSpec:
    """Square pulse starting at t = 0 for one of the three standard scenarios."""
    if name == "pi":
        area, duration, offset = math.pi, PI_DURATION_S, 0.0
    elif name == "five_pi":
        area, duration, offset = 5 * math.pi, FIVE_PI_DURATION_S, 0.0
    elif name == "detuned_pi":
        area, duration, offset = math.pi, PI_DURATION_S, 2 * math.pi * DETUNED_LASER_OFFSET_HZ
    else:
        raise ConfigurationError(f"unknown preset {name!r}; expected one of {PRESETS}", "pulse.preset")
    if duration_s is not None:
        duration = _number(duration_s, "pulse.duration_s")
    spec = PulseSpec("square", 0.0, resonant_pump(params) + offset, duration / 2, duration)
    return calibrate_pulse_area(spec, area)


def _pulse_to_doc(pulse: PulseSpec) -> dict:
    doc = {
        "envelope": pulse.envelope,
        "omega0_rad_per_s": pulse.omega0,
        "omega_pump_rad_per_s": pulse.omega_pump,
        "t0_s": pulse.t0,
        "duration_s": pulse.duration,
    }
    if pulse.samples is not None:
        doc["samples"] = {"t_s": list(pulse.samples[0]), "f": list(pulse.samples[1])}
    return doc


def _pulse_from_doc(section: dict) -> PulseSpec:
    p = _check_keys(section, _PULSE_KEYS, "pulse")
    samples = None
    if "samples" in p:
        s = _check_keys(p["samples"], {"t_s", "f"}, "pulse.samples")
        samples = (
            tuple(_number(x, "pulse.samples.t_s") for x in _require(s, "t_s", "pulse.samples")),
            tuple(_number(x, "pulse.samples.f") for x in _require(s, "f", "pulse.samples")),
        )
    return PulseSpec(
        envelope=_require(p, "envelope", "pulse"),
        omega0=_number(_require(p, "omega0_rad_per_s", "pulse"), "pulse.omega0_rad_per_s"),
        omega_pump=_number(_require(p, "omega_pump_rad_per_s", "pulse"), "pulse.omega_pump_rad_per_s"),
        t0=_number(_require(p, "t0_s", "pulse"), "pulse.t0_s"),
        duration=_number(_require(p, "duration_s", "pulse"), "pulse.duration_s"),
        samples=samples,
    )


def default_solver(pulse: PulseSpec, gamma_min: float, steps: int = DEFAULT_STEPS) -> dict:
    """Window from t = 0 to the pulse end plus ``DECAY_WINDOW / gamma_min``.

    For a square pulse starting at t = 0 the step is chosen so that both pulse
    edges fall on grid points.
    """
    start, end = pulse.support()
    t0 = min(0.0, start)
    tf = end + DECAY_WINDOW / gamma_min
    span = tf - t0
    if pulse.envelope == "square" and start == t0:
        n_pulse = max(1, round(steps * (end - start) / span))
        dt = (end - start) / n_pulse
        tf = t0 + math.ceil(span / dt - 1e-9) * dt
    else:
        dt = span / steps
    return {"t0_s": t0, "tf_s": tf, "dt_s": dt, "method": "rk4", "record_stride": 10, "time_unit_s": 1e-12}


def expand_config(doc: dict) -> dict:
    """Return a fully explicit copy of ``doc``.

    Presets become explicit pulse fields; missing layout, solver and output
    sections receive their defaults.  Already-explicit documents come back
    unchanged.
    """
    doc = copy.deepcopy(doc)
    _check_keys(doc, _TOP_KEYS, "config")
    params = _qd_params(doc)
    pulse_doc = _require(doc, "pulse", "config")
    if isinstance(pulse_doc, dict) and "preset" in pulse_doc:
        _check_keys(pulse_doc, _PRESET_KEYS, "pulse")
        pulse = preset_pulse(pulse_doc["preset"], params, pulse_doc.get("duration_s"))
        doc["pulse"] = _pulse_to_doc(pulse)
        log.info("expanded pulse preset %r: %s", pulse_doc["preset"], json.dumps(doc["pulse"]))
    else:
        pulse = _pulse_from_doc(pulse_doc)
    if "layout" not in doc:
        doc["layout"] = {"fss_nonzero": params.fss_nonzero, "cutoff": 2}
        log.info("layout defaulted to %s", doc["layout"])
    if "solver" not in doc:
        doc["solver"] = default_solver(pulse, min(params.rates.values()))
        log.info("solver defaulted to %s", doc["solver"])
    if "outputs" not in doc:
        doc["outputs"] = dict(DEFAULT_OUTPUTS)
    doc.setdefault("seed", 0)
    doc.setdefault("name", "scenario")
    return doc


def config_from_dict(doc: dict) -> ScenarioConfig:
    doc = expand_config(doc)
    params = _qd_params(doc)
    lay = _check_keys(doc["layout"], _LAYOUT_KEYS, "layout")
    fss_flag = lay.get("fss_nonzero", params.fss_nonzero)
    if not isinstance(fss_flag, bool):
        raise ConfigurationError("'layout.fss_nonzero' must be a boolean", "layout.fss_nonzero")
    if fss_flag != params.fss_nonzero:
        raise ConfigurationError(
            f"layout.fss_nonzero={fss_flag} but delta/mixing imply {params.fss_nonzero}", "layout.fss_nonzero"
        )
    cutoff = lay.get("cutoff", 2)
    if isinstance(cutoff, bool) or not isinstance(cutoff, int) or cutoff < 2:
        raise ConfigurationError(f"'layout.cutoff' must be an integer >= 2, got {cutoff!r}", "layout.cutoff")
    pulse = _pulse_from_doc(doc["pulse"])

    sv = _check_keys(doc["solver"], _SOLVER_KEYS, "solver")
    stride = sv.get("record_stride", 10)
    if isinstance(stride, bool) or not isinstance(stride, int):
        raise ConfigurationError("'solver.record_stride' must be an integer", "solver.record_stride")
    solver = SolverConfig(
        t_final=_number(_require(sv, "tf_s", "solver"), "solver.tf_s"),
        dt=_number(_require(sv, "dt_s", "solver"), "solver.dt_s"),
        t0=_number(sv.get("t0_s", 0.0), "solver.t0_s"),
        method=sv.get("method", "rk4"),
        record_stride=stride,
        time_unit_s=_number(sv.get("time_unit_s", 1e-12), "solver.time_unit_s"),
    )

    out = _check_keys(doc["outputs"], set(DEFAULT_OUTPUTS), "outputs")
    for k, v in out.items():
        if v is not None and not isinstance(v, str):
            raise ConfigurationError(f"'outputs.{k}' must be a path string or null", f"outputs.{k}")
    outputs = OutputPaths(**{k: out.get(k) for k in DEFAULT_OUTPUTS})

    seed = doc["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigurationError("'seed' must be an integer", "seed")
    name = doc["name"]
    if not isinstance(name, str) or not name:
        raise ConfigurationError("'name' must be a non-empty string", "name")
    return ScenarioConfig(name, params, make_layout(fss_flag, cutoff), pulse, solver, outputs, seed, doc)


def load_document(path: str | os.PathLike) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigFileError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc.msg} at line {exc.lineno} column {exc.colno}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: top level must be an object", "config")
    return doc


def parse_config(path: str | os.PathLike) -> ScenarioConfig:
    return config_from_dict(load_document(path))


def preset_paths() -> list[Path]:
    """The six shipped scenario files, in a fixed order."""
    root = resources.files("becsim") / "presets"
    names = [f"fss{f}_{p}.json" for f in (0, 5) for p in PRESETS]
    return [Path(str(root / n)) for n in names]
