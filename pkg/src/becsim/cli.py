"""``bec-sim`` scenario runner."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from contextlib import nullcontext
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .cascade import build_collapse_ops, build_hamiltonian
from .channel import KrausChannel, kraus_from_state, serialize_channel, trace_out_qd
from .config import ScenarioConfig, parse_config, preset_paths
from .errors import BecSimError, ConfigurationError, DivergenceError, NonPhysicalStateError
from .metrics import MetricsReport, compute_metrics, format_table
from .solver import TraceRecord, evolve, initial_state

log = logging.getLogger("becsim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4


@dataclass
class ScenarioResult:
    metrics: MetricsReport
    record: TraceRecord
    channel: KrausChannel


def trace_header(record: TraceRecord) -> list[str]:
    modes = [f"N_{f.mode_label}_{f.polarization.value}" for f in record.layout.factors]
    return ["t_s", "P_G", "P_X1", "P_X2", "P_XX", *modes, "trace_drift"]


def emit_traces(record: TraceRecord, path: str | os.PathLike) -> Path:
    """CSV of every record point, 12 significant digits."""
    if not record.times:
        raise ValueError("empty trace record")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(record))
        for t, pops, nums, drift in zip(record.times, record.qd_populations, record.mode_numbers, record.trace_drift):
            w.writerow(["%.12g" % x for x in (t, *pops, *nums, drift)])
    return path


def run_scenario(config: ScenarioConfig, out_dir: str | os.PathLike | None = None) -> ScenarioResult:
    """initial state -> evolve -> trace out the dot -> Kraus set -> metrics.

    Outputs named in ``config.outputs`` are written under ``out_dir`` when given.
    """
    layout = config.layout
    hamiltonian = build_hamiltonian(layout, config.params, config.pulse)
    collapse = build_collapse_ops(layout, config.params)
    log.info("%s: evolving %d-dim state over %d steps", config.name, layout.total_dim, config.solver.n_steps)
    try:
        final, record = evolve(initial_state(layout), hamiltonian, collapse, config.solver)
    except DivergenceError as exc:
        raise DivergenceError(f"scenario {config.name}: {exc}", exc.step) from exc
    rho_gamma = trace_out_qd(final)
    channel = kraus_from_state(rho_gamma, layout=layout)
    metrics = compute_metrics(rho_gamma, layout, config.params)
    result = ScenarioResult(metrics, record, channel)
    if out_dir is not None:
        write_outputs(config, result, out_dir)
    return result


def write_outputs(config: ScenarioConfig, result: ScenarioResult, out_dir: str | os.PathLike) -> dict[str, Path]:
    paths = config.outputs.resolve(out_dir)
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    if paths["traces_csv"]:
        emit_traces(result.record, paths["traces_csv"])
    if paths["metrics_json"]:
        doc = {
            "scenario": config.name,
            "metrics": result.metrics.to_dict(),
            "renormalizations": result.record.renormalizations,
            "max_abs_trace_drift": result.record.max_abs_drift,
        }
        paths["metrics_json"].write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    if paths["kraus_json"]:
        serialize_channel(result.channel, paths["kraus_json"])
    if paths["plot_svg"]:
        from .plotting import emit_plot

        emit_plot(result.record, paths["plot_svg"], title=config.name)
    return {k: v for k, v in paths.items() if v is not None}


def _thread_limit():
    value = os.environ.get("BEC_SIM_THREADS")
    if not value:
        return nullcontext()
    try:
        n = int(value)
    except ValueError:
        raise ConfigurationError(f"BEC_SIM_THREADS must be a positive integer, got {value!r}", "BEC_SIM_THREADS")
    if n < 1:
        raise ConfigurationError(f"BEC_SIM_THREADS must be a positive integer, got {value!r}", "BEC_SIM_THREADS")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _error_line(exc: BaseException, code: int) -> str:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    field = getattr(exc, "field", None)
    if field:
        doc["field"] = field
    step = getattr(exc, "step", None)
    if step is not None:
        doc["step"] = step
    return json.dumps(doc)


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (DivergenceError, NonPhysicalStateError)):
        return EXIT_DIVERGENCE
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_CONFIG


def _cmd_run(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    if args.all_presets:
        configs = [parse_config(p) for p in preset_paths()]
        rows = []
        for cfg in configs:
            rows.append((cfg.name, run_scenario(cfg, out_dir / cfg.name).metrics))
        print(format_table(rows), end="")
        return EXIT_OK
    cfg = parse_config(args.config)
    result = run_scenario(cfg, out_dir)
    print(result.metrics.to_table(cfg.name), end="")
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    cfg = parse_config(args.config)
    print(json.dumps(cfg.document, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bec-sim", description="Biexciton cascade entangled-photon simulator.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log progress (-vv for debug)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write traces, metrics, Kraus set and plot")
    run.add_argument("--config", help="scenario JSON file")
    run.add_argument("--out-dir", default=".", help="directory for output files (default: .)")
    run.add_argument("--all-presets", action="store_true", help="run the six shipped scenarios into OUT_DIR/<name>/")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="check a config and print its fully expanded form")
    val.add_argument("--config", required=True, help="scenario JSON file")
    val.set_defaults(func=_cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run" and not args.config and not args.all_presets:
        parser.error("run needs --config or --all-presets")
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        with _thread_limit():
            return args.func(args)
    except (BecSimError, OSError, ValueError) as exc:
        code = exit_code_for(exc)
        print(_error_line(exc, code), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
