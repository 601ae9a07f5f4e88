"""Simulation of entangled photon pairs from a biexciton-exciton cascade."""

from .cascade import PulseSpec, QDParams, build_collapse_ops, build_hamiltonian
from .channel import KrausChannel, kraus_from_state, load_channel, serialize_channel, trace_out_qd
from .config import ScenarioConfig, parse_config
from .fock import HilbertLayout, make_layout
from .metrics import MetricsReport, compute_metrics
from .solver import SolverConfig, evolve, initial_state

__version__ = "0.1.0"

__all__ = [
    "HilbertLayout",
    "KrausChannel",
    "MetricsReport",
    "PulseSpec",
    "QDParams",
    "ScenarioConfig",
    "SolverConfig",
    "build_collapse_ops",
    "build_hamiltonian",
    "compute_metrics",
    "evolve",
    "initial_state",
    "kraus_from_state",
    "load_channel",
    "make_layout",
    "parse_config",
    "serialize_channel",
    "trace_out_qd",
]
