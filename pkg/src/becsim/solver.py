"""Fixed-step Lindblad master-equation integration on dense density matrices."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cascade import Hamiltonian
from .errors import CoarseStepWarning, DimensionError, DivergenceError
from .fock import HilbertLayout, Operator, QDState

log = logging.getLogger(__name__)

RENORM_THRESHOLD = 1e-12
# stage times are nudged this fraction of a step into the step interval so that
# envelope discontinuities on grid points are integrated from the correct side
_STAGE_NUDGE = 1e-9


@dataclass
class DensityState:
    layout: HilbertLayout
    matrix: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        n = self.layout.total_dim
        if self.matrix.shape != (n, n):
            raise DimensionError(f"density matrix shape {self.matrix.shape} != ({n}, {n})")

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_error(self) -> float:
        """Relative Frobenius norm of the anti-Hermitian part."""
        m = self.matrix
        return float(np.linalg.norm(m - m.conj().T) / max(np.linalg.norm(m), 1e-300))

    def min_eigenvalue(self) -> float:
        h = (self.matrix + self.matrix.conj().T) / 2
        return float(np.linalg.eigvalsh(h)[0])

    def validate(self, herm_tol: float = 1e-10, trace_tol: float = 1e-8, pos_tol: float = 1e-8) -> None:
        problems = []
        if self.hermiticity_error() > herm_tol:
            problems.append(f"hermiticity error {self.hermiticity_error():.3e}")
        if abs(self.trace() - 1) > trace_tol:
            problems.append(f"trace {self.trace():.12g}")
        if self.min_eigenvalue() < -pos_tol:
            problems.append(f"min eigenvalue {self.min_eigenvalue():.3e}")
        if problems:
            raise ValueError("invalid density state: " + "; ".join(problems))


@dataclass(frozen=True)
class SolverConfig:
    t_final: float
    dt: float
    t0: float = 0.0
    method: str = "rk4"
    record_stride: int = 10
    time_unit_s: float = 1e-12

    def __post_init__(self) -> None:
        from .errors import ConfigurationError

        if not self.t_final > self.t0:
            raise ConfigurationError("t_f must exceed t0", "solver.tf_s")
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive", "solver.dt_s")
        if self.dt > (self.t_final - self.t0) / 100 * (1 + 1e-12):
            raise ConfigurationError("dt must be at most (t_f - t0)/100", "solver.dt_s")
        if self.method not in ("rk4", "euler"):
            raise ConfigurationError(f"unknown method {self.method!r}", "solver.method")
        if self.record_stride < 1:
            raise ConfigurationError("record_stride must be >= 1", "solver.record_stride")
        if not self.time_unit_s > 0:
            raise ConfigurationError("time_unit_s must be positive", "solver.time_unit_s")

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil((self.t_final - self.t0) / self.dt - 1e-9))

    @property
    def step(self) -> float:
        """Actual step: ``dt`` shrunk so an integer number of steps lands on ``t_final``."""
        return (self.t_final - self.t0) / self.n_steps


@dataclass
class TraceRecord:
    layout: HilbertLayout
    times: list[float] = field(default_factory=list)
    qd_populations: list[np.ndarray] = field(default_factory=list)
    mode_numbers: list[np.ndarray] = field(default_factory=list)
    trace_drift: list[float] = field(default_factory=list)
    renormalizations: int = 0
    max_abs_drift: float = 0.0

    def append(self, t: float, rho: np.ndarray, drift: float) -> None:
        pops, numbers = diagonal_observables(self.layout, rho)
        self.times.append(t)
        self.qd_populations.append(pops)
        self.mode_numbers.append(numbers)
        self.trace_drift.append(drift)

    def populations(self) -> np.ndarray:
        return np.array(self.qd_populations)

    def numbers(self) -> np.ndarray:
        return np.array(self.mode_numbers)


def diagonal_observables(layout: HilbertLayout, rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """QD populations and per-factor photon numbers from the diagonal of ``rho``."""
    diag = np.real(np.diagonal(rho)).reshape(layout.dims)
    pops = diag.reshape(layout.qd_dim, -1).sum(axis=1)
    numbers = np.empty(len(layout.factors))
    for i, d in enumerate(layout.photonic_dims):
        axes = tuple(a for a in range(diag.ndim) if a != i + 1)
        numbers[i] = np.dot(np.arange(d), diag.sum(axis=axes))
    return pops, numbers


def initial_state(layout: HilbertLayout) -> DensityState:
    """``|G><G| (x) |vac><vac|``."""
    rho = np.zeros((layout.total_dim, layout.total_dim), dtype=complex)
    i = layout.vacuum_index(QDState.G)
    rho[i, i] = 1.0
    return DensityState(layout, rho, 0.0)


def _as_sparse(op) -> sp.csr_matrix:
    return op.sparse if isinstance(op, Operator) else sp.csr_matrix(op)


def lindblad_rhs(rho: np.ndarray, hamiltonian, collapse_ops: Sequence = ()) -> np.ndarray:
    """``-i[H, rho] + sum_j (L rho L^+ - {L^+ L, rho}/2)`` with H in angular-frequency units."""
    rho = np.asarray(rho)
    h = _as_sparse(hamiltonian)
    n = rho.shape[0]
    if rho.shape != (n, n) or h.shape != (n, n):
        raise DimensionError(f"shape mismatch: rho {rho.shape}, H {h.shape}")
    ls = [_as_sparse(L) for L in collapse_ops]
    for L in ls:
        if L.shape != (n, n):
            raise DimensionError(f"collapse operator shape {L.shape} != {(n, n)}")
    heff = h.astype(complex)
    for L in ls:
        heff = heff - 0.5j * (L.conj().T @ L)
    rho_dag = rho.conj().T
    out = -1j * (heff @ rho) + 1j * (heff @ rho_dag).conj().T
    for L in ls:
        out += L @ (L @ rho_dag).conj().T
    return out


def invariant_subspace(
    generators: Sequence[sp.spmatrix],
    seeds: np.ndarray,
    max_dim: int | None = None,
    tol: float = 1e-10,
) -> np.ndarray | None:
    """Orthonormal basis of the smallest subspace containing ``seeds`` that
    every generator maps into itself.

    Returns None if the subspace would exceed ``max_dim``.
    """
    n = seeds.shape[0]
    max_dim = n if max_dim is None else max_dim
    basis = np.zeros((n, 0), dtype=complex)
    pending = [seeds[:, j] for j in range(seeds.shape[1])]
    while pending:
        w = np.asarray(pending.pop(), dtype=complex)
        norm0 = np.linalg.norm(w)
        if norm0 == 0:
            continue
        for _ in range(2):
            w = w - basis @ (basis.conj().T @ w)
        norm = np.linalg.norm(w)
        if norm <= tol * norm0:
            continue
        if basis.shape[1] >= max_dim:
            return None
        v = w / norm
        basis = np.column_stack([basis, v])
        pending.extend(g @ v for g in generators)
    return basis


class _Generator:
    """Lindbladian specialised to Hermitian states, in rescaled time units.

    With a ``basis`` Q every operator is replaced by ``Q^+ A Q``; this is exact
    when the basis spans a subspace invariant under all operators.
    """

    def __init__(
        self,
        hamiltonian: Hamiltonian,
        collapse_ops: Sequence[Operator],
        scale: float,
        basis: np.ndarray | None = None,
    ):
        static = sum((op.sparse for op in hamiltonian.static[1:]), hamiltonian.static[0].sparse).astype(complex)
        ls = [L.sparse * math.sqrt(scale) for L in collapse_ops]
        loss = sum((L.conj().T @ L for L in ls), sp.csr_matrix(static.shape, dtype=complex))
        heff = (static * scale - 0.5j * loss).tocsr()
        timed = [(op.sparse * scale, coeff) for op, coeff in hamiltonian.timed]
        if basis is not None:
            def proj(a):
                return basis.conj().T @ (a @ basis)

            self.heff = proj(heff)
            self.timed = [(proj(op), coeff) for op, coeff in timed]
            self.ls = [proj(L) for L in ls]
        else:
            self.heff = heff
            self.timed = timed
            self.ls = [L.tocsr() for L in ls]

    @staticmethod
    def generators(hamiltonian: Hamiltonian, collapse_ops: Sequence[Operator]) -> list[sp.csr_matrix]:
        gens = [op.sparse for op in hamiltonian.static]
        gens += [op.sparse for op, _ in hamiltonian.timed]
        gens += [L.sparse for L in collapse_ops]
        gens += [(L.sparse.conj().T @ L.sparse).tocsr() for L in collapse_ops]
        return gens

    def __call__(self, t_phys: float, rho: np.ndarray) -> np.ndarray:
        x = self.heff @ rho
        for op, coeff in self.timed:
            c = coeff(t_phys)
            if c != 0.0:
                x += c * (op @ rho)
        y = -1j * x
        out = y + y.conj().T
        for L in self.ls:
            out += L @ (L @ rho).conj().T
        return out

    def norm_estimate(self, coeff_max: Sequence[float]) -> float:
        def norm1(a):
            return spla.norm(a, 1) if sp.issparse(a) else np.linalg.norm(a, 1)

        est = norm1(self.heff)
        for (op, _), c in zip(self.timed, coeff_max):
            est += abs(c) * norm1(op)
        return float(est)


def _max_coefficients(hamiltonian: Hamiltonian, times: np.ndarray) -> list[float]:
    out = []
    for _, coeff in hamiltonian.timed:
        try:
            vals = np.asarray(coeff(times), dtype=float)
            if vals.shape != times.shape:
                raise TypeError
        except (TypeError, ValueError):
            vals = np.array([coeff(float(t)) for t in times])
        out.append(float(np.max(np.abs(vals))) if vals.size else 0.0)
    return out


def _seed_vectors(rho: np.ndarray) -> np.ndarray:
    cols = np.flatnonzero(np.linalg.norm(rho, axis=0) > 0)
    return rho[:, cols]


def _observable_matrices(layout: HilbertLayout, basis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QD projectors and number operators, stacked for ``einsum``."""
    dims = layout.dims
    idx = np.indices(dims).reshape(len(dims), -1)
    pops = np.stack([(basis.conj() * (idx[0] == q)[:, None]).T @ basis for q in range(layout.qd_dim)])
    nums = np.stack([(basis.conj() * idx[i + 1][:, None]).T @ basis for i in range(len(layout.factors))])
    return pops, nums


def evolve(
    rho0: DensityState,
    hamiltonian: Hamiltonian,
    collapse_ops: Sequence[Operator],
    config: SolverConfig,
    reduce: bool = True,
) -> tuple[DensityState, TraceRecord]:
    """Integrate from ``config.t0`` to ``config.t_final`` with a fixed step.

    The integration runs in rescaled time ``t' = t / time_unit_s``.  Whenever
    the trace drifts by more than 1e-12 the state is renormalized; every
    renormalization is counted on the returned record and logged.

    With ``reduce`` the dynamics is restricted to the subspace reachable from
    the initial state under all Hamiltonian and jump operators, which is
    exact; the full density matrix is rebuilt at the end.
    """
    layout = rho0.layout
    for op in list(hamiltonian.static) + [op for op, _ in hamiltonian.timed] + list(collapse_ops):
        if op.layout != layout:
            raise DimensionError("all operators must share the state's layout")

    rho_full = np.array(rho0.matrix, dtype=complex, copy=True)
    basis = None
    if reduce:
        basis = invariant_subspace(
            _Generator.generators(hamiltonian, collapse_ops),
            _seed_vectors(rho_full),
            max_dim=layout.total_dim // 2,
        )
        if basis is None:
            log.debug("reachable subspace too large; integrating in the full space")
        else:
            log.debug("integrating in a %d-dimensional invariant subspace", basis.shape[1])

    s = config.time_unit_s
    gen = _Generator(hamiltonian, collapse_ops, s, basis)
    n = config.n_steps
    h_phys = config.step
    h = h_phys / s
    times = config.t0 + h_phys * np.arange(n + 1)

    coeff_max = _max_coefficients(hamiltonian, times)
    # gen's operators carry the time unit, so ||H'|| dt' == ||H|| dt
    hdt = gen.norm_estimate(coeff_max) * h
    if hdt > 0.1:
        warnings.warn(f"||H||*dt = {hdt:.3g} > 0.1; step may be too coarse", CoarseStepWarning, stacklevel=2)

    record = TraceRecord(layout)
    if basis is None:
        rho = rho_full

        def observe(t, r, drift):
            record.append(t, r, drift)
    else:
        rho = basis.conj().T @ rho_full @ basis
        pop_ops, num_ops = _observable_matrices(layout, basis)

        def observe(t, r, drift):
            record.times.append(t)
            record.qd_populations.append(np.einsum("kij,ji->k", pop_ops, r).real)
            record.mode_numbers.append(np.einsum("kij,ji->k", num_ops, r).real)
            record.trace_drift.append(drift)

    observe(float(times[0]), rho, float(np.trace(rho).real - 1.0))

    eps = _STAGE_NUDGE * h_phys
    for k in range(n):
        t = times[k]
        if config.method == "rk4":
            k1 = gen(t + eps, rho)
            k2 = gen(t + h_phys / 2, rho + (h / 2) * k1)
            k3 = gen(t + h_phys / 2, rho + (h / 2) * k2)
            k4 = gen(t + h_phys - eps, rho + h * k3)
            rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        else:
            rho = rho + h * gen(t + eps, rho)

        tr = np.trace(rho).real
        if not math.isfinite(tr):
            raise DivergenceError(f"non-finite density matrix at step {k + 1} (t={times[k + 1]:.6g} s)", k + 1)
        drift = tr - 1.0
        record.max_abs_drift = max(record.max_abs_drift, abs(drift))
        if abs(drift) > RENORM_THRESHOLD:
            rho /= tr
            record.renormalizations += 1
            log.debug("step %d: trace drift %.3e renormalized", k + 1, drift)
        if (k + 1) % config.record_stride == 0:
            if not np.isfinite(rho).all():
                raise DivergenceError(f"non-finite density matrix at step {k + 1}", k + 1)
            observe(float(times[k + 1]), rho, float(drift))

    if record.renormalizations:
        log.info(
            "trace renormalized on %d of %d steps (max |drift| %.3e)",
            record.renormalizations, n, record.max_abs_drift,
        )
    if basis is not None:
        rho = basis @ rho @ basis.conj().T
    return DensityState(layout, rho, float(times[-1])), record


def expectation(rho: DensityState | np.ndarray, op: Operator | np.ndarray) -> complex:
    """``Tr(O rho)``."""
    m = rho.matrix if isinstance(rho, DensityState) else np.asarray(rho)
    o = _as_sparse(op)
    if o.shape != m.shape:
        raise DimensionError(f"shape mismatch: operator {o.shape}, state {m.shape}")
    return complex(o.multiply(m.T).sum())
