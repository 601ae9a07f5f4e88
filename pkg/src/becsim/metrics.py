"""Figures of merit on the reduced photonic state."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .cascade import HBAR_EV_S, RATE_KEYS, QDParams, mixing_angles
from .errors import DomainError, MissingModeError, UndefinedConditionalError
from .fock import HilbertLayout, rotation_coefficients

EARLY_LABELS = ("lambda1", "lambda2", "early")
LATE_LABELS = ("lambda3", "lambda4", "late")
_CLAMP = 1e-12
_MIN_PROJECTED = 1e-12


@dataclass(frozen=True)
class Bipartition:
    """Photonic factor indices of the early (XX -> X) and late (X -> G) emissions."""

    early_factors: frozenset[int]
    late_factors: frozenset[int]

    def __post_init__(self) -> None:
        if self.early_factors & self.late_factors:
            raise ValueError("early and late factor sets overlap")

    @classmethod
    def for_layout(cls, layout: HilbertLayout) -> "Bipartition":
        early, late = set(), set()
        for i, f in enumerate(layout.factors):
            if f.mode_label in EARLY_LABELS:
                early.add(i)
            elif f.mode_label in LATE_LABELS:
                late.add(i)
            else:
                raise MissingModeError(f"mode {f.mode_label!r} belongs to neither emission group")
        return cls(frozenset(early), frozenset(late))

    def check(self, n_factors: int) -> None:
        if self.early_factors | self.late_factors != set(range(n_factors)):
            raise ValueError("bipartition does not cover every photonic factor exactly once")


def _dims(layout_or_dims: HilbertLayout | Sequence[int]) -> tuple[int, ...]:
    if isinstance(layout_or_dims, HilbertLayout):
        return layout_or_dims.photonic_dims
    return tuple(int(d) for d in layout_or_dims)


def _occupations(dims: Sequence[int]) -> np.ndarray:
    """``(n_factors, prod(dims))`` occupation numbers of every basis state."""
    return np.indices(dims).reshape(len(dims), -1)


def photon_numbers(rho_gamma: np.ndarray, layout: HilbertLayout) -> dict:
    """Per-factor ``<a^+ a>`` plus early/late group sums."""
    occ = _occupations(layout.photonic_dims)
    diag = np.real(np.diagonal(rho_gamma))
    per_factor = occ @ diag
    part = Bipartition.for_layout(layout)
    return {
        "factors": {(f.mode_label, f.polarization.value): float(n) for f, n in zip(layout.factors, per_factor)},
        "N_early": float(sum(per_factor[i] for i in sorted(part.early_factors))),
        "N_late": float(sum(per_factor[i] for i in sorted(part.late_factors))),
    }


def _resolve_factors(subsystem: Iterable, layout_or_dims, n: int) -> list[int]:
    out = []
    for item in subsystem:
        if isinstance(item, tuple):
            if not isinstance(layout_or_dims, HilbertLayout):
                raise MissingModeError(f"cannot resolve {item!r} without a layout")
            out.append(layout_or_dims.factor_index(*item))
        else:
            i = int(item)
            if not 0 <= i < n:
                raise MissingModeError(f"factor index {i} outside 0..{n - 1}")
            out.append(i)
    return sorted(set(out))


def partial_transpose(
    rho: np.ndarray,
    layout_or_dims: HilbertLayout | Sequence[int],
    subsystem: Iterable,
) -> np.ndarray:
    """Transpose the row and column indices of the named factors only.

    ``subsystem`` holds factor positions or ``(label, polarization)`` pairs.
    """
    dims = _dims(layout_or_dims)
    n = len(dims)
    factors = _resolve_factors(subsystem, layout_or_dims, n)
    t = np.asarray(rho).reshape(dims + dims)
    axes = list(range(2 * n))
    for i in factors:
        axes[i], axes[i + n] = axes[i + n], axes[i]
    total = int(np.prod(dims))
    return t.transpose(axes).reshape(total, total)


def _log_negativity(rho: np.ndarray, dims: Sequence[int], late: Iterable[int]) -> float:
    pt = partial_transpose(rho, dims, late)
    pt = (pt + pt.conj().T) / 2
    value = math.log2(float(np.abs(np.linalg.eigvalsh(pt)).sum()))
    return 0.0 if value < _CLAMP else value


def log_negativity(rho_gamma: np.ndarray, layout: HilbertLayout, bipartition: Bipartition | None = None) -> float:
    """``log2 || rho^{T_late} ||_1``; values below 1e-12 are reported as 0."""
    part = bipartition or Bipartition.for_layout(layout)
    return _log_negativity(rho_gamma, layout.photonic_dims, sorted(part.late_factors))


def two_photon_mask(layout: HilbertLayout, bipartition: Bipartition | None = None) -> np.ndarray:
    """Basis states with exactly one photon in each emission group."""
    part = bipartition or Bipartition.for_layout(layout)
    occ = _occupations(layout.photonic_dims)
    n_early = occ[sorted(part.early_factors)].sum(axis=0)
    n_late = occ[sorted(part.late_factors)].sum(axis=0)
    return (n_early == 1) & (n_late == 1)


def conditional_state(rho_gamma: np.ndarray, layout: HilbertLayout, bipartition: Bipartition | None = None) -> np.ndarray:
    """``P rho P / Tr(P rho)`` for the one-early/one-late photon projector ``P``."""
    keep = two_photon_mask(layout, bipartition)
    p = float(np.real(np.diagonal(rho_gamma)[keep].sum()))
    if not p > _MIN_PROJECTED:
        raise UndefinedConditionalError(f"two-photon probability {p:.3e} too small to post-select")
    out = np.zeros_like(rho_gamma, dtype=complex)
    out[np.ix_(keep, keep)] = rho_gamma[np.ix_(keep, keep)] / p
    return out


def conditional_log_negativity(
    rho_gamma: np.ndarray, layout: HilbertLayout, bipartition: Bipartition | None = None
) -> float:
    part = bipartition or Bipartition.for_layout(layout)
    return log_negativity(conditional_state(rho_gamma, layout, part), layout, part)


def purity(rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    return float(np.vdot(rho.conj().T, rho).real)


def indistinguishability(gamma1: float, gamma2: float, splitting_ev: float) -> tuple[float, float]:
    """Wave-packet overlap ``Lambda`` and HOM visibility ``Lambda**2``.

    ``Gamma = hbar (gamma1 + gamma2) / 2`` and
    ``Lambda = Gamma / sqrt(Gamma**2 + Delta**2)``.
    """
    if not (gamma1 > 0 and gamma2 > 0):
        raise DomainError(f"rates must be positive, got {gamma1}, {gamma2}")
    width = HBAR_EV_S * (gamma1 + gamma2) / 2
    lam = width / math.hypot(width, splitting_ev)
    return lam, lam * lam


def _group_ket(layout: HilbertLayout, labels: Sequence[str], sign: str, theta: float, phi: float) -> np.ndarray:
    """Per-factor amplitudes of one rotated photon spread evenly over ``labels``."""
    ch, cv = rotation_coefficients(sign, theta, phi)
    amps = np.zeros(len(layout.factors), dtype=complex)
    w = 1 / math.sqrt(len(labels))
    for label in labels:
        amps[layout.factor_index(label, "H")] = w * ch
        amps[layout.factor_index(label, "V")] = w * cv
    return amps


def _two_photon_ket(layout: HilbertLayout, early: np.ndarray, late: np.ndarray) -> np.ndarray:
    psi = np.zeros(layout.photonic_dim, dtype=complex)
    zero = [0] * len(layout.factors)
    for i in np.flatnonzero(early):
        for j in np.flatnonzero(late):
            occ = list(zero)
            occ[i] += 1
            occ[j] += 1
            psi[np.ravel_multi_index(tuple(occ), layout.photonic_dims)] += early[i] * late[j]
    return psi


def path_states(layout: HilbertLayout, theta: float, phi: float) -> tuple[np.ndarray, np.ndarray]:
    """Two-photon states of the X2 ("+", "+") and X1 ("-", "-") decay paths.

    Each photon is taken in its rotated polarization with the wavelength
    information erased, i.e. as the even superposition over the group's modes.
    """
    early = [m for m in layout.mode_labels if m in EARLY_LABELS]
    late = [m for m in layout.mode_labels if m in LATE_LABELS]
    plus = _two_photon_ket(layout, _group_ket(layout, early, "+", theta, phi), _group_ket(layout, late, "+", theta, phi))
    minus = _two_photon_ket(layout, _group_ket(layout, early, "-", theta, phi), _group_ket(layout, late, "-", theta, phi))
    return plus, minus


def coherence_phase(
    rho_gamma: np.ndarray,
    layout: HilbertLayout,
    theta: float,
    phi: float,
    bipartition: Bipartition | None = None,
) -> tuple[float, float]:
    """Magnitude and phase of the coherence between the two decay paths.

    Evaluated on the post-selected two-photon state as
    ``<path+| rho_cond |path->``; the phase is the principal value in (-pi, pi].
    """
    cond = conditional_state(rho_gamma, layout, bipartition)
    plus, minus = path_states(layout, theta, phi)
    z = complex(np.vdot(plus, cond @ minus))
    phase = math.atan2(z.imag, z.real)
    if phase == -math.pi:
        phase = math.pi
    return abs(z), phase


@dataclass(frozen=True)
class MetricsReport:
    N_early: float
    N_late: float
    E_N: float
    E_N_cond: float | None
    P: float
    Lambda_early: float
    Lambda_late: float
    Lambda_mean: float
    V_HOM: float
    coherence_mag: float | None
    phase: float | None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_table(self, label: str = "") -> str:
        return format_table([(label, self)])


_TABLE_COLUMNS = (
    ("N_early", "N_early"),
    ("N_late", "N_late"),
    ("E_N", "E_N"),
    ("E_N_cond", "E_N_cond"),
    ("P", "P"),
    ("Lambda", "Lambda_mean"),
    ("V_HOM", "V_HOM"),
    ("|rho+-|", "coherence_mag"),
    ("phase", "phase"),
)


def format_table(rows: Sequence[tuple[str, MetricsReport]]) -> str:
    """Aligned plain-text table, one row per scenario; undefined values print as ``-``."""
    header = ["scenario"] + [h for h, _ in _TABLE_COLUMNS]
    body = []
    for label, report in rows:
        cells = [label]
        for _, attr in _TABLE_COLUMNS:
            v = getattr(report, attr)
            cells.append("-" if v is None else f"{v:.3f}")
        body.append(cells)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in [header] + body]
    return "\n".join(lines) + "\n"


def compute_metrics(
    rho_gamma: np.ndarray,
    layout: HilbertLayout,
    params: QDParams,
) -> MetricsReport:
    """All figures of merit for one emitted state.

    Conditional quantities are ``None`` when the state has no two-photon
    component to post-select.
    """
    part = Bipartition.for_layout(layout)
    part.check(len(layout.factors))
    nums = photon_numbers(rho_gamma, layout)
    theta, phi = mixing_angles(params.fss, params.mixing)
    try:
        e_cond = conditional_log_negativity(rho_gamma, layout, part)
        coh, phase = coherence_phase(rho_gamma, layout, theta, phi, part)
    except UndefinedConditionalError:
        e_cond = coh = phase = None
    # exciton eigen-splitting; equals |fss| without anisotropic mixing
    split = math.hypot(params.fss, 2 * abs(params.mixing))
    r = params.rates
    lam_e, _ = indistinguishability(r[RATE_KEYS[0]], r[RATE_KEYS[1]], split)
    lam_l, _ = indistinguishability(r[RATE_KEYS[2]], r[RATE_KEYS[3]], split)
    lam_mean = (lam_e + lam_l) / 2
    return MetricsReport(
        N_early=nums["N_early"],
        N_late=nums["N_late"],
        E_N=log_negativity(rho_gamma, layout, part),
        E_N_cond=e_cond,
        P=purity(rho_gamma),
        Lambda_early=lam_e,
        Lambda_late=lam_l,
        Lambda_mean=lam_mean,
        V_HOM=lam_mean**2,
        coherence_mag=coh,
        phase=phase,
    )
