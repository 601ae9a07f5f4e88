"""Physical parameterization of the cascade and operator assembly.

Energies are in eV, rates in 1/s, angular frequencies in rad/s.  Every
Hamiltonian term returned by :func:`build_hamiltonian` is already divided by
hbar, i.e. expressed as an angular frequency.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Mapping

import numpy as np
from scipy import constants

from .errors import ConfigurationError, DegenerateEnvelopeError, DomainError, InvalidLevelsError
from .fock import HilbertLayout, Operator, QDState, qd_transition, rotated_create

HBAR_EV_S = constants.hbar / constants.e
HC_EV_M = constants.h * constants.c / constants.e

RATE_KEYS = ("XX_X1", "XX_X2", "X1_G", "X2_G")
DEFAULT_GAMMA0 = 6.1e9
# 4 ln 2: FWHM -> gaussian exponent
_FOUR_LN2 = 4.0 * math.log(2.0)


@dataclass(frozen=True)
class QDParams:
    """Quantum-dot parameters.

    ``fss`` is the fine-structure splitting and ``mixing`` the complex
    anisotropic exciton coupling, both in eV.  ``rates`` maps the four radiative
    transitions (see :data:`RATE_KEYS`) to rates in 1/s.
    """

    exciton_energy: float
    binding_energy: float
    fss: float = 0.0
    mixing: complex = 0j
    rates: Mapping[str, float] = field(default_factory=lambda: dict.fromkeys(RATE_KEYS, DEFAULT_GAMMA0))

    def __post_init__(self) -> None:
        if not self.exciton_energy > 0:
            raise ConfigurationError(f"exciton energy must be positive, got {self.exciton_energy}", "qd.exciton_energy_ev")
        if not abs(self.fss) < self.exciton_energy:
            raise ConfigurationError("|fss| must be smaller than the exciton energy", "qd.delta_uev")
        missing = [k for k in RATE_KEYS if k not in self.rates]
        if missing:
            raise ConfigurationError(f"missing radiative rates {missing}", "qd.gammas_per_s")
        for k in RATE_KEYS:
            if not self.rates[k] > 0:
                raise ConfigurationError(f"rate {k} must be positive, got {self.rates[k]}", f"qd.gammas_per_s.{k}")

    @property
    def biexciton_energy(self) -> float:
        return 2.0 * self.exciton_energy - self.binding_energy

    @property
    def fss_nonzero(self) -> bool:
        return self.fss != 0.0 or self.mixing != 0

    def levels(self) -> "EnergyLevels":
        return EnergyLevels.from_params(self)


@dataclass(frozen=True)
class EnergyLevels:
    G: float
    X1: float
    X2: float
    XX: float

    @classmethod
    def from_params(cls, params: QDParams) -> "EnergyLevels":
        ex, d = params.exciton_energy, params.fss
        return cls(G=0.0, X1=ex + d / 2, X2=ex - d / 2, XX=params.biexciton_energy)

    @property
    def excitation(self) -> float:
        """Two-photon excitation energy, half the G -> XX gap."""
        return (self.XX - self.G) / 2


@dataclass(frozen=True)
class PulseSpec:
    """Two-photon drive: ``Omega(t) = omega0 * f(t)``.

    ``f`` is the effective (already intensity-squared) envelope.  ``duration``
    is the full width for a square pulse and the FWHM for a gaussian.  A custom
    envelope is given by ``samples`` (times in s, values) and linearly
    interpolated, zero outside the sampled range.
    """

    envelope: Literal["gaussian", "square", "custom"]
    omega0: float
    omega_pump: float
    t0: float
    duration: float
    samples: tuple[tuple[float, ...], tuple[float, ...]] | None = None

    def __post_init__(self) -> None:
        if self.envelope not in ("gaussian", "square", "custom"):
            raise ConfigurationError(f"unknown envelope {self.envelope!r}", "pulse.envelope")
        if not self.duration > 0:
            raise ConfigurationError("pulse duration must be positive", "pulse.duration_s")
        if not self.omega_pump > 0:
            raise ConfigurationError("pump frequency must be positive", "pulse.omega_pump_rad_per_s")
        if not math.isfinite(self.omega0):
            raise ConfigurationError("omega0 must be finite", "pulse.omega0_rad_per_s")
        if self.envelope == "custom":
            if self.samples is None or len(self.samples[0]) < 2 or len(self.samples[0]) != len(self.samples[1]):
                raise ConfigurationError("custom envelope needs matching t/f samples", "pulse.samples")
            ts, fs = (np.asarray(x, dtype=float) for x in self.samples)
            if np.any(np.diff(ts) <= 0):
                raise ConfigurationError("custom envelope times must increase", "pulse.samples.t_s")
            if np.any(fs < 0):
                raise ConfigurationError("envelope values must be non-negative", "pulse.samples.f")
            peak = fs.max()
            outside = np.abs(ts - self.t0) > 5 * self.duration
            if peak > 0 and np.any(fs[outside] >= 1e-6 * peak):
                raise ConfigurationError(
                    "envelope exceeds 1e-6 of peak outside t0 +/- 5*duration", "pulse.samples.f"
                )

    def envelope_value(self, t):
        t = np.asarray(t, dtype=float)
        if self.envelope == "square":
            half = self.duration / 2
            out = ((t >= self.t0 - half) & (t < self.t0 + half)).astype(float)
        elif self.envelope == "gaussian":
            out = np.exp(-_FOUR_LN2 * ((t - self.t0) / self.duration) ** 2)
        else:
            ts, fs = self.samples
            out = np.interp(t, ts, fs, left=0.0, right=0.0)
        return out if out.ndim else float(out)

    def support(self) -> tuple[float, float]:
        """Interval outside which the envelope is negligible (< 1e-6 of peak)."""
        if self.envelope == "square":
            return self.t0 - self.duration / 2, self.t0 + self.duration / 2
        if self.envelope == "gaussian":
            # f < 1e-6 beyond sqrt(ln(1e6)/(4 ln2)) FWHM ~ 2.23 FWHM
            w = self.duration * math.sqrt(math.log(1e6) / _FOUR_LN2)
            return self.t0 - w, self.t0 + w
        ts, _ = self.samples
        return float(ts[0]), float(ts[-1])

    def breakpoints(self) -> tuple[float, ...]:
        """Times where the envelope is not smooth."""
        if self.envelope == "square":
            return self.support()
        if self.envelope == "custom":
            return tuple(float(t) for t in self.samples[0])
        return ()

    def envelope_area(self) -> float:
        """Exact integral of ``f``."""
        if self.envelope == "square":
            return self.duration
        if self.envelope == "gaussian":
            return self.duration * math.sqrt(math.pi / _FOUR_LN2)
        ts, fs = self.samples
        return float(np.trapezoid(fs, ts))

    def area(self) -> float:
        return self.omega0 * self.envelope_area()


def mixing_angles(fss: float, mixing: complex = 0j) -> tuple[float, float]:
    """Polarization rotation (theta, phi) of the exciton eigenmodes.

    ``tan(2 theta) = 2|delta| / Delta`` resolved with atan2 so that negative
    splittings land in (pi/4, pi/2]; ``phi = arg(delta)`` mapped to [0, 2pi).
    """
    theta = 0.5 * math.atan2(2.0 * abs(mixing), fss)
    phi = cmath.phase(mixing) % (2 * math.pi) if mixing != 0 else 0.0
    if phi >= 2 * math.pi:  # tiny negative phases round up to exactly 2pi
        phi = 0.0
    return theta, phi


def fss_from_energies(e_hx: float, e_vx: float, e_vxx: float, e_hxx: float) -> float:
    """Average the exciton and biexciton line splittings to cancel calibration offsets."""
    return ((e_hx - e_vx) + (e_vxx - e_hxx)) / 2


def transition_wavelengths(levels: EnergyLevels) -> dict[str, float]:
    """Vacuum wavelengths (m) of the four cascade lines and the TPE pump."""
    gaps = {
        "lambda1": levels.XX - levels.X1,
        "lambda2": levels.XX - levels.X2,
        "lambda3": levels.X1 - levels.G,
        "lambda4": levels.X2 - levels.G,
        "lambda5": levels.excitation,
    }
    bad = {k: v for k, v in gaps.items() if not v > 0}
    if bad:
        raise InvalidLevelsError(f"non-positive transition energies: {bad}")
    return {k: HC_EV_M / v for k, v in gaps.items()}


def resonant_pump(params: QDParams) -> float:
    """Pump angular frequency that drives G -> XX resonantly via two photons."""
    return (params.biexciton_energy / HBAR_EV_S) / 2


def two_photon_detuning(omega_pump: float, biexciton_energy: float) -> float:
    """``2 omega_pump - (E_XX - E_G)/hbar`` in rad/s."""
    if not omega_pump > 0:
        raise DomainError("pump frequency must be positive")
    return 2.0 * omega_pump - biexciton_energy / HBAR_EV_S


def drive_coefficient(pulse: PulseSpec, t):
    return pulse.omega0 * pulse.envelope_value(t)


def calibrate_pulse_area(pulse: PulseSpec, target_area: float) -> PulseSpec:
    norm = pulse.envelope_area()
    if not norm > 0:
        raise DegenerateEnvelopeError("envelope integrates to zero")
    return replace(pulse, omega0=target_area / norm)


@dataclass(frozen=True)
class Hamiltonian:
    """``H(t)/hbar = sum(static) + sum_k coeff_k(t) * op_k``."""

    static: list[Operator]
    timed: list[tuple[Operator, Callable[[float], float]]]

    def at(self, t: float) -> Operator:
        out = self.static[0] * 1.0
        for op in self.static[1:]:
            out = out + op
        for op, coeff in self.timed:
            out = out + op * coeff(t)
        return out


def _check_layout(layout: HilbertLayout, params: QDParams) -> None:
    if layout.fss_nonzero != params.fss_nonzero:
        raise ConfigurationError(
            f"layout fss_nonzero={layout.fss_nonzero} inconsistent with fss={params.fss} eV, mixing={params.mixing} eV",
            "layout.fss_nonzero",
        )


def build_hamiltonian(layout: HilbertLayout, params: QDParams, pulse: PulseSpec) -> Hamiltonian:
    _check_layout(layout, params)
    S = QDState
    h_fss = (params.fss / HBAR_EV_S / 2) * (
        qd_transition(layout, S.X1, S.X1) - qd_transition(layout, S.X2, S.X2)
    )
    detuning = two_photon_detuning(pulse.omega_pump, params.biexciton_energy)
    h_det = (detuning / 2) * qd_transition(layout, S.XX, S.XX)
    flip = 0.5 * (qd_transition(layout, S.G, S.XX) + qd_transition(layout, S.XX, S.G))
    return Hamiltonian(static=[h_fss, h_det], timed=[(flip, lambda t: drive_coefficient(pulse, t))])


def branch_modes(layout: HilbertLayout) -> dict[str, str]:
    """Mode label receiving each transition's photon."""
    if layout.fss_nonzero:
        return {"XX_X1": "lambda1", "XX_X2": "lambda2", "X1_G": "lambda3", "X2_G": "lambda4"}
    return {"XX_X1": "early", "XX_X2": "early", "X1_G": "late", "X2_G": "late"}


def build_collapse_ops(layout: HilbertLayout, params: QDParams) -> list[Operator]:
    """Early (XX -> X) and late (X -> G) jump operators.

    Each is the coherent sum of its two branches; X1 branches emit into the
    rotated "-" mode and X2 branches into "+".
    """
    _check_layout(layout, params)
    theta, phi = mixing_angles(params.fss, params.mixing)
    modes = branch_modes(layout)
    S = QDState

    def branch(key: str, frm: QDState, to: QDState, sign: str) -> Operator:
        return math.sqrt(params.rates[key]) * (
            qd_transition(layout, frm, to) @ rotated_create(layout, modes[key], sign, theta, phi)
        )

    early = branch("XX_X1", S.XX, S.X1, "-") + branch("XX_X2", S.XX, S.X2, "+")
    late = branch("X1_G", S.X1, S.G, "-") + branch("X2_G", S.X2, S.G, "+")
    return [early, late]
