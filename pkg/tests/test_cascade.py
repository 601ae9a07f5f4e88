import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st
from scipy import integrate

from becsim.cascade import (
    HBAR_EV_S,
    EnergyLevels,
    PulseSpec,
    QDParams,
    build_collapse_ops,
    build_hamiltonian,
    calibrate_pulse_area,
    drive_coefficient,
    fss_from_energies,
    mixing_angles,
    resonant_pump,
    transition_wavelengths,
    two_photon_detuning,
)
from becsim.errors import ConfigurationError, DegenerateEnvelopeError, InvalidLevelsError
from becsim.fock import QDState, make_layout, product_state, rotation_coefficients

UEV = 1e-6


def square(params, area=math.pi, T=160e-12, offset=0.0):
    return calibrate_pulse_area(PulseSpec("square", 0.0, resonant_pump(params) + offset, T / 2, T), area)


# mixing angles ---------------------------------------------------------------

def test_mixing_angles_examples():
    assert mixing_angles(5 * UEV, 0) == (0.0, 0.0)
    theta, phi = mixing_angles(0.0, 1 * UEV)
    assert theta == pytest.approx(math.pi / 4) and phi == 0.0
    theta, phi = mixing_angles(2 * UEV, 1 * UEV * np.exp(1j * math.pi / 3))
    assert theta == pytest.approx(math.pi / 8) and phi == pytest.approx(math.pi / 3)


def test_mixing_angle_negative_splitting_upper_half():
    theta, _ = mixing_angles(-2 * UEV, 1 * UEV)
    assert math.pi / 4 < theta <= math.pi / 2


@given(
    st.floats(-20, 20).filter(lambda x: abs(x) > 1e-3),
    st.floats(0, 10),
    st.floats(-math.pi, math.pi),
)
def test_mixing_angles_diagonalize_exciton_hamiltonian(delta, mag, arg):
    d = mag * np.exp(1j * arg)
    h = np.array([[delta / 2, d], [np.conj(d), -delta / 2]])
    theta, phi = mixing_angles(delta, d)
    u = np.array([rotation_coefficients(s, theta, phi) for s in "+-"]).T
    diag = u.conj().T @ h @ u
    omega = math.sqrt(delta**2 + 4 * mag**2)
    np.testing.assert_allclose(diag, np.diag([omega / 2, -omega / 2]), atol=1e-12 * max(1, omega))


# energies and wavelengths ----------------------------------------------------

def test_fss_from_energies():
    assert fss_from_energies(5e-6, 0, 5e-6, 0) == pytest.approx(5e-6)
    assert fss_from_energies(1.3, 1.3, 2.6, 2.6) == 0
    assert fss_from_energies(4e-6, 0, 6e-6, 0) == pytest.approx(5e-6)


def test_levels_and_excitation_ordering():
    lv = QDParams(1.3, 3e-3, fss=5 * UEV).levels()
    assert lv.X1 - lv.X2 == pytest.approx(5 * UEV)
    assert lv.XX == pytest.approx(2.6 - 3e-3)
    assert lv.X1 - lv.G > lv.excitation > lv.XX - lv.X1


@pytest.mark.parametrize("energy, nm", [(0.805, 1540.183), (1.5910, 779.288)])
def test_wavelengths_against_quoted_values(energy, nm):
    # the quoted values were produced with slightly different constants
    lam = transition_wavelengths(QDParams(energy, 0.0).levels())["lambda3"]
    assert lam * 1e9 == pytest.approx(nm, abs=0.05)


def test_degenerate_cascade_has_one_wavelength():
    lams = transition_wavelengths(QDParams(1.3, 0.0).levels())
    assert len({round(v, 20) for v in lams.values()}) == 1


def test_wavelengths_reject_non_positive_gap():
    with pytest.raises(InvalidLevelsError):
        transition_wavelengths(EnergyLevels(G=0.0, X1=1.0, X2=1.0, XX=1.0))


def test_params_validation_names_field():
    with pytest.raises(ConfigurationError) as err:
        QDParams(1.3, 0.0, rates={"XX_X1": 1.0})
    assert err.value.field == "qd.gammas_per_s"
    with pytest.raises(ConfigurationError):
        QDParams(-1.0, 0.0)


# pulse -----------------------------------------------------------------------

def test_two_photon_detuning():
    p = QDParams(1.3, 3e-3)
    assert two_photon_detuning(resonant_pump(p), p.biexciton_energy) == pytest.approx(0, abs=1.0)
    assert two_photon_detuning(resonant_pump(p) + 1e10, p.biexciton_energy) == pytest.approx(2e10, rel=1e-6)


def test_square_area_and_calibration():
    p = QDParams(1.3, 3e-3)
    spec = calibrate_pulse_area(PulseSpec("square", 1.0, resonant_pump(p), 0.5e-9, 1e-9), math.pi)
    assert spec.omega0 == pytest.approx(math.pi * 1e9, rel=1e-12)
    assert calibrate_pulse_area(spec, 0.0).omega0 == 0.0
    assert square(p, 5 * math.pi).area() == pytest.approx(5 * math.pi)


def test_gaussian_calibration_matches_quadrature():
    p = QDParams(1.3, 3e-3)
    spec = calibrate_pulse_area(PulseSpec("gaussian", 1.0, resonant_pump(p), 0.0, 100e-12), math.pi)
    assert spec.omega0 == pytest.approx(2.951e10, rel=1e-3)
    numeric, _ = integrate.quad(lambda t: drive_coefficient(spec, t), -1e-9, 1e-9, points=[0.0], limit=200)
    assert numeric == pytest.approx(math.pi, rel=1e-9)


def test_square_envelope_half_open():
    p = QDParams(1.3, 3e-3)
    spec = square(p)
    assert spec.envelope_value(0.0) == 1.0
    assert spec.envelope_value(160e-12) == 0.0


def test_custom_envelope_and_support_rule():
    p = QDParams(1.3, 3e-3)
    ts = (0.0, 1e-10, 2e-10)
    spec = PulseSpec("custom", 1.0, resonant_pump(p), 1e-10, 1e-10, samples=(ts, (0.0, 1.0, 0.0)))
    assert spec.envelope_area() == pytest.approx(1e-10)
    with pytest.raises(ConfigurationError):
        PulseSpec("custom", 1.0, resonant_pump(p), 0.0, 1e-12, samples=((0.0, 1e-9), (1.0, 1.0)))


def test_zero_envelope_cannot_be_calibrated():
    p = QDParams(1.3, 3e-3)
    spec = PulseSpec("custom", 1.0, resonant_pump(p), 1e-10, 1e-10, samples=((0.0, 2e-10), (0.0, 0.0)))
    with pytest.raises(DegenerateEnvelopeError):
        calibrate_pulse_area(spec, math.pi)


# Hamiltonian -----------------------------------------------------------------

def _qd_block(op):
    m = op.layout.photonic_dim
    return op.matrix[::m, ::m]


def test_hamiltonian_terms():
    p0 = QDParams(1.3, 3e-3)
    h0 = build_hamiltonian(make_layout(False), p0, square(p0))
    assert h0.static[0].sparse.nnz == 0

    p = QDParams(1.3, 3e-3, fss=5 * UEV)
    lay = make_layout(True)
    h = build_hamiltonian(lay, p, square(p, offset=1e10))
    w = 5 * UEV / HBAR_EV_S / 2
    np.testing.assert_allclose(np.diag(_qd_block(h.static[0])), [0, w, -w, 0])
    for op in h.static + [op for op, _ in h.timed]:
        assert abs(op.sparse - op.sparse.conj().T).max() == 0
    # block support: FSS on {X1, X2}, detuning on XX, drive on {G, XX}
    assert np.flatnonzero(np.abs(_qd_block(h.static[0])).sum(0)).tolist() == [1, 2]
    assert np.flatnonzero(np.abs(_qd_block(h.static[1])).sum(0)).tolist() == [3]
    assert np.flatnonzero(np.abs(_qd_block(h.timed[0][0])).sum(0)).tolist() == [0, 3]
    assert _qd_block(h.static[1])[3, 3] == pytest.approx(1e10)


def test_fss_free_evolution_phase():
    p = QDParams(1.3, 3e-3, fss=5 * UEV)
    lay = make_layout(True)
    h = build_hamiltonian(lay, p, square(p))
    a, b = 0.6, 0.8j
    psi = a * product_state(lay, QDState.X1) + b * product_state(lay, QDState.X2)
    t = 0.7 * HBAR_EV_S / (5 * UEV)
    i1, i2 = lay.basis_index(QDState.X1), lay.basis_index(QDState.X2)
    block = h.static[0].matrix[np.ix_([i1, i2], [i1, i2])]
    out = scipy.linalg.expm(-1j * block * t) @ psi[[i1, i2]]
    w = 5 * UEV / HBAR_EV_S
    np.testing.assert_allclose(out, [np.exp(-1j * w * t / 2) * a, np.exp(1j * w * t / 2) * b])
    assert np.angle(out[1] / out[0] / (b / a)) == pytest.approx(w * t)


def test_layout_mismatch():
    p = QDParams(1.3, 3e-3, fss=5 * UEV)
    with pytest.raises(ConfigurationError):
        build_hamiltonian(make_layout(False), p, square(p))
    with pytest.raises(ConfigurationError):
        build_collapse_ops(make_layout(False), p)


# collapse operators ----------------------------------------------------------

def test_collapse_early_creates_spin_photon_entanglement():
    g1, g2 = 4e9, 7e9
    p = QDParams(1.3, 3e-3, fss=5 * UEV, rates={"XX_X1": g1, "XX_X2": g2, "X1_G": 1e9, "X2_G": 1e9})
    lay = make_layout(True)
    early, late = build_collapse_ops(lay, p)
    out = early @ product_state(lay, QDState.XX)
    # theta = 0: "-" is V, "+" is H
    expected = math.sqrt(g1) * product_state(lay, QDState.X1, {("lambda1", "V"): 1}) + math.sqrt(
        g2
    ) * product_state(lay, QDState.X2, {("lambda2", "H"): 1})
    np.testing.assert_allclose(out, expected)


@pytest.mark.parametrize("fss", [False, True])
def test_collapse_annihilates_ground(fss):
    p = QDParams(1.3, 3e-3, fss=5 * UEV if fss else 0.0)
    lay = make_layout(fss)
    for L in build_collapse_ops(lay, p):
        assert not np.any(L @ product_state(lay, QDState.G))


def _touched_modes(op, lay, qd_from):
    out = op @ product_state(lay, qd_from)
    occ = np.indices(lay.dims).reshape(len(lay.dims), -1)[1:]
    return {f.mode_label for i, f in enumerate(lay.factors) if np.any(occ[i][np.abs(out) > 0])}


@pytest.mark.parametrize("fss", [False, True])
def test_branch_photons_share_modes_only_when_degenerate(fss):
    p = QDParams(1.3, 3e-3, fss=5 * UEV if fss else 0.0)
    lay = make_layout(fss)
    _, late = build_collapse_ops(lay, p)
    same = _touched_modes(late, lay, QDState.X1) == _touched_modes(late, lay, QDState.X2)
    assert same is (not fss)


def test_maximal_mixing_late_operator_form():
    # Delta = 0, |delta| > 0 gives theta = pi/4: both branches carry both polarizations
    p = QDParams(1.3, 3e-3, mixing=1 * UEV)
    lay = make_layout(True)
    _, late = build_collapse_ops(lay, p)
    for qd, mode in ((QDState.X1, "lambda3"), (QDState.X2, "lambda4")):
        out = late @ product_state(lay, qd)
        amps = [out[lay.basis_index(QDState.G, {(mode, pol): 1})] for pol in "HV"]
        np.testing.assert_allclose(np.abs(amps), math.sqrt(6.1e9 / 2))
