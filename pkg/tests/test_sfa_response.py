import math
import warnings

import numpy as np
import pytest

from sqhhg import kernels
from sqhhg.errors import InvalidAtomError, InvalidGridError, InvalidInputError
from sqhhg.sfa_response import (AtomModel, InterpolatedResponse, LinearResponse, SFAResponse, SyntheticResponse,
                                chi_displacement, detect_cutoff, field_from_alpha, harmonic_spectrum,
                                lewenstein_dipole, response_grid, spectral_component, spectral_dipole,
                                spectrum_to_csv)

W = 0.057
EPS = 1e-4
IP3 = 11 * W
E3 = 2 * W * math.sqrt(9 * W)


@pytest.fixture(scope="module")
def fig3_series():
    drive = field_from_alpha(E3 / (2 * EPS), EPS, W)
    return lewenstein_dipole(drive, AtomModel(IP3))


def test_drive_field_shape():
    f = field_from_alpha(2.0 + 1.0j, 0.01, W, n_cycles=4)
    t = f.time_grid(256)
    e = f.values(t)
    env = f.envelope_values(t)
    assert env[0] == 0 and env[-1] == pytest.approx(0, abs=1e-12)
    assert np.max(np.abs(e)) <= f.amplitude * (1 + 1e-12)
    assert f.values(np.array([0.0]))[0] == pytest.approx(2 * 0.01 * 1.0)


@pytest.mark.parametrize("kw", [dict(epsilon1=0), dict(omega=-1), dict(envelope="gauss"), dict(n_cycles=1)])
def test_field_validation(kw):
    args = dict(alpha=1.0, epsilon1=0.01, omega=W)
    args.update(kw)
    with pytest.raises(InvalidInputError):
        field_from_alpha(**args)


def test_atom_validation():
    with pytest.raises(InvalidAtomError):
        AtomModel(0.0)
    with pytest.raises(InvalidAtomError):
        AtomModel(0.5, "hydrogenic-2p")


def test_grid_validation():
    drive = field_from_alpha(100.0, EPS, W)
    t = drive.time_grid(128)
    with pytest.raises(InvalidGridError):
        lewenstein_dipole(drive, AtomModel(0.5), tgrid=t[::-1])
    bad = t.copy()
    bad[5] += 0.3 * (t[1] - t[0])
    with pytest.raises(InvalidGridError):
        lewenstein_dipole(drive, AtomModel(0.5), tgrid=bad)
    with pytest.raises(InvalidGridError):
        lewenstein_dipole(drive, AtomModel(0.5), tgrid=drive.time_grid(32))


def test_over_barrier_warns():
    drive = field_from_alpha(0.1 / (2 * EPS), EPS, W)
    with pytest.warns(RuntimeWarning, match="barrier"):
        lewenstein_dipole(drive, AtomModel(0.5), points_per_cycle=128)


def test_backends_agree():
    if not kernels.compiled_available():
        pytest.skip("compiled kernels not built")
    drive = field_from_alpha(E3 / (2 * EPS) * complex(0.8, 0.6), EPS, W, n_cycles=3)
    a = lewenstein_dipole(drive, AtomModel(IP3), points_per_cycle=128, backend="compiled")
    b = lewenstein_dipole(drive, AtomModel(IP3), points_per_cycle=128, backend="python")
    assert np.max(np.abs(a.d - b.d)) <= 1e-12 * np.max(np.abs(b.d))


def test_threads_do_not_change_result():
    if not kernels.compiled_available():
        pytest.skip("compiled kernels not built")
    drive = field_from_alpha(E3 / (2 * EPS), EPS, W, n_cycles=3)
    a = lewenstein_dipole(drive, AtomModel(IP3), points_per_cycle=128, num_threads=1)
    b = lewenstein_dipole(drive, AtomModel(IP3), points_per_cycle=128, num_threads=4)
    assert np.array_equal(a.d, b.d)


def test_even_harmonics_suppressed(fig3_series):
    orders, d = harmonic_spectrum(fig3_series, 40)
    p = np.abs(d) ** 2
    odd, even = p[(orders % 2 == 1) & (orders >= 15)], p[(orders % 2 == 0) & (orders >= 15)]
    assert np.min(odd[:10]) / np.max(even) > 1e3


def test_cutoff_detected(fig3_series):
    orders, d = harmonic_spectrum(fig3_series, 60)
    assert detect_cutoff(orders, np.abs(d) ** 2) == 39


def test_detect_cutoff_synthetic():
    o = np.arange(1, 30)
    p = np.where(o % 2, 1.0, 1e-9)
    p[o > 21] = 1e-3 * np.exp(-(o[o > 21] - 21.0))
    p[o == 19] = 1.2
    assert detect_cutoff(o, p) == 19
    with pytest.raises(InvalidInputError):
        detect_cutoff(np.array([1, 3]), np.array([1.0, 1.0]))


def test_spectral_component_conjugate_symmetry(fig3_series):
    s = fig3_series
    T = s.period
    a = spectral_component(s.t, s.d, 21 * W, T, 8 * T)
    b = spectral_component(s.t, s.d, -21 * W, T, 8 * T)
    assert b == pytest.approx(a.conjugate(), rel=1e-12)


def test_spectral_dipole_rejects_nonpositive(fig3_series):
    with pytest.raises(InvalidInputError):
        spectral_dipole(fig3_series, 0)
    with pytest.raises(InvalidInputError):
        spectral_dipole(fig3_series.d, 3)


def test_sfa_phase_covariance():
    m = SFAResponse(AtomModel(IP3), EPS, W, n_cycles=8)
    g = E3 / (2 * EPS)
    for q, phi in [(21, 0.4), (33, 1.1)]:
        lhs = m.evaluate(g * complex(math.cos(phi), math.sin(phi)), q)
        rhs = complex(math.cos(q * phi), math.sin(q * phi)) * m.evaluate(g, q)
        assert abs(lhs - rhs) <= 1e-3 * abs(rhs)


def test_sfa_dipole_consistency_and_cache():
    m = SFAResponse(AtomModel(IP3), EPS, W, n_atoms=10, points_per_cycle=128, n_cycles=3)
    g = E3 / (2 * EPS)
    chi = m.evaluate(g, 21)
    assert chi == pytest.approx(chi_displacement(m.dipole(g, 21), 10, 21, EPS), rel=1e-15)
    assert m.series(g) is m.series(g)
    assert m.dipole(0, 21) == 0


def test_chi_displacement_validation():
    with pytest.raises(InvalidInputError):
        chi_displacement(1.0, 0.5, 3, 0.1)


def test_synthetic_response_closed_form():
    m = SyntheticResponse(2.0, 3.0, 0.5, 1.5)
    a = 1.2 * np.exp(0.7j)
    expect = 2.0 * (1.2 / 1.5) ** 3 * np.exp(1j * (5 * 0.7 + 0.5 * (1.44 - 2.25)))
    assert m.evaluate(a, 5) == pytest.approx(expect, rel=1e-14)
    v = m.evaluate_many(np.array([a, 2 * a]), 5)
    assert v[0] == pytest.approx(expect, rel=1e-14)


def test_interpolated_response():
    base = SyntheticResponse(1.0, 2.0, 0.3, 1.0)
    xs = np.linspace(0.5, 2.5, 41)
    ys = np.linspace(-1, 1, 41)
    m = InterpolatedResponse.from_model(base, xs, ys, 3)
    a = 1.37 + 0.21j
    assert abs(m.evaluate(a, 3) - base.evaluate(a, 3)) < 1e-4 * abs(base.evaluate(a, 3))
    assert np.isnan(m.evaluate(5.0, 3))
    with pytest.raises(InvalidInputError):
        m.evaluate(a, 5)


def test_response_table_csv(tmp_path):
    t = response_grid(LinearResponse(2.0), (np.array([0.0, 1.0]), np.array([0.0, 1.0, 2.0])), 1)
    assert t.chi.shape == (3, 2)
    assert t.chi[2, 1] == 2 * (1 + 2j)
    p = tmp_path / "r.csv"
    t.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "# alpha_x, alpha_y, re_chi, im_chi" and len(lines) == 7


def test_spectrum_csv(tmp_path):
    p = tmp_path / "s.csv"
    spectrum_to_csv(p, [1, 3], [1 + 1j, 2j])
    lines = p.read_text().splitlines()
    assert lines[0] == "# q, re_d, im_d, abs_d2"
    assert lines[2].split(", ")[-1] == "4"
