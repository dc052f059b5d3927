import ast
import math

import numpy as np
import pytest

from sqhhg import kernels
from sqhhg.errors import InvalidInputError, SingularMapError, UnsupportedRepresentationError
from sqhhg.harmonic_map import (CoherentHarmonic, MomentSpec, glauber_p_of_harmonic, harmonic_moment_mc,
                                husimi_of_harmonic, invert_response, jacobian_at, jacobian_field,
                                principal_axes, pushforward_mc, trace_ridge)
from sqhhg.phase_space import GaussianStateSpec, PhasePoint, QGrid, check_normalization, default_axes, q_value
from sqhhg.sfa_response import LinearResponse, SyntheticResponse


@pytest.mark.parametrize("key", ["(1.3, 2.5, 0.7, 1.1, 5, 0.4, -0.9)", "(0.8, 1.0, 0.0, 2.0, 3, 2.0, 0.0)",
                                 "(2.0, 4.0, 0.8, 2.0, 23, -1.2, 1.7)"])
def test_jacobian_oracle(oracle, key):
    c, eta, kappa, a0, q, ax, ay = ast.literal_eval(key)
    m = SyntheticResponse(c, eta, kappa, a0)
    assert jacobian_at(m, complex(ax, ay), q) == pytest.approx(oracle["synthetic_jacobian"][key], rel=1e-6)


def test_singular_map():
    with pytest.raises(SingularMapError):
        jacobian_at(SyntheticResponse(1.0, 3.0, 0.0, 1.0), 0j, 3)


def test_jacobian_field_linear():
    jf = jacobian_field(LinearResponse(0.5), np.linspace(-1, 1, 5), np.linspace(-1, 1, 5), 1)
    assert np.allclose(jf.values, 4.0, rtol=1e-8)


@pytest.mark.parametrize("q", [3, 5])
def test_invert_finds_all_branches(q):
    m = SyntheticResponse(1.3, q, 0.0, 1.0)
    target = 0.7 * np.exp(0.3j)
    bs = invert_response(m, target, q, (-2, 2, -2, 2))
    assert len(bs) == q
    for a in bs.alphas:
        assert abs(m.evaluate(a, q) - target) < 1e-9
    gaps = np.diff(np.sort(np.angle(bs.alphas)))
    assert np.allclose(gaps, 2 * np.pi / q, atol=1e-6)


def test_invert_outside_image():
    bs = invert_response(LinearResponse(0.1), 5.0 + 0j, 1, (-1, 1, -1, 1))
    assert len(bs) == 0


def test_identity_map_reproduces_pump():
    pump = GaussianStateSpec(PhasePoint(1.0, -0.5), 0.6, 0.4)
    xs, ys = default_axes(pump, 61, 5.0)
    g = husimi_of_harmonic(pump, LinearResponse(1.0), 1, (xs, ys))
    ref = q_value(pump, xs[None, :] + 1j * ys[:, None])
    assert np.nanmax(np.abs(g.values - ref)) < 1e-10


def test_linear_map_jacobian_law():
    c = 0.6 * np.exp(0.4j)
    pump = GaussianStateSpec(PhasePoint(0.5, 0.2), 0.5, 0.0)
    xs = np.linspace(-3, 3, 41)
    m = LinearResponse(c)
    for power in (0, 1, 2):
        g = husimi_of_harmonic(pump, m, 1, (xs, xs), jacobian_power=power, search_domain=(-8, 8, -8, 8))
        z = xs[None, :] + 1j * xs[:, None]
        ref = q_value(pump, z / c) * abs(c) ** (-2 * power)
        assert np.allclose(g.values, ref, rtol=1e-7, atol=1e-12)


def test_pushforward_measure_normalized():
    pump = GaussianStateSpec(PhasePoint(0.2, 0.0), 0.3, 0.0)
    xs = np.linspace(-4, 4, 161)
    g = husimi_of_harmonic(pump, LinearResponse(0.5), 1, (xs, xs), jacobian_power=1)
    assert check_normalization(g) < 1e-6


def test_branch_reduce_sum_vs_max():
    m = SyntheticResponse(1.0, 2.0, 0.0, 1.0)
    pump = GaussianStateSpec(0j, 0.4)
    xs = np.linspace(-2, 2, 21)
    s = husimi_of_harmonic(pump, m, 2, (xs, xs), jacobian_power=0, branch_reduce="sum", search_domain=(-3, 3, -3, 3))
    x = husimi_of_harmonic(pump, m, 2, (xs, xs), jacobian_power=0, branch_reduce="max", search_domain=(-3, 3, -3, 3))
    assert s.metadata["max_branches"] == 2
    z = xs[None, :] + 1j * xs[:, None]
    ok = ~s.mask & ~x.mask & (z != 0)
    # a squeezed vacuum is inversion symmetric, so both preimages carry the same value;
    # the critical value chi = 0 has the single preimage alpha = 0
    assert np.allclose(s.values[ok], 2 * x.values[ok], rtol=1e-8)
    assert s.values[z == 0] == pytest.approx(x.values[z == 0])


def test_invalid_power():
    with pytest.raises(InvalidInputError):
        husimi_of_harmonic(GaussianStateSpec(), LinearResponse(), 1, (np.arange(3.0), np.arange(3.0)),
                           jacobian_power=3)


def test_glauber_p_variants():
    m = SyntheticResponse(0.5, 2.0, 0.0, 1.0)
    coh = glauber_p_of_harmonic(GaussianStateSpec(PhasePoint(1.0, 0.0)), m, 2, None)
    assert isinstance(coh, CoherentHarmonic) and coh.chi == pytest.approx(0.5)
    with pytest.raises(UnsupportedRepresentationError):
        glauber_p_of_harmonic(GaussianStateSpec(0j, 0.5), m, 2, (np.arange(3.0), np.arange(3.0)))


def test_glauber_p_linear_thermal():
    pump = GaussianStateSpec(PhasePoint(1.0, 0.0), 0.0, 0.0, 0.4)
    xs = np.linspace(-1.5, 2.5, 81)
    ys = np.linspace(-2, 2, 81)
    g = glauber_p_of_harmonic(pump, LinearResponse(0.8), 1, (xs, ys))
    z = xs[None, :] + 1j * ys[:, None]
    s = 0.4 * 0.64
    ref = np.exp(-np.abs(z - 0.8) ** 2 / s) / (math.pi * s)
    assert np.allclose(g.values, ref, rtol=1e-7, atol=1e-12)


def test_mc_coherent_linear():
    pump = GaussianStateSpec(PhasePoint(1.0, 0.5))
    xs = np.linspace(-2, 3, 11)
    g = pushforward_mc(pump, LinearResponse(0.5), 1, 100_000, 9, (xs, xs))
    z = xs[None, :] + 1j * xs[:, None]
    ref = np.exp(-np.abs(z - 0.5 * (1 + 0.5j)) ** 2) / math.pi
    assert np.max(np.abs(g.values - ref) / g.errors) < 5
    assert g.metadata["rejected"] == 0


def test_mc_deterministic_across_threads_and_backends():
    pump = GaussianStateSpec(PhasePoint(0.5, 0.0), 0.3)
    xs = np.linspace(-2, 2, 7)
    m = SyntheticResponse(0.4, 2.0, 0.0, 1.0)
    a = pushforward_mc(pump, m, 2, 20_000, 1, (xs, xs))
    b = pushforward_mc(pump, m, 2, 20_000, 1, (xs, xs))
    assert np.array_equal(a.values, b.values)
    if kernels.compiled_available():
        c = pushforward_mc(pump, m, 2, 20_000, 1, (xs, xs), backend="compiled", num_threads=3)
        d = pushforward_mc(pump, m, 2, 20_000, 1, (xs, xs), backend="python")
        assert np.array_equal(a.values, c.values)
        assert np.allclose(c.values, d.values, rtol=1e-12, atol=1e-15)


def test_mc_requires_samples():
    with pytest.raises(InvalidInputError):
        pushforward_mc(GaussianStateSpec(), LinearResponse(), 1, 100, 0, (np.arange(3.0), np.arange(3.0)))


def test_moment_spec_validation():
    with pytest.raises(InvalidInputError):
        MomentSpec(5, 0)
    e = harmonic_moment_mc(GaussianStateSpec(), LinearResponse(), 1, MomentSpec(0, 0), 10_000, 0)
    assert e.value == 1


def test_mean_field_moment():
    pump = GaussianStateSpec(PhasePoint(0.8, -0.3), 0.5, 0.2)
    e = harmonic_moment_mc(pump, LinearResponse(1.0), 1, MomentSpec(0, 1), 200_000, 4)
    assert abs(e.value - pump.gamma.complex) < 4 * abs(e.error)


def test_principal_axes_gaussian():
    pump = GaussianStateSpec(PhasePoint(0.5, 0.0), 0.7, 0.5)
    xs = np.linspace(-6, 7, 201)
    g = QGrid(xs, xs, q_value(pump, xs[None, :] + 1j * xs[:, None]))
    c, ev, ang = principal_axes(g)
    assert abs(c - 0.5) < 1e-6
    assert np.allclose(ev, np.sort(np.linalg.eigvalsh(pump.covariance())), rtol=1e-4)
    assert ang == pytest.approx(0.5 + math.pi / 2, abs=1e-6)


def test_trace_ridge_on_spiral():
    xs = np.linspace(-10, 10, 201)
    z = xs[None, :] + 1j * xs[:, None]
    rho, th = np.abs(z), np.angle(z) % (2 * math.pi)
    spiral = 3 + th  # radius grows by one per radian
    v = np.exp(-(rho - spiral) ** 2 / 0.1)
    rid = trace_ridge(QGrid(xs, xs, v), start_angle=0.0)
    assert len(rid) >= 30 and rid.monotonic
    assert rid.radii[0] == pytest.approx(3.0, abs=0.1)


@pytest.mark.slow
def test_fig1b_preset_rotates_the_lobe():
    from sqhhg.cli import _chi_axes, _search_domain, build_model, build_pump
    from sqhhg.config import load_preset
    from sqhhg.harmonic_map import principal_axes
    cfg = load_preset("fig1b")
    pump = build_pump(cfg)
    model = build_model(cfg, pump)
    q, g = cfg["harmonic"]["q"], cfg["grid"]
    grid = husimi_of_harmonic(pump, model, q, _chi_axes(cfg, model, pump, q), g["jacobian_power"],
                              g["branch_reduce"], _search_domain(cfg, pump), g["seed_points"])
    _, eig, angle = principal_axes(grid)
    pump_major = (pump.squeeze_angle + math.pi / 2) % math.pi
    gap = abs((angle - pump_major + math.pi / 2) % math.pi - math.pi / 2)
    # single-valued near gamma, elongated, and the long axis turned away from the pump's
    assert grid.metadata["max_branches"] == 1
    assert eig[1] / eig[0] > 5
    assert gap > math.radians(30)
