"""Acceptance criteria 1-9. Each test prints one PASS/FAIL line."""
import math

import numpy as np
import pytest
from scipy import stats
from scipy.optimize import brentq

from sqhhg.cli import build_model, build_pump
from sqhhg.config import load_preset
from sqhhg.harmonic_map import (MomentSpec, glauber_p_of_harmonic, harmonic_moment_mc, husimi_of_harmonic,
                                pushforward_mc, trace_ridge)
from sqhhg.phase_space import (GaussianStateSpec, PhasePoint, check_normalization, husimi_grid, q_value,
                               sample_q)
from sqhhg.sfa_response import (AtomModel, SFAResponse, SyntheticResponse, detect_cutoff, field_from_alpha,
                                harmonic_spectrum, lewenstein_dipole)
from sqhhg.squeezing import (ABCoefficients, DipoleQuadratures, extract_ab, variance_curve, variance_eq11,
                             variance_from_prefactor, variance_mc_crosscheck)
from sqhhg.trajectories import (FieldParams, cutoff_harmonic, ionization_window, max_return_energy, residuals,
                                solve_trajectories)

W = 0.057


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    return emit


def _holomorphic_case():
    # chi = c (alpha / alpha0)^q: holomorphic, with A = -q sin(phi)/g and B = q cos(phi)/g at gamma = g e^{i phi}
    q, g, phi = 3, 30.0, math.pi / 6
    gam = g * complex(math.cos(phi), math.sin(phi))
    model = SyntheticResponse(10.0, q, 0.0, g)
    theta = math.atan2(model.evaluate(gam, q).imag, model.evaluate(gam, q).real) + math.pi / 2
    return q, g, phi, gam, model, theta


def test_criterion_1_shot_noise(report):
    rng = np.random.default_rng(2024)
    exact = 0
    for _ in range(1000):
        a, b = rng.normal(0, 50, 2)
        dx, dy = rng.normal(0, 1, 2)
        ab = ABCoefficients(float(a), float(b), PhasePoint(1.0, 0.0), 11, 1e-3, True)
        v = variance_eq11(float(rng.uniform(0, 2 * math.pi)), 0.0, ab, DipoleQuadratures(float(dx), float(dy)),
                          float(rng.uniform(1e-5, 1e-1)), float(rng.uniform(1, 1e6)), int(rng.integers(1, 60)),
                          float(rng.uniform(0, math.pi)))
        exact += v == 1.0
    q, _, _, gam, model, theta = _holomorphic_case()
    cc = variance_mc_crosscheck(GaussianStateSpec(PhasePoint(gam.real, gam.imag)), model, q, theta, 100_000, 11)
    z = abs(cc.mc - 1.0) / cc.mc_error
    ok = exact == 1000 and cc.analytic == 1.0 and z < 3
    report(1, ok, f"{exact}/1000 exact; MC at r=0: {cc.mc:.5f} +- {cc.mc_error:.5f} (z={z:.2f})")
    assert ok


def test_criterion_2_linearized_vs_mc(report):
    q, g, phi, gam, model, theta = _holomorphic_case()
    ab = extract_ab(model, gam, q)
    ab_ok = math.isclose(ab.a, -q * math.sin(phi) / g, rel_tol=1e-6) and math.isclose(ab.b, q * math.cos(phi) / g,
                                                                                      rel_tol=1e-6)
    parts, ok = [], ab_ok
    for r in (0.2, 0.5, 1.0):
        pump = GaussianStateSpec(PhasePoint(gam.real, gam.imag), r, 0.0)
        cc = variance_mc_crosscheck(pump, model, q, theta, 1_000_000, 17)
        ok &= cc.discrepancy < 0.1 and cc.regime_warning is None
        parts.append(f"r={r}: analytic {cc.analytic:.4f} mc {cc.mc:.4f} rel {cc.discrepancy:.4f}")
    report(2, ok, f"(A,B) analytic match {ab_ok}; " + "; ".join(parts))
    assert ok


def test_criterion_3_boundary(report):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        b = float(rng.uniform(0.05, 5.0))
        a = b * float(rng.uniform(1.01, 20.0))
        ab = ABCoefficients(a, b, PhasePoint(1.0, 0.0), 7, 1e-3, True)
        d = DipoleQuadratures(float(rng.normal()), float(rng.normal()))
        eps, n = 1e-3, 50.0

        def excess(r):
            return variance_eq11(0.3, r, ab, d, eps, n, 7) - 1.0

        # A and B enter per unit field; the sign change sits at ln(|A|/|B|) regardless of scale
        root = brentq(excess, 1e-9, 10.0, xtol=1e-15, rtol=1e-15)
        worst = max(worst, abs(root - math.log(a / b)))
    ok = worst < 1e-6
    report(3, ok, f"max |r_sign_change - ln(A/B)| = {worst:.2e} over 100 pairs")
    assert ok


def test_criterion_4_fig2(report):
    curves = {}
    for name in ("fig2a", "fig2b"):
        cfg = load_preset(name)
        v, f = cfg["variance"], cfg["field"]
        model = build_model(cfg)
        gmag = v["e_gamma_au"] / (2 * f["epsilon1_au"])
        r = np.linspace(0, v["r_max"], v["r_points"])
        curves[name] = variance_curve(cfg.q_list, v["orientations"][0], gmag, r, model, v["theta"], v["prefactor"])
    cfg = load_preset("fig2a")
    e0 = cfg["variance"]["e_gamma_au"]
    qc = cutoff_harmonic(FieldParams(e0, W), cfg["atom"]["ip_au"])
    amp = [c for c in curves["fig2a"] if c.q < qc]
    below = [c.q for c in amp if np.any(c.variance[1:] < 1)]
    top = sorted(amp, key=lambda c: c.q)[-3:]
    depths = [1 - float(np.min(c.variance)) for c in top]
    a_ok = bool(below) and all(x < y for x, y in zip(depths, depths[1:]))
    ph_min = min(float(np.min(c.variance)) for c in curves["fig2b"])
    b_ok = ph_min >= 1 - 1e-12
    large = all(variance_from_prefactor(c.prefactor, c.a_field, c.b_field, 20.0, c.squeeze_angle) > 1
                for cs in curves.values() for c in cs if abs(c.b_field) > 0)
    ok = a_ok and b_ok and large
    squeezed_ph = [c.q for c in curves["fig2b"] if np.min(c.variance) < 1 - 1e-12]
    report(4, ok, f"(a) squeezed harmonics {below}, top-3 depths {[f'{d:.3g}' for d in depths]} "
                  f"for q={[c.q for c in top]} -> {'ok' if a_ok else 'not increasing'}; "
                  f"(b) min variance {ph_min:.4g}, squeezed q={squeezed_ph}; large-r excess {large}")
    assert ok


def test_criterion_5_sfa_physics(report):
    atom = AtomModel(11 * W)
    eps = 1e-4
    out, ok = [], True
    for up_factor in (1.0, 2.0):
        e0 = 2 * W * math.sqrt(9 * W * up_factor)
        drive = field_from_alpha(e0 / (2 * eps), eps, W, n_cycles=8)
        if up_factor > 1:
            # doubling Up puts this atom above barrier suppression; the engine must say so
            with pytest.warns(RuntimeWarning, match="barrier"):
                series = lewenstein_dipole(drive, atom)
        else:
            series = lewenstein_dipole(drive, atom)
        qc = cutoff_harmonic(FieldParams(e0, W), atom.ip)
        orders, d = harmonic_spectrum(series, int(1.5 * qc))
        p = np.abs(d) ** 2
        found = detect_cutoff(orders, p)
        plateau = (orders > atom.ip / W + 2) & (orders < qc)
        supp = float(np.median(p[plateau & (orders % 2 == 1)]) / np.max(p[plateau & (orders % 2 == 0)]))
        ok &= abs(found - qc) <= 2 and supp >= 1e3
        out.append(f"{up_factor:g}xUp: cutoff {found} vs {qc:.2f}, even suppression {supp:.1e}")
    model = SFAResponse(atom, eps, W, n_cycles=8)
    g = 2 * W * math.sqrt(9 * W) / (2 * eps)
    worst = 0.0
    for q, phi in ((21, 0.3), (31, 1.7), (39, 2.9)):
        lhs = model.evaluate(g * complex(math.cos(phi), math.sin(phi)), q)
        rhs = complex(math.cos(q * phi), math.sin(q * phi)) * model.evaluate(g, q)
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    ok &= worst <= 1e-3
    report(5, ok, "; ".join(out) + f"; phase covariance {worst:.1e}")
    assert ok


def test_criterion_6_jacobian_vs_mc(report):
    pump = GaussianStateSpec(PhasePoint(4.0, 0.0), 0.0, 0.0, 0.5)
    # chi = 0.04 alpha^2 is holomorphic and contractive over the pump support, so the
    # positive-P weights have finite variance
    model = SyntheticResponse(0.04, 2.0, 0.0, 1.0)
    q = 2
    c0 = model.evaluate(pump.gamma.complex, q)
    px = np.linspace(c0.real - 1.2, c0.real + 1.2, 241)
    py = np.linspace(-1.2, 1.2, 241)
    p_grid = glauber_p_of_harmonic(pump, model, q, (px, py))
    qx = np.linspace(c0.real - 3, c0.real + 3, 31)
    qy = np.linspace(-3, 3, 31)
    src = (px[None, :] + 1j * py[:, None]).ravel()
    weight = np.nan_to_num(p_grid.values).ravel() * p_grid.cell_area
    nodes = (qx[None, :] + 1j * qy[:, None]).ravel()
    conv = np.array([np.sum(weight * np.exp(-np.abs(z - src) ** 2)) for z in nodes]).reshape(31, 31) / math.pi
    mc = pushforward_mc(pump, model, q, 1_000_000, 606, (qx, qy))
    valid = ~mc.mask
    z = np.abs(conv - mc.values) / mc.errors
    frac = float(np.mean(z[valid] < 3))
    # the same comparison must reject a harmonic wrongly taken as the coherent state |chi(gamma)>
    wrong = np.exp(-np.abs(nodes - c0) ** 2).reshape(31, 31) / math.pi
    frac_wrong = float(np.mean((np.abs(wrong - mc.values) / mc.errors)[valid] < 3))
    ok = frac >= 0.99 and not mc.metadata["oracle_unreliable"] and frac_wrong < 0.99
    report(6, ok, f"{frac * 100:.1f}% of {int(valid.sum())} nodes within 3 MC errors (max z {z.max():.2f}); "
                  f"P mass {np.sum(weight):.6f}; coherent-state strawman {frac_wrong * 100:.1f}%")
    assert ok


def test_criterion_7_trajectories(report):
    field = FieldParams.from_up(9 * W, W)
    ip = 11 * W
    ke, p0, p1 = max_return_energy()
    worst, counts = 0.0, set()
    for q in range(13, 40, 2):
        sols = solve_trajectories(q, field, ip)
        counts.add(len(sols))
        assert {t.branch for t in sols} == {"short", "long"}
        for t in sols:
            e, x, _ = residuals(t, field, q, ip)
            worst = max(worst, e, x)
    qc = cutoff_harmonic(field, ip)
    merged = solve_trajectories(qc, field, ip)
    merge_ok = len(merged) == 2 and merged[0].t0 == merged[1].t0
    births = list(ionization_window(range(13, 40, 2), field, ip, "short").values())
    mono = all(b1 < b0 for b0, b1 in zip(births, births[1:]))
    ok = worst < 1e-9 and counts == {2} and merge_ok and 3.16 <= ke <= 3.18 and mono
    report(7, ok, f"max residual {worst:.1e}; branches per harmonic {sorted(counts)}; merge at cutoff {merge_ok}; "
                  f"KE_max {ke:.5f} Up; short-branch births monotonic {mono}")
    assert ok


def test_criterion_8_fig3b(report):
    cfg = load_preset("fig3b")
    pump = build_pump(cfg)
    model = build_model(cfg, pump)
    g = cfg["grid"]
    e_vac = 2 * cfg["field"]["epsilon1_au"] * math.sinh(pump.r)
    xs = np.linspace(-g["extent"], g["extent"], g["points"])
    s = g["search_extent"]
    grid = husimi_of_harmonic(pump, model, cfg["harmonic"]["q"], (xs, xs), g["jacobian_power"], g["branch_reduce"],
                              (-s, s, -s, s), g["seed_points"])
    j, i = np.unravel_index(np.nanargmax(grid.values), grid.values.shape)
    at_origin = xs[i] == 0 and xs[j] == 0
    ridge = trace_ridge(grid, angle_step=math.pi / 16)
    off_origin = len(ridge) > 0 and ridge.radii[0] > 3 * grid.dx
    ok = abs(e_vac - 0.189) < 1e-6 and at_origin and off_origin and ridge.monotonic and len(ridge) >= 9
    report(8, ok, f"|E_vac| {e_vac:.6f}; max {grid.values[j, i]:.5f} at ({xs[i]:g}, {xs[j]:g}); ridge of "
                  f"{len(ridge)} steps, radius {ridge.radii[0]:.2f} -> {ridge.radii[-1]:.2f}, "
                  f"monotonic {ridge.monotonic}")
    assert ok


def test_criterion_9_phase_space(report):
    specs = [GaussianStateSpec(PhasePoint(0.5, -0.3), 0.8, 0.4), GaussianStateSpec(0j, 1.5, 0.0),
             GaussianStateSpec(PhasePoint(1.0, 1.0), 0.0, 0.0, 0.7)]
    norm = max(check_normalization(husimi_grid(s, points=241)) for s in specs)
    peak = max(abs(q_value(s, s.gamma.complex) * math.pi * math.cosh(s.r) - 1) for s in specs[:2])
    spec = specs[0]
    n = 200_000
    samples = sample_q(spec, n, seed=99)
    edges = np.linspace(-3, 3, 13)
    cx = edges[:-1] + 0.25
    counts, _, _ = np.histogram2d(samples.imag, samples.real, bins=[edges, edges])
    fine = np.linspace(-3, 3, 241)
    fz = (fine[:-1] + 0.0125)[None, :] + 1j * (fine[:-1] + 0.0125)[:, None]
    cell = q_value(spec, fz) * 0.025 ** 2
    expected = n * cell.reshape(12, 20, 12, 20).sum(axis=(1, 3))
    use = expected > 20
    chi2 = float(np.sum((counts[use] - expected[use]) ** 2 / expected[use]))
    pval = float(stats.chi2.sf(chi2, int(use.sum()) - 1))
    pump = GaussianStateSpec(PhasePoint(0.6, -0.8), 0.9, 0.3)
    from sqhhg.sfa_response import LinearResponse
    est = harmonic_moment_mc(pump, LinearResponse(1.0), 1, MomentSpec(1, 1), 1_000_000, 5)
    target = math.sinh(0.9) ** 2 + abs(pump.gamma) ** 2
    zn = abs(est.value.real - target) / est.error.real
    ok = norm < 1e-6 and peak < 1e-12 and pval > 1e-3 and zn < 3
    report(9, ok, f"normalization {norm:.1e}; peak {peak:.1e}; histogram chi2 p={pval:.3f} ({int(use.sum())} bins); "
                  f"<n> {est.value.real:.4f} +- {est.error.real:.4f} vs {target:.4f}")
    assert ok
