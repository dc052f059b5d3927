"""Linearized quadrature variance of a harmonic driven by a squeezed coherent pump.

Around the pump displacement ``gamma`` the response is approximated as
``chi_q(alpha) ~ chi_q(gamma) exp(i sigma)`` with

    sigma = a (alpha_x - gamma_x) + b (alpha_y - gamma_y),

``a`` and ``b`` being phase gradients per unit pump amplitude. Since the field
is ``E = 2 eps1 alpha``, the gradients per unit field are ``A = a / (2 eps1)``
and ``B = b / (2 eps1)``. For an x-squeezed pump the variance is

    dX_theta^2 = 1 + 4 eps1^4 N^2 q (d_x cos(theta) + d_y sin(theta))^2
                   * (A^2 (exp(-2r) - 1) + B^2 (exp(2r) - 1)).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateResponseError, InvalidInputError, SqhhgError
from .harmonic_map import quadrature_variance_mc
from .phase_space import GaussianStateSpec, PhasePoint
from .sfa_response import ResponseModel

__all__ = [
    "ABCoefficients",
    "DipoleQuadratures",
    "VarianceCurve",
    "CrossCheck",
    "extract_ab",
    "dipole_quadratures",
    "variance_from_prefactor",
    "variance_eq11",
    "squeezing_boundary",
    "squeezing_depth",
    "variance_curve",
    "variance_mc_crosscheck",
    "curves_to_csv",
]

PHASE_FLOOR = 1e-30
REGIME_LIMIT = 0.3


@dataclass(frozen=True)
class ABCoefficients:
    """Phase gradients of ``chi_q`` at ``gamma``, radians per unit pump amplitude."""

    a: float
    b: float
    gamma: PhasePoint
    q: int
    step: float = 0.0
    stable: bool = True

    def per_field(self, epsilon1: float) -> tuple[float, float]:
        """Gradients per unit electric field (atomic units)."""
        return self.a / (2 * epsilon1), self.b / (2 * epsilon1)


@dataclass(frozen=True)
class DipoleQuadratures:
    """Real and imaginary parts of ``<d_gamma(q w)>``."""

    dx: float
    dy: float


def _phase_diff(model, g, h, q):
    zp, zm = model.evaluate(g + h, q), model.evaluate(g - h, q)
    if abs(zp) < PHASE_FLOOR or abs(zm) < PHASE_FLOOR:
        raise DegenerateResponseError("response vanishes next to the expansion point")
    return float(np.angle(zp / zm))


def _gradient(model, g, direction, q, h0, rtol, max_halvings):
    h = h0
    dphi = _phase_diff(model, g, h * direction, q)
    while abs(dphi) >= math.pi / 4 and max_halvings > 0:
        h *= 0.5
        max_halvings -= 1
        dphi = _phase_diff(model, g, h * direction, q)
    prev = dphi / (2 * h)
    for _ in range(max_halvings):
        h *= 0.5
        cur = _phase_diff(model, g, h * direction, q) / (2 * h)
        if abs(cur - prev) <= rtol * max(abs(cur), abs(prev)) or abs(cur - prev) < 1e-12:
            return cur, h, True
        prev = cur
    return prev, h, False


def extract_ab(model: ResponseModel, gamma, q: int, step: float | None = None, rtol: float = 1e-3,
               max_halvings: int = 8) -> ABCoefficients:
    """Phase gradients ``(a, b)`` of ``chi_q`` at ``gamma`` by central differences.

    Each pair of neighbours is unwrapped independently through
    ``angle(chi(g + h) / chi(g - h))`` with the step reduced until
    ``|dphi| < pi/4``. The step is then halved until the estimate changes by
    less than ``rtol``.

    Raises
    ------
    DegenerateResponseError
        If ``|chi_q(gamma)|`` is below ``1e-30``.
    """
    g = gamma.complex if isinstance(gamma, PhasePoint) else complex(gamma)
    if abs(model.evaluate(g, q)) < PHASE_FLOOR:
        raise DegenerateResponseError(f"|chi_{q}(gamma)| below {PHASE_FLOOR:g}; phase undefined")
    h0 = step if step is not None else 1e-3 * max(abs(g), 1.0)
    a, ha, sa = _gradient(model, g, 1.0, q, h0, rtol, max_halvings)
    b, hb, sb = _gradient(model, g, 1j, q, h0, rtol, max_halvings)
    if not (sa and sb):
        warnings.warn("phase gradient not stable under step halving", RuntimeWarning, stacklevel=2)
    return ABCoefficients(float(a), float(b), PhasePoint.from_complex(g), q, min(ha, hb), sa and sb)


def dipole_quadratures(model: ResponseModel, gamma, q: int) -> DipoleQuadratures:
    g = gamma.complex if isinstance(gamma, PhasePoint) else complex(gamma)
    d = model.dipole(g, q)
    return DipoleQuadratures(float(d.real), float(d.imag))


def _bracket(a_f, b_f, r, squeeze_angle):
    c, s = math.cos(squeeze_angle), math.sin(squeeze_angle)
    ap = a_f * c + b_f * s
    bp = -a_f * s + b_f * c
    r = np.asarray(r, dtype=float)
    return ap * ap * np.expm1(-2 * r) + bp * bp * np.expm1(2 * r)


def variance_from_prefactor(prefactor: float, a_field: float, b_field: float, r, squeeze_angle: float = 0.0):
    """``1 + prefactor * (A^2 (e^{-2r} - 1) + B^2 (e^{2r} - 1))`` in the squeeze frame."""
    out = 1.0 + prefactor * _bracket(a_field, b_field, r, squeeze_angle)
    return float(out) if np.ndim(out) == 0 else out


def variance_eq11(theta: float, r, ab: ABCoefficients, d: DipoleQuadratures, epsilon1: float,
                  n_atoms: float, q: int, squeeze_angle: float = 0.0):
    """Linearized ``Delta X_theta^2``; exact evaluation of the closed form.

    ``squeeze_angle`` rotates the pump's squeezed axis away from ``alpha_x``;
    at 0 this is the closed form in the module docstring.
    """
    if np.any(np.asarray(r) < 0):
        raise InvalidInputError("r must be >= 0")
    proj = d.dx * math.cos(theta) + d.dy * math.sin(theta)
    pref = 4 * epsilon1 ** 4 * n_atoms ** 2 * q * proj * proj
    a_f, b_f = ab.per_field(epsilon1)
    return variance_from_prefactor(pref, a_f, b_f, r, squeeze_angle)


def squeezing_boundary(ab) -> float | None:
    """Largest pump squeezing ``r_max = ln(|A|/|B|)`` that still squeezes the harmonic.

    Returns ``None`` when ``|A| <= |B|`` (never squeezed) and ``math.inf``
    when ``B = 0`` (squeezed for every ``r > 0``).

    Raises
    ------
    DegenerateResponseError
        If ``A = B = 0``; the variance is then identically 1.
    """
    a, b = (ab.a, ab.b) if isinstance(ab, ABCoefficients) else ab
    a, b = abs(a), abs(b)
    if a == 0 and b == 0:
        raise DegenerateResponseError("A = B = 0: variance is identically 1")
    if a <= b:
        return None
    if b == 0:
        return math.inf
    return math.log(a / b)


def squeezing_depth(a_field: float, b_field: float, prefactor: float) -> float:
    """Largest reduction ``1 - min_r dX^2``; ``prefactor (|A| - |B|)^2`` when ``|A| > |B|``.

    ``B = 0`` gives the ``r -> inf`` limit ``prefactor A^2``.
    """
    a, b = abs(a_field), abs(b_field)
    if a <= b:
        return 0.0
    return prefactor * (a - b) ** 2


@dataclass
class VarianceCurve:
    q: int
    orientation: str
    theta: float
    r: np.ndarray
    variance: np.ndarray
    ab: ABCoefficients
    dipole: DipoleQuadratures
    prefactor: float
    a_field: float
    b_field: float
    squeeze_angle: float
    r_max: float | None = None
    info: dict = field(default_factory=dict)

    @property
    def depth(self) -> float:
        c, s = math.cos(self.squeeze_angle), math.sin(self.squeeze_angle)
        ap = self.a_field * c + self.b_field * s
        bp = -self.a_field * s + self.b_field * c
        return squeezing_depth(ap, bp, self.prefactor)


def _orientation_geometry(orientation, gamma_magnitude, gamma_phase):
    if orientation == "amplitude":
        phi = 0.0 if gamma_phase is None else gamma_phase
        axis = phi
    elif orientation == "phase":
        phi = math.pi / 2 if gamma_phase is None else gamma_phase
        axis = phi + math.pi / 2
    else:
        raise InvalidInputError(f"orientation must be 'amplitude' or 'phase', got {orientation!r}")
    return gamma_magnitude * complex(math.cos(phi), math.sin(phi)), axis % math.pi


def variance_curve(q_list, orientation: str, gamma_magnitude: float, r_grid, model: ResponseModel,
                   theta: float = 0.0, prefactor: float | None = None, gamma_phase: float | None = None,
                   diagnostics: list | None = None) -> list[VarianceCurve]:
    """Variance against pump squeezing for several harmonics.

    Parameters
    ----------
    q_list : iterable of int
    orientation : {'amplitude', 'phase'}
        Amplitude squeezing squeezes the quadrature in phase with ``gamma``;
        phase squeezing the orthogonal one.
    gamma_magnitude : float
        ``|gamma|``. Its default direction is ``alpha_x`` for amplitude and
        ``alpha_y`` for phase squeezing, so the squeezed axis is ``alpha_x``
        in that case too.
    prefactor : float, optional
        Overrides ``4 eps1^4 N^2 q (projection)^2`` with a fixed value.
    diagnostics : list, optional
        Receives ``(q, message)`` for harmonics whose extraction failed or
        whose variance turns negative (also flagged in ``info['unphysical']``).
    """
    g, axis = _orientation_geometry(orientation, gamma_magnitude, gamma_phase)
    r = np.asarray(r_grid, dtype=float)
    out = []
    for q in q_list:
        try:
            ab = extract_ab(model, g, q)
            d = dipole_quadratures(model, g, q)
        except SqhhgError as exc:
            if diagnostics is not None:
                diagnostics.append((q, str(exc)))
            continue
        eps = model.epsilon1
        if prefactor is None:
            proj = d.dx * math.cos(theta) + d.dy * math.sin(theta)
            pref = 4 * eps ** 4 * model.n_atoms ** 2 * q * proj * proj
        else:
            pref = float(prefactor)
        a_f, b_f = ab.per_field(eps)
        var = variance_from_prefactor(pref, a_f, b_f, r, axis)
        c, s = math.cos(axis), math.sin(axis)
        try:
            rmax = squeezing_boundary((a_f * c + b_f * s, -a_f * s + b_f * c))
        except DegenerateResponseError:
            rmax = None
        var = np.atleast_1d(var)
        # the closed form is a first-order expansion; a negative value flags that it has left its range
        unphysical = bool(np.any(var < 0))
        if unphysical and diagnostics is not None:
            diagnostics.append((q, f"{orientation}: variance {float(var.min()):.3g} < 0, linearization invalid"))
        out.append(VarianceCurve(q, orientation, theta, r, var, ab, d, pref, a_f, b_f, axis, rmax,
                                 {"unphysical": unphysical}))
    return out


@dataclass(frozen=True)
class CrossCheck:
    analytic: float
    mc: float
    mc_error: float
    discrepancy: float
    regime_warning: str | None


def variance_mc_crosscheck(pump: GaussianStateSpec, model: ResponseModel, q: int, theta: float, n: int,
                           seed: int) -> CrossCheck:
    """Compare the linearized variance with the positive-P Monte Carlo value.

    ``discrepancy`` is ``|analytic - mc| / |analytic - 1|`` (infinite when the
    analytic excess vanishes while the MC one does not). A regime warning is
    attached when ``|a| sigma`` or ``|b| sigma`` exceeds 0.3, ``sigma`` being
    the pump's widest Husimi spread.
    """
    ab = extract_ab(model, pump.gamma, q)
    d = dipole_quadratures(model, pump.gamma, q)
    analytic = variance_eq11(theta, pump.r, ab, d, model.epsilon1, model.n_atoms, q, pump.squeeze_angle)
    est = quadrature_variance_mc(pump, model, q, theta, n, seed)
    sigma = pump.widest_sigma()
    warn = None
    if max(abs(ab.a), abs(ab.b)) * sigma > REGIME_LIMIT:
        warn = (f"outside the linear regime: max(|a|,|b|) * sigma = "
                f"{max(abs(ab.a), abs(ab.b)) * sigma:.3g} > {REGIME_LIMIT}")
    excess = analytic - 1.0
    diff = abs(analytic - est.variance)
    disc = diff / abs(excess) if excess != 0 else (0.0 if diff == 0 else math.inf)
    return CrossCheck(float(analytic), est.variance, est.error, float(disc), warn)


def curves_to_csv(path, curves) -> None:
    """Write ``# q, r, var_x_theta, theta, orientation`` rows."""
    with open(path, "w") as fh:
        fh.write("# q, r, var_x_theta, theta, orientation\n")
        for c in curves:
            for r, v in zip(c.r, c.variance):
                fh.write(f"{c.q}, {r:.17g}, {v:.17g}, {c.theta:.17g}, {c.orientation}\n")
