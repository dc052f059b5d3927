"""Semi-classical response ``alpha -> chi_q(alpha)``.

A coherent pump amplitude ``alpha`` carries the classical field
``2 eps1 (alpha_x sin(w t) + alpha_y cos(w t))``. The strong-field dipole of
one atom in that field is Fourier analysed at ``q w`` and turned into the
coherent displacement ``chi_q = -i N sqrt(q) eps1 <d(q w)>``.

Fourier convention: ``<d(q w)> = sum d(t) exp(-i q w t) dt``. With this sign
a pump phase rotation ``alpha -> exp(i phi) alpha`` (a time shift of the
drive) multiplies ``chi_q`` by ``exp(i q phi)``.
"""
from __future__ import annotations

import math
import warnings
from abc import ABC, abstractmethod
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import RectBivariateSpline

from . import kernels
from .errors import InvalidAtomError, InvalidGridError, InvalidInputError
from .phase_space import PhasePoint

__all__ = [
    "AU_INTENSITY_W_CM2",
    "DriveField",
    "AtomModel",
    "DipoleSeries",
    "ResponseModel",
    "SyntheticResponse",
    "LinearResponse",
    "SFAResponse",
    "InterpolatedResponse",
    "ResponseTable",
    "field_from_alpha",
    "intensity_w_cm2",
    "lewenstein_dipole",
    "spectral_component",
    "spectral_dipole",
    "chi_displacement",
    "response_grid",
    "spectrum_to_csv",
    "harmonic_spectrum",
    "detect_cutoff",
]

AU_INTENSITY_W_CM2 = 3.509e16
EPS_REG = 1e-4
SHORT_WINDOW = (0.65, 0.05)
ALL_WINDOW = (0.9, 0.1)


def intensity_w_cm2(e_au: float) -> float:
    """Peak intensity for a field amplitude in atomic units."""
    return AU_INTENSITY_W_CM2 * e_au ** 2


def _alpha_complex(alpha) -> complex:
    return alpha.complex if isinstance(alpha, PhasePoint) else complex(alpha)


@dataclass(frozen=True)
class DriveField:
    """Classical drive of a coherent amplitude with a flat-top envelope.

    The envelope rises as ``sin^2`` over the half cycle before ``t = 0``, is
    flat for ``n_cycles`` periods and falls as ``cos^2`` over the next half
    cycle.
    """

    epsilon1: float
    omega: float
    alpha: complex
    n_cycles: int = 8
    envelope: str = "flat"

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def amplitude(self) -> float:
        return 2.0 * self.epsilon1 * abs(self.alpha)

    def envelope_values(self, t):
        T = self.period
        t = np.asarray(t, dtype=float)
        env = np.ones_like(t)
        up = t < 0
        env[up] = np.sin(np.pi * (t[up] + T / 2) / T) ** 2
        env[t < -T / 2] = 0.0
        dn = t > self.n_cycles * T
        env[dn] = np.cos(np.pi * (t[dn] - self.n_cycles * T) / T) ** 2
        env[t > (self.n_cycles + 0.5) * T] = 0.0
        return env

    def values(self, t):
        t = np.asarray(t, dtype=float)
        a = self.alpha
        carrier = a.real * np.sin(self.omega * t) + a.imag * np.cos(self.omega * t)
        return self.envelope_values(t) * 2.0 * self.epsilon1 * carrier

    def time_grid(self, points_per_cycle: int = 512) -> np.ndarray:
        dt = self.period / points_per_cycle
        half = points_per_cycle // 2
        return np.arange(-half, self.n_cycles * points_per_cycle + half + 1) * dt


def field_from_alpha(alpha, epsilon1: float, omega: float, envelope: str = "flat",
                     n_cycles: int = 8) -> DriveField:
    """Build the classical drive carried by coherent amplitude ``alpha``."""
    if not epsilon1 > 0:
        raise InvalidInputError(f"epsilon1 must be > 0, got {epsilon1}")
    if not omega > 0:
        raise InvalidInputError(f"omega must be > 0, got {omega}")
    if envelope != "flat":
        raise InvalidInputError(f"unknown envelope {envelope!r}")
    if n_cycles < 2:
        raise InvalidInputError("need at least two flat cycles")
    return DriveField(float(epsilon1), float(omega), _alpha_complex(alpha), int(n_cycles), envelope)


@dataclass(frozen=True)
class AtomModel:
    """Single-active-electron atom: ionization potential and dipole matrix element.

    ``hydrogenic-1s`` uses ``C k / (k^2 + 2 ip)^3`` with the 1s normalization;
    ``gaussian`` uses ``scale * k * exp(-k^2 / (2 width^2))``.
    """

    ip: float
    dme_kind: str = "hydrogenic-1s"
    dme_params: tuple = ()

    def __post_init__(self):
        if not (self.ip > 0 and math.isfinite(self.ip)):
            raise InvalidAtomError(f"ionization potential must be > 0, got {self.ip}")
        if self.dme_kind not in ("hydrogenic-1s", "gaussian"):
            raise InvalidAtomError(f"unknown dme_kind {self.dme_kind!r}")

    def kernel_params(self) -> tuple[int, float, float]:
        if self.dme_kind == "hydrogenic-1s":
            return 0, 2 ** 3.5 * (2 * self.ip) ** 1.25 / math.pi, 2 * self.ip
        p = dict(self.dme_params)
        width = p.get("width", math.sqrt(2 * self.ip))
        return 1, p.get("scale", 1.0), 2 * width ** 2


@dataclass(frozen=True)
class DipoleSeries:
    t: np.ndarray
    d: np.ndarray
    omega: float
    n_cycles: int

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega


def _birth_weights(tau_over_T, window):
    flat, taper = window
    w = np.ones_like(tau_over_T)
    s = tau_over_T > flat
    if taper > 0:
        w[s] = np.cos(0.5 * np.pi * np.clip((tau_over_T[s] - flat) / taper, 0, 1)) ** 2
    else:
        w[s] = 0.0
    return w


def lewenstein_dipole(field: DriveField, atom: AtomModel, tgrid=None, points_per_cycle: int = 512,
                      branch: str = "all", eps_reg: float = EPS_REG, backend: str | None = None,
                      num_threads: int = 1) -> DipoleSeries:
    """Time-dependent SFA dipole with the stationary-momentum saddle.

    Parameters
    ----------
    field, atom
        Drive and atom.
    tgrid : array_like, optional
        Uniform increasing time grid; defaults to ``field.time_grid``.
    branch : {'all', 'short'}
        Birth-time window: one full period back, or the short-trajectory
        window of 0.65 periods. Both end in a ``cos^2`` edge.
    backend : {'compiled', 'python'}, optional
        Kernel implementation; default is the one selected at import.
    """
    if not isinstance(atom, AtomModel) or not atom.ip > 0:
        raise InvalidAtomError("ionization potential must be > 0")
    t = field.time_grid(points_per_cycle) if tgrid is None else np.asarray(tgrid, dtype=float)
    if t.ndim != 1 or t.size < 3:
        raise InvalidGridError("time grid needs at least three points")
    dts = np.diff(t)
    if np.any(dts <= 0):
        raise InvalidGridError("time grid must be strictly increasing")
    dt = float(dts.mean())
    if not np.allclose(dts, dt, rtol=1e-9, atol=0):
        raise InvalidGridError("time grid must be uniform")
    if field.period / dt < 64:
        raise InvalidGridError("time grid does not resolve the drive (< 64 points per cycle)")
    if field.amplitude > atom.ip ** 2 / 4:
        warnings.warn(f"field {field.amplitude:.3g} a.u. exceeds the barrier-suppression field "
                      f"{atom.ip ** 2 / 4:.3g} a.u.", RuntimeWarning, stacklevel=2)
    if branch == "all":
        window = ALL_WINDOW
    elif branch == "short":
        window = SHORT_WINDOW
    else:
        raise InvalidInputError(f"branch must be 'all' or 'short', got {branch!r}")
    E = field.values(t)
    A = -cumulative_trapezoid(E, t, initial=0.0)
    IA = cumulative_trapezoid(A, t, initial=0.0)
    IA2 = cumulative_trapezoid(A * A, t, initial=0.0)
    T = field.period
    m = int(math.ceil((window[0] + window[1]) * T / dt))
    tau = np.arange(1, m + 1) * dt
    pref = (np.pi / (eps_reg + 0.5j * tau)) ** 1.5 * _birth_weights(tau / T, window)
    kind, p1, p2 = atom.kernel_params()
    impl = kernels.get_backend(backend)
    d = impl.lewenstein_sum(np.ascontiguousarray(E), np.ascontiguousarray(A), np.ascontiguousarray(IA),
                            np.ascontiguousarray(IA2), np.ascontiguousarray(pref, dtype=complex),
                            dt, float(atom.ip), kind, float(p1), float(p2), int(num_threads))
    return DipoleSeries(t, np.asarray(d), field.omega, field.n_cycles)


def spectral_component(t, d, freq: float, t_start: float, t_stop: float) -> complex:
    """``sum d(t) exp(-i freq t) dt`` over ``t_start <= t < t_stop`` (any real ``freq``)."""
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    dt = t[1] - t[0]
    tol = 1e-9 * dt
    m = (t >= t_start - tol) & (t < t_stop - tol)
    return complex(np.sum(d[m] * np.exp(-1j * freq * t[m])) * dt)


def spectral_dipole(d, q: float, omega: float | None = None, window: tuple | None = None,
                    t=None) -> complex:
    """Windowed spectral dipole ``<d(q w)>``.

    Parameters
    ----------
    d : DipoleSeries or array_like
        Dipole; pass ``t`` as well for a bare array.
    q : float
        Harmonic order, ``q > 0``.
    omega : float, optional
        Fundamental frequency (taken from the series by default).
    window : (float, float), optional
        Start and stop in optical cycles. The default is the flat-envelope
        cycles after the first one, whose births reach into the ramp.
    """
    if not q > 0:
        raise InvalidInputError(f"harmonic order must be > 0, got {q}")
    if isinstance(d, DipoleSeries):
        t, y = d.t, d.d
        omega = d.omega if omega is None else omega
        if window is None:
            window = (1, d.n_cycles)
    else:
        if t is None or omega is None:
            raise InvalidInputError("bare dipole arrays need t and omega")
        y = d
        if window is None:
            raise InvalidInputError("bare dipole arrays need an explicit window")
    T = 2 * math.pi / omega
    return spectral_component(t, y, q * omega, window[0] * T, window[1] * T)


def chi_displacement(dqw: complex, n_atoms: float, q: float, epsilon1: float) -> complex:
    """Coherent displacement ``-i N sqrt(q) eps1 <d(q w)>`` of harmonic ``q``."""
    if n_atoms < 1:
        raise InvalidInputError(f"n_atoms must be >= 1, got {n_atoms}")
    return -1j * n_atoms * math.sqrt(q) * epsilon1 * dqw


class ResponseModel(ABC):
    """Map from pump amplitude to harmonic displacement."""

    n_atoms: float = 1.0
    epsilon1: float = 1.0
    omega: float = 0.057
    atom: AtomModel | None = None
    phase_covariant: bool = False

    @abstractmethod
    def evaluate(self, alpha, q: int) -> complex:
        """``chi_q(alpha)`` for a single amplitude."""

    def evaluate_many(self, alphas, q: int) -> np.ndarray:
        a = np.asarray(alphas, dtype=complex)
        flat = np.array([self.evaluate(z, q) for z in a.ravel()], dtype=complex)
        return flat.reshape(a.shape)

    def dipole(self, alpha, q: int) -> complex:
        """``<d(q w)>`` consistent with :meth:`evaluate`."""
        return self.evaluate(alpha, q) / (-1j * self.n_atoms * math.sqrt(q) * self.epsilon1)

    def describe(self) -> dict:
        return {"model": type(self).__name__}


class SyntheticResponse(ResponseModel):
    """Closed-form test response ``c (|a|/a0)^eta exp(i q arg a) exp(i kappa (|a|^2 - a0^2))``."""

    phase_covariant = True

    def __init__(self, c: float, eta: float, kappa: float, alpha0: float, n_atoms: float = 1.0,
                 epsilon1: float = 1.0, omega: float = 0.057):
        if not alpha0 > 0:
            raise InvalidInputError("alpha0 must be > 0")
        if not eta > 0:
            raise InvalidInputError("eta must be > 0")
        self.c, self.eta, self.kappa, self.alpha0 = float(c), float(eta), float(kappa), float(alpha0)
        self.n_atoms, self.epsilon1, self.omega = n_atoms, epsilon1, omega

    def evaluate_many(self, alphas, q):
        a = np.asarray(alphas, dtype=complex)
        rho = np.abs(a)
        phase = q * np.angle(a) + self.kappa * (rho * rho - self.alpha0 ** 2)
        return self.c * (rho / self.alpha0) ** self.eta * np.exp(1j * phase)

    def evaluate(self, alpha, q):
        return complex(self.evaluate_many(np.array([_alpha_complex(alpha)]), q)[0])

    def describe(self):
        return {"model": "synthetic", "c": self.c, "eta": self.eta, "kappa": self.kappa,
                "alpha0": self.alpha0}


class LinearResponse(ResponseModel):
    """``chi = c alpha`` for every harmonic; ``c = 1`` is the identity map."""

    def __init__(self, c: complex = 1.0, n_atoms: float = 1.0, epsilon1: float = 1.0, omega: float = 0.057):
        self.c = complex(c)
        self.n_atoms, self.epsilon1, self.omega = n_atoms, epsilon1, omega

    def evaluate_many(self, alphas, q):
        return self.c * np.asarray(alphas, dtype=complex)

    def evaluate(self, alpha, q):
        return complex(self.evaluate_many(np.array([_alpha_complex(alpha)]), q)[0])

    def describe(self):
        return {"model": "linear", "c": [self.c.real, self.c.imag]}


class SFAResponse(ResponseModel):
    """Numerical strong-field response with a per-amplitude dipole cache."""

    phase_covariant = True

    def __init__(self, atom: AtomModel, epsilon1: float, omega: float, n_atoms: float = 1.0,
                 n_cycles: int = 8, points_per_cycle: int = 512, branch: str = "all",
                 window: tuple | None = None, backend: str | None = None, num_threads: int = 1,
                 cache_size: int = 4096):
        if not epsilon1 > 0:
            raise InvalidInputError("epsilon1 must be > 0")
        if n_atoms < 1:
            raise InvalidInputError("n_atoms must be >= 1")
        self.atom, self.epsilon1, self.omega, self.n_atoms = atom, float(epsilon1), float(omega), n_atoms
        self.n_cycles, self.points_per_cycle, self.branch = int(n_cycles), int(points_per_cycle), branch
        self.window = window
        self.backend, self.num_threads = backend, num_threads
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = cache_size

    def series(self, alpha) -> DipoleSeries:
        a = _alpha_complex(alpha)
        key = (a.real, a.imag)
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        drive = field_from_alpha(a, self.epsilon1, self.omega, n_cycles=self.n_cycles)
        s = lewenstein_dipole(drive, self.atom, points_per_cycle=self.points_per_cycle, branch=self.branch,
                              backend=self.backend, num_threads=self.num_threads)
        self._cache[key] = s
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return s

    def dipole(self, alpha, q):
        a = _alpha_complex(alpha)
        if a == 0:
            return 0j
        return spectral_dipole(self.series(a), q, window=self.window)

    def evaluate(self, alpha, q):
        return chi_displacement(self.dipole(alpha, q), self.n_atoms, q, self.epsilon1)

    def describe(self):
        return {"model": "sfa", "ip": self.atom.ip, "dme_kind": self.atom.dme_kind,
                "epsilon1": self.epsilon1, "omega": self.omega, "n_atoms": self.n_atoms,
                "n_cycles": self.n_cycles, "points_per_cycle": self.points_per_cycle,
                "branch": self.branch}


class InterpolatedResponse(ResponseModel):
    """Bicubic spline of a tabulated response over a rectangular pump grid.

    Outside the table the response is undefined; :meth:`evaluate` returns NaN.
    """

    def __init__(self, x_axis, y_axis, chi, q: int, base: ResponseModel | None = None):
        self.x_axis = np.asarray(x_axis, dtype=float)
        self.y_axis = np.asarray(y_axis, dtype=float)
        chi = np.asarray(chi, dtype=complex)
        self.q = q
        self._re = RectBivariateSpline(self.y_axis, self.x_axis, chi.real, kx=3, ky=3)
        self._im = RectBivariateSpline(self.y_axis, self.x_axis, chi.imag, kx=3, ky=3)
        if base is not None:
            self.n_atoms, self.epsilon1, self.omega, self.atom = base.n_atoms, base.epsilon1, base.omega, base.atom

    @classmethod
    def from_model(cls, model: ResponseModel, x_axis, y_axis, q: int) -> "InterpolatedResponse":
        table = response_grid(model, (x_axis, y_axis), q)
        return cls(x_axis, y_axis, table.chi, q, base=model)

    def evaluate_many(self, alphas, q):
        if q != self.q:
            raise InvalidInputError(f"table holds harmonic {self.q}, asked for {q}")
        a = np.asarray(alphas, dtype=complex)
        x, y = a.real.ravel(), a.imag.ravel()
        out = self._re.ev(y, x) + 1j * self._im.ev(y, x)
        outside = ((x < self.x_axis[0]) | (x > self.x_axis[-1]) | (y < self.y_axis[0]) | (y > self.y_axis[-1]))
        out[outside] = np.nan
        return out.reshape(a.shape)

    def evaluate(self, alpha, q):
        return complex(self.evaluate_many(np.array([_alpha_complex(alpha)]), q)[0])

    def describe(self):
        return {"model": "interpolated", "q": self.q, "nx": int(self.x_axis.size), "ny": int(self.y_axis.size)}


@dataclass
class ResponseTable:
    alpha: np.ndarray
    chi: np.ndarray
    q: int
    meta: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        a, c = self.alpha.ravel(), self.chi.ravel()
        table = np.column_stack([a.real, a.imag, c.real, c.imag])
        np.savetxt(path, table, fmt="%.17g", delimiter=", ", header="alpha_x, alpha_y, re_chi, im_chi",
                   comments="# ")


def response_grid(model: ResponseModel, alpha_grid, q: int) -> ResponseTable:
    """Evaluate ``model`` pointwise on a grid.

    ``alpha_grid`` is either ``(x_axis, y_axis)``, giving a ``(ny, nx)``
    table with y outer, or an array of complex amplitudes.
    """
    if isinstance(alpha_grid, tuple) and len(alpha_grid) == 2:
        xs, ys = (np.asarray(v, dtype=float) for v in alpha_grid)
        alpha = xs[None, :] + 1j * ys[:, None]
    else:
        alpha = np.asarray(alpha_grid, dtype=complex)
    chi = np.empty(alpha.shape, dtype=complex)
    for idx, a in np.ndenumerate(alpha):
        chi[idx] = model.evaluate(complex(a), q)
    return ResponseTable(alpha, chi, q, model.describe())


def spectrum_to_csv(path, orders, dipoles) -> None:
    """Write ``# q, re_d, im_d, abs_d2`` rows."""
    d = np.asarray(dipoles, dtype=complex)
    table = np.column_stack([np.asarray(orders, dtype=float), d.real, d.imag, np.abs(d) ** 2])
    np.savetxt(path, table, fmt="%.17g", delimiter=", ", header="q, re_d, im_d, abs_d2", comments="# ")


def harmonic_spectrum(series: DipoleSeries, q_max: int, window: tuple | None = None):
    """Integer orders ``1..q_max`` and their spectral dipoles."""
    orders = np.arange(1, int(q_max) + 1)
    d = np.array([spectral_dipole(series, int(q), window=window) for q in orders], dtype=complex)
    return orders, d


def detect_cutoff(orders, power, rel_floor: float = 1e-2, parity: int = 1) -> int:
    """Highest harmonic of the given parity that is a local maximum of ``power``.

    Only orders whose power is at least ``rel_floor`` times the median over
    the same-parity orders are considered, so noise far past the plateau end
    cannot register.

    Raises
    ------
    InvalidInputError
        If no order qualifies.
    """
    orders = np.asarray(orders)
    power = np.asarray(power, dtype=float)
    sel = (orders % 2) == (parity % 2)
    o, p = orders[sel], power[sel]
    if o.size < 3:
        raise InvalidInputError("need at least three orders of the requested parity")
    floor = rel_floor * float(np.median(p))
    best = None
    for i in range(1, o.size - 1):
        if p[i] >= floor and p[i] >= p[i - 1] and p[i] >= p[i + 1]:
            best = int(o[i])
    if best is None:
        raise InvalidInputError("no local maximum above the floor")
    return best
