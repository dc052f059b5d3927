"""Classical three-step trajectories in a monochromatic drive.

Convention: ``E(t) = e0 cos(w t)`` with the crest at ``t = 0`` and
``A(t) = -(e0 / w) sin(w t)``. Phases are ``phi = w t`` in radians. An electron
born at rest at ``phi0`` has canonical momentum ``p = (e0 / w) sin(phi0)`` and
its excursion, in units of ``e0 / w^2``, is

    x(phi) = sin(phi0) (phi - phi0) + cos(phi) - cos(phi0).

The return kinetic energy is ``2 Up (sin(phi0) - sin(phi1))^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import BelowThresholdError, InvalidInputError, NoSolutionError

__all__ = [
    "FieldParams",
    "Trajectory",
    "vector_potential",
    "excursion",
    "return_phase",
    "return_energy_over_up",
    "max_return_energy",
    "solve_trajectories",
    "cutoff_harmonic",
    "ionization_window",
    "trajectories_to_csv",
]

TWO_PI = 2.0 * math.pi
SCAN_POINTS = 720


@dataclass(frozen=True)
class FieldParams:
    """Peak field and angular frequency of the drive, atomic units."""

    e0: float
    omega: float

    def __post_init__(self):
        if not (self.e0 > 0 and self.omega > 0):
            raise InvalidInputError(f"need e0 > 0 and omega > 0, got {self.e0}, {self.omega}")

    @property
    def up(self) -> float:
        return self.e0 ** 2 / (4.0 * self.omega ** 2)

    @classmethod
    def from_up(cls, up: float, omega: float) -> "FieldParams":
        return cls(2.0 * omega * math.sqrt(up), omega)


@dataclass(frozen=True)
class Trajectory:
    """One classical solution. Times are optical phases in radians."""

    t0: float
    t1: float
    p: float
    branch: str
    return_ke: float

    @property
    def excursion_periods(self) -> float:
        return (self.t1 - self.t0) / TWO_PI


def vector_potential(field: FieldParams, phase):
    return -(field.e0 / field.omega) * np.sin(phase)


def excursion(phi, phi0):
    """Dimensionless displacement since birth; zero at a return."""
    return math.sin(phi0) * (phi - phi0) + np.cos(phi) - math.cos(phi0)


def return_phase(phi0: float) -> float | None:
    """First return phase within one cycle after birth, or None."""
    s0, c0 = math.sin(phi0), math.cos(phi0)
    f = lambda x: s0 * (x - phi0) + math.cos(x) - c0
    # near birth x ~ -cos(phi0) tau^2 / 2 + sin(phi0) tau^3 / 6, so the quickest return
    # is at tau ~ 3 cot(phi0); start the bracket scan well before it
    start = min(1e-4, abs(c0 / s0) if s0 else 1e-4)
    xs = phi0 + np.geomspace(start, TWO_PI, 4096)
    fx = s0 * (xs - phi0) + np.cos(xs) - c0
    sign = np.sign(fx)
    idx = np.nonzero(sign[1:] * sign[:-1] < 0)[0]
    if idx.size == 0:
        return None
    i = idx[0]
    return brentq(f, xs[i], xs[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)


def return_energy_over_up(phi0: float) -> float:
    phi1 = return_phase(phi0)
    if phi1 is None:
        return float("nan")
    return 2.0 * (math.sin(phi0) - math.sin(phi1)) ** 2


@lru_cache(maxsize=1)
def max_return_energy() -> tuple[float, float, float]:
    """Return ``(KE_max / Up, phi0, phi1)`` at the classical cutoff.

    Found by a birth-phase scan followed by bounded scalar maximization.
    """
    phis = np.linspace(0.0, math.pi / 2, SCAN_POINTS // 4 + 1)[1:-1]
    ke = np.array([return_energy_over_up(p) for p in phis])
    i = int(np.nanargmax(ke))
    res = minimize_scalar(lambda p: -return_energy_over_up(p), bounds=(phis[i - 1], phis[i + 1]),
                          method="bounded", options={"xatol": 1e-13})
    phi0 = float(res.x)
    return -float(res.fun), phi0, return_phase(phi0)


def _tau_cutoff() -> float:
    _, p0, p1 = max_return_energy()
    return p1 - p0


def _newton_polish(phi0, phi1, target, iters=50):
    """Damped Newton on (return condition, velocity condition)."""
    for _ in range(iters):
        s0, c0, s1, c1 = math.sin(phi0), math.cos(phi0), math.sin(phi1), math.cos(phi1)
        f1 = s0 * (phi1 - phi0) + c1 - c0
        f2 = s0 - s1 - target
        if abs(f1) < 1e-15 and abs(f2) < 1e-15:
            break
        j = np.array([[c0 * (phi1 - phi0), s0 - s1], [c0, -c1]])
        try:
            step = np.linalg.solve(j, [-f1, -f2])
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        norm0 = math.hypot(f1, f2)
        while lam > 1e-4:
            a, b = phi0 + lam * step[0], phi1 + lam * step[1]
            g1 = math.sin(a) * (b - a) + math.cos(b) - math.cos(a)
            g2 = math.sin(a) - math.sin(b) - target
            if math.hypot(g1, g2) < norm0:
                phi0, phi1 = a, b
                break
            lam *= 0.5
        else:
            break
    return phi0, phi1


def _make(field, phi0, phi1, tau_c):
    p = (field.e0 / field.omega) * math.sin(phi0)
    v1 = p + float(vector_potential(field, phi1))
    branch = "short" if (phi1 - phi0) <= tau_c else "long"
    return Trajectory(float(phi0), float(phi1), float(p), branch, float(0.5 * v1 * v1))


def solve_trajectories(q: float, field: FieldParams, ip: float) -> list[Trajectory]:
    """All first-half-cycle solutions for harmonic ``q``, short branch first.

    Raises
    ------
    BelowThresholdError
        If ``q * omega <= ip``.
    NoSolutionError
        If the required return energy exceeds the classical maximum.
    """
    energy = q * field.omega - ip
    if energy <= 0:
        raise BelowThresholdError(f"q*omega = {q * field.omega:.6g} <= ip = {ip:.6g}")
    kappa = energy / field.up
    ke_max, pc0, pc1 = max_return_energy()
    if kappa > ke_max * (1 + 1e-12):
        raise NoSolutionError(
            f"harmonic {q} needs {kappa:.6g} Up; classical maximum is {ke_max:.6g} Up")
    tau_c = _tau_cutoff()
    if kappa >= ke_max * (1 - 1e-12):
        traj = _make(field, pc0, pc1, tau_c)
        return [traj, Trajectory(traj.t0, traj.t1, traj.p, "long", traj.return_ke)]
    target = math.sqrt(kappa / 2.0)

    def g(phi0):
        phi1 = return_phase(phi0)
        return math.sin(phi0) - math.sin(phi1) - target

    out = []
    # short births lie between the cutoff birth and the field zero, long ones before it
    for lo, hi in ((pc0, math.pi / 2 - 1e-3), (1e-6, pc0)):
        glo, ghi = g(lo), g(hi)
        if glo * ghi > 0:
            continue
        phi0 = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        phi0, phi1 = _newton_polish(phi0, return_phase(phi0), target)
        out.append(_make(field, phi0, phi1, tau_c))
    if not out:
        raise NoSolutionError(f"no classical return for harmonic {q}")
    out.sort(key=lambda t: t.t1 - t.t0)
    return out


def residuals(traj: Trajectory, field: FieldParams, q: float, ip: float) -> tuple[float, float, float]:
    """Energy, return and initial-velocity residuals of a trajectory."""
    a1 = float(vector_potential(field, traj.t1))
    e_res = abs(0.5 * (traj.p + a1) ** 2 - (q * field.omega - ip))
    x_res = abs(excursion(traj.t1, traj.t0))
    v_res = abs(traj.p + float(vector_potential(field, traj.t0)))
    return e_res, x_res, v_res


def cutoff_harmonic(field: FieldParams, ip: float) -> float:
    """Classical cutoff ``(ip + KE_max) / omega`` as a real harmonic order."""
    return (ip + max_return_energy()[0] * field.up) / field.omega


def ionization_window(q_list, field: FieldParams, ip: float, branch: str = "short") -> dict:
    """Map each harmonic to the birth phase (radians after the crest) of ``branch``."""
    if branch not in ("short", "long"):
        raise InvalidInputError(f"branch must be short or long, got {branch!r}")
    out = {}
    for q in q_list:
        trajs = solve_trajectories(q, field, ip)
        pick = [t for t in trajs if t.branch == branch] or trajs
        out[q] = pick[0].t0 if branch == "short" else pick[-1].t0
    return out


def trajectories_to_csv(path, rows) -> None:
    """Write ``(q, Trajectory, up)`` rows as ``# q, branch, t0_rad, t1_rad, p_au, ke_over_up``."""
    with open(path, "w") as fh:
        fh.write("# q, branch, t0_rad, t1_rad, p_au, ke_over_up\n")
        for q, t, up in rows:
            fh.write(f"{q:.17g}, {t.branch}, {t.t0:.17g}, {t.t1:.17g}, {t.p:.17g}, {t.return_ke / up:.17g}\n")
