"""Gaussian quasi-probability distributions of the pump mode.

The Husimi function of a displaced squeezed (optionally thermal) state is a
Gaussian whose quadrature variances in the squeeze frame are

    Var(alpha_x') = ((2 nbar + 1) exp(-2r) + 1) / 4
    Var(alpha_y') = ((2 nbar + 1) exp(+2r) + 1) / 4

For ``nbar = 0`` this is the squeezed coherent Husimi function with peak value
``1 / (pi cosh r)``. Positive-P pairs are drawn from the canonical positive-P
density ``exp(-|alpha - beta|^2 / 4) Q((alpha + beta) / 2) / (4 pi)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _rng
from .errors import InconsistencyError, InvalidGridError, InvalidInputError

__all__ = [
    "PhasePoint",
    "GaussianStateSpec",
    "QGrid",
    "PositivePPairs",
    "QuadratureStats",
    "q_value",
    "husimi_grid",
    "default_axes",
    "check_normalization",
    "sample_q",
    "sample_positive_p_pairs",
    "quadrature_stats",
]


@dataclass(frozen=True)
class PhasePoint:
    """Point of the complex quadrature plane, ``alpha = alpha_x + i alpha_y``."""

    alpha_x: float
    alpha_y: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha_x) and math.isfinite(self.alpha_y)):
            raise InvalidInputError(f"non-finite phase point ({self.alpha_x}, {self.alpha_y})")

    @classmethod
    def from_complex(cls, z: complex) -> "PhasePoint":
        z = complex(z)
        return cls(z.real, z.imag)

    @property
    def complex(self) -> complex:
        return complex(self.alpha_x, self.alpha_y)

    def __abs__(self):
        return math.hypot(self.alpha_x, self.alpha_y)


def _as_complex(alpha):
    if isinstance(alpha, PhasePoint):
        return alpha.complex
    return np.asarray(alpha, dtype=complex) if np.ndim(alpha) else complex(alpha)


@dataclass(frozen=True)
class GaussianStateSpec:
    """Displaced squeezed thermal state of the pump.

    Parameters
    ----------
    gamma : PhasePoint or complex
        Coherent displacement.
    r : float
        Squeezing parameter, ``r >= 0``.
    squeeze_angle : float
        Orientation of the squeezed quadrature in ``[0, pi)``; 0 squeezes
        ``alpha_x``.
    nbar : float
        Thermal occupation before squeezing. Zero for pure states.
    """

    gamma: PhasePoint = PhasePoint(0.0, 0.0)
    r: float = 0.0
    squeeze_angle: float = 0.0
    nbar: float = 0.0

    def __post_init__(self):
        if not isinstance(self.gamma, PhasePoint):
            object.__setattr__(self, "gamma", PhasePoint.from_complex(self.gamma))
        if not (math.isfinite(self.r) and self.r >= 0):
            raise InvalidInputError(f"squeezing r must be >= 0, got {self.r}")
        if not (0.0 <= self.squeeze_angle < math.pi):
            raise InvalidInputError(f"squeeze_angle must lie in [0, pi), got {self.squeeze_angle}")
        if not (math.isfinite(self.nbar) and self.nbar >= 0):
            raise InvalidInputError(f"nbar must be >= 0, got {self.nbar}")

    @property
    def kind(self) -> str:
        g0 = self.gamma.alpha_x == 0 and self.gamma.alpha_y == 0
        if self.nbar > 0:
            return "thermal"
        if self.r == 0:
            return "vacuum" if g0 else "coherent"
        return "squeezed_vacuum" if g0 else "squeezed_coherent"

    def frame_variances(self) -> tuple[float, float]:
        """Husimi variances along the squeezed and anti-squeezed axes."""
        s = 2.0 * self.nbar + 1.0
        return (s * math.exp(-2 * self.r) + 1) / 4, (s * math.exp(2 * self.r) + 1) / 4

    def covariance(self) -> np.ndarray:
        """Husimi covariance of ``(alpha_x, alpha_y)`` in the lab frame."""
        vx, vy = self.frame_variances()
        c, s = math.cos(self.squeeze_angle), math.sin(self.squeeze_angle)
        rot = np.array([[c, -s], [s, c]])
        return rot @ np.diag([vx, vy]) @ rot.T

    def photon_number(self) -> float:
        """Mean photon number ``<a^dag a>``."""
        s = 2.0 * self.nbar + 1.0
        return s * math.cosh(2 * self.r) / 2 - 0.5 + abs(self.gamma) ** 2

    def widest_sigma(self) -> float:
        return math.sqrt(max(self.frame_variances()))


def q_value(spec: GaussianStateSpec, alpha):
    """Husimi density of ``spec`` at ``alpha``.

    Parameters
    ----------
    spec : GaussianStateSpec
    alpha : PhasePoint, complex or array_like of complex

    Returns
    -------
    float or ndarray
        Density per unit quadrature area.
    """
    z = _as_complex(alpha) - spec.gamma.complex
    rot = np.exp(-1j * spec.squeeze_angle)
    u = z * rot
    vx, vy = spec.frame_variances()
    expo = -(np.real(u) ** 2) / (2 * vx) - np.imag(u) ** 2 / (2 * vy)
    out = np.exp(expo) / (2 * math.pi * math.sqrt(vx * vy))
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class QGrid:
    """Quasi-probability values on a uniform rectangular grid.

    ``values[j, i]`` belongs to ``(x_axis[i], y_axis[j])``. ``errors`` holds
    Monte Carlo standard errors when the grid is an estimate; ``mask`` marks
    nodes that could not be evaluated.
    """

    x_axis: np.ndarray
    y_axis: np.ndarray
    values: np.ndarray
    errors: np.ndarray | None = None
    mask: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x_axis = np.asarray(self.x_axis, dtype=float)
        self.y_axis = np.asarray(self.y_axis, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.y_axis.size, self.x_axis.size):
            raise InvalidGridError(
                f"values shape {self.values.shape} does not match axes "
                f"({self.y_axis.size}, {self.x_axis.size})")
        for name, ax in (("x_axis", self.x_axis), ("y_axis", self.y_axis)):
            if ax.size >= 2:
                d = np.diff(ax)
                if not np.allclose(d, d[0], rtol=1e-9, atol=0):
                    raise InvalidGridError(f"{name} is not uniformly spaced")
        if self.mask is None:
            self.mask = np.zeros(self.values.shape, dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool)

    @property
    def dx(self) -> float:
        return float(self.x_axis[1] - self.x_axis[0]) if self.x_axis.size > 1 else 0.0

    @property
    def dy(self) -> float:
        return float(self.y_axis[1] - self.y_axis[0]) if self.y_axis.size > 1 else 0.0

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def nodes(self) -> np.ndarray:
        """Complex node coordinates with the same shape as ``values``."""
        return self.x_axis[None, :] + 1j * self.y_axis[:, None]

    def to_csv(self, path) -> None:
        """Write ``# chi_x, chi_y, density`` rows, y outer and x inner."""
        X, Y = np.meshgrid(self.x_axis, self.y_axis)
        table = np.column_stack([X.ravel(), Y.ravel(), self.values.ravel()])
        np.savetxt(path, table, fmt="%.17g", delimiter=", ", header="chi_x, chi_y, density", comments="# ")

    def metadata_json(self) -> str:
        meta = dict(self.metadata)
        meta["shape"] = list(self.values.shape)
        meta["masked_cells"] = [[int(j), int(i)] for j, i in np.argwhere(self.mask)]
        if self.errors is not None:
            e = self.errors[~self.mask]
            meta["mc_error_summary"] = {"max": float(e.max()) if e.size else 0.0,
                                        "mean": float(e.mean()) if e.size else 0.0}
        return json.dumps(meta, indent=2, sort_keys=True, default=_json_default)

    @classmethod
    def from_csv(cls, path) -> "QGrid":
        table = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        xs = np.unique(table[:, 0])
        ys = np.unique(table[:, 1])
        return cls(xs, ys, table[:, 2].reshape(ys.size, xs.size))


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(type(obj).__name__)


def default_axes(spec: GaussianStateSpec, points: int = 201, n_sigma: float = 6.0):
    """Square axes centred on ``gamma`` covering ``n_sigma`` of the widest axis."""
    half = n_sigma * spec.widest_sigma()
    g = spec.gamma
    return (np.linspace(g.alpha_x - half, g.alpha_x + half, points),
            np.linspace(g.alpha_y - half, g.alpha_y + half, points))


def husimi_grid(spec: GaussianStateSpec, x_axis=None, y_axis=None, points: int = 201,
                n_sigma: float = 6.0) -> QGrid:
    """Evaluate :func:`q_value` on a grid (default: ``default_axes``)."""
    if x_axis is None or y_axis is None:
        x_axis, y_axis = default_axes(spec, points, n_sigma)
    grid = QGrid(x_axis, y_axis, np.zeros((len(y_axis), len(x_axis))))
    grid.values = q_value(spec, grid.nodes())
    return grid


def check_normalization(grid: QGrid) -> float:
    """Return ``|1 - sum(values) * cell_area|`` over unmasked nodes."""
    if not grid.cell_area > 0:
        raise InvalidGridError(f"non-positive cell area {grid.cell_area}")
    return abs(1.0 - math.fsum(grid.values[~grid.mask].ravel()) * grid.cell_area)


def _gaussian_draw(spec, z0, z1):
    vx, vy = spec.frame_variances()
    u = math.sqrt(vx) * z0 + 1j * math.sqrt(vy) * z1
    return spec.gamma.complex + u * np.exp(1j * spec.squeeze_angle)


def sample_q(spec: GaussianStateSpec, n: int, seed: int, start: int = 0) -> np.ndarray:
    """Draw ``n`` Husimi-distributed amplitudes as a complex array.

    Sample ``i`` depends only on ``(seed, start + i)``.
    """
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    z = _rng.normals(seed, n, start)
    return _gaussian_draw(spec, z[:, 0], z[:, 1])


@dataclass(frozen=True)
class PositivePPairs:
    """Samples ``(alpha, beta)`` of the positive-P density, as complex arrays."""

    alpha: np.ndarray
    beta: np.ndarray

    @property
    def mu(self) -> np.ndarray:
        return 0.5 * (self.alpha + self.beta)

    @property
    def delta(self) -> np.ndarray:
        return self.alpha - self.beta

    def __len__(self):
        return self.alpha.size


def sample_positive_p_pairs(spec: GaussianStateSpec, n: int, seed: int, start: int = 0) -> PositivePPairs:
    """Draw positive-P pairs: Husimi ``mu`` plus isotropic ``delta`` of variance 2.

    The ``mu`` draws coincide with :func:`sample_q` for the same seed.
    """
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    z = _rng.normals(seed, n, start)
    mu = _gaussian_draw(spec, z[:, 0], z[:, 1])
    delta = math.sqrt(2.0) * (z[:, 2] + 1j * z[:, 3])
    return PositivePPairs(mu + 0.5 * delta, mu - 0.5 * delta)


class QuadratureStats(NamedTuple):
    """Symmetrically ordered quadrature moments of the mode."""

    mean_x: float
    mean_p: float
    var_x: float
    var_p: float
    cov_xp: float


def quadrature_stats(data) -> QuadratureStats:
    """Quadrature means and variances from Husimi samples or a Husimi grid.

    Anti-normal ordering is undone via ``Delta X^2 = 4 Var(alpha_x) - 1``.

    Raises
    ------
    InconsistencyError
        If a variance falls below zero by more than three standard errors,
        which no physical Husimi function allows.
    """
    if isinstance(data, QGrid):
        w = np.where(data.mask, 0.0, data.values) * data.cell_area
        tot = w.sum()
        X, Y = np.meshgrid(data.x_axis, data.y_axis)
        mx, my = (w * X).sum() / tot, (w * Y).sum() / tot
        vx = (w * (X - mx) ** 2).sum() / tot
        vy = (w * (Y - my) ** 2).sum() / tot
        cxy = (w * (X - mx) * (Y - my)).sum() / tot
        se_x = se_y = 1e-9
    else:
        z = np.asarray(data, dtype=complex).ravel()
        if z.size < 2:
            raise InvalidInputError("need at least two samples")
        x, y = z.real, z.imag
        mx, my = x.mean(), y.mean()
        vx, vy = x.var(ddof=1), y.var(ddof=1)
        cxy = np.mean((x - mx) * (y - my)) * z.size / (z.size - 1)
        k = math.sqrt(2.0 / (z.size - 1))
        se_x, se_y = 4 * vx * k, 4 * vy * k
    dx2, dp2 = 4 * vx - 1, 4 * vy - 1
    if dx2 < -3 * se_x or dp2 < -3 * se_y:
        raise InconsistencyError(
            f"quadrature variance below zero (dX^2={dx2:.3g}, dP^2={dp2:.3g}); input is not a Husimi function")
    return QuadratureStats(2 * float(mx), 2 * float(my), float(dx2), float(dp2), 4 * float(cxy))
