"""Pump-to-harmonic maps of quasi-probability distributions.

Two routes are provided. The Jacobian route pushes a pump density through
``alpha -> chi_q(alpha)`` and sums ``J^k Q(alpha_b)`` over all preimages
``alpha_b`` of each harmonic-plane node, where ``J = |d(alpha)/d(chi)|``. The
Monte Carlo route samples positive-P pairs ``(alpha, beta)`` and averages the
coherent-dyad weight

    <chi|chi_a><chi_b|chi> / (pi <chi_b|chi_a>) = exp(-(chi - chi_b)^* (chi - chi_a)) / pi

which needs no inversion and is exact for the reduced harmonic state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import kernels
from ._summation import combine_partials
from .errors import (InvalidGridError, InvalidInputError, SingularMapError,
                     UnsupportedRepresentationError)
from .phase_space import (PhasePoint, GaussianStateSpec, QGrid, default_axes, q_value,
                          sample_positive_p_pairs)
from .sfa_response import ResponseModel

__all__ = [
    "JacobianField",
    "BranchSet",
    "MomentSpec",
    "MomentEstimate",
    "CoherentHarmonic",
    "forward_jacobian",
    "jacobian_at",
    "jacobian_field",
    "invert_response",
    "husimi_of_harmonic",
    "glauber_p_of_harmonic",
    "pushforward_mc",
    "harmonic_moment_mc",
    "quadrature_variance_mc",
    "Ridge",
    "trace_ridge",
    "principal_axes",
]

SINGULAR_DET = 1e-14
NEWTON_TOL = 1e-10
SEED_POINTS = 256
MERGE_TOL = 1e-6
OVERFLOW_EXPONENT = 700.0
MC_BLOCK = 4096


def _c(alpha) -> complex:
    return alpha.complex if isinstance(alpha, PhasePoint) else complex(alpha)


def forward_jacobian(model: ResponseModel, alphas, q: int, step):
    """Central-difference ``d(chi_x, chi_y)/d(alpha_x, alpha_y)`` at each amplitude.

    Returns the four entries ``(xx, xy, yx, yy)`` as arrays.
    """
    a = np.asarray(alphas, dtype=complex)
    h = np.broadcast_to(np.asarray(step, dtype=float), a.shape)
    fx = (model.evaluate_many(a + h, q) - model.evaluate_many(a - h, q)) / (2 * h)
    fy = (model.evaluate_many(a + 1j * h, q) - model.evaluate_many(a - 1j * h, q)) / (2 * h)
    return fx.real, fy.real, fx.imag, fy.imag


def _det(model, alphas, q, step):
    xx, xy, yx, yy = forward_jacobian(model, alphas, q, step)
    return xx * yy - xy * yx


def _default_step(alphas):
    return 1e-4 * np.maximum(1.0, np.abs(np.asarray(alphas)))


def jacobian_at(model: ResponseModel, alpha, q: int, step: float | None = None,
                rtol: float = 1e-4, max_halvings: int = 6) -> float:
    """Local area ratio ``J = 1/|det d(chi)/d(alpha)|`` by central differences.

    The step is halved until two successive determinants agree within
    ``rtol``.

    Raises
    ------
    SingularMapError
        If the forward determinant is below ``1e-14`` in magnitude.
    """
    a = _c(alpha)
    h = float(_default_step(a)) if step is None else float(step)
    prev = float(_det(model, np.array([a]), q, h)[0])
    for _ in range(max_halvings):
        h *= 0.5
        cur = float(_det(model, np.array([a]), q, h)[0])
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
            prev = cur
            break
        prev = cur
    if not math.isfinite(prev) or abs(prev) < SINGULAR_DET:
        raise SingularMapError(f"forward determinant {prev:.3g} at alpha={a}")
    return 1.0 / abs(prev)


@dataclass
class JacobianField:
    """``J`` on a pump-plane grid; NaN where the map is singular."""

    x_axis: np.ndarray
    y_axis: np.ndarray
    values: np.ndarray
    step: float


def jacobian_field(model: ResponseModel, x_axis, y_axis, q: int, step: float = 1e-5) -> JacobianField:
    xs, ys = np.asarray(x_axis, float), np.asarray(y_axis, float)
    a = xs[None, :] + 1j * ys[:, None]
    det = _det(model, a, q, step)
    with np.errstate(divide="ignore"):
        J = np.where(np.abs(det) < SINGULAR_DET, np.nan, 1.0 / np.abs(det))
    return JacobianField(xs, ys, J, step)


@dataclass
class BranchSet:
    """All pump preimages of one harmonic-plane point."""

    chi: complex
    alphas: list = field(default_factory=list)
    jacobians: list = field(default_factory=list)

    def __len__(self):
        return len(self.alphas)


def _triangles(chi_nodes):
    """Split each seeding cell into two triangles; return node indices (K, 3)."""
    ny, nx = chi_nodes.shape
    j, i = np.meshgrid(np.arange(ny - 1), np.arange(nx - 1), indexing="ij")
    p00 = (j * nx + i).ravel()
    p10 = p00 + 1
    p01 = p00 + nx
    p11 = p00 + nx + 1
    return np.concatenate([np.stack([p00, p10, p11], 1), np.stack([p00, p11, p01], 1)])


def _bary(t, v0, v1, v2):
    e1, e2, e = v1 - v0, v2 - v0, t - v0
    den = e1.real * e2.imag - e1.imag * e2.real
    with np.errstate(divide="ignore", invalid="ignore"):
        l1 = (e.real * e2.imag - e.imag * e2.real) / den
        l2 = (e1.real * e.imag - e1.imag * e.real) / den
    return l1, l2


def _seed(targets_axes, targets_flat, tri_chi, tri_alpha, max_pairs=1_000_000, max_cover=4096, stats=None):
    """Candidate (target index, seed alpha) pairs from triangles whose image covers a target."""
    finite = np.all(np.isfinite(tri_chi), axis=1)
    tri_chi, tri_alpha = tri_chi[finite], tri_alpha[finite]
    out_t, out_a = [], []
    eps = 1e-9
    if targets_axes is not None:
        xs, ys = targets_axes
        nx = xs.size
        cx, cy = tri_chi.real, tri_chi.imag
        ix0 = np.searchsorted(xs, cx.min(1) - eps, "left")
        ix1 = np.searchsorted(xs, cx.max(1) + eps, "right")
        iy0 = np.searchsorted(ys, cy.min(1) - eps, "left")
        iy1 = np.searchsorted(ys, cy.max(1) + eps, "right")
        wx, wy = np.maximum(ix1 - ix0, 0), np.maximum(iy1 - iy0, 0)
        counts = wx * wy
        # a triangle whose image spans thousands of nodes is not locally linear; its
        # seeds would be meaningless, so it is skipped and counted
        wide = counts > max_cover
        if stats is not None:
            stats["unresolved_triangles"] = int(wide.sum())
        counts[wide] = 0
        keep = np.nonzero(counts)[0]
        # process triangles in batches bounded by the number of candidate pairs
        csum = np.cumsum(counts[keep])
        start = 0
        while start < keep.size:
            base = csum[start - 1] if start else 0
            stop = int(np.searchsorted(csum, base + max_pairs, "right"))
            stop = max(stop, start + 1)
            k = keep[start:stop]
            cnt = counts[k]
            tri_idx = np.repeat(k, cnt)
            off = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            w = np.repeat(wx[k], cnt)
            gx = np.repeat(ix0[k], cnt) + off % w
            gy = np.repeat(iy0[k], cnt) + off // w
            tgt = xs[gx] + 1j * ys[gy]
            v = tri_chi[tri_idx]
            l1, l2 = _bary(tgt, v[:, 0], v[:, 1], v[:, 2])
            inside = (l1 >= -eps) & (l2 >= -eps) & (l1 + l2 <= 1 + eps)
            va = tri_alpha[tri_idx[inside]]
            l1, l2 = l1[inside], l2[inside]
            out_t.append((gy * nx + gx)[inside])
            out_a.append(va[:, 0] + l1 * (va[:, 1] - va[:, 0]) + l2 * (va[:, 2] - va[:, 0]))
            start = stop
    else:
        for ti, t in enumerate(targets_flat):
            l1, l2 = _bary(t, tri_chi[:, 0], tri_chi[:, 1], tri_chi[:, 2])
            inside = (l1 >= -eps) & (l2 >= -eps) & (l1 + l2 <= 1 + eps)
            va = tri_alpha[inside]
            out_t.append(np.full(va.shape[0], ti))
            out_a.append(va[:, 0] + l1[inside] * (va[:, 1] - va[:, 0]) + l2[inside] * (va[:, 2] - va[:, 0]))
    if not out_t:
        return np.empty(0, int), np.empty(0, complex)
    return np.concatenate(out_t), np.concatenate(out_a)


def _newton(model, q, alpha, target, tol, iters=40):
    alpha = alpha.copy()
    res = model.evaluate_many(alpha, q) - target
    for _ in range(iters):
        active = np.abs(res) >= tol
        active &= np.isfinite(res)
        if not active.any():
            break
        a = alpha[active]
        h = 1e-7 * np.maximum(1.0, np.abs(a))
        xx, xy, yx, yy = forward_jacobian(model, a, q, h)
        det = xx * yy - xy * yx
        r = res[active]
        with np.errstate(divide="ignore", invalid="ignore"):
            dx = -(yy * r.real - xy * r.imag) / det
            dy = -(-yx * r.real + xx * r.imag) / det
        step = dx + 1j * dy
        lam = np.ones(a.shape)
        new_a = a + step
        new_r = model.evaluate_many(new_a, q) - target[active]
        for _ in range(6):
            worse = ~(np.abs(new_r) < np.abs(r))
            if not worse.any():
                break
            lam[worse] *= 0.5
            new_a[worse] = a[worse] + lam[worse] * step[worse]
            new_r[worse] = model.evaluate_many(new_a[worse], q) - target[active][worse]
        ok = np.abs(new_r) < np.abs(r)
        idx = np.nonzero(active)[0]
        alpha[idx[ok]] = new_a[ok]
        res[idx[ok]] = new_r[ok]
        if not ok.any():
            break
    return alpha, res


def _dedupe(tidx, alpha, radius):
    """Drop preimages of the same node closer than ``radius`` (per point) to a kept one."""
    keep = np.ones(tidx.size, dtype=bool)
    for key in (alpha.real, alpha.imag):
        order = np.lexsort((key, tidx))
        ti, al, kp, rad = tidx[order], alpha[order], keep[order], radius[order]
        dup = np.zeros(ti.size, dtype=bool)
        close = np.abs(al[1:] - al[:-1]) < np.maximum(rad[1:], rad[:-1])
        dup[1:] = (ti[1:] == ti[:-1]) & close & kp[:-1]
        keep[order[dup]] = False
    return keep


def _domain_axes(search_domain, seeds):
    x0, x1, y0, y1 = search_domain
    if not (x1 > x0 and y1 > y0):
        raise InvalidGridError(f"empty search domain {search_domain}")
    return np.linspace(x0, x1, seeds), np.linspace(y0, y1, seeds)


def _preimages(model, q, targets_axes, targets_flat, search_domain, seeds, tol, stats=None):
    sx, sy = _domain_axes(search_domain, seeds)
    alpha_nodes = sx[None, :] + 1j * sy[:, None]
    chi_nodes = model.evaluate_many(alpha_nodes, q)
    tri = _triangles(chi_nodes)
    tidx, seed = _seed(targets_axes, targets_flat, chi_nodes.ravel()[tri], alpha_nodes.ravel()[tri], stats=stats)
    if targets_axes is not None:
        xs, ys = targets_axes
        tgt = xs[tidx % xs.size] + 1j * ys[tidx // xs.size]
    else:
        tgt = np.asarray(targets_flat, dtype=complex)[tidx]
    alpha, res = _newton(model, q, seed, tgt, tol)
    x0, x1, y0, y1 = search_domain
    ok = (np.abs(res) < tol) & (alpha.real >= x0) & (alpha.real <= x1) & (alpha.imag >= y0) & (alpha.imag <= y1)
    tidx, alpha = tidx[ok], alpha[ok]
    # Newton pins a root down to about tol / sqrt|det|, so near-degenerate roots
    # are merged over a correspondingly wider radius
    det = np.abs(_det(model, alpha, q, _default_step(alpha)))
    with np.errstate(divide="ignore"):
        radius = np.maximum(MERGE_TOL, 10 * tol / np.sqrt(det))
    keep = _dedupe(tidx, alpha, radius)
    return tidx[keep], alpha[keep]


def _dets_with_check(model, alpha, q, rtol=1e-4):
    h = 1e-4 * np.maximum(1.0, np.abs(alpha))
    d1 = _det(model, alpha, q, h)
    d2 = _det(model, alpha, q, 0.5 * h)
    with np.errstate(invalid="ignore", divide="ignore"):
        unstable = np.abs(d1 - d2) > rtol * np.abs(d2)
    return d2, unstable


def invert_response(model: ResponseModel, chi, q: int, search_domain, tol: float = NEWTON_TOL,
                    seeds: int = SEED_POINTS) -> BranchSet:
    """All preimages of ``chi`` inside ``search_domain = (x0, x1, y0, y1)``.

    An empty set means ``chi`` lies outside the image of the domain.
    Preimages at singular points carry ``J = inf``.
    """
    target = _c(chi)
    tidx, alpha = _preimages(model, q, None, np.array([target]), search_domain, seeds, tol)
    out = BranchSet(target)
    if alpha.size:
        det, _ = _dets_with_check(model, alpha, q)
        order = np.argsort(np.angle(alpha))
        for k in order:
            out.alphas.append(complex(alpha[k]))
            out.jacobians.append(float("inf") if abs(det[k]) < SINGULAR_DET else 1.0 / abs(det[k]))
    return out


def _chi_axes(chi_grid):
    if isinstance(chi_grid, QGrid):
        return chi_grid.x_axis, chi_grid.y_axis
    xs, ys = chi_grid
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    for ax in (xs, ys):
        if ax.size < 2 or np.any(np.diff(ax) <= 0):
            raise InvalidGridError("harmonic grid axes must be increasing with >= 2 points")
    return xs, ys


def _pump_domain(pump: GaussianStateSpec, n_sigma=6.0):
    xs, ys = default_axes(pump, 3, n_sigma)
    return (xs[0], xs[-1], ys[0], ys[-1])


def _map_density(density, model, q, chi_grid, power, reduce, search_domain, seeds, tol, info):
    xs, ys = _chi_axes(chi_grid)
    stats = {}
    tidx, alpha = _preimages(model, q, (xs, ys), None, search_domain, seeds, tol, stats)
    values = np.zeros(ys.size * xs.size)
    mask = np.zeros(values.size, dtype=bool)
    counts = np.bincount(tidx, minlength=values.size)
    if power == 0:
        contrib = density(alpha)
        unstable = np.zeros(alpha.size, dtype=bool)
    else:
        det, unstable = _dets_with_check(model, alpha, q)
        singular = ~(np.abs(det) >= SINGULAR_DET)
        mask[tidx[singular]] = True
        with np.errstate(divide="ignore"):
            contrib = np.where(singular, 0.0, density(alpha) * np.abs(det) ** (-float(power)))
    if reduce == "sum":
        np.add.at(values, tidx, contrib)
    elif reduce == "max":
        np.maximum.at(values, tidx, contrib)
    else:
        raise InvalidInputError(f"branch reduction must be 'sum' or 'max', got {reduce!r}")
    values[mask] = 0.0
    grid = QGrid(xs, ys, values.reshape(ys.size, xs.size), mask=mask.reshape(ys.size, xs.size))
    grid.metadata.update(info)
    grid.metadata.update({
        "q": q, "jacobian_power": power, "branch_reduce": reduce,
        "search_domain": list(map(float, search_domain)), "seed_points": seeds,
        "max_branches": int(counts.max()) if counts.size else 0,
        "richardson_unstable_preimages": int(unstable.sum()),
        "unresolved_triangles": stats.get("unresolved_triangles", 0),
        "model": model.describe(),
    })
    return grid


def husimi_of_harmonic(pump: GaussianStateSpec, model: ResponseModel, q: int, chi_grid,
                       jacobian_power: int = 2, branch_reduce: str = "sum", search_domain=None,
                       seeds: int = SEED_POINTS, tol: float = NEWTON_TOL) -> QGrid:
    """Harmonic Husimi function by the Jacobian map.

    Parameters
    ----------
    pump : GaussianStateSpec
    model : ResponseModel
    q : int
    chi_grid : QGrid or (x_axis, y_axis)
        Harmonic-plane nodes.
    jacobian_power : {0, 1, 2}
        Exponent of ``J``. 2 is the law written for the Husimi function, 1 is
        the measure pushforward, 0 evaluates the bare ``Q(alpha(chi))``.
    branch_reduce : {'sum', 'max'}
        How contributions of several preimages are combined.
    search_domain : (x0, x1, y0, y1), optional
        Pump region searched for preimages; default covers 6 sigma.

    Returns
    -------
    QGrid
        Nodes with a singular preimage are masked and listed in the metadata.
    """
    if jacobian_power not in (0, 1, 2):
        raise InvalidInputError(f"jacobian_power must be 0, 1 or 2, got {jacobian_power}")
    dom = _pump_domain(pump) if search_domain is None else tuple(search_domain)
    return _map_density(lambda a: q_value(pump, a), model, q, chi_grid, jacobian_power, branch_reduce,
                        dom, seeds, tol, {"representation": "husimi"})


@dataclass(frozen=True)
class CoherentHarmonic:
    """Harmonic mode in the coherent state ``|chi>``: a delta-function P."""

    chi: complex


def _p_density(pump):
    if isinstance(pump, GaussianStateSpec):
        if pump.r > 0:
            raise UnsupportedRepresentationError(
                "the P function of a squeezed state is not a regular density; use pushforward_mc")
        if pump.nbar == 0:
            return None, None
        g, s = pump.gamma.complex, pump.nbar
        dom = _pump_domain(GaussianStateSpec(pump.gamma, 0.0, 0.0, max(s - 0.5, 0.0)), 8.0)
        return (lambda a: np.exp(-np.abs(np.asarray(a) - g) ** 2 / s) / (math.pi * s)), dom
    if isinstance(pump, QGrid):
        interp = RegularGridInterpolator((pump.y_axis, pump.x_axis), pump.values, bounds_error=False,
                                         fill_value=0.0)

        def dens(a):
            a = np.asarray(a)
            return interp(np.stack([a.imag.ravel(), a.real.ravel()], -1)).reshape(a.shape)
        return dens, (pump.x_axis[0], pump.x_axis[-1], pump.y_axis[0], pump.y_axis[-1])
    raise InvalidInputError("pump must be a GaussianStateSpec or a QGrid of P values")


def glauber_p_of_harmonic(pump, model: ResponseModel, q: int, chi_grid, search_domain=None,
                          seeds: int = SEED_POINTS, tol: float = NEWTON_TOL):
    """Harmonic Glauber P function, ``sum_b J(alpha_b) P(alpha_b)``.

    A coherent pump returns :class:`CoherentHarmonic` (the harmonic is the
    coherent state ``|chi_q(gamma)>``). A thermal ``GaussianStateSpec`` or a
    grid of pump P values returns a :class:`QGrid`.

    Raises
    ------
    UnsupportedRepresentationError
        For squeezed pumps, whose P function is singular.
    """
    dens, dom = _p_density(pump)
    if dens is None:
        return CoherentHarmonic(complex(model.evaluate(pump.gamma.complex, q)))
    if search_domain is not None:
        dom = tuple(search_domain)
    return _map_density(dens, model, q, chi_grid, 1, "sum", dom, seeds, tol, {"representation": "glauber_p"})


def _draw(pump, model, q, n, seed, block_start, count):
    pairs = sample_positive_p_pairs(pump, count, seed, start=block_start)
    ca = model.evaluate_many(pairs.alpha, q)
    cb = model.evaluate_many(pairs.beta, q)
    return ca, cb


def pushforward_mc(pump: GaussianStateSpec, model: ResponseModel, q: int, n: int, seed: int, chi_grid,
                   backend: str | None = None, num_threads: int = 1) -> QGrid:
    """Monte Carlo harmonic Husimi function from positive-P pairs.

    Returns a :class:`QGrid` whose ``values`` are the real part of the mean
    weight and ``errors`` the per-node standard errors. Samples whose weight
    exponent can exceed 700 are rejected and counted; more than 1% rejected
    sets ``metadata['oracle_unreliable']``.
    """
    if n < 10_000:
        raise InvalidInputError(f"need n >= 1e4 samples, got {n}")
    xs, ys = _chi_axes(chi_grid)
    nodes = np.ascontiguousarray((xs[None, :] + 1j * ys[:, None]).ravel())
    impl = kernels.get_backend(backend)
    parts1, parts2 = [], []
    accepted = rejected = 0
    for start in range(0, n, MC_BLOCK):
        count = min(MC_BLOCK, n - start)
        ca, cb = _draw(pump, model, q, n, seed, start, count)
        bad = ~(np.isfinite(ca) & np.isfinite(cb)) | (np.abs(ca - cb) ** 2 / 4 > OVERFLOW_EXPONENT)
        rejected += int(bad.sum())
        ca, cb = np.ascontiguousarray(ca[~bad]), np.ascontiguousarray(cb[~bad])
        accepted += ca.size
        s1, s2 = impl.mc_accumulate(ca, cb, nodes, int(num_threads))
        parts1.append(np.asarray(s1))
        parts2.append(np.asarray(s2))
    if accepted < 2:
        raise InvalidInputError("all samples rejected")
    m1 = combine_partials(parts1) / accepted
    m2 = combine_partials(parts2) / accepted
    var = np.maximum(m2 - m1 * m1, 0.0)
    values = (m1 / math.pi).reshape(ys.size, xs.size)
    errors = (np.sqrt(var / (accepted - 1)) / math.pi).reshape(ys.size, xs.size)
    frac = rejected / n
    grid = QGrid(xs, ys, values, errors=errors)
    grid.metadata.update({"representation": "husimi_mc", "q": q, "samples": n, "seed": seed,
                          "rejected": rejected, "rejection_fraction": frac,
                          "oracle_unreliable": frac > 0.01, "model": model.describe()})
    return grid


@dataclass(frozen=True)
class MomentSpec:
    """Selects the normally ordered moment ``<a^dag^m a^n>``."""

    m: int
    n: int

    def __post_init__(self):
        if not (0 <= self.m <= 4 and 0 <= self.n <= 4):
            raise InvalidInputError(f"moment orders must lie in 0..4, got ({self.m}, {self.n})")


@dataclass(frozen=True)
class MomentEstimate:
    value: complex
    error: complex
    samples: int
    rejected: int


def _moment_samples(pump, model, q, n, seed):
    if n < 10_000:
        raise InvalidInputError(f"need n >= 1e4 samples, got {n}")
    pairs = sample_positive_p_pairs(pump, n, seed)
    ca = model.evaluate_many(pairs.alpha, q)
    cb = model.evaluate_many(pairs.beta, q)
    ok = np.isfinite(ca) & np.isfinite(cb)
    return ca[ok], cb[ok], int((~ok).sum())


def _mean_err(x):
    n = x.size
    mean = complex(combine_partials([x[i:i + MC_BLOCK].sum() for i in range(0, n, MC_BLOCK)]) / n)
    err = complex(np.std(x.real, ddof=1) / math.sqrt(n), np.std(x.imag, ddof=1) / math.sqrt(n))
    return mean, err


def harmonic_moment_mc(pump: GaussianStateSpec, model: ResponseModel, q: int, spec: MomentSpec, n: int,
                       seed: int) -> MomentEstimate:
    """Estimate ``<a^dag^m a^n> = E[chi(beta)^*^m chi(alpha)^n]`` over positive-P pairs."""
    if spec.m == 0 and spec.n == 0:
        return MomentEstimate(1.0 + 0j, 0j, n, 0)
    ca, cb, rej = _moment_samples(pump, model, q, n, seed)
    mean, err = _mean_err(np.conj(cb) ** spec.m * ca ** spec.n)
    return MomentEstimate(mean, err, n, rej)


@dataclass(frozen=True)
class QuadratureEstimate:
    variance: float
    error: float
    mean: float
    samples: int
    rejected: int


def quadrature_variance_mc(pump: GaussianStateSpec, model: ResponseModel, q: int, theta: float, n: int,
                           seed: int) -> QuadratureEstimate:
    """``Delta X_theta^2`` of the harmonic assembled from moments with ``m + n <= 2``.

    Uses ``<X^2> = <a^2> e^{-2i theta} + <a^dag^2> e^{2i theta} + 2 <a^dag a> + 1``
    with one shared sample set; the error follows from the delta method.
    """
    ca, cb, rej = _moment_samples(pump, model, q, n, seed)
    ph = np.exp(-1j * theta)
    cbs = np.conj(cb)
    y = (ca * ca * ph * ph + cbs * cbs / (ph * ph) + 2 * cbs * ca).real + 1.0
    z = (ca * ph + cbs / ph).real
    my = _mean_err(y.astype(complex))[0].real
    mz = _mean_err(z.astype(complex))[0].real
    var = my - mz * mz
    infl = y - 2 * mz * z
    err = float(np.std(infl, ddof=1) / math.sqrt(infl.size))
    return QuadratureEstimate(float(var), err, float(mz), int(ca.size), rej)


@dataclass(frozen=True)
class Ridge:
    """Radial maxima of a grid followed in steps of polar angle."""

    angles: np.ndarray
    radii: np.ndarray
    values: np.ndarray

    @property
    def monotonic(self) -> bool:
        return bool(self.radii.size >= 2 and np.all(np.diff(self.radii) > 0))

    def __len__(self):
        return int(self.radii.size)


def _radial_maxima(interp, center, angle, radii, floor):
    pts = center + radii * np.exp(1j * angle)
    v = interp(np.stack([pts.imag, pts.real], -1))
    inner = (v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:]) & (v[1:-1] > floor)
    idx = np.nonzero(inner)[0] + 1
    return radii[idx], v[idx]


def trace_ridge(grid: QGrid, angle_step: float = math.pi / 16, r_min: float | None = None,
                start_angle: float | None = None, max_jump: float | None = None, rel_floor: float = 1e-3,
                center: complex = 0j) -> Ridge:
    """Follow the innermost off-center ridge of ``grid`` through increasing angle.

    Rays from ``center`` are sampled bilinearly. The ridge starts at the
    smallest radial maximum beyond ``r_min`` on the first ray that has one,
    and each further ray contributes the maximum nearest the previous radius,
    provided it lies within ``max_jump``. Tracing stops at the first ray
    without such a maximum or after one full turn. With ``start_angle=None``
    every multiple of ``angle_step`` within one turn is tried and the longest
    trace is returned.
    """
    if start_angle is None:
        n = int(round(2 * math.pi / abs(angle_step)))
        best = None
        for k in range(n):
            rid = trace_ridge(grid, angle_step, r_min, k * abs(angle_step), max_jump, rel_floor, center)
            if best is None or len(rid) > len(best):
                best = rid
        return best
    interp = RegularGridInterpolator((grid.y_axis, grid.x_axis), np.nan_to_num(grid.values),
                                     bounds_error=False, fill_value=0.0)
    h = min(grid.dx, grid.dy)
    r_min = 3 * h if r_min is None else r_min
    r_out = min(center.real - grid.x_axis[0], grid.x_axis[-1] - center.real,
                center.imag - grid.y_axis[0], grid.y_axis[-1] - center.imag)
    radii = np.arange(r_min, r_out, h / 4)
    floor = rel_floor * float(np.nanmax(grid.values))
    max_jump = 0.25 * r_out if max_jump is None else max_jump
    steps = int(round(2 * math.pi / abs(angle_step)))
    angs, rads, vals = [], [], []
    for k in range(steps + 1):
        a = start_angle + k * angle_step
        rr, vv = _radial_maxima(interp, center, a, radii, floor)
        if not rads:
            if rr.size == 0:
                continue
            i = 0
        else:
            if rr.size == 0:
                break
            i = int(np.argmin(np.abs(rr - rads[-1])))
            if abs(rr[i] - rads[-1]) > max_jump:
                break
        angs.append(a)
        rads.append(float(rr[i]))
        vals.append(float(vv[i]))
    return Ridge(np.array(angs), np.array(rads), np.array(vals))


def principal_axes(grid: QGrid) -> tuple[complex, np.ndarray, float]:
    """Weighted centroid, covariance eigenvalues and major-axis angle in ``[0, pi)``."""
    v = np.nan_to_num(np.asarray(grid.values, dtype=float))
    v = np.where(v > 0, v, 0.0)
    X, Y = np.meshgrid(grid.x_axis, grid.y_axis)
    w = v.sum()
    if not w > 0:
        raise InvalidGridError("grid has no positive mass")
    mx, my = (v * X).sum() / w, (v * Y).sum() / w
    cxx = (v * (X - mx) ** 2).sum() / w
    cyy = (v * (Y - my) ** 2).sum() / w
    cxy = (v * (X - mx) * (Y - my)).sum() / w
    ev, vec = np.linalg.eigh(np.array([[cxx, cxy], [cxy, cyy]]))
    angle = math.atan2(vec[1, 1], vec[0, 1]) % math.pi
    return complex(mx, my), ev, angle
