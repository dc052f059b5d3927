# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Mirrors ``_kernels_py`` exactly in what it computes."""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport exp, cos, sin, fabs

cnp.import_array()


cdef inline double _dme(double k, int kind, double p1, double p2) noexcept nogil:
    cdef double s
    if kind == 0:
        s = k * k + p2
        return p1 * k / (s * s * s)
    return p1 * k * exp(-k * k / p2)


def lewenstein_sum(double[::1] E, double[::1] A, double[::1] IA, double[::1] IA2,
                   double complex[::1] pref, double dt, double ip,
                   int dme_kind, double dme_p1, double dme_p2, int num_threads=1):
    """Dipole ``d[i]`` from birth-time sums over ``tau_j = j dt``, ``j = 1..len(pref)``."""
    cdef Py_ssize_t nt = E.shape[0]
    cdef Py_ssize_t M = pref.shape[0]
    cdef Py_ssize_t i, j, jmax, ib
    cdef double tau, dIA, ps, S, amp, re, im
    out = np.zeros(nt, dtype=np.float64)
    cdef double[::1] d = out
    for i in prange(1, nt, nogil=True, num_threads=num_threads, schedule="static"):
        re = 0.0
        im = 0.0
        jmax = M if M < i else i
        for j in range(1, jmax + 1):
            ib = i - j
            tau = j * dt
            dIA = IA[i] - IA[ib]
            ps = -dIA / tau
            S = ip * tau + 0.5 * ((IA2[i] - IA2[ib]) - dIA * dIA / tau)
            amp = (_dme(ps + A[i], dme_kind, dme_p1, dme_p2)
                   * _dme(ps + A[ib], dme_kind, dme_p1, dme_p2) * E[ib])
            # pref * amp * exp(-i S)
            re = re + amp * (pref[j - 1].real * cos(S) + pref[j - 1].imag * sin(S))
            im = im + amp * (pref[j - 1].imag * cos(S) - pref[j - 1].real * sin(S))
        # 2 Re[i * sum * dt]
        d[i] = -2.0 * im * dt
    return out


def mc_accumulate(double complex[::1] chi_a, double complex[::1] chi_b,
                  double complex[::1] nodes, int num_threads=1):
    """Per-node sums of Re w and (Re w)^2 with ``w = exp(-(x - b)^* (x - a))``.

    The ``1/pi`` factor is applied by the caller. Each node is reduced
    sequentially over samples with Neumaier compensation.
    """
    cdef Py_ssize_t G = nodes.shape[0]
    cdef Py_ssize_t n = chi_a.shape[0]
    cdef Py_ssize_t g, s
    cdef double xr, xi, ur, ui, vr, vi, er, ei, w, t, s1, c1, s2, c2, y
    sums = np.zeros(G, dtype=np.float64)
    sq = np.zeros(G, dtype=np.float64)
    cdef double[::1] o1 = sums
    cdef double[::1] o2 = sq
    for g in prange(G, nogil=True, num_threads=num_threads, schedule="static"):
        xr = nodes[g].real
        xi = nodes[g].imag
        s1 = 0.0
        c1 = 0.0
        s2 = 0.0
        c2 = 0.0
        for s in range(n):
            # u = x - b, v = x - a; exponent = -conj(u) v
            ur = xr - chi_b[s].real
            ui = xi - chi_b[s].imag
            vr = xr - chi_a[s].real
            vi = xi - chi_a[s].imag
            er = -(ur * vr + ui * vi)
            ei = -(ur * vi - ui * vr)
            w = exp(er) * cos(ei)
            t = s1 + w
            if fabs(s1) >= fabs(w):
                c1 = c1 + ((s1 - t) + w)
            else:
                c1 = c1 + ((w - t) + s1)
            s1 = t
            y = w * w
            t = s2 + y
            if fabs(s2) >= fabs(y):
                c2 = c2 + ((s2 - t) + y)
            else:
                c2 = c2 + ((y - t) + s2)
            s2 = t
        o1[g] = s1 + c1
        o2[g] = s2 + c2
    return sums, sq
