"""Pure numpy implementations of the compiled inner loops."""
import numpy as np


def _dme(k, kind, p1, p2):
    if kind == 0:
        return p1 * k / (k * k + p2) ** 3
    return p1 * k * np.exp(-k * k / p2)


def lewenstein_sum(E, A, IA, IA2, pref, dt, ip, dme_kind, dme_p1, dme_p2, num_threads=1):
    """Dipole ``d[i]`` from birth-time sums over ``tau_j = j dt``, ``j = 1..len(pref)``."""
    nt, M = E.size, pref.size
    d = np.zeros(nt)
    j_all = np.arange(1, M + 1)
    tau_all = j_all * dt
    for i in range(1, nt):
        m = min(M, i)
        j, tau = j_all[:m], tau_all[:m]
        ib = i - j
        dIA = IA[i] - IA[ib]
        ps = -dIA / tau
        S = ip * tau + 0.5 * ((IA2[i] - IA2[ib]) - dIA * dIA / tau)
        amp = _dme(ps + A[i], dme_kind, dme_p1, dme_p2) * _dme(ps + A[ib], dme_kind, dme_p1, dme_p2) * E[ib]
        d[i] = -2.0 * np.sum(amp * (pref[:m].imag * np.cos(S) - pref[:m].real * np.sin(S))) * dt
    return d


def mc_accumulate(chi_a, chi_b, nodes, num_threads=1):
    """Per-node sums of Re w and (Re w)^2 with ``w = exp(-(x - b)^* (x - a))``."""
    u = nodes[:, None] - chi_b[None, :]
    v = nodes[:, None] - chi_a[None, :]
    w = np.exp(-(np.conj(u) * v)).real
    return w.sum(axis=1), (w * w).sum(axis=1)
