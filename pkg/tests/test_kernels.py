import math
import os
import subprocess
import sys

import numpy as np
import pytest

from sqhhg import _rng, kernels
from sqhhg._summation import combine_partials, stable_sum


def test_normals_depend_only_on_index():
    full = _rng.normals(42, 10_000)
    part = _rng.normals(42, 3000, start=5000)
    assert np.array_equal(full[5000:8000], part)
    assert not np.array_equal(full, _rng.normals(43, 10_000))
    assert _rng.normals(1, 0).shape == (0, 4)


def test_normals_statistics():
    z = _rng.normals(7, 200_000)
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01


def test_stable_sum_chunk_invariant():
    rng = np.random.default_rng(0)
    x = rng.normal(size=20_000) * 1e8 + 1.0
    exact = math.fsum(x)
    assert stable_sum(x) == pytest.approx(exact, rel=1e-15, abs=1e-6)
    parts = [x[i:i + 4096].sum() for i in range(0, x.size, 4096)]
    assert combine_partials(parts) == stable_sum(x)
    z = x + 1j * x[::-1]
    assert stable_sum(z) == pytest.approx(complex(math.fsum(z.real), math.fsum(z.imag)))


def test_mc_accumulate_backends():
    if not kernels.compiled_available():
        pytest.skip("compiled kernels not built")
    rng = np.random.default_rng(1)
    ca = rng.normal(size=500) + 1j * rng.normal(size=500)
    cb = ca + 0.1 * (rng.normal(size=500) + 1j * rng.normal(size=500))
    nodes = np.linspace(-2, 2, 9) + 0.5j
    c1, c2 = kernels.get_backend("compiled").mc_accumulate(ca, cb, nodes, 2)
    p1, p2 = kernels.get_backend("python").mc_accumulate(ca, cb, nodes, 1)
    assert np.allclose(c1, p1, rtol=1e-13) and np.allclose(c2, p2, rtol=1e-13)
    w = np.exp(-np.conj(nodes[3] - cb) * (nodes[3] - ca)).real
    assert c1[3] == pytest.approx(w.sum(), rel=1e-13)


def test_backend_selection_env():
    code = "import sqhhg.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, SQHHG_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
