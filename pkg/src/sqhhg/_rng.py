"""Counter-based normal draws.

Sample ``i`` always reads block ``i // BLOCK`` of a Philox stream keyed by the
seed, so its values depend only on ``(seed, i)`` and never on how the work is
split between workers.
"""
import numpy as np

BLOCK = 4096
WORDS = 4


def _block(seed, stream, b):
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream) & 0xFFFFFFFFFFFFFFFF]
    bitgen = np.random.Philox(key=key, counter=[0, 0, 0, int(b)])
    return np.random.Generator(bitgen).standard_normal((BLOCK, WORDS))


def normals(seed, n, start=0, stream=0):
    """Standard normals of shape ``(n, 4)`` for samples ``start .. start+n-1``."""
    if n <= 0:
        return np.empty((0, WORDS))
    first, last = start // BLOCK, (start + n - 1) // BLOCK
    out = np.concatenate([_block(seed, stream, b) for b in range(first, last + 1)])
    off = start - first * BLOCK
    return out[off:off + n]
