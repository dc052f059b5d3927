"""Order-stable reductions used for Monte Carlo estimates."""
import math

import numpy as np

CHUNK = 4096


def stable_sum(values, axis=0):
    """Sum along ``axis`` in fixed chunks, combining partial sums with fsum.

    Partial sums cover a fixed sample range, so the total does not depend on
    how many workers produced the inputs.
    """
    v = np.moveaxis(np.asarray(values), axis, 0)
    n = v.shape[0]
    parts = [v[i:i + CHUNK].sum(axis=0) for i in range(0, max(n, 1), CHUNK)]
    return combine_partials(parts)


def combine_partials(parts):
    """Combine a sequence of equally shaped partial sums with fsum per element."""
    stack = np.asarray(parts)
    if stack.ndim == 1:
        if np.iscomplexobj(stack):
            return complex(math.fsum(stack.real), math.fsum(stack.imag))
        return math.fsum(stack)
    flat = stack.reshape(stack.shape[0], -1)
    if np.iscomplexobj(flat):
        re = [math.fsum(col) for col in flat.real.T]
        im = [math.fsum(col) for col in flat.imag.T]
        return (np.array(re) + 1j * np.array(im)).reshape(stack.shape[1:])
    return np.array([math.fsum(col) for col in flat.T]).reshape(stack.shape[1:])
