"""NumPy implementations of the per-frame hot kernels.

Semantics match the compiled ``_ckernels`` module; this is the fallback
selected when the extension is unavailable.  ``busy_wait_ns`` sleeps
instead of burning CPU, which preserves scheduling behaviour (the GIL is
released either way) but not CPU load.
"""

import time

import numpy as np


def arith_chain(x, ops, vals):
    """Apply a scalar op chain elementwise, in place, on a float64 buffer.

    Op codes: 0 add, 1 sub, 2 mul, 3 div.  One numpy pass per op.
    IEEE overflow silently produces inf, like the compiled kernel.
    """
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for op, v in zip(ops, vals):
            if op == 0:
                x += v
            elif op == 1:
                x -= v
            elif op == 2:
                x *= v
            else:
                x /= v


def clamp_trunc(x, lo, hi, to_int):
    """Clamp a float64 buffer to [lo, hi] in place; truncate toward zero
    (NaN becomes 0) when the destination is an integer type."""
    np.clip(x, lo, hi, out=x)
    if to_int:
        np.nan_to_num(x, copy=False, nan=0.0, posinf=hi, neginf=lo)
        np.trunc(x, out=x)


def minmax(x):
    """Per-buffer min-max normalization to float32; constant input -> zeros."""
    lo = x.min()
    hi = x.max()
    if hi == lo:
        return np.zeros(x.shape[0], dtype=np.float32)
    return ((x - lo) / (hi - lo)).astype(np.float32)


def standardize(x):
    """Per-buffer standardization (population std) to float32; zero spread -> zeros."""
    mu = x.mean()
    sd = x.std()
    if sd == 0.0:
        return np.zeros(x.shape[0], dtype=np.float32)
    return ((x - mu) / sd).astype(np.float32)


def dense_forward(w, b, x, act):
    """One dense layer in float32: act(w @ x + b).

    Activation codes: 0 none, 1 relu, 2 sigmoid.
    """
    y = w @ x + b
    if act == 1:
        np.maximum(y, np.float32(0.0), out=y)
    elif act == 2:
        y = (1.0 / (1.0 + np.exp(-y.astype(np.float64)))).astype(np.float32)
    return y


def busy_wait_ns(ns):
    # Stand-in for per-frame compute: yields the thread like real work would.
    time.sleep(ns / 1e9)
