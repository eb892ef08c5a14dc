# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-frame hot kernels.

Fused single-pass arithmetic chains, clamped casts, per-buffer
normalization, dense layers, and a GIL-free busy wait (real CPU burn,
so pipeline stages run truly in parallel across threads).
"""

from libc.math cimport exp, isnan, trunc
from posix.time cimport CLOCK_MONOTONIC, clock_gettime, timespec

import numpy as np


def arith_chain(double[::1] x, const int[::1] ops, const double[::1] vals):
    """Apply a scalar op chain elementwise, in place, on a float64 buffer.

    Op codes: 0 add, 1 sub, 2 mul, 3 div.  The whole chain runs in one
    pass over the buffer.
    """
    cdef Py_ssize_t i, k
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = ops.shape[0]
    cdef double v
    cdef int op
    with nogil:
        for i in range(n):
            v = x[i]
            for k in range(m):
                op = ops[k]
                if op == 0:
                    v += vals[k]
                elif op == 1:
                    v -= vals[k]
                elif op == 2:
                    v *= vals[k]
                else:
                    v /= vals[k]
            x[i] = v


def clamp_trunc(double[::1] x, double lo, double hi, bint to_int):
    """Clamp a float64 buffer to [lo, hi] in place; truncate toward zero
    (NaN becomes 0) when the destination is an integer type."""
    cdef Py_ssize_t i
    cdef Py_ssize_t n = x.shape[0]
    cdef double v
    with nogil:
        for i in range(n):
            v = x[i]
            if to_int and isnan(v):
                v = 0.0
            elif v < lo:
                v = lo
            elif v > hi:
                v = hi
            if to_int:
                v = trunc(v)
            x[i] = v


def minmax(const double[::1] x):
    """Per-buffer min-max normalization to float32; constant input -> zeros."""
    cdef Py_ssize_t i
    cdef Py_ssize_t n = x.shape[0]
    cdef double lo, hi, span
    out_arr = np.empty(n, dtype=np.float32)
    cdef float[::1] out = out_arr
    with nogil:
        lo = x[0]
        hi = x[0]
        for i in range(1, n):
            if x[i] < lo:
                lo = x[i]
            if x[i] > hi:
                hi = x[i]
        span = hi - lo
        if span == 0.0:
            for i in range(n):
                out[i] = 0.0
        else:
            for i in range(n):
                out[i] = <float> ((x[i] - lo) / span)
    return out_arr


def standardize(const double[::1] x):
    """Per-buffer standardization (population std) to float32; zero spread -> zeros."""
    cdef Py_ssize_t i
    cdef Py_ssize_t n = x.shape[0]
    cdef double mu = 0.0, var = 0.0, sd, d
    out_arr = np.empty(n, dtype=np.float32)
    cdef float[::1] out = out_arr
    with nogil:
        for i in range(n):
            mu += x[i]
        mu /= n
        for i in range(n):
            d = x[i] - mu
            var += d * d
        var /= n
    sd = var ** 0.5
    cdef double csd = sd
    with nogil:
        if csd == 0.0:
            for i in range(n):
                out[i] = 0.0
        else:
            for i in range(n):
                out[i] = <float> ((x[i] - mu) / csd)
    return out_arr


def dense_forward(const float[:, ::1] w, const float[::1] b, const float[::1] x, int act):
    """One dense layer in float32: act(w @ x + b).

    Activation codes: 0 none, 1 relu, 2 sigmoid.
    """
    cdef Py_ssize_t o, i
    cdef Py_ssize_t n_out = w.shape[0]
    cdef Py_ssize_t n_in = w.shape[1]
    cdef float acc
    out_arr = np.empty(n_out, dtype=np.float32)
    cdef float[::1] out = out_arr
    with nogil:
        for o in range(n_out):
            acc = b[o]
            for i in range(n_in):
                acc += w[o, i] * x[i]
            if act == 1:
                if acc < 0.0:
                    acc = 0.0
            elif act == 2:
                acc = <float> (1.0 / (1.0 + exp(-<double> acc)))
            out[o] = acc
    return out_arr


def busy_wait_ns(long long ns):
    """Burn CPU for ``ns`` nanoseconds without holding the GIL."""
    cdef timespec t
    cdef long long start, now
    with nogil:
        clock_gettime(CLOCK_MONOTONIC, &t)
        start = <long long> t.tv_sec * 1000000000LL + t.tv_nsec
        now = start
        while now - start < ns:
            clock_gettime(CLOCK_MONOTONIC, &t)
            now = <long long> t.tv_sec * 1000000000LL + t.tv_nsec
