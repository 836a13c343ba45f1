"""Vectorised 64-bit mixing and arithmetic modulo the Mersenne prime 2**61 - 1.

Everything here operates on ``numpy.uint64`` arrays and wraps modulo 2**64,
so results are identical on every platform.
"""

import numpy as np

MERSENNE61 = (1 << 61) - 1
MASK64 = (1 << 64) - 1

_P = np.uint64(MERSENNE61)
_M32 = np.uint64(0xFFFFFFFF)
_M29 = np.uint64((1 << 29) - 1)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_S61 = np.uint64(61)


def _u64(x):
    if isinstance(x, (int, np.integer)):
        return np.array(int(x) & MASK64, dtype=np.uint64)
    return np.asarray(x).astype(np.uint64)


def fmix64(x):
    """splitmix64 finaliser; a bijection on 64-bit words."""
    z = _u64(x)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _C1
        z = (z ^ (z >> np.uint64(27))) * _C2
        return z ^ (z >> np.uint64(31))


def derive(master, *counters):
    """Counter-mode PRF: a pseudorandom uint64 keyed by ``master``.

    ``counters`` may be ints or integer arrays; they broadcast together.
    """
    h = fmix64(_u64(master) ^ _GOLDEN)
    with np.errstate(over="ignore"):
        for pos, c in enumerate(counters, start=1):
            tweak = np.uint64((pos * 0x632BE59BD9B4E019) & MASK64)
            h = fmix64(h + fmix64(_u64(c) + tweak))
    return h


def to_unit_float(h):
    """Map uint64 words to doubles uniform on (0, 1]."""
    return ((_u64(h) >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def reduce61(x):
    x = _u64(x)
    x = (x & _P) + (x >> _S61)
    x = (x & _P) + (x >> _S61)
    with np.errstate(over="ignore"):
        return np.where(x >= _P, x - _P, x)


def addmod61(a, b):
    """(a + b) mod p for a, b already reduced."""
    with np.errstate(over="ignore"):
        return reduce61(_u64(a) + _u64(b))


def mulmod61(a, b):
    """(a * b) mod p for a, b < 2**61, without 128-bit intermediates."""
    a = _u64(a)
    b = _u64(b)
    a0, a1 = a & _M32, a >> np.uint64(32)
    b0, b1 = b & _M32, b >> np.uint64(32)
    with np.errstate(over="ignore"):
        lo = a0 * b0
        mid = a0 * b1 + a1 * b0
        hi = a1 * b1
        # 2**64 = 8 (mod p); mid * 2**32 = (mid >> 29) + (mid & (2**29-1)) << 32
        total = (
            (hi << np.uint64(3))
            + (mid >> np.uint64(29))
            + ((mid & _M29) << np.uint64(32))
            + (lo & _P)
            + (lo >> _S61)
        )
    return reduce61(total)


def universal_bit(values, r):
    """``((r[k] + sum_j r[j] * values[..., j]) mod p) mod 2``.

    ``values`` has shape (..., k) with entries < p; ``r`` has shape
    (..., k + 1) with entries in [1, p - 1] and broadcasts against it.
    """
    values = _u64(values)
    r = _u64(r)
    k = values.shape[-1]
    acc = np.broadcast_to(r[..., k], np.broadcast_shapes(values.shape[:-1], r.shape[:-1]))
    for j in range(k):
        acc = addmod61(acc, mulmod61(r[..., j], values[..., j]))
    return (acc & np.uint64(1)).astype(np.uint8)


def is_prime(n):
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    n = int(n)
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
    for q in small:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in small:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True
