"""Seeded k-wise independent hash families over the Mersenne field GF(2^61 - 1).

Each function is a random polynomial of degree k-1 with coefficients drawn
from a Philox (counter-mode) generator keyed by the seed.  Degree 3 gives the
4-wise independent sign functions used by AMS and CountSketch; degree 1 gives
the pairwise independent bucket functions.

The scalar kernels are numba-compiled so the sketches and the sliding-window
engines can evaluate them inside their own compiled loops.
"""

from __future__ import annotations

import numba as nb
import numpy as np

MERSENNE_61 = (1 << 61) - 1

_P = np.uint64(MERSENNE_61)
_M32 = np.uint64(0xFFFFFFFF)
_M29 = np.uint64((1 << 29) - 1)
_S61 = np.uint64(61)
_S32 = np.uint64(32)
_S29 = np.uint64(29)
_S3 = np.uint64(3)
_ONE = np.uint64(1)


@nb.njit(inline="always", cache=True)
def mulmod61(a, b):
    # a, b < 2^61; split into 32-bit halves so no partial product overflows.
    ah = a >> _S32
    al = a & _M32
    bh = b >> _S32
    bl = b & _M32
    mid = ah * bl + al * bh
    ll = al * bl
    r = (ah * bh << _S3) + (mid >> _S29) + ((mid & _M29) << _S32) + (ll >> _S61) + (ll & _P)
    r = (r >> _S61) + (r & _P)
    if r >= _P:
        r -= _P
    return r


@nb.njit(inline="always", cache=True)
def poly61(coeffs, x):
    """Evaluate sum_k coeffs[k] * x^k mod 2^61-1 by Horner's rule."""
    deg = coeffs.shape[0] - 1
    h = coeffs[deg]
    for k in range(deg - 1, -1, -1):
        h = mulmod61(h, x) + coeffs[k]
        if h >= _P:
            h -= _P
    return h


@nb.njit(inline="always", cache=True)
def sign_of(coeffs, item):
    if poly61(coeffs, np.uint64(item)) & _ONE:
        return -1
    return 1


@nb.njit(inline="always", cache=True)
def bucket_of(coeffs, item, buckets):
    return np.int64(poly61(coeffs, np.uint64(item)) % np.uint64(buckets))


@nb.njit(cache=True)
def _sign_row(coeffs, item, out):
    for j in range(coeffs.shape[0]):
        out[j] = sign_of(coeffs[j], item)


@nb.njit(cache=True)
def _bucket_row(coeffs, item, buckets, out):
    for j in range(coeffs.shape[0]):
        out[j] = bucket_of(coeffs[j], item, buckets)


@nb.njit(cache=True)
def _sign_table(coeffs, n, out):
    for i in range(n):
        for j in range(coeffs.shape[0]):
            out[i, j] = sign_of(coeffs[j], i + 1)


@nb.njit(cache=True)
def _bucket_table(coeffs, n, buckets, out):
    for i in range(n):
        for j in range(coeffs.shape[0]):
            out[i, j] = bucket_of(coeffs[j], i + 1, buckets)


@nb.njit(cache=True)
def _signed_totals(coeffs, items, counts, out):
    # out[j] = sum_i counts[i] * s_j(items[i]); the linear bulk update
    for j in range(coeffs.shape[0]):
        acc = 0
        for i in range(items.shape[0]):
            if poly61(coeffs[j], np.uint64(items[i])) & _ONE:
                acc -= counts[i]
            else:
                acc += counts[i]
        out[j] += acc


def draw_coefficients(seed: int, count: int, degree: int) -> np.ndarray:
    """Coefficients for `count` random polynomials of the given degree."""
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.integers(0, MERSENNE_61, size=(count, degree + 1), dtype=np.uint64)


def derive_seed(master: int, *labels: int) -> int:
    """Derive an independent 64-bit child seed from a master seed and integer labels."""
    ss = np.random.SeedSequence([master & 0xFFFFFFFFFFFFFFFF, *labels])
    return int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0])


class SignFamily:
    """`count` independent 4-wise independent functions [n] -> {-1, +1}."""

    def __init__(self, count: int, seed: int):
        self.count = count
        self.seed = seed
        self.coeffs = draw_coefficients(seed, count, 3)

    def signs(self, item: int) -> np.ndarray:
        out = np.empty(self.count, dtype=np.int8)
        _sign_row(self.coeffs, item, out)
        return out

    def table(self, n: int) -> np.ndarray:
        """Row i holds the signs of item i+1."""
        out = np.empty((n, self.count), dtype=np.int8)
        _sign_table(self.coeffs, n, out)
        return out

    def signed_totals(self, items, counts) -> np.ndarray:
        out = np.zeros(self.count, dtype=np.int64)
        _signed_totals(self.coeffs, np.asarray(items, dtype=np.int64),
                       np.asarray(counts, dtype=np.int64), out)
        return out


class BucketFamily:
    """`count` independent pairwise independent functions [n] -> {0, ..., buckets-1}."""

    def __init__(self, count: int, buckets: int, seed: int):
        self.count = count
        self.buckets = buckets
        self.seed = seed
        self.coeffs = draw_coefficients(seed, count, 1)

    def buckets_of(self, item: int) -> np.ndarray:
        out = np.empty(self.count, dtype=np.int64)
        _bucket_row(self.coeffs, item, self.buckets, out)
        return out

    def table(self, n: int) -> np.ndarray:
        out = np.empty((n, self.count), dtype=np.int32)
        _bucket_table(self.coeffs, n, self.buckets, out)
        return out
