"""Matrix permanents and the permanent-based output probabilities of Boson Sampling.

Exact kernels (Ryser and Glynn, both Gray-code ordered so every step costs
one row-sum update) are compiled with numba. They allocate nothing: the
Python wrappers hand them an O(n) work buffer.
"""

from __future__ import annotations

import functools
import itertools
import math
from typing import NamedTuple

import numba
import numpy as np

from .errors import DimensionError, PatternError, SizeCapError
from .linalg import as_matrix

NAIVE_MAX_N = 9
EXACT_MAX_N = 30
ENUMERATION_CAP = 10**6
_FACTORIALS = [math.factorial(k) for k in range(21)]

OutputPattern = tuple  # photon counts per output mode


RESYNC_MASK = (1 << 8) - 1


@numba.njit(cache=True, nogil=True)
def _ryser_shift(a, rowsum, gray):
    # x_i + sum_{j in gray} a_ij with the half-row-sum shift x_i = a_i,n-1 - sum_j a_ij / 2
    n = a.shape[0]
    for i in range(n):
        s = a[i, n - 1]
        for c in range(n):
            s -= 0.5 * a[i, c]
        for c in range(n - 1):
            if (gray >> c) & 1:
                s += a[i, c]
        rowsum[i] = s


@numba.njit(cache=True, nogil=True)
def _ryser_kernel(a, rowsum):
    # Ryser's formula with the Nijenhuis-Wilf shift: 2^(n-1) terms of Glynn-like size.
    # rowsum is caller-provided scratch of length n.
    n = a.shape[0]
    _ryser_shift(a, rowsum, 0)
    prod = rowsum[0]
    for i in range(1, n):
        prod *= rowsum[i]
    acc_re = prod.real
    acc_im = prod.imag
    comp_re = 0.0
    comp_im = 0.0
    size = 0
    for k in range(1, 1 << (n - 1)):
        j = 0
        while not (k >> j) & 1:
            j += 1
        gray = k ^ (k >> 1)
        if (gray >> j) & 1:
            for i in range(n):
                rowsum[i] += a[i, j]
            size += 1
        else:
            for i in range(n):
                rowsum[i] -= a[i, j]
            size -= 1
        if (k & RESYNC_MASK) == 0:
            # recompute so incremental rounding does not drift over 2^(n-1) updates
            _ryser_shift(a, rowsum, gray)
        prod = rowsum[0]
        for i in range(1, n):
            prod *= rowsum[i]
        if size & 1:
            prod = -prod
        # Neumaier-compensated accumulation, real and imaginary parts separately
        x = prod.real
        t = acc_re + x
        if abs(acc_re) >= abs(x):
            comp_re += (acc_re - t) + x
        else:
            comp_re += (x - t) + acc_re
        acc_re = t
        x = prod.imag
        t = acc_im + x
        if abs(acc_im) >= abs(x):
            comp_im += (acc_im - t) + x
        else:
            comp_im += (x - t) + acc_im
        acc_im = t
    sign = -2.0 if (n - 1) & 1 else 2.0
    return sign * complex(acc_re + comp_re, acc_im + comp_im)


@numba.njit(cache=True, nogil=True)
def _glynn_kernel(a, rowsum):
    n = a.shape[0]
    for i in range(n):
        rowsum[i] = 0.0
    for j in range(n):
        for i in range(n):
            rowsum[i] += a[i, j]
    acc_re = 0.0
    acc_im = 0.0
    comp_re = 0.0
    comp_im = 0.0
    sign = 1.0
    k = 0
    while True:
        prod = rowsum[0]
        for i in range(1, n):
            prod *= rowsum[i]
        x = sign * prod.real
        t = acc_re + x
        if abs(acc_re) >= abs(x):
            comp_re += (acc_re - t) + x
        else:
            comp_re += (x - t) + acc_re
        acc_re = t
        x = sign * prod.imag
        t = acc_im + x
        if abs(acc_im) >= abs(x):
            comp_im += (acc_im - t) + x
        else:
            comp_im += (x - t) + acc_im
        acc_im = t
        k += 1
        if k >= 1 << (n - 1):
            break
        j = 0
        while not (k >> j) & 1:
            j += 1
        gray = k ^ (k >> 1)
        # delta_{j+1} flips; the first sign is pinned to +1
        if (gray >> j) & 1:
            for i in range(n):
                rowsum[i] -= 2.0 * a[i, j + 1]
        else:
            for i in range(n):
                rowsum[i] += 2.0 * a[i, j + 1]
        if (k & RESYNC_MASK) == 0:
            for i in range(n):
                acc = a[i, 0]
                for c in range(1, n):
                    acc += -a[i, c] if (gray >> (c - 1)) & 1 else a[i, c]
                rowsum[i] = acc
        sign = -sign
    scale = 1.0 / (1 << (n - 1))
    return complex((acc_re + comp_re) * scale, (acc_im + comp_im) * scale)


def _square(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"permanent needs a square matrix, got shape {a.shape}")
    if a.size and not np.all(np.isfinite(a)):
        raise DimensionError("matrix has non-finite entries")
    return a


def _exact(a, kernel) -> complex:
    a = _square(a)
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    if n > EXACT_MAX_N:
        raise SizeCapError(f"exact permanent capped at n={EXACT_MAX_N} (2^n terms), got n={n}")
    # no copy for a C-contiguous complex128 input; the kernel itself allocates nothing
    a = np.ascontiguousarray(a)
    rowsum = np.empty(n, dtype=np.complex128)
    return complex(kernel(a, rowsum))


@functools.lru_cache(maxsize=None)
def _permutations(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.intp).reshape(-1, n)


def permanent_naive(a) -> complex:
    """Brute-force sum over all n! permutations (ground-truth oracle, n <= 9)."""
    a = _square(a)
    n = a.shape[0]
    if n > NAIVE_MAX_N:
        raise SizeCapError(f"naive permanent capped at n={NAIVE_MAX_N}, got n={n}")
    if n == 0:
        return 1.0 + 0.0j
    terms = np.prod(a[np.arange(n), _permutations(n)], axis=1)
    return complex(math.fsum(terms.real) + 1j * math.fsum(terms.imag))


def permanent_ryser(a) -> complex:
    """Ryser inclusion-exclusion in Gray-code order with the Nijenhuis-Wilf half-sum shift, O(2^(n-1) n)."""
    return _exact(a, _ryser_kernel)


def permanent_glynn(a) -> complex:
    """Glynn's +-1 formula in Gray-code order, O(2^(n-1) n)."""
    return _exact(a, _glynn_kernel)


permanent = permanent_ryser


def rys_polynomial(v, x) -> complex:
    """``n^n * prod_i conj(x_i) * sum_j v_ij x_j`` for ``|x_i| = 1/sqrt(n)``.

    For real sign vectors the conjugate is a no-op. For complex phases it is
    what makes the phase average equal the permanent; without it every
    permutation term averages to zero.
    """
    v = _square(v)
    x = np.asarray(x, dtype=np.complex128)
    n = v.shape[0]
    if x.shape != (n,):
        raise DimensionError(f"x must have length {n}, got shape {x.shape}")
    if np.max(np.abs(np.abs(x) - 1.0 / math.sqrt(n))) > 1e-12:
        raise DimensionError("entries of x must have modulus 1/sqrt(n)")
    return complex(n**n * np.prod(np.conj(x) * (v @ x)))


def sign_vectors(n: int) -> np.ndarray:
    """All ``2^n`` vectors of ``{-1/sqrt(n), +1/sqrt(n)}^n``."""
    bits = (np.arange(2**n)[:, None] >> np.arange(n)) & 1
    return (1.0 - 2.0 * bits) / math.sqrt(n)


class PermanentEstimate(NamedTuple):
    estimate: complex
    stderr: float

    @property
    def stderr_valid(self) -> bool:
        return math.isfinite(self.stderr)


def estimate_permanent_gurvits(v, samples: int, rng, sampler: str = "sign", chunk: int = 1 << 15) -> PermanentEstimate:
    """Unbiased Monte Carlo mean of the Rys polynomial over random vectors.

    ``sampler="sign"`` draws uniform ``{+-1/sqrt(n)}`` vectors (Ryser's
    identity); ``sampler="phase"`` draws uniform phases of modulus
    ``1/sqrt(n)``. With a single sample the standard error is NaN.
    """
    v = _square(v)
    if samples < 1:
        raise DimensionError("need at least one sample")
    if sampler not in ("sign", "phase"):
        raise ValueError(f"unknown sampler {sampler!r}")
    n = v.shape[0]
    gen = rng.generator() if hasattr(rng, "generator") else np.random.default_rng(rng)
    # running mean and sum of squared deviations, merged chunk by chunk (Chan et al.)
    mean = 0.0 + 0.0j
    m2 = 0.0
    done = 0
    while done < samples:
        size = min(chunk, samples - done)
        if sampler == "sign":
            x = np.where(gen.random((size, n)) < 0.5, -1.0, 1.0).astype(np.complex128)
        else:
            x = np.exp(2j * math.pi * gen.random((size, n)))
        x /= math.sqrt(n)
        vals = n**n * np.prod(np.conj(x) * (x @ v.T), axis=1)
        chunk_mean = vals.mean()
        chunk_m2 = float(np.sum(np.abs(vals - chunk_mean) ** 2))
        total = done + size
        delta = chunk_mean - mean
        mean += delta * size / total
        m2 += chunk_m2 + abs(delta) ** 2 * done * size / total
        done = total
    if samples < 2:
        return PermanentEstimate(complex(mean), math.nan)
    return PermanentEstimate(complex(mean), math.sqrt(m2 / (samples - 1) / samples))


def check_pattern(s, n: int, m: int) -> tuple:
    counts = tuple(int(c) for c in s)
    if len(counts) != m:
        raise PatternError(f"pattern has {len(counts)} modes, expected {m}")
    if any(c < 0 for c in counts):
        raise PatternError("photon counts must be non-negative")
    if sum(counts) != n:
        raise PatternError(f"pattern holds {sum(counts)} photons, expected {n}")
    return counts


def build_submatrix(u, n: int, s) -> np.ndarray:
    """First ``n`` columns of ``U``, with row ``i`` repeated ``s_i`` times."""
    u = as_matrix(u, square=True)
    m = u.shape[0]
    if not 0 <= n <= m:
        raise DimensionError(f"need n <= m, got n={n}, m={m}")
    counts = check_pattern(s, n, m)
    rows = np.repeat(np.arange(m), counts)
    return u[rows, :n]


def output_probability(u, n: int, s, permanent_fn=permanent_ryser) -> float:
    """``|Per(U_s)|^2 / (s_1! ... s_m!)``."""
    sub = build_submatrix(u, n, s)
    denom = 1
    for c in s:
        if c > 20:
            raise SizeCapError("occupation numbers above 20 are not supported")
        denom *= _FACTORIALS[c]
    return abs(permanent_fn(sub)) ** 2 / denom


def iter_patterns(n: int, m: int):
    """All ways to place ``n`` photons in ``m`` modes, as count tuples."""
    for modes in itertools.combinations_with_replacement(range(m), n):
        counts = [0] * m
        for k in modes:
            counts[k] += 1
        yield tuple(counts)


def enumerate_distribution(u, n: int, permanent_fn=permanent_ryser) -> list[tuple[tuple, float]]:
    """Every output pattern with its probability, for photons in the first ``n`` modes."""
    u = as_matrix(u, square=True)
    m = u.shape[0]
    if not 0 <= n <= m:
        raise DimensionError(f"need n <= m, got n={n}, m={m}")
    count = math.comb(m + n - 1, n)
    if count > ENUMERATION_CAP:
        raise SizeCapError(f"{count} patterns exceed the enumeration cap of {ENUMERATION_CAP}")
    cols = u[:, :n]
    out = []
    for s in iter_patterns(n, m):
        rows = np.repeat(np.arange(m), s)
        denom = 1
        for c in s:
            denom *= _FACTORIALS[c]
        out.append((s, abs(permanent_fn(cols[rows])) ** 2 / denom))
    return out
