"""Dense complex linear algebra used throughout the simulator.

Matrices are plain ``complex128`` numpy arrays. The ``check_*`` helpers
validate the value-type invariants (finite entries, unitarity, Hermiticity)
and return the validated array, so constructors read as
``u = check_unitary(u)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ConvergenceError, DimensionError, PreconditionError

UNITARY_ATOL = 1e-10
HERMITIAN_ATOL = 1e-12
LOG_MAX_DISTANCE = 0.5

RNG_ALGORITHM_ID = "numpy-PCG64-SeedSequence"


def as_matrix(a, square: bool = False) -> np.ndarray:
    """Return ``a`` as a finite, non-empty 2-D complex array."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError("matrix has non-finite entries")
    return arr


def unitary_defect(u: np.ndarray) -> float:
    """Max-entry deviation of ``u^dagger u`` from the identity."""
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))


def hermitian_defect(h: np.ndarray) -> float:
    h = np.asarray(h)
    return float(np.max(np.abs(h - h.conj().T)))


def check_unitary(u, atol: float = UNITARY_ATOL) -> np.ndarray:
    u = as_matrix(u, square=True)
    defect = unitary_defect(u)
    if defect > atol:
        raise ContractError(f"matrix is not unitary: max|U^dag U - 1| = {defect:.3e} > {atol:.1e}")
    return u


def check_hermitian(h, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    h = as_matrix(h, square=True)
    defect = hermitian_defect(h)
    if defect > atol:
        raise ContractError(f"matrix is not Hermitian: max|H - H^dag| = {defect:.3e} > {atol:.1e}")
    return h


def hermitize(h: np.ndarray) -> np.ndarray:
    return 0.5 * (h + h.conj().T)


def projector(m: int, n: int) -> np.ndarray:
    """``diag(1, ..., 1, 0, ..., 0)`` with ``n`` ones in dimension ``m``."""
    if m < 1 or not 0 <= n <= m:
        raise DimensionError(f"projector needs 0 <= n <= m and m >= 1, got n={n}, m={m}")
    p = np.zeros((m, m), dtype=np.complex128)
    p[np.arange(n), np.arange(n)] = 1.0
    return p


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(master_seed, stream_index)``.

    Child generators for distinct purposes (network, noise, phase vector...)
    are derived through ``SeedSequence`` spawn keys, so streams with different
    indices or purposes are statistically independent.
    """

    master_seed: int
    stream_index: int = 0
    algorithm_id: str = RNG_ALGORITHM_ID

    def __post_init__(self):
        if self.algorithm_id != RNG_ALGORITHM_ID:
            raise ContractError(f"unsupported RNG algorithm {self.algorithm_id!r}")
        if not (0 <= self.master_seed < 2**64 and 0 <= self.stream_index < 2**64):
            raise ContractError("master_seed and stream_index must be 64-bit unsigned integers")

    def generator(self, purpose: int = 0) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index, purpose))
        return np.random.Generator(np.random.PCG64(seq))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard complex normals, ``E|z|^2 = 1``."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def haar_unitary(m: int, rng) -> np.ndarray:
    """Sample an ``m x m`` unitary from the Haar measure.

    QR of a complex Ginibre matrix, with the columns rephased so that the
    triangular factor has a positive real diagonal; without that phase fix
    the distribution is not Haar.
    """
    if m < 1:
        raise DimensionError(f"dimension must be >= 1, got {m}")
    gen = _as_generator(rng)
    z = complex_gaussian(gen, (m, m))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def exp_hermitian_2x2(h, epsilon: float) -> np.ndarray:
    """Closed-form ``exp(i * epsilon * h)`` for a 2x2 Hermitian ``h``."""
    h = check_hermitian(h)
    if h.shape != (2, 2):
        raise DimensionError(f"expected a 2x2 matrix, got {h.shape}")
    mean = 0.5 * (h[0, 0].real + h[1, 1].real)
    traceless = h - mean * np.eye(2)
    r = math.sqrt(0.25 * (h[0, 0].real - h[1, 1].real) ** 2 + abs(h[0, 1]) ** 2)
    # sin(eps r) / r without the 0/0 at r = 0
    sin_over_r = epsilon * np.sinc(epsilon * r / math.pi)
    out = math.cos(epsilon * r) * np.eye(2, dtype=np.complex128) + 1j * sin_over_r * traceless
    return np.exp(1j * epsilon * mean) * out


def exp_hermitian_small(h, epsilon: float) -> np.ndarray:
    """``exp(i * epsilon * H)`` by Taylor series with scaling and squaring.

    Requires ``|epsilon| * ||H||_2 <= 1``; larger arguments must be split by
    the caller (e.g. ``exp(i e H) = exp(i e H / 2)^2``).
    """
    h = check_hermitian(h, atol=1e-10)
    a = 1j * epsilon * h
    norm_bound = float(np.linalg.norm(a))
    if norm_bound > 1.0:
        norm_bound = abs(epsilon) * spectral_norm(h)
        if norm_bound > 1.0 + 1e-12:
            raise PreconditionError(
                f"|epsilon| * ||H||_2 = {norm_bound:.3g} > 1; scale the argument down and square the result"
            )
    squarings = max(0, math.ceil(math.log2(norm_bound / 0.125))) if norm_bound > 0.125 else 0
    a = a / 2**squarings
    dim = h.shape[0]
    result = np.eye(dim, dtype=np.complex128)
    term = np.eye(dim, dtype=np.complex128)
    for k in range(1, 40):
        term = term @ a / k
        result = result + term
        if np.linalg.norm(term) < 1e-18:
            break
    for _ in range(squarings):
        result = result @ result
    return result


def principal_log_unitary(w) -> np.ndarray:
    """Hermitian ``H`` with ``exp(iH) = W`` for a unitary close to the identity.

    Sums ``log(1 + A) = A - A^2/2 + A^3/3 - ...`` with ``A = W - 1`` until the
    term norm drops below 1e-15, then symmetrizes. Requires ``||W - 1||_2 < 0.5``.
    """
    w = as_matrix(w, square=True)
    dim = w.shape[0]
    a = w - np.eye(dim)
    dist = float(np.linalg.norm(a))
    if dist >= LOG_MAX_DISTANCE:
        dist = spectral_norm(a)
        if dist >= LOG_MAX_DISTANCE:
            raise PreconditionError(
                f"||W - 1||_2 = {dist:.3g} >= {LOG_MAX_DISTANCE}: too far from the identity for the log series"
            )
    log = np.zeros_like(a)
    power = np.eye(dim, dtype=np.complex128)
    for k in range(1, 400):
        power = power @ a
        term = power / k
        log = log + term if k % 2 else log - term
        if np.linalg.norm(term) < 1e-15:
            break
    return hermitize(-1j * log)


def spectral_norm(a, rtol: float = 1e-9, max_iter: int = 10_000, block: int = 4) -> float:
    """Largest singular value by block power iteration on ``A^dagger A``.

    A small block of iterates with a Rayleigh-Ritz step per sweep resolves a
    nearly degenerate leading pair that single-vector power iteration would
    crawl through. Converged when the top Ritz residual is below ``rtol``
    relative; a stalled block is restarted once from fresh random vectors.
    """
    a = as_matrix(a)
    b = a.conj().T @ a
    scale = float(np.max(np.abs(b)))
    if scale == 0.0:
        return 0.0
    b = b / scale
    dim = b.shape[0]
    k = min(dim, block)
    gen = np.random.default_rng(0x5EC7)
    basis, _ = np.linalg.qr(complex_gaussian(gen, (dim, k)))
    theta_prev = -1.0
    stalls = 0
    restarted = False
    for _ in range(max_iter):
        image = b @ basis
        ritz_values, ritz_vectors = np.linalg.eigh(basis.conj().T @ image)
        theta = float(ritz_values[-1])
        top = ritz_vectors[:, -1]
        residual = float(np.linalg.norm(image @ top - theta * (basis @ top)))
        if residual <= rtol * theta or k == dim:
            return math.sqrt(max(theta, 0.0) * scale)
        stalls = stalls + 1 if abs(theta - theta_prev) <= 1e-15 * theta else 0
        theta_prev = theta
        if stalls >= 50:
            if restarted:
                return math.sqrt(theta * scale)
            image = image + 0.5 * complex_gaussian(gen, (dim, k))
            restarted = True
            stalls = 0
        basis, _ = np.linalg.qr(image)
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations", last_iterate=basis[:, 0])
