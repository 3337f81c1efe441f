"""Gate noise: GUE perturbations, the noisy gate pair and the round-trip circuit.

Every ideal gate ``U_k`` is implemented together with its inverse so that
``Phi(U_k^dag) Phi(U_k) = exp(i eps h_k)`` for a fresh 2x2 GUE matrix ``h_k``.
Only that product is pinned down; where the noise sits inside the pair is a
modelling choice (``placement``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, ContractError
from .linalg import _as_generator
from .network import Beamsplitter, InterferometerNetwork

PLACEMENTS = ("inverse-side", "split")


@dataclass(frozen=True)
class GuePerturbation:
    """``[[alpha, gamma], [conj(gamma), beta]]`` acting on modes ``(k1, k2)``."""

    alpha: float
    beta: float
    gamma: complex
    k1: int
    k2: int

    def matrix(self) -> np.ndarray:
        return np.array([[self.alpha, self.gamma], [np.conj(self.gamma), self.beta]], dtype=np.complex128)

    def embed(self, m: int) -> np.ndarray:
        out = np.zeros((m, m), dtype=np.complex128)
        idx = np.array([self.k1 - 1, self.k2 - 1])
        out[np.ix_(idx, idx)] = self.matrix()
        return out


@dataclass(frozen=True)
class NoiseModel:
    epsilon: float
    placement: str = "inverse-side"

    def __post_init__(self):
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ConfigError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if self.placement not in PLACEMENTS:
            raise ConfigError(f"placement must be one of {PLACEMENTS}, got {self.placement!r}")

    @property
    def fidelity(self) -> float:
        """Average gate fidelity to second order, ``1 - eps^2``."""
        return 1.0 - self.epsilon**2


def _gue_batch(gen: np.random.Generator, count: int) -> np.ndarray:
    alpha, beta, g1, g2 = gen.standard_normal((4, count))
    gamma = (g1 + 1j * g2) / math.sqrt(2.0)
    h = np.empty((count, 2, 2), dtype=np.complex128)
    h[:, 0, 0] = alpha
    h[:, 1, 1] = beta
    h[:, 0, 1] = gamma
    h[:, 1, 0] = np.conj(gamma)
    return h


def sample_gue_2x2(modes: tuple[int, int], rng) -> GuePerturbation:
    """Real diagonal ``N(0, 1)``, off-diagonal complex with ``E|gamma|^2 = 1``."""
    k1, k2 = modes
    if not 1 <= k1 < k2:
        raise ContractError(f"invalid mode pair {modes}")
    h = _gue_batch(_as_generator(rng), 1)[0]
    return GuePerturbation(float(h[0, 0].real), float(h[1, 1].real), complex(h[0, 1]), k1, k2)


def exp_i_hermitian_2x2_batch(h: np.ndarray, epsilon: float) -> np.ndarray:
    """``exp(i eps h)`` for a stack of 2x2 Hermitian matrices, closed form."""
    mean = 0.5 * (h[:, 0, 0].real + h[:, 1, 1].real)
    half_diff = 0.5 * (h[:, 0, 0].real - h[:, 1, 1].real)
    r = np.sqrt(half_diff**2 + np.abs(h[:, 0, 1]) ** 2)
    cos = np.cos(epsilon * r)
    sin_over_r = epsilon * np.sinc(epsilon * r / math.pi)
    out = np.empty_like(h, dtype=np.complex128)
    out[:, 0, 0] = cos + 1j * sin_over_r * half_diff
    out[:, 1, 1] = cos - 1j * sin_over_r * half_diff
    out[:, 0, 1] = 1j * sin_over_r * h[:, 0, 1]
    out[:, 1, 0] = 1j * sin_over_r * h[:, 1, 0]
    return out * np.exp(1j * epsilon * mean)[:, None, None]


def _pair_batch(gates: np.ndarray, h: np.ndarray, noise: NoiseModel) -> tuple[np.ndarray, np.ndarray]:
    adj = np.conj(np.swapaxes(gates, 1, 2))
    if noise.epsilon == 0.0:
        return gates.copy(), adj
    if noise.placement == "inverse-side":
        return gates.copy(), exp_i_hermitian_2x2_batch(h, noise.epsilon) @ adj
    half = exp_i_hermitian_2x2_batch(h, 0.5 * noise.epsilon)
    return gates @ half, half @ adj


def noisy_gate_pair(gate: Beamsplitter, h: GuePerturbation, noise: NoiseModel) -> tuple[Beamsplitter, Beamsplitter]:
    """``(Phi(U_k), Phi(U_k^dag))`` with ``Phi(U_k^dag) Phi(U_k) = exp(i eps h_k)``."""
    if (gate.k1, gate.k2) != (h.k1, h.k2):
        raise ContractError(f"perturbation on {(h.k1, h.k2)} does not match gate on {(gate.k1, gate.k2)}")
    fwd, inv = _pair_batch(gate.gate[None], h.matrix()[None], noise)
    return Beamsplitter(gate.k1, gate.k2, fwd[0]), Beamsplitter(gate.k1, gate.k2, inv[0])


class RoundTrip(NamedTuple):
    """``W`` together with the realized ``V_k = Phi(U_k)`` and the ``h_k``."""

    W: np.ndarray
    gates: InterferometerNetwork
    perturbations: np.ndarray  # (N, 2, 2) Hermitian, aligned with gates.modes


def sample_perturbations(net: InterferometerNetwork, rng) -> np.ndarray:
    return _gue_batch(_as_generator(rng), len(net))


def build_roundtrip_circuit(net: InterferometerNetwork, noise: NoiseModel, rng, perturbations=None) -> RoundTrip:
    """``W = Phi(U_N) ... Phi(U_1) Phi(U_1^dag) ... Phi(U_N^dag)``.

    One ``h_k`` is drawn per gate unless ``perturbations`` is given. ``W`` is
    built by two-row updates, rightmost factor first.
    """
    h = sample_perturbations(net, rng) if perturbations is None else np.asarray(perturbations, dtype=np.complex128)
    if h.shape != (len(net), 2, 2):
        raise ContractError(f"expected {len(net)} perturbations, got shape {h.shape}")
    fwd, inv = _pair_batch(net.gates, h, noise)
    realized = InterferometerNetwork(net.m, net.n, net.modes, fwd)
    if noise.epsilon == 0.0:
        # U U^dag is the identity exactly; skip the rounding of 2N row updates
        return RoundTrip(np.eye(net.m, dtype=np.complex128), realized, h)
    w = np.eye(net.m, dtype=np.complex128)
    for k in range(len(net) - 1, -1, -1):
        idx = net.modes[k] - 1
        w[idx] = inv[k] @ w[idx]
    for k in range(len(net)):
        idx = net.modes[k] - 1
        w[idx] = fwd[k] @ w[idx]
    return RoundTrip(w, realized, h)


class FidelityEstimate(NamedTuple):
    estimate: float
    stderr: float


def average_gate_fidelity_mc(epsilon: float, samples: int, rng) -> FidelityEstimate:
    """Monte Carlo over GUE draws of the Haar-averaged gate fidelity ``Re tr exp(i eps h) / 2``."""
    if samples < 2:
        raise ConfigError("need at least two samples for a standard error")
    if epsilon == 0:
        return FidelityEstimate(1.0, 0.0)
    h = _gue_batch(_as_generator(rng), samples)
    mean = 0.5 * (h[:, 0, 0].real + h[:, 1, 1].real)
    r = np.sqrt(0.25 * (h[:, 0, 0].real - h[:, 1, 1].real) ** 2 + np.abs(h[:, 0, 1]) ** 2)
    # eigenvalues mean +- r
    vals = 0.5 * (np.cos(epsilon * (mean + r)) + np.cos(epsilon * (mean - r)))
    return FidelityEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples)))
