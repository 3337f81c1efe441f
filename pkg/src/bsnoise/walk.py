"""The matrix-valued random walk behind the round-trip circuit.

With ``a_i = V_N ... V_i h_i V_i^dag ... V_N^dag`` the round trip factorizes
exactly as ``W = exp(i eps a_1) ... exp(i eps a_N)``, so

* ``H_N = sum_i a_i`` is its first-order generator, and
* ``K_N = H_N + (i eps / 2) sum_{i<j} [a_i, a_j]`` the second-order one.

Both sums are evaluated by a Horner-style forward sweep,
``C_i = V_i (C_{i-1} + h_i) V_i^dag``, so every step is a two-mode update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, PreconditionError, SizeCapError
from .linalg import _as_generator, principal_log_unitary, spectral_norm
from .network import InterferometerNetwork, conjugate_by_gate

KN_MAX_GATES = 20_000
KN_CONVENTIONS = ("bch", "literal")


def _check_aligned(net: InterferometerNetwork, h) -> np.ndarray:
    h = np.asarray(h, dtype=np.complex128)
    if h.shape != (len(net), 2, 2):
        raise ContractError(f"need {len(net)} perturbations of shape (2, 2), got {h.shape}")
    return h


def _step(mat: np.ndarray, idx: np.ndarray, g: np.ndarray) -> None:
    # mat <- g mat g^dag on the two modes idx
    conjugate_by_gate(mat, idx[0] + 1, idx[1] + 1, g.conj().T)


def _sweep(net: InterferometerNetwork, h: np.ndarray, epsilon: float | None, convention: str):
    m = net.m
    c_acc = np.zeros((m, m), dtype=np.complex128)
    d_acc = None
    if epsilon is not None:
        coef = 0.5j * epsilon if convention == "bch" else 0.5 * epsilon
        d_acc = np.zeros((m, m), dtype=np.complex128)
    for k in range(len(net)):
        idx = net.modes[k] - 1
        hk = h[k]
        if d_acc is not None and coef != 0:
            # [C, h_k] with h_k supported on idx touches only those rows and columns
            d_acc[:, idx] += coef * (c_acc[:, idx] @ hk)
            d_acc[idx, :] -= coef * (hk @ c_acc[idx, :])
        c_acc[np.ix_(idx, idx)] += hk
        _step(c_acc, idx, net.gates[k])
        if d_acc is not None:
            _step(d_acc, idx, net.gates[k])
    return c_acc, d_acc


def _unconjugate_last(mat: np.ndarray, net: InterferometerNetwork) -> np.ndarray:
    out = mat.copy()
    k1, k2 = net.modes[-1]
    conjugate_by_gate(out, k1, k2, net.gates[-1])
    return out


def compute_H_N(net: InterferometerNetwork, perturbations, conjugate_last: bool = False) -> np.ndarray:
    """``sum_i V_N ... V_i h_i V_i^dag ... V_N^dag``.

    ``conjugate_last=True`` returns ``V_N^dag H_N V_N`` instead, the form the
    walk recurrence produces before the final conjugation is dropped.
    """
    h = _check_aligned(net, perturbations)
    out, _ = _sweep(net, h, None, "bch")
    out = 0.5 * (out + out.conj().T)
    return _unconjugate_last(out, net) if conjugate_last else out


def compute_H_and_K(net: InterferometerNetwork, perturbations, epsilon: float, convention: str = "bch"):
    """``(H_N, K_N)`` from a single sweep.

    ``convention="bch"`` weights the commutators by ``i eps / 2``, which keeps
    ``K_N`` Hermitian and is the second-order BCH term. ``"literal"`` uses a
    bare ``eps / 2``; the correction is then anti-Hermitian.
    """
    if convention not in KN_CONVENTIONS:
        raise ValueError(f"convention must be one of {KN_CONVENTIONS}")
    h = _check_aligned(net, perturbations)
    if len(net) > KN_MAX_GATES:
        raise SizeCapError(f"K_N limited to {KN_MAX_GATES} gates, network has {len(net)}")
    hn, corr = _sweep(net, h, epsilon, convention)
    hn = 0.5 * (hn + hn.conj().T)
    kn = hn + corr
    if convention == "bch":
        kn = 0.5 * (kn + kn.conj().T)
    return hn, kn


def compute_K_N(net: InterferometerNetwork, perturbations, epsilon: float, convention: str = "bch") -> np.ndarray:
    return compute_H_and_K(net, perturbations, epsilon, convention)[1]


def bch_defects(w, h_n, k_n, epsilon: float) -> tuple[float, float]:
    """``||log(W)/eps - A||_2`` for ``A = H_N`` and ``A = K_N``.

    When ``W`` is too far from the identity for the log series both defects
    come back as ``inf``.
    """
    if epsilon == 0:
        return 0.0, 0.0
    try:
        gen = principal_log_unitary(w) / epsilon
    except PreconditionError:
        return math.inf, math.inf
    d_h = spectral_norm(gen - h_n)
    d_k = spectral_norm(gen - k_n) if k_n is not None else math.nan
    return d_h, d_k


def random_phase_vector(n: int, rng) -> np.ndarray:
    """Independent uniform phases of modulus ``1/sqrt(n)``."""
    gen = _as_generator(rng)
    return np.exp(2j * math.pi * gen.random(n)) / math.sqrt(n)


def x_from_vector(h_n: np.ndarray, n: int, x: np.ndarray) -> float:
    """``||(1 - Pi_n) H Pi_n x||^2`` for ``x`` given on the first ``n`` modes."""
    y = h_n[n:, :n] @ x[:n]
    return float(np.vdot(y, y).real)


def statistic_X(h_n, n: int, rng) -> tuple[float, np.ndarray]:
    h_n = np.asarray(h_n)
    m = h_n.shape[0]
    if not 1 <= n < m:
        raise ContractError(f"need 1 <= n < m, got n={n}, m={m}")
    x = np.zeros(m, dtype=np.complex128)
    x[:n] = random_phase_vector(n, rng)
    return x_from_vector(h_n, n, x), x


def sigma_squared(net: InterferometerNetwork, variant: str = "printed") -> float:
    """Spectral norm of the second-moment sum of ``H_N``.

    ``"printed"`` sums ``2 V..|k+><k+|..V^dag`` with ``|k+> = (e_k1 + e_k2)/sqrt(2)``.
    ``"exact"`` uses the true ``E h^2 = 2 * 1_2``, i.e. ``2 V..(|k1><k1| + |k2><k2|)..V^dag``.
    """
    if variant not in ("printed", "exact"):
        raise ValueError("variant must be 'printed' or 'exact'")
    block = np.full((2, 2), 0.5) if variant == "printed" else np.eye(2)
    h = np.broadcast_to(block, (len(net), 2, 2))
    acc, _ = _sweep(net, h, None, "bch")
    return 2.0 * spectral_norm(0.5 * (acc + acc.conj().T))


def all_gate_exit_probabilities(net: InterferometerNetwork, n: int) -> np.ndarray:
    """``(N, 2)`` array of ``p_1^k, p_2^k = <e_k{1,2}| P_n^k |e_k{1,2}>``.

    ``P_n^k = V_k^dag ... V_N^dag Pi_n V_N ... V_k``, built by a backward sweep.
    """
    m = net.m
    proj = np.zeros((m, m), dtype=np.complex128)
    proj[np.arange(n), np.arange(n)] = 1.0
    out = np.empty((len(net), 2))
    for k in range(len(net) - 1, -1, -1):
        k1, k2 = net.modes[k]
        conjugate_by_gate(proj, k1, k2, net.gates[k])
        out[k] = proj[k1 - 1, k1 - 1].real, proj[k2 - 1, k2 - 1].real
    return out


def gate_exit_probabilities(net: InterferometerNetwork, k: int, n: int) -> tuple[float, float]:
    """Probability that a photon entering gate ``V_k`` on its first or second mode leaves in the first ``n`` modes."""
    if not 1 <= k <= len(net):
        raise IndexError(f"gate index {k} outside 1..{len(net)}")
    k1, k2 = net.modes[k - 1]
    vec = np.zeros((net.m, 2), dtype=np.complex128)
    vec[k1 - 1, 0] = 1.0
    vec[k2 - 1, 1] = 1.0
    for j in range(k - 1, len(net)):
        idx = net.modes[j] - 1
        vec[idx] = net.gates[j] @ vec[idx]
    p = np.sum(np.abs(vec[:n]) ** 2, axis=0)
    return float(p[0]), float(p[1])


def expected_X(net: InterferometerNetwork, n: int) -> float:
    """Noise- and phase-averaged ``X`` for a fixed network, ``sum_k (p1+p2)(2-p1-p2)/n``."""
    p = all_gate_exit_probabilities(net, n)
    s = p.sum(axis=1)
    return float(np.sum(s * (2.0 - s)) / n)


@dataclass
class WalkDiagnostics:
    H_N: np.ndarray
    X: float
    x_vector: np.ndarray
    sigma_sq: float
    defect_H: float = math.nan
    defect_K: float = math.nan
    X_K: float = math.nan
    K_N: np.ndarray | None = field(default=None, repr=False)


def diagnose(net: InterferometerNetwork, perturbations, w, epsilon: float, n: int, rng,
             with_kn: bool = False, with_defects: bool = True) -> WalkDiagnostics:
    """H_N, X and sigma^2 for one trial, plus the BCH defects and K_N on request."""
    if with_kn:
        h_n, k_n = compute_H_and_K(net, perturbations, epsilon)
    else:
        h_n, k_n = compute_H_N(net, perturbations), None
    x_stat, x = statistic_X(h_n, n, rng)
    diag = WalkDiagnostics(h_n, x_stat, x, sigma_squared(net), K_N=k_n)
    if k_n is not None:
        diag.X_K = x_from_vector(k_n, n, x)
    if with_defects:
        diag.defect_H, diag.defect_K = bch_defects(w, h_n, k_n, epsilon)
    return diag
