"""Triangular (Reck) beamsplitter networks.

Modes and gate indices are 1-based in the public API. A network stores its
gates in application order: ``gates[0]`` is ``V_1``, the first gate a photon
meets, and the network unitary is ``V_N ... V_2 V_1``. Each gate is a 2x2
unitary acting on modes ``(k1, k2)`` with ``k1 < k2``; its reflectivity is
``|g[0, 1]|^2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ConfigError, ContractError, DimensionError
from .linalg import UNITARY_ATOL, _as_generator, check_unitary, haar_unitary


def gate_count(n: int, m: int) -> int:
    """``N = n (m - (n + 1) / 2)``, kept in integers as ``n (2m - n - 1) / 2``."""
    return n * (2 * m - n - 1) // 2


def canonical_gate_order(n: int, m: int) -> list[tuple[int, int]]:
    """Mode pairs of ``V_1 ... V_N``: rows ``r = n..1``, and ``k2 = m..r+1`` within a row."""
    if not 1 <= n < m:
        raise ConfigError(f"n must be < m (and n >= 1), got n={n}, m={m}")
    return [(r, k2) for r in range(n, 0, -1) for k2 in range(m, r, -1)]


@dataclass(frozen=True)
class Beamsplitter:
    k1: int
    k2: int
    gate: np.ndarray

    def __post_init__(self):
        if not 1 <= self.k1 < self.k2:
            raise ContractError(f"need 1 <= k1 < k2, got ({self.k1}, {self.k2})")
        g = check_unitary(self.gate)
        if g.shape != (2, 2):
            raise DimensionError("beamsplitter gate must be 2x2")

    @property
    def height(self) -> int:
        return self.k2 - self.k1

    @property
    def reflectivity(self) -> float:
        return float(abs(self.gate[0, 1]) ** 2)


@dataclass(frozen=True, eq=False)
class InterferometerNetwork:
    """An ordered gate list on ``m`` modes, laid out for ``n`` input photons.

    ``modes`` is an ``(N, 2)`` int array of 1-based pairs, ``gates`` an
    ``(N, 2, 2)`` complex array. The pairs must follow
    ``canonical_gate_order(n, m)``.
    """

    m: int
    n: int
    modes: np.ndarray
    gates: np.ndarray

    def __post_init__(self):
        order = canonical_gate_order(self.n, self.m)
        modes = np.asarray(self.modes, dtype=np.int64).reshape(-1, 2)
        gates = np.asarray(self.gates, dtype=np.complex128).reshape(-1, 2, 2)
        if 2 * len(order) != self.n * (2 * self.m - self.n - 1):
            raise ContractError("gate count formula violated")
        if modes.shape[0] != len(order) or gates.shape[0] != len(order):
            raise ContractError(f"expected {len(order)} gates for n={self.n}, m={self.m}, got {modes.shape[0]}")
        if not np.array_equal(modes, np.array(order, dtype=np.int64).reshape(-1, 2)):
            raise ContractError("gate modes do not follow the canonical order")
        if not np.all(np.isfinite(gates)):
            raise ContractError("gate entries must be finite")
        defect = np.abs(np.conj(np.swapaxes(gates, 1, 2)) @ gates - np.eye(2)).max(initial=0.0)
        if defect > UNITARY_ATOL:
            raise ContractError(f"gate not unitary: defect {defect:.3e}")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "gates", gates)

    def __len__(self) -> int:
        return self.gates.shape[0]

    def __iter__(self) -> Iterator[Beamsplitter]:
        for (k1, k2), g in zip(self.modes, self.gates):
            yield Beamsplitter(int(k1), int(k2), g)

    def gate(self, k: int) -> Beamsplitter:
        """``V_k`` for 1-based ``k``."""
        if not 1 <= k <= len(self):
            raise IndexError(f"gate index {k} outside 1..{len(self)}")
        k1, k2 = self.modes[k - 1]
        return Beamsplitter(int(k1), int(k2), self.gates[k - 1])

    def reflectivities(self) -> np.ndarray:
        return np.abs(self.gates[:, 0, 1]) ** 2

    def heights(self) -> np.ndarray:
        return self.modes[:, 1] - self.modes[:, 0]

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "gates": [
                {"k1": int(k1), "k2": int(k2), "u": [[float(z.real), float(z.imag)] for z in g.ravel()]}
                for (k1, k2), g in zip(self.modes, self.gates)
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "InterferometerNetwork":
        try:
            modes = [(g["k1"], g["k2"]) for g in doc["gates"]]
            gates = [np.array([complex(re, im) for re, im in g["u"]]).reshape(2, 2) for g in doc["gates"]]
            return cls(int(doc["m"]), int(doc["n"]), np.array(modes).reshape(-1, 2), np.array(gates).reshape(-1, 2, 2))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed network document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "InterferometerNetwork":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class ReckPlan:
    """Full ``m(m-1)/2``-gate decomposition ``U = V_N ... V_1 diag(phases)``."""

    network: InterferometerNetwork
    phases: np.ndarray

    @property
    def m(self) -> int:
        return self.network.m

    def reconstruct(self) -> np.ndarray:
        return apply_network(self.network) * self.phases[None, :]


def _fold_phases(m: int, modes: np.ndarray, gates: np.ndarray, phases: np.ndarray) -> np.ndarray:
    # The first gate to touch mode k < m is (k, m); mode m is first touched by (m-1, m).
    gates = gates.copy()
    index = {(int(a), int(b)): i for i, (a, b) in enumerate(modes)}
    for k in range(1, m):
        i = index.get((k, m))
        if i is not None:
            gates[i, :, 0] *= phases[k - 1]
    i = index.get((m - 1, m))
    if i is not None:
        gates[i, :, 1] *= phases[m - 1]
    return gates


def _eliminate(u: np.ndarray, columns: int):
    """Clear the first ``columns`` columns below the diagonal with 2x2 gates.

    Column ``r`` is cleared from the top down, pairing row ``r`` with rows
    ``r+1..m``. Returns the gates in application order (the reverse of the
    elimination order) and the partially reduced matrix.
    """
    m = u.shape[0]
    work = u.copy()
    found = []
    for r in range(columns):
        for k2 in range(r + 1, m):
            a, b = work[r, r], work[k2, r]
            s = math.hypot(abs(a), abs(b))
            if s == 0.0:
                v = np.eye(2, dtype=np.complex128)
            else:
                elim = np.array([[np.conj(a), np.conj(b)], [-b, a]]) / s
                rows = work[[r, k2]]
                work[[r, k2]] = elim @ rows
                v = elim.conj().T
            found.append((r + 1, k2 + 1, v))
    found.reverse()
    modes = np.array([(k1, k2) for k1, k2, _ in found], dtype=np.int64).reshape(-1, 2)
    gates = np.array([v for _, _, v in found], dtype=np.complex128).reshape(-1, 2, 2)
    return modes, gates, work


def reck_decompose(u) -> ReckPlan:
    """Triangular Givens elimination of ``U``, one zeroed entry per gate.

    The elimination order is the reverse of the application order, so the
    gate pairs come out exactly in ``canonical_gate_order(m-1, m)`` and
    ``U = V_N ... V_1 diag(phases)``.
    """
    u = check_unitary(u)
    m = u.shape[0]
    if m < 2:
        raise DimensionError("need at least two modes to decompose")
    modes, gates, work = _eliminate(u, m - 1)
    phases = np.diagonal(work).copy()
    phases /= np.abs(phases)
    return ReckPlan(InterferometerNetwork(m, m - 1, modes, gates), phases)


def decompose_reduced(u, n: int) -> InterferometerNetwork:
    """The reduced network of ``U`` without decomposing the vacuum-only part.

    Eliminates only the first ``n`` columns; equal to
    ``reduce_network(reck_decompose(u), n)``.
    """
    u = check_unitary(u)
    m = u.shape[0]
    if not 1 <= n < m:
        raise ConfigError(f"n must be < m, got n={n}, m={m}")
    modes, gates, work = _eliminate(u, n)
    phases = np.ones(m, dtype=np.complex128)
    phases[:n] = np.diagonal(work)[:n] / np.abs(np.diagonal(work)[:n])
    return InterferometerNetwork(m, n, modes, _fold_phases(m, modes, gates, phases))


def fold_plan(plan: ReckPlan) -> InterferometerNetwork:
    """Absorb the residual phases into the first gate touching each mode."""
    net = plan.network
    gates = _fold_phases(net.m, net.modes, net.gates, plan.phases)
    return InterferometerNetwork(net.m, net.n, net.modes, gates)


def reduce_network(plan: ReckPlan, n: int) -> InterferometerNetwork:
    """Drop the gates with ``k1 > n``; they only ever see vacuum.

    The kept gates are the tail of the full order. On the first ``n`` input
    modes the reduced network acts exactly like the full plan.
    """
    m = plan.m
    if not 1 <= n < m:
        raise ConfigError(f"n must be < m, got n={n}, m={m}")
    full = fold_plan(plan)
    keep = full.modes[:, 0] <= n
    return InterferometerNetwork(m, n, full.modes[keep], full.gates[keep])


def haar_network(n: int, m: int, rng) -> InterferometerNetwork:
    """Reduced network of a Haar-random unitary."""
    return decompose_reduced(haar_unitary(m, rng), n)


def sample_network_direct(n: int, m: int, rng) -> InterferometerNetwork:
    """Draw gate parameters directly instead of decomposing a Haar unitary.

    A gate of height ``h`` gets reflectivity ``R = 1 - u^(1/h)`` (Beta(1, h),
    mean ``1/(h+1)``) and independent uniform phases; the input phases of the
    first ``n`` modes are folded in as in a decomposed network.
    """
    order = canonical_gate_order(n, m)
    gen = _as_generator(rng)
    modes = np.array(order, dtype=np.int64)
    h = (modes[:, 1] - modes[:, 0]).astype(float)
    refl = 1.0 - gen.random(len(order)) ** (1.0 / h)
    psi, phi = 2 * math.pi * gen.random((2, len(order)))
    t, r = np.sqrt(1.0 - refl), np.sqrt(refl)
    gates = np.empty((len(order), 2, 2), dtype=np.complex128)
    gates[:, 0, 0] = t * np.exp(1j * psi)
    gates[:, 0, 1] = -r * np.exp(-1j * phi)
    gates[:, 1, 0] = r * np.exp(1j * phi)
    gates[:, 1, 1] = t * np.exp(-1j * psi)
    phases = np.exp(2j * math.pi * gen.random(m))
    gates = _fold_phases(m, modes, gates, phases)
    return InterferometerNetwork(m, n, modes, gates)


def _apply_rows(mat: np.ndarray, k1: int, k2: int, g: np.ndarray) -> None:
    rows = mat[[k1 - 1, k2 - 1]]
    mat[[k1 - 1, k2 - 1]] = g @ rows


def apply_network(net: InterferometerNetwork, start: np.ndarray | None = None) -> np.ndarray:
    """``V_N ... V_1`` (times ``start`` on the right, if given)."""
    out = np.eye(net.m, dtype=np.complex128) if start is None else np.array(start, dtype=np.complex128)
    if out.shape[0] != net.m:
        raise DimensionError(f"start has {out.shape[0]} rows, network has {net.m} modes")
    for (k1, k2), g in zip(net.modes, net.gates):
        _apply_rows(out, k1, k2, g)
    return out


def conjugate_by_gate(a: np.ndarray, k1: int, k2: int, g: np.ndarray) -> None:
    """In place ``A <- G^dagger A G`` for a gate embedded on ``(k1, k2)``."""
    idx = [k1 - 1, k2 - 1]
    a[idx] = g.conj().T @ a[idx]
    a[:, idx] = a[:, idx] @ g


def conjugation_sweep(net: InterferometerNetwork, a) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(k, V_k^dag ... V_N^dag A V_N ... V_k)`` for ``k = N, N-1, ..., 1``.

    One pass, each step a single 2-mode conjugation. The yielded array is
    reused between steps; copy it to keep it.
    """
    cur = np.array(a, dtype=np.complex128)
    for k in range(len(net), 0, -1):
        k1, k2 = net.modes[k - 1]
        conjugate_by_gate(cur, k1, k2, net.gates[k - 1])
        yield k, cur


def prefix_suffix_conjugation(net: InterferometerNetwork, k: int, a) -> np.ndarray:
    """``V_k^dag ... V_N^dag A V_N ... V_k``."""
    if not 1 <= k <= len(net):
        raise IndexError(f"gate index {k} outside 1..{len(net)}")
    for j, cur in conjugation_sweep(net, a):
        if j == k:
            return cur.copy()
    raise AssertionError("unreachable")
