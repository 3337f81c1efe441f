"""Closed-form bounds on the expected round-trip distance.

Everything here is a pure function of ``(n, m, delta, epsilon)``. The
analytic bounds need ``m > e^2 n``; outside that region they are reported
as vacuous (non-positive or NaN) rather than raised, so small instances can
still be compared against them.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DimensionError

EULER_GAMMA = 0.5772156649015329
E2 = math.e**2
REGIME_LIMIT = 0.1  # n * eps above this leaves the small-noise regime
HARMONIC_DIRECT_MAX = 1000


def _check_nm(n: int, m: int) -> None:
    if not 1 <= n < m:
        raise DimensionError(f"need 1 <= n < m, got n={n}, m={m}")


def log_ratio(n: int, m: int) -> float:
    """``L = ln(m / (e^2 n))``; positive exactly when the bounds are non-vacuous."""
    return math.log(m / (E2 * n))


def is_vacuous(n: int, m: int) -> bool:
    return not log_ratio(n, m) > 0


def mu_lower_bound(n: int, m: int) -> float:
    """``4 n ln(m / (e^2 n))``; non-positive in the vacuous region."""
    return 4 * n * log_ratio(n, m)


def mu_gate_sum(n: int, m: int) -> float:
    """``4n sum_{k2=n+1}^m (k2-n)/(k2(k2+2))``, the tighter per-gate sum ``mu`` is bounded by."""
    _check_nm(n, m)
    k2 = np.arange(n + 1, m + 1, dtype=float)
    return float(4 * n * np.sum((k2 - n) / (k2 * (k2 + 2))))


def x_max(n: int, m: int, delta: float) -> float:
    """``12 n ln(em/n) ln(m/delta)``: ``X`` exceeds this with probability at most ``delta``."""
    if not 0 < delta < 1:
        raise DimensionError(f"delta must lie in (0, 1), got {delta}")
    _check_nm(n, m)
    return 12 * n * math.log(math.e * m / n) * math.log(m / delta)


def p0_lower_bound(n: int, m: int) -> float:
    """Closed form ``L / (12 ln(pi^2 m^2 / L))`` with ``L = ln(m/(e^2 n))``; NaN when vacuous."""
    ell = log_ratio(n, m)
    if ell <= 0:
        return math.nan
    return ell / (12 * math.log(math.pi**2 * m**2 / ell))


@dataclass(frozen=True)
class P0Chain:
    mu: float
    delta: float
    big_m: float
    x_max: float
    p0: float


def p0_chain(n: int, m: int) -> P0Chain:
    """``p0 >= (mu - 2 delta M) / (2 X_max(delta))`` at ``delta = mu / (4 pi^2 n m)``, ``M = pi^2 n m``.

    With that ``delta``, ``2 delta M = mu / 2`` and the chain reduces to
    ``mu / (4 X_max(delta))``. It carries an extra ``1/ln(em/n)`` relative
    to ``p0_lower_bound``.
    """
    _check_nm(n, m)
    mu = mu_lower_bound(n, m)
    big_m = math.pi**2 * n * m
    if mu <= 0:
        return P0Chain(mu, math.nan, big_m, math.nan, math.nan)
    delta = mu / (4 * math.pi**2 * n * m)
    xm = x_max(n, m, delta)
    return P0Chain(mu, delta, big_m, xm, (mu - 2 * delta * big_m) / (2 * xm))


def mu_max_exact_and_bounds(n: int, m: int) -> tuple[float, float, float]:
    """``2n + 2n sum_{i=n+1}^m 1/i`` with its brackets ``[2n ln(m/(n+1)), 2n ln(em/n)]``."""
    _check_nm(n, m)
    exact = 2 * n * (1 + sum(Fraction(1, i) for i in range(n + 1, m + 1)))
    return float(exact), 2 * n * math.log(m / (n + 1)), 2 * n * math.log(math.e * m / n)


def mu_max_table(max_m: int) -> list[tuple[int, int, Fraction, float, float]]:
    """Every ``(n, m, exact, lo, hi)`` with ``1 <= n < m <= max_m``, exact values as fractions."""
    harmonic = [Fraction(0)]
    for i in range(1, max_m + 1):
        harmonic.append(harmonic[-1] + Fraction(1, i))
    rows = []
    for m in range(2, max_m + 1):
        for n in range(1, m):
            exact = 2 * n * (1 + harmonic[m] - harmonic[n])
            rows.append((n, m, exact, 2 * n * math.log(m / (n + 1)), 2 * n * math.log(math.e * m / n)))
    return rows


@dataclass(frozen=True)
class HarmonicCheck:
    n: int
    value: float
    gap: float  # H_n - ln n - gamma
    lo: float  # 1/(2n + 1/2)
    hi: float  # 1/(2n + 1/3)
    margin_lo: float  # gap - lo
    margin_hi: float  # hi - gap

    @property
    def holds(self) -> bool:
        return self.margin_lo >= 0 and self.margin_hi >= 0


def harmonic_number_with_bounds(n: int) -> HarmonicCheck:
    """``H_n`` and the two-sided bracket on ``H_n - ln n - gamma``.

    Below ``HARMONIC_DIRECT_MAX`` the margins come from the summed value.
    Beyond it they shrink to ``~1/(72 n^3)``, under double-precision
    resolution of ``H_n``, so they are evaluated from the cancellation-free
    forms ``hi - (1/2n - 1/12n^2) = 1/(72n^3 + 12n^2)`` and
    ``(1/2n - 1/12n^2) - lo = (2n-1)/(48n^3 + 12n^2)`` plus the enveloping
    tail ``1/(120n^4) - 1/(252n^6) + ...``, taken at its worst case.
    """
    if n < 1:
        raise DimensionError("n must be >= 1")
    value = math.fsum(1.0 / l for l in range(1, n + 1))
    lo, hi = 1 / (2 * n + 0.5), 1 / (2 * n + 1 / 3)
    if n < HARMONIC_DIRECT_MAX:
        gap = value - math.log(n) - EULER_GAMMA
        return HarmonicCheck(n, value, gap, lo, hi, gap - lo, hi - gap)
    gap = 1 / (2 * n) - 1 / (12 * n**2) + 1 / (120 * n**4)
    tail = 1 / (252 * n**6)
    margin_hi = 1 / (72 * n**3 + 12 * n**2) - 1 / (120 * n**4) - tail
    margin_lo = (2 * n - 1) / (48 * n**3 + 12 * n**2) + 1 / (120 * n**4) - tail
    return HarmonicCheck(n, value, gap, lo, hi, margin_lo, margin_hi)


def harmonic_bracket_scan(n_max: int) -> tuple[bool, int | None]:
    """Check the bracket for every ``1 <= n <= n_max``; returns ``(all_hold, first_failure)``."""
    n = np.arange(1, n_max + 1, dtype=float)
    direct = n < HARMONIC_DIRECT_MAX
    values = np.cumsum(1.0 / n)
    lo, hi = 1 / (2 * n + 0.5), 1 / (2 * n + 1 / 3)
    gap = values - np.log(n) - EULER_GAMMA
    tail = 1 / (252 * n**6)
    m_hi = np.where(direct, hi - gap, 1 / (72 * n**3 + 12 * n**2) - 1 / (120 * n**4) - tail)
    m_lo = np.where(direct, gap - lo, (2 * n - 1) / (48 * n**3 + 12 * n**2) + 1 / (120 * n**4) - tail)
    bad = np.flatnonzero((m_hi < 0) | (m_lo < 0))
    return (bad.size == 0, None if bad.size == 0 else int(bad[0]) + 1)


F_READINGS = ("printed", "derived")


def f_bound(n: int, m: int, reading: str = "printed") -> float:
    """Coefficient ``f(n, m)`` of the distance lower bound ``f n^2 eps^2``.

    ``"printed"``: ``L^2 / (10 ln(pi m) - 5 ln L)``.
    ``"derived"``: ``(1 - 1/e) n p0 mu / n^2`` with ``mu = 4nL`` and the
    closed-form ``p0``, i.e. ``(1 - 1/e) L^2 / (3 (2 ln(pi m) - ln L))``.
    The printed form rounds ``(1 - 1/e)/3 ~ 0.2107`` down to ``1/5``.
    NaN when vacuous.
    """
    if reading not in F_READINGS:
        raise ValueError(f"reading must be one of {F_READINGS}")
    ell = log_ratio(n, m)
    if ell <= 0:
        return math.nan
    if reading == "printed":
        return ell**2 / (10 * math.log(math.pi * m) - 5 * math.log(ell))
    return (1 - 1 / math.e) * ell**2 / (3 * (2 * math.log(math.pi * m) - math.log(ell)))


def f_minorant(n: int) -> float:
    """``(ln(n - 10) / 20)^2``, claimed to lie below ``f(n, n^2)`` for ``n >= 11``."""
    return (math.log(n - 10) / 20) ** 2


def f_minorant_scan(n_lo: int = 11, n_hi: int = 1000) -> tuple[bool, list[int]]:
    failures = [n for n in range(n_lo, n_hi + 1) if not f_bound(n, n * n) >= f_minorant(n)]
    return not failures, failures


def f_curve(n_lo: int = 11, n_hi: int = 100) -> list[tuple[int, float]]:
    return [(n, f_bound(n, n * n)) for n in range(n_lo, n_hi + 1)]


@dataclass(frozen=True)
class DistanceBound:
    value: float
    raw: float
    vacuous: bool
    clamped: bool
    regime_warning: bool


def distance_lower_bound(n: int, m: int, epsilon: float, reading: str = "printed") -> DistanceBound:
    """``f(n, m) n^2 eps^2``, capped at 2 (the largest possible l1 distance)."""
    if epsilon < 0:
        raise DimensionError("epsilon must be >= 0")
    warn = n * epsilon > REGIME_LIMIT
    if epsilon == 0:
        return DistanceBound(0.0, 0.0, is_vacuous(n, m), False, warn)
    f = f_bound(n, m, reading)
    if math.isnan(f):
        return DistanceBound(math.nan, math.nan, True, False, warn)
    raw = f * n**2 * epsilon**2
    return DistanceBound(min(raw, 2.0), raw, False, raw > 2.0, warn)


@dataclass
class BoundReport:
    n: int
    m: int
    epsilon: float
    vacuous: bool
    mu_lower: float
    mu_gate_sum: float
    p0_lower: float
    p0_chain: float
    x_max_delta: list[tuple[float, float]]
    mu_max_exact: float
    mu_max_lo: float
    mu_max_hi: float
    f_value: float
    f_derived: float
    distance_lower: float
    distance_clamped: bool
    regime_warning: bool
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            return v

        return {k: clean(v) for k, v in asdict(self).items()}


def bound_report(n: int, m: int, epsilon: float, deltas=(0.1, 0.05)) -> BoundReport:
    _check_nm(n, m)
    exact, lo, hi = mu_max_exact_and_bounds(n, m)
    dist = distance_lower_bound(n, m, epsilon)
    vac = is_vacuous(n, m)
    notes = []
    if vac:
        notes.append(f"m <= e^2 n ({m} <= {E2 * n:.1f}): mu, p0 and f bounds are not applicable")
    if dist.regime_warning:
        notes.append(f"n*eps = {n * epsilon:.3g} > {REGIME_LIMIT}: outside the small-noise regime")
    return BoundReport(
        n=n, m=m, epsilon=epsilon, vacuous=vac,
        mu_lower=mu_lower_bound(n, m), mu_gate_sum=mu_gate_sum(n, m),
        p0_lower=p0_lower_bound(n, m), p0_chain=p0_chain(n, m).p0,
        x_max_delta=[(d, x_max(n, m, d)) for d in deltas],
        mu_max_exact=exact, mu_max_lo=lo, mu_max_hi=hi,
        f_value=f_bound(n, m), f_derived=f_bound(n, m, "derived"),
        distance_lower=dist.value, distance_clamped=dist.clamped,
        regime_warning=dist.regime_warning, notes=notes,
    )
