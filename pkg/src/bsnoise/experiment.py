"""Seeded Monte Carlo experiments on the noisy round-trip circuit.

Trial ``i`` draws everything from ``RngStream(master_seed, i)``: the network,
the gate noise and the phase vector come from separate child streams, so a
trial is reproducible on its own and independent of how trials are spread
over worker processes. In an epsilon sweep trial ``i`` reuses the same
network and noise draws at every epsilon.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import bound_report, distance_lower_bound, f_bound
from .errors import ConfigError
from .linalg import RNG_ALGORITHM_ID, RngStream
from .network import InterferometerNetwork, gate_count, haar_network, sample_network_direct
from .noise import NoiseModel, build_roundtrip_circuit
from .permanent import ENUMERATION_CAP, enumerate_distribution, permanent_ryser
from .walk import bch_defects, compute_H_and_K, compute_H_N, sigma_squared, statistic_X, x_from_vector

SCHEMA_VERSION = 1
NETWORK_MODES = ("decompose-haar", "direct-sample")
PURPOSE_NETWORK, PURPOSE_NOISE, PURPOSE_X = 0, 1, 2


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_epsilon(text) -> tuple[float, ...]:
    if isinstance(text, (int, float)):
        return (float(text),)
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    try:
        return tuple(float(x) for x in str(text).split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad epsilon list {text!r}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 4
    m: int = 16
    epsilon: tuple[float, ...] = (0.01,)
    trials: int = 100
    master_seed: int = 0
    network_mode: str = "decompose-haar"
    noise_placement: str = "inverse-side"
    compute_kn: bool = False
    full_distribution: bool = False
    diagnostics: bool = True
    workers: int = 1
    output_path: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "epsilon", parse_epsilon(self.epsilon))
        self.validate()

    def validate(self) -> None:
        if not 1 <= self.n < self.m:
            raise ConfigError(f"n must be < m (got n={self.n}, m={self.m})")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.epsilon:
            raise ConfigError("at least one epsilon value is required")
        if any(not (e >= 0 and math.isfinite(e)) for e in self.epsilon):
            raise ConfigError("epsilon values must be finite and >= 0")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.network_mode not in NETWORK_MODES:
            raise ConfigError(f"network_mode must be one of {NETWORK_MODES}")
        NoiseModel(0.0, self.noise_placement)
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.full_distribution and math.comb(self.m + self.n - 1, self.n) > ENUMERATION_CAP:
            raise ConfigError(f"full distribution needs C(m+n-1, n) <= {ENUMERATION_CAP}")

    _FIELD_TYPES = {"n": int, "m": int, "trials": int, "master_seed": int, "workers": int,
                    "compute_kn": _parse_bool, "full_distribution": _parse_bool, "diagnostics": _parse_bool,
                    "epsilon": parse_epsilon, "network_mode": str, "noise_placement": str, "output_path": str}
    _ALIASES = {"seed": "master_seed", "placement": "noise_placement", "with_kn": "compute_kn", "output": "output_path"}

    @classmethod
    def from_mapping(cls, values: dict, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        kwargs = dataclasses.asdict(base) if base is not None else {}
        for key, raw in values.items():
            key = cls._ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
            if key not in cls._FIELD_TYPES:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                kwargs[key] = cls._FIELD_TYPES[key](raw) if isinstance(raw, str) else raw
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "ExperimentConfig":
        """Flat ``key = value`` lines; ``#`` starts a comment. Overrides win."""
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value
        values.update(overrides or {})
        return cls.from_mapping(values)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["epsilon"] = list(self.epsilon)
        return d


@dataclass
class TrialRecord:
    trial_index: int
    master_seed: int
    stream_index: int
    epsilon: float
    p1_tilde: float = math.nan
    distance: float = math.nan
    X: float = math.nan
    X_K: float = math.nan
    defect_H: float = math.nan
    defect_K: float = math.nan
    sigma_sq: float = math.nan
    total_mass: float = math.nan
    l1_enumerated: float = math.nan
    wall_time: float = 0.0
    error: str | None = None

    def to_dict(self) -> dict:
        out = {}
        for k, v in dataclasses.asdict(self).items():
            out[k] = None if isinstance(v, float) and not math.isfinite(v) else v
        return out


def sample_network(cfg: ExperimentConfig, stream: RngStream) -> InterferometerNetwork:
    gen = stream.generator(PURPOSE_NETWORK)
    if cfg.network_mode == "direct-sample":
        return sample_network_direct(cfg.n, cfg.m, gen)
    return haar_network(cfg.n, cfg.m, gen)


def ideal_pattern(n: int, m: int) -> tuple:
    return (1,) * n + (0,) * (m - n)


def run_roundtrip_trial(cfg: ExperimentConfig, trial_index: int, epsilon: float | None = None) -> TrialRecord:
    """One round trip: sample ``U``, build ``W``, record ``|Per W_nn|^2`` and diagnostics.

    Failures are captured in the record's ``error`` field.
    """
    eps = cfg.epsilon[0] if epsilon is None else float(epsilon)
    rec = TrialRecord(trial_index, cfg.master_seed, trial_index, eps)
    start = time.perf_counter()
    try:
        stream = RngStream(cfg.master_seed, trial_index)
        net = sample_network(cfg, stream)
        rt = build_roundtrip_circuit(net, NoiseModel(eps, cfg.noise_placement), stream.generator(PURPOSE_NOISE))
        n = cfg.n
        p1 = abs(permanent_ryser(rt.W[:n, :n])) ** 2
        rec.p1_tilde = p1
        rec.distance = min(2.0, max(0.0, 2.0 * (1.0 - p1)))
        if cfg.diagnostics:
            if cfg.compute_kn:
                h_n, k_n = compute_H_and_K(rt.gates, rt.perturbations, eps)
            else:
                h_n, k_n = compute_H_N(rt.gates, rt.perturbations), None
            rec.X, x = statistic_X(h_n, n, stream.generator(PURPOSE_X))
            if k_n is not None:
                rec.X_K = x_from_vector(k_n, n, x)
            rec.defect_H, rec.defect_K = bch_defects(rt.W, h_n, k_n, eps)
            rec.sigma_sq = sigma_squared(rt.gates)
        if cfg.full_distribution:
            dist = enumerate_distribution(rt.W, n)
            target = ideal_pattern(n, cfg.m)
            rec.total_mass = math.fsum(p for _, p in dist)
            rec.l1_enumerated = math.fsum(abs((1.0 if s == target else 0.0) - p) for s, p in dist)
    except Exception as exc:  # a failed trial must not sink the batch
        rec.error = f"{type(exc).__name__}: {exc}"
    rec.wall_time = time.perf_counter() - start
    return rec


def _run_chunk(args) -> list[TrialRecord]:
    cfg, eps, indices = args
    return [run_roundtrip_trial(cfg, i, eps) for i in indices]


def run_trials(cfg: ExperimentConfig, epsilon: float | None = None) -> list[TrialRecord]:
    """All trials at one epsilon, in trial order regardless of ``workers``."""
    eps = cfg.epsilon[0] if epsilon is None else epsilon
    if cfg.workers == 1:
        return [run_roundtrip_trial(cfg, i, eps) for i in range(cfg.trials)]
    chunks = [(cfg, eps, list(range(s, cfg.trials, cfg.workers))) for s in range(cfg.workers)]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        parts = list(pool.map(_run_chunk, chunks))
    records = [r for part in parts for r in part]
    records.sort(key=lambda r: r.trial_index)
    return records


@dataclass
class Stat:
    mean: float
    stderr: float  # NaN when fewer than two samples
    count: int

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in dataclasses.asdict(self).items()}


def mean_stderr(values) -> Stat:
    arr = np.asarray([v for v in values if v is not None and math.isfinite(v)], dtype=float)
    if arr.size == 0:
        return Stat(math.nan, math.nan, 0)
    stderr = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else math.nan
    return Stat(float(arr.mean()), stderr, int(arr.size))


@dataclass
class SummaryStats:
    config: dict
    epsilon: float
    trials: int
    errors: int
    stats: dict[str, Stat]
    bounds: dict
    bound_check: dict
    determinism_hash: str
    checks: list = field(default_factory=list)
    fit: dict | None = None
    metadata: dict = field(default_factory=dict)

    def stat(self, name: str) -> Stat:
        return self.stats[name]

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "config": self.config,
            "epsilon": self.epsilon,
            "trials": self.trials,
            "errors": self.errors,
            "stats": {k: v.to_dict() for k, v in self.stats.items()},
            "bounds": self.bounds,
            "bound_check": self.bound_check,
            "determinism_hash": self.determinism_hash,
            "checks": [c.to_dict() if hasattr(c, "to_dict") else c for c in self.checks],
            "fit": self.fit,
        }


def metadata(cfg: ExperimentConfig | None = None) -> dict:
    return {
        "type": "metadata",
        "schema_version": SCHEMA_VERSION,
        "rng_algorithm": RNG_ALGORITHM_ID,
        "code_version": __version__,
        "config": cfg.to_dict() if cfg is not None else None,
    }


def determinism_hash(records: list[TrialRecord]) -> str:
    """sha256 over the records' canonical JSON, with ``wall_time`` left out."""
    h = hashlib.sha256()
    for rec in records:
        doc = rec.to_dict()
        doc.pop("wall_time")
        h.update(json.dumps(doc, sort_keys=True).encode())
        h.update(b"\n")
    return h.hexdigest()


def write_jsonl(path, records: list[TrialRecord], cfg: ExperimentConfig) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(metadata(cfg), sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


STAT_FIELDS = ("p1_tilde", "distance", "X", "X_K", "defect_H", "defect_K", "sigma_sq")


def summarize(cfg: ExperimentConfig, epsilon: float, records: list[TrialRecord]) -> SummaryStats:
    ok = [r for r in records if r.error is None]
    stats = {name: mean_stderr(getattr(r, name) for r in ok) for name in STAT_FIELDS}
    report = bound_report(cfg.n, cfg.m, epsilon)
    mean_dist = stats["distance"].mean
    if report.vacuous or epsilon == 0:
        check = {"applicable": False, "passed": None, "bound": report.distance_lower, "mean_distance": mean_dist}
    else:
        check = {"applicable": True, "passed": bool(mean_dist >= report.distance_lower),
                 "bound": report.distance_lower, "mean_distance": mean_dist}
    return SummaryStats(
        config=cfg.to_dict(), epsilon=epsilon, trials=len(records), errors=len(records) - len(ok),
        stats=stats, bounds=report.to_dict(), bound_check=check,
        determinism_hash=determinism_hash(records), metadata=metadata(cfg),
    )


def run_experiment(cfg: ExperimentConfig, epsilon: float | None = None, write: bool = True) -> SummaryStats:
    """Run all trials at one epsilon and reduce them; writes JSONL and summary if ``output_path`` is set."""
    eps = cfg.epsilon[0] if epsilon is None else epsilon
    records = run_trials(cfg, eps)
    summary = summarize(cfg, eps, records)
    if write and cfg.output_path:
        write_jsonl(cfg.output_path, records, cfg)
        Path(summary_path(cfg.output_path)).write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True))
    return summary


def summary_path(output_path: str) -> str:
    p = Path(output_path)
    return str(p.with_name(p.stem + ".summary.json"))


@dataclass
class PowerFit:
    exponent: float
    coefficient: float
    r_squared: float
    degenerate: bool

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def fit_power_law(x, y) -> PowerFit:
    """Least squares ``log y = log c + a log x``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    if keep.sum() < 2 or np.ptp(np.log(x[keep])) == 0:
        return PowerFit(math.nan, math.nan, math.nan, True)
    lx, ly = np.log(x[keep]), np.log(y[keep])
    a, b = np.polyfit(lx, ly, 1)
    resid = ly - (a * lx + b)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return PowerFit(float(a), float(math.exp(b)), r2, bool(keep.sum() < 3))


@dataclass
class SweepResult:
    points: list[SummaryStats]
    fit: PowerFit
    heuristic_coefficient: float  # N n / m
    bound_coefficient: float  # f(n, m) n^2, NaN when vacuous
    monotone: bool

    def table(self) -> list[dict]:
        return [
            {"epsilon": p.epsilon, "mean_distance": p.stat("distance").mean, "stderr": p.stat("distance").stderr,
             "bound": p.bounds["distance_lower"], "n": p.config["n"], "m": p.config["m"], "trials": p.trials}
            for p in self.points
        ]

    def to_dict(self) -> dict:
        return {
            "fit": self.fit.to_dict(),
            "heuristic_coefficient": self.heuristic_coefficient,
            "heuristic_distance_coefficient": 2 * self.heuristic_coefficient,
            "bound_coefficient": None if math.isnan(self.bound_coefficient) else self.bound_coefficient,
            "coefficient_above_bound": None if math.isnan(self.bound_coefficient)
            else bool(self.fit.coefficient >= self.bound_coefficient),
            "monotone": self.monotone,
            "table": self.table(),
        }


def epsilon_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Mean distance at each epsilon and a power-law fit ``c * eps^a``.

    The heuristic permanent ``1 - N n eps^2 / (2m)`` predicts a distance
    coefficient of ``2 N n / m``; the rigorous one is ``f(n, m) n^2``.
    """
    eps = sorted(set(cfg.epsilon))
    if len(eps) < 3 or any(e <= 0 for e in eps):
        raise ConfigError("a sweep needs at least three distinct positive epsilon values")
    if any(cfg.n * e > 0.1 for e in eps):
        raise ConfigError("sweep values must satisfy n * eps <= 0.1")
    points = [run_experiment(cfg, e, write=False) for e in eps]
    means = [p.stat("distance").mean for p in points]
    fit = fit_power_law(eps, means)
    f = f_bound(cfg.n, cfg.m)
    tol = [3 * (p.stat("distance").stderr if math.isfinite(p.stat("distance").stderr) else 0.0) for p in points]
    monotone = all(means[i + 1] + tol[i + 1] + tol[i] >= means[i] for i in range(len(means) - 1))
    return SweepResult(points, fit, gate_count(cfg.n, cfg.m) * cfg.n / cfg.m, f * cfg.n**2, monotone)


@dataclass
class FullDistributionResult:
    records: list[TrialRecord]
    max_mass_error: float
    max_identity_error: float
    passed: bool


def run_full_distribution_experiment(cfg: ExperimentConfig, epsilon: float | None = None,
                                     tol: float = 1e-9) -> FullDistributionResult:
    """Enumerate every output pattern of ``W`` and compare the l1 distance with ``2(1 - p1)``."""
    cfg = cfg.replace(full_distribution=True)
    records = run_trials(cfg, cfg.epsilon[0] if epsilon is None else epsilon)
    bad = [r for r in records if r.error is not None]
    mass = max((abs(r.total_mass - 1.0) for r in records if r.error is None), default=math.inf)
    ident = max((abs(r.l1_enumerated - 2 * (1 - r.p1_tilde)) for r in records if r.error is None), default=math.inf)
    return FullDistributionResult(records, mass, ident, not bad and mass <= tol and ident <= tol)


def distance_bound_check(cfg: ExperimentConfig, epsilon: float) -> dict:
    """Mean distance against ``f n^2 eps^2`` for ``cfg``'s instance."""
    summary = run_experiment(cfg, epsilon, write=False)
    bound = distance_lower_bound(cfg.n, cfg.m, epsilon)
    return {"mean_distance": summary.stat("distance").mean, "stderr": summary.stat("distance").stderr,
            "bound": bound.value, "vacuous": bound.vacuous,
            "passed": None if bound.vacuous else bool(summary.stat("distance").mean >= bound.value)}
