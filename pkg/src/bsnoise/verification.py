"""Named numerical checks of every closed-form claim the simulator relies on.

Each ``check_*`` function runs with fixed seeds and returns a ``CheckResult``.
``verify_suite`` bundles them for the CLI; the acceptance tests call them
one by one at their stated sizes.
"""

from __future__ import annotations

import math
import time
import tracemalloc
from dataclasses import dataclass, field

import numpy as np

from .bounds import (
    f_minorant_scan,
    harmonic_bracket_scan,
    mu_max_table,
    p0_chain,
    p0_lower_bound,
    x_max,
)
from .experiment import ExperimentConfig, epsilon_sweep, run_full_distribution_experiment, run_trials
from .experiment import determinism_hash, distance_bound_check
from .linalg import RngStream, complex_gaussian, haar_unitary
from .network import canonical_gate_order, haar_network, reck_decompose, sample_network_direct
from .noise import NoiseModel, average_gate_fidelity_mc, build_roundtrip_circuit, sample_perturbations
from .permanent import (
    estimate_permanent_gurvits,
    permanent_glynn,
    permanent_naive,
    permanent_ryser,
    rys_polynomial,
    sign_vectors,
)
from .walk import (
    all_gate_exit_probabilities,
    bch_defects,
    compute_H_and_K,
    compute_H_N,
    expected_X,
    random_phase_vector,
    sigma_squared,
    x_from_vector,
)

PASS, FAIL, SKIP = "pass", "fail", "skip"


@dataclass
class CheckResult:
    name: str
    status: str
    detail: str = ""
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def line(self) -> str:
        return f"[{self.status.upper():4}] {self.name}: {self.detail} ({self.seconds:.1f}s)"

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            if isinstance(v, (np.floating, np.integer, np.bool_)):
                return v.item()
            return v

        return {"name": self.name, "status": self.status, "detail": self.detail,
                "metrics": {k: clean(v) for k, v in self.metrics.items()}, "seconds": self.seconds}


def _timed(name):
    def deco(fn):
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            res = fn(*args, **kwargs)
            res.name = name
            res.seconds = time.perf_counter() - start
            return res

        wrapper.__name__ = fn.__name__
        wrapper.__doc__ = fn.__doc__
        return wrapper

    return deco


def _status(ok: bool) -> str:
    return PASS if ok else FAIL


def _rel(a, b) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


@_timed("permanent oracle equivalence")
def check_permanent_oracle(count: int = 100, sizes=range(2, 9), seed: int = 1, rtol: float = 1e-10,
                           permanent_fn=None) -> CheckResult:
    """Ryser, Glynn and brute force agree on random complex matrices."""
    ryser = permanent_fn or permanent_ryser
    gen = np.random.default_rng(seed)
    worst = 0.0
    for n in sizes:
        for _ in range(count):
            a = complex_gaussian(gen, (n, n))
            oracle = permanent_naive(a)
            worst = max(worst, _rel(ryser(a), oracle), _rel(permanent_glynn(a), oracle))
    return CheckResult("", _status(worst <= rtol), f"max relative error {worst:.2e} (tol {rtol:g})", {"max_rel_err": worst})


@_timed("Gurvits estimator unbiased")
def check_gurvits(n: int = 6, samples: int = 100_000, exhaustive_max: int = 5, seed: int = 2) -> CheckResult:
    v = complex_gaussian(np.random.default_rng(seed), (n, n))
    exact = permanent_naive(v)
    est = estimate_permanent_gurvits(v, samples, RngStream(seed, 1))
    z = abs(est.estimate - exact) / est.stderr
    worst = 0.0
    gen = np.random.default_rng(seed + 1)
    for k in range(1, exhaustive_max + 1):
        w = complex_gaussian(gen, (k, k))
        mean = np.mean([rys_polynomial(w, x) for x in sign_vectors(k)])
        worst = max(worst, abs(mean - permanent_naive(w)) / max(1.0, abs(permanent_naive(w))))
    ok = z <= 3 and worst <= 1e-10
    return CheckResult("", _status(ok), f"|est - Per| = {z:.2f} stderr; exhaustive mean error {worst:.1e}",
                       {"z": z, "exhaustive_err": worst})


@_timed("gate fidelity 1 - eps^2")
def check_fidelity(epsilon: float = 0.05, samples: int = 100_000, seed: int = 3) -> CheckResult:
    est = average_gate_fidelity_mc(epsilon, samples, RngStream(seed))
    target = 1 - epsilon**2
    tol = max(3 * est.stderr, 1e-4)
    dev = abs(est.estimate - target)
    return CheckResult("", _status(dev <= tol), f"F = {est.estimate:.6f} vs {target:.6f}, |dev| {dev:.1e} <= {tol:.1e}",
                       {"F": est.estimate, "stderr": est.stderr, "deviation": dev})


@_timed("reflectivity means 1/(h+1)")
def check_reflectivity(m: int = 12, unitaries: int = 2000, heights=range(1, 7), seed: int = 4,
                       mode: str = "decompose-haar") -> CheckResult:
    gen = np.random.default_rng(seed)
    order = np.array(canonical_gate_order(m - 1, m))
    h = order[:, 1] - order[:, 0]
    samples = []
    for _ in range(unitaries):
        if mode == "decompose-haar":
            refl = reck_decompose(haar_unitary(m, gen)).network.reflectivities()
        else:
            refl = sample_network_direct(m - 1, m, gen).reflectivities()
        samples.append([refl[h == hh].mean() for hh in heights])
    samples = np.array(samples)
    means = samples.mean(axis=0)
    errs = samples.std(axis=0, ddof=1) / math.sqrt(unitaries)
    z = np.abs(means - 1 / (np.array(list(heights)) + 1)) / errs
    detail = ", ".join(f"h={hh}: {mu:.4f}" for hh, mu in zip(heights, means))
    return CheckResult("", _status(bool(np.all(z <= 3))), f"{detail}; max z {z.max():.2f}",
                       {"max_z": float(z.max())})


@_timed("exit probability moments")
def check_exit_moments(n: int = 4, m: int = 16, gate=(2, 10), networks: int = 20_000, seed: int = 5,
                       mode: str = "decompose-haar") -> CheckResult:
    k2 = gate[1]
    order = canonical_gate_order(n, m)
    k = order.index(tuple(gate))
    gen = np.random.default_rng(seed)
    p1 = np.empty(networks)
    for i in range(networks):
        net = haar_network(n, m, gen) if mode == "decompose-haar" else sample_network_direct(n, m, gen)
        p1[i] = all_gate_exit_probabilities(net, n)[k, 0]
    first, second = n / max(n, k2), n * (n + 2) / (k2 * (k2 + 2))
    # p1 is Beta(n, k2 - n) for complex amplitudes, whose second moment differs
    beta_second = n * (n + 1) / (k2 * (k2 + 1)) if k2 > n else 1.0
    se1 = p1.std(ddof=1) / math.sqrt(networks)
    se2 = (p1**2).std(ddof=1) / math.sqrt(networks)
    z1 = abs(p1.mean() - first) / se1
    z2 = abs((p1**2).mean() - second) / se2
    z_beta = abs((p1**2).mean() - beta_second) / se2
    return CheckResult("", _status(z1 <= 3 and z2 <= 3),
                       f"E p1 = {p1.mean():.4f} (target {first:.4f}, z {z1:.2f}); "
                       f"E p1^2 = {(p1 ** 2).mean():.4f} (target {second:.4f}, z {z2:.2f}; "
                       f"complex-sphere value {beta_second:.4f}, z {z_beta:.2f})",
                       {"mean_p1": p1.mean(), "mean_p1_sq": (p1**2).mean(), "z1": z1, "z2": z2,
                        "beta_second": beta_second, "z_beta": z_beta})


@_timed("mu_max brackets")
def check_mu_max(max_m: int = 200) -> CheckResult:
    rows = mu_max_table(max_m)
    # Fraction-vs-float comparisons are exact in Python
    bad = [(n, m) for n, m, exact, lo, hi in rows if not lo <= exact <= hi]
    return CheckResult("", _status(not bad), f"{len(rows)} pairs, {len(bad)} violations",
                       {"pairs": len(rows), "violations": len(bad)})


@_timed("harmonic number brackets")
def check_harmonic(n_max: int = 10**6) -> CheckResult:
    ok, first = harmonic_bracket_scan(n_max)
    return CheckResult("", _status(ok), f"1 <= n <= {n_max}: " + ("all hold" if ok else f"first failure n={first}"))


@_timed("f(n, n^2) minorant")
def check_f_minorant(n_lo: int = 11, n_hi: int = 1000) -> CheckResult:
    ok, failures = f_minorant_scan(n_lo, n_hi)
    return CheckResult("", _status(ok), f"{n_lo} <= n <= {n_hi}: {len(failures)} failures",
                       {"failures": len(failures)})


@_timed("p0 two-path consistency")
def check_p0_paths(n: int = 10, m: int = 100) -> CheckResult:
    chain = p0_chain(n, m)
    display = p0_lower_bound(n, m)
    ratio = display / chain.p0
    expected = math.log(math.e * m / n)
    ok = abs(ratio - expected) <= 1e-12 * expected and abs(2 * chain.delta * chain.big_m - chain.mu / 2) <= 1e-12 * chain.mu
    return CheckResult("", _status(ok), f"closed form / chain = {ratio:.12f}, ln(em/n) = {expected:.12f}",
                       {"p0_closed": display, "p0_chain": chain.p0, "ratio": ratio})


def _x_samples(n: int, m: int, epsilon: float, trials: int, seed: int) -> dict:
    cfg = ExperimentConfig(n=n, m=m, epsilon=epsilon, trials=trials, master_seed=seed)
    recs = run_trials(cfg)
    return {"X": np.array([r.X for r in recs]), "sigma_sq": np.array([r.sigma_sq for r in recs]),
            "errors": sum(r.error is not None for r in recs)}


@_timed("X tail bound")
def check_x_tail(n: int = 4, m: int = 16, epsilon: float = 0.01, trials: int = 1000, deltas=(0.1, 0.05),
                 seed: int = 7) -> CheckResult:
    if epsilon == 0:
        return CheckResult("", SKIP, "epsilon = 0: no noise")
    data = _x_samples(n, m, epsilon, trials, seed)
    parts, ok, metrics = [], data["errors"] == 0, {}
    for d in deltas:
        freq = float(np.mean(data["X"] >= x_max(n, m, d)))
        ok &= freq <= d
        metrics[f"freq_{d}"] = freq
        parts.append(f"P[X >= {x_max(n, m, d):.0f}] = {freq:.3f} <= {d}")
    parts.append(f"max X = {data['X'].max():.1f}")
    return CheckResult("", _status(ok), "; ".join(parts), metrics)


@_timed("sigma^2 Chernoff tail")
def check_sigma_tail(n: int = 4, m: int = 16, networks: int = 1000, seed: int = 8) -> CheckResult:
    gen = np.random.default_rng(seed)
    sig = np.array([sigma_squared(haar_network(n, m, gen)) for _ in range(networks)])
    threshold = 6 * n * math.log(math.e * m / n)
    freq = float(np.mean(sig >= threshold))
    bound = m * ((n + 1) / m) ** n
    return CheckResult("", _status(freq <= bound), f"P[sigma^2 >= {threshold:.1f}] = {freq:.3f} <= {bound:.3f}",
                       {"freq": freq, "bound": bound, "max_sigma_sq": float(sig.max())})


@_timed("Gaussian series lambda_max")
def check_gaussian_series(n: int = 4, m: int = 16, draws: int = 1000, deltas=(0.1, 0.05), seed: int = 9) -> CheckResult:
    gen = np.random.default_rng(seed)
    net = haar_network(n, m, gen)
    sig = sigma_squared(net)
    lam = np.array([np.linalg.eigvalsh(compute_H_N(net, sample_perturbations(net, gen)))[-1] for _ in range(draws)])
    ok, parts = True, []
    for d in deltas:
        t = math.sqrt(2 * sig * math.log(m / d))
        freq = float(np.mean(lam <= t))
        ok &= freq >= 1 - d
        parts.append(f"P[lambda_max <= {t:.2f}] = {freq:.3f} >= {1 - d}")
    return CheckResult("", _status(ok), "; ".join(parts), {"sigma_sq": sig})


@_timed("mean X per-gate formula")
def check_mean_x(n: int = 4, m: int = 16, draws: int = 4000, seed: int = 10) -> CheckResult:
    """Noise/phase average of X for a fixed network against sum_k (p1+p2)(2-p1-p2)/n."""
    gen = np.random.default_rng(seed)
    net = haar_network(n, m, gen)
    target = expected_X(net, n)
    xs = np.empty(draws)
    for i in range(draws):
        h_n = compute_H_N(net, sample_perturbations(net, gen))
        x = np.zeros(m, dtype=np.complex128)
        x[:n] = random_phase_vector(n, gen)
        xs[i] = x_from_vector(h_n, n, x)
    z = abs(xs.mean() - target) / (xs.std(ddof=1) / math.sqrt(draws))
    return CheckResult("", _status(z <= 3), f"mean X = {xs.mean():.4f} vs {target:.4f} (z {z:.2f})",
                       {"mean": xs.mean(), "target": target, "z": z})


def _bch_trial(n: int, m: int, seed: int, index: int, epsilon: float, sign: float = 1.0):
    stream = RngStream(seed, index)
    net = haar_network(n, m, stream.generator(0))
    h = sign * sample_perturbations(net, stream.generator(1))
    rt = build_roundtrip_circuit(net, NoiseModel(epsilon), None, perturbations=h)
    h_n, k_n = compute_H_and_K(rt.gates, h, epsilon)
    x = np.zeros(m, dtype=np.complex128)
    x[:n] = random_phase_vector(n, stream.generator(2))
    d_h, d_k = bch_defects(rt.W, h_n, k_n, epsilon)
    return d_h, d_k, x_from_vector(h_n, n, x), x_from_vector(k_n, n, x)


@_timed("BCH regime")
def check_bch(n: int = 4, m: int = 16, epsilons=(1e-4, 3e-4, 1e-3, 3e-3), slope_trials: int = 50,
              paired_trials: int = 200, epsilon: float = 1e-3, seed: int = 11) -> CheckResult:
    """Defect slope in eps, K_N beating H_N, and the second-order gap in X.

    ``E[X_K - X_H]`` is estimated with antithetic noise (``h`` and ``-h``),
    which cancels the zero-mean first-order cross term exactly.
    """
    if epsilon == 0:
        return CheckResult("", SKIP, "epsilon = 0: no noise")
    means = [np.mean([_bch_trial(n, m, seed, i, e)[0] for i in range(slope_trials)]) for e in epsilons]
    slope = float(np.polyfit(np.log(epsilons), np.log(means), 1)[0])
    wins, gaps = 0, []
    for i in range(paired_trials):
        d_h, d_k, x_h, x_k = _bch_trial(n, m, seed + 1, i, epsilon)
        _, _, x_h2, x_k2 = _bch_trial(n, m, seed + 1, i, epsilon, sign=-1.0)
        wins += d_k < d_h
        gaps.append(0.5 * ((x_k - x_h) + (x_k2 - x_h2)))
    frac = wins / paired_trials
    gap = float(np.mean(gaps))
    limit = m * n * epsilon**2
    ok = abs(slope - 1.0) <= 0.15 and frac >= 0.95 and gap <= limit
    return CheckResult("", _status(ok),
                       f"defect_H slope {slope:.3f}; defect_K < defect_H in {frac:.1%}; "
                       f"E[X_K - X_H] = {gap:.2e} <= mn eps^2 = {limit:.2e}",
                       {"slope": slope, "win_fraction": frac, "gap": gap, "limit": limit})


@_timed("distance scaling in eps")
def check_scaling(n: int = 4, m: int = 16, epsilons=(2e-3, 5e-3, 1e-2, 2e-2), trials: int = 500, seed: int = 12,
                  bound_instance=(10, 100, 0.003, 500), workers: int = 1) -> CheckResult:
    cfg = ExperimentConfig(n=n, m=m, epsilon=epsilons, trials=trials, master_seed=seed, diagnostics=False,
                           workers=workers)
    sweep = epsilon_sweep(cfg)
    fit = sweep.fit
    ok = abs(fit.exponent - 2.0) <= 0.2 and fit.r_squared >= 0.98 and sweep.monotone
    detail = f"exponent {fit.exponent:.3f}, R^2 {fit.r_squared:.4f}, c {fit.coefficient:.3g}"
    metrics = {"exponent": fit.exponent, "r_squared": fit.r_squared, "coefficient": fit.coefficient}
    if bound_instance:
        bn, bm, be, bt = bound_instance
        bcfg = ExperimentConfig(n=bn, m=bm, epsilon=be, trials=bt, master_seed=seed, diagnostics=False,
                                workers=workers)
        res = distance_bound_check(bcfg, be)
        ok &= bool(res["passed"])
        detail += f"; n={bn}, m={bm}, eps={be}: mean {res['mean_distance']:.3e} >= bound {res['bound']:.3e}"
        metrics.update(bound_mean=res["mean_distance"], bound=res["bound"])
    return CheckResult("", _status(ok), detail, metrics)


@_timed("distance identity by enumeration")
def check_distance_identity(n: int = 3, m: int = 9, epsilon: float = 0.05, trials: int = 50, seed: int = 13) -> CheckResult:
    if epsilon == 0:
        return CheckResult("", SKIP, "epsilon = 0: no noise")
    cfg = ExperimentConfig(n=n, m=m, epsilon=epsilon, trials=trials, master_seed=seed, diagnostics=False)
    res = run_full_distribution_experiment(cfg)
    return CheckResult("", _status(res.passed),
                       f"max |sum p - 1| = {res.max_mass_error:.1e}, max |l1 - 2(1-p1)| = {res.max_identity_error:.1e}",
                       {"mass_err": res.max_mass_error, "identity_err": res.max_identity_error})


@_timed("permanent performance")
def check_permanent_performance(n: int = 20, limit: float = 5.0, seed: int = 14) -> CheckResult:
    a = complex_gaussian(np.random.default_rng(seed), (n, n))
    permanent_ryser(np.eye(2))  # compile outside the timing
    tracemalloc.start()
    start = time.perf_counter()
    permanent_ryser(a)
    elapsed = time.perf_counter() - start
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    # the only allocation is the n-entry row-sum buffer plus interpreter noise
    mem_ok = peak <= 16 * n + 4096
    return CheckResult("", _status(elapsed <= limit and mem_ok),
                       f"n={n}: {elapsed:.3f}s (limit {limit}s), peak extra memory {peak} bytes",
                       {"seconds": elapsed, "peak_bytes": peak})


@_timed("determinism")
def check_determinism(n: int = 4, m: int = 16, epsilon: float = 0.01, trials: int = 40, seed: int = 15) -> CheckResult:
    cfg = ExperimentConfig(n=n, m=m, epsilon=epsilon, trials=trials, master_seed=seed, compute_kn=True)
    first = determinism_hash(run_trials(cfg))
    second = determinism_hash(run_trials(cfg))
    parallel = determinism_hash(run_trials(cfg.replace(workers=2)))
    ok = first == second == parallel
    return CheckResult("", _status(ok), f"serial {first[:12]}, repeat {second[:12]}, parallel {parallel[:12]}",
                       {"hash": first})


def verify_suite(cfg: ExperimentConfig, permanent_fn=None, quick: bool = False) -> list[CheckResult]:
    """All checks at desk scale. Checks driven by the configured epsilon skip when it is zero.

    ``quick`` shrinks sample counts for smoke runs; the thresholds stay the same.
    """
    eps = cfg.epsilon[0]
    s = 10 if quick else 1
    n, m = cfg.n, cfg.m
    k2 = min(10, m)
    checks = [
        lambda: check_permanent_oracle(count=100 // s, permanent_fn=permanent_fn),
        lambda: check_gurvits(samples=100_000 // s),
        lambda: check_fidelity(samples=100_000),
        lambda: check_reflectivity(unitaries=2000 // s),
        lambda: check_exit_moments(n=n, m=m, gate=(min(2, n), k2), networks=20_000 // s)
        if k2 > n else CheckResult("exit probability moments", SKIP, "needs m > n + 1"),
        check_mu_max,
        check_harmonic,
        check_f_minorant,
        check_p0_paths,
        lambda: check_x_tail(n=n, m=m, epsilon=eps, trials=1000 // s, seed=cfg.master_seed),
        lambda: check_sigma_tail(n=n, m=m, networks=1000 // s),
        lambda: check_gaussian_series(n=n, m=m, draws=1000 // s),
        lambda: check_mean_x(n=n, m=m, draws=4000 // s),
        lambda: check_bch(n=n, m=m, epsilon=eps if eps > 0 else 0.0, paired_trials=200 // s, slope_trials=50 // s),
        lambda: check_scaling(n=n, m=m, trials=500 // s, bound_instance=(10, 100, 0.003, 500 // s),
                              workers=cfg.workers)
        if eps > 0 else CheckResult("distance scaling in eps", SKIP, "epsilon = 0: no noise"),
        lambda: check_distance_identity(epsilon=eps, trials=50 // s),
        check_permanent_performance,
        lambda: check_determinism(n=n, m=m, epsilon=eps),
    ]
    return [c() for c in checks]


def suite_passed(results: list[CheckResult]) -> bool:
    return all(r.status != FAIL for r in results)
