"""Seeded compressed-sensing instances and Monte Carlo SER campaigns.

Seeding: trial ``t`` of a campaign draws from
``numpy.random.Generator(PCG64(SeedSequence(master_seed, spawn_key=(t,))))``.
The key deliberately omits the SNR point, so every point of a sweep reuses
the same matrices, supports and normalized noise; only the noise scale
changes.  All variants of one trial see the identical instance.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .denoiser import DiscreteSparsePrior, GuardConfig
from .errors import InvalidArgumentError, NumericalFailureError, SingularUnbiasError
from .recovery import RecoveryConfig, RecoveryVariant, recover, symbol_errors

__all__ = [
    "CsInstance",
    "BaseParams",
    "SweepPoint",
    "SweepResult",
    "ConvergenceResult",
    "SEED_RULE",
    "snr_to_noise_var",
    "trial_rng",
    "gen_instance",
    "run_sweep",
    "run_convergence",
    "default_workers",
]

log = logging.getLogger(__name__)

SEED_RULE = "numpy.SeedSequence(master_seed, spawn_key=(trial,)) -> PCG64"
WORKERS_ENV = "SOFTUNBIAS_WORKERS"


@dataclass(frozen=True)
class CsInstance:
    A: np.ndarray
    x_true: np.ndarray
    w: np.ndarray
    y: np.ndarray
    sigma_w2: float


@dataclass(frozen=True)
class BaseParams:
    """Problem dimensions; defaults are the L=258, K=129, s=15 ternary setup."""

    K: int = 129
    L: int = 258
    s: int = 15
    nonzero_alphabet: tuple[float, ...] = (-1.0, 1.0)
    iterations: int = 50

    def __post_init__(self):
        if not (0 < self.K <= self.L and 0 < self.s <= self.L):
            raise InvalidArgumentError(f"invalid dimensions K={self.K}, L={self.L}, s={self.s}")
        if self.iterations < 1:
            raise InvalidArgumentError("iterations must be positive")
        object.__setattr__(self, "nonzero_alphabet", tuple(float(c) for c in self.nonzero_alphabet))

    def prior(self) -> DiscreteSparsePrior:
        return DiscreteSparsePrior.from_sparsity(self.nonzero_alphabet, self.s, self.L)


def snr_to_noise_var(snr_db: float) -> float:
    """Measurement-noise variance for 10 log10(1 / sigma_w2) = snr_db."""
    return float(10.0 ** (-snr_db / 10.0))


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(trial,))))


def _draw(rng, K, L, s, nonzero_alphabet, sigma_w2):
    A = rng.standard_normal((K, L))
    A /= np.linalg.norm(A, axis=0)
    support = rng.choice(L, size=s, replace=False)
    x = np.zeros(L)
    x[support] = rng.choice(np.asarray(nonzero_alphabet, dtype=float), size=s)
    w = np.sqrt(sigma_w2) * rng.standard_normal(K)
    return CsInstance(A, x, w, A @ x + w, float(sigma_w2))


def gen_instance(K: int, L: int, s: int, nonzero_alphabet, sigma_w2: float, seed) -> CsInstance:
    """Draw A (unit-norm Gaussian columns), an s-sparse x and Gaussian noise.

    ``seed`` is anything accepted by ``numpy.random.default_rng`` or a
    ``Generator``.
    """
    if not (0 < s <= L and 0 < K <= L):
        raise InvalidArgumentError(f"invalid dimensions K={K}, L={L}, s={s}")
    if not sigma_w2 >= 0:
        raise InvalidArgumentError("sigma_w2 must be nonnegative")
    if len(nonzero_alphabet) == 0 or 0 in nonzero_alphabet:
        raise InvalidArgumentError("nonzero_alphabet must be nonempty and exclude 0")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return _draw(rng, K, L, s, nonzero_alphabet, sigma_w2)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return 1


@dataclass
class SweepPoint:
    variant: RecoveryVariant
    snr_db: float
    trials: int
    symbol_errors: int
    ser: float
    failures: int = 0


@dataclass
class SweepResult:
    points: list[SweepPoint]
    params: BaseParams
    master_seed: int
    seed_rule: str = SEED_RULE
    # per_trial_errors[(variant, snr_db)][t] is None for a failed trial
    per_trial_errors: dict = field(default_factory=dict, repr=False)

    @property
    def failures(self) -> int:
        return sum(p.failures for p in self.points)

    def ser(self, variant, snr_db) -> float:
        variant = RecoveryVariant.parse(variant)
        for p in self.points:
            if p.variant is variant and p.snr_db == snr_db:
                return p.ser
        raise KeyError((variant, snr_db))

    def curve(self, variant) -> tuple[np.ndarray, np.ndarray]:
        variant = RecoveryVariant.parse(variant)
        pts = [p for p in self.points if p.variant is variant]
        return np.array([p.snr_db for p in pts]), np.array([p.ser for p in pts])


@dataclass
class ConvergenceResult:
    """Mean SER after each iteration, per variant."""

    snr_db: float
    trials: dict
    mean_ser: dict
    params: BaseParams
    master_seed: int
    seed_rule: str = SEED_RULE
    failures: dict = field(default_factory=dict)


def _run_trial(args):
    """Work unit: one trial index, every SNR point and every variant."""
    trial, master_seed, params, variants, snr_grid, guard, want_trace = args
    prior = params.prior()
    out = {}
    for snr_db in snr_grid:
        rng = trial_rng(master_seed, trial)
        inst = _draw(rng, params.K, params.L, params.s, params.nonzero_alphabet,
                     snr_to_noise_var(snr_db))
        for variant in variants:
            cfg = RecoveryConfig(variant=variant, max_iterations=params.iterations, guard=guard)
            try:
                x_hat, trace = recover(inst.y, inst.A, inst.sigma_w2, prior, cfg,
                                       truth=inst.x_true if want_trace else None)
            except (NumericalFailureError, SingularUnbiasError) as exc:
                log.warning("trial %d variant %s at %s dB failed: %s", trial, variant.value, snr_db, exc)
                out[(variant, snr_db)] = None
                continue
            if want_trace:
                out[(variant, snr_db)] = list(trace.errors)
            else:
                out[(variant, snr_db)] = symbol_errors(x_hat, inst.x_true)
    return out


def _execute(jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [_run_trial(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, so reduction order is trial order
        return list(pool.map(_run_trial, jobs, chunksize=max(1, len(jobs) // (8 * workers))))


def run_sweep(variants, snr_grid_db, trials_per_point: int, base_params: BaseParams = BaseParams(),
              master_seed: int = 0, workers: int | None = None,
              guard: GuardConfig = GuardConfig()) -> SweepResult:
    """SER versus SNR for each variant on paired, seeded instances."""
    variants = [RecoveryVariant.parse(v) for v in variants]
    snr_grid_db = [float(s) for s in snr_grid_db]
    if trials_per_point < 1:
        raise InvalidArgumentError("trials_per_point must be at least 1")
    if not variants or not snr_grid_db:
        return SweepResult([], base_params, master_seed)
    workers = default_workers() if workers is None else workers
    jobs = [(t, master_seed, base_params, variants, snr_grid_db, guard, False)
            for t in range(trials_per_point)]
    results = _execute(jobs, workers)

    points = []
    per_trial = {}
    for snr_db in snr_grid_db:
        for variant in variants:
            errs = [r[(variant, snr_db)] for r in results]
            per_trial[(variant, snr_db)] = errs
            ok = [e for e in errs if e is not None]
            n_err = int(sum(ok))
            ser = n_err / (len(ok) * base_params.L) if ok else float("nan")
            points.append(SweepPoint(variant, snr_db, len(ok), n_err, ser, len(errs) - len(ok)))
    return SweepResult(points, base_params, master_seed, per_trial_errors=per_trial)


def run_convergence(variants, snr_db: float, trials: int, base_params: BaseParams = BaseParams(),
                    master_seed: int = 0, workers: int | None = None,
                    guard: GuardConfig = GuardConfig()) -> ConvergenceResult:
    """Mean SER after every iteration at one SNR, per variant."""
    variants = [RecoveryVariant.parse(v) for v in variants]
    snr_db = float(snr_db)
    if trials < 1:
        raise InvalidArgumentError("trials must be at least 1")
    workers = default_workers() if workers is None else workers
    jobs = [(t, master_seed, base_params, variants, [snr_db], guard, True) for t in range(trials)]
    results = _execute(jobs, workers) if variants else []

    counts, mean_ser, failures = {}, {}, {}
    n_iter = base_params.iterations
    for variant in variants:
        traces = [r[(variant, snr_db)] for r in results]
        ok = [tr for tr in traces if tr is not None]
        failures[variant] = len(traces) - len(ok)
        counts[variant] = len(ok)
        totals = np.zeros(n_iter, dtype=np.int64)
        for tr in ok:
            totals += np.asarray(tr, dtype=np.int64)
        denom = len(ok) * base_params.L
        mean_ser[variant] = totals / denom if denom else np.full(n_iter, np.nan)
    return ConvergenceResult(snr_db, counts, mean_ser, base_params, master_seed, failures=failures)
