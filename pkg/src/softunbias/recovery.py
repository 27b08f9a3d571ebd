"""Iterative recovery of discrete sparse vectors by alternating linear and
nonlinear MMSE estimation (IMS and its bias-compensated variants)."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import denoiser
from .denoiser import DiscreteSparsePrior, GuardConfig, SoftEstimate
from .errors import InvalidArgumentError
from .lmmse import lmmse_unbiased

__all__ = [
    "RecoveryVariant",
    "RecoveryConfig",
    "IterationTrace",
    "recover",
    "quantize",
    "symbol_errors",
]


class RecoveryVariant(str, enum.Enum):
    """Which soft-feedback step closes each iteration."""

    IMS = "ims"        # biased feedback passed through
    XU_IMS = "xuims"   # individual signal-based unbiasing
    NU_IMS = "nuims"   # individual noise-based unbiasing
    TMS = "tms"        # noise-based unbiasing with vector-averaged variances

    @classmethod
    def parse(cls, name) -> RecoveryVariant:
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            valid = ",".join(v.value for v in cls)
            raise InvalidArgumentError(f"unknown variant {name!r}; expected one of {valid}") from None


@dataclass(frozen=True)
class RecoveryConfig:
    variant: RecoveryVariant = RecoveryVariant.NU_IMS
    max_iterations: int = 50
    early_stop_tol: float | None = None
    guard: GuardConfig = field(default_factory=GuardConfig)
    # "sigma_x2" (default) or "sparsity" (the literal s/L constant)
    init_variance: str = "sigma_x2"
    # XU_IMS only: what to feed back for elements whose biased variance hits
    # the ceiling.  "prior" resets them to (0, sigma_x2); "clamp" keeps the
    # clamped compensation, which amplifies those soft values ~1e6-fold.
    signal_fallback: str = "prior"

    def __post_init__(self):
        object.__setattr__(self, "variant", RecoveryVariant.parse(self.variant))
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be a positive integer")
        if self.early_stop_tol is not None and not self.early_stop_tol >= 0:
            raise InvalidArgumentError("early_stop_tol must be nonnegative")
        if self.init_variance not in ("sigma_x2", "sparsity"):
            raise InvalidArgumentError("init_variance must be 'sigma_x2' or 'sparsity'")
        if self.signal_fallback not in ("prior", "clamp"):
            raise InvalidArgumentError("signal_fallback must be 'prior' or 'clamp'")


@dataclass
class IterationTrace:
    """Per-iteration diagnostics of one recovery run.

    ``errors[i]`` is the number of wrong symbols after quantizing the biased
    feedback of iteration ``i + 1`` (None when no truth was supplied).
    """

    iterations: list[int] = field(default_factory=list)
    errors: list[int | None] = field(default_factory=list)
    ser: list[float | None] = field(default_factory=list)
    mean_variance: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.iterations)


def quantize(values, alphabet) -> np.ndarray:
    """Map every value to the nearest alphabet symbol.

    Ties go to the symbol of smaller magnitude, then to the smaller symbol.
    """
    c = np.asarray(sorted(float(a) for a in alphabet))
    if c.size == 0:
        raise InvalidArgumentError("alphabet must be nonempty")
    v = np.asarray(values, dtype=float)
    dist = np.abs(v[..., None] - c)
    # lexicographic: distance, then |c|, then c
    order = np.lexsort((c, np.abs(c)))
    best = order[np.argmin(dist[..., order], axis=-1)]
    return c[best]


def symbol_errors(x_hat, x_true) -> int:
    return int(np.count_nonzero(np.asarray(x_hat) != np.asarray(x_true)))


def _feedback(cfg: RecoveryConfig, x_lin, var_lin, nl: SoftEstimate, prior):
    """Turn the biased soft feedback into the next linear-stage prior."""
    variant, guard = cfg.variant, cfg.guard
    if variant is RecoveryVariant.IMS:
        return np.asarray(nl.value), np.asarray(nl.variance)
    if variant is RecoveryVariant.XU_IMS:
        sigma_x2 = prior.sigma_x2
        out = denoiser.unbias_signal(nl, sigma_x2, guard)
        if cfg.signal_fallback == "clamp" or not guard.clamping_enabled:
            return out.value, out.variance
        hit = np.asarray(nl.variance) >= guard.var_ceiling_ratio * sigma_x2
        return np.where(hit, 0.0, out.value), np.where(hit, sigma_x2, out.variance)
    if variant is RecoveryVariant.NU_IMS:
        out = denoiser.unbias_noise(nl, x_lin, var_lin, guard)
        return out.value, out.variance
    avg_var_b = max(float(np.mean(nl.variance)), guard.var_floor)
    values, var = denoiser.unbias_noise_avg(nl.value, x_lin, avg_var_b, float(np.mean(var_lin)), guard)
    return values, np.full_like(values, var)


def recover(y, A, sigma_w2: float, prior: DiscreteSparsePrior,
            cfg: RecoveryConfig = RecoveryConfig(), truth=None) -> tuple[np.ndarray, IterationTrace]:
    """Estimate x from y = A x + w; returns the quantized estimate and a trace.

    Every iteration runs the unbiased linear stage with the current feedback
    as prior, computes the biased soft feedback element by element, and
    applies the configured variant's compensation.  TMS additionally replaces
    the linear-stage variances by their mean before the denoiser.  The final
    estimate quantizes the last biased soft values.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2 or y.shape != (A.shape[0],):
        raise InvalidArgumentError(f"dimension mismatch: A {A.shape}, y {y.shape}")
    L = A.shape[1]
    if truth is not None:
        truth = np.asarray(truth, dtype=float)
        if truth.shape != (L,):
            raise InvalidArgumentError(f"truth must have shape ({L},)")
    variant = cfg.variant
    guard = cfg.guard
    init_var = prior.sigma_x2 if cfg.init_variance == "sigma_x2" else prior.active_probability

    x_fb = np.zeros(L)
    var_fb = np.full(L, init_var)
    trace = IterationTrace()
    x_nb = x_fb
    for it in range(1, cfg.max_iterations + 1):
        lin = lmmse_unbiased(A, y, sigma_w2, x_fb, var_fb, guard)
        var_lin = lin.variances
        if variant is RecoveryVariant.TMS:
            var_lin = np.full(L, float(np.mean(var_lin)))
        nl = denoiser.posterior_moments(lin.values, var_lin, prior)
        x_nb = np.asarray(nl.value)
        x_next, var_next = _feedback(cfg, lin.values, var_lin, nl, prior)

        trace.iterations.append(it)
        trace.mean_variance.append(float(np.mean(nl.variance)))
        if truth is None:
            trace.errors.append(None)
            trace.ser.append(None)
        else:
            n_err = symbol_errors(quantize(x_nb, prior.alphabet), truth)
            trace.errors.append(n_err)
            trace.ser.append(n_err / L)

        stop = False
        if cfg.early_stop_tol is not None:
            change = np.linalg.norm(x_next - x_fb)
            stop = change <= cfg.early_stop_tol * max(np.linalg.norm(x_fb), np.finfo(float).tiny)
        x_fb = np.asarray(x_next, dtype=float)
        var_fb = np.maximum(np.asarray(var_next, dtype=float), guard.var_floor)
        if stop:
            break
    return quantize(x_nb, prior.alphabet), trace
