"""Scalar soft feedback for discrete sparse priors and its bias compensation.

The observation model is ``z = x + n`` with ``x`` drawn from a finite,
zero-mean alphabet and ``n ~ N(0, sigma_n2)``.  The conditional mean
``E{X | z}`` (the *biased* soft value) is shrunk toward the prior mean; the
functions here undo that shrinkage either by rescaling the soft value
(signal-based) or by re-estimating and rescaling the noise (noise-based).

Each unbiasing function comes in two flavours:

* individual: the compensation factor is formed from the pointwise
  conditional variance ``var{X | z}`` of each element.  This is what the
  iterative recovery algorithms use.
* average-MSE: pass ``mse=`` (the error variance averaged over Z, see
  :func:`average_mse`) and the factor becomes a constant; the pointwise
  variance only enters the reported error variance.  In this form the
  unbiased error is exactly orthogonal to X (signal-based) or to N
  (noise-based).

All functions broadcast over numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import integrate

from .errors import InvalidArgumentError, SingularUnbiasError

__all__ = [
    "GuardConfig",
    "DiscreteSparsePrior",
    "SoftEstimate",
    "CharacteristicCurve",
    "posterior_moments",
    "average_mse",
    "unbias_signal",
    "unbias_noise",
    "unbias_signal_avg",
    "unbias_noise_avg",
    "characteristic_curve",
    "CURVE_MODES",
]

CURVE_MODES = ("biased", "signal_unbiased", "noise_unbiased")

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class GuardConfig:
    """Numerical guards applied before forming a compensation factor.

    ``var_floor`` bounds every variance from below.  The biased variance is
    clamped to at most ``var_ceiling_ratio`` times the reference variance,
    which keeps the factor finite and of the correct sign.
    """

    var_floor: float = 1e-12
    var_ceiling_ratio: float = 1.0 - 1e-6
    clamping_enabled: bool = True

    def __post_init__(self):
        if not self.var_floor > 0:
            raise InvalidArgumentError(f"var_floor must be positive, got {self.var_floor}")
        if not 0 < self.var_ceiling_ratio < 1:
            raise InvalidArgumentError(
                f"var_ceiling_ratio must lie in (0, 1), got {self.var_ceiling_ratio}"
            )


DEFAULT_GUARD = GuardConfig()


@dataclass(frozen=True)
class DiscreteSparsePrior:
    """Distribution of one signal element over a finite alphabet containing 0."""

    alphabet: tuple[float, ...]
    probabilities: tuple[float, ...]
    _alphabet_arr: np.ndarray = field(init=False, repr=False, compare=False)
    _log_prob: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        alphabet = np.asarray(self.alphabet, dtype=float)
        probs = np.asarray(self.probabilities, dtype=float)
        if alphabet.ndim != 1 or alphabet.shape != probs.shape or alphabet.size == 0:
            raise InvalidArgumentError("alphabet and probabilities must be 1-d and of equal length")
        if not (np.all(np.isfinite(alphabet)) and np.all(np.isfinite(probs))):
            raise InvalidArgumentError("alphabet and probabilities must be finite")
        if np.any(np.diff(alphabet) <= 0):
            raise InvalidArgumentError("alphabet must be strictly increasing")
        if np.count_nonzero(alphabet == 0.0) != 1:
            raise InvalidArgumentError("alphabet must contain 0 exactly once")
        if np.any(probs < 0) or np.any(probs > 1):
            raise InvalidArgumentError("probabilities must lie in [0, 1]")
        if abs(probs.sum() - 1.0) > _SUM_TOL:
            raise InvalidArgumentError(f"probabilities sum to {probs.sum()!r}, not 1")
        if abs(alphabet @ probs) > _SUM_TOL:
            raise InvalidArgumentError("only zero-mean priors are supported")
        # zero mean is not enough: the alphabet and its weights must mirror
        if not (np.allclose(alphabet, -alphabet[::-1], rtol=0, atol=_SUM_TOL)
                and np.allclose(probs, probs[::-1], rtol=0, atol=_SUM_TOL)):
            raise InvalidArgumentError("only symmetric priors are supported")
        if not (alphabet**2) @ probs > 0:
            raise InvalidArgumentError("prior variance must be positive")
        object.__setattr__(self, "alphabet", tuple(float(a) for a in alphabet))
        object.__setattr__(self, "probabilities", tuple(float(p) for p in probs))
        alphabet.setflags(write=False)
        with np.errstate(divide="ignore"):
            log_prob = np.log(probs)
        log_prob.setflags(write=False)
        object.__setattr__(self, "_alphabet_arr", alphabet)
        object.__setattr__(self, "_log_prob", log_prob)

    @classmethod
    def from_sparsity(cls, nonzero_alphabet, s: int, L: int) -> DiscreteSparsePrior:
        """Prior with ``s`` of ``L`` elements active, uniform over ``nonzero_alphabet``."""
        nonzero = sorted(float(c) for c in nonzero_alphabet)
        if not nonzero or 0.0 in nonzero:
            raise InvalidArgumentError("nonzero_alphabet must be nonempty and exclude 0")
        if not 0 < s <= L:
            raise InvalidArgumentError(f"need 0 < s <= L, got s={s}, L={L}")
        p_active = s / L
        each = p_active / len(nonzero)
        alphabet = sorted(nonzero + [0.0])
        probs = [1.0 - p_active if c == 0.0 else each for c in alphabet]
        # make the sum exact so validation never trips on rounding
        zero_idx = alphabet.index(0.0)
        probs[zero_idx] = 1.0 - (sum(probs) - probs[zero_idx])
        return cls(tuple(alphabet), tuple(probs))

    @classmethod
    def ternary(cls, p1: float) -> DiscreteSparsePrior:
        """The {-1, 0, +1} prior with ``P(+1) = P(-1) = p1``."""
        if not 0 < p1 <= 0.5:
            raise InvalidArgumentError(f"p1 must lie in (0, 0.5], got {p1}")
        return cls((-1.0, 0.0, 1.0), (p1, 1.0 - 2 * p1, p1))

    @property
    def alphabet_array(self) -> np.ndarray:
        return self._alphabet_arr

    @property
    def sigma_x2(self) -> float:
        """Prior variance (the prior mean is zero)."""
        return float((self._alphabet_arr**2) @ np.asarray(self.probabilities))

    @property
    def active_probability(self) -> float:
        """Probability mass off zero, i.e. the sparsity ratio s/L."""
        return 1.0 - self.probabilities[self.alphabet.index(0.0)]


@dataclass(frozen=True)
class SoftEstimate:
    """An estimate together with its error variance (scalars or arrays)."""

    value: float | np.ndarray
    variance: float | np.ndarray

    def __post_init__(self):
        value = np.asarray(self.value)
        variance = np.asarray(self.variance)
        if not np.all(np.isfinite(value)):
            raise InvalidArgumentError("soft value must be finite")
        if not (np.all(np.isfinite(variance)) and np.all(variance >= 0)):
            raise InvalidArgumentError("error variance must be finite and nonnegative")


@dataclass(frozen=True)
class CharacteristicCurve:
    """Tabulated map z -> (soft value, error variance) of one denoiser mode."""

    mode: str
    sigma_n2: float
    z: np.ndarray
    value: np.ndarray
    variance: np.ndarray

    def rows(self):
        for z, v, e in zip(self.z, self.value, self.variance):
            yield float(z), float(v), float(e)


def _check_positive(name, x):
    arr = np.asarray(x, dtype=float)
    if not (np.all(np.isfinite(arr)) and np.all(arr > 0)):
        raise InvalidArgumentError(f"{name} must be finite and positive")
    return arr


def posterior_moments(z, sigma_n2, prior: DiscreteSparsePrior) -> SoftEstimate:
    """Conditional mean and variance of X given ``z = x + n``.

    ``z`` and ``sigma_n2`` broadcast against each other.  Weights are
    evaluated in the log domain with the maximum subtracted, so the largest
    weight is exactly 1 and nothing underflows to an all-zero row.
    """
    z = np.asarray(z, dtype=float)
    if np.any(np.isnan(z)) or np.any(np.isinf(z)):
        raise InvalidArgumentError("observation must be finite")
    sigma_n2 = _check_positive("sigma_n2", sigma_n2)
    c = prior.alphabet_array
    log_w = prior._log_prob - (z[..., None] - c) ** 2 / (2.0 * sigma_n2[..., None])
    log_w -= log_w.max(axis=-1, keepdims=True)
    w = np.exp(log_w)
    w /= w.sum(axis=-1, keepdims=True)
    mean = w @ c
    var = np.sum(w * (c - mean[..., None]) ** 2, axis=-1)
    # round-off can push the mean a hair outside the alphabet's hull
    mean = np.clip(mean, c[0], c[-1])
    if mean.ndim == 0:
        return SoftEstimate(float(mean), float(var))
    return SoftEstimate(mean, var)


def average_mse(prior: DiscreteSparsePrior, sigma_n2: float) -> float:
    """Error variance of the conditional mean averaged over Z.

    Integrates the pointwise conditional variance against the density of Z,
    one Gaussian component per alphabet symbol.  Breakpoints are placed at
    the posterior decision boundaries, where the integrand peaks.
    """
    sigma_n2 = float(_check_positive("sigma_n2", sigma_n2))
    sigma = np.sqrt(sigma_n2)
    c = prior.alphabet_array
    probs = np.asarray(prior.probabilities)
    boundaries = []
    for i in range(len(c) - 1):
        if probs[i] > 0 and probs[i + 1] > 0:
            boundaries.append(
                0.5 * (c[i] + c[i + 1])
                + sigma_n2 * np.log(probs[i] / probs[i + 1]) / (c[i + 1] - c[i])
            )
    span = 12.0
    total = 0.0
    for ci, pi in zip(c, probs):
        if pi == 0:
            continue
        pts = [(b - ci) / sigma for b in boundaries]
        pts = [t for t in pts if -span < t < span]

        def integrand(t, ci=ci):
            return posterior_moments(ci + sigma * t, sigma_n2, prior).variance * np.exp(-0.5 * t * t)

        val, _ = integrate.quad(integrand, -span, span, points=pts or None, limit=400,
                                epsabs=1e-15, epsrel=1e-11)
        total += pi * val / np.sqrt(2.0 * np.pi)
    return total


def _clamp(var, reference, guard: GuardConfig):
    """Clamp a biased variance below ``reference`` or raise if that is off."""
    var = np.asarray(var, dtype=float)
    if guard.clamping_enabled:
        return np.clip(var, guard.var_floor, guard.var_ceiling_ratio * reference)
    if np.any(var >= reference):
        raise SingularUnbiasError(
            "biased error variance reaches the reference variance; "
            "the compensation factor is singular"
        )
    return var


def _pack(value, variance) -> SoftEstimate:
    value = np.asarray(value)
    variance = np.asarray(variance)
    if value.ndim == 0 and variance.ndim == 0:
        return SoftEstimate(float(value), float(variance))
    return SoftEstimate(value, variance)


def unbias_signal(est: SoftEstimate, sigma_x2: float, guard: GuardConfig = DEFAULT_GUARD,
                  mse: float | None = None) -> SoftEstimate:
    """Signal-based bias compensation: rescale the soft value.

    With ``C = v / (v - sigma_x2)`` the unbiased value is ``(1 - C) * x_B``
    and its error variance is ``(1 - C**2) * var + C**2 * sigma_x2``.  ``v``
    is the (clamped) pointwise variance, or ``mse`` when given.
    """
    sigma_x2 = float(_check_positive("sigma_x2", sigma_x2))
    x_b = np.asarray(est.value, dtype=float)
    if mse is None:
        var = _clamp(est.variance, sigma_x2, guard)
        c_x = var / (var - sigma_x2)
        # (1 - C^2) var + C^2 sigma_x2 simplifies to (1 - C) var
        return _pack((1.0 - c_x) * x_b, (1.0 - c_x) * var)
    ref = _clamp(mse, sigma_x2, guard)
    c_x = ref / (ref - sigma_x2)
    var = np.asarray(est.variance, dtype=float)
    return _pack((1.0 - c_x) * x_b, (1.0 - c_x**2) * var + c_x**2 * sigma_x2)


def unbias_noise(est: SoftEstimate, z, sigma_n2, guard: GuardConfig = DEFAULT_GUARD,
                 mse: float | None = None) -> SoftEstimate:
    """Noise-based bias compensation: unbias the implied noise estimate z - x_B.

    With ``C = v / (v - sigma_n2)`` the unbiased value is
    ``(1 - C) * x_B + C * z`` and its error variance is
    ``(1 - C**2) * var + C**2 * sigma_n2``.
    """
    sigma_n2 = _check_positive("sigma_n2", sigma_n2)
    z = np.asarray(z, dtype=float)
    x_b = np.asarray(est.value, dtype=float)
    if mse is None:
        var = _clamp(est.variance, sigma_n2, guard)
        c_n = var / (var - sigma_n2)
        return _pack((1.0 - c_n) * x_b + c_n * z, (1.0 - c_n) * var)
    ref = _clamp(mse, sigma_n2, guard)
    c_n = ref / (ref - sigma_n2)
    var = np.asarray(est.variance, dtype=float)
    return _pack((1.0 - c_n) * x_b + c_n * z, (1.0 - c_n**2) * var + c_n**2 * sigma_n2)


def unbias_signal_avg(values, avg_var_b: float, sigma_x2: float,
                      guard: GuardConfig = DEFAULT_GUARD) -> tuple[np.ndarray, float]:
    """Signal-based compensation of a vector sharing one average variance.

    Returns the unbiased values and their common error variance
    ``(1/avg_var_b - 1/sigma_x2)**-1``.
    """
    _check_positive("avg_var_b", avg_var_b)
    sigma_x2 = float(_check_positive("sigma_x2", sigma_x2))
    var_b = float(_clamp(avg_var_b, sigma_x2, guard))
    var_u = 1.0 / (1.0 / var_b - 1.0 / sigma_x2)
    return var_u * np.asarray(values, dtype=float) / var_b, var_u


def unbias_noise_avg(values, observations, avg_var_b: float, avg_sigma_n2: float,
                     guard: GuardConfig = DEFAULT_GUARD) -> tuple[np.ndarray, float]:
    """Noise-based compensation with average variances (the TMS/OAMP form)."""
    values = np.asarray(values, dtype=float)
    observations = np.asarray(observations, dtype=float)
    if values.shape != observations.shape:
        raise InvalidArgumentError("values and observations must have the same shape")
    _check_positive("avg_var_b", avg_var_b)
    sigma_n2 = float(_check_positive("avg_sigma_n2", avg_sigma_n2))
    var_b = float(_clamp(avg_var_b, sigma_n2, guard))
    var_u = 1.0 / (1.0 / var_b - 1.0 / sigma_n2)
    return var_u * (values / var_b - observations / sigma_n2), var_u


def characteristic_curve(
    prior: DiscreteSparsePrior,
    sigma_n2: float,
    z_grid,
    mode: str = "biased",
    guard: GuardConfig = DEFAULT_GUARD,
    variance_form: Literal["average", "individual"] = "average",
) -> CharacteristicCurve:
    """Soft value and error variance of one denoiser mode over a grid of z.

    ``variance_form="average"`` forms the compensation factor from the
    average MSE of the biased estimator, so the unbiased curve is a fixed
    affine map of the biased one.  ``"individual"`` uses the pointwise
    conditional variance instead, as the iterative algorithms do.
    """
    if mode not in CURVE_MODES:
        raise InvalidArgumentError(f"mode must be one of {CURVE_MODES}, got {mode!r}")
    if variance_form not in ("average", "individual"):
        raise InvalidArgumentError(f"unknown variance_form {variance_form!r}")
    z = np.asarray(z_grid, dtype=float).ravel()
    if not np.all(np.isfinite(z)) or np.any(np.diff(z) < 0):
        raise InvalidArgumentError("z_grid must be finite and sorted")
    sigma_n2 = float(_check_positive("sigma_n2", sigma_n2))
    est = posterior_moments(z, sigma_n2, prior)
    mse = average_mse(prior, sigma_n2) if variance_form == "average" else None
    if mode == "signal_unbiased":
        est = unbias_signal(est, prior.sigma_x2, guard, mse=mse)
    elif mode == "noise_unbiased":
        est = unbias_noise(est, z, sigma_n2, guard, mse=mse)
    return CharacteristicCurve(mode, sigma_n2, z, np.atleast_1d(est.value),
                               np.atleast_1d(est.variance))
