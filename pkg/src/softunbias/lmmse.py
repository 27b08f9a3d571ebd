"""Unbiased vector LMMSE estimation for y = A x + w with a diagonal prior."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .denoiser import DEFAULT_GUARD, GuardConfig
from .errors import InvalidArgumentError, NumericalFailureError

__all__ = ["LinearStageOutput", "lmmse_unbiased", "GAIN_CLIP"]

# biased gains are kept inside (GAIN_CLIP, 1 - GAIN_CLIP)
GAIN_CLIP = 1e-9


@dataclass(frozen=True)
class LinearStageOutput:
    """Per-element unbiased estimates, their error variances and biased gains."""

    values: np.ndarray
    variances: np.ndarray
    gains: np.ndarray


def lmmse_unbiased(A, y, sigma_w2: float, prior_mean, prior_var,
                   guard: GuardConfig = DEFAULT_GUARD) -> LinearStageOutput:
    """Linear MMSE estimate of x, bias-compensated element by element.

    Works with the K x K matrix ``B = A diag(prior_var) A^T + sigma_w2 I``.
    The biased estimate is ``m + Phi A^T B^-1 (y - A m)``; its gain on
    element l is ``k_l = phi_l a_l^T B^-1 a_l``.  Dividing the innovation by
    ``k_l`` yields the unbiased value, whose error variance is
    ``phi_l (1 - k_l) / k_l``.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    m = np.asarray(prior_mean, dtype=float)
    phi = np.asarray(prior_var, dtype=float)
    if A.ndim != 2:
        raise InvalidArgumentError("A must be a matrix")
    K, L = A.shape
    if y.shape != (K,):
        raise InvalidArgumentError(f"y must have shape ({K},), got {y.shape}")
    phi = np.broadcast_to(phi, (L,)) if phi.ndim == 0 else phi
    if m.shape != (L,) or phi.shape != (L,):
        raise InvalidArgumentError(f"prior_mean and prior_var must have shape ({L},)")
    if not sigma_w2 > 0:
        raise InvalidArgumentError(f"sigma_w2 must be positive, got {sigma_w2}")
    if not (np.all(np.isfinite(phi)) and np.all(phi > 0)):
        raise InvalidArgumentError("prior_var must be finite and positive")

    scaled = A * np.sqrt(phi)
    B = scaled @ scaled.T
    B[np.diag_indices(K)] += sigma_w2
    try:
        chol = linalg.cholesky(B, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailureError(f"measurement covariance is not positive definite: {exc}") from exc
    # with B = C C^T and V = C^-1 A, a_l^T B^-1 a_l is the squared norm of column l of V
    V = linalg.solve_triangular(chol, A, lower=True, check_finite=False)
    r = linalg.solve_triangular(chol, y - A @ m, lower=True, check_finite=False)
    gains = np.clip(phi * np.einsum("kl,kl->l", V, V), GAIN_CLIP, 1.0 - GAIN_CLIP)
    innovation = phi * (V.T @ r)
    values = m + innovation / gains
    variances = np.maximum(phi * (1.0 - gains) / gains, guard.var_floor)
    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(variances))):
        raise NumericalFailureError("linear stage produced non-finite output")
    return LinearStageOutput(values, variances, gains)
