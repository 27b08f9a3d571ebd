"""Bias-compensated soft feedback and iterative recovery for discrete compressed sensing."""
from .denoiser import (
    CharacteristicCurve,
    DiscreteSparsePrior,
    GuardConfig,
    SoftEstimate,
    average_mse,
    characteristic_curve,
    posterior_moments,
    unbias_noise,
    unbias_noise_avg,
    unbias_signal,
    unbias_signal_avg,
)
from .errors import InvalidArgumentError, NumericalFailureError, SingularUnbiasError
from .lmmse import LinearStageOutput, lmmse_unbiased
from .recovery import IterationTrace, RecoveryConfig, RecoveryVariant, quantize, recover
from .simkit import BaseParams, CsInstance, gen_instance, run_convergence, run_sweep

__version__ = "0.1.0"
