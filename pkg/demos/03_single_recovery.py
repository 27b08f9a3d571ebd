"""Recover one sparse ternary vector with each feedback variant."""
import numpy as np

from softunbias import BaseParams, RecoveryConfig, RecoveryVariant, gen_instance, recover
from softunbias.simkit import snr_to_noise_var

params = BaseParams()
snr_db = 15.0
inst = gen_instance(params.K, params.L, params.s, params.nonzero_alphabet,
                    snr_to_noise_var(snr_db), seed=7)
prior = params.prior()
print(f"K={params.K} L={params.L} s={params.s} at {snr_db} dB")

for variant in RecoveryVariant:
    cfg = RecoveryConfig(variant=variant, max_iterations=params.iterations)
    x_hat, trace = recover(inst.y, inst.A, inst.sigma_w2, prior, cfg, truth=inst.x_true)
    errs = int(np.count_nonzero(x_hat != inst.x_true))
    # trace.ser is per iteration; show where it started and ended
    print(f"{variant.value:>6}: {errs:3d} symbol errors, SER {trace.ser[0]:.4f} -> {trace.ser[-1]:.4f}")
