"""A short SER sweep and a convergence trace.

Trial counts are kept small so this runs in a minute or so; the full
protocol uses 2000 trials per point (see the CLI).
"""
from softunbias import BaseParams, RecoveryVariant, run_convergence, run_sweep

params = BaseParams()
variants = list(RecoveryVariant)

sweep = run_sweep(variants, [12.0, 14.0, 16.0], trials_per_point=40, base_params=params, master_seed=1)
print("SER by SNR")
for v in variants:
    snr, ser = sweep.curve(v)
    print(f"{v.value:>6}: " + "  ".join(f"{s:.0f}dB {e:.2e}" for s, e in zip(snr, ser)))

conv = run_convergence(variants, 14.0, trials=40, base_params=params, master_seed=1)
print("\nmean SER after iterations 1, 5, 10, 50")
for v in variants:
    curve = conv.mean_ser[v]
    print(f"{v.value:>6}: " + "  ".join(f"{curve[i - 1]:.2e}" for i in (1, 5, 10, 50)))
