"""Characteristic curves of the scalar denoiser for a ternary prior.

Prints a coarse table of the biased soft value and the two unbiased
versions, at a noisy and a nearly clean operating point.
"""
import numpy as np

from softunbias import DiscreteSparsePrior, average_mse, characteristic_curve

prior = DiscreteSparsePrior.ternary(0.1)
print("alphabet", prior.alphabet, "probabilities", prior.probabilities)
print("signal variance", prior.sigma_x2)

z = np.linspace(-2, 2, 9)
for s2 in (0.1, 0.01):
    # the compensation factors come from the average MSE of the denoiser
    print(f"\nnoise variance {s2}, average MSE {average_mse(prior, s2):.4g}")
    curves = {m: characteristic_curve(prior, s2, z, m)
              for m in ("biased", "signal_unbiased", "noise_unbiased")}
    print(f"{'z':>6} {'biased':>10} {'signal':>10} {'noise':>10}")
    for i, zz in enumerate(z):
        row = [curves[m].value[i] for m in curves]
        print(f"{zz:6.2f} " + " ".join(f"{v:10.4f}" for v in row))

# the noise-unbiased curve dips back toward the observation between symbols
nu = characteristic_curve(prior, 0.1, np.linspace(-2, 2, 401), "noise_unbiased").value
print("\nnoise-unbiased curve decreases somewhere:", bool(np.any(np.diff(nu) < 0)))
