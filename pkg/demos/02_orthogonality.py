"""Monte Carlo look at which quantities the estimation errors are uncorrelated with.

The biased error is orthogonal to the observation, the signal-unbiased error
to the signal and the noise-unbiased error to the noise.
"""
import numpy as np

from softunbias import DiscreteSparsePrior, average_mse, posterior_moments, unbias_noise, unbias_signal

prior = DiscreteSparsePrior.from_sparsity((-1.0, 1.0), s=15, L=258)
s2 = 0.05
n_draws = 500_000

rng = np.random.default_rng(0)
x = rng.choice(np.asarray(prior.alphabet), size=n_draws, p=np.asarray(prior.probabilities))
n = np.sqrt(s2) * rng.standard_normal(n_draws)
z = x + n

est = posterior_moments(z, s2, prior)
mse = average_mse(prior, s2)
errors = {
    "biased": est.value - x,
    "signal": unbias_signal(est, prior.sigma_x2, mse=mse).value - x,
    "noise": unbias_noise(est, z, s2, mse=mse).value - x,
}

print(f"{'error':>8} {'E[Z e]':>12} {'E[X e]':>12} {'E[N e]':>12}")
for name, e in errors.items():
    print(f"{name:>8} " + " ".join(f"{np.mean(v * e):12.2e}" for v in (z, x, n)))

# the biased estimator shrinks: E[X x_B] / var(X) equals 1 - MSE / var(X)
print("\nlinear gain", np.mean(x * est.value) / prior.sigma_x2, "vs", 1 - mse / prior.sigma_x2)
