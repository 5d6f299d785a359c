"""Channel models and transmitter-side channel knowledge.

Walks through the two channel generators (flat steering-vector scenario and
the synthetic frequency-selective generator), the CSI error model, and the
adversary's second-order statistics.
"""

import numpy as np

from jamcom import (
    CsitModel,
    au_covariance_uniform_phase,
    csit_error_variance,
    draw_csit_samples,
    exponential_delay_profile,
    largest_eigenvalue,
    make_deterministic_scenario,
    steering_channel,
    synth_selective_channel,
)

theta = 4 * np.pi / 9   # second user's steering angle
beta = 2 * np.pi / 9    # adversary's steering angle

# A steering channel is a unit-modulus column, one phase step per antenna.
v = steering_channel(theta, 4)
print("steering vector:", np.round(v, 3))
print("norm^2 (should equal the antenna count):", abs(np.vdot(v, v)))

# The flat two-user scenario: user 1 all-ones, user 2 steered, one adversary.
chan = make_deterministic_scenario(theta, beta, n_t=4, N=32)
print("\nflat scenario shapes: h", chan.h.shape, " g", chan.g.shape)
print("response identical across subcarriers:",
      bool(np.all(chan.h[:, 0] == chan.h[:, 17])))

# The synthetic frequency-selective generator: tapped delay line with an
# exponential power profile, viewed in the frequency domain.
profile = exponential_delay_profile(rms_delay_spread=1.2e-6, n_taps=24)
sel = synth_selective_channel(profile, n_t=4, N=32, K=2, L=1,
                              subcarrier_spacing=60e3, seed=1)
gains = np.abs(sel.h[0, :, 0])
print("\nselective channel |h| across subcarriers (user 1, antenna 1):")
print(np.round(gains, 2))

# CSI at the transmitter degrades with less per-subcarrier power.
for snr_db in (5, 15, 25):
    P_t = 10 ** (snr_db / 10)
    print(f"snr {snr_db:2d} dB -> error variance "
          f"{csit_error_variance(P_t, 32, alpha=0.6):.4f}")

# Sampled realizations around the estimate feed the optimizer; the estimate
# itself is recovered exactly when the error variance is zero.
csit = CsitModel(h_hat=chan.h, sigma_ie2=0.3, alpha=0.6)
samples = draw_csit_samples(csit, M=4, seed=7)
print("\nsample deviation from the scaled estimate:",
      float(np.mean(np.abs(samples - np.sqrt(0.7) * chan.h[None]) ** 2)).__round__(3))

# Only the adversary's covariance (phase averaged over [0, 2*beta]) and its
# top eigenvalue are assumed known.
R = au_covariance_uniform_phase(2 * beta, 4)
print("\nadversary covariance (uniform phase average):")
print(np.round(R, 3))
print("largest eigenvalue:", round(largest_eigenvalue(R), 4))
