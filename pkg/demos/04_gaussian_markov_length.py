"""How wide must a local denoiser's window be?

A Gaussian Markov chain is noised towards pure noise in ``N`` steps; every
step is split into sub-steps of well-separated sites, and each site-channel
is undone with a local Bayes map that sees a buffer of width ``r``.  The
recovery error falls off exponentially in ``r``, at a rate set by the
Markov length of the intermediate noisy states.
"""
# %%
import numpy as np

from localdenoise import Lattice, required_radius
from localdenoise.gaussian import cmi_sweep, forward_step, gmrf_chain, markov_length_fit, multi_step_local_recovery, push

K, N = 16, 8
lat = Lattice(1, K, periodic=False)
P0 = gmrf_chain(K, 0.4)

# %% Recovery error versus buffer width.
rs = list(range(6))
kls = [multi_step_local_recovery(P0, lat, N, r).kl for r in rs]
for r, v in zip(rs, kls):
    print(f"r={r}  KL(P0 || P0_hat) = {v:.3e}")
print(f"full buffer: KL = {multi_step_local_recovery(P0, lat, N, K).kl:.1e}")

# %% Markov length of a half-noised state and the radius it prescribes.
mid = push(forward_step(0.0, 0.49, K), P0)
fit = markov_length_fit(range(7), cmi_sweep(mid, lat, K // 2, range(7)))
slope = np.polyfit(rs, np.log(kls), 1)[0]
print(f"xi = {fit.xi:.3f}; observed ln KL slope {slope:.2f} (CMI decay alone predicts {-1 / fit.xi:.2f})")
print(f"radius for total TV below 0.01: r >= {required_radius(fit.xi, N, K, 0.01, gamma=fit.gamma)}")
