"""Undoing a noise channel exactly, and locally.

A noise channel acting on a few bits can be inverted exactly with Bayes'
rule, provided the recovery map knows the distribution that entered the
channel.  A *local* recovery map only reads a patch around the noisy bits;
its error is controlled by how much the rest of the system still knows
about those bits once the patch is given (a conditional mutual information).
"""
# %%
import numpy as np

from localdenoise import FiniteDist, Tripartition, cmi, kl, tv
from localdenoise.discrete import LocalChannel, bayes_channel, local_bayes_channel, random_stochastic

rng = np.random.default_rng(0)

# %% A 5-bit Markov chain: each bit copies its left neighbour with probability 0.9.
K = 5
probs = np.empty(2**K)
for x in range(2**K):
    bits = [(x >> i) & 1 for i in range(K)]
    probs[x] = 0.5 * np.prod([0.9 if a == b else 0.1 for a, b in zip(bits, bits[1:])])
P = FiniteDist(K, probs)

# %% Scramble the middle bit with a random stochastic matrix.
noise = LocalChannel((2,), random_stochastic(rng, 2))
Y = noise(P)
print(f"damage done by the channel:      TV = {tv(Y, P):.4f}")

# %% Global Bayes recovery reads every bit and is exact.
print(f"global Bayes recovery:           TV = {tv(bayes_channel(noise, P)(Y), P):.2e}")

# %% Local recovery with buffers of growing size.
# Bits 1 and 3 screen bit 2 from the rest of a Markov chain, so a buffer of
# width one already recovers exactly.
for buffer in [(), (1,), (1, 3)]:
    rest = tuple(s for s in range(K) if s != 2 and s not in buffer)
    part = Tripartition((2,), buffer, rest, r=len(buffer))
    P_hat = local_bayes_channel(noise, P, buffer)(Y)
    print(
        f"buffer {str(buffer):7s}  KL(P || P_hat) = {kl(P, P_hat):.2e}"
        f"  <=  I(A:C|B) = {cmi(P, part):.2e}"
    )
