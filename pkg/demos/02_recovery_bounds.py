"""Randomized checks of the local-recovery error bounds.

For random distributions, tripartitions and channels we evaluate both sides of

* ``2 TV^2 <= KL(P || P_hat) <= I(A:C|B)`` (Pinsker plus the recovery bound),
* ``KL(P || P_hat) <= I(A:C|B)_before - I(A:C|B)_after``,
* ``TV(P0, P0_hat) <= sum of per-channel recovery errors`` across many steps,

exactly, by enumeration.  Run ``localdenoise fawzi-check`` for the full-size sweep.
"""
# %%
import numpy as np

from localdenoise.checks import discrete_recovery_checks, gaussian_recovery_checks, telescoping_checks

# %%
disc = discrete_recovery_checks(300, seed=1)
gaus = gaussian_recovery_checks(200, seed=1)
tele = telescoping_checks(20, seed=1)

for name, checks in [("discrete", disc), ("gaussian", gaus)]:
    slack = np.array([c.cmi_before - c.kl for c in checks])
    bad = sum(not (c.chain_ok and c.difference_ok) for c in checks)
    print(f"{name:9s} {len(checks)} instances, {bad} violations, median CMI - KL slack {np.median(slack):.3g} nats")

# %% How tight is the telescoping bound?
ratio = np.array([c.total_tv / c.bound for c in tele if c.bound > 0])
print(f"telescoping: {sum(not c.ok for c in tele)} violations; total TV / bound ranges {ratio.min():.2g}..{ratio.max():.2g}")
