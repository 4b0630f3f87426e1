"""Splitting one noising step into non-interfering sub-steps.

Local recovery maps with buffer width ``r`` must not overlap, so a noising
step is reorganized into sub-steps whose regions are at least ``2r`` apart.
A stride tiling with ``ceil((2r + k) / k)`` colours per axis does this.
"""
# %%
import numpy as np

from localdenoise.lattice import Lattice, check_schedule, reorganize

lat = Lattice(2, 11, periodic=False)
sched = reorganize(lat, k=1, r=2)
print(f"L=11, d=2, k=1, r=2: {sched.M} sub-steps, problems: {check_schedule(lat, sched) or 'none'}")

# %% Show which sub-step each site belongs to.
label = np.empty(lat.K, dtype=int)
for i, step in enumerate(sched.substeps):
    for region in step:
        label[list(region)] = i
print(label.reshape(11, 11))

# %% Periodic lattices need extra colours when L is not a multiple of the stride.
for L in (6, 7, 8):
    ring = Lattice(1, L, periodic=True)
    print(f"ring L={L}, r=1: {reorganize(ring, 1, 1).M} sub-steps")
