"""Exact diffusion, local denoising and conditional-mutual-information diagnostics.

Submodules
----------
lattice     lattice geometry, tripartitions, reorganized sub-step schedules
infotools   finite distributions and information measures
discrete    flip channels, master equations, exact (local) Bayes recovery
gaussian    closed-form linear-Gaussian diffusion and local recovery
toric       classical toric code loop distributions and anyon entropies
scorefield  training-free samplers with exact mixture scores
mine        neural mutual-information estimation
cli         configuration-driven experiment runner
"""
from importlib.metadata import PackageNotFoundError, version as _version

from .lattice import Lattice, Tripartition, ReorgSchedule, build_tripartition, reorganize, required_radius
from .infotools import FiniteDist, entropy, kl, tv, cmi
from .discrete import FlipChannel, RateGenerator, apply_flip, bayes_channel, local_bayes_channel
from .gaussian import GaussianDist, LinearChannel, gaussian_cmi, gaussian_kl, multi_step_local_recovery
from .toric import TorusCode, loop_dist, toric_cmi_sweep
from .scorefield import Dataset, NoiseSchedule, SamplerConfig, mixture_score, sample_backward
from .mine import MineConfig, mine_estimate, cmi_via_mine

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # pragma: no cover - source checkout without install
    __version__ = "0.1.0"
