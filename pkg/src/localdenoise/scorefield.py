"""Exact scores and training-free samplers for an empirical dataset.

Under ``X_t = (1 - t) X_0 + t Z`` with ``X_0`` drawn uniformly from the data,
``P_t`` is an equal-weight Gaussian mixture with centers ``(1 - t) X_i`` and
covariance ``t^2 I``.  Everything below is computed from that mixture in
closed form, with log-sum-exp stabilized responsibilities.

Times may be scalars or per-site arrays; the latter describe the intermediate
distributions of the reorganized process where some sites have already been
advanced to the next time and others have not.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .lattice import Lattice, Tripartition, reorganize, shell_tripartition

__all__ = [
    "Dataset",
    "NoiseSchedule",
    "SamplerConfig",
    "SamplerDivergence",
    "responsibilities",
    "posterior_mean",
    "mixture_logpdf",
    "mixture_score",
    "local_mixture_score",
    "flow_velocity",
    "sample_backward",
]

WEIGHT_FLOOR = 1e-300
DIVERGENCE_NORM = 1e6


class SamplerDivergence(FloatingPointError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    samples: np.ndarray
    lattice: Lattice | None = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if X.shape[0] < 1 or not np.all(np.isfinite(X)):
            raise ValueError("dataset needs at least one finite sample")
        if self.lattice is not None and self.lattice.K != X.shape[1]:
            raise ValueError(f"lattice has {self.lattice.K} sites, data have {X.shape[1]} coordinates")
        object.__setattr__(self, "samples", X)
        if self.lattice is None:
            object.__setattr__(self, "lattice", Lattice(1, X.shape[1], periodic=False))

    @property
    def K(self) -> int:
        return self.samples.shape[1]

    @classmethod
    def from_csv(cls, path, lattice: Lattice | None = None) -> "Dataset":
        return cls(np.loadtxt(path, delimiter=",", ndmin=2, skiprows=_header_rows(path)), lattice)


def _header_rows(path) -> int:
    first = Path(path).read_text().split("\n", 1)[0]
    try:
        [float(v) for v in first.split(",")]
        return 0
    except ValueError:
        return 1


@dataclass(frozen=True)
class NoiseSchedule:
    """Uniform grid on ``[t_min, t_max]`` traversed backwards in ``N`` steps; ``alpha(t) = t``."""

    N: int = 200
    t_min: float = 0.01
    t_max: float = 1.0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("need at least one step")
        if not 0.0 < self.t_min < self.t_max <= 1.0:
            raise ValueError(f"need 0 < t_min < t_max <= 1, got {self.t_min}, {self.t_max}")

    def grid(self) -> np.ndarray:
        return np.linspace(self.t_max, self.t_min, self.N + 1)


@dataclass(frozen=True)
class SamplerConfig:
    eta: float = 0.0
    mode: str = "global"
    r: int = 1
    k: int = 1
    intervals: tuple[tuple[float, float], ...] = ((0.2, 0.5),)
    seed: int = 0
    n_samples: int = 1000
    denoise_final: bool = True

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        if self.mode not in ("global", "local", "hybrid"):
            raise ValueError(f"unknown mode {self.mode!r}")
        ivs = sorted(tuple(map(float, iv)) for iv in self.intervals)
        for lo, hi in ivs:
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError(f"interval {(lo, hi)} is not inside [0, 1]")
        for (_, hi), (lo, _) in zip(ivs, ivs[1:]):
            if lo < hi:
                raise ValueError("hybrid intervals overlap")
        object.__setattr__(self, "intervals", tuple(ivs))
        if self.r < 0 or self.k < 1:
            raise ValueError("need r >= 0 and k >= 1")

    def use_global(self, t: float) -> bool:
        if self.mode == "global":
            return True
        if self.mode == "local":
            return False
        return any(lo <= t <= hi for lo, hi in self.intervals)


def _times(t, K: int) -> np.ndarray:
    t = np.broadcast_to(np.asarray(t, dtype=float), (K,))
    if np.any(t <= 0) or np.any(t > 1):
        raise ValueError("times must lie in (0, 1]; the density is singular at t = 0")
    return t


def _log_weights(X: np.ndarray, t: np.ndarray, x: np.ndarray) -> np.ndarray:
    # unnormalized log-responsibilities, shape (n_query, n_data)
    centers = (1 - t) * X
    d = (x[:, None, :] - centers[None, :, :]) / t
    return -0.5 * np.einsum("qnk,qnk->qn", d, d)


def responsibilities(ds: Dataset, t, x, sites=None) -> np.ndarray:
    """Posterior weights of the data points given ``x`` (optionally only the coordinates ``sites``)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    X = ds.samples if sites is None else ds.samples[:, list(sites)]
    tt = _times(t, ds.K) if sites is None else _times(t, ds.K)[list(sites)]
    logw = _log_weights(X, tt, x)
    w = np.exp(logw - logsumexp(logw, axis=1, keepdims=True))
    w[w < WEIGHT_FLOOR] = 0.0
    return w / w.sum(axis=1, keepdims=True)


def posterior_mean(ds: Dataset, t, x, sites=None) -> np.ndarray:
    """``E[X_0 | X_t = x]`` on ``sites`` (all coordinates by default), conditioning on ``x`` there only."""
    w = responsibilities(ds, t, x, sites)
    X = ds.samples if sites is None else ds.samples[:, list(sites)]
    return w @ X


def mixture_logpdf(ds: Dataset, t, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    tt = _times(t, ds.K)
    logw = _log_weights(ds.samples, tt, x)
    norm = -np.sum(np.log(tt)) - 0.5 * ds.K * np.log(2 * np.pi) - np.log(len(ds.samples))
    return logsumexp(logw, axis=1) + norm


def mixture_score(ds: Dataset, t, x) -> np.ndarray:
    """``grad_x ln P_t(x) = (sum_i w_i c_i - x) / t^2``; keeps the shape of ``x``."""
    xa = np.asarray(x, dtype=float)
    x2 = np.atleast_2d(xa)
    tt = _times(t, ds.K)
    m = posterior_mean(ds, tt, x2)
    s = ((1 - tt) * m - x2) / tt**2
    return s.reshape(xa.shape)


def local_mixture_score(ds: Dataset, t, x, part: Tripartition) -> np.ndarray:
    """Score of the ``A + B`` marginal mixture, returned on the coordinates of ``A``.

    ``x`` is a full configuration in site order; only its ``A`` and ``B``
    coordinates are read.
    """
    xa = np.atleast_2d(np.asarray(x, dtype=float))
    if xa.shape[1] != ds.K:
        raise ValueError(f"expected {ds.K} coordinates, got {xa.shape[1]}")
    A = list(part.A)
    AB = A + list(part.B)
    tt = _times(t, ds.K)
    m = posterior_mean(ds, tt, xa[:, AB], sites=AB)[:, : len(A)]
    ta = tt[A]
    s = ((1 - ta) * m - xa[:, A]) / ta**2
    return s if np.ndim(x) > 1 else s[0]


def flow_velocity(ds: Dataset, t: float, x) -> np.ndarray:
    """``E[X_0 - Z | X_t = x] = (E[X_0 | x] - x) / t`` for ``t`` strictly inside ``(0, 1)``."""
    if not 0.0 < t < 1.0:
        raise ValueError(f"flow velocity needs 0 < t < 1, got {t}")
    xa = np.asarray(x, dtype=float)
    x2 = np.atleast_2d(xa)
    return ((posterior_mean(ds, t, x2) - x2) / t).reshape(xa.shape)


def _step(x: np.ndarray, m: np.ndarray, t, s, eta: float, noise: np.ndarray | None) -> np.ndarray:
    """Move ``x`` from time ``t`` to ``s < t`` given the posterior-mean prediction ``m``.

    With ``eta = 0`` this is exactly the Euler step of the probability-flow ODE
    ``dx/dt = -(E[X_0|x] - x) / t``.  For ``eta > 0`` a fraction ``eta`` of the
    ancestral (Bayes) posterior noise is injected; ``eta = 1`` draws from the
    exact Gaussian ``X_s | X_t, X_0 = m``.
    """
    if eta == 0.0:
        return (s / t) * x + (1 - s / t) * m
    a = (1 - t) / (1 - s)
    q = t**2 - a**2 * s**2
    sigma = np.minimum(eta * s * np.sqrt(q) / t, s)
    z_hat = (x - (1 - t) * m) / t
    return (1 - s) * m + np.sqrt(s**2 - sigma**2) * z_hat + sigma * noise


@dataclass
class SampleTrace:
    samples: np.ndarray
    final_state: np.ndarray
    global_steps: int = 0
    local_steps: int = 0
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))


def sample_backward(
    ds: Dataset,
    schedule: NoiseSchedule,
    cfg: SamplerConfig,
    x_init: np.ndarray | None = None,
    return_trace: bool = False,
):
    """Integrate from pure noise at ``t_max`` back to ``t_min`` with exact mixture scores.

    Global steps use the full posterior mean.  Local steps sweep the
    sub-steps of the reorganized schedule; a region ``A`` is advanced using
    only the mixture marginal on ``A`` and its width-``r`` buffer, with the
    buffer sites carrying whatever time they have reached so far.  In hybrid
    mode a step is global when its start time falls in one of
    ``cfg.intervals``.  With ``denoise_final`` the returned samples are the
    posterior means at ``t_min``.
    """
    rng = np.random.default_rng(cfg.seed)
    K = ds.K
    x = rng.standard_normal((cfg.n_samples, K)) if x_init is None else np.array(x_init, dtype=float)
    grid = schedule.grid()
    if grid[0] < 1.0:
        x = (1 - grid[0]) * ds.samples[rng.integers(len(ds.samples), size=len(x))] + grid[0] * x
    lat = ds.lattice
    regions = []
    if cfg.mode != "global":
        for step in reorganize(lat, cfg.k, cfg.r).substeps:
            regions.append(
                [(list(R), shell_tripartition(lat.distance_to_region(R), R, cfg.r)) for R in step]
            )
    n_global = n_local = 0
    for n, (t, s) in enumerate(zip(grid[:-1], grid[1:])):
        if cfg.use_global(t):
            m = posterior_mean(ds, t, x)
            noise = rng.standard_normal(x.shape) if cfg.eta > 0 else None
            x = _step(x, m, t, s, cfg.eta, noise)
            n_global += 1
        else:
            tvec = np.full(K, t)
            for step in regions:
                updates = []
                for A, part in step:
                    AB = A + list(part.B)
                    m = posterior_mean(ds, tvec, x[:, AB], sites=AB)[:, : len(A)]
                    noise = rng.standard_normal((len(x), len(A))) if cfg.eta > 0 else None
                    updates.append((A, _step(x[:, A], m, t, s, cfg.eta, noise)))
                for A, val in updates:
                    x[:, A] = val
                    tvec[A] = s
            n_local += 1
        norm = np.linalg.norm(x, axis=1).max()
        if not np.isfinite(norm) or norm > DIVERGENCE_NORM:
            raise SamplerDivergence(f"step {n} (t={t:.4f} -> {s:.4f}): sample norm reached {norm:.3e}")
    if not cfg.denoise_final:
        out = x
    elif cfg.use_global(grid[-1]):
        out = posterior_mean(ds, grid[-1], x)
    else:
        out = x.copy()
        for step in regions:
            for A, part in step:
                AB = A + list(part.B)
                out[:, A] = posterior_mean(ds, grid[-1], x[:, AB], sites=AB)[:, : len(A)]
    if return_trace:
        return SampleTrace(out, x, n_global, n_local, grid)
    return out


def write_samples_csv(path, samples: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j}" for j in range(samples.shape[1])])
        for row in samples:
            w.writerow([repr(float(v)) for v in row])


def finite_difference_score(logpdf: Callable, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar log-density; used as an independent check."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (logpdf(x + e) - logpdf(x - e)) / (2 * h)
    return g
