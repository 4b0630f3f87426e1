"""Exact noising and denoising of distributions over bit strings.

Channels act on a subset of sites ``A`` and are stored as column-stochastic
matrices ``T[y_A, x_A]`` over the ``2**|A|`` local states, little-endian in the
order the sites are listed.  Bayes recovery channels read ``A`` and a context
region ``B`` and rewrite only ``A``.

Continuous-time dynamics are given by rate generators ``L[y, x]`` (rate of the
jump ``x -> y``) and integrated with classical RK4.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .infotools import FiniteDist, site_axes, tv

__all__ = [
    "LocalChannel",
    "FlipChannel",
    "BayesChannel",
    "DegenerateBayesWarning",
    "RateGenerator",
    "apply_flip",
    "flip_time",
    "flip_matrix",
    "bayes_channel",
    "local_bayes_channel",
    "reverse_rates",
    "flip_generator",
    "integrate_master",
    "denoise_master",
    "LocalRecoveryResult",
    "local_recovery_chain",
    "random_stochastic",
]

DENSE_LIMIT = 12


class DegenerateBayesWarning(RuntimeWarning):
    """A Bayes channel was queried at an output with zero probability."""


def _check_sites(sites, K: int) -> tuple[int, ...]:
    sites = tuple(int(s) for s in sites)
    if len(set(sites)) != len(sites) or any(s < 0 or s >= K for s in sites):
        raise ValueError(f"invalid sites {sites} for a {K}-bit distribution")
    return sites


def _front(t: np.ndarray, axes: list[int]) -> np.ndarray:
    return np.moveaxis(t, axes, list(range(len(axes))))


def _back(t: np.ndarray, axes: list[int]) -> np.ndarray:
    return np.moveaxis(t, list(range(len(axes))), axes)


def _apply_matrix(P: FiniteDist, sites, T: np.ndarray) -> FiniteDist:
    axes = site_axes(sites, P.K)
    t = _front(P.tensor(), axes)
    shape = t.shape
    out = (T @ t.reshape(T.shape[1], -1)).reshape(shape)
    return FiniteDist(P.K, _back(out, axes).reshape(-1))


@dataclass(frozen=True, eq=False)
class LocalChannel:
    """Stochastic map on ``sites``: ``matrix[y, x]`` = probability of ``x -> y``."""

    sites: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        T = np.asarray(self.matrix, dtype=float)
        n = 2 ** len(self.sites)
        if T.shape != (n, n):
            raise ValueError(f"channel on {len(self.sites)} sites needs a {n}x{n} matrix")
        if np.any(T < 0) or not np.allclose(T.sum(axis=0), 1.0, atol=1e-12):
            raise ValueError("channel matrix must be column-stochastic")
        object.__setattr__(self, "sites", tuple(int(s) for s in self.sites))
        object.__setattr__(self, "matrix", T)

    def apply(self, P: FiniteDist) -> FiniteDist:
        _check_sites(self.sites, P.K)
        return _apply_matrix(P, self.sites, self.matrix)

    __call__ = apply


def flip_matrix(p: float, n_sites: int = 1) -> np.ndarray:
    T = np.array([[1 - p, p], [p, 1 - p]])
    out = np.ones((1, 1))
    for _ in range(n_sites):
        out = np.kron(T, out)
    return out


@dataclass(frozen=True)
class FlipChannel:
    """Independent flip of every site in ``sites`` with probability ``p``."""

    p: float
    sites: tuple[int, ...]

    def __post_init__(self):
        if not 0.0 <= self.p <= 0.5:
            raise ValueError(f"flip probability must lie in [0, 1/2], got {self.p}")
        object.__setattr__(self, "sites", tuple(int(s) for s in self.sites))

    @property
    def matrix(self) -> np.ndarray:
        if len(self.sites) > DENSE_LIMIT:
            raise ValueError(f"dense flip matrix on {len(self.sites)} sites is too large")
        return flip_matrix(self.p, len(self.sites))

    def apply(self, P: FiniteDist) -> FiniteDist:
        return apply_flip(self, P)

    __call__ = apply


def apply_flip(ch: FlipChannel, P: FiniteDist) -> FiniteDist:
    """Exact action of the product flip kernel, one site at a time."""
    sites = _check_sites(ch.sites, P.K)
    t = P.tensor()
    for s in sites:
        ax = P.K - 1 - s
        t = (1 - ch.p) * t + ch.p * np.flip(t, axis=ax)
    return FiniteDist(P.K, t.reshape(-1))


def flip_time(p: float) -> float:
    """Duration of the rate-1/2 flip master equation that realizes flip probability ``p``."""
    if not 0.0 <= p <= 0.5:
        raise ValueError(f"flip probability must lie in [0, 1/2], got {p}")
    if p == 0.5:
        return math.inf
    return -math.log1p(-2.0 * p)


def random_stochastic(rng: np.random.Generator, n: int, concentration: float = 1.0) -> np.ndarray:
    """Random ``n x n`` column-stochastic matrix with Dirichlet columns."""
    return rng.dirichlet(np.full(n, concentration), size=n).T


@dataclass(frozen=True, eq=False)
class BayesChannel:
    """Recovery kernel ``kernel[x_A, y_A, x_B]``; reads ``sites`` and ``context``, writes ``sites``."""

    sites: tuple[int, ...]
    context: tuple[int, ...]
    kernel: np.ndarray
    degenerate: bool = False

    def apply(self, Q: FiniteDist) -> FiniteDist:
        a, b = len(self.sites), len(self.context)
        axes = site_axes(self.sites, Q.K) + site_axes(self.context, Q.K)
        t = _front(Q.tensor(), axes)
        shape = t.shape
        t = t.reshape(2**a, 2**b, -1)
        out = np.einsum("ayb,ybr->abr", self.kernel, t).reshape(shape)
        return FiniteDist(Q.K, _back(out, axes).reshape(-1))

    __call__ = apply


def local_bayes_channel(ch, P: FiniteDist, context=(), labels=None) -> BayesChannel:
    """Local Bayes recovery of ``ch`` built from the marginal of ``P`` on ``A`` and ``context``.

    Parameters
    ----------
    ch : LocalChannel or FlipChannel
        Forward channel acting on the sites ``A = ch.sites``.
    P : FiniteDist
        Reference distribution before the channel.  When ``labels`` is given, ``P``
        is a marginal whose bit ``j`` is global site ``labels[j]``; it must cover
        ``A`` and ``context``.
    context : sequence of int
        Buffer sites ``B`` the recovery conditions on.

    Returns
    -------
    BayesChannel
        ``B(x_A | y_A, x_B) = N(y_A|x_A) P(x_A, x_B) / sum_x N(y_A|x_A) P(x_A, x_B)``.
        Where the denominator vanishes the prior conditional ``P(x_A | x_B)`` is
        used instead (uniform if ``x_B`` itself has zero mass) and ``degenerate``
        is set.
    """
    A = tuple(ch.sites)
    B = tuple(int(s) for s in context)
    if set(A) & set(B):
        raise ValueError("context overlaps the channel's sites")
    labels = tuple(range(P.K)) if labels is None else tuple(labels)
    pos = {s: j for j, s in enumerate(labels)}
    missing = [s for s in A + B if s not in pos]
    if missing:
        raise ValueError(f"reference distribution does not cover sites {missing}")
    a, b = len(A), len(B)
    if a + b > 2 * DENSE_LIMIT:
        raise ValueError(f"Bayes kernel over {a + b} sites is too large")
    pab = P.marginal([pos[s] for s in A + B]).probs.reshape(2**b, 2**a).T  # [x_A, x_B]
    N = ch.matrix  # [y_A, x_A]
    joint = N[:, :, None] * pab[None, :, :]  # [y_A, x_A, x_B]
    denom = joint.sum(axis=1)  # [y_A, x_B]
    kernel = np.empty((2**a, 2**a, 2**b))
    good = denom > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        kernel[:] = np.transpose(joint / np.where(good, denom, 1.0)[:, None, :], (1, 0, 2))
    degenerate = not np.all(good)
    if degenerate:
        pb = pab.sum(axis=0)
        prior = np.where(pb > 0, pab / np.where(pb > 0, pb, 1.0), 2.0**-a)  # [x_A, x_B]
        ys, xbs = np.nonzero(~good)
        kernel[:, ys, xbs] = prior[:, xbs]
        warnings.warn(
            f"Bayes channel on sites {A}: {ys.size} zero-probability outputs get the prior conditional",
            DegenerateBayesWarning,
            stacklevel=2,
        )
    return BayesChannel(A, B, kernel, degenerate)


def bayes_channel(ch, P: FiniteDist) -> BayesChannel:
    """Exact (global) Bayes recovery of ``ch`` against ``P``; composing it after ``ch`` fixes ``P``."""
    A = set(ch.sites)
    return local_bayes_channel(ch, P, [s for s in range(P.K) if s not in A])


# -- continuous time -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RateGenerator:
    """Master-equation generator; ``matrix[y, x]`` is the rate of the jump ``x -> y``.

    Build from a sparse mapping ``{(x, y): rate}`` with :meth:`from_rates`; the
    diagonal is always the negative column sum.
    """

    n_states: int
    matrix: sp.csr_matrix = field(repr=False)

    @classmethod
    def from_rates(cls, n_states: int, rates: dict) -> "RateGenerator":
        rows, cols, vals = [], [], []
        for (x, y), lam in rates.items():
            if x == y:
                continue
            if lam < 0:
                raise ValueError(f"negative rate {lam} for jump {x} -> {y}")
            rows.append(y)
            cols.append(x)
            vals.append(float(lam))
        off = sp.csr_matrix((vals, (rows, cols)), shape=(n_states, n_states))
        return cls._from_offdiag(off)

    @classmethod
    def _from_offdiag(cls, off) -> "RateGenerator":
        off = sp.csr_matrix(off, dtype=float)
        off.setdiag(0.0)
        off.eliminate_zeros()
        if off.nnz and off.data.min() < 0:
            raise ValueError("off-diagonal rates must be nonnegative")
        out_rate = np.asarray(off.sum(axis=0)).ravel()
        full = (off - sp.diags(out_rate)).tocsr()
        return cls(off.shape[0], full)

    def offdiag(self) -> sp.csr_matrix:
        off = self.matrix.tolil(copy=True)
        off.setdiag(0.0)
        return off.tocsr()

    def rate(self, x: int, y: int) -> float:
        """Rate of the jump ``x -> y`` (``x == y`` gives the diagonal)."""
        return float(self.matrix[y, x])

    def __matmul__(self, p: np.ndarray) -> np.ndarray:
        return self.matrix @ p


def flip_generator(K: int, rate: float = 0.5, sites=None) -> RateGenerator:
    """Independent bit flips at ``rate`` on ``sites`` (all sites by default)."""
    sites = range(K) if sites is None else _check_sites(sites, K)
    idx = np.arange(2**K)
    rows, cols = [], []
    for s in sites:
        rows.append(idx ^ (1 << s))
        cols.append(idx)
    rows = np.concatenate(rows) if rows else np.zeros(0, int)
    cols = np.concatenate(cols) if cols else np.zeros(0, int)
    off = sp.csr_matrix((np.full(rows.size, float(rate)), (rows, cols)), shape=(2**K, 2**K))
    return RateGenerator._from_offdiag(off)


def reverse_rates(gen: RateGenerator, P) -> RateGenerator:
    """Time-reversed generator against ``P``: rate of ``y -> x`` is ``rate(x -> y) P(x) / P(y)``."""
    p = np.asarray(P.probs if isinstance(P, FiniteDist) else P, dtype=float)
    if p.shape != (gen.n_states,):
        raise ValueError("distribution and generator sizes differ")
    off = gen.offdiag().tocoo()
    # entry (y, x) of the forward generator becomes entry (x, y) of the reverse
    lam, y, x = off.data, off.row, off.col
    mask = lam > 0
    lam, y, x = lam[mask], y[mask], x[mask]
    bad = np.unique(y[p[y] <= 0])
    if bad.size:
        raise ValueError(
            f"state {int(bad[0])} is reachable by the forward generator but has zero probability"
        )
    rev = sp.csr_matrix((lam * p[x] / p[y], (x, y)), shape=off.shape)
    return RateGenerator._from_offdiag(rev)


def _as_callable(gen) -> Callable[[float], RateGenerator]:
    return gen if callable(gen) and not isinstance(gen, RateGenerator) else (lambda t: gen)


def integrate_master(gen, P0: FiniteDist, T: float, steps: int, t0: float = 0.0, return_path=False):
    """RK4 integration of ``dP/dt = L(t) P`` from ``t0`` to ``t0 + T``.

    ``gen`` is a :class:`RateGenerator` or a callable ``t -> RateGenerator``.
    With ``return_path`` the distribution after every step is returned as an
    array of shape ``(steps + 1, 2**K)``.
    """
    if steps < 1:
        raise ValueError("need at least one integration step")
    L = _as_callable(gen)
    h = T / steps
    p = P0.probs.copy()
    path = [p.copy()] if return_path else None
    for n in range(steps):
        t = t0 + n * h
        k1 = L(t) @ p
        k2 = L(t + h / 2) @ (p + h / 2 * k1)
        k3 = L(t + h / 2) @ (p + h / 2 * k2)
        k4 = L(t + h) @ (p + h * k3)
        p = p + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if p.min() < -1e-9:
            raise FloatingPointError(
                f"step {n}: probability {p.min():.3e} went negative; use more steps"
            )
        total = p.sum()
        if abs(total - 1.0) > 1e-9:
            raise FloatingPointError(f"step {n}: total probability drifted to {total!r}")
        p = np.clip(p, 0.0, None)
        p /= p.sum()
        if return_path:
            path.append(p.copy())
    out = FiniteDist(P0.K, p)
    return (out, np.array(path)) if return_path else out


def denoise_master(gen, P0: FiniteDist, T: float, steps: int):
    """Run the forward master equation for ``T``, then its exact time reversal back.

    The forward pass is recorded on a half-step grid so every RK4 stage of
    the backward pass sees the exact forward marginal.  Returns
    ``(P_T, recovered)``.
    """
    L = _as_callable(gen)
    PT, path = integrate_master(L, P0, T, 2 * steps, return_path=True)
    h_half = T / (2 * steps)

    def backward(tau: float) -> RateGenerator:
        j = round((T - tau) / h_half)
        if abs(j * h_half - (T - tau)) > 1e-9 * max(T, 1.0):
            raise ValueError(f"backward time {tau} is off the recorded grid")
        return reverse_rates(L(T - tau), path[j])

    return PT, integrate_master(backward, PT, T, steps)


# -- multi-step local recovery -------------------------------------------------


@dataclass
class LocalRecoveryResult:
    recovered: FiniteDist
    total_tv: float
    step_tvs: list[list[float]]
    forward: list[FiniteDist]

    @property
    def tv_bound(self) -> float:
        return float(sum(sum(row) for row in self.step_tvs))


def local_recovery_chain(
    P0: FiniteDist,
    layers: Sequence[Sequence],
    context: Callable[[tuple[int, ...]], Sequence[int]],
) -> LocalRecoveryResult:
    """Forward through ``layers`` of channels, then undo every channel with local Bayes recovery.

    Each layer is a list of channels on pairwise disjoint regions; ``context(A)``
    returns the buffer region used to recover a channel on ``A``.  The recovery
    channels of layer ``n`` are built from the exact distribution ``P_{n-1}``
    entering that layer.  Alongside the recovered distribution the result
    carries the per-channel errors ``TV(B_l N_l (P_{n-1}), P_{n-1})``, whose
    sum bounds the total error.
    """
    forward = [P0]
    recoveries = []
    step_tvs = []
    for layer in layers:
        prev = forward[-1]
        regions = [tuple(ch.sites) for ch in layer]
        ctxs = [tuple(context(R)) for R in regions]
        for (i, Ri), (j, Rj) in itertools.combinations(enumerate(regions), 2):
            if set(Ri) & (set(Rj) | set(ctxs[j])) or set(Rj) & (set(Ri) | set(ctxs[i])):
                raise ValueError(f"channels on {Ri} and {Rj} overlap each other's recovery region")
        recs, tvs = [], []
        cur = prev
        for ch, ctx in zip(layer, ctxs):
            rec = local_bayes_channel(ch, prev, ctx)
            recs.append(rec)
            tvs.append(tv(rec(ch(prev)), prev))
            cur = ch(cur)
        recoveries.append(recs)
        step_tvs.append(tvs)
        forward.append(cur)
    Q = forward[-1]
    for recs in reversed(recoveries):
        for rec in recs:
            Q = rec(Q)
    return LocalRecoveryResult(Q, tv(Q, P0), step_tvs, forward)
