"""Exact information measures on explicit distributions over bit strings.

States are indexed little-endian: site 0 is the least significant bit of the
state index.  All quantities are in nats.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lattice import Tripartition

__all__ = [
    "FiniteDist",
    "entropy",
    "kl",
    "tv",
    "cmi",
    "mutual_information",
    "SupportWarning",
]

MAX_BITS = 24


class SupportWarning(RuntimeWarning):
    """KL divergence hit a state outside the reference support."""


def site_axes(sites, K: int) -> list[int]:
    """Tensor axes (most significant first) of ``sites`` in a ``(2,)*K`` C-ordered view."""
    return [K - 1 - s for s in reversed(tuple(sites))]


@dataclass(frozen=True, eq=False)
class FiniteDist:
    """Probability vector over ``2**K`` bit strings."""

    K: int
    probs: np.ndarray

    def __post_init__(self):
        if not 0 <= self.K <= MAX_BITS:
            raise ValueError(f"K={self.K} outside the supported range [0, {MAX_BITS}]")
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (2**self.K,):
            raise ValueError(f"expected {2**self.K} probabilities, got shape {p.shape}")
        if np.any(p < -1e-12):
            raise ValueError(f"negative probability {p.min():.3e}")
        total = p.sum()
        if abs(total - 1.0) > 1e-12 * max(1, p.size / 1024):
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_weights(cls, K: int, weights) -> "FiniteDist":
        w = np.asarray(weights, dtype=float)
        return cls(K, w / w.sum())

    @classmethod
    def point(cls, K: int, state: int = 0) -> "FiniteDist":
        p = np.zeros(2**K)
        p[state] = 1.0
        return cls(K, p)

    @classmethod
    def uniform(cls, K: int) -> "FiniteDist":
        return cls(K, np.full(2**K, 2.0**-K))

    @classmethod
    def product(cls, marginals) -> "FiniteDist":
        """Independent bits, ``marginals[i]`` = probability that site ``i`` is 1."""
        p = np.ones(1)
        for q in marginals:
            p = np.kron(np.array([1 - q, q]), p)
        return cls(len(marginals), p)

    def tensor(self) -> np.ndarray:
        return self.probs.reshape((2,) * self.K)

    def marginal(self, sites) -> "FiniteDist":
        """Marginal on ``sites``; site ``j`` of the result is ``sites[j]``."""
        sites = tuple(sites)
        if len(set(sites)) != len(sites) or any(s < 0 or s >= self.K for s in sites):
            raise ValueError(f"invalid site list {sites} for K={self.K}")
        if len(sites) == self.K and sites == tuple(range(self.K)):
            return self
        keep = site_axes(sites, self.K)
        drop = tuple(ax for ax in range(self.K) if ax not in keep)
        t = self.tensor().sum(axis=drop) if drop else self.tensor()
        # remaining axes come out in increasing order; put them most-significant-first
        order = sorted(keep)
        t = np.transpose(t, [order.index(ax) for ax in keep])
        return FiniteDist(len(sites), t.reshape(-1))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "probability"])
            for i, p in enumerate(self.probs):
                writer.writerow([i, repr(float(p))])

    @classmethod
    def from_csv(cls, path) -> "FiniteDist":
        rows = list(csv.DictReader(Path(path).read_text().splitlines()))
        n = len(rows)
        K = n.bit_length() - 1
        if 2**K != n:
            raise ValueError(f"{path}: {n} rows is not a power of two")
        p = np.zeros(n)
        for row in rows:
            p[int(row["index"])] = float(row["probability"])
        return cls(K, p)


def _xlogx(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    nz = p > 0
    out[nz] = p[nz] * np.log(p[nz])
    return out


def entropy(P: FiniteDist) -> float:
    return float(-_xlogx(P.probs).sum())


def kl(P: FiniteDist, Q: FiniteDist) -> float:
    """KL(P || Q); returns ``inf`` and emits a :class:`SupportWarning` on support violation."""
    if P.K != Q.K:
        raise ValueError(f"bit counts differ: {P.K} vs {Q.K}")
    p, q = P.probs, Q.probs
    nz = p > 0
    if np.any(q[nz] == 0):
        warnings.warn("P puts mass where Q has none; KL is infinite", SupportWarning, stacklevel=2)
        return math.inf
    return max(float(np.sum(p[nz] * (np.log(p[nz]) - np.log(q[nz])))), 0.0)


def tv(P: FiniteDist, Q: FiniteDist) -> float:
    if P.K != Q.K:
        raise ValueError(f"bit counts differ: {P.K} vs {Q.K}")
    return 0.5 * float(np.abs(P.probs - Q.probs).sum())


def _H(P: FiniteDist, sites) -> float:
    return entropy(P.marginal(sites)) if len(sites) else 0.0


def cmi(P: FiniteDist, part: Tripartition) -> float:
    """I(A:C|B) = H(AB) + H(BC) - H(ABC) - H(B), from exact marginals."""
    if part.n_sites != P.K:
        raise ValueError(f"partition covers {part.n_sites} sites, distribution has {P.K}")
    val = (
        _H(P, part.AB)
        + _H(P, part.BC)
        - _H(P, part.A + part.B + part.C)
        - _H(P, part.B)
    )
    if val < -1e-10:
        raise ArithmeticError(f"conditional mutual information came out negative: {val}")
    return max(val, 0.0)


def mutual_information(P: FiniteDist, X, Y) -> float:
    return max(_H(P, tuple(X)) + _H(P, tuple(Y)) - _H(P, tuple(X) + tuple(Y)), 0.0)
