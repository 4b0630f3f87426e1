"""Randomized checks of the local-recovery error bounds.

Each generator draws random instances, computes both sides of an inequality
exactly and returns one record per instance.  They back the ``fawzi-check``
command and the property tests.

* recovery chain: ``2 TV^2 <= KL(P || P_hat) <= I(A:C|B)``
* CMI difference: ``KL(P || P_hat) <= I(A:C|B)_before - I(A:C|B)_after``
* telescoping: ``TV(P0, P0_hat) <= sum of single-channel recovery errors``
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discrete import LocalChannel, local_bayes_channel, local_recovery_chain, random_stochastic
from .gaussian import GaussianDist, LinearChannel, gaussian_cmi, gaussian_kl, local_bayes_reverse, push
from .infotools import FiniteDist, cmi, kl, tv
from .lattice import Lattice, Tripartition, check_schedule, reorganize, shell_tripartition

__all__ = [
    "RecoveryCheck",
    "TelescopeCheck",
    "random_tripartition",
    "random_dist",
    "discrete_recovery_checks",
    "gaussian_recovery_checks",
    "telescoping_checks",
]

SLACK = 1e-9


@dataclass(frozen=True)
class RecoveryCheck:
    kind: str
    K: int
    kl: float
    tv: float
    cmi_before: float
    cmi_after: float

    @property
    def chain_ok(self) -> bool:
        return 2 * self.tv**2 <= self.kl + SLACK and self.kl <= self.cmi_before + SLACK

    @property
    def difference_ok(self) -> bool:
        return self.kl <= self.cmi_before - self.cmi_after + SLACK


@dataclass(frozen=True)
class TelescopeCheck:
    K: int
    N: int
    r: int
    total_tv: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.total_tv <= self.bound + 1e-12


def random_tripartition(rng: np.random.Generator, K: int, max_a: int = 2) -> Tripartition:
    """Random ``A`` (1..max_a sites), ``B`` and nonempty ``C`` covering ``K`` sites."""
    perm = rng.permutation(K)
    a = int(rng.integers(1, min(max_a, K - 1) + 1))
    b = int(rng.integers(0, K - a))
    A, B, C = perm[:a], perm[a : a + b], perm[a + b :]
    return Tripartition(tuple(sorted(A)), tuple(sorted(B)), tuple(sorted(C)), r=1)


def random_dist(rng: np.random.Generator, K: int) -> FiniteDist:
    """Dirichlet draw over ``2^K`` states; the concentration varies so some draws are far from uniform."""
    alpha = float(rng.choice([0.2, 0.5, 1.0]))
    return FiniteDist.from_weights(K, rng.dirichlet(np.full(2**K, alpha)))


def discrete_recovery_checks(n: int, seed=0, K_range=(3, 7)) -> list[RecoveryCheck]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        K = int(rng.integers(K_range[0], K_range[1] + 1))
        P = random_dist(rng, K)
        part = random_tripartition(rng, K)
        ch = LocalChannel(part.A, random_stochastic(rng, 2 ** len(part.A)))
        Y = ch(P)
        P_hat = local_bayes_channel(ch, P, part.B)(Y)
        out.append(RecoveryCheck("discrete", K, kl(P, P_hat), tv(P, P_hat), cmi(P, part), cmi(Y, part)))
    return out


def _random_spd(rng: np.random.Generator, K: int) -> np.ndarray:
    G = rng.standard_normal((K, K))
    return G @ G.T / K + 0.1 * np.eye(K)


def gaussian_recovery_checks(n: int, seed=0, K_range=(3, 6)) -> list[RecoveryCheck]:
    """Random SPD prior, random noisy linear channel on ``A``, local reversal with buffer ``B``.

    The total variation of two Gaussians has no closed form; the ``tv`` field
    holds the Pinsker value ``sqrt(KL / 2)`` so only the ``KL <= CMI`` link is
    informative here.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        K = int(rng.integers(K_range[0], K_range[1] + 1))
        P = GaussianDist(rng.standard_normal(K), _random_spd(rng, K))
        part = random_tripartition(rng, K)
        A = list(part.A)
        M = np.eye(K)
        M[np.ix_(A, A)] = rng.standard_normal((len(A), len(A)))
        b = np.zeros(K)
        b[A] = rng.standard_normal(len(A))
        Q = np.zeros((K, K))
        Q[np.ix_(A, A)] = _random_spd(rng, len(A))
        ch = LinearChannel(M, b, Q)
        Y = push(ch, P)
        P_hat = push(local_bayes_reverse(ch, P, part), Y)
        d = gaussian_kl(P, P_hat)
        out.append(RecoveryCheck("gaussian", K, d, float(np.sqrt(max(d, 0.0) / 2)), gaussian_cmi(P, part), gaussian_cmi(Y, part)))
    return out


def telescoping_checks(n: int, seed=0, max_K: int = 8, max_N: int = 6) -> list[TelescopeCheck]:
    """Multi-step local recovery on random 1D chains; every time step is split by :func:`reorganize`.

    Each region of a sub-step gets a random stochastic channel and is recovered
    with its width-``r`` shell as buffer.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        K = int(rng.integers(3, max_K + 1))
        N = int(rng.integers(1, max_N + 1))
        r = int(rng.integers(0, 3))
        lat = Lattice(1, K, periodic=bool(rng.integers(2)))
        sched = reorganize(lat, 1, r)
        if check_schedule(lat, sched):
            raise AssertionError(f"invalid schedule for {lat}, r={r}")
        layers = []
        for _ in range(N):
            for step in sched.substeps:
                layers.append([LocalChannel(R, random_stochastic(rng, 2 ** len(R))) for R in step])

        def context(A, lat=lat, r=r):
            return shell_tripartition(lat.distance_to_region(A), A, r).B

        res = local_recovery_chain(random_dist(rng, K), layers, context)
        out.append(TelescopeCheck(K, N, r, res.total_tv, res.tv_bound))
    return out
