"""Closed-form linear-Gaussian diffusion.

Data follow the interpolation ``X_t = (1 - t) X_0 + t Z`` with ``Z`` standard
normal.  Every channel here is affine with Gaussian noise, so forward noising,
Bayes reversal (global or local) and the recovered distributions stay
Gaussian and are propagated exactly through their first two moments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .lattice import Lattice, Tripartition, build_tripartition, reorganize, shell_tripartition

__all__ = [
    "GaussianDist",
    "LinearChannel",
    "MarkovFit",
    "RecoveryResult",
    "forward_step",
    "push",
    "bayes_reverse",
    "local_bayes_reverse",
    "gaussian_kl",
    "gaussian_cmi",
    "score",
    "logpdf",
    "markov_length_fit",
    "gmrf_chain",
    "gmrf_grid",
    "cmi_sweep",
    "multi_step_local_recovery",
]

SPD_TOL = 1e-10
JITTER = 1e-12


def _sym(S: np.ndarray) -> np.ndarray:
    return 0.5 * (S + S.T)


@dataclass(frozen=True, eq=False)
class GaussianDist:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mean, dtype=float))
        S = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if S.shape != (mu.size, mu.size):
            raise ValueError(f"covariance shape {S.shape} does not match mean of size {mu.size}")
        if np.max(np.abs(S - S.T), initial=0.0) > SPD_TOL:
            raise ValueError("covariance is not symmetric")
        S = _sym(S)
        lam = np.linalg.eigvalsh(S)[0] if mu.size else 1.0
        if lam <= 0:
            raise ValueError(f"covariance is not positive definite (smallest eigenvalue {lam:.3e})")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "cov", S)

    @property
    def K(self) -> int:
        return self.mean.size

    def marginal(self, sites) -> "GaussianDist":
        idx = list(sites)
        return GaussianDist(self.mean[idx], self.cov[np.ix_(idx, idx)])

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.multivariate_normal(self.mean, self.cov, size=n, method="cholesky")


@dataclass(frozen=True, eq=False)
class LinearChannel:
    """``y = M x + b + noise`` with ``noise ~ N(0, noise_cov)``."""

    M: np.ndarray
    b: np.ndarray
    noise_cov: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        Q = np.atleast_2d(np.asarray(self.noise_cov, dtype=float))
        K = M.shape[0]
        if M.shape != (K, K) or b.shape != (K,) or Q.shape != (K, K):
            raise ValueError("inconsistent channel dimensions")
        if np.max(np.abs(Q - Q.T), initial=0.0) > SPD_TOL:
            raise ValueError("noise covariance is not symmetric")
        Q = _sym(Q)
        if K and np.linalg.eigvalsh(Q)[0] < -SPD_TOL:
            raise ValueError("noise covariance is not positive semidefinite")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "noise_cov", Q)

    @property
    def K(self) -> int:
        return self.b.size

    @classmethod
    def identity(cls, K: int) -> "LinearChannel":
        return cls(np.eye(K), np.zeros(K), np.zeros((K, K)))


def forward_step(t: float, t2: float, K: int = 1, sites=None) -> LinearChannel:
    """Markov kernel carrying the interpolation marginals from time ``t`` to ``t2``.

    ``x -> a x + sqrt(t2^2 - a^2 t^2) z`` with ``a = (1 - t2) / (1 - t)``.
    With ``sites`` the kernel acts on those coordinates only and is the
    identity elsewhere.
    """
    if not 0.0 <= t < 1.0:
        raise ValueError(f"start time must lie in [0, 1), got {t}")
    if t2 < t or t2 > 1.0:
        raise ValueError(f"end time {t2} must lie in [t={t}, 1]")
    a = (1.0 - t2) / (1.0 - t)
    q = max(t2**2 - a**2 * t**2, 0.0)
    mask = np.zeros(K, dtype=bool)
    mask[list(range(K)) if sites is None else list(sites)] = True
    return LinearChannel(np.diag(np.where(mask, a, 1.0)), np.zeros(K), np.diag(np.where(mask, q, 0.0)))


def push(ch: LinearChannel, P: GaussianDist) -> GaussianDist:
    if ch.K != P.K:
        raise ValueError(f"channel dimension {ch.K} does not match distribution dimension {P.K}")
    mean = ch.M @ P.mean + ch.b
    cov = _sym(ch.M @ P.cov @ ch.M.T + ch.noise_cov)
    try:
        return GaussianDist(mean, cov)
    except ValueError as err:
        raise ValueError(f"channel output is degenerate: {err}") from None


def _solve_spd(S: np.ndarray, R: np.ndarray) -> np.ndarray:
    """``S^{-1} R`` for symmetric PSD ``S``, jittering the diagonal when ``S`` is singular."""
    try:
        return sla.solve(S, R, assume_a="pos")
    except (np.linalg.LinAlgError, sla.LinAlgWarning):
        pass
    try:
        return sla.solve(S + JITTER * np.eye(len(S)), R, assume_a="pos")
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("output covariance is singular; cannot condition on it") from None


def _conditional(S_xx, S_xz, S_zz):
    """Gain ``G`` and covariance of ``X | Z`` for a jointly Gaussian pair."""
    G = _solve_spd(S_zz, S_xz.T).T
    cov = _sym(S_xx - G @ S_xz.T)
    return G, cov


def bayes_reverse(ch: LinearChannel, prior: GaussianDist) -> LinearChannel:
    """Exact Gaussian conditional ``X | Y`` under ``X ~ prior``, ``Y = ch(X)``, as a channel."""
    if ch.K != prior.K:
        raise ValueError("channel and prior dimensions differ")
    S, M = prior.cov, ch.M
    S_yy = _sym(M @ S @ M.T + ch.noise_cov)
    G, cov = _conditional(S, S @ M.T, S_yy)
    c = prior.mean - G @ (M @ prior.mean + ch.b)
    return LinearChannel(G, c, cov)


def local_bayes_reverse(ch: LinearChannel, prior: GaussianDist, part: Tripartition, labels=None) -> LinearChannel:
    """Recovery of a channel acting on ``part.A`` that conditions only on ``A`` and ``B``.

    ``prior`` is the distribution before the channel, either on the full space
    or a marginal whose coordinate ``j`` is site ``labels[j]``; only its
    ``A + B`` block is used.  The returned channel replaces ``x_A`` by a draw
    from ``X_A | (Y_A, X_B)`` and is the identity on ``B`` and ``C``.
    """
    A, B = list(part.A), list(part.B)
    K = ch.K
    if part.n_sites != K:
        raise ValueError(f"partition covers {part.n_sites} sites, channel has {K}")
    rest = np.ones(K, dtype=bool)
    rest[A] = False
    if (
        not np.allclose(ch.M[np.ix_(rest, rest)], np.eye(rest.sum()))
        or np.any(ch.M[np.ix_(A, rest)] != 0)
        or np.any(ch.M[np.ix_(rest, A)] != 0)
        or np.any(ch.b[rest] != 0)
        or np.any(ch.noise_cov[rest] != 0)
    ):
        raise ValueError("channel must act as the identity outside region A")
    labels = list(range(prior.K)) if labels is None else list(labels)
    pos = {s: j for j, s in enumerate(labels)}
    sub = prior.marginal([pos[s] for s in A + B])
    a = len(A)
    mu_a, mu_b = sub.mean[:a], sub.mean[a:]
    S_aa, S_ab, S_bb = sub.cov[:a, :a], sub.cov[:a, a:], sub.cov[a:, a:]
    M_aa, b_a, Q_aa = ch.M[np.ix_(A, A)], ch.b[A], ch.noise_cov[np.ix_(A, A)]
    S_zz = np.block([[M_aa @ S_aa @ M_aa.T + Q_aa, M_aa @ S_ab], [S_ab.T @ M_aa.T, S_bb]])
    S_xz = np.hstack([S_aa @ M_aa.T, S_ab])
    G, cov = _conditional(S_aa, S_xz, _sym(S_zz))
    c = mu_a - G @ np.concatenate([M_aa @ mu_a + b_a, mu_b])
    M = np.eye(K)
    M[np.ix_(A, A)] = G[:, :a]
    M[np.ix_(A, B)] = G[:, a:]
    b = np.zeros(K)
    b[A] = c
    Q = np.zeros((K, K))
    Q[np.ix_(A, A)] = cov
    return LinearChannel(M, b, Q)


def gaussian_kl(P: GaussianDist, Q: GaussianDist) -> float:
    """KL(P || Q) in nats."""
    if P.K != Q.K:
        raise ValueError("dimensions differ")
    try:
        cq = sla.cho_factor(Q.cov)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("reference covariance is singular") from None
    d = Q.mean - P.mean
    trace = np.trace(sla.cho_solve(cq, P.cov))
    maha = d @ sla.cho_solve(cq, d)
    logdet_q = 2 * np.sum(np.log(np.diag(cq[0])))
    logdet_p = np.linalg.slogdet(P.cov)[1]
    return max(0.5 * (trace + maha - P.K + logdet_q - logdet_p), 0.0)


def _logdet(S: np.ndarray, idx) -> float:
    if len(idx) == 0:
        return 0.0
    sign, val = np.linalg.slogdet(S[np.ix_(idx, idx)])
    if sign <= 0:
        raise np.linalg.LinAlgError(f"principal submatrix on {len(idx)} sites is singular")
    return val


def gaussian_cmi(P: GaussianDist, part: Tripartition) -> float:
    """Exact I(A:C|B) of a Gaussian, clipped at zero."""
    if part.n_sites != P.K:
        raise ValueError(f"partition covers {part.n_sites} sites, distribution has {P.K}")
    S = P.cov
    A, B, C = list(part.A), list(part.B), list(part.C)
    val = 0.5 * (_logdet(S, A + B) + _logdet(S, B + C) - _logdet(S, B) - _logdet(S, A + B + C))
    return max(val, 0.0)


def score(P: GaussianDist, x) -> np.ndarray:
    """Gradient of the log-density, ``-cov^{-1} (x - mean)``; ``x`` may be a batch."""
    x = np.asarray(x, dtype=float)
    return -sla.solve(P.cov, (x - P.mean).T, assume_a="pos").T


def logpdf(P: GaussianDist, x) -> np.ndarray:
    x = np.atleast_2d(x)
    d = x - P.mean
    cf = sla.cho_factor(P.cov)
    maha = np.einsum("ij,ij->i", d, sla.cho_solve(cf, d.T).T)
    logdet = 2 * np.sum(np.log(np.diag(cf[0])))
    return -0.5 * (maha + logdet + P.K * math.log(2 * math.pi))


@dataclass(frozen=True)
class MarkovFit:
    """Exponential CMI decay ``gamma * exp(-r / xi)`` fitted by least squares on ``ln cmi``.

    ``decaying`` is False (and ``xi`` infinite) when the fitted slope is not negative.
    """

    xi: float
    gamma: float
    residual: float
    decaying: bool = True


def markov_length_fit(rs, cmis, floor: float = 1e-14) -> MarkovFit:
    rs = np.asarray(rs, dtype=float)
    cmis = np.asarray(cmis, dtype=float)
    keep = cmis > floor
    if keep.sum() < 2:
        raise ValueError("need at least two points with positive CMI to fit a Markov length")
    r, y = rs[keep], np.log(cmis[keep])
    slope, intercept = np.polyfit(r, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * r + intercept)) ** 2)))
    if slope >= 0:
        return MarkovFit(math.inf, math.exp(intercept), residual, decaying=False)
    return MarkovFit(-1.0 / slope, math.exp(intercept), residual)


def gmrf_chain(K: int, coupling: float = 0.4, periodic: bool = False, diag: float = 1.0) -> GaussianDist:
    """Zero-mean chain with tridiagonal precision: ``diag`` on the diagonal, ``-coupling`` next to it."""
    prec = diag * np.eye(K)
    for i in range(K - 1):
        prec[i, i + 1] = prec[i + 1, i] = -coupling
    if periodic and K > 2:
        prec[0, K - 1] = prec[K - 1, 0] = -coupling
    return GaussianDist(np.zeros(K), _sym(np.linalg.inv(prec)))


def gmrf_grid(L: int, coupling: float = 0.2, periodic: bool = True, diag: float = 1.0) -> GaussianDist:
    """Zero-mean 2D field with 5-point precision on an ``L x L`` grid (row-major sites)."""
    K = L * L
    prec = diag * np.eye(K)
    for i in range(L):
        for j in range(L):
            s = i * L + j
            for di, dj in ((0, 1), (1, 0)):
                ii, jj = i + di, j + dj
                if ii >= L or jj >= L:
                    if not periodic or L <= 2:
                        continue
                    ii, jj = ii % L, jj % L
                n = ii * L + jj
                prec[s, n] = prec[n, s] = -coupling
    return GaussianDist(np.zeros(K), _sym(np.linalg.inv(prec)))


def cmi_sweep(P: GaussianDist, lat: Lattice, center, rs, k: int = 1) -> list[float]:
    """Exact CMI for the width-``r`` tripartitions around ``center``; stops once ``C`` is empty."""
    out = []
    for r in rs:
        part = build_tripartition(lat, center, k, r)
        out.append(gaussian_cmi(P, part) if part.C else 0.0)
    return out


@dataclass
class RecoveryResult:
    kl: float
    recovered: GaussianDist
    n_channels: int
    substeps: int
    step_cmis: list[float] = field(default_factory=list)


def multi_step_local_recovery(
    P0: GaussianDist, lat: Lattice, N: int, r: int, k: int = 1, t_max: float = 0.98
) -> RecoveryResult:
    """Noise ``P0`` region by region along the reorganized schedule, then undo it locally.

    Each of the ``N`` time steps on the uniform grid over ``[0, t_max]`` is split
    into the sub-steps of :func:`reorganize`; every region gets its own
    :func:`forward_step` channel.  The channels are then undone in exact reverse
    order by :func:`local_bayes_reverse` with buffer width ``r``, each built from
    the exactly propagated distribution that entered its forward channel.
    Returns ``KL(P0 || recovered)`` with bookkeeping.
    """
    if N < 1:
        raise ValueError("need at least one time step")
    if P0.K != lat.K:
        raise ValueError("distribution and lattice sizes differ")
    sched = reorganize(lat, k, r)
    times = np.linspace(0.0, t_max, N + 1)
    state = P0
    reversals = []
    step_cmis = []
    for n in range(N):
        for step in sched.substeps:
            layer = []
            worst = 0.0
            for R in step:
                part = shell_tripartition(lat.distance_to_region(R), R, r)
                ch = forward_step(times[n], times[n + 1], lat.K, sites=R)
                layer.append(local_bayes_reverse(ch, state, part))
                if part.C:
                    worst = max(worst, gaussian_cmi(state, part))
            for R in step:
                state = push(forward_step(times[n], times[n + 1], lat.K, sites=R), state)
            reversals.append(layer)
        step_cmis.append(worst)
    Q = state
    for layer in reversed(reversals):
        for rec in layer:
            Q = push(rec, Q)
    return RecoveryResult(gaussian_kl(P0, Q), Q, sum(map(len, reversals)), sched.M, step_cmis)
