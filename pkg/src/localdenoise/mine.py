"""Mutual information neural estimation (MINE) with a small numpy MLP.

The statistics network ``T(x_a, x_s)`` is trained by gradient ascent on the
Donsker-Varadhan bound ``E_joint[T] - ln E_marginal[e^T]``.  Marginal pairs come
from permuting the ``x_s`` rows inside each minibatch.  The gradient of the
log-partition term uses a moving average of ``E[e^T]`` in the denominator to
remove the minibatch bias.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "MlpParams",
    "MineConfig",
    "MineResult",
    "MineDivergence",
    "init_mlp",
    "mlp_forward",
    "mlp_backward",
    "mine_estimate",
    "train_mine",
    "cmi_via_mine",
    "read_samples_csv",
]


class MineDivergence(FloatingPointError):
    pass


@dataclass
class MlpParams:
    widths: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.widths) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("layer count does not match widths")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (self.widths[i], self.widths[i + 1]) or b.shape != (self.widths[i + 1],):
                raise ValueError(f"layer {i} has incompatible shapes {W.shape}, {b.shape}")

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def init_mlp(widths, rng: np.random.Generator) -> MlpParams:
    weights = [rng.normal(0.0, math.sqrt(1.0 / n_in), size=(n_in, n_out)) for n_in, n_out in zip(widths, widths[1:])]
    biases = [np.zeros(n_out) for n_out in widths[1:]]
    return MlpParams(tuple(widths), weights, biases)


def mlp_forward(params: MlpParams, X: np.ndarray):
    """Scalar output per row and the activations needed for backprop (tanh hidden layers)."""
    acts = [X]
    h = X
    last = len(params.weights) - 1
    for i, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ W + b
        h = z if i == last else np.tanh(z)
        acts.append(h)
    return h[:, 0], acts


def mlp_backward(params: MlpParams, acts, grad_out: np.ndarray):
    """Gradients of ``sum(grad_out * output)`` with respect to weights and biases."""
    g = grad_out[:, None]
    gW, gb = [], []
    for i in range(len(params.weights) - 1, -1, -1):
        gW.append(acts[i].T @ g)
        gb.append(g.sum(axis=0))
        if i:
            g = (g @ params.weights[i].T) * (1.0 - acts[i] ** 2)
    return gW[::-1], gb[::-1]


@dataclass(frozen=True)
class MineConfig:
    batch_size: int = 256
    learning_rate: float = 1e-3
    iterations: int = 20_000
    ema_rate: float = 0.001
    seed: int = 0
    hidden: tuple[int, ...] = (64, 64)
    holdout: float = 0.2
    eval_shuffles: int = 10
    pad_zeros: bool = False

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch size must be at least 2")
        if not 0 < self.learning_rate < 1 or not 0 < self.ema_rate < 1:
            raise ValueError("learning and moving-average rates must lie in (0, 1)")
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        if not 0 <= self.holdout < 1:
            raise ValueError("holdout fraction must lie in [0, 1)")


@dataclass
class MineResult:
    estimate: float
    train_history: np.ndarray = field(repr=False)
    params: MlpParams = field(repr=False)


class _Adam:
    def __init__(self, arrays, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(a) for a in arrays]
        self.v = [np.zeros_like(a) for a in arrays]
        self.t = 0

    def ascend(self, arrays, grads):
        self.t += 1
        c1 = 1 - self.b1**self.t
        c2 = 1 - self.b2**self.t
        for a, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            a += self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _as_2d(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def _dv_bound(params: MlpParams, xa, xs, rng, shuffles: int) -> float:
    joint, _ = mlp_forward(params, np.hstack([xa, xs]))
    marg = []
    for _ in range(shuffles):
        perm = rng.permutation(len(xs))
        marg.append(mlp_forward(params, np.hstack([xa, xs[perm]]))[0])
    marg = np.concatenate(marg)
    return float(joint.mean() - (logsumexp(marg) - math.log(marg.size)))


def train_mine(xa, xs, cfg: MineConfig) -> MineResult:
    """Train the statistics network and return the bound evaluated on held-out pairs.

    ``xa`` and ``xs`` hold paired samples row by row.  Columns are standardized
    first (mutual information is invariant to that).  The returned estimate is
    the Donsker-Varadhan bound on the held-out fraction (all samples when
    ``cfg.holdout == 0``), with marginal pairs from ``cfg.eval_shuffles`` random
    permutations.  Deterministic for a fixed ``cfg.seed``.
    """
    with np.errstate(invalid="ignore", over="ignore"):
        return _train(xa, xs, cfg)


def _train(xa, xs, cfg: MineConfig) -> MineResult:
    xa, xs = _as_2d(xa), _as_2d(xs)
    n = len(xa)
    if len(xs) != n:
        raise ValueError("x_a and x_s must have the same number of rows")
    n_eval = int(round(cfg.holdout * n))
    if n - n_eval < cfg.batch_size:
        raise ValueError(f"{n - n_eval} training samples is fewer than the batch size {cfg.batch_size}")
    rng = np.random.default_rng(cfg.seed)

    def standardize(v):
        sd = v.std(axis=0)
        return (v - v.mean(axis=0)) / np.where(sd > 0, sd, 1.0)

    xa, xs = standardize(xa), standardize(xs)
    order = rng.permutation(n)
    train, held = order[n_eval:], order[:n_eval]
    params = init_mlp((xa.shape[1] + xs.shape[1], *cfg.hidden, 1), rng)
    opt = _Adam(params.arrays(), cfg.learning_rate)
    B = cfg.batch_size
    ema = None
    history = np.empty(cfg.iterations)
    for it in range(cfg.iterations):
        idx = train[rng.integers(0, len(train), size=B)]
        a, s = xa[idx], xs[idx]
        perm = rng.permutation(B)
        T, acts = mlp_forward(params, np.vstack([np.hstack([a, s]), np.hstack([a, s[perm]])]))
        t_joint, t_marg = T[:B], T[B:]
        e = np.exp(t_marg)
        mean_e = e.mean()
        if not np.isfinite(mean_e) or not np.all(np.isfinite(t_joint)):
            raise MineDivergence(f"iteration {it}: statistics network output is not finite")
        ema = mean_e if ema is None else (1 - cfg.ema_rate) * ema + cfg.ema_rate * mean_e
        history[it] = t_joint.mean() - math.log(mean_e)
        # ascent direction of mean(T_joint) - mean(e^T_marg) / ema
        grad_out = np.concatenate([np.full(B, 1.0 / B), -e / (B * ema)])
        gW, gb = mlp_backward(params, acts, grad_out)
        opt.ascend(params.arrays(), [*gW, *gb])
        if not params.all_finite():
            raise MineDivergence(f"iteration {it}: parameters became non-finite")
    ev = held if n_eval else train
    est = _dv_bound(params, xa[ev], xs[ev], rng, cfg.eval_shuffles)
    return MineResult(est, history, params)


def mine_estimate(xa, xs, cfg: MineConfig = MineConfig()) -> float:
    """Lower-bound estimate of ``I(X_A : X_S)`` in nats."""
    return train_mine(xa, xs, cfg).estimate


def cmi_via_mine(xa, xb, xc, cfg: MineConfig = MineConfig()) -> float:
    """``I(A:C|B) = I(A : BC) - I(A : B)`` from two MINE runs.

    Both runs use the same seed.  With ``cfg.pad_zeros`` the second run sees
    ``(x_B, 0, ..., 0)`` with one zero column per coordinate of ``C``, so both
    networks have identical input widths.
    """
    xa, xb, xc = _as_2d(xa), _as_2d(xb), _as_2d(xc)
    i_abc = mine_estimate(xa, np.hstack([xb, xc]), cfg)
    second = np.hstack([xb, np.zeros_like(xc)]) if cfg.pad_zeros else xb
    i_ab = mine_estimate(xa, second, cfg)
    return i_abc - i_ab


def read_samples_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        rows = rows[1:]
    return np.array([[float(v) for v in row] for row in rows if row])
