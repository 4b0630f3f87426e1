"""Classical toric code on an ``L x L`` torus.

Bits live on the ``2 L^2`` edges.  The edge leaving vertex ``(i, j)`` to the
right has index ``2 (i L + j)`` and the one leaving it downwards ``2 (i L + j) + 1``.

Loop configurations are XOR combinations of face boundaries (the four edges
around a plaquette), which is exactly the set of topologically trivial
closed loops.  Their anyon checks sit on the dual plaquettes, the four edges
meeting at a vertex: a closed loop crosses every check an even number of times,
and a single flipped edge lights up the two checks at its endpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .discrete import FlipChannel, LocalChannel, apply_flip
from .infotools import FiniteDist, cmi, entropy
from .lattice import Tripartition, shell_tripartition

__all__ = [
    "TorusCode",
    "AnyonConfig",
    "loop_dist",
    "sample_loops",
    "anyon_syndrome",
    "toric_cmi_sweep",
    "regional_entropy_via_anyons",
    "bypass_path_channels",
    "edge_tripartition",
    "gf2_rank",
]

MAX_EXACT_L = 3
MAX_REGION = 18


def gf2_rank(rows: np.ndarray) -> int:
    """Rank over GF(2) of a 0/1 matrix."""
    m = np.array(rows, dtype=np.uint8) % 2
    rank = 0
    n_rows, n_cols = m.shape
    for col in range(n_cols):
        pivot = next((r for r in range(rank, n_rows) if m[r, col]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        hits = np.flatnonzero(m[:, col])
        hits = hits[hits != rank]
        m[hits] ^= m[rank]
        rank += 1
        if rank == n_rows:
            break
    return rank


def gf2_nullspace(rows: np.ndarray) -> np.ndarray:
    """Basis (as rows) of ``{v : rows @ v = 0 mod 2}``."""
    m = np.array(rows, dtype=np.uint8) % 2
    n_rows, n_cols = m.shape
    pivots = []
    rank = 0
    for col in range(n_cols):
        pivot = next((r for r in range(rank, n_rows) if m[r, col]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        hits = np.flatnonzero(m[:, col])
        hits = hits[hits != rank]
        m[hits] ^= m[rank]
        pivots.append(col)
        rank += 1
    free = [c for c in range(n_cols) if c not in pivots]
    basis = np.zeros((len(free), n_cols), dtype=np.uint8)
    for k, f in enumerate(free):
        basis[k, f] = 1
        for r, pc in enumerate(pivots):
            basis[k, pc] = m[r, f]
    return basis


@dataclass(frozen=True)
class TorusCode:
    L: int

    def __post_init__(self):
        if self.L < 2:
            raise ValueError(f"torus needs L >= 2, got {self.L}")

    @property
    def K(self) -> int:
        return 2 * self.L**2

    def right(self, i: int, j: int) -> int:
        return 2 * ((i % self.L) * self.L + (j % self.L))

    def down(self, i: int, j: int) -> int:
        return self.right(i, j) + 1

    @cached_property
    def plaquettes(self) -> np.ndarray:
        """Face boundaries, shape ``(L^2, 4)``; face ``(i, j)`` has top-left corner ``(i, j)``."""
        out = []
        for i in range(self.L):
            for j in range(self.L):
                out.append([self.right(i, j), self.right(i + 1, j), self.down(i, j), self.down(i, j + 1)])
        return np.array(out)

    @cached_property
    def checks(self) -> np.ndarray:
        """Anyon checks (edges meeting at vertex ``(i, j)``), shape ``(L^2, 4)``."""
        out = []
        for i in range(self.L):
            for j in range(self.L):
                out.append([self.right(i, j), self.right(i, j - 1), self.down(i, j), self.down(i - 1, j)])
        return np.array(out)

    @staticmethod
    def _incidence(groups: np.ndarray, K: int) -> np.ndarray:
        H = np.zeros((len(groups), K), dtype=np.uint8)
        for row, edges in zip(H, groups):
            for e in edges:
                row[e] ^= 1
        return H

    @cached_property
    def plaquette_matrix(self) -> np.ndarray:
        return self._incidence(self.plaquettes, self.K)

    @cached_property
    def check_matrix(self) -> np.ndarray:
        return self._incidence(self.checks, self.K)

    @cached_property
    def edge_positions(self) -> np.ndarray:
        """Edge midpoints in doubled coordinates on the ``2L x 2L`` torus."""
        pos = np.zeros((self.K, 2), dtype=int)
        for i in range(self.L):
            for j in range(self.L):
                pos[self.right(i, j)] = (2 * i, 2 * j + 1)
                pos[self.down(i, j)] = (2 * i + 1, 2 * j)
        return pos

    def edge_distance(self, e1, e2) -> np.ndarray:
        """Chebyshev distance between edge midpoints, in lattice units rounded up."""
        p1 = self.edge_positions[np.atleast_1d(e1)][:, None, :]
        p2 = self.edge_positions[np.atleast_1d(e2)][None, :, :]
        d = np.abs(p1 - p2)
        d = np.minimum(d, 2 * self.L - d).max(axis=-1)
        return (d + 1) // 2

    def center_edge(self) -> int:
        c = self.L // 2
        return self.right(c, c)

    def states_to_bits(self, states: np.ndarray) -> np.ndarray:
        return (np.asarray(states)[:, None] >> np.arange(self.K)) & 1

    def bits_to_states(self, bits: np.ndarray) -> np.ndarray:
        return np.asarray(bits, dtype=np.int64) @ (1 << np.arange(self.K, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class AnyonConfig:
    """Check parities; ``checks`` names the (global or region) checks they belong to."""

    parities: np.ndarray
    checks: tuple[int, ...] = ()

    @property
    def n_anyons(self) -> int:
        return int(self.parities.sum())


def anyon_syndrome(code: TorusCode, x) -> AnyonConfig:
    x = np.asarray(x, dtype=np.uint8)
    if x.shape != (code.K,):
        raise ValueError(f"expected {code.K} edge bits, got shape {x.shape}")
    par = (code.check_matrix.astype(int) @ x) % 2
    return AnyonConfig(par.astype(np.uint8), tuple(range(code.L**2)))


def _loop_states(code: TorusCode) -> np.ndarray:
    L2 = code.L**2
    masks = code.bits_to_states(code.plaquette_matrix)
    subsets = np.arange(2**L2)
    states = np.zeros(subsets.size, dtype=np.int64)
    for f in range(L2):
        states ^= np.where((subsets >> f) & 1, masks[f], 0)
    return np.unique(states)


def loop_dist(code: TorusCode) -> FiniteDist:
    """Uniform distribution over trivial loop configurations (support ``2^(L^2 - 1)``)."""
    if code.L > MAX_EXACT_L:
        raise ValueError(f"exact loop distribution limited to L <= {MAX_EXACT_L}; use sample_loops")
    support = _loop_states(code)
    p = np.zeros(2**code.K)
    p[support] = 1.0 / support.size
    return FiniteDist(code.K, p)


def sample_loops(code: TorusCode, n: int, seed=None) -> np.ndarray:
    """``n`` uniform loop configurations as an ``(n, K)`` bit array."""
    rng = np.random.default_rng(seed)
    faces = rng.integers(0, 2, size=(n, code.L**2), dtype=np.uint8)
    return ((faces.astype(np.int64) @ code.plaquette_matrix) % 2).astype(np.uint8)


def edge_tripartition(code: TorusCode, A, r: int) -> Tripartition:
    A = tuple(np.atleast_1d(A).tolist())
    dist = code.edge_distance(np.arange(code.K), list(A)).min(axis=1)
    return shell_tripartition(dist, A, r)


def toric_cmi_sweep(code: TorusCode, ps, part: Tripartition) -> list[tuple[float, float]]:
    """Exact ``(p, I(A:C|B))`` rows for the loop distribution under independent edge flips."""
    P0 = loop_dist(code)
    rows = []
    for p in ps:
        Pp = apply_flip(FlipChannel(float(p), tuple(range(code.K))), P0)
        rows.append((float(p), cmi(Pp, part)))
    return rows


def _restricted_loop_space(code: TorusCode, Q) -> np.ndarray:
    return code.plaquette_matrix[:, list(Q)]


def regional_entropy_via_anyons(code: TorusCode, Q, p: float) -> float:
    """Entropy of the noisy loop marginal on edges ``Q`` from its anyon statistics.

    The loop configurations restricted to ``Q`` span a space of dimension
    ``z_Q``; the region's checks are a basis of the complementary parity
    constraints (plaquette checks inside ``Q`` plus any checks around holes).
    With flips ``e`` i.i.d. Bernoulli(``p``) on ``Q``, the syndrome ``m = H e``
    has probability ``Pr(m)`` and ``H(X_Q) = H(m) + z_Q ln 2``.
    """
    Q = list(Q)
    if len(Q) > MAX_REGION:
        raise ValueError(f"region of {len(Q)} edges exceeds the enumeration limit {MAX_REGION}")
    gens = _restricted_loop_space(code, Q)
    z = gf2_rank(gens)
    H = gf2_nullspace(gens)  # checks: orthogonal to every restricted loop
    n = len(Q)
    e = np.arange(2**n, dtype=np.int64)
    bits = (e[:, None] >> np.arange(n)) & 1
    weight = bits.sum(axis=1)
    if p == 0.0:
        pe = (weight == 0).astype(float)
    else:
        pe = np.exp(weight * math.log(p) + (n - weight) * math.log1p(-p)) if p < 1 else (weight == n) * 1.0
    if len(H):
        syn = ((bits @ H.T.astype(np.int64)) % 2) @ (1 << np.arange(len(H), dtype=np.int64))
        pm = np.bincount(syn, weights=pe, minlength=2 ** len(H))
    else:
        pm = np.array([pe.sum()])
    return entropy(FiniteDist.from_weights(len(H), pm)) + z * math.log(2)


def bypass_path_channels(code: TorusCode):
    """Local channels of the path that avoids the Markov-length divergence.

    Returns ``(reset, uniform_flip, plaquette_flip)``: each is a list of local
    channels to apply in order.  ``reset`` sends every edge to 0,
    ``uniform_flip`` flips every edge with probability 1/2 and
    ``plaquette_flip`` flips the four edges of each face together with
    probability 1/2.
    """
    reset_matrix = np.array([[1.0, 1.0], [0.0, 0.0]])
    reset = [LocalChannel((e,), reset_matrix) for e in range(code.K)]
    uniform = [FlipChannel(0.5, (e,)) for e in range(code.K)]
    plaq = []
    for face in code.plaquettes:
        sites = tuple(int(e) for e in face)
        n = 2 ** len(sites)
        T = 0.5 * np.eye(n)
        mask = (1 << len(sites)) - 1
        T[np.arange(n) ^ mask, np.arange(n)] += 0.5
        plaq.append(LocalChannel(sites, T))
    return reset, uniform, plaq


def apply_all(channels, P: FiniteDist) -> FiniteDist:
    for ch in channels:
        P = ch(P)
    return P
