"""Lattice geometry, tripartitions and the reorganization scheduler.

Sites of a ``d``-dimensional lattice of linear size ``L`` are numbered
row-major, so in 2D the site at coordinates ``(i, j)`` has index ``i * L + j``.
All distances are Chebyshev (l-infinity) distances, taken over periodic images
when the lattice is periodic.

A buffer of width ``r`` is the set of sites at distance ``1..r`` from ``A``, so
the first site of ``C`` sits at distance ``r + 1`` from ``A``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Lattice",
    "Tripartition",
    "ReorgSchedule",
    "shell_tripartition",
    "build_tripartition",
    "region_distance",
    "reorganize",
    "required_radius",
]

Region = tuple[int, ...]


@dataclass(frozen=True)
class Lattice:
    d: int
    L: int
    periodic: bool = True

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"only 1D and 2D lattices are supported, got d={self.d}")
        if self.L < 1:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def K(self) -> int:
        return self.L**self.d

    def coords(self, sites=None) -> np.ndarray:
        """Integer coordinates, shape ``(n, d)``; all sites when ``sites`` is None."""
        idx = np.arange(self.K) if sites is None else np.asarray(sites, dtype=int)
        if self.d == 1:
            return idx[:, None]
        return np.stack([idx // self.L, idx % self.L], axis=1)

    def site(self, coord) -> int:
        coord = (coord,) if np.isscalar(coord) else tuple(coord)
        if len(coord) != self.d:
            raise ValueError(f"expected {self.d} coordinates, got {coord}")
        if self.periodic:
            coord = tuple(c % self.L for c in coord)
        elif any(c < 0 or c >= self.L for c in coord):
            raise ValueError(f"coordinate {coord} outside open lattice of size {self.L}")
        idx = 0
        for c in coord:
            idx = idx * self.L + int(c)
        return idx

    def check_region(self, sites) -> Region:
        region = tuple(int(s) for s in sites)
        if len(set(region)) != len(region):
            raise ValueError(f"region has duplicate sites: {region}")
        bad = [s for s in region if s < 0 or s >= self.K]
        if bad:
            raise ValueError(f"sites {bad} are not on a lattice with {self.K} sites")
        return region

    def pairwise_distance(self, sites1, sites2) -> np.ndarray:
        c1 = self.coords(sites1)[:, None, :]
        c2 = self.coords(sites2)[None, :, :]
        delta = np.abs(c1 - c2)
        if self.periodic:
            delta = np.minimum(delta, self.L - delta)
        return delta.max(axis=-1)

    def distance(self, s1: int, s2: int) -> int:
        return int(self.pairwise_distance([s1], [s2])[0, 0])

    def distance_to_region(self, region) -> np.ndarray:
        """Distance from every site to the nearest site of ``region``."""
        return self.pairwise_distance(np.arange(self.K), region).min(axis=1)


@dataclass(frozen=True)
class Tripartition:
    """Disjoint regions ``A``, ``B`` (buffer of width ``r``) and ``C`` covering all sites."""

    A: Region
    B: Region
    C: Region
    r: int

    def __post_init__(self):
        a, b, c = set(self.A), set(self.B), set(self.C)
        if a & b or a & c or b & c:
            raise ValueError("tripartition regions overlap")
        if not self.A:
            raise ValueError("region A is empty")

    @property
    def n_sites(self) -> int:
        return len(self.A) + len(self.B) + len(self.C)

    @property
    def AB(self) -> Region:
        return self.A + self.B

    @property
    def BC(self) -> Region:
        return self.B + self.C


def shell_tripartition(distances: np.ndarray, A, r: int) -> Tripartition:
    """Tripartition from a precomputed distance-to-``A`` vector over all sites."""
    if r < 0:
        raise ValueError(f"buffer width must be nonnegative, got {r}")
    A = tuple(int(s) for s in A)
    in_a = np.zeros(len(distances), dtype=bool)
    in_a[list(A)] = True
    B = tuple(int(s) for s in np.flatnonzero(~in_a & (distances <= r)))
    C = tuple(int(s) for s in np.flatnonzero(~in_a & (distances > r)))
    return Tripartition(A, B, C, r)


def _block_offsets(k: int) -> range:
    return range(-((k - 1) // 2), k // 2 + 1)


def build_tripartition(lat: Lattice, center, k: int, r: int) -> Tripartition:
    """Tripartition with ``A`` the ``k``-block around ``center`` and ``B`` its width-``r`` shell.

    ``center`` is a site index or a coordinate tuple.
    """
    if k < 1 or k > lat.L:
        raise ValueError(f"block size k={k} must lie in [1, L={lat.L}]")
    if r < 0:
        raise ValueError(f"buffer width must be nonnegative, got {r}")
    if np.isscalar(center):
        if not 0 <= int(center) < lat.K:
            raise ValueError(f"center {center} is not a site of the lattice")
        center = tuple(lat.coords([int(center)])[0])
    A = []
    for offset in itertools.product(_block_offsets(k), repeat=lat.d):
        coord = tuple(c + o for c, o in zip(center, offset))
        A.append(lat.site(coord))  # open lattices raise when the block does not fit
    A = tuple(sorted(A))
    return shell_tripartition(lat.distance_to_region(A), A, r)


def region_distance(lat: Lattice, R1, R2) -> int:
    """Minimum pairwise Chebyshev distance between two nonempty regions."""
    if len(R1) == 0 or len(R2) == 0:
        raise ValueError("region_distance needs two nonempty regions")
    return int(lat.pairwise_distance(lat.check_region(R1), lat.check_region(R2)).min())


@dataclass(frozen=True)
class ReorgSchedule:
    substeps: tuple[tuple[Region, ...], ...]
    k: int
    r: int

    @property
    def M(self) -> int:
        return len(self.substeps)

    def regions(self):
        for step in self.substeps:
            yield from step


def _axis_colors(L: int, k: int, m: int, periodic: bool) -> list[tuple[int, range]]:
    # Blocks of length k along one axis (the last may be shorter), colored by
    # block index mod m.  On a periodic axis the blocks that would break the
    # separation across the seam get colors of their own.
    starts = list(range(0, L, k))
    blocks = [range(s, min(s + k, L)) for s in starts]
    if not periodic:
        return [(b % m, blk) for b, blk in enumerate(blocks)]
    q = (L // k) // m
    colors = []
    for b, blk in enumerate(blocks):
        colors.append((b % m, blk) if b < m * q else (m + b - m * q, blk))
    return colors


def reorganize(lat: Lattice, k: int, r: int) -> ReorgSchedule:
    """Group the ``k``-blocks of ``lat`` into sub-steps whose blocks are ``>= 2r + 1`` apart.

    Blocks are tiled from the origin and colored by their residue modulo
    ``ceil((2r + k) / k)`` along each axis; each color class is one sub-step.
    """
    if k < 1 or k > lat.L:
        raise ValueError(f"block size k={k} must lie in [1, L={lat.L}]")
    if r < 0:
        raise ValueError(f"separation must be nonnegative, got {r}")
    m = -(-(2 * r + k) // k)
    axis = _axis_colors(lat.L, k, m, lat.periodic)
    groups: dict[tuple[int, ...], list[Region]] = {}
    for combo in itertools.product(axis, repeat=lat.d):
        color = tuple(c for c, _ in combo)
        sites = tuple(
            sorted(lat.site(coord) for coord in itertools.product(*(blk for _, blk in combo)))
        )
        groups.setdefault(color, []).append(sites)
    substeps = tuple(tuple(groups[c]) for c in sorted(groups))
    return ReorgSchedule(substeps, k, r)


def required_radius(
    xi: float, N: int, K: int, eps: float, gamma: float = 1.0, with_N: bool = True
) -> int:
    """Buffer width ``ceil(2 xi ln(sqrt(gamma) N K / eps))`` that keeps the total TV below ``eps``.

    Returns 0 when the logarithm is nonpositive (the bound is then vacuous).
    ``with_N=False`` drops the step-count factor from the logarithm.
    """
    if min(xi, N, K, eps, gamma) <= 0:
        raise ValueError("all inputs to required_radius must be positive")
    arg = math.sqrt(gamma) * (N if with_N else 1) * K / eps
    if arg <= 1.0:
        return 0
    return math.ceil(2.0 * xi * math.log(arg) - 1e-12)


def check_schedule(lat: Lattice, sched: ReorgSchedule) -> list[str]:
    """Return a list of invariant violations (empty when the schedule is valid)."""
    problems = []
    seen = np.zeros(lat.K, dtype=int)
    for region in sched.regions():
        seen[list(region)] += 1
    if not np.all(seen == 1):
        problems.append(f"coverage counts {sorted(set(seen.tolist()))} instead of exactly once")
    for n, step in enumerate(sched.substeps):
        for R1, R2 in itertools.combinations(step, 2):
            dist = region_distance(lat, R1, R2)
            if dist < 2 * sched.r:
                problems.append(f"sub-step {n}: regions {R1} and {R2} only {dist} apart")
    return problems


def sites_of(regions: Sequence[Region]) -> Region:
    return tuple(s for R in regions for s in R)
