"""Recursive 4-partition of the frequency square [0,K)^2 and time square [0,1)^2.

Two box families are indexed here.  Frequency boxes ("A" side) at level l
form a 2^(l+1) x 2^(l+1) grid of side K/2^(l+1).  Time boxes ("B" side)
follow the source convention where level s >= 1 forms a 2^(s-1) x 2^(s-1)
grid of side 1/2^(s-1); level 0 is the root box [0,1)^2, so levels 0 and 1
both denote the full square.  All boxes are half-open, [lo, lo+side).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

Side = Literal["A", "B"]


@dataclass(frozen=True)
class DomainBox:
    lo: tuple[float, float]
    side: tuple[float, float]

    def __post_init__(self):
        if self.side[0] <= 0 or self.side[1] <= 0:
            raise ValueError(f"box side lengths must be positive, got {self.side}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.lo[0] + 0.5 * self.side[0], self.lo[1] + 0.5 * self.side[1])


@dataclass(frozen=True)
class DomainIndex:
    side_of: Side
    level: int
    ix: int
    iy: int

    def __post_init__(self):
        if self.side_of not in ("A", "B"):
            raise ValueError(f"side_of must be 'A' or 'B', got {self.side_of!r}")
        if self.level < 0:
            raise ValueError(f"level must be >= 0, got {self.level}")
        n = grid_size(self.side_of, self.level)
        if not (0 <= self.ix < n and 0 <= self.iy < n):
            raise ValueError(
                f"index ({self.ix},{self.iy}) out of range for {self.side_of}-level "
                f"{self.level} (grid {n}x{n})"
            )


def grid_size(side_of: Side, level: int) -> int:
    """Boxes per axis for the given side and level."""
    if side_of == "A":
        return 2 ** (level + 1)
    return 1 if level == 0 else 2 ** (level - 1)


def subdomain(idx: DomainIndex, K: float, L: int) -> DomainBox:
    """Geometry of the box addressed by ``idx`` for frequency range ``K``.

    ``L`` bounds the admissible levels (0..L on either side).
    """
    if not 0 <= idx.level <= L:
        raise ValueError(f"level {idx.level} outside [0, {L}]")
    n = grid_size(idx.side_of, idx.level)
    if idx.side_of == "A":
        w = K / n
        return DomainBox(lo=(idx.ix * w, idx.iy * w), side=(w, w))
    w = 1.0 / n
    return DomainBox(lo=(idx.ix * w, idx.iy * w), side=(w, w))


def children(idx: DomainIndex) -> list[DomainIndex]:
    """The four boxes tiling ``idx`` at the next level.

    B-side level 0 cannot be subdivided through this call: level 1 denotes
    the same root box, and quartering starts at level 1 -> 2.
    """
    if idx.side_of == "B" and idx.level == 0:
        raise ValueError("B-side level 1 coincides with the root; subdivide from level 1")
    lv = idx.level + 1
    return [
        DomainIndex(idx.side_of, lv, 2 * idx.ix + a, 2 * idx.iy + b)
        for a in (0, 1)
        for b in (0, 1)
    ]


def parent(idx: DomainIndex) -> DomainIndex:
    """Inverse of :func:`children`."""
    if idx.level == 0:
        raise ValueError("level-0 root has no parent")
    if idx.side_of == "B" and idx.level == 1:
        return DomainIndex("B", 0, 0, 0)
    return DomainIndex(idx.side_of, idx.level - 1, idx.ix // 2, idx.iy // 2)


def lowrank_error_bound(side_a: float, side_b: float, r: int) -> float:
    """Constant-free factor gamma^(r^2) / (1 - gamma) of the truncation bound.

    gamma = e*pi*side_a*side_b / r^2 must be below 1 for the bound to apply.
    """
    if side_a <= 0 or side_b <= 0:
        raise ValueError("box sides must be positive")
    if r < 1:
        raise ValueError("interpolation order must be >= 1")
    gamma = math.e * math.pi * side_a * side_b / r**2
    if gamma >= 1.0:
        raise ValueError(
            f"bound inapplicable: gamma = {gamma:.6g} >= 1 "
            f"(sides {side_a} x {side_b}, r = {r})"
        )
    return gamma ** (r * r) / (1.0 - gamma)


def box_frame(lo: float, side: float, t):
    """Affine map of [lo, lo+side) onto the reference interval [-1/2, 1/2)."""
    return (np.asarray(t, dtype=np.float64) - lo) / side - 0.5


def box_cheb_points(lo: float, side: float, points1d: np.ndarray) -> np.ndarray:
    """Chebyshev nodes mapped from the reference interval into [lo, lo+side)."""
    return lo + side * (0.5 + points1d)
