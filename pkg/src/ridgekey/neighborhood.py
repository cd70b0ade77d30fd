"""Sector partition around each minutia and per-sector nearest neighbors.

Each minutia in turn acts as a reference.  The plane around it is divided
into ``s`` sectors of equal angular width, counted anti-clockwise starting
from the reference minutia's own orientation (a ridge-based coordinate
system, so the partition rotates with the fingerprint).  Within every
sector the closest other minutia is selected; empty sectors stay empty.

Angles follow the math convention: x right, y up, atan2(dy, dx).  There is
deliberately no radius cutoff, so a sector's neighbor may be arbitrarily
far away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Minutia, MinutiaeSet

__all__ = ["NeighborTable", "sector_of", "build_neighbor_table"]

NO_NEIGHBOR = -1


@dataclass(frozen=True)
class NeighborTable:
    """Per-reference, per-sector nearest neighbor indices and distances.

    ``entries[i, j-1]`` is the index of the nearest minutia in sector j of
    reference i, or NO_NEIGHBOR (-1).  ``distances`` holds the matching
    Euclidean pixel distances, NaN where no neighbor exists.
    """

    n: int
    s: int
    entries: np.ndarray    # int, shape (n, s)
    distances: np.ndarray  # float, shape (n, s)

    def __post_init__(self):
        for name in ("entries", "distances"):
            arr = getattr(self, name)
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def has_neighbor(self) -> np.ndarray:
        return self.entries != NO_NEIGHBOR


def sector_of(reference: Minutia, other: Minutia, s: int) -> int:
    """Sector index in [1, s] of ``other`` relative to ``reference``.

    The reference axis coincides with the reference minutia's orientation;
    sectors are half-open intervals [lo, hi) of width 360/s counted
    anti-clockwise, so a point exactly on a boundary belongs to the
    higher-indexed sector.
    """
    if s < 2:
        raise ValueError(f"sector count s must be >= 2, got {s}")
    dx = other.x - reference.x
    dy = other.y - reference.y
    if dx == 0 and dy == 0:
        raise ValueError("coincident minutiae have no defined direction")
    rel = (math.degrees(math.atan2(dy, dx)) - reference.theta) % 360.0
    j = 1 + int(rel // (360.0 / s))
    return min(j, s)  # guard against rel==360 from float fold


def build_neighbor_table(ms: MinutiaeSet, s: int) -> NeighborTable:
    """Nearest neighbor per (reference, sector) over the whole minutiae set.

    Distance is Euclidean in pixels; ties are broken toward the lowest
    minutia index.  A reference is never its own neighbor.  With n <= 1 the
    table is all-empty.
    """
    if s < 2:
        raise ValueError(f"sector count s must be >= 2, got {s}")
    n = len(ms)
    entries = np.full((n, s), NO_NEIGHBOR, dtype=int)
    distances = np.full((n, s), np.nan)
    if n <= 1:
        return NeighborTable(n=n, s=s, entries=entries, distances=distances)

    pos = ms.positions()
    thetas = ms.thetas()
    dx = pos[:, 0][None, :] - pos[:, 0][:, None]   # dx[i, k] = x_k - x_i
    dy = pos[:, 1][None, :] - pos[:, 1][:, None]
    dist = np.hypot(dx, dy)
    rel = (np.degrees(np.arctan2(dy, dx)) - thetas[:, None]) % 360.0
    sector = np.minimum((rel // (360.0 / s)).astype(int), s - 1)  # 0-based

    for i in range(n):
        d_i = dist[i].copy()
        d_i[i] = np.inf  # never self
        for j in range(s):
            in_sector = (sector[i] == j) & np.isfinite(d_i) & (np.arange(n) != i)
            if not in_sector.any():
                continue
            cand = np.where(in_sector)[0]
            best = cand[np.argmin(d_i[cand])]  # argmin keeps the lowest index on ties
            entries[i, j] = best
            distances[i, j] = d_i[best]

    return NeighborTable(n=n, s=s, entries=entries, distances=distances)
