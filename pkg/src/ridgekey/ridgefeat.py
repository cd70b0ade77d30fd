"""Ridge count and mean ridge orientation between minutiae pairs.

For every (reference, per-sector neighbor) pair the straight segment between
the two minutiae is rasterized onto the thinned skeleton.  Each maximal run
of ridge pixels met along the way is one ridge crossing; runs separated by a
single background pixel are merged to guard against stair-step double
counts, and runs closer than an exclusion radius to either endpoint are
dropped because they belong to the minutiae's own ridges.

Per crossing, the ridge tangent is estimated as the principal direction of
the skeleton pixels in a small window around the crossing and folded into
[0, 180) (ridge tangents are undirected).  The mean ridge orientation is the
rounded circular mean of (tangent - segment slope) over all crossings,
taken at doubled angles so that the wrap point carries no discontinuity;
when all differences share a half-plane this reduces to the plain
arithmetic mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import MinutiaeSet, SkeletonImage
from .neighborhood import NO_NEIGHBOR, NeighborTable

__all__ = [
    "RidgeCrossing",
    "RidgeFeatureMatrix",
    "bresenham_line",
    "local_ridge_direction",
    "ridge_crossings",
    "mean_ridge_orientation",
    "extract_features",
    "dilated_ridges",
    "ENDPOINT_EXCLUSION_PX",
    "TANGENT_WINDOW_PX",
]

ENDPOINT_EXCLUSION_PX = 3.0   # runs closer than this to an endpoint are the minutia's own ridge
TANGENT_WINDOW_PX = 3.0       # window radius for the principal-direction fit
RUN_MERGE_GAP = 1             # runs separated by <= this many background pixels merge


@dataclass(frozen=True)
class RidgeCrossing:
    """One ridge met along a query segment: position and undirected tangent."""

    point: tuple[float, float]
    tangent_deg: float  # in [0, 180)


@dataclass(frozen=True)
class RidgeFeatureMatrix:
    """n x s grids of ridge counts and mean ridge orientations.

    ``valid[i, j]`` is True iff sector j of reference i had a neighbor.
    Invalid cells and valid cells with no ridge in between both store (0, 0);
    ro entries are integers in [0, 360).
    """

    rc: np.ndarray     # int, shape (n, s)
    ro: np.ndarray     # int, shape (n, s)
    valid: np.ndarray  # bool, shape (n, s)

    def __post_init__(self):
        for name in ("rc", "ro", "valid"):
            arr = getattr(self, name).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if (self.rc < 0).any():
            raise ValueError("ridge counts must be non-negative")
        if (self.ro < 0).any() or (self.ro >= 360).any():
            raise ValueError("ridge orientations must lie in [0, 360)")


def bresenham_line(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Integer pixels of the segment from (x0, y0) to (x1, y1), inclusive."""
    points = []
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        points.append((x, y))
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
    return points


def local_ridge_direction(skel: SkeletonImage, cx: float, cy: float,
                          radius: float = TANGENT_WINDOW_PX) -> float:
    """Principal direction, in [0, 180), of skeleton pixels near (cx, cy).

    Fits the dominant axis of the ridge pixels within the given radius.
    Returns 0.0 when fewer than two pixels fall in the window (degenerate).
    """
    x_lo = max(0, int(math.floor(cx - radius)))
    x_hi = min(skel.width - 1, int(math.ceil(cx + radius)))
    y_lo = max(0, int(math.floor(cy - radius)))
    y_hi = min(skel.height - 1, int(math.ceil(cy + radius)))
    patch = skel.pixels[y_lo : y_hi + 1, x_lo : x_hi + 1]
    ys, xs = np.nonzero(patch)
    if xs.size == 0:
        return 0.0
    xs = xs + x_lo
    ys = ys + y_lo
    keep = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius * radius
    xs, ys = xs[keep], ys[keep]
    if xs.size < 2:
        return 0.0
    coords = np.stack([xs - xs.mean(), ys - ys.mean()])
    cov = coords @ coords.T
    evals, evecs = np.linalg.eigh(cov)
    vx, vy = evecs[:, np.argmax(evals)]
    return math.degrees(math.atan2(vy, vx)) % 180.0


def _merged_runs(on_ridge: np.ndarray) -> list[tuple[int, int]]:
    """Maximal True runs of the path flags, merging gaps of <= RUN_MERGE_GAP."""
    idx = np.nonzero(on_ridge)[0]
    if idx.size == 0:
        return []
    runs = []
    start = prev = int(idx[0])
    for k in idx[1:]:
        k = int(k)
        if k - prev <= RUN_MERGE_GAP + 1:
            prev = k
        else:
            runs.append((start, prev))
            start = prev = k
    runs.append((start, prev))
    return runs


def dilated_ridges(skel: SkeletonImage) -> np.ndarray:
    """Skeleton pixels grown by their 8-neighborhood.

    Two one-pixel-wide digital lines can cross between lattice sites without
    sharing a pixel, so contact along a rasterized segment is tested against
    this grown mask; otherwise ridge counts would depend on how the lattice
    happens to be aligned.
    """
    px = skel.pixels
    d = px.copy()
    d[1:, :] |= px[:-1, :]
    d[:-1, :] |= px[1:, :]
    d[:, 1:] |= px[:, :-1]
    d[:, :-1] |= px[:, 1:]
    d[1:, 1:] |= px[:-1, :-1]
    d[:-1, :-1] |= px[1:, 1:]
    d[1:, :-1] |= px[:-1, 1:]
    d[:-1, 1:] |= px[1:, :-1]
    return d


def ridge_crossings(
    skel: SkeletonImage,
    p1: tuple[float, float],
    p2: tuple[float, float],
    _contact: Optional[np.ndarray] = None,
) -> list[RidgeCrossing]:
    """Ridges crossed by the straight segment p1 -> p2 on the skeleton.

    One RidgeCrossing per merged run of ridge contact along the rasterized
    segment (contact = a ridge pixel within the path pixel's 8-neighborhood),
    excluding runs within ENDPOINT_EXCLUSION_PX of either endpoint.
    Crossings are returned in order of travel from p1 to p2.
    """
    x1, y1 = float(p1[0]), float(p1[1])
    x2, y2 = float(p2[0]), float(p2[1])
    if (x1, y1) == (x2, y2):
        raise ValueError("ridge_crossings needs two distinct points")
    for (px, py) in ((x1, y1), (x2, y2)):
        if not skel.in_bounds(px, py):
            raise ValueError(f"segment endpoint ({px}, {py}) outside {skel.width}x{skel.height} image")

    contact = dilated_ridges(skel) if _contact is None else _contact
    path = bresenham_line(round(x1), round(y1), round(x2), round(y2))
    px_arr = np.array(path)
    on_ridge = contact[px_arr[:, 1], px_arr[:, 0]]

    crossings = []
    for start, end in _merged_runs(on_ridge):
        seg = px_arr[start : end + 1]
        touch_px = seg[on_ridge[start : end + 1]]
        d1 = np.hypot(touch_px[:, 0] - x1, touch_px[:, 1] - y1).min()
        d2 = np.hypot(touch_px[:, 0] - x2, touch_px[:, 1] - y2).min()
        if min(d1, d2) <= ENDPOINT_EXCLUSION_PX:
            continue
        cx = float(touch_px[:, 0].mean())
        cy = float(touch_px[:, 1].mean())
        tangent = local_ridge_direction(skel, cx, cy)
        crossings.append(RidgeCrossing(point=(cx, cy), tangent_deg=tangent))
    return crossings


def mean_ridge_orientation(crossings: Sequence[RidgeCrossing], theta_line_deg: float) -> int:
    """Rounded circular mean of (tangent - segment slope), as an int in [0, 180).

    The mean is taken at doubled angles (tangents are undirected, so period
    180 becomes period 360), halved back, then folded modulo 180.  That fold
    keeps the representation continuous at perpendicular crossings, by far
    the common geometry; the unavoidable seam sits at parallel crossings,
    which transversal segments rarely produce.  If the doubled unit vectors
    cancel exactly (antipodal differences), the plain arithmetic mean of the
    folded differences is used instead.  Raises ValueError on an empty
    crossing sequence; callers store (rc, ro) = (0, 0) for that case.
    """
    if not crossings:
        raise ValueError("no ridge crossings: mean orientation undefined")
    diffs = np.array([c.tangent_deg - theta_line_deg for c in crossings])
    doubled = np.radians(2.0 * diffs)
    s, c = np.sin(doubled).sum(), np.cos(doubled).sum()
    if math.hypot(s, c) < 1e-9:
        mean = float(np.mean(diffs % 180.0))
    else:
        mean = math.degrees(math.atan2(s, c)) / 2.0
    return int(round(mean)) % 180


def extract_features(ms: MinutiaeSet, skel: SkeletonImage, nt: NeighborTable) -> RidgeFeatureMatrix:
    """Ridge count and mean ridge orientation per (reference, sector) cell.

    The neighbor table must have been built from the same minutiae set.
    """
    if nt.n != len(ms):
        raise ValueError(f"neighbor table built for {nt.n} minutiae, set has {len(ms)}")
    n, s = nt.n, nt.s
    rc = np.zeros((n, s), dtype=int)
    ro = np.zeros((n, s), dtype=int)
    valid = nt.has_neighbor()
    contact = dilated_ridges(skel)

    for i in range(n):
        ref = ms.minutiae[i]
        for j in range(s):
            k = nt.entries[i, j]
            if k == NO_NEIGHBOR:
                continue
            nb = ms.minutiae[k]
            crossings = ridge_crossings(skel, (ref.x, ref.y), (nb.x, nb.y), _contact=contact)
            if not crossings:
                continue  # same-ridge neighbors: keep (0, 0) but stay valid
            rc[i, j] = len(crossings)
            theta_line = math.degrees(math.atan2(nb.y - ref.y, nb.x - ref.x))
            ro[i, j] = mean_ridge_orientation(crossings, theta_line)

    return RidgeFeatureMatrix(rc=rc, ro=ro, valid=valid)
