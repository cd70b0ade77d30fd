"""Cantor pairing of ridge features and the log-uniformization step.

The pairing bijectively folds a (ridge count, mean ridge orientation) pair
of non-negative integers into a single non-negative integer; the pointwise
base-b logarithm then spreads the paired values to a usable dynamic range.
The inverse pairing exists and is exposed as a security diagnostic: paired
values are trivially invertible, which is exactly why the projection step
afterwards has to carry the non-invertibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .ridgefeat import RidgeFeatureMatrix

__all__ = [
    "PairedMatrix",
    "LogTemplate",
    "cantor_pair",
    "cantor_unpair",
    "pair_features",
    "log_transform",
]

IntOrArray = Union[int, np.ndarray]


@dataclass(frozen=True)
class PairedMatrix:
    """n x s grid of Cantor-paired ridge features with its validity mask."""

    cp: np.ndarray     # int64, shape (n, s)
    valid: np.ndarray  # bool, shape (n, s)

    def __post_init__(self):
        for name in ("cp", "valid"):
            arr = getattr(self, name).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if (self.cp < 0).any():
            raise ValueError("paired values must be non-negative")


@dataclass(frozen=True)
class LogTemplate:
    """n x s real matrix of log_b(paired value); zero cells stay zero."""

    lt: np.ndarray  # float64, shape (n, s)
    b: float

    def __post_init__(self):
        arr = np.asarray(self.lt, dtype=np.float64).copy()
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValueError("log template entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "lt", arr)

    @property
    def n(self) -> int:
        return self.lt.shape[0]

    @property
    def s(self) -> int:
        return self.lt.shape[1]


def cantor_pair(k1: IntOrArray, k2: IntOrArray) -> IntOrArray:
    """pi(k1, k2) = (k1+k2)(k1+k2+1)/2 + k2 on non-negative integers.

    Exact integer arithmetic; scalar inputs use Python's unbounded ints,
    array inputs use int64 (safe up to k1+k2 around 3e9, far beyond the
    feature range).
    """
    if isinstance(k1, np.ndarray) or isinstance(k2, np.ndarray):
        a = np.asarray(k1, dtype=np.int64)
        b = np.asarray(k2, dtype=np.int64)
        if (a < 0).any() or (b < 0).any():
            raise ValueError("cantor_pair requires non-negative inputs")
        w = a + b
        return w * (w + 1) // 2 + b
    a, b = int(k1), int(k2)
    if a < 0 or b < 0:
        raise ValueError(f"cantor_pair requires non-negative inputs, got ({k1}, {k2})")
    w = a + b
    return w * (w + 1) // 2 + b


def cantor_unpair(cp: IntOrArray) -> tuple[IntOrArray, IntOrArray]:
    """Invert the pairing: returns (k1, k2) with cantor_pair(k1, k2) == cp.

    Scalars use math.isqrt for exactness at any magnitude.  Arrays use a
    float sqrt with an integer fix-up step so the floor is exact.
    """
    if isinstance(cp, np.ndarray):
        c = np.asarray(cp, dtype=np.int64)
        if (c < 0).any():
            raise ValueError("cantor_unpair requires non-negative input")
        w = ((np.sqrt(8.0 * c.astype(np.float64) + 1.0) - 1.0) / 2.0).astype(np.int64)
        # correct any off-by-one from float rounding
        w = np.where((w + 1) * (w + 2) // 2 <= c, w + 1, w)
        w = np.where(w * (w + 1) // 2 > c, w - 1, w)
        t = w * (w + 1) // 2
        k2 = c - t
        k1 = w - k2
        return k1, k2
    c = int(cp)
    if c < 0:
        raise ValueError(f"cantor_unpair requires non-negative input, got {cp}")
    w = (math.isqrt(8 * c + 1) - 1) // 2
    t = w * (w + 1) // 2
    k2 = c - t
    k1 = w - k2
    return k1, k2


def pair_features(features: RidgeFeatureMatrix) -> PairedMatrix:
    """Apply the pairing cellwise to (rc, ro); the validity mask carries over.

    Cells with rc = ro = 0 (empty or zero-crossing sectors) pair to exactly 0.
    """
    cp = cantor_pair(features.rc.astype(np.int64), features.ro.astype(np.int64))
    return PairedMatrix(cp=cp, valid=features.valid)


def log_transform(pm: PairedMatrix, b: float) -> LogTemplate:
    """Pointwise log_b of the paired matrix.

    Cells with cp = 0 map to 0 rather than -inf, so empty sectors contribute
    nothing to the projection inner products downstream.
    """
    if not b > 1:
        raise ValueError(f"log base must be > 1, got {b}")
    cp = pm.cp.astype(np.float64)
    lt = np.zeros_like(cp)
    nz = pm.cp > 0
    lt[nz] = np.log(cp[nz]) / math.log(b)
    return LogTemplate(lt=lt, b=float(b))
