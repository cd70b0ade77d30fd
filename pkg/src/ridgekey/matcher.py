"""Transformed-domain comparison of protected templates.

Every row of the enrolled template is scored against every row of the query
template with the Dice coefficient 2<u, v> / (|u|^2 + |v|^2).  A cell of the
resulting similarity matrix survives only if it is simultaneously its row's
and its column's maximum (a coinciding maximum, i.e. the two rows mutually
prefer each other); the global score is the sum of surviving similarities
divided by min(n, m).

The coincidence test requires the shared maximum to be attained at the cell
itself, with ties broken toward the lowest index, so each row and each
column contributes at most one surviving cell.  With continuous-valued
projections ties have measure zero and this agrees with comparing maxima by
value alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .model import ProtectedTemplate

__all__ = [
    "SimilarityMatrix",
    "MatchResult",
    "local_similarity",
    "coincident_maxima_mask",
    "global_score",
    "match_templates",
]


@dataclass(frozen=True)
class SimilarityMatrix:
    """n x m grid of per-row Dice similarities in [-1, 1]."""

    sim: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.sim, dtype=np.float64).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "sim", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.sim.shape


@dataclass(frozen=True)
class MatchResult:
    """Global score plus the mask and filtered matrix it came from."""

    score: float
    filtered: np.ndarray
    mask: np.ndarray


def _rows_of(t: Union[ProtectedTemplate, np.ndarray]) -> np.ndarray:
    mat = t.ct if isinstance(t, ProtectedTemplate) else np.atleast_2d(np.asarray(t, dtype=float))
    return mat


def local_similarity(ct: Union[ProtectedTemplate, np.ndarray],
                     qt: Union[ProtectedTemplate, np.ndarray]) -> SimilarityMatrix:
    """Dice similarity of every enrolled row against every query row.

    Pairs where both rows are all-zero score 0 instead of 0/0.
    """
    a = _rows_of(ct)
    b = _rows_of(qt)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"template widths differ: {a.shape[1]} vs {b.shape[1]}")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("cannot compare empty templates")
    inner = a @ b.T
    na = np.einsum("ij,ij->i", a, a)
    nb = np.einsum("ij,ij->i", b, b)
    denom = na[:, None] + nb[None, :]
    sim = np.divide(2.0 * inner, denom, out=np.zeros_like(inner), where=denom > 0)
    return SimilarityMatrix(sim=sim)


def coincident_maxima_mask(sm: Union[SimilarityMatrix, np.ndarray]) -> np.ndarray:
    """Boolean mask of cells that are both their row's and column's maximum.

    np.argmax picks the first (lowest-index) cell on ties, so at most one
    cell per row and per column is ever set.
    """
    sim = sm.sim if isinstance(sm, SimilarityMatrix) else np.atleast_2d(np.asarray(sm, dtype=float))
    row_best = np.argmax(sim, axis=1)   # per row i: column of its maximum
    col_best = np.argmax(sim, axis=0)   # per column j: row of its maximum
    n, m = sim.shape
    mask = np.zeros((n, m), dtype=bool)
    rows = np.arange(n)
    hits = col_best[row_best[rows]] == rows
    mask[rows[hits], row_best[rows[hits]]] = True
    return mask


def global_score(sm: Union[SimilarityMatrix, np.ndarray]) -> MatchResult:
    """Sum of coinciding-maxima similarities over min(n, m)."""
    sim = sm.sim if isinstance(sm, SimilarityMatrix) else np.atleast_2d(np.asarray(sm, dtype=float))
    mask = coincident_maxima_mask(sim)
    filtered = sim * mask
    score = float(filtered.sum() / min(sim.shape))
    return MatchResult(score=score, filtered=filtered, mask=mask)


def match_templates(ct: Union[ProtectedTemplate, np.ndarray],
                    qt: Union[ProtectedTemplate, np.ndarray]) -> MatchResult:
    """Full comparison of two protected templates (local + global stage)."""
    return global_score(local_similarity(ct, qt))
