"""Seeded random projection and its security diagnostics.

The projection matrix RP is an s x t matrix of i.i.d. standard Gaussians
generated from a named, versioned deterministic stream: a SplitMix64
counter-based generator feeding Box-Muller.  The same key therefore always
regenerates the same matrix, which makes reproducibility contractual; the
version tag participates in the key identifier so a future generator change
cannot silently alias an old key.

Projecting a log template row onto RP (CT = LT . RP with t < s) is an
underdetermined linear map: any protected row has infinitely many preimages,
and the minimum-norm preimage recovered by the Moore-Penrose pseudo-inverse
generally differs from the true template.  The diagnostics here make that
statement executable: matrix rank, Gram-matrix statistics of the scaled
projection, null-space witnesses and the pseudo-inverse attack itself.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .model import Params, ProtectedTemplate
from .encode import LogTemplate

__all__ = [
    "RNG_VERSION",
    "ProjectionKey",
    "ProjectionMatrix",
    "generate_rp",
    "project",
    "rank_of",
    "pseudo_inverse_attack",
    "null_space_of_projection",
    "gram_statistics",
    "GramReport",
    "key_to_json",
    "key_from_json",
    "save_key",
    "load_key",
]

RNG_VERSION = "sm64bm-1"

_U64 = np.uint64
_MASK64 = (1 << 64) - 1
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)


def splitmix64(seed: int, counters: np.ndarray) -> np.ndarray:
    """SplitMix64 outputs for the given counter positions (vectorized)."""
    with np.errstate(over="ignore"):
        z = (_U64(seed & _MASK64) + (counters.astype(_U64) + _U64(1)) * _GOLDEN)
        z = (z ^ (z >> _U64(30))) * _MIX1
        z = (z ^ (z >> _U64(27))) * _MIX2
        return z ^ (z >> _U64(31))


def _uniform_stream(seed: int, start: int, count: int) -> np.ndarray:
    """count doubles in (0, 1] from the counter-based stream."""
    z = splitmix64(seed, np.arange(start, start + count, dtype=np.uint64))
    return ((z >> _U64(11)).astype(np.float64) + 1.0) * 2.0**-53


def derive_seed(master: int, *indices: int) -> int:
    """Derive a child seed from a master seed and an index path."""
    seed = master & _MASK64
    for idx in indices:
        seed = int(splitmix64(seed, np.array([idx], dtype=np.uint64))[0])
    return seed


@dataclass(frozen=True)
class ProjectionKey:
    """Everything needed to regenerate a projection deterministically.

    ``key_id`` is a stable digest of (rng version, seed, s, t); the seed
    itself never appears in templates, only this identifier.
    """

    seed: int
    s: int = 8
    t: int = 4
    b: float = 1.2

    def __post_init__(self):
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must fit in 64 bits")
        if not 1 <= self.t < self.s:
            raise ValueError(f"projected dimension t must satisfy 1 <= t < s, got t={self.t}, s={self.s}")

    @property
    def key_id(self) -> str:
        digest = hashlib.sha256(f"{RNG_VERSION}|{self.seed}|{self.s}|{self.t}".encode()).hexdigest()
        return f"{RNG_VERSION}:{digest[:16]}"

    @property
    def params(self) -> Params:
        return Params(s=self.s, b=self.b, t=self.t)


@dataclass(frozen=True)
class ProjectionMatrix:
    """s x t matrix of i.i.d. unit-variance, zero-mean Gaussian entries."""

    rp: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.rp, dtype=np.float64).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "rp", arr)

    @property
    def s(self) -> int:
        return self.rp.shape[0]

    @property
    def t(self) -> int:
        return self.rp.shape[1]


def generate_rp(key: ProjectionKey) -> ProjectionMatrix:
    """Regenerate the s x t Gaussian projection matrix from its key.

    Box-Muller over the SplitMix64 uniform stream; both outputs of each
    transform are consumed, interleaved, then laid out row-major.
    """
    n = key.s * key.t
    pairs = (n + 1) // 2
    u1 = _uniform_stream(key.seed, 0, pairs)
    u2 = _uniform_stream(key.seed, pairs, pairs)
    r = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * math.pi * u2
    vals = np.empty(2 * pairs)
    vals[0::2] = r * np.cos(ang)
    vals[1::2] = r * np.sin(ang)
    return ProjectionMatrix(rp=vals[:n].reshape(key.s, key.t))


def project(lt: Union[LogTemplate, np.ndarray], rp: ProjectionMatrix,
            key_id: str = "", b: float = 1.2) -> ProtectedTemplate:
    """CT = LT . RP, the cancelable template (n x t)."""
    if isinstance(lt, LogTemplate):
        mat, b = lt.lt, lt.b
    else:
        mat = np.atleast_2d(np.asarray(lt, dtype=np.float64))
    if mat.shape[1] != rp.s:
        raise ValueError(f"log template has {mat.shape[1]} columns, projection expects {rp.s}")
    ct = mat @ rp.rp
    params = Params(s=rp.s, b=b, t=rp.t)
    return ProtectedTemplate(ct=ct, key_id=key_id, params=params)


def rank_of(rp_like: Union[ProjectionMatrix, np.ndarray]) -> int:
    """Numerical rank: singular values above 1e-10 of the largest."""
    mat = rp_like.rp if isinstance(rp_like, ProjectionMatrix) else np.asarray(rp_like, dtype=float)
    if mat.size == 0:
        return 0
    svals = np.linalg.svd(mat, compute_uv=False)
    if svals[0] == 0.0:
        return 0
    return int(np.sum(svals > 1e-10 * svals[0]))


def pseudo_inverse_attack(ct: Union[ProtectedTemplate, np.ndarray], rp: ProjectionMatrix) -> np.ndarray:
    """Minimum-norm preimage estimate LT_hat = CT . pinv(RP).

    Diagnostic only: LT_hat reproduces CT but misses any component of the
    true log template outside the row space of RP^T, so comparing it against
    the true LT demonstrates non-recovery.
    """
    mat = ct.ct if isinstance(ct, ProtectedTemplate) else np.atleast_2d(np.asarray(ct, dtype=float))
    return mat @ np.linalg.pinv(rp.rp)


def null_space_of_projection(rp: ProjectionMatrix) -> np.ndarray:
    """Orthonormal basis (s x k) of row vectors v with v . RP = 0.

    Non-empty whenever rank(RP) < s, i.e. always for t < s: adding any such
    vector to a log template row leaves the protected template unchanged.
    """
    u, svals, _ = np.linalg.svd(rp.rp)
    tol = 1e-10 * (svals[0] if svals.size else 0.0)
    rank = int(np.sum(svals > tol))
    return u[:, rank:]


# ---------------------------------------------------------------------------
# Gram-matrix statistics (near-orthogonality of the scaled projection)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GramReport:
    """Empirical moments of W = RP^T RP and W' = RP RP^T over sampled keys.

    With entries rescaled to variance 1/s the theory says W is the identity
    in expectation (diagonal mean 1, off-diagonal mean 0, variances 2/s and
    1/s) while W' has diagonal mean t/s.  ``checks`` records whether the
    pooled empirical values fall inside those bands.
    """

    s: int
    t: int
    n_keys: int
    normalized: bool
    w_mean: np.ndarray       # (t, t) per-entry means
    w_var: np.ndarray        # (t, t) per-entry variances
    wp_mean: np.ndarray      # (s, s)
    wp_var: np.ndarray       # (s, s)
    w_diag_mean: float
    w_off_mean: float
    w_diag_var: float
    w_off_var: float
    wp_diag_mean: float
    checks: dict = field(default_factory=dict)

    def all_ok(self) -> bool:
        return all(self.checks.values())


def gram_statistics(keys: Sequence[ProjectionKey], normalize: bool = True) -> GramReport:
    """Sample W and W' over the given keys and compare against theory.

    Requires at least 100 keys sharing (s, t).  ``normalize`` applies the
    1/sqrt(s) rescale that brings unit-variance entries to the variance-1/s
    convention the expectation formulas are stated in.
    """
    if len(keys) < 100:
        raise ValueError(f"need at least 100 sampled keys, got {len(keys)}")
    s, t = keys[0].s, keys[0].t
    if any(k.s != s or k.t != t for k in keys):
        raise ValueError("all sampled keys must share the same (s, t)")

    ws = np.empty((len(keys), t, t))
    wps = np.empty((len(keys), s, s))
    for i, key in enumerate(keys):
        rp = generate_rp(key).rp
        if normalize:
            rp = rp / math.sqrt(s)
        ws[i] = rp.T @ rp
        wps[i] = rp @ rp.T

    var_entry = 1.0 / s if normalize else 1.0  # variance of a single RP entry
    exp_w_diag = s * var_entry
    exp_wp_diag = t * var_entry
    scale = exp_w_diag  # tolerance unit; 1.0 under the normalized convention

    w_mean, w_var = ws.mean(axis=0), ws.var(axis=0)
    wp_mean, wp_var = wps.mean(axis=0), wps.var(axis=0)

    diag = np.eye(t, dtype=bool)
    wp_diag = np.eye(s, dtype=bool)
    w_diag_mean = float(ws[:, diag].mean())
    w_off_mean = float(ws[:, ~diag].mean()) if t > 1 else 0.0
    w_diag_var = float(ws[:, diag].var())
    w_off_var = float(ws[:, ~diag].var()) if t > 1 else 0.0
    wp_diag_mean = float(wps[:, wp_diag].mean())

    var_w_diag = 2 * s * var_entry**2
    var_w_off = s * var_entry**2
    checks = {
        "w_diag_mean": abs(w_diag_mean - exp_w_diag) <= 0.05 * scale,
        "w_off_mean": abs(w_off_mean) <= 0.05 * scale,
        "w_diag_var": 0.5 * var_w_diag <= w_diag_var <= 1.5 * var_w_diag,
        "w_off_var": 0.5 * var_w_off <= w_off_var <= 1.5 * var_w_off,
        "wp_diag_mean": abs(wp_diag_mean - exp_wp_diag) <= 0.05 * scale,
    }
    return GramReport(
        s=s, t=t, n_keys=len(keys), normalized=normalize,
        w_mean=w_mean, w_var=w_var, wp_mean=wp_mean, wp_var=wp_var,
        w_diag_mean=w_diag_mean, w_off_mean=w_off_mean,
        w_diag_var=w_diag_var, w_off_var=w_off_var,
        wp_diag_mean=wp_diag_mean, checks=checks,
    )


# ---------------------------------------------------------------------------
# Key files
# ---------------------------------------------------------------------------

def key_to_json(key: ProjectionKey) -> str:
    doc = {
        "seed": key.seed,
        "s": key.s,
        "t": key.t,
        "b": key.b,
        "key_id": key.key_id,
        "rng_version": RNG_VERSION,
    }
    return json.dumps(doc, indent=1)


def key_from_json(text: str) -> ProjectionKey:
    doc = json.loads(text)
    version = doc.get("rng_version")
    if version != RNG_VERSION:
        raise ValueError(f"key was issued for rng_version {version!r}, this build is {RNG_VERSION!r}")
    key = ProjectionKey(seed=int(doc["seed"]), s=int(doc["s"]), t=int(doc["t"]), b=float(doc["b"]))
    if doc.get("key_id") != key.key_id:
        raise ValueError("key_id does not match key contents")
    return key


def save_key(key: ProjectionKey, path: Union[str, Path]) -> None:
    Path(path).write_text(key_to_json(key) + "\n")


def load_key(path: Union[str, Path]) -> ProjectionKey:
    return key_from_json(Path(path).read_text())
