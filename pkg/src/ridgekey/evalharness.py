"""Verification-protocol scoring, error rates, and the security experiments.

Two pairing protocols are supported over an N-subject, M-impression dataset:

* FVC:    every impression pair within a subject is genuine (C(M,2) * N
          scores); imposter scores compare first impressions across subjects
          (C(N,2) scores).
* 1VS1:   one genuine score per subject (impression 1 vs 2, N scores);
          imposter scores as above (C(N,2)).

FMR(th) is the fraction of imposter scores >= th, FNMR(th) the fraction of
genuine scores < th; both are evaluated on a grid of all observed scores
plus midpoints (exact step functions, no binning), and the EER is found by
linear interpolation between the adjacent grid thresholds where FMR - FNMR
changes sign.

Scenario runs push every needed impression through the whole pipeline under
a key policy (one shared projection key, or one key per subject), and the
revocability experiment re-enrolls a single impression under many keys to
build the pseudo-imposter distribution.
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .encode import LogTemplate, log_transform, pair_features
from .matcher import match_templates
from .model import MinutiaeSet, Params, SkeletonImage, parse_minutiae, parse_skeleton
from .neighborhood import build_neighbor_table
from .pipeline import log_template_of
from .project import ProjectionKey, derive_seed, generate_rp, project
from .ridgefeat import extract_features

__all__ = [
    "ScoreSet",
    "EvalReport",
    "RevocabilityReport",
    "pair_protocol",
    "compute_eer",
    "fmr_at",
    "fnmr_at",
    "log_templates_for",
    "run_scenario",
    "run_trials",
    "revocability_experiment",
    "parameter_sweep",
    "load_dataset",
    "write_curves_csv",
    "write_scores_csv",
    "write_summary_json",
]

PROTOCOLS = ("fvc", "1vs1")
KEY_POLICIES = ("same_key", "per_user_key")

Impression = tuple[MinutiaeSet, SkeletonImage]
Dataset = Sequence[Sequence[Impression]]
Pair = tuple[tuple[int, int], tuple[int, int], str]


@dataclass(frozen=True)
class ScoreSet:
    """Genuine and imposter score lists for one protocol run."""

    genuine: np.ndarray
    imposter: np.ndarray
    protocol: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("genuine", "imposter"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class EvalReport:
    """Error-rate curves and their equal-error summary."""

    eer: float
    eer_threshold: float
    thresholds: np.ndarray
    fmr: np.ndarray
    fnmr: np.ndarray
    n_genuine: int
    n_imposter: int

    @property
    def gmr_at_eer(self) -> float:
        return 1.0 - self.eer


@dataclass(frozen=True)
class RevocabilityReport:
    """Pseudo-imposter statistics from re-enrolling one finger under many keys."""

    pseudo_scores: np.ndarray
    mean: float
    variance: float
    threshold: float
    fmr_at_threshold: float
    n_keys: int


# ---------------------------------------------------------------------------
# Protocols and error rates
# ---------------------------------------------------------------------------

def pair_protocol(n_subjects: int, n_impressions: int, protocol: str) -> list[Pair]:
    """Genuine/imposter pair list as ((subject, impression), ..., label)."""
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}, expected one of {PROTOCOLS}")
    if n_subjects < 2:
        raise ValueError(f"insufficient subjects for imposter pairs: {n_subjects}")
    if n_impressions < 2:
        raise ValueError(f"need at least 2 impressions per subject, got {n_impressions}")

    pairs: list[Pair] = []
    if protocol == "fvc":
        for si in range(n_subjects):
            for a in range(n_impressions):
                for b in range(a + 1, n_impressions):
                    pairs.append(((si, a), (si, b), "genuine"))
    else:  # 1vs1
        for si in range(n_subjects):
            pairs.append(((si, 0), (si, 1), "genuine"))
    for si in range(n_subjects):
        for sj in range(si + 1, n_subjects):
            pairs.append(((si, 0), (sj, 0), "imposter"))
    return pairs


def _threshold_grid(genuine: np.ndarray, imposter: np.ndarray) -> np.ndarray:
    scores = np.unique(np.concatenate([genuine, imposter]))
    mids = (scores[:-1] + scores[1:]) / 2.0
    lo, hi = scores[0] - 1.0, scores[-1] + 1.0
    return np.unique(np.concatenate([[lo], scores, mids, [hi]]))


def fmr_at(imposter: np.ndarray, threshold: float) -> float:
    imposter = np.asarray(imposter, dtype=float)
    return float(np.mean(imposter >= threshold)) if imposter.size else 0.0


def fnmr_at(genuine: np.ndarray, threshold: float) -> float:
    genuine = np.asarray(genuine, dtype=float)
    return float(np.mean(genuine < threshold)) if genuine.size else 0.0


def compute_eer(scores: Union[ScoreSet, tuple], imposter: Optional[Sequence[float]] = None) -> EvalReport:
    """Full FMR/FNMR sweep and interpolated equal error rate."""
    if isinstance(scores, ScoreSet):
        genuine, imposter = scores.genuine, scores.imposter
    else:
        genuine = np.asarray(scores, dtype=float)
        imposter = np.asarray(imposter, dtype=float)
    if genuine.size == 0 or imposter.size == 0:
        raise ValueError("both genuine and imposter score lists must be non-empty")

    thresholds = _threshold_grid(genuine, imposter)
    # score fraction >= / < threshold via sorted positions
    gs = np.sort(genuine)
    is_ = np.sort(imposter)
    fnmr = np.searchsorted(gs, thresholds, side="left") / gs.size
    fmr = 1.0 - np.searchsorted(is_, thresholds, side="left") / is_.size

    diff = fmr - fnmr  # non-increasing; starts at +1, ends at -1 thanks to sentinels
    k = int(np.argmax(diff <= 0))  # first grid point where FMR <= FNMR
    if diff[k] == 0.0:
        eer = float(fmr[k])
        eer_threshold = float(thresholds[k])
    else:
        f1, f2 = fmr[k - 1], fmr[k]
        g1, g2 = fnmr[k - 1], fnmr[k]
        alpha = (f1 - g1) / ((g2 - g1) - (f2 - f1))
        eer = float(f1 + alpha * (f2 - f1))
        eer_threshold = float(thresholds[k - 1] + alpha * (thresholds[k] - thresholds[k - 1]))
    return EvalReport(
        eer=eer, eer_threshold=eer_threshold, thresholds=thresholds,
        fmr=fmr, fnmr=fnmr, n_genuine=int(genuine.size), n_imposter=int(imposter.size),
    )


# ---------------------------------------------------------------------------
# Scenario runs (full pipeline under a key policy)
# ---------------------------------------------------------------------------

def _as_dataset(dataset) -> list[list[Impression]]:
    # accept SynthSubject lists as well as raw [[(ms, skel), ...], ...]
    return [list(getattr(subject, "impressions", subject)) for subject in dataset]


def log_templates_for(dataset, params: Params) -> list[list[LogTemplate]]:
    """Feature side of the pipeline for every impression (cacheable: the
    expensive part is key-independent)."""
    out = []
    for subject in _as_dataset(dataset):
        out.append([log_template_of(ms, skel, params) for ms, skel in subject])
    return out


def _keys_for(policy: str, master_seed: int, trial: int, n_subjects: int,
              params: Params) -> list[ProjectionKey]:
    if policy not in KEY_POLICIES:
        raise ValueError(f"unknown key policy {policy!r}, expected one of {KEY_POLICIES}")
    if policy == "same_key":
        key = ProjectionKey(seed=derive_seed(master_seed, 1, trial), s=params.s, t=params.t, b=params.b)
        return [key] * n_subjects
    return [
        ProjectionKey(seed=derive_seed(master_seed, 2, trial, si + 1), s=params.s, t=params.t, b=params.b)
        for si in range(n_subjects)
    ]


def run_scenario(
    dataset,
    params: Params,
    key_policy: str = "same_key",
    protocol: str = "fvc",
    master_seed: int = 0,
    trial: int = 0,
    lts: Optional[list[list[LogTemplate]]] = None,
) -> ScoreSet:
    """Project every needed impression and score all protocol pairs."""
    data = _as_dataset(dataset)
    n_subjects = len(data)
    counts = {len(subject) for subject in data}
    if len(counts) != 1:
        raise ValueError(f"subjects have differing impression counts: {sorted(counts)}")
    n_impressions = counts.pop()
    pairs = pair_protocol(n_subjects, n_impressions, protocol)

    if lts is None:
        lts = log_templates_for(data, params)
    keys = _keys_for(key_policy, master_seed, trial, n_subjects, params)
    rps = {key.key_id: generate_rp(key) for key in keys}

    needed = {idx for pair in pairs for idx in (pair[0], pair[1])}
    templates = {}
    for si, ii in sorted(needed):
        key = keys[si]
        templates[(si, ii)] = project(lts[si][ii], rps[key.key_id], key_id=key.key_id, b=params.b)

    genuine, imposter = [], []
    for a, b, label in pairs:
        try:
            score = match_templates(templates[a], templates[b]).score
        except ValueError as exc:
            raise RuntimeError(f"pair {a} x {b} failed: {exc}") from exc
        (genuine if label == "genuine" else imposter).append(score)

    return ScoreSet(
        genuine=np.array(genuine), imposter=np.array(imposter), protocol=protocol,
        metadata={
            "params": {"s": params.s, "b": params.b, "t": params.t},
            "key_policy": key_policy, "master_seed": master_seed, "trial": trial,
            "n_subjects": n_subjects, "n_impressions": n_impressions,
        },
    )


def run_trials(
    dataset,
    params: Params,
    key_policy: str = "same_key",
    protocol: str = "fvc",
    master_seed: int = 0,
    trials: int = 10,
    lts: Optional[list[list[LogTemplate]]] = None,
) -> list[ScoreSet]:
    """Repeat a scenario over derived per-trial key seeds (features cached)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if lts is None:
        lts = log_templates_for(dataset, params)
    return [
        run_scenario(dataset, params, key_policy, protocol, master_seed, trial, lts=lts)
        for trial in range(trials)
    ]


def revocability_experiment(
    impression: Impression,
    params: Params,
    n_keys: int,
    threshold: float,
    master_seed: int = 0,
) -> RevocabilityReport:
    """Re-enroll one impression under n_keys distinct keys vs. key 0.

    The resulting pseudo-imposter scores should sit far below genuine scores:
    a leaked template, once revoked and re-issued under a fresh key, must not
    match its own replacement.
    """
    if n_keys < 2:
        raise ValueError("revocability needs at least 2 keys")
    ms, skel = impression
    lt = log_template_of(ms, skel, params)
    keys = [
        ProjectionKey(seed=derive_seed(master_seed, 3, i), s=params.s, t=params.t, b=params.b)
        for i in range(n_keys + 1)
    ]
    base = project(lt, generate_rp(keys[0]), key_id=keys[0].key_id, b=params.b)
    scores = []
    for key in keys[1:]:
        other = project(lt, generate_rp(key), key_id=key.key_id, b=params.b)
        scores.append(match_templates(base, other).score)
    scores = np.array(scores)
    return RevocabilityReport(
        pseudo_scores=scores,
        mean=float(scores.mean()),
        variance=float(scores.var()),
        threshold=float(threshold),
        fmr_at_threshold=fmr_at(scores, threshold),
        n_keys=n_keys,
    )


def parameter_sweep(
    dataset,
    s_values: Sequence[int],
    b_values: Sequence[float],
    protocol: str = "fvc",
    key_policy: str = "same_key",
    master_seed: int = 0,
    trials: int = 1,
) -> list[dict]:
    """EER per (s, b) combination; t follows the t = s/2 rule.

    The expensive ridge-feature pass depends on s only, so paired matrices
    are cached per s and just re-logged for each b.
    """
    if not s_values or not b_values:
        raise ValueError("sweep value lists must be non-empty")
    rows = []
    for s in s_values:
        t = max(int(s) // 2, 1)
        paired = []
        for subject in _as_dataset(dataset):
            subj = []
            for ms, skel in subject:
                nt = build_neighbor_table(ms, int(s))
                subj.append(pair_features(extract_features(ms, skel, nt)))
            paired.append(subj)
        for b in b_values:
            params = Params(s=int(s), b=float(b), t=t)
            lts = [[log_transform(pm, params.b) for pm in subj] for subj in paired]
            reports = [
                compute_eer(score_set)
                for score_set in run_trials(dataset, params, key_policy, protocol,
                                            master_seed, trials, lts=lts)
            ]
            rows.append({
                "s": params.s, "b": params.b, "t": params.t,
                "eer": statistics.fmean(r.eer for r in reports),
            })
    return rows


# ---------------------------------------------------------------------------
# Dataset files and report emission
# ---------------------------------------------------------------------------

def load_dataset(root: Union[str, Path]) -> list[list[Impression]]:
    """Read a `<subject>/<impression>.min` + `.pgm` directory tree."""
    root = Path(root)
    if not root.is_dir():
        raise ValueError(f"dataset directory not found: {root}")
    problems = []
    dataset = []
    subject_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not subject_dirs:
        raise ValueError(f"no subject directories under {root}")
    for sub in subject_dirs:
        impressions = []
        min_files = sorted(sub.glob("*.min"))
        if not min_files:
            problems.append(f"{sub}: no .min files")
            continue
        for min_path in min_files:
            pgm_path = min_path.with_suffix(".pgm")
            if not pgm_path.exists():
                problems.append(f"{pgm_path}: missing skeleton for {min_path.name}")
                continue
            ms = parse_minutiae(min_path.read_text(),
                                subject_id=sub.name, impression_id=min_path.stem)
            skel = parse_skeleton(pgm_path.read_bytes())
            impressions.append((ms, skel))
        dataset.append(impressions)
    if problems:
        raise ValueError("dataset layout violations:\n  " + "\n  ".join(problems))
    return dataset


def write_curves_csv(report: EvalReport, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fmr", "fnmr"])
        for th, f, g in zip(report.thresholds, report.fmr, report.fnmr):
            writer.writerow([repr(float(th)), repr(float(f)), repr(float(g))])


def write_scores_csv(score_set: ScoreSet, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "score"])
        for s in score_set.genuine:
            writer.writerow(["genuine", repr(float(s))])
        for s in score_set.imposter:
            writer.writerow(["imposter", repr(float(s))])


def write_summary_json(
    reports: Sequence[EvalReport],
    score_sets: Sequence[ScoreSet],
    path: Union[str, Path],
) -> None:
    meta = dict(score_sets[0].metadata)
    meta.pop("trial", None)
    doc = {
        "eer": statistics.fmean(r.eer for r in reports),
        "eer_per_trial": [r.eer for r in reports],
        "gmr_at_eer": statistics.fmean(r.gmr_at_eer for r in reports),
        "counts": {"genuine": reports[0].n_genuine, "imposter": reports[0].n_imposter},
        "trials": len(reports),
        **meta,
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")
