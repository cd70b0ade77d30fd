"""End-to-end template creation and verification.

One call per lifecycle step: minutiae + skeleton -> log template (the
feature side), log template + key -> protected template (enrollment), and
template + fresh sample + key -> score/decision (verification).  The raw
features never leave this process; only the protected matrix and the key
identifier are returned for storage.
"""

from __future__ import annotations

from .encode import LogTemplate, log_transform, pair_features
from .matcher import match_templates
from .model import MinutiaeSet, Params, ProtectedTemplate, SkeletonImage
from .neighborhood import build_neighbor_table
from .project import ProjectionKey, generate_rp, project
from .ridgefeat import extract_features

__all__ = ["log_template_of", "enroll", "match_score", "verify"]

DEFAULT_VERIFY_THRESHOLD = 0.65


def log_template_of(ms: MinutiaeSet, skel: SkeletonImage, params: Params) -> LogTemplate:
    """Feature pipeline: sector neighbors -> ridge features -> pairing -> log."""
    nt = build_neighbor_table(ms, params.s)
    features = extract_features(ms, skel, nt)
    return log_transform(pair_features(features), params.b)


def enroll(ms: MinutiaeSet, skel: SkeletonImage, key: ProjectionKey) -> ProtectedTemplate:
    """Create the protected template for one impression under the given key."""
    if len(ms) == 0:
        raise ValueError("nothing to enroll: empty minutiae set")
    lt = log_template_of(ms, skel, key.params)
    return project(lt, generate_rp(key), key_id=key.key_id)


def match_score(enrolled: ProtectedTemplate, query: ProtectedTemplate) -> float:
    return match_templates(enrolled, query).score


def verify(
    template: ProtectedTemplate,
    ms: MinutiaeSet,
    skel: SkeletonImage,
    key: ProjectionKey,
    threshold: float = DEFAULT_VERIFY_THRESHOLD,
) -> tuple[float, bool]:
    """Score a fresh sample against a stored template; returns (score, accept).

    The key must be the one the template was enrolled under; comparing
    across keys is the revocability experiment, not normal verification.
    """
    if key.key_id != template.key_id:
        raise ValueError(
            f"key mismatch: template was enrolled under {template.key_id}, got {key.key_id}"
        )
    query = enroll(ms, skel, key)
    score = match_score(template, query)
    return score, score >= threshold
