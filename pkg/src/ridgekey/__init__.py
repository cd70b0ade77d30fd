"""Cancelable fingerprint templates from ridge features.

Pipeline: per-minutia sector neighborhoods -> ridge count / mean ridge
orientation on the thinned skeleton -> Cantor pairing -> base-b log ->
seeded Gaussian random projection.  Matching happens entirely in the
projected domain, so templates are revocable (re-issue under a new key) and
non-invertible (the projection is underdetermined).
"""

from .model import (
    Minutia,
    MinutiaeSet,
    Params,
    ProtectedTemplate,
    SkeletonImage,
    deserialize_template,
    format_minutiae,
    normalize_angle,
    parse_minutiae,
    parse_skeleton,
    serialize_template,
    write_pgm,
)
from .neighborhood import NeighborTable, build_neighbor_table, sector_of
from .ridgefeat import (
    RidgeCrossing,
    RidgeFeatureMatrix,
    extract_features,
    mean_ridge_orientation,
    ridge_crossings,
)
from .encode import (
    LogTemplate,
    PairedMatrix,
    cantor_pair,
    cantor_unpair,
    log_transform,
    pair_features,
)
from .project import (
    ProjectionKey,
    ProjectionMatrix,
    generate_rp,
    gram_statistics,
    load_key,
    null_space_of_projection,
    project,
    pseudo_inverse_attack,
    rank_of,
    save_key,
)
from .matcher import (
    MatchResult,
    SimilarityMatrix,
    coincident_maxima_mask,
    global_score,
    local_similarity,
    match_templates,
)
from .pipeline import enroll, log_template_of, match_score, verify
from .synth import (
    NoiseSpec,
    SynthSpec,
    SynthSubject,
    generate_population,
    generate_subject,
    write_dataset,
)
from . import evalharness

__version__ = "0.1.0"
