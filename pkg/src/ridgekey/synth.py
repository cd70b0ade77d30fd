"""Deterministic synthetic fingerprints: skeletons with planted minutiae.

Subjects are built from a vector model, not from images: ridges are smooth
parametric curves (parallel flow lines with an optional seeded sinusoidal
waviness), minutiae are planted as ridge endings (the curve stops there) or
bifurcations (a short branch peels off), and the one-pixel-wide skeleton is
rasterized from the curves, so the thinned property holds by construction
and every planted minutia sits on a ridge pixel with its orientation aligned
to the local flow.

Impressions re-derive the same geometry under a sampled perturbation: a
rigid rotation + translation applied to curves and minutiae alike in
continuous coordinates (then re-rasterized), minutiae slides along their
ridge, orientation jitter, dropped minutiae (the skeleton keeps the ridge
ending, the list loses the entry, like an extractor miss) and spurious
detections placed mid-ridge.  Everything is deterministic in (seed,
impression index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .model import Minutia, MinutiaeSet, SkeletonImage, format_minutiae, write_pgm
from .project import derive_seed

__all__ = [
    "NoiseSpec",
    "SynthSpec",
    "SynthSubject",
    "generate_subject",
    "generate_population",
    "write_dataset",
    "zero_noise",
    "moderate_noise",
    "default_population_spec",
]

_RASTER_STEP = 0.45  # curve sampling step in px; < 0.5 keeps rasterized curves 8-connected


@dataclass(frozen=True)
class NoiseSpec:
    """Per-impression perturbation magnitudes; all rates in [0, 1]."""

    rotation_deg_range: float = 0.0
    translation_px_range: float = 0.0
    theta_jitter_deg: float = 0.0
    position_jitter_px: float = 0.0
    drop_rate: float = 0.0
    spurious_rate: float = 0.0

    def __post_init__(self):
        for name in ("drop_rate", "spurious_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic subject."""

    seed: int
    width: int = 320
    height: int = 320
    ridge_period: float = 9.0
    orientation_field: str = "smooth-random"  # or "constant"
    field_angle_deg: Optional[float] = None   # base flow angle; seeded when None
    n_minutiae: int = 30
    min_separation_px: float = 18.0
    bifurcation_fraction: float = 0.3
    margin_px: float = 60.0
    layout: str = "uniform"                          # "uniform" | "clustered" | "ring" placement
    period_jitter: float = 0.0                       # per-subject ridge period spread, px
    boundary_margin_deg: float = 0.0                 # keep near-neighbor angles off sector-grid boundaries
    wave_amp: tuple[float, float] = (0.4, 0.9)       # waviness amplitude, in ridge periods
    wavelength: tuple[float, float] = (110.0, 180.0)  # waviness wavelength range, px
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        if self.ridge_period < 4:
            raise ValueError(f"ridge period must be >= 4 px, got {self.ridge_period}")
        if self.orientation_field not in ("constant", "smooth-random"):
            raise ValueError(f"unknown orientation field {self.orientation_field!r}")
        if self.n_minutiae < 0:
            raise ValueError("n_minutiae must be non-negative")


@dataclass(frozen=True)
class SynthSubject:
    """Ground truth plus derived impressions for one synthetic finger."""

    spec: SynthSpec
    ground_truth: tuple[MinutiaeSet, SkeletonImage]
    impressions: tuple[tuple[MinutiaeSet, SkeletonImage], ...]
    transforms: tuple[tuple[float, float, float], ...]  # (angle_deg, tx, ty) per impression


def zero_noise() -> NoiseSpec:
    return NoiseSpec()


def moderate_noise() -> NoiseSpec:
    """The default evaluation operating point: extractor-like noise."""
    return NoiseSpec(theta_jitter_deg=5.0, position_jitter_px=2.0, drop_rate=0.10)


def default_population_spec(seed: int = 0) -> SynthSpec:
    """The evaluation operating point used by the harness and the CLI.

    Geometry chosen so the desk-scale population exercises the matcher in
    its intended regime: enough minutiae that a dropped one still leaves
    candidates per sector, spacing that keeps jitter-induced angle noise
    below the sector quantization, and near-neighbor directions planted off
    the sector-grid boundaries.
    """
    return SynthSpec(
        seed=seed,
        width=384,
        height=384,
        ridge_period=9.0,
        n_minutiae=30,
        min_separation_px=19.0,
        margin_px=48.0,
        bifurcation_fraction=0.15,
        wave_amp=(0.5, 1.0),
        wavelength=(100.0, 160.0),
        boundary_margin_deg=8.0,
        noise=moderate_noise(),
    )


# ---------------------------------------------------------------------------
# Vector geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Flow:
    """Ridge flow model: parallel curves offset along the field normal.

    Curve k at arc parameter u is  center + u*tangent + (k*period + wave(u))*normal,
    with wave(u) = amp * sin(2*pi*u/wavelength + phase) shared by all curves
    so spacing stays constant.
    """

    phi_deg: float
    period: float
    amp: float
    wavelength: float
    phase: float
    center: tuple[float, float]

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        phi = math.radians(self.phi_deg)
        t = np.array([math.cos(phi), math.sin(phi)])
        n = np.array([-math.sin(phi), math.cos(phi)])
        return t, n

    def wave(self, u):
        return self.amp * np.sin(2 * math.pi * u / self.wavelength + self.phase)

    def point(self, k: int, u) -> np.ndarray:
        t, n = self.axes()
        u = np.asarray(u, dtype=float)
        off = k * self.period + self.wave(u)
        return self.center + np.outer(u, t) + np.outer(off, n)

    def tangent_deg(self, u: float) -> float:
        """Direction (deg) of the curve at u, pointing toward increasing u."""
        slope = self.amp * (2 * math.pi / self.wavelength) * math.cos(
            2 * math.pi * u / self.wavelength + self.phase
        )
        return (self.phi_deg + math.degrees(math.atan(slope))) % 360.0


@dataclass
class _PlantedMinutia:
    ridge: int          # curve index k
    u: float            # arc parameter on the curve
    kind: str           # "ending" | "bifurcation"
    into_positive_u: bool = True   # for endings: drawn side; for bifurcations: theta sign
    branch_delta_deg: float = 0.0  # bifurcations: branch angle offset from tangent


@dataclass
class _Geometry:
    """Seed-derived subject geometry: flow field plus minutiae plan."""

    flow: _Flow
    u_extent: float
    ridge_range: tuple[int, int]         # inclusive curve index range
    minutiae: list[_PlantedMinutia]
    branch_len: float


def _build_geometry(spec: SynthSpec, rng: np.random.Generator) -> _Geometry:
    w, h = spec.width, spec.height
    center = (w / 2.0, h / 2.0)
    phi = spec.field_angle_deg
    if phi is None:
        phi = float(rng.uniform(0.0, 180.0))
    period = spec.ridge_period + float(rng.uniform(-spec.period_jitter, spec.period_jitter))
    period = max(period, 4.0)
    if spec.orientation_field == "constant":
        amp, wavelength, phase = 0.0, 200.0, 0.0
    else:
        amp = float(rng.uniform(*spec.wave_amp)) * period
        wavelength = float(rng.uniform(*spec.wavelength))
        phase = float(rng.uniform(0.0, 2 * math.pi))
    flow = _Flow(phi_deg=phi, period=period, amp=amp,
                 wavelength=wavelength, phase=phase, center=center)

    u_extent = math.hypot(w, h) / 2.0 + 40.0
    k_max = int(math.ceil((math.hypot(w, h) / 2.0 + amp + 10.0) / period))

    plant_radius = min(w, h) / 2.0 - spec.margin_px
    if plant_radius <= period and spec.n_minutiae > 0:
        raise ValueError(f"image {w}x{h} too small to plant minutiae")

    # ridge offsets whose band touches the planting disk
    k_usable = int((plant_radius - 2.0 - amp) // period)
    t_ax, n_ax = flow.axes()
    c_vec = np.array(center)

    # clustered layouts mimic the heterogeneous local density of real prints,
    # which is what makes rows of one subject distinguishable from each other
    if spec.layout == "clustered":
        n_centers = max(2, round(spec.n_minutiae / 6))
        centers = []
        for _ in range(400):
            if len(centers) >= n_centers:
                break
            r = 0.75 * plant_radius * math.sqrt(rng.random())
            a = rng.uniform(0.0, 2 * math.pi)
            cand = c_vec + r * np.array([math.cos(a), math.sin(a)])
            if all(np.hypot(*(cand - q)) >= 60.0 for q in centers):
                centers.append(cand)
    elif spec.layout not in ("uniform", "ring"):
        raise ValueError(f"unknown layout {spec.layout!r}")

    planted: list[_PlantedMinutia] = []
    positions: list[np.ndarray] = []
    per_ridge: dict[int, int] = {}

    attempts = 0
    max_attempts = 4000 + 400 * spec.n_minutiae
    while len(planted) < spec.n_minutiae:
        attempts += 1
        if attempts > max_attempts or k_usable < 0:
            raise ValueError(
                f"cannot place {spec.n_minutiae} minutiae with separation "
                f"{spec.min_separation_px} px in a {w}x{h} image"
            )
        if spec.layout == "clustered":
            target = centers[rng.integers(len(centers))] + rng.normal(0.0, 24.0, 2)
        elif spec.layout == "ring":
            # boundary-heavy placement: edge minutiae keep stable empty sectors
            if rng.random() < 0.6:
                r = plant_radius * rng.uniform(0.78, 1.0)
            else:
                r = plant_radius * math.sqrt(rng.random()) * 0.62
            a = rng.uniform(0.0, 2 * math.pi)
            target = c_vec + r * np.array([math.cos(a), math.sin(a)])
        else:
            r = plant_radius * math.sqrt(rng.random())
            a = rng.uniform(0.0, 2 * math.pi)
            target = c_vec + r * np.array([math.cos(a), math.sin(a)])
        u = float((target - c_vec) @ t_ax)
        k = int(round((float((target - c_vec) @ n_ax) - float(flow.wave(u))) / period))
        if abs(k) > k_usable or per_ridge.get(k, 0) >= 3:
            continue
        p = flow.point(k, u)[0]
        if math.hypot(p[0] - center[0], p[1] - center[1]) > plant_radius:
            continue
        if any(np.hypot(*(p - q)) < spec.min_separation_px for q in positions):
            continue
        if spec.boundary_margin_deg > 0.0 and positions:
            # noise robustness: directions to the nearest few minutiae should
            # not sit right on a 45-degree sector boundary of the flow frame
            dists = np.array([math.hypot(*(p - q)) for q in positions])
            near = np.argsort(dists)[:3]
            margin = spec.boundary_margin_deg
            tang = flow.tangent_deg(u)
            ok = True
            for qi in near:
                q = positions[qi]
                ang = math.degrees(math.atan2(q[1] - p[1], q[0] - p[0]))
                for ref_ang in (tang, flow.tangent_deg(float((q - c_vec) @ t_ax))):
                    rel = (ang - ref_ang) % 45.0
                    if min(rel, 45.0 - rel) < margin:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                continue
        planted.append(_PlantedMinutia(ridge=k, u=u, kind="ending"))
        positions.append(p)
        per_ridge[k] = per_ridge.get(k, 0) + 1

    # kinds and drawn sides: ridges hosting several minutiae keep them all as
    # endings (alternating drawn intervals); lone minutiae may bifurcate
    by_ridge: dict[int, list[_PlantedMinutia]] = {}
    for m in planted:
        by_ridge.setdefault(m.ridge, []).append(m)
    for k, group in sorted(by_ridge.items()):
        group.sort(key=lambda m: m.u)
        if len(group) == 1 and rng.random() < spec.bifurcation_fraction:
            m = group[0]
            m.kind = "bifurcation"
            m.into_positive_u = bool(rng.random() < 0.5)
            m.branch_delta_deg = float(rng.choice([-20.0, 20.0]))
        else:
            first_side_positive = bool(rng.random() < 0.5)
            for idx, m in enumerate(group):
                # alternate so every cut borders exactly one drawn interval
                m.into_positive_u = first_side_positive if idx % 2 == 0 else not first_side_positive

    return _Geometry(flow=flow, u_extent=u_extent, ridge_range=(-k_max, k_max),
                     minutiae=planted, branch_len=1.8 * period)


def _drawn_intervals(geom: _Geometry, ridge: int, cuts: list[tuple[float, bool]]) -> list[tuple[float, float]]:
    """Drawn u-intervals of one ridge given its (cut position, keep-positive) list."""
    U = geom.u_extent
    if not cuts:
        return [(-U, U)]
    cuts = sorted(cuts)
    intervals = []
    # alternation driven by the first cut's drawn side
    drawn_before_first = not cuts[0][1]
    lo = -U
    drawing = drawn_before_first
    for u, _ in cuts:
        if drawing:
            intervals.append((lo, u))
        lo = u
        drawing = not drawing
    if drawing:
        intervals.append((lo, U))
    return intervals


def _polylines(geom: _Geometry, slides: Optional[dict[int, float]] = None) -> list[np.ndarray]:
    """All curve pieces (as sampled point arrays) for the subject's skeleton.

    ``slides`` optionally moves minutia mi's arc position by slides[mi]
    (position jitter along the ridge, keeping skeleton and list consistent).
    """
    slides = slides or {}
    flow = geom.flow
    lines: list[np.ndarray] = []

    cuts_by_ridge: dict[int, list[tuple[float, bool]]] = {}
    branch_specs: list[tuple[int, float, float]] = []  # (ridge, u, branch angle)
    for mi, m in enumerate(geom.minutiae):
        u = m.u + slides.get(mi, 0.0)
        if m.kind == "ending":
            cuts_by_ridge.setdefault(m.ridge, []).append((u, m.into_positive_u))
        else:
            base = 0.0 if m.into_positive_u else 180.0
            ang = (flow.tangent_deg(u) + base + m.branch_delta_deg) % 360.0
            branch_specs.append((m.ridge, u, ang))

    k_lo, k_hi = geom.ridge_range
    for k in range(k_lo, k_hi + 1):
        cuts = cuts_by_ridge.get(k, [])
        pieces = _drawn_intervals(geom, k, cuts)
        # ensure bifurcation anchors are exact sample points
        anchors = sorted(u for (rk, u, _) in branch_specs if rk == k)
        for lo, hi in pieces:
            if hi - lo < _RASTER_STEP:
                continue
            inner = [a for a in anchors if lo < a < hi]
            bounds = [lo] + inner + [hi]
            us = []
            for a, b in zip(bounds[:-1], bounds[1:]):
                count = max(int(math.ceil((b - a) / _RASTER_STEP)), 1)
                us.append(np.linspace(a, b, count + 1)[:-1])
            us.append(np.array([hi]))
            lines.append(flow.point(k, np.concatenate(us)))

    for rk, u, ang in branch_specs:
        start = flow.point(rk, u)[0]
        rad = math.radians(ang)
        direction = np.array([math.cos(rad), math.sin(rad)])
        steps = np.arange(0.0, geom.branch_len + _RASTER_STEP / 2, _RASTER_STEP)
        lines.append(start[None, :] + np.outer(steps, direction))

    return lines


def _rasterize(lines: list[np.ndarray], width: int, height: int) -> SkeletonImage:
    grid = np.zeros((height, width), dtype=bool)
    for pts in lines:
        ix = np.rint(pts[:, 0]).astype(int)
        iy = np.rint(pts[:, 1]).astype(int)
        keep = (ix >= 0) & (ix < width) & (iy >= 0) & (iy < height)
        grid[iy[keep], ix[keep]] = True
    return SkeletonImage(width=width, height=height, pixels=grid)


def _minutia_theta(geom: _Geometry, m: _PlantedMinutia, u: float) -> float:
    # theta flows with the drawn/branch side so it stays consistent under rigid moves
    tangent = geom.flow.tangent_deg(u)
    return tangent if m.into_positive_u else (tangent + 180.0) % 360.0


def _rigid(points: np.ndarray, angle_deg: float, tx: float, ty: float,
           center: tuple[float, float]) -> np.ndarray:
    rad = math.radians(angle_deg)
    rot = np.array([[math.cos(rad), -math.sin(rad)], [math.sin(rad), math.cos(rad)]])
    return (points - center) @ rot.T + center + np.array([tx, ty])


# ---------------------------------------------------------------------------
# Public generation API
# ---------------------------------------------------------------------------

def generate_subject(spec: SynthSpec, n_impressions: int = 2) -> SynthSubject:
    """Ground-truth skeleton + minutiae and perturbed impressions."""
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 0x5F1D)))
    geom = _build_geometry(spec, rng)

    gt_lines = _polylines(geom)
    gt_skel = _rasterize(gt_lines, spec.width, spec.height)
    gt_minutiae = tuple(
        Minutia(*geom.flow.point(m.ridge, m.u)[0], _minutia_theta(geom, m, m.u))
        for m in geom.minutiae
    )
    subject_id = f"s{spec.seed:x}"
    gt_set = MinutiaeSet(gt_minutiae, subject_id=subject_id, impression_id="gt")

    impressions = []
    transforms = []
    noise = spec.noise
    center = (spec.width / 2.0, spec.height / 2.0)
    for idx in range(n_impressions):
        irng = np.random.default_rng(
            np.random.SeedSequence((spec.seed, 0x1E57, idx))
        )
        angle = float(irng.uniform(-noise.rotation_deg_range, noise.rotation_deg_range))
        tx, ty = (float(v) for v in irng.uniform(
            -noise.translation_px_range, noise.translation_px_range, size=2))
        n = len(geom.minutiae)
        slides = {
            i: float(v) for i, v in enumerate(
                irng.uniform(-noise.position_jitter_px, noise.position_jitter_px, size=n))
        }
        theta_jit = irng.uniform(-noise.theta_jitter_deg, noise.theta_jitter_deg, size=n)
        dropped = irng.random(n) < noise.drop_rate

        lines = [_rigid(p, angle, tx, ty, center) for p in _polylines(geom, slides)]
        skel = _rasterize(lines, spec.width, spec.height)

        minutiae = []
        for i, m in enumerate(geom.minutiae):
            if dropped[i]:
                continue
            u = m.u + slides[i]
            pos = _rigid(geom.flow.point(m.ridge, u), angle, tx, ty, center)[0]
            if not (0 <= pos[0] < spec.width and 0 <= pos[1] < spec.height):
                continue
            theta = _minutia_theta(geom, m, u) + angle + float(theta_jit[i])
            minutiae.append(Minutia(float(pos[0]), float(pos[1]), theta))

        n_spur = int(irng.binomial(n, noise.spurious_rate)) if n else 0
        taken = [np.array([mm.x, mm.y]) for mm in minutiae]
        for _ in range(n_spur * 8):  # rejection head-room
            if n_spur <= 0:
                break
            m = geom.minutiae[int(irng.integers(n))]
            u = float(irng.uniform(m.u - 30.0, m.u + 30.0))
            pos = _rigid(geom.flow.point(m.ridge, u), angle, tx, ty, center)[0]
            if not (0 <= pos[0] < spec.width and 0 <= pos[1] < spec.height):
                continue
            if any(np.hypot(*(pos - q)) < 4.0 for q in taken):
                continue
            flip = 180.0 if irng.random() < 0.5 else 0.0
            theta = geom.flow.tangent_deg(u) + angle + flip
            minutiae.append(Minutia(float(pos[0]), float(pos[1]), theta))
            taken.append(pos)
            n_spur -= 1

        impressions.append(
            (MinutiaeSet(tuple(minutiae), subject_id=subject_id, impression_id=f"i{idx}"), skel)
        )
        transforms.append((angle, tx, ty))

    return SynthSubject(spec=spec, ground_truth=(gt_set, gt_skel),
                        impressions=tuple(impressions), transforms=tuple(transforms))


def generate_population(
    base_seed: int,
    n_subjects: int,
    impressions_per_subject: int,
    spec_template: Optional[SynthSpec] = None,
) -> list[SynthSubject]:
    """Deterministic list of subjects with derived, distinct seeds."""
    if n_subjects < 1 or impressions_per_subject < 1:
        raise ValueError("subject and impression counts must be >= 1")
    template = spec_template if spec_template is not None else default_population_spec()
    subjects = []
    for i in range(n_subjects):
        spec = replace(template, seed=derive_seed(base_seed, 0xB10, i))
        subjects.append(generate_subject(spec, impressions_per_subject))
    return subjects


def write_dataset(population: list[SynthSubject], out_dir: Union[str, Path]) -> None:
    """Emit `<subject>/<impression>.min` + `.pgm` files for the population."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    for si, subject in enumerate(population):
        sub_dir = root / f"{si:03d}"
        sub_dir.mkdir(exist_ok=True)
        for ii, (ms, skel) in enumerate(subject.impressions):
            (sub_dir / f"{ii:02d}.min").write_text(format_minutiae(ms))
            (sub_dir / f"{ii:02d}.pgm").write_bytes(write_pgm(skel))
