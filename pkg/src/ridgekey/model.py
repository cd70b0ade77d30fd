"""Domain types and file formats shared by the whole toolkit.

Angles are degrees everywhere in public data structures; radians appear only
inside trigonometric internals.  All types are immutable after construction
and safe to share across threads.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, TextIO, Union

import numpy as np

__all__ = [
    "Minutia",
    "MinutiaeSet",
    "SkeletonImage",
    "Params",
    "ProtectedTemplate",
    "normalize_angle",
    "parse_minutiae",
    "format_minutiae",
    "parse_skeleton",
    "write_pgm",
    "serialize_template",
    "deserialize_template",
]

TEMPLATE_VERSION = 1


def normalize_angle(theta: float) -> float:
    """Fold an angle in degrees into [0, 360). Idempotent."""
    return float(theta) % 360.0


# ---------------------------------------------------------------------------
# Core records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Minutia:
    """A ridge ending or bifurcation: position in pixels plus orientation.

    Coordinates are non-negative pixel positions (sub-pixel values are
    accepted; see the minutiae text format).  ``theta`` is normalized into
    [0, 360) on construction.
    """

    x: float
    y: float
    theta: float

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError(f"negative minutia coordinate ({self.x}, {self.y})")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", normalize_angle(self.theta))


@dataclass(frozen=True)
class MinutiaeSet:
    """Ordered minutiae of one impression. No two minutiae share a position."""

    minutiae: tuple[Minutia, ...]
    subject_id: str = ""
    impression_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "minutiae", tuple(self.minutiae))
        seen = set()
        for m in self.minutiae:
            pos = (m.x, m.y)
            if pos in seen:
                raise ValueError(f"duplicate minutia position {pos}")
            seen.add(pos)

    def __len__(self) -> int:
        return len(self.minutiae)

    def positions(self) -> np.ndarray:
        """(n, 2) float array of (x, y) positions."""
        if not self.minutiae:
            return np.zeros((0, 2))
        return np.array([(m.x, m.y) for m in self.minutiae], dtype=float)

    def thetas(self) -> np.ndarray:
        return np.array([m.theta for m in self.minutiae], dtype=float)


@dataclass(frozen=True)
class SkeletonImage:
    """Binary raster of one-pixel-wide ridges (True/1 = ridge pixel)."""

    width: int
    height: int
    pixels: np.ndarray  # bool, shape (height, width), row-major

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=bool)
        if px.shape != (self.height, self.width):
            raise ValueError(
                f"pixel grid {px.shape} does not match {self.height}x{self.width}"
            )
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_array(cls, pixels: np.ndarray) -> "SkeletonImage":
        pixels = np.asarray(pixels, dtype=bool)
        h, w = pixels.shape
        return cls(width=w, height=h, pixels=pixels)

    def ridge_pixel_count(self) -> int:
        return int(self.pixels.sum())

    def in_bounds(self, x: float, y: float) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height


@dataclass(frozen=True)
class Params:
    """Pipeline parameters: sector count s, log base b, projected dimension t.

    Defaults are the validated operating point (s=8, b=1.2, t=s/2).
    """

    s: int = 8
    b: float = 1.2
    t: int = 4

    def __post_init__(self):
        if self.s < 2:
            raise ValueError(f"sector count s must be >= 2, got {self.s}")
        if not self.b > 1:
            raise ValueError(f"log base b must be > 1, got {self.b}")
        if not 1 <= self.t < self.s:
            raise ValueError(f"projected dimension t must satisfy 1 <= t < s, got t={self.t}, s={self.s}")


@dataclass(frozen=True)
class ProtectedTemplate:
    """The stored n x t cancelable template plus key identifier and parameters.

    Never carries raw minutiae, ridge features, or the projection seed.
    """

    ct: np.ndarray
    key_id: str
    params: Params

    def __post_init__(self):
        ct = np.asarray(self.ct, dtype=np.float64)
        if ct.ndim != 2:
            raise ValueError(f"template matrix must be 2-D, got shape {ct.shape}")
        if ct.shape[1] != self.params.t:
            raise ValueError(
                f"template has {ct.shape[1]} columns but params.t = {self.params.t}"
            )
        if ct.size and not np.all(np.isfinite(ct)):
            raise ValueError("template entries must be finite")
        ct = ct.copy()
        ct.setflags(write=False)
        object.__setattr__(self, "ct", ct)

    @property
    def n(self) -> int:
        return self.ct.shape[0]


# ---------------------------------------------------------------------------
# Minutiae text format:  one `x y theta` triple per line, `#` comments
# ---------------------------------------------------------------------------

def parse_minutiae(
    source: Union[str, TextIO],
    subject_id: str = "",
    impression_id: str = "",
) -> MinutiaeSet:
    """Parse whitespace-delimited `x y theta` lines into a MinutiaeSet.

    Blank lines and `#` comments are skipped.  Thetas are normalized into
    [0, 360); line order is preserved.  Raises ValueError naming the line
    number on malformed input, and on negative coordinates.
    """
    text = source if isinstance(source, str) else source.read()
    minutiae = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"minutiae line {lineno}: expected 'x y theta', got {raw!r}")
        try:
            x, y, theta = (float(p) for p in parts)
        except ValueError:
            raise ValueError(f"minutiae line {lineno}: non-numeric field in {raw!r}") from None
        if x < 0 or y < 0:
            raise ValueError(f"minutiae line {lineno}: negative coordinate in {raw!r}")
        minutiae.append(Minutia(x, y, theta))
    return MinutiaeSet(tuple(minutiae), subject_id=subject_id, impression_id=impression_id)


def _fmt_num(v: float) -> str:
    # shortest exact representation; integers render without a trailing .0
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def format_minutiae(ms: MinutiaeSet) -> str:
    """Inverse of parse_minutiae (up to comments/whitespace)."""
    lines = [f"{_fmt_num(m.x)} {_fmt_num(m.y)} {_fmt_num(m.theta)}" for m in ms.minutiae]
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Skeleton images: PBM (P1/P4) and PGM (P2/P5)
# ---------------------------------------------------------------------------

class _PnmReader:
    """Tokenizer for netpbm headers (handles `#` comments)."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def token(self) -> bytes:
        while self.pos < len(self.data):
            c = self.data[self.pos : self.pos + 1]
            if c == b"#":
                nl = self.data.find(b"\n", self.pos)
                self.pos = len(self.data) if nl < 0 else nl + 1
            elif c.isspace():
                self.pos += 1
            else:
                break
        start = self.pos
        while self.pos < len(self.data) and not self.data[self.pos : self.pos + 1].isspace():
            self.pos += 1
        if start == self.pos:
            raise ValueError("truncated image header")
        return self.data[start : self.pos]

    def int_token(self) -> int:
        tok = self.token()
        try:
            return int(tok)
        except ValueError:
            raise ValueError(f"bad header token {tok!r}") from None


def parse_skeleton(source: Union[bytes, BinaryIO]) -> SkeletonImage:
    """Read a PBM (P1/P4) or PGM (P2/P5) image as a skeleton bitmap.

    PBM: 1 = black = ridge.  PGM: values <= 127 are ridge (dark ink on a
    light background).  Raises ValueError on unknown magic numbers and on
    truncated payloads.
    """
    data = source if isinstance(source, bytes) else source.read()
    rd = _PnmReader(data)
    magic = rd.token()
    if magic not in (b"P1", b"P2", b"P4", b"P5"):
        raise ValueError(f"unsupported image magic {magic!r}")
    width = rd.int_token()
    height = rd.int_token()
    if width <= 0 or height <= 0:
        raise ValueError(f"bad image dimensions {width}x{height}")

    if magic in (b"P2", b"P5"):
        maxval = rd.int_token()
        if not 0 < maxval <= 255:
            raise ValueError(f"unsupported maxval {maxval}")

    if magic == b"P1":
        # digits may be packed without separators
        bits = []
        pos = rd.pos
        while pos < len(data) and len(bits) < width * height:
            c = data[pos : pos + 1]
            if c == b"#":
                nl = data.find(b"\n", pos)
                pos = len(data) if nl < 0 else nl + 1
                continue
            if c in (b"0", b"1"):
                bits.append(c == b"1")
            elif not c.isspace():
                raise ValueError(f"bad P1 pixel byte {c!r}")
            pos += 1
        if len(bits) < width * height:
            raise ValueError("truncated P1 payload")
        grid = np.array(bits, dtype=bool).reshape(height, width)
    elif magic == b"P2":
        vals = []
        while len(vals) < width * height:
            vals.append(rd.int_token())
        grid = np.array(vals).reshape(height, width) <= 127
    elif magic == b"P4":
        rd.pos += 1  # single whitespace after header
        row_bytes = (width + 7) // 8
        payload = data[rd.pos : rd.pos + row_bytes * height]
        if len(payload) < row_bytes * height:
            raise ValueError("truncated P4 payload")
        rows = np.frombuffer(payload, dtype=np.uint8).reshape(height, row_bytes)
        bits = np.unpackbits(rows, axis=1)[:, :width]
        grid = bits.astype(bool)
    else:  # P5
        rd.pos += 1
        payload = data[rd.pos : rd.pos + width * height]
        if len(payload) < width * height:
            raise ValueError("truncated P5 payload")
        grid = np.frombuffer(payload, dtype=np.uint8).reshape(height, width) <= 127

    return SkeletonImage(width=width, height=height, pixels=grid)


def write_pgm(skel: SkeletonImage) -> bytes:
    """Emit a binary PGM (P5): ridge pixels dark (0), background white (255)."""
    img = np.where(skel.pixels, 0, 255).astype(np.uint8)
    header = f"P5\n{skel.width} {skel.height}\n255\n".encode("ascii")
    return header + img.tobytes()


# ---------------------------------------------------------------------------
# Protected template files (JSON)
# ---------------------------------------------------------------------------

def serialize_template(template: ProtectedTemplate) -> bytes:
    """JSON encoding of a protected template.

    Matrix entries are 64-bit floats; json round-trips them bit-exactly via
    the shortest-repr guarantee.  The projection seed is never stored, only
    the opaque key_id.
    """
    doc = {
        "version": TEMPLATE_VERSION,
        "key_id": template.key_id,
        "s": template.params.s,
        "b": template.params.b,
        "t": template.params.t,
        "n": template.n,
        "rows": [[float(v) for v in row] for row in template.ct],
    }
    return json.dumps(doc, indent=1).encode("utf-8")


def deserialize_template(blob: Union[bytes, str]) -> ProtectedTemplate:
    text = blob.decode("utf-8") if isinstance(blob, bytes) else blob
    doc = json.loads(text)
    version = doc.get("version")
    if version != TEMPLATE_VERSION:
        raise ValueError(f"unsupported template version {version!r}")
    params = Params(s=int(doc["s"]), b=float(doc["b"]), t=int(doc["t"]))
    rows = doc["rows"]
    if len(rows) != doc["n"]:
        raise ValueError(f"template header claims n={doc['n']} but has {len(rows)} rows")
    for i, row in enumerate(rows):
        if len(row) != params.t:
            raise ValueError(f"template row {i} has {len(row)} entries, expected {params.t}")
    ct = np.array(rows, dtype=np.float64).reshape(len(rows), params.t)
    return ProtectedTemplate(ct=ct, key_id=str(doc["key_id"]), params=params)
