"""Raster, annotation, and granule data model.

A Raster is a single-band 2-D float32 image with a ground sample distance;
a Granule bundles the co-referenced PAN + XS rasters of one acquisition
together with annotations (always in PAN pixel coordinates) and an
append-only provenance trail.

Rasters are immutable after construction: the constructor takes ownership
of the array and clears its writeable flag, so rasters are safe to share
across threads without copies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, SchemaError

BBox = tuple[float, float, float, float]


def check_bbox(bbox) -> BBox:
    """Validate (xmin, ymin, xmax, ymax); returns it as a float tuple."""
    if len(bbox) != 4:
        raise DataError(f"bbox must have 4 coordinates, got {len(bbox)}")
    xmin, ymin, xmax, ymax = (float(v) for v in bbox)
    if not (xmin < xmax and ymin < ymax):
        raise DataError(f"degenerate bbox {bbox}: need xmin < xmax and ymin < ymax")
    return (xmin, ymin, xmax, ymax)


@dataclass(frozen=True)
class Annotation:
    """One labelled object: class + axis-aligned box in pixel coordinates."""

    class_id: int
    class_name: str
    bbox: BBox

    def __post_init__(self):
        if self.class_id < 0:
            raise DataError(f"class_id must be >= 0, got {self.class_id}")
        object.__setattr__(self, "bbox", check_bbox(self.bbox))

    def shifted(self, dx: float, dy: float) -> "Annotation":
        x0, y0, x1, y1 = self.bbox
        return Annotation(self.class_id, self.class_name, (x0 + dx, y0 + dy, x1 + dx, y1 + dy))

    def scaled(self, factor: float) -> "Annotation":
        x0, y0, x1, y1 = self.bbox
        return Annotation(self.class_id, self.class_name, (x0 * factor, y0 * factor, x1 * factor, y1 * factor))

    @property
    def area(self) -> float:
        x0, y0, x1, y1 = self.bbox
        return (x1 - x0) * (y1 - y0)

    def to_dict(self) -> dict:
        return {"class_id": self.class_id, "class_name": self.class_name, "bbox": list(self.bbox)}

    @classmethod
    def from_dict(cls, d: dict) -> "Annotation":
        return cls(int(d["class_id"]), str(d["class_name"]), tuple(d["bbox"]))


class Raster:
    """Single-band 2-D float32 image with pixel-grid metadata.

    ``values`` is a read-only (height, width) array; the constructor takes
    ownership of the array passed in.  All values must be finite.
    """

    __slots__ = ("values", "gsd", "band_name")

    def __init__(self, values, gsd: float, band_name: str = ""):
        arr = np.asarray(values)
        if arr.dtype != np.float32 or not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr, dtype=np.float32)
        if arr.ndim != 2:
            raise DataError(f"raster values must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DataError(f"raster dimensions must be >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise DataError(f"raster '{band_name}' contains non-finite values")
        if not float(gsd) > 0:
            raise DataError(f"gsd must be > 0, got {gsd}")
        if arr.flags.writeable:
            try:
                arr.flags.writeable = False
            except ValueError:  # view of someone else's buffer: copy, then freeze
                arr = arr.copy()
                arr.flags.writeable = False
        self.values = arr
        self.gsd = float(gsd)
        self.band_name = str(band_name)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def with_values(self, values, gsd: float | None = None, band_name: str | None = None) -> "Raster":
        """New raster carrying this raster's metadata unless overridden."""
        return Raster(
            values,
            self.gsd if gsd is None else gsd,
            self.band_name if band_name is None else band_name,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Raster):
            return NotImplemented
        return (
            self.band_name == other.band_name
            and self.gsd == other.gsd
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
        )

    def __repr__(self) -> str:
        return f"Raster({self.band_name!r}, {self.width}x{self.height}, gsd={self.gsd}m)"


def check_raster(r, name: str = "raster") -> Raster:
    """Validate that r is a Raster (invariants hold by construction)."""
    if not isinstance(r, Raster):
        raise DataError(f"{name} must be a Raster, got {type(r).__name__}")
    return r


@dataclass
class Granule:
    """One acquisition: named rasters + annotations + provenance.

    annotations are in PAN pixel coordinates; provenance is an append-only
    list of JSON-serializable operation records {"op": name, "params": ...}
    sufficient to replay the granule from its source.
    """

    id: str
    rasters: dict[str, Raster]
    pan_band: str
    xs_bands: list[str]
    pan_xs_ratio: int
    annotations: list[Annotation] = field(default_factory=list)
    provenance: list[dict] = field(default_factory=list)

    def raster(self, band: str) -> Raster:
        try:
            return self.rasters[band]
        except KeyError:
            raise DataError(f"granule '{self.id}' has no band '{band}'") from None

    @property
    def pan(self) -> Raster:
        return self.raster(self.pan_band)

    def with_changes(self, **kw) -> "Granule":
        """Copy with replaced fields; container lists/dicts are shallow-copied."""
        out = Granule(
            id=kw.get("id", self.id),
            rasters=dict(kw.get("rasters", self.rasters)),
            pan_band=kw.get("pan_band", self.pan_band),
            xs_bands=list(kw.get("xs_bands", self.xs_bands)),
            pan_xs_ratio=kw.get("pan_xs_ratio", self.pan_xs_ratio),
            annotations=list(kw.get("annotations", self.annotations)),
            provenance=list(kw.get("provenance", self.provenance)),
        )
        return out

    def recorded(self, op: str, **params) -> "Granule":
        """Copy with one provenance record appended."""
        out = self.with_changes()
        out.provenance.append({"op": op, "params": params})
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Granule):
            return NotImplemented
        return (
            self.id == other.id
            and self.pan_band == other.pan_band
            and self.xs_bands == other.xs_bands
            and self.pan_xs_ratio == other.pan_xs_ratio
            and self.rasters == other.rasters
            and self.annotations == other.annotations
            and self.provenance == other.provenance
        )


def check_granule(g: Granule) -> Granule:
    """Validate granule invariants; raises SchemaError on violation.

    - pan_band and all xs_bands exist;
    - XS rasters share one shape and PAN dims are exactly ratio x XS dims;
    - every annotation box lies within PAN raster bounds.
    """
    if not isinstance(g, Granule):
        raise DataError(f"expected Granule, got {type(g).__name__}")
    if g.pan_band not in g.rasters:
        raise SchemaError(f"granule '{g.id}': pan_band '{g.pan_band}' not among rasters")
    for b in g.xs_bands:
        if b not in g.rasters:
            raise SchemaError(f"granule '{g.id}': xs band '{b}' not among rasters")
    pan = g.rasters[g.pan_band]
    if g.xs_bands:
        shapes = {g.rasters[b].shape for b in g.xs_bands}
        if len(shapes) != 1:
            raise SchemaError(f"granule '{g.id}': XS rasters have differing shapes {sorted(shapes)}")
        (xs_h, xs_w) = next(iter(shapes))
        r = int(g.pan_xs_ratio)
        if r < 1 or pan.height != xs_h * r or pan.width != xs_w * r:
            raise SchemaError(
                f"granule '{g.id}': PAN {pan.width}x{pan.height} is not "
                f"{r}x the XS dimensions {xs_w}x{xs_h}"
            )
    for i, a in enumerate(g.annotations):
        x0, y0, x1, y1 = a.bbox
        if x0 < 0 or y0 < 0 or x1 > pan.width or y1 > pan.height:
            raise SchemaError(
                f"granule '{g.id}': annotation {i} box {a.bbox} exceeds "
                f"PAN bounds {pan.width}x{pan.height}"
            )
    return g
