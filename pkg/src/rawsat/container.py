"""Granule container directory format and PNG import/export.

Container layout::

    <granule>/
      meta.json          descriptor (schema below)
      <band>.bin         row-major little-endian float32, no header

meta.json keys, in fixed order for deterministic bytes::

    {
      "id": str,
      "bands": [{"name", "width", "height", "gsd_m", "file"}, ...],
      "pan_band": str,
      "xs_bands": [str, ...],
      "pan_xs_ratio": int,
      "annotations": [{"class_id", "class_name", "bbox": [x0,y0,x1,y1]}, ...],
      "provenance": [...]
    }

Bands are serialized in sorted name order so logically equal granules
produce identical bytes.  Round trips are bit-exact.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import cv2
import numpy as np

from .errors import DataError, FormatError, SchemaError
from .raster import Annotation, Granule, Raster, check_granule

_BAND_NAME_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


def _band_filename(name: str) -> str:
    if not _BAND_NAME_RE.match(name):
        raise DataError(f"band name {name!r} not usable as a file name")
    return f"{name}.bin"


def write_granule(g: Granule, path: str | Path) -> None:
    """Write a granule container; output bytes are deterministic."""
    check_granule(g)
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    bands_meta = []
    for name in sorted(g.rasters):
        r = g.rasters[name]
        fname = _band_filename(name)
        bands_meta.append(
            {"name": name, "width": r.width, "height": r.height, "gsd_m": r.gsd, "file": fname}
        )
        (root / fname).write_bytes(r.values.astype("<f4", copy=False).tobytes())
    meta = {
        "id": g.id,
        "bands": bands_meta,
        "pan_band": g.pan_band,
        "xs_bands": list(g.xs_bands),
        "pan_xs_ratio": int(g.pan_xs_ratio),
        "annotations": [a.to_dict() for a in g.annotations],
        "provenance": g.provenance,
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def read_granule(path: str | Path) -> Granule:
    """Read a granule container written by write_granule."""
    root = Path(path)
    meta_path = root / "meta.json"
    if not meta_path.is_file():
        raise FormatError(f"{root}: missing meta.json")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"{meta_path}: invalid JSON: {e}") from e

    for key in ("id", "bands", "pan_band", "xs_bands", "pan_xs_ratio", "annotations", "provenance"):
        if key not in meta:
            raise SchemaError(f"{meta_path}: missing key '{key}'")

    rasters: dict[str, Raster] = {}
    for band in meta["bands"]:
        name = band["name"]
        w, h = int(band["width"]), int(band["height"])
        band_path = root / band["file"]
        if not band_path.is_file():
            raise FormatError(f"{root}: missing band file for '{name}' ({band['file']})")
        data = band_path.read_bytes()
        expected = w * h * 4
        if len(data) != expected:
            raise FormatError(
                f"{root}: band size mismatch for '{name}': meta declares {w}x{h} "
                f"({expected} bytes), file holds {len(data)} bytes"
            )
        values = np.frombuffer(data, dtype="<f4").reshape(h, w)
        rasters[name] = Raster(values, gsd=float(band["gsd_m"]), band_name=name)

    try:
        annotations = [Annotation.from_dict(a) for a in meta["annotations"]]
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"{meta_path}: bad annotation entry: {e}") from e

    g = Granule(
        id=str(meta["id"]),
        rasters=rasters,
        pan_band=str(meta["pan_band"]),
        xs_bands=[str(b) for b in meta["xs_bands"]],
        pan_xs_ratio=int(meta["pan_xs_ratio"]),
        annotations=annotations,
        provenance=list(meta["provenance"]),
    )
    return check_granule(g)


# PNG previews ---------------------------------------------------------------


def encode_png(
    arrays: list[np.ndarray], lo: float, hi: float, bits: int = 16
) -> bytes:
    """Encode 1 (grayscale) or 3 (RGB) 2-D arrays as PNG bytes.

    Values map linearly: lo -> 0, hi -> full scale, clipped.  Deterministic
    for fixed inputs.
    """
    if bits not in (8, 16):
        raise DataError(f"PNG bit depth must be 8 or 16, got {bits}")
    if len(arrays) not in (1, 3):
        raise DataError(f"PNG export supports 1 or 3 bands, got {len(arrays)}")
    if not hi > lo:
        raise DataError(f"PNG scaling needs hi > lo, got lo={lo} hi={hi}")
    full = (1 << bits) - 1
    dtype = np.uint8 if bits == 8 else np.uint16
    scaled = [
        np.clip(np.rint((np.asarray(a, dtype=np.float64) - lo) * (full / (hi - lo))), 0, full).astype(dtype)
        for a in arrays
    ]
    if len(scaled) == 1:
        img = scaled[0]
    else:
        img = np.stack(scaled[::-1], axis=-1)  # cv2 writes BGR
    ok, buf = cv2.imencode(".png", img)
    if not ok:
        raise DataError("PNG encoding failed")
    return buf.tobytes()


def decode_png(data: bytes) -> tuple[list[np.ndarray], int]:
    """Decode PNG bytes to [gray] or [R, G, B] integer arrays plus bit depth."""
    img = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FormatError("not a decodable PNG")
    bits = 16 if img.dtype == np.uint16 else 8
    if img.ndim == 2:
        return [img], bits
    if img.ndim == 3 and img.shape[2] in (3, 4):
        return [img[:, :, 2], img[:, :, 1], img[:, :, 0]], bits  # BGR(A) -> RGB
    raise FormatError(f"unsupported PNG layout {img.shape}")


def export_png(
    g: Granule,
    bands: list[str],
    path: str | Path,
    lo: float | None = None,
    hi: float | None = None,
    bits: int = 16,
) -> tuple[float, float]:
    """Write selected bands as a preview PNG; returns the (lo, hi) scaling used."""
    arrays = [g.raster(b).values for b in bands]
    if lo is None:
        lo = float(min(a.min() for a in arrays))
    if hi is None:
        hi = float(max(a.max() for a in arrays))
        if hi <= lo:
            hi = lo + 1.0
    Path(path).write_bytes(encode_png(arrays, lo, hi, bits))
    return lo, hi


def import_png(
    path: str | Path,
    gsd: float,
    lo: float = 0.0,
    hi: float | None = None,
    granule_id: str | None = None,
) -> Granule:
    """Build a granule from a PNG (single band or RGB; RGB uses R as PAN-less XS set).

    Integer pixel values map linearly from [0, full scale] to [lo, hi];
    the scaling is recorded in provenance.
    """
    p = Path(path)
    arrays, bits = decode_png(p.read_bytes())
    full = (1 << bits) - 1
    if hi is None:
        hi = float(full)
    scale = (hi - lo) / full
    names = ["PAN"] if len(arrays) == 1 else ["R", "G", "B"]
    rasters = {
        n: Raster(a.astype(np.float32) * np.float32(scale) + np.float32(lo), gsd, n)
        for n, a in zip(names, arrays)
    }
    pan_band = names[0]
    xs = [] if len(arrays) == 1 else names[1:]
    # RGB import treats R as the reference grid; all bands share dimensions.
    g = Granule(
        id=granule_id or p.stem,
        rasters=rasters,
        pan_band=pan_band,
        xs_bands=xs,
        pan_xs_ratio=1,
        annotations=[],
        provenance=[{"op": "import_png", "params": {"file": p.name, "lo": lo, "hi": hi, "bits": bits}}],
    )
    return check_granule(g)
