"""Sensor degradation chain: resolution reduction, MTF blur, band
misregistration, signal-dependent noise, and quantization.

Noise follows the two-parameter signal-dependent model

    var(L) = alpha * L + beta

with (alpha, beta) either given directly or fitted from the luminance and
SNR of two reference points (SNR is the linear amplitude ratio L / sigma, so
each anchor pins var = (L / SNR)**2 and the two anchors form a 2x2 linear
system).

The optical blur is a separable Gaussian parameterized by its gain at the
Nyquist frequency (0.5 cycles/sample).  Because sampled-Gaussian tap
vectors alias, the Gaussian width is calibrated numerically so the kernel's
exact discrete frequency response at Nyquist equals the requested gain;
taps are normalized to unit sum, so DC gain is exactly 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError, DataError, RawsatError
from .parallel import map_strips
from .raster import Granule, Raster, check_granule
from .resample import convolve_separable, downsample_block, translate_bilinear
from .rng import Rng, derive_stream

STAGES = ("downsample", "misregister", "mtf", "noise", "quantize")


# Noise model -----------------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """var(L) = alpha * L + beta, with optional (L, SNR) anchor provenance."""

    alpha: float
    beta: float
    anchors: tuple[tuple[float, float], tuple[float, float]] | None = None

    def __post_init__(self):
        if self.anchors is not None:
            for L, snr in self.anchors:
                target = (L / snr) ** 2
                got = self.variance(L)
                if abs(got - target) > 1e-9 * max(1.0, abs(target)):
                    raise DataError(
                        f"noise model ({self.alpha}, {self.beta}) does not reproduce "
                        f"anchor (L={L}, SNR={snr}): var {got} != {target}"
                    )

    def variance(self, L) -> np.ndarray | float:
        return self.alpha * L + self.beta

    def to_dict(self) -> dict:
        d = {"alpha": self.alpha, "beta": self.beta}
        if self.anchors is not None:
            d["anchors"] = [list(a) for a in self.anchors]
        return d


def snr_from_db(db: float) -> float:
    """Convert an SNR in dB to the linear amplitude ratio used here."""
    return 10.0 ** (db / 20.0)


def fit_noise_params(
    dark: tuple[float, float],
    bright: tuple[float, float],
    radiometric_max: float | None = None,
) -> NoiseModel:
    """Solve alpha * L + beta = (L / SNR)**2 at two (L, SNR) anchor points.

    The fitted model must predict nonnegative variance over
    [0, radiometric_max] (default: the brighter anchor luminance).
    """
    (L1, s1), (L2, s2) = (float(dark[0]), float(dark[1])), (float(bright[0]), float(bright[1]))
    if L1 == L2:
        raise DataError(f"degenerate anchors: both at luminance {L1}")
    if s1 <= 0 or s2 <= 0:
        raise DataError(f"SNR anchors must be > 0, got {s1} and {s2}")
    v1, v2 = (L1 / s1) ** 2, (L2 / s2) ** 2
    alpha = (v2 - v1) / (L2 - L1)
    beta = v1 - alpha * L1
    lmax = float(radiometric_max) if radiometric_max is not None else max(L1, L2)
    for L in (0.0, lmax):
        if alpha * L + beta < 0:
            raise DataError(
                f"fitted noise model predicts negative variance "
                f"{alpha * L + beta:g} at L={L:g}"
            )
    return NoiseModel(alpha, beta, anchors=((L1, s1), (L2, s2)))


def apply_noise(r: Raster, m: NoiseModel, rng: Rng, threads: int = 1) -> Raster:
    """Add zero-mean Gaussian noise with variance alpha * L + beta per pixel.

    Output is clamped at 0 from below (no negative radiance).  Noise values
    address absolute pixel indices of the rng stream, so strip-parallel
    execution is bit-identical to serial.
    """
    w = r.width
    values = r.values

    def strip(a: int, b: int) -> np.ndarray:
        sub = values[a:b].astype(np.float64)
        var = m.alpha * sub + m.beta
        bad = var < 0
        if bad.any():
            L = float(sub[bad][0])
            raise DataError(f"noise model predicts negative variance at L={L:g}")
        n = rng.normal_at(a * w, (b - a) * w).reshape(sub.shape)
        return np.maximum(sub + np.sqrt(var) * n, 0.0).astype(np.float32)

    out = map_strips(strip, r.height, threads)
    return r.with_values(out)


def estimate_noise(flat_patches: list[Raster]) -> NoiseModel:
    """Least-squares fit of sample variance vs sample mean over uniform patches.

    The inverse of apply_noise on flat fields; serves as the empirical
    validation oracle for the noise model.
    """
    if len(flat_patches) < 2:
        raise DataError(f"need >= 2 flat patches, got {len(flat_patches)}")
    means = np.array([p.values.mean(dtype=np.float64) for p in flat_patches])
    variances = np.array([p.values.astype(np.float64).var(ddof=1) for p in flat_patches])
    if np.ptp(means) < 1e-12 * max(1.0, float(np.abs(means).max())):
        raise DataError("flat patches have no distinct mean luminances")
    A = np.stack([means, np.ones_like(means)], axis=1)
    (alpha, beta), *_ = np.linalg.lstsq(A, variances, rcond=None)
    return NoiseModel(float(alpha), float(beta))


# MTF -------------------------------------------------------------------------


@dataclass(frozen=True)
class MtfSpec:
    """Gaussian optical transfer function pinned by its gain at Nyquist."""

    mtf_at_nyquist: float
    kernel_half_width: int = 8

    def __post_init__(self):
        if not 0.0 < self.mtf_at_nyquist <= 1.0:
            raise ConfigError(f"mtf_at_nyquist must be in (0, 1], got {self.mtf_at_nyquist}")
        if self.kernel_half_width < 1:
            raise ConfigError(f"kernel_half_width must be >= 1, got {self.kernel_half_width}")

    def kernel(self) -> np.ndarray:
        """Unit-sum taps whose discrete response at f=0.5 equals the target."""
        return _mtf_kernel(self.mtf_at_nyquist, self.kernel_half_width)

    def to_dict(self) -> dict:
        return {"mtf_at_nyquist": self.mtf_at_nyquist, "kernel_half_width": self.kernel_half_width}


def _nyquist_gain(sigma: float, half_width: int) -> float:
    n = np.arange(-half_width, half_width + 1, dtype=np.float64)
    taps = np.exp(-0.5 * (n / sigma) ** 2)
    return float((taps * (-1.0) ** n).sum() / taps.sum())


@lru_cache(maxsize=64)
def _mtf_kernel(m: float, half_width: int) -> np.ndarray:
    if m >= 1.0:
        return np.array([1.0])
    # Bisect the Gaussian width: the discrete Nyquist gain decreases with
    # sigma until truncation dominates around sigma ~ half_width / 2.
    lo, hi = 1e-4, 0.25
    while _nyquist_gain(hi, half_width) > m:
        hi *= 2.0
        if hi > half_width / 2.0:
            raise ConfigError(
                f"mtf_at_nyquist={m:g} unreachable with kernel_half_width={half_width}; "
                f"increase the half width"
            )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _nyquist_gain(mid, half_width) > m:
            lo = mid
        else:
            hi = mid
    n = np.arange(-half_width, half_width + 1, dtype=np.float64)
    taps = np.exp(-0.5 * (n / hi) ** 2)
    taps /= taps.sum()
    taps.flags.writeable = False
    return taps


def apply_mtf(r: Raster, spec: MtfSpec, threads: int = 1) -> Raster:
    """Separable Gaussian blur with reflect padding; DC gain exactly 1."""
    kernel = spec.kernel()
    if kernel.size == 1:
        return r
    out = convolve_separable(r.values, kernel, threads=threads)
    return r.with_values(out)


# Misregistration and quantization --------------------------------------------


def misregister(r: Raster, dx: float, dy: float) -> Raster:
    """Bilinear subpixel translation with border clamping."""
    limit = min(r.width, r.height) / 4.0
    if abs(dx) >= limit or abs(dy) >= limit:
        raise DataError(f"misregistration ({dx}, {dy}) exceeds quarter-extent limit {limit:g}")
    if dx == 0.0 and dy == 0.0:
        return r
    return r.with_values(translate_bilinear(r.values, dx, dy))


def quantize(r: Raster, bits: int, radiometric_max: float) -> Raster:
    """Round to the 2**bits - 1 DN grid spanning [0, radiometric_max].

    Values are clamped into range; output is returned on the original
    radiometric scale.  Idempotent bit-exactly.
    """
    if not 8 <= int(bits) <= 16:
        raise ConfigError(f"quant_bits must be in [8, 16], got {bits}")
    if not radiometric_max > 0:
        raise ConfigError(f"radiometric_max must be > 0, got {radiometric_max}")
    full = float(2 ** int(bits) - 1)
    dn = np.clip(np.rint(r.values.astype(np.float64) * (full / radiometric_max)), 0.0, full)
    return r.with_values((dn * (radiometric_max / full)).astype(np.float32))


# Full chain ------------------------------------------------------------------


@dataclass
class DegradationConfig:
    """Ordered degradation chain configuration.

    mtf and noise accept a single spec applied to every band or a
    {source band name: spec} mapping; bands missing from a mapping are left
    untouched.  misregistration maps source band names to (dx, dy) shifts.
    radiometric_max=None derives the 99.9th percentile of the source
    granule's values.
    """

    pre_downsample_factor: int = 4
    mtf: MtfSpec | dict[str, MtfSpec] | None = None
    noise: NoiseModel | dict[str, NoiseModel] | None = None
    quant_bits: int = 12
    radiometric_max: float | None = None
    misregistration: dict[str, tuple[float, float]] = field(default_factory=dict)
    stage_order: tuple[str, ...] = STAGES
    seed: int = 0

    def __post_init__(self):
        order = tuple(self.stage_order)
        if len(set(order)) != len(order):
            raise ConfigError(f"stage_order repeats a stage: {order}")
        unknown = [s for s in order if s not in STAGES]
        if unknown:
            raise ConfigError(f"unknown stages {unknown}; valid stages are {list(STAGES)}")
        self.stage_order = order
        if self.pre_downsample_factor < 1:
            raise ConfigError(f"pre_downsample_factor must be >= 1, got {self.pre_downsample_factor}")
        if not 8 <= self.quant_bits <= 16:
            raise ConfigError(f"quant_bits must be in [8, 16], got {self.quant_bits}")

    def to_dict(self) -> dict:
        def spec_dict(v):
            if v is None:
                return None
            if isinstance(v, dict):
                return {k: s.to_dict() for k, s in v.items()}
            return v.to_dict()

        return {
            "pre_downsample_factor": self.pre_downsample_factor,
            "mtf": spec_dict(self.mtf),
            "noise": spec_dict(self.noise),
            "quant_bits": self.quant_bits,
            "radiometric_max": self.radiometric_max,
            "misregistration": {k: list(v) for k, v in self.misregistration.items()},
            "stage_order": list(self.stage_order),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DegradationConfig":
        def parse(v, ctor):
            if v is None:
                return None
            if isinstance(v, dict) and not any(isinstance(x, dict) for x in v.values()):
                return ctor(**v)
            return {k: ctor(**s) for k, s in v.items()}

        return cls(
            pre_downsample_factor=int(d.get("pre_downsample_factor", 4)),
            mtf=parse(d.get("mtf"), MtfSpec),
            noise=parse(d.get("noise"), lambda **kw: NoiseModel(
                kw["alpha"], kw["beta"],
                tuple(tuple(a) for a in kw["anchors"]) if kw.get("anchors") else None,
            )),
            quant_bits=int(d.get("quant_bits", 12)),
            radiometric_max=d.get("radiometric_max"),
            misregistration={k: tuple(v) for k, v in d.get("misregistration", {}).items()},
            stage_order=tuple(d.get("stage_order", STAGES)),
            seed=int(d.get("seed", 0)),
        )


def _per_band(param, band: str):
    if param is None:
        return None
    if isinstance(param, dict):
        return param.get(band)
    return param


def default_radiometric_max(g: Granule) -> float:
    """99.9th percentile over all band values; avoids outlier-driven scaling."""
    samples = np.concatenate([r.values.ravel() for r in g.rasters.values()])
    return float(np.percentile(samples, 99.9))


def degrade(g: Granule, cfg: DegradationConfig, threads: int = 1) -> Granule:
    """Run the configured degradation chain over the PAN + XS bands.

    Outputs a granule with '_raw'-suffixed bands; annotations are rescaled
    when the chain includes the downsample stage; provenance records the
    full configuration including the derived radiometric maximum.
    """
    check_granule(g)
    band_names = [g.pan_band] + list(g.xs_bands)
    for param in (cfg.mtf, cfg.noise, cfg.misregistration):
        if isinstance(param, dict):
            missing = [b for b in param if b not in band_names]
            if missing:
                raise ConfigError(f"config names bands {missing} not in granule {band_names}")

    rmax = cfg.radiometric_max if cfg.radiometric_max is not None else default_radiometric_max(g)
    state = {b: g.rasters[b] for b in band_names}

    for stage in cfg.stage_order:
        new_state = {}
        for band, raster in state.items():
            try:
                if stage == "downsample":
                    raster = downsample_block(raster, cfg.pre_downsample_factor)
                elif stage == "misregister":
                    shift = cfg.misregistration.get(band)
                    if shift is not None:
                        raster = misregister(raster, shift[0], shift[1])
                elif stage == "mtf":
                    spec = _per_band(cfg.mtf, band)
                    if spec is not None:
                        raster = apply_mtf(raster, spec, threads=threads)
                elif stage == "noise":
                    model = _per_band(cfg.noise, band)
                    if model is not None:
                        rng = Rng(cfg.seed, derive_stream(cfg.seed, "noise", band))
                        raster = apply_noise(raster, model, rng, threads=threads)
                elif stage == "quantize":
                    raster = quantize(raster, cfg.quant_bits, rmax)
            except RawsatError as e:
                raise type(e)(f"stage '{stage}', band '{band}': {e}") from e
            new_state[band] = raster
        state = new_state

    scale = 1.0 / cfg.pre_downsample_factor if "downsample" in cfg.stage_order else 1.0
    rasters = {f"{b}_raw": state[b].with_values(state[b].values, band_name=f"{b}_raw") for b in band_names}
    out = Granule(
        id=g.id,
        rasters=rasters,
        pan_band=f"{g.pan_band}_raw",
        xs_bands=[f"{b}_raw" for b in g.xs_bands],
        pan_xs_ratio=g.pan_xs_ratio,
        annotations=[a.scaled(scale) for a in g.annotations],
        provenance=list(g.provenance)
        + [{"op": "degrade", "params": {**cfg.to_dict(), "radiometric_max_used": rmax}}],
    )
    return check_granule(out)
