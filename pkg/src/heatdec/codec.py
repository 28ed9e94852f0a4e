"""Gaussian landmark encoding and the heatmap-to-distance-map transform.

A landmark is a continuous (u, v) coordinate in input-image pixels, with
u = column and v = row and the origin at the top-left cell center.  Encoding
rasterizes a peak-1 Gaussian onto an h x w heatmap grid whose cells live at
integer coordinates; the continuous center is the landmark divided by the
downsampling factor.  The inverse transform turns activations back into
per-cell pseudo-ranges: D = sqrt(-2 * sigma^2 * ln(H)), which for a clean
encoding recovers the exact Euclidean distance from each cell to the
sub-pixel center.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import ConfigurationError, DomainError

# Activations below this floor are clamped before taking the log, keeping the
# distance transform total; activations above 1 (possible under additive
# noise) are clamped down so pseudo-ranges stay real.
ACTIVATION_FLOOR = 1e-12

_MAGIC = b"HMAP"
_HEADER = struct.Struct("<4sIIdd")


class EncodingMode(str, Enum):
    """How the Gaussian center is placed on the heatmap grid."""

    UNBIASED = "unbiased"
    BIASED = "biased"


@dataclass(frozen=True)
class Landmark:
    """Continuous 2-D coordinate in input-image pixels (u = column, v = row)."""

    u: float
    v: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.u) and np.isfinite(self.v)):
            raise DomainError(f"landmark coordinates must be finite, got ({self.u}, {self.v})")


@dataclass(frozen=True)
class EncodingConfig:
    """Parameters of the Gaussian heatmap encoding.

    Attributes:
        downsample: input pixels per heatmap pixel (>= 1).
        sigma: Gaussian standard deviation in heatmap pixels.
        heatmap_h, heatmap_w: grid dimensions.
        mode: unbiased (continuous center) or biased (center quantized to the
            nearest cell, round-half-up per axis).
    """

    downsample: int
    sigma: float
    heatmap_h: int
    heatmap_w: int
    mode: EncodingMode = EncodingMode.UNBIASED

    def __post_init__(self) -> None:
        if int(self.downsample) != self.downsample or self.downsample < 1:
            raise ConfigurationError(f"downsample must be a positive integer, got {self.downsample}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")
        if self.heatmap_h < 1 or self.heatmap_w < 1:
            raise ConfigurationError(
                f"heatmap dims must be >= 1, got {self.heatmap_h}x{self.heatmap_w}"
            )

    @property
    def image_w(self) -> int:
        return self.downsample * self.heatmap_w

    @property
    def image_h(self) -> int:
        return self.downsample * self.heatmap_h

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "h": self.heatmap_h,
            "w": self.heatmap_w,
            "sigma": self.sigma,
            "lambda": self.downsample,
            "mode": self.mode.value,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "EncodingConfig":
        return cls(
            downsample=int(data["lambda"]),
            sigma=float(data["sigma"]),
            heatmap_h=int(data["h"]),
            heatmap_w=int(data["w"]),
            mode=EncodingMode(data.get("mode", "unbiased")),
        )


@dataclass(frozen=True)
class Heatmap:
    """h x w grid of non-negative activations for one landmark.

    ``meta`` is the config that produced the map; it is None for maps loaded
    from external containers.  Treat ``values`` as immutable.
    """

    values: np.ndarray
    meta: EncodingConfig | None = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise DomainError(f"heatmap must be a non-empty 2-D grid, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise DomainError("heatmap contains non-finite values")
        if (arr < 0).any():
            raise DomainError("heatmap contains negative activations")
        object.__setattr__(self, "values", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class DistanceMap:
    """Per-cell pseudo-range (heatmap px) plus the sigma used in the transform."""

    values: np.ndarray
    sigma: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise DomainError(f"distance map must be a non-empty 2-D grid, got shape {arr.shape}")
        if not np.isfinite(arr).all() or (arr < 0).any():
            raise DomainError("distance map entries must be finite and non-negative")
        object.__setattr__(self, "values", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]


def _check_encodable(landmark: Landmark, cfg: EncodingConfig) -> None:
    if not (0.0 <= landmark.u < cfg.image_w and 0.0 <= landmark.v < cfg.image_h):
        raise DomainError(
            f"landmark ({landmark.u}, {landmark.v}) outside encodable bounds "
            f"[0, {cfg.image_w}) x [0, {cfg.image_h})"
        )


def _rasterize(center_u: float, center_v: float, cfg: EncodingConfig) -> np.ndarray:
    cols = np.arange(cfg.heatmap_w, dtype=np.float64)
    rows = np.arange(cfg.heatmap_h, dtype=np.float64)
    dx2 = (cols - center_u) ** 2
    dy2 = (rows - center_v) ** 2
    return np.exp(-(dy2[:, None] + dx2[None, :]) / (2.0 * cfg.sigma * cfg.sigma))


def encode_unbiased(landmark: Landmark, cfg: EncodingConfig) -> Heatmap:
    """Encode with the Gaussian centered at the exact continuous coordinate.

    The sub-pixel center is landmark / downsample with no rounding, so the
    heatmap retains full positional information.
    """
    _check_encodable(landmark, cfg)
    cu = landmark.u / cfg.downsample
    cv = landmark.v / cfg.downsample
    meta = EncodingConfig(cfg.downsample, cfg.sigma, cfg.heatmap_h, cfg.heatmap_w, EncodingMode.UNBIASED)
    return Heatmap(_rasterize(cu, cv, cfg), meta=meta)


def round_half_up(x: float) -> float:
    """Round to the nearest integer with halves going up (toward +inf)."""
    return float(np.floor(x + 0.5))


def encode_biased(landmark: Landmark, cfg: EncodingConfig) -> Heatmap:
    """Encode with the center quantized to the nearest grid cell.

    Quantization rounds half-up per axis and clamps to the grid, so the peak
    cell always holds exactly 1.  This reproduces the quantization error that
    the unbiased encoding avoids.
    """
    _check_encodable(landmark, cfg)
    cu = min(round_half_up(landmark.u / cfg.downsample), cfg.heatmap_w - 1)
    cv = min(round_half_up(landmark.v / cfg.downsample), cfg.heatmap_h - 1)
    meta = EncodingConfig(cfg.downsample, cfg.sigma, cfg.heatmap_h, cfg.heatmap_w, EncodingMode.BIASED)
    return Heatmap(_rasterize(cu, cv, cfg), meta=meta)


def encode(landmark: Landmark, cfg: EncodingConfig) -> Heatmap:
    """Encode according to ``cfg.mode``."""
    if cfg.mode is EncodingMode.BIASED:
        return encode_biased(landmark, cfg)
    return encode_unbiased(landmark, cfg)


def clamped_activations(values: np.ndarray) -> np.ndarray:
    """Clamp activations into [ACTIVATION_FLOOR, 1] for log-domain transforms."""
    return np.clip(values, ACTIVATION_FLOOR, 1.0)


def distance_transform(heatmap: Heatmap, sigma: float) -> DistanceMap:
    """Invert the Gaussian: D(i, j) = sqrt(-2 sigma^2 ln H(i, j)).

    Activations are clamped into [ACTIVATION_FLOOR, 1] first, so cells far
    from the peak get a large-but-finite pseudo-range and cells at exactly 1
    get 0.  For a clean unbiased encoding the result equals the true distance
    from each cell to the sub-pixel center wherever the activation is above
    the floor.
    """
    if not (np.isfinite(sigma) and sigma > 0):
        raise ConfigurationError(f"sigma must be positive, got {sigma}")
    arg = -2.0 * sigma * sigma * np.log(clamped_activations(heatmap.values))
    return DistanceMap(np.sqrt(np.maximum(arg, 0.0)), sigma=float(sigma))


@dataclass(frozen=True)
class HeatmapHeader:
    """Header of the binary heatmap container."""

    h: int
    w: int
    sigma: float
    downsample: float


def _resolve_header(heatmap: Heatmap, sigma: float | None, downsample: float | None) -> HeatmapHeader:
    if sigma is None:
        if heatmap.meta is None:
            raise DomainError("sigma required when the heatmap carries no encoding metadata")
        sigma = heatmap.meta.sigma
    if downsample is None:
        if heatmap.meta is None:
            raise DomainError("downsample required when the heatmap carries no encoding metadata")
        downsample = float(heatmap.meta.downsample)
    h, w = heatmap.shape
    return HeatmapHeader(h=h, w=w, sigma=float(sigma), downsample=float(downsample))


def write_heatmap(path: str | Path, heatmap: Heatmap, *, sigma: float | None = None,
                  downsample: float | None = None) -> None:
    """Write the flat binary container: little-endian header then row-major f64."""
    header = _resolve_header(heatmap, sigma, downsample)
    payload = _HEADER.pack(_MAGIC, header.h, header.w, header.sigma, header.downsample)
    body = np.ascontiguousarray(heatmap.values, dtype="<f8").tobytes()
    Path(path).write_bytes(payload + body)


def read_heatmap(path: str | Path) -> tuple[Heatmap, HeatmapHeader]:
    """Read the binary container written by :func:`write_heatmap`."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DomainError(f"{path}: truncated heatmap container")
    magic, h, w, sigma, downsample = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise DomainError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}")
    expected = _HEADER.size + 8 * h * w
    if len(raw) != expected:
        raise DomainError(f"{path}: expected {expected} bytes for {h}x{w} map, got {len(raw)}")
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(h, w).copy()
    return Heatmap(values), HeatmapHeader(h=h, w=w, sigma=sigma, downsample=downsample)


def heatmap_to_json_dict(heatmap: Heatmap, *, sigma: float | None = None,
                         downsample: float | None = None) -> dict[str, Any]:
    """Debug JSON form: {h, w, sigma, lambda, values} with row-major values."""
    header = _resolve_header(heatmap, sigma, downsample)
    return {
        "h": header.h,
        "w": header.w,
        "sigma": header.sigma,
        "lambda": header.downsample,
        "values": heatmap.values.ravel().tolist(),
    }


def heatmap_from_json_dict(data: Mapping[str, Any]) -> tuple[Heatmap, HeatmapHeader]:
    h = int(data["h"])
    w = int(data["w"])
    values = np.asarray(data["values"], dtype=np.float64)
    if values.size != h * w:
        raise DomainError(f"JSON heatmap declares {h}x{w} but carries {values.size} values")
    header = HeatmapHeader(h=h, w=w, sigma=float(data["sigma"]), downsample=float(data["lambda"]))
    return Heatmap(values.reshape(h, w)), header


def write_heatmap_json(path: str | Path, heatmap: Heatmap, *, sigma: float | None = None,
                       downsample: float | None = None) -> None:
    Path(path).write_text(
        json.dumps(heatmap_to_json_dict(heatmap, sigma=sigma, downsample=downsample)),
        encoding="utf-8",
    )


def read_heatmap_json(path: str | Path) -> tuple[Heatmap, HeatmapHeader]:
    return heatmap_from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))
