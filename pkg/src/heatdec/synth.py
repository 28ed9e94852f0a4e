"""Synthetic corpora and annotation ingestion.

Ground-truth landmarks are drawn uniformly inside a 10% inset margin of the
image (so default-width Gaussians are not border-truncated), encoded without
bias, and optionally perturbed with a controlled noise model.  All
randomness flows through numpy's seeded PCG64 generator with per-item
derived seeds, so corpora are reproducible bit-for-bit across machines and
independent of any parallel generation order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, NamedTuple

import numpy as np

from .codec import (
    EncodingConfig,
    Heatmap,
    Landmark,
    encode_unbiased,
    read_heatmap,
    write_heatmap,
)
from .decoders import decode_taylor
from .errors import ConfigurationError, DomainError, PtsParseError

INSET_MARGIN = 0.1
# additive-noise std for the "realistic" benchmark tier: degrades argmax
# decoding measurably without destroying anchor ordering
REALISTIC_NOISE_AMPLITUDE = 0.02

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class HeatmapStack:
    """Fixed set of same-sized heatmaps, one per landmark."""

    maps: tuple[Heatmap, ...]
    landmark_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.maps:
            raise DomainError("heatmap stack must hold at least one map")
        if len(self.maps) != len(self.landmark_ids):
            raise DomainError(
                f"{len(self.maps)} maps but {len(self.landmark_ids)} landmark ids"
            )
        dims = self.maps[0].shape
        for m in self.maps[1:]:
            if m.shape != dims:
                raise DomainError(f"stack dims differ: {m.shape} vs {dims}")

    @property
    def shape(self) -> tuple[int, int, int]:
        h, w = self.maps[0].shape
        return len(self.maps), h, w

    def values(self) -> np.ndarray:
        """Stacked activations, shape (n, h, w)."""
        return np.stack([m.values for m in self.maps])


class NoiseKind(str, Enum):
    NONE = "none"
    ADDITIVE_GAUSSIAN = "additive_gaussian"
    PEAK_JITTER = "peak_jitter"


@dataclass(frozen=True)
class NoiseSpec:
    """Perturbation model for synthetic predictions.

    ``amplitude`` is an activation std for additive noise and a heatmap-px
    std for peak jitter; it is ignored for kind ``none``.
    """

    kind: NoiseKind = NoiseKind.NONE
    amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ConfigurationError(f"amplitude must be finite and >= 0, got {self.amplitude}")

    def to_json_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "amplitude": self.amplitude, "seed": self.seed}

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "NoiseSpec":
        return cls(
            kind=NoiseKind(data.get("kind", "none")),
            amplitude=float(data.get("amplitude", 0.0)),
            seed=int(data.get("seed", 0)),
        )


@dataclass(frozen=True)
class AnnotationRecord:
    """Landmarks ingested from an annotation file."""

    source_path: str
    landmarks: tuple[Landmark, ...]
    image_dims: tuple[int, int] | None = None


class CorpusItem(NamedTuple):
    landmark: Landmark
    stack: HeatmapStack


def gen_landmarks(count: int, image_dims: tuple[int, int], seed: int) -> list[Landmark]:
    """Uniform random continuous landmarks inside the inset margin.

    ``image_dims`` is (W, H).  Identical (count, dims, seed) always yield the
    identical list.
    """
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    w, h = image_dims
    if w <= 0 or h <= 0:
        raise DomainError(f"image dims must be positive, got {image_dims}")
    rng = np.random.default_rng(seed)
    us = rng.uniform(INSET_MARGIN * w, (1.0 - INSET_MARGIN) * w, count)
    vs = rng.uniform(INSET_MARGIN * h, (1.0 - INSET_MARGIN) * h, count)
    return [Landmark(u=float(u), v=float(v)) for u, v in zip(us, vs)]


def _recover_center(heatmap: Heatmap) -> tuple[float, float]:
    # log-quadratic refinement is exact for clean interior Gaussians
    sigma = heatmap.meta.sigma if heatmap.meta is not None else 1.0
    res = decode_taylor(heatmap, sigma)
    return res.u, res.v


def perturb(heatmap: Heatmap, spec: NoiseSpec, *,
            rng: np.random.Generator | None = None,
            center: tuple[float, float] | None = None) -> Heatmap:
    """Apply the noise model; deterministic given the spec seed.

    Additive noise adds i.i.d. Gaussians and clamps into [0, 1].  Peak jitter
    re-encodes the map with its center displaced by a Gaussian offset of the
    given std; the true center can be supplied by callers that know it,
    otherwise it is recovered from the map itself.
    """
    if spec.kind is NoiseKind.NONE:
        return heatmap
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if spec.kind is NoiseKind.ADDITIVE_GAUSSIAN:
        if spec.amplitude == 0.0:
            return heatmap
        noisy = heatmap.values + rng.normal(0.0, spec.amplitude, heatmap.values.shape)
        return Heatmap(np.clip(noisy, 0.0, 1.0), meta=heatmap.meta)
    if spec.kind is NoiseKind.PEAK_JITTER:
        cfg = heatmap.meta
        if cfg is None:
            raise DomainError("peak jitter needs the encoding config carried by the heatmap")
        if center is None:
            center = _recover_center(heatmap)
        du, dv = rng.normal(0.0, spec.amplitude, 2)
        cu = float(np.clip(center[0] + du, 0.0, cfg.heatmap_w - 1.0))
        cv = float(np.clip(center[1] + dv, 0.0, cfg.heatmap_h - 1.0))
        jittered = Landmark(u=cu * cfg.downsample, v=cv * cfg.downsample)
        return encode_unbiased(jittered, cfg)
    raise ConfigurationError(f"unknown noise kind {spec.kind!r}")


def item_rng(seed: int, index: int) -> np.random.Generator:
    """Per-item generator derived from (seed, index); order-independent."""
    return np.random.default_rng([seed, index])


def build_corpus(landmarks: list[Landmark], cfg: EncodingConfig,
                 spec: NoiseSpec) -> list[CorpusItem]:
    """Encode each landmark (unbiased), perturb it, pair with ground truth."""
    items: list[CorpusItem] = []
    for i, lm in enumerate(landmarks):
        clean = encode_unbiased(lm, cfg)
        center = (lm.u / cfg.downsample, lm.v / cfg.downsample)
        noisy = perturb(clean, spec, rng=item_rng(spec.seed, i), center=center)
        stack = HeatmapStack(maps=(noisy,), landmark_ids=(str(i),))
        items.append(CorpusItem(landmark=lm, stack=stack))
    return items


def corpus_values(items: list[CorpusItem]) -> np.ndarray:
    """Stack every map of a single-landmark corpus into (B, h, w)."""
    return np.stack([item.stack.maps[0].values for item in items])


def save_corpus(directory: str | Path, items: list[CorpusItem],
                cfg: EncodingConfig, spec: NoiseSpec) -> Path:
    """Write binary heatmap files plus the JSON manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest_items = []
    for i, item in enumerate(items):
        files = []
        for map_idx, hm in enumerate(item.stack.maps):
            name = f"item_{i:05d}_{map_idx}.hmap"
            write_heatmap(directory / name, hm, sigma=cfg.sigma, downsample=float(cfg.downsample))
            files.append(name)
        manifest_items.append({
            "landmark": {"u": item.landmark.u, "v": item.landmark.v},
            "files": files,
        })
    manifest = {
        "seed": spec.seed,
        "cfg": cfg.to_json_dict(),
        "spec": spec.to_json_dict(),
        "items": manifest_items,
    }
    path = directory / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return path


def load_corpus(directory: str | Path) -> tuple[list[CorpusItem], EncodingConfig, NoiseSpec]:
    """Read a corpus directory written by :func:`save_corpus`."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DomainError(f"no {MANIFEST_NAME} in {directory}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    cfg = EncodingConfig.from_json_dict(manifest["cfg"])
    spec = NoiseSpec.from_json_dict(manifest["spec"])
    items: list[CorpusItem] = []
    for i, entry in enumerate(manifest["items"]):
        lm = Landmark(u=float(entry["landmark"]["u"]), v=float(entry["landmark"]["v"]))
        maps = []
        for name in entry["files"]:
            hm, _ = read_heatmap(directory / name)
            maps.append(Heatmap(hm.values, meta=cfg))
        stack = HeatmapStack(maps=tuple(maps), landmark_ids=tuple(str(i) for _ in maps))
        items.append(CorpusItem(landmark=lm, stack=stack))
    return items, cfg, spec


def load_pts(path: str | Path) -> AnnotationRecord:
    """Parse the text landmark annotation format.

    Expected layout: ``version: N``, ``n_points: N``, ``{``, N lines of
    ``x y`` (1-indexed coordinates), ``}``.  Coordinates are converted to
    0-indexed.  Any malformation raises a positioned parse error; a record is
    returned only when fully valid.
    """
    path = Path(path)
    spath = str(path)
    lines = path.read_text(encoding="utf-8").splitlines()

    def fail(message: str, line_no: int) -> PtsParseError:
        return PtsParseError(message, spath, line_no)

    # (line_no, stripped_text) with blanks dropped but positions kept
    numbered = [(i + 1, ln.strip()) for i, ln in enumerate(lines)]
    numbered = [(no, ln) for no, ln in numbered if ln]
    if not numbered:
        raise fail("empty file", 1)

    pos = 0
    no, ln = numbered[pos]
    if not ln.startswith("version:"):
        raise fail(f"expected 'version:' header, got {ln!r}", no)
    pos += 1
    if pos >= len(numbered):
        raise fail("missing 'n_points:' header", no)
    no, ln = numbered[pos]
    if not ln.startswith("n_points:"):
        raise fail(f"expected 'n_points:' header, got {ln!r}", no)
    try:
        n_points = int(ln.split(":", 1)[1].strip())
    except ValueError:
        raise fail(f"non-numeric point count in {ln!r}", no) from None
    if n_points < 1:
        raise fail(f"point count must be >= 1, got {n_points}", no)
    pos += 1
    if pos >= len(numbered) or numbered[pos][1] != "{":
        raise fail("expected opening '{'", numbered[min(pos, len(numbered) - 1)][0])
    pos += 1

    landmarks: list[Landmark] = []
    while pos < len(numbered) and numbered[pos][1] != "}":
        no, ln = numbered[pos]
        tokens = ln.split()
        if len(tokens) != 2:
            raise fail(f"expected 'x y', got {ln!r}", no)
        try:
            x = float(tokens[0])
            y = float(tokens[1])
        except ValueError:
            raise fail(f"non-numeric coordinate in {ln!r}", no) from None
        if not (np.isfinite(x) and np.isfinite(y)):
            raise fail(f"non-finite coordinate in {ln!r}", no)
        landmarks.append(Landmark(u=x - 1.0, v=y - 1.0))
        pos += 1

    if pos >= len(numbered):
        raise fail("missing closing '}'", numbered[-1][0])
    if len(landmarks) != n_points:
        raise fail(
            f"declared {n_points} points but found {len(landmarks)}", numbered[pos][0]
        )
    return AnnotationRecord(source_path=spath, landmarks=tuple(landmarks))


def write_pts(path: str | Path, record: AnnotationRecord) -> None:
    """Write landmarks in the annotation text format (1-indexed)."""
    lines = ["version: 1", f"n_points: {len(record.landmarks)}", "{"]
    lines += [f"{lm.u + 1.0} {lm.v + 1.0}" for lm in record.landmarks]
    lines.append("}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
