"""Accuracy sweeps and decode-throughput measurement.

The sweep grid crosses heatmap resolutions with decoders on a shared
synthetic corpus; accuracy fields are deterministic given the seed, timing
fields are the only nondeterministic outputs.  Throughput timing covers
decoding only - corpora are pre-encoded and held in memory - and each
decoder is measured over repeated whole-corpus passes with the first pass
discarded as warm-up.  The reported normalizer substitutes image width for
the interocular distance, which synthetic corpora do not have; every report
records the substitution.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import __version__
from .codec import EncodingConfig
from .decoders import DECODERS, DecodeConfig, decode_batch
from .errors import ConfigurationError, DomainError
from .synth import (
    REALISTIC_NOISE_AMPLITUDE,
    CorpusItem,
    NoiseKind,
    NoiseSpec,
    build_corpus,
    corpus_values,
    gen_landmarks,
    load_corpus,
)

DEFAULT_RESOLUTIONS: tuple[tuple[int, int], ...] = ((4, 4), (8, 8), (16, 16), (32, 32), (64, 64))
DEFAULT_IMAGE_SIZE = 256
THROUGHPUT_RESOLUTION = (64, 64)
THROUGHPUT_CORPUS_SIZE = 2000
# a timed repetition shorter than this is stretched by decoding the corpus
# multiple times per repetition (recorded in the report)
MIN_REP_SECONDS = 0.05


@dataclass(frozen=True)
class CorpusSpec:
    """Generation parameters for a synthetic corpus."""

    count: int = 1000
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 7

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ConfigurationError(f"corpus count must be >= 1, got {self.count}")

    def to_json_dict(self) -> dict[str, Any]:
        return {"count": self.count, "noise": self.noise.to_json_dict(), "seed": self.seed}

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "CorpusSpec":
        return cls(
            count=int(data.get("count", 1000)),
            noise=NoiseSpec.from_json_dict(data.get("noise", {})),
            seed=int(data.get("seed", 7)),
        )


@dataclass(frozen=True)
class SweepSpec:
    """Full description of a benchmark run."""

    resolutions: tuple[tuple[int, int], ...] = DEFAULT_RESOLUTIONS
    decoders: tuple[str, ...] = DECODERS
    corpus: CorpusSpec | str = field(default_factory=CorpusSpec)
    decode_cfg: DecodeConfig = field(default_factory=DecodeConfig)
    repetitions: int = 3
    image_size: int = DEFAULT_IMAGE_SIZE

    def __post_init__(self) -> None:
        if not self.resolutions:
            raise ConfigurationError("sweep needs at least one resolution")
        if not self.decoders:
            raise ConfigurationError("sweep needs at least one decoder")
        for d in self.decoders:
            if d not in DECODERS:
                raise ConfigurationError(f"unknown decoder {d!r}; expected one of {DECODERS}")
        if self.repetitions < 1:
            raise ConfigurationError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.image_size < 1:
            raise ConfigurationError(f"image size must be >= 1, got {self.image_size}")

    def to_json_dict(self) -> dict[str, Any]:
        corpus: Any = self.corpus if isinstance(self.corpus, str) else self.corpus.to_json_dict()
        return {
            "resolutions": [list(r) for r in self.resolutions],
            "decoders": list(self.decoders),
            "corpus": corpus,
            "decode_cfg": self.decode_cfg.to_json_dict(),
            "repetitions": self.repetitions,
            "image_size": self.image_size,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "SweepSpec":
        corpus_data = data.get("corpus", {})
        corpus: CorpusSpec | str
        if isinstance(corpus_data, str):
            corpus = corpus_data
        else:
            corpus = CorpusSpec.from_json_dict(corpus_data)
        return cls(
            resolutions=tuple(
                (int(r[0]), int(r[1])) for r in data.get("resolutions", DEFAULT_RESOLUTIONS)
            ),
            decoders=tuple(data.get("decoders", DECODERS)),
            corpus=corpus,
            decode_cfg=DecodeConfig.from_json_dict(data.get("decode_cfg", {})),
            repetitions=int(data.get("repetitions", 3)),
            image_size=int(data.get("image_size", DEFAULT_IMAGE_SIZE)),
        )


def default_sweep_spec(seed: int = 7) -> SweepSpec:
    """The standard accuracy grid: 5 resolutions x 6 decoders, noiseless corpus."""
    return SweepSpec(corpus=CorpusSpec(count=1000, noise=NoiseSpec(), seed=seed))


def default_throughput_spec(seed: int = 7) -> SweepSpec:
    """The standard timing run: 64x64 maps from 256px inputs, realistic noise tier.

    The noise tier stands in for imperfect upstream predictions; clean
    synthetic Gaussians are a degenerate best case for the iterative solver.
    """
    noise = NoiseSpec(kind=NoiseKind.ADDITIVE_GAUSSIAN, amplitude=REALISTIC_NOISE_AMPLITUDE, seed=seed)
    return SweepSpec(
        resolutions=(THROUGHPUT_RESOLUTION,),
        corpus=CorpusSpec(count=THROUGHPUT_CORPUS_SIZE, noise=noise, seed=seed),
        repetitions=3,
    )


@dataclass
class BenchRow:
    resolution: str
    decoder: str
    mean_nme: float
    std_nme: float
    mean_px_error: float
    throughput: float
    latency: float
    failures: int

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "resolution": self.resolution,
            "decoder": self.decoder,
            "mean_nme": self.mean_nme,
            "std_nme": self.std_nme,
            "mean_px_error": self.mean_px_error,
            "throughput": self.throughput,
            "latency": self.latency,
            "failures": self.failures,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "BenchRow":
        return cls(
            resolution=str(data["resolution"]),
            decoder=str(data["decoder"]),
            mean_nme=float(data["mean_nme"]),
            std_nme=float(data["std_nme"]),
            mean_px_error=float(data["mean_px_error"]),
            throughput=float(data["throughput"]),
            latency=float(data["latency"]),
            failures=int(data["failures"]),
        )


@dataclass
class BenchReport:
    rows: list[BenchRow]
    environment: dict[str, Any]

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "environment": dict(self.environment),
            "rows": [r.to_json_dict() for r in self.rows],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping[str, Any]) -> "BenchReport":
        return cls(
            rows=[BenchRow.from_json_dict(r) for r in data["rows"]],
            environment=dict(data.get("environment", {})),
        )

    def row(self, resolution: str, decoder: str) -> BenchRow:
        for r in self.rows:
            if r.resolution == resolution and r.decoder == decoder:
                return r
        raise KeyError(f"no row for ({resolution}, {decoder})")


def _resolution_label(res: tuple[int, int]) -> str:
    return f"{res[0]}x{res[1]}"


def _materialize_corpus(
    spec: SweepSpec, res: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Corpus for one resolution: (values, gt_u, gt_v, downsample)."""
    h, w = res
    if isinstance(spec.corpus, str):
        items, cfg, _noise = load_corpus(spec.corpus)
        if (cfg.heatmap_h, cfg.heatmap_w) != (h, w):
            raise DomainError(
                f"corpus at {spec.corpus} is {cfg.heatmap_h}x{cfg.heatmap_w}, "
                f"but the sweep requests {h}x{w}"
            )
        lam = float(cfg.downsample)
    else:
        if spec.image_size % h != 0 or spec.image_size % w != 0:
            raise ConfigurationError(
                f"image size {spec.image_size} is not divisible by resolution {h}x{w}"
            )
        lam = spec.image_size / h
        cfg = EncodingConfig(
            downsample=int(lam),
            sigma=spec.decode_cfg.sigma,
            heatmap_h=h,
            heatmap_w=w,
        )
        landmarks = gen_landmarks(
            spec.corpus.count, (spec.image_size, spec.image_size), spec.corpus.seed
        )
        items = build_corpus(landmarks, cfg, spec.corpus.noise)
    values = corpus_values(items)
    gt_u = np.array([it.landmark.u for it in items])
    gt_v = np.array([it.landmark.v for it in items])
    return values, gt_u, gt_v, lam


def _accuracy_fields(
    values: np.ndarray,
    gt_u: np.ndarray,
    gt_v: np.ndarray,
    lam: float,
    image_w: float,
    decoder: str,
    cfg: DecodeConfig,
) -> tuple[float, float, float, int, float]:
    """Decode once; returns (mean_nme, std_nme, mean_px_error, failures, wall_time)."""
    t0 = time.perf_counter()
    result = decode_batch(values, decoder, cfg)
    wall = time.perf_counter() - t0
    ok = np.isfinite(result.u) & np.isfinite(result.v)
    if ok.any():
        err = np.hypot(result.u[ok] * lam - gt_u[ok], result.v[ok] * lam - gt_v[ok])
        nme_errs = err / image_w
        mean_nme = float(nme_errs.mean())
        std_nme = float(nme_errs.std())
        mean_px = float(err.mean())
    else:
        mean_nme = std_nme = mean_px = float("nan")
    return mean_nme, std_nme, mean_px, len(result.failures), wall


def _base_environment(spec: SweepSpec, kind: str) -> dict[str, Any]:
    corpus: Any = spec.corpus if isinstance(spec.corpus, str) else spec.corpus.to_json_dict()
    return {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "kind": kind,
        "seed": None if isinstance(spec.corpus, str) else spec.corpus.seed,
        "version": __version__,
        "normalizer": "image_width",
        "corpus": corpus,
        "decode_cfg": spec.decode_cfg.to_json_dict(),
        "image_size": spec.image_size,
    }


def run_accuracy_sweep(spec: SweepSpec) -> BenchReport:
    """Decode every corpus item for each (resolution, decoder) cell.

    Heatmap-pixel results are scaled back to input pixels through the
    downsampling factor before the error statistics; normalized errors use
    the image width as scale.  Decoder failures are counted per row, never
    fatal.  Accuracy fields are a pure function of (spec, seed).
    """
    rows: list[BenchRow] = []
    for res in spec.resolutions:
        values, gt_u, gt_v, lam = _materialize_corpus(spec, res)
        image_w = lam * res[1]
        for decoder in spec.decoders:
            mean_nme, std_nme, mean_px, failures, wall = _accuracy_fields(
                values, gt_u, gt_v, lam, image_w, decoder, spec.decode_cfg
            )
            n = values.shape[0]
            rows.append(
                BenchRow(
                    resolution=_resolution_label(res),
                    decoder=decoder,
                    mean_nme=mean_nme,
                    std_nme=std_nme,
                    mean_px_error=mean_px,
                    throughput=n / wall if wall > 0 else float("inf"),
                    latency=wall / n,
                    failures=failures,
                )
            )
    report = BenchReport(rows=rows, environment=_base_environment(spec, "accuracy"))
    _check_complete(report, spec)
    return report


def run_throughput(spec: SweepSpec) -> BenchReport:
    """Wall-clock decode-only timing over pre-encoded corpora.

    Each decoder runs ``repetitions`` whole-corpus passes; the first pass is
    discarded as warm-up (it also absorbs any JIT compilation), and
    throughput is decoded-items / summed-wall-time of the remaining passes.
    Repetitions shorter than the timer floor are stretched by decoding the
    corpus several times per pass; the stretch factor is recorded.
    """
    if spec.repetitions < 3:
        raise ConfigurationError(
            f"throughput runs need >= 3 repetitions (first is warm-up), got {spec.repetitions}"
        )
    rows: list[BenchRow] = []
    adjustments: dict[str, int] = {}
    for res in spec.resolutions:
        values, gt_u, gt_v, lam = _materialize_corpus(spec, res)
        image_w = lam * res[1]
        n = values.shape[0]
        for decoder in spec.decoders:
            mean_nme, std_nme, mean_px, failures, warm_wall = _accuracy_fields(
                values, gt_u, gt_v, lam, image_w, decoder, spec.decode_cfg
            )
            inner = 1
            if warm_wall < MIN_REP_SECONDS:
                inner = int(math.ceil(MIN_REP_SECONDS / max(warm_wall, 1e-9)))
                adjustments[f"{_resolution_label(res)}/{decoder}"] = inner
            total = 0.0
            for _ in range(spec.repetitions - 1):
                t0 = time.perf_counter()
                for _i in range(inner):
                    decode_batch(values, decoder, spec.decode_cfg)
                total += time.perf_counter() - t0
            decoded = n * inner * (spec.repetitions - 1)
            rows.append(
                BenchRow(
                    resolution=_resolution_label(res),
                    decoder=decoder,
                    mean_nme=mean_nme,
                    std_nme=std_nme,
                    mean_px_error=mean_px,
                    throughput=decoded / total,
                    latency=total / decoded,
                    failures=failures,
                )
            )
    environment = _base_environment(spec, "throughput")
    environment["repetitions"] = spec.repetitions
    environment["warmup_repetitions_discarded"] = 1
    if adjustments:
        environment["batch_adjustments"] = adjustments
    report = BenchReport(rows=rows, environment=environment)
    _check_complete(report, spec)
    return report


def _check_complete(report: BenchReport, spec: SweepSpec) -> None:
    seen = {(r.resolution, r.decoder) for r in report.rows}
    wanted = {(_resolution_label(res), d) for res in spec.resolutions for d in spec.decoders}
    if seen != wanted or len(report.rows) != len(wanted):
        raise DomainError(f"report grid incomplete: got {sorted(seen)}, wanted {sorted(wanted)}")


CSV_COLUMNS = (
    "resolution",
    "decoder",
    "mean_nme",
    "std_nme",
    "mean_px_error",
    "throughput",
    "latency",
    "failures",
)

REPORT_FORMATS = ("json", "csv", "markdown")


def emit_report(report: BenchReport, fmt: str = "json") -> str:
    """Serialize a report as json, csv (fixed columns), or a markdown table."""
    if not report.rows:
        raise DomainError("cannot emit a report with no rows")
    if fmt == "json":
        return json.dumps(report.to_json_dict(), indent=2)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in report.rows:
            d = r.to_json_dict()
            writer.writerow([d[c] for c in CSV_COLUMNS])
        return buf.getvalue()
    if fmt == "markdown":
        lines = [
            "| " + " | ".join(CSV_COLUMNS) + " |",
            "|" + "|".join(["---"] * len(CSV_COLUMNS)) + "|",
        ]
        for r in report.rows:
            d = r.to_json_dict()
            cells = [
                f"{d[c]:.6g}" if isinstance(d[c], float) else str(d[c]) for c in CSV_COLUMNS
            ]
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"
    raise ConfigurationError(f"unknown report format {fmt!r}; expected one of {REPORT_FORMATS}")


def report_from_json(text: str) -> BenchReport:
    return BenchReport.from_json_dict(json.loads(text))


def write_report(report: BenchReport, path: str | Path, fmt: str = "json") -> None:
    Path(path).write_text(emit_report(report, fmt), encoding="utf-8")
