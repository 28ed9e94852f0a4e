"""heatdec: sub-pixel landmark decoding from Gaussian heatmaps.

Encode continuous landmarks as peak-1 Gaussians, invert activations into
per-cell pseudo-ranges, pick the top-K cells as anchor stations, and recover
the sub-pixel coordinate with interchangeable decoders - from plain argmax
to multilateration solved either iteratively (Gauss-Newton) or in a single
parallel grid-search step.  A benchmark harness compares the decoders'
accuracy and throughput across heatmap resolutions.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .anchors import Anchor, AnchorSet, anchor_mask, select_anchors, top_k_anchors
from .codec import (
    ACTIVATION_FLOOR,
    DistanceMap,
    EncodingConfig,
    EncodingMode,
    Heatmap,
    HeatmapHeader,
    Landmark,
    distance_transform,
    encode,
    encode_biased,
    encode_unbiased,
    read_heatmap,
    read_heatmap_json,
    write_heatmap,
    write_heatmap_json,
)
from .decoders import (
    DECODERS,
    BatchDecodeResult,
    CandidateGrid,
    DecodeConfig,
    DecodedLandmark,
    FlopCounter,
    candidate_grid,
    decode,
    decode_batch,
    decode_igno,
    decode_least_squares,
    decode_onehot,
    decode_pppsc,
    decode_taylor,
    decode_twohot,
    objective_eval,
    scan_pppsc,
)
from .errors import (
    ConfigurationError,
    DegenerateGeometryError,
    DegenerateInputError,
    DomainError,
    HeatdecError,
    PtsParseError,
)
from .metrics import LossValue, NmeReport, combined_loss, ma_loss, mse_loss, nme
from .synth import (
    AnnotationRecord,
    CorpusItem,
    HeatmapStack,
    NoiseKind,
    NoiseSpec,
    build_corpus,
    gen_landmarks,
    load_corpus,
    load_pts,
    perturb,
    save_corpus,
    write_pts,
)
from .bench import (
    BenchReport,
    BenchRow,
    CorpusSpec,
    SweepSpec,
    default_sweep_spec,
    default_throughput_spec,
    emit_report,
    report_from_json,
    run_accuracy_sweep,
    run_throughput,
)

__all__ = [
    "ACTIVATION_FLOOR",
    "Anchor",
    "AnchorSet",
    "AnnotationRecord",
    "BatchDecodeResult",
    "BenchReport",
    "BenchRow",
    "CandidateGrid",
    "ConfigurationError",
    "CorpusItem",
    "CorpusSpec",
    "DECODERS",
    "DecodeConfig",
    "DecodedLandmark",
    "DegenerateGeometryError",
    "DegenerateInputError",
    "DistanceMap",
    "DomainError",
    "EncodingConfig",
    "EncodingMode",
    "FlopCounter",
    "Heatmap",
    "HeatmapHeader",
    "HeatmapStack",
    "HeatdecError",
    "Landmark",
    "LossValue",
    "NmeReport",
    "NoiseKind",
    "NoiseSpec",
    "PtsParseError",
    "SweepSpec",
    "anchor_mask",
    "build_corpus",
    "candidate_grid",
    "combined_loss",
    "decode",
    "decode_batch",
    "decode_igno",
    "decode_least_squares",
    "decode_onehot",
    "decode_pppsc",
    "decode_taylor",
    "decode_twohot",
    "default_sweep_spec",
    "default_throughput_spec",
    "distance_transform",
    "emit_report",
    "encode",
    "encode_biased",
    "encode_unbiased",
    "gen_landmarks",
    "load_corpus",
    "load_pts",
    "ma_loss",
    "mse_loss",
    "nme",
    "objective_eval",
    "perturb",
    "read_heatmap",
    "read_heatmap_json",
    "report_from_json",
    "run_accuracy_sweep",
    "run_throughput",
    "save_corpus",
    "scan_pppsc",
    "select_anchors",
    "top_k_anchors",
    "write_heatmap",
    "write_heatmap_json",
    "write_pts",
]
