"""Training-side loss formulas and the normalized mean error metric.

All functions are pure and operate on heatmap stacks or landmark lists; no
gradients are produced.  The anchor loss concentrates the penalty on the
top-K cells so the pseudo-ranges the decoders rely on stay accurate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .anchors import stack_mask
from .codec import Landmark
from .errors import ConfigurationError, DomainError
from .synth import HeatmapStack

MASK_SOURCES = ("gt", "pred")
DEFAULT_LOSS_WEIGHT = 6.0


@dataclass(frozen=True)
class LossValue:
    """Scalar loss plus its named components."""

    value: float
    components: dict[str, float]

    def to_json_dict(self) -> dict[str, Any]:
        return {"value": self.value, "components": dict(self.components)}


@dataclass(frozen=True)
class NmeReport:
    """Per-landmark normalized errors and their mean."""

    per_landmark_errors: tuple[float, ...]
    mean: float
    normalizer: float

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "per_landmark_errors": list(self.per_landmark_errors),
            "mean": self.mean,
            "normalizer": self.normalizer,
        }


def _paired_arrays(pred: HeatmapStack, gt: HeatmapStack) -> tuple[np.ndarray, np.ndarray]:
    p = pred.values()
    g = gt.values()
    if p.shape != g.shape:
        raise DomainError(f"stack shapes differ: {p.shape} vs {g.shape}")
    return p, g


def mse_loss(pred: HeatmapStack, gt: HeatmapStack) -> LossValue:
    """Mean squared difference over all cells and landmarks."""
    p, g = _paired_arrays(pred, gt)
    value = float(np.mean((p - g) ** 2))
    return LossValue(value=value, components={"mse": value})


def ma_loss(pred: HeatmapStack, gt: HeatmapStack, k: int, mask_source: str = "gt") -> LossValue:
    """Masked anchor loss: per-landmark L2 norm over the top-k cells, summed.

    The mask holds ones at the top-k activation cells of the mask-source
    stack (ground truth by default, so the target is stable under prediction
    noise) and the per-landmark term is the Euclidean norm of the masked
    difference, not its square.
    """
    if mask_source not in MASK_SOURCES:
        raise ConfigurationError(f"mask_source must be one of {MASK_SOURCES}, got {mask_source!r}")
    p, g = _paired_arrays(pred, gt)
    n_cells = p.shape[1] * p.shape[2]
    if k < 1 or k > n_cells:
        raise ConfigurationError(f"k must be in [1, {n_cells}], got {k}")
    basis = g if mask_source == "gt" else p
    masks = stack_mask(basis, k)
    diff = (p - g) * masks
    per_landmark = np.sqrt((diff * diff).sum(axis=(1, 2)))
    value = float(per_landmark.sum())
    return LossValue(value=value, components={"ma": value})


def combined_loss(pred: HeatmapStack, gt: HeatmapStack, k: int, weight: float,
                  mask_source: str = "gt") -> LossValue:
    """mse + weight * ma with both components recorded."""
    if not (np.isfinite(weight) and weight >= 0):
        raise ConfigurationError(f"weight must be finite and >= 0, got {weight}")
    mse = mse_loss(pred, gt).value
    ma = ma_loss(pred, gt, k, mask_source).value
    return LossValue(value=mse + weight * ma, components={"mse": mse, "ma": ma})


def nme(pred: Sequence[Landmark], gt: Sequence[Landmark], normalizer: float) -> NmeReport:
    """Mean Euclidean landmark error divided by a scale normalizer."""
    if len(pred) == 0 or len(pred) != len(gt):
        raise DomainError(f"landmark lists must be non-empty and equal length, got {len(pred)} vs {len(gt)}")
    if not (np.isfinite(normalizer) and normalizer > 0):
        raise ConfigurationError(f"normalizer must be positive, got {normalizer}")
    errs = tuple(
        float(np.hypot(p.u - g.u, p.v - g.v) / normalizer) for p, g in zip(pred, gt)
    )
    return NmeReport(per_landmark_errors=errs, mean=float(np.mean(errs)), normalizer=float(normalizer))
