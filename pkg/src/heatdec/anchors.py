"""Top-K anchor selection: the decoding "stations" of the multilateration solvers.

Anchors are the k cells with the highest heatmap activation, each paired with
its pseudo-range from the distance map.  Selection is deterministic: equal
activations are ordered by row-major cell index, smaller index first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from . import _kernels
from .codec import ACTIVATION_FLOOR, DistanceMap, Heatmap, clamped_activations
from .errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class Anchor:
    """One multilateration station: an integer cell plus its pseudo-range."""

    x: int
    y: int
    d: float
    activation: float

    def __post_init__(self) -> None:
        if self.x < 0 or self.y < 0:
            raise DomainError(f"anchor cell must be non-negative, got ({self.x}, {self.y})")
        if not (np.isfinite(self.d) and self.d >= 0):
            raise DomainError(f"anchor pseudo-range must be finite and >= 0, got {self.d}")


@dataclass(frozen=True)
class AnchorSet:
    """Anchors ordered by descending activation (row-major index on ties)."""

    anchors: tuple[Anchor, ...]
    source_dims: tuple[int, int]

    def __post_init__(self) -> None:
        if not self.anchors:
            raise DomainError("anchor set must hold at least one anchor")
        h, w = self.source_dims
        for a in self.anchors:
            if a.x >= w or a.y >= h:
                raise DomainError(f"anchor ({a.x}, {a.y}) outside {h}x{w} source grid")
        if len({(a.y, a.x) for a in self.anchors}) != len(self.anchors):
            raise DomainError("anchor cells must be distinct")

    def __len__(self) -> int:
        return len(self.anchors)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (x, y, d) as float arrays in anchor order."""
        ax = np.array([a.x for a in self.anchors], dtype=np.float64)
        ay = np.array([a.y for a in self.anchors], dtype=np.float64)
        d = np.array([a.d for a in self.anchors], dtype=np.float64)
        return ax, ay, d

    def to_json(self) -> str:
        return json.dumps([
            {"x": a.x, "y": a.y, "d": a.d, "activation": a.activation} for a in self.anchors
        ])

    @classmethod
    def from_json(cls, text: str, source_dims: tuple[int, int]) -> "AnchorSet":
        items = json.loads(text)
        anchors = tuple(
            Anchor(x=int(it["x"]), y=int(it["y"]), d=float(it["d"]), activation=float(it["activation"]))
            for it in items
        )
        return cls(anchors=anchors, source_dims=source_dims)


def _check_k(k: int, n_cells: int) -> None:
    if k < 1 or k > n_cells:
        raise ConfigurationError(f"k must be in [1, {n_cells}], got {k}")


def top_k_cells(values: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Flat indices and activations of the top-k cells, (value desc, index asc).

    Single entry point for every selection consumer so the deterministic tie
    rule cannot drift between the mask, the anchor set, and the batch decoder.
    Callers pass validated activation grids (finite, non-negative).
    """
    flat = values.reshape(1, -1)
    _check_k(k, flat.shape[1])
    if 4 * k >= flat.shape[1]:
        # near-total selection: a stable full sort is cheaper than k insertions
        order = np.argsort(-flat[0], kind="stable")[:k]
        return order.astype(np.int64), flat[0][order]
    idx = np.empty((1, k), dtype=np.int64)
    val = np.empty((1, k), dtype=np.float64)
    _kernels.topk_rows(np.ascontiguousarray(flat), k, idx, val)
    return idx[0], val[0]


def select_anchors(heatmap: Heatmap, dmap: DistanceMap, k: int) -> AnchorSet:
    """Pair the top-k activation cells with their distance-map pseudo-ranges.

    Cells are chosen by heatmap activation, ranges read from the distance
    map; under the Gaussian transform the two rankings agree, but selecting
    by activation stays correct if a caller supplies a non-Gaussian map.
    """
    if heatmap.shape != dmap.shape:
        raise DomainError(f"heatmap {heatmap.shape} and distance map {dmap.shape} dims differ")
    h, w = heatmap.shape
    idx, act = top_k_cells(heatmap.values, k)
    dflat = dmap.values.ravel()
    anchors = tuple(
        Anchor(x=int(i % w), y=int(i // w), d=float(dflat[i]), activation=float(a))
        for i, a in zip(idx, act)
    )
    return AnchorSet(anchors=anchors, source_dims=(h, w))


def top_k_anchors(heatmap: Heatmap, sigma: float, k: int) -> AnchorSet:
    """Select anchors and compute their pseudo-ranges directly.

    Equivalent to ``select_anchors(h, distance_transform(h, sigma), k)`` but
    evaluates the transform only at the k selected cells, which keeps the
    per-heatmap decode path off the full-map log/sqrt.
    """
    if not (np.isfinite(sigma) and sigma > 0):
        raise ConfigurationError(f"sigma must be positive, got {sigma}")
    h, w = heatmap.shape
    idx, act = top_k_cells(heatmap.values, k)
    d = pseudo_ranges(act, sigma)
    anchors = tuple(
        Anchor(x=int(i % w), y=int(i // w), d=float(dv), activation=float(a))
        for i, a, dv in zip(idx, act, d)
    )
    return AnchorSet(anchors=anchors, source_dims=(h, w))


def pseudo_ranges(activations: np.ndarray, sigma: float) -> np.ndarray:
    """Distance transform applied to a bare activation array."""
    arg = -2.0 * sigma * sigma * np.log(clamped_activations(activations))
    return np.sqrt(np.maximum(arg, 0.0))


def anchor_mask(heatmap: Heatmap, k: int) -> np.ndarray:
    """Binary h x w mask with ones exactly at the top-k activation cells."""
    idx, _ = top_k_cells(heatmap.values, k)
    mask = np.zeros(heatmap.values.size, dtype=np.float64)
    mask[idx] = 1.0
    return mask.reshape(heatmap.shape)


def stack_mask(values: np.ndarray, k: int) -> np.ndarray:
    """Per-landmark top-k masks for an (n, h, w) activation stack."""
    n = values.shape[0]
    out = np.zeros((n, values.shape[1] * values.shape[2]), dtype=np.float64)
    for i in range(n):
        idx, _ = top_k_cells(values[i], k)
        out[i, idx] = 1.0
    return out.reshape(values.shape)


__all__: Iterable[str] = [
    "Anchor",
    "AnchorSet",
    "anchor_mask",
    "pseudo_ranges",
    "select_anchors",
    "stack_mask",
    "top_k_anchors",
    "top_k_cells",
]
