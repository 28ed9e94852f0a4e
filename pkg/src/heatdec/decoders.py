"""Sub-pixel landmark decoders.

Six interchangeable strategies recover a continuous (u, v) coordinate from a
heatmap:

* ``onehot``  - argmax cell, the fastest and coarsest baseline.
* ``twohot``  - argmax shifted a quarter pixel toward its strongest 4-neighbor.
* ``taylor``  - second-order refinement on the log-heatmap (exact for clean
  Gaussians, whose log is a quadratic).
* ``lsq``     - closed-form multilateration: anchor-difference linearization
  of the range equations solved by normal equations.
* ``igno``    - iterative Gauss-Newton on the range residuals with a
  step-halving guard.
* ``pppsc``   - single-step search: evaluate the range objective for every
  candidate on a sub-pixel grid around the argmax and take the argmin.

The grid decoder's parallel evaluation is bit-identical to a sequential
exhaustive scan of the same candidates; tests enforce this against both the
numpy reference here and the compiled batch kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import _kernels
from .anchors import AnchorSet, pseudo_ranges, select_anchors, top_k_anchors, top_k_cells
from .codec import ACTIVATION_FLOOR, DistanceMap, Heatmap
from .errors import (
    ConfigurationError,
    DegenerateGeometryError,
    DegenerateInputError,
    DomainError,
)

DECODERS = ("onehot", "twohot", "taylor", "lsq", "igno", "pppsc")

# step-halving attempts before the Gauss-Newton iteration gives up on a step
_MAX_HALVINGS = 8


@dataclass(frozen=True)
class DecodeConfig:
    """Decoder hyperparameters.

    Attributes:
        k: anchor count for the multilateration decoders.
        tau: candidate samples per heatmap pixel per axis.
        window: search half-extent around the argmax, heatmap px.
        max_iter: Gauss-Newton iteration cap.
        conv_tol: Gauss-Newton halt threshold on the accepted update norm.
        sigma: Gaussian std used when deriving pseudo-ranges from activations.
    """

    k: int = 10
    tau: int = 10
    window: float = 1.0
    max_iter: int = 20
    conv_tol: float = 1e-8
    sigma: float = 2.0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigurationError(f"k must be >= 1, got {self.k}")
        if int(self.tau) != self.tau or self.tau < 1:
            raise ConfigurationError(f"tau must be a positive integer, got {self.tau}")
        if not (np.isfinite(self.window) and self.window > 0):
            raise ConfigurationError(f"window must be positive, got {self.window}")
        if self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be >= 1, got {self.max_iter}")
        if not (np.isfinite(self.conv_tol) and self.conv_tol > 0):
            raise ConfigurationError(f"conv_tol must be positive, got {self.conv_tol}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "tau": self.tau,
            "window": self.window,
            "max_iter": self.max_iter,
            "conv_tol": self.conv_tol,
            "sigma": self.sigma,
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "DecodeConfig":
        return cls(
            k=int(data.get("k", 10)),
            tau=int(data.get("tau", 10)),
            window=float(data.get("window", 1.0)),
            max_iter=int(data.get("max_iter", 20)),
            conv_tol=float(data.get("conv_tol", 1e-8)),
            sigma=float(data.get("sigma", 2.0)),
        )


@dataclass(frozen=True)
class DecodedLandmark:
    """Decoder output in continuous heatmap-pixel coordinates.

    ``objective`` is the final range-residual value (multilateration decoders
    only), ``iterations`` the Gauss-Newton step count, and ``degenerate``
    marks results produced by a documented fallback (singular Hessian or
    singular normal matrix).
    """

    u: float
    v: float
    objective: float | None = None
    iterations: int | None = None
    degenerate: bool = False

    def __post_init__(self) -> None:
        if not (np.isfinite(self.u) and np.isfinite(self.v)):
            raise DomainError(f"decoded coordinate must be finite, got ({self.u}, {self.v})")
        if self.objective is not None and not (np.isfinite(self.objective) and self.objective >= 0):
            raise DomainError(f"objective must be finite and >= 0, got {self.objective}")

    def to_json_dict(self, decoder: str) -> dict[str, Any]:
        out: dict[str, Any] = {"u": self.u, "v": self.v, "decoder": decoder}
        if self.objective is not None:
            out["objective"] = self.objective
        if self.iterations is not None:
            out["iterations"] = self.iterations
        return out


@dataclass(frozen=True)
class CandidateGrid:
    """Axis-aligned candidate lattice centered on the argmax cell.

    Axis coordinates are materialized once at construction (``us``, ``vs``)
    and every consumer reads those arrays, so the sequential scan, the numpy
    evaluation, and the compiled kernel all see bit-identical candidates.
    Candidate i = iv * count_u + iu sits at (us[iu], vs[iv]): row-major with
    u fastest.
    """

    origin_u: float
    origin_v: float
    spacing: float
    count_u: int
    count_v: int
    us: np.ndarray = field(repr=False, compare=False)
    vs: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.spacing <= 0:
            raise ConfigurationError(f"grid spacing must be positive, got {self.spacing}")
        if self.count_u < 1 or self.count_v < 1 or self.us.size != self.count_u or self.vs.size != self.count_v:
            raise DomainError("candidate grid axis arrays do not match declared counts")

    @property
    def n_candidates(self) -> int:
        return self.count_u * self.count_v

    def flat_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Candidate coordinates in row-major order (u varies fastest)."""
        return np.tile(self.us, self.count_v), np.repeat(self.vs, self.count_u)


def grid_offsets(tau: int, window: float) -> np.ndarray:
    """Symmetric per-axis offsets: multiples of 1/tau within +-window.

    The count per axis is 2*floor(window*tau) + 1, always odd, so the grid
    center is exactly the argmax coordinate and every offset stays within the
    window half-extent.
    """
    m = int(np.floor(window * tau))
    spacing = 1.0 / tau
    return (np.arange(2 * m + 1, dtype=np.float64) - m) * spacing


def candidate_grid(center_u: float, center_v: float, cfg: DecodeConfig,
                   dims: tuple[int, int]) -> CandidateGrid:
    """Build the search grid around a center cell, truncated at map bounds.

    Truncation drops out-of-bounds offsets instead of shifting the lattice,
    so the argmax stays the grid center whenever the full window fits.
    """
    h, w = dims
    offs = grid_offsets(cfg.tau, cfg.window)
    us = center_u + offs
    vs = center_v + offs
    us = us[(us >= 0.0) & (us <= w - 1.0)]
    vs = vs[(vs >= 0.0) & (vs <= h - 1.0)]
    if us.size == 0 or vs.size == 0:
        raise DomainError(f"candidate grid for center ({center_u}, {center_v}) is empty")
    return CandidateGrid(
        origin_u=float(us[0]),
        origin_v=float(vs[0]),
        spacing=1.0 / cfg.tau,
        count_u=int(us.size),
        count_v=int(vs.size),
        us=us,
        vs=vs,
    )


@dataclass
class FlopCounter:
    """Accumulates counted floating-point operations of objective_eval."""

    flops: int = 0

    def add(self, n: int) -> None:
        self.flops += int(n)


def objective_eval(grid: CandidateGrid, anchor_set: AnchorSet,
                   counter: FlopCounter | None = None) -> np.ndarray:
    """Range objective for every candidate: E[i] = sum_q(resid_iq^2).

    The residual for candidate i and anchor q is computed as
    ``(cu_i - x_q)^2 + ((cv_i - y_q)^2 - d_q^2)`` and its square accumulated
    in ascending anchor order.  The expression shape and accumulation order
    are pinned so the sequential scan, this vectorized path, and the batch
    kernel produce bit-identical values.
    """
    cu, cv = grid.flat_points()
    ax, ay, d = anchor_set.as_arrays()
    d2 = d * d
    n = cu.size
    if counter is not None:
        counter.add(d.size)  # squaring the pseudo-ranges
    e = np.zeros(n, dtype=np.float64)
    for q in range(d2.size):
        du = cu - ax[q]
        du *= du
        dv = cv - ay[q]
        dv *= dv
        dv -= d2[q]
        t = du + dv
        t *= t
        e += t
        if counter is not None:
            counter.add(8 * n)
    return e


def _argmax_cell(values: np.ndarray) -> tuple[int, int]:
    """Row-major first argmax as (x, y); rejects undecodable maps."""
    if values.size == 0 or not np.isfinite(values).all():
        raise DegenerateInputError("heatmap is empty or non-finite")
    flat_idx = int(values.argmax())
    if values.flat[flat_idx] <= 0.0:
        raise DegenerateInputError("heatmap has no positive activation")
    w = values.shape[1]
    return flat_idx % w, flat_idx // w


def decode_onehot(heatmap: Heatmap) -> DecodedLandmark:
    """Argmax cell coordinate; ties resolved by row-major index."""
    x, y = _argmax_cell(heatmap.values)
    return DecodedLandmark(u=float(x), v=float(y))


def decode_twohot(heatmap: Heatmap) -> DecodedLandmark:
    """Argmax shifted 0.25 px toward its strongest in-bounds 4-neighbor."""
    values = heatmap.values
    if values.size < 2:
        raise DegenerateInputError("two-hot decoding needs at least 2 cells")
    x, y = _argmax_cell(values)
    h, w = values.shape
    best_val = -np.inf
    best = (y, x)
    # row-major neighbor order fixes ties deterministically
    for ny, nx in ((y - 1, x), (y, x - 1), (y, x + 1), (y + 1, x)):
        if 0 <= ny < h and 0 <= nx < w and values[ny, nx] > best_val:
            best_val = values[ny, nx]
            best = (ny, nx)
    ny, nx = best
    return DecodedLandmark(u=x + 0.25 * np.sign(nx - x), v=y + 0.25 * np.sign(ny - y))


def decode_taylor(heatmap: Heatmap, sigma: float) -> DecodedLandmark:
    """Quadratic refinement of the argmax on the log-heatmap.

    Uses central finite differences on the 3x3 neighborhood; the offset is
    clamped to +-1 px.  Falls back to the argmax when it sits on the border,
    and to the argmax with ``degenerate=True`` when the Hessian is singular.
    ``sigma`` is accepted for interface parity with the distance-based
    decoders; the quadratic model itself does not need it.
    """
    del sigma
    values = heatmap.values
    x, y = _argmax_cell(values)
    h, w = values.shape
    if x == 0 or x == w - 1 or y == 0 or y == h - 1:
        return DecodedLandmark(u=float(x), v=float(y))
    logv = np.log(np.clip(values[y - 1 : y + 2, x - 1 : x + 2], ACTIVATION_FLOOR, 1.0))
    gx = 0.5 * (logv[1, 2] - logv[1, 0])
    gy = 0.5 * (logv[2, 1] - logv[0, 1])
    hxx = logv[1, 2] - 2.0 * logv[1, 1] + logv[1, 0]
    hyy = logv[2, 1] - 2.0 * logv[1, 1] + logv[0, 1]
    hxy = 0.25 * (logv[2, 2] - logv[2, 0] - logv[0, 2] + logv[0, 0])
    det = hxx * hyy - hxy * hxy
    with np.errstate(divide="ignore", invalid="ignore"):
        off_u = -(hyy * gx - hxy * gy) / det
        off_v = -(hxx * gy - hxy * gx) / det
    if not (np.isfinite(off_u) and np.isfinite(off_v)):
        return DecodedLandmark(u=float(x), v=float(y), degenerate=True)
    off_u = float(np.clip(off_u, -1.0, 1.0))
    off_v = float(np.clip(off_v, -1.0, 1.0))
    return DecodedLandmark(u=x + off_u, v=y + off_v)


def decode_least_squares(anchor_set: AnchorSet) -> DecodedLandmark:
    """Closed-form multilateration via anchor-difference linearization.

    Subtracting the first anchor's circle equation from the others yields a
    linear system in (u, v), solved through its normal equations.
    """
    if len(anchor_set) < 3:
        raise DegenerateGeometryError(f"least-squares solve needs >= 3 anchors, got {len(anchor_set)}")
    ax, ay, d = anchor_set.as_arrays()
    d2 = d * d
    a = 2.0 * np.column_stack([ax[1:] - ax[0], ay[1:] - ay[0]])
    b = (ax[1:] ** 2 - ax[0] ** 2) + (ay[1:] ** 2 - ay[0] ** 2) - (d2[1:] - d2[0])
    if np.linalg.matrix_rank(a) < 2:
        raise DegenerateGeometryError("anchors are collinear; position is not identifiable")
    m = a.T @ a
    sol = np.linalg.solve(m, a.T @ b)
    u, v = float(sol[0]), float(sol[1])
    obj = _range_objective(ax, ay, d2, u, v)
    return DecodedLandmark(u=u, v=v, objective=obj)


def _range_objective(ax: np.ndarray, ay: np.ndarray, d2: np.ndarray, u: float, v: float) -> float:
    dx = ax - u
    dy = ay - v
    r = dx * dx + dy * dy - d2
    return float(r @ r)


def _igno_core(
    ax: np.ndarray,
    ay: np.ndarray,
    d2: np.ndarray,
    u: float,
    v: float,
    max_iter: int,
    conv_tol: float,
    trace: list[float] | None = None,
) -> tuple[float, float, float, int, bool]:
    """Gauss-Newton iteration on the range residuals.

    Residuals r_q = (x_q - u)^2 + (y_q - v)^2 - d_q^2; each step solves the
    2x2 normal equations (J^T J) delta = -J^T r.  A step that increases the
    objective is halved up to ``_MAX_HALVINGS`` times; if it still increases,
    iteration stops at the current (best) point.  Returns
    (u, v, objective, iterations, degenerate).
    """
    dx = ax - u
    dy = ay - v
    r = dx * dx + dy * dy - d2
    cur = float(r @ r)
    if trace is not None:
        trace.append(cur)
    iterations = 0
    for _ in range(max_iter):
        sxx = dx @ dx
        sxy = dx @ dy
        syy = dy @ dy
        m = np.array([[4.0 * sxx, 4.0 * sxy], [4.0 * sxy, 4.0 * syy]])
        rhs = np.array([2.0 * (dx @ r), 2.0 * (dy @ r)])
        try:
            step = np.linalg.solve(m, rhs)
        except np.linalg.LinAlgError:
            return u, v, cur, iterations, True
        if not np.isfinite(step).all():
            return u, v, cur, iterations, True
        alpha = 1.0
        accepted = False
        for _h in range(_MAX_HALVINGS + 1):
            nu = u + alpha * step[0]
            nv = v + alpha * step[1]
            ndx = ax - nu
            ndy = ay - nv
            nr = ndx * ndx + ndy * ndy - d2
            nobj = float(nr @ nr)
            if nobj <= cur:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        u, v, cur = float(nu), float(nv), nobj
        dx, dy, r = ndx, ndy, nr
        iterations += 1
        if trace is not None:
            trace.append(cur)
        if alpha * alpha * (step[0] * step[0] + step[1] * step[1]) < conv_tol * conv_tol:
            break
    return u, v, cur, iterations, False


def decode_igno(anchor_set: AnchorSet, cfg: DecodeConfig,
                init: DecodedLandmark | None = None,
                trace: list[float] | None = None) -> DecodedLandmark:
    """Iterative Gauss-Newton multilateration.

    Starts at ``init`` (default: the first anchor, i.e. the argmax cell) and
    stops when the accepted update norm drops below ``cfg.conv_tol`` or after
    ``cfg.max_iter`` steps.  ``trace``, when given, collects the objective at
    the start point and after each accepted step.
    """
    if len(anchor_set) < 2:
        raise DegenerateGeometryError(f"Gauss-Newton solve needs >= 2 anchors, got {len(anchor_set)}")
    ax, ay, d = anchor_set.as_arrays()
    if init is None:
        u0, v0 = float(ax[0]), float(ay[0])
    else:
        u0, v0 = float(init.u), float(init.v)
    if not (np.isfinite(u0) and np.isfinite(v0)):
        raise DomainError(f"initial guess must be finite, got ({u0}, {v0})")
    u, v, obj, iters, degenerate = _igno_core(
        ax, ay, d * d, u0, v0, cfg.max_iter, cfg.conv_tol, trace
    )
    return DecodedLandmark(u=u, v=v, objective=obj, iterations=iters, degenerate=degenerate)


def _pppsc_from_anchors(dims: tuple[int, int], anchor_set: AnchorSet, cfg: DecodeConfig,
                        counter: FlopCounter | None = None) -> DecodedLandmark:
    ax, ay, _ = anchor_set.as_arrays()
    grid = candidate_grid(float(ax[0]), float(ay[0]), cfg, dims)
    e = objective_eval(grid, anchor_set, counter)
    best = int(np.argmin(e))
    iu = best % grid.count_u
    iv = best // grid.count_u
    return DecodedLandmark(u=float(grid.us[iu]), v=float(grid.vs[iv]), objective=float(e[best]))


def decode_pppsc(heatmap: Heatmap, dmap: DistanceMap, cfg: DecodeConfig) -> DecodedLandmark:
    """Single-step grid search over the range objective.

    Selects anchors, lays a 1/tau lattice over +-window around the argmax
    (truncated at map bounds), evaluates the objective for every candidate
    against all anchors in one vectorized computation, and returns the
    row-major-first argmin.  The result is exactly the argmin of the
    enumerated grid - bit-identical to a sequential exhaustive scan.
    """
    if heatmap.shape != dmap.shape:
        raise DomainError(f"heatmap {heatmap.shape} and distance map {dmap.shape} dims differ")
    _argmax_cell(heatmap.values)  # degenerate-input check
    anchor_set = select_anchors(heatmap, dmap, cfg.k)
    return _pppsc_from_anchors(heatmap.shape, anchor_set, cfg)


def decode(heatmap: Heatmap, method: str, cfg: DecodeConfig,
           dmap: DistanceMap | None = None) -> DecodedLandmark:
    """Dispatch one heatmap to a decoder by name.

    The multilateration decoders need pseudo-ranges; when ``dmap`` is absent
    they are derived at the selected anchor cells only, which is equivalent
    to transforming the full map first.
    """
    if method not in DECODERS:
        raise ConfigurationError(f"unknown decoder {method!r}; expected one of {DECODERS}")
    if method == "onehot":
        return decode_onehot(heatmap)
    if method == "twohot":
        return decode_twohot(heatmap)
    if method == "taylor":
        return decode_taylor(heatmap, cfg.sigma)
    if dmap is not None:
        anchor_set = select_anchors(heatmap, dmap, cfg.k)
    else:
        anchor_set = top_k_anchors(heatmap, cfg.sigma, cfg.k)
    if method == "lsq":
        return decode_least_squares(anchor_set)
    if method == "igno":
        return decode_igno(anchor_set, cfg)
    _argmax_cell(heatmap.values)
    return _pppsc_from_anchors(heatmap.shape, anchor_set, cfg)


@dataclass
class BatchDecodeResult:
    """Array-valued decode results for a stack of heatmaps.

    Failed items carry NaN coordinates and are listed in ``failures`` as
    (index, message).  ``objective``/``iterations`` are None for decoders
    that do not produce them.
    """

    method: str
    u: np.ndarray
    v: np.ndarray
    objective: np.ndarray | None
    iterations: np.ndarray | None
    degenerate: np.ndarray
    failures: list[tuple[int, str]]

    @property
    def n_items(self) -> int:
        return self.u.size

    def item(self, i: int) -> DecodedLandmark:
        return DecodedLandmark(
            u=float(self.u[i]),
            v=float(self.v[i]),
            objective=None if self.objective is None else float(self.objective[i]),
            iterations=None if self.iterations is None else int(self.iterations[i]),
            degenerate=bool(self.degenerate[i]),
        )


# block width for the batched top-k fast path; per-block maxima let the
# kernel skip regions that cannot reach the running k-th value
_TOPK_BLOCK = 256


def _batch_topk(flat: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-wise top-k of a (B, n) array with the shared tie rule.

    Returns (indices, values, ok) where ok marks rows that are finite,
    non-negative, and positive somewhere; selection output for other rows is
    unspecified.
    """
    b, n = flat.shape
    if k < 1 or k > n:
        raise ConfigurationError(f"k must be in [1, {n}], got {k}")
    if 4 * k >= n:
        ok = _validate_rows(flat)
        sel = np.argsort(-flat, axis=1, kind="stable")[:, :k].astype(np.int64)
        return sel, np.take_along_axis(flat, sel, axis=1), ok
    idx = np.empty((b, k), dtype=np.int64)
    val = np.empty((b, k), dtype=np.float64)
    flatc = np.ascontiguousarray(flat)
    n_full = n // _TOPK_BLOCK
    if n_full >= 2:
        # numpy's SIMD reductions provide the block maxima and validity
        # stats; the kernel then touches only blocks that can matter
        head = flatc[:, : n_full * _TOPK_BLOCK].reshape(b, n_full, _TOPK_BLOCK)
        bmax = head.max(axis=2)
        row_max = bmax.max(axis=1)
        if n_full * _TOPK_BLOCK < n:
            tail_max = flatc[:, n_full * _TOPK_BLOCK :].max(axis=1)
            bmax = np.column_stack([bmax, tail_max])
            row_max = np.maximum(row_max, tail_max)
        row_min = flatc.min(axis=1)
        ok = (
            np.isfinite(row_max) & np.isfinite(row_min) & (row_min >= 0.0) & (row_max > 0.0)
        )
        _kernels.topk_rows_blocked(flatc, k, np.ascontiguousarray(bmax), _TOPK_BLOCK, idx, val)
    else:
        ok = _validate_rows(flatc)
        _kernels.topk_rows(flatc, k, idx, val)
    return idx, val, ok


def _validate_rows(flat: np.ndarray) -> np.ndarray:
    """Decodable rows: all entries finite and >= 0, with a positive maximum."""
    row_max = flat.max(axis=1)
    row_min = flat.min(axis=1)
    return (
        np.isfinite(row_max)
        & np.isfinite(row_min)
        & (row_min >= 0.0)
        & (row_max > 0.0)
    )


def _pppsc_batch(values: np.ndarray, cfg: DecodeConfig,
                 out_u: np.ndarray, out_v: np.ndarray, out_e: np.ndarray) -> np.ndarray:
    """Vectorized grid decode; border rows fall back to the per-item path."""
    b, h, w = values.shape
    flat = values.reshape(b, h * w)
    sel, act, ok = _batch_topk(flat, cfg.k)
    # selection output on invalid rows is unspecified; keep them out of log/sqrt
    d = np.zeros_like(act)
    valid_idx = np.flatnonzero(ok)
    d[valid_idx] = pseudo_ranges(act[valid_idx], cfg.sigma)
    d2 = d * d
    ax = (sel % w).astype(np.float64)
    ay = (sel // w).astype(np.float64)
    xm = ax[:, 0].copy()
    ym = ay[:, 0].copy()
    offs = grid_offsets(cfg.tau, cfg.window)
    full = (
        ok
        & (xm + offs[0] >= 0.0)
        & (xm + offs[-1] <= w - 1.0)
        & (ym + offs[0] >= 0.0)
        & (ym + offs[-1] <= h - 1.0)
    )
    idx_full = np.flatnonzero(full)
    if idx_full.size:
        sub_u = np.empty(idx_full.size)
        sub_v = np.empty(idx_full.size)
        sub_e = np.empty(idx_full.size)
        _kernels.grid_argmin_rows(
            np.ascontiguousarray(xm[idx_full]),
            np.ascontiguousarray(ym[idx_full]),
            offs,
            np.ascontiguousarray(ax[idx_full]),
            np.ascontiguousarray(ay[idx_full]),
            np.ascontiguousarray(d2[idx_full]),
            sub_u,
            sub_v,
            sub_e,
        )
        out_u[idx_full] = sub_u
        out_v[idx_full] = sub_v
        out_e[idx_full] = sub_e
    for i in np.flatnonzero(ok & ~full):
        anchor_set = _anchor_set_from_rows(sel[i], act[i], d[i], (h, w))
        res = _pppsc_from_anchors((h, w), anchor_set, cfg)
        out_u[i] = res.u
        out_v[i] = res.v
        out_e[i] = res.objective if res.objective is not None else np.nan
    return ok


def _anchor_set_from_rows(sel: np.ndarray, act: np.ndarray, d: np.ndarray,
                          dims: tuple[int, int]) -> AnchorSet:
    from .anchors import Anchor

    w = dims[1]
    anchors = tuple(
        Anchor(x=int(s % w), y=int(s // w), d=float(dv), activation=float(a))
        for s, a, dv in zip(sel, act, d)
    )
    return AnchorSet(anchors=anchors, source_dims=dims)


def decode_batch(values: np.ndarray, method: str, cfg: DecodeConfig) -> BatchDecodeResult:
    """Decode a (B, h, w) stack with one decoder.

    The single-step grid decoder and the argmax baseline run as vectorized
    batch computations (their math is data-independent across items); the
    iterative and refinement decoders run item by item because their control
    flow depends on each item's data.  Batch outputs are bit-identical to
    per-item decoding.
    """
    if method not in DECODERS:
        raise ConfigurationError(f"unknown decoder {method!r}; expected one of {DECODERS}")
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 3 or values.size == 0:
        raise DomainError(f"expected a non-empty (B, h, w) stack, got shape {values.shape}")
    b, h, w = values.shape
    flat = values.reshape(b, h * w)

    out_u = np.full(b, np.nan)
    out_v = np.full(b, np.nan)
    degenerate = np.zeros(b, dtype=bool)
    objective: np.ndarray | None = None
    iterations: np.ndarray | None = None
    item_failures: list[tuple[int, str]] = []

    if method == "onehot":
        ok = _validate_rows(flat)
        am = flat.argmax(axis=1)  # garbage on bad rows, masked below
        out_u[ok] = (am % w)[ok].astype(np.float64)
        out_v[ok] = (am // w)[ok].astype(np.float64)
    elif method == "pppsc":
        objective = np.full(b, np.nan)
        ok = _pppsc_batch(values, cfg, out_u, out_v, objective)
    elif method == "igno":
        # anchor selection validates each row in its own pass
        sel_all, act_all, ok = _batch_topk(flat, cfg.k)
        objective = np.full(b, np.nan)
        iterations = np.zeros(b, dtype=np.int64)
        d_all = np.zeros_like(act_all)
        valid_idx = np.flatnonzero(ok)
        d_all[valid_idx] = pseudo_ranges(act_all[valid_idx], cfg.sigma)
        for i in np.flatnonzero(ok):
            ax = (sel_all[i] % w).astype(np.float64)
            ay = (sel_all[i] // w).astype(np.float64)
            d = d_all[i]
            u, v, obj, iters, degen = _igno_core(
                ax, ay, d * d, float(ax[0]), float(ay[0]), cfg.max_iter, cfg.conv_tol
            )
            out_u[i], out_v[i], objective[i] = u, v, obj
            iterations[i] = iters
            degenerate[i] = degen
    else:
        ok = _validate_rows(flat)
        per_item: Callable[[Heatmap], DecodedLandmark]
        if method == "twohot":
            per_item = decode_twohot
        elif method == "taylor":
            per_item = lambda hm: decode_taylor(hm, cfg.sigma)  # noqa: E731
        else:  # lsq
            objective = np.full(b, np.nan)
            per_item = lambda hm: decode_least_squares(  # noqa: E731
                top_k_anchors(hm, cfg.sigma, cfg.k)
            )
        for i in np.flatnonzero(ok):
            try:
                res = per_item(Heatmap(values[i]))
            except (DegenerateGeometryError, DegenerateInputError) as exc:
                item_failures.append((int(i), str(exc)))
                continue
            out_u[i], out_v[i] = res.u, res.v
            degenerate[i] = res.degenerate
            if objective is not None and res.objective is not None:
                objective[i] = res.objective

    failures = [
        (int(i), "heatmap is empty, non-finite, or has no positive activation")
        for i in np.flatnonzero(~ok)
    ] + item_failures
    failures.sort()
    return BatchDecodeResult(method, out_u, out_v, objective, iterations, degenerate, failures)


def scan_pppsc(heatmap: Heatmap, dmap: DistanceMap, cfg: DecodeConfig) -> DecodedLandmark:
    """Sequential exhaustive reference scan of the pppsc candidate grid.

    Plain Python loops over the same grid, anchors, and residual expression;
    first strict minimum wins.  Exists as the equivalence oracle for the
    vectorized and compiled paths (and as executable documentation of the
    decode semantics).
    """
    if heatmap.shape != dmap.shape:
        raise DomainError(f"heatmap {heatmap.shape} and distance map {dmap.shape} dims differ")
    _argmax_cell(heatmap.values)
    anchor_set = select_anchors(heatmap, dmap, cfg.k)
    ax, ay, d = anchor_set.as_arrays()
    grid = candidate_grid(float(ax[0]), float(ay[0]), cfg, heatmap.shape)
    axl = [float(x) for x in ax]
    ayl = [float(y) for y in ay]
    d2l = [float(x) * float(x) for x in d]
    best_e = np.inf
    best_u = float(ax[0])
    best_v = float(ay[0])
    for iv in range(grid.count_v):
        cv = float(grid.vs[iv])
        for iu in range(grid.count_u):
            cu = float(grid.us[iu])
            acc = 0.0
            for q in range(len(axl)):
                du = cu - axl[q]
                dv = cv - ayl[q]
                t = du * du + (dv * dv - d2l[q])
                acc += t * t
            if acc < best_e:
                best_e = acc
                best_u = cu
                best_v = cv
    return DecodedLandmark(u=best_u, v=best_v, objective=best_e)
