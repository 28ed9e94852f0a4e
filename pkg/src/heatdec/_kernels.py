"""Compiled inner loops for anchor selection and candidate-grid evaluation.

These kernels carry the throughput-critical work of the single-step decoder.
They use only IEEE-exact arithmetic (compare, add, sub, mul) so their results
are bit-identical to the pure-numpy reference paths; the equivalence is
enforced by tests.  Everything here is single-threaded on purpose: batch
speed must come from the algorithms' data-parallel structure, not from
worker counts.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def topk_rows(flat: np.ndarray, k: int, out_idx: np.ndarray, out_val: np.ndarray) -> None:
    """Per-row top-k selection ordered by (value desc, flat index asc).

    Scans each row once in index order, maintaining a sorted insertion
    buffer.  Equal values never displace an earlier index, which realizes the
    row-major tie rule exactly.  Rows must be finite (callers validate);
    output on other rows is unspecified.  Requires k < row length.
    """
    n_rows, n = flat.shape
    for r in range(n_rows):
        vals = out_val[r]
        idxs = out_idx[r]
        for j in range(k):  # fill the buffer from the first k cells
            v = flat[r, j]
            pos = j
            while pos > 0 and vals[pos - 1] < v:
                pos -= 1
            for q in range(j, pos, -1):
                vals[q] = vals[q - 1]
                idxs[q] = idxs[q - 1]
            vals[pos] = v
            idxs[pos] = j
        thresh = vals[k - 1]
        for j in range(k, n):
            v = flat[r, j]
            if v <= thresh:
                continue
            pos = k - 1  # v > thresh, so it displaces at least the last slot
            while pos > 0 and vals[pos - 1] < v:
                pos -= 1
            for q in range(k - 1, pos, -1):
                vals[q] = vals[q - 1]
                idxs[q] = idxs[q - 1]
            vals[pos] = v
            idxs[pos] = j
            thresh = vals[k - 1]


@njit(cache=True)
def topk_rows_blocked(flat: np.ndarray, k: int, block_max: np.ndarray, block: int,
                      out_idx: np.ndarray, out_val: np.ndarray) -> None:
    """Top-k selection driven by precomputed per-block maxima.

    ``block_max[r, b]`` covers ``flat[r, b*block : (b+1)*block]`` (the last
    block may be short).  Two exact skip rules drop cold blocks whole:
    values strictly below the k-th value of the hottest block (a lower bound
    on the row's true k-th value) can never be selected, and - since ties
    never displace an earlier index - neither can blocks whose maximum does
    not exceed the running k-th value.  Selected set and order are identical
    to :func:`topk_rows`.  Rows must be finite; output on other rows is
    unspecified.
    """
    n_rows, n = flat.shape
    n_blocks = block_max.shape[1]
    warm = np.empty(k)
    for r in range(n_rows):
        # k-th value inside the hottest block: a floor no selected cell is below
        best_b = 0
        for b in range(1, n_blocks):
            if block_max[r, b] > block_max[r, best_b]:
                best_b = b
        lo = best_b * block
        hi = min(lo + block, n)
        count = 0
        floor = -np.inf
        for j in range(lo, hi):
            v = flat[r, j]
            if count == k:
                if v <= floor:
                    continue
                pos = k - 1
            else:
                pos = count
                count += 1
            while pos > 0 and warm[pos - 1] < v:
                pos -= 1
            for q in range(count - 1 if count < k else k - 1, pos, -1):
                warm[q] = warm[q - 1]
            warm[pos] = v
            if count == k:
                floor = warm[k - 1]
        # ascending scan; the buffer fills from the first k cells
        vals = out_val[r]
        idxs = out_idx[r]
        for j in range(k):
            v = flat[r, j]
            pos = j
            while pos > 0 and vals[pos - 1] < v:
                pos -= 1
            for q in range(j, pos, -1):
                vals[q] = vals[q - 1]
                idxs[q] = idxs[q - 1]
            vals[pos] = v
            idxs[pos] = j
        thresh = vals[k - 1]
        start_block = k // block  # earlier blocks are covered by the prologue
        for b in range(start_block, n_blocks):
            if block_max[r, b] < floor or block_max[r, b] <= thresh:
                continue
            lo = b * block
            hi = min(lo + block, n)
            if b == start_block and lo < k:
                lo = k
            for j in range(lo, hi):
                v = flat[r, j]
                if v <= thresh:
                    continue
                pos = k - 1
                while pos > 0 and vals[pos - 1] < v:
                    pos -= 1
                for q in range(k - 1, pos, -1):
                    vals[q] = vals[q - 1]
                    idxs[q] = idxs[q - 1]
                vals[pos] = v
                idxs[pos] = j
                thresh = vals[k - 1]


@njit(cache=True)
def grid_argmin_rows(
    xm: np.ndarray,
    ym: np.ndarray,
    offs: np.ndarray,
    ax: np.ndarray,
    ay: np.ndarray,
    d2: np.ndarray,
    out_u: np.ndarray,
    out_v: np.ndarray,
    out_e: np.ndarray,
) -> None:
    """Exhaustive objective evaluation over an unclipped candidate grid.

    For each row (one heatmap), candidates are ``(xm + offs[iu], ym +
    offs[iv])`` scanned in row-major order; the residual for anchor q is
    ``(cu - ax[q])^2 + ((cv - ay[q])^2 - d2[q])`` and its square is
    accumulated in ascending q.  Expression shape, accumulation order, and
    the strict-minimum scan match the numpy reference path exactly, so
    outcomes are bit-identical.
    """
    n_rows, k = ax.shape
    n1 = offs.shape[0]
    du2 = np.empty((k, n1))
    dvm = np.empty((k, n1))
    erow = np.empty(n1)
    for r in range(n_rows):
        xr = xm[r]
        yr = ym[r]
        for q in range(k):
            axq = ax[r, q]
            ayq = ay[r, q]
            dq = d2[r, q]
            for i in range(n1):
                t = (xr + offs[i]) - axq
                du2[q, i] = t * t
                s = (yr + offs[i]) - ayq
                dvm[q, i] = s * s - dq
        best = np.inf
        best_iu = 0
        best_iv = 0
        for iv in range(n1):
            for i in range(n1):
                erow[i] = 0.0
            for q in range(k):
                dv = dvm[q, iv]
                for iu in range(n1):
                    t = du2[q, iu] + dv
                    erow[iu] += t * t
            for iu in range(n1):
                if erow[iu] < best:
                    best = erow[iu]
                    best_iu = iu
                    best_iv = iv
        out_u[r] = xr + offs[best_iu]
        out_v[r] = yr + offs[best_iv]
        out_e[r] = best


def warmup() -> None:
    """Trigger JIT compilation so timed paths never include compile latency."""
    flat = np.array([[0.5, 1.0, 0.25, 0.75]])
    idx = np.zeros((1, 2), dtype=np.int64)
    val = np.zeros((1, 2))
    topk_rows(flat, 2, idx, val)
    wide = np.arange(12.0).reshape(1, 12)
    bmax = wide.reshape(1, 3, 4).max(axis=2)
    topk_rows_blocked(wide, 2, bmax, 4, idx, val)
    offs = np.array([-0.5, 0.0, 0.5])
    out = np.zeros(1)
    grid_argmin_rows(
        np.array([1.0]), np.array([0.0]), offs,
        np.array([[1.0, 2.0]]), np.array([[0.0, 0.0]]), np.array([[0.0, 1.0]]),
        out.copy(), out.copy(), out.copy(),
    )
