"""Pure-numpy decoding kernels (fallback when the compiled extension is absent).

The compiled extension `tpcharq._speedups` implements the same four entry
points with identical semantics; `tpcharq.kernels` picks one at import time.
All kernels operate on plain arrays so they stay importable without the
rest of the package.
"""

from __future__ import annotations

import numpy as np


def _row_syndromes(bits: np.ndarray, synd_col: np.ndarray) -> np.ndarray:
    """XOR-fold the per-position syndromes of the set bits of each row."""
    terms = np.where(bits.astype(bool), synd_col, 0)
    return np.bitwise_xor.reduce(terms, axis=-1)


def _rows_valid(bits: np.ndarray, synd_col: np.ndarray) -> np.ndarray:
    s = _row_syndromes(bits, synd_col)
    p = bits.sum(axis=-1) & 1
    return (s == 0) & (p == 0)


def matrix_valid(bits: np.ndarray, synd_col: np.ndarray) -> bool:
    """True when every row and every column is a valid component codeword."""
    return bool(_rows_valid(bits, synd_col).all()
                and _rows_valid(bits.T, synd_col).all())


def hdd_rows(bits: np.ndarray, synd_col: np.ndarray, pos_of_synd: np.ndarray):
    """Batch hard-decision decode; uncorrectable rows are left unchanged.

    Returns (decoded, corrected_mask, failed_mask).
    """
    bits = np.asarray(bits, dtype=np.uint8)
    n = bits.shape[-1]
    s = _row_syndromes(bits, synd_col)
    p = bits.sum(axis=-1) & 1
    out = bits.copy()
    rows = np.arange(bits.shape[0])

    fix_parity = (s == 0) & (p == 1)
    out[rows[fix_parity], n - 1] ^= 1
    fix_pos = (s != 0) & (p == 1)
    out[rows[fix_pos], pos_of_synd[s[fix_pos]]] ^= 1
    failed = (s != 0) & (p == 0)
    return out, fix_parity | fix_pos, failed


def hiho_decode_matrix(bits, synd_col, pos_of_synd, max_half_iters):
    """Alternating row/column hard decoding with early stop on validity."""
    d = np.array(bits, dtype=np.uint8, copy=True)
    half_used = 0
    converged = False
    for h in range(max_half_iters):
        if matrix_valid(d, synd_col):
            converged = True
            break
        if h % 2 == 0:
            d, _, _ = hdd_rows(d, synd_col, pos_of_synd)
        else:
            dt, _, _ = hdd_rows(np.ascontiguousarray(d.T), synd_col, pos_of_synd)
            d = np.ascontiguousarray(dt.T)
        half_used += 1
    if not converged:
        converged = matrix_valid(d, synd_col)
    return d, half_used, converged


def chase_rows(r_in, synd_col, pos_of_synd, p, beta):
    """Chase-II list decoding of a batch of soft rows.

    For each row: take the p least reliable positions, enumerate the 2^p
    sign-flip test patterns around the hard decision, hard-decode each, and
    keep the candidate closest to the input in Euclidean distance.  The
    returned soft value per bit is the extrinsic update (decision metric
    difference against the best opposite-bit competitor, or the fallback
    reliability beta when no competitor exists).

    Returns (decisions, extrinsic, ok) where ok flags rows for which at
    least one test pattern decoded.
    """
    r_in = np.asarray(r_in, dtype=np.float64)
    B, n = r_in.shape
    T = 1 << p
    rows = np.arange(B)

    hard = (r_in < 0).astype(np.uint8)
    # ascending reliability, ties broken by position for reproducibility
    order = np.argsort(np.abs(r_in), axis=1, kind="stable")
    lr_pos = order[:, :p]                                   # (B, p)

    patterns = ((np.arange(T)[:, None] >> np.arange(p)[None, :]) & 1).astype(np.uint8)
    cand = np.repeat(hard[:, None, :], T, axis=1)           # (B, T, n)
    for b in range(p):
        tsel = np.nonzero(patterns[:, b])[0]
        cand[rows[:, None], tsel[None, :], lr_pos[:, b][:, None]] ^= 1

    # hard-decision decode every candidate
    s = _row_syndromes(cand, synd_col)                      # (B, T)
    par = cand.sum(axis=-1) & 1
    fix_parity = (s == 0) & (par == 1)
    bsel, tsel = np.nonzero(fix_parity)
    cand[bsel, tsel, n - 1] ^= 1
    fix_pos = (s != 0) & (par == 1)
    bsel, tsel = np.nonzero(fix_pos)
    cand[bsel, tsel, pos_of_synd[s[fix_pos]]] ^= 1
    valid = ~((s != 0) & (par == 0))                        # (B, T)

    # correlation with the input; larger = closer in Euclidean distance
    corr = np.einsum("bj,btj->bt", r_in, 1.0 - 2.0 * cand.astype(np.float64))
    corr_m = np.where(valid, corr, -np.inf)
    best_t = np.argmax(corr_m, axis=1)
    ok = valid.any(axis=1)
    corr_dec = corr_m[rows, best_t]

    dec = cand[rows, best_t, :].astype(np.uint8)
    dec[~ok] = hard[~ok]

    differs = cand != dec[:, None, :]                       # (B, T, n)
    comp = np.where(differs & valid[:, :, None], corr[:, :, None], -np.inf)
    comp_corr = comp.max(axis=1)                            # (B, n)
    has_comp = np.isfinite(comp_corr)

    sym = 1.0 - 2.0 * dec.astype(np.float64)
    w = np.where(
        has_comp,
        0.5 * (corr_dec[:, None] - comp_corr) * sym - r_in,
        beta * sym,
    )
    w[~ok] = 0.0
    return dec, w, ok


def chase_decode_matrix(r_ch, synd_col, pos_of_synd, p, max_half_iters,
                        alpha, beta):
    """Iterative soft decoding: row then column Chase passes.

    The channel matrix stays fixed; each half-iteration works on channel
    plus scaled extrinsic from the previous pass and stops as soon as the
    running hard decision is a valid product codeword.
    """
    r_ch = np.asarray(r_ch, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    w = np.zeros_like(r_ch)
    d = (r_ch < 0).astype(np.uint8)
    half_used = 0
    converged = False
    for h in range(max_half_iters):
        if matrix_valid(d, synd_col):
            converged = True
            break
        a = alpha[min(h, alpha.size - 1)]
        b = beta[min(h, beta.size - 1)]
        r_in = r_ch + a * w
        if h % 2 == 0:
            d, w, _ = chase_rows(r_in, synd_col, pos_of_synd, p, b)
        else:
            dt, wt, _ = chase_rows(
                np.ascontiguousarray(r_in.T), synd_col, pos_of_synd, p, b
            )
            d = np.ascontiguousarray(dt.T)
            w = np.ascontiguousarray(wt.T)
        half_used += 1
    if not converged:
        converged = matrix_valid(d, synd_col)
    return d, half_used, converged
