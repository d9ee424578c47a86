"""Iterative product-code decoding and codeword-based error detection.

Two decoder flavors share the same early-stopping rule (all rows and all
columns valid):

* ``hiho_decode``: alternating row/column hard-decision passes.
* ``siso_decode``: Chase-II list decoding per row/column with extrinsic
  scaling between half-iterations.

``self_detect`` implements detection without CRC: the first k rows are
divided by the component generator (the overall parity bit is excluded
from the division and checked separately), aborting at the first failure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .codec import ComponentCode

# Extrinsic scaling per half-iteration and fallback reliability used when a
# Chase decision has no opposite-bit competitor; both are extended by
# repeating the last entry when more half-iterations run.
ALPHA_DEFAULT = (0.0, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0, 1.0)
BETA_DEFAULT = (0.2, 0.4, 0.6, 0.8, 1.0, 1.0, 1.0, 1.0)


@dataclass
class OpCounters:
    """Operation counts attributed to one decode call."""

    hdd: int = 0
    detect_xor: float = 0.0

    def merge(self, other: "OpCounters") -> "OpCounters":
        return OpCounters(self.hdd + other.hdd,
                          self.detect_xor + other.detect_xor)


@dataclass
class DecodeResult:
    decoded: np.ndarray
    half_iterations_used: int
    converged: bool
    self_detect_clean: bool
    x_hat: int | None
    op_counters: OpCounters


def hard_slice(soft) -> np.ndarray:
    """Map soft values to bits: negative -> 1, otherwise 0 (ties to 0)."""
    return (np.asarray(soft) < 0).astype(np.uint8)


def self_detect(code: ComponentCode, decoded) -> tuple[bool, int | None, float]:
    """Sequential syndrome check of the first k rows.

    Returns (clean, x_hat, xor_count).  x_hat is the 1-based index of the
    first row whose division by the generator (or whose overall parity)
    fails; xor_count follows the (2*nu - 1)/2 average XOR cost per LFSR
    shift, k shifts per row.
    """
    d = np.asarray(decoded, dtype=np.uint8)
    if d.shape != (code.n, code.n):
        raise ValueError(f"decoded must be {code.n}x{code.n}")
    per_row = 0.5 * (2 * code.nu - 1) * code.k
    for x in range(code.k):
        row = d[x]
        s = int(np.bitwise_xor.reduce(np.where(row.astype(bool), code.synd_col, 0)))
        if s != 0 or (int(row.sum()) & 1) != 0:
            return False, x + 1, per_row * (x + 1)
    return True, None, per_row * code.k


def _detection_fields(code: ComponentCode, decoded: np.ndarray,
                      half_used: int, converged: bool):
    """Row check, plus the column analog when the last pass was row-wise."""
    clean, x_hat, xors = self_detect(code, decoded)
    ended_on_column = half_used > 0 and half_used % 2 == 0
    if clean and not converged and not ended_on_column:
        cclean, cx, cxors = self_detect(code, np.ascontiguousarray(decoded.T))
        xors += cxors
        if not cclean:
            clean, x_hat = False, cx
    return clean, x_hat, xors


def hiho_decode(code: ComponentCode, hard, max_iters: int = 4) -> DecodeResult:
    """Iterative hard-input decoding of an n x n matrix."""
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    hard = np.asarray(hard, dtype=np.uint8)
    decoded, half_used, converged = kernels.hiho_decode_matrix(
        hard, code.synd_col, code.pos_of_synd, 2 * max_iters
    )
    clean, x_hat, xors = _detection_fields(code, decoded, half_used, converged)
    return DecodeResult(
        decoded=decoded,
        half_iterations_used=half_used,
        converged=converged,
        self_detect_clean=clean,
        x_hat=x_hat,
        op_counters=OpCounters(hdd=half_used * code.n, detect_xor=xors),
    )


@dataclass
class ChaseOutput:
    decision: np.ndarray
    soft_out: np.ndarray
    found_codeword: bool


def chase2_component(code: ComponentCode, soft_row, p: int = 4,
                     beta: float = BETA_DEFAULT[0]) -> ChaseOutput:
    """Chase-II decoding of a single soft row.

    soft_out is the extrinsic update; when no test pattern decodes the hard
    slice is returned with zero soft output and found_codeword=False.
    """
    if not 1 <= p <= 8:
        raise ValueError("p must be in [1, 8]")
    soft_row = np.asarray(soft_row, dtype=np.float64)
    if soft_row.shape != (code.n,):
        raise ValueError(f"soft_row must have length n={code.n}")
    dec, w, ok = kernels.chase_rows(
        soft_row[None, :], code.synd_col, code.pos_of_synd, p, beta
    )
    return ChaseOutput(dec[0], w[0], bool(ok[0]))


def siso_decode(code: ComponentCode, soft, max_iters: int = 4, p: int = 4,
                alpha=ALPHA_DEFAULT, beta=BETA_DEFAULT) -> DecodeResult:
    """Iterative Chase decoding of an n x n soft matrix."""
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if not 1 <= p <= 8:
        raise ValueError("p must be in [1, 8]")
    soft = np.asarray(soft, dtype=np.float64)
    if not np.isfinite(soft).all():
        raise ValueError("soft matrix entries must be finite")
    decoded, half_used, converged = kernels.chase_decode_matrix(
        soft, code.synd_col, code.pos_of_synd, p, 2 * max_iters,
        np.asarray(alpha, dtype=np.float64), np.asarray(beta, dtype=np.float64),
    )
    clean, x_hat, xors = _detection_fields(code, decoded, half_used, converged)
    return DecodeResult(
        decoded=decoded,
        half_iterations_used=half_used,
        converged=converged,
        self_detect_clean=clean,
        x_hat=x_hat,
        op_counters=OpCounters(hdd=half_used * code.n * (1 << p),
                               detect_xor=xors),
    )


def decode(code: ComponentCode, soft, mode: str, max_iters: int = 4,
           p: int = 4) -> DecodeResult:
    """Dispatch on decoder mode; HIHO slices the soft input first."""
    if mode == "siso":
        return siso_decode(code, soft, max_iters=max_iters, p=p)
    if mode == "hiho":
        return hiho_decode(code, hard_slice(soft), max_iters=max_iters)
    raise ValueError(f"unknown decoder mode {mode!r}")
