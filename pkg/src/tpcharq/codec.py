"""Component codes, square product codes, CRC family, and packet framing.

Conventions used throughout the package:

* A bit vector of length ``n`` maps to the polynomial
  ``b[0]*X^(n-1) + ... + b[n-1]`` (earliest bit = highest degree).
* A component codeword is laid out ``[k info bits | m cyclic parity bits |
  1 overall parity bit]``; the overall parity bit makes the total weight
  even and is excluded from all polynomial divisions.
* Polynomials are also carried as plain ints (bit ``i`` = coefficient of
  ``X^i``), e.g. ``0b1011`` is ``X^3 + X + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

# Degree-m primitive polynomials used as the single-error-correcting
# generators; all are trinomials (three nonzero terms).
PRIMITIVE_POLY = {
    3: 0b1011,        # X^3 + X + 1
    4: 0b10011,       # X^4 + X + 1
    5: 0b100101,      # X^5 + X^2 + 1
    6: 0b1000011,     # X^6 + X + 1
    7: 0b10001001,    # X^7 + X^3 + 1
}


def poly_degree(poly: int) -> int:
    if poly <= 0:
        raise ValueError("polynomial must be a positive integer")
    return poly.bit_length() - 1


def poly_mod(value: int, poly: int) -> int:
    """Remainder of ``value`` divided by ``poly`` over GF(2)."""
    d = poly_degree(poly)
    while value.bit_length() - 1 >= d and value:
        value ^= poly << (value.bit_length() - 1 - d)
    return value


def poly_mul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


@dataclass(frozen=True)
class ComponentCode:
    """Extended single-error-correcting code of length ``n = 2^m``.

    ``g_bch`` generates the underlying cyclic (n-1, k) code; the extension
    bit raises the minimum distance to 4.
    """

    m: int
    n: int
    k: int
    d_min: int
    primitive_poly: int
    g_bch: int
    nu: int
    # syndrome of a single error at bit j (j < n-1); last entry is 0 since
    # the overall parity bit never enters the division
    synd_col: np.ndarray = field(repr=False, compare=False)
    # position of the single error producing syndrome s (index 0 unused)
    pos_of_synd: np.ndarray = field(repr=False, compare=False)
    # k x n systematic generator matrix, info block leftmost
    gen_matrix: np.ndarray = field(repr=False, compare=False)

    @property
    def name(self) -> str:
        return f"eBCH({self.n},{self.k},{self.d_min})"

    def parity_check_row_weights(self) -> np.ndarray:
        """Row weights of the (n-k) x n parity-check matrix.

        Rows 1..m are the bit-planes of the single-error syndromes with a
        zero in the extension position; the last row is all ones.
        """
        w = np.empty(self.n - self.k, dtype=np.int64)
        for i in range(self.m):
            w[i] = int(np.count_nonzero((self.synd_col >> i) & 1))
        w[self.m] = self.n
        return w


def build_component_code(m: int) -> ComponentCode:
    """Construct the extended code (2^m, 2^m - m - 1, 4)."""
    if not 3 <= m <= 7:
        raise ValueError(f"field degree m must be in [3, 7], got {m}")
    g = PRIMITIVE_POLY[m]
    n = 1 << m
    k = n - m - 1
    nu = bin(g).count("1")

    # synd_col[j] = X^(n-2-j) mod g  (bit j is the coefficient of X^(n-2-j))
    synd_col = np.zeros(n, dtype=np.int64)
    for j in range(n - 1):
        synd_col[j] = poly_mod(1 << (n - 2 - j), g)
    pos_of_synd = np.full(1 << m, -1, dtype=np.int64)
    for j in range(n - 1):
        pos_of_synd[synd_col[j]] = j

    # systematic rows: info bit i -> codeword [e_i | rem(X^m * X^(k-1-i)) | parity]
    gen = np.zeros((k, n), dtype=np.uint8)
    for i in range(k):
        gen[i, i] = 1
        rem = poly_mod(1 << (m + k - 1 - i), g)
        for b in range(m):
            gen[i, k + b] = (rem >> (m - 1 - b)) & 1
        gen[i, n - 1] = gen[i, : n - 1].sum() & 1
    return ComponentCode(
        m=m, n=n, k=k, d_min=4, primitive_poly=g, g_bch=g, nu=nu,
        synd_col=synd_col, pos_of_synd=pos_of_synd, gen_matrix=gen,
    )


@lru_cache(maxsize=None)
def component_code(m: int) -> ComponentCode:
    """Cached accessor for the codes used across experiments."""
    return build_component_code(m)


def encode_component(code: ComponentCode, info) -> np.ndarray:
    """Systematic encoding of ``k`` info bits into an ``n``-bit codeword."""
    info = np.asarray(info, dtype=np.uint8)
    if info.shape != (code.k,):
        raise ValueError(f"info must have length k={code.k}, got {info.shape}")
    return (info @ code.gen_matrix) & 1


def hdd_component(code: ComponentCode, word):
    """Hard-decision decode one word: (decoded, status).

    status is "clean", "corrected" or "detected_uncorrectable".  Single
    errors are corrected through the syndrome table plus the overall
    parity; even-weight double errors (nonzero syndrome, even parity) are
    flagged and the input is returned unchanged.
    """
    word = np.asarray(word, dtype=np.uint8)
    if word.shape != (code.n,):
        raise ValueError(f"word must have length n={code.n}, got {word.shape}")
    s = int(np.bitwise_xor.reduce(np.where(word.astype(bool), code.synd_col, 0)))
    p = int(word.sum() & 1)
    if s == 0 and p == 0:
        return word, "clean"
    out = word.copy()
    if p == 1:
        out[code.n - 1 if s == 0 else int(code.pos_of_synd[s])] ^= 1
        return out, "corrected"
    return word, "detected_uncorrectable"


def encode_product(code: ComponentCode, info) -> np.ndarray:
    """Encode a k x k info block into an n x n product codeword.

    Rows are encoded first, then every column of the k x n intermediate
    matrix; checks-on-checks are consistent because the code is linear.
    """
    info = np.asarray(info, dtype=np.uint8)
    if info.shape != (code.k, code.k):
        raise ValueError(f"info must be k x k = {code.k}x{code.k}, got {info.shape}")
    rows = (info @ code.gen_matrix) & 1            # k x n
    full = (rows.T @ code.gen_matrix) & 1          # n x n (transposed)
    return np.ascontiguousarray(full.T)


@dataclass(frozen=True)
class CrcSpec:
    """A CRC generator; ``poly`` includes the leading X^degree term."""

    name: str
    degree: int
    poly: int

    def __post_init__(self):
        if poly_degree(self.poly) != self.degree:
            raise ValueError(
                f"poly 0x{self.poly:X} does not have degree {self.degree}"
            )

    @property
    def nu_bar(self) -> int:
        return bin(self.poly).count("1")


CRC16_8005 = CrcSpec("crc16-8005", 16, 0x18005)
CRC16_8BB7 = CrcSpec("crc16-8bb7", 16, 0x18BB7)
CRC32_1EDC6F41 = CrcSpec("crc32-1edc6f41", 32, 0x11EDC6F41)
CRC8_07 = CrcSpec("crc8-07", 8, 0x107)

CRC_BY_NAME = {c.name: c for c in (CRC16_8005, CRC16_8BB7, CRC32_1EDC6F41, CRC8_07)}


@lru_cache(maxsize=64)
def _crc_matrix(poly: int, length: int) -> np.ndarray:
    """length x degree matrix R with rem(X^degree * data) = data @ R mod 2."""
    d = poly_degree(poly)
    rows = np.zeros((length, d), dtype=np.uint8)
    for i in range(length):
        rem = poly_mod(1 << (d + length - 1 - i), poly)
        for b in range(d):
            rows[i, b] = (rem >> (d - 1 - b)) & 1
    return rows


@lru_cache(maxsize=64)
def _rem_matrix(poly: int, length: int) -> np.ndarray:
    """length x degree matrix with rem(data) = data @ R mod 2 (no shift)."""
    d = poly_degree(poly)
    rows = np.zeros((length, d), dtype=np.uint8)
    for i in range(length):
        rem = poly_mod(1 << (length - 1 - i), poly)
        for b in range(d):
            rows[i, b] = (rem >> (d - 1 - b)) & 1
    return rows


def crc_append(spec: CrcSpec, data) -> np.ndarray:
    """Append the remainder of X^degree * data(X) mod the generator."""
    data = np.asarray(data, dtype=np.uint8)
    if data.ndim != 1 or data.size == 0:
        raise ValueError("data must be a non-empty bit vector")
    rem = (data.astype(np.int64) @ _crc_matrix(spec.poly, data.size)) & 1
    return np.concatenate([data, rem.astype(np.uint8)])


def crc_check(spec: CrcSpec, data_with_crc) -> bool:
    """True iff the polynomial remainder of the whole vector is zero."""
    v = np.asarray(data_with_crc, dtype=np.uint8)
    if v.ndim != 1 or v.size <= spec.degree:
        raise ValueError("input must be longer than the CRC degree")
    rem = (v.astype(np.int64) @ _rem_matrix(spec.poly, v.size)) & 1
    return not rem.any()


# ---------------------------------------------------------------------------
# HARQ packet geometry


@dataclass(frozen=True)
class HarqConfig:
    """Fixed packet geometry plus detection and decoding mode.

    A packet is L subpackets of N = n^2 bits each; kappa is the payload per
    subpacket (CRC bits, when present, replace information bits).
    """

    code: ComponentCode
    L: int = 1
    M: int = 4
    detection: str = "crc"          # "crc" | "self" | "perfect"
    crc: CrcSpec | None = CRC16_8005
    decoder_mode: str = "siso"      # "siso" | "hiho"
    p: int = 4
    max_iters: int = 4

    def __post_init__(self):
        if self.L < 1 or self.M < 1:
            raise ValueError("L and M must be >= 1")
        if self.detection not in ("crc", "self", "perfect"):
            raise ValueError(f"unknown detection mode {self.detection!r}")
        if self.decoder_mode not in ("siso", "hiho"):
            raise ValueError(f"unknown decoder mode {self.decoder_mode!r}")
        if self.detection == "crc":
            if self.crc is None:
                raise ValueError("detection='crc' requires a CrcSpec")
            if self.crc.degree >= self.code.k ** 2:
                raise ValueError("CRC degree leaves no room for payload")
        if not 1 <= self.p <= 8:
            raise ValueError("Chase least-reliable count p must be in [1, 8]")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    @property
    def N(self) -> int:
        return self.code.n ** 2

    @property
    def packet_bits(self) -> int:
        return self.L * self.N

    @property
    def l_crc(self) -> int:
        return self.crc.degree if self.detection == "crc" else 0

    @property
    def kappa(self) -> int:
        return self.code.k ** 2 - self.l_crc

    @property
    def code_rate(self) -> float:
        return self.kappa / self.N


def build_packet(cfg: HarqConfig, info) -> list[np.ndarray]:
    """Split kappa*L info bits into L independent product codewords."""
    info = np.asarray(info, dtype=np.uint8).ravel()
    if info.size != cfg.kappa * cfg.L:
        raise ValueError(
            f"info must have kappa*L = {cfg.kappa * cfg.L} bits, got {info.size}"
        )
    k = cfg.code.k
    subpackets = []
    for i in range(cfg.L):
        part = info[i * cfg.kappa : (i + 1) * cfg.kappa]
        if cfg.detection == "crc":
            part = crc_append(cfg.crc, part)
        subpackets.append(encode_product(cfg.code, part.reshape(k, k)))
    return subpackets


def extract_message(cfg: HarqConfig, decoded: np.ndarray) -> np.ndarray:
    """Row-major k x k message block (payload plus CRC bits if any)."""
    k = cfg.code.k
    return np.ascontiguousarray(decoded[:k, :k]).ravel()
