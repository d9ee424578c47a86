"""BPSK modulation, AWGN / iid-Rayleigh channels, and the Chase combiner.

The model is real-valued baseband after coherent matched filtering; with
perfect channel knowledge at the combiner this is statistically identical
to the complex model for BPSK and halves the compute.

SNR accounting: ``ebn0_db`` is defined per information bit, so the symbol
SNR is ``Es/N0 = code_rate * 10^(ebn0_db/10)`` with unit symbol energy and
``code_rate = kappa/N`` (CRC and product-code parity both included).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

AWGN = "awgn"
RAYLEIGH = "rayleigh"


def rng_for(*key) -> np.random.Generator:
    """Deterministic generator keyed by a tuple of integers.

    Keys of the form (experiment seed, trial, round, ...) make every draw
    independent of execution order, so trials can run in any order or in
    parallel and still reproduce bit-for-bit.
    """
    flat = []
    for part in key:
        flat.append(part if isinstance(part, int) else int(part))
    return np.random.default_rng(np.random.SeedSequence(flat))


@dataclass(frozen=True)
class ChannelModel:
    kind: str
    ebn0_db: float
    code_rate: float
    sigma_f_sq: float = 1.0

    def __post_init__(self):
        if self.kind not in (AWGN, RAYLEIGH):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.code_rate <= 0:
            raise ValueError("code_rate must be positive")
        if self.sigma_f_sq <= 0:
            raise ValueError("sigma_f_sq must be positive")

    @property
    def es_n0(self) -> float:
        return self.code_rate * 10.0 ** (self.ebn0_db / 10.0)

    @property
    def n0(self) -> float:
        return 1.0 / self.es_n0

    def at_ebn0(self, ebn0_db: float) -> "ChannelModel":
        return replace(self, ebn0_db=ebn0_db)


@dataclass
class Reception:
    """One stored transmission round: matched-filter output and gains."""

    soft: np.ndarray     # |f| * s + w
    fading: np.ndarray   # |f|, all ones for AWGN


def modulate(bits) -> np.ndarray:
    """BPSK map bit b -> symbol 1 - 2b."""
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


def transmit(symbols, model: ChannelModel, rng) -> Reception:
    """One channel use per symbol with iid fading (ideal interleaving).

    ``rng`` is a numpy Generator or a seed accepted by ``rng_for``.
    """
    if not isinstance(rng, np.random.Generator):
        rng = rng_for(*rng) if isinstance(rng, tuple) else rng_for(rng)
    symbols = np.asarray(symbols, dtype=np.float64)
    noise = rng.normal(0.0, np.sqrt(model.n0 / 2.0), size=symbols.shape)
    if model.kind == AWGN:
        fading = np.ones_like(symbols)
    else:
        scale = np.sqrt(model.sigma_f_sq / 2.0)
        re = rng.normal(0.0, scale, size=symbols.shape)
        im = rng.normal(0.0, scale, size=symbols.shape)
        fading = np.hypot(re, im)
        while True:  # exact zeros have probability zero; regenerate if seen
            zero = fading == 0.0
            if not zero.any():
                break
            fading[zero] = np.hypot(
                rng.normal(0.0, scale, size=int(zero.sum())),
                rng.normal(0.0, scale, size=int(zero.sum())),
            )
    return Reception(soft=fading * symbols + noise, fading=fading)


def mrc_combine(receptions: list[Reception]) -> np.ndarray:
    """Maximal ratio combining of all stored rounds of one subpacket.

    Weights are gain over total gain power, so for AWGN (all gains one)
    the output is the arithmetic mean of the stored receptions.
    """
    if not receptions:
        raise ValueError("need at least one reception")
    shape = receptions[0].soft.shape
    num = np.zeros(shape)
    den = np.zeros(shape)
    for rec in receptions:
        if rec.soft.shape != shape:
            raise ValueError("receptions must share dimensions")
        num += rec.fading * rec.soft
        den += rec.fading ** 2
    return num / den


def combine_for_decoding(receptions: list[Reception]) -> np.ndarray:
    """Matched-filter combining: the decoder-facing soft statistic.

    Same sign pattern as ``mrc_combine`` but scaled per entry by the gain
    power, which keeps the magnitude proportional to the bit reliability
    (the normalized combiner output has unit signal amplitude on every
    entry, so a deeply faded bit would look as trustworthy as a strong
    one to the soft decoder).  The division by the round count keeps the
    average signal scale at one, so for AWGN this coincides with
    ``mrc_combine`` exactly.
    """
    if not receptions:
        raise ValueError("need at least one reception")
    shape = receptions[0].soft.shape
    out = np.zeros(shape)
    for rec in receptions:
        if rec.soft.shape != shape:
            raise ValueError("receptions must share dimensions")
        out += rec.fading * rec.soft
    return out / len(receptions)
