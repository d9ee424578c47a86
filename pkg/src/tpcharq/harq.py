"""Truncated subpacket HARQ with Chase combining: the Monte Carlo engine.

Each subpacket is (re)transmitted until it is declared error-free or M
rounds are exhausted; all stored receptions of a subpacket are combined
before every decoding attempt.  Feedback is error-free and instantaneous;
timing enters only through the delay formulas in ``analysis``.

Detection verdicts and ground truth are tracked separately so false-alarm
and misdetection rates fall out of the same runs.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import analysis
from .channel import (
    ChannelModel,
    combine_for_decoding,
    modulate,
    mrc_combine,
    rng_for,
    transmit,
)
from .codec import HarqConfig, build_packet, crc_check, extract_message
from .decoder import decode


@dataclass
class SessionStats:
    """Aggregated counters over simulated packets."""

    kappa: int
    N: int
    M: int
    L: int
    packets: int = 0
    V: int = 0                     # subpackets entered (first transmissions)
    sum_rho: int = 0
    sum_z: int = 0
    declared_err: np.ndarray = None    # per round: NACKs issued
    at_risk: np.ndarray = None         # per round: subpackets that reached it
    false_alarms: int = 0
    misdetections: int = 0
    correct_packets: int = 0           # detection events with correct payload
    erroneous_packets: int = 0
    r_pmf_counts: np.ndarray = None    # packet round count histogram (1..M)
    ack_events: list = field(default_factory=list)  # (round, nack) in order

    def __post_init__(self):
        if self.declared_err is None:
            self.declared_err = np.zeros(self.M, dtype=np.int64)
        if self.at_risk is None:
            self.at_risk = np.zeros(self.M, dtype=np.int64)
        if self.r_pmf_counts is None:
            self.r_pmf_counts = np.zeros(self.M, dtype=np.int64)

    @property
    def throughput(self) -> float:
        if self.sum_rho == 0:
            return 0.0
        return self.kappa * self.sum_z / (self.N * self.sum_rho)

    def per_round_rates(self) -> np.ndarray:
        """Declared-error rate per round; NaN where no subpacket reached."""
        out = np.full(self.M, np.nan)
        mask = self.at_risk > 0
        out[mask] = self.declared_err[mask] / self.at_risk[mask]
        return out

    @property
    def far(self) -> float | None:
        return (self.false_alarms / self.correct_packets
                if self.correct_packets else None)

    @property
    def mdr(self) -> float | None:
        return (self.misdetections / self.erroneous_packets
                if self.erroneous_packets else None)


@dataclass
class SubpacketOutcome:
    rounds_used: int
    delivered: bool                # detector verdict after the last round
    payload_correct: bool          # ground truth at the last round
    round_events: list             # (declared_error, payload_correct) per round


def _declare(cfg: HarqConfig, result, truth_msg: np.ndarray) -> tuple[bool, bool]:
    """(declared_clean, payload_correct) for one decode attempt."""
    msg = extract_message(cfg, result.decoded)
    payload_ok = bool(np.array_equal(msg, truth_msg))
    if cfg.detection == "perfect":
        return payload_ok, payload_ok
    if cfg.detection == "crc":
        return crc_check(cfg.crc, msg), payload_ok
    return (result.converged or result.self_detect_clean), payload_ok


def run_session(cfg: HarqConfig, model: ChannelModel, info, seed,
                packet_index: int = 0) -> list[SubpacketOutcome]:
    """Transmit one packet (L subpackets) through the full HARQ loop."""
    subpackets = build_packet(cfg, info)
    k = cfg.code.k
    outcomes = []
    for i, codeword in enumerate(subpackets):
        truth_msg = np.ascontiguousarray(codeword[:k, :k]).ravel()
        symbols = modulate(codeword)
        receptions = []
        events = []
        delivered = False
        payload_ok = False
        rounds = 0
        for rnd in range(1, cfg.M + 1):
            rng = rng_for(seed, packet_index, i, rnd)
            receptions.append(transmit(symbols, model, rng))
            soft = combine_for_decoding(receptions)
            result = decode(cfg.code, soft, cfg.decoder_mode,
                            max_iters=cfg.max_iters, p=cfg.p)
            clean, payload_ok = _declare(cfg, result, truth_msg)
            events.append((not clean, payload_ok))
            rounds = rnd
            if clean:
                delivered = True
                break
        outcomes.append(SubpacketOutcome(rounds, delivered, payload_ok, events))
    return outcomes


def monte_carlo(cfg: HarqConfig, model: ChannelModel, packets: int, seed: int,
                collect_acks: bool = False,
                progress=None) -> SessionStats:
    """Aggregate ``run_session`` over independently seeded packets."""
    if packets < 1:
        raise ValueError("need at least one packet")
    stats = SessionStats(kappa=cfg.kappa, N=cfg.N, M=cfg.M, L=cfg.L)
    for pkt in range(packets):
        info = rng_for(seed, pkt, 0xD47A).integers(0, 2, size=cfg.kappa * cfg.L,
                                                   dtype=np.uint8)
        outcomes = run_session(cfg, model, info, seed, packet_index=pkt)
        stats.packets += 1
        max_rounds = 0
        for out in outcomes:
            stats.V += 1
            stats.sum_rho += out.rounds_used
            stats.sum_z += int(out.delivered)
            max_rounds = max(max_rounds, out.rounds_used)
            for rnd, (declared_error, ok) in enumerate(out.round_events, start=1):
                stats.at_risk[rnd - 1] += 1
                stats.declared_err[rnd - 1] += int(declared_error)
                if ok:
                    stats.correct_packets += 1
                    stats.false_alarms += int(declared_error)
                else:
                    stats.erroneous_packets += 1
                    stats.misdetections += int(not declared_error)
                if collect_acks:
                    stats.ack_events.append((rnd, declared_error))
        stats.r_pmf_counts[max_rounds - 1] += 1
        if progress is not None and (pkt + 1) % progress[0] == 0:
            progress[1](pkt + 1, packets)
    return stats


# ---------------------------------------------------------------------------
# PER tables


@dataclass
class PerTable:
    """Declared-error rate per (SNR grid point, transmission round)."""

    snr_grid_db: np.ndarray
    per_round: np.ndarray        # shape (M, len(grid))
    trials_per_point: int

    def __post_init__(self):
        self.snr_grid_db = np.asarray(self.snr_grid_db, dtype=np.float64)
        self.per_round = np.atleast_2d(np.asarray(self.per_round, dtype=np.float64))
        if (np.diff(self.snr_grid_db) <= 0).any():
            raise ValueError("snr_grid_db must be strictly ascending")
        if self.per_round.shape[1] != self.snr_grid_db.size:
            raise ValueError("per_round columns must match the SNR grid")
        finite = self.per_round[np.isfinite(self.per_round)]
        if ((finite < 0) | (finite > 1)).any():
            raise ValueError("PER values must lie in [0, 1]")

    def to_csv(self, path_or_buf) -> None:
        close = False
        if isinstance(path_or_buf, (str, bytes)):
            buf = open(path_or_buf, "w", newline="")
            close = True
        else:
            buf = path_or_buf
        try:
            w = csv.writer(buf)
            w.writerow(["snr_db", "round", "per", "trials"])
            for j, snr in enumerate(self.snr_grid_db):
                for i in range(self.per_round.shape[0]):
                    val = self.per_round[i, j]
                    w.writerow([f"{snr:g}", i + 1,
                                "" if np.isnan(val) else f"{val:.8g}",
                                self.trials_per_point])
        finally:
            if close:
                buf.close()

    @classmethod
    def from_csv(cls, path_or_buf) -> "PerTable":
        if isinstance(path_or_buf, (str, bytes)):
            with open(path_or_buf, newline="") as fh:
                text = fh.read()
        else:
            text = path_or_buf.read()
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty PER table")
        snrs = sorted({float(r["snr_db"]) for r in rows})
        m = max(int(r["round"]) for r in rows)
        per = np.full((m, len(snrs)), np.nan)
        idx = {s: j for j, s in enumerate(snrs)}
        trials = 0
        for r in rows:
            if r["per"] != "":
                per[int(r["round"]) - 1, idx[float(r["snr_db"])]] = float(r["per"])
            trials = int(r["trials"])
        return cls(np.array(snrs), per, trials)


def measure_per_table(cfg: HarqConfig, model: ChannelModel, snr_grid_db,
                      trials: int, seed: int) -> PerTable:
    """Per-round declared-error rates over an SNR grid (M rows)."""
    grid = np.asarray(snr_grid_db, dtype=np.float64)
    per = np.full((cfg.M, grid.size), np.nan)
    for j, snr in enumerate(grid):
        stats = monte_carlo(cfg, model.at_ebn0(float(snr)), trials,
                            seed=seed + 7919 * j)
        per[:, j] = stats.per_round_rates()
    return PerTable(grid, per, trials)


def measure_single_shot_per(cfg: HarqConfig, model: ChannelModel, snr_grid_db,
                            trials: int, seed: int) -> PerTable:
    """Single-transmission PER curve: the semi-analytic input."""
    if trials < 100:
        raise ValueError("need at least 100 trials per grid point")
    return measure_per_table(replace(cfg, M=1), model, snr_grid_db, trials, seed)


def estimate_per_from_acks(ack_events, window: int) -> dict[int, float]:
    """Per-round NACK ratio over the most recent ``window`` events per round.

    ``ack_events`` is an ordered iterable of (round_index, nack) pairs;
    rounds with no events are absent from the result.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    recent: dict[int, list] = {}
    for rnd, nack in ack_events:
        recent.setdefault(rnd, []).append(bool(nack))
    out = {}
    for rnd, events in recent.items():
        tail = events[-window:]
        out[rnd] = sum(tail) / len(tail)
    return out


def per_rounds_from_estimates(estimates: dict[int, float], M: int) -> np.ndarray:
    """Dense per-round vector; rounds never observed count as error-free."""
    out = np.zeros(M)
    for rnd, val in estimates.items():
        if 1 <= rnd <= M:
            out[rnd - 1] = val
    return out


def blind_eta_fn(cfg: HarqConfig, model_at_pmax: ChannelModel, p_max: float,
                 window: int, packets_per_eval: int, seed: int):
    """Throughput estimator driven purely by ACK/NACK feedback.

    Each evaluation at power P simulates HARQ at the linearly scaled SNR,
    estimates the per-round PER from the feedback log, and computes the
    throughput from those estimates.
    """
    state = {"calls": 0}

    def eta_fn(p: float) -> float:
        if p <= 0:
            return 0.0
        state["calls"] += 1
        snr = model_at_pmax.ebn0_db + 10.0 * np.log10(p / p_max)
        stats = monte_carlo(cfg, model_at_pmax.at_ebn0(snr), packets_per_eval,
                            seed=seed + 104729 * state["calls"],
                            collect_acks=True)
        est = estimate_per_from_acks(stats.ack_events, window)
        rounds = per_rounds_from_estimates(est, cfg.M)
        return analysis.throughput_from_rounds(rounds, cfg.kappa, cfg.N)

    return eta_fn


# ---------------------------------------------------------------------------
# Round-dependency study (uncoded blocks)


@dataclass
class ConditionalPerResult:
    p_cond: float            # P(NACK_2 | NACK_1)
    p_uncond: float          # P(NACK_2), independently drawn transmissions
    cond_trials: int
    uncond_trials: int

    def gap_sigma(self) -> float:
        """Pooled standard error of (p_cond - p_uncond)."""
        va = self.p_cond * (1 - self.p_cond) / max(self.cond_trials, 1)
        vb = self.p_uncond * (1 - self.p_uncond) / max(self.uncond_trials, 1)
        return float(np.sqrt(va + vb))


def measure_conditional_per(block_bits: int, model: ChannelModel, trials: int,
                            seed: int) -> ConditionalPerResult:
    """Second-round failure probability with and without conditioning.

    Uses uncoded blocks (a block fails when any hard-decided bit is wrong):
    the conditional figure combines the retransmission with the stored
    failed copy, the unconditional one combines two fresh transmissions.
    """
    if block_bits < 1 or trials < 1:
        raise ValueError("block_bits and trials must be >= 1")
    n2_fail_given_n1 = 0
    n1_fail = 0
    n2_fail_free = 0
    for t in range(trials):
        rng = rng_for(seed, t)
        bits = rng.integers(0, 2, size=block_bits, dtype=np.uint8)
        symbols = modulate(bits)
        r1 = transmit(symbols, model, rng)
        r2 = transmit(symbols, model, rng)
        err1 = bool(((mrc_combine([r1]) < 0).astype(np.uint8) != bits).any())
        comb = (mrc_combine([r1, r2]) < 0).astype(np.uint8)
        err2 = bool((comb != bits).any())
        if err1:
            n1_fail += 1
            n2_fail_given_n1 += int(err2)
        n2_fail_free += int(err2)
    p_cond = n2_fail_given_n1 / n1_fail if n1_fail else float("nan")
    return ConditionalPerResult(p_cond, n2_fail_free / trials, n1_fail, trials)


# ---------------------------------------------------------------------------
# Adaptive code / subpacket selection


def adaptive_code_select(candidates, gamma_db: float, channel_kind: str):
    """Pick the (config, PER table) pair with the best SAS throughput.

    ``candidates`` is a list of (HarqConfig, PerTable); all must share the
    packet size L*N.  Ties go to the higher code rate, then the shorter
    component code.
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    packet_bits = {cfg.packet_bits for cfg, _ in candidates}
    if len(packet_bits) != 1:
        raise ValueError("candidates must share the packet size L*N")
    best = None
    for cfg, table in candidates:
        sas = analysis.SasInputs.from_per_table(table, cfg, channel_kind)
        eta = analysis.sas_throughput(sas, gamma_db)
        key = (eta, cfg.kappa / cfg.N, -cfg.code.n)
        if best is None or key > best[0]:
            best = (key, cfg, eta)
    return best[1], best[2]
