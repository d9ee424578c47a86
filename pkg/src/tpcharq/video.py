"""Trace-driven video delivery over the HARQ link.

Frames are shipped in order over a link whose per-frame delivery time
comes from the delay model (analytic mode, default) or from per-packet
round sampling (sampled mode).  The receiver-side controller watches the
playback buffer occupancy and, for configured frame types, either lowers
the retransmission limit so the frame fits its delivery budget or falsely
acknowledges it outright; such frames are concealed at the player.

Trace files are CSV with header ``index,type,size_bits,psnr_db,
psnr_concealed_db`` (the two PSNR columns optional).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import LinkTiming, frame_delivery_time
from .channel import rng_for

FRAME_TYPES = ("I", "P", "B")

NORMAL = "normal"
REDUCED_M = "reduced_m"
FALSE_ACK = "false_ack"


@dataclass
class Frame:
    index: int
    type: str
    size_bits: int
    psnr_db: float | None = None
    psnr_concealed_db: float | None = None


@dataclass
class VideoTrace:
    frames: list
    fps: float

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        if not self.frames:
            raise ValueError("trace must contain at least one frame")
        for i, f in enumerate(self.frames, start=1):
            if f.index != i:
                raise ValueError(f"frame indices must be contiguous from 1, "
                                 f"got {f.index} at position {i}")
            if f.size_bits <= 0:
                raise ValueError(f"frame {f.index}: size must be positive")
            if f.type not in FRAME_TYPES:
                raise ValueError(f"frame {f.index}: unknown type {f.type!r}")

    @property
    def has_psnr(self) -> bool:
        return all(f.psnr_db is not None for f in self.frames)

    @property
    def has_concealed_psnr(self) -> bool:
        return all(f.psnr_concealed_db is not None for f in self.frames)

    @property
    def mean_bit_rate(self) -> float:
        total = sum(f.size_bits for f in self.frames)
        return total * self.fps / len(self.frames)

    def sizes(self) -> np.ndarray:
        return np.array([f.size_bits for f in self.frames], dtype=np.float64)


def load_trace(path, fps: float = 30.0) -> VideoTrace:
    """Parse and validate a trace CSV; errors carry the offending line."""
    frames = []
    seen = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"index", "type", "size_bits"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValueError(f"{path}: header must contain {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                idx = int(row["index"])
                ftype = row["type"].strip().upper()
                size = int(row["size_bits"])
                psnr = _opt_float(row.get("psnr_db"))
                psnr_c = _opt_float(row.get("psnr_concealed_db"))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}, line {lineno}: {exc}") from exc
            if idx in seen:
                raise ValueError(f"{path}, line {lineno}: duplicate index {idx}")
            if size <= 0:
                raise ValueError(f"{path}, line {lineno}: non-positive size")
            if ftype not in FRAME_TYPES:
                raise ValueError(f"{path}, line {lineno}: unknown type {ftype!r}")
            seen.add(idx)
            frames.append(Frame(idx, ftype, size, psnr, psnr_c))
    frames.sort(key=lambda f: f.index)
    return VideoTrace(frames, fps)


def _opt_float(value):
    if value is None or value == "":
        return None
    return float(value)


def synthetic_trace(n_frames: int = 900, fps: float = 30.0,
                    gop: int = 16, b_run: int = 3,
                    mean_frame_bits: int = 12000, seed: int = 7) -> VideoTrace:
    """Deterministic VBR trace with a key-frame/B-frame group structure."""
    rng = rng_for(seed, 0x7ACE)
    frames = []
    for i in range(n_frames):
        pos = i % gop
        if pos == 0:
            ftype, scale = "I", 4.0
        elif pos % (b_run + 1) == 0:
            ftype, scale = "P", 1.6
        else:
            ftype, scale = "B", 0.55
        wobble = 1.0 + 0.25 * math.sin(2 * math.pi * i / 97.0) \
            + 0.15 * float(rng.standard_normal())
        size = max(400, int(mean_frame_bits * scale * max(wobble, 0.2)))
        psnr = {"I": 38.5, "P": 36.5, "B": 35.5}[ftype] \
            + 1.5 * float(rng.standard_normal())
        psnr_c = psnr - 5.0 - 1.5 * float(rng.random())
        frames.append(Frame(i + 1, ftype, size, round(psnr, 2), round(psnr_c, 2)))
    return VideoTrace(frames, fps)


def write_trace(trace: VideoTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "type", "size_bits", "psnr_db", "psnr_concealed_db"])
        for f in trace.frames:
            w.writerow([f.index, f.type, f.size_bits,
                        "" if f.psnr_db is None else f.psnr_db,
                        "" if f.psnr_concealed_db is None else f.psnr_concealed_db])


# ---------------------------------------------------------------------------
# The occupancy-based controller


@dataclass(frozen=True)
class AharqConfig:
    b_p: int = 16                 # preroll threshold, frames
    b_th_i: int = 2
    b_th_p: int = 8
    b_th_b: int = 16
    false_ack_types: frozenset = frozenset({"B"})
    base_M: int = 4

    def __post_init__(self):
        if not self.b_th_i < self.b_th_p < self.b_th_b:
            raise ValueError("thresholds must satisfy b_th_i < b_th_p < b_th_b")
        if self.b_p < 1 or self.base_M < 1:
            raise ValueError("b_p and base_M must be >= 1")
        object.__setattr__(self, "false_ack_types",
                           frozenset(t.upper() for t in self.false_ack_types))

    def threshold(self, frame_type: str) -> int:
        return {"I": self.b_th_i, "P": self.b_th_p, "B": self.b_th_b}[frame_type]


def budget_time(b_c: float, b_th: float, fps: float) -> float:
    """Seconds of playback slack above the occupancy threshold."""
    if fps <= 0:
        raise ValueError("fps must be positive")
    return (b_c - b_th) / fps


@dataclass(frozen=True)
class HarqLink:
    """Per-round error probabilities plus geometry and timing of the link."""

    per_rounds: tuple
    L: int
    N: int
    kappa: int
    timing: LinkTiming

    def delivery_time(self, frame_bits: float, m_limit: int) -> float:
        rounds = self.per_rounds[:m_limit]
        return frame_delivery_time(frame_bits, rounds, self.L, self.N,
                                   self.kappa, self.timing)


def estimate_frame_delivery(frame: Frame, link: HarqLink, m_limit: int) -> float:
    """Expected delivery time of one frame under a reduced round limit."""
    if not 1 <= m_limit <= len(link.per_rounds):
        raise ValueError("m_limit must be in [1, base M]")
    return link.delivery_time(frame.size_bits, m_limit)


def aharq_decide(frame: Frame, b_c: float, link: HarqLink, cfg: AharqConfig,
                 fps: float, playback_started: bool = True):
    """Controller decision for one frame: (decision, effective round limit).

    Below the type threshold the frame is falsely acknowledged without
    estimating its delivery time; otherwise the largest round limit whose
    delivery estimate fits the budget is chosen.
    """
    if not playback_started or frame.type not in cfg.false_ack_types:
        return NORMAL, cfg.base_M
    if b_c < cfg.threshold(frame.type):
        return FALSE_ACK, 1
    t_b = budget_time(b_c, cfg.threshold(frame.type), fps)
    for m in range(cfg.base_M, 0, -1):
        if estimate_frame_delivery(frame, link, m) <= t_b:
            return (NORMAL, m) if m == cfg.base_M else (REDUCED_M, m)
    return FALSE_ACK, 1


# ---------------------------------------------------------------------------
# Playback simulation


@dataclass
class TimelineEvent:
    time: float
    frame_index: int      # 0 for drain/starvation events
    event: str            # "arrival" | "drain" | "starvation"
    occupancy: int
    decision: str


@dataclass
class BufferTimeline:
    events: list
    starvation_instants: list
    concealed_frames: set
    decisions: list               # (decision, m_effective) per frame

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "frame_index", "event", "occupancy", "decision"])
            for e in self.events:
                w.writerow([f"{e.time:.6f}", e.frame_index, e.event,
                            e.occupancy, e.decision])


@dataclass
class PlaybackReport:
    timeline: BufferTimeline
    concealed_pct: float
    psnr_original: float | None     # mean source PSNR
    psnr_received: float | None     # mean with concealed frames substituted
    total_time: float


def simulate_playback(trace: VideoTrace, link: HarqLink, aharq: AharqConfig,
                      enabled: bool = True, mode: str = "analytic",
                      seed: int = 1) -> PlaybackReport:
    """Run the delivery/playback timeline for a whole trace.

    analytic mode uses expected delivery times; sampled mode draws each
    packet's round count from the per-round error probabilities.  A frame
    decided FALSE_ACK is sent exactly once.  A frame is concealed when the
    cut actually bit: some packet was still erroneous at its effective
    round limit (a false ACK only exists for an erroneous packet, so an
    error-free link conceals nothing).  Analytic mode cannot resolve
    individual packets and counts every cut frame whose truncated drop
    probability is nonzero.
    """
    if mode not in ("analytic", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")

    events: list[TimelineEvent] = []
    starvations: list[float] = []
    concealed: set[int] = set()
    decisions: list = []

    occ = 0
    started = False
    stalled = False
    play_t = math.inf      # time of the next drain while playback is live
    t = 0.0                # transmission clock
    step = 1.0 / trace.fps

    def advance_playback(until: float):
        nonlocal occ, play_t, stalled
        while started and not stalled and play_t <= until:
            if occ > 0:
                occ -= 1
                events.append(TimelineEvent(play_t, 0, "drain", occ, ""))
                play_t += step
            else:
                starvations.append(play_t)
                events.append(TimelineEvent(play_t, 0, "starvation", occ, ""))
                stalled = True

    for frame in trace.frames:
        advance_playback(t)
        if enabled:
            decision, m_eff = aharq_decide(frame, occ, link, aharq, trace.fps,
                                           playback_started=started)
        else:
            decision, m_eff = NORMAL, aharq.base_M

        if mode == "analytic":
            duration = link.delivery_time(frame.size_bits, m_eff)
            drop_prob = float(np.prod(link.per_rounds[:m_eff]))
            dropped = drop_prob > 0.0
        else:
            duration, dropped = _sample_delivery(frame, link, m_eff,
                                                 rng_for(seed, frame.index))
        if decision in (FALSE_ACK, REDUCED_M) and dropped:
            concealed.add(frame.index)
        decisions.append((decision, m_eff))

        advance_playback(t + duration)
        t += duration
        occ += 1
        events.append(TimelineEvent(t, frame.index, "arrival", occ, decision))
        if not started and occ >= aharq.b_p:
            started = True
            play_t = t + step
        elif stalled:
            # the awaited frame plays out immediately on arrival
            occ -= 1
            events.append(TimelineEvent(t, 0, "drain", occ, ""))
            play_t = t + step
            stalled = False

    # delivery finished: play out whatever is buffered
    if not started and occ > 0:
        started = True
        play_t = t + step
    while occ > 0:
        occ -= 1
        events.append(TimelineEvent(play_t, 0, "drain", occ, ""))
        play_t += step

    timeline = BufferTimeline(events, starvations, concealed, decisions)
    n = len(trace.frames)
    psnr_orig = psnr_recv = None
    if trace.has_psnr:
        psnr_orig = float(np.mean([f.psnr_db for f in trace.frames]))
        if trace.has_concealed_psnr:
            vals = [f.psnr_concealed_db if f.index in concealed else f.psnr_db
                    for f in trace.frames]
            psnr_recv = float(np.mean(vals))
    return PlaybackReport(
        timeline=timeline,
        concealed_pct=100.0 * len(concealed) / n,
        psnr_original=psnr_orig,
        psnr_received=psnr_recv,
        total_time=t,
    )


def _sample_delivery(frame: Frame, link: HarqLink, m_limit: int, rng):
    """Draw per-packet round counts from the per-round error probabilities."""
    payload = link.L * link.kappa
    packets = max(1, math.ceil(frame.size_bits / payload))
    p = np.asarray(link.per_rounds[:m_limit])
    total_sub_rounds = 0
    max_rounds = 0
    dropped = False
    for _ in range(packets):
        pkt_rounds = 0
        for _ in range(link.L):
            rounds = 1
            while rounds <= m_limit and rng.random() < p[rounds - 1]:
                if rounds == m_limit:
                    dropped = True
                    break
                rounds += 1
            total_sub_rounds += rounds
            pkt_rounds = max(pkt_rounds, rounds)
        max_rounds += pkt_rounds
    air = total_sub_rounds * link.N / link.timing.chi
    rtts = max_rounds * 2.0 * link.timing.t_p
    return air + rtts, dropped
