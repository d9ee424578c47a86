"""Semi-analytic throughput/delay, power optimization, and detection costs.

Everything here is driven by the per-round subpacket error probabilities
P_E(1..M).  For the semi-analytic route only the single-transmission curve
P_E(snr) is measured; later rounds are obtained by an SNR mapping:

* AWGN: combining l equal-SNR rounds is pure array gain, so
  ``P_E^(l)(g) = P_E(l*g)``.
* Rayleigh: combining changes the fading statistics; the l-fold diversity
  BER is equated to the no-combining BER at an equivalent SNR ``Psi(g, l)``
  and ``P_E^(l)(g) = P_E(Psi(g, l))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import AWGN, RAYLEIGH
from .codec import ComponentCode, CrcSpec

PER_FLOOR = 1e-9  # stands in for measured zeros when interpolating log-PER


# ---------------------------------------------------------------------------
# Per-round bookkeeping


def expected_rho(per_rounds) -> float:
    """Mean number of transmissions per subpacket under truncation at M.

    Uses the tail-sum form ``1 + sum_i prod_{j<=i} P_E^(j)``; see
    ``expected_rho_direct`` for the equivalent expanded form kept as a
    cross-check.
    """
    p = _check_probs(per_rounds)
    out = 1.0
    prod = 1.0
    for i in range(p.size - 1):
        prod *= p[i]
        out += prod
    return out


def expected_rho_direct(per_rounds) -> float:
    """Expanded closed form of ``expected_rho`` (more cancellations)."""
    p = _check_probs(per_rounds)
    m = p.size
    out = float(m)
    prod = 1.0
    for i in range(1, m):
        out -= (m - i) * (1.0 - p[i - 1]) * prod
        prod *= p[i - 1]
    return out


def drop_rate(per_rounds) -> float:
    """Probability that all M rounds fail."""
    return float(np.prod(_check_probs(per_rounds)))


def throughput_from_rounds(per_rounds, kappa: int, N: int) -> float:
    """Throughput (kappa/N) * (1 - P_D) / E{rho}."""
    return (kappa / N) * (1.0 - drop_rate(per_rounds)) / expected_rho(per_rounds)


def _check_probs(per_rounds) -> np.ndarray:
    p = np.asarray(per_rounds, dtype=np.float64).ravel()
    if p.size < 1:
        raise ValueError("need at least one round probability")
    if (p < 0).any() or (p > 1).any():
        raise ValueError("round error probabilities must lie in [0, 1]")
    return p


def packet_tx_stats(per_rounds, L: int) -> tuple[np.ndarray, float]:
    """PMF and mean of the per-packet round count (max over L subpackets)."""
    if L < 1:
        raise ValueError("L must be >= 1")
    p = _check_probs(per_rounds)
    m = p.size
    cdf_sub = np.empty(m)  # P(rho_untruncated <= l)
    prod = 1.0
    for i in range(m):
        prod *= p[i]
        cdf_sub[i] = 1.0 - prod
    pmf = np.empty(m)
    prev = 0.0
    for l in range(m - 1):
        cur = cdf_sub[l] ** L
        pmf[l] = cur - prev
        prev = cur
    pmf[m - 1] = 1.0 - prev
    mean = float(np.dot(pmf, np.arange(1, m + 1)))
    return pmf, mean


# ---------------------------------------------------------------------------
# Rayleigh diversity mapping


def rayleigh_ber(gamma: float) -> float:
    """BPSK bit error rate over Rayleigh fading, no combining."""
    return 0.5 * (1.0 - math.sqrt(gamma / (1.0 + gamma)))


def diversity_ber(gamma: float, ell: int) -> float:
    """BPSK BER with ell-order maximal ratio diversity, branch SNR gamma."""
    if ell < 1:
        raise ValueError("diversity order must be >= 1")
    lam = gamma / (1.0 + gamma)
    half_minus = 0.5 * (1.0 - math.sqrt(lam))
    half_plus = 0.5 * (1.0 + math.sqrt(lam))
    acc = 0.0
    for i in range(ell):
        acc += math.comb(ell - 1 + i, i) * half_plus ** i
    return half_minus ** ell * acc


def equivalent_snr(gamma: float, ell: int) -> float:
    """Single-transmission SNR whose BER matches ell-fold diversity.

    beta = 1 - 2*p_e^{ell}; Psi = beta^2 / (1 - beta^2).  Psi(g, 1) = g
    exactly.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    beta = 1.0 - 2.0 * diversity_ber(gamma, ell)
    if beta >= 1.0:
        raise FloatingPointError("equivalent-SNR map saturated (beta >= 1)")
    return beta * beta / (1.0 - beta * beta)


# ---------------------------------------------------------------------------
# Semi-analytic inputs


@dataclass
class SasInputs:
    """Single-shot PER curve plus the geometry needed for throughput."""

    snr_grid_db: np.ndarray
    per: np.ndarray
    M: int
    kappa: int
    N: int
    channel_kind: str
    _log_per: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.snr_grid_db = np.asarray(self.snr_grid_db, dtype=np.float64)
        self.per = np.asarray(self.per, dtype=np.float64)
        if self.snr_grid_db.ndim != 1 or self.snr_grid_db.size < 2:
            raise ValueError("need an SNR grid with at least two points")
        if (np.diff(self.snr_grid_db) <= 0).any():
            raise ValueError("snr_grid_db must be strictly ascending")
        if self.per.shape != self.snr_grid_db.shape:
            raise ValueError("per curve must match the grid")
        if (self.per < 0).any() or (self.per > 1).any():
            raise ValueError("PER values must lie in [0, 1]")
        if self.channel_kind not in (AWGN, RAYLEIGH):
            raise ValueError(f"unknown channel kind {self.channel_kind!r}")
        self._log_per = np.log10(np.maximum(self.per, PER_FLOOR))

    @classmethod
    def from_per_table(cls, table, cfg, channel_kind: str) -> "SasInputs":
        """Build from a measured single-shot PerTable and a HarqConfig."""
        return cls(
            snr_grid_db=table.snr_grid_db,
            per=table.per_round[0],
            M=cfg.M,
            kappa=cfg.kappa,
            N=cfg.N,
            channel_kind=channel_kind,
        )

    def per_at(self, gamma_db: float) -> float:
        """Interpolate the PER curve, linear in (dB, log10 PER), clamped."""
        g = float(np.clip(gamma_db, self.snr_grid_db[0], self.snr_grid_db[-1]))
        lp = float(np.interp(g, self.snr_grid_db, self._log_per))
        return float(np.clip(10.0 ** lp, 0.0, 1.0))

    def per_rounds_at(self, gamma_db: float) -> np.ndarray:
        """P_E(1..M) at operating SNR via the combining-gain mapping."""
        gamma = 10.0 ** (gamma_db / 10.0)
        out = np.empty(self.M)
        for ell in range(1, self.M + 1):
            if self.channel_kind == AWGN:
                eff_db = gamma_db + 10.0 * math.log10(ell)
            else:
                eff_db = 10.0 * math.log10(equivalent_snr(gamma, ell))
            out[ell - 1] = self.per_at(eff_db)
        return out


def sas_throughput(inputs: SasInputs, gamma_db: float) -> float:
    """Semi-analytic throughput at the given information-bit SNR."""
    return throughput_from_rounds(inputs.per_rounds_at(gamma_db),
                                  inputs.kappa, inputs.N)


def throughput_with_detection(per_rounds, far_rounds, mdr_rounds,
                              kappa: int, N: int) -> float:
    """Throughput with imperfect detection folded into the round PERs.

    The declared-error probability per round is P_E + P_F - P_M, clamped
    to [0, 1].
    """
    p = _check_probs(per_rounds)
    pf = np.asarray(far_rounds, dtype=np.float64).ravel()
    pm = np.asarray(mdr_rounds, dtype=np.float64).ravel()
    if pf.shape != p.shape or pm.shape != p.shape:
        raise ValueError("per/far/mdr round vectors must share length")
    eff = np.clip(p + pf - pm, 0.0, 1.0)
    return throughput_from_rounds(eff, kappa, N)


# ---------------------------------------------------------------------------
# Delay


@dataclass(frozen=True)
class LinkTiming:
    chi: float          # data rate, bits per second
    t_p: float = 0.0    # one-way propagation time, seconds

    def __post_init__(self):
        if self.chi <= 0:
            raise ValueError("data rate chi must be positive")
        if self.t_p < 0:
            raise ValueError("propagation time must be >= 0")


def delay_tau(per_rounds, L: int, N: int, kappa: int, timing: LinkTiming,
              K: int, subpacketized: bool = True) -> float:
    """Expected time to deliver K information bits.

    K is padded up to a whole number of packets.  With subpacketization
    only erroneous subpackets repeat, so the air time scales with the mean
    subpacket rounds while the per-packet round trips scale with the mean
    packet rounds (max over the L subpackets).
    """
    if K <= 0:
        raise ValueError("payload K must be positive")
    e_rho = expected_rho(per_rounds)
    if subpacketized:
        _, e_r = packet_tx_stats(per_rounds, L)
        packets = math.ceil(K / (L * kappa))
        return (e_rho * L * N / timing.chi + e_r * 2.0 * timing.t_p) * packets
    packets = math.ceil(K / kappa)
    return e_rho * (N / timing.chi + 2.0 * timing.t_p) * packets


def frame_delivery_time(frame_bits: float, per_rounds, L: int, N: int,
                        kappa: int, timing: LinkTiming) -> float:
    """Per-frame delivery estimate with fractional packet count.

    Matches the summand of the total video delay expression; truncating the
    round limit is done by passing a shortened per_rounds vector.
    """
    e_rho = expected_rho(per_rounds)
    _, e_r = packet_tx_stats(per_rounds, L)
    return (e_rho * L * N / timing.chi + e_r * 2.0 * timing.t_p) \
        * frame_bits / (kappa * L)


def video_total_delay(frame_sizes, per_rounds, L: int, N: int, kappa: int,
                      timing: LinkTiming) -> float:
    """Time to deliver every frame of a trace over the HARQ link."""
    sizes = np.asarray(frame_sizes, dtype=np.float64).ravel()
    if sizes.size == 0:
        raise ValueError("trace must contain at least one frame")
    e_rho = expected_rho(per_rounds)
    _, e_r = packet_tx_stats(per_rounds, L)
    per_bit = (e_rho * L * N / timing.chi + e_r * 2.0 * timing.t_p) / (kappa * L)
    return float(per_bit * sizes.sum())


# ---------------------------------------------------------------------------
# Power efficiency and optimization


def avg_power(p_per_bit: float, eta: float) -> float:
    """Average transmit power per delivered information bit (P / eta)."""
    if p_per_bit < 0:
        raise ValueError("transmit power must be >= 0")
    if eta <= 0:
        return math.inf
    return p_per_bit / eta


@dataclass(frozen=True)
class OptimizerConfig:
    mu: float = 0.95
    epsilon: float = 0.01
    p_max: float = 1.0
    p_min: float = 0.0
    method: str = "bisection"   # "bisection" | "brute_force"

    def __post_init__(self):
        if not 0 < self.mu <= 1:
            raise ValueError("mu must be in (0, 1]")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must be in (0, 1)")
        if self.p_max <= self.p_min or self.p_min < 0:
            raise ValueError("need 0 <= p_min < p_max")
        if self.method not in ("bisection", "brute_force"):
            raise ValueError(f"unknown search method {self.method!r}")


@dataclass
class OptResult:
    p_star: float
    eta_at_p_star: float
    iterations: int
    power_saving_pct: float
    feasible: bool


def optimize_power(eta_fn, cfg: OptimizerConfig,
                   p_initial: float | None = None) -> OptResult:
    """Smallest examined power whose throughput stays within mu of peak.

    ``eta_fn(P)`` evaluates throughput at per-bit transmit power P (the SNR
    is linear in P).  Iteration counts include the two setup evaluations,
    matching ceil(Gamma*(1 - P*/P0)) + 2 for the linear search and
    ceil(log2(Gamma)) + 2 for bisection with Gamma = 1/epsilon.

    Power saving compares the average power at the unoptimized operating
    point against the optimized one.
    """
    p0 = cfg.p_max if p_initial is None else float(p_initial)
    if not cfg.p_min < p0 <= cfg.p_max:
        raise ValueError("initial power must lie in (p_min, p_max]")

    eta_max = eta_fn(cfg.p_max)
    eta_p0 = eta_fn(p0) if p0 != cfg.p_max else eta_max
    iterations = 2
    target = cfg.mu * eta_max
    if eta_max <= 0:
        return OptResult(cfg.p_max, eta_max, iterations, 0.0, feasible=False)

    # restart from the top when the initial point already misses the target
    if eta_p0 < target:
        p0 = cfg.p_max
        eta_p0 = eta_max

    pbar_ref = avg_power(p0, eta_p0)

    if cfg.method == "brute_force":
        # iterations = ceil((P0 - P*) / delta) + 2: setup plus the steps
        # taken to walk from the start point down to the returned power
        delta = cfg.epsilon * p0
        p_star, eta_star = p0, eta_p0
        while True:
            p_next = p_star - delta
            if p_next <= cfg.p_min:
                break
            eta_next = eta_fn(p_next)
            if eta_next < target:
                break
            p_star, eta_star = p_next, eta_next
            iterations += 1
    else:
        # halve [p_min, P0] until its width drops below epsilon * P0; the
        # feasible edge is returned, so the constraint always holds
        lo, hi = cfg.p_min, p0
        eta_star = eta_p0
        tol = cfg.epsilon * p0
        while hi - lo >= tol:
            mid = 0.5 * (hi + lo)
            eta_mid = eta_fn(mid)
            iterations += 1
            if eta_mid < target:
                lo = mid
            else:
                hi = mid
                eta_star = eta_mid
        p_star = hi

    saving = 0.0
    pbar_star = avg_power(p_star, eta_star)
    if math.isfinite(pbar_ref) and pbar_ref > 0:
        saving = (pbar_ref - pbar_star) / pbar_ref * 100.0
    return OptResult(p_star, eta_star, iterations, saving, feasible=True)


def sas_eta_vs_power(inputs: SasInputs, gamma_ref_db: float, p_max: float):
    """Throughput as a function of transmit power, SNR linear in power.

    gamma_ref_db is the operating SNR when transmitting at p_max.
    """
    def eta_fn(p: float) -> float:
        if p <= 0:
            return 0.0
        return sas_throughput(inputs, gamma_ref_db + 10.0 * math.log10(p / p_max))

    return eta_fn


# ---------------------------------------------------------------------------
# Detection complexity


@dataclass
class ComplexityReport:
    ns_lfsr_bounds: tuple[float, float]
    ns_mtx_bounds: tuple[float, float]
    nc: float
    cs_bounds: tuple[float, float]
    n_hdd_bounds: tuple[float, float]
    cch_bounds: tuple[float, float]
    ccs_bounds: tuple[float, float]


def detection_complexity(code: ComponentCode, crc: CrcSpec, p: int = 4,
                         kappa: int | None = None) -> ComplexityReport:
    """XOR-count model of self-detection versus CRC detection.

    ``kappa`` is the CRC-detected payload per codeword; it defaults to
    k^2 - degree but is overridable so a comparison across CRC sizes can
    hold the payload fixed (the complexity table does, at k^2 - 16).
    """
    k, n, nu = code.k, code.n, code.nu
    if kappa is None:
        kappa = k * k - crc.degree
    if kappa <= 0:
        raise ValueError("CRC payload kappa must be positive")

    per_row_lfsr = 0.5 * (2 * nu - 1) * k
    ns_lfsr = (per_row_lfsr, per_row_lfsr * k)
    row_cost = float((code.parity_check_row_weights() - 1).sum())
    ns_mtx = (row_cost, row_cost * k)
    nc = (2 * crc.nu_bar - 1) * kappa
    cs = (ns_lfsr[0] / nc, ns_lfsr[1] / nc)

    lam = 1.0 / n  # single-error-correcting: t = 1
    log_sq = math.log10(n) ** 2
    n_hdd = (45.0 * lam * lam * n * n * log_sq,
             (45.0 * lam + 4.0) * lam * n * n * log_sq)
    cch = (0.5 * nc / (n * n_hdd[1]), 0.5 * nc / (n * n_hdd[0]))
    ccs = (cch[0] / (1 << p), cch[1] / (1 << p))
    return ComplexityReport(
        ns_lfsr_bounds=ns_lfsr,
        ns_mtx_bounds=ns_mtx,
        nc=float(nc),
        cs_bounds=cs,
        n_hdd_bounds=n_hdd,
        cch_bounds=cch,
        ccs_bounds=ccs,
    )
