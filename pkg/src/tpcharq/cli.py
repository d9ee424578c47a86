"""Batch experiment front end.

Every subcommand reads a flat ``key=value`` config file (optional) plus
command-line overrides, runs one experiment deterministically for the
given seed, writes CSV to ``--out``, and drops a JSON manifest with the
resolved configuration next to it.

Exit status: 0 success, 1 usage/config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, analysis, harq, video
from .channel import AWGN, RAYLEIGH, ChannelModel
from .codec import CRC_BY_NAME, CRC16_8005, HarqConfig, component_code

EXPERIMENTS = (
    "per-sweep", "harq-throughput", "sas-compare", "delay-sweep",
    "power-opt", "power-opt-blind", "detect-eval", "complexity-table",
    "video-sim", "code-select",
)

_HELP = {
    "per-sweep": "Measure the per-round subpacket error rates over an SNR grid.",
    "harq-throughput": "Monte Carlo HARQ throughput over an SNR grid.",
    "sas-compare": "Semi-analytic vs Monte Carlo throughput on one grid.",
    "delay-sweep": "Subpacket vs whole-packet delivery delay over an SNR grid.",
    "power-opt": "Transmit power optimization from a measured PER curve.",
    "power-opt-blind": "Power optimization driven only by ACK/NACK feedback.",
    "detect-eval": "False-alarm and misdetection rates of the detection mode.",
    "complexity-table": "Self-detection vs CRC detection XOR-cost bounds "
                        "(four component codes x three CRC standards).",
    "video-sim": "Trace-driven playback buffer simulation with the "
                 "occupancy-based adaptive controller.",
    "code-select": "Throughput-maximizing code/subpacket choice per SNR.",
}


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    m: int = 4
    L: int = 1
    M: int = 4
    detection: str = "crc"
    crc: str = "crc16-8005"
    decoder: str = "siso"
    p: int = 4
    max_iters: int = 4
    channel: str = "awgn"
    snr_start: float = 0.0
    snr_stop: float = 8.0
    snr_step: float = 1.0
    trials: int = 1000
    mu: float = 0.95
    epsilon: float = 0.01
    p_max: float = 1.0
    method: str = "bisection"
    window: int = 100
    blind_packets: int = 400
    chi: float = 2e6
    t_p: float = 0.0
    payload_bits: int = 0
    trace: str = ""
    fps: float = 30.0
    per_rounds: str = ""
    b_p: int = 16
    b_th_i: int = 2
    b_th_p: int = 8
    b_th_b: int = 16
    aharq: bool = True
    video_mode: str = "analytic"
    codes: str = ""
    seed: int = 1
    out: str = "out.csv"
    raw: dict = field(default_factory=dict)

    def snr_grid(self) -> np.ndarray:
        if self.snr_stop < self.snr_start or self.snr_step <= 0:
            raise UsageError("need snr_start <= snr_stop and snr_step > 0")
        n = int(round((self.snr_stop - self.snr_start) / self.snr_step)) + 1
        return self.snr_start + self.snr_step * np.arange(n)

    def harq_config(self) -> HarqConfig:
        code = component_code(self.m)
        crc = None
        if self.detection == "crc":
            if self.crc not in CRC_BY_NAME:
                raise UsageError(f"unknown CRC {self.crc!r}; "
                                 f"known: {sorted(CRC_BY_NAME)}")
            crc = CRC_BY_NAME[self.crc]
        return HarqConfig(code=code, L=self.L, M=self.M,
                          detection=self.detection, crc=crc,
                          decoder_mode=self.decoder, p=self.p,
                          max_iters=self.max_iters)

    def channel_model(self, cfg: HarqConfig) -> ChannelModel:
        return ChannelModel(kind=self.channel, ebn0_db=self.snr_start,
                            code_rate=cfg.code_rate)


_BOOL_KEYS = {"aharq"}
_INT_KEYS = {"m", "L", "M", "p", "max_iters", "trials", "window", "seed",
             "payload_bits", "b_p", "b_th_i", "b_th_p", "b_th_b",
             "blind_packets"}
_FLOAT_KEYS = {"snr_start", "snr_stop", "snr_step", "mu", "epsilon", "p_max",
               "chi", "t_p", "fps"}


def parse_config(experiment: str, config_path: str | None,
                 overrides: list[str]) -> ExperimentConfig:
    """Merge config file and overrides into a validated ExperimentConfig."""
    if experiment not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {experiment!r}")
    values: dict = {}
    if config_path:
        try:
            with open(config_path) as fh:
                for lineno, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line or line.startswith("#"):
                        continue
                    if "=" not in line:
                        raise UsageError(
                            f"{config_path}:{lineno}: expected key=value")
                    key, _, val = line.partition("=")
                    values[key.strip()] = val.strip()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, _, val = item.partition("=")
        values[key.strip()] = val.strip()

    cfg = ExperimentConfig(experiment=experiment, raw=dict(values))
    known = set(asdict(cfg)) - {"experiment", "raw"}
    for key, val in values.items():
        if key not in known:
            raise UsageError(f"unknown config key {key!r}")
        try:
            if key in _BOOL_KEYS:
                parsed = val.lower() in ("1", "true", "yes", "on")
            elif key in _INT_KEYS:
                parsed = int(val)
            elif key in _FLOAT_KEYS:
                parsed = float(val)
            else:
                parsed = val
        except ValueError as exc:
            raise UsageError(f"config key {key}: {exc}") from exc
        setattr(cfg, key, parsed)

    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.M < 1:
        raise UsageError("M must be >= 1")
    if cfg.L < 1:
        raise UsageError("L must be >= 1")
    if not 3 <= cfg.m <= 7:
        raise UsageError("component code degree m must be in [3, 7]")
    if cfg.detection not in ("crc", "self", "perfect"):
        raise UsageError("detection must be crc, self, or perfect")
    if cfg.detection != "crc" and "crc" in cfg.raw:
        raise UsageError("a CRC polynomial contradicts detection="
                         f"{cfg.detection} (CRC bits are replaced by payload)")
    if cfg.decoder not in ("siso", "hiho"):
        raise UsageError("decoder must be siso or hiho")
    if cfg.channel not in (AWGN, RAYLEIGH):
        raise UsageError("channel must be awgn or rayleigh")
    if not 1 <= cfg.p <= 8:
        raise UsageError("p must be in [1, 8]")
    if cfg.trials < 1:
        raise UsageError("trials must be >= 1")
    if not 0 < cfg.mu <= 1:
        raise UsageError("mu must be in (0, 1]")
    if not 0 < cfg.epsilon < 1:
        raise UsageError("epsilon must be in (0, 1)")
    if cfg.experiment == "video-sim" and not cfg.trace:
        raise UsageError("video-sim requires trace=<csv path or 'synthetic'>")
    if cfg.experiment == "code-select" and not cfg.codes:
        raise UsageError("code-select requires codes=<comma list of m>")
    try:
        cfg.harq_config()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Experiment runners


def _progress(done: int, total: int) -> None:
    print(f"  ... {done}/{total} packets", file=sys.stderr)


def _write_rows(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _manifest(cfg: ExperimentConfig) -> None:
    data = {k: v for k, v in asdict(cfg).items() if k != "raw"}
    data["version"] = __version__
    with open(cfg.out + ".manifest.json", "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


OPT_HEADER = ["snr_db", "eta_sas", "eta_mc", "p_star", "p_avg",
              "p_saving_pct", "iterations"]


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.8g}" if isinstance(x, float) else str(x)


def _sas_grid(cfg: ExperimentConfig, hq: HarqConfig) -> np.ndarray:
    """Measurement grid wide enough to cover the combining-gain mapping."""
    grid = cfg.snr_grid()
    top = grid[-1] + 10.0 * math.log10(hq.M) + 0.5
    extra = np.arange(grid[-1] + cfg.snr_step, top + cfg.snr_step, cfg.snr_step)
    return np.concatenate([grid, extra])


def run_per_sweep(cfg: ExperimentConfig) -> None:
    hq = cfg.harq_config()
    table = harq.measure_per_table(hq, cfg.channel_model(hq), cfg.snr_grid(),
                                   cfg.trials, cfg.seed)
    table.to_csv(cfg.out)


def run_harq_throughput(cfg: ExperimentConfig) -> None:
    hq = cfg.harq_config()
    model = cfg.channel_model(hq)
    rows = []
    for snr in cfg.snr_grid():
        stats = harq.monte_carlo(hq, model.at_ebn0(float(snr)), cfg.trials,
                                 cfg.seed, progress=(500, _progress))
        rows.append([_fmt(float(snr)), _fmt(stats.throughput),
                     _fmt(stats.far), _fmt(stats.mdr)])
    _write_rows(cfg.out, ["snr_db", "eta_mc", "far", "mdr"], rows)


def run_sas_compare(cfg: ExperimentConfig) -> None:
    hq = cfg.harq_config()
    model = cfg.channel_model(hq)
    single = harq.measure_single_shot_per(hq, model, _sas_grid(cfg, hq),
                                          cfg.trials, cfg.seed + 1)
    sas = analysis.SasInputs.from_per_table(single, hq, cfg.channel)
    rows = []
    for snr in cfg.snr_grid():
        eta_sas = analysis.sas_throughput(sas, float(snr))
        stats = harq.monte_carlo(hq, model.at_ebn0(float(snr)), cfg.trials,
                                 cfg.seed, progress=(500, _progress))
        rows.append([_fmt(float(snr)), _fmt(eta_sas), _fmt(stats.throughput),
                     "", "", "", ""])
    _write_rows(cfg.out, OPT_HEADER, rows)


def run_delay_sweep(cfg: ExperimentConfig) -> None:
    hq = cfg.harq_config()
    model = cfg.channel_model(hq)
    single = harq.measure_single_shot_per(hq, model, _sas_grid(cfg, hq),
                                          cfg.trials, cfg.seed + 1)
    sas = analysis.SasInputs.from_per_table(single, hq, cfg.channel)
    timing = analysis.LinkTiming(chi=cfg.chi, t_p=cfg.t_p)
    payload = cfg.payload_bits or cfg.L * hq.kappa
    rows = []
    for snr in cfg.snr_grid():
        rounds = sas.per_rounds_at(float(snr))
        tau_s = analysis.delay_tau(rounds, cfg.L, hq.N, hq.kappa, timing,
                                   payload, subpacketized=True)
        tau = analysis.delay_tau(rounds, 1, hq.N, hq.kappa, timing,
                                 payload, subpacketized=False)
        rows.append([_fmt(float(snr)), _fmt(tau_s), _fmt(tau)])
    _write_rows(cfg.out, ["snr_db", "tau_sub_s", "tau_pkt_s"], rows)


def _power_sweep(cfg: ExperimentConfig, eta_fn_for_snr) -> None:
    opt_cfg = analysis.OptimizerConfig(mu=cfg.mu, epsilon=cfg.epsilon,
                                       p_max=cfg.p_max, method=cfg.method)
    rows = []
    for snr in cfg.snr_grid():
        eta_fn = eta_fn_for_snr(float(snr))
        res = analysis.optimize_power(eta_fn, opt_cfg)
        p_avg = analysis.avg_power(res.p_star, res.eta_at_p_star)
        rows.append([_fmt(float(snr)), _fmt(res.eta_at_p_star), "",
                     _fmt(res.p_star), _fmt(p_avg),
                     _fmt(res.power_saving_pct), res.iterations])
    _write_rows(cfg.out, OPT_HEADER, rows)


def run_power_opt(cfg: ExperimentConfig) -> None:
    hq = cfg.harq_config()
    model = cfg.channel_model(hq)
    top = cfg.snr_grid()[-1] + 10.0 * math.log10(hq.M) + 0.5
    grid = np.arange(min(cfg.snr_start - 6.0, -2.0), top, cfg.snr_step)
    single = harq.measure_single_shot_per(hq, model, grid, cfg.trials,
                                          cfg.seed + 1)
    sas = analysis.SasInputs.from_per_table(single, hq, cfg.channel)

    def eta_for(snr_db: float):
        return analysis.sas_eta_vs_power(sas, snr_db, cfg.p_max)

    _power_sweep(cfg, eta_for)


def run_power_opt_blind(cfg: ExperimentConfig) -> None:
    hq = cfg.harq_config()
    model = cfg.channel_model(hq)

    def eta_for(snr_db: float):
        return harq.blind_eta_fn(hq, model.at_ebn0(snr_db), cfg.p_max,
                                 cfg.window, cfg.blind_packets, cfg.seed)

    _power_sweep(cfg, eta_for)


def run_detect_eval(cfg: ExperimentConfig) -> None:
    hq = cfg.harq_config()
    model = cfg.channel_model(hq)
    rows = []
    for snr in cfg.snr_grid():
        stats = harq.monte_carlo(hq, model.at_ebn0(float(snr)), cfg.trials,
                                 cfg.seed, progress=(500, _progress))
        per = stats.per_round_rates()
        rows.append([_fmt(float(snr)), _fmt(stats.far), _fmt(stats.mdr),
                     _fmt(float(per[0])), _fmt(stats.throughput)])
    _write_rows(cfg.out, ["snr_db", "far", "mdr", "per_round1", "eta_mc"], rows)


COMPLEXITY_CODES = (7, 6, 5, 4)
COMPLEXITY_CRCS = ("crc16-8005", "crc16-8bb7", "crc32-1edc6f41")


def run_complexity_table(cfg: ExperimentConfig) -> None:
    rows = []
    for crc_name in COMPLEXITY_CRCS:
        crc = CRC_BY_NAME[crc_name]
        for m in COMPLEXITY_CODES:
            code = component_code(m)
            # payload held at the 16-bit-CRC value so rows are comparable
            rep = analysis.detection_complexity(code, crc, p=cfg.p,
                                                kappa=code.k ** 2 - 16)
            rows.append([crc_name, code.name,
                         f"{rep.cs_bounds[0]:.4f}", f"{rep.cs_bounds[1]:.4f}"])
    _write_rows(cfg.out, ["crc", "code", "cs_lb", "cs_ub"], rows)


def run_video_sim(cfg: ExperimentConfig) -> None:
    if cfg.trace == "synthetic":
        trace = video.synthetic_trace(fps=cfg.fps, seed=cfg.seed)
    else:
        trace = video.load_trace(cfg.trace, fps=cfg.fps)
    if not cfg.per_rounds:
        raise UsageError("video-sim requires per_rounds=<comma list>")
    rounds = tuple(float(x) for x in cfg.per_rounds.split(","))
    hq = cfg.harq_config()
    eta = analysis.throughput_from_rounds(rounds, hq.kappa, hq.N)
    chi = cfg.chi if "chi" in cfg.raw else trace.mean_bit_rate / eta
    link = video.HarqLink(per_rounds=rounds, L=cfg.L, N=hq.N, kappa=hq.kappa,
                          timing=analysis.LinkTiming(chi=chi, t_p=cfg.t_p))
    actrl = video.AharqConfig(b_p=cfg.b_p, b_th_i=cfg.b_th_i,
                              b_th_p=cfg.b_th_p, b_th_b=cfg.b_th_b,
                              base_M=len(rounds))
    report = video.simulate_playback(trace, link, actrl, enabled=cfg.aharq,
                                     mode=cfg.video_mode, seed=cfg.seed)
    report.timeline.to_csv(cfg.out)
    print(f"starvation_instants={len(report.timeline.starvation_instants)} "
          f"concealed_pct={report.concealed_pct:.2f} "
          f"psnr={_fmt(report.psnr_original)} "
          f"psnr_concealed={_fmt(report.psnr_received)}", file=sys.stderr)


def run_code_select(cfg: ExperimentConfig) -> None:
    ms = [int(x) for x in cfg.codes.split(",")]
    packet_bits = max(component_code(m).n ** 2 for m in ms)
    candidates = []
    for m in ms:
        code = component_code(m)
        L = packet_bits // code.n ** 2
        sub = ExperimentConfig(**{**{k: v for k, v in asdict(cfg).items()
                                     if k != "raw"}, "m": m, "L": L})
        hq = sub.harq_config()
        table = harq.measure_single_shot_per(
            hq, sub.channel_model(hq), _sas_grid(cfg, hq),
            cfg.trials, cfg.seed + m)
        candidates.append((hq, table))
    rows = []
    for snr in cfg.snr_grid():
        best_cfg, eta = harq.adaptive_code_select(candidates, float(snr),
                                                  cfg.channel)
        rows.append([_fmt(float(snr)), best_cfg.code.name, best_cfg.L,
                     _fmt(eta)])
    _write_rows(cfg.out, ["snr_db", "code", "L", "eta_sas"], rows)


RUNNERS = {
    "per-sweep": run_per_sweep,
    "harq-throughput": run_harq_throughput,
    "sas-compare": run_sas_compare,
    "delay-sweep": run_delay_sweep,
    "power-opt": run_power_opt,
    "power-opt-blind": run_power_opt_blind,
    "detect-eval": run_detect_eval,
    "complexity-table": run_complexity_table,
    "video-sim": run_video_sim,
    "code-select": run_code_select,
}


def run_experiment(cfg: ExperimentConfig) -> None:
    RUNNERS[cfg.experiment](cfg)
    _manifest(cfg)


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="tpcharq",
                     description="HARQ-with-Chase-combining experiment runner")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="experiment", metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=_HELP[name], description=_HELP[name])
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--set", action="append", default=[], metavar="K=V",
                       help="override a config key")
        p.add_argument("--seed", type=int, help="experiment seed")
        p.add_argument("--trials", type=int, help="Monte Carlo size per point")
        p.add_argument("--out", help="output CSV path")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not args.experiment:
            raise UsageError("an experiment subcommand is required")
        overrides = list(args.set)
        for key in ("seed", "trials", "out"):
            val = getattr(args, key)
            if val is not None:
                overrides.append(f"{key}={val}")
        cfg = parse_config(args.experiment, args.config, overrides)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        run_experiment(cfg)
    except Exception as exc:  # noqa: BLE001 - report and signal failure
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
