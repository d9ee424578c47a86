"""Trace loading, the occupancy controller, and the playback timeline."""

import numpy as np
import pytest

from tpcharq.analysis import LinkTiming, throughput_from_rounds
from tpcharq.video import (
    FALSE_ACK,
    NORMAL,
    REDUCED_M,
    AharqConfig,
    Frame,
    HarqLink,
    VideoTrace,
    aharq_decide,
    budget_time,
    estimate_frame_delivery,
    load_trace,
    simulate_playback,
    synthetic_trace,
    write_trace,
)


def make_link(per_rounds=(0.4, 0.2, 0.1, 0.05), L=4, chi=1e6, t_p=1e-3):
    code_n2, kappa = 4096, 3233
    return HarqLink(per_rounds=tuple(per_rounds), L=L, N=code_n2, kappa=kappa,
                    timing=LinkTiming(chi=chi, t_p=t_p))


# ---------------------------------------------------------------------------
# traces


def test_load_trace_roundtrip(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(
        "index,type,size_bits,psnr_db,psnr_concealed_db\n"
        "1,I,5000,40.0,34.0\n2,P,2500,38.0,33.0\n3,B,1000,37.0,32.0\n")
    tr = load_trace(str(path), fps=25.0)
    assert [f.type for f in tr.frames] == ["I", "P", "B"]
    assert tr.has_psnr and tr.has_concealed_psnr
    assert tr.mean_bit_rate == pytest.approx((5000 + 2500 + 1000) / 3 * 25)


def test_load_trace_without_psnr(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("index,type,size_bits\n1,I,100\n2,B,50\n")
    tr = load_trace(str(path))
    assert not tr.has_psnr
    assert tr.frames[1].psnr_db is None


@pytest.mark.parametrize("body,msg", [
    ("1,I,100\n1,P,50\n", "duplicate"),
    ("1,I,-5\n", "size"),
    ("1,X,100\n", "type"),
    ("one,I,100\n", "line 2"),
])
def test_load_trace_rejects_malformed(tmp_path, body, msg):
    path = tmp_path / "bad.csv"
    path.write_text("index,type,size_bits\n" + body)
    with pytest.raises(ValueError, match=msg):
        load_trace(str(path))


def test_trace_requires_contiguous_indices():
    with pytest.raises(ValueError):
        VideoTrace([Frame(2, "I", 100)], fps=30)


def test_synthetic_trace_roundtrips_through_csv(tmp_path):
    tr = synthetic_trace(n_frames=64, seed=3)
    path = tmp_path / "synth.csv"
    write_trace(tr, str(path))
    back = load_trace(str(path))
    assert [f.size_bits for f in back.frames] == [f.size_bits for f in tr.frames]
    assert {f.type for f in back.frames} == {"I", "P", "B"}


# ---------------------------------------------------------------------------
# controller


def test_budget_time_examples():
    assert budget_time(16, 16, 30.0) == 0.0
    assert budget_time(46, 16, 30.0) == pytest.approx(1.0)
    assert budget_time(10, 16, 30.0) < 0.0
    with pytest.raises(ValueError):
        budget_time(1, 1, 0.0)


def test_estimate_frame_delivery_monotone_in_rounds():
    link = make_link()
    frame = Frame(1, "B", 20000)
    prev = 0.0
    for m in range(1, 5):
        cur = estimate_frame_delivery(frame, link, m)
        assert cur >= prev
        prev = cur
    with pytest.raises(ValueError):
        estimate_frame_delivery(frame, link, 5)


def test_estimate_no_propagation_single_round():
    link = make_link(per_rounds=(0.4,), t_p=0.0)
    frame = Frame(1, "B", 6466)  # half of L * kappa
    est = estimate_frame_delivery(frame, link, 1)
    assert est == pytest.approx(
        (link.L * link.N / link.timing.chi) * frame.size_bits
        / (link.kappa * link.L))


def test_decide_pre_preroll_and_unconfigured_types_are_normal():
    link = make_link()
    cfg = AharqConfig()
    frame_b = Frame(1, "B", 10000)
    assert aharq_decide(frame_b, 0, link, cfg, 30.0,
                        playback_started=False)[0] == NORMAL
    frame_i = Frame(2, "I", 50000)
    assert aharq_decide(frame_i, 0, link, cfg, 30.0)[0] == NORMAL


def test_decide_below_threshold_false_acks():
    link = make_link()
    cfg = AharqConfig(b_th_b=16)
    decision, m = aharq_decide(Frame(1, "B", 10000), 15, link, cfg, 30.0)
    assert decision == FALSE_ACK and m == 1


def test_decide_huge_occupancy_normal():
    link = make_link(t_p=0.0, chi=1e9)
    decision, m = aharq_decide(Frame(1, "B", 1000), 500, link,
                               AharqConfig(), 30.0)
    assert decision == NORMAL and m == 4


def test_decide_reduced_m_between():
    """Budget fits some but not all round limits: largest feasible wins."""
    link = make_link(per_rounds=(0.9, 0.9, 0.9, 0.9), chi=2e5, t_p=5e-3)
    frame = Frame(1, "B", 20000)
    cfg = AharqConfig(b_th_b=16)
    budgets = {}
    for b_c in range(16, 200):
        decision, m = aharq_decide(frame, b_c, link, cfg, 30.0)
        budgets[b_c] = (decision, m)
    kinds = {d for d, _ in budgets.values()}
    assert REDUCED_M in kinds and NORMAL in kinds


def test_decide_monotone_in_occupancy():
    """More buffer never moves the decision toward a false ACK."""
    severity = {NORMAL: 0, REDUCED_M: 1, FALSE_ACK: 2}
    link = make_link(chi=3e5, t_p=2e-3)
    frame = Frame(1, "B", 30000)
    cfg = AharqConfig()
    prev = None
    for b_c in range(0, 300):
        decision, m = aharq_decide(frame, b_c, link, cfg, 30.0)
        if prev is not None:
            assert severity[decision] <= severity[prev[0]]
            if decision == prev[0] == REDUCED_M:
                assert m >= prev[1]
        prev = (decision, m)


def test_aharq_config_threshold_ordering():
    with pytest.raises(ValueError):
        AharqConfig(b_th_i=8, b_th_p=8, b_th_b=16)


# ---------------------------------------------------------------------------
# playback timeline


def require_occupancy_nonnegative(report):
    for ev in report.timeline.events:
        assert ev.occupancy >= 0


def test_playback_noiseless_link_no_starvation():
    trace = synthetic_trace(n_frames=120, seed=1)
    eta = throughput_from_rounds((0.0, 0.0, 0.0, 0.0), 3233, 4096)
    link = make_link(per_rounds=(0.0, 0.0, 0.0, 0.0),
                     chi=2.0 * trace.mean_bit_rate / eta, t_p=0.0)
    report = simulate_playback(trace, link, AharqConfig(), enabled=True)
    assert not report.timeline.starvation_instants
    assert report.concealed_pct == 0.0
    assert report.psnr_received == report.psnr_original
    require_occupancy_nonnegative(report)


def test_playback_preroll_before_drain():
    trace = synthetic_trace(n_frames=60, seed=2)
    link = make_link(per_rounds=(0.0,) * 4, chi=1e8, t_p=0.0)
    cfg = AharqConfig(b_p=16)
    report = simulate_playback(trace, link, cfg, enabled=False)
    first_drain = next(e.time for e in report.timeline.events
                       if e.event == "drain")
    arrivals = [e.time for e in report.timeline.events if e.event == "arrival"]
    assert first_drain >= arrivals[cfg.b_p - 1]


def test_playback_starves_on_slow_link_and_aharq_rescues():
    trace = synthetic_trace(n_frames=300, seed=7)
    per = (0.45, 0.25, 0.12, 0.06)
    eta = throughput_from_rounds(per, 3233, 4096)
    chi = trace.mean_bit_rate / eta
    link = make_link(per_rounds=per, chi=chi, t_p=0.5e-3)
    cfg = AharqConfig()
    off = simulate_playback(trace, link, cfg, enabled=False)
    on = simulate_playback(trace, link, cfg, enabled=True)
    assert len(off.timeline.starvation_instants) >= 1
    assert len(on.timeline.starvation_instants) < \
        len(off.timeline.starvation_instants)
    assert off.concealed_pct == 0.0 and on.concealed_pct > 0.0
    require_occupancy_nonnegative(on)
    require_occupancy_nonnegative(off)


def test_concealment_matches_decisions_analytic():
    trace = synthetic_trace(n_frames=200, seed=9)
    per = (0.45, 0.25, 0.12, 0.06)
    eta = throughput_from_rounds(per, 3233, 4096)
    link = make_link(per_rounds=per, chi=trace.mean_bit_rate / eta, t_p=1e-3)
    report = simulate_playback(trace, link, AharqConfig(), enabled=True)
    expected = {f.index for f, (d, _) in zip(trace.frames,
                                             report.timeline.decisions)
                if d in (FALSE_ACK, REDUCED_M)}
    assert report.timeline.concealed_frames == expected


def test_sampled_mode_deterministic_and_consistent():
    trace = synthetic_trace(n_frames=80, seed=4)
    per = (0.3, 0.1, 0.05, 0.02)
    eta = throughput_from_rounds(per, 3233, 4096)
    link = make_link(per_rounds=per, chi=trace.mean_bit_rate / eta, t_p=1e-3)
    a = simulate_playback(trace, link, AharqConfig(), enabled=True,
                          mode="sampled", seed=5)
    b = simulate_playback(trace, link, AharqConfig(), enabled=True,
                          mode="sampled", seed=5)
    assert a.timeline.concealed_frames == b.timeline.concealed_frames
    assert a.total_time == b.total_time
    # sampled concealment only for false-acked or dropped reduced frames
    decided = {f.index: d for f, (d, _) in zip(trace.frames,
                                               a.timeline.decisions)}
    for idx in a.timeline.concealed_frames:
        assert decided[idx] in (FALSE_ACK, REDUCED_M)


def test_timeline_csv(tmp_path):
    trace = synthetic_trace(n_frames=40, seed=6)
    link = make_link(per_rounds=(0.0,) * 4, chi=1e8, t_p=0.0)
    report = simulate_playback(trace, link, AharqConfig(), enabled=False)
    path = tmp_path / "timeline.csv"
    report.timeline.to_csv(str(path))
    header = path.read_text().splitlines()[0]
    assert header == "time_s,frame_index,event,occupancy,decision"
