"""Subpacket HARQ with Chase combining over turbo product codes."""

from .codec import (
    CRC8_07,
    CRC16_8005,
    CRC16_8BB7,
    CRC32_1EDC6F41,
    ComponentCode,
    CrcSpec,
    HarqConfig,
    build_component_code,
    build_packet,
    component_code,
    crc_append,
    crc_check,
    encode_component,
    encode_product,
    hdd_component,
)
from .channel import AWGN, RAYLEIGH, ChannelModel, Reception, modulate, mrc_combine, rng_for, transmit
from .decoder import (
    ALPHA_DEFAULT,
    BETA_DEFAULT,
    ChaseOutput,
    DecodeResult,
    OpCounters,
    chase2_component,
    hard_slice,
    hiho_decode,
    self_detect,
    siso_decode,
)
from .harq import (
    PerTable,
    SessionStats,
    adaptive_code_select,
    estimate_per_from_acks,
    measure_conditional_per,
    measure_per_table,
    measure_single_shot_per,
    monte_carlo,
    run_session,
)
from .analysis import (
    ComplexityReport,
    LinkTiming,
    OptimizerConfig,
    OptResult,
    SasInputs,
    avg_power,
    delay_tau,
    detection_complexity,
    diversity_ber,
    drop_rate,
    equivalent_snr,
    expected_rho,
    expected_rho_direct,
    optimize_power,
    packet_tx_stats,
    sas_eta_vs_power,
    sas_throughput,
    throughput_with_detection,
    video_total_delay,
)
from .video import (
    AharqConfig,
    BufferTimeline,
    HarqLink,
    VideoTrace,
    aharq_decide,
    budget_time,
    estimate_frame_delivery,
    load_trace,
    simulate_playback,
    synthetic_trace,
)
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
