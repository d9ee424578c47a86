"""Component code, product code, CRC, and packet framing tests.

Expected values are produced by independent oracles implemented here:
plain polynomial long division over GF(2) and brute-force codebook
enumeration, never the code under test.
"""

import itertools

import numpy as np
import pytest

from tpcharq.codec import (
    CRC8_07,
    CRC16_8005,
    CRC32_1EDC6F41,
    CrcSpec,
    HarqConfig,
    build_component_code,
    build_packet,
    component_code,
    crc_append,
    crc_check,
    encode_component,
    encode_product,
    extract_message,
    hdd_component,
)


# ---------------------------------------------------------------------------
# oracles


def poly_divmod_bits(dividend_bits, divisor_bits):
    """Schoolbook long division over GF(2), MSB-first bit lists."""
    rem = list(dividend_bits)
    div = list(divisor_bits)
    d = len(div) - 1
    for i in range(len(rem) - d):
        if rem[i]:
            for j, g in enumerate(div):
                rem[i + j] ^= g
    return rem[len(rem) - d:]


def lfsr_crc_oracle(data_bits, poly_int, degree):
    """Bit-serial shift-register division of data * X^degree."""
    taps = [(poly_int >> (degree - 1 - i)) & 1 for i in range(degree)]
    reg = [0] * degree
    for bit in data_bits:
        fb = reg[0] ^ int(bit)
        reg = reg[1:] + [0]
        if fb:
            reg = [r ^ t for r, t in zip(reg, taps)]
    return reg


def poly_int_to_bits(poly_int):
    return [int(b) for b in bin(poly_int)[2:]]


def codebook_oracle(g_poly_int, n, k):
    """All codewords of the extended code via polynomial encoding."""
    m = n - 1 - k
    g_bits = poly_int_to_bits(g_poly_int)
    words = []
    for msg in itertools.product((0, 1), repeat=k):
        shifted = list(msg) + [0] * m
        rem = poly_divmod_bits(shifted, g_bits)
        cyclic = list(msg) + rem
        words.append(cyclic + [sum(cyclic) % 2])
    return np.array(words, dtype=np.uint8)


# ---------------------------------------------------------------------------
# component code construction


def test_code_parameters():
    assert (build_component_code(3).n, build_component_code(3).k,
            build_component_code(3).d_min) == (8, 4, 4)
    c4 = build_component_code(4)
    assert (c4.n, c4.k, c4.d_min) == (16, 11, 4)
    assert c4.g_bch == 0b10011 and c4.nu == 3
    c7 = build_component_code(7)
    assert (c7.n, c7.k, c7.d_min) == (128, 120, 4)
    assert c7.g_bch == 0b10001001 and c7.nu == 3


@pytest.mark.parametrize("m", [2, 8, 0])
def test_code_degree_range(m):
    with pytest.raises(ValueError):
        build_component_code(m)


def test_codebook_min_weight_844():
    """Every nonzero codeword of eBCH(8,4,4) has weight in {4, 8}."""
    book = codebook_oracle(0b1011, 8, 4)
    weights = book.sum(axis=1)
    assert weights[0] == 0
    assert set(weights[1:].tolist()) <= {4, 8}


def test_encode_matches_codebook_oracle():
    code = component_code(3)
    book = codebook_oracle(0b1011, 8, 4)
    for msg, expected in zip(itertools.product((0, 1), repeat=4), book):
        assert np.array_equal(encode_component(code, list(msg)), expected)


def test_encode_zero_and_parity():
    code = component_code(5)
    assert not encode_component(code, np.zeros(code.k, dtype=np.uint8)).any()
    rng = np.random.default_rng(1)
    for _ in range(50):
        cw = encode_component(code, rng.integers(0, 2, code.k, dtype=np.uint8))
        assert cw.sum() % 2 == 0


def test_encode_rejects_wrong_length():
    code = component_code(3)
    with pytest.raises(ValueError):
        encode_component(code, [1, 0, 1])


@pytest.mark.parametrize("m", [3, 4, 5, 6, 7])
def test_encode_decode_identity(m):
    code = component_code(m)
    rng = np.random.default_rng(m)
    cases = [np.zeros(code.k, np.uint8), np.ones(code.k, np.uint8)]
    cases += [rng.integers(0, 2, code.k, dtype=np.uint8) for _ in range(1000)]
    for info in cases:
        cw = encode_component(code, info)
        dec, status = hdd_component(code, cw)
        assert status == "clean"
        assert np.array_equal(dec[: code.k], info)


def test_hdd_single_error_all_positions():
    code = component_code(4)
    rng = np.random.default_rng(2)
    cw = encode_component(code, rng.integers(0, 2, code.k, dtype=np.uint8))
    for j in range(code.n):
        bad = cw.copy()
        bad[j] ^= 1
        dec, status = hdd_component(code, bad)
        assert status == "corrected"
        assert np.array_equal(dec, cw)


def test_hdd_double_errors_detected_exhaustive():
    code = component_code(3)
    cw = encode_component(code, np.array([1, 0, 1, 1], np.uint8))
    for i, j in itertools.combinations(range(code.n), 2):
        bad = cw.copy()
        bad[i] ^= 1
        bad[j] ^= 1
        dec, status = hdd_component(code, bad)
        assert status == "detected_uncorrectable"
        assert np.array_equal(dec, bad)


# ---------------------------------------------------------------------------
# product construction


def test_product_zero():
    code = component_code(3)
    assert not encode_product(code, np.zeros((4, 4), np.uint8)).any()


def test_product_single_one_is_outer_product():
    code = component_code(3)
    info = np.zeros((4, 4), np.uint8)
    info[0, 0] = 1
    cw = encode_product(code, info)
    row = encode_component(code, np.array([1, 0, 0, 0], np.uint8))
    assert np.array_equal(cw, np.outer(row, row) & 1)


@pytest.mark.parametrize("m", [3, 4, 6])
def test_product_rows_and_columns_valid(m):
    code = component_code(m)
    rng = np.random.default_rng(m + 10)
    cw = encode_product(code, rng.integers(0, 2, (code.k, code.k), dtype=np.uint8))
    for axis_words in (cw, cw.T):
        for word in axis_words:
            _, status = hdd_component(code, word)
            assert status == "clean"


def test_product_dimension_check():
    code = component_code(3)
    with pytest.raises(ValueError):
        encode_product(code, np.zeros((3, 4), np.uint8))


# ---------------------------------------------------------------------------
# CRC


def test_crc_zero_data():
    out = crc_append(CRC16_8005, np.zeros(40, np.uint8))
    assert not out[40:].any()


def test_crc_against_lfsr_oracle_ascii():
    data = np.unpackbits(np.frombuffer(b"123456789", dtype=np.uint8))
    out = crc_append(CRC16_8005, data)
    expected = lfsr_crc_oracle(data.tolist(), 0x8005, 16)
    assert out[len(data):].tolist() == expected
    assert crc_check(CRC16_8005, out)


@pytest.mark.parametrize("spec", [CRC16_8005, CRC8_07, CRC32_1EDC6F41])
def test_crc_roundtrip_random(spec):
    rng = np.random.default_rng(spec.degree)
    for _ in range(25):
        data = rng.integers(0, 2, int(rng.integers(spec.degree + 1, 400)),
                            dtype=np.uint8)
        out = crc_append(spec, data)
        expected = lfsr_crc_oracle(data.tolist(), spec.poly - (1 << spec.degree),
                                   spec.degree)
        assert out[data.size:].tolist() == expected
        assert crc_check(spec, out)


def test_crc_single_bit_flips_always_detected():
    rng = np.random.default_rng(5)
    data = rng.integers(0, 2, 64, dtype=np.uint8)
    out = crc_append(CRC16_8005, data)
    for j in range(out.size):
        bad = out.copy()
        bad[j] ^= 1
        assert not crc_check(CRC16_8005, bad)


def test_crc_generator_pattern_misdetected():
    """An error equal to the generator polynomial is invisible."""
    rng = np.random.default_rng(6)
    data = rng.integers(0, 2, 64, dtype=np.uint8)
    out = crc_append(CRC16_8005, data)
    gen_bits = np.array(poly_int_to_bits(CRC16_8005.poly), np.uint8)
    bad = out.copy()
    bad[10:10 + gen_bits.size] ^= gen_bits
    assert crc_check(CRC16_8005, bad)


def test_crc_weight_le3_detected_exhaustive():
    """No nonzero pattern of weight <= 3 on a 64-bit message passes."""
    length = 64 + 16
    from tpcharq.codec import _rem_matrix

    rows = _rem_matrix(CRC16_8005.poly, length)
    ints = [int("".join(map(str, r)), 2) for r in rows]
    assert all(v != 0 for v in ints)
    assert len(set(ints)) == length  # all pairs XOR to nonzero
    ints_arr = np.array(ints, dtype=np.int64)
    for i, j in itertools.combinations(range(length), 2):
        triple = ints_arr[i] ^ ints_arr[j] ^ ints_arr[j + 1:]
        assert (triple != 0).all()


def test_crc_nu_bar_counts():
    assert CRC16_8005.nu_bar == 4
    assert CRC32_1EDC6F41.nu_bar == 18
    assert CrcSpec("t", 3, 0b1011).nu_bar == 3


def test_crc_spec_degree_validation():
    with pytest.raises(ValueError):
        CrcSpec("bad", 8, 0b1011)


# ---------------------------------------------------------------------------
# packet framing


def test_build_packet_l1_contains_all_info():
    code = component_code(3)
    cfg = HarqConfig(code=code, L=1, detection="perfect", crc=None)
    info = np.arange(cfg.kappa) % 2
    (sub,) = build_packet(cfg, info.astype(np.uint8))
    assert np.array_equal(extract_message(cfg, sub), info)


def test_build_packet_crc16_kappa_6457():
    code = component_code(6)
    cfg = HarqConfig(code=code, L=4, detection="crc", crc=CRC16_8005)
    assert cfg.kappa == 57 * 57 - 16 == 3233
    info = np.random.default_rng(0).integers(0, 2, cfg.kappa * 4, dtype=np.uint8)
    subs = build_packet(cfg, info)
    assert len(subs) == 4
    for i, sub in enumerate(subs):
        msg = extract_message(cfg, sub)
        assert np.array_equal(msg[: cfg.kappa],
                              info[i * cfg.kappa:(i + 1) * cfg.kappa])
        assert crc_check(cfg.crc, msg)


def test_build_packet_self_detection_kappa():
    code = component_code(4)
    cfg = HarqConfig(code=code, L=2, detection="self", crc=None)
    assert cfg.kappa == code.k ** 2
    assert cfg.l_crc == 0


def test_build_packet_length_check():
    code = component_code(3)
    cfg = HarqConfig(code=code, L=2, detection="perfect", crc=None)
    with pytest.raises(ValueError):
        build_packet(cfg, np.zeros(cfg.kappa, np.uint8))


def test_harq_config_validation():
    code = component_code(3)
    with pytest.raises(ValueError):
        HarqConfig(code=code, L=0)
    with pytest.raises(ValueError):
        HarqConfig(code=code, M=0)
    with pytest.raises(ValueError):
        HarqConfig(code=code, detection="crc", crc=None)
    with pytest.raises(ValueError):
        HarqConfig(code=code, detection="crc", crc=CRC32_1EDC6F41)  # 32 >= k^2
