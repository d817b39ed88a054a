"""Quantization and footprint accounting."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from solar.quant import (
    PRESETS,
    FootprintReport,
    QuantizedVector,
    dequantize,
    footprint_bytes,
    footprint_bytes_lora,
    footprint_nola,
    footprint_params,
    footprint_params_lora,
    pack_codes,
    preset_report,
    quantize,
    unpack_codes,
)

RNG = np.random.default_rng(99)


# --- quantize / dequantize ------------------------------------------------

def test_endpoints_bits8():
    q = quantize(np.array([0.0, 1.0]), 8)
    assert unpack_codes(q.packed, 8, 2).tolist() == [0, 255]
    assert q.scale == pytest.approx(np.float32(1.0 / 255.0))
    assert q.zero_point == 0.0


def test_constant_vector_sentinel():
    q = quantize(np.array([5.0, 5.0, 5.0]), 8)
    assert q.scale == 0.0
    assert unpack_codes(q.packed, 8, 3).tolist() == [0, 0, 0]
    assert dequantize(q).tolist() == [5.0, 5.0, 5.0]


def test_error_within_half_scale():
    x = RNG.uniform(-3, 3, size=500)
    for bits in (2, 4, 8, 16):
        q = quantize(x, bits)
        err = np.abs(dequantize(q) - x)
        assert err.max() <= q.scale / 2 + 1e-12


def test_bits32_is_raw_float32():
    x = RNG.standard_normal(64)
    q = quantize(x, 32)
    assert q.scale == 1.0 and q.zero_point == 0.0
    assert np.array_equal(dequantize(q), x.astype(np.float32).astype(np.float64))


def test_empty_vector():
    q = quantize(np.zeros(0), 4)
    assert q.packed == b"" and q.length == 0
    assert dequantize(q).shape == (0,)


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        quantize(np.array([1.0, np.nan]), 8)
    with pytest.raises(ValueError):
        quantize(np.array([1.0]), 7)


def test_monotone_fidelity_across_widths():
    x = RNG.uniform(-1, 1, size=200)
    errs = []
    for bits in (2, 4, 8, 16):
        errs.append(np.abs(dequantize(quantize(x, bits)) - x).max())
    assert all(b <= a + 1e-15 for a, b in zip(errs, errs[1:]))


# --- packing --------------------------------------------------------------

def test_pack_sub_byte_lsb_first():
    # codes 1,2,3,0 at 2 bits: byte0 = 0b00_11_10_01 = 0x39
    assert pack_codes(np.array([1, 2, 3, 0]), 2) == bytes([0x39])
    assert unpack_codes(bytes([0x39]), 2, 4).tolist() == [1, 2, 3, 0]


def test_pack_16bit_little_endian():
    assert pack_codes(np.array([0x0102]), 16) == bytes([0x02, 0x01])


def test_pack_rejects_overflow():
    with pytest.raises(ValueError):
        pack_codes(np.array([4]), 2)


def test_unpack_length_check():
    with pytest.raises(ValueError):
        unpack_codes(b"\x00", 8, 2)


@given(st.integers(0, 2**32), st.sampled_from([2, 4, 8, 16]), st.integers(0, 33))
@settings(max_examples=80, deadline=None)
def test_pack_unpack_roundtrip(seed, bits, length):
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, 1 << bits, size=length)
    assert unpack_codes(pack_codes(codes, bits), bits, length).tolist() == codes.tolist()


# --- footprint arithmetic -------------------------------------------------

def test_params_formula_with_fractional_mask():
    # 24 layers x (500+500 + 2000/32): the mask term is 62.5 -> exact
    # rationals keep 1500.5 more precisely than per-term rounding would
    assert footprint_params(24, 500, 500, 1000, 1000) == 25501


def test_params_single_mask_mode():
    assert footprint_params(16, 1200, 1200, 4000, 4000, projections=2,
                            mask_pools="single") == 80801
    with pytest.raises(ValueError):
        footprint_params(1, 1, 1, 32, 32, mask_pools="half")


def test_params_lora_and_bytes_lora():
    assert footprint_params_lora(12, [(768, 4, 768)]) == 73728
    assert footprint_bytes_lora(12, [(768, 1, 768)]) == 73728


def test_bytes_formula():
    assert footprint_bytes(24, 1600, 1600, 4000, 32) == 319201
    assert footprint_bytes(24, 1600, 1600, 4000, 4) == 50401


def test_nola_formula():
    assert footprint_nola(12, 2, 1000) == 48001
    assert footprint_nola(16, 2, 2000, include_seed=False) == 128000


def test_preset_report_unknown_lists_names():
    with pytest.raises(ValueError) as exc_info:
        preset_report("definitely-not-a-preset")
    assert "vitb-lora-r4" in str(exc_info.value)


def test_preset_report_output_forms():
    report = preset_report("vitb-solar-4000-1600")
    assert report.value == 41401
    assert "41401" in report.to_text()
    payload = json.loads(report.to_json())
    assert payload["param_count"] == 41401


def test_every_preset_produces_a_positive_value():
    for name in PRESETS:
        assert preset_report(name).value > 0


def test_quantized_vector_validation():
    with pytest.raises(ValueError):
        QuantizedVector(bits=8, scale=1.0, zero_point=0.0, packed=b"\x00", length=5)
