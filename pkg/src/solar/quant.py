"""Coefficient quantization and footprint accounting.

Quantization is affine min-max per coefficient vector: the kept values are
mapped onto ``2**bits`` evenly spaced levels between their min and max.
Scale and zero-point are rounded to float32 at construction so in-memory
dequantization matches what a decoder reads back from disk bit-for-bit.

Footprints reproduce the closed-form parameter/byte accounting for named
model presets exactly (integer equality).  The formulas mix integer and
fractional terms (mask words like N/32 need not be whole), so all
arithmetic uses exact rationals and only the final total is ceiled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "QuantizedVector",
    "quantize",
    "dequantize",
    "pack_codes",
    "unpack_codes",
    "FootprintReport",
    "footprint_params",
    "footprint_params_lora",
    "footprint_bytes",
    "footprint_bytes_lora",
    "footprint_nola",
    "PRESETS",
    "preset_report",
]

_ALLOWED_BITS = (2, 4, 8, 16, 32)


def _f32(x: float) -> float:
    return float(np.float32(x))


@dataclass(frozen=True)
class QuantizedVector:
    """Packed quantized coefficients.

    ``bits = 32`` stores raw float32 values (scale 1, zero_point 0); smaller
    widths store unsigned codes packed little-endian, LSB-first within a byte
    for sub-byte widths.  ``scale = 0`` marks a constant input (all codes 0).
    """

    bits: int
    scale: float
    zero_point: float
    packed: bytes
    length: int

    def __post_init__(self) -> None:
        if self.bits not in _ALLOWED_BITS:
            raise ValueError(f"bits must be one of {_ALLOWED_BITS}, got {self.bits}")
        expected = _packed_size(self.length, self.bits)
        if len(self.packed) != expected:
            raise ValueError(
                f"packed length {len(self.packed)} != expected {expected} "
                f"for {self.length} values at {self.bits} bits"
            )


def _packed_size(length: int, bits: int) -> int:
    if bits == 32:
        return 4 * length
    return (length * bits + 7) // 8


def pack_codes(codes, bits: int) -> bytes:
    """Pack unsigned integer codes little-endian (LSB-first sub-byte)."""
    codes = np.ascontiguousarray(codes, dtype=np.uint64)
    if codes.size and int(codes.max()) >= 1 << bits:
        raise ValueError(f"code out of range for {bits} bits")
    if bits == 8:
        return codes.astype(np.uint8).tobytes()
    if bits == 16:
        return codes.astype("<u2").tobytes()
    # sub-byte: accumulate bit-by-bit, LSB first
    out = bytearray(_packed_size(codes.size, bits))
    for i, code in enumerate(int(c) for c in codes):
        bit_pos = i * bits
        byte, offset = divmod(bit_pos, 8)
        out[byte] |= (code << offset) & 0xFF
        if offset + bits > 8:
            out[byte + 1] |= code >> (8 - offset)
    return bytes(out)


def unpack_codes(buf: bytes, bits: int, length: int) -> NDArray[np.uint32]:
    """Inverse of :func:`pack_codes`."""
    if len(buf) != _packed_size(length, bits):
        raise ValueError(
            f"buffer length {len(buf)} != expected {_packed_size(length, bits)}"
        )
    if bits == 8:
        return np.frombuffer(buf, dtype=np.uint8).astype(np.uint32)
    if bits == 16:
        return np.frombuffer(buf, dtype="<u2").astype(np.uint32)
    mask = (1 << bits) - 1
    out = np.empty(length, dtype=np.uint32)
    for i in range(length):
        bit_pos = i * bits
        byte, offset = divmod(bit_pos, 8)
        value = buf[byte] >> offset
        if offset + bits > 8:
            value |= buf[byte + 1] << (8 - offset)
        out[i] = value & mask
    return out


def quantize(values, bits: int) -> QuantizedVector:
    """Affine min-max quantization of a float vector.

    ``scale = (max - min) / (2**bits - 1)``, ``zero_point = min``; codes are
    round-half-even of ``(x - zero_point) / scale`` clamped to the code
    range.  Element-wise reconstruction error is at most ``scale / 2`` away
    from the stored float32 grid.
    """
    if bits not in _ALLOWED_BITS:
        raise ValueError(f"bits must be one of {_ALLOWED_BITS}, got {bits}")
    x = np.ascontiguousarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        return QuantizedVector(bits=bits, scale=1.0 if bits == 32 else 0.0,
                               zero_point=0.0, packed=b"", length=0)
    if not np.all(np.isfinite(x)):
        raise ValueError("values contain non-finite entries")
    if bits == 32:
        packed = x.astype("<f4").tobytes()
        return QuantizedVector(bits=32, scale=1.0, zero_point=0.0,
                               packed=packed, length=x.size)
    lo = _f32(x.min())
    hi = _f32(x.max())
    levels = (1 << bits) - 1
    scale = _f32((hi - lo) / levels)
    if scale == 0.0:
        codes = np.zeros(x.size, dtype=np.uint64)
    else:
        codes = np.clip(np.rint((x - lo) / scale), 0, levels).astype(np.uint64)
    return QuantizedVector(bits=bits, scale=scale, zero_point=lo,
                           packed=pack_codes(codes, bits), length=x.size)


def dequantize(q: QuantizedVector) -> NDArray[np.float64]:
    """``zero_point + scale * code`` per element (float64 output)."""
    if q.bits == 32:
        return np.frombuffer(q.packed, dtype="<f4").astype(np.float64)
    codes = unpack_codes(q.packed, q.bits, q.length).astype(np.float64)
    return q.zero_point + q.scale * codes


# --- footprint accounting -------------------------------------------------

@dataclass(frozen=True)
class FootprintReport:
    """One accounting-table row: the exact closed-form count plus its terms.

    ``accounting_mode`` records which arithmetic produced the headline number
    (parameter-count tables vs byte-count tables differ in how they count
    index-mask overhead; both are reproduced verbatim rather than unified).
    """

    accounting_mode: str  # "param_table" or "byte_table"
    param_count: int | None = None
    byte_count: int | None = None
    breakdown: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    @property
    def value(self) -> int:
        v = self.param_count if self.accounting_mode == "param_table" else self.byte_count
        assert v is not None
        return v

    def to_json(self) -> str:
        return json.dumps(
            {
                "accounting_mode": self.accounting_mode,
                "param_count": self.param_count,
                "byte_count": self.byte_count,
                "breakdown": [list(item) for item in self.breakdown],
            }
        )

    def to_text(self) -> str:
        unit = "params" if self.accounting_mode == "param_table" else "bytes"
        lines = [f"{'term':<28} {'count':>14}"]
        for label, amount in self.breakdown:
            lines.append(f"{label:<28} {amount:>14}")
        lines.append(f"{'total (' + unit + ')':<28} {self.value:>14}")
        return "\n".join(lines)


def _ceil_total(total: Fraction) -> int:
    return int(-(-total.numerator // total.denominator))


def footprint_params(
    layers: int,
    k_a: int,
    k_b: int,
    n_a: int,
    n_b: int,
    *,
    projections: int = 1,
    mask_pools: str = "both",
    include_seed: bool = True,
) -> int:
    """Parameter count: ``layers * projections * (k_A + k_B + mask/32) (+1)``.

    ``mask_pools='both'`` counts both pool masks ((N_A + N_B)/32 words);
    ``'single'`` counts one pool's mask (N_A/32), matching tables that charge
    the mask once per layer.  Exact rational arithmetic; the total is ceiled
    only if fractional.
    """
    if mask_pools not in ("both", "single"):
        raise ValueError(f"mask_pools must be 'both' or 'single', got {mask_pools!r}")
    mask_bits = n_a + n_b if mask_pools == "both" else n_a
    per_layer = Fraction(k_a + k_b) + Fraction(mask_bits, 32)
    total = layers * projections * per_layer + (1 if include_seed else 0)
    return _ceil_total(total)


def footprint_params_lora(layers: int, dims: list[tuple[int, int, int]]) -> int:
    """Dense low-rank baseline: ``layers * sum(in*r + r*out)`` over the
    per-layer projection shapes."""
    return layers * sum(d_in * r + r * d_out for d_in, r, d_out in dims)


def footprint_bytes(
    layers: int,
    k_a: int,
    k_b: int,
    n_mask: int,
    bits: int,
    *,
    include_seed: bool = True,
) -> int:
    """Byte count: ``layers * ((k_A + k_B) + N_mask/bits) * bits/8 (+1)``,
    the byte-table arithmetic (coefficients at ``bits`` each plus an N-bit
    index mask, one seed byte).  Exact rationals, ceil at the total."""
    if bits not in _ALLOWED_BITS:
        raise ValueError(f"bits must be one of {_ALLOWED_BITS}, got {bits}")
    per_layer = (Fraction(k_a + k_b) + Fraction(n_mask, bits)) * Fraction(bits, 8)
    total = layers * per_layer + (1 if include_seed else 0)
    return _ceil_total(total)


def footprint_bytes_lora(layers: int, dims: list[tuple[int, int, int]]) -> int:
    """Dense baseline bytes: parameter count at 4 bytes each."""
    return 4 * footprint_params_lora(layers, dims)


def footprint_nola(
    layers: int, projections: int, bases: int, *, include_seed: bool = True
) -> int:
    """Unstructured-random-basis baseline: ``layers * projections * 2 * bases``
    coefficients (two pools per projection), optionally plus the seed."""
    return layers * projections * 2 * bases + (1 if include_seed else 0)


# --- named presets --------------------------------------------------------

def _param_report(value: int, terms: list[tuple[str, str]]) -> FootprintReport:
    return FootprintReport(accounting_mode="param_table", param_count=value,
                           breakdown=tuple(terms))


def _byte_report(value: int, terms: list[tuple[str, str]]) -> FootprintReport:
    return FootprintReport(accounting_mode="byte_table", byte_count=value,
                           breakdown=tuple(terms))


def _solar_params(layers, k, n, *, projections=1, mask_pools="both",
                  include_seed=True) -> FootprintReport:
    value = footprint_params(layers, k, k, n, n, projections=projections,
                             mask_pools=mask_pools, include_seed=include_seed)
    mask_bits = 2 * n if mask_pools == "both" else n
    terms = [
        ("coefficients", str(layers * projections * 2 * k)),
        (f"index mask ({mask_bits}/32 words)",
         str(Fraction(layers * projections * mask_bits, 32))),
        ("seed", "1" if include_seed else "0"),
    ]
    return _param_report(value, terms)


def _lora_params(layers, dims) -> FootprintReport:
    value = footprint_params_lora(layers, dims)
    return _param_report(value, [("dense factors", str(value)), ("seed", "0")])


def _nola_params(layers, projections, bases, *, include_seed) -> FootprintReport:
    value = footprint_nola(layers, projections, bases, include_seed=include_seed)
    return _param_report(value, [
        ("coefficients", str(layers * projections * 2 * bases)),
        ("seed", "1" if include_seed else "0"),
    ])


def _solar_bytes(layers, k, n, bits) -> FootprintReport:
    value = footprint_bytes(layers, k, k, n, bits)
    terms = [
        (f"coefficients ({bits}-bit)", str(Fraction(layers * 2 * k * bits, 8))),
        ("index mask bytes", str(Fraction(layers * n, 8))),
        ("seed", "1"),
    ]
    return _byte_report(value, terms)


def _lora_bytes(layers, dims) -> FootprintReport:
    value = footprint_bytes_lora(layers, dims)
    return _byte_report(value, [("dense factors (float32)", str(value))])


_VIT_B = [(768, 4, 768)]
_VIT_B_R1 = [(768, 1, 768)]
_VIT_L = [(1024, 4, 1024)]
_LLAMA_1B = [(2048, 8, 2048), (2048, 8, 512)]
_LLAMA_3B = [(3072, 1, 3072), (3072, 1, 1024)]
_LLAMA_8B = [(4096, 1, 4096), (4096, 1, 1024)]
_GPT2_S = [(768, 4, 768), (768, 4, 768)]
_GPT2_M = [(1024, 4, 1024), (1024, 4, 1024)]

# each entry reproduces one reference accounting-table row exactly
PRESETS: dict[str, object] = {
    # parameter tables — vision backbones (both pool masks counted)
    "vitb-lora-r4": lambda: _lora_params(12, _VIT_B),
    "vitb-solar-4000-1600": lambda: _solar_params(12, 1600, 4000),
    "nola-vitb": lambda: _nola_params(12, 2, 1000, include_seed=True),
    "vitl-lora-r4": lambda: _lora_params(24, _VIT_L),
    "vitl-solar-1000-500": lambda: _solar_params(24, 500, 1000),
    # parameter tables — language models (single pool mask, Q+V projections)
    "llama1b-lora-r8": lambda: _lora_params(16, _LLAMA_1B),
    "llama1b-solar-4000-1200": lambda: _solar_params(
        16, 1200, 4000, projections=2, mask_pools="single"),
    "llama1b-nola": lambda: _nola_params(16, 2, 1000, include_seed=False),
    "llama3b-lora-r1": lambda: _lora_params(28, _LLAMA_3B),
    "llama3b-solar-1000-150": lambda: _solar_params(
        28, 150, 1000, projections=2, mask_pools="single"),
    "llama3b-nola": lambda: _nola_params(28, 2, 1000, include_seed=False),
    "llama8b-lora-r1": lambda: _lora_params(32, _LLAMA_8B),
    "llama8b-solar-1000-300": lambda: _solar_params(
        32, 300, 1000, projections=2, mask_pools="single"),
    "llama8b-nola": lambda: _nola_params(32, 2, 1000, include_seed=False),
    "gpt2s-lora-r4": lambda: _lora_params(12, _GPT2_S),
    # this row's accounting carries no seed term
    "gpt2s-solar-1000-300": lambda: _solar_params(
        12, 300, 1000, projections=2, mask_pools="single", include_seed=False),
    "gpt2s-solar-100-90": lambda: _solar_params(
        12, 90, 100, projections=2, mask_pools="single"),
    "gpt2s-nola": lambda: _nola_params(12, 2, 1000, include_seed=False),
    "gpt2m-lora-r4": lambda: _lora_params(24, _GPT2_M),
    "gpt2m-solar-1000-300": lambda: _solar_params(
        24, 300, 1000, projections=2, mask_pools="single"),
    "gpt2m-solar-100-90": lambda: _solar_params(
        24, 90, 100, projections=2, mask_pools="single"),
    # fixed total: this row does not decompose into the standard terms
    "gpt2m-nola": lambda: _param_report(350000, [("fixed total", "350000")]),
    # byte tables
    "vitb-lora-r1-bytes": lambda: _lora_bytes(12, _VIT_B_R1),
    "vitb-solar-500-50-8bit": lambda: _solar_bytes(12, 50, 500, 8),
    "vitb-solar-100-10-8bit": lambda: _solar_bytes(12, 10, 100, 8),
    "vitl-lora-r4-bytes": lambda: _lora_bytes(24, _VIT_L),
    "vitl-solar-4000-1600-32bit": lambda: _solar_bytes(24, 1600, 4000, 32),
    "vitl-solar-4000-1600-16bit": lambda: _solar_bytes(24, 1600, 4000, 16),
    "vitl-solar-4000-1600-8bit": lambda: _solar_bytes(24, 1600, 4000, 8),
    "vitl-solar-4000-1600-4bit": lambda: _solar_bytes(24, 1600, 4000, 4),
}


def preset_report(name: str) -> FootprintReport:
    """Footprint report for a named preset; raises with the list of valid
    names on a miss."""
    try:
        factory = PRESETS[name]
    except KeyError:
        valid = ", ".join(sorted(PRESETS))
        raise ValueError(f"unknown preset {name!r}; valid presets: {valid}") from None
    return factory()  # type: ignore[operator]
