"""Bit-exact binary serialization: the ``.solar`` container and NPY matrix
I/O.

A ``.solar`` file carries everything a receiver needs to rebuild adapters —
pool parameters, master seed, index bitmasks, (optionally quantized)
coefficients — and never any basis content.  Layout (little-endian):

    header:  magic "SOLR" | u16 version=1 | u16 flags | u32 tensor_count
    flags:   bit 0 refit used, bit 1 random basis mode, bit 2 fingerprint
             present (all records in one file share these)
    record:  u16 name_len | name utf-8
             u32 m, n, r | u32 N_A, N_B | u16 slice_width
             f32 noise_sigma | u64 master_seed | [u64 svd_fingerprint]
             alpha mask (ceil(N_A/8) bytes, bit i = index i kept, LSB-first)
             alpha payload: u8 bits | f32 scale | f32 zero_point | packed
             beta mask, beta payload (same shape rules)
             u32 CRC-32 over the record body (zlib polynomial)

Coefficient values are stored in ascending index order, so identical inputs
always produce identical bytes.  Unquantized artifacts are written as raw
float32 (bits = 32).
"""

from __future__ import annotations

import ast
import struct
import zlib

import numpy as np
from numpy.typing import NDArray

from .core import SolarArtifact, SparseCoefficients
from .linalg import SvdFactors
from .quant import QuantizedVector, dequantize, quantize

__all__ = [
    "FormatError",
    "MAGIC",
    "VERSION",
    "encode",
    "decode",
    "write_solar",
    "read_solar",
    "svd_fingerprint",
    "read_npy",
    "write_npy",
]

MAGIC = b"SOLR"
VERSION = 1

_FLAG_REFIT = 1 << 0
_FLAG_RANDOM = 1 << 1
_FLAG_FINGERPRINT = 1 << 2
_KNOWN_FLAGS = _FLAG_REFIT | _FLAG_RANDOM | _FLAG_FINGERPRINT

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class FormatError(ValueError):
    """Malformed ``.solar`` or NPY input; carries the failing byte offset."""

    def __init__(self, message: str, offset: int | None = None) -> None:
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


def svd_fingerprint(svd: SvdFactors) -> int:
    """64-bit FNV-1a over the canonicalized factors, quantized to 1e-6.

    Entries of U then V (row-major) are rounded to the nearest 1e-6 and
    hashed as little-endian int64 — cheap, stable across platforms, and
    enough to catch sender/receiver disagreement on the foundation SVD.
    """
    h = _FNV_OFFSET
    for arr in (svd.U, svd.V):
        data = np.rint(np.ascontiguousarray(arr) * 1e6).astype("<i8").tobytes()
        for byte in data:
            h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def _artifact_flags(artifact: SolarArtifact) -> int:
    flags = 0
    if artifact.refit:
        flags |= _FLAG_REFIT
    if artifact.basis_mode == "random":
        flags |= _FLAG_RANDOM
    if artifact.svd_fingerprint is not None:
        flags |= _FLAG_FINGERPRINT
    return flags


def _support_mask(sparse: SparseCoefficients) -> bytes:
    mask = bytearray((sparse.size + 7) // 8)
    for i in sparse.support:
        mask[i >> 3] |= 1 << (i & 7)
    return bytes(mask)


def _payload(sparse: SparseCoefficients, stored: QuantizedVector | None) -> QuantizedVector:
    if stored is not None:
        return stored
    return quantize(sparse.values, 32)


def _pack_quantized(q: QuantizedVector) -> bytes:
    return struct.pack("<Bff", q.bits, q.scale, q.zero_point) + q.packed


def encode(artifacts: list[tuple[str, SolarArtifact]]) -> bytes:
    """Serialize named artifacts to ``.solar`` bytes.

    All artifacts in one file must agree on refit/basis-mode/fingerprint
    presence, since those live in the shared header flags.
    """
    flags = None
    for name, artifact in artifacts:
        f = _artifact_flags(artifact)
        if flags is None:
            flags = f
        elif flags != f:
            raise ValueError(
                "all artifacts in one file must share refit/basis-mode/"
                "fingerprint settings"
            )
    out = bytearray()
    out += struct.pack("<4sHHI", MAGIC, VERSION, flags or 0, len(artifacts))
    for name, artifact in artifacts:
        out += _encode_record(name, artifact)
    return bytes(out)


def _encode_record(name: str, artifact: SolarArtifact) -> bytes:
    name_bytes = name.encode("utf-8")
    if len(name_bytes) > 0xFFFF:
        raise ValueError(f"tensor name too long ({len(name_bytes)} bytes)")
    if artifact.slice_width > 0xFFFF:
        raise ValueError("slice_width exceeds u16 range")
    body = bytearray()
    body += struct.pack("<H", len(name_bytes)) + name_bytes
    body += struct.pack(
        "<IIIIIHfQ",
        artifact.m, artifact.n, artifact.r,
        artifact.n_a, artifact.n_b,
        artifact.slice_width,
        artifact.noise_sigma,
        artifact.master_seed,
    )
    if artifact.svd_fingerprint is not None:
        body += struct.pack("<Q", artifact.svd_fingerprint)
    body += _support_mask(artifact.alpha)
    body += _pack_quantized(_payload(artifact.alpha, artifact.alpha_quant))
    body += _support_mask(artifact.beta)
    body += _pack_quantized(_payload(artifact.beta, artifact.beta_quant))
    crc = zlib.crc32(bytes(body)) & 0xFFFFFFFF
    return bytes(body) + struct.pack("<I", crc)


class _Reader:
    def __init__(self, buf: bytes) -> None:
        self.buf = buf
        self.pos = 0

    def take(self, count: int, what: str) -> bytes:
        if self.pos + count > len(self.buf):
            raise FormatError(
                f"truncated input while reading {what}: need {count} bytes, "
                f"have {len(self.buf) - self.pos}",
                self.pos,
            )
        chunk = self.buf[self.pos : self.pos + count]
        self.pos += count
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def _mask_support(mask: bytes, size: int, offset: int) -> tuple[int, ...]:
    support = []
    for i in range(len(mask) * 8):
        if mask[i >> 3] >> (i & 7) & 1:
            if i >= size:
                raise FormatError(
                    f"index mask has bit {i} set beyond pool size {size}", offset
                )
            support.append(i)
    return tuple(support)


def _decode_quantized(reader: _Reader, length: int, which: str) -> QuantizedVector:
    offset = reader.pos
    bits, scale, zero = reader.unpack("<Bff", f"{which} quantizer constants")
    if bits not in (2, 4, 8, 16, 32):
        raise FormatError(f"invalid quantizer width {bits} for {which}", offset)
    packed_size = 4 * length if bits == 32 else (length * bits + 7) // 8
    packed = reader.take(packed_size, f"{which} payload")
    try:
        return QuantizedVector(bits=bits, scale=scale, zero_point=zero,
                               packed=packed, length=length)
    except ValueError as exc:
        raise FormatError(f"malformed {which} payload: {exc}", offset) from exc


def decode(buf: bytes) -> list[tuple[str, SolarArtifact]]:
    """Parse ``.solar`` bytes back into named artifacts (strict validation:
    magic, version, reserved flags, per-record CRC, mask consistency)."""
    reader = _Reader(buf)
    magic, version, flags, count = reader.unpack("<4sHHI", "file header")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if flags & ~_KNOWN_FLAGS:
        raise FormatError(f"reserved flag bits set: {flags:#06x}", 6)
    artifacts = []
    for _ in range(count):
        artifacts.append(_decode_record(reader, flags))
    if reader.pos != len(buf):
        raise FormatError(
            f"{len(buf) - reader.pos} trailing bytes after last record", reader.pos
        )
    return artifacts


def _decode_record(reader: _Reader, flags: int) -> tuple[str, SolarArtifact]:
    start = reader.pos
    (name_len,) = reader.unpack("<H", "name length")
    name = reader.take(name_len, "name").decode("utf-8")
    m, n, r, n_a, n_b, width, sigma, seed = reader.unpack(
        "<IIIIIHfQ", "record geometry"
    )
    fingerprint = None
    if flags & _FLAG_FINGERPRINT:
        (fingerprint,) = reader.unpack("<Q", "svd fingerprint")

    alpha_mask = reader.take((n_a + 7) // 8, "alpha mask")
    alpha_support = _mask_support(alpha_mask, n_a, reader.pos - len(alpha_mask))
    alpha_q = _decode_quantized(reader, len(alpha_support), "alpha")
    beta_mask = reader.take((n_b + 7) // 8, "beta mask")
    beta_support = _mask_support(beta_mask, n_b, reader.pos - len(beta_mask))
    beta_q = _decode_quantized(reader, len(beta_support), "beta")

    body = reader.buf[start : reader.pos]
    (stored_crc,) = reader.unpack("<I", "record CRC")
    actual_crc = zlib.crc32(body) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise FormatError(
            f"CRC mismatch for record {name!r}: stored {stored_crc:#010x}, "
            f"computed {actual_crc:#010x}",
            reader.pos - 4,
        )

    alpha = SparseCoefficients(size=n_a, support=alpha_support,
                               values=dequantize(alpha_q))
    beta = SparseCoefficients(size=n_b, support=beta_support,
                              values=dequantize(beta_q))
    artifact = SolarArtifact(
        m=m, n=n, r=r, n_a=n_a, n_b=n_b, slice_width=width,
        noise_sigma=float(sigma), master_seed=seed,
        basis_mode="random" if flags & _FLAG_RANDOM else "aligned",
        refit=bool(flags & _FLAG_REFIT),
        alpha=alpha, beta=beta, alpha_quant=alpha_q, beta_quant=beta_q,
        svd_fingerprint=fingerprint,
    )
    return name, artifact


def write_solar(path, artifacts: list[tuple[str, SolarArtifact]]) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(artifacts))


def read_solar(path) -> list[tuple[str, SolarArtifact]]:
    with open(path, "rb") as fh:
        return decode(fh.read())


# --- NPY v1.0 matrix I/O --------------------------------------------------

_NPY_MAGIC = b"\x93NUMPY"


def write_npy(path, matrix) -> None:
    """Write a 2-D float64 matrix as NPY v1.0 (C-order, little-endian)."""
    a = np.ascontiguousarray(matrix, dtype="<f8")
    if a.ndim != 2:
        raise ValueError(f"only 2-D matrices are written, got ndim={a.ndim}")
    header = (
        "{'descr': '<f8', 'fortran_order': False, "
        f"'shape': ({a.shape[0]}, {a.shape[1]}), }}"
    )
    # pad with spaces so the data section starts on a 64-byte boundary
    unpadded = len(_NPY_MAGIC) + 2 + 2 + len(header) + 1
    pad = (64 - unpadded % 64) % 64
    header = header + " " * pad + "\n"
    with open(path, "wb") as fh:
        fh.write(_NPY_MAGIC)
        fh.write(bytes((1, 0)))
        fh.write(struct.pack("<H", len(header)))
        fh.write(header.encode("latin1"))
        fh.write(a.tobytes())


def read_npy(path) -> NDArray[np.float64]:
    """Read a 2-D little-endian float32/float64 NPY v1.0 file; float32 is
    widened to float64.  Fortran order, other dtypes, and other ranks are
    rejected."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:6] != _NPY_MAGIC:
        raise FormatError(f"not an NPY file: bad magic {buf[:6]!r}", 0)
    if buf[6:8] != bytes((1, 0)):
        raise FormatError(f"unsupported NPY version {buf[6]}.{buf[7]}", 6)
    (header_len,) = struct.unpack("<H", buf[8:10])
    header_end = 10 + header_len
    if len(buf) < header_end:
        raise FormatError("truncated NPY header", 10)
    try:
        meta = ast.literal_eval(buf[10:header_end].decode("latin1").strip())
    except (SyntaxError, ValueError) as exc:
        raise FormatError(f"unparsable NPY header: {exc}", 10) from exc
    descr = meta.get("descr")
    if descr not in ("<f8", "<f4"):
        raise FormatError(f"unsupported NPY dtype {descr!r} (need <f8 or <f4)", 10)
    if meta.get("fortran_order"):
        raise FormatError("fortran-order NPY input is not supported", 10)
    shape = meta.get("shape")
    if not (isinstance(shape, tuple) and len(shape) == 2):
        raise FormatError(f"only 2-D matrices are supported, got shape {shape}", 10)
    itemsize = 8 if descr == "<f8" else 4
    expected = shape[0] * shape[1] * itemsize
    data = buf[header_end:]
    if len(data) != expected:
        raise FormatError(
            f"NPY data section has {len(data)} bytes, expected {expected}",
            header_end,
        )
    arr = np.frombuffer(data, dtype=descr).reshape(shape)
    return np.ascontiguousarray(arr, dtype=np.float64)
