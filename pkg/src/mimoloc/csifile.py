"""CSIB binary container for CSI tensors.

Layout (little-endian throughout):
  magic "CSIB" | version u32 = 1 | N u32 | K u32 | L u32 |
  carrier_frequency f64 | subcarrier_spacing f64 | geometry_kind u8 |
  antenna_spacing f64
geometry_kind 0 encodes a centered ULA via the spacing field; kind 1 is
followed by N (x, y) float64 pairs. The payload is N*K*L complex samples as
interleaved float32 (real, imag), index order antenna-major, subcarrier,
then symbol. That layout keeps each (antenna, subcarrier) symbol row
contiguous, so captures can be streamed antenna by antenna.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterator, Optional

import numpy as np

from .errors import CsiFormatError
from .model import ArrayGeometry, CsiTensor

MAGIC = b"CSIB"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIddBd")
GEOMETRY_ULA = 0
GEOMETRY_EXPLICIT = 1

# Refuse absurd dimension products before allocating anything.
_MAX_SAMPLES = 1 << 40


@dataclass(frozen=True)
class CsiFileHeader:
    num_antennas: int
    num_subcarriers: int
    num_symbols: int
    carrier_frequency: float
    subcarrier_spacing: float
    geometry_kind: int
    antenna_spacing: float

    @property
    def num_samples(self) -> int:
        return self.num_antennas * self.num_subcarriers * self.num_symbols

    @property
    def payload_bytes(self) -> int:
        return self.num_samples * 8  # 2 x float32 per complex sample


def _pack_header(header: CsiFileHeader) -> bytes:
    return _HEADER.pack(MAGIC, VERSION, header.num_antennas, header.num_subcarriers,
                        header.num_symbols, header.carrier_frequency,
                        header.subcarrier_spacing, header.geometry_kind,
                        header.antenna_spacing)


def _read_header(fh: BinaryIO) -> CsiFileHeader:
    raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise CsiFormatError("file too short for a CSIB header")
    magic, version, n, k, l, fc, df, kind, spacing = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise CsiFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise CsiFormatError(f"unsupported version {version}, expected {VERSION}")
    if min(n, k, l) < 1:
        raise CsiFormatError(f"non-positive dimensions ({n}, {k}, {l})")
    if kind not in (GEOMETRY_ULA, GEOMETRY_EXPLICIT):
        raise CsiFormatError(f"unknown geometry kind {kind}")
    header = CsiFileHeader(n, k, l, fc, df, kind, spacing)
    if header.num_samples > _MAX_SAMPLES:
        raise CsiFormatError(f"dimension product {header.num_samples} overflows the sane limit")
    return header


def _read_geometry(fh: BinaryIO, header: CsiFileHeader) -> ArrayGeometry:
    if header.geometry_kind == GEOMETRY_ULA:
        return ArrayGeometry.ula(header.num_antennas, header.antenna_spacing)
    raw = fh.read(16 * header.num_antennas)
    if len(raw) < 16 * header.num_antennas:
        raise CsiFormatError("truncated geometry block")
    pos = np.frombuffer(raw, dtype="<f8").reshape(header.num_antennas, 2)
    return ArrayGeometry(pos.copy())


def _to_payload(block: np.ndarray) -> np.ndarray:
    """(n, K, L) complex -> interleaved float32 stream."""
    out = np.empty(block.shape + (2,), dtype="<f4")
    out[..., 0] = block.real
    out[..., 1] = block.imag
    return out.ravel()


class CsiStreamWriter:
    """Writes a CSIB file antenna block by antenna block."""

    def __init__(self, path: str, header: CsiFileHeader,
                 positions: Optional[np.ndarray] = None) -> None:
        if header.geometry_kind == GEOMETRY_EXPLICIT and positions is None:
            raise ValueError("explicit geometry requires positions")
        self._header = header
        self._written = 0
        self._fh = open(path, "wb")
        self._fh.write(_pack_header(header))
        if header.geometry_kind == GEOMETRY_EXPLICIT:
            pos = np.ascontiguousarray(positions, dtype="<f8")
            if pos.shape != (header.num_antennas, 2):
                raise ValueError("positions must be (N, 2)")
            self._fh.write(pos.tobytes())

    def write_block(self, block: np.ndarray) -> None:
        """Append samples for one or more whole antennas, shape (n, K, L)."""
        block = np.asarray(block)
        if block.ndim != 3 or block.shape[1:] != (self._header.num_subcarriers,
                                                  self._header.num_symbols):
            raise ValueError("block must be (n, K, L) matching the header")
        if self._written + block.shape[0] > self._header.num_antennas:
            raise ValueError("writing more antennas than declared in the header")
        self._fh.write(_to_payload(block).tobytes())
        self._written += block.shape[0]

    def close(self) -> None:
        try:
            if self._written != self._header.num_antennas:
                raise ValueError(
                    f"wrote {self._written} of {self._header.num_antennas} antennas")
        finally:
            self._fh.close()

    def __enter__(self) -> "CsiStreamWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.close()
        else:
            self._fh.close()


class CsiStreamReader:
    """Reads a CSIB file antenna by antenna without loading the full tensor."""

    def __init__(self, path: str) -> None:
        self._fh = open(path, "rb")
        try:
            self.header = _read_header(self._fh)
            self.geometry = _read_geometry(self._fh, self.header)
            self._payload_start = self._fh.tell()
            self._fh.seek(0, 2)
            actual = self._fh.tell() - self._payload_start
            if actual != self.header.payload_bytes:
                raise CsiFormatError(
                    f"payload has {actual} bytes, header implies {self.header.payload_bytes}")
            self._fh.seek(self._payload_start)
        except Exception:
            self._fh.close()
            raise

    def antennas(self) -> Iterator[np.ndarray]:
        """Yield (K, L) complex128 blocks in antenna order."""
        h = self.header
        per_antenna = h.num_subcarriers * h.num_symbols * 2
        for _ in range(h.num_antennas):
            raw = np.fromfile(self._fh, dtype="<f4", count=per_antenna)
            if raw.size != per_antenna:
                raise CsiFormatError("truncated payload")
            raw = raw.reshape(h.num_subcarriers, h.num_symbols, 2).astype(np.float64)
            yield raw[..., 0] + 1j * raw[..., 1]

    def symbol_sum(self) -> np.ndarray:
        """Streamed sum over the symbol axis, shape (N, K) complex."""
        h = self.header
        out = np.empty((h.num_antennas, h.num_subcarriers), dtype=complex)
        for n, block in enumerate(self.antennas()):
            out[n] = block.sum(axis=1)
        return out

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "CsiStreamReader":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()


def write_csi(path: str, csi: CsiTensor, geometry: ArrayGeometry,
              antenna_spacing: Optional[float] = None) -> None:
    """Persist a tensor; pass ``antenna_spacing`` to encode a ULA compactly."""
    kind = GEOMETRY_ULA if antenna_spacing is not None else GEOMETRY_EXPLICIT
    header = CsiFileHeader(csi.num_antennas, csi.num_subcarriers, csi.num_symbols,
                           csi.carrier_frequency, csi.subcarrier_spacing,
                           kind, antenna_spacing if antenna_spacing is not None else 0.0)
    with CsiStreamWriter(path, header,
                         positions=None if kind == GEOMETRY_ULA else geometry.positions) as w:
        w.write_block(csi.data)


def read_csi(path: str) -> tuple[CsiTensor, ArrayGeometry]:
    """Load a full tensor (float32 payload widened to complex128)."""
    with CsiStreamReader(path) as reader:
        h = reader.header
        data = np.empty((h.num_antennas, h.num_subcarriers, h.num_symbols), dtype=complex)
        for n, block in enumerate(reader.antennas()):
            data[n] = block
        return (CsiTensor(data, h.carrier_frequency, h.subcarrier_spacing),
                reader.geometry)
