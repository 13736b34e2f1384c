"""Bit-exact codec for CSI measurement packets.

A packet is a 20-byte little-endian header followed by a payload of
interleaved signed 8-bit (real, imag) pairs, subcarrier-major, then
transmit stream, then receive antenna.  See docs/wire_format.md for the
canonical byte map and a worked hex dump.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import BadDims, IndexOutOfRange, LengthMismatch, Truncated

HEADER_SIZE = 20
NUM_SUBCARRIERS = 30

# timestamp u32 | bfee_count u16 | reserved | nrx | ntx | rssi_a | rssi_b
# | rssi_c | noise i8 | agc | antenna_sel | reserved | length u16 | rate u16
_HEADER = struct.Struct("<IHBBBBBBbBBBHH")


@dataclass
class CsiHeader:
    """Fixed 20-byte packet header.

    ``noise`` is the only signed field (dBm noise floor); everything else
    is unsigned.  ``length`` must equal ``2 * 30 * ntx * nrx``.
    """

    timestamp: int
    bfee_count: int
    nrx: int
    ntx: int
    rssi_a: int
    rssi_b: int
    rssi_c: int
    noise: int
    agc: int
    antenna_sel: int
    length: int
    rate: int

    def expected_length(self) -> int:
        return 2 * NUM_SUBCARRIERS * self.ntx * self.nrx

    def scalable(self) -> bool:
        """True when at least one RSSI field is nonzero."""
        return bool(self.rssi_a or self.rssi_b or self.rssi_c)


@dataclass(eq=False)
class CsiPacket:
    """Header plus the 30 x ntx x nrx complex CSI matrix.

    Matrix entries are complex128 whose components are int8-valued on the
    wire; in memory they stay exact.
    """

    header: CsiHeader
    csi: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, CsiPacket):
            return NotImplemented
        return self.header == other.header and np.array_equal(self.csi, other.csi)

    def validate(self) -> None:
        """Raise BadDims/LengthMismatch if any type invariant is violated."""
        h = self.header
        if not (1 <= h.nrx <= 3 and 1 <= h.ntx <= 3):
            raise BadDims(f"nrx={h.nrx}, ntx={h.ntx} outside 1..3")
        if self.csi.shape != (NUM_SUBCARRIERS, h.ntx, h.nrx):
            raise BadDims(
                f"matrix shape {self.csi.shape} does not match "
                f"(30, {h.ntx}, {h.nrx})"
            )
        if h.length != h.expected_length():
            raise LengthMismatch(
                f"header length {h.length}, expected {h.expected_length()}"
            )
        re, im = self.csi.real, self.csi.imag
        for comp in (re, im):
            if not np.all((comp >= -128) & (comp <= 127) & (comp == np.rint(comp))):
                raise BadDims("matrix components must be int8-valued")


def decode_packet(data: bytes) -> CsiPacket:
    """Decode one packet from ``data``.

    Trailing bytes beyond the declared payload are ignored.  Raises
    Truncated, BadDims, or LengthMismatch; no other outcome for any input.
    """
    if len(data) < HEADER_SIZE:
        raise Truncated(f"need {HEADER_SIZE} header bytes, have {len(data)}")
    (timestamp, bfee_count, _res6, nrx, ntx, rssi_a, rssi_b, rssi_c,
     noise, agc, antenna_sel, _res15, length, rate) = _HEADER.unpack_from(data, 0)
    header = CsiHeader(
        timestamp=timestamp, bfee_count=bfee_count, nrx=nrx, ntx=ntx,
        rssi_a=rssi_a, rssi_b=rssi_b, rssi_c=rssi_c, noise=noise, agc=agc,
        antenna_sel=antenna_sel, length=length, rate=rate,
    )
    if not (1 <= nrx <= 3 and 1 <= ntx <= 3):
        raise BadDims(f"nrx={nrx}, ntx={ntx} outside 1..3")
    if length != header.expected_length():
        raise LengthMismatch(
            f"length field {length}, expected {header.expected_length()} "
            f"for ntx={ntx}, nrx={nrx}"
        )
    if len(data) < HEADER_SIZE + length:
        raise Truncated(
            f"payload needs {length} bytes, have {len(data) - HEADER_SIZE}"
        )
    pairs = np.frombuffer(
        data, dtype=np.int8, count=length, offset=HEADER_SIZE
    ).reshape(NUM_SUBCARRIERS, ntx, nrx, 2)
    csi = pairs[..., 0].astype(np.complex128)
    csi.imag = pairs[..., 1]
    return CsiPacket(header=header, csi=csi)


def encode_packet(packet: CsiPacket) -> bytes:
    """Serialize a valid packet; reserved bytes 6 and 15 are written as 0."""
    packet.validate()
    h = packet.header
    head = _HEADER.pack(
        h.timestamp, h.bfee_count, 0, h.nrx, h.ntx, h.rssi_a, h.rssi_b,
        h.rssi_c, h.noise, h.agc, h.antenna_sel, 0, h.length, h.rate,
    )
    pairs = np.empty((NUM_SUBCARRIERS, h.ntx, h.nrx, 2), dtype=np.int8)
    pairs[..., 0] = packet.csi.real
    pairs[..., 1] = packet.csi.imag
    return head + pairs.tobytes()


def extract_subcarrier(packet: CsiPacket, k: int = 0) -> np.ndarray:
    """Return the ntx x nrx complex slice for subcarrier ``k``."""
    if not 0 <= k < NUM_SUBCARRIERS:
        raise IndexOutOfRange(f"subcarrier {k} outside 0..29")
    return packet.csi[k]
