"""Transport frame: 0xD3, 6 reserved bits, 10-bit length, payload, CRC-24Q."""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import FramingError, IntegrityError

PREAMBLE = 0xD3
MAX_PAYLOAD = 1023
HEADER_LEN = 3
CRC_LEN = 3


class TruncatedFrame(FramingError):
    """More bytes are needed to complete the frame."""


def crc24q(data: bytes) -> int:
    """CRC-24Q: polynomial 0x1864CFB, zero initial value, no reflection or final xor."""
    return int(kernels.crc24q_kernel(np.frombuffer(bytes(data), dtype=np.uint8), kernels.CRC24Q_TABLE))


def encode_frame(payload: bytes) -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise FramingError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    head = bytes([PREAMBLE, (len(payload) >> 8) & 0x03, len(payload) & 0xFF]) + bytes(payload)
    return head + crc24q(head).to_bytes(3, "big")


def decode_frame(data: bytes) -> tuple[bytes, int]:
    """Decode the frame at the start of ``data``; returns (payload, bytes consumed)."""
    if len(data) < HEADER_LEN:
        raise TruncatedFrame("truncated frame header")
    if data[0] != PREAMBLE:
        raise FramingError(f"bad preamble 0x{data[0]:02X}")
    if data[1] & 0xFC:
        raise FramingError("reserved bits set")
    length = ((data[1] & 0x03) << 8) | data[2]
    end = HEADER_LEN + length + CRC_LEN
    if len(data) < end:
        raise TruncatedFrame(f"truncated frame: need {end} bytes, have {len(data)}")
    if crc24q(data[: end - CRC_LEN]) != int.from_bytes(data[end - CRC_LEN:end], "big"):
        raise IntegrityError("CRC-24Q mismatch")
    return bytes(data[HEADER_LEN:HEADER_LEN + length]), end


def message_number(payload: bytes) -> int:
    if len(payload) < 2:
        raise FramingError("payload too short for a message number")
    return (payload[0] << 4) | (payload[1] >> 4)


class FrameReader:
    """Incremental frame extractor for a byte stream; resynchronizes on bad frames."""

    def __init__(self) -> None:
        self._buf = bytearray()
        self.discarded = 0

    def feed(self, data: bytes) -> list[bytes]:
        self._buf.extend(data)
        payloads = []
        while True:
            start = self._buf.find(bytes([PREAMBLE]))
            if start < 0:
                self.discarded += len(self._buf)
                self._buf.clear()
                return payloads
            if start:
                self.discarded += start
                del self._buf[:start]
            try:
                payload, used = decode_frame(bytes(self._buf))
            except TruncatedFrame:
                return payloads
            except (FramingError, IntegrityError):
                self.discarded += 1
                del self._buf[:1]
                continue
            payloads.append(payload)
            del self._buf[:used]
