"""MSB-first bit packing."""

from __future__ import annotations

from ..errors import DecodeError, EncodeError


class BitWriter:
    def __init__(self) -> None:
        self._value = 0
        self._nbits = 0

    def __len__(self) -> int:
        return self._nbits

    def unsigned(self, value: int, width: int) -> "BitWriter":
        if not 0 <= value < (1 << width):
            raise EncodeError(f"{value} does not fit in {width} unsigned bits")
        self._value = (self._value << width) | value
        self._nbits += width
        return self

    def signed(self, value: int, width: int) -> "BitWriter":
        """Two's complement."""
        limit = 1 << (width - 1)
        if not -limit <= value < limit:
            raise EncodeError(f"{value} does not fit in {width} signed bits")
        return self.unsigned(value & ((1 << width) - 1), width)

    def to_bytes(self) -> bytes:
        pad = -self._nbits % 8
        return ((self._value << pad)).to_bytes((self._nbits + pad) // 8, "big")


class BitReader:
    def __init__(self, data: bytes) -> None:
        self._value = int.from_bytes(data, "big")
        self._total = len(data) * 8
        self.pos = 0

    @property
    def remaining(self) -> int:
        return self._total - self.pos

    def unsigned(self, width: int) -> int:
        if width > self.remaining:
            raise DecodeError(f"need {width} bits at offset {self.pos}, {self.remaining} left")
        self.pos += width
        return (self._value >> (self._total - self.pos)) & ((1 << width) - 1)

    def signed(self, width: int) -> int:
        value = self.unsigned(width)
        if value & (1 << (width - 1)):
            value -= 1 << width
        return value
