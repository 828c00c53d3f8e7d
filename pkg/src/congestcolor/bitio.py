"""Fixed-width bit strings for message payloads.

Every payload that crosses an edge is a ``Bits`` value: an unsigned integer
plus an explicit bit length.  Fields are appended little-end first, i.e. the
first field written occupies the lowest-order bits.  ``BitReader`` consumes
fields in the same order.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Bits:
    value: int
    nbits: int

    def __post_init__(self):
        if self.nbits < 0:
            raise ValueError("negative bit length")
        if self.value < 0 or self.value >> self.nbits:
            raise ValueError(f"value does not fit in {self.nbits} bits")

    def __len__(self) -> int:
        return self.nbits

    def to_bytes(self) -> bytes:
        return self.value.to_bytes((self.nbits + 7) // 8 or 1, "little")

    @classmethod
    def from_bytes(cls, raw: bytes, nbits: int) -> "Bits":
        return cls(int.from_bytes(raw, "little") & ((1 << nbits) - 1), nbits)

    def chunks(self, width: int) -> list["Bits"]:
        """Split into sub-messages of at most ``width`` bits, low bits first."""
        if width <= 0:
            raise ValueError("chunk width must be positive")
        if self.nbits == 0:
            return [self]
        out = []
        v, remaining = self.value, self.nbits
        while remaining > 0:
            take = min(width, remaining)
            out.append(Bits(v & ((1 << take) - 1), take))
            v >>= take
            remaining -= take
        return out


class BitWriter:
    """Accumulates fields into one Bits value (first field = lowest bits)."""

    def __init__(self):
        self._value = 0
        self._nbits = 0

    def put(self, value: int, width: int) -> "BitWriter":
        if width < 0:
            raise ValueError("negative field width")
        if value < 0 or (width < value.bit_length()):
            raise ValueError(f"field value {value} does not fit in {width} bits")
        self._value |= value << self._nbits
        self._nbits += width
        return self

    def put_bits(self, bits: Bits) -> "BitWriter":
        return self.put(bits.value, bits.nbits)

    def done(self) -> Bits:
        return Bits(self._value, self._nbits)


class BitReader:
    def __init__(self, bits: Bits):
        self._value = bits.value
        self._left = bits.nbits

    def take(self, width: int) -> int:
        if width > self._left:
            raise ValueError("read past end of payload")
        out = self._value & ((1 << width) - 1)
        self._value >>= width
        self._left -= width
        return out

    @property
    def remaining(self) -> int:
        return self._left


def bitmask_of(values, length: int) -> Bits:
    """Characteristic bitmask of ``values`` over positions 1..length.

    Bit i-1 of the payload is set iff i is present.  Values outside
    [1, length] are ignored.
    """
    if length > 4096:
        # wide masks: build a byte buffer instead of repeated bigint shifts
        import numpy as np

        buf = np.zeros((length + 7) // 8, dtype=np.uint8)
        for v in values:
            if 1 <= v <= length:
                buf[(v - 1) >> 3] |= 1 << ((v - 1) & 7)
        return Bits(int.from_bytes(buf.tobytes(), "little"), length)
    acc = 0
    for v in values:
        if 1 <= v <= length:
            acc |= 1 << (v - 1)
    return Bits(acc, length)


def bitmask_members(bits: Bits) -> list[int]:
    """Positions (1-based) of set bits, ascending."""
    out = []
    v = bits.value
    while v:
        low = v & -v
        out.append(low.bit_length())
        v ^= low
    return out
