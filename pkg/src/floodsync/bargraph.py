"""Bar-graph nibble codec.

An integer v in [0, N] is transmitted as v leading 0xF nibbles followed by
0x0 nibbles. When several such packets are transmitted concurrently the
channel fuses them nibble by nibble: positions where all senders agree come
through clean, the disagreement window between the smallest and largest
encoded value turns into an unpredictable run of mostly-0x0/0xF nibbles.
The decoder recovers a value between the smallest and largest transmitted
number and tolerates isolated nibble corruption anywhere in the payload.

Boundary semantics (frozen, exercised exhaustively by the test suite):

* left boundary L  = index of the first position i where nibble i and its
  right neighbour are both != 0xF; positions past the end count as non-F,
  so a packet of all 0xF gives L = N.
* right boundary R = one past the last position j where nibble j and its
  left neighbour are both != 0x0; positions before the start count as
  non-zero, so a packet of all 0x0 gives R = 0.
* |L - R| > threshold marks the packet invalid, otherwise the decoded
  value is the half-up-rounded average of L and R.

A single corrupted nibble inside either clean run is skipped by both scans
because it never forms a *pair* of out-of-run nibbles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .units import round_half_up

MAX_PAYLOAD_BYTES = 127
MAX_NIBBLES = 2 * MAX_PAYLOAD_BYTES

DEFAULT_THRESHOLD = 16
DEFAULT_FLIP_OTHER_PROB = 0.01


@dataclass(frozen=True)
class NibblePayload:
    """Payload of a radio frame as a sequence of 4-bit values.

    Nibble i occupies the high half of byte i // 2 when i is even and the
    low half when i is odd, so fixture files are bit-exact.
    """

    nibbles: tuple[int, ...]

    def __post_init__(self) -> None:
        n = len(self.nibbles)
        if n % 2 != 0:
            raise ValueError(f"payload must hold whole bytes, got {n} nibbles")
        if not 2 <= n <= MAX_NIBBLES:
            raise ValueError(f"payload length {n} outside [2, {MAX_NIBBLES}] nibbles")
        for nib in self.nibbles:
            if not 0x0 <= nib <= 0xF:
                raise ValueError(f"nibble {nib!r} outside [0x0, 0xF]")

    def __len__(self) -> int:
        return len(self.nibbles)

    def to_bytes(self) -> bytes:
        it = iter(self.nibbles)
        return bytes((hi << 4) | lo for hi, lo in zip(it, it))

    @classmethod
    def from_bytes(cls, data: bytes) -> "NibblePayload":
        nibbles = []
        for byte in data:
            nibbles.append(byte >> 4)
            nibbles.append(byte & 0xF)
        return cls(tuple(nibbles))


class DecodeResult(NamedTuple):
    """Either Valid(value) or Invalid (value is None)."""

    value: int | None

    @property
    def valid(self) -> bool:
        return self.value is not None


INVALID = DecodeResult(None)


def encode(value: int, payload_nibbles: int) -> NibblePayload:
    """Encode `value` as that many leading 0xF nibbles, the rest 0x0."""
    if not 0 <= value <= payload_nibbles:
        raise ValueError(f"value {value} outside [0, {payload_nibbles}]")
    return NibblePayload((0xF,) * value + (0x0,) * (payload_nibbles - value))


def merge_channel(
    payloads: Sequence[NibblePayload],
    rng: np.random.Generator,
    flip_other_prob: float = DEFAULT_FLIP_OTHER_PROB,
) -> NibblePayload:
    """Fuse concurrently transmitted payloads as the radio channel does.

    Nibbles on which all senders agree interfere constructively and come
    through unchanged. Disagreeing positions resolve to 0x0 or 0xF with
    equal probability, except that with `flip_other_prob` the receiver
    outputs one of the fourteen other nibble values instead.
    """
    if not payloads:
        raise ValueError("merge_channel needs at least one payload")
    length = len(payloads[0])
    for p in payloads[1:]:
        if len(p) != length:
            raise ValueError(f"payload length mismatch: {len(p)} != {length}")
    merged = []
    for i in range(length):
        first = payloads[0].nibbles[i]
        if all(p.nibbles[i] == first for p in payloads[1:]):
            merged.append(first)
        elif rng.random() < flip_other_prob:
            merged.append(int(rng.integers(0x1, 0xF)))
        else:
            merged.append(0xF if rng.integers(0, 2) else 0x0)
    return NibblePayload(tuple(merged))


def left_boundary(nibbles: Sequence[int]) -> int:
    n = len(nibbles)
    for i in range(n):
        if nibbles[i] != 0xF and (i + 1 == n or nibbles[i + 1] != 0xF):
            return i
    return n


def right_boundary(nibbles: Sequence[int]) -> int:
    for j in range(len(nibbles) - 1, -1, -1):
        if nibbles[j] != 0x0 and (j == 0 or nibbles[j - 1] != 0x0):
            return j + 1
    return 0


def decode(payload: NibblePayload, threshold: int = DEFAULT_THRESHOLD) -> DecodeResult:
    """Decode a possibly corrupted bar-graph payload.

    Returns Invalid when the two boundary estimates disagree by more than
    `threshold` nibbles, otherwise their half-up-rounded average.
    """
    left = left_boundary(payload.nibbles)
    right = right_boundary(payload.nibbles)
    if abs(left - right) > threshold:
        return INVALID
    return DecodeResult(round_half_up((left + right) / 2))


def encode_values(values: Iterable[int], payload_nibbles: int) -> list[NibblePayload]:
    return [encode(v, payload_nibbles) for v in values]
