"""SplitMix64 byte stream used for device-internal random data and trace payloads."""

import struct

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    """Deterministic 64-bit generator; the byte stream is a pure function of the seed."""

    def __init__(self, seed):
        self.state = seed & MASK64

    def next_u64(self):
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def next_bytes(self, length):
        """Return the next ``length`` bytes, little-endian per 64-bit output.

        A partially consumed word is discarded, so two calls of 4 bytes do
        not equal one call of 8 bytes.
        """
        words = (length + 7) // 8
        out = struct.pack(f"<{words}Q", *(self.next_u64() for _ in range(words)))
        return out[:length]


def splitmix64_bytes(seed, length):
    """First ``length`` bytes of the SplitMix64 stream for ``seed``.

    The k-th state is seed + k * gamma (mod 2**64), so the whole stream is
    mixed in one vectorised pass.
    """
    if length < 0:
        raise ValueError("length must be non-negative")
    words = (length + 7) // 8
    with np.errstate(over="ignore"):
        z = np.arange(1, words + 1, dtype=np.uint64) * np.uint64(GOLDEN_GAMMA)
        z += np.uint64(seed & MASK64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z ^= z >> np.uint64(31)
    return z.astype("<u8").tobytes()[:length]


def derive_seed(seed, salt):
    """Mix two integers into a fresh 64-bit seed (first output of seed XOR salt)."""
    return SplitMix64((seed ^ salt) & MASK64).next_u64()
