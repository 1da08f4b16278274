"""Entropy sources and the 64-bit word composition used for address draws.

Three modes are available:

* ``HARDWARE`` pulls from the operating system's CSPRNG (``secrets``), so
  every run produces a different layout, as a real deployment would.
* ``SEEDED`` uses ``random.Random`` (MT19937) seeded with a 64-bit integer.
  Equal seeds give equal draw streams on every platform and Python version
  that keeps the Mersenne Twister seeding algorithm.
* ``FIXED`` replays a caller-supplied list of 32-bit words and raises
  :class:`EntropyExhausted` once the list runs out.
"""

import enum
import random
import secrets
from dataclasses import dataclass

from .errors import EntropyExhausted, InvalidArgument

RDRAND_BIT = 30
U32_MASK = 0xFFFFFFFF
U64_MASK = 0xFFFFFFFFFFFFFFFF

# CPUID leaf 1 ECX words used by the --profile switch
RDRAND_FEATURE_MASK = 1 << RDRAND_BIT
NO_RDRAND_FEATURE_MASK = 0


@dataclass(frozen=True)
class CpuProfile:
    feature_mask: int = RDRAND_FEATURE_MASK

    def __post_init__(self):
        if not 0 <= self.feature_mask <= U32_MASK:
            raise InvalidArgument(f"feature mask {self.feature_mask:#x} is not 32-bit")

    @classmethod
    def rdrand(cls):
        return cls(RDRAND_FEATURE_MASK)

    @classmethod
    def none(cls):
        return cls(NO_RDRAND_FEATURE_MASK)


def hardware_entropy_supported(cpu):
    return bool((cpu.feature_mask >> RDRAND_BIT) & 1)


class EntropyMode(enum.Enum):
    HARDWARE = "hardware"
    SEEDED = "seeded"
    FIXED = "fixed"


class EntropySource:
    """A stream of 32-bit words.  Not safe for concurrent draws."""

    def __init__(self, mode=EntropyMode.SEEDED, seed=None, sequence=None):
        self.mode = EntropyMode(mode)
        self.seed = seed
        self.draws = 0
        if self.mode is EntropyMode.SEEDED:
            if seed is None:
                raise InvalidArgument("seeded mode requires a seed")
            if not 0 <= seed <= U64_MASK:
                raise InvalidArgument(f"seed {seed} is not a 64-bit unsigned value")
            self._rng = random.Random(seed)
        elif self.mode is EntropyMode.FIXED:
            words = list(sequence or ())
            for w in words:
                if not 0 <= w <= U32_MASK:
                    raise InvalidArgument(f"fixed word {w:#x} is not 32-bit")
            self._sequence = words
            self._pos = 0
        elif self.mode is EntropyMode.HARDWARE:
            self._rng = secrets.SystemRandom()

    @classmethod
    def seeded(cls, seed):
        return cls(EntropyMode.SEEDED, seed=seed)

    @classmethod
    def hardware(cls):
        return cls(EntropyMode.HARDWARE)

    @classmethod
    def fixed(cls, words):
        return cls(EntropyMode.FIXED, sequence=words)

    @classmethod
    def from_words64(cls, words):
        """Fixed source whose seed_generator calls return ``words`` in order."""
        seq = []
        for w in words:
            if not 0 <= w <= U64_MASK:
                raise InvalidArgument(f"word {w:#x} is not 64-bit")
            seq.extend((w >> 32, w & U32_MASK))
        return cls.fixed(seq)

    @property
    def remaining(self):
        """Words left in a fixed sequence; ``None`` for unbounded modes."""
        if self.mode is EntropyMode.FIXED:
            return len(self._sequence) - self._pos
        return None

    def draw32(self):
        if self.mode is EntropyMode.FIXED:
            if self._pos >= len(self._sequence):
                raise EntropyExhausted(
                    f"fixed sequence exhausted after {self._pos} words"
                )
            word = self._sequence[self._pos]
            self._pos += 1
        else:
            word = self._rng.getrandbits(32)
        self.draws += 1
        return word

    def __repr__(self):
        extra = f", seed={self.seed}" if self.mode is EntropyMode.SEEDED else ""
        return f"EntropySource({self.mode.value}{extra}, draws={self.draws})"


def draw32(source):
    return source.draw32()


def seed_generator(source):
    """Compose one 64-bit word from two 32-bit draws: ``(a << 32) ^ b``."""
    high = source.draw32()
    low = source.draw32()
    return ((high << 32) ^ low) & U64_MASK
