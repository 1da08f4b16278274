"""Virtual address space of a single simulated unikernel instance.

Addresses are plain Python ints.  The model only ever selects and reserves
ranges; nothing is unmapped.
"""

import bisect
import enum
from dataclasses import dataclass

from .errors import AddressSpaceExhausted, InvalidArgument, OverlapError

PAGE_SIZE = 0x1000
# all addresses live in the low canonical half
ADDRESS_LIMIT = 1 << 48
U64_LIMIT = 1 << 64


class RegionKind(enum.Enum):
    PROGRAM_BASE = "ProgramBase"
    HEAP_SEGMENT = "HeapSegment"
    STACK = "Stack"
    LARGE_ALLOC = "LargeAlloc"
    OTHER = "Other"


def is_power_of_two(n):
    return n > 0 and n & (n - 1) == 0


def check_address(addr):
    if not isinstance(addr, int) or isinstance(addr, bool):
        raise InvalidArgument(f"address must be an int, got {type(addr).__name__}")
    if not 0 <= addr < ADDRESS_LIMIT:
        raise InvalidArgument(f"address {addr:#x} outside [0, 2^48)")
    return addr


def align_down(addr, alignment):
    """Round ``addr`` down to a multiple of ``alignment`` (a power of two)."""
    if not is_power_of_two(alignment):
        raise InvalidArgument(f"alignment {alignment:#x} is not a power of two")
    return addr & ~(alignment - 1)


def align_up(addr, alignment):
    if not is_power_of_two(alignment):
        raise InvalidArgument(f"alignment {alignment:#x} is not a power of two")
    return (addr + alignment - 1) & ~(alignment - 1)


@dataclass(frozen=True)
class Region:
    start: int
    length: int
    kind: RegionKind = RegionKind.OTHER

    def __post_init__(self):
        if self.length <= 0:
            raise InvalidArgument(f"region length must be positive, got {self.length}")
        if self.start < 0 or self.start + self.length > U64_LIMIT:
            raise InvalidArgument("region does not fit in 64 bits")

    @property
    def end(self):
        return self.start + self.length

    def overlaps(self, start, length):
        return start < self.end and self.start < start + length

    def __str__(self):
        return f"{self.kind.value}[{self.start:#018x}, +{self.length:#x})"


class AddressSpace:
    """Sorted, non-overlapping set of reserved regions."""

    def __init__(self, page_size=PAGE_SIZE):
        if not is_power_of_two(page_size):
            raise InvalidArgument(f"page size {page_size:#x} is not a power of two")
        self.page_size = page_size
        self._regions = []
        self._starts = []

    @property
    def regions(self):
        return tuple(self._regions)

    def __len__(self):
        return len(self._regions)

    def __iter__(self):
        return iter(self._regions)

    def _first_candidate(self, addr):
        # index of the first region whose end lies above addr; ends are sorted
        # because regions never overlap
        i = bisect.bisect_right(self._starts, addr)
        if i > 0 and self._regions[i - 1].end > addr:
            return i - 1
        return i

    def find_overlap(self, start, length):
        i = self._first_candidate(start)
        if i < len(self._regions) and self._regions[i].overlaps(start, length):
            return self._regions[i]
        return None

    def is_free(self, start, length):
        return self.find_overlap(start, length) is None

    def reserve(self, start, length, kind=RegionKind.OTHER):
        if length <= 0:
            raise InvalidArgument(f"length must be positive, got {length}")
        check_address(start)
        if start % self.page_size:
            raise InvalidArgument(f"start {start:#x} is not page aligned")
        if start + length > ADDRESS_LIMIT:
            raise InvalidArgument(f"[{start:#x}, +{length:#x}) crosses 2^48")
        hit = self.find_overlap(start, length)
        if hit is not None:
            raise OverlapError(start, length, hit)
        region = Region(start, length, kind)
        i = bisect.bisect_left(self._starts, start)
        self._starts.insert(i, start)
        self._regions.insert(i, region)
        return region

    def first_fit(self, search_start, length):
        """Lowest page-aligned address >= search_start with a free gap of ``length``."""
        if length <= 0:
            raise InvalidArgument(f"length must be positive, got {length}")
        check_address(search_start)
        if search_start % self.page_size:
            raise InvalidArgument(f"search start {search_start:#x} is not page aligned")
        candidate = search_start
        for region in self._regions[self._first_candidate(candidate):]:
            if candidate + length <= region.start:
                break
            candidate = max(candidate, align_up(region.end, self.page_size))
        if candidate + length > ADDRESS_LIMIT:
            raise AddressSpaceExhausted(
                f"no free gap of {length:#x} bytes at or above {search_start:#x}"
            )
        return candidate


def reserve(space, start, length, kind=RegionKind.OTHER):
    return space.reserve(start, length, kind)


def first_fit(space, search_start, length):
    return space.first_fit(search_start, length)
