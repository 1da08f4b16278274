"""Address selection for program base, heap segments, stacks and large allocations.

The deterministic baseline places the program at a fixed base and serves
anonymous mappings first-fit from a fixed search start.  With hardware
entropy available, the program base and the main thread's stack are drawn
from a lattice defined by a required-bits check and an upper-bound mask.
"""

import enum
from dataclasses import dataclass, field

from .entropy import CpuProfile, EntropyMode, EntropySource, hardware_entropy_supported, seed_generator
from .errors import InvalidArgument, LayoutFailure, OverlapError
from .vas import PAGE_SIZE, AddressSpace, RegionKind, check_address

DEFAULT_PROGRAM_BASE = 0x0000100000000000
ANON_SEARCH_START = 0x0000200000000000

ELF_BIT_CHECK = 0x0000100000000000
ELF_RND_MASK = 0x00001FFFFF000000
STACK_BIT_CHECK = 0x0000300000000000
STACK_RND_MASK = 0x00003FFFFF000000

SEGMENT_STRIDE = 0x1000
DEFAULT_MAX_RETRIES = 64
DEFAULT_LARGE_ALLOC_THRESHOLD = 2 << 20
DEFAULT_STACK_SIZE = 1 << 20


@dataclass(frozen=True)
class RandomizationPolicy:
    bit_check: int
    rnd_mask: int
    alignment: int = 1 << 24

    def __post_init__(self):
        if self.bit_check & self.rnd_mask != self.bit_check:
            raise InvalidArgument("bit_check has bits outside rnd_mask")
        if self.rnd_mask & 0xFFFFFF:
            raise InvalidArgument("rnd_mask must clear the low 24 bits")
        if self.rnd_mask >= 1 << 48:
            raise InvalidArgument("rnd_mask reaches above 2^48")
        if self.rnd_mask == 0:
            raise InvalidArgument("rnd_mask is empty")

    def accepts(self, word):
        return word & self.bit_check == self.bit_check

    @property
    def stride(self):
        """Spacing of the lattice: the lowest free bit of the mask."""
        return self.rnd_mask & -self.rnd_mask

    @property
    def lowest(self):
        return self.bit_check

    @property
    def highest(self):
        return self.rnd_mask

    @property
    def lattice_size(self):
        return 1 << bin(self.rnd_mask & ~self.bit_check).count("1")

    def bounds(self):
        """Continuous support ``[lowest, highest + stride)`` for uniformity tests."""
        return self.lowest, self.highest + self.stride

    def contains(self, addr):
        return addr & ~self.rnd_mask == 0 and self.accepts(addr)


PROGRAM_BASE_POLICY = RandomizationPolicy(ELF_BIT_CHECK, ELF_RND_MASK)
STACK_POLICY = RandomizationPolicy(STACK_BIT_CHECK, STACK_RND_MASK)


class MapFlags(enum.Flag):
    NONE = 0
    STACK = enum.auto()
    RAND = enum.auto()


@dataclass
class ThreadAttr:
    stack_size: int = DEFAULT_STACK_SIZE
    random_stack: bool = False
    stack_flags: MapFlags = MapFlags.STACK

    def __post_init__(self):
        if self.random_stack:
            self.stack_flags |= MapFlags.RAND


@dataclass(frozen=True)
class InstanceConfig:
    cpu: CpuProfile = field(default_factory=CpuProfile.rdrand)
    mode: EntropyMode = EntropyMode.SEEDED
    seed: int = 0
    sequence: tuple = ()
    n_heap_segments: int = 4
    stack_size: int = DEFAULT_STACK_SIZE
    large_alloc_threshold: int = DEFAULT_LARGE_ALLOC_THRESHOLD
    max_retries: int = DEFAULT_MAX_RETRIES
    # lengths of malloc_large requests issued after the main thread starts
    large_requests: tuple = ()
    base_policy: RandomizationPolicy = PROGRAM_BASE_POLICY
    stack_policy: RandomizationPolicy = STACK_POLICY
    instance_id: str = "i0"

    def __post_init__(self):
        if self.n_heap_segments < 0:
            raise InvalidArgument("n_heap_segments must be >= 0")
        if self.stack_size <= 0:
            raise InvalidArgument("stack_size must be positive")
        if self.max_retries < 1:
            raise InvalidArgument("max_retries must be >= 1")
        if self.large_alloc_threshold <= 0:
            raise InvalidArgument("large_alloc_threshold must be positive")

    def make_source(self):
        mode = EntropyMode(self.mode)
        if mode is EntropyMode.SEEDED:
            return EntropySource.seeded(self.seed)
        if mode is EntropyMode.FIXED:
            return EntropySource.fixed(self.sequence)
        return EntropySource.hardware()


@dataclass(frozen=True)
class LayoutRecord:
    instance_id: str
    program_base: int
    heap_segments: tuple
    stack_base: int
    randomized: bool
    large_allocs: tuple = ()


def rand_gen(policy, source):
    """Draw 64-bit words until one carries every required bit, then mask it."""
    while True:
        word = seed_generator(source)
        if policy.accepts(word):
            return word & policy.rnd_mask


def load_segments(space, base, n):
    """Reserve ``n`` one-page segments at ``base + i * 0x1000``."""
    if base % space.page_size:
        raise InvalidArgument(f"base {base:#x} is not page aligned")
    segments = [base + i * SEGMENT_STRIDE for i in range(n)]
    for i, addr in enumerate(segments):
        kind = RegionKind.PROGRAM_BASE if i == 0 else RegionKind.HEAP_SEGMENT
        try:
            space.reserve(addr, SEGMENT_STRIDE, kind)
        except (OverlapError, InvalidArgument) as exc:
            raise LayoutFailure(f"segment {i} at {addr:#018x}: {exc}") from exc
    return segments


def _place_program(space, base, n):
    if not space.is_free(base, max(n, 1) * SEGMENT_STRIDE):
        return None
    segments = load_segments(space, base, n)
    if n == 0:
        space.reserve(base, SEGMENT_STRIDE, RegionKind.PROGRAM_BASE)
    return segments


def create_main_program(space, cfg, source):
    """Choose the program base and load its segments.

    Returns ``(base, segments)``.  A randomized base that collides with an
    existing mapping is redrawn, at most ``cfg.max_retries`` times.
    """
    if any(r.kind is RegionKind.PROGRAM_BASE for r in space):
        raise InvalidArgument("address space already holds a program base")
    n = cfg.n_heap_segments
    if not hardware_entropy_supported(cfg.cpu):
        segments = _place_program(space, DEFAULT_PROGRAM_BASE, n)
        if segments is None:
            raise LayoutFailure(f"default base {DEFAULT_PROGRAM_BASE:#018x} is taken")
        return DEFAULT_PROGRAM_BASE, segments
    for _ in range(cfg.max_retries):
        base = rand_gen(cfg.base_policy, source)
        segments = _place_program(space, base, n)
        if segments is not None:
            return base, segments
    raise LayoutFailure(f"no free program base after {cfg.max_retries} draws")


def map_anon(space, requested, length, flags, source, *, policy=STACK_POLICY,
             max_retries=DEFAULT_MAX_RETRIES, kind=RegionKind.OTHER):
    """Anonymous mapping.  ``MapFlags.RAND`` overrides any requested address."""
    if length <= 0:
        raise InvalidArgument(f"length must be positive, got {length}")
    if MapFlags.RAND in flags:
        for _ in range(max_retries):
            addr = rand_gen(policy, source)
            if space.is_free(addr, length):
                space.reserve(addr, length, kind)
                return addr
        raise LayoutFailure(f"no free randomized address after {max_retries} draws")
    if requested is None:
        addr = space.first_fit(ANON_SEARCH_START, length)
    else:
        addr = check_address(requested)
    space.reserve(addr, length, kind)
    return addr


def allocate_stack(space, attr, source, *, policy=STACK_POLICY,
                   max_retries=DEFAULT_MAX_RETRIES):
    if attr.stack_size <= 0:
        raise InvalidArgument(f"stack size must be positive, got {attr.stack_size}")
    addr = map_anon(space, None, attr.stack_size, attr.stack_flags, source,
                    policy=policy, max_retries=max_retries, kind=RegionKind.STACK)
    return space.find_overlap(addr, 1)


def malloc_large(space, length, threshold=DEFAULT_LARGE_ALLOC_THRESHOLD):
    """Large allocation: always first-fit, never randomized."""
    if length < threshold:
        raise InvalidArgument(
            f"{length:#x} bytes is below the large-allocation threshold {threshold:#x}"
        )
    addr = space.first_fit(ANON_SEARCH_START, length)
    space.reserve(addr, length, RegionKind.LARGE_ALLOC)
    return addr


def simulate_instance(cfg, source=None):
    """Run one instance's boot flow: program load, then the main thread's stack."""
    space = AddressSpace(PAGE_SIZE)
    if source is None:
        source = cfg.make_source()
    randomized = hardware_entropy_supported(cfg.cpu)
    base, segments = create_main_program(space, cfg, source)
    attr = ThreadAttr(cfg.stack_size, random_stack=randomized)
    try:
        stack = allocate_stack(space, attr, source, policy=cfg.stack_policy,
                               max_retries=cfg.max_retries)
        large = tuple(malloc_large(space, n, cfg.large_alloc_threshold)
                      for n in cfg.large_requests)
    except OverlapError as exc:
        raise LayoutFailure(str(exc)) from exc
    return LayoutRecord(
        instance_id=cfg.instance_id,
        program_base=base,
        heap_segments=tuple(segments),
        stack_base=stack.start,
        randomized=randomized,
        large_allocs=large,
    )

