"""Simulation and statistical evaluation of address randomization in the OSv unikernel."""

from .entropy import CpuProfile, EntropyMode, EntropySource, hardware_entropy_supported, seed_generator
from .errors import (
    AddressSpaceExhausted,
    AslrError,
    EntropyExhausted,
    InsufficientData,
    InvalidArgument,
    LayoutFailure,
    OutOfRegime,
    OverlapError,
    ParseError,
)
from .layout import (
    PROGRAM_BASE_POLICY,
    STACK_POLICY,
    InstanceConfig,
    LayoutRecord,
    MapFlags,
    RandomizationPolicy,
    ThreadAttr,
    rand_gen,
    simulate_instance,
)
from .vas import AddressSpace, Region, RegionKind, align_down

__version__ = "0.1.0"
