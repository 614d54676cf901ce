"""Core vocabulary types shared by all modules.

Frequencies live on a 0.1 GHz lattice (the hardware granularity of the
modeled platform). To keep lattice membership and neighbor arithmetic
exact, grid internals work in integer deci-GHz; the public surface stays
in GHz floats.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .errors import InvalidInputError, InvalidSampleError, InvalidTuningModelError

# Counter names in canonical order (model feature order for the 7 rates).
COUNTER_NAMES = ("br_ntk", "ld_ins", "l2_icr", "br_msp", "res_stl", "sr_ins", "l2_dcr")

# The fixed measurement point used for counter collection and energy
# normalization: 24 OpenMP threads at 2.0 GHz core / 1.5 GHz uncore.
CALIBRATION_CORE_FREQ = 2.0
CALIBRATION_UNCORE_FREQ = 1.5
CALIBRATION_THREADS = 24

# Frequencies within 1e-9 GHz of a lattice point count as on-lattice.
FREQ_TOLERANCE_GHZ = 1e-9


def to_deci(ghz: float) -> Optional[int]:
    """Map GHz to integer deci-GHz, or None if off-lattice beyond tolerance."""
    deci = round(ghz * 10)
    if abs(ghz * 10 - deci) > FREQ_TOLERANCE_GHZ * 10:
        return None
    return int(deci)


def _require_deci(ghz: float, what: str) -> int:
    deci = to_deci(ghz)
    if deci is None:
        raise InvalidInputError(f"{what} {ghz!r} GHz is not on the 0.1 GHz lattice")
    return deci


@dataclass(frozen=True)
class FrequencyGrid:
    """The core/uncore frequency search lattice, in GHz."""

    cf_min: float = 1.2
    cf_max: float = 2.5
    cf_step: float = 0.1
    ucf_min: float = 1.3
    ucf_max: float = 3.0
    ucf_step: float = 0.1

    def __post_init__(self):
        for name in ("cf_min", "cf_max", "cf_step", "ucf_min", "ucf_max", "ucf_step"):
            _require_deci(getattr(self, name), name)
        if self.cf_min > self.cf_max or self.ucf_min > self.ucf_max:
            raise InvalidInputError("grid minimum exceeds maximum")
        if self.cf_step <= 0 or self.ucf_step <= 0:
            raise InvalidInputError("grid steps must be positive")

    # -- integer views ------------------------------------------------
    @property
    def cf_range_deci(self) -> tuple[int, int, int]:
        return (to_deci(self.cf_min), to_deci(self.cf_max), to_deci(self.cf_step))

    @property
    def ucf_range_deci(self) -> tuple[int, int, int]:
        return (to_deci(self.ucf_min), to_deci(self.ucf_max), to_deci(self.ucf_step))

    @staticmethod
    def _axis_values(lo: int, hi: int, step: int) -> tuple[float, ...]:
        return tuple((lo + i * step) / 10 for i in range((hi - lo) // step + 1))

    def cf_values(self) -> tuple[float, ...]:
        return self._axis_values(*self.cf_range_deci)

    def ucf_values(self) -> tuple[float, ...]:
        return self._axis_values(*self.ucf_range_deci)

    def pairs(self) -> Iterator[tuple[float, float]]:
        """All (cf, ucf) lattice points, ascending in cf then ucf."""
        for cf in self.cf_values():
            for ucf in self.ucf_values():
                yield cf, ucf

    @staticmethod
    def _on_axis(deci: Optional[int], lo: int, hi: int, step: int) -> bool:
        return deci is not None and lo <= deci <= hi and (deci - lo) % step == 0

    def contains_cf(self, cf: float) -> bool:
        return self._on_axis(to_deci(cf), *self.cf_range_deci)

    def contains_ucf(self, ucf: float) -> bool:
        return self._on_axis(to_deci(ucf), *self.ucf_range_deci)

    def contains(self, cf: float, ucf: float) -> bool:
        return self.contains_cf(cf) and self.contains_ucf(ucf)


DEFAULT_GRID = FrequencyGrid()


@dataclass(frozen=True, order=True)
class SystemConfig:
    """One tuning-parameter point: OpenMP threads plus core/uncore frequency.

    Construction does not pin frequencies to any grid; use
    `validate_config` to check a point against a lattice.
    """

    omp_threads: int
    core_freq: float
    uncore_freq: float

    def __post_init__(self):
        if self.omp_threads != int(self.omp_threads):
            raise InvalidInputError(f"omp_threads must be an integer, got {self.omp_threads!r}")
        object.__setattr__(self, "omp_threads", int(self.omp_threads))
        if not np.isfinite(self.core_freq) or not np.isfinite(self.uncore_freq):
            raise InvalidInputError("frequencies must be finite")


def validate_config(config: SystemConfig, grid: FrequencyGrid) -> bool:
    """True iff both frequencies lie on the grid lattice and threads >= 1."""
    return (
        config.omp_threads >= 1
        and grid.contains(config.core_freq, config.uncore_freq)
    )


# Default operating point of the modeled platform: jobs start at maximum
# core and uncore frequency with all cores in use.
DEFAULT_SYSTEM_CONFIG = SystemConfig(24, 2.5, 3.0)


@dataclass(frozen=True)
class PmcVector:
    """The seven selected performance-counter values, in canonical order.

    Holds raw counts (normalized=False) or counts per second
    (normalized=True); the flag guards against double normalization.
    """

    br_ntk: float
    ld_ins: float
    l2_icr: float
    br_msp: float
    res_stl: float
    sr_ins: float
    l2_dcr: float
    normalized: bool = False

    def __post_init__(self):
        for name in COUNTER_NAMES:
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise InvalidInputError(f"counter {name} must be finite and >= 0, got {value!r}")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in COUNTER_NAMES], dtype=np.float64)

    @classmethod
    def from_array(cls, values, normalized: bool = False) -> "PmcVector":
        values = list(values)
        if len(values) != len(COUNTER_NAMES):
            raise InvalidInputError(f"expected {len(COUNTER_NAMES)} counters, got {len(values)}")
        return cls(*(float(v) for v in values), normalized=normalized)


@dataclass(frozen=True)
class PhaseSample:
    """One measured phase execution under a fixed configuration."""

    config: SystemConfig
    duration: float
    node_energy: float
    counters: Optional[PmcVector]
    node_id: str

    def __post_init__(self):
        if self.duration <= 0:
            raise InvalidSampleError(f"duration must be positive, got {self.duration!r}")
        if self.node_energy <= 0:
            raise InvalidSampleError(f"node_energy must be positive, got {self.node_energy!r}")


@dataclass(frozen=True)
class RegionProfile:
    """Aggregate timing for one program region, plus any collected samples."""

    region_name: str
    call_count: int
    mean_exec_time: float
    samples: tuple[PhaseSample, ...] = ()

    def __post_init__(self):
        if self.call_count < 1:
            raise InvalidInputError(f"call_count must be >= 1, got {self.call_count!r}")
        if self.mean_exec_time < 0:
            raise InvalidInputError("mean_exec_time must be >= 0")


@dataclass(frozen=True)
class Scenario:
    """A group of regions sharing one best-found configuration."""

    config: SystemConfig
    members: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(self.members))
        if not self.members:
            raise InvalidInputError("scenario members must be nonempty")


@dataclass(frozen=True)
class TuningModel:
    """The design-time artifact: scenarios plus a fallback configuration.

    Scenarios partition their region set (each region appears exactly once)
    and no two scenarios share a configuration.
    """

    scenarios: tuple[Scenario, ...]
    default_config: Optional[SystemConfig]

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        seen_regions: set[str] = set()
        seen_configs: set[SystemConfig] = set()
        for scenario in self.scenarios:
            if scenario.config in seen_configs:
                raise InvalidInputError(f"duplicate scenario config {scenario.config}")
            seen_configs.add(scenario.config)
            overlap = seen_regions & scenario.members
            if overlap:
                raise InvalidInputError(f"regions in multiple scenarios: {sorted(overlap)}")
            seen_regions |= scenario.members

    def region_map(self) -> dict[str, SystemConfig]:
        """region name -> configuration, over all scenarios."""
        mapping: dict[str, SystemConfig] = {}
        for scenario in self.scenarios:
            for name in scenario.members:
                mapping[name] = scenario.config
        return mapping

    def config_for(self, region_name: str) -> SystemConfig:
        """Resolve a region, falling back to the default configuration."""
        for scenario in self.scenarios:
            if region_name in scenario.members:
                return scenario.config
        if self.default_config is None:
            raise InvalidTuningModelError(
                f"region {region_name!r} has no scenario and no default configuration"
            )
        return self.default_config
