"""Deterministic compute-node simulator.

Stands in for the instrumented node, its energy monitor and the runtime
config switcher: synthesizes per-region energy across (threads, core
frequency, uncore frequency), injects node-to-node power variability,
measurement delay and frequency-transition latencies, and executes
static or tuning-model-driven runs.

The energy surrogate is parametric, not cycle-accurate. Region time
splits into a compute share scaled by 1/cf and a memory share scaled by
1/ucf (the boundedness fraction interpolates between the two), divided
by a thread-scaling power law. Node power is a static floor plus a cubic
core term, a quadratic uncore term and a linear thread term. Per-node
variability is a proportional gain sized in watts at the calibration
point, so energy normalization cancels it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .domain import (
    CALIBRATION_CORE_FREQ,
    CALIBRATION_THREADS,
    CALIBRATION_UNCORE_FREQ,
    DEFAULT_SYSTEM_CONFIG,
    FrequencyGrid,
    PhaseSample,
    PmcVector,
    RegionProfile,
    SystemConfig,
    TuningModel,
)
from .errors import InvalidInputError
from .rng import derive_key, normals

# Counter-signature rates (counts/second at the calibration point) as a
# function of boundedness. Memory-bound regions stall more and hit the L2
# data cache harder; compute-bound regions issue more loads and stores.
_SIGNATURE_RATES = {
    "br_ntk": (4.5e8, -1.5e8),
    "ld_ins": (1.8e9, -1.2e9),
    "l2_icr": (5.0e7, 4.0e7),
    "br_msp": (3.0e7, 1.5e7),
    "res_stl": (3.0e8, 2.0e9),
    "sr_ins": (9.0e8, -6.0e8),
    "l2_dcr": (8.0e7, 9.0e8),
}


@dataclass(frozen=True)
class RegionArchetype:
    """A synthetic program region with a fixed performance character.

    boundedness 0 is fully compute-bound (time follows 1/cf), 1 is fully
    memory-bound (time follows 1/ucf). base_work is the region's duration
    at the calibration configuration. thread_scaling is the parallel
    efficiency exponent: time divides by (threads/24)^thread_scaling.
    """

    name: str
    boundedness: float
    base_work: float
    thread_scaling: float
    counter_signature: PmcVector

    def __post_init__(self):
        if not 0.0 <= self.boundedness <= 1.0:
            raise InvalidInputError(f"boundedness must be in [0, 1], got {self.boundedness!r}")
        if self.base_work <= 0:
            raise InvalidInputError("base_work must be positive")
        if not 0.0 < self.thread_scaling <= 1.0:
            raise InvalidInputError("thread_scaling must be in (0, 1]")
        if not self.counter_signature.normalized:
            raise InvalidInputError("counter_signature must hold rates (normalized=True)")


def make_archetype(
    name: str, boundedness: float, base_work: float = 0.2, thread_scaling: float = 0.85
) -> RegionArchetype:
    """Build an archetype with a counter signature consistent with its
    boundedness: stall and L2-data-read rates rise with it, load and store
    rates fall."""
    signature = PmcVector(
        **{k: base + slope * boundedness for k, (base, slope) in _SIGNATURE_RATES.items()},
        normalized=True,
    )
    return RegionArchetype(
        name=name,
        boundedness=boundedness,
        base_work=base_work,
        thread_scaling=thread_scaling,
        counter_signature=signature,
    )


@dataclass(frozen=True)
class NodeModel:
    """One simulated compute node: power model, variability and latencies."""

    node_id: str = "node0"
    cores: int = 24
    power_offset: float = 0.0  # watts at the calibration point, applied as a gain
    noise_sigma: float = 0.005  # relative multiplicative noise on energy
    cf_transition: float = 21e-6  # seconds per core-frequency change
    ucf_transition: float = 20e-6  # seconds per uncore-frequency change
    measurement_delay: float = 5e-3  # seconds of energy-window extension
    seed: int = 0
    static_power: float = 60.0  # watts
    core_power_coeff: float = 3.6  # watts / GHz^3
    uncore_power_coeff: float = 5.5  # watts / GHz^2
    thread_power_coeff: float = 2.0  # watts / thread
    platform_power: float = 25.0  # watts of non-CPU blade power

    def base_power(self, config: SystemConfig) -> float:
        """Node power before per-node variability, in watts."""
        return (
            self.static_power
            + self.core_power_coeff * config.core_freq**3
            + self.uncore_power_coeff * config.uncore_freq**2
            + self.thread_power_coeff * config.omp_threads
        )

    @property
    def power_gain(self) -> float:
        calibration = SystemConfig(
            CALIBRATION_THREADS, CALIBRATION_CORE_FREQ, CALIBRATION_UNCORE_FREQ
        )
        return 1.0 + self.power_offset / self.base_power(calibration)

    def power(self, config: SystemConfig) -> float:
        """Node power including this node's variability gain, in watts."""
        return self.base_power(config) * self.power_gain


@dataclass(frozen=True)
class RegionUsage:
    energy: float
    time: float
    entries: int


@dataclass(frozen=True)
class RunReport:
    """Totals of one application run on the simulated node."""

    job_energy: float
    cpu_energy: float
    wall_time: float
    per_region: dict[str, RegionUsage]
    switch_count: int
    switch_overhead_time: float


App = Sequence[tuple[RegionArchetype, int]]


def _check_config(config: SystemConfig) -> None:
    if config.omp_threads < 1 or config.core_freq <= 0 or config.uncore_freq <= 0:
        raise InvalidInputError(f"invalid configuration {config}")


def _check_app(app: App) -> None:
    names = [archetype.name for archetype, _ in app]
    if len(set(names)) != len(names):
        raise InvalidInputError("app region names must be unique")
    for archetype, iterations in app:
        if iterations < 1:
            raise InvalidInputError(f"region {archetype.name!r} needs iterations >= 1")


def ground_truth_energy(
    archetype: RegionArchetype, node: NodeModel, config: SystemConfig
) -> tuple[float, float]:
    """(energy in joules, time in seconds) for one region entry.

    Deterministic given (node.seed, archetype, config): the noise draw is
    keyed by the inputs, not by call order.
    """
    _check_config(config)
    mu = archetype.boundedness
    share = (1.0 - mu) * (CALIBRATION_CORE_FREQ / config.core_freq)
    share += mu * (CALIBRATION_UNCORE_FREQ / config.uncore_freq)
    time = archetype.base_work * share
    time /= (config.omp_threads / CALIBRATION_THREADS) ** archetype.thread_scaling
    power = node.power(config)
    noise = 0.0
    if node.noise_sigma > 0:
        key = derive_key(
            node.seed, "energy-noise", archetype.name,
            config.omp_threads, config.core_freq, config.uncore_freq,
        )
        noise = node.noise_sigma * float(normals(key, 0, 1)[0])
    return power * time * (1.0 + noise), time


def region_counters(archetype: RegionArchetype) -> PmcVector:
    """Raw counts for one region entry.

    Counts reflect the work done, so they are independent of frequency and
    thread count: signature rates times the calibration-point duration.
    """
    return PmcVector.from_array(
        archetype.counter_signature.as_array() * archetype.base_work, normalized=False
    )


def run_static(app: App, node: NodeModel, config: SystemConfig) -> RunReport:
    """Execute every region iteration at one fixed configuration."""
    _check_config(config)
    _check_app(app)
    per_region: dict[str, RegionUsage] = {}
    job_energy = 0.0
    wall_time = 0.0
    for archetype, iterations in app:
        energy, time = ground_truth_energy(archetype, node, config)
        per_region[archetype.name] = RegionUsage(
            energy=energy * iterations, time=time * iterations, entries=iterations
        )
        job_energy += energy * iterations
        wall_time += time * iterations
    return RunReport(
        job_energy=job_energy,
        cpu_energy=job_energy - node.platform_power * wall_time,
        wall_time=wall_time,
        per_region=per_region,
        switch_count=0,
        switch_overhead_time=0.0,
    )


def _entry_sequence(app: App) -> Iterable[RegionArchetype]:
    """Region entries in phase-loop order: iteration-major, app order within."""
    if not app:
        return
    for i in range(max(iterations for _, iterations in app)):
        for archetype, iterations in app:
            if i < iterations:
                yield archetype


def run_dynamic(app: App, node: NodeModel, tuning_model: TuningModel) -> RunReport:
    """Execute the app switching configuration per region entry.

    Each region runs at its scenario's configuration (or the tuning
    model's default). A config change at a region entry counts as one
    switch and charges the core/uncore transition latencies, at the power
    of the configuration being left. The initial configuration is applied
    before the measured run starts and is free.
    """
    _check_app(app)
    region_config = {
        archetype.name: tuning_model.config_for(archetype.name) for archetype, _ in app
    }
    for config in region_config.values():
        _check_config(config)

    cache: dict[str, tuple[float, float]] = {}
    usage = {a.name: [0.0, 0.0, 0] for a, _ in app}
    job_energy = 0.0
    wall_time = 0.0
    switch_count = 0
    switch_time = 0.0
    current: Optional[SystemConfig] = None
    for archetype in _entry_sequence(app):
        target = region_config[archetype.name]
        if current is not None and target != current:
            latency = 0.0
            if target.core_freq != current.core_freq:
                latency += node.cf_transition
            if target.uncore_freq != current.uncore_freq:
                latency += node.ucf_transition
            switch_count += 1
            switch_time += latency
            wall_time += latency
            job_energy += latency * node.power(current)
        current = target
        if archetype.name not in cache:
            cache[archetype.name] = ground_truth_energy(archetype, node, target)
        energy, time = cache[archetype.name]
        entry = usage[archetype.name]
        entry[0] += energy
        entry[1] += time
        entry[2] += 1
        job_energy += energy
        wall_time += time
    return RunReport(
        job_energy=job_energy,
        cpu_energy=job_energy - node.platform_power * wall_time,
        wall_time=wall_time,
        per_region={name: RegionUsage(*vals) for name, vals in usage.items()},
        switch_count=switch_count,
        switch_overhead_time=switch_time,
    )


@dataclass(frozen=True)
class Savings:
    """Percent improvements of a tuned run over a baseline (negative time
    percent means slowdown)."""

    job_pct: float
    cpu_pct: float
    time_pct: float


def compute_savings(baseline: RunReport, tuned: RunReport) -> Savings:
    if baseline.job_energy <= 0 or baseline.cpu_energy <= 0 or baseline.wall_time <= 0:
        raise InvalidInputError("baseline run has zero totals")
    return Savings(
        job_pct=100.0 * (baseline.job_energy - tuned.job_energy) / baseline.job_energy,
        cpu_pct=100.0 * (baseline.cpu_energy - tuned.cpu_energy) / baseline.cpu_energy,
        time_pct=100.0 * (baseline.wall_time - tuned.wall_time) / baseline.wall_time,
    )


def measure_phase(
    app: App, node: NodeModel, config: SystemConfig, pmc_request: bool = False
) -> PhaseSample:
    """One phase iteration: every region entered once.

    The reported energy includes the monitor's window extension (one
    measurement delay at the phase boundary, charged at node power).
    Counters are included only when requested.
    """
    _check_config(config)
    _check_app(app)
    if not app:
        raise InvalidInputError("cannot measure an empty app")
    duration = 0.0
    energy = 0.0
    counter_totals = np.zeros(7)
    for archetype, _ in app:
        region_energy, region_time = ground_truth_energy(archetype, node, config)
        duration += region_time
        energy += region_energy
        if pmc_request:
            counter_totals += region_counters(archetype).as_array()
    energy += node.measurement_delay * node.power(config)
    counters = PmcVector.from_array(counter_totals) if pmc_request else None
    return PhaseSample(
        config=config,
        duration=duration,
        node_energy=energy,
        counters=counters,
        node_id=node.node_id,
    )


@dataclass(frozen=True)
class PhaseObservation:
    """A phase measurement plus its per-region breakdown; what the tuning
    engine's measurement provider returns."""

    sample: PhaseSample
    region_energies: dict[str, float]
    region_times: dict[str, float]


class NodeExperiment:
    """Measurement provider bound to one (app, node) pair.

    Experiments run one at a time on the simulated node; the run counter
    feeds tuning-time accounting.
    """

    def __init__(self, app: App, node: NodeModel):
        _check_app(app)
        if not app:
            raise InvalidInputError("cannot run experiments on an empty app")
        self.app = list(app)
        self.node = node
        self.runs = 0

    def measure(self, config: SystemConfig, pmc_request: bool = False) -> PhaseObservation:
        self.runs += 1
        sample = measure_phase(self.app, self.node, config, pmc_request=pmc_request)
        energies: dict[str, float] = {}
        times: dict[str, float] = {}
        for archetype, _ in self.app:
            energy, time = ground_truth_energy(archetype, self.node, config)
            energies[archetype.name] = energy
            times[archetype.name] = time
        return PhaseObservation(sample=sample, region_energies=energies, region_times=times)


def profile_regions(app: App, node: NodeModel, config: SystemConfig) -> list[RegionProfile]:
    """Per-region profile of one run at a fixed configuration."""
    _check_config(config)
    _check_app(app)
    profiles = []
    for archetype, iterations in app:
        energy, time = ground_truth_energy(archetype, node, config)
        sample = PhaseSample(
            config=config,
            duration=time,
            node_energy=energy,
            counters=region_counters(archetype),
            node_id=node.node_id,
        )
        profiles.append(
            RegionProfile(
                region_name=archetype.name,
                call_count=iterations,
                mean_exec_time=time,
                samples=(sample,),
            )
        )
    return profiles


def grid_sweep(
    app: App, node: NodeModel, grid: FrequencyGrid, threads: int = CALIBRATION_THREADS
) -> list[PhaseSample]:
    """Phase measurements (with counters) at every grid point, fixed threads."""
    return [
        measure_phase(app, node, SystemConfig(threads, cf, ucf), pmc_request=True)
        for cf, ucf in grid.pairs()
    ]


def exhaustive_static_search(
    app: App, node: NodeModel, grid: FrequencyGrid, thread_candidates: Sequence[int]
) -> tuple[SystemConfig, RunReport]:
    """Brute-force best static configuration by job energy.

    Ties break toward fewer threads, then lower core and uncore frequency.
    """
    if not thread_candidates:
        raise InvalidInputError("need at least one thread candidate")
    best: Optional[tuple[SystemConfig, RunReport]] = None
    for threads in sorted(set(thread_candidates)):
        for cf, ucf in grid.pairs():
            config = SystemConfig(threads, cf, ucf)
            report = run_static(app, node, config)
            if best is None or report.job_energy < best[1].job_energy:
                best = (config, report)
    return best
