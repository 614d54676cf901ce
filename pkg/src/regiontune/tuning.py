"""The four-step region tuning workflow.

Step 0 detects significant regions from profiles. Step 1 sweeps OpenMP
thread counts exhaustively at fixed frequencies. Step 2 predicts the
global core/uncore frequency pair with the energy model (one analysis run
collects the phase counter rates) and verifies the immediate neighborhood
per region. Step 3 groups regions with identical best configurations into
scenarios and emits the tuning model.

The measurement provider contract: `measure(config, pmc_request=False)`
returns a phase observation carrying the phase sample and per-region
energy/time breakdowns. Experiments are driven sequentially; everything
else here is pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

from .domain import (
    CALIBRATION_CORE_FREQ,
    CALIBRATION_UNCORE_FREQ,
    FrequencyGrid,
    PmcVector,
    RegionProfile,
    Scenario,
    SystemConfig,
    TuningModel,
    to_deci,
)
from .errors import InvalidInputError, MeasurementError
from .features import normalize_counters
from .network import EnergyModel, predict_surface

SIGNIFICANT_REGION_THRESHOLD = 0.100  # seconds of mean execution time


class MeasurementProvider(Protocol):
    def measure(self, config: SystemConfig, pmc_request: bool = ...):
        """Run one phase experiment and report energies (see simulator)."""


@dataclass(frozen=True)
class ThreadSweepSpec:
    """Thread-count candidates: lower_bound, +step, ..., up to the core count."""

    lower_bound: int
    step: int
    upper_bound: int

    def __post_init__(self):
        if self.lower_bound < 1 or self.lower_bound > self.upper_bound:
            raise InvalidInputError("need 1 <= lower_bound <= upper_bound")
        if self.step < 1:
            raise InvalidInputError("step must be >= 1")

    def candidates(self) -> tuple[int, ...]:
        return tuple(range(self.lower_bound, self.upper_bound + 1, self.step))


@dataclass(frozen=True)
class TuningTimeEstimate:
    """Tuning cost of exhaustive search vs. the model-driven workflow.

    n regions, k thread candidates, an l-by-m frequency grid and t seconds
    per run: exhaustive needs one run per region and parameter point; the
    model-driven path needs the thread sweep, one analysis run and the
    nine neighborhood-verification runs.
    """

    exhaustive: float
    model_based: float
    n: int
    k: int
    l: int
    m: int
    t: float


def detect_significant_regions(
    profiles: list[RegionProfile], threshold: float = SIGNIFICANT_REGION_THRESHOLD
) -> list[str]:
    """Regions whose mean execution time exceeds the threshold, sorted by name."""
    return sorted(p.region_name for p in profiles if p.mean_exec_time > threshold)


def tune_threads(
    measure: MeasurementProvider,
    sweep: ThreadSweepSpec,
    fixed_cf: float = CALIBRATION_CORE_FREQ,
    fixed_ucf: float = CALIBRATION_UNCORE_FREQ,
) -> tuple[int, dict[int, float]]:
    """Exhaustive thread sweep at fixed frequencies, minimizing phase energy.

    Returns the best candidate (ties toward fewer threads) and every
    candidate's measured phase energy.
    """
    energies: dict[int, float] = {}
    for threads in sweep.candidates():
        try:
            observation = measure.measure(SystemConfig(threads, fixed_cf, fixed_ucf))
        except Exception as exc:
            raise MeasurementError(f"thread sweep failed at {threads} threads") from exc
        energies[threads] = observation.sample.node_energy
    best = min(energies, key=lambda threads: (energies[threads], threads))
    return best, energies


def predict_global_frequencies(
    model: EnergyModel, phase_pmc: PmcVector, grid: FrequencyGrid
) -> tuple[float, float]:
    """The (cf, ucf) pair with minimum predicted energy.

    Ties break toward lower core, then lower uncore frequency.
    """
    surface = predict_surface(model, phase_pmc, grid)
    best_point = None
    best_value = None
    for point in grid.pairs():  # ascending (cf, ucf): first strict minimum wins
        value = surface[point]
        if best_value is None or value < best_value:
            best_point, best_value = point, value
    return best_point


def neighborhood(center: tuple[float, float], grid: FrequencyGrid) -> list[tuple[float, float]]:
    """The 3x3 frequency neighborhood of a lattice point, clipped to the grid."""
    cf, ucf = center
    if not grid.contains(cf, ucf):
        raise InvalidInputError(f"center ({cf}, {ucf}) is not on the grid")
    cf_deci, ucf_deci = to_deci(cf), to_deci(ucf)
    cf_step = to_deci(grid.cf_step)
    ucf_step = to_deci(grid.ucf_step)
    pairs = []
    for dc in (-cf_step, 0, cf_step):
        for du in (-ucf_step, 0, ucf_step):
            candidate = ((cf_deci + dc) / 10, (ucf_deci + du) / 10)
            if grid.contains(*candidate):
                pairs.append(candidate)
    return sorted(pairs)


def tune_regions(
    measure: MeasurementProvider,
    significant: list[str],
    candidates: list[tuple[float, float]],
    threads: int,
) -> dict[str, SystemConfig]:
    """Verify frequency candidates per region; one phase run per candidate.

    Every candidate run measures all significant regions at once, so the
    cost stays proportional to the candidate count, not the region count.
    """
    if not candidates:
        raise InvalidInputError("need at least one frequency candidate")
    best: dict[str, tuple[float, SystemConfig]] = {}
    for cf, ucf in sorted(candidates):
        config = SystemConfig(threads, cf, ucf)
        try:
            observation = measure.measure(config)
        except Exception as exc:
            raise MeasurementError(f"verification failed at {cf}|{ucf} GHz") from exc
        for region in significant:
            if region not in observation.region_energies:
                raise MeasurementError(f"candidate {cf}|{ucf} GHz reported no energy for {region!r}")
            energy = observation.region_energies[region]
            if region not in best or energy < best[region][0]:
                best[region] = (energy, config)
    return {region: config for region, (_, config) in best.items()}


def generate_tuning_model(
    region_configs: dict[str, SystemConfig], default: SystemConfig
) -> TuningModel:
    """Group regions with identical configurations into scenarios.

    Scenario order is deterministic: ascending by configuration. An empty
    region map yields a model with no scenarios and only the default.
    """
    groups: dict[SystemConfig, set[str]] = {}
    for region, config in region_configs.items():
        groups.setdefault(config, set()).add(region)
    scenarios = tuple(
        Scenario(config=config, members=frozenset(groups[config]))
        for config in sorted(groups)
    )
    return TuningModel(scenarios=scenarios, default_config=default)


def estimate_tuning_time(n: int, k: int, l: int, m: int, t: float) -> TuningTimeEstimate:
    """Tuning-time comparison: n*k*l*m runs exhaustively vs. k + 1 + 9 runs."""
    if min(n, k, l, m) < 1:
        raise InvalidInputError("counts must be >= 1")
    if t <= 0:
        raise InvalidInputError("per-run time must be positive")
    return TuningTimeEstimate(
        exhaustive=float(n * k * l * m) * t,
        model_based=float(k + 1 + 9) * t,
        n=n, k=k, l=l, m=m, t=t,
    )


class _CachingProvider:
    """Deduplicates identical experiment requests within one workflow run."""

    def __init__(self, inner: MeasurementProvider):
        self.inner = inner
        self.cache: dict[tuple[SystemConfig, bool], object] = {}

    def measure(self, config: SystemConfig, pmc_request: bool = False):
        key = (config, pmc_request)
        if key not in self.cache:
            self.cache[key] = self.inner.measure(config, pmc_request=pmc_request)
        return self.cache[key]


@dataclass
class TuningOutcome:
    """Everything the tuning workflow produced, step by step."""

    significant: list[str]
    best_threads: int
    thread_energies: dict[int, float]
    phase_rates: PmcVector
    predicted: tuple[float, float]
    candidates: list[tuple[float, float]]
    candidate_phase_energies: dict[tuple[float, float], float]
    region_configs: dict[str, SystemConfig]
    tuning_model: TuningModel
    time_estimate: TuningTimeEstimate


def tune_application(
    measure: MeasurementProvider,
    profiles: list[RegionProfile],
    model: EnergyModel,
    grid: FrequencyGrid,
    sweep: ThreadSweepSpec,
    threshold: float = SIGNIFICANT_REGION_THRESHOLD,
) -> TuningOutcome:
    """Run the full workflow against one application.

    The tuning model's default configuration is the verified phase
    optimum: best thread count plus the neighborhood candidate with
    minimum phase energy.
    """
    significant = detect_significant_regions(profiles, threshold)

    best_threads, thread_energies = tune_threads(measure, sweep)

    # The +1 analysis run: phase counters at the calibration frequencies.
    analysis_config = SystemConfig(best_threads, CALIBRATION_CORE_FREQ, CALIBRATION_UNCORE_FREQ)
    observation = measure.measure(analysis_config, pmc_request=True)
    phase_rates = normalize_counters(observation.sample.counters, observation.sample.duration)

    predicted = predict_global_frequencies(model, phase_rates, grid)
    candidates = neighborhood(predicted, grid)

    phase_energies: dict[tuple[float, float], float] = {}
    region_configs: dict[str, SystemConfig] = {}
    if significant:
        caching = _CachingProvider(measure)
        region_configs = tune_regions(caching, significant, candidates, best_threads)
        for cf, ucf in candidates:
            cached = caching.cache[(SystemConfig(best_threads, cf, ucf), False)]
            phase_energies[(cf, ucf)] = cached.sample.node_energy
        phase_best = min(sorted(phase_energies), key=lambda p: (phase_energies[p], p))
    else:
        phase_best = predicted
    default = SystemConfig(best_threads, *phase_best)

    tuning_model = generate_tuning_model(region_configs, default)
    phase_time = observation.sample.duration
    estimate = estimate_tuning_time(
        n=max(len(significant), 1),
        k=len(sweep.candidates()),
        l=len(grid.cf_values()),
        m=len(grid.ucf_values()),
        t=phase_time,
    )
    return TuningOutcome(
        significant=significant,
        best_threads=best_threads,
        thread_energies=thread_energies,
        phase_rates=phase_rates,
        predicted=predicted,
        candidates=candidates,
        candidate_phase_energies=phase_energies,
        region_configs=region_configs,
        tuning_model=tuning_model,
        time_estimate=estimate,
    )
