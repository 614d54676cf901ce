"""Feature pipeline: energy/counter normalization, standardization and
VIF-based counter selection.

The model's target is E_norm, a run's node energy divided by the same
node's energy at the calibration point (2.0 GHz core, 1.5 GHz uncore).
Counter values become rates by dividing by the phase duration. The nine
model features (7 counter rates + core + uncore frequency) are centered
and scaled to unit variance with statistics fitted on the training set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import (
    CALIBRATION_CORE_FREQ,
    CALIBRATION_UNCORE_FREQ,
    COUNTER_NAMES,
    PmcVector,
)
from .errors import (
    CollinearFeatureError,
    DegenerateFeatureError,
    InvalidCalibrationError,
    InvalidInputError,
    InvalidSampleError,
)

# Model feature order: the 7 counter rates then the two frequencies.
FEATURE_NAMES = COUNTER_NAMES + ("core_freq", "uncore_freq")
NUM_FEATURES = len(FEATURE_NAMES)

# Ridge added to normal-equation diagonals for numerical safety.
OLS_RIDGE = 1e-12

# R^2 at or above this means perfect collinearity.
COLLINEAR_R2 = 1.0 - 1e-12


@dataclass(frozen=True)
class CalibrationPoint:
    """Reference measurement a run's energies are normalized against."""

    reference_energy: float
    core_freq: float = CALIBRATION_CORE_FREQ
    uncore_freq: float = CALIBRATION_UNCORE_FREQ


def normalize_energy(energy: float, cal: CalibrationPoint) -> float:
    """Energy relative to the calibration-point energy of the same node."""
    if not cal.reference_energy > 0:
        raise InvalidCalibrationError(
            f"reference energy must be positive, got {cal.reference_energy!r}"
        )
    return energy / cal.reference_energy


def normalize_counters(raw: PmcVector, phase_duration: float) -> PmcVector:
    """Convert raw counts to rates over one phase iteration."""
    if raw.normalized:
        raise InvalidSampleError("counters are already normalized to rates")
    if not phase_duration > 0:
        raise InvalidSampleError(f"phase duration must be positive, got {phase_duration!r}")
    return PmcVector.from_array(raw.as_array() / phase_duration, normalized=True)


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-feature centering and scaling, fitted on a training matrix."""

    means: np.ndarray
    scales: np.ndarray

    def apply(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        return (features - self.means) / self.scales


def fit_standardizer(features: np.ndarray) -> Standardizer:
    """Fit means and population standard deviations column-wise.

    Rejects constant columns by name: a zero-variance feature carries no
    information and would make scaling ill-defined.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 2:
        raise InvalidInputError("need a 2-D matrix with at least 2 rows")
    means = features.mean(axis=0)
    scales = features.std(axis=0)
    for j, scale in enumerate(scales):
        if scale <= 0:
            name = FEATURE_NAMES[j] if features.shape[1] == NUM_FEATURES else f"column {j}"
            raise DegenerateFeatureError(f"feature {name} is constant in the training set")
    return Standardizer(means=means, scales=scales)


def _centered_r_squared(regressors: np.ndarray, response: np.ndarray) -> float:
    """R^2 of response on regressors with an intercept.

    Both sides are centered, which folds the intercept away; the normal
    equations carry a small ridge so near-singular systems stay solvable.
    """
    y = response - response.mean()
    sst = float(y @ y)
    if sst <= 0:
        raise CollinearFeatureError("response column is constant")
    x = regressors - regressors.mean(axis=0)
    gram = x.T @ x + OLS_RIDGE * np.eye(x.shape[1])
    beta = np.linalg.solve(gram, x.T @ y)
    resid = y - x @ beta
    r2 = 1.0 - float(resid @ resid) / sst
    return min(r2, 1.0)


def compute_vif(features: np.ndarray, target_column: int) -> float:
    """Variance inflation factor of one column against the others.

    Regresses the column on its peers (ordinary least squares with an
    intercept) and returns 1/(1 - R^2).
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] < 2:
        raise InvalidInputError("need at least 2 feature columns")
    if features.shape[0] < features.shape[1] + 1:
        raise InvalidInputError(
            f"need at least {features.shape[1] + 1} rows, got {features.shape[0]}"
        )
    if not 0 <= target_column < features.shape[1]:
        raise InvalidInputError(f"target_column {target_column} out of range")
    others = np.delete(features, target_column, axis=1)
    r2 = _centered_r_squared(others, features[:, target_column])
    if r2 >= COLLINEAR_R2:
        raise CollinearFeatureError(
            f"column {target_column} is perfectly explained by the others (R^2 = {r2!r})"
        )
    return 1.0 / (1.0 - r2)


def _mean_vif(columns: np.ndarray) -> float:
    """Mean VIF across a selected set; a single column has no peers (1.0)."""
    if columns.shape[1] < 2:
        return 1.0
    return float(np.mean([compute_vif(columns, j) for j in range(columns.shape[1])]))


def _adjusted_r_squared(r2: float, n_rows: int, n_predictors: int) -> float:
    denom = n_rows - n_predictors - 1
    if denom <= 0:
        return -np.inf
    return 1.0 - (1.0 - r2) * (n_rows - 1) / denom


def select_counters(
    candidates: np.ndarray,
    target: np.ndarray,
    vif_limit: float = 10.0,
    min_improvement: float = 1e-3,
) -> list[int]:
    """Forward stepwise counter selection against the target variable.

    Each step adds the candidate that most improves the adjusted R^2 of an
    OLS fit, provided the selected set keeps mean VIF at or below
    `vif_limit`; selection stops once the best improvement drops below
    `min_improvement`. Returns column indices in selection order.
    """
    candidates = np.asarray(candidates, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if candidates.ndim != 2 or candidates.shape[1] == 0:
        raise InvalidInputError("candidate set must be a nonempty 2-D matrix")
    if candidates.shape[0] != target.shape[0]:
        raise InvalidInputError("candidate rows must align with the target vector")

    n_rows = candidates.shape[0]
    selected: list[int] = []
    best_adj = 0.0  # adjusted R^2 of the empty (intercept-only) model

    while len(selected) < candidates.shape[1]:
        step_best: tuple[float, int] | None = None
        for j in range(candidates.shape[1]):
            if j in selected:
                continue
            trial = candidates[:, selected + [j]]
            try:
                if _mean_vif(trial) > vif_limit:
                    continue
                r2 = _centered_r_squared(trial, target)
            except CollinearFeatureError:
                continue
            adj = _adjusted_r_squared(r2, n_rows, trial.shape[1])
            if step_best is None or adj > step_best[0]:
                step_best = (adj, j)
        if step_best is None or step_best[0] - best_adj < min_improvement:
            break
        best_adj = step_best[0]
        selected.append(step_best[1])
    return selected
