"""The 9-5-5-1 feed-forward energy model.

Inputs are the 7 counter rates measured at the calibration configuration
plus a candidate core and uncore frequency; the output is predicted
normalized energy. Training is plain stochastic gradient descent with
Adam (batch size 1, per-epoch shuffling), mean squared error loss, ReLU
hidden units and a linear output. Everything is implemented directly so
gradients, initialization and update rules are fully specified.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .domain import FrequencyGrid, PmcVector
from .errors import InvalidInputError
from .features import Standardizer, fit_standardizer
from .rng import CounterStream, derive_key

LAYER_SIZES = (9, 5, 5, 1)


@dataclass(eq=False)
class NetworkParams:
    """Weights and biases of the fixed 9-5-5-1 architecture."""

    w1: np.ndarray  # (5, 9)
    b1: np.ndarray  # (5,)
    w2: np.ndarray  # (5, 5)
    b2: np.ndarray  # (5,)
    w3: np.ndarray  # (1, 5)
    b3: np.ndarray  # (1,)

    _SHAPES = {"w1": (5, 9), "b1": (5,), "w2": (5, 5), "b2": (5,), "w3": (1, 5), "b3": (1,)}

    def __post_init__(self):
        for name, shape in self._SHAPES.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise InvalidInputError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} contains non-finite values")
            setattr(self, name, arr)

    def items(self) -> list[tuple[str, np.ndarray]]:
        return [(name, getattr(self, name)) for name in self._SHAPES]

    def copy(self) -> "NetworkParams":
        return NetworkParams(**{name: arr.copy() for name, arr in self.items()})

    @classmethod
    def zeros(cls) -> "NetworkParams":
        return cls(**{name: np.zeros(shape) for name, shape in cls._SHAPES.items()})


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int
    seed: int = 0
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidInputError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise InvalidInputError("learning_rate must be positive")


def init_params(seed: int) -> NetworkParams:
    """He initialization: N(0, 1) scaled by sqrt(2 / fan_in), zero biases.

    Draws come from the counter-based Gaussian sampler, so the same seed
    always produces bitwise-identical parameters.
    """
    stream = CounterStream(derive_key(seed, "he-init"))
    params = NetworkParams.zeros()
    for name, fan_in in (("w1", 9), ("w2", 5), ("w3", 5)):
        shape = NetworkParams._SHAPES[name]
        draws = stream.normals(int(np.prod(shape)))
        setattr(params, name, draws.reshape(shape) * np.sqrt(2.0 / fan_in))
    return params


def _forward_cached(params: NetworkParams, x: np.ndarray):
    """Batch forward pass keeping pre-activations for backprop."""
    z1 = x @ params.w1.T + params.b1
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ params.w2.T + params.b2
    h2 = np.maximum(z2, 0.0)
    y = h2 @ params.w3.T + params.b3
    return y[:, 0], z1, h1, z2, h2


def forward(params: NetworkParams, x) -> float:
    """Network output for one standardized 9-feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (LAYER_SIZES[0],):
        raise InvalidInputError(f"expected a {LAYER_SIZES[0]}-vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("input contains non-finite values")
    y, *_ = _forward_cached(params, x[None, :])
    return float(y[0])


def forward_batch(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Network outputs for a batch of standardized feature rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != LAYER_SIZES[0]:
        raise InvalidInputError(f"expected (n, {LAYER_SIZES[0]}) input, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("input contains non-finite values")
    return _forward_cached(params, x)[0]


def loss_and_gradients(
    params: NetworkParams, x: np.ndarray, targets: np.ndarray
) -> tuple[float, NetworkParams]:
    """Mean squared error over a batch and its exact backprop gradients."""
    x = np.asarray(x, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidInputError("batch must be a nonempty (n, 9) matrix")
    if targets.shape != (x.shape[0],):
        raise InvalidInputError("targets must align with the batch rows")

    y, z1, h1, z2, h2 = _forward_cached(params, x)
    resid = y - targets
    mse = float(np.mean(resid**2))

    dy = 2.0 * resid / x.shape[0]
    dw3 = (dy @ h2)[None, :]
    db3 = np.array([dy.sum()])
    dz2 = np.outer(dy, params.w3[0]) * (z2 > 0)
    dw2 = dz2.T @ h1
    db2 = dz2.sum(axis=0)
    dz1 = (dz2 @ params.w2) * (z1 > 0)
    dw1 = dz1.T @ x
    db1 = dz1.sum(axis=0)
    grads = NetworkParams(w1=dw1, b1=db1, w2=dw2, b2=db2, w3=dw3, b3=db3)
    return mse, grads


@dataclass(eq=False)
class AdamState:
    """First and second moment estimates, one pair per parameter array."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def zeros(cls) -> "AdamState":
        shapes = NetworkParams._SHAPES
        return cls(
            m={name: np.zeros(shape) for name, shape in shapes.items()},
            v={name: np.zeros(shape) for name, shape in shapes.items()},
        )


def adam_step(
    params: NetworkParams,
    grads: NetworkParams,
    state: AdamState,
    step_index: int,
    cfg: TrainingConfig,
) -> tuple[NetworkParams, AdamState]:
    """One bias-corrected Adam update; returns fresh params and moments."""
    if step_index < 1:
        raise InvalidInputError("step_index starts at 1")
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name, value in params.items():
        g = getattr(grads, name)
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * g**2
        m_hat = m / (1.0 - b1**step_index)
        v_hat = v / (1.0 - b2**step_index)
        new_params[name] = value - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        new_m[name] = m
        new_v[name] = v
    return NetworkParams(**new_params), AdamState(m=new_m, v=new_v)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Training rows: raw 9-feature vectors and their E_norm targets."""

    features: np.ndarray  # (n, 9)
    targets: np.ndarray  # (n,)

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != LAYER_SIZES[0]:
            raise InvalidInputError(f"features must be (n, {LAYER_SIZES[0]})")
        if targets.shape != (features.shape[0],):
            raise InvalidInputError("targets must align with feature rows")
        if features.shape[0] == 0:
            raise InvalidInputError("dataset must be nonempty")
        if not (np.all(np.isfinite(features)) and np.all(np.isfinite(targets))):
            raise InvalidInputError("dataset contains non-finite values")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)

    def __len__(self) -> int:
        return self.features.shape[0]


def concat_datasets(datasets: list[Dataset]) -> Dataset:
    return Dataset(
        features=np.concatenate([d.features for d in datasets]),
        targets=np.concatenate([d.targets for d in datasets]),
    )


@dataclass(eq=False)
class EnergyModel:
    """A trained network plus the standardizer its inputs go through."""

    params: NetworkParams
    standardizer: Standardizer
    config: TrainingConfig
    epoch_mse: tuple[float, ...] = ()

    def predict(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        return forward_batch(self.params, self.standardizer.apply(features))


def train(dataset: Dataset, cfg: TrainingConfig) -> EnergyModel:
    """Fit the standardizer, then run per-sample Adam for cfg.epochs passes.

    Sample order reshuffles every epoch from the seed, so a (seed, dataset)
    pair always yields the same parameter trajectory.
    """
    standardizer = fit_standardizer(dataset.features)
    x = standardizer.apply(dataset.features)
    targets = dataset.targets

    params = init_params(cfg.seed)
    state = AdamState.zeros()
    shuffle = CounterStream(derive_key(cfg.seed, "epoch-shuffle"))
    step = 0
    epoch_mse = []
    for _ in range(cfg.epochs):
        order = shuffle.permutation(len(dataset))
        losses = np.empty(len(order))
        for pos, i in enumerate(order):
            step += 1
            mse, grads = loss_and_gradients(params, x[i : i + 1], targets[i : i + 1])
            params, state = adam_step(params, grads, state, step, cfg)
            losses[pos] = mse
        epoch_mse.append(float(losses.mean()))
    return EnergyModel(
        params=params, standardizer=standardizer, config=cfg, epoch_mse=tuple(epoch_mse)
    )


def mape(predictions, targets) -> float:
    """Mean absolute percentage error, in percent."""
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape or predictions.ndim != 1 or predictions.size == 0:
        raise InvalidInputError("predictions and targets must be equal-length nonempty vectors")
    if np.any(targets == 0):
        raise InvalidInputError("targets must be nonzero")
    return float(100.0 * np.mean(np.abs(predictions - targets) / np.abs(targets)))


@dataclass(frozen=True)
class EvalReport:
    per_benchmark_mape: dict[str, float]
    mean_mape: float


def loocv(benchmark_datasets: dict[str, Dataset], cfg: TrainingConfig) -> EvalReport:
    """Leave-one-benchmark-out cross validation.

    Each fold trains on the remaining benchmarks and reports MAPE on the
    held-out one across all of its frequency states. Folds depend only on
    their own inputs, so results are independent of evaluation order.
    """
    if len(benchmark_datasets) < 2:
        raise InvalidInputError("LOOCV needs at least 2 benchmarks")
    names = sorted(benchmark_datasets)
    per_benchmark: dict[str, float] = {}
    for held_out in names:
        rest = concat_datasets([benchmark_datasets[n] for n in names if n != held_out])
        model = train(rest, cfg)
        predictions = model.predict(benchmark_datasets[held_out].features)
        per_benchmark[held_out] = mape(predictions, benchmark_datasets[held_out].targets)
    mean = float(np.mean(list(per_benchmark.values())))
    return EvalReport(per_benchmark_mape=per_benchmark, mean_mape=mean)


def predict_surface(
    model: EnergyModel, pmc_at_calibration: PmcVector, grid: FrequencyGrid
) -> dict[tuple[float, float], float]:
    """Predicted E_norm at every (cf, ucf) lattice point.

    The counter rates are fixed (they reflect the application, not the
    frequencies); only the two frequency features vary across the grid.
    """
    if not pmc_at_calibration.normalized:
        raise InvalidInputError("predict_surface needs counter rates, not raw counts")
    rates = pmc_at_calibration.as_array()
    points = list(grid.pairs())
    x = np.empty((len(points), LAYER_SIZES[0]))
    x[:, :7] = rates
    x[:, 7] = [cf for cf, _ in points]
    x[:, 8] = [ucf for _, ucf in points]
    predictions = model.predict(x)
    if np.any(predictions <= 0):
        warnings.warn("predicted energy surface has non-positive values", stacklevel=2)
    return {point: float(pred) for point, pred in zip(points, predictions)}
