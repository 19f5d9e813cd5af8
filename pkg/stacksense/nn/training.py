"""
Gradient descent training of layered nets: batch or sequential updates, momentum,
and the "bold driver" adaptive learning rate.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from stacksense.exceptions import Diverged
from stacksense.nn import (
    Dataset,
    Gradients,
    LayeredNet,
    batch_gradients,
    require_differentiable,
)


logger = logging.getLogger(__name__)


class TrainingMode(Enum):
    BATCH = "batch"
    SEQUENTIAL = "sequential"


@dataclass(frozen=True)
class TrainingConfig:
    """
    Parameters of :func:`train`.

    Attributes:
        rate: learning rate ``lambda``
        momentum: ``mu``, weight of the previous update added to the current one
        adaptive: enables the bold driver rate update after every generation
        rate_up: ``rho``, rate multiplier after the error decreased
        rate_down: ``sigma``, rate multiplier after the error increased
        error_threshold: training stops once the generation mean error is below it
        max_generations: training stops after this many generations regardless
        mode: ``batch`` sums the gradients of all patterns before updating,
            ``sequential`` updates after every pattern
        shuffle: sequential mode only, visit the patterns in a new random order
            every generation
        seed: seed for the shuffling
    """

    rate: float = 0.1
    momentum: float = 0.0
    adaptive: bool = False
    rate_up: float = 1.1
    rate_down: float = 0.5
    error_threshold: float = 1e-3
    max_generations: int = 1000
    mode: TrainingMode = TrainingMode.BATCH
    shuffle: bool = True
    seed: int = 0

    def validate(self) -> None:
        if not self.rate >= 0:
            raise ValueError(f"rate must be non-negative, got {self.rate}")
        if not 0.0 <= self.momentum <= 1.0:
            raise ValueError(f"momentum must be in [0, 1], got {self.momentum}")
        if not self.rate_up > 1.0 > self.rate_down > 0.0:
            raise ValueError(
                f"need rate_up > 1 > rate_down > 0, got {self.rate_up} and {self.rate_down}"
            )
        if not self.error_threshold > 0:
            raise ValueError(f"error_threshold must be positive, got {self.error_threshold}")
        if self.max_generations < 1:
            raise ValueError(f"max_generations must be positive, got {self.max_generations}")

    def serialize(self) -> dict:
        return {
            "rate": self.rate,
            "momentum": self.momentum,
            "adaptive": self.adaptive,
            "rate_up": self.rate_up,
            "rate_down": self.rate_down,
            "error_threshold": self.error_threshold,
            "max_generations": self.max_generations,
            "mode": self.mode.value,
            "shuffle": self.shuffle,
            "seed": self.seed,
        }


@dataclass
class TrainingTrace:
    """
    Attributes:
        errors: mean sum of squares error of every generation
        rates: learning rate used by every generation
        converged: the error went below the threshold before the generation cap
    """

    errors: List[float] = field(default_factory=list)
    rates: List[float] = field(default_factory=list)
    converged: bool = False

    @property
    def generations(self) -> int:
        return len(self.errors)

    @property
    def final_error(self) -> float:
        return self.errors[-1] if self.errors else math.inf

    def serialize(self) -> dict:
        return {
            "errors": list(self.errors),
            "rates": list(self.rates),
            "converged": self.converged,
        }


@dataclass(eq=False)
class TrainingResult:
    net: LayeredNet
    trace: TrainingTrace


def bold_driver(
    rate: float, previous_error: Optional[float], error: float, cfg: TrainingConfig
) -> float:
    """
    Rate for the next update: multiplied by ``rho`` if the error went down, by
    ``sigma`` if it went up, unchanged otherwise.
    """
    if previous_error is None or error == previous_error:
        return rate
    if error < previous_error:
        return rate * cfg.rate_up
    return rate * cfg.rate_down


class _Stepper:
    def __init__(self, net: LayeredNet, momentum: float) -> None:
        self.net = net
        self.momentum = momentum
        self.velocity = [np.zeros_like(w) for w in net.weights]

    def step(self, grads: Gradients, rate: float) -> None:
        for i, g in enumerate(grads.weights):
            self.velocity[i] = -rate * g + self.momentum * self.velocity[i]
            self.net.weights[i] += self.velocity[i]

    def reset(self) -> None:
        for v in self.velocity:
            v.fill(0.0)


def train(net: LayeredNet, data: Dataset, cfg: TrainingConfig) -> TrainingResult:
    """
    Trains a copy of ``net`` on ``data`` by gradient descent.

    Every generation records the mean (over patterns) of the sum of squares error.
    In batch mode it's the error of the weights the generation starts with; in
    sequential mode it's accumulated while the patterns are visited. Training stops
    when that error goes below ``cfg.error_threshold`` or after
    ``cfg.max_generations`` generations.

    With ``cfg.adaptive`` the rate follows :func:`bold_driver` and the momentum
    history is cleared whenever the error went up.

    Raises:
        Diverged: the error became NaN or infinite
    """
    cfg.validate()
    require_differentiable(net)
    if data.input_dim != net.input_dim or data.target_dim != net.output_dim:
        raise ValueError(
            f"dataset is {data.input_dim}->{data.target_dim} but net is "
            f"{net.input_dim}->{net.output_dim}"
        )
    net = net.copy()
    stepper = _Stepper(net, cfg.momentum)
    rng = np.random.default_rng(cfg.seed)
    trace = TrainingTrace()
    rate = cfg.rate
    previous: Optional[float] = None
    n = len(data)

    for generation in range(1, cfg.max_generations + 1):
        if cfg.mode is TrainingMode.BATCH:
            grads, errors = batch_gradients(net, data.inputs, data.targets)
            error = float(np.mean(errors))
            _check_finite(generation, error)
            rate = _adapt(rate, previous, error, cfg, stepper)
            trace.errors.append(error)
            trace.rates.append(rate)
            if error < cfg.error_threshold:
                trace.converged = True
                break
            stepper.step(grads, rate)
        else:
            order = rng.permutation(n) if cfg.shuffle else range(n)
            total = 0.0
            for idx in order:
                grads, e = _pattern_step(net, data.inputs[idx], data.targets[idx])
                total += e
                stepper.step(grads, rate)
            error = total / n
            _check_finite(generation, error)
            trace.errors.append(error)
            trace.rates.append(rate)
            if error < cfg.error_threshold:
                trace.converged = True
                break
            rate = _adapt(rate, previous, error, cfg, stepper)
        previous = error
        logger.debug("generation %d: error=%g rate=%g", generation, error, rate)

    logger.info(
        "trained %s for %d generations, final error %g (converged=%s)",
        net.sizes,
        trace.generations,
        trace.final_error,
        trace.converged,
    )
    return TrainingResult(net, trace)


def _pattern_step(net: LayeredNet, x: np.ndarray, t: np.ndarray) -> Tuple[Gradients, float]:
    grads, errors = batch_gradients(net, x[None, :], t[None, :])
    return grads, float(errors[0])


def _adapt(
    rate: float,
    previous: Optional[float],
    error: float,
    cfg: TrainingConfig,
    stepper: _Stepper,
) -> float:
    if not cfg.adaptive:
        return rate
    new_rate = bold_driver(rate, previous, error, cfg)
    if new_rate < rate:
        stepper.reset()
    return new_rate


def _check_finite(generation: int, error: float) -> None:
    if not math.isfinite(error):
        raise Diverged(generation, error)


@dataclass(eq=False)
class PerceptronResult:
    """
    Attributes:
        weights: ``w`` with the bias in position 0
        converged: every pattern satisfies ``w . f^n t^n > 0``
        generations: number of updates performed
        error: perceptron criterion ``sum over misclassified of -w . f^n t^n``
    """

    weights: np.ndarray
    converged: bool
    generations: int
    error: float


def perceptron_criterion(weights: np.ndarray, data: Dataset) -> Tuple[float, np.ndarray]:
    """
    Returns the perceptron criterion and the mask of misclassified patterns.
    """
    features = np.hstack((np.ones((len(data), 1)), data.inputs))
    t = data.targets[:, 0]
    score = (features @ weights) * t
    missed = score <= 0
    return float(-np.sum(score[missed])), missed


def train_perceptron(
    data: Dataset, cfg: TrainingConfig, initial: Optional[np.ndarray] = None
) -> PerceptronResult:
    """
    Single threshold unit trained on the perceptron criterion.

    Each generation adds ``rate * sum of f^n t^n`` over the misclassified patterns.
    Not converging within ``cfg.max_generations`` is reported through the
    ``converged`` flag, it isn't an error.
    """
    cfg.validate()
    if data.target_dim != 1 or not np.all(np.isin(data.targets, (-1.0, 1.0))):
        raise ValueError("perceptron targets must be a single column of -1/+1")
    features = np.hstack((np.ones((len(data), 1)), data.inputs))
    t = data.targets[:, 0]
    w = (
        np.zeros(data.input_dim + 1)
        if initial is None
        else np.array(initial, dtype=float)
    )
    if w.shape != (data.input_dim + 1,):
        raise ValueError(f"initial weights must have {data.input_dim + 1} entries")

    generations = 0
    error, missed = perceptron_criterion(w, data)
    while missed.any() and generations < cfg.max_generations:
        w = w + cfg.rate * (features[missed] * t[missed, None]).sum(axis=0)
        generations += 1
        error, missed = perceptron_criterion(w, data)
    converged = not missed.any()
    logger.debug(
        "perceptron: %d generations, converged=%s, error=%g", generations, converged, error
    )
    return PerceptronResult(w, converged, generations, error)
