"""
Layered feed-forward perceptron networks.

A net with layer sizes ``d_0 .. d_m`` holds one weight matrix per layer. The matrix of
layer ``i`` has shape ``d_i x (d_{i-1} + 1)`` and its column 0 is the bias, i.e., the
weight against a constant input ``z_0 = +1``.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from stacksense.exceptions import DimensionMismatch, NonDifferentiableActivation
from stacksense.nn.graph import NetGraph


logger = logging.getLogger(__name__)

ArrayLike = Union[Sequence[float], np.ndarray]


class Activation(Enum):
    LOGISTIC = "logistic"
    TANH = "tanh"
    HEAVISIDE = "heaviside"
    HEAVISIDE_ANTISYMMETRIC = "heaviside-antisymmetric"
    IDENTITY = "identity"

    @property
    def differentiable(self) -> bool:
        return self not in (Activation.HEAVISIDE, Activation.HEAVISIDE_ANTISYMMETRIC)

    def apply(self, a: np.ndarray) -> np.ndarray:
        if self is Activation.LOGISTIC:
            # split by sign so exp never overflows
            out = np.empty_like(a, dtype=float)
            pos = a >= 0
            out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
            e = np.exp(a[~pos])
            out[~pos] = e / (1.0 + e)
            return out
        if self is Activation.TANH:
            return np.tanh(a)
        if self is Activation.HEAVISIDE:
            return np.where(a >= 0, 1.0, 0.0)
        if self is Activation.HEAVISIDE_ANTISYMMETRIC:
            return np.where(a >= 0, 1.0, -1.0)
        return np.asarray(a, dtype=float).copy()

    def derivative(self, z: np.ndarray) -> np.ndarray:
        """
        g'(a) expressed through the unit's output ``z = g(a)``.
        """
        if self is Activation.LOGISTIC:
            return z * (1.0 - z)
        if self is Activation.TANH:
            return 1.0 - z * z
        if self is Activation.IDENTITY:
            return np.ones_like(z)
        raise ValueError(f"{self.value} has no derivative")


def activate(kind: Activation, a: float) -> float:
    """
    Applies the activation ``kind`` to a single real value.

    Example:

        AND gate built with a threshold unit::

            >>> activate(Activation.HEAVISIDE, 1 + 1 - 1.5)
            1.0
    """
    return float(kind.apply(np.array([a], dtype=float))[0])


@dataclass(eq=False)
class LayeredNet:
    """
    Weights, biases and activations of a layered perceptron network.

    Attributes:
        weights: one matrix per layer, shape ``d_i x (d_{i-1} + 1)``, bias in column 0
        activations: one activation per layer
    """

    weights: List[np.ndarray]
    activations: List[Activation]

    def __post_init__(self) -> None:
        if not self.weights:
            raise ValueError("a net needs at least one layer")
        if len(self.weights) != len(self.activations):
            raise ValueError(
                f"{len(self.weights)} weight matrices but {len(self.activations)} activations"
            )
        self.weights = [np.array(w, dtype=float) for w in self.weights]
        for i, w in enumerate(self.weights):
            if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 2:
                raise ValueError(f"layer {i + 1}: bad weight shape {w.shape}")
            if i and w.shape[1] != self.weights[i - 1].shape[0] + 1:
                raise ValueError(
                    f"layer {i + 1}: expects {w.shape[1] - 1} inputs but "
                    f"layer {i} has {self.weights[i - 1].shape[0]} units"
                )
            if not np.all(np.isfinite(w)):
                raise ValueError(f"layer {i + 1}: weights must be finite")

    @classmethod
    def random(
        cls,
        sizes: Sequence[int],
        activations: Union[Activation, Sequence[Activation]],
        seed: Union[int, Sequence[int]],
        scale: float = 0.5,
    ) -> "LayeredNet":
        """
        Build a net with weights drawn uniformly in ``[-scale, scale]``.

        Arguments:
            sizes: layer sizes ``d_0 .. d_m``
            activations: one activation for every layer or one per layer
            seed: seed for :func:`numpy.random.default_rng`
        """
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if isinstance(activations, Activation):
            activations = [activations] * (len(sizes) - 1)
        rng = np.random.default_rng(seed)
        weights = [
            rng.uniform(-scale, scale, size=(sizes[i], sizes[i - 1] + 1))
            for i in range(1, len(sizes))
        ]
        return cls(weights, list(activations))

    @property
    def sizes(self) -> List[int]:
        return [self.weights[0].shape[1] - 1] + [w.shape[0] for w in self.weights]

    @property
    def input_dim(self) -> int:
        return self.sizes[0]

    @property
    def output_dim(self) -> int:
        return self.sizes[-1]

    @property
    def weight_count(self) -> int:
        return sum(w.size for w in self.weights)

    def copy(self) -> "LayeredNet":
        return LayeredNet([w.copy() for w in self.weights], list(self.activations))

    def to_graph(self) -> NetGraph:
        """
        Graph of the net: node 0 is the bias unit, then the units layer by layer.
        """
        offsets = [1]
        for size in self.sizes:
            offsets.append(offsets[-1] + size)
        edges = set()
        for i in range(1, len(self.sizes)):
            for k in range(self.sizes[i]):
                target = offsets[i] + k
                edges.add((0, target))
                for j in range(self.sizes[i - 1]):
                    edges.add((offsets[i - 1] + j, target))
        return NetGraph(offsets[-1], frozenset(edges))

    def serialize(self) -> dict:
        return {
            "activations": [a.value for a in self.activations],
            "weights": [w.tolist() for w in self.weights],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LayeredNet":
        return cls(
            [np.array(w, dtype=float) for w in data["weights"]],
            [Activation(a) for a in data["activations"]],
        )


@dataclass(eq=False)
class Dataset:
    """
    Patterns ``(x^n, t^n)`` stored as two matrices with one row per pattern.
    """

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if self.inputs.shape[0] < 1:
            raise ValueError("a dataset needs at least one pattern")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError(
                f"{self.inputs.shape[0]} inputs but {self.targets.shape[0]} targets"
            )

    def __len__(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.inputs.shape[1])

    @property
    def target_dim(self) -> int:
        return int(self.targets.shape[1])

    def patterns(self) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        for x, t in zip(self.inputs, self.targets):
            yield x, t

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.inputs[idx], self.targets[idx])


@dataclass(eq=False)
class Gradients:
    """
    Derivatives of the error with respect to every weight.

    Attributes:
        weights: one matrix per layer, same shapes as :obj:`LayeredNet.weights`
        deltas: ``dE/da_k`` for every unit, one vector per layer (one matrix
            with a row per pattern when computed in batch)
    """

    weights: List[np.ndarray]
    deltas: List[np.ndarray] = field(default_factory=list)

    def __add__(self, other: "Gradients") -> "Gradients":
        return Gradients([a + b for a, b in zip(self.weights, other.weights)])

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(w))) for w in self.weights)


def _check_dim(what: str, expected: int, got: int) -> None:
    if expected != got:
        raise DimensionMismatch(what, expected, got)


def _with_bias(z: np.ndarray) -> np.ndarray:
    if z.ndim == 1:
        return np.concatenate(([1.0], z))
    return np.hstack((np.ones((z.shape[0], 1)), z))


def forward(
    net: LayeredNet, x: ArrayLike, counter: Optional[Counter] = None
) -> List[np.ndarray]:
    """
    Propagates ``x`` through the net.

    Returns:
        the outputs ``z`` of every layer, ``z[0]`` being ``x`` itself and ``z[-1]``
        the output of the net

    Arguments:
        counter: if given, ``counter["madd"]`` is incremented by the number of
            multiply-adds performed, which equals :obj:`LayeredNet.weight_count`
    """
    z = np.atleast_1d(np.asarray(x, dtype=float))
    if z.ndim != 1:
        raise ValueError("forward takes a single pattern, use forward_batch")
    _check_dim("forward input", net.input_dim, z.size)
    out = [z]
    for w, g in zip(net.weights, net.activations):
        a = w @ _with_bias(out[-1])
        if counter is not None:
            counter["madd"] += w.size
        out.append(g.apply(a))
    return out


def forward_batch(net: LayeredNet, inputs: np.ndarray) -> List[np.ndarray]:
    """
    Same as :func:`forward` for a matrix with one pattern per row.
    """
    z = np.atleast_2d(np.asarray(inputs, dtype=float))
    _check_dim("forward input", net.input_dim, z.shape[1])
    out = [z]
    for w, g in zip(net.weights, net.activations):
        out.append(g.apply(_with_bias(out[-1]) @ w.T))
    return out


def sse_error(y: ArrayLike, t: ArrayLike) -> float:
    """
    Sum of squares error ``1/2 * ||y - t||^2``.
    """
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    _check_dim("target", y.size, t.size)
    return 0.5 * float(np.sum((y - t) ** 2))


def require_differentiable(net: LayeredNet) -> None:
    """
    Raises:
        NonDifferentiableActivation: a layer of ``net`` can't be trained by backprop
    """
    for i, g in enumerate(net.activations):
        if not g.differentiable:
            raise NonDifferentiableActivation(i + 1, g.value)


def backprop(net: LayeredNet, x: ArrayLike, t: ArrayLike) -> Gradients:
    """
    Derivatives of the sum of squares error for the pattern ``(x, t)``.

    Output deltas are ``(y_k - t_k) g'(a_k)``, hidden deltas follow
    ``delta_k = g'(a_k) sum_m w_mk delta_m`` and ``dE/dw_ki = delta_k z_i``.
    """
    require_differentiable(net)
    z = forward(net, x)
    t = np.asarray(t, dtype=float)
    _check_dim("target", net.output_dim, t.size)

    m = len(net.weights)
    deltas: List[np.ndarray] = [np.empty(0)] * m
    grads: List[np.ndarray] = [np.empty(0)] * m
    delta = (z[-1] - t) * net.activations[-1].derivative(z[-1])
    for i in reversed(range(m)):
        deltas[i] = delta
        grads[i] = np.outer(delta, _with_bias(z[i]))
        if i:
            delta = net.activations[i - 1].derivative(z[i]) * (net.weights[i][:, 1:].T @ delta)
    return Gradients(grads, deltas)


def batch_gradients(
    net: LayeredNet, inputs: np.ndarray, targets: np.ndarray
) -> Tuple[Gradients, np.ndarray]:
    """
    Gradients summed over all the patterns, computed in matrix form.

    Returns:
        the summed gradients and the per-pattern sum of squares errors
    """
    require_differentiable(net)
    z = forward_batch(net, inputs)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    _check_dim("target", net.output_dim, targets.shape[1])

    m = len(net.weights)
    deltas: List[np.ndarray] = [np.empty(0)] * m
    grads: List[np.ndarray] = [np.empty(0)] * m
    diff = z[-1] - targets
    errors = 0.5 * np.sum(diff * diff, axis=1)
    delta = diff * net.activations[-1].derivative(z[-1])
    for i in reversed(range(m)):
        deltas[i] = delta
        grads[i] = delta.T @ _with_bias(z[i])
        if i:
            delta = net.activations[i - 1].derivative(z[i]) * (delta @ net.weights[i][:, 1:])
    return Gradients(grads, deltas), errors


def finite_difference_gradients(
    net: LayeredNet, x: ArrayLike, t: ArrayLike, h: float = 1e-5
) -> List[np.ndarray]:
    """
    Central differences ``(E(w + h) - E(w - h)) / 2h`` for every weight.
    """
    probe = net.copy()
    out = []
    for w in probe.weights:
        g = np.zeros_like(w)
        for idx in np.ndindex(*w.shape):
            orig = w[idx]
            w[idx] = orig + h
            up = sse_error(forward(probe, x)[-1], t)
            w[idx] = orig - h
            down = sse_error(forward(probe, x)[-1], t)
            w[idx] = orig
            g[idx] = (up - down) / (2 * h)
        out.append(g)
    return out


def classify(net: LayeredNet, x: ArrayLike) -> Tuple[int, np.ndarray]:
    """
    Index of the largest output, ties going to the lowest index, and the outputs.
    """
    y = forward(net, x)[-1]
    return int(np.argmax(y)), y


def rebalance_priors(
    posteriors: ArrayLike, train_priors: ArrayLike, deploy_priors: ArrayLike
) -> np.ndarray:
    """
    Compensates posteriors learnt under ``train_priors`` for a population with
    ``deploy_priors``: ``out_k ~ p_k * deploy_k / train_k``, normalized to sum 1.
    """
    p = np.asarray(posteriors, dtype=float)
    train = np.asarray(train_priors, dtype=float)
    deploy = np.asarray(deploy_priors, dtype=float)
    _check_dim("train priors", p.size, train.size)
    _check_dim("deploy priors", p.size, deploy.size)
    if np.any(train <= 0):
        raise ValueError("training priors must be strictly positive")
    if np.any(deploy <= 0):
        raise ValueError("deployment priors must be strictly positive")
    if np.any(p < 0):
        raise ValueError("posteriors must be non-negative")
    out = p * deploy / train
    total = out.sum()
    if total == 0:
        return np.full(p.size, 1.0 / p.size)
    return out / total


def to_tanh(net: LayeredNet) -> LayeredNet:
    """
    Equivalent net where every logistic hidden layer uses tanh.

    Uses ``logistic(a) = (1 + tanh(a / 2)) / 2``: the layer's weights are halved and
    the next layer absorbs the affine change in its bias and weights.
    """
    if net.activations[-1] is Activation.LOGISTIC:
        raise ValueError("only hidden layers can be converted, the output layer is logistic")
    out = net.copy()
    for i, g in enumerate(net.activations[:-1]):
        if g is not Activation.LOGISTIC:
            continue
        out.weights[i] = out.weights[i] / 2.0
        out.activations[i] = Activation.TANH
        nxt = out.weights[i + 1]
        nxt[:, 0] = nxt[:, 0] + nxt[:, 1:].sum(axis=1) / 2.0
        nxt[:, 1:] = nxt[:, 1:] / 2.0
    return out


__all__ = (
    "Activation",
    "Dataset",
    "Gradients",
    "LayeredNet",
    "activate",
    "backprop",
    "batch_gradients",
    "classify",
    "finite_difference_gradients",
    "forward",
    "forward_batch",
    "rebalance_priors",
    "require_differentiable",
    "sse_error",
    "to_tanh",
)
