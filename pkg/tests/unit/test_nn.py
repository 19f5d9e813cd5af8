from collections import Counter

import numpy as np

import pytest

from stacksense.exceptions import DimensionMismatch, NonDifferentiableActivation
from stacksense.nn import (
    Activation,
    Dataset,
    LayeredNet,
    activate,
    backprop,
    batch_gradients,
    classify,
    finite_difference_gradients,
    forward,
    forward_batch,
    rebalance_priors,
    sse_error,
    to_tanh,
)
from stacksense.nn.graph import validate_feedforward


SHAPES = [[2, 3, 2], [3, 4, 1], [2, 2, 2, 1], [4, 3, 3], [1, 5, 2]]
SMOOTH = [Activation.TANH, Activation.LOGISTIC, Activation.IDENTITY]


def random_net(seed: int) -> LayeredNet:
    rng = np.random.default_rng(seed)
    sizes = SHAPES[seed % len(SHAPES)]
    activations = [SMOOTH[int(rng.integers(2))] for _ in sizes[1:]]
    activations[-1] = SMOOTH[int(rng.integers(3))]
    return LayeredNet.random(sizes, activations, seed=seed, scale=1.0)


class Test:
    @pytest.mark.parametrize(  # type: ignore
        "kind,a,expected",
        [
            (Activation.HEAVISIDE, 1 + 1 - 1.5, 1.0),
            (Activation.HEAVISIDE, 1 + 0 - 1.5, 0.0),
            (Activation.HEAVISIDE, 0.0, 1.0),
            (Activation.HEAVISIDE_ANTISYMMETRIC, -0.1, -1.0),
            (Activation.LOGISTIC, 0.0, 0.5),
            (Activation.TANH, 0.0, 0.0),
            (Activation.IDENTITY, -3.5, -3.5),
        ],
    )
    def test_activate(self, kind: Activation, a: float, expected: float) -> None:
        assert activate(kind, a) == expected

    def test_logistic_saturates(self) -> None:
        y = Activation.LOGISTIC.apply(np.array([-1000.0, 1000.0]))
        assert np.all(np.isfinite(y))
        assert y[0] == pytest.approx(0.0)
        assert y[1] == pytest.approx(1.0)

    def test_forward_known_weights(self) -> None:
        # OR of two inputs with a threshold unit
        net = LayeredNet([np.array([[-0.5, 1.0, 1.0]])], [Activation.HEAVISIDE])
        outputs = [forward(net, x)[-1][0] for x in ([0, 0], [0, 1], [1, 0], [1, 1])]
        assert outputs == [0.0, 1.0, 1.0, 1.0]

    def test_forward_counts_multiply_adds(self) -> None:
        net = LayeredNet.random([4, 3, 2], Activation.TANH, seed=0)
        counter: Counter = Counter()
        forward(net, np.zeros(4), counter)
        assert counter["madd"] == net.weight_count == 3 * 5 + 2 * 4

    def test_forward_batch(self) -> None:
        net = random_net(3)
        x = np.random.default_rng(0).normal(size=(7, net.input_dim))
        batch = forward_batch(net, x)[-1]
        for row, y in zip(x, batch):
            assert np.allclose(forward(net, row)[-1], y)

    def test_dimension_mismatch(self) -> None:
        net = LayeredNet.random([3, 2, 1], Activation.TANH, seed=0)
        with pytest.raises(DimensionMismatch) as e:
            forward(net, [1.0, 2.0])
        assert (e.value.expected, e.value.got) == (3, 2)
        with pytest.raises(DimensionMismatch):
            backprop(net, [1.0, 2.0, 3.0], [1.0, 0.0])

    @pytest.mark.parametrize(  # type: ignore
        "weights",
        [
            [np.zeros((2, 3)), np.zeros((1, 4))],
            [np.zeros((2, 1))],
            [np.array([[np.nan, 1.0]])],
        ],
    )
    def test_invalid_weights(self, weights: list) -> None:
        with pytest.raises(ValueError):
            LayeredNet(weights, [Activation.TANH] * len(weights))

    def test_sse_error(self) -> None:
        assert sse_error([1.0, -1.0], [0.0, 1.0]) == 2.5

    @pytest.mark.parametrize("seed", range(50))  # type: ignore
    def test_backprop_matches_finite_differences(self, seed: int) -> None:
        net = random_net(seed)
        assert net.weight_count <= 40
        rng = np.random.default_rng(seed)
        x = rng.normal(size=net.input_dim)
        t = rng.uniform(-1, 1, size=net.output_dim)
        analytic = backprop(net, x, t).weights
        numeric = finite_difference_gradients(net, x, t, h=1e-5)
        scale = max(max(float(np.max(np.abs(g))) for g in analytic), 1e-8)
        for a, n in zip(analytic, numeric):
            assert float(np.max(np.abs(a - n))) / scale < 1e-6

    def test_batch_gradients_sum_patterns(self) -> None:
        net = random_net(7)
        rng = np.random.default_rng(7)
        x = rng.normal(size=(5, net.input_dim))
        t = rng.uniform(-1, 1, size=(5, net.output_dim))
        grads, errors = batch_gradients(net, x, t)
        total = backprop(net, x[0], t[0])
        for n in range(1, 5):
            total = total + backprop(net, x[n], t[n])
        for a, b in zip(grads.weights, total.weights):
            assert np.allclose(a, b)
        assert errors[2] == pytest.approx(sse_error(forward(net, x[2])[-1], t[2]))

    def test_backprop_deltas(self) -> None:
        net = LayeredNet.random([2, 3, 1], Activation.IDENTITY, seed=1)
        grads = backprop(net, [1.0, 2.0], [0.0])
        y = forward(net, [1.0, 2.0])[-1]
        assert np.allclose(grads.deltas[-1], y)

    def test_non_differentiable(self) -> None:
        net = LayeredNet.random([2, 2, 1], [Activation.HEAVISIDE, Activation.TANH], seed=0)
        with pytest.raises(NonDifferentiableActivation) as e:
            backprop(net, [0.0, 0.0], [1.0])
        assert e.value.layer == 1

    def test_classify_ties_go_low(self) -> None:
        net = LayeredNet([np.array([[0.5, 0.0], [0.5, 0.0], [0.1, 0.0]])], [Activation.IDENTITY])
        index, y = classify(net, [3.0])
        assert index == 0
        assert y.tolist() == [0.5, 0.5, 0.1]

    def test_rebalance_priors(self) -> None:
        out = rebalance_priors([0.5, 0.5], [0.5, 0.5], [0.9, 0.1])
        assert np.allclose(out, [0.9, 0.1])
        out = rebalance_priors([0.2, 0.3, 0.5], [0.2, 0.3, 0.5], [1 / 3, 1 / 3, 1 / 3])
        assert np.allclose(out, [1 / 3, 1 / 3, 1 / 3])
        assert np.allclose(rebalance_priors([0.0, 0.0], [0.5, 0.5], [0.5, 0.5]), [0.5, 0.5])
        with pytest.raises(ValueError):
            rebalance_priors([0.5, 0.5], [0.0, 1.0], [0.5, 0.5])
        with pytest.raises(DimensionMismatch):
            rebalance_priors([0.5, 0.5], [0.5, 0.5], [1.0])

    @pytest.mark.parametrize("seed", range(20))  # type: ignore
    def test_rebalance_same_priors_keeps_argmax(self, seed: int) -> None:
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 8))
        posteriors = rng.dirichlet(np.ones(k))
        priors = rng.dirichlet(np.ones(k))
        out = rebalance_priors(posteriors, priors, priors)
        assert np.argmax(out) == np.argmax(posteriors)
        assert np.allclose(out, posteriors / posteriors.sum())

    def test_to_tanh(self) -> None:
        net = LayeredNet.random(
            [3, 4, 2], [Activation.LOGISTIC, Activation.IDENTITY], seed=5, scale=2.0
        )
        converted = to_tanh(net)
        assert converted.activations == [Activation.TANH, Activation.IDENTITY]
        x = np.random.default_rng(5).normal(size=(10, 3))
        assert np.allclose(forward_batch(net, x)[-1], forward_batch(converted, x)[-1])
        with pytest.raises(ValueError):
            to_tanh(LayeredNet.random([2, 1], Activation.LOGISTIC, seed=0))

    def test_graph(self) -> None:
        net = LayeredNet.random([2, 3, 1], Activation.TANH, seed=0)
        graph = net.to_graph()
        assert graph.node_count == 1 + 2 + 3 + 1
        assert len(graph.edges) == net.weight_count
        assert validate_feedforward(graph) == list(range(graph.node_count))

    def test_serialize(self) -> None:
        net = random_net(11)
        again = LayeredNet.from_dict(net.serialize())
        assert again.activations == net.activations
        for a, b in zip(again.weights, net.weights):
            assert np.array_equal(a, b)

    def test_dataset(self) -> None:
        data = Dataset([[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]], [[1.0], [1.0], [-1.0]])
        assert (len(data), data.input_dim, data.target_dim) == (3, 2, 1)
        sub = data.subset([2, 0])
        assert sub.targets[:, 0].tolist() == [-1.0, 1.0]
        with pytest.raises(ValueError):
            Dataset([[0.0], [1.0]], [[1.0]])
