"""
Numerics Tests — Primitives, Reverse Pass, Gradient Checker, Adam
==================================================================
Hand-computed values for every primitive, naive loop oracles, central-
difference checks of each primitive in isolation, and the Adam recurrence.

Run:
  pytest tests/test_numerics.py -v
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from errors import InputError, ShapeError, UsageError
from numerics import (
    AdamState,
    DiffGraph,
    Tensor,
    adam_step,
    backward,
    grad_check,
    lr_at_epoch,
    ops,
)

SEEDS = range(10)


def _weighted(out: Tensor, R: np.ndarray) -> Tensor:
    """Σ out ⊙ R, a scalar whose gradient is R pushed through the op."""
    return ops.sum(ops.mul(out, R))


# ═══════════════════════════════════════════════════════════════════════
# Forward values
# ═══════════════════════════════════════════════════════════════════════


class TestMatmul:

    def test_identity_left(self, rng):
        """I₃ · B → B."""
        B = rng.standard_normal((3, 3))
        assert np.array_equal(ops.matmul(np.eye(3), B).data, B)

    def test_hand_arithmetic(self):
        """[[1,2],[3,4]]·[[1],[1]] → [[3],[7]]."""
        out = ops.matmul([[1.0, 2.0], [3.0, 4.0]], [[1.0], [1.0]])
        assert out.data.tolist() == [[3.0], [7.0]]

    def test_triple_loop_oracle(self, rng):
        """random 5×4 · 4×3 → naive triple loop to 1e-12."""
        A, B = rng.standard_normal((5, 4)), rng.standard_normal((4, 3))
        expected = np.zeros((5, 3))
        for i in range(5):
            for j in range(3):
                for k in range(4):
                    expected[i, j] += A[i, k] * B[k, j]
        assert np.allclose(ops.matmul(A, B).data, expected, atol=1e-12, rtol=0)

    def test_shape_mismatch_rejected(self):
        """2×3 · 2×3 → ShapeError."""
        with pytest.raises(ShapeError):
            ops.matmul(np.ones((2, 3)), np.ones((2, 3)))


class TestSigmoid:

    def test_zero_is_half(self):
        """0 → 0.5."""
        assert ops.sigmoid(0.0).item() == 0.5

    def test_saturation_stays_bounded(self):
        """σ(40) lies within float64 resolution of 1 and never exceeds it."""
        value = ops.sigmoid(40.0).item()
        assert 1.0 - 1e-15 <= value <= 1.0

    def test_one(self):
        """σ(1) → 0.7310585786…"""
        assert math.isclose(ops.sigmoid(1.0).item(), 1.0 / (1.0 + math.exp(-1.0)), rel_tol=0, abs_tol=1e-15)
        assert abs(ops.sigmoid(1.0).item() - 0.7310585786) < 1e-10

    def test_large_negative_is_finite(self):
        """σ(−1000) → 0, finite."""
        value = ops.sigmoid(-1000.0).item()
        assert math.isfinite(value) and value == 0.0

    @given(st.floats(min_value=-30.0, max_value=30.0))
    @settings(max_examples=200, deadline=None)
    def test_open_unit_interval(self, x):
        """|x| ≤ 30 → 0 < σ(x) < 1."""
        value = ops.sigmoid(x).item()
        assert 0.0 < value < 1.0


class TestSoftmax:

    def test_equal_pair(self):
        """row [0,0] → [0.5,0.5]."""
        assert ops.softmax([[0.0, 0.0]]).data.tolist() == [[0.5, 0.5]]

    def test_equal_triple(self):
        """row [a,a,a] → thirds."""
        assert np.allclose(ops.softmax([[2.5, 2.5, 2.5]]).data, 1.0 / 3.0, atol=1e-15)

    def test_shift_invariance(self):
        """row [1000,1001] → finite ≈ [0.2689,0.7311]."""
        out = ops.softmax([[1000.0, 1001.0]]).data
        assert np.all(np.isfinite(out))
        assert np.allclose(out, ops.softmax([[0.0, 1.0]]).data, atol=1e-15)
        assert np.allclose(out, [[0.2689414213699951, 0.7310585786300049]], atol=1e-12)

    @given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(2, 5)), elements=st.floats(-50, 50)))
    @settings(max_examples=100, deadline=None)
    def test_rows_sum_to_one(self, logits):
        """any logits → every row sums to 1 ± 1e-12, entries in [0, 1]."""
        out = ops.softmax(logits).data
        assert np.allclose(out.sum(axis=1), 1.0, atol=1e-12)
        assert np.all((out >= 0.0) & (out <= 1.0))


class TestCrossEntropy:

    def test_perfect_one_hot(self):
        """perfect rows, all selected → ≈ 0."""
        probs = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
        loss = ops.cross_entropy(probs, [0, 1, 0], [1.0, 1.0, 1.0]).item()
        assert 0.0 <= loss <= 3 * math.log(1.0 / (1.0 - 1e-12)) + 1e-15

    def test_uniform_rows(self):
        """n uniform rows → n·ln 2."""
        probs = np.full((6, 2), 0.5)
        loss = ops.cross_entropy(probs, [0, 1, 0, 1, 1, 0]).item()
        assert math.isclose(loss, 6 * math.log(2.0), rel_tol=1e-14)

    def test_empty_selector(self):
        """selector zero everywhere → 0."""
        probs = np.full((4, 2), 0.5)
        assert ops.cross_entropy(probs, [0, 1, 1, 0], np.zeros(4)).item() == 0.0

    def test_zero_probability_is_clamped(self):
        """p = 0 on the label → −log(1e-12), finite."""
        loss = ops.cross_entropy([[1.0, 0.0]], [1]).item()
        assert math.isclose(loss, -math.log(ops.LOG_CLAMP), rel_tol=1e-14)

    def test_label_out_of_range(self):
        """label 2 with 2 classes → InputError."""
        with pytest.raises(InputError):
            ops.cross_entropy([[0.5, 0.5]], [2])


class TestConv2d:

    def test_identity_kernel(self, rng):
        """1×1 identity kernel → input unchanged."""
        x = rng.standard_normal((5, 6, 3))
        kernel = np.eye(3).reshape(1, 1, 3, 3)
        assert np.array_equal(ops.conv2d(x, kernel).data, x)

    def test_impulse_plateau(self):
        """3×3 ones kernel on an impulse → 3×3 plateau of ones."""
        x = np.zeros((7, 7, 1))
        x[3, 3, 0] = 1.0
        out = ops.conv2d(x, np.ones((3, 3, 1, 1))).data[:, :, 0]
        expected = np.zeros((7, 7))
        expected[2:5, 2:5] = 1.0
        assert np.array_equal(out, expected)

    def test_naive_loop_oracle(self, rng):
        """random 6×6×2, 3×3×2×3 kernel → six-loop oracle to 1e-12."""
        x, kernel = rng.standard_normal((6, 6, 2)), rng.standard_normal((3, 3, 2, 3))
        padded = np.pad(x, ((1, 1), (1, 1), (0, 0)))
        expected = np.zeros((6, 6, 3))
        for r in range(6):
            for c in range(6):
                for o in range(3):
                    for i in range(3):
                        for j in range(3):
                            for ch in range(2):
                                expected[r, c, o] += padded[r + i, c + j, ch] * kernel[i, j, ch, o]
        assert np.allclose(ops.conv2d(x, kernel).data, expected, atol=1e-12, rtol=0)

    def test_stride_two_halves(self, rng):
        """8×8 input, stride 2, same padding → 4×4."""
        out = ops.conv2d(rng.standard_normal((8, 8, 1)), rng.standard_normal((3, 3, 1, 2)), stride=2)
        assert out.shape == (4, 4, 2)

    def test_channel_mismatch(self):
        """kernel cin 2 on a 1-channel map → ShapeError."""
        with pytest.raises(ShapeError):
            ops.conv2d(np.zeros((4, 4, 1)), np.zeros((3, 3, 2, 1)))


class TestUpsampleAndConcat:

    def test_single_value(self):
        """1×1 map v → 2×2 of v."""
        assert np.array_equal(ops.upsample2x(np.full((1, 1, 1), 3.5)).data, np.full((2, 2, 1), 3.5))

    def test_block_replication(self):
        """[[a,b],[c,d]] → 2×2 blocks."""
        x = np.array([[1.0, 2.0], [3.0, 4.0]])[:, :, None]
        expected = np.array([[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]], dtype=float)
        assert np.array_equal(ops.upsample2x(x).data[:, :, 0], expected)

    def test_upsample_then_pick_is_identity(self, rng):
        """upsample, then keep every second pixel from the top-left → original."""
        x = rng.standard_normal((3, 5, 2))
        assert np.array_equal(ops.upsample2x(x).data[::2, ::2], x)

    def test_single_part_unchanged(self, rng):
        """one part → the same tensor."""
        x = Tensor(rng.standard_normal((2, 2, 3)))
        assert ops.concat_channels([x]) is x

    def test_shape_law_and_slice_back(self, rng):
        """(h×w×d1)⊕(h×w×d2) → h×w×(d1+d2); first d1 channels recover part 1 bit-exactly."""
        a, b = rng.standard_normal((4, 3, 2)), rng.standard_normal((4, 3, 5))
        joined = ops.concat_channels([a, b])
        assert joined.shape == (4, 3, 7)
        assert np.array_equal(ops.slice_channels(joined, 0, 2).data, a)
        assert np.array_equal(ops.slice_channels(joined, 2, 7).data, b)

    def test_spatial_mismatch(self):
        """4×4 with 4×3 → ShapeError."""
        with pytest.raises(ShapeError):
            ops.concat_channels([np.zeros((4, 4, 1)), np.zeros((4, 3, 1))])


# ═══════════════════════════════════════════════════════════════════════
# Reverse pass
# ═══════════════════════════════════════════════════════════════════════


class TestBackward:

    def test_sum_of_squares(self, rng):
        """loss = Σx² → gradient 2x."""
        value = rng.standard_normal((3, 4))
        graph = DiffGraph()
        x = graph.parameter("x", value)
        grads = backward(graph, ops.sum(ops.mul(x, x)))
        assert np.allclose(grads["x"], 2.0 * value, atol=1e-15)

    def test_unused_parameter_gets_exact_zero(self):
        """loss independent of p → grad(p) == 0 exactly."""
        graph = DiffGraph()
        x = graph.parameter("x", np.ones(3))
        graph.parameter("p", np.full((2, 2), 7.0))
        grads = backward(graph, ops.sum(x))
        assert np.array_equal(grads["p"], np.zeros((2, 2)))

    def test_fan_out_accumulates(self):
        """loss = x·x + 3x at x = 2 → 2x + 3 = 7."""
        graph = DiffGraph()
        x = graph.parameter("x", 2.0)
        loss = ops.add(ops.mul(x, x), ops.mul(x, 3.0))
        assert float(backward(graph, loss)["x"]) == pytest.approx(7.0, abs=1e-15)

    def test_replay_reproduces_loss(self, rng):
        """replay of the recorded tape → the original loss bit-exactly."""
        graph = DiffGraph()
        W = graph.parameter("W", rng.standard_normal((3, 3)))
        loss = ops.sum(ops.sigmoid(ops.matmul(W, rng.standard_normal((3, 2)))))
        assert graph.replay(loss) == loss.data

    def test_gradient_of_sum_is_sum_of_gradients(self, rng):
        """grad(L1 + L2) = grad L1 + grad L2 for every parameter."""
        W0 = rng.standard_normal((3, 4))
        b0 = rng.standard_normal((4, 2))
        A = rng.standard_normal((4, 2))

        def losses(graph):
            W = graph.parameter("W", W0)
            b = graph.parameter("b", b0)
            first = ops.sum(ops.sigmoid(ops.matmul(W, ops.add(A, b))))
            second = ops.sum(ops.power(ops.matmul(W, b), 2.0))
            return first, second

        g1, g2, g12 = DiffGraph(), DiffGraph(), DiffGraph()
        grads1 = backward(g1, losses(g1)[0])
        grads2 = backward(g2, losses(g2)[1])
        grads12 = backward(g12, ops.add(*losses(g12)))
        for name in ("W", "b"):
            assert np.allclose(grads12[name], grads1[name] + grads2[name], rtol=1e-12, atol=1e-12)

    def test_repeated_runs_are_bitwise_identical(self, rng):
        """same inputs twice → the same gradient bits."""
        W0 = rng.standard_normal((4, 4))
        X = rng.standard_normal((4, 3))

        def run():
            graph = DiffGraph()
            W = graph.parameter("W", W0)
            loss = ops.sum(ops.sigmoid(ops.matmul(ops.transpose(W), ops.relu(ops.matmul(W, X)))))
            return backward(graph, ops.mul(loss, loss))["W"]

        assert np.array_equal(run(), run())

    def test_non_scalar_loss_rejected(self):
        """vector loss → UsageError."""
        graph = DiffGraph()
        x = graph.parameter("x", np.ones(3))
        with pytest.raises(UsageError):
            backward(graph, ops.mul(x, 2.0))

    def test_duplicate_parameter_rejected(self):
        """same name twice → UsageError."""
        graph = DiffGraph()
        graph.parameter("x", 1.0)
        with pytest.raises(UsageError):
            graph.parameter("x", 2.0)

    def test_mixing_graphs_rejected(self):
        """tensors from two graphs in one op → UsageError."""
        a = DiffGraph().parameter("a", 1.0)
        b = DiffGraph().parameter("b", 1.0)
        with pytest.raises(UsageError):
            ops.add(a, b)


class TestGradCheck:

    def test_linear_function(self):
        """f(x) = 3x → relative error ≤ 1e-10."""
        error = grad_check(lambda p: ops.sum(ops.mul(p["x"], 3.0)), {"x": np.array([0.7, -1.3, 2.0])})
        assert error <= 1e-10

    def test_sigmoid_at_zero(self):
        """f(x) = σ(x) at 0 → analytic 0.25 vs numeric, error ≤ 1e-9."""
        graph = DiffGraph()
        x = graph.parameter("x", np.zeros(1))
        assert backward(graph, ops.sum(ops.sigmoid(x)))["x"][0] == 0.25
        assert grad_check(lambda p: ops.sum(ops.sigmoid(p["x"])), {"x": np.zeros(1)}) <= 1e-9

    def test_frozen_parameter_not_checked(self):
        """a closed-over constant is not registered → no error from it."""
        frozen = np.array([1.0, 2.0])
        error = grad_check(lambda p: ops.sum(ops.mul(p["x"], frozen)), {"x": np.array([0.5, 0.25])})
        assert error <= 1e-10

    def test_sampled_entries(self, rng):
        """max_entries smaller than the parameter → still a valid (small) error."""
        R = rng.uniform(1.0, 2.0, size=(6, 6))
        error = grad_check(
            lambda p: _weighted(ops.sigmoid(p["x"]), R), {"x": rng.uniform(-1, 1, (6, 6))}, max_entries=5
        )
        assert error <= 1e-6

    def test_non_positive_eps(self):
        """eps 0 → InputError."""
        with pytest.raises(InputError):
            grad_check(lambda p: ops.sum(p["x"]), {"x": np.ones(2)}, eps=0.0)


# ═══════════════════════════════════════════════════════════════════════
# Per-primitive gradient checks (10 seeds, isolation bound 1e-6)
# ═══════════════════════════════════════════════════════════════════════


def _pos(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return rng.uniform(0.5, 1.5, size=shape)


def _signed(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return rng.uniform(0.5, 1.5, size=shape) * rng.choice([-1.0, 1.0], size=shape)


def _case(name: str, rng: np.random.Generator):
    """(forward, params) for one primitive; inputs keep gradients away from zero."""
    if name == "matmul":
        R = _pos(rng, 3, 2)
        return lambda p: _weighted(ops.matmul(p["a"], p["b"]), R), {"a": _pos(rng, 3, 4), "b": _pos(rng, 4, 2)}
    if name == "mul":
        R = _pos(rng, 4)
        return lambda p: _weighted(ops.mul(p["a"], p["b"]), R), {"a": _pos(rng, 4), "b": _pos(rng, 4)}
    if name == "sub":
        R = _pos(rng, 2, 3)
        return lambda p: _weighted(ops.sub(p["a"], p["b"]), R), {"a": _pos(rng, 2, 3), "b": _pos(rng, 1, 3)}
    if name == "power":
        R = _pos(rng, 5)
        return lambda p: _weighted(ops.power(p["x"], -0.5), R), {"x": _pos(rng, 5)}
    if name == "sigmoid":
        R = _pos(rng, 3, 3)
        return lambda p: _weighted(ops.sigmoid(p["x"]), R), {"x": rng.uniform(-2, 2, (3, 3))}
    if name == "relu":
        R = _pos(rng, 3, 3)
        return lambda p: _weighted(ops.relu(p["x"]), R), {"x": _signed(rng, 3, 3)}
    if name == "softmax":
        R = np.tile([1.0, 3.0], (4, 1))
        return lambda p: _weighted(ops.softmax(p["x"]), R), {"x": rng.uniform(-1, 1, (4, 2))}
    if name == "cross_entropy":
        labels, weights = rng.integers(0, 3, 5), np.array([1.0, 0.0, 1.0, 1.0, 1.0])
        return lambda p: ops.cross_entropy(p["probs"], labels, weights), {"probs": rng.uniform(0.2, 0.9, (5, 3))}
    if name == "conv2d":
        R = _pos(rng, 3, 3, 2)
        return (
            lambda p: _weighted(ops.conv2d(p["x"], p["k"], stride=2), R),
            {"x": _pos(rng, 6, 6, 2), "k": _pos(rng, 3, 3, 2, 2)},
        )
    if name == "upsample2x":
        R = _pos(rng, 4, 6, 2)
        return lambda p: _weighted(ops.upsample2x(p["x"]), R), {"x": _signed(rng, 2, 3, 2)}
    if name == "concat":
        R = _pos(rng, 2, 2, 3)
        return (
            lambda p: _weighted(ops.concat_channels([p["a"], p["b"]]), R),
            {"a": _signed(rng, 2, 2, 1), "b": _signed(rng, 2, 2, 2)},
        )
    if name == "gather_segment":
        index = np.array([0, 2, 2, 1, 0])
        segments = np.array([1, 0, 1, 1, 0])
        R = _pos(rng, 2)
        return (
            lambda p: _weighted(ops.segment_sum(ops.sum(ops.gather_rows(p["x"], index), axis=1), segments, 2), R),
            {"x": _signed(rng, 3, 2)},
        )
    if name == "spmm":
        indptr, indices = np.array([0, 2, 3, 5]), np.array([0, 2, 1, 0, 1])
        rows = np.repeat(np.arange(3), np.diff(indptr))
        R = _pos(rng, 3, 2)
        return (
            lambda p: _weighted(ops.spmm(p["v"], p["x"], indptr, indices, rows), R),
            {"v": _pos(rng, 5), "x": _pos(rng, 3, 2)},
        )
    if name == "convex_blend":
        h = _signed(rng, 4)
        x = h + _signed(rng, 4)
        R = _pos(rng, 4)
        return (
            lambda p: _weighted(ops.convex_blend(p["z"], p["x"], p["h"]), R),
            {"z": rng.uniform(0.2, 0.8, 4), "x": x, "h": h},
        )
    if name == "reshape_transpose":
        R = _pos(rng, 3, 2)
        return lambda p: _weighted(ops.transpose(ops.reshape(p["x"], (2, 3))), R), {"x": _signed(rng, 6)}
    raise KeyError(name)


PRIMITIVES = [
    "matmul", "mul", "sub", "power", "sigmoid", "relu", "softmax", "cross_entropy",
    "conv2d", "upsample2x", "concat", "gather_segment", "spmm", "convex_blend", "reshape_transpose",
]


class TestPrimitiveGradients:

    @pytest.mark.parametrize("primitive", PRIMITIVES)
    def test_isolated_primitive(self, primitive):
        """each primitive, 10 seeds → max relative error ≤ 1e-6."""
        for seed in SEEDS:
            forward, params = _case(primitive, np.random.default_rng(seed))
            assert grad_check(forward, params) <= 1e-6, f"{primitive} seed {seed}"


# ═══════════════════════════════════════════════════════════════════════
# Adam and the learning-rate schedule
# ═══════════════════════════════════════════════════════════════════════


class TestAdam:

    def test_zero_gradient_fixed_point(self, rng):
        """grad 0, wd 0 → params unchanged, moments stay 0."""
        params = {"w": rng.standard_normal((2, 3))}
        state = AdamState.zeros(params)
        updated, state = adam_step(state, params, {"w": np.zeros((2, 3))}, lr=1e-3)
        assert np.array_equal(updated["w"], params["w"])
        assert not state.m["w"].any() and not state.v["w"].any()
        assert state.step == 1

    def test_first_step_magnitude(self):
        """first step, scalar g ≠ 0 → |Δp| ≈ lr."""
        lr, g = 1e-3, 0.5
        params = {"w": np.array(1.0)}
        updated, _ = adam_step(AdamState.zeros(params), params, {"w": np.array(g)}, lr=lr)
        b1, b2, eps = 0.9, 0.999, 1e-8
        expected = lr * math.sqrt(1 - b2) / (1 - b1) * (1 - b1) * g / (math.sqrt((1 - b2) * g * g) + eps)
        assert math.isclose(1.0 - float(updated["w"]), expected, rel_tol=1e-12)
        assert math.isclose(1.0 - float(updated["w"]), lr, rel_tol=1e-5)

    def test_two_step_recurrence(self):
        """constant grad, two steps → hand-unrolled recurrence to 1e-12."""
        lr, g, p0 = 1e-2, np.array([0.3, -2.0]), np.array([1.0, 1.0])
        b1, b2, eps = 0.9, 0.999, 1e-8
        p, m, v = p0.copy(), np.zeros(2), np.zeros(2)
        for t in (1, 2):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            alpha = lr * math.sqrt(1 - b2**t) / (1 - b1**t)
            p = p - alpha * m / (np.sqrt(v) + eps)

        params, state = {"w": p0}, AdamState.zeros({"w": p0})
        for _ in range(2):
            params, state = adam_step(state, params, {"w": g}, lr=lr)
        assert np.allclose(params["w"], p, atol=1e-12, rtol=0)

    def test_weight_decay_is_decoupled(self):
        """grad 0, wd 0.1, lr 0.5 → p·(1 − 0.05)."""
        params = {"w": np.array([2.0])}
        updated, _ = adam_step(AdamState.zeros(params), params, {"w": np.zeros(1)}, lr=0.5, weight_decay=0.1)
        assert updated["w"][0] == pytest.approx(2.0 * 0.95, abs=1e-15)

    def test_inputs_not_mutated(self, rng):
        """adam_step returns new arrays, leaving inputs as they were."""
        value = rng.standard_normal(3)
        params = {"w": value.copy()}
        adam_step(AdamState.zeros(params), params, {"w": np.ones(3)}, lr=0.1)
        assert np.array_equal(params["w"], value)

    def test_name_mismatch(self):
        """grads for a different name → ShapeError."""
        params = {"w": np.ones(2)}
        with pytest.raises(ShapeError):
            adam_step(AdamState.zeros(params), params, {"v": np.ones(2)}, lr=0.1)


class TestSchedule:

    @pytest.mark.parametrize("epoch", range(15))
    def test_stage_one_decay(self, epoch):
        """lr at epoch e → 1e-4·0.95^e within 1e-15."""
        assert abs(lr_at_epoch(1e-4, 0.95, epoch) - 1e-4 * 0.95**epoch) <= 1e-15
