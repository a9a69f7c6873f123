"""Block predicates, the two-layer rewrite, and the reparametrization chains."""

import numpy as np
import pytest

from widepaths.blocks import (BlockSide, block_factor, embed_sum_hidden,
                              is_block, mix_block, sparsify_layer_pair,
                              to_block)
from widepaths.errors import CapabilityError, StructureError
from widepaths.netcore import (Architecture, Dataset, NetworkParams,
                               apply_activation, forward, forward_batch,
                               identity, leaky_relu, relu, sigmoid, zeros_like)
from widepaths.objective import ConstraintSpec, constraint_value
from widepaths.paths import segment_at, steps_to_segments

from conftest import random_block_params, random_dataset, random_params


# ---------------------------------------------------------------- is_block


def test_zero_params_are_zero_blocks():
    arch = Architecture((2, 3, 4, 1), ("relu", "relu"))
    zero = zeros_like(arch)
    for side in BlockSide:
        assert is_block(zero, 0, side)


def test_everything_is_a_block_at_max_width(rng):
    arch = Architecture((2, 3, 4, 1), ("relu", "relu"))
    params = random_params(arch, rng)
    for side in BlockSide:
        assert is_block(params, 4, side)
        assert not is_block(params, 0, side)


def test_pattern_example_single_hidden():
    params = NetworkParams((np.array([[1.0], [0.0]]), np.array([[1.0, 0.0]])))
    assert is_block(params, 1, BlockSide.UPPER)
    assert not is_block(params, 1, BlockSide.LOWER)


# ---------------------------------------------------- sparsify_layer_pair


def check_pair_contract(A, B, C, activation, q_A, side, tol=1e-9):
    from widepaths.objective import rowwise_lq_norm

    A2, B2, perm = sparsify_layer_pair(A, B, C, activation, q_A, 1.0, side)
    u, v = A.shape
    r = C.shape[1]
    keep = u * (r + 1)
    lhs = A2 @ apply_activation(activation, B2 @ C)
    Ap = A[:, list(perm)]
    Bp = B[list(perm), :]
    rhs = Ap @ apply_activation(activation, Bp @ C)
    scale = 1.0 + np.max(np.abs(rhs))
    assert np.max(np.abs(lhs - rhs)) <= tol * scale
    assert rowwise_lq_norm(A2, q_A) <= rowwise_lq_norm(A, q_A) + 1e-10
    assert rowwise_lq_norm(B2, 1.0) <= rowwise_lq_norm(B, 1.0) + 1e-10
    if v > keep:
        if side is BlockSide.UPPER:
            assert not np.any(A2[:, keep:])
            assert not np.any(B2[keep:, :])
            np.testing.assert_array_equal(B2[:keep, :], Bp[:keep, :])
        else:
            assert not np.any(A2[:, :v - keep])
            assert not np.any(B2[:v - keep, :])
            np.testing.assert_array_equal(B2[v - keep:, :], Bp[v - keep:, :])
    return A2, B2, perm


def test_pair_hand_example_identity():
    # one output row, three hidden units, one sample
    A = np.array([[1.0, 1.0, 1.0]]) / 3.0
    B = np.array([[1.0], [2.0], [3.0]])
    C = np.array([[1.0]])
    A2, B2, perm = check_pair_contract(A, B, C, identity(), 1.0, BlockSide.UPPER)
    # value 2 is preserved with support at most u(r+1) = 2
    out = A2 @ apply_activation(identity(), B2 @ C)
    np.testing.assert_allclose(out, [[2.0]])
    assert np.count_nonzero(np.any(A2 != 0, axis=0)) <= 2


def test_pair_nothing_to_do_below_bound(rng):
    A = rng.normal(size=(2, 5))
    B = rng.normal(size=(5, 3))
    C = rng.normal(size=(3, 2))  # keep = 2*3 = 6 >= 5
    A2, B2, perm = sparsify_layer_pair(A, B, C, relu(), 1.0, 1.0, BlockSide.UPPER)
    np.testing.assert_array_equal(A2, A)
    np.testing.assert_array_equal(B2, B)
    assert perm == tuple(range(5))


def test_pair_zero_outer_rows(rng):
    A = np.zeros((1, 6))
    B = rng.normal(size=(6, 2))
    C = rng.normal(size=(2, 1))
    A2, B2, _ = check_pair_contract(A, B, C, relu(), 1.0, BlockSide.UPPER)
    assert not np.any(A2)


@pytest.mark.parametrize("side", list(BlockSide))
@pytest.mark.parametrize("act", [identity(), relu(), sigmoid(), leaky_relu(0.1)])
def test_pair_random_sweep(side, act, rng):
    for _ in range(20):
        u = int(rng.integers(1, 3))
        r = int(rng.integers(1, 3))
        v = int(rng.integers(u * (r + 1) + 1, u * (r + 1) + 6))
        o = int(rng.integers(1, 4))
        A = rng.normal(size=(u, v))
        B = rng.normal(size=(v, o))
        C = rng.normal(size=(o, r))
        check_pair_contract(A, B, C, act, 1.0, side)


# ------------------------------------------------------------- to_block


def _chain_checks(arch, params, data, side, linear=None, grid=9):
    """Full contract bundle for one to_block run."""
    blk, steps = to_block(arch, params, data, side, linear=linear)
    is_lin = arch.is_linear if linear is None else linear
    s = block_factor(arch.output_dim, data.n_samples, arch.depth, is_lin)
    assert is_block(blk, s, side)

    ref = forward_batch(arch, params, data.X)
    scale = 1.0 + np.max(np.abs(ref))
    dev = np.max(np.abs(forward_batch(arch, blk, data.X) - ref)) / scale
    assert dev <= 1e-8

    spec = ConstraintSpec(a_r=1.0, b_r=1.0, q=1.0)
    base = constraint_value(params, spec)
    assert constraint_value(blk, spec) <= base + 1e-9
    for seg in steps_to_segments(list(steps)):
        for t in np.linspace(0.0, 1.0, grid):
            p = segment_at(seg, t)
            assert np.max(np.abs(forward_batch(arch, p, data.X) - ref)) <= 1e-8 * scale
            assert constraint_value(p, spec) <= base + 1e-9
    return blk, steps


def test_to_block_already_block_is_identity(rng):
    arch = Architecture((2, 8, 1), ("relu",))
    data = random_dataset(arch, 1, rng)
    blockish = random_block_params(arch, 2, BlockSide.UPPER, rng)
    out, steps = to_block(arch, blockish, data, BlockSide.UPPER)
    assert steps == []
    for M, N in zip(out.matrices, blockish.matrices):
        np.testing.assert_array_equal(M, N)


def test_to_block_hand_example_width_four(rng):
    # one sample, identity activation: columns 3,4 of the outer matrix and
    # rows 3,4 of the inner matrix must vanish
    arch = Architecture((1, 4, 1), ("identity",))
    data = Dataset(np.array([[1.0]]), np.array([[0.5]]))
    params = random_params(arch, rng)
    blk, _ = _chain_checks(arch, params, data, BlockSide.UPPER)
    assert not np.any(blk.matrices[1][:, 2:])
    assert not np.any(blk.matrices[0][2:, :])


def test_to_block_zero_params(rng):
    arch = Architecture((2, 8, 1), ("relu",))
    data = random_dataset(arch, 1, rng)
    zero = zeros_like(arch)
    blk, steps = to_block(arch, zero, data, BlockSide.LOWER)
    assert steps == []
    assert is_block(blk, 0, BlockSide.LOWER)


def test_to_block_idempotent(rng):
    arch = Architecture((2, 10, 1), ("relu",))
    data = random_dataset(arch, 2, rng)
    params = random_params(arch, rng)
    blk, steps = to_block(arch, params, data, BlockSide.UPPER)
    assert steps
    again, steps2 = to_block(arch, blk, data, BlockSide.UPPER)
    assert steps2 == []
    for M, N in zip(blk.matrices, again.matrices):
        np.testing.assert_array_equal(M, N)


def test_to_block_width_guard():
    arch = Architecture((2, 8, 8, 1), ("relu", "relu"))
    data = Dataset(np.zeros((2, 3)), np.zeros((1, 3)))
    params = zeros_like(arch).replace_matrix(0, np.ones((8, 2)))
    with pytest.raises(CapabilityError, match="p\\^1"):
        to_block(arch, params, data, BlockSide.UPPER)
    with pytest.raises(CapabilityError):
        to_block(arch, params, data, BlockSide.UPPER, linear=True)


@pytest.mark.parametrize("side", list(BlockSide))
def test_to_block_sweep(side, rng):
    cases = [
        (Architecture((2, 10, 1), ("relu",)), 2),
        (Architecture((3, 12, 4, 1), ("sigmoid", "relu")), 2),
        (Architecture((2, 9, 5, 2), (leaky_relu(0.1), "identity")), 1),
        (Architecture((1, 6, 1), ("identity",)), 1),
    ]
    for arch, n in cases:
        data = random_dataset(arch, n, rng)
        params = random_params(arch, rng)
        _chain_checks(arch, params, data, side)


@pytest.mark.parametrize("side", list(BlockSide))
def test_to_block_linear_sweep(side, rng):
    cases = [
        (Architecture((2, 8, 8, 1), ("identity", "identity")), 3),
        (Architecture((2, 9, 8, 10, 1), ("identity",) * 3), 3),
        (Architecture((3, 10, 12, 2), ("identity",) * 2), 2),
    ]
    for arch, n in cases:
        data = random_dataset(arch, n, rng)
        params = random_params(arch, rng)
        blk, _ = _chain_checks(arch, params, data, side)
        # the relaxed corner is genuinely smaller than the general one
        s_lin = block_factor(arch.output_dim, n, arch.depth, True)
        assert is_block(blk, s_lin, side)


def test_to_block_linear_zero_outer(rng):
    arch = Architecture((2, 8, 8, 1), ("identity", "identity"))
    data = random_dataset(arch, 3, rng)
    params = zeros_like(arch).replace_matrix(0, rng.normal(size=(8, 2)))
    blk, steps = to_block(arch, params, data, BlockSide.UPPER)
    assert is_block(blk, block_factor(1, 3, 2, True), BlockSide.UPPER)
    ref = forward_batch(arch, params, data.X)
    np.testing.assert_allclose(forward_batch(arch, blk, data.X), ref, atol=1e-12)


def test_to_block_linear_flag_requires_identity(rng):
    arch = Architecture((2, 8, 1), ("relu",))
    data = random_dataset(arch, 1, rng)
    with pytest.raises(CapabilityError):
        to_block(arch, random_params(arch, rng), data, BlockSide.UPPER, linear=True)


# ------------------------------------------------- embed_sum_hidden / mix


def test_embed_zero_lower(rng):
    arch = Architecture((2, 4, 1), ("relu",))
    upper = random_block_params(arch, 1, BlockSide.UPPER, rng)
    lower = zeros_like(arch)
    up, lo = embed_sum_hidden(upper, lower, 1)
    for M, N in zip(up.matrices, upper.matrices):
        np.testing.assert_array_equal(M, N)
    np.testing.assert_array_equal(lo.matrices[-1], np.zeros((1, 4)))
    np.testing.assert_array_equal(lo.matrices[0], upper.matrices[0])


def test_embed_hand_example():
    upper = NetworkParams((np.array([[1.0], [0.0]]), np.array([[1.0, 0.0]])))
    lower = NetworkParams((np.array([[0.0], [1.0]]), np.array([[0.0, 1.0]])))
    up, lo = embed_sum_hidden(upper, lower, 1)
    np.testing.assert_array_equal(up.matrices[0], [[1.0], [1.0]])
    np.testing.assert_array_equal(up.matrices[1], [[1.0, 0.0]])
    np.testing.assert_array_equal(lo.matrices[0], [[1.0], [1.0]])
    np.testing.assert_array_equal(lo.matrices[1], [[0.0, 1.0]])


def test_embed_support_disjointness(rng):
    arch = Architecture((2, 6, 5, 2), ("relu", "sigmoid"))
    upper = random_block_params(arch, 2, BlockSide.UPPER, rng)
    lower = random_block_params(arch, 2, BlockSide.LOWER, rng)
    for U, L in zip(upper.matrices[:-1], lower.matrices[:-1]):
        assert not np.any((U != 0) & (L != 0))
    embed_sum_hidden(upper, lower, 2)


def test_embed_width_guard(rng):
    arch = Architecture((2, 3, 1), ("relu",))
    upper = random_block_params(arch, 2, BlockSide.UPPER, rng)
    lower = random_block_params(arch, 2, BlockSide.LOWER, rng)
    with pytest.raises(CapabilityError):
        embed_sum_hidden(upper, lower, 2)


def test_mix_block_endpoints_and_value():
    upper = NetworkParams((np.array([[1.0], [0.0]]), np.array([[1.0, 0.0]])))
    lower = NetworkParams((np.array([[0.0], [1.0]]), np.array([[0.0, 1.0]])))
    up, lo = embed_sum_hidden(upper, lower, 1)
    arch = Architecture((1, 2, 1), ("identity",))
    np.testing.assert_array_equal(
        mix_block(up, lo, 1.0, 0.0).matrices[-1], up.matrices[-1])
    np.testing.assert_array_equal(
        mix_block(up, lo, 0.0, 1.0).matrices[-1], lo.matrices[-1])
    mixed = mix_block(up, lo, 0.3, 0.5)
    np.testing.assert_allclose(forward(arch, mixed, np.array([2.0])), [1.6])


def test_mix_block_rejects_different_hidden():
    a = NetworkParams((np.array([[1.0], [0.0]]), np.array([[1.0, 0.0]])))
    b = NetworkParams((np.array([[0.0], [1.0]]), np.array([[0.0, 1.0]])))
    with pytest.raises(StructureError):
        mix_block(a, b, 0.5, 0.5)


@pytest.mark.parametrize("act", ["relu", "identity", "sigmoid", "leaky"])
def test_mixed_output_identity_sweep(act, rng):
    kind = leaky_relu(0.1) if act == "leaky" else act
    worst = 0.0
    for _ in range(50):
        dims = (2, 6, 5, 1)
        arch = Architecture(dims, (kind, kind))
        upper = random_block_params(arch, 2, BlockSide.UPPER, rng)
        lower = random_block_params(arch, 2, BlockSide.LOWER, rng)
        up, lo = embed_sum_hidden(upper, lower, 2)
        c1, c2 = rng.uniform(size=2)
        mixed = mix_block(up, lo, c1, c2)
        x = rng.normal(size=2)
        lhs = forward(arch, mixed, x)
        rhs = c1 * forward(arch, upper, x) + c2 * forward(arch, lower, x)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    assert worst <= 1e-9
