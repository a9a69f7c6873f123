"""Block-parameter predicates and the sparsifying reparametrization chains.

A parameter tuple is an ``s``-block parameter when every matrix vanishes
outside an ``s``-sized corner: the head corner for the upper side, the tail
corner for the lower side.  ``to_block`` turns any parameter into one while
keeping every network output on the bound dataset fixed, and it returns the
full list of reparametrization steps; the straight-line interpolation of each
step leaves the outputs and the constraint value invariant, so every step is a
certifiable constant-loss path segment.

The chain works outside-in.  At each layer the active rows are rewritten by
the signed sparse-combination reduction (each row then touches at most
``n + 1`` hidden units), after which the surviving columns are gathered into
the corner.  Gathering never jumps: a column move is realized as zero / copy /
transfer / zero micro-steps on the pair of adjacent matrices, each of which is
itself a constant-output linear segment.  Identity-activation networks get a
separate chain that pushes a merged coefficient matrix through the layers,
which is what drops the width requirement from ``2m(n+1)^l`` to ``2m(n+1)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .caratheodory import reduce_combination
from .errors import CapabilityError, StructureError
from .netcore import (Architecture, Dataset, NetworkParams, apply_activation,
                      hidden_activations)
from .objective import rowwise_lq_norm

_REDUCE_TOL = 1e-9


class BlockSide(enum.Enum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass(frozen=True)
class ReparamStep:
    """One constant-output linear move: ``before`` to ``after`` in one matrix."""

    before: NetworkParams
    after: NetworkParams
    layer_index: int
    permutation: tuple[int, ...] | None = None


def block_factor(m: int, n: int, l: int, linear: bool = False) -> int:
    """Corner size ``s`` reachable by the chain: ``m(n+1)^l``, or ``m(n+1)``
    for identity activations."""
    return m * (n + 1) if linear else m * (n + 1) ** l


def is_block(params: NetworkParams, s: int, side: BlockSide) -> bool:
    """Exact zero-pattern test for the ``s``-sized corner structure."""
    if s < 0:
        raise StructureError("block size must be nonnegative")
    mats = params.matrices
    l = len(mats) - 1

    def head_zero(M: np.ndarray, axis: int, keep: int) -> bool:
        # entries with index >= keep along `axis` must vanish
        sl = [slice(None)] * 2
        sl[axis] = slice(keep, None)
        return not np.any(M[tuple(sl)])

    def tail_zero(M: np.ndarray, axis: int, cut: int) -> bool:
        # entries with index < cut along `axis` must vanish
        sl = [slice(None)] * 2
        sl[axis] = slice(0, max(cut, 0))
        return not np.any(M[tuple(sl)])

    if side is BlockSide.UPPER:
        if not head_zero(mats[0], 0, s):
            return False
        for v in range(1, l):
            if not (head_zero(mats[v], 0, s) and head_zero(mats[v], 1, s)):
                return False
        return head_zero(mats[l], 1, s)

    if not tail_zero(mats[0], 0, mats[0].shape[0] - s):
        return False
    for v in range(1, l):
        if not (tail_zero(mats[v], 0, mats[v].shape[0] - s)
                and tail_zero(mats[v], 1, mats[v].shape[1] - s)):
            return False
    return tail_zero(mats[l], 1, mats[l].shape[1] - s)


def reduce_rows(A: np.ndarray, F: np.ndarray, q: float = 1.0,
                tol: float = _REDUCE_TOL) -> np.ndarray:
    """Sparsify each row of ``A`` against the rows of ``F`` (the generators).

    Row products ``A @ F`` are preserved exactly; each output row has at most
    ``F.shape[1] + 1`` nonzeros and no larger row lq norm.
    """
    A = np.asarray(A, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    if A.shape[1] != F.shape[0]:
        raise StructureError(f"A has {A.shape[1]} columns but F has {F.shape[0]} rows")
    out = A.copy()
    for k in range(A.shape[0]):
        row = A[k]
        scale = rowwise_lq_norm(row[None, :], q)
        if scale == 0.0:
            continue
        generators = (scale * F).T  # column j = scale * (row j of F)
        lam = reduce_combination(generators, row / scale, q=q, tol=tol)
        out[k] = scale * lam
    return out


def _active_columns(M: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.any(M != 0.0, axis=0))


def _corner(side: BlockSide, total: int, count: int) -> np.ndarray:
    """The first (upper) or last (lower) ``count`` indices out of ``total``."""
    count = min(count, total)
    if side is BlockSide.UPPER:
        return np.arange(count)
    return np.arange(total - count, total)


def _plan_moves(active: np.ndarray, targets: np.ndarray) -> list[tuple[int, int]]:
    """Pair stray active columns with free target slots: (source, target)."""
    active_set = set(int(a) for a in active)
    target_set = set(int(t) for t in targets)
    sources = sorted(active_set - target_set)
    free = sorted(target_set - active_set)
    if len(sources) > len(free):
        raise StructureError("more stray columns than free target slots")
    return list(zip(sources, free))


def sparsify_layer_pair(A: np.ndarray, B: np.ndarray, C: np.ndarray,
                        activation, q_A: float, q_B: float,
                        side: BlockSide = BlockSide.UPPER,
                        tol: float = _REDUCE_TOL):
    """Two-layer rewrite: returns ``(A', B', perm)`` with
    ``A' f(B' C) == A_perm f(B^perm C)``.

    ``A'`` has nonzero columns only inside a corner of width ``u(r+1)``
    (``u`` rows of ``A``, ``r`` columns of ``C``); the corresponding corner
    rows of ``B'`` are rows of ``B`` relabeled by ``perm`` and the remaining
    rows are zero.  Row norms never grow: ``A'`` under ``q_A``, ``B'`` under
    ``q_B``.  ``perm[i]`` is the source index of position ``i``.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    u, v = A.shape
    if B.shape[0] != v:
        raise StructureError(f"A has {v} columns but B has {B.shape[0]} rows")
    if C.ndim != 2 or B.shape[1] != C.shape[0]:
        raise StructureError("B and C shapes are inconsistent")
    r = C.shape[1]
    keep = u * (r + 1)
    if v <= keep:
        return A.copy(), B.copy(), tuple(range(v))

    F = apply_activation(activation, B @ C)
    reduced = reduce_rows(A, F, q=q_A, tol=tol)
    active = _active_columns(reduced)
    corner = _corner(side, v, keep)

    # stable relabeling: corner positions keep their index unless a stray
    # active column needs the slot
    perm = np.arange(v)
    for src, dst in _plan_moves(active, corner):
        perm[dst], perm[src] = perm[src], perm[dst]

    A_out = reduced[:, perm]
    # corner rows of B' are verbatim rows of B (relabeled), the rest are zero,
    # so the row-wise q_B norm cannot grow for any q
    B_out = np.zeros_like(B)
    B_out[corner, :] = B[perm[corner], :]
    return A_out, B_out, tuple(int(p) for p in perm)


class _Chain:
    """Shared machinery for recording constant-output reparametrization steps."""

    def __init__(self, params: NetworkParams):
        self.cur = params
        self.steps: list[ReparamStep] = []

    def set_matrix(self, layer: int, M: np.ndarray,
                   perm: tuple[int, ...] | None = None) -> None:
        if np.array_equal(self.cur.matrices[layer], M):
            return
        nxt = self.cur.replace_matrix(layer, M)
        self.steps.append(ReparamStep(self.cur, nxt, layer, perm))
        self.cur = nxt

    def matrix(self, layer: int) -> np.ndarray:
        return np.array(self.cur.matrices[layer])

    def gather_columns(self, layer: int, targets: np.ndarray,
                       side: BlockSide) -> None:
        """Move all active columns of ``layer`` into ``targets`` and zero the
        rows of ``layer - 1`` that end up unread.

        Emits up to four steps: zero the destination rows of the inner matrix,
        copy the source rows onto them, transfer the columns of the outer
        matrix (the only step that carries a permutation), and finally zero
        every inner row outside ``targets``.
        """
        W = self.matrix(layer)
        B = self.matrix(layer - 1)
        active = _active_columns(W)
        moves = _plan_moves(active, targets)

        if moves:
            dests = [d for _, d in moves]
            if np.any(B[dests, :]):
                Bz = B.copy()
                Bz[dests, :] = 0.0
                self.set_matrix(layer - 1, Bz)
                B = Bz
            Bc = B.copy()
            for src, dst in moves:
                Bc[dst, :] = B[src, :]
            self.set_matrix(layer - 1, Bc)
            B = Bc

            Wt = W.copy()
            perm = np.arange(W.shape[1])
            for src, dst in moves:
                Wt[:, dst] = W[:, src]
                Wt[:, src] = 0.0
                perm[dst], perm[src] = perm[src], perm[dst]
            self.set_matrix(layer, Wt, perm=tuple(int(p) for p in perm))

        B = self.matrix(layer - 1)
        outside = np.setdiff1d(np.arange(B.shape[0]), targets)
        if outside.size and np.any(B[outside, :]):
            Bz = B.copy()
            Bz[outside, :] = 0.0
            self.set_matrix(layer - 1, Bz)


def _check_general_width(arch: Architecture, m: int, n: int) -> None:
    l = arch.depth
    for j in range(1, l + 1):
        need = m * (n + 1) ** (l - j + 1)
        if arch.dims[j] < need:
            raise CapabilityError(
                f"hidden width p^{j} = {arch.dims[j]} is below the required "
                f"{need} = m(n+1)^(l-j+1) for m={m}, n={n}, l={l}"
            )


def _check_linear_width(arch: Architecture, m: int, n: int) -> None:
    l = arch.depth
    if arch.dims[1] < m * (n + 1):
        raise CapabilityError(
            f"hidden width p^1 = {arch.dims[1]} is below the required "
            f"{m * (n + 1)} = m(n+1) for the identity-activation chain"
        )
    for j in range(2, l + 1):
        need = m * (n + 3)
        if arch.dims[j] < need:
            raise CapabilityError(
                f"hidden width p^{j} = {arch.dims[j]} is below the required "
                f"{need} = m(n+3) working space for the identity-activation chain"
            )


def _to_block_general(arch: Architecture, params: NetworkParams, data: Dataset,
                      side: BlockSide) -> tuple[NetworkParams, list[ReparamStep]]:
    m, n, l = arch.output_dim, data.n_samples, arch.depth
    _check_general_width(arch, m, n)
    feats = hidden_activations(arch, params, data.X)  # feats[j-1]: p^j x n

    chain = _Chain(params)
    rows_read = m
    for j in range(l, 0, -1):
        W = chain.matrix(j)
        row_idx = _corner(side, W.shape[0], rows_read)
        reduced = reduce_rows(W[row_idx, :], feats[j - 1])
        Wr = W.copy()
        Wr[row_idx, :] = reduced
        chain.set_matrix(j, Wr)

        keep = min(rows_read * (n + 1), W.shape[1])
        targets = _corner(side, W.shape[1], keep)
        chain.gather_columns(j, targets, side)
        rows_read = keep
    return chain.cur, chain.steps


def _zero_out_below(chain: _Chain, upto_layer: int) -> None:
    # the outer context reads only zeros, so anything below may be cleared
    for v in range(upto_layer, -1, -1):
        M = chain.matrix(v)
        if np.any(M):
            chain.set_matrix(v, np.zeros_like(M))


def _to_block_linear(arch: Architecture, params: NetworkParams, data: Dataset,
                     side: BlockSide) -> tuple[NetworkParams, list[ReparamStep]]:
    """Identity-activation chain reaching corner size ``s = m(n+1)``.

    A merged coefficient matrix (the product of everything above the working
    layer) is sparsified instead of the layer itself; the layer then hands its
    content to the next one down through a scratch block of ``m`` spare hidden
    units, leaving behind a scaled identity corner.  Scaling every carrier by
    the largest original row norm keeps all row norms within the originals.
    """
    m, n, l = arch.output_dim, data.n_samples, arch.depth
    _check_linear_width(arch, m, n)
    s = m * (n + 1)

    beta = max(rowwise_lq_norm(M, 1.0) for M in params.matrices[1:])
    chain = _Chain(params)
    if beta == 0.0:
        # zero outer map: the network output is identically zero already
        _zero_out_below(chain, l - 1)
        W0 = chain.matrix(0)
        keep_rows = _corner(side, W0.shape[0], s)
        outside = np.setdiff1d(np.arange(W0.shape[0]), keep_rows)
        if outside.size and np.any(W0[outside, :]):
            W0[outside, :] = 0.0
            chain.set_matrix(0, W0)
        return chain.cur, chain.steps

    below = hidden_activations(arch, params, data.X)  # identity: plain products
    pi = 1.0
    for j in range(l, 1, -1):
        W = chain.matrix(j)
        content_rows = _corner(side, W.shape[0], m)
        D = W[content_rows, :]
        reduced = reduce_rows(pi * D, below[j - 1]) / pi
        Wr = W.copy()
        Wr[content_rows, :] = reduced
        chain.set_matrix(j, Wr)

        carrier_cols = _corner(side, W.shape[1], m)
        active = set(_active_columns(reduced).tolist())
        blocked = active | set(carrier_cols.tolist())
        pool = [i for i in range(W.shape[1]) if i not in blocked]
        if side is BlockSide.LOWER:
            pool = pool[::-1]
        scratch = np.array(pool[:m], dtype=np.intp)
        if scratch.size < m:
            raise CapabilityError(
                f"no scratch units left in hidden layer {j} (width {W.shape[1]})"
            )

        B = chain.matrix(j - 1)
        content_next = (pi * reduced) @ B / (pi * beta)
        if np.any(B[scratch, :]):
            Bz = B.copy()
            Bz[scratch, :] = 0.0
            chain.set_matrix(j - 1, Bz)
            B = Bz
        Bg = B.copy()
        Bg[scratch, :] = content_next
        chain.set_matrix(j - 1, Bg)

        carrier_scratch = np.zeros_like(W)
        carrier_scratch[content_rows, scratch] = beta
        chain.set_matrix(j, carrier_scratch)

        B = chain.matrix(j - 1)
        outside = np.setdiff1d(np.arange(B.shape[0]), scratch)
        if outside.size and np.any(B[outside, :]):
            Bz = B.copy()
            Bz[outside, :] = 0.0
            chain.set_matrix(j - 1, Bz)

        Bc = chain.matrix(j - 1)
        Bc[carrier_cols, :] = content_next
        chain.set_matrix(j - 1, Bc)

        carrier = np.zeros_like(W)
        perm = np.arange(W.shape[1])
        carrier[content_rows, carrier_cols] = beta
        for a, b in zip(scratch, carrier_cols):
            perm[a], perm[b] = perm[b], perm[a]
        chain.set_matrix(j, carrier, perm=tuple(int(p) for p in perm))

        Bz = chain.matrix(j - 1)
        if np.any(Bz[scratch, :]):
            Bz[scratch, :] = 0.0
            chain.set_matrix(j - 1, Bz)

        pi *= beta
        if not np.any(content_next):
            _zero_out_below(chain, j - 2)
            return chain.cur, chain.steps

    # final stage: sparsify the innermost hidden matrix and gather into the corner
    W = chain.matrix(1)
    content_rows = _corner(side, W.shape[0], m)
    D = W[content_rows, :]
    reduced = reduce_rows(pi * D, below[0]) / pi
    Wr = W.copy()
    Wr[content_rows, :] = reduced
    chain.set_matrix(1, Wr)
    targets = _corner(side, W.shape[1], s)
    chain.gather_columns(1, targets, side)
    return chain.cur, chain.steps


def to_block(arch: Architecture, params: NetworkParams, data: Dataset,
             side: BlockSide,
             linear: bool | None = None) -> tuple[NetworkParams, list[ReparamStep]]:
    """Rewrite ``params`` into a block parameter without changing any network
    output on ``data``.

    Returns the block parameter and the list of constant-output steps leading
    to it.  The reachable corner size is ``block_factor(m, n, l, linear)``;
    the constraint value of every intermediate parameter is bounded by the
    input's.  ``linear=None`` picks the identity-activation chain exactly when
    every activation is the identity; forcing ``linear=True`` on a nonlinear
    architecture is an error.
    """
    params.check_shapes(arch)
    data.check_shapes(arch)
    if linear is None:
        linear = arch.is_linear
    if linear and not arch.is_linear:
        raise CapabilityError("the relaxed width bound applies only to identity activations")

    m, n, l = arch.output_dim, data.n_samples, arch.depth
    use_linear = linear and l > 1
    if use_linear:
        _check_linear_width(arch, m, n)
    else:
        _check_general_width(arch, m, n)
    s = block_factor(m, n, l, linear)
    if is_block(params, s, side):
        return params, []
    if use_linear:
        result, steps = _to_block_linear(arch, params, data, side)
    else:
        result, steps = _to_block_general(arch, params, data, side)
    assert is_block(result, s, side)
    return result, steps


def embed_sum_hidden(upper: NetworkParams, lower: NetworkParams,
                     s: int) -> tuple[NetworkParams, NetworkParams]:
    """Merge the hidden layers of an upper and a lower block parameter.

    Returns ``(upper', lower')`` sharing every matrix except the outer one:
    all inner matrices become entrywise sums.  Because the two block supports
    are disjoint whenever the minimal width is at least ``2s``, both outputs
    compute the same functions as their sources, and the sums keep every row
    norm (each row comes from exactly one side).
    """
    shapes_u = [M.shape for M in upper.matrices]
    shapes_l = [M.shape for M in lower.matrices]
    if shapes_u != shapes_l:
        raise StructureError("upper and lower parameters have different shapes")
    min_width = min(M.shape[0] for M in upper.matrices[:-1])
    if min_width < 2 * s:
        raise CapabilityError(
            f"minimal width {min_width} is below 2s = {2 * s}; block supports overlap"
        )
    if not is_block(upper, s, BlockSide.UPPER):
        raise StructureError("first argument is not an upper block parameter at this s")
    if not is_block(lower, s, BlockSide.LOWER):
        raise StructureError("second argument is not a lower block parameter at this s")

    summed = [U + L for U, L in zip(upper.matrices[:-1], lower.matrices[:-1])]
    upper_p = NetworkParams(tuple(summed + [np.array(upper.matrices[-1])]))
    lower_p = NetworkParams(tuple(summed + [np.array(lower.matrices[-1])]))
    return upper_p, lower_p


def mix_block(upper_p: NetworkParams, lower_p: NetworkParams,
              c1: float, c2: float) -> NetworkParams:
    """Combine two embedded block parameters: outer layer ``c1*U + c2*L``,
    hidden layers shared.  The resulting network output is the same linear
    combination of the two block networks' outputs."""
    if len(upper_p.matrices) != len(lower_p.matrices):
        raise StructureError("parameters have different depths")
    for U, L in zip(upper_p.matrices[:-1], lower_p.matrices[:-1]):
        if U.shape != L.shape or np.any(U != L):
            raise StructureError("hidden layers differ; inputs must come from embed_sum_hidden")
    outer = c1 * upper_p.matrices[-1] + c2 * lower_p.matrices[-1]
    return NetworkParams(tuple(list(upper_p.matrices[:-1]) + [outer]))
