"""Signed sparse-combination reduction over a finite generator set.

``reduce_combination`` rewrites ``v = sum_j w_j z_j`` so that at most ``r + 1``
of the (possibly signed) weights survive, the combination value is unchanged,
and the l1 weight norm does not grow.  The classical pivoting view: the target
is a barycentric combination of the ``2h + 1`` points ``{+z_j, -z_j, 0}``; as
long as more than ``r + 1`` of them carry weight, an affine dependence lets us
shift weight until one hits zero.  The origin acts as the slack point that
represents weight norms strictly below one; pivot directions are chosen so the
slack never shrinks, which is what keeps the l1 norm monotone.

Points are fed to the pivot one at a time, so the active set never exceeds
``r + 3`` and every null-space solve is a fixed tiny SVD.  Each pivot zeroes
at least one weight, so the total work is linear in the number of generators.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ParameterError, PreconditionError, ReductionFailureError, StructureError

_ZERO_REL = 1e-12
_RANK_REL = 1e-10


def lq_norm(w: np.ndarray, q: float) -> float:
    """Plain lq (quasi-)norm of a vector; ``q = inf`` gives the max entry."""
    if q <= 0.0:
        raise ParameterError(f"q must be positive, got {q}")
    w = np.abs(np.asarray(w, dtype=np.float64))
    if w.size == 0:
        return 0.0
    if math.isinf(q):
        return float(np.max(w))
    return float(np.sum(w ** q) ** (1.0 / q))


class _ActiveSet:
    """Active barycentric points with their weights; the origin has id -1."""

    def __init__(self, r: int):
        self.r = r
        self.ids: list[int] = []
        self.mu: list[float] = []
        self.cols: list[np.ndarray] = []

    def add(self, pid: int, weight: float, col: np.ndarray) -> None:
        self.ids.append(pid)
        self.mu.append(weight)
        self.cols.append(col)

    def nonorigin_count(self) -> int:
        return sum(1 for pid in self.ids if pid >= 0)

    def pivot(self) -> None:
        """One exchange step: zero at least one non-origin weight while keeping
        the represented combination, the total weight, and the slack."""
        k = len(self.ids)
        A = np.vstack([np.column_stack(self.cols), np.ones((1, k))])
        _, s, vt = np.linalg.svd(A)
        if k <= A.shape[0] and (s.size == 0 or s[-1] > _RANK_REL * max(1.0, s[0])):
            raise ReductionFailureError("active points unexpectedly affinely independent")
        gamma = vt[-1]
        try:
            origin_pos = self.ids.index(-1)
        except ValueError:
            origin_pos = None
        if origin_pos is not None and gamma[origin_pos] > 0.0:
            gamma = -gamma  # never drain the slack: keeps l1 monotone
        if not np.any(gamma > 0.0):
            gamma = -gamma
        mu = np.array(self.mu)
        movable = gamma > 0.0
        theta = float(np.min(mu[movable] / gamma[movable]))
        mu = mu - theta * gamma
        ztol = _ZERO_REL * max(1.0, float(np.max(mu)))
        keep = [i for i in range(k) if mu[i] > ztol]
        # weights that hit zero together are all dropped
        self.ids = [self.ids[i] for i in keep]
        self.mu = [float(mu[i]) for i in keep]
        self.cols = [self.cols[i] for i in keep]


def reduce_combination(generators: np.ndarray, weights: np.ndarray,
                       q: float = 1.0, tol: float = 1e-9) -> np.ndarray:
    """Sparsify signed weights over the columns of ``generators`` (r x h).

    Requires ``||weights||_q <= 1 + tol`` with ``q`` in (0, 1].  Returns new
    weights with at most ``r + 1`` nonzeros, the same combination value up to
    ``tol`` scaled by the value's magnitude, and no l1 growth.  For ``q < 1``
    the lq norm of the output is re-checked and a failure is raised if it
    exceeds ``1 + tol``.
    """
    Z = np.asarray(generators, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if Z.ndim != 2:
        raise StructureError("generators must form an r x h matrix")
    r, h = Z.shape
    if w.shape != (h,):
        raise StructureError(f"got weights of shape {w.shape} for {h} generators")
    if not (0.0 < q <= 1.0):
        raise ParameterError(f"q must lie in (0, 1], got {q}")
    if tol < 0.0:
        raise ParameterError("tolerance must be nonnegative")
    if lq_norm(w, q) > 1.0 + tol:
        raise PreconditionError(f"input weight norm {lq_norm(w, q)} exceeds 1 + tol")

    if np.count_nonzero(w) <= r + 1:
        return w.copy()

    active = _ActiveSet(r)
    slack = 1.0 - float(np.sum(np.abs(w)))
    if slack > 0.0:
        active.add(-1, slack, np.zeros(r))
    for j in range(h):
        if w[j] > 0.0:
            active.add(j, float(w[j]), Z[:, j].copy())
        elif w[j] < 0.0:
            active.add(h + j, float(-w[j]), -Z[:, j])
        else:
            continue
        while active.nonorigin_count() > r + 1:
            active.pivot()

    out = np.zeros(h)
    for pid, mu in zip(active.ids, active.mu):
        if 0 <= pid < h:
            out[pid] += mu
        elif pid >= h:
            out[pid - h] -= mu

    if q < 1.0 and lq_norm(out, q) > 1.0 + tol:
        raise ReductionFailureError(
            f"reduced weights have lq norm {lq_norm(out, q)} > 1 + tol for q={q}"
        )
    return out
