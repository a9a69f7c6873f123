"""Global-minimum oracles used as references in tests and demos.

``outer_layer_solve`` fixes every inner matrix and convex-minimizes over the
outer one, which is a linear regression on transformed features; with wide
enough layers that completed parameter is a global minimum of the whole
unconstrained problem.  ``brute_force_min`` grid-searches tiny constrained
instances exhaustively.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapabilityError, DomainError, PreconditionError, StructureError
from .netcore import (Architecture, Dataset, NetworkParams, apply_activation)
from .objective import ConstraintSpec, LossKind, empirical_risk

_RANK_RCOND = 1e-10
_GRAD_TOL = 1e-8
_MAX_ITERS = 100_000


@dataclass(frozen=True)
class OracleResult:
    """A reference parameter with its achieved risk and solve certificate."""

    params: NetworkParams
    achieved_risk: float
    method: str
    certificate: float
    feature_rank: int | None = None


def _inner_features(arch: Architecture, inner: Sequence[np.ndarray],
                    X: np.ndarray) -> np.ndarray:
    """Transformed features ``Z = f^l[W^(l-1) ... f^1[W^0 X]]`` (p^l x n)."""
    shapes = arch.matrix_shapes()[:-1]
    if [np.asarray(M).shape for M in inner] != shapes:
        raise StructureError(f"inner matrices must have shapes {shapes}")
    H = np.asarray(inner[0], dtype=np.float64) @ X
    for j in range(arch.depth):
        H = apply_activation(arch.activations[j], H)
        if j + 1 < arch.depth:
            H = np.asarray(inner[j + 1], dtype=np.float64) @ H
    return H


def _loss_subgradient(kind: LossKind, A: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Subgradient of the summed loss with respect to the prediction matrix."""
    if kind is LossKind.SQUARED:
        return 2.0 * (A - Y)
    if kind is LossKind.ABSOLUTE:
        return np.sign(A - Y)
    if kind is LossKind.LOGISTIC:
        return -(1.0 + Y) / (1.0 + A) + (1.0 - Y) / (1.0 - A)
    if kind is LossKind.HINGE:
        return np.where(A * Y < 1.0, -Y, 0.0)
    raise StructureError(f"unknown loss kind {kind!r}")


def _in_loss_domain(kind: LossKind, A: np.ndarray) -> bool:
    if kind is LossKind.LOGISTIC:
        return bool(np.all(np.abs(A) < 1.0))
    return True


def outer_layer_solve(arch: Architecture, inner: Sequence[np.ndarray],
                      data: Dataset, loss: LossKind) -> OracleResult:
    """Complete the inner matrices with a convex-optimal outer layer.

    Squared loss uses a rank-tolerant least-squares factorization (minimum
    norm solution); other convex losses run subgradient descent with step
    ``1/sqrt(iter)`` until the subgradient norm falls below 1e-8 or the
    iteration cap is reached.  The global-minimum guarantee needs generic
    inner matrices at width ``2m(n+1)``; the achieved feature rank is
    reported so degenerate draws can be resampled.
    """
    data.check_shapes(arch)
    Z = _inner_features(arch, inner, data.X)
    Y = data.Y
    rank = int(np.linalg.matrix_rank(Z, tol=None)) if Z.size else 0

    if loss is LossKind.SQUARED:
        # min ||W Z - Y||_F^2 over W: solve Z^T W^T = Y^T
        WT, _, _, _ = np.linalg.lstsq(Z.T, Y.T, rcond=_RANK_RCOND)
        W = WT.T
        residual = Z @ (Z.T @ W.T - Y.T)
        certificate = float(np.max(np.abs(residual))) if residual.size else 0.0
    else:
        W = np.zeros((arch.output_dim, Z.shape[0]))
        if not _in_loss_domain(loss, W @ Z):
            raise DomainError("zero outer layer violates the loss domain")
        certificate = math.inf
        for it in range(1, _MAX_ITERS + 1):
            G = _loss_subgradient(loss, W @ Z, Y) @ Z.T
            gnorm = float(np.linalg.norm(G))
            certificate = gnorm
            if gnorm <= _GRAD_TOL:
                break
            step = 1.0 / math.sqrt(it) / max(gnorm, 1.0)
            W_new = W - step * G
            while not _in_loss_domain(loss, W_new @ Z):
                step *= 0.5
                W_new = W - step * G
                if step < 1e-300:
                    raise DomainError("cannot keep predictions inside the loss domain")
            W = W_new

    params = NetworkParams(tuple(list(np.asarray(M, dtype=np.float64) for M in inner) + [W]))
    risk = empirical_risk(arch, params, data, loss)
    return OracleResult(params=params, achieved_risk=risk, method="outer_solve",
                        certificate=certificate, feature_rank=rank)


def _batched_risks(arch: Architecture, flat: np.ndarray, data: Dataset,
                   loss: LossKind, spec: ConstraintSpec) -> np.ndarray:
    """Risks of a (K x P) block of flattened candidates; infeasible or
    out-of-domain candidates get +inf."""
    K = flat.shape[0]
    mats = []
    pos = 0
    for r, c in arch.matrix_shapes():
        mats.append(flat[:, pos:pos + r * c].reshape(K, r, c))
        pos += r * c

    feasible = np.ones(K, dtype=bool)
    if not spec.is_unconstrained:
        cv = np.zeros(K)
        if spec.a_r > 0.0:
            for M in mats[1:]:
                cv = np.maximum(cv, spec.a_r * np.abs(M).sum(axis=2).max(axis=1))
        if spec.b_r > 0.0:
            A = np.abs(mats[0])
            if math.isinf(spec.q):
                rows = A.max(axis=2)
            else:
                rows = (A ** spec.q).sum(axis=2) ** (1.0 / spec.q)
            cv = np.maximum(cv, spec.b_r * rows.max(axis=1))
        feasible = cv <= 1.0

    H = mats[0] @ data.X
    for j in range(arch.depth):
        H = apply_activation(arch.activations[j], H)
        H = mats[j + 1] @ H
    Y = data.Y[None, :, :]
    if loss is LossKind.SQUARED:
        risks = ((H - Y) ** 2).sum(axis=(1, 2))
    elif loss is LossKind.ABSOLUTE:
        risks = np.abs(H - Y).sum(axis=(1, 2))
    elif loss is LossKind.HINGE:
        risks = np.maximum(0.0, 1.0 - H * Y).sum(axis=(1, 2))
    else:  # logistic: out-of-domain candidates are discarded
        in_domain = np.all(np.abs(H) < 1.0, axis=(1, 2))
        safe = np.clip(H, -1.0 + 1e-12, 1.0 - 1e-12)
        risks = (-(1.0 + Y) * np.log1p(safe)
                 - (1.0 - Y) * np.log1p(-safe)).sum(axis=(1, 2))
        feasible &= in_domain
    risks[~feasible] = math.inf
    return risks


def brute_force_min(arch: Architecture, data: Dataset, loss: LossKind,
                    spec: ConstraintSpec, grid: int = 5,
                    bound: float = 1.0) -> OracleResult:
    """Exhaustive grid search over the feasible box for tiny instances.

    Every parameter entry ranges over ``grid`` equispaced values in
    ``[-bound, bound]``; at most 8 entries are allowed.  Returns the feasible
    grid point of least risk; raises if the whole grid is infeasible.
    Candidates are evaluated in vectorized chunks.
    """
    data.check_shapes(arch)
    if grid < 2:
        raise PreconditionError("grid resolution must be at least 2")
    if loss in (LossKind.HINGE, LossKind.LOGISTIC) and arch.output_dim != 1:
        raise PreconditionError(f"{loss.value} loss needs a single output")
    shapes = arch.matrix_shapes()
    total = sum(r * c for r, c in shapes)
    if total > 8:
        raise CapabilityError(
            f"{total} parameters exceed the brute-force guard of 8"
        )
    values = np.linspace(-bound, bound, grid)
    best_risk = math.inf
    best_flat: np.ndarray | None = None
    chunk = 65536
    buffer = []
    for flat in itertools.product(values, repeat=total):
        buffer.append(flat)
        if len(buffer) < chunk:
            continue
        risks = _batched_risks(arch, np.array(buffer), data, loss, spec)
        k = int(np.argmin(risks))
        if risks[k] < best_risk:
            best_risk = float(risks[k])
            best_flat = np.array(buffer[k])
        buffer.clear()
    if buffer:
        risks = _batched_risks(arch, np.array(buffer), data, loss, spec)
        k = int(np.argmin(risks))
        if risks[k] < best_risk:
            best_risk = float(risks[k])
            best_flat = np.array(buffer[k])
    if best_flat is None or math.isinf(best_risk):
        raise PreconditionError("no feasible point on the search grid")

    mats = []
    pos = 0
    for r, c in shapes:
        mats.append(best_flat[pos:pos + r * c].reshape(r, c))
        pos += r * c
    best = NetworkParams(tuple(mats))
    resolution = 2.0 * bound / (grid - 1)
    return OracleResult(params=best, achieved_risk=best_risk,
                        method="brute_force", certificate=resolution)
