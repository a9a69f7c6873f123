"""Convex losses, the empirical risk, and the norm-ball constraint family.

The constraint couples an l1 bound on every matrix past the input layer with
a row-wise lq bound on the input matrix:
``r(W) = max(a_r * max_j ||W^j||_1row, b_r * ||W^0||_qrow)``.
A parameter is admissible when ``r(W) <= 1``; ``a_r = b_r = 0`` switches the
constraint off entirely.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError, StructureError
from .netcore import Architecture, Dataset, NetworkParams, forward_batch


class LossKind(enum.Enum):
    SQUARED = "squared"
    ABSOLUTE = "absolute"
    LOGISTIC = "logistic"
    HINGE = "hinge"


def _check_binary(kind: LossKind, a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    if a.shape != (1,):
        raise StructureError(f"{kind.value} loss needs a single output, got shape {a.shape}")
    label = float(b[0])
    if label not in (-1.0, 1.0):
        raise DomainError(f"{kind.value} loss needs labels in {{-1, +1}}, got {label}")
    return float(a[0]), label


def pointwise_loss(kind: LossKind, a: np.ndarray, b: np.ndarray) -> float:
    """Loss of one prediction vector ``a`` against one label vector ``b``."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise StructureError(f"prediction shape {a.shape} != label shape {b.shape}")
    if kind is LossKind.SQUARED:
        d = a - b
        return float(d @ d)
    if kind is LossKind.ABSOLUTE:
        return float(np.sum(np.abs(a - b)))
    if kind is LossKind.LOGISTIC:
        pred, label = _check_binary(kind, a, b)
        if abs(pred) >= 1.0:
            raise DomainError(f"logistic loss needs |prediction| < 1, got {pred}")
        return float(-(1.0 + label) * math.log(1.0 + pred)
                     - (1.0 - label) * math.log(1.0 - pred))
    if kind is LossKind.HINGE:
        pred, label = _check_binary(kind, a, b)
        return max(0.0, 1.0 - pred * label)
    raise ParameterError(f"unknown loss kind {kind!r}")


def empirical_risk(arch: Architecture, params: NetworkParams,
                   data: Dataset, kind: LossKind) -> float:
    """Sum of pointwise losses over all samples."""
    data.check_shapes(arch)
    preds = forward_batch(arch, params, data.X)
    return float(sum(pointwise_loss(kind, preds[:, i], data.Y[:, i])
                     for i in range(data.n_samples)))


def rowwise_lq_norm(M: np.ndarray, q: float) -> float:
    """Max over rows of the lq (quasi-)norm; ``q = inf`` gives the max entry."""
    if q <= 0.0:
        raise ParameterError(f"q must be positive, got {q}")
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        return 0.0
    A = np.abs(M)
    if math.isinf(q):
        return float(np.max(A))
    return float(np.max(np.sum(A ** q, axis=1) ** (1.0 / q)))


@dataclass(frozen=True)
class ConstraintSpec:
    """Weights of the two constraint branches plus the input-layer exponent."""

    a_r: float = 0.0
    b_r: float = 0.0
    q: float = math.inf

    def __post_init__(self):
        if self.a_r < 0.0 or self.b_r < 0.0:
            raise ParameterError("constraint weights must be nonnegative")
        if self.q <= 0.0:
            raise ParameterError(f"q must be positive, got {self.q}")

    @property
    def is_unconstrained(self) -> bool:
        return self.a_r == 0.0 and self.b_r == 0.0


UNCONSTRAINED = ConstraintSpec()


def constraint_value(params: NetworkParams, spec: ConstraintSpec) -> float:
    """Evaluate the constraint functional; 0 for the unconstrained spec."""
    if spec.is_unconstrained:
        return 0.0
    hidden_branch = 0.0
    if spec.a_r > 0.0:
        hidden_branch = spec.a_r * max(
            rowwise_lq_norm(M, 1.0) for M in params.matrices[1:]
        )
    input_branch = 0.0
    if spec.b_r > 0.0:
        input_branch = spec.b_r * rowwise_lq_norm(params.matrices[0], spec.q)
    return max(hidden_branch, input_branch)


def is_feasible(params: NetworkParams, spec: ConstraintSpec, tol: float = 1e-9) -> bool:
    """True iff the constraint value is at most ``1 + tol``."""
    if tol < 0.0:
        raise ParameterError("tolerance must be nonnegative")
    return constraint_value(params, spec) <= 1.0 + tol
