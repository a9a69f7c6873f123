"""Feedforward network core: architectures, parameters, forward evaluation.

Networks are bias-free chains ``x -> W0 x -> f1 -> W1 -> ... -> fl -> Wl``
with one elementwise activation per hidden layer.  All values are immutable:
matrices are stored as read-only float64 arrays, so every operation here is a
pure function that is safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, ParameterError, StructureError

_VALID_ACTIVATIONS = ("identity", "relu", "leaky_relu", "polynomial", "sigmoid")


@dataclass(frozen=True)
class ActivationKind:
    """One elementwise scalar activation.

    ``leaky_relu`` carries a slope ``c`` strictly inside (0, 1); ``polynomial``
    carries a factor ``c > 0`` and an exponent ``k >= 1``.
    """

    name: str
    c: float | None = None
    k: float | None = None

    def __post_init__(self):
        if self.name not in _VALID_ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.name!r}")
        if self.name == "leaky_relu":
            if self.c is None or not (0.0 < self.c < 1.0):
                raise ParameterError("leaky_relu slope must lie strictly inside (0, 1)")
        elif self.name == "polynomial":
            if self.c is None or self.c <= 0.0:
                raise ParameterError("polynomial factor must be positive")
            if self.k is None or self.k < 1.0:
                raise ParameterError("polynomial exponent must be >= 1")
        elif self.c is not None or self.k is not None:
            raise ParameterError(f"activation {self.name!r} takes no parameters")

    @property
    def is_identity(self) -> bool:
        return self.name == "identity"


def identity() -> ActivationKind:
    return ActivationKind("identity")


def relu() -> ActivationKind:
    return ActivationKind("relu")


def leaky_relu(c: float) -> ActivationKind:
    return ActivationKind("leaky_relu", c=float(c))


def polynomial(c: float, k: float) -> ActivationKind:
    return ActivationKind("polynomial", c=float(c), k=float(k))


def sigmoid() -> ActivationKind:
    return ActivationKind("sigmoid")


def apply_activation(kind: ActivationKind, M: np.ndarray) -> np.ndarray:
    """Apply the scalar activation entrywise to a matrix or vector."""
    M = np.asarray(M, dtype=np.float64)
    if not np.all(np.isfinite(M)):
        raise DomainError("activation input contains non-finite entries")
    if kind.name == "identity":
        return M.copy()
    if kind.name == "relu":
        return np.maximum(0.0, M)
    if kind.name == "leaky_relu":
        return np.maximum(0.0, M) + np.minimum(0.0, kind.c * M)
    if kind.name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-M))
    # polynomial: b -> c * b**k; fractional powers of negatives are ill posed
    if kind.k != round(kind.k) and np.any(M < 0.0):
        raise DomainError(
            "polynomial activation with non-integer exponent requires nonnegative inputs"
        )
    return kind.c * np.power(M, kind.k)


@dataclass(frozen=True)
class Architecture:
    """Layer dimensions ``p^0..p^(l+1)`` plus one activation per hidden layer."""

    dims: tuple[int, ...]
    activations: tuple[ActivationKind, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(p) for p in self.dims))
        object.__setattr__(
            self,
            "activations",
            tuple(a if isinstance(a, ActivationKind) else ActivationKind(a)
                  for a in self.activations),
        )
        if len(self.dims) < 3:
            raise StructureError("need at least input, one hidden, and output dimension")
        if any(p < 1 for p in self.dims):
            raise StructureError("all layer dimensions must be >= 1")
        if len(self.activations) != len(self.dims) - 2:
            raise StructureError(
                f"expected {len(self.dims) - 2} activations, got {len(self.activations)}"
            )

    @property
    def depth(self) -> int:
        """Number of hidden activations l."""
        return len(self.dims) - 2

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def output_dim(self) -> int:
        return self.dims[-1]

    @property
    def hidden_dims(self) -> tuple[int, ...]:
        return self.dims[1:-1]

    @property
    def min_width(self) -> int:
        return min(self.hidden_dims)

    @property
    def is_linear(self) -> bool:
        """True when every activation is the identity."""
        return all(a.is_identity for a in self.activations)

    def matrix_shapes(self) -> list[tuple[int, int]]:
        """Shapes of the weight matrices, innermost first."""
        return [(self.dims[j + 1], self.dims[j]) for j in range(len(self.dims) - 1)]


def _freeze(M: np.ndarray) -> np.ndarray:
    out = np.array(M, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class NetworkParams:
    """The weight tuple ``(W0, ..., Wl)``, innermost layer first.

    Matrix ``j`` maps layer ``j`` to layer ``j+1`` and has shape
    ``p^(j+1) x p^j``.  Entries must be finite.
    """

    matrices: tuple[np.ndarray, ...]

    def __post_init__(self):
        mats = tuple(_freeze(M) for M in self.matrices)
        for j, M in enumerate(mats):
            if M.ndim != 2:
                raise StructureError(f"matrix {j} is not 2-dimensional")
            if not np.all(np.isfinite(M)):
                raise StructureError(f"matrix {j} contains non-finite entries")
        object.__setattr__(self, "matrices", mats)

    def __len__(self) -> int:
        return len(self.matrices)

    def check_shapes(self, arch: Architecture) -> None:
        expected = arch.matrix_shapes()
        got = [M.shape for M in self.matrices]
        if got != expected:
            raise StructureError(f"parameter shapes {got} do not match architecture {expected}")

    def replace_matrix(self, index: int, M: np.ndarray) -> "NetworkParams":
        mats = list(self.matrices)
        if M.shape != mats[index].shape:
            raise StructureError(
                f"replacement for matrix {index} has shape {M.shape}, expected {mats[index].shape}"
            )
        mats[index] = M
        return NetworkParams(tuple(mats))

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(M))) if M.size else 0.0 for M in self.matrices)


def zeros_like(arch: Architecture) -> NetworkParams:
    return NetworkParams(tuple(np.zeros(s) for s in arch.matrix_shapes()))


def params_from_lists(matrices: Sequence[Sequence[Sequence[float]]]) -> NetworkParams:
    return NetworkParams(tuple(np.asarray(M, dtype=np.float64) for M in matrices))


def lincomb(a: float, P: NetworkParams, b: float, Q: NetworkParams) -> NetworkParams:
    """Entrywise ``a*P + b*Q``; shapes must agree."""
    if [M.shape for M in P.matrices] != [M.shape for M in Q.matrices]:
        raise StructureError("cannot combine parameters of different shapes")
    return NetworkParams(tuple(a * M + b * N for M, N in zip(P.matrices, Q.matrices)))


def params_allclose(P: NetworkParams, Q: NetworkParams, tol: float = 0.0) -> bool:
    if [M.shape for M in P.matrices] != [M.shape for M in Q.matrices]:
        return False
    return all(np.max(np.abs(M - N)) <= tol if M.size else True
               for M, N in zip(P.matrices, Q.matrices))


@dataclass(frozen=True)
class Dataset:
    """Sample matrix ``X`` (d x n, one sample per column) and labels ``Y`` (m x n)."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = _freeze(np.atleast_2d(self.X))
        Y = _freeze(np.atleast_2d(self.Y))
        if X.ndim != 2 or Y.ndim != 2:
            raise StructureError("X and Y must be matrices")
        if X.shape[1] != Y.shape[1]:
            raise StructureError(
                f"X has {X.shape[1]} samples but Y has {Y.shape[1]}"
            )
        if X.shape[1] < 1:
            raise StructureError("datasets must contain at least one sample")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise StructureError("dataset contains non-finite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n_samples(self) -> int:
        return self.X.shape[1]

    def check_shapes(self, arch: Architecture) -> None:
        if self.X.shape[0] != arch.input_dim:
            raise StructureError(
                f"X has {self.X.shape[0]} rows, architecture expects {arch.input_dim}"
            )
        if self.Y.shape[0] != arch.output_dim:
            raise StructureError(
                f"Y has {self.Y.shape[0]} rows, architecture expects {arch.output_dim}"
            )


def forward_batch(arch: Architecture, params: NetworkParams, X: np.ndarray) -> np.ndarray:
    """Evaluate the network on every column of ``X`` (d x n) at once."""
    params.check_shapes(arch)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != arch.input_dim:
        raise StructureError(
            f"input has shape {X.shape}, expected ({arch.input_dim}, n)"
        )
    H = params.matrices[0] @ X
    for j in range(arch.depth):
        H = apply_activation(arch.activations[j], H)
        H = params.matrices[j + 1] @ H
    return H


def forward(arch: Architecture, params: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Evaluate the network on a single input vector of length d."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != arch.input_dim:
        raise StructureError(f"input has shape {x.shape}, expected ({arch.input_dim},)")
    return forward_batch(arch, params, x[:, None])[:, 0]


def hidden_activations(arch: Architecture, params: NetworkParams,
                       X: np.ndarray) -> list[np.ndarray]:
    """Post-activation values per hidden layer, i.e. ``F_j = f^j[W^{j-1} ...]``.

    Entry ``j`` (0-based) has shape ``p^(j+1) x n`` and is the input that
    weight matrix ``j+1`` multiplies.
    """
    params.check_shapes(arch)
    X = np.asarray(X, dtype=np.float64)
    outs = []
    H = params.matrices[0] @ X
    for j in range(arch.depth):
        H = apply_activation(arch.activations[j], H)
        outs.append(H)
        H = params.matrices[j + 1] @ H
    return outs


def permute_hidden(params: NetworkParams,
                   perms: Sequence[Sequence[int]]) -> NetworkParams:
    """Relabel hidden units; input and output coordinates stay fixed.

    ``perms[j]`` permutes the units of hidden layer ``j+1`` and must have
    length ``p^(j+1)``.  The returned parameter computes the same function.
    """
    l = len(params.matrices) - 1
    if len(perms) != l:
        raise StructureError(f"expected {l} hidden permutations, got {len(perms)}")
    full = [np.arange(params.matrices[0].shape[1])]
    for j, perm in enumerate(perms):
        perm = np.asarray(perm, dtype=np.intp)
        width = params.matrices[j].shape[0]
        if perm.shape != (width,) or not np.array_equal(np.sort(perm), np.arange(width)):
            raise StructureError(f"entry {j} is not a permutation of 0..{width - 1}")
        full.append(perm)
    full.append(np.arange(params.matrices[-1].shape[0]))
    mats = []
    for j, M in enumerate(params.matrices):
        mats.append(M[np.ix_(full[j + 1], full[j])])
    return NetworkParams(tuple(mats))
