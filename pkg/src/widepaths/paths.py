"""Path segments, path-relation predicates, and the full escape path.

A segment interpolates two parameter tuples affinely; its ``scale`` field
truncates the traversal to the front part ``[0, c]`` of the line, which is how
a convex segment is restricted to its nonincreasing prefix.  The escape path
chains three kinds of pieces: the constant-output reparametrization steps that
turn the start into an upper block parameter, one constant embedding step that
merges in the target's hidden block, and one convexity-restricted segment that
rotates the outer layer from the upper block to the lower one.  When the
restriction reaches the far end, the target-side pieces are appended in
reverse, so the path actually terminates at the target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import (BlockSide, ReparamStep, block_factor, embed_sum_hidden,
                     to_block)
from .errors import CapabilityError, ParameterError, PreconditionError, StructureError
from .netcore import Architecture, Dataset, NetworkParams, lincomb, params_allclose
from .objective import ConstraintSpec, LossKind, empirical_risk, is_feasible

SEGMENT_CONSTANT = "constant"
SEGMENT_CONVEX = "convex"


@dataclass(frozen=True)
class PathSegment:
    """Affine piece ``t -> (1 - c t) start + (c t) end`` with ``c = scale``."""

    start: NetworkParams
    end: NetworkParams
    kind: str = SEGMENT_CONSTANT
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in (SEGMENT_CONSTANT, SEGMENT_CONVEX):
            raise ParameterError(f"unknown segment kind {self.kind!r}")
        if not (0.0 < self.scale <= 1.0):
            raise ParameterError(f"scale must lie in (0, 1], got {self.scale}")
        if [M.shape for M in self.start.matrices] != [M.shape for M in self.end.matrices]:
            raise StructureError("segment endpoints have different shapes")


def segment_at(seg: PathSegment, t: float) -> NetworkParams:
    """Parameter at time ``t`` in [0, 1] along the (possibly truncated) segment."""
    if not (0.0 <= t <= 1.0):
        raise ParameterError(f"t must lie in [0, 1], got {t}")
    ct = seg.scale * t
    return lincomb(1.0 - ct, seg.start, ct, seg.end)


@dataclass(frozen=True)
class CompositePath:
    """Ordered segments whose evaluated endpoints meet within 1e-12."""

    segments: tuple[PathSegment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        for a, b in zip(self.segments, self.segments[1:]):
            if not params_allclose(segment_at(a, 1.0), b.start, tol=1e-12):
                raise StructureError("consecutive segments do not connect")

    def __len__(self):
        return len(self.segments)

    @property
    def start(self) -> NetworkParams:
        return self.segments[0].start

    def endpoint(self) -> NetworkParams:
        return segment_at(self.segments[-1], 1.0)


def steps_to_segments(steps: list[ReparamStep]) -> list[PathSegment]:
    """Constant segments from reparametrization steps, in order."""
    return [PathSegment(st.before, st.after, SEGMENT_CONSTANT) for st in steps]


def segment_losses(seg: PathSegment, arch: Architecture, data: Dataset,
                   loss: LossKind, grid_size: int) -> np.ndarray:
    """Losses on the uniform grid over the segment's time interval."""
    if grid_size < 2:
        raise ParameterError("grid_size must be at least 2")
    ts = np.linspace(0.0, 1.0, grid_size)
    return np.array([empirical_risk(arch, segment_at(seg, t), data, loss) for t in ts])


def is_path_constant(seg: PathSegment, arch: Architecture, data: Dataset,
                     loss: LossKind, grid_size: int = 101,
                     tol: float = 1e-8) -> bool:
    """True iff the loss varies by at most ``tol * (1 + |L(0)|)`` on the grid."""
    vals = segment_losses(seg, arch, data, loss, grid_size)
    return bool(np.max(np.abs(vals - vals[0])) <= tol * (1.0 + abs(vals[0])))


def max_midpoint_violation(vals: np.ndarray) -> float:
    """Worst violation of ``L((t1+t2)/2) <= (L(t1)+L(t2))/2`` over all grid
    pairs whose midpoint falls on the grid."""
    worst = 0.0
    for parity in (0, 1):
        # pairs within one parity class have on-grid midpoints
        idx = np.arange(parity, vals.size, 2)
        if idx.size < 2:
            continue
        sub = vals[idx]
        chords = 0.5 * (sub[:, None] + sub[None, :])
        mids = vals[(idx[:, None] + idx[None, :]) // 2]
        worst = max(worst, float(np.max(mids - chords)))
    return worst


def is_path_convex(seg: PathSegment, arch: Architecture, data: Dataset,
                   loss: LossKind, grid_size: int = 101,
                   tol: float = 1e-9) -> bool:
    """True iff every sampled midpoint-convexity inequality holds within ``tol``."""
    if grid_size < 3:
        raise ParameterError("grid_size must be at least 3")
    vals = segment_losses(seg, arch, data, loss, grid_size)
    return max_midpoint_violation(vals) <= tol


def convex_outer_segment(upper_p: NetworkParams,
                         lower_p: NetworkParams) -> PathSegment:
    """Segment interpolating only the outer layer of two embedded block
    parameters; the loss along it is convex and feasibility is preserved when
    the endpoints are feasible."""
    for U, L in zip(upper_p.matrices[:-1], lower_p.matrices[:-1]):
        if U.shape != L.shape or np.any(U != L):
            raise StructureError("hidden layers differ; inputs must come from embed_sum_hidden")
    return PathSegment(upper_p, lower_p, SEGMENT_CONVEX)


def minimize_convex_profile(f, resolution: float = 1e-10) -> float:
    """Ternary search for an argmin of a convex profile on [0, 1]."""
    lo, hi = 0.0, 1.0
    while hi - lo > resolution:
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if f(m1) <= f(m2):
            hi = m2
        else:
            lo = m1
    return 0.5 * (lo + hi)


def restrict_nonincreasing(seg: PathSegment, arch: Architecture, data: Dataset,
                           loss: LossKind, tol: float = 1e-9,
                           grid_size: int = 101) -> PathSegment:
    """Truncate a convex segment at a loss minimizer so it is nonincreasing.

    The minimizer is located by ternary search to absolute resolution 1e-10
    and snapped to 1 when the far endpoint is already minimal within ``tol``.
    """
    if not is_path_convex(seg, arch, data, loss, grid_size=grid_size, tol=tol):
        raise PreconditionError("segment fails the convexity check; cannot restrict")

    def profile(t: float) -> float:
        return empirical_risk(arch, segment_at(seg, t), data, loss)

    c = minimize_convex_profile(profile)
    if profile(1.0) <= profile(c) + tol:
        c = 1.0
    c = min(max(c, 1e-12), 1.0)
    return PathSegment(seg.start, seg.end, seg.kind, scale=c * seg.scale)


def required_width(m: int, n: int, l: int, linear: bool = False) -> int:
    """Minimal width under which every parameter connects to a global minimum:
    ``2m(n+1)^l``, or ``2m(n+1)`` for identity activations."""
    if m < 1 or n < 1 or l < 1:
        raise ParameterError("m, n, l must all be at least 1")
    return 2 * block_factor(m, n, l, linear)


@dataclass(frozen=True)
class EscapePath:
    """Assembled escape path plus the pieces it was built from."""

    path: CompositePath
    upper_steps: tuple[ReparamStep, ...]
    lower_steps: tuple[ReparamStep, ...]
    restricted_scale: float
    reaches_target: bool


def build_escape_path(arch: Architecture, start: NetworkParams,
                      target: NetworkParams, data: Dataset, loss: LossKind,
                      spec: ConstraintSpec, linear: bool | None = None,
                      feas_tol: float = 1e-9,
                      restrict_tol: float = 1e-9) -> EscapePath:
    """Nonincreasing-loss path from ``start`` toward ``target``.

    Both endpoints must be feasible and the minimal width must reach
    ``required_width``.  The result starts at ``start``, never increases the
    loss (within verification tolerance), and ends at a parameter whose loss
    is at most ``min(L(start), L(target))``; when the restricted convex piece
    reaches its far end, the path continues through the target's
    reparametrization steps in reverse and terminates exactly at ``target``.
    """
    start.check_shapes(arch)
    target.check_shapes(arch)
    data.check_shapes(arch)
    if linear is None:
        linear = arch.is_linear
    if linear and not arch.is_linear:
        raise CapabilityError("the relaxed width bound applies only to identity activations")

    m, n, l = arch.output_dim, data.n_samples, arch.depth
    need = required_width(m, n, l, linear)
    if arch.min_width < need:
        formula = "2m(n+1)" if linear else "2m(n+1)^l"
        raise CapabilityError(
            f"minimal width {arch.min_width} is below the required {need} "
            f"(= {formula} for m={m}, n={n}, l={l})"
        )
    if not is_feasible(start, spec, feas_tol):
        raise PreconditionError("start parameter is infeasible under the constraint")
    if not is_feasible(target, spec, feas_tol):
        raise PreconditionError("target parameter is infeasible under the constraint")

    s = block_factor(m, n, l, linear)
    upper, upper_steps = to_block(arch, start, data, BlockSide.UPPER, linear=linear)
    lower, lower_steps = to_block(arch, target, data, BlockSide.LOWER, linear=linear)
    upper_p, lower_p = embed_sum_hidden(upper, lower, s)

    segments = steps_to_segments(upper_steps)
    segments.append(PathSegment(upper, upper_p, SEGMENT_CONSTANT))
    convex_seg = convex_outer_segment(upper_p, lower_p)
    restricted = restrict_nonincreasing(convex_seg, arch, data, loss,
                                        tol=restrict_tol)
    segments.append(restricted)

    reaches = restricted.scale >= 1.0
    if reaches:
        segments.append(PathSegment(lower_p, lower, SEGMENT_CONSTANT))
        for st in reversed(lower_steps):
            segments.append(PathSegment(st.after, st.before, SEGMENT_CONSTANT))

    return EscapePath(
        path=CompositePath(tuple(segments)),
        upper_steps=tuple(upper_steps),
        lower_steps=tuple(lower_steps),
        restricted_scale=restricted.scale,
        reaches_target=reaches,
    )
