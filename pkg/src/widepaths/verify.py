"""Grid-based numerical verification of path and block claims.

Everything here is a check, not a proof: segments are sampled on uniform
grids and the recorded maxima are compared against configured tolerances.
Failures are reported, never raised, and every pass flag can be recomputed
from the recorded maxima alone.  Deviations of constant segments and the
monotonicity violations are recorded relative to ``1 + |loss|``; convexity
violations and constraint excesses are absolute.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .netcore import (Architecture, Dataset, NetworkParams, forward,
                      permute_hidden)
from .objective import (ConstraintSpec, LossKind, constraint_value,
                        empirical_risk)
from .paths import (SEGMENT_CONSTANT, CompositePath, max_midpoint_violation,
                    segment_at)


@dataclass(frozen=True)
class VerifyTolerances:
    constant: float = 1e-8
    convex: float = 1e-9
    monotone: float = 1e-7
    constraint: float = 1e-9


@dataclass(frozen=True)
class SegmentReport:
    index: int
    kind: str
    scale: float
    grid_size: int
    max_loss_deviation: float
    max_monotonicity_violation: float
    max_constraint_excess: float
    passed: bool


@dataclass(frozen=True)
class VerificationReport:
    seed: int
    grid_size: int
    tolerances: VerifyTolerances
    segments: tuple[SegmentReport, ...]
    constant_ok: bool
    convex_ok: bool
    monotone_ok: bool
    feasible_ok: bool
    passed: bool
    start_loss: float
    endpoint_loss: float
    timings: tuple[float, ...] = field(default=(), compare=False)


def verify_path(path: CompositePath, arch: Architecture, data: Dataset,
                loss: LossKind, spec: ConstraintSpec, grid_size: int = 1001,
                tols: VerifyTolerances | None = None,
                seed: int = 0) -> VerificationReport:
    """Sample every segment and record deviations against the tolerances.

    Constant segments record their worst relative loss deviation from the
    segment start; convex segments their worst midpoint-convexity violation.
    Monotonicity is checked across the whole concatenated grid, feasibility at
    every grid point.  An empty path passes vacuously.
    """
    tols = tols or VerifyTolerances()
    seg_reports: list[SegmentReport] = []
    timings: list[float] = []
    all_losses: list[float] = []
    constant_ok = convex_ok = True
    feas_worst = 0.0

    ts = np.linspace(0.0, 1.0, grid_size)
    for i, seg in enumerate(path.segments):
        t0 = time.perf_counter()
        vals = np.empty(grid_size)
        excess = 0.0
        for k, t in enumerate(ts):
            p = segment_at(seg, t)
            vals[k] = empirical_risk(arch, p, data, loss)
            if not spec.is_unconstrained:
                excess = max(excess, constraint_value(p, spec) - 1.0)
        excess = max(excess, 0.0)
        feas_worst = max(feas_worst, excess)

        if seg.kind == SEGMENT_CONSTANT:
            deviation = float(np.max(np.abs(vals - vals[0])) / (1.0 + abs(vals[0])))
            ok = bool(deviation <= tols.constant)
            constant_ok = constant_ok and ok
        else:
            deviation = max_midpoint_violation(vals)
            ok = bool(deviation <= tols.convex)
            convex_ok = convex_ok and ok

        diffs = np.diff(vals) / (1.0 + np.abs(vals[:-1]))
        mono = float(np.max(diffs)) if diffs.size else 0.0
        seg_ok = bool(ok and mono <= tols.monotone and excess <= tols.constraint)
        seg_reports.append(SegmentReport(
            index=i, kind=seg.kind, scale=float(seg.scale), grid_size=grid_size,
            max_loss_deviation=deviation,
            max_monotonicity_violation=max(mono, 0.0),
            max_constraint_excess=float(excess), passed=seg_ok,
        ))
        all_losses.extend(vals.tolist())
        timings.append(time.perf_counter() - t0)

    if all_losses:
        arr = np.array(all_losses)
        diffs = np.diff(arr) / (1.0 + np.abs(arr[:-1]))
        mono_worst = max(float(np.max(diffs)), 0.0) if diffs.size else 0.0
        start_loss, end_loss = float(arr[0]), float(arr[-1])
    else:
        mono_worst = 0.0
        start_loss = end_loss = 0.0

    monotone_ok = bool(mono_worst <= tols.monotone)
    feasible_ok = bool(feas_worst <= tols.constraint)
    return VerificationReport(
        seed=seed, grid_size=grid_size, tolerances=tols,
        segments=tuple(seg_reports),
        constant_ok=constant_ok, convex_ok=convex_ok,
        monotone_ok=monotone_ok, feasible_ok=feasible_ok,
        passed=constant_ok and convex_ok and monotone_ok and feasible_ok,
        start_loss=start_loss, endpoint_loss=end_loss,
        timings=tuple(timings),
    )


def concatenated_profile(path: CompositePath, arch: Architecture,
                         data: Dataset, loss: LossKind,
                         grid_size: int = 1001) -> tuple[np.ndarray, np.ndarray]:
    """(t, loss) table over the whole path; segment i occupies [i, i+1]."""
    ts_all: list[float] = []
    vals_all: list[float] = []
    ts = np.linspace(0.0, 1.0, grid_size)
    for i, seg in enumerate(path.segments):
        for t in ts:
            ts_all.append(i + t)
            vals_all.append(empirical_risk(arch, segment_at(seg, t), data, loss))
    return np.array(ts_all), np.array(vals_all)


@dataclass(frozen=True)
class TrialReport:
    """Outcome of a randomized spot check."""

    name: str
    trials: int
    seed: int
    max_deviation: float
    tol: float
    passed: bool


def verify_block_identity(upper_p: NetworkParams, lower_p: NetworkParams,
                          arch: Architecture, trials: int = 100,
                          seed: int = 0, tol: float = 1e-9) -> TrialReport:
    """Check that mixing the outer layers mixes the outputs linearly.

    For random coefficients and inputs, the network with outer layer
    ``c1*U + c2*L`` must output ``c1 * g_upper(x) + c2 * g_lower(x)``.
    """
    from .blocks import mix_block

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        c1, c2 = rng.uniform(0.0, 1.0, size=2)
        x = rng.normal(size=arch.input_dim)
        mixed = mix_block(upper_p, lower_p, c1, c2)
        lhs = forward(arch, mixed, x)
        rhs = c1 * forward(arch, upper_p, x) + c2 * forward(arch, lower_p, x)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return TrialReport(name="block_identity", trials=trials, seed=seed,
                       max_deviation=worst, tol=tol, passed=worst <= tol)


def verify_symmetry(arch: Architecture, params: NetworkParams, data: Dataset,
                    loss: LossKind, trials: int = 100, seed: int = 0,
                    tol: float = 1e-10) -> TrialReport:
    """Check that relabeling hidden units never moves the loss."""
    rng = np.random.default_rng(seed)
    base = empirical_risk(arch, params, data, loss)
    worst = 0.0
    for _ in range(trials):
        perms = [rng.permutation(w) for w in arch.hidden_dims]
        permuted = permute_hidden(params, perms)
        worst = max(worst, abs(empirical_risk(arch, permuted, data, loss) - base))
    return TrialReport(name="symmetry", trials=trials, seed=seed,
                       max_deviation=worst, tol=tol, passed=worst <= tol)
