"""Command-line entry point.

Subcommands: ``demo`` (generate a seeded instance), ``sparsify`` (rewrite a
parameter into block form), ``escape`` (build and certify a nonincreasing
path to a target), ``verify`` (re-check a stored path), and ``oracle``
(reference minimizers).  Exit codes: 0 success, 1 I/O or parse problem,
2 capability or precondition violation, 3 constructed but failed verification.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import blocks, globalmin, paths, plotting, serialize, verify
from .errors import ParseError, WidepathsError
from .netcore import Architecture, NetworkParams, forward_batch
from .objective import ConstraintSpec, constraint_value, empirical_risk, is_feasible
from .serialize import RunConfig

EXIT_OK = 0
EXIT_IO = 1
EXIT_CAPABILITY = 2
EXIT_VERIFICATION = 3


def _random_params(arch: Architecture, spec: ConstraintSpec,
                   rng: np.random.Generator) -> NetworkParams:
    """Seeded draw, rescaled branchwise so the constraint holds exactly."""
    mats = [rng.normal(scale=1.0 / np.sqrt(max(c, 1)), size=(r, c))
            for r, c in arch.matrix_shapes()]
    params = NetworkParams(tuple(mats))
    if spec.is_unconstrained:
        return params
    from .objective import rowwise_lq_norm

    hidden_worst = spec.a_r * max(rowwise_lq_norm(M, 1.0) for M in mats[1:])
    input_worst = spec.b_r * rowwise_lq_norm(mats[0], spec.q)
    scale_h = min(1.0, 1.0 / hidden_worst) if hidden_worst > 0 else 1.0
    scale_i = min(1.0, 1.0 / input_worst) if input_worst > 0 else 1.0
    scaled = [mats[0] * scale_i] + [M * scale_h for M in mats[1:]]
    return NetworkParams(tuple(scaled))


def _resolve_target(value: str, cfg: RunConfig, rng: np.random.Generator,
                    brute_grid: int, brute_bound: float) -> NetworkParams:
    if value == "outer-solve":
        inner = _random_params(cfg.arch, cfg.constraint, rng).matrices[:-1]
        return globalmin.outer_layer_solve(cfg.arch, inner, cfg.data, cfg.loss).params
    if value == "brute-force":
        return globalmin.brute_force_min(cfg.arch, cfg.data, cfg.loss,
                                         cfg.constraint, grid=brute_grid,
                                         bound=brute_bound).params
    return serialize.load_params(value)


def _outdir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_demo(args) -> int:
    out = _outdir(args)
    seed = args.seed if args.seed is not None else 20240
    rng = np.random.default_rng(seed)
    if args.linear:
        arch = Architecture((2, 8, 8, 1), ("identity", "identity"))
    else:
        arch = Architecture((2, 8, 1), ("relu",))
    n = 3
    X = rng.normal(size=(arch.input_dim, n))
    Y = rng.normal(size=(arch.output_dim, n))
    serialize.save_dataset_csv(X, os.path.join(out, "X.csv"))
    serialize.save_dataset_csv(Y, os.path.join(out, "Y.csv"))

    spec = ConstraintSpec()
    cfg_obj = serialize.config_to_obj(arch, serialize.LossKind.SQUARED, spec,
                                      "X.csv", "Y.csv", seed=seed,
                                      grid=args.grid or 1001,
                                      tols=verify.VerifyTolerances())
    with open(os.path.join(out, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(cfg_obj, fh, indent=1)
        fh.write("\n")

    start = _random_params(arch, spec, rng)
    serialize.save_params(start, os.path.join(out, "start_params.json"))
    print(f"demo instance written to {out} (seed {seed})")
    print("run: widepaths escape --config "
          f"{os.path.join(out, 'config.json')} --start "
          f"{os.path.join(out, 'start_params.json')} --target outer-solve "
          f"--out {out}" + (" --linear" if args.linear else ""))
    return EXIT_OK


def cmd_sparsify(args) -> int:
    cfg = serialize.load_config(args.config)
    params = serialize.load_params(args.params)
    params.check_shapes(cfg.arch)
    side = blocks.BlockSide(args.side)
    linear = True if args.linear else None

    before_cv = constraint_value(params, cfg.constraint)
    before_out = forward_batch(cfg.arch, params, cfg.data.X)
    block, steps = blocks.to_block(cfg.arch, params, cfg.data, side, linear=linear)
    after_cv = constraint_value(block, cfg.constraint)
    after_out = forward_batch(cfg.arch, block, cfg.data.X)
    deviation = float(np.max(np.abs(after_out - before_out)))
    denom = 1.0 + float(np.max(np.abs(before_out)))

    out = _outdir(args)
    param_path = os.path.join(out, "block_params.json")
    serialize.save_params(block, param_path)
    m, n, l = cfg.arch.output_dim, cfg.data.n_samples, cfg.arch.depth
    is_lin = cfg.arch.is_linear if linear is None else linear
    summary = {
        "side": side.value,
        "s": blocks.block_factor(m, n, l, is_lin),
        "steps": len(steps),
        "constraint_before": before_cv,
        "constraint_after": after_cv,
        "forward_deviation": deviation,
        "forward_deviation_relative": deviation / denom,
    }
    with open(os.path.join(out, "sparsify_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"block parameter written to {param_path}")
    print(f"s={summary['s']} side={side.value} steps={len(steps)} "
          f"constraint {before_cv:.6g} -> {after_cv:.6g} "
          f"forward deviation {deviation:.3g}")
    return EXIT_OK


def _write_path_outputs(out: str, cfg: RunConfig, path: paths.CompositePath,
                        report, grid: int) -> None:
    serialize.save_report(report, os.path.join(out, "report.json"))
    ts, losses = verify.concatenated_profile(path, cfg.arch, cfg.data, cfg.loss,
                                             grid_size=min(grid, 201))
    serialize.save_profile_tsv(ts, losses, os.path.join(out, "profile.tsv"))
    cvals = None
    if not cfg.constraint.is_unconstrained:
        cvals = []
        per_seg = np.linspace(0.0, 1.0, min(grid, 201))
        for i, seg in enumerate(path.segments):
            for t in per_seg:
                cvals.append(constraint_value(paths.segment_at(seg, t), cfg.constraint))
        cvals = np.array(cvals)
    plotting.render_loss_profile(ts, losses, os.path.join(out, "profile.png"),
                                 constraint_values=cvals)


def cmd_escape(args) -> int:
    cfg = serialize.load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.seed
    grid = args.grid if args.grid is not None else cfg.grid
    tols = cfg.tolerances
    if args.tol_mono is not None:
        tols = verify.VerifyTolerances(constant=tols.constant, convex=tols.convex,
                                       monotone=args.tol_mono,
                                       constraint=tols.constraint)
    rng = np.random.default_rng(seed)

    if args.start is not None:
        start = serialize.load_params(args.start)
        start.check_shapes(cfg.arch)
    else:
        start = _random_params(cfg.arch, cfg.constraint, rng)
    target = _resolve_target(args.target, cfg, rng, args.brute_grid, args.brute_bound)
    target.check_shapes(cfg.arch)

    linear = True if args.linear else None
    escape = paths.build_escape_path(cfg.arch, start, target, cfg.data, cfg.loss,
                                     cfg.constraint, linear=linear)
    report = verify.verify_path(escape.path, cfg.arch, cfg.data, cfg.loss,
                                cfg.constraint, grid_size=grid, tols=tols,
                                seed=seed)

    out = _outdir(args)
    serialize.save_path(escape.path, os.path.join(out, "path.json"))
    _write_path_outputs(out, cfg, escape.path, report, grid)

    target_loss = empirical_risk(cfg.arch, target, cfg.data, cfg.loss)
    print(f"path: {len(escape.path)} segments, restricted scale "
          f"{escape.restricted_scale:.6g}, reaches target: {escape.reaches_target}")
    print(f"loss: start {report.start_loss:.9g} -> end {report.endpoint_loss:.9g} "
          f"(target {target_loss:.9g})")
    for name in ("constant_ok", "convex_ok", "monotone_ok", "feasible_ok"):
        print(f"  {name}: {'pass' if getattr(report, name) else 'FAIL'}")
    if not report.passed:
        print("verification FAILED", file=sys.stderr)
        return EXIT_VERIFICATION
    print(f"verification passed; outputs in {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = serialize.load_config(args.config)
    path = serialize.load_path(args.path)
    for seg in path.segments:
        seg.start.check_shapes(cfg.arch)
    seed = args.seed if args.seed is not None else cfg.seed
    grid = args.grid if args.grid is not None else cfg.grid
    report = verify.verify_path(path, cfg.arch, cfg.data, cfg.loss,
                                cfg.constraint, grid_size=grid,
                                tols=cfg.tolerances, seed=seed)
    out = _outdir(args)
    _write_path_outputs(out, cfg, path, report, grid)
    print(f"verification {'passed' if report.passed else 'FAILED'}; "
          f"report in {out}")
    return EXIT_OK if report.passed else EXIT_VERIFICATION


def cmd_oracle(args) -> int:
    cfg = serialize.load_config(args.config)
    rng = np.random.default_rng(args.seed if args.seed is not None else cfg.seed)
    if args.method == "outer-solve":
        if args.params is not None:
            inner = serialize.load_params(args.params).matrices[:-1]
        else:
            inner = _random_params(cfg.arch, cfg.constraint, rng).matrices[:-1]
        result = globalmin.outer_layer_solve(cfg.arch, inner, cfg.data, cfg.loss)
    else:
        result = globalmin.brute_force_min(cfg.arch, cfg.data, cfg.loss,
                                           cfg.constraint, grid=args.brute_grid,
                                           bound=args.brute_bound)
    out = _outdir(args)
    serialize.save_params(result.params, os.path.join(out, "oracle_params.json"))
    summary = {
        "method": result.method,
        "achieved_risk": result.achieved_risk,
        "certificate": result.certificate,
        "feature_rank": result.feature_rank,
        "feasible": is_feasible(result.params, cfg.constraint),
    }
    with open(os.path.join(out, "oracle.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"oracle ({result.method}): risk {result.achieved_risk:.9g}, "
          f"certificate {result.certificate:.3g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="widepaths",
        description="Constructive nonincreasing loss paths in wide feedforward "
                    "networks, with numerical verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="run configuration JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--grid", type=int, default=None, help="grid points per segment")
        p.add_argument("--out", default=None, help="output directory (default: .)")

    p = sub.add_parser("demo", help="generate a seeded demo instance")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--linear", action="store_true",
                   help="identity-activation two-hidden-layer variant")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("sparsify", help="rewrite a parameter into block form")
    common(p)
    p.add_argument("--params", required=True, help="parameter file to sparsify")
    p.add_argument("--side", choices=["upper", "lower"], default="upper")
    p.add_argument("--linear", action="store_true",
                   help="use the relaxed identity-activation bound")
    p.set_defaults(func=cmd_sparsify)

    p = sub.add_parser("escape", help="build and certify an escape path")
    common(p)
    p.add_argument("--start", default=None,
                   help="start parameter file (default: seeded random draw)")
    p.add_argument("--target", default="outer-solve",
                   help="'outer-solve', 'brute-force', or a parameter file")
    p.add_argument("--linear", action="store_true",
                   help="use the relaxed identity-activation bound")
    p.add_argument("--tol-mono", type=float, default=None,
                   help="relative monotonicity tolerance")
    p.add_argument("--brute-grid", type=int, default=3)
    p.add_argument("--brute-bound", type=float, default=1.0)
    p.set_defaults(func=cmd_escape)

    p = sub.add_parser("verify", help="re-verify a stored path")
    common(p)
    p.add_argument("--path", required=True, help="path file to verify")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle", help="compute a reference minimizer")
    common(p)
    p.add_argument("--method", choices=["outer-solve", "brute-force"],
                   default="outer-solve")
    p.add_argument("--params", default=None,
                   help="take inner layers from this parameter file")
    p.add_argument("--brute-grid", type=int, default=3)
    p.add_argument("--brute-bound", type=float, default=1.0)
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except WidepathsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY


if __name__ == "__main__":
    sys.exit(main())
