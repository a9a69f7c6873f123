"""File formats: JSON for parameters, paths, configs, and reports; CSV data.

Parameters and paths round-trip bitwise: floats are written with Python's
shortest round-trip decimal representation.  Matrices are stored row-major as
nested arrays next to explicit shape fields.  Datasets are headerless CSV in
the same layout as the matrices they hold (one sample per column).  The
infinite constraint exponent is encoded as the string ``"inf"``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ParseError
from .netcore import (ActivationKind, Architecture, Dataset, NetworkParams,
                      params_from_lists)
from .objective import ConstraintSpec, LossKind
from .paths import CompositePath, PathSegment
from .verify import VerificationReport, VerifyTolerances


def params_to_obj(params: NetworkParams) -> dict:
    return {
        "shapes": [list(M.shape) for M in params.matrices],
        "matrices": [M.tolist() for M in params.matrices],
    }


def params_from_obj(obj: Any) -> NetworkParams:
    try:
        shapes = [tuple(s) for s in obj["shapes"]]
        mats = [np.asarray(M, dtype=np.float64) for M in obj["matrices"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed parameter object: {exc}") from exc
    if [M.shape for M in mats] != shapes:
        raise ParseError("declared shapes do not match matrix data")
    try:
        return params_from_lists(mats)
    except Exception as exc:
        raise ParseError(f"invalid parameter data: {exc}") from exc


def save_params(params: NetworkParams, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(params_to_obj(params), fh, indent=1)
        fh.write("\n")


def load_params(path: str) -> NetworkParams:
    return params_from_obj(_load_json(path))


def path_to_obj(path: CompositePath) -> dict:
    return {
        "segments": [
            {
                "kind": seg.kind,
                "scale": seg.scale,
                "start": params_to_obj(seg.start),
                "end": params_to_obj(seg.end),
            }
            for seg in path.segments
        ]
    }


def path_from_obj(obj: Any) -> CompositePath:
    try:
        segs = [
            PathSegment(
                start=params_from_obj(s["start"]),
                end=params_from_obj(s["end"]),
                kind=s["kind"],
                scale=float(s["scale"]),
            )
            for s in obj["segments"]
        ]
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed path object: {exc}") from exc
    try:
        return CompositePath(tuple(segs))
    except Exception as exc:
        raise ParseError(f"inconsistent path: {exc}") from exc


def save_path(path_obj: CompositePath, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(path_to_obj(path_obj), fh, indent=1)
        fh.write("\n")


def load_path(path: str) -> CompositePath:
    return path_from_obj(_load_json(path))


def report_to_obj(report: VerificationReport) -> dict:
    """Serializable view of a report; timings are dropped for byte stability."""
    t = report.tolerances
    return {
        "seed": report.seed,
        "grid_size": report.grid_size,
        "tolerances": {"constant": t.constant, "convex": t.convex,
                       "monotone": t.monotone, "constraint": t.constraint},
        "segments": [
            {
                "index": s.index,
                "kind": s.kind,
                "scale": s.scale,
                "grid_size": s.grid_size,
                "max_loss_deviation": s.max_loss_deviation,
                "max_monotonicity_violation": s.max_monotonicity_violation,
                "max_constraint_excess": s.max_constraint_excess,
                "passed": s.passed,
            }
            for s in report.segments
        ],
        "overall": {
            "constant_ok": report.constant_ok,
            "convex_ok": report.convex_ok,
            "monotone_ok": report.monotone_ok,
            "feasible_ok": report.feasible_ok,
            "passed": report.passed,
        },
        "start_loss": report.start_loss,
        "endpoint_loss": report.endpoint_loss,
    }


def save_report(report: VerificationReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_obj(report), fh, indent=1, sort_keys=True)
        fh.write("\n")


def save_profile_tsv(ts: np.ndarray, losses: np.ndarray, path: str) -> None:
    """Two-column tab-separated (t, loss) table for external plotting."""
    with open(path, "w", encoding="utf-8") as fh:
        for t, v in zip(ts, losses):
            fh.write(f"{float(t)!r}\t{float(v)!r}\n")


def save_dataset_csv(M: np.ndarray, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.atleast_2d(M):
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def _load_csv_matrix(path: str) -> np.ndarray:
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rows.append([float(tok) for tok in line.split(",")])
    except ValueError as exc:
        raise ParseError(f"{path}: malformed CSV: {exc}") from exc
    if not rows or len({len(r) for r in rows}) != 1:
        raise ParseError(f"{path}: empty or ragged CSV")
    return np.asarray(rows, dtype=np.float64)


def load_dataset(x_path: str, y_path: str) -> Dataset:
    try:
        return Dataset(_load_csv_matrix(x_path), _load_csv_matrix(y_path))
    except ParseError:
        raise
    except Exception as exc:
        raise ParseError(f"invalid dataset: {exc}") from exc


_ACTIVATION_KEYS = {"kind", "c", "k"}


def _activation_from_obj(obj: Any) -> ActivationKind:
    if isinstance(obj, str):
        return ActivationKind(obj)
    if isinstance(obj, dict):
        unknown = set(obj) - _ACTIVATION_KEYS
        if unknown:
            raise ParseError(f"unknown activation keys {sorted(unknown)}")
        try:
            return ActivationKind(obj["kind"], c=obj.get("c"), k=obj.get("k"))
        except KeyError as exc:
            raise ParseError("activation object needs a 'kind' field") from exc
    raise ParseError(f"cannot parse activation from {obj!r}")


def _activation_to_obj(kind: ActivationKind) -> Any:
    if kind.c is None and kind.k is None:
        return kind.name
    obj = {"kind": kind.name}
    if kind.c is not None:
        obj["c"] = kind.c
    if kind.k is not None:
        obj["k"] = kind.k
    return obj


def _q_from_obj(q: Any) -> float:
    if q == "inf":
        return math.inf
    if isinstance(q, (int, float)):
        return float(q)
    raise ParseError(f"cannot parse constraint exponent {q!r}")


@dataclass(frozen=True)
class RunConfig:
    """Everything one run needs: model, loss, constraint, data, knobs."""

    arch: Architecture
    loss: LossKind
    constraint: ConstraintSpec
    data: Dataset
    seed: int
    grid: int
    tolerances: VerifyTolerances
    x_path: str
    y_path: str


_CONFIG_KEYS = {"dims", "activations", "loss", "constraint", "data", "seed",
                "grid", "tolerances"}
_CONSTRAINT_KEYS = {"a_r", "b_r", "q"}
_TOL_KEYS = {"constant", "convex", "monotone", "constraint"}


def _load_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc


def load_config(path: str) -> RunConfig:
    obj = _load_json(path)
    if not isinstance(obj, dict):
        raise ParseError(f"{path}: config must be a JSON object")
    unknown = set(obj) - _CONFIG_KEYS
    if unknown:
        raise ParseError(f"{path}: unknown config keys {sorted(unknown)}")
    missing = {"dims", "activations", "loss", "data"} - set(obj)
    if missing:
        raise ParseError(f"{path}: missing config keys {sorted(missing)}")

    try:
        arch = Architecture(tuple(obj["dims"]),
                            tuple(_activation_from_obj(a) for a in obj["activations"]))
    except ParseError:
        raise
    except Exception as exc:
        raise ParseError(f"{path}: invalid architecture: {exc}") from exc

    try:
        loss = LossKind(obj["loss"])
    except ValueError as exc:
        raise ParseError(f"{path}: unknown loss {obj['loss']!r}") from exc

    cobj = obj.get("constraint", {})
    unknown = set(cobj) - _CONSTRAINT_KEYS
    if unknown:
        raise ParseError(f"{path}: unknown constraint keys {sorted(unknown)}")
    try:
        constraint = ConstraintSpec(a_r=float(cobj.get("a_r", 0.0)),
                                    b_r=float(cobj.get("b_r", 0.0)),
                                    q=_q_from_obj(cobj.get("q", "inf")))
    except ParseError:
        raise
    except Exception as exc:
        raise ParseError(f"{path}: invalid constraint: {exc}") from exc

    dobj = obj["data"]
    if not isinstance(dobj, dict) or set(dobj) != {"x", "y"}:
        raise ParseError(f"{path}: data must be an object with keys 'x' and 'y'")
    base = os.path.dirname(os.path.abspath(path))
    x_path = os.path.join(base, dobj["x"])
    y_path = os.path.join(base, dobj["y"])
    for p in (x_path, y_path):
        if not os.path.exists(p):
            raise ParseError(f"referenced data file does not exist: {p}")
    data = load_dataset(x_path, y_path)
    if data.X.shape[0] != arch.input_dim or data.Y.shape[0] != arch.output_dim:
        raise ParseError(f"{path}: dataset shapes do not match the architecture")

    tobj = obj.get("tolerances", {})
    unknown = set(tobj) - _TOL_KEYS
    if unknown:
        raise ParseError(f"{path}: unknown tolerance keys {sorted(unknown)}")
    tols = VerifyTolerances(
        constant=float(tobj.get("constant", 1e-8)),
        convex=float(tobj.get("convex", 1e-9)),
        monotone=float(tobj.get("monotone", 1e-7)),
        constraint=float(tobj.get("constraint", 1e-9)),
    )

    return RunConfig(arch=arch, loss=loss, constraint=constraint, data=data,
                     seed=int(obj.get("seed", 0)), grid=int(obj.get("grid", 1001)),
                     tolerances=tols, x_path=x_path, y_path=y_path)


def config_to_obj(arch: Architecture, loss: LossKind, constraint: ConstraintSpec,
                  x_name: str, y_name: str, seed: int, grid: int,
                  tols: VerifyTolerances) -> dict:
    return {
        "dims": list(arch.dims),
        "activations": [_activation_to_obj(a) for a in arch.activations],
        "loss": loss.value,
        "constraint": {
            "a_r": constraint.a_r,
            "b_r": constraint.b_r,
            "q": "inf" if math.isinf(constraint.q) else constraint.q,
        },
        "data": {"x": x_name, "y": y_name},
        "seed": seed,
        "grid": grid,
        "tolerances": {"constant": tols.constant, "convex": tols.convex,
                       "monotone": tols.monotone, "constraint": tols.constraint},
    }
