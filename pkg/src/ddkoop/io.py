"""Flat-file formats: trajectory CSV, library CSV + JSON sidecar, model JSON."""

import csv
import json
from pathlib import Path
from typing import Union

import numpy as np

from .errors import DimensionError, ParameterError
from .systems import AffineModel, StateSpaceModel
from .trajectory import Trajectory, TrajectoryLibrary

PathLike = Union[str, Path]

# round-trip exact decimal text for float64
FLOAT_FMT = "%.17g"


def _fmt(v: float) -> str:
    return FLOAT_FMT % v


def trajectory_header(m: int, p: int, n=None):
    cols = ["t"] + [f"u{i + 1}" for i in range(m)] + [f"y{i + 1}" for i in range(p)]
    if n:
        cols += [f"x{i + 1}" for i in range(n)]
    return cols


def write_trajectory_csv(path: PathLike, traj: Trajectory) -> None:
    """One row per time step: ``t,u1..um,y1..yp[,x1..xn]``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(traj.m, traj.p, traj.n))
        for k in range(traj.T):
            row = [str(k)] + [_fmt(v) for v in traj.u[k]] + [_fmt(v) for v in traj.y[k]]
            if traj.x is not None:
                row += [_fmt(v) for v in traj.x[k]]
            w.writerow(row)


def read_trajectory_csv(path: PathLike) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParameterError(f"{path}: empty trajectory file")
    header = rows[0]
    if not header or header[0] != "t":
        raise ParameterError(f"{path}: header must start with 't'")
    kinds = [h[0] for h in header[1:]]
    m, p, n = kinds.count("u"), kinds.count("y"), kinds.count("x")
    if header != trajectory_header(m, p, n):
        raise ParameterError(f"{path}: unexpected header {header}")
    data = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float)
    data = data.reshape(len(rows) - 1, m + p + n)
    return Trajectory(data[:, :m], data[:, m:m + p], data[:, m + p:] if n else None)


def write_matrix_csv(path: PathLike, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in M:
            w.writerow([_fmt(v) for v in row])


def read_matrix_csv(path: PathLike) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    return np.array([[float(v) for v in r] for r in rows], dtype=float)


def write_library(stem: PathLike, lib: TrajectoryLibrary) -> dict:
    """Write ``<stem>_U.csv``, ``<stem>_Y.csv`` and ``<stem>.json``; returns the paths."""
    stem = Path(stem)
    paths = {"U_d": stem.with_name(stem.name + "_U.csv"),
             "Y_d": stem.with_name(stem.name + "_Y.csv"),
             "meta": stem.with_name(stem.name + ".json")}
    write_matrix_csv(paths["U_d"], lib.U_d)
    write_matrix_csv(paths["Y_d"], lib.Y_d)
    meta = {"m": lib.m, "p": lib.p, "L": lib.L, "T_ini": lib.T_ini, "N": lib.N, "l": lib.l,
            "single_hankel": lib.single_hankel,
            "U_d": paths["U_d"].name, "Y_d": paths["Y_d"].name}
    paths["meta"].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return {k: str(v) for k, v in paths.items()}


def read_library(meta_path: PathLike) -> TrajectoryLibrary:
    meta_path = Path(meta_path)
    meta = json.loads(meta_path.read_text())
    U = read_matrix_csv(meta_path.parent / meta["U_d"])
    Y = read_matrix_csv(meta_path.parent / meta["Y_d"])
    lib = TrajectoryLibrary(U, Y, meta["m"], meta["p"], meta["T_ini"], meta["N"],
                            single_hankel=bool(meta.get("single_hankel", False)))
    if lib.L != meta["L"] or lib.l != meta["l"]:
        raise DimensionError(f"{meta_path}: sidecar (L, l) disagrees with the matrices")
    return lib


def model_to_dict(model) -> dict:
    mats = {k: np.asarray(getattr(model, k)).tolist() for k in "ABCD"}
    if isinstance(model, AffineModel):
        mats["e"] = model.e.tolist()
        mats["r"] = model.r.tolist()
        return {"kind": "affine", "n": model.n, "m": model.m, "p": model.p, **mats}
    return {"kind": "linear", "n_z": model.n_z, "m": model.m, "p": model.p, **mats}


def model_from_dict(d: dict):
    kind = d.get("kind", "linear")
    try:
        if kind == "affine":
            return AffineModel(d["A"], d["B"], d["C"], d["D"], d["e"], d["r"])
        if kind == "linear":
            return StateSpaceModel(d["A"], d["B"], d["C"], d["D"])
    except KeyError as exc:
        raise ParameterError(f"model file misses matrix {exc}") from None
    raise ParameterError(f"unknown model kind {kind!r}")


def write_model_json(path: PathLike, model) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")


def read_model_json(path: PathLike):
    return model_from_dict(json.loads(Path(path).read_text()))


def to_jsonable(obj):
    """Convert numpy scalars/arrays nested in dicts and lists to plain Python."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def write_json(path: PathLike, obj) -> None:
    Path(path).write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")
