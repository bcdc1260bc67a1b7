"""``ddctl`` command line: collect, predict, control and diagnose scenarios.

Each command reads one JSON scenario file and writes CSV/JSON artifacts plus a
``manifest.json`` into ``--out``. Exit codes: 0 success, 2 configuration
error, 3 numerical failure; errors are also reported as JSON on stderr.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .errors import DivergenceError, InfeasibleError, ParameterError
from .io import (read_matrix_csv, read_model_json, read_trajectory_csv, write_json,
                 write_library, write_trajectory_csv)
from .systems import benchmark_system, lti_as_nonlinear
from .trajectory import library_from_single

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("collect", "predict", "control", "diagnose")


class ConfigError(Exception):
    pass


class NumericalFailure(Exception):
    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail or {}


class Run:
    """Output directory plus the manifest of everything written to it."""

    def __init__(self, out: Path, command: str, seed: int, reps: int, config: dict):
        self.out = out
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = {"command": command, "seed": seed, "reps": reps,
                         "config": config, "files": []}

    def path(self, name: str) -> Path:
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def record(self, name: str, kind: str, **meta):
        self.manifest["files"].append({"path": name, "kind": kind, **meta})

    def close(self):
        write_json(self.out / "manifest.json", self.manifest)


def load_config(path) -> dict:
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    cfg["_base"] = str(path.resolve().parent)
    return cfg


def _resolve(cfg: dict, name) -> Path:
    p = Path(name)
    return p if p.is_absolute() else Path(cfg["_base"]) / p


def _system(cfg: dict):
    """``"benchmark"`` (default) or ``{"model": "<model json>"}``."""
    entry = cfg.get("system", "benchmark")
    if entry == "benchmark":
        return benchmark_system()[0]
    if isinstance(entry, dict) and "model" in entry:
        path = _resolve(cfg, entry["model"])
        if not path.exists():
            raise ConfigError(f"model file {path} not found")
        return lti_as_nonlinear(read_model_json(path), name=path.stem)
    raise ConfigError(f"unknown system entry {entry!r}")


def _section(cfg: dict, name: str, defaults: dict) -> dict:
    s = dict(defaults)
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be an object")
    s.update(sec)
    return s


def _rep_dir(rep: int, reps: int) -> str:
    return "" if reps == 1 else f"rep_{rep:03d}/"


def cmd_collect(cfg: dict, run: Run, seed: int, reps: int):
    s = _section(cfg, "collect", {"trajectories": 1, "length": 52, "u_low": -5.0,
                                  "u_high": 5.0, "x0_low": -1.0, "x0_high": 1.0})
    system = _system(cfg)
    box = {k: float(s[k]) for k in ("u_low", "u_high", "x0_low", "x0_high")}
    law = {"input": "iid uniform", "u_box": [box["u_low"], box["u_high"]],
           "x0": "uniform", "x0_box": [box["x0_low"], box["x0_high"]]}
    n_traj, length = int(s["trajectories"]), int(s["length"])
    if n_traj < 1 or length < 1:
        raise ParameterError("collection needs at least one trajectory of positive length")
    for rep in range(reps):
        rng = ex.rep_rng(seed, rep)
        if n_traj == 1:
            trajs = [ex.collect_trajectory(system, rng, length, **box)]
        else:
            trajs = ex.collect_campaign(system, rng, n_traj, length, **box)
        for i, tr in enumerate(trajs):
            name = f"{_rep_dir(rep, reps)}traj_{i:03d}.csv"
            write_trajectory_csv(run.path(name), tr)
            run.record(name, "trajectory", seed=seed, rep=rep, index=i, length=length,
                       system=system.name, input_law=law)
    return {"trajectories": n_traj * reps}


def _read_u_F(cfg: dict, s: dict):
    if not s.get("u_F_file"):
        return None
    path = _resolve(cfg, s["u_F_file"])
    if not path.exists():
        raise ConfigError(f"u_F file {path} not found")
    text = path.read_text().lstrip()
    if text.startswith("t,"):
        return read_trajectory_csv(path).u
    return read_matrix_csv(path)


def cmd_predict(cfg: dict, run: Run, seed: int, reps: int):
    s = _section(cfg, "predict", ex.default_prediction_settings())
    if cfg.get("system", "benchmark") != "benchmark":
        raise ConfigError("predict supports the built-in benchmark system only")
    u_F = _read_u_F(cfg, s)
    if u_F is not None:
        s["N"] = int(np.atleast_2d(u_F).shape[0]) if np.size(u_F) else 0
    summary = []
    for rep in range(reps):
        res = ex.run_prediction(ex.rep_rng(seed, rep), s, u_F)
        d = _rep_dir(rep, reps)
        truth, preds = res["truth"], res["predictions"]
        p = truth.shape[1]
        names = list(preds)
        header = (["k"] + [f"u{i + 1}" for i in range(res["u_F"].shape[1])]
                  + [f"true_y{i + 1}" for i in range(p)]
                  + [f"{n}_y{i + 1}" for n in names for i in range(p)])
        rows = np.hstack([np.arange(truth.shape[0])[:, None], res["u_F"], truth]
                         + [preds[n] for n in names]) if truth.shape[0] else None
        path = run.path(f"{d}prediction.csv")
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            if rows is not None:
                for r in rows:
                    fh.write(",".join([str(int(r[0]))] + ["%.17g" % v for v in r[1:]]) + "\n")
        run.record(f"{d}prediction.csv", "prediction", seed=seed, rep=rep)
        write_trajectory_csv(run.path(f"{d}collection.csv"), res["collection"])
        run.record(f"{d}collection.csv", "trajectory", seed=seed, rep=rep,
                   draws=res["draws"], lifted_cond=res["lifted_cond"])
        N = int(s["N"])
        for T_ini in sorted(set(s["ddk_T_ini"]) | set(s["dda_T_ini"])):
            lib = library_from_single(res["collection"], int(T_ini) + N, int(T_ini), N)
            for f in write_library(run.path(f"{d}library_T{T_ini}"), lib).values():
                run.record(str(Path(f).relative_to(run.out)), "library", seed=seed, rep=rep,
                           T_ini=int(T_ini), N=N)
        report = {"seed": seed, "rep": rep, "N": int(s["N"]), "errors": res["errors"],
                  "verdicts": res["verdicts"], "draws": res["draws"],
                  "lifted_cond": res["lifted_cond"], "x_test": res["x_test"],
                  "edmd": res["edmd"]}
        write_json(run.path(f"{d}prediction_report.json"), report)
        run.record(f"{d}prediction_report.json", "report", seed=seed, rep=rep)
        summary.append(report)
    write_json(run.path("summary.json"), {"reps": summary})
    run.record("summary.json", "summary", seed=seed)
    return {"errors": [r["errors"] for r in summary]}


def cmd_control(cfg: dict, run: Run, seed: int, reps: int):
    s = _section(cfg, "control", ex.default_control_settings())
    if cfg.get("system", "benchmark") != "benchmark":
        raise ConfigError("control supports the built-in benchmark system only")
    workers = s.pop("workers", None)
    results = ex.run_control_sweep(seed, reps, s, workers=workers)
    failures = []
    per_rep = []
    for r in results:
        d = _rep_dir(r["rep"], reps)
        entry = {"rep": r["rep"], "draws": r["draws"], "lifted_cond": r["lifted_cond"],
                 "methods": {}}
        for name, out in r["runs"].items():
            if not out["ok"]:
                failures.append({"rep": r["rep"], "method": name, "step": out["step"],
                                 "message": out["error"]})
                entry["methods"][name] = {"ok": False, "step": out["step"],
                                          "message": out["error"]}
                continue
            res = out["result"]
            csv_name = f"{d}closed_loop_{name}.csv"
            write_trajectory_csv(run.path(csv_name), res.trajectory)
            run.record(csv_name, "closed_loop", seed=seed, rep=r["rep"], method=name)
            rep_json = {"method": name, "realized_cost": res.realized_cost,
                        "objective": res.objectives, "kkt_residual": res.kkt_residuals,
                        "status": res.statuses, "iterations": res.iterations,
                        "reference": res.references, "predicted_first": res.predicted_first}
            json_name = f"{d}run_{name}.json"
            write_json(run.path(json_name), rep_json)
            run.record(json_name, "run_report", seed=seed, rep=r["rep"], method=name)
            entry["methods"][name] = {"ok": True, "realized_cost": res.realized_cost}
        per_rep.append(entry)
    summary = {"seed": seed, "reps": reps, "mean": ex.summarize_costs(results),
               "per_rep": per_rep, "failures": failures,
               "regularizer_norm": "squared two-norms"}
    write_json(run.path("cost_summary.json"), summary)
    run.record("cost_summary.json", "summary", seed=seed)
    if failures:
        raise NumericalFailure(f"{len(failures)} closed-loop run(s) failed",
                               {"failures": failures})
    return summary["mean"]


def cmd_diagnose(cfg: dict, run: Run, seed: int, reps: int):
    s = _section(cfg, "diagnose", ex.default_diagnose_settings())
    if s.get("trajectory"):
        path = _resolve(cfg, s["trajectory"])
        if not path.exists():
            raise ConfigError(f"trajectory file {path} not found")
        traj = read_trajectory_csv(path)
        source = {"trajectory": str(path)}
    else:
        traj = ex.collect_trajectory(_system(cfg), ex.rep_rng(seed, 0), int(s["length"]))
        write_trajectory_csv(run.path("trajectory.csv"), traj)
        run.record("trajectory.csv", "trajectory", seed=seed, length=int(s["length"]))
        source = {"seed": seed, "length": int(s["length"])}
    report = ex.rank_diagnostics(traj, s["L"], s["nz_bar"], int(s["cert_L"]))
    report["source"] = source
    write_json(run.path("rank_report.json"), report)
    run.record("rank_report.json", "rank_report", **source)
    return {"nonexistence": report["nonexistence"]}


HANDLERS = {"collect": cmd_collect, "predict": cmd_predict, "control": cmd_control,
            "diagnose": cmd_diagnose}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ddctl", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="scenario JSON file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int, default=None,
                    help="master seed (u64); overrides the config's 'seed'")
    ap.add_argument("--reps", type=int, default=None,
                    help="number of seeded repetitions; overrides the config's 'reps'")
    return ap


def _report_error(kind: str, exc: Exception, code: int, **extra) -> int:
    err = {"error": kind, "type": type(exc).__name__, "message": str(exc), "exit_code": code}
    err.update(extra)
    print(json.dumps(err, default=str), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        reps = args.reps if args.reps is not None else int(cfg.get("reps", 1))
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if reps < 1:
            raise ConfigError("reps must be >= 1")
        public = {k: v for k, v in cfg.items() if not k.startswith("_")}
        run = Run(Path(args.out), args.command, seed, reps, public)
        try:
            result = HANDLERS[args.command](cfg, run, seed, reps)
        finally:
            run.close()
    except NumericalFailure as exc:
        return _report_error("numerical", exc, EXIT_NUMERIC, **exc.detail)
    except (DivergenceError, InfeasibleError) as exc:
        return _report_error("numerical", exc, EXIT_NUMERIC, step=getattr(exc, "step", None))
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        return _report_error("numerical", exc, EXIT_NUMERIC)
    except (ConfigError, KeyError, ValueError) as exc:
        # ParameterError, DimensionError and LengthError are ValueErrors
        return _report_error("configuration", exc, EXIT_CONFIG)
    print(json.dumps({"command": args.command, "out": str(args.out), "seed": seed,
                      "reps": reps, "result": result}, default=_json_default))
    return EXIT_OK


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


if __name__ == "__main__":
    sys.exit(main())
