"""Seeded data collection and the benchmark experiments behind ``ddctl``.

Every function takes an explicit ``numpy.random.Generator`` (or a seed) and
returns plain arrays and dicts; file output lives in :mod:`ddkoop.cli`.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .control import (ControllerConfig, DDAController, DDKController, EDMDController,
                      SinusoidReference, StepReference, run_receding_horizon,
                      zero_input_warm_start)
from .errors import InfeasibleError, ParameterError
from .lifting import (LiftingDictionary, SnapshotSet, edmd_fit, lifted_excitation_matrix,
                      random_centers, thin_plate_dictionary)
from .representation import (PredictionProblem, dda_predict, ddk_predict,
                             embedding_nonexistence_certificate, koopman_predict)
from .systems import (NonlinearSystem, benchmark_system, simulate_nonlinear,
                      simulate_nonlinear_batch)
from .trajectory import Trajectory, build_hankel, is_persistently_exciting, library_from_single
from ._linalg import numerical_rank

#: Default cap on cond(H_K) for an accepted benchmark collection.
MAX_LIFTED_COND = 1e9


def rep_rng(seed: int, rep: int = 0) -> np.random.Generator:
    """Independent stream for repetition ``rep`` of master seed ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(rep),)))


@dataclass
class Collection:
    traj: Trajectory
    draws: int                 # attempts until the collection was accepted
    lifted_cond: float         # cond(H_K), nan when no dictionary was given


def collect_trajectory(system: NonlinearSystem, rng: np.random.Generator, length: int,
                       u_low=-5.0, u_high=5.0, x0_low=-1.0, x0_high=1.0) -> Trajectory:
    """One i.i.d.-uniform input experiment from a uniform random initial state."""
    if length < 1:
        raise ParameterError("collection length must be positive")
    x0 = rng.uniform(x0_low, x0_high, system.n)
    u = rng.uniform(u_low, u_high, (length, system.m))
    return simulate_nonlinear(system, x0, u)


def collect_excited(system: NonlinearSystem, rng: np.random.Generator, length: int, L: int,
                    dictionary: Optional[LiftingDictionary] = None,
                    max_cond: Optional[float] = MAX_LIFTED_COND, max_draws: int = 100,
                    **box) -> Collection:
    """Collect one trajectory, redrawing until the lifted excitation is well posed.

    With a known dictionary the matrix ``H_K = [U_d; Phi(x_0^i)]`` of the
    length-``L`` windows must have full row rank and, if ``max_cond`` is set,
    condition number at most ``max_cond``. Without a dictionary the first draw
    is accepted.
    """
    for draw in range(1, max_draws + 1):
        traj = collect_trajectory(system, rng, length, **box)
        if dictionary is None:
            return Collection(traj, draw, float("nan"))
        H_K = lifted_excitation_matrix(build_hankel(traj.u, L), traj.x[:traj.T - L + 1],
                                       dictionary)
        s = np.linalg.svd(H_K, compute_uv=False)
        rank, _ = numerical_rank(H_K)
        cond = s[0] / s[-1] if s[-1] > 0 else np.inf
        if rank == H_K.shape[0] and (max_cond is None or cond <= max_cond):
            return Collection(traj, draw, float(cond))
    raise ParameterError(f"no acceptable collection in {max_draws} draws")


def collect_campaign(system: NonlinearSystem, rng: np.random.Generator, trajectories: int,
                     length: int, u_low=-5.0, u_high=5.0, x0_low=-1.0,
                     x0_high=1.0) -> List[Trajectory]:
    """``trajectories`` independent experiments of equal ``length``."""
    if trajectories < 1 or length < 2:
        raise ParameterError("need at least one trajectory of length >= 2")
    x0s = rng.uniform(x0_low, x0_high, (trajectories, system.n))
    us = rng.uniform(u_low, u_high, (trajectories, length, system.m))
    return simulate_nonlinear_batch(system, x0s, us)


def fit_edmd_benchmark(system: NonlinearSystem, rng: np.random.Generator, trajectories=200,
                       length=200, centers=300, residuals=True):
    """Thin-plate EDMD model from a fresh campaign; returns ``(EdmdResult, dictionary)``."""
    trajs = collect_campaign(system, rng, trajectories, length)
    dic = thin_plate_dictionary(random_centers(rng, centers, system.n), include_state=True)
    return edmd_fit(SnapshotSet.from_trajectories(trajs), dic, residuals=residuals), dic


def sinusoid_inputs(N: int, m: int = 1, amplitude: float = 5.0, omega: float = np.pi / 4):
    """``u_k = amplitude * sin(omega * k)`` on every input channel, ``k = 0..N-1``."""
    k = np.arange(N, dtype=float)
    return np.repeat((amplitude * np.sin(omega * k))[:, None], m, axis=1)


def default_prediction_settings() -> dict:
    return {"length": 52, "N": 20, "ddk_T_ini": [2, 3, 4], "dda_T_ini": [2],
            "edmd": True, "edmd_trajectories": 200, "edmd_length": 200, "edmd_centers": 300,
            "amplitude": 5.0, "omega": np.pi / 4, "max_lifted_cond": MAX_LIFTED_COND}


def run_prediction(rng: np.random.Generator, settings: Optional[dict] = None,
                   u_F=None) -> dict:
    """Compare DD-K, DD-A and EDMD-K predictions with the benchmark truth.

    The libraries come from one collection of ``length`` samples; the DD-K
    library with the deepest ``T_ini`` fixes ``L`` for the excitation check.
    The test case starts from a fresh random state, runs a random past window
    of ``max(T_ini)`` samples and then applies ``u_F`` (default: sinusoid).

    Returns a dict with ``truth`` (N, p), ``predictions`` {method: (N, p)},
    ``errors`` {method: max abs error} and diagnostic fields.
    """
    s = default_prediction_settings()
    s.update(settings or {})
    system, _, dic = benchmark_system()
    N = int(s["N"])
    T_inis = [int(t) for t in s["ddk_T_ini"]]
    dda_T = [int(t) for t in s["dda_T_ini"]]
    depth = max(T_inis + dda_T + [0])
    L_gate = max(T_inis) + N if T_inis else N + 1
    col = collect_excited(system, rng, int(s["length"]), L_gate, dic, s["max_lifted_cond"])
    traj = col.traj

    if u_F is None:
        u_F = sinusoid_inputs(N, system.m, s["amplitude"], s["omega"])
    u_F = np.asarray(u_F, dtype=float).reshape(-1, system.m)
    if u_F.shape[0] != N:
        raise ParameterError(f"u_F has {u_F.shape[0]} steps, expected N = {N}")
    x_test = rng.uniform(-1.0, 1.0, system.n)
    u_past = rng.uniform(-5.0, 5.0, (depth, system.m))
    # one trailing zero input so the state at the prediction start exists for N = 0
    test = simulate_nonlinear(system, x_test, np.vstack([u_past, u_F, np.zeros((1, system.m))]))
    truth = test.y[depth:depth + N]
    x_now = test.x[depth]

    preds: Dict[str, np.ndarray] = {}
    verdicts: Dict[str, str] = {}
    for T_ini in T_inis:
        lib = library_from_single(traj, T_ini + N, T_ini, N)
        past = test.window(depth - T_ini, T_ini)
        res = ddk_predict(lib, PredictionProblem.from_trajectory(past, u_F))
        preds[f"dd-k{T_ini}"] = res.y_F.reshape(N, system.p)
        verdicts[f"dd-k{T_ini}"] = res.verdict
    for T_ini in dda_T:
        lib = library_from_single(traj, T_ini + N, T_ini, N)
        past = test.window(depth - T_ini, T_ini)
        res = dda_predict(lib, PredictionProblem.from_trajectory(past, u_F))
        preds[f"dd-a{T_ini}"] = res.y_F.reshape(N, system.p)
        verdicts[f"dd-a{T_ini}"] = res.verdict
    edmd_info = None
    if s["edmd"]:
        fit, tps = fit_edmd_benchmark(system, rng, s["edmd_trajectories"], s["edmd_length"],
                                      s["edmd_centers"])
        preds["edmd-k"] = koopman_predict(fit.model, tps, x_now, u_F).reshape(N, system.p)
        edmd_info = {"rank": fit.rank, "residual": fit.residual,
                     "rank_deficient": fit.rank_deficient}
    errors = {k: float(np.max(np.abs(v - truth), initial=0.0)) for k, v in preds.items()}
    return {"truth": truth, "u_F": u_F, "predictions": preds, "errors": errors,
            "verdicts": verdicts, "collection": traj, "draws": col.draws,
            "lifted_cond": col.lifted_cond, "x_test": x_test, "edmd": edmd_info}


def default_control_settings() -> dict:
    return {"methods": ["dd-k", "dd-a", "edmd-k"], "steps": 60, "N": 20,
            "R_step": [[1.0]], "Q_step": [[0.0, 0.0], [0.0, 100.0]],
            "u_min": [-5.0], "u_max": [5.0],
            "reference": {"kind": "step", "value": [0.0, 5.0]},
            "x0": [0.5, 0.0], "length": 52,
            "ddk_T_ini": 4, "dda_T_ini": 2, "lambda_g": 400.0, "lambda_y": 2e5,
            "edmd_trajectories": 200, "edmd_length": 200, "edmd_centers": 300,
            "max_lifted_cond": MAX_LIFTED_COND}


def make_reference(ref_cfg, p: int):
    """``{"kind": "step", "value": [...]}`` or ``{"kind": "sinusoid", ...}``."""
    kind = ref_cfg.get("kind", "step")
    if kind == "step":
        value = np.asarray(ref_cfg.get("value", np.zeros(p)), dtype=float).reshape(-1)
        if value.size != p:
            raise ParameterError(f"step reference needs {p} entries")
        return StepReference(value)
    if kind == "sinusoid":
        return SinusoidReference(p, int(ref_cfg.get("channel", p - 1)),
                                 float(ref_cfg.get("amplitude", 5.0)),
                                 float(ref_cfg.get("omega", np.pi / 30)))
    raise ParameterError(f"unknown reference kind {kind!r}")


def control_configs(s: dict, p: int) -> Dict[str, ControllerConfig]:
    ref = make_reference(s["reference"], p)
    common = dict(N=int(s["N"]), R_step=s["R_step"], Q_step=s["Q_step"],
                  u_min=s["u_min"], u_max=s["u_max"], reference=ref)
    return {"dd-k": ControllerConfig(T_ini=int(s["ddk_T_ini"]), **common),
            "dd-a": ControllerConfig(T_ini=int(s["dda_T_ini"]), lambda_g=float(s["lambda_g"]),
                                     lambda_y=float(s["lambda_y"]), **common),
            "edmd-k": ControllerConfig(T_ini=0, **common)}


def run_control_rep(seed: int, rep: int, settings: Optional[dict] = None) -> dict:
    """One seeded dataset: collect, build every requested controller, close the loop.

    Failures (infeasible steps) are recorded per method rather than raised so a
    sweep can report them.
    """
    s = default_control_settings()
    s.update(settings or {})
    unknown = set(s["methods"]) - {"dd-k", "dd-a", "edmd-k"}
    if unknown:
        raise ParameterError(f"unknown methods {sorted(unknown)}")
    rng = rep_rng(seed, rep)
    system, _, dic = benchmark_system()
    cfgs = control_configs(s, system.p)
    N = cfgs["dd-k"].N
    T_k, T_a = cfgs["dd-k"].T_ini, cfgs["dd-a"].T_ini
    col = collect_excited(system, rng, int(s["length"]), T_k + N, dic, s["max_lifted_cond"])

    controllers = {}
    if "dd-k" in s["methods"]:
        controllers["dd-k"] = DDKController(library_from_single(col.traj, T_k + N, T_k, N),
                                            cfgs["dd-k"])
    if "dd-a" in s["methods"]:
        controllers["dd-a"] = DDAController(library_from_single(col.traj, T_a + N, T_a, N),
                                            cfgs["dd-a"])
    if "edmd-k" in s["methods"]:
        fit, tps = fit_edmd_benchmark(system, rng, s["edmd_trajectories"], s["edmd_length"],
                                      s["edmd_centers"], residuals=False)
        controllers["edmd-k"] = EDMDController(fit.model, tps, cfgs["edmd-k"])

    out = {"seed": int(seed), "rep": int(rep), "draws": col.draws,
           "lifted_cond": col.lifted_cond, "collection": col.traj, "runs": {}}
    # one shared warm start so every method starts from the same plant state
    warm = zero_input_warm_start(system, s["x0"], max(c.T_ini for c in controllers.values()))
    out["warm_start"] = warm
    for name in s["methods"]:
        c = controllers[name]
        try:
            res = run_receding_horizon(system, c, int(s["steps"]), warm)
            out["runs"][name] = {"ok": True, "result": res, "cost": res.realized_cost}
        except InfeasibleError as exc:
            out["runs"][name] = {"ok": False, "error": str(exc), "step": exc.step,
                                 "cost": float("nan")}
    return out


def _rep_worker(args):
    seed, rep, settings = args
    return run_control_rep(seed, rep, settings)


def run_control_sweep(seed: int, reps: int, settings: Optional[dict] = None,
                      workers: Optional[int] = None) -> List[dict]:
    """Repetitions ``0..reps-1`` of :func:`run_control_rep`, optionally in parallel.

    Results are returned in repetition order, so the output does not depend
    on the number of workers.
    """
    if reps < 1:
        raise ParameterError("reps must be >= 1")
    if workers is None:
        workers = min(reps, os.cpu_count() or 1)
    jobs = [(seed, r, settings) for r in range(reps)]
    if workers <= 1:
        return [_rep_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_rep_worker, jobs))


def summarize_costs(reps: Sequence[dict]) -> dict:
    """Mean realized cost per method over the successful repetitions."""
    names = list(reps[0]["runs"]) if reps else []
    summary = {}
    for name in names:
        costs = np.array([r["runs"][name]["cost"] for r in reps], dtype=float)
        ok = np.isfinite(costs)
        summary[name] = {"mean_cost": float(costs[ok].mean()) if ok.any() else float("nan"),
                         "successes": int(ok.sum()), "failures": int((~ok).sum())}
    return summary


def default_diagnose_settings() -> dict:
    return {"L": list(range(1, 31)), "nz_bar": [3, 5], "cert_L": 24, "length": 400,
            "pe_orders": True}


def rank_diagnostics(traj: Trajectory, L_values: Sequence[int], nz_bars: Sequence[int],
                     cert_L: int) -> dict:
    """Hankel rank growth, input PE order and nonexistence verdicts.

    Raises:
        LengthError: when ``cert_L`` or an entry of ``L_values`` exceeds the
            trajectory length.
    """
    growth = []
    for L in L_values:
        lib = library_from_single(traj, int(L), int(L), 0)
        rank, tol = numerical_rank(lib.H_d)
        growth.append({"L": int(L), "rank": rank, "mL": traj.m * int(L),
                       "excess": rank - traj.m * int(L), "columns": lib.l})
    pe_order = 0
    for L in range(1, traj.T + 1):
        if traj.T - L + 1 < traj.m * L or not is_persistently_exciting(traj.u, L):
            break
        pe_order = L
    lib = library_from_single(traj, int(cert_L), int(cert_L), 0)
    verdicts = []
    for nz in nz_bars:
        rep = embedding_nonexistence_certificate(lib, int(nz))
        verdicts.append({"nz_bar": int(nz), "verdict": rep.verdict, "rank": rep.rank,
                         "bound": rep.bound, "tol": rep.tol})
    return {"T": traj.T, "m": traj.m, "p": traj.p, "rank_growth": growth,
            "input_pe_order": pe_order, "certificate_L": int(cert_L),
            "nonexistence": verdicts}

