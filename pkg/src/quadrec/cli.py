"""Command-line front end: simulate, solve, grid, sweep, verify.

Configuration is a strict JSON document; unknown keys anywhere are rejected
so typos never silently fall back to defaults.  Every output directory gets
a config.json echo of the effective configuration for provenance.  Exit
codes: 0 success, 1 solve/verification failure, 2 usage or config error.
"""

import argparse
import copy
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import rng
from .generative import PGDConfig, ProjectionConfig, default_w0, projected_power, solve_pgd
from .harness import (
    Algorithm,
    SUCCESS_THRESHOLD,
    _generative_truth,
    build_model,
    run_cell,
    sample_sparse_signal,
    spectral_closeness_sweep,
    write_sweep_csv,
    write_trials_csv,
)
from .measure import MeasurementEnsemble, MeasurementSet, Storage, simulate, sample_ensemble
from .metrics import cosine_similarity, relative_distance
from .oracle import concentration_suite, expectation_check
from .results import Status, TRACE_HEADER, trace_row
from .sparse import Constant, Damped, SparseConfig, ThresholdKind, solve_twf

__all__ = ["main", "ConfigError", "load_config", "DEFAULT_CONFIG"]


class ConfigError(Exception):
    """Invalid configuration; maps to exit code 2."""


DEFAULT_CONFIG = {
    "problem": {"n": 100, "k": 10, "m": 200, "seed": 0},
    "prior": {"kind": "sparse", "normalize": False},
    "algorithm": {
        "name": "twf",
        "alpha": 0.5,
        "mu": 0.1,
        "iterations": 4000,
        "threshold": "soft",
        "early_stop_tol": None,
        "success_threshold": SUCCESS_THRESHOLD,
        "beta": {"kind": "damped", "beta0": 0.5, "factor": 0.5, "period": 1000},
    },
    "experiment": {
        "k_values": [10, 20, 30, 40, 50, 60, 70, 80, 90, 100],
        "m_values": [25, 50, 75, 100, 125, 150, 175, 200],
        "trials": 100,
    },
    "output": {"directory": "out", "formats": ["csv", "json"]},
}

_PRIOR_KEYS = {
    "sparse": {"kind", "normalize"},
    "subspace": {"kind", "seed", "r"},
    "relu_decoder": {"kind", "seed", "h", "r", "normalize_output"},
}
_PRIOR_DEFAULTS = {
    "sparse": {"normalize": False},
    "subspace": {"seed": 0, "r": 2.0},
    "relu_decoder": {"seed": 0, "h": 64, "r": 2.0, "normalize_output": False},
}
_SPARSE_ALGO_KEYS = {
    "name", "alpha", "mu", "iterations", "threshold", "early_stop_tol",
    "success_threshold", "beta",
}
_BETA_KEYS = {"constant": {"kind", "beta0"}, "damped": {"kind", "beta0", "factor", "period"}}
_PGD_ALGO_KEYS = {
    "name", "mu", "iterations", "epsilon", "init", "success_threshold", "projection",
}
_PGD_ALGO_DEFAULTS = {
    "mu": 0.9, "iterations": 10, "epsilon": 0.1, "init": "ppower",
    "success_threshold": SUCCESS_THRESHOLD,
    "projection": {"steps": 100, "step_size": 0.1, "restarts": 5, "restart_seed": 0},
}
_PROJECTION_KEYS = {"steps", "step_size", "restarts", "restart_seed"}


def _reject_unknown(section: dict, allowed: set, where: str) -> None:
    extra = sorted(set(section) - allowed)
    if extra:
        raise ConfigError(f"unknown keys in {where}: {extra}")


def _merged(defaults: dict, user: dict, where: str) -> dict:
    _reject_unknown(user, set(defaults), where)
    out = copy.deepcopy(defaults)
    out.update(user)
    return out


def load_config(path: str | None, overrides: dict | None = None) -> dict:
    """Effective configuration: defaults, then file, then CLI overrides.

    Unknown keys at any level raise ConfigError.  The prior and algorithm
    sections are validated against the schema selected by their kind/name.
    """
    if path is None:
        user = {}
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
    _reject_unknown(user, set(DEFAULT_CONFIG), "config")

    cfg = {}
    cfg["problem"] = _merged(
        DEFAULT_CONFIG["problem"], user.get("problem", {}), "problem"
    )
    cfg["prior"] = _load_prior(user.get("prior", {}))
    cfg["algorithm"] = _load_algorithm(user.get("algorithm", {}))
    cfg["experiment"] = _merged(
        DEFAULT_CONFIG["experiment"], user.get("experiment", {}), "experiment"
    )
    cfg["output"] = _merged(DEFAULT_CONFIG["output"], user.get("output", {}), "output")

    for key, value in (overrides or {}).items():
        section, field = key
        cfg[section][field] = value
    _validate_problem(cfg["problem"])
    _check_pairing(cfg)
    return cfg


def _load_prior(user: dict) -> dict:
    kind = user.get("kind", "sparse")
    if kind not in _PRIOR_KEYS:
        raise ConfigError(
            f"prior.kind must be one of {sorted(_PRIOR_KEYS)}, got {kind!r}"
        )
    _reject_unknown(user, _PRIOR_KEYS[kind], f"prior ({kind})")
    out = {"kind": kind, **copy.deepcopy(_PRIOR_DEFAULTS[kind])}
    out.update(user)
    return out


def _load_algorithm(user: dict) -> dict:
    name = user.get("name", "twf")
    if name in ("twf", "wf"):
        _reject_unknown(user, _SPARSE_ALGO_KEYS, f"algorithm ({name})")
        out = copy.deepcopy(DEFAULT_CONFIG["algorithm"])
        beta = user.get("beta", {})
        out.update(user)
        out["name"] = name
        if beta:
            beta_kind = beta.get("kind", "damped")
            if beta_kind not in _BETA_KEYS:
                raise ConfigError("algorithm.beta.kind must be 'constant' or 'damped'")
            _reject_unknown(beta, _BETA_KEYS[beta_kind], "algorithm.beta")
            full = {"kind": beta_kind, "beta0": 0.5, "factor": 0.5, "period": 1000}
            full.update(beta)
            if beta_kind == "constant":
                full = {"kind": "constant", "beta0": full["beta0"]}
            out["beta"] = full
        return out
    if name in ("ppower", "pgd", "ppower_then_pgd"):
        _reject_unknown(user, _PGD_ALGO_KEYS, f"algorithm ({name})")
        out = {"name": name, **copy.deepcopy(_PGD_ALGO_DEFAULTS)}
        proj = user.get("projection", {})
        out.update(user)
        if proj:
            _reject_unknown(proj, _PROJECTION_KEYS, "algorithm.projection")
            full = copy.deepcopy(_PGD_ALGO_DEFAULTS["projection"])
            full.update(proj)
            out["projection"] = full
        if out["init"] not in ("flat", "ppower"):
            raise ConfigError("algorithm.init must be 'flat' or 'ppower'")
        return out
    raise ConfigError(f"unknown algorithm name {name!r}")


def _validate_problem(problem: dict) -> None:
    n, k, m = problem["n"], problem["k"], problem["m"]
    if n < 1 or m < 1:
        raise ConfigError("problem.n and problem.m must be positive")
    if not 0 <= k <= n:
        raise ConfigError("problem.k must lie in [0, n]")


def _check_pairing(cfg: dict) -> None:
    name = cfg["algorithm"]["name"]
    kind = cfg["prior"]["kind"]
    sparse_algo = name in ("twf", "wf")
    sparse_prior = kind == "sparse"
    if sparse_algo != sparse_prior:
        raise ConfigError(
            f"algorithm {name!r} does not pair with prior kind {kind!r}"
        )


def _sparse_config(algo: dict) -> SparseConfig:
    beta = algo["beta"]
    if beta["kind"] == "constant":
        schedule = Constant(beta["beta0"])
    else:
        schedule = Damped(beta["beta0"], beta["factor"], beta["period"])
    if algo["name"] == "wf":
        schedule = Constant(0.0)
    if algo["threshold"] not in ("soft", "hard"):
        raise ConfigError("algorithm.threshold must be 'soft' or 'hard'")
    kind = ThresholdKind.SOFT if algo["threshold"] == "soft" else ThresholdKind.HARD
    return SparseConfig(
        alpha=algo["alpha"], beta=schedule, mu=algo["mu"],
        iterations=algo["iterations"], kind=kind,
        early_stop_tol=algo["early_stop_tol"],
    )


def _pgd_config(algo: dict) -> PGDConfig:
    proj = algo["projection"]
    return PGDConfig(
        mu=algo["mu"], iterations=algo["iterations"], epsilon=algo["epsilon"],
        inner=ProjectionConfig(
            steps=proj["steps"], step_size=proj["step_size"],
            restarts=proj["restarts"], restart_seed=proj["restart_seed"],
        ),
    )


def _model_blob(cfg: dict) -> dict:
    problem, prior = cfg["problem"], cfg["prior"]
    if prior["kind"] == "subspace":
        return {
            "kind": "subspace", "seed": prior["seed"], "n": problem["n"],
            "k": problem["k"], "r": prior["r"],
        }
    return {
        "kind": "relu", "seed": prior["seed"], "n": problem["n"],
        "h": prior["h"], "k": problem["k"], "r": prior["r"],
        "normalize_output": prior["normalize_output"],
    }


def _make_truth(cfg: dict) -> np.ndarray:
    problem, prior = cfg["problem"], cfg["prior"]
    signal_seed = rng.derive_seed(problem["seed"], 1)
    if prior["kind"] == "sparse":
        return sample_sparse_signal(
            problem["n"], problem["k"], signal_seed, normalize=prior["normalize"]
        ).values
    model = build_model(_model_blob(cfg))
    return _generative_truth(model, signal_seed)


def _write_vector_csv(path: Path, column: str, values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([column])
        for v in values:
            writer.writerow([format(float(v), ".17g")])


def _read_vector_csv(path: Path, column: str) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != [column]:
        raise ConfigError(f"{path} must have a single '{column}' column")
    return np.array([float(r[0]) for r in rows[1:]])


def _echo_config(cfg: dict, out_dir: Path) -> None:
    (out_dir / "config.json").write_text(json.dumps(cfg, indent=2) + "\n")


def cmd_simulate(cfg: dict, out_dir: Path) -> int:
    """Write truth.csv, y.csv, and ensemble.json for the configured problem."""
    problem = cfg["problem"]
    truth = _make_truth(cfg)
    ens = sample_ensemble(problem["n"], problem["m"], rng.derive_seed(problem["seed"], 2))
    mset = simulate(ens, truth)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_vector_csv(out_dir / "truth.csv", "x", mset.truth)
    _write_vector_csv(out_dir / "y.csv", "y", mset.y)
    (out_dir / "ensemble.json").write_text(json.dumps(ens.header(), indent=2) + "\n")
    _echo_config(cfg, out_dir)
    return 0


def _load_measurements(in_dir: Path) -> MeasurementSet:
    header_path = in_dir / "ensemble.json"
    if not header_path.exists():
        raise ConfigError(f"missing {header_path}")
    header = json.loads(header_path.read_text())
    _reject_unknown(header, {"n", "m", "seed", "storage"}, "ensemble.json")
    ens = MeasurementEnsemble(
        n=header["n"], m=header["m"], seed=header["seed"],
        storage=Storage(header["storage"]),
    )
    y_path = in_dir / "y.csv"
    if not y_path.exists():
        raise ConfigError(f"missing {y_path}")
    y = _read_vector_csv(y_path, "y")
    truth_path = in_dir / "truth.csv"
    truth = _read_vector_csv(truth_path, "x") if truth_path.exists() else None
    if truth is not None and not np.any(truth):
        truth = None  # metrics are undefined against an all-zero truth
    return MeasurementSet(ensemble=ens, y=y, truth=truth)


def cmd_solve(cfg: dict, in_dir: Path, out_dir: Path, init_override: str | None) -> int:
    """Run the configured solver on simulate artifacts; write the estimate,
    the iteration trace, and result.json."""
    mset = _load_measurements(in_dir)
    algo = cfg["algorithm"]
    start = time.perf_counter()
    if algo["name"] in ("twf", "wf"):
        res = solve_twf(mset, _sparse_config(algo))
        estimate, status, iterations = res.estimate, res.status, res.iterations
        trace = res.trace
    else:
        model = build_model(_model_blob(cfg))
        pgd_cfg = _pgd_config(algo)
        init = init_override or algo["init"]
        w0 = default_w0(mset.ensemble.n)
        if algo["name"] == "ppower":
            estimate = projected_power(mset, model, w0, pgd_cfg.inner)
            status, iterations, trace = Status.COMPLETED, 1, []
        else:
            if init == "ppower":
                x0 = projected_power(mset, model, w0, pgd_cfg.inner)
                extra = 1
            else:
                x0 = w0
                extra = 0
            res = solve_pgd(mset, model, x0, pgd_cfg)
            estimate, status = res.estimate, res.status
            iterations, trace = res.iterations + extra, res.trace
    wall_ms = (time.perf_counter() - start) * 1e3

    rel = cos = None
    if mset.truth is not None:
        rel = relative_distance(estimate, mset.truth)
        if np.any(estimate):
            cos = cosine_similarity(estimate, mset.truth / np.linalg.norm(mset.truth))
        else:
            cos = 0.0
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_vector_csv(out_dir / "estimate.csv", "x", estimate)
    with open(out_dir / "trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for rec in trace:
            writer.writerow(trace_row(rec))
    result = {
        "status": status.value,
        "rel_dist": rel,
        "cosine": cos,
        "iterations": iterations,
        "wall_time_ms": wall_ms,
        "config": cfg,
    }
    (out_dir / "result.json").write_text(json.dumps(result, indent=2) + "\n")
    _echo_config(cfg, out_dir)
    return 0 if status in (Status.COMPLETED, Status.EARLY_STOPPED) else 1


def _cell_paths(cells_dir: Path, k: int, m: int) -> tuple[Path, Path]:
    stem = f"k{k}_m{m}"
    return cells_dir / f"{stem}.csv", cells_dir / f"{stem}.done"


def cmd_grid(cfg: dict, out_dir: Path, workers: int, resume: bool, fresh: bool) -> int:
    """Success-rate grid with per-cell resume markers.

    Each (k, m) cell writes its trial rows to cells/k{K}_m{M}.csv and an
    empty .done marker; grid.csv and trials.csv are assembled from the cell
    files, so an interrupted run resumed later is byte-identical to an
    uninterrupted one.
    """
    algo = cfg["algorithm"]
    if algo["name"] not in ("twf", "wf"):
        raise ConfigError("grid runs the sparse-track algorithms (twf or wf)")
    exp = cfg["experiment"]
    k_values = [int(k) for k in exp["k_values"]]
    m_values = [int(m) for m in exp["m_values"]]
    if not k_values or not m_values:
        raise ConfigError("experiment.k_values and m_values must be non-empty")
    trials = int(exp["trials"])
    if trials < 1:
        raise ConfigError("experiment.trials must be at least 1")
    algorithm = Algorithm.TWF if algo["name"] == "twf" else Algorithm.WF
    solver_cfg = _sparse_config(algo)
    base_seed = cfg["problem"]["seed"]
    n = cfg["problem"]["n"]

    out_dir.mkdir(parents=True, exist_ok=True)
    cells_dir = out_dir / "cells"
    leftovers = list(cells_dir.glob("*")) if cells_dir.exists() else []
    if leftovers and not (resume or fresh):
        print(
            f"error: {cells_dir} holds a partial run; pass --resume to continue "
            "it or --fresh to discard it",
            file=sys.stderr,
        )
        return 2
    if fresh:
        for p in leftovers:
            p.unlink()
    cells_dir.mkdir(exist_ok=True)

    header_row = None
    all_rows = []
    grid_rows = []
    for k in k_values:
        for m in m_values:
            csv_path, done_path = _cell_paths(cells_dir, k, m)
            if not (done_path.exists() and csv_path.exists()):
                records = run_cell(
                    n, k, m, trials, base_seed, algorithm=algorithm,
                    cfg=solver_cfg,
                    success_threshold=algo["success_threshold"],
                    workers=workers,
                )
                write_trials_csv(records, csv_path)
                done_path.touch()
            with open(csv_path, newline="") as fh:
                rows = list(csv.reader(fh))
            header_row, cell_rows = rows[0], rows[1:]
            if len(cell_rows) != trials:
                raise ConfigError(
                    f"{csv_path} holds {len(cell_rows)} rows, expected {trials}; "
                    "rerun with --fresh"
                )
            all_rows.extend(cell_rows)
            successes = sum(row[8] == "true" for row in cell_rows)
            grid_rows.append([k, m, format(successes / trials, ".17g"), trials])
    with open(out_dir / "trials.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header_row)
        writer.writerows(all_rows)
    with open(out_dir / "grid.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("k", "m", "success_rate", "trials"))
        writer.writerows(grid_rows)
    _echo_config(cfg, out_dir)
    return 0


def cmd_sweep(cfg: dict, out_dir: Path) -> int:
    """Initializer-closeness quartiles over the configured m axis."""
    algo = cfg["algorithm"]
    if algo["name"] not in ("twf", "wf"):
        raise ConfigError("sweep compares the sparse-track initializers")
    exp, problem = cfg["experiment"], cfg["problem"]
    rows = spectral_closeness_sweep(
        problem["n"], problem["k"],
        [int(m) for m in exp["m_values"]],
        int(exp["trials"]), problem["seed"], alpha=algo["alpha"],
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, out_dir / "sweep.csv")
    _echo_config(cfg, out_dir)
    return 0


def cmd_verify(seed: int) -> int:
    """Run the oracle checks; print a JSON array; exit 1 on any failure."""
    x = sample_sparse_signal(10, 10, seed=77, normalize=True).values
    reports = concentration_suite(seed)
    reports.append(expectation_check(10, 10**5, seed=seed, x=x))
    print(json.dumps([r.to_dict() for r in reports], indent=2))
    return 0 if all(r.passed for r in reports) else 1


def _build_parser() -> argparse.ArgumentParser:
    # Shared flags are accepted both before and after the subcommand; SUPPRESS
    # keeps a flag given in one position from being clobbered by the other
    # parser's default.
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", default=argparse.SUPPRESS,
                        help="JSON config file (strict keys)")
    shared.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override problem.seed")
    shared.add_argument("--workers", type=int, default=argparse.SUPPRESS,
                        help="worker processes for grid trials")
    shared.add_argument("--out", default=argparse.SUPPRESS,
                        help="override output.directory")
    parser = argparse.ArgumentParser(
        prog="quadrec",
        description="Recovery from quadratic Gaussian measurements: "
        "simulation, solvers, experiment grids, and verification.",
        parents=[shared],
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", help="write truth.csv, y.csv, ensemble.json",
                   parents=[shared])
    solve = sub.add_parser("solve", help="run the configured solver",
                           parents=[shared])
    solve.add_argument("--in", dest="in_dir", required=True,
                       help="directory holding simulate outputs")
    solve.add_argument("--init", choices=("flat", "ppower"),
                       help="initializer override for pgd")
    grid = sub.add_parser("grid", help="success-rate grid over (k, m)",
                          parents=[shared])
    resume = grid.add_mutually_exclusive_group()
    resume.add_argument("--resume", action="store_true",
                        help="continue a partial run")
    resume.add_argument("--fresh", action="store_true",
                        help="discard a partial run and start over")
    sub.add_parser("sweep", help="initializer-closeness sweep over m",
                   parents=[shared])
    sub.add_parser("verify", help="run the verification oracles",
                   parents=[shared])
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    seed = getattr(args, "seed", None)
    out = getattr(args, "out", None)
    try:
        overrides = {}
        if seed is not None:
            overrides[("problem", "seed")] = seed
        if out is not None:
            overrides[("output", "directory")] = out
        cfg = load_config(getattr(args, "config", None), overrides)
        out_dir = Path(cfg["output"]["directory"])
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir)
        if args.command == "solve":
            return cmd_solve(cfg, Path(args.in_dir), out_dir, args.init)
        if args.command == "grid":
            return cmd_grid(cfg, out_dir, getattr(args, "workers", 1),
                            args.resume, args.fresh)
        if args.command == "sweep":
            return cmd_sweep(cfg, out_dir)
        return cmd_verify(cfg["problem"]["seed"])
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
