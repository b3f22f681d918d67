"""Experiment harness: signal sampling, per-trial orchestration, and the
success-rate and initializer-closeness experiment grids.

Every trial is fully deterministic given its seed: sub-seeds for the signal
and the ensemble are derived from the trial seed with the library's mixing
hash, so grids can be re-run, resumed, or parallelized without changing a
single number.
"""

import csv
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import rng
from .generative import (
    GenerativeModel,
    PGDConfig,
    ReluDecoderModel,
    SubspaceModel,
    default_w0,
    projected_power,
    solve_pgd,
)
from .measure import Signal, sample_ensemble, simulate
from .metrics import cosine_similarity, norm_matched_distance, relative_distance
from .results import Status
from .sparse import Constant, SparseConfig, paired_spectral_inits, solve_twf

__all__ = [
    "Algorithm",
    "TrialSpec",
    "TrialRecord",
    "GridResult",
    "SweepRow",
    "SUCCESS_THRESHOLD",
    "sample_sparse_signal",
    "build_model",
    "run_trial",
    "run_cell",
    "phase_transition_grid",
    "spectral_closeness_sweep",
    "write_trials_csv",
    "write_grid_csv",
    "write_sweep_csv",
    "relative_distance",
    "cosine_similarity",
    "norm_matched_distance",
]

SUCCESS_THRESHOLD = 1e-3

TRIALS_HEADER = (
    "n", "k", "m", "algorithm", "trial_seed", "status", "rel_dist",
    "cosine", "success", "iterations_used", "wall_time_ms",
)
GRID_HEADER = ("k", "m", "success_rate", "trials")
SWEEP_HEADER = ("m", "algo", "q25", "median", "q75")


class Algorithm(Enum):
    WF = "wf"
    TWF = "twf"
    PPOWER = "ppower"
    PGD = "pgd"
    PPOWER_THEN_PGD = "ppower_then_pgd"


SPARSE_ALGORITHMS = frozenset({Algorithm.WF, Algorithm.TWF})
GENERATIVE_ALGORITHMS = frozenset(
    {Algorithm.PPOWER, Algorithm.PGD, Algorithm.PPOWER_THEN_PGD}
)


def sample_sparse_signal(n: int, k: int, seed: int, normalize: bool = False) -> Signal:
    """Draw a k-sparse signal: uniform support, Uniform[-0.5, 0.5] nonzeros.

    The support is a uniform size-k subset (partial Fisher-Yates on the
    library's own uniform stream, so the draw is platform-independent).
    k = 0 gives the zero vector.

    Args:
        n: ambient dimension.
        k: support size, 0 <= k <= n.
        seed: signal seed.
        normalize: when set, rescale to unit norm (theory-mode signals).
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, n], got k={k} with n={n}")
    x = np.zeros(n)
    if k == 0:
        return Signal(x, sparsity=0)
    picks = rng.uniforms(seed, rng.SIGNAL_STREAM, 0, k)
    values = rng.uniforms(seed, rng.SIGNAL_STREAM, k, k) - 0.5
    idx = np.arange(n)
    for j in range(k):
        swap = j + int(picks[j] * (n - j))
        idx[j], idx[swap] = idx[swap], idx[j]
    x[idx[:k]] = values
    if normalize:
        norm = np.linalg.norm(x)
        if norm == 0.0:
            raise ValueError("cannot normalize an all-zero draw")
        x = x / norm
    return Signal(x, sparsity=k)


def build_model(blob: dict) -> GenerativeModel:
    """Instantiate a generative model from its serialized form (strict keys)."""
    if not isinstance(blob, dict) or "kind" not in blob:
        raise ValueError("model description must be a dict with a 'kind' key")
    kind = blob["kind"]
    if kind == "subspace":
        required = {"kind", "seed", "n", "k", "r"}
        _check_keys(blob, required, required)
        return SubspaceModel.from_seed(blob["seed"], blob["n"], blob["k"], blob["r"])
    if kind == "relu":
        required = {"kind", "seed", "n", "h", "k", "r"}
        _check_keys(blob, required, required | {"normalize_output"})
        return ReluDecoderModel(
            blob["seed"], n=blob["n"], h=blob["h"], k=blob["k"], r=blob["r"],
            normalize_output=bool(blob.get("normalize_output", False)),
        )
    raise ValueError(f"unknown model kind {kind!r}")


def _check_keys(blob: dict, required: set, allowed: set) -> None:
    missing = required - set(blob)
    if missing:
        raise ValueError(f"model description missing keys: {sorted(missing)}")
    extra = set(blob) - allowed
    if extra:
        raise ValueError(f"unknown model keys: {sorted(extra)}")


@dataclass(frozen=True)
class TrialSpec:
    """One trial: problem size, algorithm, solver config, and a seed.

    Sparse algorithms (WF, TWF) draw a k-sparse signal; generative algorithms
    need a serialized model whose (n, k) must match the spec and draw the
    truth from the model range.  WF is TWF with the threshold schedule pinned
    to zero, so any beta in a WF config is ignored.
    """

    n: int
    k: int
    m: int
    algorithm: Algorithm
    trial_seed: int
    config: SparseConfig | PGDConfig | None = None
    model: dict | None = None
    normalize_signal: bool = False
    success_threshold: float = SUCCESS_THRESHOLD

    def __post_init__(self):
        if min(self.n, self.k, self.m) < 1:
            raise ValueError("n, k, and m must be positive")
        if self.k > self.n:
            raise ValueError("k cannot exceed n")
        if self.success_threshold <= 0:
            raise ValueError("success_threshold must be positive")
        if self.algorithm in SPARSE_ALGORITHMS:
            if self.model is not None:
                raise ValueError(f"{self.algorithm.value} does not take a model")
            if self.config is not None and not isinstance(self.config, SparseConfig):
                raise ValueError(f"{self.algorithm.value} needs a SparseConfig")
        else:
            if self.model is None:
                raise ValueError(f"{self.algorithm.value} needs a model")
            if self.config is not None and not isinstance(self.config, PGDConfig):
                raise ValueError(f"{self.algorithm.value} needs a PGDConfig")
            if self.model.get("n") != self.n or self.model.get("k") != self.k:
                raise ValueError("model (n, k) must match the trial spec")


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one trial; wall time is excluded from equality."""

    spec: TrialSpec
    status: Status
    rel_dist: float
    cosine: float
    success: bool
    iterations_used: int
    wall_time_ms: float = field(compare=False)

    def __post_init__(self):
        if self.rel_dist < 0:
            raise ValueError("rel_dist must be nonnegative")
        if self.success != (self.rel_dist < self.spec.success_threshold):
            raise ValueError("success flag inconsistent with rel_dist")


def _generative_truth(model: GenerativeModel, signal_seed: int) -> np.ndarray:
    z = rng.standard_normals(signal_seed, rng.LATENT_STREAM, 0, model.k)
    norm = np.linalg.norm(z)
    if norm == 0.0:
        raise ValueError("degenerate latent draw")
    radius = min(1.0, model.r)
    return model.decode(z * (radius / norm))


def _execute(spec: TrialSpec):
    signal_seed = rng.derive_seed(spec.trial_seed, 1)
    ensemble_seed = rng.derive_seed(spec.trial_seed, 2)
    if spec.algorithm in SPARSE_ALGORITHMS:
        truth = sample_sparse_signal(
            spec.n, spec.k, signal_seed, normalize=spec.normalize_signal
        ).values
        cfg = spec.config if spec.config is not None else SparseConfig()
        if spec.algorithm is Algorithm.WF:
            cfg = replace(cfg, beta=Constant(0.0))
        mset = simulate(sample_ensemble(spec.n, spec.m, ensemble_seed), truth)
        res = solve_twf(mset, cfg)
        return truth, res.estimate, res.status, res.iterations
    model = build_model(spec.model)
    truth = _generative_truth(model, signal_seed)
    cfg = spec.config if spec.config is not None else PGDConfig()
    mset = simulate(sample_ensemble(spec.n, spec.m, ensemble_seed), truth)
    w0 = default_w0(spec.n)
    with warnings.catch_warnings():
        # The flat start correlates with the truth in a random sign; the
        # sign-blind metrics below make that immaterial, so the projected
        # power step's correlation warning is noise at grid scale.
        warnings.filterwarnings("ignore", message=".*positively correlated.*")
        if spec.algorithm is Algorithm.PPOWER:
            est = projected_power(mset, model, w0, cfg.inner)
            return truth, est, Status.COMPLETED, 1
        if spec.algorithm is Algorithm.PGD:
            res = solve_pgd(mset, model, w0, cfg)
            return truth, res.estimate, res.status, res.iterations
        x0 = projected_power(mset, model, w0, cfg.inner)
        res = solve_pgd(mset, model, x0, cfg)
        return truth, res.estimate, res.status, res.iterations + 1


def run_trial(spec: TrialSpec) -> TrialRecord:
    """Run one trial end to end; solver errors become a Failed record.

    Deterministic given the spec: the signal and the ensemble get derived
    sub-seeds, so identical specs produce identical records (wall time
    aside).  A failed or degenerate trial records rel_dist = inf and
    cosine = 0 rather than raising, so grids never abort.
    """
    start = time.perf_counter()
    try:
        truth, estimate, status, iterations = _execute(spec)
        rel = relative_distance(estimate, truth)
        truth_norm = np.linalg.norm(truth)
        if np.linalg.norm(estimate) == 0.0:
            cos = 0.0
        else:
            cos = cosine_similarity(estimate, truth / truth_norm)
    except Exception:
        wall = (time.perf_counter() - start) * 1e3
        return TrialRecord(
            spec=spec, status=Status.FAILED, rel_dist=float("inf"), cosine=0.0,
            success=False, iterations_used=0, wall_time_ms=wall,
        )
    wall = (time.perf_counter() - start) * 1e3
    return TrialRecord(
        spec=spec,
        status=status,
        rel_dist=rel,
        cosine=cos,
        success=rel < spec.success_threshold,
        iterations_used=iterations,
        wall_time_ms=wall,
    )


@dataclass(frozen=True)
class GridResult:
    """Success rates over a (k, m) grid, with per-cell trial counts."""

    k_values: tuple
    m_values: tuple
    success_rate: np.ndarray
    trials: np.ndarray

    def __post_init__(self):
        expect = (len(self.k_values), len(self.m_values))
        if self.success_rate.shape != expect or self.trials.shape != expect:
            raise ValueError("matrix shapes must match the axes")
        if np.any(self.success_rate < 0) or np.any(self.success_rate > 1):
            raise ValueError("success rates must lie in [0, 1]")


def _cell_specs(n, k, m, trials, base_seed, algorithm, cfg, success_threshold):
    return [
        TrialSpec(
            n=n, k=k, m=m, algorithm=algorithm,
            trial_seed=rng.derive_seed(base_seed, k, m, t),
            config=cfg, success_threshold=success_threshold,
        )
        for t in range(trials)
    ]


def run_cell(
    n: int,
    k: int,
    m: int,
    trials: int,
    base_seed: int,
    algorithm: Algorithm = Algorithm.TWF,
    cfg: SparseConfig | None = None,
    success_threshold: float = SUCCESS_THRESHOLD,
    workers: int = 1,
) -> list[TrialRecord]:
    """All trials for one (k, m) grid cell, in trial order."""
    specs = _cell_specs(n, k, m, trials, base_seed, algorithm, cfg, success_threshold)
    return _run_specs(specs, workers)


def _run_specs(specs, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_trial, specs, chunksize=1))
    return [run_trial(s) for s in specs]


def phase_transition_grid(
    k_values,
    m_values,
    trials: int,
    base_seed: int,
    cfg: SparseConfig | None = None,
    n: int = 100,
    algorithm: Algorithm = Algorithm.TWF,
    success_threshold: float = SUCCESS_THRESHOLD,
    workers: int = 1,
) -> tuple[GridResult, list[TrialRecord]]:
    """Success rate per (k, m) cell over seeded trials.

    Trial seeds are derived as hash(base_seed, k, m, trial) and checked for
    collisions across the whole grid before anything runs.  Records come
    back in axis order (k outer, m inner, trial innermost), independent of
    the worker count.

    Args:
        k_values: sparsity axis (distinct positive ints).
        m_values: measurement axis (distinct positive ints).
        trials: trials per cell.
        base_seed: grid seed.
        cfg: solver config shared by every trial (None for defaults).
        n: ambient dimension.
        algorithm: WF or TWF.
        success_threshold: relative distance below which a trial succeeds.
        workers: process count for trial execution.
    """
    k_values = tuple(int(k) for k in k_values)
    m_values = tuple(int(m) for m in m_values)
    if not k_values or not m_values:
        raise ValueError("axes must be non-empty")
    if len(set(k_values)) != len(k_values) or len(set(m_values)) != len(m_values):
        raise ValueError("axis values must be distinct")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if algorithm not in SPARSE_ALGORITHMS:
        raise ValueError("grids run the sparse-track algorithms (WF or TWF)")
    specs = []
    for k in k_values:
        for m in m_values:
            specs.extend(
                _cell_specs(n, k, m, trials, base_seed, algorithm, cfg, success_threshold)
            )
    seeds = [s.trial_seed for s in specs]
    if len(set(seeds)) != len(seeds):
        raise RuntimeError("derived trial seeds collide; change base_seed")
    records = _run_specs(specs, workers)
    rate = np.zeros((len(k_values), len(m_values)))
    count = np.full((len(k_values), len(m_values)), trials, dtype=np.int64)
    it = iter(records)
    for i, _ in enumerate(k_values):
        for j, _ in enumerate(m_values):
            cell = [next(it) for _ in range(trials)]
            rate[i, j] = sum(r.success for r in cell) / trials
    grid = GridResult(
        k_values=k_values, m_values=m_values, success_rate=rate, trials=count
    )
    return grid, records


@dataclass(frozen=True)
class SweepRow:
    """Distance quantiles for one initializer at one measurement count."""

    m: int
    algo: str
    q25: float
    median: float
    q75: float


def spectral_closeness_sweep(
    n: int,
    k: int,
    m_values,
    trials: int,
    base_seed: int,
    alpha: float = 0.5,
) -> list[SweepRow]:
    """Relative-distance quartiles of both spectral initializers per m.

    The restricted (si_s) and unrestricted (si) initializers are scored on
    the same signal and ensemble in every trial (paired seeds, one data
    pass), so the comparison is variance-free.  Rows come in m order, si
    before si_s.
    """
    m_values = tuple(int(m) for m in m_values)
    if not m_values or trials < 1:
        raise ValueError("need at least one m value and one trial")
    rows = []
    for m in m_values:
        dist_si = np.empty(trials)
        dist_sis = np.empty(trials)
        for t in range(trials):
            trial_seed = rng.derive_seed(base_seed, m, t)
            truth = sample_sparse_signal(n, k, rng.derive_seed(trial_seed, 1))
            ens = sample_ensemble(n, m, rng.derive_seed(trial_seed, 2))
            mset = simulate(ens, truth.values)
            restricted, unrestricted = paired_spectral_inits(mset, alpha)
            dist_si[t] = relative_distance(unrestricted.values, truth.values)
            dist_sis[t] = relative_distance(restricted.values, truth.values)
        for algo, dists in (("si", dist_si), ("si_s", dist_sis)):
            q25, median, q75 = np.percentile(dists, (25.0, 50.0, 75.0))
            rows.append(SweepRow(m=m, algo=algo, q25=q25, median=median, q75=q75))
    return rows


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_trials_csv(records, path) -> None:
    """One TrialRecord per row; floats carry 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIALS_HEADER)
        for rec in records:
            writer.writerow([
                rec.spec.n, rec.spec.k, rec.spec.m, rec.spec.algorithm.value,
                rec.spec.trial_seed, rec.status.value, _fmt(rec.rel_dist),
                _fmt(rec.cosine), str(rec.success).lower(),
                rec.iterations_used, _fmt(rec.wall_time_ms),
            ])


def write_grid_csv(grid: GridResult, path) -> None:
    """One row per (k, m) cell."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GRID_HEADER)
        for i, k in enumerate(grid.k_values):
            for j, m in enumerate(grid.m_values):
                writer.writerow([
                    k, m, _fmt(grid.success_rate[i, j]), int(grid.trials[i, j]),
                ])


def write_sweep_csv(rows, path) -> None:
    """One row per (m, initializer) pair."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        for row in rows:
            writer.writerow([
                row.m, row.algo, _fmt(row.q25), _fmt(row.median), _fmt(row.q75),
            ])
