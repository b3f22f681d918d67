"""Tests for the experiment harness: trials, grids, sweeps, CSV output."""

import csv

import numpy as np
import pytest

from quadrec.generative import PGDConfig
from quadrec.harness import (
    Algorithm,
    GridResult,
    TrialRecord,
    TrialSpec,
    build_model,
    phase_transition_grid,
    run_cell,
    run_trial,
    sample_sparse_signal,
    spectral_closeness_sweep,
    write_grid_csv,
    write_sweep_csv,
    write_trials_csv,
)
from quadrec.results import Status
from quadrec.sparse import Constant, SparseConfig


def subspace_blob(seed, n, k, r=2.0):
    return {"kind": "subspace", "seed": seed, "n": n, "k": k, "r": r}


class TestSampleSparseSignal:
    def test_deterministic(self):
        a = sample_sparse_signal(50, 5, seed=3)
        b = sample_sparse_signal(50, 5, seed=3)
        np.testing.assert_array_equal(a.values, b.values)

    def test_support_size_and_range(self):
        for seed in range(20):
            sig = sample_sparse_signal(40, 7, seed=seed)
            nz = np.flatnonzero(sig.values)
            assert len(nz) == 7
            assert np.all(np.abs(sig.values[nz]) <= 0.5)
            assert sig.sparsity == 7

    def test_zero_k_gives_zero_vector(self):
        sig = sample_sparse_signal(10, 0, seed=1)
        np.testing.assert_array_equal(sig.values, np.zeros(10))
        assert sig.sparsity == 0

    def test_full_k_is_dense(self):
        sig = sample_sparse_signal(12, 12, seed=4)
        assert np.count_nonzero(sig.values) == 12

    def test_support_is_roughly_uniform(self):
        n, k, draws = 10, 3, 2000
        hits = np.zeros(n)
        for seed in range(draws):
            hits[np.flatnonzero(sample_sparse_signal(n, k, seed).values)] += 1
        freq = hits / draws
        assert np.all(freq > 0.2) and np.all(freq < 0.4)

    def test_normalize_flag(self):
        raw = sample_sparse_signal(30, 4, seed=9)
        unit = sample_sparse_signal(30, 4, seed=9, normalize=True)
        np.testing.assert_allclose(np.linalg.norm(unit.values), 1.0, rtol=1e-15)
        np.testing.assert_array_equal(
            np.flatnonzero(raw.values), np.flatnonzero(unit.values)
        )

    def test_validation(self):
        with pytest.raises(ValueError):
            sample_sparse_signal(5, 6, seed=0)
        with pytest.raises(ValueError):
            sample_sparse_signal(0, 0, seed=0)
        with pytest.raises(ValueError):
            sample_sparse_signal(5, -1, seed=0)


class TestBuildModel:
    def test_subspace_round_trip(self):
        model = build_model(subspace_blob(7, 20, 3))
        assert model.n == 20 and model.k == 3

    def test_relu_defaults(self):
        model = build_model(
            {"kind": "relu", "seed": 1, "n": 12, "h": 8, "k": 3, "r": 2.0}
        )
        assert model.normalize_output is False

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            build_model({"kind": "vae", "seed": 1})

    def test_missing_key(self):
        with pytest.raises(ValueError, match="missing"):
            build_model({"kind": "subspace", "seed": 1, "n": 5, "k": 2})

    def test_extra_key(self):
        blob = subspace_blob(1, 5, 2)
        blob["color"] = "red"
        with pytest.raises(ValueError, match="unknown model keys"):
            build_model(blob)


class TestTrialSpec:
    def test_sparse_rejects_model(self):
        with pytest.raises(ValueError, match="model"):
            TrialSpec(n=10, k=2, m=20, algorithm=Algorithm.TWF, trial_seed=0,
                      model=subspace_blob(1, 10, 2))

    def test_generative_requires_model(self):
        with pytest.raises(ValueError, match="model"):
            TrialSpec(n=10, k=2, m=20, algorithm=Algorithm.PGD, trial_seed=0)

    def test_config_pairing(self):
        with pytest.raises(ValueError, match="SparseConfig"):
            TrialSpec(n=10, k=2, m=20, algorithm=Algorithm.WF, trial_seed=0,
                      config=PGDConfig())
        with pytest.raises(ValueError, match="PGDConfig"):
            TrialSpec(n=10, k=2, m=20, algorithm=Algorithm.PPOWER, trial_seed=0,
                      config=SparseConfig(), model=subspace_blob(1, 10, 2))

    def test_model_shape_must_match(self):
        with pytest.raises(ValueError, match="match"):
            TrialSpec(n=10, k=2, m=20, algorithm=Algorithm.PGD, trial_seed=0,
                      model=subspace_blob(1, 10, 3))

    def test_dimensions_positive(self):
        with pytest.raises(ValueError):
            TrialSpec(n=10, k=0, m=20, algorithm=Algorithm.TWF, trial_seed=0)
        with pytest.raises(ValueError):
            TrialSpec(n=10, k=11, m=20, algorithm=Algorithm.TWF, trial_seed=0)


class TestRunTrial:
    def sparse_spec(self, trial_seed=5, **over):
        base = dict(
            n=40, k=3, m=150, algorithm=Algorithm.TWF, trial_seed=trial_seed,
            config=SparseConfig(iterations=800, early_stop_tol=1e-12),
        )
        base.update(over)
        return TrialSpec(**base)

    def test_deterministic_record(self):
        spec = self.sparse_spec()
        a = run_trial(spec)
        b = run_trial(spec)
        assert a == b  # wall_time_ms is excluded from comparison

    def test_sparse_recovery_succeeds(self):
        rec = run_trial(self.sparse_spec())
        assert rec.status is Status.EARLY_STOPPED or rec.status is Status.COMPLETED
        assert rec.success
        assert rec.rel_dist < 1e-3
        assert -1.0 - 1e-12 <= rec.cosine <= 1.0 + 1e-12

    def test_wf_equals_twf_with_zero_beta(self):
        wf = run_trial(self.sparse_spec(algorithm=Algorithm.WF))
        twf0 = run_trial(self.sparse_spec(
            config=SparseConfig(iterations=800, early_stop_tol=1e-12,
                                beta=Constant(0.0)),
        ))
        assert wf.rel_dist == twf0.rel_dist
        assert wf.iterations_used == twf0.iterations_used

    def test_failure_becomes_failed_record(self):
        spec = TrialSpec(
            n=10, k=2, m=20, algorithm=Algorithm.PPOWER, trial_seed=1,
            model=subspace_blob(1, 10, 2, r=-1.0),
        )
        rec = run_trial(spec)
        assert rec.status is Status.FAILED
        assert rec.rel_dist == np.inf
        assert not rec.success
        assert rec.iterations_used == 0

    def test_ppower_trial(self):
        spec = TrialSpec(
            n=30, k=2, m=200, algorithm=Algorithm.PPOWER, trial_seed=8,
            model=subspace_blob(4, 30, 2),
        )
        rec = run_trial(spec)
        assert rec.status is Status.COMPLETED
        assert rec.iterations_used == 1
        assert 0.0 <= rec.rel_dist < 1.0

    def test_ppower_then_pgd_trial(self):
        spec = TrialSpec(
            n=30, k=2, m=200, algorithm=Algorithm.PPOWER_THEN_PGD, trial_seed=8,
            model=subspace_blob(4, 30, 2), config=PGDConfig(iterations=5),
        )
        rec = run_trial(spec)
        assert rec.status is Status.COMPLETED
        assert rec.iterations_used == 6
        assert rec.success == (rec.rel_dist < spec.success_threshold)

    def test_record_validation(self):
        spec = self.sparse_spec()
        with pytest.raises(ValueError, match="success"):
            TrialRecord(spec=spec, status=Status.COMPLETED, rel_dist=0.5,
                        cosine=0.0, success=True, iterations_used=1,
                        wall_time_ms=1.0)


class TestPhaseTransitionGrid:
    def small_cfg(self):
        return SparseConfig(iterations=600, early_stop_tol=1e-10)

    def test_shapes_and_counts(self):
        grid, records = phase_transition_grid(
            [2], [60, 120], trials=2, base_seed=11, cfg=self.small_cfg(), n=25,
        )
        assert grid.k_values == (2,)
        assert grid.m_values == (60, 120)
        assert grid.success_rate.shape == (1, 2)
        assert np.all(grid.trials == 2)
        assert len(records) == 4
        assert [r.spec.m for r in records] == [60, 60, 120, 120]

    def test_rates_match_records(self):
        grid, records = phase_transition_grid(
            [2, 3], [60, 120], trials=3, base_seed=11, cfg=self.small_cfg(), n=25,
        )
        it = iter(records)
        for i, k in enumerate((2, 3)):
            for j, m in enumerate((60, 120)):
                cell = [next(it) for _ in range(3)]
                assert all(r.spec.k == k and r.spec.m == m for r in cell)
                assert grid.success_rate[i, j] == sum(r.success for r in cell) / 3

    def test_success_improves_with_measurements(self):
        grid, _ = phase_transition_grid(
            [2], [40, 160], trials=10, base_seed=17, cfg=self.small_cfg(), n=30,
        )
        assert grid.success_rate[0, 1] >= grid.success_rate[0, 0]

    def test_run_cell_matches_grid_row(self):
        cfg = self.small_cfg()
        _, records = phase_transition_grid(
            [2], [60], trials=2, base_seed=11, cfg=cfg, n=25,
        )
        cell = run_cell(25, 2, 60, trials=2, base_seed=11, cfg=cfg)
        assert cell == records

    def test_parallel_matches_serial(self):
        cfg = SparseConfig(iterations=200, early_stop_tol=1e-10)
        serial = run_cell(20, 2, 50, trials=2, base_seed=3, cfg=cfg, workers=1)
        parallel = run_cell(20, 2, 50, trials=2, base_seed=3, cfg=cfg, workers=2)
        assert serial == parallel

    def test_axis_validation(self):
        with pytest.raises(ValueError, match="distinct"):
            phase_transition_grid([2, 2], [60], trials=1, base_seed=0, n=25)
        with pytest.raises(ValueError, match="non-empty"):
            phase_transition_grid([], [60], trials=1, base_seed=0, n=25)
        with pytest.raises(ValueError, match="trials"):
            phase_transition_grid([2], [60], trials=0, base_seed=0, n=25)
        with pytest.raises(ValueError, match="sparse"):
            phase_transition_grid([2], [60], trials=1, base_seed=0, n=25,
                                  algorithm=Algorithm.PGD)

    def test_matrix_validation(self):
        with pytest.raises(ValueError, match="shapes"):
            GridResult(k_values=(1,), m_values=(2,),
                       success_rate=np.zeros((2, 1)), trials=np.ones((1, 1)))
        with pytest.raises(ValueError, match="rates"):
            GridResult(k_values=(1,), m_values=(2,),
                       success_rate=np.full((1, 1), 1.5), trials=np.ones((1, 1)))


class TestSpectralClosenessSweep:
    def test_single_trial_collapses_quantiles(self):
        rows = spectral_closeness_sweep(30, 3, [90], trials=1, base_seed=2)
        for row in rows:
            assert row.q25 == row.median == row.q75

    def test_row_layout(self):
        rows = spectral_closeness_sweep(30, 3, [60, 90], trials=2, base_seed=2)
        assert [(r.m, r.algo) for r in rows] == [
            (60, "si"), (60, "si_s"), (90, "si"), (90, "si_s"),
        ]

    def test_deterministic(self):
        a = spectral_closeness_sweep(30, 3, [90], trials=3, base_seed=2)
        b = spectral_closeness_sweep(30, 3, [90], trials=3, base_seed=2)
        assert a == b

    def test_restricted_initializer_dominates(self):
        rows = spectral_closeness_sweep(80, 3, [100, 400], trials=15, base_seed=5)
        by_key = {(r.m, r.algo): r for r in rows}
        for m in (100, 400):
            assert by_key[(m, "si_s")].median <= by_key[(m, "si")].median

    def test_validation(self):
        with pytest.raises(ValueError):
            spectral_closeness_sweep(30, 3, [], trials=1, base_seed=0)
        with pytest.raises(ValueError):
            spectral_closeness_sweep(30, 3, [90], trials=0, base_seed=0)


class TestCsvWriters:
    def test_trials_round_trip(self, tmp_path):
        spec = TrialSpec(n=20, k=2, m=50, algorithm=Algorithm.TWF, trial_seed=3,
                         config=SparseConfig(iterations=50))
        rec = run_trial(spec)
        path = tmp_path / "trials.csv"
        write_trials_csv([rec], path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == list(
            ("n", "k", "m", "algorithm", "trial_seed", "status", "rel_dist",
             "cosine", "success", "iterations_used", "wall_time_ms")
        )
        assert len(rows) == 2
        row = rows[1]
        assert row[0] == "20" and row[3] == "twf"
        assert float(row[6]) == rec.rel_dist
        assert float(row[7]) == rec.cosine
        assert row[8] in ("true", "false")

    def test_grid_round_trip(self, tmp_path):
        grid = GridResult(
            k_values=(2, 3), m_values=(10, 20),
            success_rate=np.array([[0.25, 1.0], [0.0, 1.0 / 3.0]]),
            trials=np.full((2, 2), 4),
        )
        path = tmp_path / "grid.csv"
        write_grid_csv(grid, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["k", "m", "success_rate", "trials"]
        assert len(rows) == 5
        assert rows[1] == ["2", "10", "0.25", "4"]
        assert float(rows[4][2]) == 1.0 / 3.0

    def test_sweep_round_trip(self, tmp_path):
        rows_in = spectral_closeness_sweep(30, 3, [90], trials=2, base_seed=2)
        path = tmp_path / "sweep.csv"
        write_sweep_csv(rows_in, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["m", "algo", "q25", "median", "q75"]
        assert len(rows) == 3
        assert float(rows[1][3]) == rows_in[0].median
