"""Gaussian measurement ensembles and the quadratic forward model.

Measurements are y_i = x^T A_i x for i.i.d. Gaussian n x n matrices A_i with
i.i.d. standard normal entries.  An ensemble is represented by (n, m, seed);
entry (row, col) of matrix i is word ``i*n*n + row*n + col`` of the matrix
stream for that seed (see ``rng``), so any matrix can be regenerated in
isolation and nothing ever has to be stored.

Storage modes:

* Materialized — the full (m, n, n) stack is generated once and cached;
  chosen iff m*n*n*8 bytes fits the memory budget (default 2 GiB).
* Streamed — matrices are regenerated chunk by chunk on every pass.

Both modes produce bit-identical matrices, and every derived computation
(forward, sym_apply, data_matrix) walks the measurements in the same fixed
chunk order with the same operations, so results are bit-identical across
modes as well.

The forward model and the solvers' residual passes both evaluate quadratic
forms through ``sym_chunks`` (the symmetrized stack in canonical chunk
order).  Sharing that one pipeline means a solver sitting exactly at the
simulated truth reproduces y bit for bit, so its residuals, gradient, and
threshold level are exactly zero rather than rounding noise.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from quadrec import rng

__all__ = [
    "DEFAULT_BUDGET_BYTES",
    "Storage",
    "Signal",
    "MeasurementEnsemble",
    "MeasurementSet",
    "as_vector",
    "sample_ensemble",
    "injected_ensemble",
    "forward",
    "sym_apply",
    "data_matrix",
    "simulate",
]

DEFAULT_BUDGET_BYTES = 2 * 1024**3

# Matrices per generation chunk are capped by a fixed byte size so that the
# chunk layout (and therefore the exact accumulation order everywhere
# downstream) depends only on (n, m), never on storage mode.
_CHUNK_BYTES = 64 * 1024**2


class Storage(Enum):
    MATERIALIZED = "materialized"
    STREAMED = "streamed"


@dataclass
class Signal:
    """A signal vector with an optional sparsity hint."""

    values: np.ndarray
    sparsity: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.sparsity is not None and np.count_nonzero(self.values) > self.sparsity:
            raise ValueError("signal has more nonzeros than its sparsity hint")

    @property
    def n(self) -> int:
        return self.values.shape[0]


def as_vector(x) -> np.ndarray:
    """Accept a Signal or array-like; return a float64 1-d array."""
    if isinstance(x, Signal):
        return x.values
    return np.asarray(x, dtype=np.float64)


def _chunk_rows(n: int, m: int) -> int:
    return max(1, min(m, _CHUNK_BYTES // (n * n * 8)))


@dataclass
class MeasurementEnsemble:
    """m Gaussian n x n matrices, defined by a seed (or injected explicitly)."""

    n: int
    m: int
    seed: int | None
    storage: Storage
    memory_budget_bytes: int = DEFAULT_BUDGET_BYTES
    _explicit: np.ndarray | None = field(default=None, repr=False, compare=False)
    _cache: np.ndarray | None = field(default=None, repr=False, compare=False)
    _sym_cache: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def injected(self) -> bool:
        return self._explicit is not None

    def _generate(self, lo: int, hi: int) -> np.ndarray:
        count = (hi - lo) * self.n * self.n
        flat = rng.standard_normals(self.seed, rng.MATRIX_STREAM, lo * self.n * self.n, count)
        return flat.reshape(hi - lo, self.n, self.n)

    def _stack(self) -> np.ndarray:
        if self._cache is None:
            out = np.empty((self.m, self.n, self.n), dtype=np.float64)
            step = _chunk_rows(self.n, self.m)
            for lo in range(0, self.m, step):
                hi = min(lo + step, self.m)
                out[lo:hi] = self._generate(lo, hi)
            self._cache = out
        return self._cache

    def chunk(self, lo: int, hi: int) -> np.ndarray:
        """Matrices [lo, hi) as a (hi-lo, n, n) array (view when cached)."""
        if not 0 <= lo <= hi <= self.m:
            raise IndexError(f"matrix range [{lo}, {hi}) out of bounds for m={self.m}")
        if self._explicit is not None:
            return self._explicit[lo:hi]
        if self.storage is Storage.MATERIALIZED:
            return self._stack()[lo:hi]
        return self._generate(lo, hi)

    def matrix(self, i: int) -> np.ndarray:
        """Matrix A_i (0-based index)."""
        if not 0 <= i < self.m:
            raise IndexError(f"matrix index {i} out of range for m={self.m}")
        return self.chunk(i, i + 1)[0]

    def chunks(self):
        """Iterate (lo, hi, stack) over the canonical fixed chunking."""
        step = _chunk_rows(self.n, self.m)
        for lo in range(0, self.m, step):
            hi = min(lo + step, self.m)
            yield lo, hi, self.chunk(lo, hi)

    def _can_cache_sym(self) -> bool:
        if self._explicit is not None:
            return True
        return (
            self.storage is Storage.MATERIALIZED
            and 2 * self.m * self.n * self.n * 8 <= self.memory_budget_bytes
        )

    def sym_chunks(self):
        """Iterate (lo, hi, flat) with flat = symmetrized chunk as (c*n, n).

        flat stacks the rows of (A_i + A_i^T)/2 for i in [lo, hi), so
        ``flat @ z`` evaluates every symmetrized matrix-vector product in one
        GEMV.  The symmetrized stack is cached when both stacks fit the
        budget; otherwise each chunk is symmetrized on the fly.  Both paths
        are elementwise identical, so the bits never depend on caching.
        """
        if self._sym_cache is None and self._can_cache_sym():
            stack = self._explicit if self._explicit is not None else self._stack()
            self._sym_cache = 0.5 * (stack + stack.transpose(0, 2, 1))
        step = _chunk_rows(self.n, self.m)
        for lo in range(0, self.m, step):
            hi = min(lo + step, self.m)
            if self._sym_cache is not None:
                sym = self._sym_cache[lo:hi]
            else:
                raw = self.chunk(lo, hi)
                sym = 0.5 * (raw + raw.transpose(0, 2, 1))
            yield lo, hi, sym.reshape((hi - lo) * self.n, self.n)

    def header(self) -> dict:
        """Serializable description; never includes matrix data."""
        if self.injected:
            raise ValueError("injected ensembles have no serializable header")
        return {"n": self.n, "m": self.m, "seed": self.seed, "storage": self.storage.value}


@dataclass
class MeasurementSet:
    """An ensemble together with observations y and optional ground truth."""

    ensemble: MeasurementEnsemble
    y: np.ndarray
    truth: np.ndarray | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.y.shape != (self.ensemble.m,):
            raise ValueError("y length does not match ensemble size")
        if self.truth is not None:
            self.truth = as_vector(self.truth)
            if self.truth.shape != (self.ensemble.n,):
                raise ValueError("truth length does not match ensemble dimension")


def sample_ensemble(
    n: int,
    m: int,
    seed: int,
    budget_bytes: int | None = None,
) -> MeasurementEnsemble:
    """Create a Gaussian ensemble; storage mode chosen by the memory budget."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    if m * n * n > 2**62:
        raise ValueError("m*n^2 exceeds the addressable index range")
    budget = DEFAULT_BUDGET_BYTES if budget_bytes is None else budget_bytes
    dense_bytes = m * n * n * 8
    storage = Storage.MATERIALIZED if dense_bytes <= budget else Storage.STREAMED
    return MeasurementEnsemble(n=n, m=m, seed=int(seed), storage=storage, memory_budget_bytes=budget)


def injected_ensemble(matrices) -> MeasurementEnsemble:
    """Test-only ensemble wrapping explicit matrices.

    Bypasses the Gaussian contract; used for hand-checkable examples.
    """
    stack = np.asarray(matrices, dtype=np.float64)
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise ValueError("expected an (m, n, n) stack of square matrices")
    return MeasurementEnsemble(
        n=stack.shape[1],
        m=stack.shape[0],
        seed=None,
        storage=Storage.MATERIALIZED,
        _explicit=stack,
    )


def forward(ensemble: MeasurementEnsemble, x) -> np.ndarray:
    """y_i = x^T A_i x for every i, in one streaming pass.

    Quadratic forms are evaluated through the symmetrized chunks (the value
    is unchanged since x^T A x = x^T (A + A^T) x / 2); solvers run their
    residual passes through the identical pipeline, so an iterate equal to
    the simulated truth reproduces y exactly.
    """
    v = as_vector(x)
    if v.shape != (ensemble.n,):
        raise ValueError(f"x has length {v.shape[0]}, expected {ensemble.n}")
    y = np.empty(ensemble.m, dtype=np.float64)
    for lo, hi, flat in ensemble.sym_chunks():
        rows = flat @ v
        y[lo:hi] = rows.reshape(hi - lo, ensemble.n) @ v
    return y


def sym_apply(ensemble: MeasurementEnsemble, i: int, z) -> np.ndarray:
    """(1/2)(A_i + A_i^T) z without materializing the symmetrized matrix."""
    v = as_vector(z)
    if v.shape != (ensemble.n,):
        raise ValueError(f"z has length {v.shape[0]}, expected {ensemble.n}")
    a = ensemble.matrix(i)
    return 0.5 * (a @ v + v @ a)


def data_matrix(mset: MeasurementSet) -> np.ndarray:
    """Spectral data matrix (1/m) sum_i y_i Ã_i, exactly symmetric.

    Accumulates R = sum_i y_i A_i chunk by chunk in the canonical order and
    symmetrizes once at the end; (R + R^T) entries are sums of the same two
    addends on both sides of the diagonal, so symmetry is exact.
    """
    ens = mset.ensemble
    r = np.zeros((ens.n, ens.n), dtype=np.float64)
    for lo, hi, stack in ens.chunks():
        r += np.tensordot(mset.y[lo:hi], stack, axes=(0, 0))
    return (r + r.T) / (2.0 * ens.m)


def simulate(ensemble: MeasurementEnsemble, truth) -> MeasurementSet:
    """Build a MeasurementSet with y = forward(ensemble, truth)."""
    x = as_vector(truth)
    if ensemble.m > 50 * ensemble.n:
        warnings.warn(
            f"m={ensemble.m} far exceeds n={ensemble.n}; the model targets m = O(n)",
            stacklevel=2,
        )
    return MeasurementSet(ensemble=ensemble, y=forward(ensemble, x), truth=x)
