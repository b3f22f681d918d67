"""Independent verification oracles.

Everything here recomputes quantities with deliberately naive accumulation
(per-matrix Python loops, no chunked GEMV, no shared solver code) so the
production paths have something genuinely independent to be checked against.
The Monte-Carlo envelopes carry pilot-calibrated constants, frozen with the
seeds that produced them.
"""

from dataclasses import dataclass

import numpy as np

from . import rng
from .measure import MeasurementSet, as_vector, sample_ensemble, simulate
from .sparse import gradient, spectral_init

__all__ = [
    "CheckReport",
    "brute_force_forward",
    "quartic_loss",
    "finite_diff_loss_gradient",
    "expectation_check",
    "phi_concentration_check",
    "diagonal_score_check",
    "concentration_suite",
    "reference_wf",
]

# Pilot-calibrated envelope constants (frozen; see the check docstrings).
EXPECTATION_SIGMA = 4.0
DIAGONAL_SCORE_BOUND = 2.5


@dataclass(frozen=True)
class CheckReport:
    """One verification outcome: passed iff observed <= bound."""

    name: str
    passed: bool
    observed: float
    bound: float
    detail: str = ""

    def __post_init__(self):
        if self.passed != (self.observed <= self.bound):
            raise ValueError("passed flag inconsistent with observed vs bound")

    def to_dict(self) -> dict:
        return {
            "check": self.name,
            "pass": self.passed,
            "observed": self.observed,
            "bound": self.bound,
            "detail": self.detail,
        }


def brute_force_forward(matrices, x) -> np.ndarray:
    """Reference forward model y_i = x^T A_i x by naive triple loop.

    No streaming, no symmetrization, no BLAS reductions: the sums are taken
    in plain Python, so this is an accumulation-independent cross-check for
    the production forward pass.

    Args:
        matrices: explicit (m, n, n) stack.
        x: signal vector of length n.
    """
    stack = np.asarray(matrices, dtype=np.float64)
    if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
        raise ValueError("expected an (m, n, n) stack")
    x = as_vector(x)
    m, n, _ = stack.shape
    if x.shape != (n,):
        raise ValueError(f"x has length {x.shape[0]}, expected {n}")
    y = np.zeros(m)
    for i in range(m):
        acc = 0.0
        for p in range(n):
            for q in range(n):
                acc += x[p] * stack[i, p, q] * x[q]
        y[i] = acc
    return y


def quartic_loss(mset: MeasurementSet, z) -> float:
    """f(z) = (1/4m) sum_i (z^T A_i z - y_i)^2, accumulated per matrix."""
    z = as_vector(z)
    total = 0.0
    for i in range(mset.ensemble.m):
        a = mset.ensemble.matrix(i)
        resid = float(z @ a @ z) - float(mset.y[i])
        total += resid * resid
    return total / (4.0 * mset.ensemble.m)


def finite_diff_loss_gradient(mset: MeasurementSet, z, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of the quartic loss, coordinate by coordinate.

    Args:
        mset: measurements.
        z: evaluation point.
        h: step; the error is O(h^2).
    """
    if h <= 0:
        raise ValueError("h must be positive")
    z = as_vector(z).copy()
    out = np.zeros_like(z)
    for j in range(z.shape[0]):
        orig = z[j]
        z[j] = orig + h
        up = quartic_loss(mset, z)
        z[j] = orig - h
        down = quartic_loss(mset, z)
        z[j] = orig
        out[j] = (up - down) / (2.0 * h)
    return out


def expectation_check(n: int, m_large: int, seed: int, x,
                      sigma: float = EXPECTATION_SIGMA) -> CheckReport:
    """Entrywise check that the spectral data matrix concentrates on xx^T.

    Builds (1/m) sum y_i (A_i + A_i^T)/2 with its own per-matrix loop (y_i
    recomputed as a quadratic form, nothing borrowed from the production
    pipeline) and tests every entry's deviation from x x^T against
    sigma * (entry sample std) / sqrt(m).  The reported observed/bound pair
    belongs to the entry with the worst deviation-to-envelope ratio, so
    passed <=> every entry sits inside its envelope.

    The default sigma = 4 was calibrated over seeds 0..19 at n=10, m=1e5
    (a hard 3-sigma cut fails a fair fraction of seeds once ~50 distinct
    entries are tested at once) and then frozen.
    """
    if m_large < 10**4:
        raise ValueError("m_large must be at least 1e4")
    x = as_vector(x)
    if x.shape != (n,):
        raise ValueError(f"x has length {x.shape[0]}, expected {n}")
    ens = sample_ensemble(n, m_large, seed)
    acc = np.zeros((n, n))
    acc_sq = np.zeros((n, n))
    for i in range(m_large):
        a = ens.matrix(i)
        y_i = float(x @ a @ x)
        term = y_i * 0.5 * (a + a.T)
        acc += term
        acc_sq += term * term
    mean = acc / m_large
    var = acc_sq / m_large - mean * mean
    std = np.sqrt(np.maximum(var, 0.0))
    dev = np.abs(mean - np.outer(x, x))
    envelope = sigma * std / np.sqrt(m_large)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(envelope > 0, dev / envelope, np.where(dev > 0, np.inf, 0.0))
    p, q = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    observed = float(dev[p, q])
    bound = float(envelope[p, q])
    return CheckReport(
        name="expectation_xxT",
        passed=observed <= bound,
        observed=observed,
        bound=bound,
        detail=(
            f"worst entry ({p},{q}); max |dev| {float(dev.max()):.3e}; "
            f"n={n} m={m_large} seed={seed} sigma={sigma}"
        ),
    )


def phi_concentration_check(seed: int, n: int = 100, m: int = 1000,
                            num_seeds: int = 50) -> CheckReport:
    """phi = (mean y^2)^(1/4) stays in [0.9, 1.1] for unit signals.

    Runs num_seeds independent draws (sub-seeded from seed) with unit-norm
    5-sparse signals and reports the worst |phi - 1|.
    """
    from .harness import sample_sparse_signal

    worst = 0.0
    for t in range(num_seeds):
        sub = rng.derive_seed(seed, 101, t)
        x = sample_sparse_signal(n, 5, rng.derive_seed(sub, 1), normalize=True)
        ens = sample_ensemble(n, m, rng.derive_seed(sub, 2))
        y = np.empty(m)
        for i in range(m):
            a = ens.matrix(i)
            y[i] = float(x.values @ a @ x.values)
        phi = float(np.mean(y * y) ** 0.25)
        worst = max(worst, abs(phi - 1.0))
    return CheckReport(
        name="phi_concentration",
        passed=worst <= 0.1,
        observed=worst,
        bound=0.1,
        detail=f"n={n} m={m} seeds={num_seeds} base_seed={seed}",
    )


def diagonal_score_check(seed: int, n: int = 500, k: int = 5,
                         m: int = 500,
                         bound: float = DIAGONAL_SCORE_BOUND) -> CheckReport:
    """max_l |I_l - x_l^2| * sqrt(m / log n) against a calibrated constant.

    I_l = (1/m) sum_i y_i a_ll^(i), accumulated per matrix.  The constant
    c in the |I_l - x_l^2| <= c sqrt(log n / m) bound is not derivable from
    first principles here; the default was calibrated over seeds 0..19
    (observed range 1.08-1.70) and frozen with margin.
    """
    from .harness import sample_sparse_signal

    x = sample_sparse_signal(n, k, rng.derive_seed(seed, 1), normalize=True)
    ens = sample_ensemble(n, m, rng.derive_seed(seed, 2))
    scores = np.zeros(n)
    for i in range(m):
        a = ens.matrix(i)
        y_i = float(x.values @ a @ x.values)
        scores += y_i * np.diag(a)
    scores /= m
    observed = float(
        np.max(np.abs(scores - x.values**2)) * np.sqrt(m / np.log(n))
    )
    return CheckReport(
        name="diagonal_scores",
        passed=observed <= bound,
        observed=observed,
        bound=bound,
        detail=f"n={n} k={k} m={m} seed={seed}",
    )


def concentration_suite(seed: int) -> list[CheckReport]:
    """The norm-estimate and diagonal-score concentration checks."""
    return [
        phi_concentration_check(seed),
        diagonal_score_check(seed),
    ]


def reference_wf(mset: MeasurementSet, mu: float = 0.1,
                 iterations: int = 100, alpha: float = 0.5) -> list[np.ndarray]:
    """Plain gradient-descent iterates from the spectral initializer.

    The baseline flow: x_{t+1} = x_t - (mu / phi^2) * grad f(x_t), no
    thresholding anywhere.  Uses the library's gradient operator so that a
    comparison against the thresholded solver isolates the update and
    thresholding logic.  Returns [x_0, ..., x_T].
    """
    sig, _, phi = spectral_init(mset, alpha)
    x = sig.values.copy()
    iterates = [x.copy()]
    if phi > 0:
        scale = mu / (phi * phi)
        for _ in range(iterations):
            x = x - scale * gradient(mset, x)
            iterates.append(x.copy())
    return iterates
