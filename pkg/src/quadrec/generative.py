"""Recovery under generative priors: range projections, the projected power
method, and projected gradient descent.

A generative model maps a latent ball of radius r in R^k into R^n.  Two
synthetic models are provided: SubspaceModel (linear decoder with an exact
closed-form projection, the oracle for tests) and ReluDecoderModel (a
fixed-seed two-layer ReLU network exercising approximate projection).
Projection onto the range is computed either in closed form or by restarted
gradient descent in the latent space.
"""

import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .measure import MeasurementSet, as_vector, data_matrix
from .results import DivergenceError, ProjectionError, RecoveryResult, Status, TraceRecord
from .metrics import relative_distance
from .sparse import _residual_pass

__all__ = [
    "GenerativeModel",
    "SubspaceModel",
    "ReluDecoderModel",
    "ProjectionConfig",
    "PGDConfig",
    "subspace_project",
    "latent_project",
    "projected_power",
    "solve_pgd",
    "check_step_condition",
    "default_w0",
    "correlated_direction",
]


@dataclass(frozen=True)
class ProjectionConfig:
    """Inner latent-descent settings for approximate range projection.

    Defaults: 100 gradient steps at rate 0.1 with 5 restarts (the first from
    the latent origin, the rest uniform on the latent ball, all derived from
    restart_seed).
    """

    steps: int = 100
    step_size: float = 0.1
    restarts: int = 5
    restart_seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")


@dataclass(frozen=True)
class PGDConfig:
    """Projected-gradient-descent settings.

    mu must lie in (0, 1].  epsilon is metadata for the step-size diagnostic
    (see check_step_condition) and is never used by the solver itself.
    """

    mu: float = 0.9
    iterations: int = 10
    epsilon: float = 0.1
    inner: ProjectionConfig = field(default_factory=ProjectionConfig)

    def __post_init__(self):
        if not 0.0 < self.mu <= 1.0:
            raise ValueError("mu must lie in (0, 1]")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")


class GenerativeModel(ABC):
    """Decoder from a latent ball B^k(r) into R^n.

    Subclasses provide decode and its vector-Jacobian product; projection
    onto the range defaults to restarted latent descent and may be overridden
    with a closed form.
    """

    k: int
    n: int
    r: float
    lipschitz_bound: float | None

    @abstractmethod
    def decode(self, z: np.ndarray) -> np.ndarray:
        """Map a latent point (||z|| <= r) to signal space."""

    @abstractmethod
    def decode_vjp(self, z: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        """J_decode(z)^T @ cotangent, for latent gradient descent."""

    def project(self, v, cfg: ProjectionConfig | None = None) -> np.ndarray:
        """Project v onto the model range (approximate by default)."""
        return latent_project(self, v, cfg or ProjectionConfig())


def _orthonormal_columns(seed: int, n: int, k: int) -> np.ndarray:
    """Q factor of a seeded Gaussian n x k matrix via modified Gram-Schmidt,
    columns processed left to right."""
    if k > n:
        raise ValueError("latent dimension cannot exceed ambient dimension")
    raw = rng.standard_normals(seed, rng.MODEL_STREAM, 0, n * k).reshape(n, k)
    q = np.empty((n, k), dtype=np.float64)
    for j in range(k):
        v = raw[:, j].copy()
        for i in range(j):
            v -= (q[:, i] @ v) * q[:, i]
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            raise ValueError("seeded basis is numerically rank deficient")
        q[:, j] = v / norm
    return q


class SubspaceModel(GenerativeModel):
    """Linear decoder x = Wz with orthonormal W; projection is closed-form.

    Serializes as (seed, n, k, r): W is the modified-Gram-Schmidt Q factor of
    a seeded Gaussian matrix.  The range is unnormalized (points Wz with
    ||z|| <= r).
    """

    def __init__(self, basis: np.ndarray, r: float, seed: int | None = None):
        basis = np.asarray(basis, dtype=np.float64)
        if basis.ndim != 2:
            raise ValueError("basis must be an (n, k) matrix")
        gram = basis.T @ basis
        if np.max(np.abs(gram - np.eye(basis.shape[1]))) > 1e-12:
            raise ValueError("basis columns must be orthonormal to 1e-12")
        if r <= 0:
            raise ValueError("radius must be positive")
        self.basis = basis
        self.n, self.k = basis.shape
        self.r = float(r)
        self.seed = seed
        self.lipschitz_bound = 1.0

    @classmethod
    def from_seed(cls, seed: int, n: int, k: int, r: float) -> "SubspaceModel":
        return cls(_orthonormal_columns(seed, n, k), r, seed=seed)

    def serialize(self) -> dict:
        if self.seed is None:
            raise ValueError("only seeded subspace models serialize")
        return {"kind": "subspace", "seed": self.seed, "n": self.n,
                "k": self.k, "r": self.r}

    def decode(self, z) -> np.ndarray:
        return self.basis @ np.asarray(z, dtype=np.float64)

    def decode_vjp(self, z, cotangent) -> np.ndarray:
        return self.basis.T @ np.asarray(cotangent, dtype=np.float64)

    def project(self, v, cfg: ProjectionConfig | None = None) -> np.ndarray:
        return subspace_project(self, v)


class ReluDecoderModel(GenerativeModel):
    """Fixed-seed two-layer ReLU decoder k -> h -> n (no biases).

    Weights are seeded Gaussian matrices rescaled to unit spectral norm, so
    the decoder is 1-Lipschitz per layer and the default latent descent step
    size is stable on the projection objective.  When normalize_output is
    set, outputs are scaled to the unit sphere (the zero pre-normalization
    output maps to zero).  The advertised Lipschitz bound is the product of
    the layers' Frobenius norms — a conservative upper bound, metadata only.
    """

    def __init__(self, seed: int, n: int, h: int, k: int, r: float,
                 normalize_output: bool = False):
        if min(n, h, k) < 1:
            raise ValueError("all dimensions must be positive")
        if r <= 0:
            raise ValueError("radius must be positive")
        w1_flat = rng.standard_normals(seed, rng.MODEL_STREAM, 0, h * k)
        w2_flat = rng.standard_normals(seed, rng.MODEL_STREAM, h * k, n * h)
        w1 = w1_flat.reshape(h, k)
        w2 = w2_flat.reshape(n, h)
        self.w1 = w1 / np.linalg.norm(w1, 2)
        self.w2 = w2 / np.linalg.norm(w2, 2)
        self.seed = seed
        self.n, self.h, self.k = n, h, k
        self.r = float(r)
        self.normalize_output = normalize_output
        self.lipschitz_bound = float(
            np.linalg.norm(self.w1) * np.linalg.norm(self.w2)
        )

    def serialize(self) -> dict:
        return {"kind": "relu", "seed": self.seed, "n": self.n, "h": self.h,
                "k": self.k, "r": self.r,
                "normalize_output": self.normalize_output}

    def decode(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        hidden = np.maximum(self.w1 @ z, 0.0)
        out = self.w2 @ hidden
        if not self.normalize_output:
            return out
        norm = np.linalg.norm(out)
        if norm == 0.0:
            return out
        return out / norm

    def decode_vjp(self, z, cotangent) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        cotangent = np.asarray(cotangent, dtype=np.float64)
        pre = self.w1 @ z
        hidden = np.maximum(pre, 0.0)
        if self.normalize_output:
            out = self.w2 @ hidden
            norm = np.linalg.norm(out)
            if norm == 0.0:
                return np.zeros(self.k)
            unit = out / norm
            cotangent = (cotangent - (unit @ cotangent) * unit) / norm
        back = self.w2.T @ cotangent
        back[pre <= 0.0] = 0.0
        return self.w1.T @ back


def subspace_project(model: SubspaceModel, v) -> np.ndarray:
    """Exact Euclidean projection onto {Wz : ||z|| <= r}.

    The latent least-squares solution is W^T v (orthonormal columns); its
    norm is clipped to the radius before decoding, which is the exact
    ball-constrained minimizer.
    """
    v = as_vector(v)
    if v.shape != (model.n,):
        raise ValueError(f"v has length {v.shape[0]}, expected {model.n}")
    z = model.basis.T @ v
    norm = np.linalg.norm(z)
    if norm > model.r:
        z = z * (model.r / norm)
    return model.basis @ z


def _clip_latent(z: np.ndarray, r: float) -> np.ndarray:
    norm = np.linalg.norm(z)
    if norm > r:
        return z * (r / norm)
    return z


def _restart_point(model: GenerativeModel, cfg: ProjectionConfig, idx: int) -> np.ndarray:
    """Initial latent for restart idx: origin first, then uniform on the ball."""
    if idx == 0:
        return np.zeros(model.k)
    direction = rng.standard_normals(
        cfg.restart_seed, rng.LATENT_STREAM, (idx - 1) * model.k, model.k
    )
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        return np.zeros(model.k)
    u = rng.uniforms(cfg.restart_seed, rng.DIRECTION_STREAM, idx - 1, 1)[0]
    radius = model.r * u ** (1.0 / model.k)
    return direction * (radius / norm)


def latent_project(model: GenerativeModel, v, cfg: ProjectionConfig | None = None) -> np.ndarray:
    """Approximate range projection by restarted latent gradient descent.

    Each restart minimizes ||decode(z) - v||^2 with a fixed step size,
    clipping the latent onto the radius-r ball after every step.  The decode
    of the best final latent wins; ties keep the earliest restart.
    Deterministic given cfg.restart_seed.

    Raises:
        ProjectionError: when a restart ends with a non-finite objective.
    """
    if cfg is None:
        cfg = ProjectionConfig()
    v = as_vector(v)
    if v.shape != (model.n,):
        raise ValueError(f"v has length {v.shape[0]}, expected {model.n}")
    best_obj = np.inf
    best_z = None
    with np.errstate(over="ignore", invalid="ignore"):
        for idx in range(cfg.restarts):
            z = _clip_latent(_restart_point(model, cfg, idx), model.r)
            for _ in range(cfg.steps):
                resid = model.decode(z) - v
                grad = 2.0 * model.decode_vjp(z, resid)
                z = _clip_latent(z - cfg.step_size * grad, model.r)
            resid = model.decode(z) - v
            obj = float(resid @ resid)
            if not np.isfinite(obj):
                raise ProjectionError(
                    f"projection restart {idx} ended with non-finite objective"
                )
            if obj < best_obj:
                best_obj = obj
                best_z = z
    return model.decode(best_z)


def projected_power(mset: MeasurementSet, model: GenerativeModel, w0,
                    inner: ProjectionConfig | None = None) -> np.ndarray:
    """One projected power step: project the data matrix applied to w0.

    w0 must be a unit vector.  When the ground truth is known and w0 is not
    positively correlated with it, a warning is issued (the method's
    guarantee assumes positive correlation) but the step still runs.
    """
    w0 = as_vector(w0)
    if w0.shape != (mset.ensemble.n,):
        raise ValueError(
            f"w0 has length {w0.shape[0]}, expected {mset.ensemble.n}"
        )
    if abs(np.linalg.norm(w0) - 1.0) > 1e-10:
        raise ValueError("w0 must be a unit vector (to 1e-10)")
    if mset.truth is not None and float(w0 @ mset.truth) <= 0.0:
        warnings.warn(
            "w0 is not positively correlated with the truth; the projected "
            "power step may recover the sign-flipped signal",
            stacklevel=2,
        )
    return model.project(data_matrix(mset) @ w0, inner)


def _pgd_record(t: int, x: np.ndarray, rss: float, truth) -> TraceRecord:
    rel = None if truth is None else relative_distance(x, truth)
    return TraceRecord(
        t=t,
        residual_norm=float(np.sqrt(rss)),
        nnz=int(np.count_nonzero(x)),
        rel_dist=rel,
    )


def solve_pgd(mset: MeasurementSet, model: GenerativeModel, x0,
              cfg: PGDConfig | None = None) -> RecoveryResult:
    """Projected gradient descent on the quartic loss over the model range.

    The supplied x0 is projected once up front (skipped when the projection
    would move it by less than 1e-12 relative, i.e. it already sits in the
    range numerically).  Each iteration takes an unscaled gradient step
    x - mu * grad f(x) and projects back; a step that does not move the
    iterate skips re-projection, since projection is idempotent on its own
    output — this keeps the truth an exact fixed point.
    """
    if cfg is None:
        cfg = PGDConfig()
    x = as_vector(x0)
    if x.shape != (mset.ensemble.n,):
        raise ValueError(
            f"x0 has length {x.shape[0]}, expected {mset.ensemble.n}"
        )
    projected = model.project(x, cfg.inner)
    if np.linalg.norm(projected - x) > 1e-12 * (1.0 + np.linalg.norm(x)):
        x = projected
    trace: list[TraceRecord] = []
    status = Status.COMPLETED
    for t in range(cfg.iterations):
        grad, rss = _residual_pass(mset, x)
        trace.append(_pgd_record(t, x, rss, mset.truth))
        if not np.isfinite(rss) or not np.all(np.isfinite(grad)):
            status = Status.DIVERGED
            break
        stepped = x - cfg.mu * grad
        if not np.all(np.isfinite(stepped)):
            status = Status.DIVERGED
            break
        if not np.array_equal(stepped, x):
            x = model.project(stepped, cfg.inner)
    else:
        _, rss = _residual_pass(mset, x)
        trace.append(_pgd_record(cfg.iterations, x, rss, mset.truth))
    return RecoveryResult(estimate=x, status=status, trace=trace)


def check_step_condition(x0_err: float, mu: float, epsilon: float) -> bool:
    """Whether 2 - (2 - 7*x0_err)*mu < 1 - 2*epsilon holds.

    A diagnostic for the PGD contraction guarantee; it requires knowing the
    initial error, so it only applies when the truth is available.  The
    condition can never hold once x0_err >= 2/7.
    """
    if not 0.0 < mu <= 1.0:
        raise ValueError("mu must lie in (0, 1]")
    if not 0.0 < epsilon <= 0.5:
        raise ValueError("epsilon must lie in (0, 1/2]")
    if x0_err < 0:
        raise ValueError("x0_err must be nonnegative")
    return 2.0 - (2.0 - 7.0 * x0_err) * mu < 1.0 - 2.0 * epsilon


def default_w0(n: int) -> np.ndarray:
    """The flat unit vector (1/sqrt(n), ..., 1/sqrt(n))."""
    if n < 1:
        raise ValueError("n must be positive")
    return np.full(n, 1.0 / np.sqrt(n))


def correlated_direction(x, c0: float, seed: int) -> np.ndarray:
    """Unit vector with inner product c0 against the direction of x.

    Builds c0 * x/||x|| + sqrt(1 - c0^2) * u with u a seeded unit vector
    orthogonal to x.  The power-step guarantee needs a start direction
    positively correlated with the signal; for synthetic signals the flat
    vector correlates with random sign, so tests use this construction to
    control the correlation explicitly.
    """
    x = as_vector(x)
    norm = np.linalg.norm(x)
    if norm == 0.0:
        raise ValueError("x must be nonzero")
    if not -1.0 <= c0 <= 1.0:
        raise ValueError("c0 must lie in [-1, 1]")
    unit = x / norm
    n = x.shape[0]
    if n == 1:
        return unit * np.sign(c0) if c0 != 0 else unit
    g = rng.standard_normals(seed, rng.DIRECTION_STREAM, 0, n)
    g = g - (g @ unit) * unit
    gn = np.linalg.norm(g)
    if gn < 1e-12:
        raise ValueError("seeded orthogonal direction degenerated")
    w = c0 * unit + np.sqrt(1.0 - c0 * c0) * (g / gn)
    return w / np.linalg.norm(w)
