"""Counter-based deterministic random number generation.

Every random quantity in this package is a pure function of a 64-bit seed,
a stream tag, and a word index.  Word ``i`` of stream ``(seed, stream)`` is

    w_i = mix64(key + (i + 1) * gamma)

where ``mix64`` is the SplitMix64 finalizer (Steele et al.), ``key`` and
``gamma`` are derived from ``(seed, stream)`` by two further mixing rounds,
and all arithmetic is modulo 2**64.  Because each word depends only on its
index, any slice of a stream — a single matrix entry, one matrix out of a
large ensemble — can be regenerated in isolation without producing its
predecessors.

Uniform variates take the top 53 bits:  u = ((w >> 11) + 0.5) * 2**-53,
which lies in the open interval (0, 1) and is symmetric about 1/2.  Standard
normals are produced by inverse transform sampling through a rational
approximation of the normal quantile function (Wichura's PPND16, accurate to
about 1e-15).  The tail branch needs a logarithm; to keep results
bit-identical across platforms and library versions, the log is computed here
with a fixed polynomial using only exactly-rounded primitives (+, -, *, /,
sqrt, frexp) rather than the platform libm.

The scheme is frozen: changing any constant here changes every simulated
dataset, so the constants are pinned by regression tests.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "MATRIX_STREAM",
    "SIGNAL_STREAM",
    "MODEL_STREAM",
    "LATENT_STREAM",
    "DIRECTION_STREAM",
    "mix64",
    "derive_seed",
    "raw_words",
    "uniforms",
    "standard_normals",
    "inverse_normal_cdf",
]

_MASK = (1 << 64) - 1

# Domain-separation tags so distinct uses of the same seed never share words.
MATRIX_STREAM = 0x4D415452_49434553
SIGNAL_STREAM = 0x5349474E_414C0001
MODEL_STREAM = 0x4D4F4445_4C000001
LATENT_STREAM = 0x4C415445_4E540001
DIRECTION_STREAM = 0x44495245_43540001

_KEY_C = 0xA0761D6478BD642F
_STREAM_C = 0xE7037ED1A0B428DB
_GOLDEN = 0x9E3779B97F4A7C15

# Working chunk for the vectorized pipeline; a pure performance knob with no
# effect on output values.
_CHUNK = 1 << 19


def mix64(value: int) -> int:
    """SplitMix64 finalizer on python ints (mod 2**64)."""
    z = value & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(base: int, *parts: int) -> int:
    """Collapse (base, parts...) into one 64-bit sub-seed.

    Used by the experiment harness to give every trial, signal, and ensemble
    its own independent stream.  Chained avalanche mixing: order and arity of
    the parts matter, so (1, 2) and (2, 1) land far apart.
    """
    h = mix64((base & _MASK) ^ _KEY_C)
    for p in parts:
        h = mix64((h + _GOLDEN) & _MASK)
        h = mix64(h ^ mix64(p & _MASK))
    return h


def _stream_state(seed: int, stream: int) -> tuple[np.uint64, np.uint64]:
    key = mix64((mix64((seed & _MASK) ^ _KEY_C) + ((stream & _MASK) ^ _STREAM_C)) & _MASK)
    gamma = mix64((key + _GOLDEN) & _MASK) | 1
    return np.uint64(key), np.uint64(gamma)


def _words_into(key: np.uint64, gamma: np.uint64, start: int, out: np.ndarray) -> np.ndarray:
    count = out.shape[0]
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        np.multiply(idx, gamma, out=idx)
        np.add(idx, key, out=idx)
        s = np.right_shift(idx, np.uint64(30))
        np.bitwise_xor(idx, s, out=idx)
        np.multiply(idx, np.uint64(0xBF58476D1CE4E5B9), out=idx)
        np.right_shift(idx, np.uint64(27), out=s)
        np.bitwise_xor(idx, s, out=idx)
        np.multiply(idx, np.uint64(0x94D049BB133111EB), out=idx)
        np.right_shift(idx, np.uint64(31), out=s)
        np.bitwise_xor(idx, s, out=idx)
    out[:] = idx
    return out


def raw_words(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """uint64 words [start, start+count) of the given stream."""
    key, gamma = _stream_state(seed, stream)
    out = np.empty(count, dtype=np.uint64)
    for lo in range(0, count, _CHUNK):
        hi = min(lo + _CHUNK, count)
        _words_into(key, gamma, start + lo, out[lo:hi])
    return out


def _uniform_from_words(words: np.ndarray) -> np.ndarray:
    u = np.right_shift(words, np.uint64(11)).astype(np.float64)
    u += 0.5
    u *= 2.0**-53
    return u


def uniforms(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """float64 uniforms on (0, 1), one per stream word."""
    key, gamma = _stream_state(seed, stream)
    out = np.empty(count, dtype=np.float64)
    scratch = np.empty(min(count, _CHUNK), dtype=np.uint64)
    for lo in range(0, count, _CHUNK):
        hi = min(lo + _CHUNK, count)
        w = _words_into(key, gamma, start + lo, scratch[: hi - lo])
        out[lo:hi] = _uniform_from_words(w)
    return out


# --- deterministic natural log -------------------------------------------
# log p = e*ln2 + 2*atanh(t), t = (f-1)/(f+1), after normalizing the
# mantissa f into [sqrt(2)/2, sqrt(2)); |t| <= 0.1716 so an 11-term odd
# series reaches full double precision.

_LN2 = 0.6931471805599453
_SQRT_HALF = 0.7071067811865476
_ATANH_COEF = tuple(1.0 / (2 * j + 1) for j in range(10, 0, -1))


def _log_deterministic(p: np.ndarray) -> np.ndarray:
    f, e = np.frexp(p)
    small = f < _SQRT_HALF
    f = np.where(small, f * 2.0, f)
    e = np.where(small, e - 1, e)
    t = (f - 1.0) / (f + 1.0)
    t2 = t * t
    poly = np.full_like(t, _ATANH_COEF[0])
    for c in _ATANH_COEF[1:]:
        poly *= t2
        poly += c
    poly *= t2
    poly += 1.0
    return e * _LN2 + 2.0 * t * poly


# --- inverse normal CDF (Wichura PPND16, AS 241) ---------------------------

_CENTRAL_NUM = (
    2.5090809287301226727e3,
    3.3430575583588128105e4,
    6.7265770927008700853e4,
    4.5921953931549871457e4,
    1.3731693765509461125e4,
    1.9715909503065514427e3,
    1.3314166789178437745e2,
    3.3871328727963666080e0,
)
_CENTRAL_DEN = (
    5.2264952788528545610e3,
    2.8729085735721942674e4,
    3.9307895800092710610e4,
    2.1213794301586595867e4,
    5.3941960214247511077e3,
    6.8718700749205790830e2,
    4.2313330701600911252e1,
    1.0,
)
_MID_NUM = (
    7.74545014278341407640e-4,
    2.27238449892691845833e-2,
    2.41780725177450611770e-1,
    1.27045825245236838258e0,
    3.64784832476320460504e0,
    5.76949722146069140550e0,
    4.63033784615654529590e0,
    1.42343711074968357734e0,
)
_MID_DEN = (
    1.05075007164441684324e-9,
    5.47593808499534494600e-4,
    1.51986665636164571966e-2,
    1.48103976427480074590e-1,
    6.89767334985100004550e-1,
    1.67638483018380384940e0,
    2.05319162663775882187e0,
    1.0,
)
_FAR_NUM = (
    2.01033439929228813265e-7,
    2.71155556874348757815e-5,
    1.24266094738807843860e-3,
    2.65321895265761230930e-2,
    2.96560571828504891230e-1,
    1.78482653991729133580e0,
    5.46378491116411436990e0,
    6.65790464350110377720e0,
)
_FAR_DEN = (
    2.04426310338993978564e-15,
    1.42151175831644588870e-7,
    1.84631831751005468180e-5,
    7.86869131145613259100e-4,
    1.48753612908506148525e-2,
    1.36929880922735805310e-1,
    5.99832206555887937690e-1,
    1.0,
)


def _horner(r: np.ndarray, coef: tuple[float, ...]) -> np.ndarray:
    acc = np.full_like(r, coef[0])
    for c in coef[1:]:
        acc *= r
        acc += c
    return acc


def _tail_quantile(p: np.ndarray) -> np.ndarray:
    """|quantile| for lower-tail probabilities p < 0.075."""
    r = np.sqrt(-_log_deterministic(p))
    out = np.empty_like(r)
    near = r <= 5.0
    if np.any(near):
        rn = r[near] - 1.6
        out[near] = _horner(rn, _MID_NUM) / _horner(rn, _MID_DEN)
    far = ~near
    if np.any(far):
        rf = r[far] - 5.0
        out[far] = _horner(rf, _FAR_NUM) / _horner(rf, _FAR_DEN)
    return out


def inverse_normal_cdf(u: np.ndarray) -> np.ndarray:
    """Normal quantile of u ∈ (0, 1), elementwise, deterministic."""
    u = np.asarray(u, dtype=np.float64)
    q = u - 0.5
    r = 0.180625 - q * q
    out = q * _horner(r, _CENTRAL_NUM) / _horner(r, _CENTRAL_DEN)
    lower = q < -0.425
    upper = q > 0.425
    if np.any(lower):
        out[lower] = -_tail_quantile(u[lower])
    if np.any(upper):
        out[upper] = _tail_quantile(1.0 - u[upper])
    return out


try:  # optional accelerator; bit-identical to the numpy path by construction
    from quadrec._fastgen import normals_into as _fast_normals_into
except ImportError:  # pragma: no cover - exercised only without numba
    _fast_normals_into = None


def _reference_normals(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """Pure-numpy normal generation; the reference the fast path must match."""
    key, gamma = _stream_state(seed, stream)
    out = np.empty(count, dtype=np.float64)
    scratch = np.empty(min(count, _CHUNK), dtype=np.uint64)
    for lo in range(0, count, _CHUNK):
        hi = min(lo + _CHUNK, count)
        w = _words_into(key, gamma, start + lo, scratch[: hi - lo])
        out[lo:hi] = inverse_normal_cdf(_uniform_from_words(w))
    return out


def standard_normals(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """float64 i.i.d. N(0,1), one per stream word, by inverse transform."""
    if _fast_normals_into is not None:
        key, gamma = _stream_state(seed, stream)
        out = np.empty(count, dtype=np.float64)
        _fast_normals_into(key, gamma, np.uint64(start), out)
        return out
    return _reference_normals(seed, stream, start, count)
