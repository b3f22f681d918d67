"""Optional numba-accelerated twin of the rng normal generator.

Implements exactly the same operation sequence as the pure-numpy path in
``rng`` (same mixer, same uniform mapping, same quantile rational
approximations, same deterministic log), element by element, without
fastmath, so both paths produce bit-identical float64 streams.  Tests
assert that equality; if numba is unavailable the package silently runs on
the numpy path alone.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, uint64

_TWO_NEG53 = 2.0**-53
_LN2 = 0.6931471805599453
_SQRT_HALF = 0.7071067811865476


@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)
    return z ^ (z >> uint64(31))


@njit(cache=True, inline="always")
def _log_det(p):
    f, e = math.frexp(p)
    if f < _SQRT_HALF:
        f = f * 2.0
        e = e - 1
    t = (f - 1.0) / (f + 1.0)
    t2 = t * t
    # 1/21, 1/19, ..., 1/3 then the closing *t2 + 1 step, matching rng._ATANH_COEF
    poly = 1.0 / 21.0
    poly = poly * t2 + 1.0 / 19.0
    poly = poly * t2 + 1.0 / 17.0
    poly = poly * t2 + 1.0 / 15.0
    poly = poly * t2 + 1.0 / 13.0
    poly = poly * t2 + 1.0 / 11.0
    poly = poly * t2 + 1.0 / 9.0
    poly = poly * t2 + 1.0 / 7.0
    poly = poly * t2 + 1.0 / 5.0
    poly = poly * t2 + 1.0 / 3.0
    poly = poly * t2
    poly = poly + 1.0
    return e * _LN2 + 2.0 * t * poly


@njit(cache=True, inline="always")
def _tail(p):
    r = np.sqrt(-_log_det(p))
    if r <= 5.0:
        rn = r - 1.6
        num = (((((((7.74545014278341407640e-4 * rn + 2.27238449892691845833e-2) * rn + 2.41780725177450611770e-1) * rn + 1.27045825245236838258e0) * rn + 3.64784832476320460504e0) * rn + 5.76949722146069140550e0) * rn + 4.63033784615654529590e0) * rn + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * rn + 5.47593808499534494600e-4) * rn + 1.51986665636164571966e-2) * rn + 1.48103976427480074590e-1) * rn + 6.89767334985100004550e-1) * rn + 1.67638483018380384940e0) * rn + 2.05319162663775882187e0) * rn + 1.0)
    else:
        rf = r - 5.0
        num = (((((((2.01033439929228813265e-7 * rf + 2.71155556874348757815e-5) * rf + 1.24266094738807843860e-3) * rf + 2.65321895265761230930e-2) * rf + 2.96560571828504891230e-1) * rf + 1.78482653991729133580e0) * rf + 5.46378491116411436990e0) * rf + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * rf + 1.42151175831644588870e-7) * rf + 1.84631831751005468180e-5) * rf + 7.86869131145613259100e-4) * rf + 1.48753612908506148525e-2) * rf + 1.36929880922735805310e-1) * rf + 5.99832206555887937690e-1) * rf + 1.0)
    return num / den


@njit(cache=True)
def normals_into(key, gamma, start, out):
    n = out.shape[0]
    for j in range(n):
        z = _mix(key + (start + uint64(j) + uint64(1)) * gamma)
        u = (np.float64(z >> uint64(11)) + 0.5) * _TWO_NEG53
        q = u - 0.5
        if q < -0.425:
            out[j] = -_tail(u)
        elif q > 0.425:
            out[j] = _tail(1.0 - u)
        else:
            r = 0.180625 - q * q
            num = (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r + 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r + 1.3314166789178437745e+2) * r + 3.3871328727963666080e0)
            den = (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r + 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r + 4.2313330701600911252e+1) * r + 1.0)
            out[j] = q * num / den
    return out
