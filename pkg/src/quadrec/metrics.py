"""Error metrics for quadratic-system recovery.

Measurements are sign-blind, so the sparse track scores estimates up to a
global sign flip.  The generative track instead reports the alignment of the
normalized estimate with the truth, which is sign-sensitive by convention.
"""

import numpy as np

from .measure import as_vector


def relative_distance(xhat, x):
    """Sign-invariant relative error min_s ||xhat - s*x|| / ||x||, s = ±1.

    Args:
        xhat: estimate vector.
        x: ground-truth vector, must be nonzero.
    """
    xhat = as_vector(xhat)
    x = as_vector(x)
    if xhat.shape != x.shape:
        raise ValueError(f"shape mismatch: {xhat.shape} vs {x.shape}")
    norm_x = np.linalg.norm(x)
    if norm_x == 0.0:
        raise ValueError("relative distance is undefined for a zero truth")
    plus = np.linalg.norm(xhat - x)
    minus = np.linalg.norm(xhat + x)
    return float(min(plus, minus) / norm_x)


def cosine_similarity(xhat, x):
    """Inner product of the truth with the normalized estimate, x'(xhat/|xhat|).

    Only the estimate is normalized; with a unit-norm truth the result lies
    in [-1, 1] and is sign-sensitive (no flip is applied).

    Args:
        xhat: estimate vector, must be nonzero.
        x: ground-truth vector.
    """
    xhat = as_vector(xhat)
    x = as_vector(x)
    if xhat.shape != x.shape:
        raise ValueError(f"shape mismatch: {xhat.shape} vs {x.shape}")
    norm_hat = np.linalg.norm(xhat)
    if norm_hat == 0.0:
        raise ValueError("cosine similarity is undefined for a zero estimate")
    return float(x @ (xhat / norm_hat))


def norm_matched_distance(xhat, x):
    """Distance after rescaling the estimate to the truth's norm, no sign flip.

    Equals ||x|| * sqrt(2 - 2*cos) where cos is the normalized alignment;
    used as the error metric on the generative track, where the projection
    convention orients the estimate toward positive correlation and a sign
    flip would hide an inverted recovery.
    """
    xhat = as_vector(xhat)
    x = as_vector(x)
    if xhat.shape != x.shape:
        raise ValueError(f"shape mismatch: {xhat.shape} vs {x.shape}")
    norm_hat = np.linalg.norm(xhat)
    norm_x = np.linalg.norm(x)
    if norm_hat == 0.0:
        return float(norm_x)
    return float(np.linalg.norm(x - xhat * (norm_x / norm_hat)))
