"""Small dense linear-algebra helpers."""

import math

import numpy as np

__all__ = ["expm"]


def expm(a, max_terms: int = 40) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Taylor core.

    Meant for the 2x2 and 3x3 generators used here; the matrix is scaled so
    that its 1-norm is at most 1/2, where a truncated Taylor series
    converges to machine precision in well under ``max_terms`` terms.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expm expects a square matrix")
    dtype = np.result_type(a.dtype, float)
    a = a.astype(dtype)
    norm = np.linalg.norm(a, 1)
    if not np.isfinite(norm):
        raise ValueError("matrix has non-finite entries")
    squarings = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    scaled = a / (2.0 ** squarings)

    result = np.eye(a.shape[0], dtype=dtype)
    term = np.eye(a.shape[0], dtype=dtype)
    for k in range(1, max_terms + 1):
        term = term @ scaled / k
        result = result + term
        if np.linalg.norm(term, 1) <= np.finfo(float).eps * 1e-3 * np.linalg.norm(result, 1):
            break
    else:
        raise ArithmeticError("Taylor series did not converge")

    for _ in range(squarings):
        result = result @ result
    return result
