"""
Finite-Difference Helpers for arsrank

Central differences used to verify every hand-written backward pass,
both by the `gradcheck` command and by the test suite.

Usage:
    from src.utils.finite_diff import central_difference, relative_error

    numeric = central_difference(lambda: loss(params), params["ars.w_att"])
    assert relative_error(analytic, numeric) < 1e-4
"""

from typing import Callable, Iterable, Optional

import numpy as np

DEFAULT_STEP = 1e-4


def central_difference(
    func: Callable[[], float],
    array: np.ndarray,
    step: float = DEFAULT_STEP,
    indices: Optional[Iterable[tuple]] = None,
) -> np.ndarray:
    """
    Numerical gradient of a scalar function with respect to ``array``.

    ``array`` is perturbed in place, one entry at a time, and restored after
    each perturbation: (f(x + h) - f(x - h)) / 2h.

    Args:
        func: Zero-argument callable returning the scalar objective. It must
              read ``array`` (directly or through the object owning it).
        array: Parameter tensor to perturb (float64).
        step: Finite-difference step h.
        indices: Optional subset of multi-indices to perturb; the others are
                 left at zero in the result.

    Returns:
        np.ndarray: Same shape as ``array``.
    """
    grad = np.zeros_like(array, dtype=np.float64)
    if indices is None:
        indices = np.ndindex(array.shape)

    for idx in indices:
        original = array[idx]
        array[idx] = original + step
        plus = func()
        array[idx] = original - step
        minus = func()
        array[idx] = original
        grad[idx] = (plus - minus) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-12) -> float:
    """
    Block-wise relative error ||a - n|| / max(||a||, ||n||, floor).

    A block whose analytic and numeric gradients are both (near) zero scores
    its absolute difference divided by ``floor``-clamped norms, so a spurious
    nonzero still shows up.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    diff = float(np.linalg.norm(analytic - numeric))
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)))
    if scale < floor:
        # both vanish: only an absolute mismatch matters
        return 0.0 if diff < floor else diff / floor
    return diff / scale
