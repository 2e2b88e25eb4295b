"""Optional numba acceleration.

Hot kernels are written once in loop form and compiled with ``numba.njit``
when available. Setting ``STSPBO_DISABLE_NUMBA=1`` (or running without numba
installed) selects the vectorized numpy implementations instead.
"""
import logging
import os

logger = logging.getLogger(__name__)

_DISABLED = os.environ.get("STSPBO_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError("disabled by STSPBO_DISABLE_NUMBA")
    import numba

    HAS_NUMBA = True
except ImportError as exc:  # pragma: no cover - depends on environment
    logger.debug("numba unavailable (%s); using numpy kernels", exc)
    numba = None
    HAS_NUMBA = False


def njit(func):
    if HAS_NUMBA:
        return numba.njit(cache=True, fastmath=False)(func)
    return func
