"""Selection between the numba-compiled kernels and the pure numpy path.

Set ``CRAMP_DISABLE_NUMBA=1`` (or ``CRAMP_BACKEND=numpy``) before import to
force the numpy implementations. ``set_backend`` switches at runtime, which
the benchmark and the equivalence tests use.
"""
import os

try:
    import numba  # noqa: F401

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    NUMBA_AVAILABLE = False


def _initial_backend():
    if os.environ.get("CRAMP_DISABLE_NUMBA", "").strip() not in ("", "0"):
        return "numpy"
    choice = os.environ.get("CRAMP_BACKEND", "").strip().lower()
    if choice in ("numpy", "numba"):
        if choice == "numba" and not NUMBA_AVAILABLE:
            return "numpy"
        return choice
    return "numba" if NUMBA_AVAILABLE else "numpy"


_BACKEND = _initial_backend()


def get_backend():
    return _BACKEND


def set_backend(name):
    """Switch kernels globally; returns the previous backend name."""
    global _BACKEND
    if name not in ("numpy", "numba"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    prev, _BACKEND = _BACKEND, name
    return prev
