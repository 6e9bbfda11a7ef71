"""Backend selection for the integration kernel.

The compiled extension is used when importable. Setting the environment
variable ``STEIN_CPG_BACKEND=python`` forces the pure-Python fallback.
"""
import os

_requested = os.environ.get("STEIN_CPG_BACKEND", "auto").lower()

if _requested == "python":
    from . import _pykernel as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernel as _impl

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        from . import _pykernel as _impl

        BACKEND = "python"

derivative = _impl.derivative
integrate = _impl.integrate
envelope = _impl.envelope


def get_backend(name: str | None = None):
    """Return a kernel module by name (``"cython"`` or ``"python"``), default the active one."""
    if name is None:
        return _impl
    if name == "python":
        from . import _pykernel

        return _pykernel
    if name == "cython":
        from . import _kernel

        return _kernel
    raise ValueError(f"unknown backend {name!r}")
