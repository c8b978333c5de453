"""Selects the compiled kernel backend, falling back to NumPy.

Set PURSUIT_BACKEND=python to force the fallback, PURSUIT_BACKEND=compiled
to require the extension (ImportError if it was not built). Traces are
reproducible within one backend; the two agree only to roundoff.
"""

import os

from . import _kernels_py

_requested = os.environ.get("PURSUIT_BACKEND", "auto").lower()

if _requested == "python":
    _impl = _kernels_py
elif _requested == "compiled":
    from . import _kernels as _impl  # noqa: F401
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

so3_exp = _impl.so3_exp
se3_exp = _impl.se3_exp
sqexp_mat = _impl.sqexp_mat
gp_eval = _impl.gp_eval
lml_total = _impl.lml_total


def active_backend() -> str:
    """Name of the kernel implementation in use ("compiled" or "python")."""
    return _impl.BACKEND
