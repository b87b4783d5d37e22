"""Backend selection for the hot LP kernel.

The compiled extension ``mpgne._simplex`` is used when it was built and
importable; otherwise the numpy implementation in ``mpgne._simplex_py`` is
used.  Setting ``MPGNE_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _simplex_py

OPTIMAL = _simplex_py.OPTIMAL
INFEASIBLE = _simplex_py.INFEASIBLE
UNBOUNDED = _simplex_py.UNBOUNDED
ITERATION_LIMIT = _simplex_py.ITERATION_LIMIT

_compiled = None
if os.environ.get("MPGNE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _simplex as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
simplex_std = _compiled.simplex_std if _compiled is not None else _simplex_py.simplex_std


def get_simplex(backend=None):
    """Return the ``simplex_std`` implementation for ``backend``.

    ``backend`` is ``"compiled"``, ``"python"`` or ``None`` (the active one).
    Raises ``RuntimeError`` when the compiled backend is requested but absent.
    """
    if backend is None:
        return simplex_std
    if backend == "python":
        return _simplex_py.simplex_std
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled simplex extension is not available")
        return _compiled.simplex_std
    raise ValueError(f"unknown backend {backend!r}")


def compiled_available():
    return _compiled is not None
