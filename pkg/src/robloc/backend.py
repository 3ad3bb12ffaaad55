"""Numerical backend selection.

The compiled extension ``robloc._native`` is preferred when importable; the
pure-numpy module ``robloc._core_py`` is the fallback.  Set the environment
variable ``ROBLOC_BACKEND=python`` (or ``native``) before import to force a
choice; forcing ``native`` raises if the extension is missing.
"""

import os

_requested = os.environ.get("ROBLOC_BACKEND", "").strip().lower()

if _requested == "python":
    from . import _core_py as core
elif _requested == "native":
    from . import _native as core  # type: ignore[no-redef]
else:
    try:
        from . import _native as core  # type: ignore[no-redef]
    except ImportError:
        from . import _core_py as core  # type: ignore[no-redef]

BACKEND = core.BACKEND_NAME


def available_backends():
    """Names of importable backends, native first when present."""
    names = []
    try:
        from . import _native  # noqa: F401
        names.append("native")
    except ImportError:
        pass
    names.append("python")
    return names


def load_backend(name):
    """Import a backend module by name (for benchmarks and tests)."""
    if name == "python":
        from . import _core_py
        return _core_py
    if name == "native":
        from . import _native
        return _native
    raise ValueError(f"unknown backend {name!r}")
