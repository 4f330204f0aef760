"""Backend selection: compiled kernels when available, pure Python otherwise.

``SPECTRAL_SDE_BACKEND`` forces the choice: ``ext`` (fail if the compiled
module is missing), ``python``, or ``auto`` (default).  Both backends expose
the same functions and produce bit-identical output on one platform; the
contract lives in the ``_pykernels`` module docstring.
"""

from __future__ import annotations

import os

_choice = os.environ.get("SPECTRAL_SDE_BACKEND", "auto").strip().lower()

if _choice not in ("auto", "ext", "python", ""):
    raise RuntimeError(
        f"SPECTRAL_SDE_BACKEND={_choice!r}: expected auto, ext, or python")

if _choice == "python":
    from . import _pykernels as kernels
elif _choice == "ext":
    from . import _ckernels as kernels  # type: ignore[no-redef]
else:
    try:
        from . import _ckernels as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _pykernels as kernels  # type: ignore[no-redef]

BACKEND = kernels.BACKEND_NAME


def get_kernels(name=None):
    """Return a kernels module by name ('ext' or 'python'); default: active."""
    if name is None:
        return kernels
    if name == "python":
        from . import _pykernels
        return _pykernels
    if name == "ext":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
