"""Backend selection for the hot kernels.

The compiled extension is preferred; the numpy implementation is used when it
is missing or when the environment variable ``HPCYCLE_PURE_PYTHON`` is set to
a non-empty value other than ``0``.
"""

import os

from . import _kernels_py

_forced = os.environ.get("HPCYCLE_PURE_PYTHON", "") not in ("", "0")

_ext = None
if not _forced:
    try:
        from . import _ext
    except ImportError:  # pragma: no cover - depends on build
        _ext = None

if _ext is not None:
    BACKEND = "compiled"
    subset_sum_census = _ext.subset_sum_census
    subset_sum_count = _ext.subset_sum_count
    propagate = _ext.propagate
else:
    BACKEND = "python"
    subset_sum_census = _kernels_py.subset_sum_census
    subset_sum_count = _kernels_py.subset_sum_count
    propagate = _kernels_py.propagate


def backends():
    """Mapping of available backend names to kernel namespaces."""
    out = {"python": _kernels_py}
    if _ext is not None:
        out["compiled"] = _ext
    return out


__all__ = ["BACKEND", "backends", "propagate", "subset_sum_census", "subset_sum_count"]
