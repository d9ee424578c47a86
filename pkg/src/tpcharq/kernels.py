"""Backend selection for the decoding kernels.

The compiled extension is preferred when present; ``TPCHARQ_KERNELS=python``
forces the numpy fallback (used by the benchmark and for debugging).  Both
backends expose the same four callables.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("TPCHARQ_KERNELS", "").lower() not in ("python", "py"):
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        pass

matrix_valid = _impl.matrix_valid
hiho_decode_matrix = _impl.hiho_decode_matrix
chase_rows = _impl.chase_rows
chase_decode_matrix = _impl.chase_decode_matrix


def available_backends() -> dict[str, object]:
    """Importable kernel implementations keyed by name."""
    out: dict[str, object] = {"python": _kernels_py}
    try:
        from . import _speedups

        out["compiled"] = _speedups
    except ImportError:
        pass
    return out
