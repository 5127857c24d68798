"""String-alignment kernels with backend selection at import time.

The compiled extension (litquest._ckernels) is preferred; the pure-Python
module is the fallback. Set LITQUEST_PURE_PY=1 to force the fallback, e.g.
for benchmarking or debugging. Both backends implement:

    lcs_subsequence_len(a, b)  -> longest common subsequence length
    common_substring_len(a, b) -> longest common contiguous substring length
"""

import os

from . import _kernels_py as _pure

try:
    from . import _ckernels as _compiled
except ImportError:
    _compiled = None

_FORCED_PURE = os.environ.get("LITQUEST_PURE_PY", "") not in ("", "0")
_active = _pure if (_compiled is None or _FORCED_PURE) else _compiled

lcs_subsequence_len = _active.lcs_subsequence_len
common_substring_len = _active.common_substring_len


def backend_name() -> str:
    """Name of the backend selected at import ("compiled" or "pure")."""
    return "pure" if _active is _pure else "compiled"


def backends() -> dict:
    """All importable backends, for parity tests and benchmarks."""
    out = {"pure": _pure}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out
