"""Scheduling kernel backend selection.

Prefers the compiled extension when it imports cleanly; falls back to the
pure-Python reference otherwise. Set MAARS_PURE_KERNEL=1 to force the
fallback (used by the parity tests and the benchmark).
"""

import os

from ._pure import BudgetExceeded, DeadlineMiss, splitmix64  # noqa: F401
from . import _pure

if os.environ.get("MAARS_PURE_KERNEL"):
    _backend = _pure
else:
    try:
        from . import _fast as _backend  # type: ignore[no-redef]
    except ImportError:
        _backend = _pure

BACKEND = "compiled" if _backend is not _pure else "pure"

simulate_fp = _backend.simulate_fp
shuffle = _backend.shuffle
aware_shuffle = _backend.aware_shuffle
enumerate_all = _backend.enumerate_all
