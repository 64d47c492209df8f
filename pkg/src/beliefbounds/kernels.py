"""Kernel selection: compiled extension when available, numpy fallback otherwise.

Set BELIEFBOUNDS_PURE_KERNELS=1 to force the fallback (used by the benchmark
and by tests that compare both implementations).
"""

from __future__ import annotations

import os

from . import _kernels_py

pure = _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

compiled = _compiled

if os.environ.get("BELIEFBOUNDS_PURE_KERNELS") == "1" or _compiled is None:
    active = _kernels_py
    COMPILED = False
else:
    active = _compiled
    COMPILED = True

contract_bucket = active.contract_bucket
