"""Numerical core: compiled extension when available, numpy fallback otherwise.

Set ``LOCSTAT_FORCE_FALLBACK=1`` to skip the compiled extension (used by the
backend parity tests and the benchmark).
"""

import os

from . import _fallback

if os.environ.get("LOCSTAT_FORCE_FALLBACK") == "1":
    _impl = _fallback
else:
    try:
        from . import _recursion as _impl
    except ImportError:
        _impl = _fallback

scan_segment = _impl.scan_segment


def backend_name() -> str:
    return _impl.BACKEND
