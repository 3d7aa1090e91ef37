"""Runtime toggle between numba-compiled kernels and plain numpy.

Hot inner loops in this package are written twice or compiled from a single
source: a numba ``@njit`` path used by default, and a pure-numpy fallback.
Setting the environment variable ``SOFTCONTACT_NO_NUMBA=1`` (or running
without numba installed) selects the fallback everywhere.  The flag is read
once at import time.
"""

from __future__ import annotations

import os

ENV_FLAG = "SOFTCONTACT_NO_NUMBA"


def _detect_numba() -> bool:
    if os.environ.get(ENV_FLAG, "0").strip() not in ("", "0"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _detect_numba()


def maybe_jit(func=None, **jit_kwargs):
    """Decorate ``func`` with ``numba.njit`` when acceleration is on.

    Usable with or without parentheses.  When acceleration is off the
    function is returned untouched, so the same source runs as an
    interpreted numpy loop.  Compiled dispatchers keep the original under
    ``.py_func``, which the benchmark uses to time both paths.
    """

    def wrap(f):
        if not NUMBA_ENABLED:
            return f
        import numba

        jit_kwargs.setdefault("cache", True)
        return numba.njit(**jit_kwargs)(f)

    if func is None:
        return wrap
    return wrap(func)
