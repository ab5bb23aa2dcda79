"""Native thread-pool caps derived from ``SAAM_THREADS``.

Imported by the package before anything loads numpy: OpenMP/BLAS read these
variables once, when their pools start.
"""

from __future__ import annotations

import os
from collections.abc import MutableMapping

THREADS_ENV = "SAAM_THREADS"
NATIVE_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def cap_native_threads(environ: MutableMapping[str, str] | None = None) -> list[str]:
    """Copy a valid ``SAAM_THREADS`` into every pool variable the user left unset.

    Returns the variables that were set.
    """
    env = os.environ if environ is None else environ
    raw = env.get(THREADS_ENV, "").strip()
    if not raw.isdigit() or int(raw) < 1:
        return []
    applied = [var for var in NATIVE_THREAD_VARS if var not in env]
    for var in applied:
        env[var] = raw
    return applied


cap_native_threads()
