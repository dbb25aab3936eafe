"""Thread-cap bootstrap.

BLAS backends size their thread pools from environment variables when
the numeric libraries first load, so the NEWSTAG_THREADS cap has to be
exported before any module imports numpy.  Importing this module first
(as the package __init__ does) guarantees that ordering.
"""

import os

_BLAS_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def apply_thread_cap() -> None:
    threads = os.environ.get("NEWSTAG_THREADS")
    if threads:
        for var in _BLAS_VARS:
            os.environ.setdefault(var, threads)


apply_thread_cap()
