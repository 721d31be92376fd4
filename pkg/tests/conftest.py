"""Shared test configuration.

BLAS threading is pinned to one thread before numpy loads so timing
comparisons and reduction orders are single-threaded and deterministic.
"""

import os

for var in (
    "OPENBLAS_NUM_THREADS",
    "OMP_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
):
    os.environ.setdefault(var, "1")
