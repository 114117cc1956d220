"""Multi-view MAV action recognition: view extraction, 3D residual encoders,
feature-pyramid fusion, cross-view attention, and a synthetic trajectory corpus,
built on a small reverse-mode autodiff engine."""

import os
import sys

# BLAS thread caps must be in place before numpy is first imported, or the
# pinned single-thread deterministic mode cannot be guaranteed.
if "numpy" not in sys.modules:
    _n = os.environ.get("MAVR_THREADS", "1")
    for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _n)

__version__ = "0.1.0"
