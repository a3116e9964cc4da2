"""Select the SGNS kernel at import time.

Set ``RECCHECK_PURE_PYTHON=1`` to force the numpy fallback.
"""
import logging
import os

logger = logging.getLogger(__name__)

if os.environ.get("RECCHECK_PURE_PYTHON", "") not in ("", "0"):
    from . import _sgns_py as kernel

    BACKEND = "python"
else:
    try:
        from . import _sgns_ext as kernel

        BACKEND = "cython"
    except ImportError:
        logger.debug("compiled SGNS kernel unavailable; using numpy fallback")
        from . import _sgns_py as kernel

        BACKEND = "python"

train_pairs = kernel.train_pairs

__all__ = ["BACKEND", "train_pairs"]
