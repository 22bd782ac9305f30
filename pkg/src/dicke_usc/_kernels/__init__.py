"""Backend selection for the master-equation pair kernel.

The compiled extension is used when it was built; setting
``DICKE_USC_PURE_PYTHON=1`` forces the numpy implementation.
"""
import os

from . import _pairs_py

BACKEND = "python"
gme_pairs = _pairs_py.gme_pairs

if os.environ.get("DICKE_USC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _pairs as _compiled
    except ImportError:
        _compiled = None
    if _compiled is not None:
        gme_pairs = _compiled.gme_pairs
        BACKEND = "cython"

python_gme_pairs = _pairs_py.gme_pairs

__all__ = ["BACKEND", "gme_pairs", "python_gme_pairs"]
