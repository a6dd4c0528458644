"""Element kernels, taken from the compiled extension when it is available.

Set ``RKDG_PURE_PYTHON=1`` to force the numpy implementation.
"""
import os

from . import _kernels_py

BACKEND = "python"
cell_eval = _kernels_py.cell_eval
cell_test = _kernels_py.cell_test
modal_values = _kernels_py.modal_values

if not os.environ.get("RKDG_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        cell_eval = _compiled.cell_eval
        cell_test = _compiled.cell_test
        modal_values = _compiled.modal_values
        BACKEND = "cython"
