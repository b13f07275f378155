"""Backend selection for the hot LSTM-cell kernels.

The compiled extension ``hmtl._kernels`` is used when it was built at install
time; otherwise the numpy fallback is loaded. Set ``HMTL_PURE_PYTHON=1`` to
force the fallback (handy for benchmarking and for cross-checking results).
"""

import os

from hmtl import _kernels_py

if os.environ.get("HMTL_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from hmtl import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

lstm_cell_forward = _impl.lstm_cell_forward
lstm_cell_backward = _impl.lstm_cell_backward

__all__ = ["BACKEND", "lstm_cell_forward", "lstm_cell_backward"]
