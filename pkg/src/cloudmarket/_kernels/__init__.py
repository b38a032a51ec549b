"""Hot kernels, compiled when the extension is built and numpy otherwise.

Set ``CLOUDMARKET_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from . import _scan_py

python_scan_profit_grid = _scan_py.scan_profit_grid

compiled_scan_profit_grid = None
if not os.environ.get("CLOUDMARKET_PURE_PYTHON"):
    try:
        from ._scan import scan_profit_grid as compiled_scan_profit_grid
    except ImportError:
        compiled_scan_profit_grid = None

if compiled_scan_profit_grid is not None:
    scan_profit_grid = compiled_scan_profit_grid
    BACKEND = "cython"
else:
    scan_profit_grid = python_scan_profit_grid
    BACKEND = "python"

__all__ = ["BACKEND", "scan_profit_grid", "python_scan_profit_grid", "compiled_scan_profit_grid"]
