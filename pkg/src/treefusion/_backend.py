"""Select the compiled kernels when available, else the numpy fallback."""

import os

if os.environ.get("TREEFUSION_PURE_PYTHON"):
    from . import _pykernels as kernels
    COMPILED = False
else:
    try:
        from . import _kernels as kernels
        COMPILED = True
    except ImportError:
        from . import _pykernels as kernels
        COMPILED = False

__all__ = ["kernels", "COMPILED"]
