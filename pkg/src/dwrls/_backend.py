"""Select the compiled core when available.

Set ``DWRLS_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _core_py

if os.environ.get("DWRLS_PURE_PYTHON"):
    _impl = _core_py
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = _core_py
        BACKEND = "python"

clenshaw_legendre = _impl.clenshaw_legendre
real_sph_harm = _impl.real_sph_harm

__all__ = ["BACKEND", "clenshaw_legendre", "real_sph_harm"]
