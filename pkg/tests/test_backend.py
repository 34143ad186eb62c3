import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import dwrls
from dwrls import _backend, _core_py
from dwrls.harmonics import _recurrence

from conftest import random_sphere

try:
    from dwrls import _core
except ImportError:  # pragma: no cover - extension not built
    _core = None

needs_ext = pytest.mark.skipif(_core is None, reason="compiled core not built")


def test_backend_flag():
    assert dwrls.BACKEND in ("compiled", "python")
    assert _backend.BACKEND == dwrls.BACKEND
    if _core is not None:
        assert dwrls.BACKEND == "compiled" or "DWRLS_PURE_PYTHON" in __import__("os").environ


@needs_ext
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=80), st.integers(1, 6))
def test_clenshaw_agrees(coeffs, d):
    t = np.linspace(-1, 1, 57)
    c = np.asarray(coeffs)
    fast = np.asarray(_core.clenshaw_legendre(c, d, t))
    ref = _core_py.clenshaw_legendre(c, d, t)
    assert np.allclose(fast, ref, rtol=1e-13, atol=1e-13 * np.abs(c).sum())


@needs_ext
@pytest.mark.parametrize("s", [0, 1, 5, 30, 90])
def test_harmonics_agree(s):
    x = np.vstack([random_sphere(40, s), [[0, 0, 1.0], [0, 0, -1.0]]])
    a, b = _recurrence(s)
    fast = np.asarray(_core.real_sph_harm(np.ascontiguousarray(x), s, a, b))
    ref = _core_py.real_sph_harm(x, s, a, b)
    assert np.allclose(fast, ref, rtol=1e-12, atol=1e-12)


def test_empty_series():
    assert np.array_equal(_core_py.clenshaw_legendre(np.zeros(0), 2, np.zeros(3)), np.zeros(3))
