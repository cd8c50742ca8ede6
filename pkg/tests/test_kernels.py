import os
import subprocess
import sys

import numpy as np
import pytest

from thinfilm import _kernels, _kernels_py

try:
    from thinfilm import _core
except ImportError:
    _core = None


def _field(shape, seed=0):
    rng = np.random.default_rng(seed)
    return 1.0 + 0.2 * rng.random(shape)


def test_fallback_tendency_conserves_mass():
    u = _field((32, 32))
    rhs, mmax = _kernels_py.tendency(u, 1 / 32, 2.0, 1e-10)
    assert abs(rhs.sum()) <= 1e-9 * np.abs(rhs).sum()
    faces = max(((u + np.roll(u, -1, 1)) / 2).max(), ((u + np.roll(u, -1, 0)) / 2).max())
    assert mmax == pytest.approx(faces ** 2, rel=1e-14)


@pytest.mark.skipif(_core is None, reason="compiled core not built")
@pytest.mark.parametrize("shape", [(32, 32), (1, 64)])
@pytest.mark.parametrize("n", [1.0, 1.5, 2.0, 2.5, 2.2])
def test_compiled_core_matches_fallback(shape, n):
    u = _field(shape, seed=3)
    a, ma = _kernels_py.tendency(u, 1 / shape[1], n, 1e-10)
    b, mb = _core.tendency(u, 1 / shape[1], n, 1e-10)
    np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-12 * np.abs(a).max())
    assert mb == pytest.approx(ma, rel=1e-14)


@pytest.mark.skipif(_core is None, reason="compiled core not built")
def test_compiled_core_accepts_read_only_input():
    u = _field((16, 16))
    u.flags.writeable = False
    _core.tendency(u, 1 / 16, 2.0, 1e-10)


def test_env_var_forces_fallback():
    env = dict(os.environ, TFLM_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import thinfilm; print(thinfilm.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"
    assert _kernels.BACKEND == ("cython" if _core is not None and os.environ.get("TFLM_PURE_PYTHON") != "1"
                                else "python")
