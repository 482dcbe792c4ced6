import numpy as np
import pytest

from nvpolar import _kernels as K

pytestmark = pytest.mark.skipif(K.coherence_product_numba is None, reason="numba unavailable or disabled")


@pytest.fixture
def inputs(rng):
    t = np.sort(rng.uniform(0, 2000, 3000))
    omega_k = rng.uniform(0.1, 50, 7)
    a_k = rng.uniform(-1, 1, 7)
    p_k = rng.uniform(-1, 1, 7)
    return t, 10.71, omega_k, a_k, p_k


def test_coherence_product_backends_agree(inputs):
    t, w, wk, a, p = inputs
    np.testing.assert_allclose(K.coherence_product_numba(t, w, wk, a, p), K.coherence_product_numpy(t, w, wk, a, p), rtol=0, atol=1e-13)


def test_abs_products_backends_agree(inputs):
    t, _, wk, a, p = inputs
    np.testing.assert_allclose(K.abs_product_prime_numba(t, wk, a, p), K.abs_product_prime_numpy(t, wk, a, p), atol=1e-14)
    np.testing.assert_allclose(K.abs_product_doubleprime_numba(t, wk, a, p), K.abs_product_doubleprime_numpy(t, wk, a, p), atol=1e-14)


@pytest.mark.parametrize("values", [
    np.array([3.0, 2.0, 2.0, 1.0, 5.0, 0.5]),
    np.ones(5),
    np.linspace(1, 0, 7),
    np.array([]),
])
def test_running_min_backends_agree(values):
    np.testing.assert_array_equal(K.running_min_indices_numba(values), K.running_min_indices_numpy(values))


def test_running_min_random(rng):
    v = rng.random(5000)
    idx = K.running_min_indices_numpy(v)
    brute = [i for i in range(len(v)) if i == 0 or v[i] < v[:i].min()]
    assert list(idx) == brute
    np.testing.assert_array_equal(K.running_min_indices_numba(v), idx)


def test_numpy_fallback_selected_by_env(tmp_path):
    import subprocess
    import sys

    code = "import nvpolar._kernels as K; print(K.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env={"NVPOLAR_DISABLE_NUMBA": "1", "PATH": ""},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
