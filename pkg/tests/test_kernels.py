import numpy as np
import pytest

from reicoh import kernels

needs_compiled = pytest.mark.skipif(kernels.compiled is None, reason="compiled kernels not built")

MODEL_CASES = {
    "mims": (np.linspace(0.0, 900.0, 501), [1.0, 421.5, 1.3]),
    "gamma_t": (np.geomspace(1e-4, 30.0, 501), [0.3, 1.2, 0.47, 0.14, 6e-5]),
    "gamma_b": (np.linspace(0.0, 10.0, 501), [0.3, 1.2, 0.43, 0.088]),
    "lorentzian": (np.linspace(-20.0, 20.0, 501), [1.0, 4.34, 2.0, 0.1]),
    "double_exp": (np.linspace(0.0, 160.0, 501), [0.4, 0.6, 3.169, 31.69]),
}


def test_backend_label():
    assert kernels.BACKEND in ("compiled", "python")
    assert kernels.active is (kernels.compiled if kernels.BACKEND == "compiled" else kernels.python)


@needs_compiled
@pytest.mark.parametrize("name", sorted(MODEL_CASES))
def test_model_kernels_agree(name):
    x, p = MODEL_CASES[name]
    p = np.asarray(p, dtype=float)
    y1, j1 = getattr(kernels.compiled, name)(x, p)
    y2, j2 = getattr(kernels.python, name)(x, p)
    np.testing.assert_allclose(y1, y2, rtol=1e-13, atol=1e-300)
    scale = np.maximum(np.abs(j2).max(axis=0), 1e-300)
    assert np.all(np.abs(j1 - j2) <= 1e-12 * scale)


@needs_compiled
@pytest.mark.parametrize("name", ["comb_square", "comb_gauss"])
def test_comb_kernels_agree(name):
    freq = np.linspace(-12.0, 12.0, 2**14, endpoint=False)
    args = (1.0, 0.25, -6.0, 5.0, 2.0, 0.15)
    a = getattr(kernels.compiled, name)(freq, *args)
    b = getattr(kernels.python, name)(freq, *args)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)


def test_fallback_kernels_on_their_own():
    y, jac = kernels.python.mims(np.array([0.0, 210.75]), np.array([1.0, 421.5, 1.0]))
    assert y[0] == 1.0 and y[1] == pytest.approx(np.exp(-1.0), rel=1e-14)
    assert jac.shape == (2, 3)
