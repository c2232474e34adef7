import numpy as np
import pytest

from eventimpact import _kernels


@pytest.fixture
def case():
    rng = np.random.default_rng(5)
    D, L = 120, 30
    c = rng.poisson(4.0, D).astype(float)
    per = np.where(np.arange(D) <= 30, 0, np.where(np.arange(D) <= 60, 1, 2)).astype(np.int64)
    pts = np.array([c[per == p].sum() for p in range(3)])
    g = rng.random(L)
    g /= g.sum()
    return c, per, pts, g


def test_backends_agree_on_intensity(case):
    c, per, pts, g = case
    lev = np.array([0.2, 0.9, 0.4])
    a = _kernels.intensity_curve(c, per, lev, 2.5, g, backend="numpy")
    b = _kernels.intensity_curve(c, per, lev, 2.5, g, backend="numba")
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_backends_agree_on_tied_em(case):
    c, per, pts, g = case
    for tol, iters in ((0.0, 5), (1e-3, 200)):
        out_np = _kernels.em_tied(c, 30, float(len(c)), 1.5, 0.5,
                                  np.full(30, 1 / 30), tol, iters, backend="numpy")
        out_nb = _kernels.em_tied(c, 30, float(len(c)), 1.5, 0.5,
                                  np.full(30, 1 / 30), tol, iters, backend="numba")
        assert out_np[3] == out_nb[3]  # iterations
        assert out_np[0] == pytest.approx(out_nb[0], rel=1e-10)
        assert out_np[1] == pytest.approx(out_nb[1], rel=1e-10)
        np.testing.assert_allclose(out_np[2], out_nb[2], rtol=1e-9, atol=1e-12)


def test_backends_agree_on_levels_em(case):
    c, per, pts, g = case
    lev0 = np.full(3, 0.4)
    out_np = _kernels.em_levels(c, per, pts, 2.0, lev0, g, 1e-4, 500, backend="numpy")
    out_nb = _kernels.em_levels(c, per, pts, 2.0, lev0, g, 1e-4, 500, backend="numba")
    np.testing.assert_allclose(out_np[0], out_nb[0], rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(out_np[1], out_nb[1], rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(out_np[2], out_nb[2], rtol=1e-8, atol=1e-10)
    assert out_np[4] == out_nb[4]  # converged


def test_env_flag_selects_backend(monkeypatch):
    monkeypatch.setenv("EVENTIMPACT_BACKEND", "numpy")
    assert _kernels.active_backend() == "numpy"
    monkeypatch.setenv("EVENTIMPACT_BACKEND", "numba")
    assert _kernels.active_backend() == "numba"
    monkeypatch.setenv("EVENTIMPACT_BACKEND", "nonsense")
    with pytest.raises(ValueError):
        _kernels.active_backend()
    monkeypatch.delenv("EVENTIMPACT_BACKEND")
    assert _kernels.active_backend() in ("numba", "numpy")


def test_explicit_argument_overrides_env(monkeypatch):
    monkeypatch.setenv("EVENTIMPACT_BACKEND", "numba")
    assert _kernels.active_backend("numpy") == "numpy"
