import subprocess
import sys

import numpy as np
import pytest

from gppursuit import _kernels_py
from gppursuit.backend import active_backend

compiled = pytest.importorskip("gppursuit._kernels",
                               reason="compiled extension not built")


def test_backend_name_reported():
    assert active_backend() in ("python", "compiled")
    assert _kernels_py.BACKEND == "python"
    assert compiled.BACKEND == "compiled"


def test_so3_exp_agreement():
    rng = np.random.default_rng(0)
    for w in rng.normal(size=(200, 3)) * 2.0:
        assert np.allclose(compiled.so3_exp(w), _kernels_py.so3_exp(w),
                           atol=1e-12)
    for scale in (0.0, 1e-12, 1e-9, 1e-7):
        w = np.array([1.0, -2.0, 0.5]) * scale
        assert np.allclose(compiled.so3_exp(w), _kernels_py.so3_exp(w),
                           atol=1e-15)


def test_se3_exp_agreement():
    rng = np.random.default_rng(1)
    for xi in rng.normal(size=(200, 6)):
        rc, pc = compiled.se3_exp(xi, 0.02)
        rp, pp = _kernels_py.se3_exp(xi, 0.02)
        assert np.allclose(rc, rp, atol=1e-13)
        assert np.allclose(pc, pp, atol=1e-13)
    xi = np.array([1.0, 2.0, 3.0, 1e-10, -1e-10, 1e-10])
    rc, pc = compiled.se3_exp(xi, 0.02)
    rp, pp = _kernels_py.se3_exp(xi, 0.02)
    assert np.allclose(rc, rp, atol=1e-15) and np.allclose(pc, pp, atol=1e-15)


def test_sqexp_agreement():
    rng = np.random.default_rng(2)
    xa = rng.normal(size=(30, 6))
    xb = rng.normal(size=(40, 6))
    lam = rng.uniform(0.1, 4.0, size=6)
    kc = compiled.sqexp_mat(xa, xb, lam, 2.5)
    kp = _kernels_py.sqexp_mat(xa, xb, lam, 2.5)
    assert np.allclose(kc, kp, rtol=1e-12, atol=1e-14)


def test_gp_eval_agreement_and_oracle():
    rng = np.random.default_rng(3)
    m, q = 25, 6
    xtr = rng.normal(size=(m, 6))
    y = rng.normal(size=(m, q))
    lam = rng.uniform(0.2, 2.0, size=6)
    sf2 = 1.7
    k = _kernels_py.sqexp_mat(xtr, xtr, lam, sf2)
    chols = np.empty((q, m, m))
    alpha = np.empty((m, q))
    noises = rng.uniform(1e-4, 1e-2, size=q)
    for i in range(q):
        c = np.linalg.cholesky(k + noises[i] * np.eye(m))
        chols[i] = c
        alpha[:, i] = np.linalg.solve(k + noises[i] * np.eye(m), y[:, i])
    for x in rng.normal(size=(50, 6)):
        mc, vc = compiled.gp_eval(xtr, lam, sf2, alpha, chols, x)
        mp, vp = _kernels_py.gp_eval(xtr, lam, sf2, alpha, chols, x)
        assert np.allclose(mc, mp, atol=1e-12)
        assert np.allclose(vc, vp, atol=1e-12)
        # direct dense oracle
        d = xtr - x
        ks = sf2 * np.exp(-0.5 * (d * d) @ lam)
        assert np.allclose(mc, ks @ alpha, atol=1e-10)
        ci = k + noises[0] * np.eye(m)
        assert np.isclose(vc[0], sf2 - ks @ np.linalg.solve(ci, ks),
                          atol=1e-8)


def test_lml_agreement():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(20, 6))
    y = rng.normal(size=(20, 6))
    lam = rng.uniform(0.2, 2.0, size=6)
    sn2 = rng.uniform(1e-4, 1e-2, size=6)
    lc = compiled.lml_total(x, y, lam, 1.3, sn2, 1e-10)
    lp = _kernels_py.lml_total(x, y, lam, 1.3, sn2, 1e-10)
    assert np.isclose(lc, lp, rtol=1e-12)


def test_forced_python_backend_subprocess():
    code = ("import gppursuit; "
            "print(gppursuit.active_backend())")
    out = subprocess.run([sys.executable, "-c", code],
                         env={"PATH": "/usr/bin:/bin", "PURSUIT_BACKEND": "python"},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_auto_prefers_compiled_subprocess():
    code = ("import gppursuit; "
            "print(gppursuit.active_backend())")
    out = subprocess.run([sys.executable, "-c", code],
                         env={"PATH": "/usr/bin:/bin"},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "compiled"
