import os
import subprocess
import sys

import numpy as np
import pytest

from yamabe_lab import BackgroundSpec, build_background, build_heisenberg, kernels
from yamabe_lab import _kernels_py

try:
    from yamabe_lab import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")

BACKGROUNDS = [
    BackgroundSpec(kind="synthetic", N=5, r0=-3.0, r0_bump_amplitude=1.0),
    BackgroundSpec(kind="box-with-boundary", N=5, r0=0.5, r0_bump_amplitude=1.0),
    BackgroundSpec(kind="synthetic", N=4, n=5, r0=2.0),
    BackgroundSpec(kind="heisenberg", N=5, r0=-1.0, r0_bump_amplitude=0.5),
]


def _setup(spec, seed=0):
    bg = build_background(spec)
    u = np.random.default_rng(seed).uniform(0.7, 1.4, bg.num_vertices)
    law = bg.law
    args = (law.curvature_exponent, law.coupling, law.flow_rate, law.volume_exponent)
    return bg, u, args


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")
    if _ckernels is not None and os.environ.get("YAMABE_LAB_KERNELS", "") != "python":
        assert kernels.BACKEND == "cython"


@needs_ext
@pytest.mark.parametrize("spec", BACKGROUNDS, ids=lambda s: f"{s.kind}-n{s.n}")
def test_backends_agree(spec):
    bg, u, (p, c, k, m) = _setup(spec)
    ip, ix, w, vol, r0 = bg.kernel_arrays
    np.testing.assert_allclose(_ckernels.laplacian_apply(ip, ix, w, vol, u),
                               _kernels_py.laplacian_apply(ip, ix, w, vol, u), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(_ckernels.curvature(ip, ix, w, vol, r0, u, p, c),
                               _kernels_py.curvature(ip, ix, w, vol, r0, u, p, c), rtol=1e-12, atol=1e-12)
    for normalized in (True, False):
        a, sa = _ckernels.rk4_step(ip, ix, w, vol, r0, u, 1e-3, p, c, k, m, normalized)
        b, sb = _kernels_py.rk4_step(ip, ix, w, vol, r0, u, 1e-3, p, c, k, m, normalized)
        assert sa == sb == 0
        np.testing.assert_allclose(a, b, rtol=1e-12)


@pytest.mark.parametrize("mod", [_kernels_py, pytest.param(_ckernels, marks=needs_ext)],
                         ids=["python", "cython"])
def test_positivity_status(mod):
    bg, u, (p, c, k, m) = _setup(BACKGROUNDS[0])
    ip, ix, w, vol, r0 = bg.kernel_arrays
    u = u.copy()
    u[0] = 1e-3
    out, status = mod.rk4_step(ip, ix, w, vol, r0, u, 10.0, p, c, k, m, True)
    assert status == 1
    np.testing.assert_array_equal(out, u)
    assert out is not u


def test_heisenberg_kernels_match_sparse_matrix():
    bg = build_heisenberg(N=6, r0=1.0)
    f = np.random.default_rng(2).normal(size=bg.num_vertices)
    want = -(bg.stiffness @ f) / bg.vertex_volumes
    np.testing.assert_allclose(bg.laplacian(f), want, rtol=1e-12, atol=1e-12)


def test_environment_forces_python_backend():
    code = "from yamabe_lab import kernels; print(kernels.BACKEND)"
    env = {**os.environ, "YAMABE_LAB_KERNELS": "python"}
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"


def test_benchmark_script_runs():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    out = subprocess.run([sys.executable, os.path.join(root, "benchmarks", "bench_kernels.py"),
                          "--sizes", "4", "--repeat", "1"], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "rk4_step" in out.stdout
