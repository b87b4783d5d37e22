import json
import os
import subprocess
import sys

import numpy as np
import pytest

from mpgne import kernels
from mpgne.gne_solver import SolveOptions, solve_gnep

from conftest import load_running_example

needs_compiled = pytest.mark.skipif(not kernels.compiled_available(),
                                    reason="compiled extension not built")


def test_env_var_forces_python_fallback():
    env = dict(os.environ, MPGNE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from mpgne import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_simplex("fortran")


@needs_compiled
def test_identical_pivot_statuses_on_random_standard_form():
    rng = np.random.default_rng(5)
    py = kernels.get_simplex("python")
    cc = kernels.get_simplex("compiled")
    for _ in range(200):
        k, m = rng.integers(1, 6), rng.integers(1, 10)
        E = rng.normal(size=(k, m))
        h = rng.normal(size=k)
        g = rng.normal(size=m)
        a, b = py(E, h, g, 1e-9), cc(E, h, g, 1e-9)
        assert a[0] == b[0] and a[3] == b[3]
        np.testing.assert_allclose(a[1], b[1], atol=1e-12)
        np.testing.assert_allclose(a[2], b[2], atol=1e-12)


@needs_compiled
@pytest.mark.parametrize("selection", ["none", "min_norm", "vgne"])
def test_backends_give_the_same_running_example_solution(selection):
    gp = load_running_example()
    a = solve_gnep(gp, selection, SolveOptions(backend="python"))
    b = solve_gnep(gp, selection, SolveOptions(backend="compiled"))
    assert a.diagnostics["counts"] == b.diagnostics["counts"]
    for ra, rb in zip(a.regions, b.regions):
        assert ra.kind == rb.kind
        np.testing.assert_allclose(ra.law.G, rb.law.G, atol=1e-12)
        np.testing.assert_allclose(ra.region.C, rb.region.C, atol=1e-12)
