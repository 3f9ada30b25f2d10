import os
import subprocess
import sys

import numpy as np
import pytest

import transmittance
from transmittance import EstimatorSpec, Interval, SineSum, run_trials
from transmittance import _backend
from transmittance.bench import format_table, run_bench

compiled = pytest.mark.skipif("cython" not in _backend.available(), reason="compiled kernels not built")


def _backend_in_subprocess(env_value):
    env = dict(os.environ, TRANSMITTANCE_PURE_PYTHON=env_value)
    out = subprocess.run([sys.executable, "-c", "import transmittance; print(transmittance.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_var_forces_python():
    assert _backend_in_subprocess("1") == "python"


@compiled
def test_compiled_is_default():
    assert transmittance.BACKEND == "cython"
    assert _backend_in_subprocess("0") == "cython"


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.get("fortran")


class Custom:
    """A user-defined profile: callable with bounds, no compiled twin."""

    def __init__(self):
        self.inner = SineSum(((0.3, 5.0, 0.0),), 1.0)

    def __call__(self, x):
        return self.inner(x)

    def integral(self, a, b):
        return self.inner.integral(a, b)

    def bounds(self, a, b):
        return self.inner.bounds(a, b)


@compiled
def test_user_field_falls_back_and_matches():
    spec = EstimatorSpec("bk", control=1.0)
    iv = Interval()
    a = run_trials(spec, Custom(), iv, 3000, seed=2, backend="cython")
    b = run_trials(spec, Custom().inner, iv, 3000, seed=2, backend="cython")
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_bench_runs_and_checks_agreement():
    res = run_bench(trials=500, cases=["ratio_tracking", "unbiased_ray_marching"], repeat=1)
    assert {r.backend for r in res} == set(_backend.available())
    assert all(r.rate > 0 for r in res)
    table = format_table(res)
    assert "ratio_tracking" in table and "speedup" in table
