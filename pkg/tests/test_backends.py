import json
import os
import subprocess
import sys

import numpy as np
import pytest

from mlsync import BACKEND

SCRIPT = """
import json
from mlsync import BACKEND
from mlsync.config import bundled_scenario
from mlsync.harness import run_coupled, run_single
from mlsync.integrator import RK45
single = run_single(bundled_scenario("paper-set-10"))
coupled, _ = run_coupled(bundled_scenario("paper-set-11"))
adaptive, _ = run_coupled(bundled_scenario("paper-set-11").with_overrides(
    {"integrator.method": RK45, "integrator.t_end": 50}))
print(json.dumps({"backend": BACKEND, "single": single.final_state.tolist(),
                  "coupled": coupled.final_state.tolist(), "adaptive": adaptive.final_state.tolist(),
                  "adaptive_steps": adaptive.stats.accepted}))
"""


def run_with(backend):
    env = dict(os.environ, MLSYNC_BACKEND=backend)
    proc = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True,
                          text=True, check=True)
    return json.loads(proc.stdout)


@pytest.mark.skipif(BACKEND != "numba", reason="numba not installed")
def test_numpy_fallback_agrees_with_numba():
    fast, slow = run_with("numba"), run_with("numpy")
    assert (fast["backend"], slow["backend"]) == ("numba", "numpy")
    for key in ("single", "coupled", "adaptive"):
        np.testing.assert_allclose(slow[key], fast[key], rtol=1e-11, atol=1e-11)
    assert slow["adaptive_steps"] == fast["adaptive_steps"]


def test_unknown_backend_rejected():
    env = dict(os.environ, MLSYNC_BACKEND="fortran")
    proc = subprocess.run([sys.executable, "-c", "import mlsync"], env=env, capture_output=True,
                          text=True)
    assert proc.returncode != 0 and "MLSYNC_BACKEND" in proc.stderr
