import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stein_cpg import kernel
from stein_cpg.integrator import NoiseWindow, SimConfig, StateOffset, simulate
from stein_cpg.model import CouplingConfig, NeuronConstants, gait_params
from stein_cpg.stimulation import StimulationEnvelope, envelope_multiplier
from stein_cpg.transitions import lookup

cython = pytest.importorskip("stein_cpg._kernel")
from stein_cpg import _pykernel  # noqa: E402


def test_active_backend_is_compiled():
    assert kernel.BACKEND == "cython"


@given(st.integers(0, 2**32 - 1), st.sampled_from(["walk", "trot", "pace", "bound", "pronk"]),
       st.floats(0, 20))
def test_derivative_bit_identical(seed, gait, t):
    rng = np.random.default_rng(seed)
    s = np.concatenate([rng.uniform(-0.2, 1.2, 8), rng.uniform(0, 0.1, 16)])
    c = CouplingConfig()
    args = (s, t, gait_params(gait).as_array(), c.gains(), np.ascontiguousarray(c.lam),
            NeuronConstants().as_array(), rng.uniform(1, 3, 8), rng.uniform(0, 5))
    assert cython.derivative(*args).tobytes() == _pykernel.derivative(*args).tobytes()


@given(st.floats(-1, 2))
def test_envelope_bit_identical(t):
    env = StimulationEnvelope(2.2, 0.2, 0.1, 0.1, t0=0.3)
    arr = env.as_array()
    assert cython.envelope(t, arr) == _pykernel.envelope(t, arr) == envelope_multiplier(env, t)


def test_simulation_bit_identical_with_events():
    evs = (StateOffset(0.2, (1, 2), 0.05), NoiseWindow(0.3, (1, 2, 3, 4), -0.008, 0.008, 0.35))
    cfg = SimConfig(gait=gait_params("trot"), duration=0.5, events=evs, rng_seed=5)
    a = simulate(cfg, backend=cython)
    b = simulate(cfg, backend=_pykernel)
    assert a.samples.tobytes() == b.samples.tobytes()


def test_wait_and_stimulation_bit_identical():
    from stein_cpg.integrator import Simulation
    from stein_cpg.transitions import execute_transition

    spec = lookup("pronk", "trot")
    out = []
    for k in (cython, _pykernel):
        sim = Simulation(SimConfig(gait=gait_params("pronk"), duration=2.0), backend=k)
        t_exec, _ = execute_transition(sim, spec, 1.0, period=0.1047)
        sim.advance_to(1.5)
        out.append((t_exec, sim.trajectory().samples.tobytes()))
    assert out[0] == out[1]


def test_env_var_forces_python():
    code = "import stein_cpg.kernel as k; print(k.BACKEND)"
    env = dict(os.environ, STEIN_CPG_BACKEND="python")
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert res.stdout.strip() == "python"


def test_get_backend_names():
    assert kernel.get_backend("python") is _pykernel
    assert kernel.get_backend("cython") is cython
    with pytest.raises(ValueError):
        kernel.get_backend("fortran")
