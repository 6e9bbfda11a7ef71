import functools
import math

import numpy as np
import pytest
from hypothesis import settings

from stein_cpg.integrator import SimConfig, simulate
from stein_cpg.model import gait_params

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def gait_run(name: str, duration: float = 15.0, dt: float = 1e-4):
    """Cached noise-free run of a gait from the reference initial state."""
    return simulate(SimConfig(gait=gait_params(name), duration=duration, dt=dt))


@pytest.fixture(scope="session")
def runs():
    return gait_run


# independent transcription of the model for the tight-step reference
_LAM_ROWS = {1: (3, 5), 2: (4, 6), 3: (2, 7), 4: (1, 8), 5: (1, 8), 6: (2, 7), 7: (3, 5), 8: (4, 6)}


def ref_deriv(t, s, g, gains=(-0.15, -0.15, -0.6, -0.1), b=-2000.0, p=10.0, q=30.0):
    al, be, ga, de = gains
    x, y, z = s[:8], s[8:16], s[16:]
    out = np.empty(24)
    for i in range(1, 9):
        same = sum(x[j - 1] for j, cols in _LAM_ROWS.items() if i in cols and (j <= 4) == (i <= 4))
        cross = sum(x[j - 1] for j, cols in _LAM_ROWS.items() if i in cols and (j <= 4) != (i <= 4))
        if i <= 4:
            a, f, k1, k2, cs, cc = g.a_h, g.f_h, g.k1_h, g.k2_h, al, de
        else:
            a, f, k1, k2, cs, cc = g.a_k, g.f_k, g.k1_k, g.k2_k, be, ga
        fc = f * (1 + k1 * math.sin(k2 * t) + cs * same + cc * cross)
        e = max(-700.0, min(700.0, -fc - b * y[i - 1] + b * z[i - 1]))
        out[i - 1] = a * (-x[i - 1] + 1 / (1 + math.exp(e)))
        out[i + 7] = x[i - 1] - p * y[i - 1]
        out[i + 15] = x[i - 1] - q * z[i - 1]
    return out
