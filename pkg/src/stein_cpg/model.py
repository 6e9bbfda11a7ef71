"""Stein neuron model, network state types and the driving signal.

State vectors use a flat layout of 24 floats: ``x1..x8, y1..y8, z1..z8``.
Neurons 1-4 form the hip (top) layer and 5-8 the knee (bottom) layer.
Public functions take 1-based neuron indices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError

N_NEURONS = 8
STATE_SIZE = 3 * N_NEURONS
EXP_CLAMP = 700.0

# neuron pairs (hip, knee) per leg
LEGS = {
    "left_hind": (1, 5),
    "right_hind": (2, 6),
    "right_front": (3, 7),
    "left_front": (4, 8),
}

_LAMBDA_ROWS = {
    1: (3, 5),
    2: (4, 6),
    3: (2, 7),
    4: (1, 8),
    5: (1, 8),
    6: (2, 7),
    7: (3, 5),
    8: (4, 6),
}


def default_lambda() -> np.ndarray:
    """8x8 coupling matrix; entry [j-1, i-1] = 1 iff neuron j feeds neuron i."""
    lam = np.zeros((N_NEURONS, N_NEURONS))
    for j, cols in _LAMBDA_ROWS.items():
        for i in cols:
            lam[j - 1, i - 1] = 1.0
    return lam


@dataclass(frozen=True)
class NeuronState:
    """Membrane potential ``x`` and adaptation variables ``y``, ``z``."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ConfigError(f"NeuronState.{name} must be finite, got {v}")


@dataclass(frozen=True)
class NetworkState:
    """Eight neurons plus simulation time."""

    neurons: tuple
    t: float = 0.0

    def __post_init__(self):
        if len(self.neurons) != N_NEURONS:
            raise ConfigError(f"expected {N_NEURONS} neurons, got {len(self.neurons)}")
        object.__setattr__(self, "neurons", tuple(self.neurons))

    def to_array(self) -> np.ndarray:
        xs = [n.x for n in self.neurons]
        ys = [n.y for n in self.neurons]
        zs = [n.z for n in self.neurons]
        return np.array(xs + ys + zs, dtype=float)

    @classmethod
    def from_array(cls, arr: Sequence[float], t: float = 0.0) -> "NetworkState":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (STATE_SIZE,):
            raise ConfigError(f"state array must have shape ({STATE_SIZE},), got {arr.shape}")
        neurons = tuple(
            NeuronState(float(arr[i]), float(arr[8 + i]), float(arr[16 + i])) for i in range(8)
        )
        return cls(neurons, float(t))

    def neuron(self, i: int) -> NeuronState:
        _check_index(i)
        return self.neurons[i - 1]

    @property
    def x(self) -> np.ndarray:
        return np.array([n.x for n in self.neurons])


@dataclass(frozen=True)
class NeuronConstants:
    b: float = -2000.0
    p: float = 10.0
    q: float = 30.0

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise ConfigError("p and q must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.b, self.p, self.q], dtype=float)


@dataclass(frozen=True)
class CouplingConfig:
    """Coupling gains and topology.

    ``alpha``/``beta`` weight same-layer input in the hip/knee layer,
    ``gamma`` weights hip input to knee neurons, ``delta`` knee input to
    hip neurons.
    """

    alpha: float = -0.15
    beta: float = -0.15
    gamma: float = -0.6
    delta: float = -0.1
    lam: np.ndarray = field(default_factory=default_lambda, compare=False)

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float)
        if lam.shape != (8, 8):
            raise ConfigError("lambda must be 8x8")
        if not np.all((lam == 0) | (lam == 1)):
            raise ConfigError("lambda entries must be 0 or 1")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)

    def gains(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma, self.delta], dtype=float)

    def replace(self, **kw) -> "CouplingConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(kw)
        return CouplingConfig(**d)

    def __eq__(self, other):
        if not isinstance(other, CouplingConfig):
            return NotImplemented
        return self.gains().tolist() == other.gains().tolist() and np.array_equal(self.lam, other.lam)

    def __hash__(self):
        return hash((tuple(self.gains()), self.lam.tobytes()))


@dataclass(frozen=True)
class GaitParams:
    """Per-layer rate, amplitude, drive amplitude and drive angular frequency."""

    a_h: float
    f_h: float
    k1_h: float
    k2_h: float
    a_k: float
    f_k: float
    k1_k: float
    k2_k: float

    def __post_init__(self):
        for name in ("a_h", "a_k", "f_h", "f_k"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    def replace(self, **kw) -> "GaitParams":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(kw)
        return GaitParams(**d)


GAIT_NAMES = ("walk", "trot", "pace", "bound", "pronk")

GAITS = {
    "walk": GaitParams(10, 40, 0, 0, 10, 40, 0, 0),
    "trot": GaitParams(11, 41, 0.085, 56, 11, 41, 0, 0),
    "pace": GaitParams(11, 41, 0.04, 54, 11, 41, 0.01, 54),
    "bound": GaitParams(16, 50, 0.1, 59, 14, 45, 0, 0),
    "pronk": GaitParams(22, 65, 0.3, 60, 22, 65, 0.2, 60),
}

# reported periods in seconds, used as reference values only
REFERENCE_PERIODS = {"walk": 0.259, "trot": 0.224, "pace": 0.233, "bound": 0.213, "pronk": 0.209}

_INIT_X = (1.0, 1.0, 0.8, 1.0, 1.0, 0.8, 1.0, 1.0)
_INIT_Y = (0.04, 0.045, 0.05, 0.025, 0.045, 0.05, 0.025, 0.04)
_INIT_Z = (0.016, 0.018, 0.02, 0.014, 0.018, 0.02, 0.014, 0.016)

INITIAL_STATE = NetworkState(tuple(NeuronState(*v) for v in zip(_INIT_X, _INIT_Y, _INIT_Z)), 0.0)


def gait_params(name: str) -> GaitParams:
    try:
        return GAITS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown gait {name!r}; expected one of {GAIT_NAMES}") from None


def _check_index(i: int) -> None:
    if not (isinstance(i, (int, np.integer)) and 1 <= i <= N_NEURONS):
        raise IndexError(f"neuron index must be in 1..{N_NEURONS}, got {i!r}")


def sigmoid_term(exponent: float) -> float:
    """``1/(1+exp(e))`` with the exponent clamped so it saturates instead of overflowing."""
    if exponent > EXP_CLAMP:
        exponent = EXP_CLAMP
    elif exponent < -EXP_CLAMP:
        exponent = -EXP_CLAMP
    return 1.0 / (1.0 + math.exp(exponent))


def driving_signal(
    i: int,
    state: NetworkState,
    gait: GaitParams,
    coupling: CouplingConfig | None = None,
    stim_multiplier: float = 1.0,
    drive_t0: float = 0.0,
) -> float:
    """Driving signal ``f_c`` of neuron ``i`` (1-based).

    ``drive_t0`` is the origin of the sinusoidal drive phase; the drive is
    ``sin(k2 * (t - drive_t0))``.
    """
    _check_index(i)
    if stim_multiplier < 1.0:
        raise ConfigError("stim_multiplier must be >= 1")
    coupling = coupling or CouplingConfig()
    x = state.x
    lam = coupling.lam
    t = state.t
    c = i - 1
    top = x[:4] @ lam[:4, c]
    bot = x[4:] @ lam[4:, c]
    if i <= 4:
        drive = gait.k1_h * math.sin(gait.k2_h * (t - drive_t0))
        return stim_multiplier * gait.f_h * (1.0 + drive + coupling.alpha * top + coupling.delta * bot)
    drive = gait.k1_k * math.sin(gait.k2_k * (t - drive_t0))
    return stim_multiplier * gait.f_k * (1.0 + drive + coupling.beta * bot + coupling.gamma * top)


def stein_derivative(n: NeuronState, a: float, f_c: float, consts: NeuronConstants | None = None):
    """Return ``(dx, dy, dz)`` for a single neuron."""
    consts = consts or NeuronConstants()
    if not a > 0:
        raise ConfigError("rate constant a must be positive")
    if not all(math.isfinite(v) for v in (n.x, n.y, n.z, a, f_c)):
        raise ValueError("non-finite input to stein_derivative")
    e = -f_c - consts.b * n.y + consts.b * n.z
    dx = a * (-n.x + sigmoid_term(e))
    dy = n.x - consts.p * n.y
    dz = n.x - consts.q * n.z
    return dx, dy, dz


def network_derivative(
    state: NetworkState,
    gait: GaitParams,
    coupling: CouplingConfig | None = None,
    stim: Iterable[float] | None = None,
    consts: NeuronConstants | None = None,
    drive_t0: float = 0.0,
) -> np.ndarray:
    """Derivative of all 24 state components.

    ``stim`` holds per-neuron multipliers on the amplitude parameter
    (defaults to all ones).
    """
    from . import kernel

    coupling = coupling or CouplingConfig()
    consts = consts or NeuronConstants()
    mult = np.ones(8) if stim is None else np.asarray(list(stim), dtype=float)
    if mult.shape != (8,):
        raise ConfigError("stim must have 8 entries")
    return kernel.derivative(
        state.to_array(),
        float(state.t),
        gait.as_array(),
        coupling.gains(),
        np.ascontiguousarray(coupling.lam),
        consts.as_array(),
        mult,
        float(drive_t0),
    )


def permute_state(arr: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    """Apply a 1-based neuron permutation to a flat state (or derivative) vector.

    The value of neuron ``i`` moves to neuron ``perm[i-1]``.
    """
    arr = np.asarray(arr, dtype=float)
    out = np.empty_like(arr)
    for i, pi in enumerate(perm):
        for layer in range(3):
            out[layer * 8 + pi - 1] = arr[layer * 8 + i]
    return out
