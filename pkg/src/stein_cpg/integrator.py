"""Fixed-step RK4 integration with a timed event schedule.

Time is tracked as an integer step index ``n`` with ``t = n * dt`` so that
event placement and recording never accumulate rounding drift. Events fire
at the first step boundary at or after their scheduled time.
"""
from __future__ import annotations

import copy
import io
import json
import math
import warnings
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Sequence, Union

import numpy as np

from . import kernel
from .errors import ConfigError, IntegrationDiverged, WaitTimeout
from .model import (
    INITIAL_STATE,
    CouplingConfig,
    GaitParams,
    NetworkState,
    NeuronConstants,
    GAITS,
)
from .stimulation import StimulationEnvelope

_EPS = 1e-9
_NO_NOISE = np.zeros((0, 8))
_NO_ENV = np.zeros(5)

CSV_HEADER = ",".join(["t"] + [f"{v}{i}" for v in "xyz" for i in range(1, 9)])


def _neurons(neurons: Iterable[int], top_only: bool = False) -> tuple:
    out = tuple(int(i) for i in neurons)
    hi = 4 if top_only else 8
    for i in out:
        if not 1 <= i <= hi:
            raise ConfigError(f"neuron index {i} outside 1..{hi}")
    if len(set(out)) != len(out):
        raise ConfigError("duplicate neuron index")
    return out


# --------------------------------------------------------------------- events


@dataclass(frozen=True)
class SetGaitParams:
    time: float
    gait: GaitParams
    name: str | None = None
    kind = "SetGaitParams"


@dataclass(frozen=True)
class Stimulate:
    """Start ``envelope`` on the listed hip neurons; its ``t0`` is replaced by the realized time."""

    time: float
    neurons: tuple
    envelope: StimulationEnvelope
    kind = "Stimulate"

    def __post_init__(self):
        object.__setattr__(self, "neurons", _neurons(self.neurons, top_only=True))


@dataclass(frozen=True)
class StateOffset:
    time: float
    neurons: tuple
    offset: float
    kind = "StateOffset"

    def __post_init__(self):
        object.__setattr__(self, "neurons", _neurons(self.neurons))


@dataclass(frozen=True)
class RandomOffset:
    time: float
    neurons: tuple
    lo: float
    hi: float
    kind = "RandomOffset"

    def __post_init__(self):
        object.__setattr__(self, "neurons", _neurons(self.neurons))
        if self.hi < self.lo:
            raise ConfigError("RandomOffset range is reversed")


@dataclass(frozen=True)
class NoiseWindow:
    time: float
    neurons: tuple
    lo: float
    hi: float
    t_end: float
    kind = "NoiseWindow"

    def __post_init__(self):
        object.__setattr__(self, "neurons", _neurons(self.neurons))
        if not self.t_end > self.time:
            raise ConfigError("NoiseWindow needs t_end > time")
        if self.hi < self.lo:
            raise ConfigError("NoiseWindow range is reversed")


@dataclass(frozen=True)
class ExecuteTransition:
    """Switch to ``gait`` (plus optional stimulation), optionally waiting on F.

    With ``wait_interval`` set, the switch is held back until the online
    signal ``F(x1)`` lies inside the interval; ``timeout`` bounds the wait
    in seconds.
    """

    time: float
    gait: GaitParams
    name: str | None = None
    stim_neurons: tuple = ()
    envelope: StimulationEnvelope | None = None
    wait_interval: tuple | None = None
    timeout: float | None = None
    kind = "ExecuteTransition"

    def __post_init__(self):
        object.__setattr__(self, "stim_neurons", _neurons(self.stim_neurons, top_only=True))
        if self.stim_neurons and self.envelope is None:
            raise ConfigError("stimulated neurons need an envelope")
        if self.wait_interval is not None:
            lo, hi = self.wait_interval
            if hi < lo:
                raise ConfigError("wait interval is reversed")
            if self.timeout is None or not self.timeout > 0:
                raise ConfigError("a wait needs a positive timeout")


Event = Union[SetGaitParams, Stimulate, StateOffset, RandomOffset, NoiseWindow, ExecuteTransition]

_KIND_CODES = {
    "SetGaitParams": 1,
    "Stimulate": 2,
    "StateOffset": 3,
    "RandomOffset": 4,
    "NoiseWindow": 5,
    "ExecuteTransition": 6,
}


# --------------------------------------------------------------------- config


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce a run.

    ``noise_mode`` selects how NoiseWindow draws enter the state:
    ``"per_step"`` adds each draw directly, ``"wiener"`` scales it by
    ``sqrt(dt)`` so the range is per square-root second.
    ``reset_drive_phase`` restarts the drive sinusoid at every gait switch.
    """

    dt: float = 1e-4
    record_interval: float = 1e-3
    duration: float = 15.0
    initial: NetworkState = INITIAL_STATE
    gait: GaitParams = GAITS["walk"]
    coupling: CouplingConfig = field(default_factory=CouplingConfig)
    consts: NeuronConstants = field(default_factory=NeuronConstants)
    events: tuple = ()
    rng_seed: int = 0
    noise_mode: str = "per_step"
    reset_drive_phase: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        ratio = self.record_interval / self.dt
        if ratio < 1 - _EPS or abs(ratio - round(ratio)) > 1e-6:
            raise ConfigError("record_interval must be an integer multiple of dt")
        if self.duration < 0 or not math.isfinite(self.duration):
            raise ConfigError("duration must be finite and non-negative")
        if self.noise_mode not in ("per_step", "wiener"):
            raise ConfigError("noise_mode must be 'per_step' or 'wiener'")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ConfigError("rng_seed must be a 64-bit unsigned integer")
        evs = tuple(self.events)
        for ev in evs:
            if ev.time < 0:
                raise ConfigError("event time must be non-negative")
        object.__setattr__(self, "events", evs)

    @property
    def rec_every(self) -> int:
        return int(round(self.record_interval / self.dt))

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def replace(self, **kw) -> "SimConfig":
        return replace(self, **kw)


# ----------------------------------------------------------------- trajectory


@dataclass
class Trajectory:
    """Recorded samples at a fixed ``record_interval``.

    ``samples`` has shape ``(N, 24)`` in the ``x1..8, y1..8, z1..8`` layout.
    """

    times: np.ndarray
    samples: np.ndarray
    event_log: list = field(default_factory=list)
    dt: float = 1e-4
    record_interval: float = 1e-3
    warnings: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    def x(self, i: int) -> np.ndarray:
        return self.samples[:, i - 1]

    def y(self, i: int) -> np.ndarray:
        return self.samples[:, 8 + i - 1]

    def z(self, i: int) -> np.ndarray:
        return self.samples[:, 16 + i - 1]

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def state_at(self, k: int) -> NetworkState:
        return NetworkState.from_array(self.samples[k], float(self.times[k]))

    def window(self, t0: float | None = None, t1: float | None = None) -> "Trajectory":
        """Samples with ``t0 <= t <= t1`` (inclusive, tolerant to rounding)."""
        tol = 1e-9 * max(1.0, abs(self.t_end))
        lo = -np.inf if t0 is None else t0 - tol
        hi = np.inf if t1 is None else t1 + tol
        m = (self.times >= lo) & (self.times <= hi)
        return Trajectory(self.times[m], self.samples[m], list(self.event_log), self.dt,
                          self.record_interval, list(self.warnings))

    def to_csv(self, dest=None) -> str | None:
        """Write ``t,x1..x8,y1..y8,z1..z8`` with 9 significant digits.

        Returns the CSV text when ``dest`` is None.
        """
        buf = io.StringIO()
        data = np.column_stack([self.times, self.samples])
        buf.write(CSV_HEADER + "\n")
        for row in data:
            buf.write(",".join(f"{v:.9g}" for v in row))
            buf.write("\n")
        text = buf.getvalue()
        if dest is None:
            return text
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            with open(dest, "w", newline="") as fh:
                fh.write(text)
        return None

    def summary(self, report=None) -> dict:
        out = {
            "t_start": round_sig(self.t_start) if len(self) else None,
            "t_end": round_sig(self.t_end) if len(self) else None,
            "n_samples": len(self),
            "dt": self.dt,
            "record_interval": self.record_interval,
            "events": self.event_log,
            "warnings": self.warnings,
        }
        if report is not None:
            out["classification"] = report.to_dict()
        return out

    def summary_json(self, report=None) -> str:
        return json.dumps(self.summary(report), indent=2, sort_keys=True)


def round_sig(v: float, digits: int = 9) -> float:
    """Round to ``digits`` significant digits for stable serialized output."""
    return float(f"{v:.{digits}g}")


# ---------------------------------------------------------------- simulation


class Simulation:
    """Mutable integration context.

    Holds the running state, current gait parameters, active stimulation
    and noise windows. ``clone`` gives an independent copy, which sweeps use
    to branch from a shared steady state.
    """

    def __init__(self, config: SimConfig, backend=None):
        self.config = config
        self.dt = config.dt
        self.rec_every = config.rec_every
        self._k = backend or kernel.get_backend()
        self.state = config.initial.to_array()
        n0 = int(round(config.initial.t / self.dt))
        if n0 % self.rec_every:
            raise ConfigError("initial time must fall on a recording instant")
        self.n = n0
        self.x1_prev = float(self.state[0])
        self.gait = config.gait
        self._params = config.gait.as_array()
        self._gains = config.coupling.gains()
        self._lam = np.ascontiguousarray(config.coupling.lam, dtype=float)
        self._consts = config.consts.as_array()
        self.drive_t0 = 0.0
        self.mask = np.zeros(8)
        self.env = _NO_ENV.copy()
        self._r0 = n0 // self.rec_every
        self._buf = np.empty((max(16, config.n_steps // self.rec_every + 2), 24))
        self._buf[0] = self.state
        self._noise: list = []
        self._event_counter: dict = {}
        self.event_log: list = []
        self.warnings: list = []

    # time helpers
    @property
    def t(self) -> float:
        return self.n * self.dt

    def step_at(self, time: float) -> int:
        """First step index whose boundary is at or after ``time``."""
        return int(math.ceil(time / self.dt - _EPS))

    def F(self) -> float:
        """Online monotonized x1 from the last two step boundaries."""
        x1 = float(self.state[0])
        return x1 if x1 - self.x1_prev >= 0.0 else 2.0 - x1

    def clone(self) -> "Simulation":
        k = self._k
        self._k = None
        try:
            other = copy.deepcopy(self)
        finally:
            self._k = k
        other._k = k
        return other

    # integration
    def _ensure_rows(self, n_end: int) -> None:
        need = n_end // self.rec_every - self._r0 + 1
        if need > self._buf.shape[0]:
            new = np.empty((max(need, 2 * self._buf.shape[0]), 24))
            new[: self._buf.shape[0]] = self._buf
            self._buf = new

    def _noise_block(self, n_from: int, n_to: int) -> np.ndarray:
        active = [w for w in self._noise if w["n0"] <= n_from < w["n1"]]
        if not active:
            return _NO_NOISE
        block = np.zeros((n_to - n_from, 8))
        scale = math.sqrt(self.dt) if self.config.noise_mode == "wiener" else 1.0
        for w in active:
            idx = [i - 1 for i in w["neurons"]]
            draws = w["rng"].uniform(w["lo"], w["hi"], size=(n_to - n_from, len(idx)))
            block[:, idx] += scale * draws
        return block

    def advance(self, n_target: int, wait: tuple | None = None) -> bool:
        """Integrate up to step index ``n_target``.

        With ``wait=(lo, hi)`` the run stops early at the first step boundary
        where F lies in ``[lo, hi]``; returns True in that case.
        """
        self._ensure_rows(n_target)
        use_wait = wait is not None
        lo, hi = (float(wait[0]), float(wait[1])) if use_wait else (0.0, -1.0)
        while self.n < n_target:
            cuts = [n_target]
            for w in self._noise:
                cuts += [c for c in (w["n0"], w["n1"]) if c > self.n]
            seg_end = min(cuts)
            noise = self._noise_block(self.n, seg_end)
            steps, self.x1_prev, status = self._k.integrate(
                self.state, self.n, seg_end - self.n, self.dt, self._params, self._gains,
                self._lam, self._consts, self.mask, self.env, self.drive_t0, noise,
                self.rec_every, self._buf, self._r0, use_wait, lo, hi, self.x1_prev,
            )
            self.n += int(steps)
            if status == 2:
                raise IntegrationDiverged(self.t)
            if status == 1:
                return True
        self._noise = [w for w in self._noise if w["n1"] > self.n]
        return False

    def advance_to(self, t: float, wait: tuple | None = None) -> bool:
        return self.advance(int(round(t / self.dt)), wait=wait)

    # events
    def set_gait(self, gait: GaitParams) -> None:
        # re-commanding the running gait leaves the drive untouched
        if self.config.reset_drive_phase and gait != self.gait:
            self.drive_t0 = self.t
        self.gait = gait
        self._params = gait.as_array()

    def stimulate(self, neurons: Sequence[int], envelope: StimulationEnvelope) -> None:
        self.mask = np.zeros(8)
        for i in neurons:
            self.mask[i - 1] = 1.0
        self.env = envelope.at(self.t).as_array()

    def _event_rng(self, ev) -> np.random.Generator:
        key = (_KIND_CODES[ev.kind], int(round(ev.time * 1e6)))
        seq = self._event_counter.get(key, 0)
        self._event_counter[key] = seq + 1
        ss = np.random.SeedSequence(int(self.config.rng_seed), spawn_key=key + (seq,))
        return np.random.Generator(np.random.PCG64(ss))

    def apply(self, ev: Event) -> dict:
        """Advance to the event's step boundary (if not already past it) and apply it."""
        n_evt = self.step_at(ev.time)
        if n_evt > self.n:
            self.advance(n_evt)
        entry = {"kind": ev.kind, "scheduled": round_sig(ev.time)}
        if ev.kind == "SetGaitParams":
            self.set_gait(ev.gait)
            entry["gait"] = ev.name
        elif ev.kind == "Stimulate":
            self.stimulate(ev.neurons, ev.envelope)
            entry.update(neurons=list(ev.neurons), envelope=list(ev.envelope.params))
        elif ev.kind == "StateOffset":
            for i in ev.neurons:
                self.state[i - 1] += ev.offset
            entry.update(neurons=list(ev.neurons), offset=ev.offset)
        elif ev.kind == "RandomOffset":
            draws = self._event_rng(ev).uniform(ev.lo, ev.hi, size=len(ev.neurons))
            for i, d in zip(ev.neurons, draws):
                self.state[i - 1] += d
            entry.update(neurons=list(ev.neurons), draws=[round_sig(d) for d in draws])
        elif ev.kind == "NoiseWindow":
            self._noise.append({
                "n0": self.n, "n1": max(self.n + 1, self.step_at(ev.t_end)),
                "neurons": ev.neurons, "lo": ev.lo, "hi": ev.hi, "rng": self._event_rng(ev),
            })
            entry.update(neurons=list(ev.neurons), range=[ev.lo, ev.hi], t_end=ev.t_end)
        elif ev.kind == "ExecuteTransition":
            entry["command_time"] = round_sig(self.t)
            if ev.wait_interval is not None:
                limit = self.n + int(math.ceil(ev.timeout / self.dt))
                hit = self.advance(limit, wait=ev.wait_interval)
                if not hit:
                    raise WaitTimeout(entry["command_time"], ev.timeout, ev.wait_interval)
                entry["wait_interval"] = list(ev.wait_interval)
                entry["F_at_execution"] = round_sig(self.F())
            self.set_gait(ev.gait)
            if ev.stim_neurons:
                self.stimulate(ev.stim_neurons, ev.envelope)
                entry.update(neurons=list(ev.stim_neurons), envelope=list(ev.envelope.params))
            entry["gait"] = ev.name
            entry["execution_time"] = round_sig(self.t)
        else:  # pragma: no cover - guarded by the Event union
            raise ConfigError(f"unknown event kind {ev.kind}")
        entry["realized"] = round_sig(self.t)
        self.event_log.append(entry)
        return entry

    def trajectory(self) -> Trajectory:
        r_last = self.n // self.rec_every
        rows = self._buf[: r_last - self._r0 + 1].copy()
        times = np.arange(self._r0, r_last + 1) * (self.rec_every * self.dt)
        return Trajectory(times, rows, list(self.event_log), self.dt,
                          self.rec_every * self.dt, list(self.warnings))


def simulate(config: SimConfig, backend=None) -> Trajectory:
    """Run ``config`` from its initial state through its event schedule."""
    sim = Simulation(config, backend=backend)
    n_total = sim.n + config.n_steps
    t_total = n_total * config.dt
    order = sorted(range(len(config.events)), key=lambda k: (config.events[k].time, k))
    for k in order:
        ev = config.events[k]
        if sim.step_at(ev.time) > n_total:
            msg = f"{ev.kind} at t={ev.time:g} s is beyond the run end {t_total:g} s; skipped"
            sim.warnings.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            continue
        sim.apply(ev)
    sim.advance(n_total)
    return sim.trajectory()


def rk4_step(state: np.ndarray, t: float, dt: float, f) -> tuple:
    """One classical RK4 step of ``dy/dt = f(t, y)``.

    Generic helper used for reference calculations; returns ``(y_new, t + dt)``.
    """
    if not dt > 0:
        raise ConfigError("dt must be positive")
    y = np.asarray(state, dtype=float)
    k1 = np.asarray(f(t, y))
    k2 = np.asarray(f(t + 0.5 * dt, y + 0.5 * dt * k1))
    k3 = np.asarray(f(t + 0.5 * dt, y + 0.5 * dt * k2))
    k4 = np.asarray(f(t + dt, y + dt * k3))
    y_new = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y_new)):
        raise IntegrationDiverged(t + dt)
    return y_new, t + dt


def network_rk4_step(state: NetworkState, dt: float, gait: GaitParams,
                     coupling: CouplingConfig | None = None, consts: NeuronConstants | None = None,
                     backend=None) -> NetworkState:
    """Advance a network state by exactly one kernel step of size ``dt``.

    The drive phase is measured from ``t = 0``.
    """
    if not dt > 0:
        raise ConfigError("dt must be positive")
    coupling = coupling or CouplingConfig()
    consts = consts or NeuronConstants()
    arr = state.to_array()
    k = backend or kernel.get_backend()
    out = np.empty((2, 24))
    t0 = state.t
    # kernel time starts at 0, so shift the drive origin to keep sin(k2 * t)
    _, _, status = k.integrate(arr, 0, 1, dt, gait.as_array(), coupling.gains(),
                               np.ascontiguousarray(coupling.lam), consts.as_array(),
                               np.zeros(8), _NO_ENV, -t0, _NO_NOISE, 1, out, 0, False, 0.0, -1.0,
                               float(arr[0]))
    if status == 2:
        raise IntegrationDiverged(t0 + dt)
    return NetworkState.from_array(arr, t0 + dt)


# ---------------------------------------------------------------- convergence


@dataclass(frozen=True)
class ConvergenceReport:
    dt: float
    period: float
    period_half: float
    rel_change: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def convergence_check(config: SimConfig, window: float = 5.0, tolerance: float = 1e-3,
                      backend=None) -> ConvergenceReport:
    """Compare the neuron-1 period measured at ``dt`` and ``dt/2``.

    The period is taken over the last ``window`` seconds of each run.
    """
    from .analysis import estimate_period

    periods = []
    for dt in (config.dt, config.dt / 2):
        cfg = config.replace(dt=dt)
        traj = simulate(cfg, backend=backend)
        t1 = traj.t_end
        periods.append(estimate_period(traj, 1, (max(traj.t_start, t1 - window), t1)))
    rel = abs(periods[1] - periods[0]) / periods[1]
    return ConvergenceReport(config.dt, periods[0], periods[1], rel, tolerance, rel < tolerance)
