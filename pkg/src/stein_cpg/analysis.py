"""Period, phase and rhythm classification for recorded trajectories.

Phase convention: ``phase(i, j) = s`` means ``x_j(t) = x_i(t + s * T)``,
i.e. neuron ``j`` lags neuron ``i`` by ``s`` cycles. With neuron 1 as the
reference this gives the gait tables directly, e.g. walk has
``phase(1, 3) = 1/4``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, NotPeriodicError
from .integrator import (
    NoiseWindow,
    RandomOffset,
    SimConfig,
    Simulation,
    StateOffset,
    Trajectory,
    round_sig,
)
from .model import GAIT_NAMES, gait_params

# phases of x1..x4 relative to x1, and the in-phase blocks they imply
GAIT_TEMPLATES = {
    "walk": (0.0, 0.5, 0.25, 0.75),
    "trot": (0.0, 0.5, 0.0, 0.5),
    "pace": (0.0, 0.5, 0.5, 0.0),
    "bound": (0.0, 0.0, 0.5, 0.5),
    "pronk": (0.0, 0.0, 0.0, 0.0),
}

CLUSTER_THRESHOLD = 0.125
CV_THRESHOLD = 0.08
HYSTERESIS = 0.05

Window = "tuple[float, float] | None"


def circ_dist(a, b):
    """Distance between phases on the unit circle, in cycles."""
    d = np.abs(np.asarray(a) - np.asarray(b)) % 1.0
    return np.minimum(d, 1.0 - d)


def circ_mean(values) -> float:
    v = np.asarray(values, dtype=float)
    ang = np.angle(np.mean(np.exp(2j * np.pi * v))) / (2 * np.pi)
    return float(ang % 1.0) % 1.0


def circ_std(values) -> float:
    """Circular standard deviation in cycles."""
    v = np.asarray(values, dtype=float)
    r = abs(np.mean(np.exp(2j * np.pi * v)))
    r = min(max(r, 1e-300), 1.0)
    return float(math.sqrt(-2.0 * math.log(r)) / (2 * math.pi))


def _select(traj: Trajectory, window):
    if window is None:
        return traj
    t0, t1 = window
    tol = traj.record_interval + 1e-9
    if t0 < traj.t_start - tol or t1 > traj.t_end + tol:
        raise ConfigError(f"window {window} exceeds trajectory [{traj.t_start}, {traj.t_end}]")
    return traj.window(t0, t1)


def upward_crossings(x: np.ndarray, t: np.ndarray, level: float | None = None,
                     hysteresis: float = HYSTERESIS) -> np.ndarray:
    """Times of upward crossings of ``level`` (default mid-range).

    A crossing only counts once the signal has dipped below
    ``level - hysteresis * range`` since the previous one, which keeps noise
    near the threshold from producing spurious crossings. Each crossing is
    refined with a quadratic through the neighbouring samples.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if len(x) < 3:
        return np.empty(0)
    lo, hi = float(x.min()), float(x.max())
    if not hi > lo:
        return np.empty(0)
    if level is None:
        level = 0.5 * (lo + hi)
    low_mark = level - hysteresis * (hi - lo)
    cand = np.nonzero((x[:-1] < level) & (x[1:] >= level))[0]
    below = np.nonzero(x < low_mark)[0]
    out = []
    last_k = -1
    h = t[1] - t[0]
    for k in cand:
        # need a sample under the low mark after the previous crossing
        pos = np.searchsorted(below, last_k + 1)
        if pos >= len(below) or below[pos] > k:
            continue
        out.append(_refine(x, t, k, level, h))
        last_k = k
    return np.asarray(out)


def _refine(x, t, k, level, h):
    x0, x1 = x[k], x[k + 1]
    u_lin = (level - x0) / (x1 - x0)
    if k == 0:
        return t[k] + u_lin * h
    xm = x[k - 1]
    # quadratic through samples k-1, k, k+1 with u measured from k
    a = 0.5 * (x1 + xm) - x0
    b = 0.5 * (x1 - xm)
    c = x0 - level
    if abs(a) < 1e-14:
        u = u_lin
    else:
        disc = b * b - 4 * a * c
        if disc < 0:
            u = u_lin
        else:
            sq = math.sqrt(disc)
            roots = [(-b + sq) / (2 * a), (-b - sq) / (2 * a)]
            roots = [r for r in roots if -1e-9 <= r <= 1 + 1e-9]
            u = min(roots, key=lambda r: abs(r - u_lin)) if roots else u_lin
    return t[k] + u * h


def neuron_crossings(traj: Trajectory, i: int, window=None) -> np.ndarray:
    w = _select(traj, window)
    return upward_crossings(w.x(i), w.times)


def estimate_period(traj: Trajectory, neuron: int = 1, window=None) -> float:
    """Mean spacing of upward mid-level crossings of ``x_neuron``."""
    c = neuron_crossings(traj, neuron, window)
    if len(c) < 3:
        raise NotPeriodicError(f"neuron {neuron}: only {len(c)} threshold crossings")
    return float(np.mean(np.diff(c)))


def _lag_samples(ci: np.ndarray, cj: np.ndarray, period: float) -> np.ndarray:
    """Per-cycle lag of j behind i, from each i-crossing to its nearest j-crossing."""
    if len(ci) == 0 or len(cj) == 0:
        raise NotPeriodicError("no crossings to compare")
    pos = np.clip(np.searchsorted(cj, ci), 1, len(cj) - 1) if len(cj) > 1 else np.zeros(len(ci), int)
    if len(cj) > 1:
        left = cj[pos - 1]
        right = cj[pos]
        nearest = np.where(np.abs(ci - left) <= np.abs(right - ci), left, right)
    else:
        nearest = np.full(len(ci), cj[0])
    return ((ci - nearest) / period) % 1.0


def phase_difference(traj: Trajectory, i: int, j: int, period: float | None = None,
                     window=None) -> float:
    """Lag of neuron ``j`` behind neuron ``i`` in cycles, in [0, 1)."""
    if i == j:
        return 0.0
    w = _select(traj, window)
    if period is None:
        period = estimate_period(w, 1)
    ci = upward_crossings(w.x(i), w.times)
    cj = upward_crossings(w.x(j), w.times)
    if len(ci) < 2 or len(cj) < 2:
        raise NotPeriodicError(f"neurons {i},{j} lack crossings")
    return circ_mean(_lag_samples(ci, cj, period))


def phase_locking_std(traj: Trajectory, i: int, j: int, period: float | None = None,
                      window=None, cycles: int | None = 20) -> float:
    """Circular std of the per-cycle lag of ``j`` behind ``i`` over the last ``cycles`` cycles."""
    w = _select(traj, window)
    if period is None:
        period = estimate_period(w, 1)
    ci = upward_crossings(w.x(i), w.times)
    cj = upward_crossings(w.x(j), w.times)
    if len(ci) < 2 or len(cj) < 2:
        raise NotPeriodicError(f"neurons {i},{j} lack crossings")
    # drop the first i-crossing, whose nearest j-crossing may fall outside the window
    s = _lag_samples(ci[1:-1] if len(ci) > 3 else ci, cj, period)
    if cycles is not None:
        s = s[-cycles:]
    return circ_std(s)


def cycle_peaks(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Maximum of ``x`` between consecutive upward crossings."""
    c = upward_crossings(x, t)
    if len(c) < 2:
        return np.empty(0)
    idx = np.searchsorted(t, c)
    return np.array([x[a:b].max() for a, b in zip(idx[:-1], idx[1:]) if b > a])


def amplitude_cv(traj: Trajectory, window=None) -> np.ndarray:
    """Coefficient of variation of cycle peak values for each of the 8 neurons."""
    w = _select(traj, window)
    out = np.full(8, np.nan)
    for i in range(1, 9):
        pk = cycle_peaks(w.x(i), w.times)
        if len(pk) >= 2 and np.mean(pk) != 0:
            out[i - 1] = float(np.std(pk) / abs(np.mean(pk)))
    return out


# ------------------------------------------------------------ classification


@dataclass(frozen=True)
class RhythmLabel:
    """Outcome of classification.

    ``kind`` is one of the five gait names, ``"invalid"``, ``"unstable"`` or
    ``"unclassified"``. ``partition`` lists the in-phase blocks of hip
    neurons; ``like`` records which gait template the phases matched for an
    unstable window.
    """

    kind: str
    partition: tuple = ()
    like: str | None = None

    @property
    def name(self) -> str:
        return self.kind

    def partition_str(self) -> str:
        return "".join("(" + "".join(str(i) for i in b) + ")" for b in self.partition)

    def __str__(self) -> str:
        if self.kind in GAIT_NAMES:
            return self.kind.capitalize()
        if self.kind == "invalid":
            return f"Invalid({self.partition_str()})"
        if self.kind == "unstable":
            return "Unstable" + (f"[{self.like}]" if self.like else "")
        return "Unclassified"

    def __eq__(self, other):
        if isinstance(other, str):
            return self.kind == other.lower() or str(self) == other
        if isinstance(other, RhythmLabel):
            return (self.kind, self.partition, self.like) == (other.kind, other.partition, other.like)
        return NotImplemented

    def __hash__(self):
        return hash((self.kind, self.partition, self.like))


@dataclass
class RhythmReport:
    period: float
    phase: np.ndarray
    hip_knee_phases: np.ndarray
    label: RhythmLabel
    amplitude_cv: np.ndarray
    hip_knee_std: np.ndarray = field(default_factory=lambda: np.full(4, np.nan))
    window: tuple = (np.nan, np.nan)

    @property
    def n_cycles(self) -> float:
        return (self.window[1] - self.window[0]) / self.period if self.period > 0 else 0.0

    def to_dict(self) -> dict:
        upper = {}
        for a in range(8):
            for b in range(a + 1, 8):
                v = self.phase[a, b]
                upper[f"{a + 1},{b + 1}"] = None if np.isnan(v) else round_sig(float(v))
        fix = lambda arr: [None if np.isnan(v) else round_sig(float(v)) for v in arr]
        return {
            "label": str(self.label),
            "period_s": None if np.isnan(self.period) else round_sig(self.period),
            "phases": upper,
            "hip_knee_phases": fix(self.hip_knee_phases),
            "amplitude_cv": fix(self.amplitude_cv),
        }


def cluster_blocks(phases4: Sequence[float], threshold: float = CLUSTER_THRESHOLD) -> tuple:
    """Group hip neurons whose relative phase is below ``threshold`` (single linkage)."""
    parent = list(range(4))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(4):
        for b in range(a + 1, 4):
            if circ_dist(phases4[a], phases4[b]) < threshold:
                parent[find(a)] = find(b)
    groups: dict = {}
    for a in range(4):
        groups.setdefault(find(a), []).append(a + 1)
    blocks = [tuple(sorted(g)) for g in groups.values()]
    return tuple(sorted(blocks, key=lambda b: (-len(b), b[0])))


def match_template(phases4: Sequence[float], threshold: float = CLUSTER_THRESHOLD) -> str | None:
    """Name of the gait whose block structure and relative phases fit, or None."""
    blocks = cluster_blocks(phases4, threshold)
    rel = [(p - phases4[0]) % 1.0 for p in phases4]
    for name, tmpl in GAIT_TEMPLATES.items():
        if blocks != cluster_blocks(tmpl, threshold):
            continue
        if all(circ_dist(r, q) < threshold for r, q in zip(rel, tmpl)):
            return name
    return None


def rhythm_report(traj: Trajectory, window=None) -> RhythmReport:
    """Period, 8x8 lag matrix, hip-knee lags and amplitude CVs (label left unclassified)."""
    w = _select(traj, window)
    period = estimate_period(w, 1)
    cr = [upward_crossings(w.x(i), w.times) for i in range(1, 9)]
    phase = np.full((8, 8), np.nan)
    np.fill_diagonal(phase, 0.0)
    for a in range(8):
        for b in range(a + 1, 8):
            if len(cr[a]) >= 2 and len(cr[b]) >= 2:
                phase[a, b] = circ_mean(_lag_samples(cr[a], cr[b], period))
                # lower triangle mirrors the upper one so the matrix is exactly antisymmetric
                phase[b, a] = (-phase[a, b]) % 1.0
    hk = np.array([phase[i, i + 4] for i in range(4)])
    hk_std = np.full(4, np.nan)
    for i in range(4):
        if len(cr[i]) >= 4 and len(cr[i + 4]) >= 2:
            hk_std[i] = circ_std(_lag_samples(cr[i][1:-1], cr[i + 4], period)[-20:])
    return RhythmReport(period, phase, hk, RhythmLabel("unclassified"), amplitude_cv(w),
                        hk_std, (w.t_start, w.t_end))


def classify(traj: Trajectory, window=None, cluster_threshold: float = CLUSTER_THRESHOLD,
             cv_threshold: float = CV_THRESHOLD) -> RhythmReport:
    """Label the rhythm in ``window`` and return the full report.

    The label is the report's ``label`` attribute. A window with too few
    crossings yields ``Unclassified`` with NaN measurements.
    """
    try:
        rep = rhythm_report(traj, window)
    except NotPeriodicError:
        w = _select(traj, window)
        nan8 = np.full(8, np.nan)
        return RhythmReport(np.nan, np.full((8, 8), np.nan), np.full(4, np.nan),
                            RhythmLabel("unclassified"), nan8, np.full(4, np.nan),
                            (w.t_start if len(w) else np.nan, w.t_end if len(w) else np.nan))
    rel = rep.phase[0, :4]
    if np.any(np.isnan(rel)):
        rep.label = RhythmLabel("unclassified")
        return rep
    blocks = cluster_blocks(rel, cluster_threshold)
    name = match_template(rel, cluster_threshold)
    cv = rep.amplitude_cv
    if np.any(np.nan_to_num(cv, nan=0.0) > cv_threshold):
        rep.label = RhythmLabel("unstable", blocks, name)
    elif name is not None:
        rep.label = RhythmLabel(name, blocks)
    else:
        rep.label = RhythmLabel("invalid", blocks)
    return rep


def monotonize_F(traj: Trajectory, window=None) -> tuple:
    """``F = x1`` where x1 is rising, ``2 - x1`` where falling.

    Uses a centered finite difference. Returns ``(times, F)``.
    """
    w = _select(traj, window)
    if len(w) < 3:
        raise ConfigError("window too short for a finite difference")
    x = w.x(1)
    dx = np.gradient(x, w.times)
    return w.times.copy(), np.where(dx >= 0, x, 2.0 - x)


# -------------------------------------------------------------- perturbation


@dataclass
class DisturbanceResult:
    name: str
    start: float
    end: float
    during: RhythmLabel
    after: RhythmLabel
    after_window: tuple

    def to_dict(self) -> dict:
        return {
            "disturbance": self.name,
            "start": self.start,
            "end": self.end,
            "during": str(self.during),
            "after": str(self.after),
            "after_window": list(self.after_window),
        }


@dataclass
class PerturbationReport:
    gait: str
    before: RhythmLabel
    disturbances: list
    final: Trajectory

    @property
    def restored(self) -> bool:
        return all(d.after == self.before for d in self.disturbances)

    def to_dict(self) -> dict:
        return {
            "gait": self.gait,
            "before": str(self.before),
            "restored": self.restored,
            "disturbances": [d.to_dict() for d in self.disturbances],
        }


def perturbation_schedule(scale: float = 1.0, neurons=(1, 2, 3, 4)) -> list:
    """Offset, random kick and two noise windows on the hip neurons, 11-15 s."""
    return [
        ("offset", StateOffset(11.0, neurons, 0.1 * scale), 11.0),
        ("random_offset", RandomOffset(12.0, neurons, -0.08 * scale, 0.08 * scale), 12.0),
        ("noise_0.008", NoiseWindow(13.0, neurons, -0.008 * scale, 0.008 * scale, 14.0), 14.0),
        ("noise_0.005", NoiseWindow(14.0, neurons, -0.005 * scale, 0.005 * scale, 15.0), 15.0),
    ]


def perturbation_suite(gait, seed: int = 0, scale: float = 1.0, recovery: float = 2.0,
                       window: float = 2.0, config: SimConfig | None = None) -> PerturbationReport:
    """Run the disturbance schedule and classify before, during and after each one.

    The label after a disturbance is taken over
    ``[end + recovery, end + recovery + window]`` on a branch of the run
    that contains no later disturbance.
    """
    if isinstance(gait, str):
        name, params = gait, gait_params(gait)
    else:
        name, params = "custom", gait
    schedule = perturbation_schedule(scale)
    t_final = schedule[-1][2] + recovery + window
    base = config or SimConfig()
    cfg = base.replace(gait=params, duration=t_final, rng_seed=seed, events=())
    sim = Simulation(cfg)
    sim.advance_to(11.0)
    before = classify(sim.trajectory(), (11.0 - window, 11.0)).label
    results = []
    for k, (label, ev, end) in enumerate(schedule):
        sim.apply(ev)
        next_start = schedule[k + 1][1].time if k + 1 < len(schedule) else t_final
        sim.advance_to(max(end, ev.time))
        during_lo = ev.time
        during_hi = next_start if end <= ev.time else end
        branch = sim.clone()
        t_after = end + recovery
        branch.advance_to(t_after + window)
        btraj = branch.trajectory()
        during = classify(btraj, (during_lo, during_hi)).label
        after = classify(btraj, (t_after, t_after + window)).label
        results.append(DisturbanceResult(label, ev.time, end, during, after,
                                         (t_after, t_after + window)))
    sim.advance_to(t_final)
    return PerturbationReport(name, before, results, sim.trajectory())
