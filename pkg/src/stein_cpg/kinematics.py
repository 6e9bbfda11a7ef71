"""Joint-angle mapping, planar two-link leg kinematics and the gamma sweep.

Angles are measured from straight down, positive forward; the knee angle is
relative to the thigh.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analysis import circ_mean, circ_std, estimate_period, upward_crossings, _lag_samples
from .errors import ConfigError, NotPeriodicError, OutOfWorkspace
from .integrator import SimConfig, Trajectory, simulate
from .model import GAITS


@dataclass(frozen=True)
class LegGeometry:
    L1: float = 0.2
    L2: float = 0.2
    hip_origin: tuple = (0.0, 20.0)

    def __post_init__(self):
        if not (self.L1 > 0 and self.L2 > 0):
            raise ConfigError("link lengths must be positive")


@dataclass(frozen=True)
class JointAngles:
    theta_hip: float
    theta_knee: float

    def __post_init__(self):
        if not (math.isfinite(self.theta_hip) and math.isfinite(self.theta_knee)):
            raise ConfigError("joint angles must be finite")


@dataclass(frozen=True)
class LinearMap:
    """``angle = gain * (x - center) + offset``."""

    gain: float
    center: float
    offset: float

    def __post_init__(self):
        if self.gain == 0:
            raise ConfigError("gain must be nonzero")


HIP_MAP = LinearMap(2.2, 0.38, 0.76)
KNEE_MAP = LinearMap(0.9, 0.35, -2.08)


def linear_map(x, m: LinearMap):
    """Apply ``m`` to a scalar or array of neuron signals."""
    if np.ndim(x):
        x = np.asarray(x, dtype=float)
    return m.gain * (x - m.center) + m.offset


def forward_kinematics(angles: JointAngles, geom: LegGeometry = LegGeometry()) -> np.ndarray:
    """Foot position of the two-link leg."""
    return forward_kinematics_arrays(angles.theta_hip, angles.theta_knee, geom)


def forward_kinematics_arrays(theta_hip, theta_knee, geom: LegGeometry = LegGeometry()) -> np.ndarray:
    """Vectorised forward kinematics; returns ``(..., 2)`` foot points."""
    th = np.asarray(theta_hip, dtype=float)
    tk = np.asarray(theta_knee, dtype=float)
    hx, hy = geom.hip_origin
    kx = hx + geom.L1 * np.sin(th)
    ky = hy - geom.L1 * np.cos(th)
    fx = kx + geom.L2 * np.sin(th + tk)
    fy = ky - geom.L2 * np.cos(th + tk)
    return np.stack([fx, fy], axis=-1)


def inverse_kinematics(foot: Sequence[float], geom: LegGeometry = LegGeometry()) -> JointAngles:
    """Joint angles reaching ``foot`` with the knee bent backward (``theta_knee <= 0``)."""
    dx = float(foot[0]) - geom.hip_origin[0]
    dy = float(foot[1]) - geom.hip_origin[1]
    r2 = dx * dx + dy * dy
    r = math.sqrt(r2)
    L1, L2 = geom.L1, geom.L2
    tol = 1e-12 * (L1 + L2)
    if r > L1 + L2 + tol or r < abs(L1 - L2) - tol:
        raise OutOfWorkspace(f"target at distance {r:.6g} outside [{abs(L1 - L2):.6g}, {L1 + L2:.6g}]")
    c = (r2 - L1 * L1 - L2 * L2) / (2 * L1 * L2)
    c = min(1.0, max(-1.0, c))
    tk = -math.acos(c)
    phi = math.atan2(dx, -dy)
    th = phi - math.atan2(L2 * math.sin(tk), L1 + L2 * math.cos(tk))
    th = (th + math.pi) % (2 * math.pi) - math.pi
    return JointAngles(th, tk)


def foot_trajectory(traj: Trajectory, leg: int, hip_map: LinearMap = HIP_MAP,
                    knee_map: LinearMap = KNEE_MAP, geom: LegGeometry = LegGeometry(),
                    period: float | None = None) -> tuple:
    """Foot polyline over the last full cycle of ``traj``.

    Returns ``(times, points)`` with ``points`` of shape ``(N, 2)``. The
    cycle is cut between two consecutive upward crossings of the hip
    neuron, so the loop closes up to sampling error. A non-oscillating
    trajectory gives a single point.
    """
    if not 1 <= leg <= 4:
        raise ConfigError("leg must be in 1..4")
    xh, xk = traj.x(leg), traj.x(leg + 4)
    c = upward_crossings(xh, traj.times)
    if len(c) < 2:
        if np.ptp(xh) == 0 and np.ptp(xk) == 0:
            pt = forward_kinematics_arrays(linear_map(xh[-1], hip_map), linear_map(xk[-1], knee_map), geom)
            return traj.times[-1:].copy(), pt[None, :]
        raise NotPeriodicError("hip signal does not complete a cycle")
    t0, t1 = c[-2], c[-1]
    ts = np.append(traj.times[(traj.times >= t0) & (traj.times < t1)], t1)
    ts = np.insert(ts, 0, t0) if ts[0] > t0 else ts
    th = linear_map(np.interp(ts, traj.times, xh), hip_map)
    tk = linear_map(np.interp(ts, traj.times, xk), knee_map)
    return ts, forward_kinematics_arrays(th, tk, geom)


def polyline_area(points: np.ndarray) -> float:
    """Absolute shoelace area of a closed polyline."""
    x, y = points[:, 0], points[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _segments_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(p3, p4, p1), orient(p3, p4, p2)
    d3, d4 = orient(p1, p2, p3), orient(p1, p2, p4)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def self_intersections(points: np.ndarray, stride: int = 1) -> int:
    """Number of proper crossings between non-adjacent segments of a closed polyline."""
    pts = points[::stride]
    if not np.allclose(pts[-1], points[-1]):
        pts = np.vstack([pts, points[-1]])
    n = len(pts) - 1
    count = 0
    for a in range(n):
        for b in range(a + 2, n):
            if a == 0 and b == n - 1:
                continue
            if _segments_intersect(pts[a], pts[a + 1], pts[b], pts[b + 1]):
                count += 1
    return count


# ------------------------------------------------------------- gamma sweep


@dataclass(frozen=True)
class GammaPoint:
    gamma: float
    phase: float
    phase_std: float
    stable: bool


def hip_knee_phase_stats(traj: Trajectory, t0: float, cycles: int = 20) -> tuple:
    """Mean and circular std of the knee-1 lag behind hip-1 over the last ``cycles`` cycles."""
    w = traj.window(t0, traj.t_end)
    period = estimate_period(w, 1)
    c1 = upward_crossings(w.x(1), w.times)
    c5 = upward_crossings(w.x(5), w.times)
    if len(c1) < 3 or len(c5) < 2:
        raise NotPeriodicError("hip or knee neuron does not oscillate")
    lags = _lag_samples(c1[1:-1], c5, period)[-cycles:]
    return circ_mean(lags), circ_std(lags)


def gamma_sweep(gammas: Sequence[float], duration: float = 20.0, analysis_span: float = 8.0,
                stability_threshold: float = 0.01, workers: int = 1,
                config: SimConfig | None = None) -> list:
    """Hip-knee phase of leg 1 and a stability flag for each hip-to-knee gain.

    Walk parameters, reference initial state. The phase is the circular mean
    lag of ``x5`` behind ``x1`` over the last 20 cycles; the limit cycle is
    flagged stable when the circular std of that lag is below
    ``stability_threshold`` cycles.
    """
    base = config or SimConfig()

    def one(g):
        if not g < 0:
            raise ConfigError("gamma must be negative")
        cfg = base.replace(gait=GAITS["walk"], duration=duration,
                           coupling=base.coupling.replace(gamma=float(g)), events=())
        traj = simulate(cfg)
        try:
            ph, sd = hip_knee_phase_stats(traj, duration - analysis_span)
        except NotPeriodicError:
            return GammaPoint(float(g), float("nan"), float("nan"), False)
        return GammaPoint(float(g), ph, sd, sd < stability_threshold)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, gammas))
    return [one(g) for g in gammas]


def gamma_sweep_csv(points: Sequence[GammaPoint]) -> str:
    lines = ["gamma,phase,stable"]
    lines += [f"{p.gamma:.9g},{p.phase:.9g},{int(p.stable)}" for p in points]
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------- mapping build


class PiecewiseLinearMap:
    """Interpolant from a monotonized neuron value to a joint position."""

    def __init__(self, knots_x: np.ndarray, knots_y: np.ndarray):
        self.knots_x = np.asarray(knots_x, dtype=float)
        self.knots_y = np.asarray(knots_y, dtype=float)

    def __call__(self, v):
        return np.interp(v, self.knots_x, self.knots_y)


def build_mapping(neuron_cycle: Sequence[float], joint_cycle: Sequence[float]) -> PiecewiseLinearMap:
    """Piecewise-linear map from one monotonized neuron cycle to the matching joint cycle."""
    xs = np.asarray(neuron_cycle, dtype=float)
    ys = np.asarray(joint_cycle, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1 or len(xs) < 2:
        raise ConfigError("neuron and joint cycles must be 1-D arrays of equal length >= 2")
    if not np.all(np.diff(xs) > 0):
        raise ConfigError("neuron cycle is not strictly increasing after monotonization")
    return PiecewiseLinearMap(xs, ys)
