import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stein_cpg import NotPeriodicError
from stein_cpg.analysis import (
    CLUSTER_THRESHOLD,
    GAIT_TEMPLATES,
    circ_dist,
    circ_mean,
    classify,
    cluster_blocks,
    estimate_period,
    match_template,
    monotonize_F,
    perturbation_suite,
    phase_difference,
    phase_locking_std,
    rhythm_report,
    upward_crossings,
)
from stein_cpg.integrator import SimConfig, Trajectory, simulate
from stein_cpg.model import GAIT_NAMES, gait_params


def synthetic(phases, period=0.25, duration=6.0, amp=None, rec=1e-3):
    """Trajectory with ``x_i(t) = x_1(t + phases[i] T)``."""
    t = np.arange(0.0, duration + rec / 2, rec)
    rows = np.zeros((len(t), 24))
    for i, ph in enumerate(list(phases) + list(phases)):
        a = 0.4 if amp is None else amp(t)
        rows[:, i] = 0.5 + a * np.sin(2 * np.pi * (t / period + ph))
    return Trajectory(t, rows, [], 1e-4, rec, [])


def test_circular_helpers():
    assert circ_dist(0.95, 0.05) == pytest.approx(0.1)
    assert circ_mean([0.98, 0.02]) == pytest.approx(0.0, abs=1e-12)


def test_crossings_refined_on_sine():
    t = np.arange(0, 2, 1e-3)
    x = np.sin(2 * np.pi * 4 * (t - 0.0123))
    c = upward_crossings(x, t)
    np.testing.assert_allclose(c, 0.0123 + np.arange(len(c)) / 4, atol=1e-7)


def test_constant_signal_not_periodic():
    traj = synthetic([0, 0, 0, 0], amp=lambda t: 0.0 * t)
    with pytest.raises(NotPeriodicError):
        estimate_period(traj, 1)


def test_period_walk(runs):
    assert estimate_period(runs("walk"), 1, (9.0, 15.0)) == pytest.approx(0.259, rel=0.05)


def test_pronk_locks_to_drive(runs):
    # pronk follows its drive sinusoid one-to-one
    g = gait_params("pronk")
    assert estimate_period(runs("pronk"), 1, (9.0, 15.0)) == pytest.approx(2 * math.pi / g.k2_h, rel=1e-6)


def test_phase_examples(runs):
    assert phase_difference(runs("trot"), 1, 2, window=(9.0, 15.0)) == pytest.approx(0.5, abs=0.05)
    assert phase_difference(runs("walk"), 1, 3, window=(9.0, 15.0)) == pytest.approx(0.25, abs=0.05)
    assert phase_difference(runs("walk"), 2, 2, window=(9.0, 15.0)) == 0.0


def test_phase_matrix_antisymmetric(runs):
    rep = rhythm_report(runs("walk"), (9.0, 15.0))
    P = rep.phase
    assert np.all(np.diag(P) == 0)
    off = (P + P.T) % 1.0
    assert np.all(np.minimum(off, 1 - off) < 1e-6)
    assert rep.period > 0


def test_synthetic_phase_sign():
    traj = synthetic([0, 0.5, 0.25, 0.75])
    assert phase_difference(traj, 1, 3) == pytest.approx(0.25, abs=1e-3)
    assert phase_difference(traj, 3, 1) == pytest.approx(0.75, abs=1e-3)


@pytest.mark.parametrize("gait", GAIT_NAMES)
def test_synthetic_templates_classify(gait):
    label = classify(synthetic(GAIT_TEMPLATES[gait])).label
    assert label == gait
    assert str(label) == gait.capitalize()


def test_identical_signals_pronk():
    assert classify(synthetic([0, 0, 0, 0])).label == "pronk"


def test_invalid_partition_notation():
    label = classify(synthetic([0, 0.5, 0.5, 0.5])).label
    assert label.kind == "invalid"
    assert str(label) == "Invalid((234)(1))"
    label = classify(synthetic([0, 0, 0, 0.4])).label
    assert str(label) == "Invalid((123)(4))"


def test_unstable_amplitude():
    traj = synthetic(GAIT_TEMPLATES["trot"], amp=lambda t: 0.4 * (1 + 0.3 * np.sin(2 * np.pi * 0.7 * t)))
    label = classify(traj).label
    assert label.kind == "unstable"
    assert label.like == "trot"


def test_unclassified_constant():
    traj = synthetic([0, 0, 0, 0], amp=lambda t: 0.0 * t)
    assert str(classify(traj).label) == "Unclassified"


def test_window_outside_trajectory():
    from stein_cpg import ConfigError

    with pytest.raises(ConfigError):
        classify(synthetic([0, 0, 0, 0]), (5.0, 8.0))


def test_classify_pace_from_reference_state(runs):
    assert classify(runs("pace"), (9.0, 15.0)).label == "pace"


@pytest.mark.parametrize("gait", GAIT_NAMES)
def test_classification_idempotent(gait, runs):
    a = classify(runs(gait), (6.0, 10.0)).label
    b = classify(runs(gait), (11.0, 15.0)).label
    assert a == b == gait


@pytest.mark.parametrize("gait", GAIT_NAMES)
def test_hip_knee_locking(gait, runs):
    for i in range(1, 5):
        assert phase_locking_std(runs(gait), i, i + 4, window=(9.0, 15.0)) < 0.01


@given(st.lists(st.floats(0, 1, exclude_max=True), min_size=3, max_size=3))
def test_templates_exclusive(rest):
    phases = [0.0] + rest
    hits = [g for g, tpl in GAIT_TEMPLATES.items()
            if all(circ_dist(p, q) < CLUSTER_THRESHOLD for p, q in zip(phases, tpl))]
    assert len(hits) <= 1
    name = match_template(phases)
    assert name is None or name in hits


def test_cluster_blocks_order():
    assert cluster_blocks([0, 0.5, 0.5, 0.5]) == ((2, 3, 4), (1,))
    assert cluster_blocks([0, 0.5, 0, 0.5]) == ((1, 3), (2, 4))


def test_report_json_schema(runs):
    d = classify(runs("trot"), (9.0, 15.0)).to_dict()
    assert set(d) >= {"label", "period_s", "phases", "hip_knee_phases", "amplitude_cv"}
    assert len(d["hip_knee_phases"]) == 4 and len(d["amplitude_cv"]) == 8


def test_monotonize_definition():
    t = np.arange(0, 1, 1e-3)
    x = 0.5 + 0.4 * np.sin(2 * np.pi * 2 * t)
    traj = Trajectory(t, np.column_stack([x] + [np.zeros_like(t)] * 23), [], 1e-4, 1e-3, [])
    ts, F = monotonize_F(traj)
    rising = np.flatnonzero((np.abs(x - 0.3) < 2e-3) & (np.gradient(x) > 0))[0]
    falling = np.flatnonzero((np.abs(x - 0.3) < 2e-3) & (np.gradient(x) < 0))[0]
    assert F[rising] == pytest.approx(x[rising])
    assert F[falling] == pytest.approx(2 - x[falling])


def test_monotonize_pronk_range(runs):
    traj = runs("pronk")
    ts, F = monotonize_F(traj, (10.0, 12.0))
    x = traj.window(10.0, 12.0).x(1)
    assert F.min() >= x.min() - 1e-12 and F.max() <= 2 - x.min() + 1e-12
    wraps = np.flatnonzero(np.diff(F) < -1.0)
    T = estimate_period(traj, 1, (10.0, 12.0))
    assert len(wraps) == pytest.approx(2.0 / T, abs=1)
    seg = F[wraps[0] + 1: wraps[1] + 1]
    assert np.all(np.diff(seg) >= -1e-9)


def test_zero_magnitude_perturbation_is_identity():
    rep = perturbation_suite("trot", scale=0.0)
    plain = simulate(SimConfig(gait=gait_params("trot"), duration=rep.final.t_end))
    assert np.array_equal(rep.final.samples, plain.samples)


def test_perturbation_report_structure():
    rep = perturbation_suite("bound", seed=1)
    assert [d.name for d in rep.disturbances] == ["offset", "random_offset", "noise_0.008", "noise_0.005"]
    for d in rep.disturbances:
        assert d.after_window[0] >= d.end + 2.0
    d = rep.to_dict()
    assert d["before"] == "Bound" and len(d["disturbances"]) == 4


def test_offset_recovery_walk():
    rep = perturbation_suite("walk")
    assert rep.disturbances[0].after == "walk"
