"""End-to-end acceptance checks, one printed PASS/FAIL line per criterion.

Run with pytest, or directly with ``python3 tests/test_acceptance.py``.
"""
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import gait_run, ref_deriv  # noqa: E402
from stein_cpg.analysis import (  # noqa: E402
    estimate_period,
    perturbation_suite,
    phase_difference,
    phase_locking_std,
)
from stein_cpg.integrator import (  # noqa: E402
    NoiseWindow,
    RandomOffset,
    SimConfig,
    convergence_check,
    network_rk4_step,
    rk4_step,
    simulate,
)
from stein_cpg.kinematics import gamma_sweep  # noqa: E402
from stein_cpg.model import GAIT_NAMES, INITIAL_STATE, CouplingConfig, gait_params  # noqa: E402
from stein_cpg.symmetry import (  # noqa: E402
    KAPPA8,
    LAMBDA8,
    OMEGA8,
    SpatiotemporalSymmetry,
    check_typed_automorphism,
    d4,
    default_edge_types,
    generate_group,
    hk_catalog,
    verify_gait_symmetry,
)
from stein_cpg.transitions import (  # noqa: E402
    catalog,
    command_times,
    lookup,
    measure_period,
    rederive_wait_interval,
    run_transition,
    steady_state,
    sweep_transition,
)

REF_PERIODS = {"walk": 0.259, "trot": 0.224, "pace": 0.233, "bound": 0.213, "pronk": 0.209}
STEADY = (10.0, 15.0)


def criterion_1():
    bad, parts = [], []
    for g in GAIT_NAMES:
        t0 = time.perf_counter()
        traj = simulate(SimConfig(gait=gait_params(g), duration=15.0))
        elapsed = time.perf_counter() - t0
        T = estimate_period(traj, 1, STEADY)
        err = abs(T - REF_PERIODS[g]) / REF_PERIODS[g]
        parts.append(f"{g} {T:.4f}s ({err:+.1%}, {elapsed:.2f}s)")
        if err > 0.05 or elapsed > 10.0:
            bad.append(g)
    return not bad, "; ".join(parts) + (f"; off: {','.join(bad)}" if bad else "")


def criterion_2():
    bad, parts = [], []
    table = {e.gait: e.phases for e in hk_catalog()}
    for g in GAIT_NAMES:
        traj = gait_run(g)
        got = [phase_difference(traj, 1, j, window=STEADY) for j in (2, 3, 4)]
        errs = [abs((a - b + 0.5) % 1.0 - 0.5) for a, b in zip(got, table[g])]
        parts.append(f"{g} ({', '.join(f'{v:.3f}' for v in got)})")
        if max(errs) > 0.05:
            bad.append(g)
    return not bad, "; ".join(parts) + (f"; off: {','.join(bad)}" if bad else "")


def criterion_3():
    worst = {}
    for g in GAIT_NAMES:
        traj = gait_run(g)
        worst[g] = max(phase_locking_std(traj, i, i + 4, window=(5.0, 15.0), cycles=20)
                       for i in range(1, 5))
    ok = all(v < 0.01 for v in worst.values())
    return ok, "max std " + ", ".join(f"{g} {v:.2e}" for g, v in worst.items())


def criterion_4():
    bad, parts = [], []
    for g in GAIT_NAMES:
        rep = perturbation_suite(g)
        if not rep.restored:
            failed = [f"{d.name}->{d.after}" for d in rep.disturbances if d.after != rep.before]
            bad.append(f"{g}[{', '.join(failed)}]")
        parts.append(f"{g} {'ok' if rep.restored else 'lost'}")
    detail = "; ".join(parts)
    if bad:
        detail += "; not restored: " + " ".join(bad)
    return not bad, detail


def _batch(spec, base, period):
    return sum(run_transition(spec, tc, base=base, period=period).success
               for tc in command_times(period))


def criterion_5():
    failures, deviations = [], []
    for spec in catalog("reference"):
        base = steady_state(spec.from_gait, 10.0)
        T = measure_period(base)
        wins = _batch(spec, base, T)
        if wins == 20:
            continue
        name = f"{spec.from_gait}->{spec.to_gait}"
        if not spec.strategy.waits:
            failures.append(f"{name} {wins}/20")
            continue
        red = rederive_wait_interval(spec)
        if red.interval is None:
            failures.append(f"{name} {wins}/20, no interval re-derived")
            continue
        rewins = _batch(spec.with_wait(red.interval), base, T)
        deviations.append(f"{name} {list(spec.wait_interval)}->{list(red.interval)} ({wins}->{rewins}/20)")
        if rewins < 20:
            failures.append(f"{name} re-derived {rewins}/20")
    detail = f"{20 - len(failures)}/20 entries at 20/20"
    if deviations:
        detail += "; re-derived: " + "; ".join(deviations)
    if failures:
        detail += "; failing: " + ", ".join(failures)
    return not failures, detail


def criterion_6():
    spec = lookup("pronk", "trot")
    waited = run_transition(spec, 9.1)
    forced = run_transition(spec, 9.1, wait=False)
    ok = abs(waited.execution_time - 9.1342) <= 0.01 and waited.success and not forced.success
    return ok, (f"executed {waited.execution_time:.4f}s label {waited.label}; "
                f"forced label {forced.label}")


def _collapse(labels, keep):
    out = []
    for s in labels:
        s = s if s in keep else "invalid"
        if not out or out[-1] != s:
            out.append(s)
    return out


def _contains_cycle(seq, pattern):
    n = len(pattern)
    return any(seq[k:k + n] == pattern[r:] + pattern[:r]
               for k in range(len(seq) - n + 1) for r in range(n))


def criterion_7():
    wt = sweep_transition("Switch", "walk", "trot", 10.0, 10.3, 0.002, with_settle_time=False)
    seq = _collapse([str(p.label).lower() for p in wt.points], {"trot", "pace"})
    alternating = _contains_cycle(seq, ["trot", "invalid", "pace", "invalid"])
    spec = lookup("bound", "walk")
    base = steady_state("bound", 10.0)
    T = measure_period(base)
    bw = sweep_transition(spec, "bound", "walk", 10.0, 10.0 + T, 0.002, with_settle_time=False)
    allowed = {"Walk", "Unstable[walk]", "Bound", "Unstable"}
    counts = {}
    for p in bw.points:
        counts[str(p.label)] = counts.get(str(p.label), 0) + 1
    extra = {k: v for k, v in counts.items() if k not in allowed}
    ok = alternating and not extra
    detail = (f"walk->trot {len(wt.segments())} segments, alternating={alternating}; "
              f"bound->walk {len(bw.points)} points")
    if extra:
        detail += f", outside the allowed set: {sum(extra.values())} ({', '.join(sorted(extra))})"
    return ok, detail


def criterion_8():
    gammas = np.round(np.arange(-1.0, 0.0, 0.01), 2)
    pts = gamma_sweep(list(gammas), workers=4)
    by = {p.gamma: p for p in pts}
    stable = [p.phase for p in pts if p.stable]
    lo, hi = min(stable), max(stable)
    span_ok = abs(lo - 0.25) <= 0.05 and abs(hi - 0.62) <= 0.05
    flags_ok = not by[-0.01].stable and not by[-0.53].stable
    return span_ok and flags_ok, (f"stable phases [{lo:.3f}, {hi:.3f}] over {len(stable)}/{len(pts)} gains; "
                                  f"-0.01 stable={by[-0.01].stable}, -0.53 stable={by[-0.53].stable}")


def criterion_9():
    problems = []
    if d4().order != 8:
        problems.append("D4 order (4 nodes)")
    if generate_group([OMEGA8, KAPPA8]).order != 8:
        problems.append("D4 order (8 nodes)")
    worst = {}
    for e in hk_catalog():
        if not e.verified:
            problems.append(f"{e.gait} H/K")
        traj = gait_run(e.gait)
        T = estimate_period(traj, 1, STEADY)
        res = {str(s.perm): verify_gait_symmetry(traj, SpatiotemporalSymmetry(s.perm.lift(), s.phase_shift),
                                                 T, (10.0, 14.0))
               for s in e.symmetries}
        worst[e.gait] = max(res.items(), key=lambda kv: kv[1])
        if worst[e.gait][1] >= 0.02:
            problems.append(f"{e.gait} residual {worst[e.gait][1]:.3f} at {worst[e.gait][0]}")
    c = CouplingConfig()
    labels = default_edge_types(c)
    if not check_typed_automorphism(OMEGA8, c.lam, labels):
        problems.append("omega not an automorphism")
    if check_typed_automorphism(LAMBDA8, c.lam, labels):
        problems.append("lambda is an automorphism")
    detail = "worst residuals " + ", ".join(f"{g} {v:.3f}" for g, (_, v) in worst.items())
    if problems:
        detail += "; " + "; ".join(problems)
    return not problems, detail


def criterion_10():
    problems, rels = [], {}
    for g in GAIT_NAMES:
        rep = convergence_check(SimConfig(gait=gait_params(g), duration=15.0))
        rels[g] = rep.rel_change
        if not rep.passed:
            problems.append(f"{g} convergence")
    g = gait_params("walk")
    s, t = INITIAL_STATE.to_array(), 0.0
    for _ in range(100):
        s, t = rk4_step(s, t, 1e-6, lambda tt, yy: ref_deriv(tt, yy, g))
    one = network_rk4_step(INITIAL_STATE, 1e-4, g).to_array()
    ref_err = float(np.max(np.abs(one - s) / np.abs(s)))
    if ref_err > 1e-8:
        problems.append(f"reference error {ref_err:.1e}")
    evs = (RandomOffset(1.0, (1, 2, 3, 4), -0.08, 0.08), NoiseWindow(2.0, (1, 2, 3, 4), -0.008, 0.008, 3.0))
    cfg = SimConfig(gait=gait_params("trot"), duration=4.0, events=evs, rng_seed=11)
    same = simulate(cfg).to_csv() == simulate(cfg).to_csv()
    if not same:
        problems.append("reruns differ")
    detail = (f"max period change {max(rels.values()):.1e}; reference rel err {ref_err:.1e}; "
              f"bit-identical reruns {same}")
    if problems:
        detail += "; " + "; ".join(problems)
    return not problems, detail


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


def _line(n, ok, detail):
    return f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}"


def _run(capsys, n):
    ok, detail = CRITERIA[n - 1]()
    with capsys.disabled():
        print("\n" + _line(n, ok, detail))
    assert ok, detail


@pytest.mark.slow
@pytest.mark.parametrize("n", range(1, 11))
def test_criterion(n, capsys):
    _run(capsys, n)


if __name__ == "__main__":
    failed = 0
    for k, fn in enumerate(CRITERIA, 1):
        ok, detail = fn()
        failed += not ok
        print(_line(k, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
