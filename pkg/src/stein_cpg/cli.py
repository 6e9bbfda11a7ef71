"""Command-line entry point.

Every subcommand writes into one run directory. The base directory comes
from ``--out``, else the ``STEIN_CPG_OUTPUT_DIR`` environment variable,
else ``./runs``.

Exit codes: 0 success, 2 classification mismatch or failed check,
3 integration divergence, 64 usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import CPGError, ConfigError, IntegrationDiverged, WaitTimeout
from .integrator import SimConfig, round_sig, simulate
from .model import GAIT_NAMES, CouplingConfig, gait_params

EXIT_OK = 0
EXIT_MISMATCH = 2
EXIT_DIVERGED = 3
EXIT_USAGE = 64
OUTPUT_ENV = "STEIN_CPG_OUTPUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class ExperimentConfig:
    """Settings shared by all subcommands; loaded from JSON, overridden by flags."""

    gait: str | None = None
    from_gait: str | None = None
    to_gait: str | None = None
    dt: float = 1e-4
    record_interval: float = 1e-3
    duration: float | None = None
    seed: int = 0
    alpha: float = -0.15
    beta: float = -0.15
    gamma: float = -0.6
    delta: float = -0.1
    noise_mode: str = "per_step"
    reset_drive_phase: bool = True
    envelope: list | None = None
    stim_neurons: list | None = None
    wait_interval: list | None = None
    output_dir: str | None = None

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def merge(self, args: argparse.Namespace) -> "ExperimentConfig":
        for f in fields(self):
            v = getattr(args, f.name, None)
            if v is not None:
                setattr(self, f.name, v)
        return self

    def validate(self) -> None:
        for name in ("gait", "from_gait", "to_gait"):
            v = getattr(self, name)
            if v is not None and v not in GAIT_NAMES:
                raise UsageError(f"{name} must be one of {GAIT_NAMES}, got {v!r}")
        if not self.dt > 0:
            raise UsageError("dt must be positive")
        if self.duration is not None and self.duration < 0:
            raise UsageError("duration must be non-negative")
        if self.envelope is not None and len(self.envelope) != 4:
            raise UsageError("envelope needs four values: R_P T_P eta_R eta_F")
        if self.wait_interval is not None and len(self.wait_interval) != 2:
            raise UsageError("wait interval needs two values")
        try:
            self.sim_config(1.0)
            if self.envelope is not None:
                from .stimulation import StimulationEnvelope

                StimulationEnvelope(*self.envelope)
        except ConfigError as exc:
            raise UsageError(str(exc)) from exc

    def coupling(self) -> CouplingConfig:
        return CouplingConfig(self.alpha, self.beta, self.gamma, self.delta)

    def sim_config(self, duration: float, gait: str | None = None) -> SimConfig:
        return SimConfig(
            dt=self.dt,
            record_interval=self.record_interval,
            duration=duration,
            gait=gait_params(gait or self.gait or "walk"),
            coupling=self.coupling(),
            rng_seed=int(self.seed),
            noise_mode=self.noise_mode,
            reset_drive_phase=self.reset_drive_phase,
        )

    def run_dir(self, name: str) -> Path:
        base = self.output_dir or os.environ.get(OUTPUT_ENV) or "runs"
        path = Path(base) / name
        path.mkdir(parents=True, exist_ok=True)
        return path


def _dump(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if not math.isfinite(v) else round_sig(v)
    return obj


# ------------------------------------------------------------ subcommands


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    from .analysis import classify

    duration = 15.0 if cfg.duration is None else cfg.duration
    out = cfg.run_dir(f"simulate-{cfg.gait}")
    traj = simulate(cfg.sim_config(duration))
    traj.to_csv(out / "trajectory.csv")
    _dump(out / "events.json", traj.event_log)
    t1 = traj.t_end
    win = args.window if args.window else min(6.0, duration / 2)
    if len(traj) < 3:
        report = {"label": "Unclassified", "gait": cfg.gait, "reason": "too few samples"}
        _dump(out / "report.json", report)
        print("Unclassified")
        return EXIT_MISMATCH
    rep = classify(traj, (max(traj.t_start, t1 - win), t1))
    report = rep.to_dict()
    report["gait"] = cfg.gait
    report["window"] = list(rep.window)
    _dump(out / "report.json", report)
    period = "nan" if math.isnan(rep.period) else f"{rep.period:.4f}"
    print(f"{cfg.gait}: label={rep.label} period={period} s")
    return EXIT_OK if rep.label == cfg.gait else EXIT_MISMATCH


def _spec_from(cfg: ExperimentConfig, args):
    from .transitions import lookup

    spec = lookup(cfg.from_gait, cfg.to_gait, source=args.source)
    from dataclasses import replace

    if cfg.envelope is not None:
        spec = replace(spec, envelope=tuple(cfg.envelope))
    if cfg.stim_neurons is not None:
        spec = replace(spec, stim_neurons=tuple(cfg.stim_neurons))
    if cfg.wait_interval is not None:
        spec = replace(spec, wait_interval=tuple(cfg.wait_interval))
    return spec


def cmd_transition(cfg: ExperimentConfig, args) -> int:
    from .transitions import run_transition, steady_state

    spec = _spec_from(cfg, args)
    base = steady_state(spec.from_gait, args.command_time, cfg.sim_config(1.0))
    res = run_transition(spec, args.command_time, wait=not args.no_wait, base=base)
    out = cfg.run_dir(f"transition-{spec.from_gait}-{spec.to_gait}")
    res.trajectory.to_csv(out / "trajectory.csv")
    _dump(out / "events.json", res.trajectory.event_log)
    _dump(out / "report.json", res.to_dict())
    print(f"{spec.from_gait}->{spec.to_gait} {spec.strategy.value}: command {args.command_time:.6g} s, "
          f"executed {res.execution_time:.6g} s, label={res.label}")
    return EXIT_OK if res.success else EXIT_MISMATCH


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    from .transitions import lookup, sweep_transition

    strategy = args.strategy or lookup(cfg.from_gait, cfg.to_gait).strategy.without_wait().value
    spec = lookup(cfg.from_gait, cfg.to_gait)
    src = spec if args.strategy is None else strategy
    neurons = cfg.stim_neurons if cfg.stim_neurons is not None else (
        list(spec.stim_neurons) if args.strategy is not None else None)
    envelope = cfg.envelope if cfg.envelope is not None else (
        list(spec.envelope) if (args.strategy is not None and spec.envelope) else None)
    res = sweep_transition(src, cfg.from_gait, cfg.to_gait, args.start, args.end, args.step,
                           stim_neurons=neurons, envelope=envelope, workers=args.workers,
                           config=cfg.sim_config(1.0))
    out = cfg.run_dir(f"sweep-{cfg.from_gait}-{cfg.to_gait}")
    res.to_csv(out / "sweep.csv")
    _dump(out / "report.json", {
        "from": cfg.from_gait, "to": cfg.to_gait, "strategy": res.strategy.value,
        "from_period_s": res.from_period, "segments": [list(s) for s in res.segments()],
    })
    for label, count in res.segments():
        print(f"{count:4d} x {label}")
    return EXIT_OK


def cmd_perturb(cfg: ExperimentConfig, args) -> int:
    from .analysis import perturbation_suite

    rep = perturbation_suite(cfg.gait, seed=int(cfg.seed), scale=args.scale,
                             config=cfg.sim_config(1.0))
    out = cfg.run_dir(f"perturb-{cfg.gait}")
    rep.final.to_csv(out / "trajectory.csv")
    _dump(out / "events.json", rep.final.event_log)
    _dump(out / "report.json", rep.to_dict())
    print(f"{cfg.gait}: before={rep.before}")
    for d in rep.disturbances:
        print(f"  {d.name:14s} during={d.during!s:24s} after={d.after}")
    return EXIT_OK if rep.restored else EXIT_MISMATCH


def cmd_symmetry(cfg: ExperimentConfig, args) -> int:
    from .symmetry import (KAPPA8, LAMBDA8, OMEGA8, SpatiotemporalSymmetry, check_typed_automorphism,
                           d4, default_edge_types, generate_group, hk_catalog, verify_gait_symmetry)

    coupling = cfg.coupling()
    labels = default_edge_types(coupling)
    report = {
        "D4_order_4": d4().order,
        "D4_order_8": generate_group([OMEGA8, KAPPA8]).order,
        "automorphisms": {
            name: check_typed_automorphism(p, coupling.lam, labels)
            for name, p in (("omega", OMEGA8), ("lambda", LAMBDA8), ("kappa", KAPPA8))
        },
        "hk": [e.to_dict() for e in hk_catalog()],
    }
    ok = report["D4_order_4"] == 8 and report["D4_order_8"] == 8
    ok = ok and all(e["H/K_cyclic"] and e["K_subset_H"] and e["H_subset_D4"] for e in report["hk"])
    print(f"D4 order: {report['D4_order_4']} (4 nodes), {report['D4_order_8']} (8 nodes)")
    print(f"{'gait':6s} {'H':10s} {'K':9s} |H/K| cyclic  phases")
    for e in report["hk"]:
        print(f"{e['gait']:6s} {e['H']:10s} {e['K']:9s} {e['H/K_order']:5d} {e['H/K_cyclic']!s:6s}  "
              f"{tuple(e['phases_x2_x3_x4'])}")
    print("typed automorphisms:", report["automorphisms"])
    if args.verify_gaits:
        from .analysis import estimate_period

        residuals = {}
        for entry in hk_catalog():
            traj = simulate(cfg.sim_config(15.0, entry.gait))
            T = estimate_period(traj, 1, (10.0, 14.0))
            residuals[entry.gait] = {
                str(s.perm.lift()): verify_gait_symmetry(
                    traj, SpatiotemporalSymmetry(s.perm.lift(), s.phase_shift), T, (10.0, 14.0))
                for s in entry.symmetries
            }
        report["residuals"] = residuals
        for g, r in residuals.items():
            worst = max(r.values())
            print(f"  {g:6s} max residual {worst:.4f}")
            ok = ok and worst < args.threshold
    out = cfg.run_dir("symmetry")
    _dump(out / "report.json", report)
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_gamma_sweep(cfg: ExperimentConfig, args) -> int:
    from .kinematics import gamma_sweep, gamma_sweep_csv

    if args.gammas:
        gammas = args.gammas
    else:
        gammas = list(np.round(np.arange(args.start, args.stop + 1e-12, args.step), 6))
    if any(not g < 0 for g in gammas):
        raise UsageError("gamma values must be negative")
    pts = gamma_sweep(gammas, workers=args.workers, config=cfg.sim_config(1.0))
    out = cfg.run_dir("gamma-sweep")
    (out / "gamma_sweep.csv").write_text(gamma_sweep_csv(pts))
    stable = [p.phase for p in pts if p.stable]
    _dump(out / "report.json", {
        "points": [[p.gamma, p.phase, p.phase_std, p.stable] for p in pts],
        "stable_phase_range": [min(stable), max(stable)] if stable else None,
    })
    for p in pts:
        print(f"gamma={p.gamma:+.3f} phase={p.phase:.3f} std={p.phase_std:.4f} "
              f"{'stable' if p.stable else 'NOT stable'}")
    return EXIT_OK


def cmd_foot(cfg: ExperimentConfig, args) -> int:
    from .kinematics import LegGeometry, foot_trajectory, polyline_area

    duration = 15.0 if cfg.duration is None else cfg.duration
    traj = simulate(cfg.sim_config(duration))
    geom = LegGeometry(args.l1, args.l2, (0.0, 20.0))
    ts, pts = foot_trajectory(traj, args.leg, geom=geom)
    out = cfg.run_dir(f"foot-{cfg.gait}-leg{args.leg}")
    lines = ["t,foot_x,foot_y"] + [f"{t:.9g},{x:.9g},{y:.9g}" for t, (x, y) in zip(ts, pts)]
    (out / "foot.csv").write_text("\n".join(lines) + "\n")
    gap = float(np.linalg.norm(pts[0] - pts[-1]))
    _dump(out / "report.json", {"gait": cfg.gait, "leg": args.leg, "closure_gap": gap,
                                "area": polyline_area(pts), "n_points": len(pts)})
    print(f"leg {args.leg}: {len(pts)} points, closure gap {gap:.2e}, area {polyline_area(pts):.4g}")
    return EXIT_OK if gap < 1e-3 else EXIT_MISMATCH


# ------------------------------------------------------------------ parser


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("shared settings")
    g.add_argument("--config", help="JSON file with ExperimentConfig keys; flags override it")
    g.add_argument("--dt", type=float, help="integration step in seconds (default 1e-4)")
    g.add_argument("--record-interval", dest="record_interval", type=float,
                   help="sampling interval in seconds, a multiple of dt (default 1e-3)")
    g.add_argument("--duration", type=float, help="simulated seconds")
    g.add_argument("--seed", type=int, help="64-bit RNG seed (default 0)")
    for name in ("alpha", "beta", "gamma", "delta"):
        g.add_argument(f"--{name}", type=float, help=f"coupling gain {name}")
    g.add_argument("--noise-mode", dest="noise_mode", choices=["per_step", "wiener"],
                   help="how noise-window draws enter the state")
    g.add_argument("--no-drive-reset", dest="reset_drive_phase", action="store_const", const=False,
                   help="keep the drive sinusoid on global time across gait switches")
    g.add_argument("--out", dest="output_dir", help=f"output base directory (default ${OUTPUT_ENV} or ./runs)")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stein-cpg", description="Eight-neuron CPG gait simulator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one gait and classify it")
    s.add_argument("gait", choices=GAIT_NAMES)
    s.add_argument("--window", type=float, help="classification window at the end of the run (s)")
    _common(s)

    s = sub.add_parser("transition", help="execute one catalog transition")
    s.add_argument("from_gait", choices=GAIT_NAMES)
    s.add_argument("to_gait", choices=GAIT_NAMES)
    s.add_argument("--command-time", dest="command_time", type=float, default=10.0)
    s.add_argument("--no-wait", dest="no_wait", action="store_true", help="execute at the command time")
    s.add_argument("--source", choices=["effective", "reference"], default="effective",
                   help="wait intervals: re-derived where needed, or the reference values")
    s.add_argument("--envelope", type=float, nargs=4, metavar=("R_P", "T_P", "ETA_R", "ETA_F"))
    s.add_argument("--neurons", dest="stim_neurons", type=int, nargs="+")
    s.add_argument("--wait-interval", dest="wait_interval", type=float, nargs=2, metavar=("LO", "HI"))
    _common(s)

    s = sub.add_parser("sweep", help="raw transition outcome versus execution time")
    s.add_argument("from_gait", choices=GAIT_NAMES)
    s.add_argument("to_gait", choices=GAIT_NAMES)
    s.add_argument("--start", type=float, default=10.0)
    s.add_argument("--end", type=float, default=10.3)
    s.add_argument("--step", type=float, default=0.002)
    s.add_argument("--strategy", choices=["Switch", "PowerPair"],
                   help="raw strategy (default: the catalog strategy without its wait)")
    s.add_argument("--envelope", type=float, nargs=4, metavar=("R_P", "T_P", "ETA_R", "ETA_F"))
    s.add_argument("--neurons", dest="stim_neurons", type=int, nargs="+")
    s.add_argument("--workers", type=int, default=1)
    _common(s)

    s = sub.add_parser("perturb", help="disturbance schedule and recovery check")
    s.add_argument("gait", choices=GAIT_NAMES)
    s.add_argument("--scale", type=float, default=1.0, help="multiplier on every disturbance size")
    _common(s)

    s = sub.add_parser("symmetry", help="H/K catalog and automorphism report")
    s.add_argument("--verify-gaits", action="store_true", help="also check symmetries on simulated gaits")
    s.add_argument("--threshold", type=float, default=0.02, help="residual threshold for --verify-gaits")
    _common(s)

    s = sub.add_parser("gamma-sweep", help="hip-knee phase versus hip-to-knee gain")
    s.add_argument("--gammas", type=float, nargs="+")
    s.add_argument("--start", type=float, default=-1.0)
    s.add_argument("--stop", type=float, default=-0.01)
    s.add_argument("--step", type=float, default=0.01)
    s.add_argument("--workers", type=int, default=1)
    _common(s)

    s = sub.add_parser("foot", help="foot trajectory of one leg")
    s.add_argument("gait", choices=GAIT_NAMES)
    s.add_argument("leg", type=int, choices=[1, 2, 3, 4])
    s.add_argument("--l1", type=float, default=0.2)
    s.add_argument("--l2", type=float, default=0.2)
    _common(s)
    return p


COMMANDS = {
    "simulate": cmd_simulate,
    "transition": cmd_transition,
    "sweep": cmd_sweep,
    "perturb": cmd_perturb,
    "symmetry": cmd_symmetry,
    "gamma-sweep": cmd_gamma_sweep,
    "foot": cmd_foot,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
        cfg.merge(args)
        cfg.validate()
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrationDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (WaitTimeout, CPGError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
