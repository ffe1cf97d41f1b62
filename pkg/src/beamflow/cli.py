"""``beamflow`` command line: pattern generation, runs, gradient checks, plot data.

Exit codes: 0 success, 1 scenario validation error, 2 I/O or input-format
error, 3 gradient check failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import csvio
from .array_factor import af_magnitude, phasor_basis
from .config import describe, load_scenario, reference_scenario, resolve_seed
from .dynamics import integrate
from .gradients import fd_gradient, relative_error, total_gradients
from .model import PhysicalConstants, Scenario, ScenarioError, Swarm, pattern_term, validate_scenario
from .patterns import FAR_FIELD, CHANNEL_AWARE, DesiredPatternSpec, binomial_taper, desired_pattern, make_esla, make_grid

log = logging.getLogger("beamflow")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_GRADIENT = 3

GRADIENT_TOL = 1e-5
RUN_OUTPUTS = ("trajectory.csv", "pattern_initial.csv", "pattern_final.csv", "summary.json")
PLOT_OUTPUTS = ("pattern_polar.csv", "evolution.csv")


class OutputExists(OSError):
    pass


@dataclass
class RunConfig:
    scenario: Path | None
    out_dir: Path
    stride: int | None = None
    seed: int | None = None
    force: bool = False


@dataclass
class RunSummary:
    initial: dict
    final: dict
    steps: dict
    stop_reason: str
    agents: list
    scenario: dict
    warnings: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _prepare_dir(out_dir: Path, names, force: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    clash = [n for n in names if (out_dir / n).exists()]
    if clash and not force:
        raise OutputExists(f"{out_dir}: refusing to overwrite {', '.join(clash)} (use --force)")


def achieved_magnitude(swarm: Swarm, scenario: Scenario):
    basis = phasor_basis(swarm, scenario.grid.rho, scenario.grid.theta, scenario.constants, scenario.d_min)
    return af_magnitude(swarm.amplitude, basis)


def run_scenario(scenario: Scenario, out_dir: Path, force: bool = False) -> RunSummary:
    """Integrate ``scenario`` and write the run outputs into ``out_dir``."""
    validate_scenario(scenario)
    _prepare_dir(out_dir, RUN_OUTPUTS, force)
    start = time.perf_counter()
    traj = integrate(scenario, validate=False)
    wall = time.perf_counter() - start

    final = traj.final
    first = final.objective_history[0][1]
    last = final.objective_history[-1][1]
    sw = final.swarm
    summary = RunSummary(
        initial=first.as_dict(),
        final=last.as_dict(),
        steps={"fast": final.fast_steps, "slow": final.slow_steps, "rejected": final.rejected_steps,
               "descent_failures": final.descent_failures},
        stop_reason=traj.stop_reason,
        agents=[
            {"m": m, "amplitude": float(sw.amplitude[m]), "phase": float(np.mod(sw.phase[m], 2 * np.pi)),
             "x": float(sw.position[m, 0]), "y": float(sw.position[m, 1])}
            for m in range(sw.size)
        ],
        scenario=describe(scenario),
        warnings=list(traj.warnings),
    )
    csvio.write_trajectory(out_dir / "trajectory.csv", traj.samples)
    csvio.write_pattern(out_dir / "pattern_initial.csv", scenario.grid, achieved_magnitude(scenario.swarm, scenario))
    csvio.write_pattern(out_dir / "pattern_final.csv", scenario.grid, achieved_magnitude(sw, scenario))
    (out_dir / "summary.json").write_text(summary.to_json())
    # wall time lives apart from summary.json so reruns stay byte-identical
    (out_dir / "timing.json").write_text(json.dumps({"wall_time_s": wall}) + "\n")
    log.info("%s: %s after %d slow steps, pattern %.6g -> %.6g (%.2fs)",
             out_dir, traj.stop_reason, final.slow_steps, first.pattern_term, last.pattern_term, wall)
    return summary


def _load(path, seed):
    if path is None:
        return reference_scenario(seed=resolve_seed(42, seed))
    return load_scenario(path, seed=seed)


def _run_one(cfg: RunConfig) -> RunSummary:
    scenario = _load(cfg.scenario, cfg.seed)
    if cfg.stride is not None:
        scenario = scenario.replace(stride=cfg.stride)
    return run_scenario(scenario, cfg.out_dir, cfg.force)


def cmd_run(args) -> int:
    paths = args.scenario or [None]
    out = Path(args.out)
    if len(paths) == 1:
        configs = [RunConfig(paths[0] and Path(paths[0]), out, args.stride, args.seed, args.force)]
    else:
        configs = [RunConfig(Path(p), out / Path(p).stem, args.stride, args.seed, args.force) for p in paths]
    if args.jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            summaries = list(pool.map(_run_one, configs))
    else:
        summaries = [_run_one(cfg) for cfg in configs]
    for cfg, summ in zip(configs, summaries):
        print(f"{cfg.out_dir}: stop={summ.stop_reason} pattern {summ.initial['pattern_term']:.6g} -> "
              f"{summ.final['pattern_term']:.6g} total J {summ.final['total']:.6g}")
        for w in summ.warnings:
            print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def _spacing(text: str, wavelength: float) -> float:
    text = text.strip().lower()
    if text in ("half-wavelength", "half", "lambda/2"):
        return wavelength / 2.0
    if text.endswith("lambda"):
        return float(text[: -len("lambda")]) * wavelength
    return float(text)


def cmd_generate_pattern(args) -> int:
    constants = PhysicalConstants(args.freq, args.path_loss)
    lam = constants.wavelength
    try:
        amplitudes = binomial_taper(args.esla) if args.taper == "binomial" else np.ones(args.esla)
        spec = DesiredPatternSpec(
            positions=make_esla(args.esla, _spacing(args.spacing, lam)),
            amplitudes=amplitudes,
            phase_gradient=args.phase_gradient,
            path_loss_exponent=args.path_loss,
            mode=args.mode,
        )
        rho = args.rho if args.rho else [r * lam for r in args.rho_wavelengths]
        grid = desired_pattern(spec, make_grid(args.theta_count, rho), constants, 1e-3 * lam)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out = Path(args.out)
    if out.exists() and not args.force:
        raise OutputExists(f"{out}: exists (use --force)")
    out.parent.mkdir(parents=True, exist_ok=True)
    csvio.write_pattern(out, grid)
    print(f"wrote {len(grid)} samples to {out}")
    return EXIT_OK


def randomize_state(scenario: Scenario, rng: np.random.Generator) -> Swarm:
    """Random amplitudes, phases and positions for gradient checking; gains are kept."""
    s = scenario.swarm.size
    side = 2.0 * scenario.constants.wavelength
    position = rng.uniform(-side / 2, side / 2, size=(s, 2))
    return Swarm(
        rng.uniform(0.5, 1.5, size=s),
        rng.uniform(0.0, 2 * np.pi, size=s),
        scenario.swarm.gain,
        position,
        scenario.swarm.anchor,
        np.zeros((s, 2)),
    )


def gradient_errors(swarm: Swarm, scenario: Scenario, corrupt: bool = False) -> dict:
    """Relative error of each analytic gradient kind against central differences of the pattern term."""
    grid, consts, dmin = scenario.grid, scenario.constants, scenario.d_min
    g = total_gradients(swarm, grid, consts, dmin)
    g_a, g_alpha, g_r = g.g_a, g.g_alpha, g.g_r
    if corrupt:
        g_a = g_a * 1.01

    def with_(**kw):
        sw = swarm.copy()
        for k, v in kw.items():
            setattr(sw, k, v)
        return sw

    fd_a = fd_gradient(lambda x: pattern_term(with_(amplitude=x), grid, consts, dmin), swarm.amplitude)
    fd_alpha = fd_gradient(lambda x: pattern_term(with_(phase=x), grid, consts, dmin), swarm.phase)
    fd_r = fd_gradient(lambda x: pattern_term(with_(position=x), grid, consts, dmin), swarm.position)
    return {
        "amplitude": relative_error(g_a, fd_a),
        "phase": relative_error(g_alpha, fd_alpha),
        "position": relative_error(g_r, fd_r),
    }


def check_gradients(scenario: Scenario, trials: int, seed: int, randomize: bool = True, corrupt: bool = False) -> dict:
    worst = {"amplitude": 0.0, "phase": 0.0, "position": 0.0}
    for trial in range(trials):
        if randomize:
            swarm = randomize_state(scenario, np.random.default_rng([seed, trial]))
        else:
            swarm = scenario.swarm
        for kind, err in gradient_errors(swarm, scenario, corrupt).items():
            worst[kind] = max(worst[kind], err)
    return worst


def cmd_check_gradients(args) -> int:
    if args.trials < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    scenario = _load(args.scenario, args.seed)
    validate_scenario(scenario)
    worst = check_gradients(scenario, args.trials, scenario.rng_seed, not args.no_randomize, args.corrupt)
    ok = True
    for kind, err in worst.items():
        passed = err < GRADIENT_TOL
        ok &= passed
        print(f"{kind:<10} max_rel_error={err:.3e} {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_GRADIENT


def plot_data(trajectory_rows, initial, final, rho=None):
    """Build ``(polar_rows, evolution_rows)`` from run outputs.

    ``initial`` and ``final`` are ``(grid, achieved)`` pairs; only the ring at
    ``rho`` (default: the innermost ring) goes into the polar table.
    """
    if not trajectory_rows:
        raise csvio.CsvFormatError("no samples")
    g0, mag0 = initial
    g1, mag1 = final
    if len(g0) != len(g1) or not (
        np.array_equal(g0.rho, g1.rho) and np.array_equal(g0.theta, g1.theta) and np.array_equal(g0.desired, g1.desired)
    ):
        raise csvio.CsvFormatError("grid mismatch")
    ring = float(np.min(g0.rho)) if rho is None else float(rho)
    sel = np.isclose(g0.rho, ring, rtol=1e-12, atol=0.0)
    if not np.any(sel):
        raise csvio.CsvFormatError(f"no ring at rho={ring}")
    polar = list(zip(g0.theta[sel], g0.desired[sel], mag0[sel], mag1[sel]))
    evolution = [(t, m, a, alpha) for t, m, a, alpha, *_ in trajectory_rows]
    return polar, evolution


def cmd_plot_data(args) -> int:
    run_dir = Path(args.run_dir) if args.run_dir else None

    def pick(explicit, name):
        if explicit:
            return Path(explicit)
        if run_dir is None:
            raise csvio.CsvFormatError(f"need --run-dir or an explicit path for {name}")
        return run_dir / name

    traj = csvio.read_trajectory(pick(args.trajectory, "trajectory.csv"))
    initial = csvio.read_achieved(pick(args.initial, "pattern_initial.csv"))
    final = csvio.read_achieved(pick(args.final, "pattern_final.csv"))
    polar, evolution = plot_data(traj, initial, final, args.rho)
    out = Path(args.out) if args.out else (run_dir or Path("."))
    _prepare_dir(out, PLOT_OUTPUTS, args.force)
    csvio.write_table(out / "pattern_polar.csv", csvio.POLAR_COLUMNS, polar)
    csvio.write_table(out / "evolution.csv", csvio.EVOLUTION_COLUMNS, evolution)
    print(f"wrote {out / 'pattern_polar.csv'} and {out / 'evolution.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="beamflow", description="Two time-scale distributed beam pattern reconstruction")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-pattern", help="write a desired-pattern CSV from a fictitious ESLA")
    p.add_argument("--esla", type=int, default=5, metavar="N", help="number of elements")
    p.add_argument("--spacing", default="half-wavelength", help="half-wavelength, <x>lambda or meters")
    p.add_argument("--taper", choices=("binomial", "uniform"), default="binomial")
    p.add_argument("--phase-gradient", type=float, default=-np.pi / 2, help="per-element phase step (rad)")
    p.add_argument("--freq", type=float, default=40e6, help="carrier frequency (Hz)")
    p.add_argument("--path-loss", type=float, default=2.0, help="path loss exponent")
    p.add_argument("--mode", choices=(FAR_FIELD, CHANNEL_AWARE), default=FAR_FIELD)
    p.add_argument("--theta-count", type=int, default=360)
    p.add_argument("--rho", type=float, nargs="+", help="ring radii in meters")
    p.add_argument("--rho-wavelengths", type=float, nargs="+", default=[1.5, 2.0, 2.5])
    p.add_argument("--out", default="pattern.csv")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_generate_pattern)

    p = sub.add_parser("run", help="integrate one or more scenarios")
    p.add_argument("--scenario", nargs="+", help="scenario file(s); omit for the built-in reference scenario")
    p.add_argument("--out", default="run", help="output directory (one subdirectory per scenario in batch mode)")
    p.add_argument("--stride", type=int, help="snapshot every N slow steps")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel scenarios in batch mode")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check-gradients", help="compare analytic gradients with finite differences")
    p.add_argument("--scenario", help="scenario file; omit for the reference scenario")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-randomize", action="store_true", help="check only at the scenario's own state")
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check_gradients)

    p = sub.add_parser("plot-data", help="long-format CSVs for polar plots and amplitude/phase traces")
    p.add_argument("--run-dir", help="directory written by `run`")
    p.add_argument("--trajectory")
    p.add_argument("--initial", help="pattern_initial.csv")
    p.add_argument("--final", help="pattern_final.csv")
    p.add_argument("--rho", type=float, help="ring for the polar table (default: innermost)")
    p.add_argument("--out", help="output directory (default: the run directory)")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_plot_data)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print("invalid scenario:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, csvio.CsvFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
