"""Command-line front end: ``gainloss {evolve,spectrum,sweep,equilibrium}``.

Exit codes: 0 success, 2 config error, 3 unsupported model, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .dynamics import propagate_exact_log, propagate_noise_unitary
from .errors import GainLossError, UnsupportedModelError
from .experiments import OBSERVABLES, SweepConfig, find_equilibrium, sweep
from .integrator import IntegratorConfig, integrate, trajectory_from_states, write_trajectory_csv
from .serialization import dumps, encode_complex, encode_matrix
from .spectral import analyze, stationary_set

logger = logging.getLogger("gainloss")

EXIT_OK, EXIT_CONFIG, EXIT_UNSUPPORTED, EXIT_NUMERICAL = 0, 2, 3, 4


class _Exit(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` or stdout; files appear only once complete."""
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load(args) -> RunConfig:
    if not args.config:
        raise _Exit(EXIT_CONFIG, "--config is required")
    cfg = load_config(args.config)
    overrides = {}
    if args.tol_rel is not None:
        overrides["rel_tol"] = args.tol_rel
    if args.tol_abs is not None:
        overrides["abs_tol"] = args.tol_abs
    if overrides:
        data = cfg.to_json()
        data.update(overrides)
        cfg = RunConfig.from_json(data)
    return cfg


def _exact_states(cfg: RunConfig, rho0, times):
    model = cfg.model
    if model.kappa == 0:
        return [propagate_exact_log(rho0, float(t), model)[0] if t > 0 else rho0 for t in times]
    if not model.has_gain_loss:
        return [propagate_noise_unitary(rho0, float(t), model) for t in times]
    raise UnsupportedModelError("no closed-form propagator for Gamma != 0 with kappa > 0")


def cmd_evolve(args) -> int:
    cfg = _load(args)
    rho0 = cfg.initial_state()
    mode = args.mode or "numeric"
    buf = io.StringIO()
    if mode == "exact":
        times = cfg.output_times()
        if times is None:
            times = np.linspace(0.0, cfg.t_final, 101)
        traj = trajectory_from_states(times, _exact_states(cfg, rho0, times), cfg.model)
        write_trajectory_csv(traj, buf)
    else:
        traj = integrate(rho0, cfg.t_final, cfg.model, cfg.integrator_config(),
                         output_times=cfg.output_times())
        write_trajectory_csv(traj, buf)
        if mode == "both":
            exact = _exact_states(cfg, rho0, traj.times)
            dev = max(float(np.max(np.abs(a.matrix - b.matrix))) for a, b in zip(traj.states, exact))
            buf.write(f"# max_deviation_numeric_vs_exact,{dev:.17g}\n")
            logger.info("max deviation numeric vs exact: %.3e", dev)
    _write_atomic(args.output, buf.getvalue())
    return EXIT_OK


def spectrum_report(model) -> dict:
    sys_ = analyze(model.with_kappa(0.0))
    report = {
        "dim": model.dim,
        "phase": sys_.phase.value,
        "eigenvalues": [encode_complex(z) for z in sys_.eigenvalues],
        "energies": [float(x) for x in sys_.energies],
        "gammas": [float(x) for x in sys_.gammas],
        "overlap": encode_matrix(sys_.overlap),
        "condition": float(sys_.condition) if np.isfinite(sys_.condition) else None,
        "reality_tolerance": sys_.reality_tolerance,
    }
    st = stationary_set(sys_, model.with_kappa(0.0))
    report["stationary_set"] = {
        "real_eigenvalue_count": st.real_count,
        "pure_fixed_points": [encode_matrix(p.matrix) for p in st.pure_fixed_points],
        "mixed_generators": [encode_matrix(p.matrix) for p in st.mixed_generators],
    }
    return report


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    _write_atomic(args.output, dumps(spectrum_report(cfg.model)))
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    cfg = _load(args)
    if cfg.model.kappa == 0:
        raise _Exit(EXIT_UNSUPPORTED,
                    "kappa = 0 has no unique equilibrium; use `gainloss spectrum` for the stationary set")
    eq = find_equilibrium(cfg.model)
    out = {
        "rho": encode_matrix(eq.rho.matrix),
        "residual": eq.residual,
        "newton_converged": eq.newton_converged,
        "relax_time": eq.relax_time,
    }
    _write_atomic(args.output, dumps(out))
    return EXIT_OK


def _parse_kappas(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise _Exit(EXIT_CONFIG, f"bad --kappa list {text!r}") from exc
    if not vals or any(v < 0 for v in vals):
        raise _Exit(EXIT_CONFIG, "--kappa needs nonnegative values")
    return vals


def cmd_sweep(args) -> int:
    if args.points < 1:
        raise _Exit(EXIT_CONFIG, "--points must be >= 1")
    lo, hi = args.gamma_inv_min, args.gamma_inv_max
    if not (0 < lo) or (args.points > 1 and not hi > lo):
        raise _Exit(EXIT_CONFIG, "need 0 < gamma-inv-min < gamma-inv-max")
    grid = [lo] if args.points == 1 else list(np.linspace(lo, hi, args.points))
    kappas = _parse_kappas(args.kappa)
    integ = IntegratorConfig(
        rel_tol=args.tol_rel if args.tol_rel is not None else 1e-9,
        abs_tol=args.tol_abs if args.tol_abs is not None else 1e-11,
    )
    threads = args.threads if args.threads else (os.cpu_count() or 1)
    scfg = SweepConfig(T_max=args.t_max, tol=args.tol, threads=threads, seed=args.seed, integrator=integ)
    table = sweep(grid, kappas, OBSERVABLES[args.observable], scfg, observable=args.observable)
    _write_atomic(args.output, table.to_csv())
    if args.output and str(args.output) != "-":
        _write_atomic(Path(args.output).with_suffix(".meta.json"), dumps(table.metadata()))
    if all(r.error for r in table.rows):
        raise _Exit(EXIT_NUMERICAL, "every sweep point failed")
    return EXIT_OK


def _global_flags(p: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="run configuration (JSON)")
    p.add_argument("--output", "-o", default=d, help="output file (default: stdout)")
    p.add_argument("--threads", type=int, default=d, help="worker processes for sweeps")
    p.add_argument("--tol-rel", type=float, default=d, dest="tol_rel")
    p.add_argument("--tol-abs", type=float, default=d, dest="tol_abs")
    p.add_argument("-v", "--verbose", action="count", default=d if suppress else 0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gainloss", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="integrate a trajectory and write CSV")
    _global_flags(p, suppress=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--exact", dest="mode", action="store_const", const="exact")
    g.add_argument("--numeric", dest="mode", action="store_const", const="numeric")
    g.add_argument("--both", dest="mode", action="store_const", const="both")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("spectrum", help="eigenvalues, phase, and stationary states of K")
    _global_flags(p, suppress=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("sweep", help="order parameter of the two-level model over 1/gamma and kappa")
    _global_flags(p, suppress=True)
    p.add_argument("--gamma-inv-min", type=float, default=0.1)
    p.add_argument("--gamma-inv-max", type=float, default=2.0)
    p.add_argument("--points", type=int, default=39)
    p.add_argument("--kappa", default="0")
    p.add_argument("--observable", choices=sorted(OBSERVABLES), default="z")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-max", type=float, default=200.0, dest="t_max")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("equilibrium", help="equilibrium state of the noisy flow")
    _global_flags(p, suppress=True)
    p.set_defaults(func=cmd_equilibrium)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except _Exit as exc:
        print(f"gainloss: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"gainloss: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnsupportedModelError as exc:
        print(f"gainloss: unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except GainLossError as exc:
        print(f"gainloss: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
