"""Command-line front end.

Every subcommand writes its data files plus ``manifest.json`` into ``--out``.
The manifest records the normalized argument vector, so ``replay`` can rerun
the command into a scratch directory and compare output hashes.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import single_step_population, suppression_center
from .bounds import cor12_bound, thm11_reports
from .ensemble import SpectrumGenerator, StatePolicy, convergence_envelope, resolve_threads
from .errors import InvalidParameterError, NumericalError, RTKrylovError, ValidationError
from .solver import (
    GridSpec,
    RunMode,
    ivqpe_run,
    kappa_to_t1,
    lcu_cumulative,
    make_grid,
    scan,
    vqpe_run,
)
from .spectra import (
    DensityOfStates,
    SpacingDistribution,
    Spectrum,
    broadened_dos,
    dos_sampled_spectrum,
    format_spectrum,
    gapped_linear_spectrum,
    gue_matrix_spectrum,
    linear_spectrum,
    random_spacing_spectrum,
    read_spectrum,
    rescale_spectrum,
    search_spectrum,
)
from .states import basis_state, random_state, read_state, uniform_state
from .subspace import DEFAULT_SSV_REL, assemble

log = logging.getLogger("rtkrylov")

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

SPECTRUM_FAMILIES = ("linear", "gapped", "search", "spacing", "dos", "gue")
SPACING_KINDS = ("bernoulli", "uniform", "exponential", "wigner")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidParameterError(f"{self.prog}: {message}")


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# --------------------------------------------------------------------------
# shared argument groups


def _add_spectrum_args(p: argparse.ArgumentParser, positional: bool = False) -> None:
    if positional:
        p.add_argument("family", choices=SPECTRUM_FAMILIES)
    else:
        p.add_argument("--spectrum", default="linear", help=f"one of {', '.join(SPECTRUM_FAMILIES)} or a spectrum file")
    p.add_argument("--q", type=int, default=1000, help="number of levels")
    p.add_argument("--de", type=float, default=1.0, help="level spacing of linear families")
    p.add_argument("--eps12", type=float, default=0.0, help="excess ground-state gap (gapped family)")
    p.add_argument("--e1", type=float, default=None, help="ground energy")
    p.add_argument("--e2", type=float, default=1.0, help="excited energy (search family)")
    p.add_argument("--kind", default="exponential", help="spacing law or DOS shape")
    p.add_argument("--d", type=float, default=1.0, help="mean spacing")
    p.add_argument("--a", type=float, default=None, help="spacing shape parameter")
    p.add_argument("--sigma", type=float, default=1.0, help="Gaussian DOS width")
    p.add_argument("--radius", type=float, default=2.0, help="semicircle radius")
    p.add_argument("--lo", type=float, default=0.0, help="flat DOS lower edge")
    p.add_argument("--hi", type=float, default=1.0, help="flat DOS upper edge")
    p.add_argument("--no-rescale", action="store_true", help="keep raw GUE/DOS energies")
    p.add_argument("--seed", "--spectrum-seed", dest="spectrum_seed", type=int, default=0, help="seed for random spectra")


def _add_state_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--state", default="uniform", help="uniform, basis, random or a state file")
    p.add_argument("--basis-index", type=int, default=1)
    p.add_argument("--state-seed", type=int, default=None, help="seed for --state random (default: --seed)")


def _add_grid_args(p: argparse.ArgumentParser, nt_default: int = 10) -> None:
    p.add_argument("--grid", choices=("linear", "adaptive"), default="linear")
    p.add_argument("--t1", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None, help="t1 dE = kappa 2 pi / Q")
    p.add_argument("--gamma", type=float, default=2.0, help="adaptive grid ratio")
    p.add_argument("--nt", type=int, default=nt_default)


def _dos_from(args) -> DensityOfStates:
    kind = args.kind
    if kind == "flat":
        return DensityOfStates.flat(args.q, args.lo, args.hi)
    if kind == "semicircle":
        return DensityOfStates.semicircle(args.q, args.radius)
    if kind == "gaussian":
        return DensityOfStates.gaussian(args.q, args.sigma)
    raise InvalidParameterError(f"unknown DOS kind {kind!r} (flat, semicircle, gaussian)")


def _spacing_from(args) -> SpacingDistribution:
    if args.kind not in SPACING_KINDS:
        raise InvalidParameterError(f"unknown spacing kind {args.kind!r} ({', '.join(SPACING_KINDS)})")
    return SpacingDistribution(args.kind, args.d, args.a)


def build_spectrum(family: str, args) -> Spectrum:
    e1 = args.e1
    if family == "linear":
        return linear_spectrum(args.q, args.de)
    if family == "gapped":
        return gapped_linear_spectrum(args.q, args.de, args.eps12)
    if family == "search":
        return search_spectrum(args.q, 0.0 if e1 is None else e1, args.e2)
    if family == "spacing":
        return random_spacing_spectrum(args.q, 1.0 if e1 is None else e1, _spacing_from(args), args.spectrum_seed)
    if family == "dos":
        spec = dos_sampled_spectrum(args.q, _dos_from(args), args.spectrum_seed)
    elif family == "gue":
        spec = gue_matrix_spectrum(args.q, args.spectrum_seed)
    else:
        path = Path(family)
        if not path.is_file():
            raise InvalidParameterError(f"{family!r} is neither a spectrum family nor a readable file")
        return read_spectrum(path)
    if args.no_rescale:
        return spec
    return rescale_spectrum(spec, 1.0 if e1 is None else e1, args.d)


def build_state(args, Q: int):
    if args.state == "uniform":
        return uniform_state(Q)
    if args.state == "basis":
        return basis_state(Q, args.basis_index)
    if args.state == "random":
        return random_state(Q, _state_seed(args))
    path = Path(args.state)
    if not path.is_file():
        raise InvalidParameterError(f"{args.state!r} is neither a state policy nor a readable file")
    return read_state(path)


def build_grid(args, spec: Spectrum) -> GridSpec:
    if args.nt < 1:
        raise InvalidParameterError(f"--nt must be >= 1, got {args.nt}")
    if (args.t1 is None) == (args.kappa is None):
        raise InvalidParameterError("give exactly one of --t1 and --kappa")
    t1 = args.t1 if args.t1 is not None else kappa_to_t1(args.kappa, spec)
    if args.grid == "linear":
        return GridSpec.linear(t1, args.nt)
    return GridSpec.adaptive(t1, args.nt, args.gamma)


# --------------------------------------------------------------------------
# subcommands; each returns (output files, seeds)


def cmd_spectrum(args, out: Path):
    spec = build_spectrum(args.family, args)
    path = out / "spectrum.txt"
    path.write_text(format_spectrum(spec, header=f"{args.family} spectrum, Q={spec.Q}"), encoding="utf-8")
    return [path], {"spectrum_seed": args.spectrum_seed}


def cmd_run(args, out: Path):
    spec = build_spectrum(args.spectrum, args)
    state = build_state(args, spec.Q)
    grid = build_grid(args, spec)
    mode = RunMode(args.mode)
    if mode is RunMode.VQPE:
        trace = vqpe_run(spec, state, grid, args.eps_tol, args.ssv_rel, relative=args.relative)
    else:
        trace = ivqpe_run(spec, state, grid, args.ni, args.eps_tol, args.ssv_rel, relative=args.relative)
    path = out / "trace.csv"
    write_csv(
        path,
        ["step", "t_j", "E_g", "delta_E1", "retained_rank"],
        [(s.j, s.t_j, s.E_g, s.delta_E1, s.retained_rank) for s in trace.steps],
    )
    summary = out / "run.json"
    write_json(
        summary,
        {
            "status": trace.status.value,
            "final_delta_E1": trace.final.delta_E1,
            "steps": len(trace.steps) - 1,
            "t1": grid.t1,
            "mode": mode.value,
        },
    )
    return [path, summary], _seeds(args)


def _state_seed(args) -> int:
    return args.spectrum_seed if args.state_seed is None else args.state_seed


def _seeds(args) -> dict:
    return {"spectrum_seed": args.spectrum_seed, "state_seed": _state_seed(args)}


def _range(lo: float, hi: float, num: int) -> np.ndarray:
    if num < 1:
        raise InvalidParameterError(f"range needs at least one point, got {num}")
    return np.linspace(lo, hi, num) if num > 1 else np.array([lo])


def cmd_scan(args, out: Path):
    spec = build_spectrum(args.spectrum, args)
    state = build_state(args, spec.Q)
    kappas = _range(args.kappa_min, args.kappa_max, args.kappa_num)
    gammas = _range(args.gamma_min, args.gamma_max, args.gamma_num)
    if args.nt < 1:
        raise InvalidParameterError(f"--nt must be >= 1, got {args.nt}")
    res = scan(spec, state, kappas, gammas, args.nt, args.mode, N_I=args.ni, s_sv_rel=args.ssv_rel, threads=resolve_threads(args.threads))
    path = out / "scan.csv"
    rows = [(k, g, res.errors[i, j]) for i, k in enumerate(kappas) for j, g in enumerate(gammas)]
    write_csv(path, ["kappa", "gamma", "delta_E1"], rows)
    best = out / "scan_best.json"
    k, g = res.best
    write_json(best, {"kappa": k, "gamma": g, "delta_E1": res.minimum, "mode": res.mode.value})
    return [path, best], _seeds(args)


def cmd_bounds(args, out: Path):
    spec = build_spectrum(args.spectrum, args)
    state = build_state(args, spec.Q)
    dt = "auto" if args.dt == "auto" else float(args.dt)
    if args.jmax < 1:
        raise InvalidParameterError(f"--jmax must be >= 1, got {args.jmax}")
    if args.n == 1:
        reports = thm11_reports(spec, state, dt, args.jmax, args.ssv_rel)
    else:
        reports = [cor12_bound(spec, state, dt, args.n, j, None, args.ssv_rel) for j in range(args.n, args.jmax + 1)]
    path = out / "bounds.json"
    write_json(path, [{k: (bool(v) if k == "satisfied" else v) for k, v in r.to_dict().items()} for r in reports])
    return [path], _seeds(args)


def _generator(args) -> SpectrumGenerator:
    e1 = 1.0 if args.e1 is None else args.e1
    if args.kind in SPACING_KINDS:
        return SpectrumGenerator.spacing(args.q, _spacing_from(args), e1)
    if args.kind == "gue":
        return SpectrumGenerator.gue(args.q, e1, args.d)
    if args.kind in ("semicircle", "gaussian", "flat"):
        return SpectrumGenerator.from_dos(args.q, _dos_from(args), e1, args.d)
    raise InvalidParameterError(f"unknown ensemble kind {args.kind!r}")


def cmd_envelope(args, out: Path):
    gen = _generator(args)
    if args.realizations < 1:
        raise InvalidParameterError(f"--realizations must be >= 1, got {args.realizations}")
    if args.nt < 1:
        raise InvalidParameterError(f"--nt must be >= 1, got {args.nt}")
    if args.grid == "linear":
        grid = GridSpec.linear(1.0, args.nt)
    else:
        grid = GridSpec.adaptive(1.0, args.nt, args.gamma)
    env = convergence_envelope(
        gen,
        grid,
        args.realizations,
        args.seed,
        args.state_policy,
        kappa=args.kappa,
        s_sv_rel=args.ssv_rel,
        threads=resolve_threads(args.threads),
    )
    path = out / "envelope.csv"
    write_csv(
        path,
        ["step", "min", "max", "mean", "std", "benchmark"],
        zip(env.steps, env.min, env.max, env.mean, env.std, env.benchmark),
    )
    summary = out / "envelope.json"
    write_json(
        summary,
        {
            "generator": gen.describe(),
            "realizations": env.realizations,
            "failures": env.failures,
            "failure_messages": list(env.failure_messages),
            "benchmark_contained": bool(np.all(env.contains_benchmark())),
        },
    )
    return [path, summary], {"seed": args.seed}


def cmd_lcu(args, out: Path):
    spec = build_spectrum(args.spectrum, args)
    state = build_state(args, spec.Q)
    grid = build_grid(args, spec)
    ex = args.ex if args.ex in ("center", "node") else _float_arg("--ex", args.ex)
    probs, total = lcu_cumulative(state, spec, grid, ex)
    steps = make_grid(grid).steps
    path = out / "lcu.csv"
    write_csv(path, ["step", "dt", "probability", "cumulative"], zip(range(1, len(probs) + 1), steps, probs, np.cumprod(probs)))
    return [path], _seeds(args)


def _float_arg(name: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise InvalidParameterError(f"{name} expects a number or a policy name, got {value!r}") from None


def cmd_broaden(args, out: Path):
    spec = build_spectrum(args.spectrum, args)
    hist = broadened_dos(spec, args.strength, args.realizations, args.bins, args.noise_seed, args.order)
    path = out / "broaden.csv"
    write_csv(
        path,
        ["left", "right", "count", "density"],
        zip(hist.edges[:-1], hist.edges[1:], hist.counts, hist.density),
    )
    return [path], {"noise_seed": args.noise_seed, "spectrum_seed": args.spectrum_seed}


def cmd_population(args, out: Path):
    spec = build_spectrum(args.spectrum, args)
    state = build_state(args, spec.Q)
    if (args.t1 is None) == (args.kappa is None):
        raise InvalidParameterError("give exactly one of --t1 and --kappa")
    t1 = args.t1 if args.t1 is not None else kappa_to_t1(args.kappa, spec)
    p = single_step_population(spec, state, t1)
    path = out / "population.csv"
    write_csv(path, ["n", "E_n", "p_n"], zip(range(1, spec.Q + 1), spec.energies, p))
    summary = out / "population.json"
    doc = {"t1": t1, "argmin_n": int(np.argmin(p)) + 1}
    try:
        doc["suppression_center"] = suppression_center(spec, state)
    except NumericalError as exc:
        doc["suppression_center"] = None
        doc["suppression_note"] = str(exc)
    write_json(summary, doc)
    return [path, summary], _seeds(args)


def cmd_matrices(args, out: Path):
    spec = build_spectrum(args.spectrum, args)
    state = build_state(args, spec.Q)
    grid = make_grid(build_grid(args, spec))
    path = out / "matrices.json"
    path.write_text(assemble(spec, state, grid).to_json(args.ssv_rel) + "\n", encoding="utf-8")
    return [path], _seeds(args)


COMMANDS = {
    "spectrum": cmd_spectrum,
    "run": cmd_run,
    "scan": cmd_scan,
    "bounds": cmd_bounds,
    "envelope": cmd_envelope,
    "lcu": cmd_lcu,
    "broaden": cmd_broaden,
    "population": cmd_population,
    "matrices": cmd_matrices,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rtkrylov", description="Real-time Krylov subspace experiments on model spectra.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--ssv-rel", type=float, default=DEFAULT_SSV_REL)
        p.add_argument("--threads", type=int, default=None, help="worker cap (default: RTKRYLOV_THREADS or 1)")

    p = sub.add_parser("spectrum", help="write a model spectrum")
    _add_spectrum_args(p, positional=True)
    common(p)

    p = sub.add_parser("run", help="ground-state run, one row per step")
    _add_spectrum_args(p)
    _add_state_args(p)
    _add_grid_args(p)
    p.add_argument("--mode", choices=[m.value for m in RunMode], default="vqpe")
    p.add_argument("--ni", type=int, default=1, help="sub-steps per iterative step")
    p.add_argument("--eps-tol", type=float, default=0.0)
    p.add_argument("--relative", action="store_true", help="relative convergence test")
    common(p)

    p = sub.add_parser("scan", help="final error over a (kappa, gamma) grid")
    _add_spectrum_args(p)
    _add_state_args(p)
    p.add_argument("--kappa-min", type=float, default=0.075)
    p.add_argument("--kappa-max", type=float, default=1.5)
    p.add_argument("--kappa-num", type=int, default=20)
    p.add_argument("--gamma-min", type=float, default=0.5)
    p.add_argument("--gamma-max", type=float, default=2.5)
    p.add_argument("--gamma-num", type=int, default=20)
    p.add_argument("--nt", type=int, default=10)
    p.add_argument("--mode", choices=[m.value for m in RunMode], default="vqpe")
    p.add_argument("--ni", type=int, default=1)
    common(p)

    p = sub.add_parser("bounds", help="a-priori error bounds against measured errors")
    _add_spectrum_args(p)
    _add_state_args(p)
    p.add_argument("--dt", default="auto")
    p.add_argument("--jmax", type=int, default=10)
    p.add_argument("--n", type=int, default=1, help="target level (1 = ground state)")
    common(p)

    p = sub.add_parser("envelope", help="convergence envelope over random spectra")
    p.add_argument("--kind", default="exponential", help="spacing law, semicircle, gaussian, flat or gue")
    p.add_argument("--q", type=int, default=1000)
    p.add_argument("--d", type=float, default=1.0)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--e1", type=float, default=None)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--radius", type=float, default=2.0)
    p.add_argument("--lo", type=float, default=0.0)
    p.add_argument("--hi", type=float, default=1.0)
    p.add_argument("--realizations", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kappa", type=float, default=0.4)
    p.add_argument("--grid", choices=("linear", "adaptive"), default="linear")
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--nt", type=int, default=10)
    p.add_argument("--state-policy", choices=[s.value for s in StatePolicy], default="uniform")
    common(p)

    p = sub.add_parser("lcu", help="LCU post-selection probabilities per step")
    _add_spectrum_args(p)
    _add_state_args(p)
    _add_grid_args(p, nt_default=5)
    p.add_argument("--ex", default="center", help="center, node or an energy")
    common(p)

    p = sub.add_parser("broaden", help="noise-broadened density of states")
    _add_spectrum_args(p)
    p.add_argument("--strength", type=float, default=1.0)
    p.add_argument("--realizations", type=int, default=1000)
    p.add_argument("--bins", type=int, default=200)
    p.add_argument("--order", choices=("first", "second"), default="first")
    p.add_argument("--noise-seed", type=int, default=0, help="seed for the perturbation draws")
    common(p)

    p = sub.add_parser("population", help="single-step eigenstate populations")
    _add_spectrum_args(p)
    _add_state_args(p)
    p.add_argument("--t1", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None)
    common(p)

    p = sub.add_parser("matrices", help="dump the subspace matrices as JSON")
    _add_spectrum_args(p)
    _add_state_args(p)
    _add_grid_args(p)
    common(p)

    p = sub.add_parser("replay", help="rerun a manifest and compare outputs byte for byte")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, default=None, help="where to write the rerun (default: a temporary directory)")
    return parser


def _strip_out(argv: list[str]) -> list[str]:
    """Drop ``--out`` so a manifest can be replayed anywhere."""
    clean, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--out":
            skip = True
            continue
        if tok.startswith("--out="):
            continue
        clean.append(tok)
    return clean


def _params(args) -> dict:
    skip = {"out", "func", "verbose"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k not in skip}


def execute(argv: list[str]) -> dict:
    """Parse and run one non-replay command; returns the manifest it wrote."""
    args = build_parser().parse_args(argv)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    files, seeds = COMMANDS[args.command](args, out)
    manifest = {
        "command": args.command,
        "argv": _strip_out(argv),
        "params": _params(args),
        "seeds": seeds,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "outputs": [{"path": f.name, "sha256": sha256(f)} for f in files],
    }
    write_json(out / "manifest.json", manifest)
    return manifest


def replay(manifest_path: Path, out: Path | None = None) -> dict:
    """Rerun a manifest; returns ``{file: identical}``."""
    try:
        manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
        argv = list(manifest["argv"])
        expected = {o["path"]: o["sha256"] for o in manifest["outputs"]}
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InvalidParameterError(f"unreadable manifest {manifest_path}: {exc}") from None
    if out is None:
        with tempfile.TemporaryDirectory() as tmp:
            return _replay_into(argv, expected, Path(tmp))
    return _replay_into(argv, expected, out)


def _replay_into(argv, expected, out: Path) -> dict:
    got = execute(argv + ["--out", str(out)])
    hashes = {o["path"]: o["sha256"] for o in got["outputs"]}
    return {name: hashes.get(name) == digest for name, digest in expected.items()}


def _error(exc: Exception, code: int) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(doc), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO if "-v" in argv or "--verbose" in argv else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    argv = [a for a in argv if a not in ("-v", "--verbose")]
    try:
        if argv and argv[0] == "replay":
            args = build_parser().parse_args(argv)
            result = replay(args.manifest, args.out)
            print(json.dumps({"identical": all(result.values()), "files": result}, sort_keys=True))
            return 0 if all(result.values()) else 1
        manifest = execute(argv)
        print(json.dumps({"command": manifest["command"], "outputs": [o["path"] for o in manifest["outputs"]]}))
        return 0
    except ValidationError as exc:
        return _error(exc, EXIT_VALIDATION)
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return _error(exc, EXIT_NUMERICAL)
    except OSError as exc:
        return _error(exc, EXIT_VALIDATION)
    except RTKrylovError as exc:
        return _error(exc, EXIT_NUMERICAL)


if __name__ == "__main__":
    sys.exit(main())
