"""Command line front end: ``valleywalk <group> <action> [flags]``.

Every command produces one payload (JSON or CSV). With ``--out`` the
payload is written to that path and a run manifest to
``<out>.manifest.json``; otherwise it goes to stdout. ``replay`` re-runs a
manifest from its recorded parameters and compares payload digests.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    check_confinement,
    check_exit_bounds,
    lem3_check,
    prop1_certificate,
    staircase_environment,
)
from .config import read_kv_file
from .diagnostics import ahat_density, exponent_histogram, partial_sums
from .env_model import DEFAULT_LAW, Environment, SiteLaw, sample_environment, validate_law
from .errors import (
    ArgumentError,
    BudgetExceededError,
    IncompatibleManifestError,
    InsufficientDataError,
    PreconditionError,
    RangeError,
    WindowExhaustedError,
)
from .exact_kernel import hitting_prob_formula, hitting_prob_solve, return_series
from .montecarlo import SimSpec, compare_exact, simulate, simulate_jumps, tau_increment_stats
from .potential import compute_potential, find_valleys

SCHEMA_VERSION = 1
EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_PRECONDITION = 0, 1, 2, 3
# flags that steer where or how fast a run happens but never what it computes
_NON_PARAMETERS = {"out", "config", "workers", "handler", "command"}


@dataclass
class Payload:
    text: str
    fmt: str
    law: dict | None = None
    seeds: list = field(default_factory=list)
    exit_code: int = EXIT_OK


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_payload(kind: str, body: dict, **meta) -> Payload:
    return Payload(dumps({"schema_version": SCHEMA_VERSION, "kind": kind, **body}), "json", **meta)


def _csv_payload(header, rows, **meta) -> Payload:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return Payload(buf.getvalue(), "csv", **meta)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# ---------------------------------------------------------------------------
# environment sources


def _law(args) -> SiteLaw:
    return SiteLaw.parse(args.atoms, epsilon=args.epsilon)


def _environment(args, lo: int, hi: int) -> Environment:
    """Environment covering ``[lo, hi]`` from ``--env``, ``--omega-const``, ``--staircase`` or the law."""
    if args.env is not None:
        return Environment.load(args.env)
    if args.omega_const is not None:
        if not (0.0 < args.omega_const < 1.0):
            raise ArgumentError(f"--omega-const must lie in (0, 1), got {args.omega_const}")
        return Environment.constant(args.omega_const, lo, hi)
    if args.staircase is not None:
        try:
            L, delta = (float(v) for v in args.staircase.split(":"))
        except ValueError:
            raise ArgumentError(f"--staircase expects L:delta, got {args.staircase!r}") from None
        return staircase_environment(L, delta)
    return sample_environment(_law(args), lo, hi, args.seed)


def _env_meta(args) -> dict:
    if args.env is not None or args.omega_const is not None or args.staircase is not None:
        return {"law": None, "seeds": []}
    return {"law": _law(args).to_dict(), "seeds": [args.seed]}


def _add_law_args(p):
    p.add_argument("--atoms", default=DEFAULT_LAW_TEXT, help="law as value:weight,... (default %(default)s)")
    p.add_argument("--epsilon", type=float, default=None, help="ellipticity bound; defaults to the law's own")


def _add_env_args(p):
    _add_law_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--omega-const", type=float, default=None, help="constant environment instead of the law")
    p.add_argument("--staircase", default=None, help="deterministic valley fixture L:delta")
    p.add_argument("--env", default=None, help="environment JSON file written by 'env sample'")


DEFAULT_LAW_TEXT = ",".join(f"{v!r}:{w!r}" for v, w in DEFAULT_LAW.atoms)


# ---------------------------------------------------------------------------
# handlers


def cmd_law_validate(args) -> Payload:
    law = _law(args)
    report = validate_law(law)
    return _json_payload("law_report", {"law": law.to_dict(), "law_id": law.law_id, "report": report.to_dict()},
                         law=law.to_dict(), exit_code=EXIT_OK if report.ok else EXIT_PRECONDITION)


def cmd_env_sample(args) -> Payload:
    if args.hi < args.lo:
        raise ArgumentError("--hi must be >= --lo")
    law = _law(args)
    env = sample_environment(law, args.lo, args.hi, args.seed)
    return _json_payload("environment", env.to_dict(), law=law.to_dict(), seeds=[args.seed])


def cmd_valley_scan(args) -> Payload:
    law = _law(args)
    seeds = list(range(args.seed_start, args.seed_start + args.seeds))
    records = []
    for seed in seeds:
        records += [r.to_dict() for r in find_valleys(law, seed, args.delta, args.L, args.site_budget)]
    hits = sum(r["status"] == "hit" for r in records)
    return _json_payload("valley_scan", {"law": law.to_dict(), "records": records, "hits": hits},
                         law=law.to_dict(), seeds=seeds)


def cmd_kernel_return_series(args) -> Payload:
    if args.N < 1:
        raise ArgumentError("--N must be positive")
    env = _environment(args, -2 * args.N, 2 * args.N)
    series = return_series(env, args.N, slack_tol=args.slack_tol)
    return _csv_payload(["n", "p_lower", "p_upper"], series.rows(), **_env_meta(args))


def cmd_kernel_hit(args) -> Payload:
    x, y, z = args.x, args.y, args.z
    if not (x < y < z):
        raise ArgumentError(f"need x < y < z, got {x}, {y}, {z}")
    env = _environment(args, x, z)
    formula = hitting_prob_formula(compute_potential(env), x, y, z)
    solve = hitting_prob_solve(env, x, y, z)
    rel = abs(formula - solve) / max(abs(solve), np.finfo(float).tiny)
    return _json_payload("hitting_probability",
                         {"x": x, "y": y, "z": z, "formula": formula, "solve": solve, "rel_diff": rel},
                         **_env_meta(args))


SUITE_DEFAULTS = {
    "prop1": dict(L=30.0, delta=0.1, stair=4, landing=10, bottom=10, extra=6),
    "lem3": dict(L=4.0, delta=0.45, stair=2, landing=1, bottom=1, extra=2),
}


def _exit_instance(seed: int) -> tuple[int, int, int, int]:
    g = np.random.default_rng([seed, 2])
    return -int(g.integers(2, 31)), 0, int(g.integers(2, 31)), int(g.integers(1, 201))


def _confinement_instance(seed: int) -> tuple[int, int, int]:
    g = np.random.default_rng([seed, 4])
    return -int(g.integers(1, 41)), 0, int(g.integers(1, 41))


def cmd_bounds_check(args) -> Payload:
    suite = args.suite
    law = _law(args)
    if suite in ("prel2", "prel3", "prel4"):
        seeds = list(range(args.seed_start, args.seed_start + args.instances))
        reports = []
        for seed in seeds:
            if suite == "prel4":
                x, y, z = _confinement_instance(seed)
                env = sample_environment(law, x, z, seed)
                reports.append(check_confinement(env, x, y, z))
            else:
                x, y, z, k = _exit_instance(seed)
                env = sample_environment(law, x, z, seed)
                right, left = check_exit_bounds(env, y, z, k, x)
                reports.append(right if suite == "prel2" else left)
        body = [dict(r.to_dict(), seed=s) for r, s in zip(reports, seeds)]
        return _json_payload("bound_reports", {"suite": suite, "reports": body,
                                               "all_hold": all(r.holds for r in reports)},
                             law=law.to_dict(), seeds=seeds)

    geo = {k: (getattr(args, k) if getattr(args, k) is not None else v)
           for k, v in SUITE_DEFAULTS[suite].items()}
    env = staircase_environment(geo["L"], geo["delta"], geo["stair"], geo["landing"],
                                geo["bottom"], geo["extra"])
    if suite == "prop1":
        cert = prop1_certificate(env, geo["L"], geo["delta"], args.n)
        return _json_payload("prop1_certificate", {"suite": suite, "fixture": env.label, **geo,
                                                    "certificate": cert.to_dict()})
    reports = lem3_check(env, geo["L"], geo["delta"], args.ell_max)
    margins = [r.log_margin for r in reports if r.log_margin is not None]
    return _json_payload("bound_reports", {"suite": suite, "fixture": env.label, **geo,
                                           "reports": [r.to_dict() for r in reports],
                                           "min_log_margin": min(margins) if margins else None,
                                           "all_hold": all(r.holds for r in reports)})


def cmd_diverge(args) -> Payload:
    if args.N < 1:
        raise ArgumentError("--N must be positive")
    if args.mode == "product":
        base = args.seed
        series = []
        for k in range(args.d):
            args.seed = base + k
            series.append(return_series(_environment(args, -2 * args.N, 2 * args.N), args.N))
        args.seed = base
        meta = _env_meta(args)
        meta["seeds"] = [base + k for k in range(args.d)] if meta["law"] else []
    else:
        series = return_series(_environment(args, -2 * args.N, 2 * args.N), args.N)
        meta = _env_meta(args)
    report = partial_sums(series, args.mode, args.alpha)
    stride = max(1, args.stride)
    rows = [(n, s) for n, s in report.rows() if n % stride == 0 or n == report.N]
    return _csv_payload(["N", "S_N"], rows, **meta)


def _grid(text: str) -> np.ndarray:
    try:
        a, b, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ArgumentError(f"--grid expects start:stop:step, got {text!r}") from None
    if step <= 0 or b < a:
        raise ArgumentError("--grid needs step > 0 and stop >= start")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return np.round(a + step * np.arange(count), 12)


def cmd_density_ahat(args) -> Payload:
    z = _grid(args.grid)
    if np.any(z < 0):
        raise ArgumentError("density grid must be nonnegative")
    return _csv_payload(["z", "p"], [(float(v), ahat_density(float(v))) for v in z])


def cmd_density_histogram(args) -> Payload:
    law = _law(args)
    seeds = list(range(args.seed_start, args.seed_start + args.seeds))
    rows = exponent_histogram(law, seeds, args.N, args.bins, args.z_max)
    return _csv_payload(["bin_lo", "bin_hi", "empirical", "reference"], rows,
                        law=law.to_dict(), seeds=seeds)


def cmd_simulate(args) -> Payload:
    law = _law(args)
    spec = SimSpec(args.mode, args.horizon, args.replicas, args.seed, d=args.d, law=law,
                   delta_mix=args.delta_mix, env_seed=args.env_seed,
                   checkpoints=tuple(args.checkpoints) if args.checkpoints else None)
    body = {"spec": spec.to_dict()}
    if args.jumps:
        trace = simulate_jumps(spec, args.jumps)
        body["tau"] = tau_increment_stats(trace, args.parity_n).to_dict()
    else:
        result = simulate(spec, workers=args.workers).to_dict()
        result.pop("spec", None)   # already at the top level
        body["result"] = result
        if args.compare_exact:
            body["compare_exact"] = compare_exact(spec, workers=args.workers).to_dict()
    return _json_payload("simulation", body, law=law.to_dict(),
                         seeds=[args.seed] + spec.environment_seeds())


# ---------------------------------------------------------------------------
# parser


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="valleywalk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    groups = parser.add_subparsers(dest="group", required=True)
    leaves: dict[tuple[str, ...], argparse.ArgumentParser] = {}

    def leaf(group_parser, path, name, handler, help_text):
        p = group_parser.add_parser(name, help=help_text)
        p.set_defaults(handler=handler, command=list(path))
        p.add_argument("--out", default=None, help="write the payload here and a manifest next to it")
        p.add_argument("--config", default=None, help="key=value file supplying flag defaults")
        leaves[tuple(path)] = p
        return p

    def group(name, help_text):
        g = groups.add_parser(name, help=help_text)
        return g.add_subparsers(dest="action", required=True)

    law = group("law", "site laws")
    _add_law_args(leaf(law, ("law", "validate"), "validate", cmd_law_validate, "check recurrence conditions"))

    env = group("env", "environments")
    p = leaf(env, ("env", "sample"), "sample", cmd_env_sample, "sample omega on a window")
    _add_law_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lo", type=int, default=-100)
    p.add_argument("--hi", type=int, default=100)

    valley = group("valley", "valley search")
    p = leaf(valley, ("valley", "scan"), "scan", cmd_valley_scan, "Gamma(L, delta) membership per seed and level")
    _add_law_args(p)
    p.add_argument("--delta", type=float, required=False, default=0.5)
    p.add_argument("--L", type=_float_list, default="5,10,15,20")
    p.add_argument("--seeds", type=int, default=50, help="number of seeds")
    p.add_argument("--seed-start", type=int, default=0)
    p.add_argument("--site-budget", type=int, default=1_000_000, help="max sites per side")

    kernel = group("kernel", "exact kernels")
    p = leaf(kernel, ("kernel", "return-series"), "return-series", cmd_kernel_return_series,
             "exact P(X_2n = 0) bracket")
    _add_env_args(p)
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--slack-tol", type=float, default=0.0)
    p = leaf(kernel, ("kernel", "hit"), "hit", cmd_kernel_hit, "P^y(tau(z) < tau(x)), formula and solve")
    _add_env_args(p)
    p.add_argument("--x", type=int, required=True)
    p.add_argument("--y", type=int, required=True)
    p.add_argument("--z", type=int, required=True)

    bounds = group("bounds", "inequality checks")
    p = leaf(bounds, ("bounds", "check"), "check", cmd_bounds_check, "run one inequality suite")
    _add_law_args(p)
    p.add_argument("--suite", choices=["prel2", "prel3", "prel4", "prop1", "lem3"], required=True)
    p.add_argument("--instances", type=int, default=100, help="random instances for prel2/3/4")
    p.add_argument("--seed-start", type=int, default=0)
    p.add_argument("--L", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    for name in ("stair", "landing", "bottom", "extra"):
        p.add_argument(f"--{name}", type=int, default=None, help="staircase fixture geometry")
    p.add_argument("--n", type=_int_list, default="8200,20000,50000", help="prop1 sample times")
    p.add_argument("--ell-max", type=int, default=2000)

    p = leaf(groups, ("diverge",), "diverge", cmd_diverge, "partial sums of return-probability series")
    _add_env_args(p)
    p.add_argument("--mode", choices=["weighted", "power", "product"], default="weighted")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--d", type=int, default=2, help="number of independent series for product mode")
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--stride", type=int, default=1, help="emit every stride-th partial sum")

    density = group("density", "limit law of the return exponent")
    p = leaf(density, ("density", "ahat"), "ahat", cmd_density_ahat, "tabulate the limit density")
    p.add_argument("--grid", default="0.05:20:0.05", help="start:stop:step")
    p = leaf(density, ("density", "histogram"), "histogram", cmd_density_histogram,
             "empirical exponents across environments")
    _add_law_args(p)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--seed-start", type=int, default=0)
    p.add_argument("--N", type=int, default=2000)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--z-max", type=float, default=4.0)

    p = leaf(groups, ("simulate",), "simulate", cmd_simulate, "Monte Carlo of multidimensional walks")
    _add_law_args(p)
    p.add_argument("--mode", choices=["shared_env", "iid_envs", "rwre_times_srw", "lazy_mixture", "simple"],
                   default="shared_env")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--horizon", type=int, default=40)
    p.add_argument("--replicas", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--env-seed", type=int, default=None)
    p.add_argument("--delta-mix", type=float, default=None)
    p.add_argument("--checkpoints", type=_int_list, default=None)
    p.add_argument("--compare-exact", action="store_true")
    p.add_argument("--jumps", type=int, default=0, help="lazy_mixture: record this many jump times")
    p.add_argument("--parity-n", type=_int_list, default="1000")
    p.add_argument("--workers", type=int, default=1)

    p = groups.add_parser("replay", help="re-run a manifest and compare digests")
    p.add_argument("manifest")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=None, command=["replay"])
    return parser, leaves


def _apply_config(parser, leaves, argv, args):
    """Re-parse with the config file's values installed as defaults, so flags still win."""
    cfg = read_kv_file(args.config)
    p = leaves[tuple(args.command)]
    actions = {a.dest: a for a in p._actions}
    defaults = {}
    for key, value in cfg.items():
        action = actions.get(key)
        if action is None or key in ("out", "config", "help"):
            raise ArgumentError(f"{args.config}: unknown key {key!r} for {' '.join(args.command)}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = value
    p.set_defaults(**defaults)
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# manifests


def sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def parameters(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NON_PARAMETERS and k != "group" and k != "action"}


def build_manifest(args, argv, payload: Payload, started: str, finished: str, out: Path) -> dict:
    digest = sha256(payload.text)
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "valleywalk",
        "tool_version": __version__,
        "argv": list(argv),
        "command": list(args.command),
        "parameters": parameters(args),
        "workers": getattr(args, "workers", 1),
        "law": payload.law,
        "seeds": payload.seeds,
        "started_at": started,
        "finished_at": finished,
        "outputs": [{"file": out.name, "format": payload.fmt, "sha256": digest}],
        "payload_sha256": digest,
    }


def _emit(payload: Payload, out: str | None, manifest: dict | None = None) -> None:
    if out is None:
        sys.stdout.write(payload.text)
        return
    path = Path(out)
    path.write_text(payload.text)
    if manifest is not None:
        Path(str(path) + ".manifest.json").write_text(dumps(manifest))


def _run(args, argv) -> int:
    started = _now()
    payload = args.handler(args)
    finished = _now()
    manifest = None
    if args.out is not None:
        manifest = build_manifest(args, argv, payload, started, finished, Path(args.out))
    _emit(payload, args.out, manifest)
    return payload.exit_code


def replay(manifest_path, workers: int = 1, out: str | None = None) -> tuple[bool, dict]:
    """Re-execute a recorded run. Returns ``(digests match, report)``."""
    try:
        manifest = json.loads(Path(manifest_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ArgumentError(f"cannot read manifest {manifest_path}: {exc}") from None
    version = manifest.get("schema_version")
    if version != SCHEMA_VERSION:
        raise IncompatibleManifestError(
            f"manifest schema_version {version!r} is not supported (expected {SCHEMA_VERSION})"
        )
    parser, leaves = build_parser()
    command = tuple(manifest.get("command", ()))
    if command not in leaves:
        raise IncompatibleManifestError(f"manifest names unknown command {list(command)}")
    handler = leaves[command].get_default("handler")
    ns = argparse.Namespace(**manifest["parameters"], command=list(command), workers=workers, out=out,
                            config=None, handler=handler)
    payload = handler(ns)
    actual = sha256(payload.text)
    expected = manifest.get("payload_sha256")
    if out is not None:
        _emit(payload, out)
    return actual == expected, {"expected": expected, "actual": actual, "match": actual == expected,
                                "command": list(command)}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, leaves = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.group == "replay":
            ok, report = replay(args.manifest, args.workers, args.out)
            print(dumps(report), end="")
            if not ok:
                print(f"digest mismatch: expected {report['expected']}, got {report['actual']}",
                      file=sys.stderr)
            return EXIT_OK if ok else EXIT_MISMATCH
        if args.config is not None:
            try:
                args = _apply_config(parser, leaves, argv, args)
            except SystemExit as exc:
                return int(exc.code or 0)
        return _run(args, argv)
    except (ArgumentError, RangeError, OSError) as exc:
        print(f"valleywalk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BudgetExceededError, PreconditionError, WindowExhaustedError, InsufficientDataError) as exc:
        print(f"valleywalk: error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
