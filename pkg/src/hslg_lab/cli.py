"""Command-line front end: flat-file config, subcommand dispatch, CSV output.

Groups and actions:

    env gen | check             sample or validate environment files
    simulate endpoint | path | ensemble
    verify umap | lgv | identity | sbd
    experiment pinning | walk | quenched | fluct | lln

Exit status: 0 when every check passes, 1 when an assertion or statistical
check fails, 2 on usage errors (bad flags, bad config file, missing
required flag).

Every parameter resolves with the same precedence: command-line flag, then
config-file entry, then the HSLG_LAB_SEED environment variable (seed only),
then built-in defaults.  Config files are flat ``key = value`` text with
``#`` comments; unknown keys are rejected with their line number.

Experiments write plot-ready CSV plus a ``.meta`` companion recording the
config, seeds, and package version; there is no embedded plotting.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
from dataclasses import dataclass
from importlib import metadata

import numpy as np

from .environment import (EnvFormatError, generate_dyadic_environment,
                          generate_environment, read_environment, symmetrize,
                          wedge_count, write_environment)
from .experiments import (ExperimentConfig, StatReport, run_gaussian_fluct,
                          run_lln_profile, run_pinning, run_quenched_limit,
                          run_walk_attractor)
from .multilayer import line_ensemble, multilayer_brute, multilayer_lgv, single_symmetrized
from .polymer import endpoint_pmf, exact_partition_table, partition_table, sample_path_codes
from .special import ModelParams
from .umap import check_sbd_inequality, enumerate_disjoint_pairs, property_violations

UMAP_CORNERS = ((2, 2), (3, 2), (4, 3), (4, 4))


class UsageError(Exception):
    """Anything that should end the process with exit status 2."""


# ---------------------------------------------------------------------------
# config resolution


def _int_tuple(text: str):
    parts = [p.strip() for p in str(text).split(",")]
    try:
        return tuple(int(p) for p in parts if p != "")
    except ValueError:
        raise ValueError(f"expected comma-separated integers, got {text!r}")


def _flavor(text: str) -> str:
    if text not in ("standard", "stationary", "alpha-zero-diagonal"):
        raise ValueError(f"unknown flavor {text!r}")
    return text


def _precision(text: str) -> str:
    if text not in ("float", "exact"):
        raise ValueError("precision must be 'float' or 'exact'")
    return text


_CONVERTERS = {
    "theta": float, "alpha": float, "significance": float,
    "n": int, "samples": int, "seed": int, "stream": int, "threads": int,
    "r_max": int, "walk_samples": int, "deep_m": int, "small_samples": int,
    "envs": int, "r": int, "k": int, "kmax": int, "count": int,
    "flavor": _flavor, "precision": _precision, "out": str,
    "sizes": _int_tuple, "k_grid": _int_tuple, "small_sizes": _int_tuple,
}

_DEFAULTS = {
    "theta": 1.0, "alpha": -0.5, "flavor": "standard", "precision": "float",
    "samples": 200, "seed": 0, "stream": 0, "threads": 1,
    "n": None, "out": None, "sizes": None, "k_grid": None, "r_max": None,
    "walk_samples": None, "deep_m": None, "small_sizes": None,
    "small_samples": None, "significance": None, "envs": None, "r": None,
    "k": None, "kmax": None, "count": None,
}


def read_config_file(path) -> dict:
    """Parse flat ``key = value`` text; reject unknown keys by line number."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    pairs = {}
    for line_no, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not eq or not key:
            raise UsageError(f"{path}: line {line_no}: expected 'key = value'")
        conv = _CONVERTERS.get(key)
        if conv is None:
            raise UsageError(f"{path}: line {line_no}: unknown key {key!r}")
        try:
            pairs[key] = conv(value)
        except ValueError as exc:
            raise UsageError(f"{path}: line {line_no}: key {key!r}: {exc}") from None
    return pairs


@dataclass(frozen=True)
class Invocation:
    """A fully resolved command: flags already merged over config/defaults."""

    group: str
    action: str
    options: dict


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    add = common.add_argument
    add("--theta", type=float, help="bulk shape is 2*theta (default 1.0)")
    add("--alpha", type=float,
        help="diagonal shape offset, bound phase needs alpha < 0 (default -0.5)")
    add("--n", type=int, help="lattice size")
    add("--flavor", type=_flavor,
        help="environment flavor: standard, stationary, alpha-zero-diagonal")
    add("--samples", type=int, help="environments per size (default 200)")
    add("--seed", type=int, help="RNG seed (default HSLG_LAB_SEED or 0)")
    add("--stream", type=int, help="RNG stream offset (default 0)")
    add("--threads", type=int, help="worker threads; never changes output")
    add("--out", help="output path (CSV or environment file)")
    add("--config", help="flat key = value config file")
    add("--precision", type=_precision, help="float or exact (dyadic weights)")
    add("--sizes", type=_int_tuple, help="comma-separated N grid for experiments")
    add("--k-grid", dest="k_grid", type=_int_tuple,
        help="comma-separated endpoint tail offsets (pinning)")
    add("--r-max", dest="r_max", type=int, help="deepest increment index")
    add("--walk-samples", dest="walk_samples", type=int,
        help="random-walk sample count (quenched)")
    add("--deep-m", dest="deep_m", type=int, help="deep-tail depth multiplier")
    add("--small-sizes", dest="small_sizes", type=_int_tuple,
        help="orders for the exact top-curve statistic (lln)")
    add("--small-samples", dest="small_samples", type=int,
        help="environments per small order (lln)")
    add("--significance", type=float, help="p-value floor for exact identities")
    add("--envs", type=int, help="environment count for verify actions")
    add("--r", type=int, help="max layer count for verify lgv")
    add("--k", type=int, help="layer-pair count for verify sbd")
    add("--kmax", type=int, help="curve count for simulate ensemble")
    add("--count", type=int, help="path count for simulate path")

    parser = argparse.ArgumentParser(
        prog="hslg-lab",
        description="Half-space log-gamma polymer laboratory (bound phase).")
    groups = parser.add_subparsers(dest="group", metavar="GROUP")

    def leaf(group, name, help_text, positional=None):
        p = group.add_parser(name, parents=[common], help=help_text)
        if positional:
            p.add_argument(positional)
        return p

    env = groups.add_parser("env", help="environment files").add_subparsers(
        dest="action", metavar="ACTION")
    leaf(env, "gen", "sample an environment and write it to --out")
    leaf(env, "check", "validate an environment file", positional="file")

    sim = groups.add_parser("simulate", help="single-environment output").add_subparsers(
        dest="action", metavar="ACTION")
    leaf(sim, "endpoint", "quenched endpoint pmf as CSV r,probability")
    leaf(sim, "path", "sampled path codes as CSV index,code")
    leaf(sim, "ensemble", "line-ensemble curves as CSV k,p,h")

    ver = groups.add_parser("verify", help="exact structural checks").add_subparsers(
        dest="action", metavar="ACTION")
    leaf(ver, "umap", "exhaustive pair-rewiring contract sweep")
    leaf(ver, "lgv", "determinant vs exhaustive non-intersecting enumeration")
    leaf(ver, "identity", "doubled symmetrized value equals half-space value")
    leaf(ver, "sbd", "2k-layer anti-diagonal product bound")

    exp = groups.add_parser("experiment", help="statistical drivers").add_subparsers(
        dest="action", metavar="ACTION")
    for name, text in (("pinning", "endpoint tail masses across sizes"),
                       ("walk", "increment law against the attractor walk"),
                       ("quenched", "endpoint pmf vs walk-functional limit"),
                       ("fluct", "normalized free-energy fluctuations"),
                       ("lln", "free-energy rate trends and top-curve bound")):
        leaf(exp, name, text)
    return parser


def parse_config(argv=None) -> Invocation:
    """Merge flags over config file over env-var seed over defaults."""
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if ns.group is None:
        parser.print_usage(sys.stderr)
        raise UsageError("missing subcommand")
    action = getattr(ns, "action", None)
    if action is None:
        raise UsageError(f"{ns.group}: missing action (see hslg-lab {ns.group} -h)")

    opts = dict(_DEFAULTS)
    seed_env = os.environ.get("HSLG_LAB_SEED")
    if seed_env is not None:
        try:
            opts["seed"] = int(seed_env)
        except ValueError:
            raise UsageError(
                f"HSLG_LAB_SEED must be an integer, got {seed_env!r}") from None
    if ns.config is not None:
        opts.update(read_config_file(ns.config))
    for key, value in vars(ns).items():
        if key in ("group", "action", "config", "file") or value is None:
            continue
        opts[key] = value
    if hasattr(ns, "file"):
        opts["file"] = ns.file
    return Invocation(ns.group, action, opts)


def _params(opts) -> ModelParams:
    if opts["alpha"] >= 0.0:
        raise UsageError("bound phase requires alpha < 0")
    try:
        return ModelParams(opts["theta"], opts["alpha"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _require(opts, key: str, flag: str):
    value = opts.get(key)
    if value is None:
        raise UsageError(f"missing required flag {flag}")
    return value


# ---------------------------------------------------------------------------
# CSV emission


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _version() -> str:
    try:
        base = metadata.version("hslg-lab")
    except metadata.PackageNotFoundError:
        base = "0"
    try:
        res = subprocess.run(["git", "describe", "--tags", "--always", "--dirty"],
                             cwd=os.path.dirname(os.path.abspath(__file__)),
                             capture_output=True, text=True, timeout=10)
        desc = res.stdout.strip() if res.returncode == 0 else ""
    except OSError:
        desc = ""
    return f"{base}+g{desc}" if desc else base


def _csv_text(report: StatReport) -> str:
    body = "".join(",".join(_cell(x) for x in row) + "\n" for row in report.rows)
    return ",".join(report.header) + "\n" + body


def emit_csv(report: StatReport, path) -> None:
    """Write the report rows as CSV plus a ``.meta`` provenance companion."""
    meta = [f"name = {report.name}", f"version = {_version()}"]
    meta += [f"{key} = {report.config[key]}" for key in sorted(report.config)]
    npass = sum(c.passed for c in report.checks)
    meta.append(f"checks = {npass}/{len(report.checks)} passed")
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(_csv_text(report))
        with open(f"{path}.meta", "w", encoding="utf-8") as fh:
            fh.write("\n".join(meta) + "\n")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from None


def _deliver(report: StatReport, out) -> None:
    if out is None:
        sys.stdout.write(_csv_text(report))
    else:
        emit_csv(report, out)
        print(f"wrote {out} and {out}.meta")


# ---------------------------------------------------------------------------
# handlers


def _env_gen(o) -> int:
    params = _params(o)
    n = _require(o, "n", "--n")
    out = _require(o, "out", "--out")
    if o["precision"] == "exact":
        if o["flavor"] != "standard":
            raise UsageError("exact precision supports the standard flavor only")
        env = generate_dyadic_environment(params, n, o["seed"], o["stream"])
    else:
        env = generate_environment(params, n, o["flavor"], o["seed"], o["stream"])
    try:
        write_environment(env, out)
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc}") from None
    print(f"wrote {out}: n={n} flavor={env.flavor} sites={wedge_count(n)}")
    return 0


def _env_check(o) -> int:
    path = o["file"]
    try:
        env = read_environment(path)
    except EnvFormatError as exc:
        print(f"{path}: FAIL: {exc}")
        return 1
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    print(f"{path}: ok (n={env.n}, flavor={env.flavor}, "
          f"theta={env.params.theta:g}, alpha={env.params.alpha:g}, "
          f"sites={wedge_count(env.n)})")
    return 0


def _simulate(o, action: str) -> int:
    params = _params(o)
    n = _require(o, "n", "--n")
    env = generate_environment(params, n, o["flavor"], o["seed"], o["stream"])
    echo = {"theta": params.theta, "alpha": params.alpha, "n": n,
            "flavor": o["flavor"], "seed": o["seed"], "stream": o["stream"]}
    if action == "endpoint":
        pmf = endpoint_pmf(partition_table(env))
        rows = [(r, float(p)) for r, p in enumerate(pmf)]
        report = StatReport("simulate_endpoint", echo, ("r", "probability"), rows)
    elif action == "path":
        count = o["count"] if o["count"] is not None else 100
        codes = sample_path_codes(partition_table(env), count, o["seed"], o["stream"])
        echo["count"] = count
        rows = [(i, int(c)) for i, c in enumerate(codes)]
        report = StatReport("simulate_path", echo, ("index", "code"), rows)
    else:
        if n < 2:
            raise UsageError("simulate ensemble needs --n >= 2")
        kmax = o["kmax"] if o["kmax"] is not None else min(2, n - 1)
        ens = line_ensemble(symmetrize(env), kmax)
        echo["kmax"] = kmax
        rows = [(k, p, ens.h(k, p))
                for k in range(1, kmax + 1)
                for p in range(1, ens.positions(k) + 1)]
        report = StatReport("simulate_ensemble", echo, ("k", "p", "h"), rows)
    _deliver(report, o["out"])
    return 0


def _verify_umap(o) -> int:
    pairs = 0
    violations = []
    for m, n in UMAP_CORNERS:
        for x in (1, 2):
            pairs += len(enumerate_disjoint_pairs(m, n, x))
            violations += [f"(m={m}, n={n}, x={x}) {v}"
                           for v in property_violations(m, n, x)]
    print(f"pair rewiring: {pairs} disjoint pairs over "
          f"{len(UMAP_CORNERS) * 2} corner/boundary domains")
    if violations:
        print(f"FAIL: {len(violations)} violations; first: {violations[0]}")
        return 1
    print("PASS: diagonal transfer, site-multiset preservation, "
          "preimage bounds, endpoint placement")
    return 0


def _verify_identity(o) -> int:
    params = _params(o)
    n = o["n"] if o["n"] is not None else 5
    envs = o["envs"] if o["envs"] is not None else 50
    sites = 0
    for e in range(envs):
        env = generate_dyadic_environment(params, n, o["seed"], o["stream"] + e)
        senv = symmetrize(env)
        for (i, j), z in sorted(exact_partition_table(env).items()):
            zsym = single_symmetrized(senv, i, j, mode="exact")
            if 2 * zsym != z:
                print(f"FAIL: environment {e} (seed={o['seed']}, "
                      f"stream={o['stream'] + e}), site ({i},{j}): "
                      f"2*symmetrized = {2 * zsym} != {z}")
                return 1
            sites += 1
    print(f"PASS: 2 * symmetrized value = half-space value at {sites} sites "
          f"({envs} dyadic environments, n={n}), exact rational equality")
    return 0


def _verify_lgv(o) -> int:
    params = _params(o)
    n = o["n"] if o["n"] is not None else 4
    envs = o["envs"] if o["envs"] is not None else 25
    r_top = o["r"] if o["r"] is not None else 2
    checked = 0
    for e in range(envs):
        env = generate_dyadic_environment(params, n, o["seed"], o["stream"] + e)
        senv = symmetrize(env)
        for i in range(1, 2 * n):
            for j in range(1, min(i, 2 * n - i) + 1):
                for r in range(1, min(r_top, j) + 1):
                    det = multilayer_lgv(senv, i, j, r, mode="exact")
                    brute = multilayer_brute(senv, i, j, r)
                    if det != brute:
                        print(f"FAIL: environment {e} (stream={o['stream'] + e}), "
                              f"site ({i},{j}), layers r={r}: "
                              f"determinant {det} != enumeration {brute}")
                        return 1
                    checked += 1
    print(f"PASS: determinant = exhaustive non-intersecting enumeration at "
          f"{checked} (site, r) cases ({envs} dyadic environments, n={n}, "
          f"r <= {r_top}), exact rational equality")
    return 0


def _verify_sbd(o) -> int:
    params = _params(o)
    n = o["n"] if o["n"] is not None else 6
    envs = o["envs"] if o["envs"] is not None else 100
    ks = (o["k"],) if o["k"] is not None else (1, 2)
    m, site_n = n + 1, n - 1
    for k in ks:
        if 2 * k > site_n:
            raise UsageError(f"--k {k} needs n >= {2 * k + 1}")
    for e in range(envs):
        env = generate_dyadic_environment(params, n, o["seed"], o["stream"] + e)
        senv = symmetrize(env)
        for k in ks:
            res = check_sbd_inequality(senv, m, site_n, k)
            if not res.holds:
                print(f"FAIL: environment {e} (stream={o['stream'] + e}), "
                      f"(m,n)=({m},{site_n}), k={k}: "
                      f"lhs {float(res.lhs):.6g} > rhs {float(res.rhs):.6g}")
                return 1
    print(f"PASS: 2k-layer value <= anti-diagonal product bound at "
          f"(m,n)=({m},{site_n}), k in {sorted(ks)}, {envs} dyadic environments")
    return 0


_DRIVERS = {
    "pinning": run_pinning,
    "walk": run_walk_attractor,
    "quenched": run_quenched_limit,
    "fluct": run_gaussian_fluct,
    "lln": run_lln_profile,
}


def _experiment(o, action: str) -> int:
    out = _require(o, "out", "--out")
    params = _params(o)
    sizes = o["sizes"]
    if sizes is None:
        if o["n"] is None:
            raise UsageError("experiment requires --sizes (or --n for one size)")
        sizes = (o["n"],)
    kwargs = {}
    for key in ("significance", "k_grid", "r_max", "walk_samples", "deep_m",
                "small_sizes", "small_samples"):
        if o[key] is not None:
            kwargs[key] = o[key]
    try:
        config = ExperimentConfig(params, tuple(sizes), o["samples"],
                                  seed=o["seed"], stream=o["stream"],
                                  flavor=o["flavor"], threads=o["threads"],
                                  out=str(out), theorem=action, **kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = _DRIVERS[action](config)
    emit_csv(report, out)
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    npass = sum(c.passed for c in report.checks)
    print(f"{report.name}: {npass}/{len(report.checks)} checks passed; "
          f"wrote {out} and {out}.meta")
    if not report.passed:
        first = next(c for c in report.checks if not c.passed)
        print(f"first failing check: {first.name}: {first.detail} "
              f"[sizes={list(config.sizes)} samples={config.samples} "
              f"seed={config.seed} stream={config.stream}]", file=sys.stderr)
        return 1
    return 0


def dispatch(inv: Invocation) -> int:
    """Route a resolved invocation; returns the process exit status."""
    o = inv.options
    if inv.group == "env":
        return _env_gen(o) if inv.action == "gen" else _env_check(o)
    if inv.group == "simulate":
        return _simulate(o, inv.action)
    if inv.group == "verify":
        handler = {"umap": _verify_umap, "identity": _verify_identity,
                   "lgv": _verify_lgv, "sbd": _verify_sbd}[inv.action]
        return handler(o)
    if inv.group == "experiment":
        return _experiment(o, inv.action)
    raise UsageError(f"unknown group {inv.group!r}")


def main(argv=None) -> int:
    try:
        return dispatch(parse_config(argv))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2


if __name__ == "__main__":
    sys.exit(main())
