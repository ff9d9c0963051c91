"""Command-line entry point."""

from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import config_hash, parse_config
from .errors import ConfigError, GridFormatError, NoEvaluatorError, NodalError
from .gridio import (
    atomic_write,
    census_csv,
    read_grid,
    results_csv,
    write_grid,
    write_json,
    write_manifest,
)
from .models import model_from_options

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _floats(text):
    return tuple(float(t) for t in text.split(",") if t.strip()) if text else ()


def _model(args):
    if args.dim not in (2, 3):
        raise ConfigError("unsupported dimension")
    return model_from_options(args.model, args.dim, args.alpha, args.degree_n, args.custom_csv)


def _add_model_flags(p):
    p.add_argument("--model", default="bargmann-fock",
                   choices=["bargmann-fock", "berry", "band-limited", "kostlan", "custom"])
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--degree-n", type=int, default=0)
    p.add_argument("--custom-csv")


def _analytic(real):
    """Rebuild the analytic evaluator from the sidecar when the grid lacks one."""
    if real.evaluator is not None:
        return real
    from .sampler import CIRCULANT, resample

    if not real.meta or real.meta.get("method") == CIRCULANT:
        raise NoEvaluatorError()
    fresh = resample(real.meta)
    if not np.array_equal(fresh.values, real.values):
        raise GridFormatError("grid does not match its sidecar")
    return fresh


# -- subcommands -------------------------------------------------------------


def cmd_sample(args):
    from .sampler import KOSTLAN, sample_field, sample_kostlan

    model = _model(args)
    h = args.spacing or model.default_spacing()
    if model.kind == "kostlan" or args.method == KOSTLAN:
        real = sample_kostlan(model.degree, args.half_width, h, args.seed)
    else:
        real = sample_field(model, args.half_width, h, args.seed, method=args.method, terms=args.terms)
    write_grid(args.out, real)


def cmd_betti(args):
    from .topology import extract_components, betti_report, write_off

    real = read_grid(args.input)
    closed, censored = extract_components(real, args.radius)
    report = betti_report(closed, args.radius, _floats(args.r_list), censored=censored, seed=args.seed)
    write_json(args.out, report.to_json())
    if args.mesh_dir:
        Path(args.mesh_dir).mkdir(parents=True, exist_ok=True)
        for c in closed:
            if c.inside(args.radius):
                write_off(c, Path(args.mesh_dir) / f"component_{c.id:05d}.off")


def cmd_sandwich(args):
    from .topology import analyze

    real = read_grid(args.input)
    r_list = _floats(args.r_list)
    report = analyze(real, args.radius, r_list, seed=args.seed)
    d = real.dimension
    rows = []
    for r in r_list:
        psi = [report.psi[(i, r)] for i in range(d)]
        rows.append({"r": r, "psi": psi, "holds": all(p <= b for p, b in zip(psi, report.totals))})
    write_json(args.out, {"R": args.radius, "totals": list(report.totals), "sandwich": rows})


def cmd_morse(args):
    from .morse import find_critical_points, morse_bound_check
    from .topology import extract_components

    real = _analytic(read_grid(args.input))
    p = np.array(_floats(args.p)) if args.p else None
    cps = find_critical_points(real, p, args.radius)
    closed, _ = extract_components(real, args.radius)
    check = morse_bound_check(real, args.radius, closed, cps)
    write_json(args.out, {**cps.to_json(), "R": args.radius, "bound_check": check.to_json()})


def cmd_kacrice(args):
    from .kacrice import kacrice_density, kacrice_upper_bound, sphere_directions

    model = _model(args)
    ests = [
        kacrice_density(model, v, args.mc, args.seed + k).to_json()
        for k, v in enumerate(sphere_directions(model.dimension, args.directions))
    ]
    out = {"model": model.identifier, "directions": ests}
    if args.radius:
        bound, se = kacrice_upper_bound(model, args.radius, args.mc, args.seed, args.directions)
        out.update({"R": args.radius, "bound": bound, "bound_stderr": se})
    write_json(args.out, out)


def _experiment(args):
    overrides = {k: getattr(args, k, None) for k in ("model", "dim", "R", "r", "N", "h")}
    overrides["seed"] = args.seed
    overrides["threads"] = args.threads
    config, _ = parse_config(args.config, overrides)
    return config


def cmd_estimate(args):
    from .harness import estimate_betti_density

    config = _experiment(args)
    started = datetime.now(timezone.utc).isoformat() if args.timestamps else None
    result = estimate_betti_density(config)
    out = Path(args.out)
    atomic_write(out / "results.csv", results_csv(result))
    atomic_write(out / "census.csv", census_csv(result))
    write_json(out / "summary.json", {
        "model": result.model,
        "c_i_hat": list(result.c_i_hat),
        "nu_hat": result.nu_hat,
        "cauchy_gaps": {str(k): v for k, v in result.cauchy_gaps.items()},
        "sandwich_pass_rate": result.sandwich_pass_rate,
        "class_census": result.class_census,
        "aborted": result.aborted,
    })
    stamps = (started, datetime.now(timezone.utc).isoformat()) if args.timestamps else None
    write_manifest(
        out / "manifest.json", config_hash(config), config.master_seed,
        {repr(R): s for R, s in result.seeds.items()},
        [out / "results.csv", out / "census.csv", out / "summary.json"],
        __version__, stamps,
    )


def cmd_census(args):
    from .harness import genus_census

    config = _experiment(args)
    rates = genus_census(config)
    lines = ["class,rate,std,ci_lo,ci_hi,N"]
    from .gridio import fmt

    for r in rates:
        lines.append(",".join([r.label, fmt(r.rate), fmt(r.std), fmt(r.ci_lo), fmt(r.ci_hi), str(r.N)]))
    out = Path(args.out)
    target = out if out.suffix == ".csv" else out / "census.csv"
    atomic_write(target, ("\n".join(lines) + "\n").encode())


def cmd_kostlan_limit(args):
    from .harness import kostlan_betti_convergence, kostlan_local_limit_check, scaling_sup

    degrees = tuple(int(x) for x in _floats(args.degrees))
    probe = kostlan_local_limit_check(degrees, args.radius)
    out = {
        "R": args.radius,
        "degrees": list(degrees),
        "covariance_sup": {str(n): v for n, v in probe.covariance_sup.items()},
        "radial_sup": {str(n): scaling_sup(n, args.radius) for n in degrees},
    }
    if args.reference is not None:
        betti = kostlan_betti_convergence(
            degrees, args.betti_radius, args.eps, args.replicates, args.seed, args.reference
        )
        out["betti"] = {
            "R": args.betti_radius,
            "epsilon": args.eps,
            "reference": args.reference,
            "exceedance": {str(n): v for n, v in betti.exceedance.items()},
            "samples": {str(n): [list(v) for v in s] for n, s in betti.betti_samples.items()},
        }
    write_json(args.out, out)


# -- parser ------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out", required=True)

    parser = argparse.ArgumentParser(prog="nodalbetti", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[common], help="draw a field on a grid (NGRD + sidecar)")
    _add_model_flags(p)
    p.add_argument("--half-width", type=float, required=True)
    p.add_argument("--spacing", type=float)
    p.add_argument("--method", default="auto", choices=["auto", "circulant", "spectral", "kostlan"])
    p.add_argument("--terms", type=int, default=4096)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("betti", parents=[common], help="Betti report of a grid")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--r-list", default="")
    p.add_argument("--mesh-dir", help="also write OFF meshes of counted components")
    p.set_defaults(func=cmd_betti)

    p = sub.add_parser("sandwich", parents=[common], help="sandwich functional check")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--r-list", required=True)
    p.set_defaults(func=cmd_sandwich)

    p = sub.add_parser("morse", parents=[common], help="critical points of |x-p|^2 on the nodal set")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--p", default="")
    p.set_defaults(func=cmd_morse)

    p = sub.add_parser("kacrice", parents=[common], help="Kac-Rice density and bound")
    _add_model_flags(p)
    p.add_argument("--directions", type=int, default=4)
    p.add_argument("--mc", type=int, default=100_000)
    p.add_argument("--radius", type=float)
    p.set_defaults(func=cmd_kacrice)

    for name, func, text in (
        ("estimate", cmd_estimate, "Betti density campaign"),
        ("census", cmd_census, "diffeomorphism-class census (d=3)"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--config")
        p.add_argument("--model")
        p.add_argument("--dim", type=int)
        p.add_argument("--R", help="comma-separated radii")
        p.add_argument("--r", help="comma-separated sandwich radii")
        p.add_argument("--N", type=int)
        p.add_argument("--h", type=float)
        p.add_argument("--timestamps", action="store_true", help="record wall-clock times in the manifest")
        p.set_defaults(func=func)

    p = sub.add_parser("kostlan-limit", parents=[common], help="Kostlan scaling-limit probes")
    p.add_argument("--degrees", default="50,200,800")
    p.add_argument("--radius", type=float, default=3.0)
    p.add_argument("--reference", type=float, help="c0 reference; enables the Betti probe")
    p.add_argument("--eps", type=float, default=0.005)
    p.add_argument("--betti-radius", type=float, default=10.0)
    p.add_argument("--replicates", type=int, default=50)
    p.set_defaults(func=cmd_kostlan_limit)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GridFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NodalError, ValueError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
