"""Command-line interface.

Subcommands: ``quantiles``, ``radial``, ``busemann``, ``ellipsoids``,
``validate`` and ``synth``.  Matrices on the command line are JSON (a number
for m = 1, or nested row lists), or ``@path`` to a JSON file.

Exit codes: 0 success, 2 usage error, 3 parse/read error, 4 validation
error (asymmetric, not positive definite, mixed dimensions, bad arguments),
5 convergence failure.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import (
    SYMMETRY_TOL,
    dataset_to_text,
    export_ellipsoids,
    load_dataset,
    matrix_to_list,
    parse_json_dataset,
    synthetic_dataset,
)
from .errors import ConvergenceError, DomainError, InputError, ParseError, SpdError
from .geometry import metric_norm
from .grid import preset_directions, quantile_grid
from .quantiles import OptimizerConfig
from .radial import BoundaryDirection, busemann, radial_field, radial_field_oracle
from .spectral import as_symmetric

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_CONVERGENCE = 5


def _matrix_arg(text, name):
    if text.startswith("@"):
        try:
            text = Path(text[1:]).read_text(encoding="utf-8")
        except OSError as exc:
            raise ParseError(str(exc), name) from None
    try:
        A = np.array(json.loads(text), dtype=float)
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ParseError(f"not a JSON matrix ({exc})", name) from None
    if A.ndim == 0:
        A = A.reshape(1, 1)
    return as_symmetric(A, name, atol=SYMMETRY_TOL)


def _emit(obj, out):
    text = json.dumps(obj, indent=1) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _direction(args):
    return BoundaryDirection.from_tangent(_matrix_arg(args.p, "--p"), _matrix_arg(args.z, "--z"))


def _load_directions(spec, data, center):
    if spec == "preset":
        return preset_directions(data, center)
    try:
        doc = json.loads(Path(spec).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(str(exc), spec) from None
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{spec}:{exc.lineno}:{exc.colno}") from None
    if not isinstance(doc, list):
        raise ParseError("expected a JSON array of {base, dir} objects", spec)
    dirs = []
    for i, rec in enumerate(doc):
        try:
            base = np.array(rec["base"], dtype=float) if "base" in rec else center
            dirs.append(BoundaryDirection.from_tangent(np.atleast_2d(base), np.atleast_2d(np.array(rec["dir"], dtype=float))))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SpdError):
                raise
            raise ParseError(f"bad direction record ({exc})", f"{spec}: record {i}") from None
    return dirs


def cmd_quantiles(args):
    data = load_dataset(args.input, args.format)
    cfg = OptimizerConfig.from_mapping(tol=args.tol, max_iter=args.max_iter)
    betas = [float(b) for b in args.betas.split(",") if b.strip()]
    med, records = quantile_grid(data, [], [], cfg)
    directions = _load_directions(args.directions, data, med.point)
    _, records = quantile_grid(data, directions, betas, cfg, jobs=args.jobs)
    doc = {
        "dim": data.dim,
        "n_points": len(data),
        "betas": betas,
        "seed": args.seed,
        "directions": [{"base": matrix_to_list(d.base), "dir": matrix_to_list(d.dir)} for d in directions],
        "records": records,
    }
    _emit(doc, args.out)
    bad = [r["id"] for r in records if not r["converged"]]
    if bad:
        print(f"{len(bad)} record(s) did not converge: {', '.join(bad)}", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def cmd_radial(args):
    xi = _direction(args)
    x = _matrix_arg(args.x, "--x")
    v = radial_field(xi, x)
    out = {"xi_x": matrix_to_list(v), "metric_norm": metric_norm(x, v)}
    if args.oracle_t is not None:
        o = radial_field_oracle(xi, x, args.oracle_t)
        out.update(oracle_t=args.oracle_t, oracle=matrix_to_list(o), frobenius_gap=float(np.linalg.norm(v - o)))
    _emit(out, args.out)
    return EXIT_OK


def cmd_busemann(args):
    xi = _direction(args)
    x = _matrix_arg(args.x, "--x")
    _emit({"busemann": busemann(xi, x, args.tol)}, args.out)
    return EXIT_OK


def cmd_ellipsoids(args):
    text = Path(args.input).read_text(encoding="utf-8")
    if (args.format or Path(args.input).suffix.lstrip(".")) == "csv":
        data = load_dataset(args.input, "csv")
    else:
        data = parse_json_dataset(text, args.input)
    glyphs = export_ellipsoids(data.points, None, data.labels)
    _emit([g.to_dict() for g in glyphs], args.out)
    return EXIT_OK


def cmd_validate(args):
    data = load_dataset(args.input, args.format)
    w = np.linalg.eigvalsh(data.points)
    _emit(
        {
            "valid": True,
            "n_points": len(data),
            "dim": data.dim,
            "min_eigenvalue": float(w.min()),
            "max_condition": float(np.max(w[:, -1] / w[:, 0])),
        },
        None,
    )
    return EXIT_OK


def cmd_synth(args):
    data = synthetic_dataset(args.n, args.dim, args.seed, args.spread)
    fmt = args.format or ("csv" if str(args.out).endswith(".csv") else "json")
    text = dataset_to_text(data, fmt)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="spdradial", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def data_opts(sp):
        sp.add_argument("--input", required=True, help="dataset file")
        sp.add_argument("--format", choices=("json", "csv"), help="default: from the file suffix")

    def dir_opts(sp):
        sp.add_argument("--p", required=True, help="base point of the ray (JSON matrix or @file)")
        sp.add_argument("--z", required=True, help="tangent at --p giving the ray direction; normalized")
        sp.add_argument("--x", required=True, help="evaluation point")
        sp.add_argument("--out", default="-")

    sp = sub.add_parser("quantiles", help="median and (beta, xi)-quantile grid with ellipsoid glyphs")
    data_opts(sp)
    sp.add_argument("--betas", default=",".join(str(b) for b in (0.2, 0.4, 0.6, 0.8, 0.98)))
    sp.add_argument("--directions", default="preset", help="'preset' or a JSON file of {base, dir} records")
    sp.add_argument("--out", default="-")
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--max-iter", type=int, default=500)
    sp.add_argument("--jobs", type=int, default=1, help="worker processes for the grid")
    sp.add_argument("--seed", type=int, default=0, help="recorded in the output; the solver itself is deterministic")
    sp.set_defaults(func=cmd_quantiles)

    sp = sub.add_parser("radial", help="closed-form radial field at x")
    dir_opts(sp)
    sp.add_argument("--oracle-t", type=float, help="also evaluate the finite-t limit form at this t")
    sp.set_defaults(func=cmd_radial)

    sp = sub.add_parser("busemann", help="Busemann function at x")
    dir_opts(sp)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.set_defaults(func=cmd_busemann)

    sp = sub.add_parser("ellipsoids", help="ellipsoid glyphs of a dataset or a quantiles result")
    data_opts(sp)
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_ellipsoids)

    sp = sub.add_parser("validate", help="check a dataset file")
    data_opts(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("synth", help="write a synthetic DTI-like dataset")
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--dim", type=int, default=3)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--spread", type=float, default=0.25)
    sp.add_argument("--format", choices=("json", "csv"))
    sp.add_argument("--out", default="-")
    sp.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"cannot read input: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InputError, DomainError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except SpdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
