"""Command-line front end.

Exit codes: 0 success, 1 usage/config/parse error, 2 mesh validation failure,
3 optimization stopped without converging.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .field import (
    IDENTITY,
    PAPER1D_INVERSE,
    PAPER1D_MAP,
    EnergyWeights,
    convergence_study,
    get_field,
    phi_reparam_1d,
)
from .mesh import (
    InvalidMeshError,
    MeshParseError,
    load_mesh,
    save_mesh,
    structured_square_mesh,
    uniform_interval_mesh,
    validate,
)
from .optimizer import OptimizerConfig, optimize, pack_free, stationarity_check, unpack_free
from .whitney import get_form

log = logging.getLogger("afftri")

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2, 3

TRACE_COLUMNS = ["iter", "phi", "grad_inf", "min_volume", "step"]
RATE_COLUMNS = ["h", "err_l2", "err_h1", "rate_l2", "rate_h1"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# keys accepted in a config file, with their converters
_CONFIG_KEYS = {
    "mesh": str,
    "gen": str,
    "field": str,
    "form": str,
    "c0": float,
    "c1": float,
    "gtol": float,
    "ftol": float,
    "max_iters": int,
    "fd_step": float,
    "initial_step": float,
    "perturb": float,
    "levels": str,
    "out": str,
}


def read_config(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


def _add_common(p, *, target=None, optimizer=False, mesh_source=True):
    p.add_argument("--config", help="key = value file; flags override its values")
    if mesh_source:
        p.add_argument("--mesh", help="mesh file (meshtri format)")
        p.add_argument("--gen", help="generator: interval:N or square:M")
    if target == "field":
        p.add_argument("--field", help="field name, e.g. quad1d, sinprod2d, poly1d:0,1,2")
    elif target == "form":
        p.add_argument("--form", help="1-form name: dx, x_dy, rot, dg_quad")
    p.add_argument("--c0", type=float, help="L2 weight (default 1)")
    p.add_argument("--c1", type=float, help="gradient weight (default 1)")
    if optimizer:
        p.add_argument("--gtol", type=float)
        p.add_argument("--ftol", type=float)
        p.add_argument("--max-iters", type=int, dest="max_iters")
        p.add_argument("--fd-step", type=float, dest="fd_step")
        p.add_argument("--initial-step", type=float, dest="initial_step")
        p.add_argument(
            "--perturb",
            type=float,
            help="add +a, -a, +a, ... to the free coordinates of the start mesh",
        )
    p.add_argument("--out", help="output directory (default .)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="afftri", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("validate", help="check a mesh file")
    p.add_argument("mesh_path")

    p = sub.add_parser("optimize", help="optimize vertex positions for a scalar field")
    _add_common(p, target="field", optimizer=True)
    p = sub.add_parser("whitney-optimize", help="optimize vertex positions for a 1-form")
    _add_common(p, target="form", optimizer=True)

    p = sub.add_parser("study", help="interpolation error rates under refinement")
    _add_common(p, target="field")
    p.add_argument("--levels", help="comma-separated N (interval) or m (square) values")

    p = sub.add_parser("demo-reparam", help="single-chart reparametrization table")
    _add_common(p, mesh_source=False)
    return parser


def _merge(args) -> dict:
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    for key, value in vars(args).items():
        if value is not None and key not in ("command", "config", "verbose"):
            cfg[key] = value
    return cfg


def _weights(cfg) -> EnergyWeights:
    try:
        return EnergyWeights(cfg.get("c0", 1.0), cfg.get("c1", 1.0))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _parse_gen(spec: str):
    kind, _, size = spec.partition(":")
    try:
        n = int(size)
    except ValueError:
        raise UsageError(f"--gen expects interval:N or square:M, got {spec!r}") from None
    try:
        if kind == "interval":
            return uniform_interval_mesh(0.0, 1.0, n)
        if kind == "square":
            return structured_square_mesh(n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    raise UsageError(f"unknown generator {kind!r}")


def _mesh_from(cfg):
    if ("mesh" in cfg) == ("gen" in cfg):
        raise UsageError("give exactly one mesh source: --mesh or --gen")
    if "gen" in cfg:
        return _parse_gen(cfg["gen"])
    return load_mesh(cfg["mesh"])


def _out_dir(cfg) -> Path:
    out = Path(cfg.get("out", "."))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from None
    return out


def _fmt(x) -> str:
    return "NA" if x is None else repr(float(x))


def write_trace_csv(trace, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in trace:
            w.writerow([r.iter, _fmt(r.phi), _fmt(r.grad_inf), _fmt(r.min_volume), _fmt(r.step)])


def write_rates_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RATE_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r.h), _fmt(r.err_l2), _fmt(r.err_h1), _fmt(r.rate_l2), _fmt(r.rate_h1)])


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------


def cmd_validate(mesh_path) -> int:
    try:
        mesh = load_mesh(mesh_path)
    except MeshParseError as exc:
        print(f"{mesh_path}: parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"{mesh_path}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = validate(mesh)
    print(f"{mesh_path}: {mesh!r}")
    print(report)
    return EXIT_OK if report.ok else EXIT_INVALID


def _run_optimize(cfg, kind: str) -> int:
    from . import plotting

    mesh = _mesh_from(cfg)
    weights = _weights(cfg)
    name = cfg.get(kind)
    if name is None:
        raise UsageError(f"--{kind} is required")
    try:
        target = get_field(name) if kind == "field" else get_form(name)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if kind == "field" and target.dim != mesh.dim:
        raise UsageError(f"field {name} is {target.dim}D but the mesh is {mesh.dim}D")
    if kind == "form" and mesh.dim != 2:
        raise UsageError("whitney-optimize needs a 2D mesh")
    opt_keys = ("gtol", "ftol", "max_iters", "fd_step", "initial_step")
    try:
        config = OptimizerConfig(**{k: cfg[k] for k in opt_keys if k in cfg})
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if cfg.get("perturb"):
        x = pack_free(mesh)
        x = x + cfg["perturb"] * np.where(np.arange(x.size) % 2 == 0, 1.0, -1.0)
        mesh = unpack_free(mesh, x)

    report = validate(mesh)
    if not report.ok:
        print("initial mesh is invalid:", file=sys.stderr)
        print(report, file=sys.stderr)
        return EXIT_INVALID

    out = _out_dir(cfg)
    result = optimize(mesh, target, weights, config)
    residual, _ = stationarity_check(result, target, weights, config.gtol, config.fd_step)

    save_mesh(result.mesh, out / "final.meshtri")
    write_trace_csv(result.trace, out / "trace.csv")
    title = f"{name}, c0={weights.c0:g}, c1={weights.c1:g}"
    if mesh.dim == 2:
        plotting.plot_mesh(mesh, result.mesh, out / "mesh.svg", title)
    plotting.plot_convergence(result.trace, out / "convergence.svg", title)

    print(f"final phi:          {result.phi:.12e}")
    print(f"gradient residual:  {residual:.3e}")
    print(f"iterations:         {result.iterations}")
    print(f"termination:        {result.reason}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_optimize(cfg) -> int:
    return _run_optimize(cfg, "field")


def cmd_whitney_optimize(cfg) -> int:
    return _run_optimize(cfg, "form")


def _parse_levels(cfg):
    spec = cfg.get("levels")
    gen = cfg.get("gen", "")
    family, _, size = gen.partition(":")
    if spec is None and "," in size:
        spec = size
    if spec is None:
        raise UsageError("study needs --levels (e.g. 4,8,16)")
    try:
        levels = [int(s) for s in spec.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad --levels {spec!r}") from None
    if len(levels) < 3:
        raise UsageError("study needs at least 3 levels")
    if any(n < 1 for n in levels):
        raise UsageError("levels must be positive")
    return family, levels


def cmd_study(cfg) -> int:
    from . import plotting

    family, levels = _parse_levels(cfg)
    if "field" not in cfg:
        raise UsageError("--field is required")
    try:
        f = get_field(cfg["field"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not family:
        family = "interval" if f.dim == 1 else "square"
    if family not in ("interval", "square") or (family == "interval") != (f.dim == 1):
        raise UsageError(f"mesh family {family!r} does not fit the {f.dim}D field {f.name}")
    rows = convergence_study(f, family, levels)
    out = _out_dir(cfg)
    write_rates_csv(rows, out / "rates.csv")
    plotting.plot_rates(rows, out / "rates.svg", f"{f.name} on {family} meshes")
    print(f"{'level':>6} {'h':>10} {'err_l2':>12} {'err_h1':>12} {'rate_l2':>8} {'rate_h1':>8}")
    for r in rows:
        r2 = "NA" if r.rate_l2 is None else f"{r.rate_l2:.3f}"
        r1 = "NA" if r.rate_h1 is None else f"{r.rate_h1:.3f}"
        print(f"{r.level:>6} {r.h:>10.5g} {r.err_l2:>12.5e} {r.err_h1:>12.5e} {r2:>8} {r1:>8}")
    return EXIT_OK


REPARAM_NOTE = (
    "note: with the interpolant affine in the chart parameter, the energy vanishes\n"
    "for the chart sigma = f^-1, not for sigma = f; the sigma = f row is kept to\n"
    "show that reading does not give a zero-error chart."
)


def reparam_table(weights: EnergyWeights):
    f = get_field("paper1d")
    return [(s.name, phi_reparam_1d(f, s, weights)) for s in (IDENTITY, PAPER1D_INVERSE, PAPER1D_MAP)]


def cmd_demo_reparam(cfg) -> int:
    weights = _weights(cfg)
    rows = reparam_table(weights)
    print(f"f(x) = (x + x^2)/2 on [0, 1], c0={weights.c0:g}, c1={weights.c1:g}")
    print(f"{'sigma':<18} {'phi':>14}")
    for name, value in rows:
        print(f"{name:<18} {value:>14.6e}")
    print(REPARAM_NOTE)
    if "out" in cfg:
        out = _out_dir(cfg)
        with open(out / "reparam.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sigma", "phi"])
            for name, value in rows:
                w.writerow([name, _fmt(value)])
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        if args.command is None:
            parser.print_help()
            return EXIT_USAGE
        if args.command == "validate":
            return cmd_validate(args.mesh_path)
        cfg = _merge(args)
        handler = {
            "optimize": cmd_optimize,
            "whitney-optimize": cmd_whitney_optimize,
            "study": cmd_study,
            "demo-reparam": cmd_demo_reparam,
        }[args.command]
        return handler(cfg)
    except UsageError as exc:
        print(f"afftri: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MeshParseError as exc:
        print(f"afftri: mesh parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidMeshError as exc:
        print(f"afftri: invalid mesh: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"afftri: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
