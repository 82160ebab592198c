"""Command-line entry point tying curves, fields, and quadrature together.

Subcommands: distance (distance/direction dumps), field (delta-field dump),
integrate (print the grid integral), converge (error ladder as CSV).  Exit
status 0 on success, 1 on numerical failure, 2 on usage errors.  Reruns with
an identical configuration produce byte-identical outputs, and every output
file gets a JSON sidecar with the fully resolved configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field as dataclass_field
from pathlib import Path

import numpy as np

from .builtins import BUILTIN_CURVES, load_curve, make_levelset
from .curves import DEFAULT_ANGLE_TOL, nonsmooth_vertices
from .distance import SpatialIndex, distance_grid
from .errors import NumericalError, UsageError
from .fields import (ExcisionSpec, apply_excision, delta_codim1_from_levelset,
                     delta_codim2_from_distance, delta_codim2_from_levelset)
from .grid import GridSpec, write_field, write_slice_csv
from .kernels import FAMILIES, Kernel
from .quadrature import (FORMULA_PATHS, convergence_study, grid_integrate,
                         integrand_from_spec, parse_resolution)

_COMMANDS = ("distance", "field", "integrate", "converge")


@dataclass
class RunConfig:
    """Fully validated run description; every field is resolved."""

    command: str
    curve: str | None = None
    path: str = "distance"
    kernel: str = "cosine"
    eps: float | None = None
    eps_coupling: float = 4.0
    mode: str = "radial"
    rho_floor: float | None = None
    phi: str | None = None
    nonneg_phi: bool = False
    f: str = "one"
    grid_origin: tuple = (-2.0, -2.0, -2.0)
    grid_size: tuple | None = (4.0, 4.0, 4.0)
    grid_dims: tuple | None = None
    h: float = 1.0 / 64.0
    h_list: tuple = ()
    excise: str = "none"
    excise_radius: float | None = None
    excise_coupling: float | None = None
    angle_tol: float = DEFAULT_ANGLE_TOL
    threads: int = 1
    out: str | None = None
    csv: str | None = None
    band: float | None = None
    oracle: float | None = None
    oracle_tol: float = 1e-10
    slice_axis: str | None = None
    slice_index: int | None = None
    slice_csv: str | None = None

    def resolved(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


_FLAG_SPECS = [
    # (name, kwargs) -- defaults are injected after config-file merging
    ("--config", dict(metavar="FILE", help="JSON file of option defaults")),
    ("--curve", dict(metavar="SPEC",
                     help=f"builtin curve {BUILTIN_CURVES} or a curve file")),
    ("--path", dict(choices=FORMULA_PATHS, help="field formula path")),
    ("--kernel", dict(choices=list(FAMILIES), help="delta profile family")),
    ("--eps", dict(metavar="R", help="kernel support radius")),
    ("--eps-coupling", dict(metavar="C", help="support radius as C*h")),
    ("--mode", dict(choices=["radial", "ratio"], help="distance-path weight mode")),
    ("--rho-floor", dict(metavar="R", help="denominator floor for ratio forms")),
    ("--phi", dict(metavar="SPEC", help="level set: builtin name, rho, or file:BASE")),
    ("--nonneg-phi", dict(action="store_true", default=None,
                          help="treat the level set as non-negative (half-line "
                               "convention) instead of signed")),
    ("--f", dict(metavar="SPEC", help="integrand: one|x2|z|poly:c,i,j,k;...")),
    ("--grid-origin", dict(metavar="X,Y[,Z]")),
    ("--grid-size", dict(metavar="SX,SY[,SZ]", help="physical box size")),
    ("--grid-dims", dict(metavar="NX,NY[,NZ]", help="cell counts (overrides size)")),
    ("--h", dict(metavar="H[,H2,...]", help="grid spacing; exact rationals "
                                            "like 1/64 are accepted")),
    ("--excise", dict(metavar="auto|none|I,J,...",
                      help="zero balls around non-smooth vertices")),
    ("--excise-radius", dict(metavar="R")),
    ("--excise-coupling", dict(metavar="C", help="excision radius as C*h")),
    ("--angle-tol", dict(metavar="RAD", help="tangent-continuity tolerance")),
    ("--threads", dict(metavar="N")),
    ("--out", dict(metavar="BASE", help="output basepath for field dumps")),
    ("--csv", dict(metavar="FILE", help="report CSV path")),
    ("--band", dict(metavar="R", help="distance band radius (default: full grid)")),
    ("--oracle", dict(metavar="V", help="reference value override")),
    ("--oracle-tol", dict(metavar="T")),
    ("--slice-axis", dict(choices=["x", "y", "z"])),
    ("--slice-index", dict(metavar="I")),
    ("--slice-csv", dict(metavar="FILE")),
]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linedelta",
        description="Regularized line-delta fields on Cartesian grids")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, blurb in [
            ("distance", "write distance and direction dumps for a curve"),
            ("field", "assemble a delta field and dump it"),
            ("integrate", "integrate field x f and print the value"),
            ("converge", "error ladder over resolutions, written as CSV")]:
        p = sub.add_parser(cmd, help=blurb)
        for name, kwargs in _FLAG_SPECS:
            kw = dict(kwargs)
            kw.setdefault("default", None)
            p.add_argument(name, **kw)
    return parser


def _floats(text, what, count=None):
    try:
        vals = tuple(float(x) for x in str(text).split(","))
    except ValueError as exc:
        raise UsageError(f"bad {what} {text!r}: {exc}") from exc
    if count and len(vals) not in count:
        raise UsageError(f"{what} needs {count} comma-separated values")
    return vals


def _ints(text, what):
    try:
        return tuple(int(x) for x in str(text).split(","))
    except ValueError as exc:
        raise UsageError(f"bad {what} {text!r}: {exc}") from exc


def _positive(value, what):
    try:
        v = float(value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad {what} {value!r}") from exc
    if not (np.isfinite(v) and v > 0):
        raise UsageError(f"{what} must be positive, got {value}")
    return v


def parse_config(argv) -> RunConfig:
    """argv plus optional config file -> validated RunConfig.

    Explicit flags override config-file values, which override defaults.
    Unknown config keys are rejected.
    """
    ns = _build_parser().parse_args(argv)
    given = {k: v for k, v in vars(ns).items()
             if k != "command" and v is not None}

    merged: dict = {}
    if "config" in given:
        cfg_path = Path(given.pop("config"))
        if not cfg_path.is_file():
            raise UsageError(f"config file not found: {cfg_path}")
        try:
            file_vals = json.loads(cfg_path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from exc
        known = {name.lstrip("-").replace("-", "_") for name, _ in _FLAG_SPECS}
        for key, val in file_vals.items():
            if key not in known or key == "config":
                raise UsageError(f"unknown config key {key!r}")
            merged[key] = val
    merged.update(given)
    threads_given = "threads" in merged

    cfg = RunConfig(command=ns.command)

    def take(key, conv=None):
        if key in merged:
            raw = merged.pop(key)
            setattr(cfg, key, conv(raw) if conv else raw)

    take("curve", str)
    take("path", str)
    take("kernel", str)
    take("eps", lambda v: _positive(v, "--eps"))
    take("eps_coupling", lambda v: _positive(v, "--eps-coupling"))
    take("mode", str)
    take("rho_floor", float)
    take("phi", str)
    take("nonneg_phi", bool)
    take("f", str)
    take("grid_origin", lambda v: _floats(v, "grid origin", (2, 3)))
    take("grid_size", lambda v: _floats(v, "grid size", (2, 3)))
    take("grid_dims", lambda v: _ints(v, "grid dims"))
    take("excise", str)
    take("excise_radius", lambda v: _positive(v, "--excise-radius"))
    take("excise_coupling", lambda v: _positive(v, "--excise-coupling"))
    take("angle_tol", lambda v: _positive(v, "--angle-tol"))
    take("threads", lambda v: max(1, int(v)))
    take("out", str)
    take("csv", str)
    take("band", lambda v: _positive(v, "--band"))
    take("oracle", float)
    take("oracle_tol", lambda v: _positive(v, "--oracle-tol"))
    take("slice_axis", str)
    take("slice_index", int)
    take("slice_csv", str)

    if "h" in merged:
        parts = str(merged.pop("h")).split(",")
        hs = tuple(parse_resolution(p) for p in parts)
        if ns.command == "converge":
            cfg.h_list = hs
            cfg.h = hs[0]
        else:
            if len(hs) != 1:
                raise UsageError("one resolution expected outside converge")
            cfg.h = hs[0]
    elif ns.command == "converge":
        cfg.h_list = (1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0)
    if merged:
        raise UsageError(f"unhandled options: {sorted(merged)}")

    if not threads_given:
        cfg.threads = max(1, os.cpu_count() or 1)

    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    if cfg.command == "converge":
        if len(cfg.h_list) < 2:
            raise UsageError("converge needs at least two resolutions")
        if any(b >= a for a, b in zip(cfg.h_list, cfg.h_list[1:])):
            raise UsageError("resolutions must be strictly decreasing")
    if cfg.grid_dims is not None:
        dims = cfg.grid_dims
    else:
        if cfg.grid_size is None:
            raise UsageError("give --grid-size or --grid-dims")
        dims = []
        for s in cfg.grid_size:
            n = s / cfg.h
            if abs(n - round(n)) > 1e-9:
                raise UsageError(f"grid size {s} is not a multiple of h={cfg.h}")
            dims.append(int(round(n)))
    if len(dims) != len(cfg.grid_origin):
        raise UsageError("grid origin and dims dimensionality mismatch")
    if any(n < 4 for n in dims):
        raise UsageError(f"grid dims must each be >= 4, got {tuple(dims)}")

    if cfg.eps is not None and cfg.eps <= 0:
        raise UsageError("--eps must be positive")
    if cfg.command == "converge" and cfg.grid_size is None:
        raise UsageError("converge resizes the grid per resolution and "
                         "needs --grid-size")
    needs_curve = (cfg.command == "distance"
                   or (cfg.command != "distance"
                       and cfg.path in ("distance", "levelset-codim2"))
                   or cfg.phi == "rho" or cfg.excise != "none")
    if needs_curve and cfg.curve is None:
        raise UsageError("this run needs --curve")
    if cfg.curve is not None and cfg.curve not in BUILTIN_CURVES:
        if not Path(cfg.curve).is_file():
            raise UsageError(f"curve file not found: {cfg.curve}")
    if cfg.path in ("levelset-codim2", "codim1") and cfg.command != "distance":
        if cfg.phi is None:
            raise UsageError(f"path {cfg.path} needs --phi")
        if cfg.phi.startswith("file:"):
            base = Path(cfg.phi[5:])
            if not base.with_suffix(".f64").is_file():
                raise UsageError(f"level-set dump not found: {base}.f64")
    if cfg.excise not in ("auto", "none"):
        _ints(cfg.excise, "--excise")  # vertex list form
    if (cfg.slice_csv is not None) != (cfg.slice_axis is not None
                                       and cfg.slice_index is not None):
        raise UsageError("slices need --slice-axis, --slice-index, --slice-csv")
    if cfg.command in ("distance", "field") and cfg.out is None:
        raise UsageError(f"{cfg.command} needs --out")
    if cfg.command == "converge" and cfg.csv is None:
        raise UsageError("converge needs --csv")


def _grid_from(cfg: RunConfig, h: float) -> GridSpec:
    if cfg.grid_dims is not None:
        dims = cfg.grid_dims
    else:
        dims = tuple(int(round(s / h)) for s in cfg.grid_size)
    return GridSpec(cfg.grid_origin, h, dims)


def _kernel_from(cfg: RunConfig, h: float) -> Kernel:
    eps = cfg.eps if cfg.eps is not None else cfg.eps_coupling * h
    return Kernel(cfg.kernel, eps)


def _excision_for(cfg: RunConfig, graph, kernel: Kernel):
    if cfg.excise == "none":
        return None
    if cfg.excise == "auto":
        idx = nonsmooth_vertices(graph, cfg.angle_tol)
    else:
        idx = list(_ints(cfg.excise, "--excise"))
        for i in idx:
            if not (0 <= i < len(graph.vertices)):
                raise UsageError(f"excision vertex {i} out of range")
    if not idx:
        return None
    radius = cfg.excise_radius if cfg.excise_radius is not None else kernel.epsilon
    return ExcisionSpec(graph.vertices[idx], radius)


def _assemble_field(cfg: RunConfig, grid: GridSpec, kernel: Kernel):
    graph = index = None
    if cfg.curve is not None:
        graph, _ = load_curve(cfg.curve)
        index = SpatialIndex(graph)
    if cfg.path == "distance":
        fld = delta_codim2_from_distance(graph, grid, kernel, mode=cfg.mode,
                                         rho_floor=cfg.rho_floor, index=index,
                                         threads=cfg.threads)
    elif cfg.path == "levelset-codim2":
        phi = make_levelset(cfg.phi, graph, index)
        fld = delta_codim2_from_levelset(phi, graph, grid, kernel,
                                         rho_floor=cfg.rho_floor, index=index,
                                         threads=cfg.threads)
    else:
        phi = make_levelset(cfg.phi, graph, index)
        fld = delta_codim1_from_levelset(phi, grid, kernel,
                                         signed_phi=not cfg.nonneg_phi,
                                         threads=cfg.threads)
    if graph is not None:
        spec = _excision_for(cfg, graph, kernel)
        if spec is not None:
            fld = apply_excision(fld, spec)
    return fld


def _maybe_slice(cfg: RunConfig, fld):
    if cfg.slice_csv is not None:
        write_slice_csv(fld, cfg.slice_axis, cfg.slice_index, cfg.slice_csv)
        Path(cfg.slice_csv + ".json").write_text(
            json.dumps(cfg.resolved(), indent=2, sort_keys=True) + "\n")


def _cmd_distance(cfg: RunConfig) -> int:
    graph, _ = load_curve(cfg.curve)
    grid = _grid_from(cfg, cfg.h)
    result = distance_grid(graph, grid, band=cfg.band, threads=cfg.threads)
    meta = cfg.resolved()
    write_field(result.rho, cfg.out + "_rho", "rho", meta)
    for axis, dirfield in zip("xyz", result.direction):
        write_field(dirfield, f"{cfg.out}_drho_{axis}", f"drho_{axis}", meta)
    _maybe_slice(cfg, result.rho)
    return 0


def _cmd_field(cfg: RunConfig) -> int:
    grid = _grid_from(cfg, cfg.h)
    kernel = _kernel_from(cfg, cfg.h)
    fld = _assemble_field(cfg, grid, kernel)
    write_field(fld, cfg.out + "_field", f"delta_{cfg.path}", cfg.resolved())
    _maybe_slice(cfg, fld)
    return 0


def _cmd_integrate(cfg: RunConfig) -> int:
    grid = _grid_from(cfg, cfg.h)
    kernel = _kernel_from(cfg, cfg.h)
    fld = _assemble_field(cfg, grid, kernel)
    value = grid_integrate(fld, integrand_from_spec(cfg.f), threads=cfg.threads)
    if cfg.out:
        write_field(fld, cfg.out + "_field", f"delta_{cfg.path}", cfg.resolved())
    print(f"{value:.17g}")
    return 0


def _cmd_converge(cfg: RunConfig) -> int:
    graph = None
    if cfg.curve is not None:
        graph, _ = load_curve(cfg.curve)
    phi = None
    if cfg.path in ("levelset-codim2", "codim1"):
        phi = make_levelset(cfg.phi, graph)
    excise = cfg.excise if cfg.excise in ("auto", "none") \
        else list(_ints(cfg.excise, "--excise"))
    report = convergence_study(
        path=cfg.path, integrand=integrand_from_spec(cfg.f),
        h_list=list(cfg.h_list), domain_origin=cfg.grid_origin,
        domain_size=cfg.grid_size, kernel_family=cfg.kernel, mode=cfg.mode,
        eps_coupling=cfg.eps_coupling, graph=graph, phi=phi,
        signed_phi=not cfg.nonneg_phi, excise=excise,
        excise_coupling=cfg.excise_coupling, angle_tol=cfg.angle_tol,
        rho_floor=cfg.rho_floor, oracle=cfg.oracle, oracle_tol=cfg.oracle_tol,
        metadata={"config": cfg.resolved()}, threads=cfg.threads)
    report.write_csv(cfg.csv)
    sys.stdout.write(report.summary_text())
    return 0


def run(config: RunConfig) -> int:
    """Execute a validated configuration; returns the process exit status."""
    handlers = {"distance": _cmd_distance, "field": _cmd_field,
                "integrate": _cmd_integrate, "converge": _cmd_converge}
    try:
        return handlers[config.command](config)
    except UsageError as exc:
        print(f"linedelta: error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"linedelta: numerical failure: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"linedelta: error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
