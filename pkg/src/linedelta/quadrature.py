"""Grid quadrature of field x integrand and convergence studies.

The grid rule is the midpoint sum h^d * sum(field * f) accumulated with
exact (Shewchuk) compensated summation over fixed chunks of the nonzero
cells in flat x-fastest order, so results are bit-identical for any thread
count and across reruns.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .curves import CurveGraph, line_integral_oracle, nonsmooth_vertices
from .distance import SpatialIndex
from .errors import EvaluationError, UsageError
from .fields import (ExcisionSpec, LevelSetInput, apply_excision,
                     delta_codim1_from_levelset, delta_codim2_from_distance,
                     delta_codim2_from_levelset)
from .grid import GridSpec, ScalarField
from .kernels import Kernel

_CHUNK = 1 << 16

FORMULA_PATHS = ("distance", "levelset-codim2", "codim1")


def grid_integrate(field: ScalarField, f, threads: int = 1) -> float:
    """Midpoint quadrature of field(x) * f(x) over the grid.

    f maps an (N, d) array of cell centers to (N,) values and is evaluated
    only where the field is nonzero; a non-finite value there names the
    offending cell.
    """
    grid = field.grid
    flat = field.flat_values()
    nz = np.flatnonzero(flat)
    if nz.size == 0:
        return 0.0
    ranges = [(i, min(i + _CHUNK, nz.size)) for i in range(0, nz.size, _CHUNK)]

    def run(rng):
        i0, i1 = rng
        idx = nz[i0:i1]
        pts = grid.centers_at(idx)
        fv = np.asarray(f(pts), dtype=float)
        if fv.shape != (idx.size,):
            raise UsageError("integrand must return one value per point")
        good = np.isfinite(fv)
        if not np.all(good):
            cell = int(idx[np.flatnonzero(~good)[0]])
            center = grid.centers_at(np.array([cell]))[0]
            raise EvaluationError(
                f"integrand is non-finite at cell {cell} (center {center})")
        return math.fsum(flat[idx] * fv)

    if threads > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            partials = list(ex.map(run, ranges))
    else:
        partials = [run(r) for r in ranges]
    return math.fsum(partials) * grid.cell_volume


# --------------------------------------------------------------------------
# integrands
# --------------------------------------------------------------------------

def _f_one(pts):
    return np.ones(pts.shape[0])


def _f_x2(pts):
    return pts[:, 0] ** 2


def _f_z(pts):
    if pts.shape[1] < 3:
        raise UsageError("integrand 'z' needs a 3-D grid")
    return pts[:, 2].copy()


INTEGRANDS = {"one": _f_one, "x2": _f_x2, "z": _f_z}


def make_polynomial(terms):
    """Integrand sum_k c * x^i * y^j * z^k from (c, i, j, k) tuples."""
    terms = [(float(c), int(i), int(j), int(k)) for c, i, j, k in terms]

    def poly(pts):
        acc = np.zeros(pts.shape[0])
        z = pts[:, 2] if pts.shape[1] > 2 else np.zeros(pts.shape[0])
        for c, i, j, k in terms:
            acc += c * pts[:, 0] ** i * pts[:, 1] ** j * z ** k
        return acc

    return poly


def integrand_from_spec(spec: str):
    """Registered name, or "poly:c,i,j,k;c,i,j,k;..." for a polynomial."""
    if spec in INTEGRANDS:
        return INTEGRANDS[spec]
    if spec.startswith("poly:"):
        try:
            terms = [tuple(float(x) for x in part.split(","))
                     for part in spec[5:].split(";") if part]
            if not terms or any(len(t) != 4 for t in terms):
                raise ValueError("each term needs c,i,j,k")
        except ValueError as exc:
            raise UsageError(f"bad polynomial spec {spec!r}: {exc}") from exc
        return make_polynomial(terms)
    raise UsageError(f"unknown integrand {spec!r}; registered: "
                     f"{sorted(INTEGRANDS)} or poly:c,i,j,k;...")


# --------------------------------------------------------------------------
# convergence studies
# --------------------------------------------------------------------------

@dataclass
class ConvergenceRow:
    h: float
    eps: float
    value: float
    abs_err: float
    rel_err: float


@dataclass
class ConvergenceReport:
    """Per-resolution integrals and errors plus the fitted observed order.

    The order is the mean of log(e_i/e_{i+1}) / log(h_i/h_{i+1}) over
    successive rows and is only reported with at least three rows.
    """

    rows: list[ConvergenceRow]
    observed_order: float | None
    reference: float
    metadata: dict = dataclass_field(default_factory=dict)

    def csv_text(self) -> str:
        lines = ["h,eps,value,abs_err,rel_err"]
        for r in self.rows:
            lines.append(f"{r.h!r},{r.eps!r},{r.value!r},{r.abs_err!r},{r.rel_err!r}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path, sidecar: bool = True):
        p = Path(path)
        p.write_text(self.csv_text())
        if sidecar:
            meta = dict(self.metadata)
            meta["reference"] = self.reference
            meta["observed_order"] = self.observed_order
            p.with_suffix(p.suffix + ".json").write_text(
                json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")

    def summary_text(self) -> str:
        lines = []
        for r in self.rows:
            lines.append(f"h={r.h:<12g} eps={r.eps:<12g} value={r.value:.12g} "
                         f"abs_err={r.abs_err:.3e} rel_err={r.rel_err:.3e}")
        if self.observed_order is not None:
            lines.append(f"observed order p = {self.observed_order:.3f}")
        else:
            lines.append("observed order p: not reported (needs >= 3 rows)")
        return "\n".join(lines) + "\n"


def fit_observed_order(h_list, errors) -> float | None:
    """Mean successive-ratio order; None with fewer than three usable rows."""
    if len(h_list) < 3:
        return None
    ps = []
    for i in range(len(h_list) - 1):
        e0, e1 = errors[i], errors[i + 1]
        if e0 <= 0 or e1 <= 0:
            continue
        ps.append(math.log(e0 / e1) / math.log(h_list[i] / h_list[i + 1]))
    return sum(ps) / len(ps) if ps else None


def _grid_for(h: float, origin, size) -> GridSpec:
    dims = []
    for s in size:
        n = s / h
        if abs(n - round(n)) > 1e-9:
            raise UsageError(f"domain size {s} is not a multiple of h = {h}")
        dims.append(int(round(n)))
    return GridSpec(tuple(origin), float(h), tuple(dims))


def convergence_study(*, path: str, integrand, h_list, domain_origin,
                      domain_size, kernel_family: str = "cosine",
                      mode: str = "radial", eps_coupling: float = 4.0,
                      graph: CurveGraph | None = None,
                      phi: LevelSetInput | None = None,
                      signed_phi: bool = True,
                      excise: str | list = "none",
                      excise_coupling: float | None = None,
                      angle_tol: float | None = None,
                      rho_floor: float | None = None,
                      oracle: float | None = None, oracle_tol: float = 1e-10,
                      metadata: dict | None = None,
                      threads: int = 1) -> ConvergenceReport:
    """Integrate the requested delta field against the integrand across a
    ladder of resolutions and report errors against the reference value.

    The kernel support follows eps = eps_coupling * h; auto excision zeroes
    balls of radius excise_coupling * h around the non-smooth vertices.
    """
    if path not in FORMULA_PATHS:
        raise UsageError(f"unknown formula path {path!r}; choose {FORMULA_PATHS}")
    h_list = [float(h) for h in h_list]
    if len(h_list) < 2:
        raise UsageError("a convergence study needs at least two resolutions")
    if any(h2 >= h1 for h1, h2 in zip(h_list, h_list[1:])):
        raise UsageError("resolutions must be strictly decreasing")
    if path == "distance" and graph is None:
        raise UsageError("the distance path needs a curve graph")
    if path == "levelset-codim2" and (graph is None or phi is None):
        raise UsageError("the codim-2 level-set path needs a curve and a level set")
    if path == "codim1" and phi is None:
        raise UsageError("the codim-1 path needs a level set")

    if oracle is None:
        if graph is None:
            raise UsageError("no reference value: give oracle= or a curve graph")
        oracle = line_integral_oracle(graph, integrand, oracle_tol)

    index = SpatialIndex(graph) if graph is not None else None
    excise_coupling = eps_coupling if excise_coupling is None else excise_coupling
    if isinstance(excise, str) and excise not in ("none", "auto"):
        raise UsageError(f"excise must be 'none', 'auto', or vertex indices, "
                         f"got {excise!r}")

    rows = []
    for h in h_list:
        grid = _grid_for(h, domain_origin, domain_size)
        kernel = Kernel(kernel_family, eps_coupling * h)
        if path == "distance":
            fld = delta_codim2_from_distance(graph, grid, kernel, mode=mode,
                                             rho_floor=rho_floor, index=index,
                                             threads=threads)
        elif path == "levelset-codim2":
            fld = delta_codim2_from_levelset(phi, graph, grid, kernel,
                                             rho_floor=rho_floor, index=index,
                                             threads=threads)
        else:
            fld = delta_codim1_from_levelset(phi, grid, kernel,
                                             signed_phi=signed_phi,
                                             threads=threads)
        centers = _excision_centers(excise, graph, angle_tol)
        if centers is not None and len(centers):
            fld = apply_excision(fld, ExcisionSpec(centers, excise_coupling * h))
        value = grid_integrate(fld, integrand, threads=threads)
        abs_err = abs(value - oracle)
        rel_err = abs_err / abs(oracle) if oracle != 0 else math.inf
        rows.append(ConvergenceRow(h=h, eps=kernel.epsilon, value=value,
                                   abs_err=abs_err, rel_err=rel_err))

    order = fit_observed_order([r.h for r in rows], [r.abs_err for r in rows])
    meta = {
        "path": path, "kernel": kernel_family, "mode": mode,
        "eps_coupling": eps_coupling, "excise": str(excise),
        "excise_coupling": excise_coupling,
        "domain_origin": list(domain_origin), "domain_size": list(domain_size),
        "h_list": h_list, "threads": threads,
    }
    if metadata:
        meta.update(metadata)
    return ConvergenceReport(rows=rows, observed_order=order,
                             reference=oracle, metadata=meta)


def _excision_centers(excise, graph, angle_tol):
    if isinstance(excise, str):
        if excise == "none":
            return None
        if excise == "auto":
            if graph is None:
                raise UsageError("auto excision needs a curve graph")
            kwargs = {} if angle_tol is None else {"angle_tol": angle_tol}
            idx = nonsmooth_vertices(graph, **kwargs)
            return graph.vertices[idx] if idx else np.zeros((0, 3))
    idx = [int(i) for i in excise]
    if graph is None:
        raise UsageError("vertex-list excision needs a curve graph")
    for i in idx:
        if not (0 <= i < len(graph.vertices)):
            raise UsageError(f"excision vertex {i} out of range")
    return graph.vertices[idx] if idx else np.zeros((0, 3))


def parse_resolution(text: str) -> float:
    """Grid spacing from a decimal or exact rational string like "1/64"."""
    try:
        h = float(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad resolution {text!r}: {exc}") from exc
    if h <= 0:
        raise UsageError(f"resolution must be positive, got {text!r}")
    return h
