"""Named demo curves shipped as data files, and registered level sets.

Built-in curves let every study run without authoring geometry: circle
(unit circle in the z = 0 plane), helix (unit radius, pitch 1, one turn),
lgraph (two unit legs meeting at a right angle), tjunction (three segments
from one vertex), and fig3 (an open self-crossing component with two corners
plus a smooth closed loop).
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .curves import CurveGraph, load_curve_graph
from .distance import SpatialIndex, closest_cells, _sweep_cells
from .errors import UsageError
from .fields import LevelSetInput
from .grid import read_field

BUILTIN_CURVES = ("circle", "helix", "lgraph", "tjunction", "fig3")


def builtin_curve(name: str) -> CurveGraph:
    if name not in BUILTIN_CURVES:
        raise UsageError(f"unknown builtin curve {name!r}; "
                         f"available: {BUILTIN_CURVES}")
    ref = resources.files("linedelta").joinpath(f"data/{name}.json")
    with resources.as_file(ref) as p:
        return load_curve_graph(p)


def load_curve(spec: str) -> tuple[CurveGraph, str]:
    """Builtin name or path to a curve file; returns (graph, identifier)."""
    if spec in BUILTIN_CURVES:
        return builtin_curve(spec), spec
    return load_curve_graph(spec), spec


def _phi_r2(pts):
    return pts[:, 0] ** 2 + pts[:, 1] ** 2


def _phi_elliptic(pts):
    return pts[:, 0] ** 2 + 4.0 * pts[:, 1] ** 2


def _phi_circle2d(pts):
    return np.sqrt(pts[:, 0] ** 2 + pts[:, 1] ** 2) - 1.0


def _phi_sphere(pts):
    return np.sqrt((pts ** 2).sum(axis=1)) - 1.0


BUILTIN_LEVELSETS = {
    "r2": _phi_r2,                # x^2 + y^2, vanishing on the z-axis
    "elliptic": _phi_elliptic,    # x^2 + 4 y^2, vanishing on the z-axis
    "circle2d": _phi_circle2d,    # signed distance to the unit circle (2-D)
    "sphere": _phi_sphere,        # signed distance to the unit sphere (3-D)
}


def distance_levelset(graph: CurveGraph,
                      index: SpatialIndex | None = None) -> LevelSetInput:
    """phi = exact distance to the curve, as an analytic callback."""
    idx = index if index is not None else SpatialIndex(graph)

    def rho(pts):
        pts = np.asarray(pts, dtype=float)
        out = np.empty(pts.shape[0])
        for i0 in range(0, pts.shape[0], 1 << 16):
            sub = pts[i0:i0 + (1 << 16)]
            d2 = None
            for pc in idx.pieces:
                d2p, _ = idx.graph.edges[pc.edge_index].geometry.closest_in_piece(
                    sub, pc.s0, pc.s1)
                d2 = d2p if d2 is None else np.minimum(d2, d2p)
            out[i0:i0 + (1 << 16)] = np.sqrt(d2)
        return out

    return LevelSetInput.from_callback(rho)


def make_levelset(spec: str, graph: CurveGraph | None = None,
                  index: SpatialIndex | None = None) -> LevelSetInput:
    """Builtin level set, "rho" (distance to the given curve), or
    "file:<basepath>" for a sampled field dump."""
    if spec in BUILTIN_LEVELSETS:
        return LevelSetInput.from_callback(BUILTIN_LEVELSETS[spec])
    if spec == "rho":
        if graph is None:
            raise UsageError("level set 'rho' needs a curve")
        return distance_levelset(graph, index)
    if spec.startswith("file:"):
        field, _ = read_field(spec[5:])
        return LevelSetInput.from_samples(field)
    raise UsageError(f"unknown level set {spec!r}; available: "
                     f"{sorted(BUILTIN_LEVELSETS)}, rho, file:<basepath>")
