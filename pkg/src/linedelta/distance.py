"""Exact distance to a curve graph: point queries, a bounding-volume tree,
and grid evaluation (full or restricted to a band around the curve).

Every evaluation path reduces the same per-piece solves with the same
lexicographic (d2, edge, s) comparator, so point queries, brute-force loops,
and grid sweeps agree bit for bit on segment geometry and to solver tolerance
on Newton-solved geometry.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .curves import CurveGraph, Segment
from .errors import DegenerateEdgeError, UsageError
from .grid import GridSpec, ScalarField

VERTEX_SNAP = 1e-9        # foot within this of an edge end counts as the vertex
ON_CURVE_TOL = 1e-9       # distances below this snap to exactly zero
_CHUNK = 1 << 16


def _unit_toward(p, foot):
    """Exactly unit vector from the foot point toward the query; zero when
    the query sits on the curve (within the on-curve tolerance)."""
    diff = p - foot
    norm = math.sqrt(float(diff[0] ** 2 + diff[1] ** 2 + diff[2] ** 2))
    return diff / norm if norm > ON_CURVE_TOL else np.zeros(3)


@dataclass
class ClosestPointResult:
    """Distance rho, foot point, unit direction (query - foot)/rho (zero on
    the curve), and the feature the foot lies on."""

    rho: float
    foot: np.ndarray
    direction: np.ndarray
    feature: str                      # "edge-interior" | "vertex" | "endpoint"
    edge_index: int | None = None
    param: float | None = None        # arc length along the edge
    vertex_index: int | None = None


def closest_point_segment(p, a, b) -> ClosestPointResult:
    """Closest point on the closed segment a-b; feature is "endpoint" when
    the clamped parameter hits 0 or 1."""
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not np.any(a != b):
        raise DegenerateEdgeError("closest_point_segment: segment is a point")
    geom = Segment(a, b)
    d2, s = geom.closest_in_piece(p[None, :], 0.0, geom.length)
    rho = math.sqrt(float(d2[0]))
    if rho <= ON_CURVE_TOL:
        rho = 0.0
    foot = geom.points_at(float(s[0]))
    direction = _unit_toward(p, foot)
    at_end = s[0] <= VERTEX_SNAP or s[0] >= geom.length - VERTEX_SNAP
    return ClosestPointResult(rho=rho, foot=foot, direction=direction,
                              feature="endpoint" if at_end else "edge-interior",
                              param=float(s[0]))


class _Piece:
    """Arc-length slice of one edge plus a box containing it.

    Straight pieces carry an unpacked chord tuple so point queries can run
    in scalar arithmetic; the formula mirrors _chord_closest exactly.
    """

    __slots__ = ("edge_index", "s0", "s1", "lo", "hi", "chord")

    def __init__(self, edge_index, s0, s1, lo, hi, chord=None):
        self.edge_index = edge_index
        self.s0 = s0
        self.s1 = s1
        self.lo = lo
        self.hi = hi
        self.chord = chord


class _Node:
    __slots__ = ("lo", "hi", "left", "right", "pieces")

    def __init__(self, lo, hi, left=None, right=None, pieces=None):
        self.lo = lo
        self.hi = hi
        self.left = left
        self.right = right
        self.pieces = pieces


_LEAF_SIZE = 8


class SpatialIndex:
    """Bounding-volume tree over edge pieces of a curve graph.

    Queries return exactly the brute-force lexicographic minimum because
    nodes are pruned only when strictly farther than the current best.
    """

    def __init__(self, graph: CurveGraph):
        self.graph = graph
        pieces = []
        for ei, edge in enumerate(graph.edges):
            geom = edge.geometry
            for s0, s1 in geom.piece_spans():
                lo, hi = geom.piece_aabb(s0, s1)
                pieces.append(_Piece(ei, s0, s1, lo, hi,
                                     geom.chord_tuple(s0, s1)))
        self.pieces = pieces          # canonical order: (edge index, s0)
        self.root = self._build(list(range(len(pieces))))

    def _build(self, idx: list[int]) -> _Node:
        lo = np.min([self.pieces[i].lo for i in idx], axis=0)
        hi = np.max([self.pieces[i].hi for i in idx], axis=0)
        if len(idx) <= _LEAF_SIZE:
            return _Node(lo, hi, pieces=sorted(idx))
        cent = np.array([(self.pieces[i].lo + self.pieces[i].hi) for i in idx])
        axis = int(np.argmax(cent.max(axis=0) - cent.min(axis=0)))
        order = sorted(idx, key=lambda i: (self.pieces[i].lo[axis]
                                           + self.pieces[i].hi[axis]))
        half = len(order) // 2
        return _Node(lo, hi, left=self._build(order[:half]),
                     right=self._build(order[half:]))

    def query(self, p) -> tuple[float, int, float]:
        """Lexicographic-minimum (d2, edge_index, s) over all pieces."""
        p = np.asarray(p, dtype=float)
        px, py, pz = float(p[0]), float(p[1]), float(p[2])
        best = (math.inf, -1, math.inf)
        stack = [self.root]
        pt = p[None, :]
        edges = self.graph.edges
        while stack:
            node = stack.pop()
            if _aabb_d2_scalar(px, py, pz, node.lo, node.hi) > best[0]:
                continue
            if node.pieces is None:
                stack.append(node.left)
                stack.append(node.right)
                continue
            for i in node.pieces:
                pc = self.pieces[i]
                if _aabb_d2_scalar(px, py, pz, pc.lo, pc.hi) > best[0]:
                    continue
                if pc.chord is not None:
                    ax, ay, az, abx, aby, abz, dd, s0, s1 = pc.chord
                    t = ((px - ax) * abx + (py - ay) * aby
                         + (pz - az) * abz) / dd
                    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
                    cx, cy, cz = ax + t * abx, ay + t * aby, az + t * abz
                    d2 = (px - cx) ** 2 + (py - cy) ** 2 + (pz - cz) ** 2
                    cand = (d2, pc.edge_index, s0 + t * (s1 - s0))
                else:
                    d2a, sa = edges[pc.edge_index].geometry.closest_in_piece(
                        pt, pc.s0, pc.s1)
                    cand = (float(d2a[0]), pc.edge_index, float(sa[0]))
                if cand < best:
                    best = cand
        return best


def _aabb_d2_scalar(px, py, pz, lo, hi) -> float:
    dx = lo[0] - px if px < lo[0] else (px - hi[0] if px > hi[0] else 0.0)
    dy = lo[1] - py if py < lo[1] else (py - hi[1] if py > hi[1] else 0.0)
    dz = lo[2] - pz if pz < lo[2] else (pz - hi[2] if pz > hi[2] else 0.0)
    return dx * dx + dy * dy + dz * dz


def _aabb_box_d2(lo_a, hi_a, lo_b, hi_b) -> float:
    d = 0.0
    for a in range(3):
        gap = max(lo_a[a] - hi_b[a], lo_b[a] - hi_a[a], 0.0)
        d += gap * gap
    return d


def build_spatial_index(graph: CurveGraph) -> SpatialIndex:
    return SpatialIndex(graph)


def closest_point_graph(p, graph: CurveGraph,
                        index: SpatialIndex | None = None) -> ClosestPointResult:
    """Global closest point over all edges; ties broken by lowest edge index,
    then lowest arc-length parameter."""
    if index is None:
        index = SpatialIndex(graph)
    elif index.graph is not graph:
        raise UsageError("spatial index was built from a different graph")
    p = np.asarray(p, dtype=float)
    d2, ei, s = index.query(p)
    edge = graph.edges[ei]
    rho = math.sqrt(d2)
    if rho <= ON_CURVE_TOL:
        rho = 0.0
    foot = edge.geometry.points_at(s)
    direction = _unit_toward(p, foot)
    vertex_index = None
    feature = "edge-interior"
    if s <= VERTEX_SNAP:
        vertex_index, feature = edge.v0, "vertex"
    elif s >= edge.length - VERTEX_SNAP:
        vertex_index, feature = edge.v1, "vertex"
    return ClosestPointResult(rho=rho, foot=foot, direction=direction,
                              feature=feature, edge_index=ei, param=s,
                              vertex_index=vertex_index)


def _aabb_d2_cells(pts, lo, hi):
    """Per-point squared distance to a box (vectorized lower bound)."""
    acc = 0.0
    for a in range(3):
        gap = (np.maximum(lo[a] - pts[:, a], 0.0)
               + np.maximum(pts[:, a] - hi[a], 0.0))
        acc = acc + gap * gap
    return acc


def _lex_update(best_d2, best_edge, best_s, d2, e, s, where=None):
    """Scatter-update the running lexicographic (d2, edge, s) minimum.

    Order-independent: equal distances defer to the lower edge index, then
    the lower arc-length parameter.
    """
    if where is None:
        be, bs, bd2 = best_edge, best_s, best_d2
    else:
        bd2, be, bs = best_d2[where], best_edge[where], best_s[where]
    upd = (d2 < bd2) | ((d2 == bd2) & ((e < be) | ((e == be) & (s < bs))))
    if where is None:
        put = upd
        d2u, su = d2[upd], s[upd]
    else:
        put = where[upd]
        d2u, su = d2[upd], s[upd]
    best_d2[put] = d2u
    best_edge[put] = e
    best_s[put] = su


def _sweep_cells(index: SpatialIndex, grid: GridSpec, flat_idx: np.ndarray,
                 threads: int = 1):
    """Exact per-piece lexicographic reduction over the given cells.

    Returns (d2, edge, s) arrays aligned with flat_idx.  Pieces near a chunk
    are solved first so the per-cell box bound prunes the rest; pruning only
    drops strictly-farther pieces, and the chunking is fixed, so the result
    is identical for any evaluation order or thread count.
    """
    pieces = index.pieces
    edges = index.graph.edges
    n = flat_idx.shape[0]
    ranges = [(i, min(i + _CHUNK, n)) for i in range(0, n, _CHUNK)]

    def run(rng):
        i0, i1 = rng
        pts = grid.centers_at(flat_idx[i0:i1])
        if pts.shape[1] == 2:
            raise UsageError("curve distance requires a 3-D grid")
        lo_c = pts.min(axis=0)
        hi_c = pts.max(axis=0)
        m = i1 - i0
        best_d2 = np.full(m, np.inf)
        best_edge = np.full(m, -1, dtype=np.int64)
        best_s = np.full(m, np.inf)
        box_d2 = np.array([_aabb_box_d2(pc.lo, pc.hi, lo_c, hi_c)
                           for pc in pieces])
        worst = math.inf
        for j in np.argsort(box_d2, kind="stable"):
            if box_d2[j] > worst:
                continue
            pc = pieces[j]
            if box_d2[j] > 0.0 and np.isfinite(worst):
                lb = _aabb_d2_cells(pts, pc.lo, pc.hi)
                sel = np.flatnonzero(lb <= best_d2)
                if sel.size == 0:
                    continue
            else:
                sel = None
            sub = pts if sel is None else pts[sel]
            d2, s = edges[pc.edge_index].geometry.closest_in_piece(
                sub, pc.s0, pc.s1)
            _lex_update(best_d2, best_edge, best_s, d2, pc.edge_index, s,
                        where=sel)
            worst = float(best_d2.max())
        return best_d2, best_edge, best_s

    if threads > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run, ranges))
    else:
        parts = [run(r) for r in ranges]
    d2 = np.concatenate([p[0] for p in parts])
    ei = np.concatenate([p[1] for p in parts])
    s = np.concatenate([p[2] for p in parts])
    return d2, ei, s


def _band_candidates(index: SpatialIndex, grid: GridSpec, band: float):
    """Cells whose centers may lie within band of the curve.

    Returns (sorted unique flat indices, per-piece flat index arrays); a
    piece only ever needs to be solved against the cells of its own inflated
    box, because any cell it could win lies inside that box.
    """
    per_piece = []
    for pc in index.pieces:
        rng = grid.index_box(pc.lo - band, pc.hi + band)
        per_piece.append(None if rng is None else grid.box_flat_indices(*rng))
    live = [c for c in per_piece if c is not None and c.size]
    if not live:
        return np.empty(0, dtype=np.int64), per_piece
    return np.unique(np.concatenate(live)), per_piece


def _sweep_cells_banded(index: SpatialIndex, grid: GridSpec,
                        flat_sorted: np.ndarray, per_piece: list):
    """Like _sweep_cells but each piece visits only its own box cells.

    Pieces are processed in canonical order with strict-improvement updates,
    which reproduces the lexicographic (d2, edge, s) tie-break.
    """
    n = flat_sorted.shape[0]
    best_d2 = np.full(n, np.inf)
    best_edge = np.full(n, -1, dtype=np.int64)
    best_s = np.full(n, np.inf)
    edges = index.graph.edges
    for pc, cells in zip(index.pieces, per_piece):
        if cells is None or not cells.size:
            continue
        pos = np.searchsorted(flat_sorted, cells)
        pts = grid.centers_at(cells)
        d2, s = edges[pc.edge_index].geometry.closest_in_piece(pts, pc.s0, pc.s1)
        _lex_update(best_d2, best_edge, best_s, d2, pc.edge_index, s, where=pos)
    return best_d2, best_edge, best_s


def _rho_directions(index: SpatialIndex, grid: GridSpec, flat, d2, ei, s):
    """Turn sweep results into (rho, unit direction), chunked for memory."""
    n = flat.shape[0]
    rho = np.sqrt(d2)
    rho[rho <= ON_CURVE_TOL] = 0.0
    direction = np.empty((n, 3))
    for c0 in range(0, n, _CHUNK):
        c1 = min(c0 + _CHUNK, n)
        pts = grid.centers_at(flat[c0:c1])
        foot = np.empty_like(pts)
        for e in np.unique(ei[c0:c1]):
            sel = ei[c0:c1] == e
            foot[sel] = index.graph.edges[int(e)].geometry.points_at(
                s[c0:c1][sel])
        diff = pts - foot
        norm = np.sqrt((diff * diff).sum(axis=1))
        with np.errstate(invalid="ignore", divide="ignore"):
            direction[c0:c1] = np.where(norm[:, None] > ON_CURVE_TOL,
                                        diff / norm[:, None], 0.0)
    return rho, direction


def closest_cells(index: SpatialIndex, grid: GridSpec, flat: np.ndarray,
                  threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Exact (rho, direction) for the given cell centers, reduced with the
    same comparator as point queries."""
    if flat.shape[0] == 0:
        return np.empty(0), np.empty((0, 3))
    d2, ei, s = _sweep_cells(index, grid, flat, threads=threads)
    return _rho_directions(index, grid, flat, d2, ei, s)


@dataclass
class DistanceGridResult:
    """Distance samples plus the exact unit direction away from the curve.

    band=None means every cell was evaluated; otherwise cells farther than
    the band hold +inf distance and zero direction (documented sentinel).
    """

    rho: ScalarField
    direction: tuple[ScalarField, ...]
    band: float | None = None

    def direction_at_flat(self, flat: np.ndarray) -> np.ndarray:
        return np.stack([d.flat_values()[flat] for d in self.direction], axis=-1)


def distance_grid(graph: CurveGraph, grid: GridSpec, band: float | None = None,
                  index: SpatialIndex | None = None,
                  threads: int = 1) -> DistanceGridResult:
    """Distance and direction fields at every cell center.

    With a band radius only cells near the curve are solved, which is what
    field assembly needs: kernels vanish outside their support anyway.
    """
    if grid.ndim != 3:
        raise UsageError("distance grids are 3-D (plane curves are handled "
                         "through the codim-1 level-set path)")
    if index is None:
        index = SpatialIndex(graph)
    n_total = grid.cell_count
    rho_flat = np.full(n_total, np.inf)
    dir_flat = [np.zeros(n_total) for _ in range(3)]

    if band is None:
        flat = np.arange(n_total, dtype=np.int64)
        rho, direction = closest_cells(index, grid, flat, threads=threads)
    else:
        if band <= 0:
            raise UsageError("band radius must be positive")
        flat, per_piece = _band_candidates(index, grid, float(band))
        if flat.size:
            d2, ei, s = _sweep_cells_banded(index, grid, flat, per_piece)
            rho, direction = _rho_directions(index, grid, flat, d2, ei, s)
            keep = rho < band
            flat, rho, direction = flat[keep], rho[keep], direction[keep]

    if flat.size:
        rho_flat[flat] = rho
        for a in range(3):
            dir_flat[a][flat] = direction[:, a]
    if band is None and n_total and not np.all(np.isfinite(rho_flat)):
        raise UsageError("distance sweep left unevaluated cells")

    return DistanceGridResult(
        rho=ScalarField.from_flat(grid, rho_flat),
        direction=tuple(ScalarField.from_flat(grid, d) for d in dir_flat),
        band=band,
    )
