"""Curve graphs with smooth edges, arc-length parametrization, and the
reference line integral used to judge every grid method.

A curve is a topological graph: vertices in 3-D plus edges whose geometry is
one of Segment, Polyline, CircularArc, or Helix.  Smooth closed curves are
single-edge loops.  Every edge is parametrized by arc length s in [0, L].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AccuracyError, DegenerateEdgeError, UsageError

ENDPOINT_TOL = 1e-9           # edge ends must coincide with their vertices
DEFAULT_ANGLE_TOL = 1e-3      # radians; numerical surrogate for tangent continuity

_TWO_PI = 2.0 * math.pi

# 5-point Gauss-Legendre rule on [-1, 1]
_GL5_T = np.array([-0.906179845938664, -0.5384693101056831, 0.0,
                   0.5384693101056831, 0.906179845938664])
_GL5_W = np.array([0.23692688505618908, 0.47862867049936647,
                   0.5688888888888889, 0.47862867049936647,
                   0.23692688505618908])


def _as_point(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if a.shape != (3,):
        raise UsageError(f"expected a 3-D point, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise UsageError(f"point has non-finite coordinates: {a}")
    return a


def _unit(v, what: str) -> np.ndarray:
    v = _as_point(v)
    n = float(np.linalg.norm(v))
    if abs(n - 1.0) > 1e-9:
        raise UsageError(f"{what} must be a unit vector (|v| = {n})")
    return v


def _chord_closest(pts, a, b, dd, s0, s1):
    """Closest point on the chord a-b for query points (N,3).

    dd is |b-a|^2 precomputed.  Returns (d2, s) with s interpolated between
    the arc-length bounds s0, s1.  The arithmetic is fixed so every caller
    (point queries, grid sweeps, brute-force loops) produces identical bits.
    """
    px, py, pz = pts[..., 0], pts[..., 1], pts[..., 2]
    abx, aby, abz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    t = ((px - a[0]) * abx + (py - a[1]) * aby + (pz - a[2]) * abz) / dd
    t = np.clip(t, 0.0, 1.0)
    cx = a[0] + t * abx
    cy = a[1] + t * aby
    cz = a[2] + t * abz
    d2 = (px - cx) ** 2 + (py - cy) ** 2 + (pz - cz) ** 2
    return d2, s0 + t * (s1 - s0)


class EdgeGeometry:
    """Smooth edge geometry parametrized by arc length.

    Subclasses provide exact lengths, point/tangent evaluation, a split into
    pieces with containing boxes, and a closest-point solve restricted to a
    piece's arc-length range.  Instances are immutable after construction.
    """

    length: float = 0.0

    def points_at(self, s) -> np.ndarray:
        raise NotImplementedError

    def tangent_at(self, s: float) -> np.ndarray:
        raise NotImplementedError

    def piece_spans(self) -> list[tuple[float, float]]:
        raise NotImplementedError

    def piece_aabb(self, s0: float, s1: float) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def closest_in_piece(self, pts, s0: float, s1: float):
        """(d2, s) of the closest point restricted to one piece span."""
        raise NotImplementedError

    def chord_tuple(self, s0: float, s1: float):
        """For straight pieces: the exact (a, ab, |ab|^2, s0, s1) scalars the
        vectorized solve uses, so scalar point queries match it bit for bit."""
        return None

    def reversed(self) -> "EdgeGeometry":
        raise NotImplementedError


class Segment(EdgeGeometry):
    """Straight segment between two points."""

    def __init__(self, a, b):
        self.a = _as_point(a)
        self.b = _as_point(b)
        d = self.b - self.a
        length = float(np.linalg.norm(d))
        if length <= 0.0:
            raise DegenerateEdgeError("segment endpoints coincide")
        self.length = length
        self._dir = d / length
        self._dd = float(np.dot(d, d))

    def points_at(self, s):
        s = np.asarray(s, dtype=float)
        return self.a + np.multiply.outer(s, self._dir)

    def tangent_at(self, s):
        return self._dir.copy()

    def piece_spans(self):
        return [(0.0, self.length)]

    def piece_aabb(self, s0, s1):
        p = self.points_at(np.array([s0, s1]))
        return p.min(axis=0), p.max(axis=0)

    def closest_in_piece(self, pts, s0, s1):
        pa, pb, dd = self._span_chord(s0, s1)
        return _chord_closest(pts, pa, pb, dd, s0, s1)

    def _span_chord(self, s0, s1):
        pa = self.points_at(s0) if s0 > 0.0 else self.a
        pb = self.points_at(s1) if s1 < self.length else self.b
        return pa, pb, float(np.dot(pb - pa, pb - pa))

    def chord_tuple(self, s0, s1):
        a, b, dd = self._span_chord(s0, s1)
        return (float(a[0]), float(a[1]), float(a[2]),
                float(b[0] - a[0]), float(b[1] - a[1]), float(b[2] - a[2]),
                dd, s0, s1)

    def reversed(self):
        return Segment(self.b, self.a)


class Polyline(EdgeGeometry):
    """Piecewise-linear path through >= 2 points; one piece per chord."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 2:
            raise UsageError("polyline needs an (N, 3) array with N >= 2")
        if not np.all(np.isfinite(pts)):
            raise UsageError("polyline has non-finite coordinates")
        seg = np.diff(pts, axis=0)
        lens = np.sqrt((seg * seg).sum(axis=1))
        if np.any(lens <= 0.0):
            raise DegenerateEdgeError("polyline has a zero-length chord")
        self.points = pts
        self._seg_len = lens
        self._knots = np.concatenate([[0.0], np.cumsum(lens)])
        self.length = float(self._knots[-1])
        self._dirs = seg / lens[:, None]
        self._dd = (seg * seg).sum(axis=1)

    def _locate(self, s):
        i = np.searchsorted(self._knots, s, side="right") - 1
        return np.clip(i, 0, len(self._seg_len) - 1)

    def points_at(self, s):
        s = np.asarray(s, dtype=float)
        i = self._locate(s)
        t = (s - self._knots[i]) / self._seg_len[i]
        return self.points[i] + t[..., None] * (self.points[i + 1] - self.points[i])

    def tangent_at(self, s):
        i = int(self._locate(float(s)))
        return self._dirs[i].copy()

    def piece_spans(self):
        return [(float(self._knots[i]), float(self._knots[i + 1]))
                for i in range(len(self._seg_len))]

    def piece_aabb(self, s0, s1):
        i = int(self._locate(0.5 * (s0 + s1)))
        p = self.points[i:i + 2]
        return p.min(axis=0), p.max(axis=0)

    def closest_in_piece(self, pts, s0, s1):
        i = int(self._locate(0.5 * (s0 + s1)))
        return _chord_closest(pts, self.points[i], self.points[i + 1],
                              float(self._dd[i]), float(self._knots[i]),
                              float(self._knots[i + 1]))

    def chord_tuple(self, s0, s1):
        i = int(self._locate(0.5 * (s0 + s1)))
        a, b = self.points[i], self.points[i + 1]
        return (float(a[0]), float(a[1]), float(a[2]),
                float(b[0] - a[0]), float(b[1] - a[1]), float(b[2] - a[2]),
                float(self._dd[i]), float(self._knots[i]),
                float(self._knots[i + 1]))

    def reversed(self):
        return Polyline(self.points[::-1])


_MAX_PIECE_ANGLE = math.pi / 4.0


class CircularArc(EdgeGeometry):
    """Arc  center + r (cos t u + sin t v)  for t in [t0, t1], span <= 2 pi.

    u, v is an orthonormal in-plane basis; a full loop uses span = 2 pi.
    """

    def __init__(self, center, radius, basis_u, basis_v, angles):
        self.center = _as_point(center)
        self.radius = float(radius)
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise DegenerateEdgeError(f"arc radius must be positive, got {radius}")
        self.u = _unit(basis_u, "arc basis_u")
        self.v = _unit(basis_v, "arc basis_v")
        if abs(float(np.dot(self.u, self.v))) > 1e-9:
            raise UsageError("arc basis vectors must be orthogonal")
        self.t0, self.t1 = float(angles[0]), float(angles[1])
        span = self.t1 - self.t0
        if not (np.isfinite(span) and span > 0.0):
            raise DegenerateEdgeError("arc angle span must be positive and finite")
        if span > _TWO_PI + 1e-9:
            raise UsageError("arc span exceeds a full turn")
        self.span = span
        self.length = self.radius * span

    def _theta(self, s):
        return self.t0 + np.asarray(s, dtype=float) / self.radius

    def points_at(self, s):
        th = self._theta(s)
        return (self.center
                + self.radius * (np.multiply.outer(np.cos(th), self.u)
                                 + np.multiply.outer(np.sin(th), self.v)))

    def tangent_at(self, s):
        th = float(self._theta(float(s)))
        return -math.sin(th) * self.u + math.cos(th) * self.v

    def piece_spans(self):
        n = max(1, int(math.ceil(self.span / _MAX_PIECE_ANGLE)))
        s_knots = np.linspace(0.0, self.length, n + 1)
        return [(float(s_knots[i]), float(s_knots[i + 1])) for i in range(n)]

    def piece_aabb(self, s0, s1):
        ta, tb = float(self._theta(s0)), float(self._theta(s1))
        los, his = [], []
        for a in range(3):
            A = self.radius * self.u[a]
            B = self.radius * self.v[a]
            ext = _trig_extrema(A, B, 0.0, ta, tb)
            los.append(self.center[a] + min(ext))
            his.append(self.center[a] + max(ext))
        return np.array(los), np.array(his)

    def closest_in_piece(self, pts, s0, s1):
        ta, tb = float(self._theta(s0)), float(self._theta(s1))
        q = pts - self.center
        x = q[..., 0] * self.u[0] + q[..., 1] * self.u[1] + q[..., 2] * self.u[2]
        y = q[..., 0] * self.v[0] + q[..., 1] * self.v[1] + q[..., 2] * self.v[2]
        qq = q[..., 0] ** 2 + q[..., 1] ** 2 + q[..., 2] ** 2
        r = self.radius
        base = qq + r * r          # d2(theta) = base - 2 r (x cos + y sin)
        tp = np.arctan2(y, x)
        # representative of tp (mod 2 pi) in [ta, ta + 2 pi)
        k = np.ceil((ta - tp) / _TWO_PI)
        t_int = tp + _TWO_PI * k
        inside = t_int <= tb
        d2_int = np.maximum(base - 2.0 * r * np.sqrt(x * x + y * y), 0.0)
        best_d2 = np.where(inside, d2_int, np.inf)
        best_t = np.where(inside, t_int, np.inf)
        for tc in (ta, tb):
            d2c = np.maximum(base - 2.0 * r * (x * math.cos(tc)
                                               + y * math.sin(tc)), 0.0)
            upd = (d2c < best_d2) | ((d2c == best_d2) & (tc < best_t))
            best_d2 = np.where(upd, d2c, best_d2)
            best_t = np.where(upd, tc, best_t)
        # the dot form selects the winner cheaply but cancels near the arc;
        # recompute the winning distance from the explicit closest point
        foot = (self.center
                + r * (np.multiply.outer(np.cos(best_t), self.u)
                       + np.multiply.outer(np.sin(best_t), self.v)))
        diff = pts - foot
        d2 = diff[..., 0] ** 2 + diff[..., 1] ** 2 + diff[..., 2] ** 2
        return d2, (best_t - self.t0) * self.radius

    def reversed(self):
        # same point set traversed as t -> t1 - t': rotate the basis to the
        # old end angle and flip the in-plane orientation
        u2 = math.cos(self.t1) * self.u + math.sin(self.t1) * self.v
        v2 = math.sin(self.t1) * self.u - math.cos(self.t1) * self.v
        return CircularArc(self.center, self.radius, u2, v2, (0.0, self.span))


def _trig_extrema(A, B, m, ta, tb):
    """Values of A cos t + B sin t + m t at endpoints and interior criticals."""
    vals = [A * math.cos(ta) + B * math.sin(ta) + m * ta,
            A * math.cos(tb) + B * math.sin(tb) + m * tb]
    R = math.hypot(A, B)
    if R == 0.0:
        return vals
    phase = math.atan2(B, A)
    if m == 0.0:
        crit = [phase, phase + math.pi]
    else:
        ratio = m / R
        if abs(ratio) > 1.0:
            return vals
        d = math.asin(ratio)
        # derivative -A sin t + B cos t + m = m - R sin(t - phase)
        crit = [phase + d, phase + math.pi - d]
    for c in crit:
        k0 = math.floor((ta - c) / _TWO_PI)
        for k in (k0, k0 + 1, k0 + 2):
            t = c + _TWO_PI * k
            if ta <= t <= tb:
                vals.append(A * math.cos(t) + B * math.sin(t) + m * t)
    return vals


class Helix(EdgeGeometry):
    """Circular helix  base + r(cos t u + sin t v) + (pitch/2 pi) t w,  w = u x v.

    pitch is the axial advance per full turn; pitch = 0 degenerates to an arc
    but stays valid.  The angle span may exceed a full turn.
    """

    _NEWTON_SEEDS = 16   # distributed across the whole edge span
    _NEWTON_ITERS = 30
    _CHORD_TOL = 1e-10   # fallback polyline sampling accuracy

    def __init__(self, base, basis_u, basis_v, radius, pitch, angles):
        self.base = _as_point(base)
        self.u = _unit(basis_u, "helix basis_u")
        self.v = _unit(basis_v, "helix basis_v")
        if abs(float(np.dot(self.u, self.v))) > 1e-9:
            raise UsageError("helix basis vectors must be orthogonal")
        self.w = np.cross(self.u, self.v)
        self.radius = float(radius)
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise DegenerateEdgeError(f"helix radius must be positive, got {radius}")
        self.pitch = float(pitch)
        if not np.isfinite(self.pitch):
            raise UsageError("helix pitch must be finite")
        self.t0, self.t1 = float(angles[0]), float(angles[1])
        if not (np.isfinite(self.t1 - self.t0) and self.t1 > self.t0):
            raise DegenerateEdgeError("helix angle span must be positive and finite")
        self.slope = self.pitch / _TWO_PI
        self.speed = math.hypot(self.radius, self.slope)
        self.span = self.t1 - self.t0
        self.length = self.speed * self.span

    def _theta(self, s):
        return self.t0 + np.asarray(s, dtype=float) / self.speed

    def _point_of_theta(self, th):
        th = np.asarray(th, dtype=float)
        return (self.base
                + self.radius * (np.multiply.outer(np.cos(th), self.u)
                                 + np.multiply.outer(np.sin(th), self.v))
                + np.multiply.outer(self.slope * th, self.w))

    def points_at(self, s):
        return self._point_of_theta(self._theta(s))

    def tangent_at(self, s):
        th = float(self._theta(float(s)))
        d = (self.radius * (-math.sin(th) * self.u + math.cos(th) * self.v)
             + self.slope * self.w)
        return d / self.speed

    def piece_spans(self):
        n = max(1, int(math.ceil(self.span / _MAX_PIECE_ANGLE)))
        s_knots = np.linspace(0.0, self.length, n + 1)
        return [(float(s_knots[i]), float(s_knots[i + 1])) for i in range(n)]

    def piece_aabb(self, s0, s1):
        ta, tb = float(self._theta(s0)), float(self._theta(s1))
        los, his = [], []
        for a in range(3):
            A = self.radius * self.u[a]
            B = self.radius * self.v[a]
            m = self.slope * self.w[a]
            ext = _trig_extrema(A, B, m, ta, tb)
            los.append(self.base[a] + min(ext))
            his.append(self.base[a] + max(ext))
        return np.array(los), np.array(his)

    def _d2_and_grad(self, pts, th):
        """Squared distance, its theta-derivative, and second derivative."""
        p = self._point_of_theta(th)
        e = pts - p
        cs, sn = np.cos(th), np.sin(th)
        dx = (self.radius * (np.multiply.outer(-sn, self.u)
                             + np.multiply.outer(cs, self.v))
              + self.slope * self.w)
        ddx = -self.radius * (np.multiply.outer(cs, self.u)
                              + np.multiply.outer(sn, self.v))
        d2 = (e * e).sum(axis=-1)
        g = -2.0 * (e * dx).sum(axis=-1)
        H = 2.0 * ((dx * dx).sum(axis=-1) - (e * ddx).sum(axis=-1))
        return d2, g, H

    def closest_in_piece(self, pts, s0, s1):
        ta, tb = float(self._theta(s0)), float(self._theta(s1))
        n = pts.shape[0]
        # the edge-wide seed budget, prorated to this piece's share of the span
        n_seeds = max(2, int(math.ceil(self._NEWTON_SEEDS * (tb - ta) / self.span)))
        seeds = ta + (np.arange(n_seeds) + 0.5) / n_seeds * (tb - ta)
        th = np.broadcast_to(seeds[:, None], (n_seeds, n)).copy()
        P = np.broadcast_to(pts, (n_seeds,) + pts.shape)
        max_step = 0.5 * (tb - ta)
        for _ in range(self._NEWTON_ITERS):
            _, g, H = self._d2_and_grad(P, th)
            step = np.where(H > 1e-300, -g / np.where(H > 1e-300, H, 1.0), 0.0)
            step = np.clip(step, -max_step, max_step)
            th = np.clip(th + step, ta, tb)
        # candidates: converged interior angles plus the two span endpoints
        cand = np.concatenate([th, np.full((1, n), ta), np.full((1, n), tb)])
        best_d2 = None
        best_t = None
        resid = None
        for row in cand:
            d2, g, _ = self._d2_and_grad(pts, row)
            if best_d2 is None:
                best_d2, best_t, resid = d2, row.copy(), np.abs(g)
            else:
                upd = (d2 < best_d2) | ((d2 == best_d2) & (row < best_t))
                best_d2 = np.where(upd, d2, best_d2)
                best_t = np.where(upd, row, best_t)
                resid = np.where(upd, np.abs(g), resid)
        # Newton failure: interior winner with a large residual slope
        interior = (best_t > ta) & (best_t < tb)
        scale = self.speed * (self.speed + np.sqrt(best_d2))
        bad = interior & (resid > 1e-7 * np.maximum(scale, 1e-30))
        if np.any(bad):
            fb_d2, fb_t = self._fallback_sampling(pts[bad], ta, tb)
            take = fb_d2 < best_d2[bad]
            idx = np.flatnonzero(bad)[take]
            best_d2[idx] = fb_d2[take]
            best_t[idx] = fb_t[take]
        return best_d2, (best_t - self.t0) * self.speed

    def _fallback_sampling(self, pts, ta, tb):
        """Dense chordal sampling when the Newton solve stalls."""
        dt = math.sqrt(8.0 * self._CHORD_TOL / self.radius)
        m = int(math.ceil((tb - ta) / dt)) + 1
        m = min(m, 4_000_000)
        th = np.linspace(ta, tb, m)
        best_d2 = np.full(pts.shape[0], np.inf)
        best_t = np.full(pts.shape[0], ta)
        chunk = max(1, 8_000_000 // max(1, pts.shape[0]))
        for i in range(0, m, chunk):
            sub = th[i:i + chunk]
            p = self._point_of_theta(sub)          # (M, 3)
            diff = pts[:, None, :] - p[None, :, :]
            d2 = (diff * diff).sum(axis=-1)
            j = np.argmin(d2, axis=1)
            d2m = d2[np.arange(pts.shape[0]), j]
            upd = d2m < best_d2
            best_d2[upd] = d2m[upd]
            best_t[upd] = sub[j[upd]]
        return best_d2, best_t

    def reversed(self):
        # same point set traversed as t -> t1 - t'.  The flipped in-plane
        # orientation also flips w = u x v, so the pitch keeps its sign.
        u2 = math.cos(self.t1) * self.u + math.sin(self.t1) * self.v
        v2 = math.sin(self.t1) * self.u - math.cos(self.t1) * self.v
        base2 = self.base + self.slope * self.t1 * self.w
        return Helix(base2, u2, v2, self.radius, self.pitch, (0.0, self.span))


class Edge:
    """Directed edge of a curve graph: geometry plus two vertex references."""

    def __init__(self, geometry: EdgeGeometry, v0: int, v1: int):
        self.geometry = geometry
        self.v0 = int(v0)
        self.v1 = int(v1)

    @property
    def length(self) -> float:
        return self.geometry.length


class CurveGraph:
    """Vertices plus smooth edges; loops reference the same vertex twice."""

    def __init__(self, vertices, edges: list[Edge]):
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise UsageError("vertices must be an (N, 3) array")
        if not np.all(np.isfinite(verts)):
            raise UsageError("vertex coordinates must be finite")
        if not edges:
            raise UsageError("curve graph needs at least one edge")
        self.vertices = verts
        self.edges = list(edges)
        for ei, e in enumerate(self.edges):
            for vi, s in ((e.v0, 0.0), (e.v1, e.length)):
                if not (0 <= vi < len(verts)):
                    raise UsageError(f"edge {ei} references missing vertex {vi}")
                gap = float(np.linalg.norm(e.geometry.points_at(s) - verts[vi]))
                if gap > ENDPOINT_TOL:
                    raise UsageError(
                        f"edge {ei} end at s={s} misses vertex {vi} by {gap:.3e}")

    @property
    def total_length(self) -> float:
        return float(sum(e.length for e in self.edges))

    def translated(self, offset) -> "CurveGraph":
        off = _as_point(offset)
        return CurveGraph(self.vertices + off,
                          [Edge(_translate_geometry(e.geometry, off), e.v0, e.v1)
                           for e in self.edges])


def _translate_geometry(g: EdgeGeometry, off: np.ndarray) -> EdgeGeometry:
    if isinstance(g, Segment):
        return Segment(g.a + off, g.b + off)
    if isinstance(g, Polyline):
        return Polyline(g.points + off)
    if isinstance(g, CircularArc):
        return CircularArc(g.center + off, g.radius, g.u, g.v, (g.t0, g.t1))
    if isinstance(g, Helix):
        return Helix(g.base + off, g.u, g.v, g.radius, g.pitch, (g.t0, g.t1))
    raise UsageError(f"cannot translate geometry {type(g).__name__}")


def arc_length(edge: Edge) -> float:
    """Exact length for analytic geometries, polygonal length for polylines."""
    return edge.length


def point_at_arclength(edge: Edge, s: float) -> np.ndarray:
    """Point x(s) on the edge; s must lie in [0, length]."""
    length = edge.length
    tol = 1e-9 * max(1.0, length)
    if s < -tol or s > length + tol:
        raise ValueError(f"arc length {s} outside [0, {length}]")
    return edge.geometry.points_at(float(np.clip(s, 0.0, length)))


def line_integral_oracle(graph: CurveGraph, f, tolerance: float = 1e-10,
                         max_refinements: int = 22) -> float:
    """Reference value of the line integral of f over the whole graph.

    Composite 5-point Gauss-Legendre per smooth span with interval halving
    until two successive refinements agree to the edge's share of the
    tolerance.  f takes an (N, 3) array of points and returns (N,) values.
    """
    if not (tolerance > 0):
        raise UsageError("oracle tolerance must be positive")
    total_len = graph.total_length
    parts = []
    for e in graph.edges:
        tol_e = tolerance * e.length / total_len
        parts.append(_integrate_edge(e.geometry, f, tol_e, max_refinements))
    return math.fsum(parts)


def _integrate_edge(geom: EdgeGeometry, f, tol: float, cap: int) -> float:
    base = [(s0, s1) for s0, s1 in
            (geom.piece_spans() if isinstance(geom, Polyline)
             else [(0.0, geom.length)])]
    prev = None
    value = None
    for level in range(cap):
        n_sub = 1 << level
        mids, halfs = [], []
        for s0, s1 in base:
            w = (s1 - s0) / n_sub
            k = np.arange(n_sub)
            mids.append(s0 + (k + 0.5) * w)
            halfs.append(np.full(n_sub, 0.5 * w))
        mid = np.concatenate(mids)
        half = np.concatenate(halfs)
        s_nodes = (mid[:, None] + half[:, None] * _GL5_T[None, :]).ravel()
        pts = geom.points_at(s_nodes)
        vals = np.asarray(f(pts), dtype=float)
        if vals.shape != s_nodes.shape:
            raise UsageError("integrand must return one value per point")
        weights = (half[:, None] * _GL5_W[None, :]).ravel()
        value = float(np.dot(weights, vals))
        if prev is not None and abs(value - prev) <= tol:
            return value
        prev = value
    raise AccuracyError(
        f"line integral did not converge to {tol:g} after {cap} refinements",
        last_estimate=value, previous_estimate=prev)


def nonsmooth_vertices(graph: CurveGraph,
                       angle_tol: float = DEFAULT_ANGLE_TOL) -> list[int]:
    """Vertex indices where the curve is not smooth: junctions of valence
    >= 3, and valence-2 vertices whose pass-through tangent turns by more
    than angle_tol.  Valence-1 vertices are open endpoints of smooth arcs
    and are not reported; isolated vertices carry no curve at all.
    """
    if not (0.0 < angle_tol <= math.pi / 4.0):
        raise UsageError(f"angle_tol must lie in (0, pi/4], got {angle_tol}")
    incident: dict[int, list[np.ndarray]] = {}
    for e in graph.edges:
        out0 = e.geometry.tangent_at(0.0)
        out1 = -e.geometry.tangent_at(e.length)
        incident.setdefault(e.v0, []).append(out0)
        incident.setdefault(e.v1, []).append(out1)
    bad = []
    for vi in sorted(incident):
        dirs = incident[vi]
        if len(dirs) == 1:
            continue
        if len(dirs) > 2:
            bad.append(vi)
            continue
        cos_turn = float(np.clip(-np.dot(dirs[0], dirs[1]), -1.0, 1.0))
        if math.acos(cos_turn) > angle_tol:
            bad.append(vi)
    return bad


# ---------------------------------------------------------------------------
# curve-graph file format (JSON): {"vertices": [[x,y,z], ...],
#   "edges": [{"type": "segment"|"polyline"|"arc"|"helix", "v": [i, j], ...}]}
# Geometry keys: polyline "points" (including both endpoints); arc "center",
# "radius", "basis_u", "basis_v", "angles"; helix "base", "basis_u",
# "basis_v", "radius", "pitch", "angles".  All floats decimal, unit-agnostic.
# ---------------------------------------------------------------------------

def parse_curve_graph(obj: dict) -> CurveGraph:
    if not isinstance(obj, dict) or "vertices" not in obj or "edges" not in obj:
        raise UsageError("curve file needs 'vertices' and 'edges' arrays")
    verts = np.asarray(obj["vertices"], dtype=float)
    edges = []
    for i, rec in enumerate(obj["edges"]):
        try:
            kind = rec["type"]
            v0, v1 = (int(x) for x in rec["v"])
            if kind == "segment":
                geom = Segment(verts[v0], verts[v1])
            elif kind == "polyline":
                geom = Polyline(rec["points"])
            elif kind == "arc":
                geom = CircularArc(rec["center"], rec["radius"],
                                   rec["basis_u"], rec["basis_v"], rec["angles"])
            elif kind == "helix":
                geom = Helix(rec["base"], rec["basis_u"], rec["basis_v"],
                             rec["radius"], rec["pitch"], rec["angles"])
            else:
                raise UsageError(f"unknown edge type {kind!r}")
        except (KeyError, IndexError, TypeError) as exc:
            raise UsageError(f"edge {i}: malformed record ({exc})") from exc
        edges.append(Edge(geom, v0, v1))
    return CurveGraph(verts, edges)


def load_curve_graph(path) -> CurveGraph:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"curve file not found: {p}")
    try:
        obj = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"curve file {p} is not valid JSON: {exc}") from exc
    return parse_curve_graph(obj)
