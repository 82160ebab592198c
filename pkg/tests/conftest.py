import numpy as np
import pytest

from linedelta import CircularArc, CurveGraph, Edge, GridSpec, Segment

TWO_PI = 2.0 * np.pi


def unit_circle_graph(basis=None):
    """Unit circle as a one-edge loop; optional (u, v) plane basis."""
    if basis is None:
        u = np.array([1.0, 0.0, 0.0])
        v = np.array([0.0, 1.0, 0.0])
    else:
        u, v = (np.asarray(x, dtype=float) for x in basis)
    arc = CircularArc((0.0, 0.0, 0.0), 1.0, u, v, (0.0, TWO_PI))
    return CurveGraph(np.array([u]), [Edge(arc, 0, 0)])


def tilted_basis(seed=7):
    """Orthonormal in-plane basis of a generically oriented plane."""
    rng = np.random.default_rng(seed)
    m = np.linalg.qr(rng.standard_normal((3, 3)))[0]
    if np.linalg.det(m) < 0:
        m[:, 2] *= -1.0
    return m[:, 0], m[:, 1]


def zaxis_graph(z0=-1.0, z1=2.0):
    verts = np.array([[0.0, 0.0, z0], [0.0, 0.0, z1]])
    return CurveGraph(verts, [Edge(Segment(verts[0], verts[1]), 0, 1)])


def segment_soup(rng, nseg):
    """Random disconnected segments; the standard randomized-parity graph."""
    a = rng.uniform(-1.0, 1.0, (nseg, 3))
    b = a + rng.uniform(-0.4, 0.4, (nseg, 3))
    keep = np.linalg.norm(b - a, axis=1) > 1e-6
    a, b = a[keep], b[keep]
    verts = np.vstack([a, b])
    n = a.shape[0]
    edges = [Edge(Segment(a[i], b[i]), i, n + i) for i in range(n)]
    return CurveGraph(verts, edges), a, b


def brute_force_rho(points, a, b):
    """Independent closest-distance oracle: direct loop over all segments."""
    ab = b - a
    dd = (ab * ab).sum(axis=1)
    out = np.empty(points.shape[0])
    for i, p in enumerate(points):
        t = np.clip(((p - a) * ab).sum(axis=1) / dd, 0.0, 1.0)
        c = a + t[:, None] * ab
        out[i] = np.sqrt(((p - c) ** 2).sum(axis=1).min())
    return out


def f_one(pts):
    return np.ones(pts.shape[0])


def f_z(pts):
    return pts[:, 2].copy()


def f_x2(pts):
    return pts[:, 0] ** 2


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def cube_grid(h, side=4.0, origin=(-2.0, -2.0, -2.0)):
    n = int(round(side / h))
    return GridSpec(origin, h, (n, n, n))
