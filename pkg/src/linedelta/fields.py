"""Assembly of regularized delta fields on grids.

Four producers: the distance-based field for curves in 3-D, its excised
variant that zeroes balls around non-smooth vertices, the level-set field for
curves (kernel on phi, Jacobian d(phi)/d(rho), and the 1/(2 pi rho) factor),
and the codimension-1 field delta(phi) |grad phi| for interfaces in 2-D or
3-D.  Fields are per-cell functions of immutable inputs, so any evaluation
order (or thread count) produces identical values.
"""

from __future__ import annotations

import itertools
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .curves import CurveGraph
from .distance import (SpatialIndex, _band_candidates, _sweep_cells_banded,
                       closest_cells, DistanceGridResult)
from .errors import EvaluationError, MonotonicityError, UsageError
from .grid import GridSpec, ScalarField
from .kernels import Kernel, kernel_eval, kernel_symmetric_eval, radial2d_weight

_TWO_PI = 2.0 * np.pi
_CHUNK = 1 << 18
_PHI_NEG_TOL = 1e-12


class LevelSetInput:
    """Level set phi given either as a vectorized callback or as grid samples.

    Callbacks are evaluated exactly at offset points; sampled level sets are
    interpolated multilinearly between cell centers.
    """

    def __init__(self, callback=None, samples: ScalarField | None = None):
        if (callback is None) == (samples is None):
            raise UsageError("level set needs exactly one of callback/samples")
        self.callback = callback
        self.samples = samples

    @classmethod
    def from_callback(cls, fn) -> "LevelSetInput":
        return cls(callback=fn)

    @classmethod
    def from_samples(cls, field: ScalarField) -> "LevelSetInput":
        if not np.all(np.isfinite(field.values)):
            raise UsageError("sampled level set has non-finite values")
        return cls(samples=field)

    @property
    def provenance(self) -> str:
        return "analytic-callback" if self.callback is not None else "grid-samples"

    def sample_grid(self, grid: GridSpec) -> np.ndarray:
        """phi at every cell center, x-fastest flat array."""
        if self.samples is not None:
            g = self.samples.grid
            if (g.dims != grid.dims or g.origin != grid.origin
                    or g.spacing != grid.spacing):
                raise UsageError("sampled level set lives on a different grid")
            return self.samples.flat_values()
        out = np.empty(grid.cell_count)
        for c0 in range(0, grid.cell_count, _CHUNK):
            c1 = min(c0 + _CHUNK, grid.cell_count)
            pts = grid.centers_at(np.arange(c0, c1, dtype=np.int64))
            out[c0:c1] = np.asarray(self.callback(pts), dtype=float)
        return out

    def eval_at(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(values, valid) at arbitrary points.

        Callbacks are valid everywhere; sampled level sets are valid where
        the multilinear stencil stays inside the cell-center lattice.
        """
        if self.callback is not None:
            vals = np.asarray(self.callback(pts), dtype=float)
            return vals, np.ones(pts.shape[0], dtype=bool)
        grid = self.samples.grid
        u = (pts - np.asarray(grid.origin)) / grid.spacing - 0.5
        hi = np.asarray(grid.dims) - 1
        valid = np.all((u >= 0.0) & (u <= hi), axis=1)
        uc = np.clip(u, 0.0, hi)
        i0 = np.minimum(uc.astype(np.int64), np.asarray(grid.dims) - 2)
        f = uc - i0
        vals = np.zeros(pts.shape[0])
        for corner in itertools.product((0, 1), repeat=grid.ndim):
            w = np.ones(pts.shape[0])
            idx = []
            for a, c in enumerate(corner):
                w = w * (f[:, a] if c else (1.0 - f[:, a]))
                idx.append(i0[:, a] + c)
            vals += w * self.samples.values[tuple(idx)]
        return vals, valid


@dataclass
class ExcisionSpec:
    """Ball centers (usually non-smooth vertices) and a common radius."""

    centers: np.ndarray
    radius: float

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if self.centers.size == 0:
            self.centers = self.centers.reshape(0, 3)
        if not np.all(np.isfinite(self.centers)):
            raise UsageError("excision centers must be finite")
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise UsageError(f"excision radius must be positive, got {self.radius}")


def delta_codim2_from_distance(graph: CurveGraph, grid: GridSpec, kernel: Kernel,
                               mode: str = "radial", rho_floor: float | None = None,
                               index: SpatialIndex | None = None,
                               dist: DistanceGridResult | None = None,
                               threads: int = 1) -> ScalarField:
    """Line-delta field from the exact distance: w(rho) per cell, zero
    outside the kernel support tube."""
    if grid.ndim != 3:
        raise UsageError("the distance-based line-delta field is 3-D")
    if kernel.epsilon < 2.0 * grid.spacing:
        warnings.warn("kernel support below two cells; the tube is "
                      "under-resolved", stacklevel=2)
    if rho_floor is None:
        rho_floor = 0.5 * grid.spacing if mode == "ratio" else 0.0
    out = np.zeros(grid.cell_count)
    if dist is not None:
        rho_flat = dist.rho.flat_values()
        inside = np.flatnonzero(rho_flat < kernel.epsilon)
        out[inside] = radial2d_weight(kernel, rho_flat[inside], mode, rho_floor)
        return ScalarField.from_flat(grid, out)
    # banded sweep: only cells inside the support tube are ever solved
    if index is None:
        index = SpatialIndex(graph)
    flat, per_piece = _band_candidates(index, grid, kernel.epsilon)
    if flat.size:
        d2, _, _ = _sweep_cells_banded(index, grid, flat, per_piece)
        rho = np.sqrt(d2)
        keep = rho < kernel.epsilon
        out[flat[keep]] = radial2d_weight(kernel, rho[keep], mode, rho_floor)
    return ScalarField.from_flat(grid, out)


def apply_excision(field: ScalarField, spec: ExcisionSpec) -> ScalarField:
    """Zero every cell whose center lies within the excision radius of any
    center; all other cells are unchanged."""
    out = field.copy()
    grid = field.grid
    r = spec.radius
    for center in spec.centers:
        if center.shape[0] != grid.ndim:
            raise UsageError("excision center dimensionality mismatch")
        rng = grid.index_box(center - r, center + r)
        if rng is None:
            continue
        box = grid.box_flat_indices(*rng)
        pts = grid.centers_at(box)
        d2 = ((pts - center) ** 2).sum(axis=1)
        hit = box[d2 <= r * r]
        idx = grid.multi_index(hit)
        out.values[tuple(idx)] = 0.0
    return out


def _directional_derivative(phi: LevelSetInput, pts, dirs, rho, step,
                            grid: GridSpec, flat_idx=None) -> np.ndarray:
    """Derivative of phi along the outward distance direction.

    Centered differencing with the given step; one-sided forward when the
    backward point would cross the curve (rho < step), one-sided toward the
    interior when a sampled stencil exits the lattice.  Where rho = 0 the
    direction is undefined and the largest forward axis difference is used
    as the (documented) selection.
    """
    n = pts.shape[0]
    out = np.zeros(n)
    dir_norm = np.sqrt((dirs * dirs).sum(axis=1))
    moving = dir_norm > 0.5            # unit vectors or exact zeros
    on_curve = ~moving & np.isfinite(rho) & (rho == 0.0)

    if np.any(moving):
        p = pts[moving]
        d = dirs[moving]
        v_plus, ok_p = phi.eval_at(p + step * d)
        v_minus, ok_m = phi.eval_at(p - step * d)
        crosses = rho[moving] < step
        centered = ok_p & ok_m & ~crosses
        forward = ~centered & ok_p & (crosses | ~ok_m)
        backward = ~centered & ~forward & ok_m
        stuck = ~(centered | forward | backward)
        if np.any(stuck):
            which = np.flatnonzero(moving)[stuck][0]
            cell = int(flat_idx[which]) if flat_idx is not None else which
            raise EvaluationError(
                f"level-set stencil leaves the grid on both sides at cell "
                f"{cell} (center {pts[which]})")
        need0 = forward | backward
        v0 = np.zeros(p.shape[0])
        if np.any(need0):
            v0_sub, ok0 = phi.eval_at(p[need0])
            if not np.all(ok0):
                raise EvaluationError("level set is not evaluable at a cell center")
            v0[need0] = v0_sub
        res = np.where(centered, (v_plus - v_minus) / (2.0 * step), 0.0)
        res = np.where(forward, (v_plus - v0) / step, res)
        res = np.where(backward, (v0 - v_minus) / step, res)
        if not np.all(np.isfinite(res)):
            which = np.flatnonzero(moving)[~np.isfinite(res)][0]
            cell = int(flat_idx[which]) if flat_idx is not None else which
            raise EvaluationError(
                f"non-finite level-set derivative at cell {cell} "
                f"(center {pts[which]})")
        out[moving] = res

    if np.any(on_curve):
        p = pts[on_curve]
        v0, ok0 = phi.eval_at(p)
        best = np.full(p.shape[0], -np.inf)
        for a in range(p.shape[1]):
            off = np.zeros(p.shape[1])
            off[a] = step
            va, ok = phi.eval_at(p + off)
            cand = np.where(ok & ok0, (va - v0) / step, -np.inf)
            best = np.maximum(best, cand)
        out[on_curve] = best
    return out


def dphi_drho(phi: LevelSetInput, dist: DistanceGridResult,
              step: float | None = None, threads: int = 1) -> ScalarField:
    """Grid field of the derivative of phi along the distance direction.

    Outside a banded distance result the direction is unknown and the value
    is zero; field assembly only ever reads the kernel support.
    """
    grid = dist.rho.grid
    if step is None:
        step = 0.5 * grid.spacing
    if not (step > 0):
        raise UsageError("differencing step must be positive")
    rho_flat = dist.rho.flat_values()
    out = np.zeros(grid.cell_count)
    live = np.flatnonzero(np.isfinite(rho_flat))
    for c0 in range(0, live.size, _CHUNK):
        sel = live[c0:c0 + _CHUNK]
        pts = grid.centers_at(sel)
        dirs = dist.direction_at_flat(sel)
        out[sel] = _directional_derivative(phi, pts, dirs, rho_flat[sel],
                                           step, grid, flat_idx=sel)
    return ScalarField.from_flat(grid, out)


def _phi_cells(phi: LevelSetInput, grid: GridSpec,
               codim2: bool = False) -> np.ndarray:
    vals = phi.sample_grid(grid)
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("level set has non-finite values on the grid")
    if codim2:
        if np.min(vals) < -_PHI_NEG_TOL:
            raise UsageError(
                f"codim-2 level sets must be non-negative; min = {np.min(vals)}")
        vals = np.maximum(vals, 0.0)
    return vals


def delta_codim2_from_levelset(phi: LevelSetInput, graph: CurveGraph,
                               grid: GridSpec, kernel: Kernel,
                               rho_floor: float | None = None,
                               step: float | None = None,
                               index: SpatialIndex | None = None,
                               threads: int = 1) -> ScalarField:
    """Line-delta field from a non-negative level set:
    kernel(phi) * d(phi)/d(rho) / (2 pi max(rho, floor)) per cell.

    The kernel argument is phi, so there is no radial-mode rescue here; the
    floor (default h/2) caps only the 1/rho factor.  Raises
    MonotonicityError when the level set fails to increase with distance
    somewhere inside the kernel support.
    """
    if grid.ndim != 3:
        raise UsageError("the level-set line-delta field is 3-D")
    if rho_floor is None:
        rho_floor = 0.5 * grid.spacing
    if step is None:
        step = 0.5 * grid.spacing
    phi_flat = _phi_cells(phi, grid, codim2=True)
    kvals_all = kernel_eval(kernel, phi_flat)
    support = np.flatnonzero(kvals_all > 0.0)
    out = np.zeros(grid.cell_count)
    if support.size:
        if index is None:
            index = SpatialIndex(graph)
        rho, dirs = closest_cells(index, grid, support, threads=threads)
        pts = grid.centers_at(support)
        dphi = _directional_derivative(phi, pts, dirs, rho, step, grid,
                                       flat_idx=support)
        kv = kvals_all[support]
        bad = (dphi <= 0.0) & (kv > 0.0)
        if np.any(bad):
            first = int(np.flatnonzero(bad)[0])
            raise MonotonicityError(
                f"d(phi)/d(rho) = {dphi[first]:.3e} <= 0 inside the kernel "
                f"support at cell {int(support[first])} "
                f"(center {pts[first]})")
        out[support] = kv * dphi / (_TWO_PI * np.maximum(rho, rho_floor))
    return ScalarField.from_flat(grid, out)


def gradient_magnitude(values: np.ndarray, spacing: float) -> np.ndarray:
    """|grad phi| by centered differences (one-sided at the boundary)."""
    mag2 = np.zeros_like(values)
    for a in range(values.ndim):
        g = np.gradient(values, spacing, axis=a)
        mag2 += g * g
    return np.sqrt(mag2)


def delta_codim1_from_levelset(phi: LevelSetInput, grid: GridSpec,
                               kernel: Kernel, signed_phi: bool = True,
                               threads: int = 1) -> ScalarField:
    """Interface-delta field kernel(phi) * |grad phi| on a 2-D or 3-D grid.

    Signed level sets (the default, standard practice) use the symmetrized
    two-sided profile; declare signed_phi=False for a non-negative level set
    under the half-line convention.  |grad phi| always comes from centered
    differences of the sampled phi with step h.
    """
    vals_flat = _phi_cells(phi, grid, codim2=False)
    values = vals_flat.reshape(grid.dims, order="F")
    if not signed_phi and np.min(values) < -_PHI_NEG_TOL:
        raise UsageError("level set declared non-negative has negative values")
    mag = gradient_magnitude(values, grid.spacing)
    kern = kernel_symmetric_eval(kernel, values, signed=signed_phi)
    return ScalarField(grid, kern * mag)
