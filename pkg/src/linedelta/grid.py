"""Cartesian grids, scalar fields, and their on-disk formats.

Fields are sampled at cell centers ``origin + (i + 1/2) h`` per axis.  The
canonical flat ordering is x-fastest: ``flat = ix + nx*(iy + ny*iz)``.  Binary
dumps are little-endian float64 in that order plus a JSON text sidecar.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UsageError


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned isotropic lattice in 2-D or 3-D."""

    origin: tuple[float, ...]
    spacing: float
    dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        if not np.isfinite(self.spacing) or self.spacing <= 0:
            raise UsageError(f"grid spacing must be positive, got {self.spacing}")
        if len(self.dims) not in (2, 3):
            raise UsageError("grids must be 2-D or 3-D")
        if len(self.origin) != len(self.dims):
            raise UsageError("origin and dims dimensionality mismatch")
        if any(n < 2 for n in self.dims):
            raise UsageError(f"grid dims must each be >= 2, got {self.dims}")
        if not all(np.isfinite(c) for c in self.origin):
            raise UsageError("grid origin must be finite")

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def cell_count(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n

    @property
    def cell_volume(self) -> float:
        return float(self.spacing) ** self.ndim

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.spacing
        return self.origin[axis] + (np.arange(self.dims[axis]) + 0.5) * h

    def upper(self) -> tuple[float, ...]:
        return tuple(o + n * self.spacing for o, n in zip(self.origin, self.dims))

    def multi_index(self, flat: np.ndarray) -> tuple[np.ndarray, ...]:
        """Decompose x-fastest flat indices into per-axis indices."""
        flat = np.asarray(flat)
        out = []
        for n in self.dims:
            out.append(flat % n)
            flat = flat // n
        return tuple(out)

    def flat_index(self, multi) -> np.ndarray:
        flat = np.asarray(multi[-1], dtype=np.int64)
        for a in range(self.ndim - 2, -1, -1):
            flat = flat * self.dims[a] + np.asarray(multi[a])
        return flat

    def centers_at(self, flat: np.ndarray) -> np.ndarray:
        """Cell-center coordinates for flat indices, shape (N, ndim)."""
        idx = self.multi_index(np.asarray(flat, dtype=np.int64))
        h = self.spacing
        cols = [(ia + 0.5) * h + self.origin[a] for a, ia in enumerate(idx)]
        return np.stack(cols, axis=-1)

    def index_box(self, lo, hi) -> tuple[np.ndarray, np.ndarray] | None:
        """Per-axis index ranges of cell centers inside the box [lo, hi].

        Returns (imin, imax) inclusive, or None when the box misses the grid.
        """
        h = self.spacing
        imin = np.empty(self.ndim, dtype=np.int64)
        imax = np.empty(self.ndim, dtype=np.int64)
        for a in range(self.ndim):
            imin[a] = max(0, int(np.ceil((lo[a] - self.origin[a]) / h - 0.5)))
            imax[a] = min(self.dims[a] - 1,
                          int(np.floor((hi[a] - self.origin[a]) / h - 0.5)))
            if imin[a] > imax[a]:
                return None
        return imin, imax

    def box_flat_indices(self, imin, imax) -> np.ndarray:
        """Flat indices of every cell in the inclusive index box."""
        ax = [np.arange(imin[a], imax[a] + 1, dtype=np.int64)
              for a in range(self.ndim)]
        total = np.zeros([len(a_) for a_ in ax], dtype=np.int64)
        mult = 1
        for a in range(self.ndim):
            shp = [1] * self.ndim
            shp[a] = len(ax[a])
            total = total + ax[a].reshape(shp) * mult
            mult *= self.dims[a]
        return total.ravel()


class ScalarField:
    """One value per cell center of a GridSpec.

    ``values`` has shape ``grid.dims`` and is indexed ``[ix, iy(, iz)]``;
    ``flat_values()`` returns the x-fastest flat view used by dumps and
    deterministic reductions.  Values are finite unless the producing
    operation documents a sentinel (banded distance fields store +inf
    outside the band).
    """

    def __init__(self, grid: GridSpec, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != grid.dims:
            raise UsageError(
                f"field shape {values.shape} does not match grid dims {grid.dims}")
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.dims))

    @classmethod
    def full(cls, grid: GridSpec, fill: float) -> "ScalarField":
        return cls(grid, np.full(grid.dims, float(fill)))

    @classmethod
    def from_flat(cls, grid: GridSpec, flat: np.ndarray) -> "ScalarField":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (grid.cell_count,):
            raise UsageError("flat value count does not match grid")
        return cls(grid, flat.reshape(grid.dims, order="F"))

    def flat_values(self) -> np.ndarray:
        return self.values.ravel(order="F")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


def write_field(field: ScalarField, basepath, name: str, extra_meta: dict | None = None):
    """Write ``<basepath>.f64`` (little-endian float64, x-fastest) and a
    ``<basepath>.json`` sidecar with grid metadata."""
    base = Path(basepath)
    data = np.ascontiguousarray(field.flat_values(), dtype="<f8")
    base.with_suffix(".f64").write_bytes(data.tobytes())
    meta = {
        "name": name,
        "origin": list(field.grid.origin),
        "spacing": field.grid.spacing,
        "dims": list(field.grid.dims),
        "order": "x-fastest",
        "dtype": "<f8",
    }
    if extra_meta:
        meta["config"] = extra_meta
    base.with_suffix(".json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_field(basepath) -> tuple[ScalarField, dict]:
    """Read a field dump written by :func:`write_field`."""
    base = Path(basepath)
    meta = json.loads(base.with_suffix(".json").read_text())
    grid = GridSpec(tuple(meta["origin"]), float(meta["spacing"]), tuple(meta["dims"]))
    raw = np.frombuffer(base.with_suffix(".f64").read_bytes(), dtype="<f8")
    if raw.size != grid.cell_count:
        raise UsageError(f"field dump {base} has {raw.size} values, "
                         f"grid wants {grid.cell_count}")
    return ScalarField.from_flat(grid, raw.astype(np.float64)), meta


_AXIS_NAMES = {"x": 0, "y": 1, "z": 2}


def slice_csv_text(field: ScalarField, axis: str, index: int) -> str:
    """CSV of a 2-D slice: remaining-axis coordinates plus the value."""
    grid = field.grid
    if axis not in _AXIS_NAMES or _AXIS_NAMES[axis] >= grid.ndim:
        raise UsageError(f"bad slice axis {axis!r} for {grid.ndim}-D grid")
    a = _AXIS_NAMES[axis]
    if not (0 <= index < grid.dims[a]):
        raise UsageError(f"slice index {index} out of range for axis {axis}")
    keep = [i for i in range(grid.ndim) if i != a]
    names = [n for n, i in sorted(_AXIS_NAMES.items(), key=lambda kv: kv[1])
             if i in keep]
    sl = [slice(None)] * grid.ndim
    sl[a] = index
    vals = field.values[tuple(sl)]
    lines = [",".join(names + ["value"])]
    coords = [grid.axis_centers(i) for i in keep]
    if len(keep) == 1:
        for i0 in range(vals.shape[0]):
            lines.append(f"{float(coords[0][i0])!r},{float(vals[i0])!r}")
    else:
        for i1 in range(vals.shape[1]):        # slower axis outer
            for i0 in range(vals.shape[0]):    # x-fastest within the slice
                lines.append(f"{float(coords[0][i0])!r},{float(coords[1][i1])!r},"
                             f"{float(vals[i0, i1])!r}")
    return "\n".join(lines) + "\n"


def write_slice_csv(field: ScalarField, axis: str, index: int, path):
    Path(path).write_text(slice_csv_text(field, axis, index))
