"""Regularized line-delta fields on Cartesian grids.

Grid quadrature of these fields against an integrand converges to the exact
line integral over the underlying curve; the package provides the curve
model with its reference integral, exact distance fields, delta kernels,
field assembly (distance-based, excised, level-set, and codimension-1), and
convergence-study tooling.
"""

from .builtins import (BUILTIN_CURVES, BUILTIN_LEVELSETS, builtin_curve,
                       distance_levelset, load_curve, make_levelset)
from .curves import (CircularArc, CurveGraph, Edge, Helix, Polyline, Segment,
                     arc_length, line_integral_oracle, load_curve_graph,
                     nonsmooth_vertices, parse_curve_graph, point_at_arclength)
from .distance import (ClosestPointResult, DistanceGridResult, SpatialIndex,
                       build_spatial_index, closest_cells, closest_point_graph,
                       closest_point_segment, distance_grid)
from .errors import (AccuracyError, DegenerateEdgeError, EvaluationError,
                     LineDeltaError, MonotonicityError, NumericalError,
                     UsageError)
from .fields import (ExcisionSpec, LevelSetInput, apply_excision,
                     delta_codim1_from_levelset, delta_codim2_from_distance,
                     delta_codim2_from_levelset, dphi_drho, gradient_magnitude)
from .grid import (GridSpec, ScalarField, read_field, slice_csv_text,
                   write_field, write_slice_csv)
from .kernels import (FAMILIES, Kernel, kernel_eval, kernel_mass,
                      kernel_symmetric_eval, radial2d_weight, radial_constant)
from .quadrature import (ConvergenceReport, ConvergenceRow, convergence_study,
                         fit_observed_order, grid_integrate,
                         integrand_from_spec, make_polynomial,
                         parse_resolution)

__version__ = "0.1.0"
