import math

import numpy as np
import pytest

from linedelta import (CurveGraph, Edge, ExcisionSpec, GridSpec, Kernel,
                       LevelSetInput, MonotonicityError, ScalarField, Segment,
                       UsageError, apply_excision, build_spatial_index,
                       builtin_curve, delta_codim1_from_levelset,
                       delta_codim2_from_distance, delta_codim2_from_levelset,
                       distance_grid, distance_levelset, dphi_drho,
                       gradient_magnitude, grid_integrate, kernel_eval)
from conftest import TWO_PI, cube_grid, f_one, f_z, unit_circle_graph, zaxis_graph

H32 = 1.0 / 32.0


def circle_setup(h=H32, coupling=4.0, family="cosine"):
    g = unit_circle_graph()
    return g, cube_grid(h), Kernel(family, coupling * h)


# ---------------------------------------------------------------------------
# distance-based field
# ---------------------------------------------------------------------------

def test_radial_circle_mass_smoke():
    g, grid, k = circle_setup()
    fld = delta_codim2_from_distance(g, grid, k)
    val = grid_integrate(fld, f_one)
    assert abs(val - TWO_PI) / TWO_PI < 0.05
    assert np.all(fld.values >= 0.0)


def test_field_zero_outside_support_tube():
    g, grid, k = circle_setup()
    fld = delta_codim2_from_distance(g, grid, k)
    rho = distance_grid(g, grid).rho.flat_values()
    flat = fld.flat_values()
    assert np.all(flat[rho >= k.epsilon] == 0.0)
    assert np.any(flat > 0.0)


def test_ratio_field_matches_pointwise_formula():
    g, grid, k = circle_setup()
    fld = delta_codim2_from_distance(g, grid, k, mode="ratio")
    rho = distance_grid(g, grid).rho.flat_values()
    inside = rho < k.epsilon
    expect = kernel_eval(k, rho[inside]) / (TWO_PI * np.maximum(
        rho[inside], 0.5 * grid.spacing))
    assert np.allclose(fld.flat_values()[inside], expect, rtol=0, atol=0)


def test_under_resolved_support_warns():
    g, grid, _ = circle_setup()
    with pytest.warns(UserWarning):
        delta_codim2_from_distance(g, grid, Kernel("cosine", grid.spacing))


def test_field_requires_3d_grid():
    g = unit_circle_graph()
    with pytest.raises(UsageError):
        delta_codim2_from_distance(g, GridSpec((-2, -2), H32, (128, 128)),
                                   Kernel("cosine", 4 * H32))


# ---------------------------------------------------------------------------
# excision
# ---------------------------------------------------------------------------

def test_excision_empty_centers_is_identity():
    g, grid, k = circle_setup()
    fld = delta_codim2_from_distance(g, grid, k)
    out = apply_excision(fld, ExcisionSpec(np.zeros((0, 3)), 1.0))
    assert np.array_equal(out.values, fld.values)


def test_excision_covering_everything_zeroes_field():
    g, grid, k = circle_setup()
    fld = delta_codim2_from_distance(g, grid, k)
    out = apply_excision(fld, ExcisionSpec(np.array([[0.0, 0.0, 0.0]]), 100.0))
    assert np.all(out.values == 0.0)


def test_excision_ball_zeroed_rest_untouched():
    g = builtin_curve("lgraph")
    grid = GridSpec((-0.5, -0.5, -0.5), H32, (64, 64, 32))
    k = Kernel("cosine", 4 * H32)
    fld = delta_codim2_from_distance(g, grid, k)
    r = 8 * H32
    out = apply_excision(fld, ExcisionSpec(g.vertices[[0]], r))
    centers = grid.centers_at(np.arange(grid.cell_count))
    d = np.linalg.norm(centers, axis=1)
    flat = out.flat_values()
    assert np.all(flat[d <= r] == 0.0)
    assert np.array_equal(flat[d > r], fld.flat_values()[d > r])


def test_excision_validation():
    with pytest.raises(UsageError):
        ExcisionSpec(np.array([[0.0, 0.0, 0.0]]), 0.0)
    g, grid, k = circle_setup()
    fld = delta_codim2_from_distance(g, grid, k)
    with pytest.raises(UsageError):
        apply_excision(fld, ExcisionSpec(np.array([[0.0, 0.0]]), 1.0))


def test_excision_independence_matrix():
    # integrals with radius r and 2r stay O(r) apart and both tighten with h
    g = builtin_curve("lgraph")
    corner = g.vertices[[0]]
    errs = {}
    for h in (1 / 32, 1 / 64):
        grid = GridSpec((-0.5, -0.5, -0.5), h,
                        (int(2 / h), int(2 / h), int(1 / h)))
        fld = delta_codim2_from_distance(g, grid, Kernel("cosine", 4 * h))
        for r in (4 * h, 8 * h):
            val = grid_integrate(apply_excision(fld, ExcisionSpec(corner, r)), f_one)
            errs[(h, r)] = abs(val - 2.0)
        gap = abs(grid_integrate(apply_excision(fld, ExcisionSpec(corner, 4 * h)), f_one)
                  - grid_integrate(apply_excision(fld, ExcisionSpec(corner, 8 * h)), f_one))
        assert gap <= 10.0 * (4 * h)
    for r_coupling in (4, 8):
        assert errs[(1 / 64, r_coupling / 64)] < errs[(1 / 32, r_coupling / 32)]


# ---------------------------------------------------------------------------
# directional derivative of a level set
# ---------------------------------------------------------------------------

def test_dphi_identity_level_set():
    g = unit_circle_graph()
    idx = build_spatial_index(g)
    grid = cube_grid(H32)
    dist = distance_grid(g, grid, band=4 * H32, index=idx)
    dp = dphi_drho(distance_levelset(g, idx), dist)
    live = np.isfinite(dist.rho.flat_values())
    assert np.abs(dp.flat_values()[live] - 1.0).max() < 1e-9


def test_dphi_quadratic_level_set():
    g = zaxis_graph()
    grid = GridSpec((-0.5, -0.5, 0.0), 1 / 16, (16, 16, 8))
    dist = distance_grid(g, grid)
    phi = LevelSetInput.from_callback(lambda p: p[:, 0] ** 2 + p[:, 1] ** 2)
    dp = dphi_drho(phi, dist)
    flat = np.arange(grid.cell_count)
    rho = dist.rho.flat_values()
    # d(rho^2)/d(rho) = 2 rho wherever the centered stencil stays one-sided
    sel = rho >= 0.5 * grid.spacing
    assert np.abs(dp.flat_values()[sel] - 2 * rho[sel]).max() < 1e-12


def test_dphi_scaled_identity():
    g = unit_circle_graph()
    idx = build_spatial_index(g)
    grid = cube_grid(H32)
    dist = distance_grid(g, grid, band=4 * H32, index=idx)
    rho_cb = distance_levelset(g, idx)
    phi2 = LevelSetInput.from_callback(lambda p: 2.0 * rho_cb.callback(p))
    dp = dphi_drho(phi2, dist)
    live = np.isfinite(dist.rho.flat_values())
    assert np.abs(dp.flat_values()[live] - 2.0).max() < 1e-9


def test_dphi_grid_samples_interpolated():
    g = zaxis_graph()
    grid = GridSpec((-0.5, -0.5, 0.0), 1 / 32, (32, 32, 8))
    dist = distance_grid(g, grid)
    flat = np.arange(grid.cell_count)
    pts = grid.centers_at(flat)
    samples = ScalarField.from_flat(grid, pts[:, 0] ** 2 + pts[:, 1] ** 2)
    dp = dphi_drho(LevelSetInput.from_samples(samples), dist)
    rho = dist.rho.flat_values()
    interior = ((np.abs(pts[:, 0]) < 0.4) & (np.abs(pts[:, 1]) < 0.4)
                & (rho >= 0.5 * grid.spacing))
    # trilinear interpolation of a radial quadratic: first-order accurate
    err = np.abs(dp.flat_values()[interior] - 2 * rho[interior])
    assert err.max() < 4 * grid.spacing


def test_levelset_input_validation():
    with pytest.raises(UsageError):
        LevelSetInput()
    with pytest.raises(UsageError):
        LevelSetInput(callback=lambda p: p[:, 0],
                      samples=ScalarField.zeros(GridSpec((0, 0), 1.0, (2, 2))))
    bad = np.full((2, 2), np.nan)
    with pytest.raises(UsageError):
        LevelSetInput.from_samples(ScalarField(GridSpec((0, 0), 1.0, (2, 2)), bad))


def test_sampled_levelset_needs_matching_grid():
    g = zaxis_graph()
    grid = GridSpec((-0.5, -0.5, 0.0), 1 / 8, (8, 8, 8))
    other = GridSpec((-0.5, -0.5, 0.0), 1 / 16, (16, 16, 16))
    samples = ScalarField.zeros(other)
    with pytest.raises(UsageError):
        delta_codim2_from_levelset(LevelSetInput.from_samples(samples), g,
                                   grid, Kernel("cosine", 0.5))


# ---------------------------------------------------------------------------
# level-set codim-2 field
# ---------------------------------------------------------------------------

def test_levelset_degenerates_to_ratio_mode():
    g = unit_circle_graph()
    idx = build_spatial_index(g)
    grid = cube_grid(H32)
    k = Kernel("cosine", 4 * H32)
    a = delta_codim2_from_levelset(distance_levelset(g, idx), g, grid, k,
                                   index=idx)
    b = delta_codim2_from_distance(g, grid, k, mode="ratio", index=idx)
    assert np.abs(a.values - b.values).max() <= 1e-12


def test_levelset_slab_masses():
    g = zaxis_graph()
    grid = GridSpec((-0.5, -0.5, 0.0), H32, (32, 32, 32))
    phi = LevelSetInput.from_callback(lambda p: p[:, 0] ** 2 + p[:, 1] ** 2)
    fld = delta_codim2_from_levelset(phi, g, grid, Kernel("cosine", 4 * H32))
    assert grid_integrate(fld, f_one) == pytest.approx(1.0, rel=0.05)
    assert grid_integrate(fld, f_z) == pytest.approx(0.5, rel=0.05)


def test_levelset_rejects_negative_phi():
    g = zaxis_graph()
    grid = GridSpec((-0.5, -0.5, 0.0), H32, (32, 32, 32))
    phi = LevelSetInput.from_callback(
        lambda p: p[:, 0] ** 2 + p[:, 1] ** 2 - 0.5)
    with pytest.raises(UsageError):
        delta_codim2_from_levelset(phi, g, grid, Kernel("cosine", 4 * H32))


def test_levelset_monotonicity_violation():
    # phi vanishing on a shell around the axis decreases with rho inside it
    g = zaxis_graph()
    grid = GridSpec((-0.5, -0.5, 0.0), H32, (32, 32, 32))
    phi = LevelSetInput.from_callback(
        lambda p: (p[:, 0] ** 2 + p[:, 1] ** 2 - 0.04) ** 2)
    with pytest.raises(MonotonicityError):
        delta_codim2_from_levelset(phi, g, grid, Kernel("cosine", 4 * H32))


# ---------------------------------------------------------------------------
# codim-1 field
# ---------------------------------------------------------------------------

def test_codim1_signed_circle():
    h = 1 / 64
    grid = GridSpec((-2.0, -2.0), h, (256, 256))
    phi = LevelSetInput.from_callback(
        lambda p: np.sqrt(p[:, 0] ** 2 + p[:, 1] ** 2) - 1.0)
    fld = delta_codim1_from_levelset(phi, grid, Kernel("cosine", 4 * h))
    assert grid_integrate(fld, f_one) == pytest.approx(TWO_PI, rel=0.01)
    assert np.all(fld.values >= 0.0)


def test_codim1_gradient_factor_compensates_scaling():
    h = 1 / 64
    grid = GridSpec((-2.0, -2.0), h, (256, 256))
    phi = LevelSetInput.from_callback(
        lambda p: 2.0 * (np.sqrt(p[:, 0] ** 2 + p[:, 1] ** 2) - 1.0))
    fld = delta_codim1_from_levelset(phi, grid, Kernel("cosine", 4 * h))
    assert grid_integrate(fld, f_one) == pytest.approx(TWO_PI, rel=0.01)


def test_codim1_sphere():
    h = 1 / 32
    grid = cube_grid(h)
    phi = LevelSetInput.from_callback(
        lambda p: np.sqrt((p * p).sum(axis=1)) - 1.0)
    fld = delta_codim1_from_levelset(phi, grid, Kernel("cosine", 4 * h))
    assert grid_integrate(fld, f_one) == pytest.approx(4 * math.pi, rel=0.02)


def test_codim1_one_sided_nonnegative_level_set():
    # phi = max(SDF, 0) grows on one side only; the half-line convention
    # then counts the interface once (first-order: the kink degrades the
    # centered-difference gradient)
    h = 1 / 128
    grid = GridSpec((-2.0, -2.0), h, (512, 512))
    phi = LevelSetInput.from_callback(
        lambda p: np.maximum(np.sqrt(p[:, 0] ** 2 + p[:, 1] ** 2) - 1.0, 0.0))
    fld = delta_codim1_from_levelset(phi, grid, Kernel("cosine", 4 * h),
                                     signed_phi=False)
    assert grid_integrate(fld, f_one) == pytest.approx(TWO_PI, rel=0.03)


def test_codim1_nonneg_flag_rejects_signed_input():
    grid = GridSpec((-2.0, -2.0), 1 / 16, (64, 64))
    phi = LevelSetInput.from_callback(
        lambda p: np.sqrt(p[:, 0] ** 2 + p[:, 1] ** 2) - 1.0)
    with pytest.raises(UsageError):
        delta_codim1_from_levelset(phi, grid, Kernel("cosine", 0.25),
                                   signed_phi=False)


def test_codim1_rescaling_robustness():
    # all rescalings stay grid-resolved at this support radius: 2 eps / (c h)
    # hits the profile's spectral nulls for c in {0.5, 2, 5}
    h, coupling = 1 / 64, 10.0
    sd = lambda p: np.sqrt(p[:, 0] ** 2 + p[:, 1] ** 2) - 1.0

    def integral(c, hh):
        grid = GridSpec((-2.0, -2.0), hh, (int(4 / hh), int(4 / hh)))
        phi = LevelSetInput.from_callback(lambda p: c * sd(p))
        fld = delta_codim1_from_levelset(phi, grid, Kernel("cosine", coupling * hh))
        return grid_integrate(fld, f_one)

    base = integral(1.0, h)
    step = abs(base - integral(1.0, 2 * h))
    for c in (0.5, 2.0, 5.0):
        assert abs(integral(c, h) - base) <= 3.0 * step


def test_gradient_magnitude_linear_field():
    grid = GridSpec((0.0, 0.0, 0.0), 0.5, (6, 6, 6))
    pts = grid.centers_at(np.arange(grid.cell_count))
    vals = (2.0 * pts[:, 0] - pts[:, 1]).reshape(grid.dims, order="F")
    mag = gradient_magnitude(vals, grid.spacing)
    assert np.abs(mag - math.sqrt(5.0)).max() < 1e-12


# ---------------------------------------------------------------------------
# the unsupported 3-D shortcut formula stays wrong (and stays out of the API)
# ---------------------------------------------------------------------------

def test_naive_gradient_formula_deviates_for_elliptic_level_set():
    g = zaxis_graph()
    grid = GridSpec((-0.5, -0.5, 0.0), H32, (32, 32, 32))
    k = Kernel("cosine", 4 * H32)
    phi_fn = lambda p: p[:, 0] ** 2 + 4.0 * p[:, 1] ** 2
    fld = delta_codim2_from_levelset(LevelSetInput.from_callback(phi_fn), g,
                                     grid, k)
    assert abs(grid_integrate(fld, f_one) - 1.0) < 0.02
    rho = distance_grid(g, grid).rho.values
    pts = grid.centers_at(np.arange(grid.cell_count))
    phi_vals = phi_fn(pts).reshape(grid.dims, order="F")
    naive = ScalarField(grid, kernel_eval(k, phi_vals)
                        * gradient_magnitude(phi_vals, grid.spacing)
                        / (TWO_PI * np.maximum(rho, 0.5 * grid.spacing)))
    assert abs(grid_integrate(naive, f_one) - 1.0) > 0.05
