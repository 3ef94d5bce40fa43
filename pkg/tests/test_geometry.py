import math

import numpy as np
import pytest

from yamabe_lab import (
    BackgroundSpec,
    ConformalLaw,
    ConformalState,
    ConstructionError,
    DomainError,
    average_scalar_curvature,
    build_background,
    conformal_forms,
    from_graph,
    scalar_curvature,
    volume_element,
    weighted_diameter,
)


def _dense_curvature(bg, u):
    # brute-force loop over edges, independent of the CSR kernels
    V = bg.num_vertices
    lap = np.zeros(V)
    for (i, j), w in zip(bg.edges.tolist(), bg.edge_weights.tolist()):
        lap[i] += w * (u[j] - u[i])
        lap[j] += w * (u[i] - u[j])
    lap /= bg.vertex_volumes
    law = bg.law
    return u ** (-law.curvature_exponent) * (-law.coupling * lap + bg.background_curvature * u)


@pytest.mark.parametrize("kind", ["flat-torus", "box-with-boundary", "synthetic"])
@pytest.mark.parametrize("N", [3, 5])
def test_lattice_basics(kind, N):
    bg = build_background(BackgroundSpec(kind=kind, N=N, L=2.0))
    assert bg.num_vertices == N**3
    np.testing.assert_allclose(bg.vertex_volumes.sum(), 8.0, rtol=1e-13)
    np.testing.assert_allclose(bg.laplacian(np.ones(N**3)), 0.0, atol=1e-12)
    K = bg.stiffness.toarray()
    np.testing.assert_allclose(K, K.T)
    assert np.linalg.eigvalsh(K).min() > -1e-12
    assert np.all(bg.edges[:, 0] < bg.edges[:, 1])


def test_box_boundary_count():
    bg = build_background(BackgroundSpec(kind="box-with-boundary", N=5))
    assert bg.boundary.sum() == 5**3 - 3**3
    assert bg.has_boundary and len(bg.interior) == 27


def test_torus_has_no_boundary():
    bg = build_background(BackgroundSpec(kind="flat-torus", N=4))
    assert not bg.has_boundary
    assert np.all(bg.background_curvature == 0)


def test_torus_laplacian_of_cosine_is_exact():
    N, L = 8, 2 * math.pi
    bg = build_background(BackgroundSpec(kind="flat-torus", N=N, L=L))
    x = bg.coordinates[:, 0]
    h = L / N
    expected = -(2 - 2 * math.cos(h)) / h**2 * np.cos(x)
    np.testing.assert_allclose(bg.laplacian(np.cos(x)), expected, atol=1e-12)


def test_box_laplacian_of_quadratic_in_interior():
    bg = build_background(BackgroundSpec(kind="box-with-boundary", N=6, L=1.0))
    x = bg.coordinates[:, 1]
    lap = bg.laplacian(x**2)
    np.testing.assert_allclose(lap[bg.interior], 2.0, rtol=1e-10)


def test_box_neumann_stencil_kills_boundary_flux():
    # ghost reflection: a function even across each face has zero normal flux,
    # so the discrete divergence theorem holds: sum v Lap f = 0
    bg = build_background(BackgroundSpec(kind="box-with-boundary", N=7, L=1.0))
    f = np.cos(np.pi * bg.coordinates[:, 0])
    assert abs(np.dot(bg.vertex_volumes, bg.laplacian(f))) < 1e-12


@pytest.mark.parametrize("spec,err", [
    (dict(kind="moebius"), "kind"),
    (dict(kind="flat-torus", r0=-1.0), "r0"),
    (dict(kind="synthetic", N=2), "N"),
    (dict(kind="synthetic", L=-1.0), "L"),
    (dict(kind="synthetic", n=2), "n"),
    (dict(kind="synthetic", N=(4, 4)), "N"),
    (dict(kind="heisenberg", n=2), "n"),
])
def test_construction_errors(spec, err):
    with pytest.raises(ConstructionError, match=err):
        build_background(BackgroundSpec(**spec))


def test_from_graph_rejects_disconnected():
    with pytest.raises(ConstructionError, match="disconnected"):
        from_graph([[0, 1], [2, 3]], [1.0, 1.0], np.ones(4))


def test_from_graph_rejects_bad_weights():
    with pytest.raises(ConstructionError):
        from_graph([[0, 1]], [0.0], np.ones(2))


@pytest.mark.parametrize("kind", ["box-with-boundary", "synthetic"])
def test_curvature_matches_dense_loop(kind):
    bg = build_background(BackgroundSpec(kind=kind, N=5, r0=-3.0, r0_bump_amplitude=1.5))
    rng = np.random.default_rng(3)
    u = rng.uniform(0.5, 2.0, bg.num_vertices)
    np.testing.assert_allclose(scalar_curvature(bg, u), _dense_curvature(bg, u), rtol=1e-12, atol=1e-12)


def test_unit_factor_gives_background_curvature():
    bg = build_background(BackgroundSpec(kind="synthetic", N=4, r0=-2.0, r0_noise=0.5, seed=7))
    np.testing.assert_allclose(scalar_curvature(bg, 1.0), bg.background_curvature, atol=1e-13)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_riemannian_law_exponents(n):
    law = ConformalLaw.riemannian(n)
    assert law.curvature_exponent == pytest.approx((n + 2) / (n - 2))
    assert law.coupling == pytest.approx(4 * (n - 1) / (n - 2))
    assert law.volume_exponent == pytest.approx(2 * n / (n - 2))
    assert law.sandwich_coefficient == pytest.approx(2 * (n - 1))
    assert law.critical_a == pytest.approx((n - 2) / (4 * (n - 1)))
    assert law.pinching_ratio == pytest.approx((n - 2) / n)


def test_cr_law_exponents():
    law = ConformalLaw.cr(1)
    assert law.curvature_exponent == 3.0
    assert law.coupling == 4.0
    assert law.volume_exponent == 4.0
    assert law.sandwich_coefficient == pytest.approx(2 * 3)
    assert law.critical_a == pytest.approx(1 / 4)
    assert law.energy_coefficient == 1.0 and law.mass_coefficient == 2.0


@pytest.mark.parametrize("k", [0.5, 2.0, 10.0])
def test_scaling_of_curvature_volume_diameter(k):
    bg = build_background(BackgroundSpec(kind="synthetic", N=4, r0=-6.0, r0_bump_amplitude=2.0))
    u = 1.0 + 0.3 * np.sin(bg.coordinates[:, 0])
    R1, Rk = scalar_curvature(bg, u), scalar_curvature(bg, k * u)
    np.testing.assert_allclose(Rk, k ** (-4.0) * R1, rtol=1e-12)
    assert volume_element(bg, k * u)[1] == pytest.approx(k**6 * volume_element(bg, u)[1], rel=1e-12)
    assert weighted_diameter(bg, k * u) == pytest.approx(k**2 * weighted_diameter(bg, u), rel=1e-12)


def test_torus_diameter():
    bg = build_background(BackgroundSpec(kind="flat-torus", N=8, L=2 * math.pi))
    assert weighted_diameter(bg, 1.0) == pytest.approx(3 * math.pi)


def test_energy_identity():
    # sum R dV = c * Dirichlet energy of u + sum R0 u^2 v
    bg = build_background(BackgroundSpec(kind="box-with-boundary", N=5, r0=-1.0, r0_bump_amplitude=0.7))
    u = np.random.default_rng(0).uniform(0.5, 1.5, bg.num_vertices)
    dv, _ = volume_element(bg, u)
    lhs = np.dot(scalar_curvature(bg, u), dv)
    rhs = bg.law.coupling * u @ (bg.stiffness @ u) + np.dot(bg.background_curvature * u * u, bg.vertex_volumes)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_conformal_forms_are_symmetric_psd():
    bg = build_background(BackgroundSpec(kind="synthetic", N=4))
    u = np.random.default_rng(1).uniform(0.5, 2.0, bg.num_vertices)
    A, Mw = conformal_forms(bg, u)
    D = A.toarray()
    np.testing.assert_allclose(D, D.T)
    np.testing.assert_allclose(D @ np.ones(len(u)), 0.0, atol=1e-12)
    assert np.all(Mw > 0)


@pytest.mark.parametrize("bad", [0.0, -1.0, np.nan, np.inf])
def test_nonpositive_factor_is_rejected(bad):
    bg = build_background(BackgroundSpec(kind="synthetic", N=3))
    u = np.ones(bg.num_vertices)
    u[4] = bad
    with pytest.raises(DomainError):
        scalar_curvature(bg, u)


def test_state_is_frozen_and_cached():
    bg = build_background(BackgroundSpec(kind="synthetic", N=4, r0=-6.0))
    u = np.ones(bg.num_vertices)
    s = ConformalState(bg, u, 0.0)
    u[0] = 5.0
    assert s.u[0] == 1.0
    with pytest.raises(ValueError):
        s.u[0] = 2.0
    assert s.Rbar == pytest.approx(-6.0)
    assert s.V_total == pytest.approx(bg.vertex_volumes.sum())
    assert average_scalar_curvature(bg, s.u) == pytest.approx(s.Rbar)


def test_negative_time_is_rejected():
    bg = build_background(BackgroundSpec(kind="synthetic", N=3))
    with pytest.raises(DomainError):
        ConformalState(bg, 1.0, -0.1)


def test_with_curvature_turns_torus_synthetic():
    bg = build_background(BackgroundSpec(kind="flat-torus", N=3))
    bg2 = bg.with_curvature(-2.0)
    assert bg2.kind == "synthetic"
    np.testing.assert_array_equal(bg2.background_curvature, -2.0)
    assert bg.background_curvature[0] == 0.0
