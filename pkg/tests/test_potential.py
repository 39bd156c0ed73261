import numpy as np
import pytest

from metaspec.potential import (
    CriticalPoint,
    DegenerateCriticalPointError,
    GaussianWellsField,
    NoCriticalPointsError,
    PhaseSpaceField,
    PolynomialField,
    Tabulated1DField,
    field_from_config,
    find_critical_points,
    verify_morse_and_confinement,
)

# V(x) = (x^2 - 1)^2 = 1 - 2 x^2 + x^4
DOUBLE_WELL = PolynomialField([1.0, 0.0, -2.0, 0.0, 1.0])
# V(x) = (x^2 - 1)^2 + 0.2 x
TILTED_WELL = PolynomialField([1.0, 0.2, -2.0, 0.0, 1.0])


def fd_gradient(field, x, delta=1e-5):
    """Independent central finite-difference oracle for the gradient."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = delta
        g[i] = (field.value(x + e) - field.value(x - e)) / (2 * delta)
    return g


def fd_hessian(field, x, delta=1e-5):
    x = np.asarray(x, dtype=float)
    n = len(x)
    h = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = delta
        h[:, i] = (field.gradient(x + e) - field.gradient(x - e)) / (2 * delta)
    return 0.5 * (h + h.T)


def test_double_well_at_zero():
    val, grad, hess = DOUBLE_WELL.evaluate([0.0])
    assert val == pytest.approx(1.0)
    assert grad[0] == pytest.approx(0.0)
    assert hess[0, 0] == pytest.approx(-4.0)


def test_double_well_at_one():
    val, grad, hess = DOUBLE_WELL.evaluate([1.0])
    assert val == pytest.approx(0.0)
    assert grad[0] == pytest.approx(0.0)
    assert hess[0, 0] == pytest.approx(8.0)


@pytest.mark.parametrize(
    "field,pts",
    [
        (DOUBLE_WELL, [[0.3], [-1.4], [0.9]]),
        (TILTED_WELL, [[0.5], [-0.7]]),
        (PolynomialField([[0.0, 0.0, 2.0], [0.0, 0.3, 0.0], [-2.0, 0.0, 0.0],
                          [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]),
         [[0.4, -0.2], [-1.1, 0.8]]),
        (GaussianWellsField([[-1.0], [1.2]], [1.0, 0.8], [0.5, 0.4], 0.3),
         [[0.1], [-0.9], [1.5]]),
        (GaussianWellsField([[-1.0, 0.0], [1.0, 0.5]], [1.0, 0.7], [0.6, 0.5], 0.4),
         [[0.2, 0.3], [-1.1, -0.2]]),
    ],
)
def test_gradient_matches_finite_differences(field, pts):
    for x in pts:
        g = field.gradient(np.asarray(x, dtype=float))
        g_fd = fd_gradient(field, x)
        scale = max(1.0, np.linalg.norm(g))
        assert np.linalg.norm(g - g_fd) / scale <= 1e-6


def test_hessian_matches_finite_differences():
    fields = [
        TILTED_WELL,
        GaussianWellsField([[-1.0, 0.0], [1.0, 0.5]], [1.0, 0.7], [0.6, 0.5], 0.4),
    ]
    for f in fields:
        x = np.full(f.dimension, 0.37)
        h = f.hessian(x)
        h_fd = fd_hessian(f, x)
        assert np.allclose(h, h_fd, rtol=1e-6, atol=1e-6)


def test_tabulated_spline_matches_its_data():
    xs = np.linspace(-2.0, 2.0, 41)
    vs = (xs**2 - 1.0) ** 2
    f = Tabulated1DField(xs, vs)
    assert f.value([xs[7]]) == pytest.approx(vs[7])
    g = f.gradient([0.4])
    g_fd = fd_gradient(f, [0.4])
    assert abs(g[0] - g_fd[0]) <= 1e-6 * max(1.0, abs(g[0]))


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        DOUBLE_WELL.evaluate([0.0, 1.0])


def test_find_critical_points_double_well():
    pts = find_critical_points(DOUBLE_WELL, [(-2.0, 2.0)], seeds_per_axis=33)
    assert len(pts) == 3
    locs = sorted(p.location[0] for p in pts)
    assert locs == pytest.approx([-1.0, 0.0, 1.0], abs=1e-8)
    # sorted by value: the two minima (value 0) come first
    assert pts[0].value == pytest.approx(0.0, abs=1e-12)
    assert pts[0].morse_index == 0
    assert pts[1].morse_index == 0
    assert pts[2].value == pytest.approx(1.0)
    assert pts[2].morse_index == 1


def test_find_critical_points_tilted_well():
    pts = find_critical_points(TILTED_WELL, [(-2.0, 2.0)])
    minima = [p for p in pts if p.morse_index == 0]
    saddles = [p for p in pts if p.morse_index == 1]
    assert len(minima) == 2 and len(saddles) == 1
    # tilt +0.2x lowers the left well
    left = min(minima, key=lambda p: p.location[0])
    right = max(minima, key=lambda p: p.location[0])
    assert left.value < right.value
    assert abs(saddles[0].location[0]) < 0.1
    # verified independently by sign changes of V'
    xs = np.linspace(-2, 2, 2001)
    signs = np.sign([TILTED_WELL.gradient([x])[0] for x in xs])
    assert np.sum(np.abs(np.diff(signs)) > 0) == 3


def test_find_critical_points_2d_separable():
    # V = (x1^2-1)^2 + 2 x2^2
    c = np.zeros((5, 3))
    c[0, 0], c[2, 0], c[4, 0], c[0, 2] = 1.0, -2.0, 1.0, 2.0
    f = PolynomialField(c)
    pts = find_critical_points(f, [(-2, 2), (-1.5, 1.5)], seeds_per_axis=9)
    assert len(pts) == 3
    minima = [p for p in pts if p.morse_index == 0]
    saddle = [p for p in pts if p.morse_index == 1][0]
    assert sorted(m.location[0] for m in minima) == pytest.approx([-1.0, 1.0], abs=1e-8)
    assert saddle.location == pytest.approx([0.0, 0.0], abs=1e-8)
    assert np.diag(saddle.hessian) == pytest.approx([-4.0, 4.0])


def test_newton_tolerance_and_stability():
    pts = find_critical_points(TILTED_WELL, [(-2, 2)], newton_tol=1e-10)
    for p in pts:
        assert np.linalg.norm(TILTED_WELL.gradient(p.location)) <= 1e-10
        eigs = np.linalg.eigvalsh(p.hessian)
        assert np.min(np.abs(eigs)) > 2e-8
    # doubling the seed count does not move the critical set
    pts2 = find_critical_points(TILTED_WELL, [(-2, 2)], seeds_per_axis=66)
    assert len(pts2) == len(pts)
    for a, b in zip(pts, pts2):
        assert np.linalg.norm(a.location - b.location) <= 1e-9


def test_phase_space_field_mirrors_critical_structure():
    phi = PhaseSpaceField(TILTED_WELL)
    pts_v = find_critical_points(TILTED_WELL, [(-2, 2)])
    pts_phi = find_critical_points(phi, [(-2, 2), (-1, 1)], seeds_per_axis=9)
    assert len(pts_phi) == len(pts_v)
    for pv, pp in zip(pts_v, pts_phi):
        assert pp.location[1] == pytest.approx(0.0, abs=1e-9)
        assert pp.location[0] == pytest.approx(pv.location[0], abs=1e-8)
        assert pp.morse_index == pv.morse_index


def test_verify_morse_and_confinement_counts():
    box = [(-2.0, 2.0)]
    pts = find_critical_points(DOUBLE_WELL, box)
    rep = verify_morse_and_confinement(DOUBLE_WELL, pts, box)
    assert rep.all_nondegenerate
    assert rep.n0 == 2 and rep.n1 == 1
    assert rep.min_shell_gradient > 1.0

    pts_t = find_critical_points(TILTED_WELL, box)
    rep_t = verify_morse_and_confinement(TILTED_WELL, pts_t, box)
    assert rep_t.n0 == 2 and rep_t.n1 == 1


def test_degenerate_quartic_is_reported():
    quartic = PolynomialField([0.0, 0.0, 0.0, 0.0, 1.0])  # x^4, V''(0)=0
    with pytest.raises(DegenerateCriticalPointError):
        find_critical_points(quartic, [(-1, 1)])
    pts = find_critical_points(quartic, [(-1, 1)], strict=False)
    rep = verify_morse_and_confinement(quartic, pts, [(-1, 1)])
    assert not rep.all_nondegenerate
    assert rep.degenerate_ids


def test_no_critical_points_is_fatal():
    slope = PolynomialField([0.0, 1.0])  # V = x, no critical points
    with pytest.raises(NoCriticalPointsError):
        find_critical_points(slope, [(-1, 1)])


def test_field_from_config_roundtrip():
    f = field_from_config({"family": "polynomial", "coeffs": [1.0, 0.0, -2.0, 0.0, 1.0]})
    assert f.value([0.0]) == pytest.approx(1.0)
    g = field_from_config(
        {"family": "gaussian_wells", "centers": [[0.0]], "depths": [1.0],
         "widths": [0.5], "confinement": 1.0}
    )
    assert g.dimension == 1
    with pytest.raises(ValueError):
        field_from_config({"family": "nope"})
