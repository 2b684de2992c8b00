import numpy as np
import pytest

from slabsolve.problem import (
    GaussianBump,
    harmonic_reference,
    make_helmholtz,
    make_variable_coefficient_2d,
    make_waveguide,
    manufactured_sine,
    point_source_reference,
    random_smooth_dirichlet,
    waveguide_lattice,
)


def test_helmholtz_kappa_zero_is_laplace():
    op = make_helmholtz(0.0, dim=2)
    pts = np.random.default_rng(0).uniform(size=(7, 2))
    np.testing.assert_allclose(op.c(pts), 0.0)
    np.testing.assert_allclose(op.axx(pts), 1.0)


def test_helmholtz_zero_order_coefficient():
    op = make_helmholtz(5.0, dim=3)
    pts = np.zeros((3, 3))
    np.testing.assert_allclose(op.c(pts), -25.0)
    op = make_helmholtz(9.80177, dim=3)
    np.testing.assert_allclose(op.c(pts), -(9.80177**2))


def test_helmholtz_rejects_negative_kappa():
    with pytest.raises(ValueError):
        make_helmholtz(-1.0, dim=2)


def test_vc2d_coefficient_values():
    op = make_variable_coefficient_2d()
    assert op.axx(np.array([[0.0, 0.3]]))[0] == pytest.approx(1.5)
    assert op.ayy(np.array([[1.0, 1.0 / 6.0]]))[0] == pytest.approx(1.5)
    assert op.axx(np.array([[0.25, 0.9]]))[0] == pytest.approx(1.0)


def test_vc2d_damped_adds_zero_order_term():
    op = make_variable_coefficient_2d(kappa=10.0)
    assert op.c(np.array([[0.4, 0.4]]))[0] == pytest.approx(-100.0)


def test_waveguide_zero_bumps_is_plain_helmholtz():
    op, data, b = make_waveguide(7.0, [])
    pts = np.random.default_rng(1).uniform(size=(5, 2))
    np.testing.assert_allclose(op.c(pts), -49.0)
    np.testing.assert_allclose(data.dirichlet(pts), 1.0)


def test_waveguide_rejects_amplitude_one_or_more():
    with pytest.raises(ValueError):
        make_waveguide(5.0, [GaussianBump(center=(0.5, 0.5), width=0.1, amplitude=1.5)])


def test_waveguide_rejects_overlapping_sum_reaching_one():
    bumps = [
        GaussianBump(center=(0.5, 0.5), width=0.1, amplitude=0.6),
        GaussianBump(center=(0.5, 0.5), width=0.1, amplitude=0.6),
    ]
    with pytest.raises(ValueError):
        make_waveguide(5.0, bumps)


def test_waveguide_lattice_keeps_speed_in_unit_interval():
    op, data, b = waveguide_lattice(kappa=40.0)
    grid = np.linspace(0, 1, 101)
    xx, yy = np.meshgrid(grid, grid, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    speed = 1.0 - b(pts)
    assert np.all(speed > 0.0)
    assert np.all(speed <= 1.0 + 1e-15)


def test_point_source_solves_helmholtz_exactly():
    kappa = 5.0
    ref = point_source_reference(kappa)
    rng = np.random.default_rng(2)
    pts = rng.uniform(0.2, 0.8, size=(20, 3))
    eps = 1e-5
    lap = np.zeros(len(pts))
    for a in range(3):
        e = np.zeros(3)
        e[a] = eps
        lap += (ref.values(pts + e) - 2 * ref.values(pts) + ref.values(pts - e)) / eps**2
    resid = -lap - kappa**2 * ref.values(pts)
    assert np.max(np.abs(resid)) < 1e-4 * np.max(np.abs(ref.values(pts)))


def test_manufactured_sine_load_matches_laplacian():
    ref, data = manufactured_sine(dim=2)
    pts = np.random.default_rng(3).uniform(size=(10, 2))
    eps = 1e-5
    lap = np.zeros(len(pts))
    for a in range(2):
        e = np.zeros(2)
        e[a] = eps
        lap += (ref.values(pts + e) - 2 * ref.values(pts) + ref.values(pts - e)) / eps**2
    np.testing.assert_allclose(-lap, data.load(pts), atol=1e-5)


def test_harmonic_reference_matches_its_dirichlet_data():
    ref, data = harmonic_reference()
    pts = np.column_stack([np.linspace(0, 1, 9), np.ones(9)])
    np.testing.assert_allclose(ref.values(pts), data.dirichlet(pts))


def test_random_smooth_dirichlet_is_seed_deterministic():
    pts = np.random.default_rng(4).uniform(size=(6, 2))
    f1 = random_smooth_dirichlet(11).dirichlet(pts)
    f2 = random_smooth_dirichlet(11).dirichlet(pts)
    f3 = random_smooth_dirichlet(12).dirichlet(pts)
    np.testing.assert_array_equal(f1, f2)
    assert not np.allclose(f1, f3)


def test_operator_rejects_wrong_dim_points():
    op = make_helmholtz(1.0, dim=2)
    with pytest.raises(ValueError):
        op.check_points(np.zeros((4, 3)))
