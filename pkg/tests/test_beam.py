import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from actopt.beam import (
    BeamParams,
    ModalBasis,
    ModalSystem,
    assemble_system,
    eigenvalue,
    h_norm_sq,
    initial_state_from_modes,
    mode_eval,
    project_initial_condition,
    state_weight,
)
from actopt.shape import Grid

PI4 = np.pi**4


@pytest.mark.parametrize("n, expected", [(1, 97.40909103), (2, 1558.545456), (3, 7890.136374)])
def test_eigenvalue(n, expected):
    assert eigenvalue(n) == pytest.approx(expected, rel=1e-9)
    assert eigenvalue(n) == (n * np.pi) ** 4


def test_eigenvalue_rejects_zero():
    with pytest.raises(ValueError):
        eigenvalue(0)


@pytest.mark.parametrize("n, x, expected", [(1, 0.5, np.sqrt(2)), (2, 0.5, 0.0), (3, 1 / 6, np.sqrt(2))])
def test_mode_eval(n, x, expected):
    assert mode_eval(n, x) == pytest.approx(expected, abs=1e-12)


def test_mode_eval_outside_domain():
    with pytest.raises(ValueError):
        mode_eval(1, 1.5)


def test_basis_orthonormal():
    basis = ModalBasis.create(10)
    x, w = np.polynomial.legendre.leggauss(200)
    x, w = 0.5 * (x + 1), 0.5 * w
    phi = basis.evaluate(x)
    gram = (phi * w) @ phi.T
    np.testing.assert_allclose(gram, np.eye(10), atol=1e-12)
    assert np.all(np.diff(basis.eigenvalues) > 0)


def test_params_validation():
    with pytest.raises(ValueError):
        BeamParams(control_penalty=0.0)
    with pytest.raises(ValueError):
        BeamParams(volume_target=1.0)
    with pytest.raises(ValueError):
        BeamParams(n_modes=0)
    with pytest.raises(ValueError):
        BeamParams(kelvin_voigt=-1.0)


def test_undamped_single_mode_matrix():
    sys = assemble_system(BeamParams(kelvin_voigt=0.0, viscous=0.0, n_modes=1), [1.0])
    np.testing.assert_allclose(sys.a_matrix, [[0, 1], [-PI4, 0]])


def test_damped_single_mode_entry():
    sys = assemble_system(BeamParams(n_modes=1), [1.0])
    assert sys.a_matrix[1, 1] == pytest.approx(-(1e-4 * PI4 + 1e-3), rel=1e-12)
    assert sys.a_matrix[1, 1] == pytest.approx(-0.0107409, abs=1e-7)


@pytest.mark.parametrize("n", [1, 4, 40])
def test_q_matrix_entries(n):
    sys = assemble_system(BeamParams(n_modes=n), np.ones(n))
    assert sys.q_matrix[0, 0] == pytest.approx(PI4 + 1)
    assert sys.q_matrix[n, n] == 1.0
    np.testing.assert_array_equal(sys.q_matrix, np.diag(np.diag(sys.q_matrix)))
    np.testing.assert_array_equal(sys.b_vector[:n], 0.0)


def test_block_structure():
    n = 5
    p = BeamParams(n_modes=n)
    sys = assemble_system(p, np.arange(1.0, n + 1))
    lam = ModalBasis.create(n).eigenvalues
    np.testing.assert_array_equal(sys.a_matrix[:n, :n], 0)
    np.testing.assert_array_equal(sys.a_matrix[:n, n:], np.eye(n))
    np.testing.assert_allclose(sys.a_matrix[n:, :n], -np.diag(lam))
    np.testing.assert_allclose(sys.a_matrix[n:, n:], -np.diag(1e-4 * lam + 1e-3))
    np.testing.assert_array_equal(sys.b_vector[n:], np.arange(1.0, n + 1))


def test_assemble_length_mismatch():
    with pytest.raises(ValueError):
        assemble_system(BeamParams(n_modes=3), [1.0, 2.0])


def test_system_is_read_only():
    sys = assemble_system(BeamParams(n_modes=2), [1.0, 1.0])
    with pytest.raises(ValueError):
        sys.a_matrix[0, 0] = 1.0


def test_modal_system_shape_checks():
    with pytest.raises(ValueError):
        ModalSystem(np.zeros((2, 2)), np.zeros(3), np.eye(2))


def test_project_sin3pi_analytic():
    basis = ModalBasis.create(10)
    z = project_initial_condition(lambda x: np.sin(3 * np.pi * x), lambda x: 0 * x, basis)
    expected = np.zeros(20)
    expected[2] = 1 / np.sqrt(2)
    np.testing.assert_allclose(z, expected, atol=1e-12)


def test_project_zero():
    basis = ModalBasis.create(6)
    z = project_initial_condition(np.zeros(6), np.zeros(6), basis)
    np.testing.assert_array_equal(z, 0.0)


def test_project_sampled_on_grid():
    basis = ModalBasis.create(40)
    grid = Grid(200)
    z = project_initial_condition(np.sin(3 * np.pi * grid.centers), np.zeros(200), basis, grid)
    assert abs(z[2] - 1 / np.sqrt(2)) < 1e-4
    others = np.delete(z, 2)
    assert np.max(np.abs(others)) < 1e-4


def test_initial_state_from_modes_matches_projection():
    basis = ModalBasis.create(8)
    z = initial_state_from_modes([(3, 1.0)], basis)
    ref = project_initial_condition(lambda x: np.sin(3 * np.pi * x), np.zeros(8), basis)
    np.testing.assert_allclose(z, ref, atol=1e-12)
    with pytest.raises(ValueError):
        initial_state_from_modes([(9, 1.0)], basis)


def test_h_norm_examples():
    basis = ModalBasis.create(5)
    assert h_norm_sq(np.zeros(10), basis) == 0.0
    z = np.zeros(10)
    z[2] = 1 / np.sqrt(2)
    assert h_norm_sq(z, basis) == pytest.approx((81 * PI4 + 1) / 2, rel=1e-12)
    assert h_norm_sq(z, basis) == pytest.approx(3945.568, abs=1e-3)
    z = np.zeros(10)
    z[5] = 2.0
    assert h_norm_sq(z, basis) == pytest.approx(4.0)


def test_h_norm_matches_state_weight():
    basis = ModalBasis.create(4)
    rng = np.random.default_rng(1)
    z = rng.normal(size=8)
    assert h_norm_sq(z, basis) == pytest.approx(z @ state_weight(basis) @ z, rel=1e-13)


coeffs = st.lists(st.floats(-1, 1, allow_nan=False), min_size=12, max_size=12)


@settings(max_examples=30, deadline=None)
@given(coeffs)
def test_parseval_against_quadrature(c):
    n = 6
    basis = ModalBasis.create(n)
    z = np.asarray(c)
    x, w = np.polynomial.legendre.leggauss(400)
    x, w = 0.5 * (x + 1), 0.5 * w
    disp = z[:n] @ basis.evaluate(x)
    curv = z[:n] @ basis.evaluate_d2(x)
    vel = z[n:] @ basis.evaluate(x)
    quad = np.sum(w * (curv**2 + disp**2 + vel**2))
    exact = h_norm_sq(z, basis)
    assert quad == pytest.approx(exact, rel=1e-3, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 10), st.one_of(st.just(0.0), st.floats(1e-6, 1e-2)),
       st.one_of(st.just(0.0), st.floats(1e-6, 1e-1)))
def test_damped_system_is_stable(n, cd, mu):
    # damping far below rounding level is numerically zero
    if cd == 0 and mu == 0:
        mu = 1e-3
    sys = assemble_system(BeamParams(kelvin_voigt=cd, viscous=mu, n_modes=n), np.ones(n))
    assert np.all(np.linalg.eigvals(sys.a_matrix).real < 0)


@pytest.mark.parametrize("n", [1, 5, 10])
def test_undamped_spectrum_is_imaginary(n):
    sys = assemble_system(BeamParams(kelvin_voigt=0.0, viscous=0.0, n_modes=n), np.ones(n))
    ev = np.linalg.eigvals(sys.a_matrix)
    freqs = np.sort(np.abs(ev.imag))
    expected = np.sort(np.repeat(np.sqrt(ModalBasis.create(n).eigenvalues), 2))
    np.testing.assert_allclose(ev.real, 0.0, atol=1e-8)
    np.testing.assert_allclose(freqs, expected, rtol=1e-8)
