import math

import numpy as np
import pytest

from tentacle.dynamics import (
    ClosedCharacteristic,
    SymplecticPath,
    cascade_dimension,
    enumerate_closed_characteristics,
    flow,
    grading,
    length_action_check,
    moduli_dimension,
    orbit_action,
    rs_index,
    signature_index,
    transverse_cz,
    with_transverse_index,
)
from tentacle.errors import ResonanceError, UnresolvedError, ValidationError
from tentacle.symplectic import QuadraticHamiltonian, is_symplectic, standard_j0


def test_flow_is_symplectic(h_ex):
    for t in (0.3, 1.0, 2.5):
        assert is_symplectic(flow(h_ex, t))
    assert np.allclose(flow(h_ex, 2 * math.pi)[np.ix_([0, 2], [0, 2])], np.eye(2), atol=1e-12)


def test_example_orbits(h_ex):
    orbits = enumerate_closed_characteristics(h_ex, 3)
    assert [orbit.k for orbit in orbits] == [1, -1, 2, -2, 3, -3]
    for orbit in orbits:
        assert orbit.mu == pytest.approx(1.0)
        assert orbit.eta == pytest.approx(2 * math.pi * orbit.k)
        assert orbit.action == pytest.approx(math.pi * orbit.k)
        assert orbit.x0.tolist() == pytest.approx([1.0, 0.0, 0.0, 0.0])
        assert h_ex(orbit.loop(np.linspace(0.0, 1.0, 7))) == pytest.approx(np.zeros(7), abs=1e-12)
        assert orbit_action(orbit, h_ex, 512, exact_derivative=True) == pytest.approx(orbit.action, abs=1e-6)
        length, ratio = length_action_check(orbit, h_ex)
        assert length == pytest.approx(2 * math.pi * abs(orbit.k))
        assert ratio == pytest.approx(2.0, abs=1e-6)


def test_example_loop(h_ex):
    (orbit, *_) = enumerate_closed_characteristics(h_ex, 1)
    t = np.array([0.0, 0.125, 0.25, 0.5])
    expected = np.stack([np.cos(2 * np.pi * t), 0 * t, -np.sin(2 * np.pi * t), 0 * t], axis=1)
    assert np.allclose(orbit.loop(t), expected, atol=1e-12)


def test_polygon_quadrature_converges(h_ex):
    (orbit, *_) = enumerate_closed_characteristics(h_ex, 1)
    errors = [abs(orbit_action(orbit, h_ex, n) - orbit.action) for n in (128, 256)]
    assert 3.5 <= errors[0] / errors[1] <= 4.5


def test_ellipsoid_orbit():
    H = QuadraticHamiltonian(np.eye(2), 1.0)
    (orbit, backwards) = enumerate_closed_characteristics(H, 1)
    assert np.linalg.norm(orbit.x0) == pytest.approx(math.sqrt(2))
    assert orbit.action == pytest.approx(2 * math.pi)
    assert backwards.action == pytest.approx(-2 * math.pi)
    assert length_action_check(orbit, H)[1] == pytest.approx(math.sqrt(2))


def test_enumeration_errors(h_ex):
    with pytest.raises(ValidationError):
        enumerate_closed_characteristics(h_ex, 0)
    with pytest.raises(ValidationError):
        enumerate_closed_characteristics(QuadraticHamiltonian(h_ex.A, -1.0), 1)
    with pytest.raises(ResonanceError):
        enumerate_closed_characteristics(QuadraticHamiltonian(np.eye(4), 1.0), 1)


def test_hyperbolic_only_has_no_orbits():
    H = QuadraticHamiltonian([[0.0, 1.0], [1.0, 0.0]], 1.0)
    assert enumerate_closed_characteristics(H, 2) == []


def test_closed_characteristic_validation(h_ex):
    (orbit, *_) = enumerate_closed_characteristics(h_ex, 1)
    with pytest.raises(ValidationError):
        ClosedCharacteristic(orbit.plane, 1.0, 0, 0.0, orbit.x0, 0.0, orbit.generator)


def test_rotation_indices():
    J0 = standard_j0(1)
    assert rs_index(SymplecticPath.from_generator(2 * math.pi * J0)) == 2
    assert rs_index(SymplecticPath.from_generator(4 * math.pi * J0)) == 4
    assert rs_index(SymplecticPath.from_generator(np.diag([1.0, -1.0]))) == 0


def test_sampled_rotation_index():
    K = 2 * math.pi * standard_j0(1)
    generated = SymplecticPath.from_generator(K, nodes=257)
    assert rs_index(SymplecticPath(generated.samples)) == 2


def test_constant_path_is_unresolved():
    with pytest.raises(UnresolvedError):
        rs_index(SymplecticPath.from_generator(np.zeros((2, 2))))


def test_path_validation():
    with pytest.raises(ValidationError):
        SymplecticPath(np.stack([2 * np.eye(2), np.eye(2)]))
    with pytest.raises(ValidationError):
        SymplecticPath(np.stack([np.eye(2), np.diag([2.0, 2.0])]))


def test_transverse_index(h_ex):
    orbits = [with_transverse_index(orbit, h_ex) for orbit in enumerate_closed_characteristics(h_ex, 3)]
    assert [orbit.cz_transverse for orbit in orbits] == [0] * 6


def test_transverse_index_needs_four_dimensions():
    H = QuadraticHamiltonian(np.eye(2), 1.0)
    (orbit, _) = enumerate_closed_characteristics(H, 1)
    with pytest.raises(ValidationError):
        transverse_cz(orbit, H)


def test_grading_arithmetic():
    assert signature_index(4, 1) == 1
    assert grading(1, 0) == 1.5
    assert moduli_dimension(0, 2, 1, 3) == 4
    assert cascade_dimension(1.5, 3.5) == 1
    with pytest.raises(ValidationError):
        signature_index(4, 5)


def random_hamiltonian(rng, n):
    G = rng.standard_normal((2 * n, 2 * n))
    A = G + G.T
    return QuadraticHamiltonian(A / (2 * np.linalg.norm(A, 2)), 1.0)


@pytest.mark.parametrize("seed", range(10))
def test_flow_conserves_energy(seed):
    rng = np.random.default_rng(seed)
    H = random_hamiltonian(rng, 1 + seed % 3)
    J0 = standard_j0(H.n)
    for t in rng.uniform(-10.0, 10.0, 4):
        Phi = flow(H, t)
        scale = max(1.0, float(np.linalg.norm(Phi, 2)) ** 2)
        assert np.abs(Phi.T @ J0 @ Phi - J0).max() <= 1e-8 * scale
        x = rng.standard_normal(H.dim)
        y = Phi @ x
        assert abs(H(y) - H(x)) <= 1e-8 * (1.0 + H.norm * float(y @ y))


def test_close_frequencies_are_not_resonant():
    delta = 1e-6
    H = QuadraticHamiltonian(np.diag([1.0, 1.0 + delta, 1.0, 1.0 + delta]), 0.5)
    orbits = enumerate_closed_characteristics(H, 1)
    assert [orbit.k for orbit in orbits] == [1, -1, 1, -1]
    assert [orbit.mu for orbit in orbits] == pytest.approx([1.0, 1.0, 1.0 + delta, 1.0 + delta], abs=1e-12)


def test_transverse_index_of_two_elliptic_planes():
    # ½(q1² + p1²) + q2 p2 + (q3² + p3²)
    A = np.diag([1.0, 0.0, 2.0, 1.0, 0.0, 2.0])
    A[1, 4] = A[4, 1] = 1.0
    H = QuadraticHamiltonian(A, 0.5)
    orbits = enumerate_closed_characteristics(H, 2)
    assert [orbit.mu for orbit in orbits] == pytest.approx([1.0] * 4 + [2.0] * 4)
    assert [orbit.k for orbit in orbits] == [1, -1, 2, -2] * 2
    assert [transverse_cz(orbit, H) for orbit in orbits] == [4, -4, 8, -8, 1, -1, 2, -2]
