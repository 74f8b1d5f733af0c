import numpy as np
import pytest

from tentacle.dynamics import flow
from tentacle.errors import DegenerateHamiltonianError, NotLiouvilleError, ValidationError
from tentacle.symplectic import (
    LinearField,
    PhasePoint,
    QuadraticHamiltonian,
    SymplecticMatrix,
    blend_liouville,
    darboux_basis,
    hamiltonian_matrix,
    is_affine_tentacular_symplectic,
    is_asymptotically_regular,
    is_liouville,
    is_symplectic,
    poisson_bracket,
    project_liouville,
    random_symplectic,
    standard_j0,
    symplectic_left_inverse,
    x_alpha_field,
)


def random_hamiltonian(rng: np.random.Generator, n: int) -> QuadraticHamiltonian:
    B = rng.standard_normal((2 * n, 2 * n))
    return QuadraticHamiltonian(B + B.T, 0.0)


def test_standard_j0():
    J0 = standard_j0(2)
    assert np.array_equal(J0 @ J0, -np.eye(4))
    assert np.array_equal(J0.T, -J0)
    assert J0[0, 2] == 1 and J0[2, 0] == -1
    with pytest.raises(ValidationError):
        standard_j0(0)


def test_phase_point():
    point = PhasePoint([1.0, 2.0, 3.0, 4.0])
    assert point.n == 2
    assert point.q.tolist() == [1.0, 2.0]
    assert point.p.tolist() == [3.0, 4.0]
    with pytest.raises(ValidationError):
        PhasePoint([1.0, 2.0, 3.0])


def test_hamiltonian_evaluation(h_ex):
    assert h_ex([1.0, 0.0, 0.0, 0.0]) == pytest.approx(0.0)
    assert h_ex([0.0, 0.0, 0.0, 0.0]) == pytest.approx(-0.5)
    values = h_ex(np.array([[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 2.0]]))
    assert values.tolist() == pytest.approx([-1.0, 1.5])
    assert h_ex.vector_field([1.0, 0.0, 0.0, 0.0]).tolist() == pytest.approx([0.0, 0.0, -1.0, 0.0])
    assert h_ex.form_matrix.tolist() == pytest.approx((0.5 * h_ex.A).tolist())


def test_hamiltonian_rejects_asymmetric_matrix():
    with pytest.raises(ValidationError, match=r"A\[0\]\[1\]/A\[1\]\[0\]"):
        QuadraticHamiltonian([[1.0, 2.0], [0.0, 1.0]], 0.0)


@pytest.mark.parametrize(
    "matrix",
    [
        [[1.0, 0.0, 0.0]],
        [[1.0]],
        np.eye(3),
        [[float("nan"), 0.0], [0.0, 1.0]],
    ],
)
def test_hamiltonian_rejects_bad_shapes(matrix):
    with pytest.raises(ValidationError):
        QuadraticHamiltonian(matrix, 0.0)


def test_degenerate_hamiltonian():
    H = QuadraticHamiltonian(np.diag([1.0, 0.0]), 1.0)
    assert H.is_degenerate()
    with pytest.raises(DegenerateHamiltonianError):
        H.require_nondegenerate()
    assert not QuadraticHamiltonian.radial(2).is_degenerate()


def test_poisson_bracket_orientation(h_ex):
    radial = QuadraticHamiltonian.radial(2)
    x = np.array([0.3, 1.1, -0.7, 0.9])
    q2, p2 = x[1], x[3]
    assert poisson_bracket(h_ex, radial)(x) == pytest.approx(-2 * q2 * p2)
    assert poisson_bracket(radial, h_ex)(x) == pytest.approx(2 * q2 * p2)
    assert poisson_bracket(h_ex, radial).c == 0.0


@pytest.mark.parametrize("seed", range(100))
def test_bracket_identities(seed):
    rng = np.random.default_rng(seed)
    n = 1 + seed % 4
    F, G, K = (random_hamiltonian(rng, n) for _ in range(3))
    scale = F.norm * G.norm * K.norm

    antisymmetry = poisson_bracket(F, G).A + poisson_bracket(G, F).A
    assert np.abs(antisymmetry).max() <= 1e-12 * F.norm * G.norm

    jacobi = (
        poisson_bracket(F, poisson_bracket(G, K)).A
        + poisson_bracket(G, poisson_bracket(K, F)).A
        + poisson_bracket(K, poisson_bracket(F, G)).A
    )
    assert np.abs(jacobi).max() <= 1e-10 * scale

    # derivative of F along the flow of G
    x = rng.standard_normal(2 * n)
    h = 1e-5
    derivative = (F(flow(G, h) @ x) - F(flow(G, -h) @ x)) / (2 * h)
    expected = poisson_bracket(F, G)(x)
    assert derivative == pytest.approx(expected, rel=1e-6, abs=1e-6 * F.norm * G.norm * (x @ x))


def test_x_alpha_fields_are_liouville():
    for alpha in (0.0, 0.5, 2.0):
        field = x_alpha_field(2, alpha)
        assert is_liouville(field)
        assert is_asymptotically_regular(field)
        assert field.regularity_bound == pytest.approx(0.5 + alpha)


def test_blend_liouville():
    X1 = x_alpha_field(1, 0.0)
    X2 = x_alpha_field(1, 3.0)
    blended = blend_liouville(X1, X2, 0.25)
    assert is_liouville(blended)
    assert blended.L[0, 1] == pytest.approx(0.75)
    half = blend_liouville(LinearField(0.5 * np.eye(2)), LinearField(0.5 * np.eye(2)), 0.5)
    assert half.L.tolist() == pytest.approx((0.5 * np.eye(2)).tolist())
    with pytest.raises(ValidationError):
        blend_liouville(X1, X2, 1.5)
    with pytest.raises(NotLiouvilleError):
        blend_liouville(X1, LinearField(np.eye(2)), 0.5)


def test_project_liouville():
    rng = np.random.default_rng(7)
    projected = project_liouville(rng.standard_normal((4, 4)))
    assert is_liouville(projected)
    field = x_alpha_field(2, 1.5)
    assert np.allclose(project_liouville(field.L).L, field.L, atol=1e-14)


@pytest.mark.parametrize("n, seed", [(1, 0), (2, 1), (3, 2), (4, 3)])
def test_random_symplectic(n, seed):
    S = random_symplectic(n, seed, scale=0.5)
    assert is_symplectic(S.S)
    assert np.allclose(S.inverse() @ S.S, np.eye(2 * n), atol=1e-9)
    assert is_affine_tentacular_symplectic(S.S, np.ones(2 * n))
    assert np.array_equal(random_symplectic(n, seed, scale=0.5).S, S.S)


def test_symplectic_matrix_validation():
    with pytest.raises(ValidationError):
        SymplecticMatrix(np.diag([2.0, 2.0]))
    assert not is_affine_tentacular_symplectic(np.diag([2.0, 2.0]))
    assert is_symplectic(np.diag([2.0, 0.5]))
    with pytest.raises(ValidationError):
        random_symplectic(1, 0, scale=-1.0)


def test_hamiltonian_conjugation(h_ex):
    S = random_symplectic(2, 11, scale=0.3)
    conjugated = h_ex.conjugate(S)
    x = np.array([0.2, -0.4, 1.0, 0.5])
    assert conjugated(x) == pytest.approx(h_ex(S.S @ x))
    M = hamiltonian_matrix(conjugated)
    assert np.allclose(M, S.inverse() @ hamiltonian_matrix(h_ex) @ S.S, atol=1e-9)


def test_darboux_basis():
    rng = np.random.default_rng(3)
    S = random_symplectic(3, 5, scale=0.4).S
    # a symplectic 4-dimensional subspace, mixed by a random invertible matrix
    C = S[:, [0, 1, 3, 4]] @ rng.standard_normal((4, 4))
    T = darboux_basis(C)
    assert np.allclose(T.T @ standard_j0(3) @ T, standard_j0(2), atol=1e-9)
    assert np.allclose(symplectic_left_inverse(T) @ T, np.eye(4), atol=1e-9)

    with pytest.raises(ValidationError):
        darboux_basis(np.eye(4)[:, [0, 1]])
