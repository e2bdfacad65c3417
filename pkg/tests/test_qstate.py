import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import entropy_oracle, loop_partial_trace_h, loop_partial_trace_k
from qsa.errors import BadRank, DimensionMismatch, NotADensityMatrix
from qsa.qstate import (
    BipartiteDims,
    balanced_basis,
    conditional_states,
    fourier_matrix,
    is_density,
    partial_trace,
    projector,
    random_density,
    random_pure_state,
    random_unitary,
    tensor_product,
    validate_density,
    von_neumann_entropy,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def test_tensor_product_of_maximally_mixed():
    assert np.allclose(tensor_product(np.eye(2) / 2, np.eye(2) / 2), np.eye(4) / 4)


def test_tensor_product_projector_block():
    sigma = random_density(3, seed=1)
    out = tensor_product(projector([1, 0]), sigma)
    assert np.allclose(out[:3, :3], sigma)
    assert np.allclose(out[3:, :], 0) and np.allclose(out[:, 3:], 0)


def test_tensor_product_index_convention(rng):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    out = tensor_product(a, b)
    assert out.shape == (6, 6)
    assert out[0, 0] == pytest.approx(a[0, 0] * b[0, 0], abs=1e-15)
    assert out[1 * 3 + 2, 0 * 3 + 1] == pytest.approx(a[1, 0] * b[2, 1], abs=1e-15)


def test_partial_trace_of_product():
    rho, sigma = random_density(2, seed=3), random_density(3, seed=4)
    joint = np.kron(rho, sigma)
    assert np.max(np.abs(partial_trace(joint, (2, 3), over="K") - rho)) <= 1e-12
    assert np.max(np.abs(partial_trace(joint, (2, 3), over="H") - sigma)) <= 1e-12


def test_partial_trace_bell_state():
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(partial_trace(projector(bell), (2, 2), over="H"), np.eye(2) / 2)


@pytest.mark.parametrize("d,dk", [(2, 2), (2, 3), (3, 2)])
def test_partial_trace_matches_loop_oracle(d, dk):
    rho = random_density(d * dk, seed=d * 10 + dk)
    assert np.max(np.abs(partial_trace(rho, (d, dk), over="H") - loop_partial_trace_h(rho, d, dk))) <= 1e-12
    assert np.max(np.abs(partial_trace(rho, (d, dk), over="K") - loop_partial_trace_k(rho, d, dk))) <= 1e-12


def test_partial_trace_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        partial_trace(np.eye(4) / 4, (2, 3))


def test_entropy_examples():
    for d in (2, 3, 5):
        assert von_neumann_entropy(np.eye(d) / d) == pytest.approx(np.log(d), abs=1e-12)
    assert von_neumann_entropy(projector(random_pure_state(4, seed=0))) <= 1e-12
    # -(3/4) ln(3/4) - (1/4) ln(1/4)
    expected = -0.75 * np.log(0.75) - 0.25 * np.log(0.25)
    assert von_neumann_entropy(np.diag([0.75, 0.25])) == pytest.approx(expected, abs=1e-14)
    assert expected == pytest.approx(0.562335, abs=1e-6)


def test_entropy_rejects_non_states():
    with pytest.raises(NotADensityMatrix):
        von_neumann_entropy(np.diag([0.7, 0.7]))
    with pytest.raises(NotADensityMatrix):
        von_neumann_entropy(np.array([[0.5, 0.5], [0.1, 0.5]]))
    with pytest.raises(NotADensityMatrix):
        von_neumann_entropy(np.diag([1.2, -0.2]))


def test_random_density_rank_one_is_pure():
    rho = random_density(4, 1, seed=5)
    assert is_density(rho)
    assert von_neumann_entropy(rho) <= 1e-10


def test_random_density_bad_rank():
    with pytest.raises(BadRank):
        random_density(3, 4, seed=0)
    with pytest.raises(BadRank):
        random_density(3, 0, seed=0)


def test_random_density_mean_is_maximally_mixed():
    ss = np.random.SeedSequence(11).spawn(10_000)
    mean = sum(random_density(2, 2, s) for s in ss) / len(ss)
    assert np.max(np.abs(mean - np.eye(2) / 2)) <= 0.02


def test_random_density_deterministic():
    a, b = random_density(3, 2, seed=99), random_density(3, 2, seed=99)
    assert a.tobytes() == b.tobytes()


def test_random_unitary():
    u = random_unitary(4, seed=2)
    assert np.max(np.abs(u.conj().T @ u - np.eye(4))) <= 1e-10
    scalar = random_unitary(1, seed=3)
    assert scalar.shape == (1, 1) and abs(abs(scalar[0, 0]) - 1) <= 1e-12


def test_random_unitary_haar_moment():
    ss = np.random.SeedSequence(12).spawn(10_000)
    m = np.mean([abs(random_unitary(2, s)[0, 0]) ** 2 for s in ss])
    assert abs(m - 0.5) <= 0.02


def test_balanced_basis_maximally_mixed_is_fourier():
    for d in (2, 3, 4):
        b = balanced_basis(np.eye(d) / d)
        assert np.allclose(b, fourier_matrix(d), atol=1e-12)
        b = balanced_basis(np.eye(d) / d, phase_seed=d)
        assert np.allclose(np.diag(b.conj().T @ (np.eye(d) / d) @ b).real, 1 / d, atol=1e-12)


def test_balanced_basis_qubit_example():
    a = np.diag([0.75, 0.25])
    b = balanced_basis(a)
    assert np.max(np.abs(np.diag(b.conj().T @ a @ b) - 0.5)) <= 1e-12


def test_balanced_basis_qutrit_random_phases():
    a = np.diag([0.6, 0.3, 0.1])
    b = balanced_basis(a, phase_seed=17)
    assert np.max(np.abs(b.conj().T @ b - np.eye(3))) <= 1e-12
    assert np.max(np.abs(np.diag(b.conj().T @ a @ b) - 1 / 3)) <= 1e-12


@pytest.mark.parametrize("d", [2, 3, 4])
def test_balanced_basis_postcondition_random(d):
    for i, ss in enumerate(np.random.SeedSequence(d).spawn(100)):
        a = random_density(d, 1 + i % d, ss)
        b = balanced_basis(a, phase_seed=i if i % 2 else None)
        assert np.max(np.abs(b.conj().T @ b - np.eye(d))) <= 1e-10
        assert np.max(np.abs(np.diag(b.conj().T @ a @ b) - 1 / d)) <= 1e-10


def test_balanced_basis_deterministic_on_degenerate_spectrum():
    a = np.diag([0.4, 0.4, 0.2])
    assert balanced_basis(a).tobytes() == balanced_basis(a.copy()).tobytes()


def test_conditional_states_average_for_any_basis():
    rho = random_density(6, seed=8)
    dims = BipartiteDims(2, 3)
    for basis in (np.eye(2), random_unitary(2, seed=1), balanced_basis(partial_trace(rho, dims))):
        rs = conditional_states(rho, dims, basis)
        assert np.max(np.abs(rs.mean(axis=0) - partial_trace(rho, dims, over="H"))) <= 1e-11


def test_conditional_states_are_states_for_balanced_basis():
    rho = random_density(6, 4, seed=9)
    basis = balanced_basis(partial_trace(rho, (2, 3)), phase_seed=1)
    for r in conditional_states(rho, (2, 3), basis):
        validate_density((r + r.conj().T) / 2)


# properties ---------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from([(2, 2), (2, 3), (3, 2)]))
def test_partial_trace_preserves_states(seed, dims):
    rho = random_density(dims[0] * dims[1], seed=seed)
    for over in ("H", "K"):
        out = partial_trace(rho, dims, over=over)
        assert abs(np.trace(out) - 1) <= 1e-10
        assert np.linalg.eigvalsh(out)[0] >= -1e-10


@settings(max_examples=40, deadline=None)
@given(seeds, seeds)
def test_partial_trace_of_scaled_product(s1, s2):
    rho = random_density(2, seed=s1) * 0.7
    sigma = random_density(3, seed=s2) * 1.3
    joint = np.kron(rho, sigma)
    assert np.max(np.abs(partial_trace(joint, (2, 3), over="K") - rho * np.trace(sigma))) <= 1e-12
    assert np.max(np.abs(partial_trace(joint, (2, 3), over="H") - sigma * np.trace(rho))) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(seeds, seeds, st.integers(2, 4), st.integers(2, 3))
def test_entropy_additive_on_products(s1, s2, d1, d2):
    rho, sigma = random_density(d1, seed=s1), random_density(d2, seed=s2)
    assert von_neumann_entropy(np.kron(rho, sigma)) == pytest.approx(
        von_neumann_entropy(rho) + von_neumann_entropy(sigma), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seeds, seeds, st.integers(2, 4))
def test_entropy_concave(s1, s2, d):
    rho, sigma = random_density(d, seed=s1), random_density(d, seed=s2)
    mid = von_neumann_entropy((rho + sigma) / 2)
    assert mid >= (von_neumann_entropy(rho) + von_neumann_entropy(sigma)) / 2 - 1e-9
    assert mid == pytest.approx(entropy_oracle((rho + sigma) / 2), abs=1e-12)
