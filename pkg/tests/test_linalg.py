import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qkdlab.linalg import (
    DensityOperator,
    InvalidStateError,
    NotHermitianError,
    binary_entropy,
    conditional_vn_entropy,
    hermitian_eig,
    hermitian_eigenvalues,
    partial_trace,
    shannon_cond_entropy,
    shannon_entropy,
    tensor_states,
    trace_distance,
    von_neumann_entropy,
)


def random_hermitian(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (a + a.conj().T) / 2


def random_state(rng, dims, labels, rank=None):
    d = int(np.prod(dims))
    k = rank or d
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    m = g @ g.conj().T
    return DensityOperator(m / np.trace(m), dims, labels)


def random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


BELL_PSI_PLUS = np.array([0, 1, 1, 0]) / math.sqrt(2)


class TestDensityOperator:
    def test_rejects_non_hermitian(self):
        with pytest.raises(InvalidStateError):
            DensityOperator(np.array([[0.5, 0.1], [0.0, 0.5]]), (2,), ("A",))

    def test_rejects_wrong_trace(self):
        with pytest.raises(InvalidStateError):
            DensityOperator(np.eye(2) * 0.6, (2,), ("A",))

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(InvalidStateError):
            DensityOperator(np.diag([1.2, -0.2]), (2,), ("A",))

    def test_dims_must_match(self):
        with pytest.raises(ValueError):
            DensityOperator(np.eye(4) / 4, (2, 3), ("A", "B"))
        with pytest.raises(ValueError):
            DensityOperator(np.eye(4) / 4, (2, 2), ("A", "A"))

    def test_matrix_is_read_only(self):
        rho = DensityOperator(np.eye(2) / 2, (2,), ("A",))
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 1.0

    def test_unknown_label(self):
        rho = DensityOperator(np.eye(2) / 2, (2,), ("A",))
        with pytest.raises(KeyError):
            rho.index("B")

    def test_pure_state_purity(self):
        rho = DensityOperator.from_ket(BELL_PSI_PLUS, (2, 2), ("A", "B"))
        assert rho.purity() == pytest.approx(1.0, abs=1e-12)


class TestEigensolver:
    @pytest.mark.parametrize("n", [1, 2, 3, 4, 8, 16, 32])
    def test_matches_numpy(self, n):
        rng = np.random.default_rng(n)
        a = random_hermitian(rng, n)
        ours = hermitian_eigenvalues(a)
        ref = np.linalg.eigvalsh(a)
        scale = max(1.0, np.linalg.norm(a))
        assert np.max(np.abs(ours - ref)) <= 1e-12 * scale

    @given(st.integers(1, 12), st.integers(0, 2**31 - 1), st.floats(1e-3, 1e3))
    def test_trace_and_square_sums(self, n, seed, scale):
        a = random_hermitian(np.random.default_rng(seed), n, scale)
        w = hermitian_eigenvalues(a)
        norm = max(1.0, np.linalg.norm(a))
        assert abs(w.sum() - np.trace(a).real) <= 1e-10 * norm
        assert abs(np.sum(w**2) - np.trace(a @ a).real) <= 1e-9 * norm**2
        assert np.all(np.diff(w) >= 0)

    def test_eigenvectors(self):
        a = random_hermitian(np.random.default_rng(7), 10)
        w, v = hermitian_eig(a)
        assert np.max(np.abs(a @ v - v * w)) < 1e-11
        assert np.max(np.abs(v.conj().T @ v - np.eye(10))) < 1e-12

    def test_degenerate_spectrum(self):
        u = random_unitary(np.random.default_rng(3), 6)
        a = u @ np.diag([1, 1, 1, 2, 2, 0.0]) @ u.conj().T
        assert np.allclose(hermitian_eigenvalues(a), [0, 1, 1, 1, 2, 2], atol=1e-12)

    def test_rejects_non_hermitian(self):
        with pytest.raises(NotHermitianError):
            hermitian_eigenvalues(np.array([[0, 1], [0, 0]]))

    def test_deterministic(self):
        a = random_hermitian(np.random.default_rng(11), 9)
        assert np.array_equal(hermitian_eigenvalues(a), hermitian_eigenvalues(a))


class TestPartialTrace:
    def test_bell_marginal_is_maximally_mixed(self):
        rho = DensityOperator.from_ket(BELL_PSI_PLUS, (2, 2), ("A", "B"))
        assert np.allclose(partial_trace(rho, "A").matrix, np.eye(2) / 2, atol=1e-15)

    def test_keeps_original_order(self):
        rng = np.random.default_rng(1)
        a = random_state(rng, (2,), ("A",))
        b = random_state(rng, (3,), ("B",))
        c = random_state(rng, (2,), ("C",))
        abc = tensor_states(a, b, c)
        ac = partial_trace(abc, ("C", "A"))
        assert ac.labels == ("A", "C") and ac.dims == (2, 2)
        assert np.allclose(ac.matrix, np.kron(a.matrix, c.matrix), atol=1e-14)

    @given(st.integers(0, 2**31 - 1), st.floats(0, 1))
    def test_commutes_with_mixing(self, seed, alpha):
        rng = np.random.default_rng(seed)
        r = random_state(rng, (2, 3), ("A", "B"))
        s = random_state(rng, (2, 3), ("A", "B"))
        mix = DensityOperator(alpha * r.matrix + (1 - alpha) * s.matrix, (2, 3), ("A", "B"))
        lhs = partial_trace(mix, "A").matrix
        rhs = alpha * partial_trace(r, "A").matrix + (1 - alpha) * partial_trace(s, "A").matrix
        assert np.max(np.abs(lhs - rhs)) <= 1e-12
        assert abs(np.trace(lhs) - 1) <= 1e-12


class TestEntropy:
    def test_pure_and_mixed(self):
        assert von_neumann_entropy(DensityOperator.from_ket([1, 0, 0], (3,), ("A",))) == pytest.approx(0, abs=1e-12)
        assert von_neumann_entropy(DensityOperator(np.eye(4) / 4, (4,), ("A",))) == pytest.approx(2, abs=1e-12)

    def test_bell_diagonal_weights(self):
        Q = 0.1
        lam = np.array([1 - 1.5 * Q, Q / 2, Q / 2, Q / 2])
        bell = np.array([[0, 1, 1, 0], [0, 1, -1, 0], [1, 0, 0, 1], [1, 0, 0, -1]]) / math.sqrt(2)
        m = sum(l * np.outer(v, v) for l, v in zip(lam, bell))
        rho = DensityOperator(m, (2, 2), ("A", "B"))
        assert von_neumann_entropy(rho) == pytest.approx(-np.sum(lam * np.log2(lam)), abs=1e-12)

    @given(st.integers(0, 2**31 - 1))
    def test_unitary_invariance(self, seed):
        rng = np.random.default_rng(seed)
        rho = random_state(rng, (4,), ("A",), rank=2)
        u = random_unitary(rng, 4)
        rotated = DensityOperator(u @ rho.matrix @ u.conj().T, (4,), ("A",))
        assert abs(von_neumann_entropy(rotated) - von_neumann_entropy(rho)) <= 1e-10

    def test_conditional_entropy_of_bell_state(self):
        rho = DensityOperator.from_ket(BELL_PSI_PLUS, (2, 2), ("A", "B"))
        assert conditional_vn_entropy(rho, "A", "B") == pytest.approx(-1, abs=1e-12)

    def test_conditional_entropy_of_product(self):
        rng = np.random.default_rng(5)
        a = random_state(rng, (2,), ("X",))
        e = random_state(rng, (3,), ("E",))
        assert conditional_vn_entropy(tensor_states(a, e), "X", "E") == pytest.approx(von_neumann_entropy(a), abs=1e-10)


class TestClassical:
    def test_binary_entropy(self):
        assert binary_entropy(0.5) == 1.0
        assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0
        assert binary_entropy(0.11) == pytest.approx(0.4999, abs=1e-3)
        with pytest.raises(ValueError):
            binary_entropy(1.5)

    def test_conditional_shannon(self):
        Q = 0.07
        joint = np.array([[(1 - Q) / 2, Q / 2], [Q / 2, (1 - Q) / 2]])
        assert shannon_cond_entropy(joint) == pytest.approx(binary_entropy(Q), abs=1e-14)
        assert shannon_entropy([0.25] * 4) == pytest.approx(2.0)

    def test_rejects_bad_distribution(self):
        with pytest.raises(ValueError):
            shannon_entropy([0.5, 0.6])

    def test_trace_distance(self):
        a = DensityOperator(np.diag([1.0, 0.0]), (2,), ("A",))
        b = DensityOperator(np.diag([0.0, 1.0]), (2,), ("A",))
        assert trace_distance(a, b) == pytest.approx(1.0)
        assert trace_distance(a, a) == 0.0
