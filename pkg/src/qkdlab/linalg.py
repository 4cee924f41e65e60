"""Dense complex linear algebra and entropies for small quantum registers.

Operators are plain ``numpy`` complex arrays.  Subsystems are combined with
row-major Kronecker indexing: the first label is the slowest index, so for
labels ``("A", "B")`` the basis order is ``|00>, |01>, |10>, |11>``.

All entropies are in bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np
from numba import njit

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
ZERO_EIGENVALUE = 1e-14

JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100


class NotHermitianError(ValueError):
    pass


class InvalidStateError(ValueError):
    pass


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


@dataclass(frozen=True)
class DensityOperator:
    """A validated density matrix with labelled tensor factors."""

    matrix: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        m = as_matrix(self.matrix)
        dims = tuple(int(d) for d in self.dims)
        labels = tuple(self.labels)
        if len(dims) != len(labels):
            raise ValueError("dims and labels differ in length")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels in {labels}")
        if any(d < 1 for d in dims) or prod(dims) != m.shape[0]:
            raise ValueError(f"dims {dims} do not match matrix size {m.shape[0]}")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise InvalidStateError("density operator is not Hermitian")
        if abs(np.trace(m) - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"trace {np.trace(m).real!r} differs from 1")
        if hermitian_eigenvalues(m)[0] < -PSD_TOL:
            raise InvalidStateError("density operator has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown subsystem label {label!r}; have {self.labels}") from None

    def dim_of(self, label: str) -> int:
        return self.dims[self.index(label)]

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    @classmethod
    def from_ket(cls, ket, dims, labels) -> "DensityOperator":
        v = np.asarray(ket, dtype=complex).ravel()
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()), dims, labels)


def tensor_product(a, b) -> np.ndarray:
    """Kronecker product with ``a`` as the slow index."""
    return np.kron(as_matrix(a), as_matrix(b))


def tensor_states(*states: DensityOperator) -> DensityOperator:
    m = np.array([[1.0 + 0j]])
    dims: tuple[int, ...] = ()
    labels: tuple[str, ...] = ()
    for s in states:
        m = np.kron(m, s.matrix)
        dims += s.dims
        labels += s.labels
    return DensityOperator(m, dims, labels)


def partial_trace(rho: DensityOperator, keep) -> DensityOperator:
    """Trace out every subsystem whose label is not in ``keep``.

    Kept subsystems stay in their original order.
    """
    if isinstance(keep, str):
        keep = (keep,)
    keep = set(keep)
    if not keep:
        raise ValueError("keep must name at least one subsystem")
    for label in keep:
        rho.index(label)
    dims = list(rho.dims)
    labels = list(rho.labels)
    t = rho.matrix.reshape(dims + dims)
    for i in reversed(range(len(labels))):
        if labels[i] in keep:
            continue
        t = np.trace(t, axis1=i, axis2=i + len(dims))
        del dims[i]
        del labels[i]
    d = prod(dims)
    m = t.reshape(d, d)
    # trace removes tiny asymmetries only up to rounding; restore exact Hermiticity
    m = 0.5 * (m + m.conj().T)
    return DensityOperator(m, tuple(dims), tuple(labels))


def embed_operator(op, rho: DensityOperator, label: str) -> np.ndarray:
    """Lift a single-subsystem operator to the full space of ``rho``."""
    k = rho.index(label)
    out = np.array([[1.0 + 0j]])
    for i, d in enumerate(rho.dims):
        out = np.kron(out, op if i == k else np.eye(d))
    return out


def apply_kraus(rho: DensityOperator, label: str, kraus) -> DensityOperator:
    if rho.dim_of(label) != np.asarray(kraus[0]).shape[0]:
        raise ValueError(f"Kraus operators do not act on subsystem {label!r}")
    m = np.zeros_like(rho.matrix)
    for k in kraus:
        big = embed_operator(k, rho, label)
        m = m + big @ rho.matrix @ big.conj().T
    m = 0.5 * (m + m.conj().T)
    return DensityOperator(m, rho.dims, rho.labels)


@njit(cache=True)
def _jacobi(a, want_vectors, tol, max_sweeps):
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += abs(a[i, j]) ** 2
    threshold = tol * max(1.0, np.sqrt(scale))
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += abs(a[i, j]) ** 2
        if np.sqrt(2.0 * off) <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                g = abs(apq)
                if g == 0.0:
                    continue
                phase = apq / g
                app = a[p, p].real
                aqq = a[q, q].real
                theta = (aqq - app) / (2.0 * g)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # U = [[c, s*phase], [-s*conj(phase), c]] zeroes a[p, q]
                upp = c
                upq = s * phase
                uqp = -s * np.conj(phase)
                uqq = c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = akp * upp + akq * uqp
                    a[k, q] = akp * upq + akq * uqq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = np.conj(upp) * apk + np.conj(uqp) * aqk
                    a[q, k] = np.conj(upq) * apk + np.conj(uqq) * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                if want_vectors:
                    for k in range(n):
                        vkp = v[k, p]
                        vkq = v[k, q]
                        v[k, p] = vkp * upp + vkq * uqp
                        v[k, q] = vkp * upq + vkq * uqq
    w = np.empty(n)
    for i in range(n):
        w[i] = a[i, i].real
    return w, v


def _check_hermitian(m: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    a = as_matrix(m)
    if np.max(np.abs(a - a.conj().T), initial=0.0) > tol:
        raise NotHermitianError("matrix is not Hermitian")
    return a


def hermitian_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and column eigenvectors by cyclic Jacobi."""
    a = _check_hermitian(m)
    a = np.ascontiguousarray(0.5 * (a + a.conj().T))
    w, v = _jacobi(a, True, JACOBI_TOL, JACOBI_MAX_SWEEPS)
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def hermitian_eigenvalues(m) -> np.ndarray:
    a = _check_hermitian(m)
    a = np.ascontiguousarray(0.5 * (a + a.conj().T))
    w, _ = _jacobi(a, False, JACOBI_TOL, JACOBI_MAX_SWEEPS)
    return np.sort(w, kind="stable")


def _entropy_of_spectrum(w) -> float:
    w = np.asarray(w, dtype=float)
    if np.any(w < -PSD_TOL):
        raise InvalidStateError(f"eigenvalue {w.min()!r} below tolerance")
    w = w[w > ZERO_EIGENVALUE]
    return float(-np.sum(w * np.log2(w)))


def von_neumann_entropy(rho: DensityOperator) -> float:
    return _entropy_of_spectrum(hermitian_eigenvalues(rho.matrix))


def conditional_vn_entropy(rho: DensityOperator, x_label: str, e_label: str) -> float:
    """S(X|E) = S(rho_XE) - S(rho_E)."""
    rho_xe = partial_trace(rho, (x_label, e_label))
    rho_e = partial_trace(rho_xe, (e_label,))
    return von_neumann_entropy(rho_xe) - von_neumann_entropy(rho_e)


def _check_distribution(p, tol=1e-12) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < -tol) or np.any(p > 1 + tol):
        raise ValueError("probabilities must lie in [0, 1]")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
    return np.clip(p, 0.0, 1.0)


def shannon_entropy(p) -> float:
    p = _check_distribution(p).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def shannon_cond_entropy(joint) -> float:
    """H(X|Y) for a joint table indexed ``joint[x, y]``."""
    joint = _check_distribution(joint)
    if joint.ndim != 2:
        raise ValueError("joint distribution must be a 2-D table p[x, y]")
    return shannon_entropy(joint) - shannon_entropy(joint.sum(axis=0))


def binary_entropy(q: float) -> float:
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"binary entropy needs q in [0, 1], got {q!r}")
    if q == 0.0 or q == 1.0:
        return 0.0
    return float(-q * np.log2(q) - (1.0 - q) * np.log2(1.0 - q))


def trace_distance(a: DensityOperator, b: DensityOperator) -> float:
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    mu = hermitian_eigenvalues(a.matrix - b.matrix)
    return float(min(1.0, 0.5 * np.sum(np.abs(mu))))
