"""Quantum states of the entanglement-based BB84 and six-state protocols.

Alice and Bob start from |Psi+> = (|01> + |10>)/sqrt(2).  Eve attacks Bob's
qubit with the isometry

    |0>_B -> sqrt(1-D)|0>|A> + sqrt(D)|1>|B>
    |1>_B -> sqrt(1-D)|1>|C> + sqrt(D)|0>|D>

whose four probe states live in a 4-dimensional register E.  Only the Gram
matrix of the probes matters: any two factorizations differ by a unitary on
E, which leaves every entropy unchanged.  The Gram entries follow from
requiring the noisy two-qubit state to be Bell-diagonal with the symmetry
of the protocol.

Noise scenarios (``p`` is the depolarizing or classical noise parameter):

* S0: no noise.
* S1: Alice depolarizes her qubit.
* S2: Alice depolarizes Bob's qubit before sending it (before Eve).
* S3: Bob depolarizes his qubit after Eve's interaction.
* S4: Alice flips her measured bit with probability p/2.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import (
    DensityOperator,
    apply_kraus,
    binary_entropy,
    conditional_vn_entropy,
    hermitian_eig,
    hermitian_eigenvalues,
    partial_trace,
    shannon_cond_entropy,
)

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)

P_MAX = 1.0 - 1e-9
GRAM_TOL = 1e-12

_S2 = 1.0 / np.sqrt(2.0)
BELL_VECTORS = {
    "psi+": np.array([0, _S2, _S2, 0], dtype=complex),
    "psi-": np.array([0, _S2, -_S2, 0], dtype=complex),
    "phi+": np.array([_S2, 0, 0, _S2], dtype=complex),
    "phi-": np.array([_S2, 0, 0, -_S2], dtype=complex),
}
BELL_ORDER = ("psi+", "psi-", "phi+", "phi-")


class Protocol(enum.Enum):
    BB84 = "bb84"
    SIX_STATE = "six-state"

    @classmethod
    def parse(cls, value) -> "Protocol":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("_", "-")
        aliases = {"bb84": cls.BB84, "six-state": cls.SIX_STATE, "sixstate": cls.SIX_STATE, "six": cls.SIX_STATE}
        if key not in aliases:
            raise ValueError(f"unknown protocol {value!r}")
        return aliases[key]


class Scenario(enum.IntEnum):
    S0_NONE = 0
    S1_ALICE_QUANTUM = 1
    S2_BOB_BEFORE_EVE = 2
    S3_BOB_AFTER_EVE = 3
    S4_CLASSICAL = 4

    @classmethod
    def parse(cls, value) -> "Scenario":
        if isinstance(value, cls):
            return value
        s = str(value).upper().lstrip("S")
        return cls(int(s))


class InfeasibleAttackError(ValueError):
    """Raised when no set of probe states realizes the requested statistics."""

    def __init__(self, detail=""):
        msg = "infeasible attack parameters"
        super().__init__(f"{msg}: {detail}" if detail else msg)


@dataclass(frozen=True)
class NoiseConfig:
    scenario: Scenario
    p: float = 0.0

    def __post_init__(self):
        scenario = Scenario.parse(self.scenario)
        object.__setattr__(self, "scenario", scenario)
        if not 0.0 <= self.p < 1.0:
            raise ValueError(f"noise parameter must be in [0, 1), got {self.p!r}")
        if scenario is Scenario.S0_NONE and self.p != 0.0:
            raise ValueError("scenario S0 carries no noise; p must be 0")


@dataclass(frozen=True)
class AttackSpec:
    """Eve's probe Gram matrix, probes ordered (A, B, C, D)."""

    protocol: Protocol
    D: float
    p: float
    lambda4: float | None
    gram: np.ndarray

    @property
    def qber(self) -> float:
        return qber_from_params(self.D, self.p)


def qber_from_params(D: float, p: float) -> float:
    """QBER seen by Alice and Bob: Q = (1 - p) D + p / 2."""
    if not 0.0 <= D <= 0.5:
        raise ValueError(f"disturbance must lie in [0, 0.5], got {D!r}")
    if not 0.0 <= p < 1.0:
        raise ValueError(f"noise parameter must lie in [0, 1), got {p!r}")
    return (1.0 - p) * D + 0.5 * p


def disturbance_from_qber(Q: float, p: float, *, warn: bool = False) -> float:
    """Invert ``qber_from_params``; QBER below the noise floor clamps to D = 0."""
    if not 0.0 <= Q <= 0.5:
        raise ValueError(f"QBER must lie in [0, 0.5], got {Q!r}")
    p = min(p, P_MAX)
    D = (Q - 0.5 * p) / (1.0 - p)
    if D < 0.0:
        if warn:
            warnings.warn(f"QBER {Q} below the channel floor p/2 = {p / 2}; using D = 0", stacklevel=2)
        return 0.0
    return min(D, 0.5)


def bb84_lambda4_range(D: float, p: float) -> tuple[float, float]:
    """Values of the Phi- Bell weight for which BB84 probes exist."""
    p = min(p, P_MAX)
    Q = qber_from_params(D, p)
    lo = max(0.0, 0.25 * p, 2.0 * Q - 1.0 + 0.25 * p)
    hi = min(Q, Q - 0.25 * p)
    if D == 0.0:
        lo = hi = 0.25 * p
    if lo > hi:
        lo = hi = 0.5 * (lo + hi)
    return lo, hi


def gram_overlaps(protocol, D: float, p: float, lambda4: float | None = None) -> tuple[float, float]:
    """The two free probe overlaps <A|C> and <B|D>; all other pairs are orthogonal."""
    protocol = Protocol.parse(protocol)
    p = min(p, P_MAX)
    Q = qber_from_params(D, p)
    if protocol is Protocol.SIX_STATE:
        ac = (1.0 - 2.0 * Q) / ((1.0 - p) * (1.0 - D))
        bd = 0.0
    else:
        if lambda4 is None:
            raise ValueError("BB84 needs the free parameter lambda4")
        if not -1e-15 <= lambda4 <= Q + 1e-15:
            raise InfeasibleAttackError(f"lambda4={lambda4!r} outside [0, Q={Q!r}]")
        ac = (1.0 - 3.0 * Q + 2.0 * lambda4) / ((1.0 - p) * (1.0 - D))
        # probes B, D carry weight sqrt(D); at D = 0 their overlap is irrelevant
        scale = (1.0 - p) * D
        bd = 0.0 if scale == 0.0 else (Q - 2.0 * lambda4) / scale
    # dividing by (1 - p) D magnifies rounding in lambda4 when D is small
    scale = (1.0 - p) * D
    bd_tol = GRAM_TOL + (1e-15 / scale if scale > 0.0 else 0.0)
    for name, val, tol in (("<A|C>", ac, GRAM_TOL), ("<B|D>", bd, bd_tol)):
        if abs(val) > 1.0 + tol:
            raise InfeasibleAttackError(f"{name} = {val!r}")
    return float(np.clip(ac, -1.0, 1.0)), float(np.clip(bd, -1.0, 1.0))


def eve_gram(protocol, D: float, p: float, lambda4: float | None = None) -> AttackSpec:
    protocol = Protocol.parse(protocol)
    ac, bd = gram_overlaps(protocol, D, p, lambda4)
    g = np.eye(4, dtype=complex)
    g[0, 2] = g[2, 0] = ac
    g[1, 3] = g[3, 1] = bd
    if hermitian_eigenvalues(g)[0] < -1e-10:
        raise InfeasibleAttackError("probe Gram matrix is not positive semidefinite")
    g.setflags(write=False)
    lam = None if protocol is Protocol.SIX_STATE else float(lambda4)
    return AttackSpec(protocol, float(D), float(p), lam, g)


def _cholesky_psd(g: np.ndarray) -> np.ndarray:
    """Upper factor R with R^H R = g, tolerating zero pivots."""
    n = g.shape[0]
    a = np.array(g, dtype=complex)
    r = np.zeros_like(a)
    for k in range(n):
        piv = a[k, k].real - np.sum(np.abs(r[:k, k]) ** 2)
        if piv < -1e-10:
            raise InfeasibleAttackError("probe Gram matrix is not positive semidefinite")
        if piv <= 1e-14:
            continue
        r[k, k] = np.sqrt(piv)
        for j in range(k + 1, n):
            r[k, j] = (a[k, j] - np.vdot(r[:k, k], r[:k, j])) / r[k, k]
    return r


def probes_from_gram(spec: AttackSpec, method: str = "sqrt") -> np.ndarray:
    """Probe vectors as the columns of a 4x4 matrix whose Gram is ``spec.gram``.

    ``"sqrt"`` uses the principal square root of the Gram matrix, which is
    unique and therefore free of sign conventions; ``"cholesky"`` gives a
    triangular factorization, related to the first one by a unitary on E.
    """
    g = np.asarray(spec.gram)
    if method == "sqrt":
        w, v = hermitian_eig(g)
        if w[0] < -1e-10:
            raise InfeasibleAttackError("probe Gram matrix is not positive semidefinite")
        return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    if method == "cholesky":
        return _cholesky_psd(g)
    raise ValueError(f"unknown factorization {method!r}")


def bell_state(which: str) -> DensityOperator:
    try:
        v = BELL_VECTORS[which.lower()]
    except KeyError:
        raise ValueError(f"unknown Bell state {which!r}; use one of {BELL_ORDER}") from None
    return DensityOperator(np.outer(v, v.conj()), (2, 2), ("A", "B"))


def depolarize(rho: DensityOperator, target: str, p: float) -> DensityOperator:
    if rho.dim_of(target) != 2:
        raise ValueError(f"subsystem {target!r} is not a qubit")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"noise parameter must lie in [0, 1], got {p!r}")
    kraus = [np.sqrt(1.0 - 0.75 * p) * I2, np.sqrt(p / 4) * SX, np.sqrt(p / 4) * SY, np.sqrt(p / 4) * SZ]
    return apply_kraus(rho, target, kraus)


def _eve_isometry(probes: np.ndarray, D: float) -> np.ndarray:
    """8x2 isometry B -> B (x) E, rows indexed as b * 4 + e."""
    a, b, c, d = (probes[:, i] for i in range(4))
    out0 = np.sqrt(1.0 - D) * np.kron([1, 0], a) + np.sqrt(D) * np.kron([0, 1], b)
    out1 = np.sqrt(1.0 - D) * np.kron([0, 1], c) + np.sqrt(D) * np.kron([1, 0], d)
    return np.stack([out0, out1], axis=1)


def apply_eve(rho_ab: DensityOperator, spec: AttackSpec, method: str = "sqrt") -> DensityOperator:
    """Run Eve's interaction on Bob's qubit of a two-qubit state."""
    if rho_ab.labels != ("A", "B") or rho_ab.dims != (2, 2):
        raise ValueError("expected a two-qubit state labelled (A, B)")
    v = np.kron(I2, _eve_isometry(probes_from_gram(spec, method), spec.D))
    m = v @ rho_ab.matrix @ v.conj().T
    m = 0.5 * (m + m.conj().T)
    return DensityOperator(m, (2, 2, 4), ("A", "B", "E"))


def eve_state(spec: AttackSpec, method: str = "sqrt") -> DensityOperator:
    """Pure state of A, B, E after Eve attacks the noiseless |Psi+>."""
    return apply_eve(bell_state("psi+"), spec, method)


def scenario_state(spec: AttackSpec, noise: NoiseConfig, method: str = "sqrt") -> DensityOperator:
    s, p = noise.scenario, noise.p
    if s is Scenario.S0_NONE:
        return eve_state(spec, method)
    if s is Scenario.S1_ALICE_QUANTUM:
        return depolarize(eve_state(spec, method), "A", p)
    if s is Scenario.S2_BOB_BEFORE_EVE:
        return apply_eve(depolarize(bell_state("psi+"), "B", p), spec, method)
    if s is Scenario.S3_BOB_AFTER_EVE:
        return depolarize(eve_state(spec, method), "B", p)
    raise ValueError("scenario S4 adds classical noise; use scenario_ccq")


@dataclass(frozen=True)
class CcqState:
    """Classical X (Alice), classical Y (Bob), quantum E (Eve)."""

    density: DensityOperator

    def __post_init__(self):
        if self.density.labels != ("X", "Y", "E"):
            raise ValueError("ccq state must carry labels (X, Y, E)")
        if classical_violation(self.density, "X") > 1e-12 or classical_violation(self.density, "Y") > 1e-12:
            raise ValueError("X and Y registers of a ccq state must be classical")

    @property
    def rho_xe(self) -> DensityOperator:
        return partial_trace(self.density, ("X", "E"))

    @property
    def rho_xy(self) -> DensityOperator:
        return partial_trace(self.density, ("X", "Y"))

    def joint_xy(self) -> np.ndarray:
        return np.real(np.diag(self.rho_xy.matrix)).reshape(2, 2)

    def qber(self) -> float:
        j = self.joint_xy()
        return float(j[0, 1] + j[1, 0])

    def sxe(self) -> float:
        return conditional_vn_entropy(self.density, "X", "E")

    def hxy(self) -> float:
        return shannon_cond_entropy(self.joint_xy())


def classical_violation(rho: DensityOperator, label: str) -> float:
    """Largest matrix element coupling different basis values of ``label``."""
    k = rho.index(label)
    dims = rho.dims
    t = rho.matrix.reshape(dims + dims)
    t = np.moveaxis(t, (k, k + len(dims)), (0, 1))
    d = dims[k]
    worst = 0.0
    for i in range(d):
        for j in range(d):
            if i != j:
                worst = max(worst, float(np.max(np.abs(t[i, j]), initial=0.0)))
    return worst


def measure_ccq(rho_abe: DensityOperator) -> CcqState:
    """Z-basis measurement of A and B into registers X and Y.

    Bob flips his outcome so that |Psi+> gives X = Y; Prob[X != Y] is the QBER.
    """
    if rho_abe.labels != ("A", "B", "E"):
        raise ValueError("expected a state labelled (A, B, E)")
    de = rho_abe.dim_of("E")
    flip = np.kron(np.kron(I2, SX), np.eye(de))
    m = flip @ rho_abe.matrix @ flip.conj().T
    t = m.reshape(2, 2, de, 2, 2, de)
    out = np.zeros_like(t)
    for x in range(2):
        for y in range(2):
            out[x, y, :, x, y, :] = t[x, y, :, x, y, :]
    out = out.reshape(4 * de, 4 * de)
    return CcqState(DensityOperator(out, (2, 2, de), ("X", "Y", "E")))


def classical_flip(ccq: CcqState, p: float, target: str = "X") -> CcqState:
    """Flip the classical register with probability p/2."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"noise parameter must lie in [0, 1], got {p!r}")
    if classical_violation(ccq.density, target) > 1e-12:
        raise ValueError(f"register {target!r} is not classical")
    kraus = [np.sqrt(1.0 - 0.5 * p) * I2, np.sqrt(0.5 * p) * SX]
    return CcqState(apply_kraus(ccq.density, target, kraus))


def scenario_ccq(spec: AttackSpec, noise: NoiseConfig, method: str = "sqrt") -> CcqState:
    if noise.scenario is Scenario.S4_CLASSICAL:
        return classical_flip(measure_ccq(eve_state(spec, method)), noise.p)
    return measure_ccq(scenario_state(spec, noise, method))


def bell_coefficients(rho_ab: DensityOperator) -> tuple[np.ndarray, float]:
    """Bell-basis diagonal (Psi+, Psi-, Phi+, Phi-) and largest off-diagonal magnitude."""
    if rho_ab.dims != (2, 2):
        raise ValueError(f"expected a two-qubit state, got dims {rho_ab.dims}")
    basis = np.stack([BELL_VECTORS[k] for k in BELL_ORDER], axis=1)
    m = basis.conj().T @ rho_ab.matrix @ basis
    diag = np.real(np.diag(m)).copy()
    off = m - np.diag(np.diag(m))
    return diag, float(np.max(np.abs(off)))


def reduced_ab(rho_abe: DensityOperator) -> DensityOperator:
    return partial_trace(rho_abe, ("A", "B"))


def bell_diagonal_entropies(lambdas) -> tuple[float, float]:
    """S(X|E) and H(X|Y) when Eve holds a purification of a Bell-diagonal state.

    Closed form for the noiseless scenario, kept as an independent check of the
    state-based route: S(X|E) = 1 - H(lambda) + h(l1 + l2), H(X|Y) = h(l3 + l4).
    """
    lam = np.clip(np.asarray(lambdas, dtype=float), 0.0, None)
    nz = lam[lam > 0]
    h_lam = float(-np.sum(nz * np.log2(nz)))
    return 1.0 - h_lam + binary_entropy(min(1.0, lam[0] + lam[1])), binary_entropy(min(1.0, lam[2] + lam[3]))
