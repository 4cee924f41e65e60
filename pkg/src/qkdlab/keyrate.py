"""Asymptotic and finite-size secret key rates.

The finite rate of an eps-secure key under collective attacks is

    r = (n/N) min_{Q'} [S(X|E) - 5 sqrt(log2(2/eps_bar)/n) - f_EC H(X|Y)]
        + (2/N) log2(2 eps_PA)

where Q' ranges over QBERs within zeta(eps_PE, n_p, m) of the observed one
and Eve's free parameter is minimized at every Q'.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

from . import _kernel
from .linalg import binary_entropy
from .search import grid_then_golden
from .states import (
    P_MAX,
    NoiseConfig,
    Protocol,
    Scenario,
    bb84_lambda4_range,
    disturbance_from_qber,
    eve_gram,
    qber_from_params,
    scenario_ccq,
)

BUDGET_FLOOR = 1e-3
SCAN_POINTS = _kernel.SCAN_POINTS

_PROTOCOL_CODE = {Protocol.BB84: _kernel.BB84, Protocol.SIX_STATE: _kernel.SIX_STATE}


@dataclass(frozen=True)
class SecurityBudget:
    eps_bar: float
    eps_pe: float
    eps_ec: float
    eps_pa: float

    def __post_init__(self):
        parts = (self.eps_bar, self.eps_pe, self.eps_ec, self.eps_pa)
        if not all(0.0 < e < 1.0 for e in parts):
            raise ValueError(f"every security parameter must lie in (0, 1), got {parts}")
        floor = self.total * BUDGET_FLOOR * (1.0 - 1e-9)
        if min(parts) < floor:
            raise ValueError(f"budget component below the floor eps_total/1000: {parts}")

    @property
    def total(self) -> float:
        return self.eps_bar + self.eps_pe + self.eps_ec + self.eps_pa

    @classmethod
    def from_fractions(cls, eps_total: float, f_bar: float, f_pe: float, f_pa: float) -> "SecurityBudget":
        """Split ``eps_total``; error correction receives the remainder."""
        f_ec = 1.0 - f_bar - f_pe - f_pa
        if f_ec < BUDGET_FLOOR * (1.0 - 1e-9):
            raise ValueError(f"fractions leave {f_ec!r} for error correction, below the floor")
        return cls(eps_total * f_bar, eps_total * f_pe, eps_total * f_ec, eps_total * f_pa)

    @classmethod
    def even(cls, eps_total: float) -> "SecurityBudget":
        return cls.from_fractions(eps_total, 0.25, 0.25, 0.25)


@dataclass(frozen=True)
class FiniteSizeParams:
    N: float
    m: float
    n_p: int = 2
    f_ec: float = 1.0
    sifting: float = 1.0

    def __post_init__(self):
        if not 1 <= self.m <= self.N - 1:
            raise ValueError(f"need 1 <= m <= N - 1, got m={self.m!r}, N={self.N!r}")
        if self.f_ec < 1.0:
            raise ValueError("f_EC must be at least 1")
        if not 0.0 < self.sifting <= 1.0:
            raise ValueError("sifting factor must lie in (0, 1]")

    @property
    def n(self) -> float:
        return self.sifting * (self.N - self.m)


@dataclass
class RateBreakdown:
    protocol: str
    scenario: int
    D: float
    p: float
    Q: float
    sxe: float
    hxy: float
    rate: float
    N: float = math.inf
    m: float = 0.0
    n: float = math.inf
    zeta: float = 0.0
    aep_penalty: float = 0.0
    pa_correction: float = 0.0
    f_ec: float = 1.0
    worst_Q: float = math.nan
    argmin_lambda4: float | None = None
    budget: SecurityBudget | None = None
    status: str = "ok"
    extra: dict = field(default_factory=dict)

    @property
    def key_fraction(self) -> float:
        return 1.0 if math.isinf(self.N) else self.n / self.N

    def recomputed_rate(self) -> float:
        return assemble_rate(self.key_fraction, self.sxe, self.hxy, self.aep_penalty, self.f_ec, self.pa_correction)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["budget"] = None if self.budget is None else asdict(self.budget)
        return d


def assemble_rate(key_fraction, sxe, hxy, aep, f_ec, pa):
    return key_fraction * (sxe - aep - f_ec * hxy) + pa


def zeta(eps_pe: float, n_p: int, m: float) -> float:
    """Statistical deviation allowed after m parameter-estimation samples (natural logs)."""
    if not 0.0 < eps_pe <= 1.0:
        raise ValueError(f"eps_PE must lie in (0, 1], got {eps_pe!r}")
    if m < 1:
        raise ValueError(f"need at least one estimation sample, got m={m!r}")
    if n_p < 0:
        raise ValueError("n_p must be non-negative")
    return math.sqrt((math.log(1.0 / eps_pe) + n_p * math.log(m + 1.0)) / (8.0 * m))


def aep_penalty(eps_bar: float, n: float) -> float:
    """5 sqrt(log2(2/eps_bar) / n), the smoothing cost per key bit."""
    if not 0.0 < eps_bar < 2.0:
        raise ValueError(f"smoothing parameter out of range: {eps_bar!r}")
    if n < 1:
        raise ValueError(f"need at least one key signal, got n={n!r}")
    return 5.0 * math.sqrt(math.log2(2.0 / eps_bar) / n)


def pa_correction(eps_pa: float, N: float) -> float:
    return 2.0 / N * math.log2(2.0 * eps_pa)


def _resolve(D, Q, p):
    if (D is None) == (Q is None):
        raise ValueError("give exactly one of D (disturbance) or Q (observed QBER)")
    p = min(float(p), P_MAX)
    if Q is not None:
        if not 0.0 <= Q <= 0.5:
            raise ValueError(f"QBER must lie in [0, 0.5], got {Q!r}")
        return disturbance_from_qber(Q, p, warn=True), float(Q), p
    return float(D), qber_from_params(D, p), p


def _check_scenario(scenario, p):
    scenario = Scenario.parse(scenario)
    if scenario is Scenario.S0_NONE and p != 0.0:
        raise ValueError("scenario S0 carries no noise; p must be 0")
    return scenario


def state_entropies(protocol, scenario, D, p, lambda4=None, method="sqrt") -> tuple[float, float]:
    """S(X|E) and H(X|Y) of the explicitly constructed ccq state."""
    spec = eve_gram(protocol, D, p, lambda4)
    ccq = scenario_ccq(spec, NoiseConfig(scenario, p if scenario != Scenario.S0_NONE else 0.0), method)
    return ccq.sxe(), ccq.hxy()


def _min_over_lambda4_states(protocol, scenario, D, p):
    if protocol is Protocol.SIX_STATE:
        s, h = state_entropies(protocol, scenario, D, p)
        return s, h, None
    lo, hi = bb84_lambda4_range(D, p)
    f = lambda lam: state_entropies(protocol, scenario, D, p, lam)[0]
    lam, s = grid_then_golden(f, lo, hi, _kernel.LAMBDA4_GRID, max(_kernel.LAMBDA4_TOL * (hi - lo), 1e-15))
    _, h = state_entropies(protocol, scenario, D, p, lam)
    return s, h, lam


def asymptotic_rate(protocol, D: float, p: float = 0.0, *, scenario=Scenario.S1_ALICE_QUANTUM,
                    f_ec: float = 1.0, engine: str = "kernel") -> RateBreakdown:
    """r = min_Eve S(X|E) - f_EC H(X|Y) at disturbance D and noise p.

    ``engine="states"`` builds every ccq state explicitly and is much slower;
    it exists to cross-check the compiled route.
    """
    protocol = Protocol.parse(protocol)
    D, Q, p = _resolve(D, None, p)
    scenario = _check_scenario(scenario, p)
    if engine == "kernel":
        s, lam = _kernel.min_sxe(_PROTOCOL_CODE[protocol], int(scenario), D, p)
        h = binary_entropy(Q)
        lam = None if math.isnan(lam) else float(lam)
    elif engine == "states":
        s, h, lam = _min_over_lambda4_states(protocol, scenario, D, p)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return RateBreakdown(
        protocol=protocol.value, scenario=int(scenario), D=D, p=p, Q=Q, sxe=float(s), hxy=float(h),
        rate=float(s - f_ec * h), f_ec=f_ec, worst_Q=Q, argmin_lambda4=lam,
    )


def worst_case(protocol, scenario, Q_obs, p, zeta_value, *, f_ec=1.0, leak="worst", scan_points=SCAN_POINTS):
    """min over Q' in [Q-zeta, Q+zeta] (grid of ``scan_points``) of S(X|E) - f_EC H(X|Y).

    Returns (objective, Q', S(X|E), H(X|Y), lambda4).
    """
    if leak not in ("worst", "observed"):
        raise ValueError(f"leak must be 'worst' or 'observed', got {leak!r}")
    protocol = Protocol.parse(protocol)
    obj, qw, s, h, lam = _kernel.worst_case(
        _PROTOCOL_CODE[protocol], int(scenario), Q_obs, p, zeta_value, f_ec, leak == "observed", scan_points,
    )
    return obj, qw, s, h, (None if math.isnan(lam) else lam)


def finite_rate(protocol, *, D=None, Q=None, p=0.0, N, m, budget: SecurityBudget,
                scenario=Scenario.S1_ALICE_QUANTUM, f_ec=1.0, n_p=2, sifting=1.0,
                leak="worst", scan_points=SCAN_POINTS) -> RateBreakdown:
    """Finite-size eps-secure key rate for a fixed number of estimation samples m."""
    protocol = Protocol.parse(protocol)
    D, Q, p = _resolve(D, Q, p)
    scenario = _check_scenario(scenario, p)
    fs = FiniteSizeParams(N=N, m=m, n_p=n_p, f_ec=f_ec, sifting=sifting)
    z = zeta(budget.eps_pe, n_p, m)
    aep = aep_penalty(budget.eps_bar, fs.n)
    pa = pa_correction(budget.eps_pa, N)
    _, qw, s, h, lam = worst_case(protocol, scenario, Q, p, z, f_ec=f_ec, leak=leak, scan_points=scan_points)
    rate = assemble_rate(fs.n / N, s, h, aep, f_ec, pa)
    return RateBreakdown(
        protocol=protocol.value, scenario=int(scenario), D=D, p=p, Q=Q, sxe=s, hxy=h, rate=rate,
        N=float(N), m=float(m), n=fs.n, zeta=z, aep_penalty=aep, pa_correction=pa, f_ec=f_ec,
        worst_Q=qw, argmin_lambda4=lam, budget=budget,
    )


def with_status(r: RateBreakdown, status: str) -> RateBreakdown:
    return replace(r, status=status)
