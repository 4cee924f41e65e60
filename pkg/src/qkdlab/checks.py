"""Invariant suite behind ``qkdlab verify``.

Each check sweeps a (D, p) grid through the explicit state construction and
reports the worst deviation it saw against a fixed tolerance.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .keyrate import SecurityBudget, asymptotic_rate, finite_rate
from .linalg import DensityOperator, binary_entropy
from .states import (
    I2,
    NoiseConfig,
    Protocol,
    Scenario,
    bb84_lambda4_range,
    bell_coefficients,
    classical_flip,
    depolarize,
    eve_gram,
    measure_ccq,
    eve_state,
    qber_from_params,
    reduced_ab,
    scenario_ccq,
    scenario_state,
)

GRIDS = {"coarse": 6, "fine": 20}
D_SPAN = (0.0, 0.3)
P_SPAN = (0.0, 0.9)


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tol: float
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: worst {self.worst:.3g} (tol {self.tol:g}, {self.seconds:.1f}s)"


def grid_points(n):
    Ds = np.linspace(*D_SPAN, n)
    ps = np.linspace(*P_SPAN, n)
    return [(float(D), float(p)) for D in Ds for p in ps]


def attack_specs(n):
    """Attack specs for both protocols; BB84 takes the middle of its lambda4 range."""
    for protocol in Protocol:
        for D, p in grid_points(n):
            lam = None
            if protocol is Protocol.BB84:
                lo, hi = bb84_lambda4_range(D, p)
                lam = 0.5 * (lo + hi)
            yield eve_gram(protocol, D, p, lam)


def _noisy(spec):
    return NoiseConfig(Scenario.S1_ALICE_QUANTUM, spec.p)


def check_s1_s2(n):
    worst = 0.0
    for spec in attack_specs(n):
        r1 = scenario_state(spec, _noisy(spec))
        r2 = scenario_state(spec, NoiseConfig(Scenario.S2_BOB_BEFORE_EVE, spec.p))
        worst = max(worst, float(np.max(np.abs(r1.matrix - r2.matrix))))
    return worst


def check_s1_s4(n, flip=classical_flip):
    worst = 0.0
    for spec in attack_specs(n):
        c1 = scenario_ccq(spec, _noisy(spec))
        c4 = flip(measure_ccq(eve_state(spec)), spec.p)
        worst = max(worst, abs(c1.sxe() - c4.sxe()), abs(c1.hxy() - c4.hxy()))
    return worst


def check_s3(n):
    """Returns (worst S(X|E) change, largest drop of H(X|Y))."""
    worst, drop = 0.0, 0.0
    for spec in attack_specs(n):
        c0 = scenario_ccq(spec, NoiseConfig(Scenario.S0_NONE, 0.0))
        c3 = scenario_ccq(spec, NoiseConfig(Scenario.S3_BOB_AFTER_EVE, spec.p))
        worst = max(worst, abs(c0.sxe() - c3.sxe()))
        drop = max(drop, c0.hxy() - c3.hxy())
    return worst, drop


def check_depolarizing_identity(n):
    worst = 0.0
    for theta in np.linspace(0.0, math.pi, n):
        for p in np.linspace(0.0, 1.0, n):
            v = np.array([math.cos(theta / 2), math.sin(theta / 2) * np.exp(0.7j)])
            rho = DensityOperator(0.8 * np.outer(v, v.conj()) + 0.1 * I2, (2,), ("A",))
            want = (1 - p) * rho.matrix + p * I2 / 2
            worst = max(worst, float(np.max(np.abs(depolarize(rho, "A", p).matrix - want))))
    return worst


def check_bell_diagonal(n):
    worst = 0.0
    for spec in attack_specs(n):
        lam, off = bell_coefficients(reduced_ab(scenario_state(spec, _noisy(spec))))
        Q = qber_from_params(spec.D, spec.p)
        dev = max(off, abs(lam[2] + lam[3] - Q))
        if spec.protocol is Protocol.SIX_STATE:
            want = np.array([1 - 1.5 * Q, 0.5 * Q, 0.5 * Q, 0.5 * Q])
            dev = max(dev, float(np.max(np.abs(lam - want))))
        worst = max(worst, dev)
    return worst


def check_gram_factorization(n):
    worst = 0.0
    for spec in attack_specs(n):
        a = scenario_ccq(spec, _noisy(spec), "sqrt")
        b = scenario_ccq(spec, _noisy(spec), "cholesky")
        worst = max(worst, abs(a.sxe() - b.sxe()), abs(a.hxy() - b.hxy()))
    return worst


def check_bb84_oracle(n):
    worst = 0.0
    for Q in np.linspace(0.01, 0.10, max(n, 10)):
        r = asymptotic_rate(Protocol.BB84, float(Q), 0.0).rate
        worst = max(worst, abs(r - (1 - 2 * binary_entropy(float(Q)))))
    return worst


def check_engines(n):
    worst = 0.0
    for protocol in Protocol:
        for D, p in grid_points(max(2, n // 2)):
            a = asymptotic_rate(protocol, D, p, engine="kernel").rate
            b = asymptotic_rate(protocol, D, p, engine="states").rate
            worst = max(worst, abs(a - b))
    return worst


def check_finite_limit(n):
    worst = 0.0
    budget = SecurityBudget.from_fractions(1e-9, 0.4, 0.4, 0.1)
    for protocol in Protocol:
        for Q in np.linspace(0.0, 0.08, max(3, n // 2)):
            fin = finite_rate(protocol, Q=float(Q), N=1e18, m=1e12, budget=budget)
            worst = max(worst, abs(fin.rate - asymptotic_rate(protocol, float(Q), 0.0).rate))
            worst = max(worst, abs(fin.rate - fin.recomputed_rate()))
    return worst


def _perturbed_flip(ccq, p, target="X"):
    # flip probability off by 0.1 percent
    return classical_flip(ccq, min(1.0, p * 1.001), target)


def run_checks(grid="coarse", self_test=False, report=None):
    """Run the suite and return a list of CheckResult; ``report`` receives each line."""
    if grid not in GRIDS:
        raise ValueError(f"unknown grid {grid!r}; use one of {sorted(GRIDS)}")
    n = GRIDS[grid]
    flip = _perturbed_flip if self_test else classical_flip
    plan = [
        ("scenario 1 equals scenario 2 (state)", lambda: check_s1_s2(n), 1e-12),
        ("scenario 1 equals scenario 4 (entropies)", lambda: check_s1_s4(n, flip), 1e-9),
        ("scenario 3 leaves S(X|E) unchanged", lambda: check_s3(n)[0], 1e-12),
        ("scenario 3 never lowers H(X|Y)", lambda: max(0.0, check_s3(n)[1]), 0.0),
        ("depolarizing equals mixing with I/2", lambda: check_depolarizing_identity(n), 1e-12),
        ("noisy state is Bell-diagonal", lambda: check_bell_diagonal(n), 1e-10),
        ("probe factorization leaves entropies unchanged", lambda: check_gram_factorization(n), 1e-9),
        ("BB84 rate equals 1 - 2h(Q)", lambda: check_bb84_oracle(n), 1e-6),
        ("compiled and state engines agree", lambda: check_engines(n), 1e-9),
        ("finite rate tends to asymptotic rate", lambda: check_finite_limit(n), 1e-2),
    ]
    results = []
    for name, fn, tol in plan:
        t0 = time.perf_counter()
        worst = float(fn())
        res = CheckResult(name, worst <= tol, worst, tol, time.perf_counter() - t0)
        results.append(res)
        if report is not None:
            report(res.line())
    return results
