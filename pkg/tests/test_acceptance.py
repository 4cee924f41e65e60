"""Reference numbers the library must reproduce, with their tolerances.

Each test records a PASS/FAIL row; the summary at the end of the run prints
one line per criterion. Rows labelled ``info`` are diagnostics and never fail.
"""

import time

import pytest

from qkdlab import Protocol
from qkdlab.checks import run_checks
from qkdlab.optimizer import (
    disturbance_threshold,
    find_N0,
    noise_onset,
    optimal_noise,
    optimize_rate,
)

EPS = 1e-9
BB84, SIX = Protocol.BB84, Protocol.SIX_STATE


def within(value, target, tol):
    return abs(value - target) <= tol


@pytest.mark.parametrize("protocol, target", [(BB84, 0.110), (SIX, 0.126)])
def test_threshold_without_noise(acceptance, protocol, target):
    t0 = time.perf_counter()
    d = disturbance_threshold(protocol)
    secs = time.perf_counter() - t0
    ok = within(d, target, 1e-3) and secs < 10
    acceptance(1, protocol.value, ok, f"D = {d:.5f} (want {target} +- 0.001), {secs:.2f}s")
    assert within(d, target, 1e-3)
    assert secs < 10


@pytest.mark.parametrize("protocol, target", [(BB84, 0.124), (SIX, 0.141)])
def test_threshold_with_optimal_noise(acceptance, protocol, target):
    t0 = time.perf_counter()
    d = disturbance_threshold(protocol, with_optimal_noise=True)
    secs = time.perf_counter() - t0
    ok = within(d, target, 2e-3) and secs < 60
    acceptance(2, protocol.value, ok, f"D = {d:.5f} (want {target} +- 0.002), {secs:.2f}s")
    assert within(d, target, 2e-3)
    assert secs < 60


@pytest.mark.parametrize("protocol, target", [(BB84, 0.083), (SIX, 0.096)])
def test_asymptotic_noise_onset(acceptance, protocol, target):
    d = noise_onset(protocol, "asymptotic", 1e-3, (0.02, 0.13), 1e-4)
    ok = within(d, target, 3e-3)
    acceptance(3, protocol.value, ok, f"D = {d:.4f} (want {target} +- 0.003)")
    # with p* read off a 0.01-step grid the onset is where p* first reaches 0.01
    coarse = noise_onset(protocol, "asymptotic", 1e-2, (0.02, 0.13), 1e-4)
    acceptance(3, f"info {protocol.value}, p* > 0.01", True, f"D = {coarse:.4f}")
    assert ok


_RATE_CASES = [(BB84, 0.0, 0.34), (SIX, 0.0, 0.37), (BB84, 0.05, 0.46), (SIX, 0.05, 0.47)]
_rate_seconds = []


@pytest.mark.parametrize("protocol, p, target", _RATE_CASES)
def test_finite_rate_points(acceptance, protocol, p, target):
    t0 = time.perf_counter()
    r = optimize_rate(protocol, Q=0.05, p=p, N=1e8, eps_total=EPS)
    _rate_seconds.append(time.perf_counter() - t0)
    ok = within(r.rate, target, 0.03)
    acceptance(4, f"{protocol.value} p={p}", ok,
               f"r = {r.rate:.4f} (want {target} +- 0.03), m = {r.m:.4g}, {_rate_seconds[-1]:.2f}s")
    assert ok


def test_finite_rate_points_runtime(acceptance):
    t0 = time.perf_counter()
    for protocol, p, _ in _RATE_CASES:
        optimize_rate(protocol, Q=0.05, p=p, N=1e8, eps_total=EPS)
    secs = time.perf_counter() - t0
    acceptance(4, "runtime", secs < 120, f"{secs:.2f}s for all four points (want < 120s)")
    assert secs < 120


@pytest.mark.parametrize("protocol, D, N, target, tol", [
    (BB84, 0.10, 1e8, 0.39, 0.10),
    (SIX, 0.12, 1e8, 1.53, 0.25),
    (BB84, 0.10, 1e16, 0.20, 0.10),
    (SIX, 0.12, 1e16, 0.50, 0.15),
])
def test_relative_noise_benefit(acceptance, protocol, D, N, target, tol):
    p_star = optimal_noise(protocol, D, "maximize_rate_at_N", EPS, N=N)
    base = optimize_rate(protocol, D=D, p=0.0, N=N, eps_total=EPS).rate
    noisy = optimize_rate(protocol, D=D, p=p_star, N=N, eps_total=EPS).rate
    gain = noisy / base - 1.0
    ok = within(gain, target, tol)
    acceptance(5, f"{protocol.value} D={D} N={N:.0e}", ok,
               f"gain = {100 * gain:.1f}% at p* = {p_star:.4f} (want {100 * target:.0f} +- {100 * tol:.0f} pp)")
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("protocol, target", [(BB84, 0.06), (SIX, 0.08)])
def test_finite_noise_onset(acceptance, protocol, target):
    d = noise_onset(protocol, "minimize_N0", 1e-3, (0.03, 0.11), 2e-3, EPS)
    ok = within(d, target, 0.01)
    acceptance(6, protocol.value, ok, f"D = {d:.4f} (want {target} +- 0.01)")
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("protocol, D", [(BB84, 0.10), (SIX, 0.12)])
def test_n0_improvement(acceptance, protocol, D):
    plain = find_N0(protocol, D, 0.0, EPS)
    p_star = optimal_noise(protocol, D, "minimize_N0", EPS)
    noisy = find_N0(protocol, D, p_star, EPS)
    gain = plain.N0 - noisy.N0
    ok = gain >= 1e5
    acceptance(7, f"{protocol.value} D={D}", ok,
               f"N0 {plain.N0:.6g} -> {noisy.N0:.6g} at p* = {p_star:.4f}, drop {gain:.4g} (want >= 1e5)")
    assert ok


@pytest.mark.slow
def test_property_suite(acceptance):
    t0 = time.perf_counter()
    results = run_checks("fine")
    secs = time.perf_counter() - t0
    for res in results:
        acceptance(8, res.name, res.passed, f"worst {res.worst:.3g} (tol {res.tol:g})")
    acceptance(8, "runtime", secs < 300, f"{secs:.1f}s (want < 300s)")
    assert all(r.passed for r in results)
    assert secs < 300
