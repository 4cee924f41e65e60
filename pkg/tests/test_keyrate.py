import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkdlab.keyrate import (
    FiniteSizeParams,
    SecurityBudget,
    aep_penalty,
    asymptotic_rate,
    finite_rate,
    pa_correction,
    worst_case,
    zeta,
)
from qkdlab.linalg import binary_entropy
from qkdlab.states import Protocol, Scenario, qber_from_params

Q_GRID = [round(0.01 * k, 2) for k in range(1, 11)]


def six_state_oracle(Q):
    lam = np.array([1 - 1.5 * Q, Q / 2, Q / 2, Q / 2])
    lam = lam[lam > 0]
    return 1 + float(np.sum(lam * np.log2(lam)))


class TestBudget:
    def test_fractions_sum_to_total(self):
        b = SecurityBudget.from_fractions(1e-9, 0.3, 0.3, 0.2)
        assert abs(b.total - 1e-9) <= 1e-15
        assert b.eps_ec == pytest.approx(0.2e-9)

    def test_even_split(self):
        b = SecurityBudget.even(1e-9)
        assert b.eps_bar == b.eps_pe == b.eps_pa == b.eps_ec == 0.25e-9

    def test_floor(self):
        with pytest.raises(ValueError):
            SecurityBudget(1e-9, 1e-9, 1e-13, 1e-9)
        with pytest.raises(ValueError):
            SecurityBudget.from_fractions(1e-9, 0.5, 0.5, 0.0)
        SecurityBudget.from_fractions(1e-9, 0.499, 0.499, 0.001)

    def test_components_in_unit_interval(self):
        with pytest.raises(ValueError):
            SecurityBudget(0.0, 1e-9, 1e-9, 1e-9)

    def test_finite_size_params(self):
        assert FiniteSizeParams(N=100, m=10).n == 90
        with pytest.raises(ValueError):
            FiniteSizeParams(N=100, m=100)
        with pytest.raises(ValueError):
            FiniteSizeParams(N=100, m=10, f_ec=0.9)


class TestCorrections:
    def test_zeta(self):
        want = math.sqrt((math.log(1e9) + 2 * math.log(1001)) / 8000)
        assert zeta(1e-9, 2, 1000) == pytest.approx(want, rel=1e-14)

    def test_aep(self):
        assert aep_penalty(1e-9, 1e6) == pytest.approx(5 * math.sqrt(math.log2(2e9) / 1e6), rel=1e-14)

    def test_pa(self):
        assert pa_correction(1e-9, 1e8) == pytest.approx(2 / 1e8 * math.log2(2e-9), rel=1e-14)

    @given(st.floats(10, 1e15), st.floats(1.01, 100))
    def test_zeta_shrinks_with_m(self, m, factor):
        assert zeta(1e-9, 2, m * factor) < zeta(1e-9, 2, m)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            zeta(0.0, 2, 10)
        with pytest.raises(ValueError):
            aep_penalty(1e-9, 0.5)


class TestAsymptotic:
    @pytest.mark.parametrize("engine", ["kernel", "states"])
    @pytest.mark.parametrize("Q", Q_GRID)
    def test_bb84_closed_form(self, Q, engine):
        r = asymptotic_rate(Protocol.BB84, Q, 0.0, engine=engine)
        assert abs(r.rate - (1 - 2 * binary_entropy(Q))) <= 1e-6

    @pytest.mark.parametrize("Q", Q_GRID)
    def test_six_state_closed_form(self, Q):
        assert asymptotic_rate(Protocol.SIX_STATE, Q, 0.0).rate == pytest.approx(six_state_oracle(Q), abs=1e-12)

    def test_bb84_optimal_lambda4(self):
        r = asymptotic_rate(Protocol.BB84, 0.08, 0.0)
        assert r.argmin_lambda4 == pytest.approx(0.08**2, abs=1e-5)

    @pytest.mark.parametrize("protocol", list(Protocol))
    def test_noiseless_perfect_channel(self, protocol):
        assert asymptotic_rate(protocol, 0.0, 0.0).rate == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=12)
    @given(st.sampled_from(list(Protocol)), st.floats(0.0, 0.2), st.floats(0.0, 0.9),
           st.sampled_from([Scenario.S1_ALICE_QUANTUM, Scenario.S2_BOB_BEFORE_EVE,
                            Scenario.S3_BOB_AFTER_EVE, Scenario.S4_CLASSICAL]))
    def test_engines_agree(self, protocol, D, p, scenario):
        a = asymptotic_rate(protocol, D, p, scenario=scenario, engine="kernel")
        b = asymptotic_rate(protocol, D, p, scenario=scenario, engine="states")
        assert abs(a.sxe - b.sxe) <= 1e-9
        assert abs(a.hxy - b.hxy) <= 1e-9

    @pytest.mark.parametrize("protocol", list(Protocol))
    def test_decreasing_in_disturbance(self, protocol):
        rates = [asymptotic_rate(protocol, D, 0.0).rate for D in np.linspace(0, 0.2, 21)]
        assert all(b < a for a, b in zip(rates, rates[1:]))

    @given(st.sampled_from(list(Protocol)), st.floats(0.0, 0.2), st.floats(0.0, 0.9))
    def test_noise_after_eve_never_helps(self, protocol, D, p):
        clean = asymptotic_rate(protocol, D, 0.0)
        late = asymptotic_rate(protocol, D, p, scenario=Scenario.S3_BOB_AFTER_EVE)
        # both sides are minimized over Eve's free parameter, so agree to the search tolerance
        assert late.sxe == pytest.approx(clean.sxe, abs=1e-9)
        assert late.rate <= clean.rate + 1e-9

    @given(st.sampled_from(list(Protocol)), st.floats(0.0, 0.2), st.floats(0.0, 0.9))
    def test_scenarios_one_two_four_agree(self, protocol, D, p):
        r = [asymptotic_rate(protocol, D, p, scenario=s).rate for s in (1, 2, 4)]
        assert max(r) - min(r) <= 1e-12

    def test_s0_rejects_noise(self):
        with pytest.raises(ValueError):
            asymptotic_rate(Protocol.BB84, 0.05, 0.1, scenario=Scenario.S0_NONE)

    def test_noise_raises_threshold_rate(self):
        D = 0.115
        assert asymptotic_rate(Protocol.BB84, D, 0.0).rate < 0
        assert asymptotic_rate(Protocol.BB84, D, 0.9).rate > 0

    def test_breakdown_recomputes(self):
        r = asymptotic_rate(Protocol.SIX_STATE, 0.07, 0.1)
        assert r.recomputed_rate() == pytest.approx(r.rate, abs=1e-12)
        assert r.Q == pytest.approx(qber_from_params(0.07, 0.1))


class TestFinite:
    budget = SecurityBudget.from_fractions(1e-9, 0.4, 0.4, 0.1)

    def test_needs_exactly_one_of_d_and_q(self):
        with pytest.raises(ValueError):
            finite_rate(Protocol.BB84, D=0.1, Q=0.1, N=1e8, m=1e6, budget=self.budget)
        with pytest.raises(ValueError):
            finite_rate(Protocol.BB84, N=1e8, m=1e6, budget=self.budget)

    @given(st.sampled_from(list(Protocol)), st.floats(0.0, 0.12), st.floats(0.0, 0.5),
           st.floats(4, 16), st.floats(0.001, 0.5))
    def test_fields_and_bounds(self, protocol, Q, p, logN, mfrac):
        N = 10.0**logN
        m = max(1.0, round(mfrac * N))
        Q = max(Q, p / 2)
        r = finite_rate(protocol, Q=Q, p=p, N=N, m=m, budget=self.budget)
        assert abs(r.recomputed_rate() - r.rate) <= 1e-12
        assert Q - r.zeta - 1e-15 <= r.worst_Q <= Q + r.zeta + 1e-15
        # finite corrections only ever cost key
        D_worst = max(0.0, (r.worst_Q - p / 2) / (1 - p))
        asym = asymptotic_rate(protocol, min(D_worst, 0.5), p)
        assert r.rate <= asym.sxe - asym.hxy + 1e-12

    @pytest.mark.parametrize("protocol", list(Protocol))
    def test_converges_to_asymptotic(self, protocol):
        for Q in (0.0, 0.03, 0.07):
            fin = finite_rate(protocol, Q=Q, N=1e18, m=1e12, budget=self.budget)
            assert abs(fin.rate - asymptotic_rate(protocol, Q, 0.0).rate) <= 1e-2

    def test_observed_leak_is_optimistic(self):
        kw = dict(Q=0.05, N=1e6, m=1e5, budget=self.budget)
        worst = finite_rate(Protocol.BB84, leak="worst", **kw)
        observed = finite_rate(Protocol.BB84, leak="observed", **kw)
        assert observed.hxy == pytest.approx(binary_entropy(0.05))
        assert observed.rate >= worst.rate

    def test_worst_case_at_upper_end(self):
        obj, q, s, h, lam = worst_case(Protocol.BB84, Scenario.S1_ALICE_QUANTUM, 0.05, 0.0, 0.01)
        assert q == pytest.approx(0.06)
        assert obj == pytest.approx(1 - 2 * binary_entropy(0.06), abs=1e-6)

    def test_rate_grows_with_n(self):
        rates = [finite_rate(Protocol.SIX_STATE, Q=0.05, N=N, m=N / 20, budget=self.budget).rate
                 for N in (1e5, 1e6, 1e7, 1e8, 1e10)]
        assert all(b > a for a, b in zip(rates, rates[1:]))

    def test_sifting(self):
        full = finite_rate(Protocol.BB84, Q=0.02, N=1e8, m=1e6, budget=self.budget)
        half = finite_rate(Protocol.BB84, Q=0.02, N=1e8, m=1e6, budget=self.budget, sifting=0.5)
        assert half.n == pytest.approx(0.5 * full.n)
        assert half.rate < full.rate
