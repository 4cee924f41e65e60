"""Outer optimization of the finite key rate.

Alice and Bob maximize the rate over the number of estimation samples m
and the split of the total security parameter; Eve's parameters and the
statistical worst case are minimized inside ``keyrate.finite_rate``.  On
top of that sit the searches for N0 (the smallest N with a positive
optimized rate), for the best noise parameter and for the disturbance at
which the asymptotic rate vanishes.

Every search is a deterministic grid followed by golden-section or
bisection refinement.  Ties go to the smaller m and then to the
lexicographically smaller budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernel
from .keyrate import (
    BUDGET_FLOOR,
    RateBreakdown,
    SecurityBudget,
    aep_penalty,
    asymptotic_rate,
    assemble_rate,
    finite_rate,
    pa_correction,
    zeta,
)
from .search import bisect_root, golden_min, grid_then_golden
from .states import P_MAX, InfeasibleAttackError, Protocol, Scenario, disturbance_from_qber, qber_from_params

DEFAULT_FRACTIONS = tuple(float(x) for x in np.geomspace(BUDGET_FLOOR, 0.499, 5))


def fraction_tuples(values=DEFAULT_FRACTIONS):
    """All (f_bar, f_PE, f_PA) from ``values`` that leave at least the floor for EC."""
    out = []
    for fb in values:
        for fpe in values:
            for fpa in values:
                if 1.0 - fb - fpe - fpa >= BUDGET_FLOOR * (1.0 - 1e-9):
                    out.append((fb, fpe, fpa))
    return tuple(sorted(out))


@dataclass(frozen=True)
class OptimizationConfig:
    budget_grid: tuple = field(default_factory=fraction_tuples)
    m_points: int = 30
    m_min: float = 10.0
    refine: bool = True
    param_tol: float = 1e-4
    N_bounds: tuple = (1e3, 1e18)
    n0_resolution: float = 0.05
    p_step: float = 0.01
    p_max: float = 0.5
    p_tol: float = 1e-4
    threshold_p_max: float = 0.99
    threshold_tol: float = 1e-4
    f_ec: float = 1.0
    n_p: int = 2
    leak: str = "worst"
    scan_points: int = _kernel.SCAN_POINTS
    scenario: Scenario = Scenario.S1_ALICE_QUANTUM

    def __post_init__(self):
        if not self.budget_grid:
            raise ValueError("budget grid is empty")
        if self.m_points < 2:
            raise ValueError("need at least two m grid points")
        for t in self.budget_grid:
            if len(t) != 3 or min(t) < BUDGET_FLOOR * (1.0 - 1e-9):
                raise ValueError(f"bad budget fraction tuple {t!r}")


DEFAULT_CONFIG = OptimizationConfig()


class NoKeyError(ValueError):
    pass


class _RateProblem:
    """Finite rate at fixed (protocol, Q, p, N) as a function of m and the budget."""

    def __init__(self, protocol, Q, p, N, eps_total, config: OptimizationConfig):
        self.protocol = Protocol.parse(protocol)
        self.code = _kernel.BB84 if self.protocol is Protocol.BB84 else _kernel.SIX_STATE
        self.Q, self.p, self.N = Q, p, float(N)
        self.eps = eps_total
        self.cfg = config
        self._worst: dict[float, tuple] = {}
        self._budgets: dict[tuple, SecurityBudget] = {}

    def worst(self, z):
        hit = self._worst.get(z)
        if hit is None:
            c = self.cfg
            hit = _kernel.worst_case(self.code, int(c.scenario), self.Q, self.p, z, c.f_ec,
                                     c.leak == "observed", c.scan_points)
            self._worst[z] = hit
        return hit

    def budget(self, fracs) -> SecurityBudget:
        b = self._budgets.get(fracs)
        if b is None:
            b = SecurityBudget.from_fractions(self.eps, *fracs)
            self._budgets[fracs] = b
        return b

    def rate(self, m, budget: SecurityBudget) -> float:
        n = self.N - m
        z = zeta(budget.eps_pe, self.cfg.n_p, m)
        _, _, s, h, _ = self.worst(z)
        return assemble_rate(n / self.N, s, h, aep_penalty(budget.eps_bar, n), self.cfg.f_ec,
                             pa_correction(budget.eps_pa, self.N))

    def best_budget(self, m):
        # same arithmetic as rate(), with each term computed once per distinct value
        n = self.N - m
        key_fraction = n / self.N
        f_ec = self.cfg.f_ec
        by_pe, by_bar, by_pa = {}, {}, {}
        best_r, best_f = -math.inf, None
        for fracs in self.cfg.budget_grid:
            b = self.budget(fracs)
            sh = by_pe.get(b.eps_pe)
            if sh is None:
                sh = by_pe[b.eps_pe] = self.worst(zeta(b.eps_pe, self.cfg.n_p, m))[2:4]
            aep = by_bar.get(b.eps_bar)
            if aep is None:
                aep = by_bar[b.eps_bar] = aep_penalty(b.eps_bar, n)
            pa = by_pa.get(b.eps_pa)
            if pa is None:
                pa = by_pa[b.eps_pa] = pa_correction(b.eps_pa, self.N)
            r = assemble_rate(key_fraction, sh[0], sh[1], aep, f_ec, pa)
            if r > best_r:
                best_r, best_f = r, fracs
        return best_r, best_f

    def m_grid(self):
        hi = self.N / 2.0
        lo = min(self.cfg.m_min, hi)
        ms = np.unique(np.round(np.geomspace(lo, hi, self.cfg.m_points)))
        return [float(m) for m in ms if 1 <= m <= self.N - 1]


def _search(problem: _RateProblem, seeds=(), stop_above=None):
    """Returns (rate, m, budget) of the best candidate found."""
    cfg = problem.cfg
    best = (-math.inf, None, None)
    ms = problem.m_grid()
    if not ms:
        raise ValueError(f"N = {problem.N} leaves no room for parameter estimation")
    scores = []
    for m in ms:
        r, fracs = problem.best_budget(m)
        scores.append(r)
        if r > best[0]:
            best = (r, m, problem.budget(fracs))
        if stop_above is not None and best[0] > stop_above:
            return best
    for m, b in seeds:
        r = problem.rate(float(m), b)
        if r > best[0]:
            best = (r, float(m), b)
    if not cfg.refine:
        return best

    i = ms.index(best[1]) if best[1] in ms else int(np.argmax(scores))
    lo_m, hi_m = ms[max(i - 1, 0)], ms[min(i + 1, len(ms) - 1)]
    if hi_m > lo_m:
        def neg(logm):
            m = float(np.clip(np.round(math.exp(logm)), 1, problem.N - 1))
            return -problem.best_budget(m)[0]

        logm, _ = golden_min(neg, math.log(lo_m), math.log(hi_m), cfg.param_tol)
        m = float(np.clip(np.round(math.exp(logm)), 1, problem.N - 1))
        r, fracs = problem.best_budget(m)
        if r > best[0]:
            best = (r, m, problem.budget(fracs))
        if stop_above is not None and best[0] > stop_above:
            return best

    return _polish_budget(problem, best)


def _polish_budget(problem: _RateProblem, best):
    """Coordinate golden search on the log budget fractions at the best m."""
    r0, m, b = best
    f = [b.eps_bar / problem.eps, b.eps_pe / problem.eps, b.eps_pa / problem.eps]
    floor = BUDGET_FLOOR
    for _ in range(2):
        for k in range(3):
            others = sum(f) - f[k]
            top = 1.0 - others - floor
            if top <= floor * (1.0 + 1e-9):
                continue

            def neg(logf, k=k):
                g = list(f)
                g[k] = math.exp(logf)
                try:
                    bud = SecurityBudget.from_fractions(problem.eps, *g)
                except ValueError:
                    return math.inf
                return -problem.rate(m, bud)

            logf, v = golden_min(neg, math.log(floor), math.log(top), problem.cfg.param_tol)
            if -v > r0:
                f[k] = math.exp(logf)
                r0 = -v
    if r0 > best[0]:
        return r0, m, SecurityBudget.from_fractions(problem.eps, *f)
    return best


def _resolve_q(D, Q, p):
    if (D is None) == (Q is None):
        raise ValueError("give exactly one of D (disturbance) or Q (observed QBER)")
    p = min(float(p), P_MAX)
    if Q is None:
        return float(D), qber_from_params(D, p), p
    return disturbance_from_qber(Q, p), float(Q), p


def optimize_rate(protocol, *, D=None, Q=None, p=0.0, N, eps_total=1e-9,
                  config: OptimizationConfig = DEFAULT_CONFIG, seeds=()) -> RateBreakdown:
    """Maximize the finite key rate over m and the security budget.

    ``seeds`` are extra (m, SecurityBudget) candidates; the optimizer never
    reports less than the best of them.
    """
    D, Q, p = _resolve_q(D, Q, p)
    problem = _RateProblem(protocol, Q, p, N, eps_total, config)
    _, m, budget = _search(problem, seeds)
    return finite_rate(problem.protocol, Q=Q, p=p, N=N, m=m, budget=budget, scenario=config.scenario,
                       f_ec=config.f_ec, n_p=config.n_p, leak=config.leak, scan_points=config.scan_points)


def _positive(protocol, Q, p, N, eps_total, config) -> bool:
    problem = _RateProblem(protocol, Q, p, N, eps_total, config)
    return _search(problem, stop_above=0.0)[0] > 0.0


@dataclass
class N0Result:
    """``N0`` is the bisection's upper bracket end, so its optimized rate is positive.

    ``estimate`` interpolates the zero of the rate inside the final bracket;
    it varies smoothly with the inputs and is what the noise search compares.
    """

    N0: float
    optimal_p: float
    witness: RateBreakdown
    below: float = math.nan
    estimate: float = math.nan


def find_N0(protocol, D: float, p: float = 0.0, eps_total=1e-9,
            config: OptimizationConfig = DEFAULT_CONFIG) -> N0Result:
    """Smallest N (to ``n0_resolution`` relative) with a positive optimized rate."""
    protocol = Protocol.parse(protocol)
    D, Q, p = _resolve_q(D, None, p)
    asym = asymptotic_rate(protocol, D, p, scenario=config.scenario, f_ec=config.f_ec)
    if asym.rate <= 0.0:
        raise NoKeyError(f"no positive rate asymptotically (r = {asym.rate:.3g})")
    lo, hi = config.N_bounds
    pos = lambda N: _positive(protocol, Q, p, N, eps_total, config)
    if pos(lo):
        hi = lo
        lo = math.nan
    elif not pos(hi):
        raise NoKeyError(f"no positive rate below N = {hi:.3g}")
    else:
        step = math.log1p(config.n0_resolution)
        log_lo, log_hi = bisect_root(lambda x: 0.0 if pos(math.exp(x)) else 1.0,
                                     math.log(lo), math.log(hi), step)
        lo, hi = math.exp(log_lo), math.ceil(math.exp(log_hi))
    witness = optimize_rate(protocol, D=D, p=p, N=hi, eps_total=eps_total, config=config)
    estimate = float(hi)
    if not math.isnan(lo):
        # zero of the optimized rate, linear in log N across the final bracket
        r_lo = optimize_rate(protocol, D=D, p=p, N=lo, eps_total=eps_total, config=config).rate
        r_hi = witness.rate
        if r_hi > r_lo:
            t = min(1.0, max(0.0, -r_lo / (r_hi - r_lo)))
            estimate = math.exp(math.log(lo) + t * (math.log(hi) - math.log(lo)))
    return N0Result(N0=float(hi), optimal_p=p, witness=witness, below=lo, estimate=estimate)


_MODES = ("asymptotic", "minimize_N0", "maximize_rate_at_N")


def noise_objective(protocol, D, mode, eps_total=1e-9, config=DEFAULT_CONFIG, N=None):
    """Score to maximize over p for the given mode."""
    protocol = Protocol.parse(protocol)
    if mode == "asymptotic":
        return lambda p: asymptotic_rate(protocol, D, p, scenario=config.scenario, f_ec=config.f_ec).rate
    if mode == "minimize_N0":
        def score(p):
            try:
                return -math.log(find_N0(protocol, D, p, eps_total, config).estimate)
            except NoKeyError:
                return -math.inf
        return score
    if mode == "maximize_rate_at_N":
        if N is None:
            raise ValueError("mode maximize_rate_at_N needs N")
        return lambda p: optimize_rate(protocol, D=D, p=p, N=N, eps_total=eps_total, config=config).rate
    raise ValueError(f"unknown mode {mode!r}; use one of {_MODES}")


def optimal_noise(protocol, D: float, mode: str = "asymptotic", eps_total=1e-9,
                  config: OptimizationConfig = DEFAULT_CONFIG, N=None, p_max=None) -> float:
    return optimal_noise_detail(protocol, D, mode, eps_total, config, N, p_max)[0]


def optimal_noise_detail(protocol, D, mode="asymptotic", eps_total=1e-9, config=DEFAULT_CONFIG, N=None, p_max=None):
    """(p*, objective at p*) from a grid of step ``p_step`` plus golden refinement."""
    if not 0.0 <= D < 0.5:
        raise ValueError(f"disturbance must lie in [0, 0.5), got {D!r}")
    f = noise_objective(protocol, D, mode, eps_total, config, N)
    top = min(config.p_max if p_max is None else p_max, P_MAX)
    n_grid = int(round(top / config.p_step)) + 1
    memo = {}

    def cached(p):
        if p not in memo:
            memo[p] = f(p)
        return memo[p]

    p_star, val = grid_then_golden(cached, 0.0, top, n_grid, config.p_tol, maximize=True)
    return float(p_star), float(val)


def disturbance_threshold(protocol, with_optimal_noise: bool = False,
                          config: OptimizationConfig = DEFAULT_CONFIG) -> float:
    """D at which the asymptotic rate (optionally maximized over noise) reaches zero."""
    protocol = Protocol.parse(protocol)
    if with_optimal_noise:
        f = lambda D: optimal_noise_detail(protocol, D, "asymptotic", config=config,
                                           p_max=config.threshold_p_max)[1]
    else:
        f = lambda D: asymptotic_rate(protocol, D, 0.0, f_ec=config.f_ec).rate
    lo, hi = bisect_root(f, 0.0, 0.5, config.threshold_tol)
    return 0.5 * (lo + hi)


def noise_onset(protocol, mode: str = "asymptotic", threshold: float = 1e-3, D_range=(0.02, 0.11),
                tol: float = 1e-3, eps_total=1e-9, config: OptimizationConfig = DEFAULT_CONFIG) -> float:
    """Smallest D at which the optimal noise parameter exceeds ``threshold``.

    Bisection assumes the optimal noise grows with D across ``D_range``.
    """
    below = lambda D: optimal_noise(protocol, D, mode, eps_total, config) <= threshold
    lo, hi = D_range
    if not below(lo):
        return lo
    if below(hi):
        return math.nan
    lo, hi = bisect_root(lambda D: 1.0 if below(D) else 0.0, lo, hi, tol)
    return 0.5 * (lo + hi)


SWEEP_KINDS = ("n0_vs_d", "p_vs_d", "r_vs_n", "r_vs_n_channel")


@dataclass(frozen=True)
class SweepParams:
    """Grid for ``sweep``.

    n0_vs_d and p_vs_d run over ``D_values``; r_vs_n fixes ``D`` and
    r_vs_n_channel fixes the observed ``Q``, both running over ``N_values``.
    """

    protocols: tuple = (Protocol.BB84,)
    D_values: tuple = ()
    N_values: tuple = ()
    p_values: tuple = (0.0,)
    D: float | None = None
    Q: float | None = None
    optimize_noise: bool = False
    eps_total: float = 1e-9
    config: OptimizationConfig = DEFAULT_CONFIG


def _placeholder(protocol, D, p, Q, status, N=math.nan, scenario=1):
    nan = math.nan
    return RateBreakdown(protocol=Protocol.parse(protocol).value, scenario=int(scenario), D=D, p=p, Q=Q,
                         sxe=nan, hxy=nan, rate=nan, N=N, m=nan, n=nan, zeta=nan, aep_penalty=nan,
                         pa_correction=nan, status=status)


def _n0_row(protocol, D, p, eps, cfg, label):
    try:
        res = find_N0(protocol, D, p, eps, cfg)
    except NoKeyError:
        return _placeholder(protocol, D, p, qber_from_params(D, p), "no-key", scenario=cfg.scenario)
    extra = {"N0": res.N0, "N0_estimate": res.estimate, "N0_below": res.below, "noise": label}
    return replace(res.witness, extra=extra)


def _task(kind, protocol, x, variant, params: SweepParams):
    cfg, eps = params.config, params.eps_total
    protocol = Protocol.parse(protocol)
    if kind == "n0_vs_d":
        p = 0.0
        if variant == "optimal":
            p = optimal_noise(protocol, x, "minimize_N0", eps, cfg)
        return _n0_row(protocol, x, p, eps, cfg, variant)
    if kind == "p_vs_d":
        if variant == "asymptotic":
            p = optimal_noise(protocol, x, "asymptotic", eps, cfg)
            r = asymptotic_rate(protocol, x, p, scenario=cfg.scenario, f_ec=cfg.f_ec)
            return replace(r, extra={"noise": variant})
        p = optimal_noise(protocol, x, "minimize_N0", eps, cfg)
        return _n0_row(protocol, x, p, eps, cfg, variant)
    if kind == "r_vs_n":
        p = 0.0
        if variant == "optimal":
            p = optimal_noise(protocol, params.D, "maximize_rate_at_N", eps, cfg, N=x)
        r = optimize_rate(protocol, D=params.D, p=p, N=x, eps_total=eps, config=cfg)
        return replace(r, extra={"noise": variant})
    if kind == "r_vs_n_channel":
        r = optimize_rate(protocol, Q=params.Q, p=variant, N=x, eps_total=eps, config=cfg)
        return r
    raise ValueError(f"unknown sweep kind {kind!r}; use one of {SWEEP_KINDS}")


def _run_task(task):
    kind, protocol, x, variant, params = task
    try:
        return _task(kind, protocol, x, variant, params)
    except InfeasibleAttackError:
        D = x if kind in ("n0_vs_d", "p_vs_d") else params.D
        return _placeholder(protocol, D if D is not None else math.nan,
                            variant if isinstance(variant, float) else math.nan,
                            params.Q if params.Q is not None else math.nan, "infeasible")


def sweep_tasks(kind: str, params: SweepParams):
    kind = kind.replace("-", "_")
    if kind not in SWEEP_KINDS:
        raise ValueError(f"unknown sweep kind {kind!r}; use one of {SWEEP_KINDS}")
    if kind in ("n0_vs_d", "r_vs_n"):
        variants = ("none", "optimal") if params.optimize_noise else ("none",)
    elif kind == "p_vs_d":
        variants = ("asymptotic", "finite")
    else:
        variants = tuple(float(p) for p in params.p_values)
    if kind == "r_vs_n" and params.D is None:
        raise ValueError("r_vs_n needs a disturbance D")
    if kind == "r_vs_n_channel" and params.Q is None:
        raise ValueError("r_vs_n_channel needs an observed QBER Q")
    xs = params.D_values if kind in ("n0_vs_d", "p_vs_d") else params.N_values
    return [(kind, Protocol.parse(pr), float(x), v, params)
            for pr in params.protocols for x in xs for v in variants]


def sweep(kind: str, params: SweepParams, workers: int = 1) -> list[RateBreakdown]:
    """One row per (protocol, grid point, variant), in that nesting order.

    With ``workers > 1`` the points run in a process pool; rows still come
    back in grid order.
    """
    tasks = sweep_tasks(kind, params)
    if workers > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_task, tasks))
    return [_run_task(t) for t in tasks]
