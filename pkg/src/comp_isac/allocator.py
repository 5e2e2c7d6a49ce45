"""Sum-rate maximizing power allocation under sensing and rate floors.

The joint problem maximizes the sum of user rates log2(1 + SINR_i) over
per-BS transmit powers, subject to a total power budget, per-user rate
floors, and per-target detection-probability floors. Both floor families
reduce to linear rows in P: the rate floor is an exact SINR bijection
and the detection floor inverts the closed-form Marcum-Q expression to a
sensing-SNR threshold.

The nonconvex objective is handled with the logarithmic surrogate

    -ln x = max_{t > 0} (-t x + ln t + 1),

which splits each rate into a concave part plus a linear-in-P majorizer
gap. For fixed t the subproblem is concave with linear constraints and
is solved by an in-house logarithmic-barrier interior-point method;
maximizing over t has the closed form t_i = 1/x_i. Alternating the two
steps ascends the true sum rate monotonically. A small multi-start set
(equal power plus random interior points) hedges the nonconvexity.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .detection import detection_threshold, pod_closed_form
from .errors import (
    DomainError,
    InfeasibleError,
    SamplingExhaustedError,
    SolverError,
)
from .specfun import inv_marcum_q_a, marcum_q

__all__ = [
    "LinearConstraintSet",
    "SurrogateState",
    "AllocationResult",
    "FeasibilityReport",
    "SubproblemResult",
    "user_rate",
    "sum_rate",
    "rate_to_sinr_threshold",
    "pod_to_snr_threshold",
    "t_update",
    "surrogate_objective",
    "build_constraints",
    "feasibility_check",
    "solve_subproblem",
    "optimize_ppa",
    "epa",
    "rpa",
]

_LN2 = math.log(2.0)

# Barrier schedule: geometric factor-10 reduction over these endpoints.
_MU_START = 1.0
_MU_FINAL = 1e-9
_NEWTON_CAP = 500
_FEAS_TOL = -1e-9
_RPA_CAP = 100_000


@dataclass
class LinearConstraintSet:
    """Rows a_j . P >= b_j plus the implicit positivity rows P >= 0.

    Row order is fixed: the budget row first, then one SINR row per
    user, then one sensing row per target. ``families`` labels each
    stored row; positivity rows are appended virtually by slack queries.
    """

    a: np.ndarray
    b: np.ndarray
    families: tuple
    budget: float

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.a.ndim != 2 or self.b.shape != (self.a.shape[0],):
            raise DomainError("constraint rows and offsets must align")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise DomainError("constraint coefficients must be finite")
        if len(self.families) != self.a.shape[0]:
            raise DomainError("one family label per row is required")

    @property
    def L(self):
        return self.a.shape[1]

    def row_slacks(self, P):
        """Slacks of the stored rows only."""
        return self.a @ np.asarray(P, dtype=float) - self.b

    def full_slacks(self, P):
        """Stored-row slacks with the positivity slacks P appended."""
        P = np.asarray(P, dtype=float)
        return np.concatenate([self.row_slacks(P), P])

    def full_families(self):
        return tuple(self.families) + ("positivity",) * self.L

    def full_matrix(self):
        """Row matrix and offsets including positivity, for geometry work."""
        return (
            np.vstack([self.a, np.eye(self.L)]),
            np.concatenate([self.b, np.zeros(self.L)]),
        )


@dataclass
class SurrogateState:
    """Auxiliary multipliers of the logarithmic surrogate, one per user."""

    t: np.ndarray

    def __post_init__(self):
        self.t = np.atleast_1d(np.asarray(self.t, dtype=float))
        if np.any(self.t <= 0) or not np.all(np.isfinite(self.t)):
            raise DomainError("surrogate multipliers must be positive and finite")


@dataclass
class FeasibilityReport:
    """Outcome of a feasibility query.

    Without a candidate point the region's existence is decided by a
    max-min-slack barrier solve; ``center`` then holds the maximizer.
    """

    feasible: bool
    min_slack: float
    slacks: np.ndarray
    families: tuple
    worst_family: str
    center: np.ndarray = None


@dataclass
class AllocationResult:
    """Powers, rates, detection probabilities and solve diagnostics."""

    P: np.ndarray
    per_user_rate: np.ndarray
    sum_rate: float
    per_target_pod: np.ndarray
    feasible: bool
    outer_iterations: int
    objective_trace: list
    kkt_residual: float
    scheme: str = ""

    def __post_init__(self):
        self.P = np.atleast_1d(np.asarray(self.P, dtype=float))
        self.per_user_rate = np.atleast_1d(np.asarray(self.per_user_rate, dtype=float))
        self.per_target_pod = np.atleast_1d(np.asarray(self.per_target_pod, dtype=float))
        if abs(self.sum_rate - float(np.sum(self.per_user_rate))) > 1e-9:
            raise DomainError("sum_rate must equal the per-user rate total")


class SubproblemResult(tuple):
    """(P, kkt_residual, newton_steps) with named access."""

    __slots__ = ()

    def __new__(cls, P, kkt_residual, newton_steps):
        return super().__new__(cls, (P, kkt_residual, newton_steps))

    P = property(lambda self: self[0])
    kkt_residual = property(lambda self: self[1])
    newton_steps = property(lambda self: self[2])


def user_rate(P, realization, i):
    """Rate of user i: log2(1 + P_i rho_ii / (cross interference + noise))."""
    P = np.asarray(P, dtype=float)
    rho = realization.rho
    interference = float(rho[:, i] @ P - rho[i, i] * P[i])
    sinr = P[i] * rho[i, i] / (interference + realization.sigma_c2[i])
    return math.log2(1.0 + sinr)


def sum_rate(P, realization):
    """Sum of all user rates for one power vector."""
    return sum(user_rate(P, realization, i) for i in range(realization.L))


def rate_to_sinr_threshold(rate_th):
    """SINR floor equivalent to a rate floor: 2^R - 1 (exact bijection)."""
    rate_th = float(rate_th)
    if rate_th < 0:
        raise DomainError(f"rate threshold must be >= 0, got {rate_th}")
    return 2.0 ** rate_th - 1.0


def pod_to_snr_threshold(xi, L, delta, N):
    """Sensing-SNR floor equivalent to a detection-probability floor.

    The closed-form PoD is Q_L(sqrt(2 N snr), sqrt(2 delta)) with
    snr = sum_l P_l g_l / sigma_s2, monotone increasing in snr. Targets
    at or below the zero-power floor need no power at all; otherwise the
    Marcum-Q inverse gives a* and the floor snr is a*^2 / (2N).
    """
    xi = float(xi)
    if not 0.0 < xi < 1.0:
        raise DomainError(f"pod threshold must lie in (0, 1), got {xi}")
    b = math.sqrt(2.0 * float(delta))
    if xi <= marcum_q(L, 0.0, b):
        return 0.0
    a_star = inv_marcum_q_a(L, b, xi)
    return a_star * a_star / (2.0 * N)


def t_update(P, realization, i=None):
    """Closed-form maximizer of the surrogate over t.

    g(t) = -t x + ln t + 1 is maximized if and only if t = 1/x, where
    x_i is user i's interference-plus-noise power. With i omitted the
    whole vector is returned.
    """
    P = np.asarray(P, dtype=float)
    rho = realization.rho
    denom = rho.T @ P - np.diag(rho) * P + realization.sigma_c2
    if i is not None:
        return 1.0 / float(denom[i])
    return 1.0 / denom


def surrogate_objective(P, t, realization):
    """Surrogate sum rate at fixed multipliers t.

    sum_i [ log2(total received power_i) + (-t_i x_i + ln t_i + 1)/ln 2 ]
    with x_i the interference-plus-noise power. Concave in P for fixed
    t, tight (equal to the true sum rate) exactly at t = t_update(P).
    """
    P = np.asarray(P, dtype=float)
    t = np.asarray(getattr(t, "t", t), dtype=float)
    rho = realization.rho
    total = rho.T @ P + realization.sigma_c2
    x = total - np.diag(rho) * P
    return float(np.sum(np.log2(total)) + np.sum(-t * x + np.log(t) + 1.0) / _LN2)


def build_constraints(scenario, realization):
    """Assemble the linear rows for one scenario and snapshot.

    Budget row: -sum(P) >= -P_th. SINR row i:
    rho_ii P_i - zeta_c_i sum_{l != i} rho_li P_l >= zeta_c_i sigma_c2_i.
    Sensing row i: sum_l g_li P_l >= zeta_s_i sigma_s2_i.
    """
    L = scenario.L
    if realization.L != L:
        raise DomainError("realization size does not match the scenario")
    delta = detection_threshold(L, scenario.pfa_target)
    budget = scenario.power_budget
    rows = [-np.ones(L)]
    offsets = [-budget]
    families = ["budget"]
    for i in range(L):
        zeta_c = rate_to_sinr_threshold(scenario.rate_threshold[i])
        row = -zeta_c * realization.rho[:, i]
        row[i] = realization.rho[i, i]
        rows.append(row)
        offsets.append(zeta_c * realization.sigma_c2[i])
        families.append("sinr")
    for i in range(L):
        zeta_s = pod_to_snr_threshold(scenario.pod_threshold[i], L, delta, scenario.N)
        rows.append(realization.g[:, i].copy())
        offsets.append(zeta_s * realization.sigma_s2[i])
        families.append("sensing")
    return LinearConstraintSet(
        a=np.array(rows), b=np.array(offsets), families=tuple(families), budget=budget
    )


def _phase1_center(constraints):
    """Maximize the minimum slack over (P, s) with a barrier method.

    Variables z = (P, s); every row c_j(P) - s >= 0 keeps a strictly
    interior start available regardless of whether the region itself is
    empty. Returns (P at the maximizer, maximal min-slack).
    """
    L = constraints.L
    budget = constraints.budget
    a_all, b_all = constraints.full_matrix()
    m = a_all.shape[0]
    az = np.hstack([a_all, -np.ones((m, 1))])
    bz = b_all
    P = np.full(L, budget / (2.0 * L))
    s = float(np.min(a_all @ P - b_all)) - 1.0
    z = np.concatenate([P, [s]])
    grad_obj = np.zeros(L + 1)
    grad_obj[-1] = 1.0

    def merit(zz, mu):
        cc = az @ zz - bz
        if np.any(cc <= 0.0):
            return -np.inf
        return float(grad_obj @ zz) + mu * float(np.sum(np.log(cc)))

    mu = _MU_START
    while True:
        for _ in range(100):
            c = az @ z - bz
            gbar = grad_obj + mu * az.T @ (1.0 / c)
            hbar = -mu * (az.T * (1.0 / c ** 2)) @ az
            d = np.linalg.solve(hbar, -gbar)
            if gbar @ d / 2.0 < 1e-12:
                break
            step = 1.0
            base = merit(z, mu)
            slope = 0.25 * (gbar @ d)
            while merit(z + step * d, mu) < base + step * slope:
                step *= 0.5
                if step < 1e-14:
                    break
            z = z + step * d
        mu /= 10.0
        if mu < 1e-10:
            break
    return z[:L], float(z[-1])


def feasibility_check(constraints, P=None):
    """Per-row slack report at P, or existence via a max-min-slack solve.

    Without P the region is declared infeasible when the best achievable
    minimum slack is below -1e-9; the maximizing point doubles as an
    interior starting point for the optimizer when feasible.
    """
    families = constraints.full_families()
    if P is not None:
        slacks = constraints.full_slacks(P)
        worst = int(np.argmin(slacks))
        return FeasibilityReport(
            feasible=bool(slacks[worst] >= _FEAS_TOL),
            min_slack=float(slacks[worst]),
            slacks=slacks,
            families=families,
            worst_family=families[worst],
        )
    center, best_min = _phase1_center(constraints)
    slacks = constraints.full_slacks(center)
    # at the maximin point several rows tie at the minimum slack (raising
    # one lowers another); blame the demand-side family when it is part of
    # the tie, since budget and positivity alone are always satisfiable
    near = np.where(slacks <= np.min(slacks) + 1e-7 * max(1.0, constraints.budget))[0]
    demand = [j for j in near if families[j] in ("sinr", "sensing")]
    worst = int(demand[0] if demand else near[0])
    return FeasibilityReport(
        feasible=bool(best_min >= _FEAS_TOL),
        min_slack=float(best_min),
        slacks=slacks,
        families=families,
        worst_family=families[worst],
        center=center,
    )


def _kkt_residual(P, grad, constraints, mu_final):
    """Infinity-norm KKT residual with least-squares refined multipliers.

    Barrier multipliers mu/c_j cannot be evaluated to high accuracy when
    c_j is itself of order mu, so the dual certificate is instead fitted
    on the numerically active rows: lambda solves the stationarity
    least-squares problem (negatives clipped and refitted). Residual is
    max over stationarity ||grad f + A^T lambda||_inf and
    complementarity max_j |lambda_j c_j|.
    """
    a_all, b_all = constraints.full_matrix()
    c = a_all @ P - b_all
    scale = max(1.0, float(constraints.budget))
    active = np.where(c <= 1e-4 * scale)[0]
    lam = np.zeros(len(c))
    if len(active):
        rows = a_all[active]
        for _ in range(len(active) + 1):
            sol, *_ = np.linalg.lstsq(rows.T, -grad, rcond=None)
            if np.all(sol >= -1e-12):
                break
            keep = sol > -1e-12
            active = active[keep]
            rows = rows[keep]
            if len(active) == 0:
                sol = np.zeros(0)
                break
        lam[active] = np.maximum(sol, 0.0)
    stationarity = float(np.max(np.abs(grad + a_all.T @ lam)))
    complementarity = float(np.max(np.abs(lam * c))) if len(c) else 0.0
    return max(stationarity, complementarity, mu_final)


def _interior_center(constraints):
    """Strictly interior analytic-center point, cached on the constraint set.

    The polytope is fixed across an alternating optimization, so the
    phase-1 solve runs once per constraint set. Raises InfeasibleError
    when the region is empty or has no interior for the barrier to use.
    """
    cached = getattr(constraints, "_center_cache", None)
    if cached is None:
        report = feasibility_check(constraints)
        if not report.feasible or report.min_slack <= 1e-12:
            raise InfeasibleError(
                "constraint set has no interior point for the barrier method",
                family=report.worst_family,
            )
        cached = (report.center, report.min_slack)
        constraints._center_cache = cached
    return cached


def solve_subproblem(t, constraints, realization, warm_start=None):
    """Barrier interior-point solve of the fixed-t concave subproblem.

    Maximizes surrogate_objective(P, t) over the constraint polytope.
    The barrier parameter drops geometrically (factor 10) to 1e-9; each
    stage runs damped Newton steps with Armijo backtracking. A warm
    start that hugs the boundary is blended toward the analytic center
    far enough for the barrier Hessian to stay well conditioned, and
    starts the schedule at a smaller barrier weight. More than 500
    Newton steps in one call raises SolverError. The returned KKT
    residual is certified at or below 1e-6 for well-posed instances;
    see _kkt_residual for the multiplier construction.
    """
    t = np.asarray(getattr(t, "t", t), dtype=float)
    rho = realization.rho
    sigma_c2 = realization.sigma_c2
    diag = np.diag(rho).copy()
    rho_off = rho.copy()
    np.fill_diagonal(rho_off, 0.0)
    lin = (rho_off @ t) / _LN2  # gradient of sum_i t_i x_i / ln 2

    def grad(P):
        total = rho.T @ P + sigma_c2
        return rho @ (1.0 / total) / _LN2 - lin

    def barrier_value(P, mu):
        c_rows = constraints.row_slacks(P)
        if np.any(c_rows <= 0.0) or np.any(P <= 0.0):
            return -np.inf
        total = rho.T @ P + sigma_c2
        x = total - diag * P
        f = float(np.sum(np.log2(total)) - (t @ x) / _LN2)
        return f + mu * (float(np.sum(np.log(c_rows))) + float(np.sum(np.log(P))))

    a_rows = constraints.a
    center, center_slack = _interior_center(constraints)
    floor = min(1e-8 * max(1.0, constraints.budget), 0.5 * center_slack)
    P = None
    mu0 = _MU_START
    if warm_start is not None:
        candidate = np.asarray(warm_start, dtype=float)
        s_cand = constraints.full_slacks(candidate)
        if np.min(s_cand) > 0.0:
            s_center = constraints.full_slacks(center)
            alpha = 0.0
            short = s_cand < floor
            if np.any(short):
                alpha = float(
                    np.max((floor - s_cand[short]) / (s_center[short] - s_cand[short]))
                )
            P = (1.0 - alpha) * candidate + alpha * center
            mu0 = 1e-2
    if P is None:
        P = center.copy()
    newton_total = 0
    mu = mu0
    while True:
        for _ in range(100):
            c_rows = constraints.row_slacks(P)
            gbar = grad(P) + mu * (a_rows.T @ (1.0 / c_rows) + 1.0 / P)
            total = rho.T @ P + sigma_c2
            hbar = (
                -(rho * (1.0 / total ** 2)) @ rho.T / _LN2
                - mu * ((a_rows.T * (1.0 / c_rows ** 2)) @ a_rows + np.diag(1.0 / P ** 2))
            )
            try:
                d = np.linalg.solve(hbar, -gbar)
            except np.linalg.LinAlgError:
                ridge = 1e-12 * float(np.max(np.abs(np.diag(hbar)))) + 1e-30
                d = np.linalg.solve(hbar - ridge * np.eye(len(P)), -gbar)
            decrement = gbar @ d
            newton_total += 1
            if newton_total > _NEWTON_CAP:
                raise SolverError(
                    f"barrier solve exceeded {_NEWTON_CAP} Newton steps"
                )
            converged = decrement / 2.0 < 1e-13
            step = 1.0
            base = barrier_value(P, mu)
            slope = 0.25 * decrement
            while barrier_value(P + step * d, mu) < base + step * slope:
                step *= 0.5
                if step < 1e-14:
                    break
            # the last Newton correction is applied before moving on: it is
            # quadratically accurate, which pins the stage center tightly
            P = P + step * d
            if converged:
                break
        if mu <= _MU_FINAL:
            break
        mu = max(mu / 10.0, _MU_FINAL)
    residual = _kkt_residual(P, grad(P), constraints, _MU_FINAL)
    return SubproblemResult(P, residual, newton_total)


def _result_for(P, scenario, realization, feasible, outer, trace, kkt, scheme):
    rates = np.array([user_rate(P, realization, i) for i in range(scenario.L)])
    delta = detection_threshold(scenario.L, scenario.pfa_target)
    pods = np.array(
        [
            pod_closed_form(
                P, realization.g[:, i], realization.sigma_s2[i], scenario.N, delta, scenario.L
            )
            for i in range(scenario.L)
        ]
    )
    return AllocationResult(
        P=P,
        per_user_rate=rates,
        sum_rate=float(np.sum(rates)),
        per_target_pod=pods,
        feasible=feasible,
        outer_iterations=outer,
        objective_trace=trace,
        kkt_residual=kkt,
        scheme=scheme,
    )


def _random_interior_points(constraints, center, count, rng):
    """Hit-and-run draws: uniform point on a random chord through the center."""
    a_all, b_all = constraints.full_matrix()
    points = []
    for _ in range(count):
        d = rng.standard_normal(constraints.L)
        d /= np.linalg.norm(d)
        num = a_all @ center - b_all
        den = a_all @ d
        t_hi, t_lo = np.inf, -np.inf
        for j in range(len(num)):
            if den[j] < -1e-15:
                t_hi = min(t_hi, num[j] / -den[j])
            elif den[j] > 1e-15:
                t_lo = max(t_lo, -num[j] / den[j])
        frac = rng.uniform(0.02, 0.98)
        points.append(center + (t_lo + frac * (t_hi - t_lo)) * d)
    return points


def optimize_ppa(scenario, realization, tol=1e-6, max_outer=100, n_starts=8):
    """Alternating surrogate optimization with multi-start, best kept.

    From every start the loop alternates the closed-form t update with
    the barrier subproblem solve, warm-started at the incumbent, until
    the true sum-rate gain drops below ``tol`` or ``max_outer`` rounds
    pass. The true sum rate never decreases along a branch: a solver
    step that fails to improve it (numerically possible at convergence)
    ends the branch with the incumbent kept. Starts are the equal-power
    point when strictly feasible plus ``n_starts`` random interior
    points; the best final objective wins, earliest start on ties.
    """
    constraints = build_constraints(scenario, realization)
    report = feasibility_check(constraints)
    if not report.feasible:
        raise InfeasibleError(
            f"no feasible power vector ({report.worst_family} row has slack "
            f"{report.min_slack:.3e} at the analytic center)",
            family=report.worst_family,
        )
    if report.min_slack <= 1e-12:
        raise InfeasibleError(
            "feasible region has empty interior; barrier method cannot start",
            family=report.worst_family,
        )
    constraints._center_cache = (report.center, report.min_slack)
    starts = []
    equal = np.full(scenario.L, constraints.budget / scenario.L)
    if np.min(constraints.full_slacks(equal)) >= 1e-12:
        starts.append(equal)
    rng = np.random.default_rng([scenario.seed, 104729])
    starts.extend(_random_interior_points(constraints, report.center, n_starts, rng))
    best = None
    for P0 in starts:
        P = np.maximum(P0, 1e-12)
        rate = sum_rate(P, realization)
        trace = [rate]
        kkt = np.nan
        outer_done = 0
        for _ in range(max_outer):
            t = t_update(P, realization)
            sub = solve_subproblem(t, constraints, realization, warm_start=P)
            new_rate = sum_rate(sub.P, realization)
            if new_rate < rate - 1e-9:
                break  # keep the incumbent, branch converged numerically
            P = sub.P
            kkt = sub.kkt_residual
            gain = new_rate - rate
            rate = new_rate
            trace.append(rate)
            outer_done += 1
            if gain < tol:
                break
        if best is None or rate > best[1]:
            best = (P, rate, trace, kkt, outer_done)
    P, rate, trace, kkt, outer_done = best
    if math.isnan(kkt):
        # start converged before any subproblem step; certify in place
        t = t_update(P, realization)
        grad_now = realization.rho @ (
            1.0 / (realization.rho.T @ P + realization.sigma_c2)
        ) / _LN2
        off = realization.rho.copy()
        np.fill_diagonal(off, 0.0)
        kkt = _kkt_residual(P, grad_now - (off @ t) / _LN2, constraints, _MU_FINAL)
    return _result_for(P, scenario, realization, True, outer_done, trace, float(kkt), "ppa")


def epa(scenario, realization):
    """Equal power allocation P_l = P_th / L, reported but never rejected."""
    constraints = build_constraints(scenario, realization)
    P = np.full(scenario.L, constraints.budget / scenario.L)
    feasible = bool(np.min(constraints.full_slacks(P)) >= _FEAS_TOL)
    result = _result_for(P, scenario, realization, feasible, 0, [], float("nan"), "epa")
    result.objective_trace = [result.sum_rate]
    return result


def rpa(scenario, realization, stream=None):
    """Random feasible allocation by rejection sampling.

    Draws P uniformly on the simplex {P >= 0, sum P = u P_th} with u
    uniform on (0, 1], accepting the first draw that satisfies every
    row. The attempt count is reported in ``outer_iterations``. After
    100000 rejected draws the region is declared empirically empty.
    """
    constraints = build_constraints(scenario, realization)
    if stream is None:
        stream = np.random.default_rng(2)
    ones = np.ones(scenario.L)
    for attempt in range(1, _RPA_CAP + 1):
        u = 1.0 - stream.random()
        P = stream.dirichlet(ones) * (u * constraints.budget)
        if np.min(constraints.full_slacks(P)) >= 0.0:
            result = _result_for(
                P, scenario, realization, True, attempt, [], float("nan"), "rpa"
            )
            result.objective_trace = [result.sum_rate]
            return result
    raise SamplingExhaustedError(
        f"no feasible draw in {_RPA_CAP} attempts; region is empirically empty"
    )
