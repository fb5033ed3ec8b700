"""Outer block-coordinate loop and the experiment drivers.

One outer iteration solves the four blocks in order (power, element
allocation, receiver orientation, panel placement), each with the others
frozen. The loop stops when all four block-change norms fall below their
thresholds. Tracing the efficiency frontier re-runs the loop for a ladder
of sum-rate targets expressed as fractions of an estimated maximum rate.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .channel import OrientationSet, build_channel_state, compute_bases
from .errors import Infeasible
from .geometry import Scenario
from .metrics import AllocationMatrix, MetricsReport, PowerAllocation, evaluate
from .solvers import (
    SolverOptions,
    improve_allocation_rate,
    maximize_orientation_rate,
    solve_allocation,
    solve_orientation,
    solve_placement,
    solve_power,
)

MODES = ("proposed", "no_irs", "fixed_P", "random_orientation", "random_B")
DEFAULT_MU = (1e-4, 1e-4, 1e-4, 1e-4)
DEFAULT_S_MAX = 50


@dataclass(frozen=True)
class SolutionState:
    P: PowerAllocation
    B: AllocationMatrix
    lam: OrientationSet
    q: np.ndarray


@dataclass(frozen=True)
class IterateRecord:
    iteration: int
    p_transmit: float
    r_tot: float
    ee: float
    max_violation: float
    delta_p: float
    delta_b: float
    delta_lambda: float
    delta_q: float
    objective: float  # negative transmit power: the quantity each sweep iterate improves


@dataclass(frozen=True)
class AlgorithmResult:
    state: SolutionState
    trace: list
    converged: bool
    iterations: int
    metrics: MetricsReport
    feasible: bool


@dataclass(frozen=True)
class ParetoPoint:
    alpha: float
    epsilon: float  # bits/s/Hz
    se: float  # bits/s/Hz
    ee: float  # bits/J/Hz
    p_tot: float  # W
    feasible: bool
    iterations: int
    mode: str = "proposed"


def default_init(s: Scenario) -> SolutionState:
    """Reproducible starting point: uniform full power, round-robin
    elements, zero tilt, panel at the center of the x_min wall."""
    l, k, n = s.num_leds, s.num_users, s.oirs_element_count
    p = np.full(l, s.p_max_watt / l)
    b = np.zeros((n, l))
    b[np.arange(n), np.arange(n) % l] = 1.0
    room = s.room
    q = np.array([room.x_min, 0.5 * (room.y_min + room.y_max), 0.5 * (room.z_min + room.z_max)])
    return SolutionState(PowerAllocation(p), AllocationMatrix(b), OrientationSet.zeros(k), q)


def evaluate_state(s: Scenario, state: SolutionState, include_oirs: bool = True) -> MetricsReport:
    cs = build_channel_state(s, state.lam, state.q, include_oirs=include_oirs)
    return evaluate(s, cs, state.P, state.B)


def _violation(s: Scenario, state: SolutionState, report: MetricsReport, epsilon: float) -> float:
    return float(
        max(
            0.0,
            epsilon - report.r_tot_bits,
            float(np.max(s.r_min - report.rate_bits)),
            float(np.max(state.lam.los_incidence - s.fov_incidence)),
            float(np.max(state.lam.oirs_incidence - s.fov_oirs)),
            state.P.total - s.p_max_watt,
        )
    )


def _is_feasible(s, state, report, epsilon, tol=1e-6) -> bool:
    return _violation(s, state, report, epsilon) <= tol


def run_algorithm1(
    s: Scenario,
    epsilon: float,
    init: SolutionState,
    mu: tuple = DEFAULT_MU,
    s_max: int = DEFAULT_S_MAX,
    opts: SolverOptions = SolverOptions(),
    include_oirs: bool = True,
    skip_blocks: frozenset = frozenset(),
) -> AlgorithmResult:
    """Minimum-power solution meeting the sum-rate target epsilon.

    Cycles power -> allocation -> orientation -> placement until all four
    block-change norms drop below mu, or s_max is reached (in which case
    the best feasible iterate is returned with converged=False).
    """
    state = init
    bases = compute_bases(s, state.q, include_oirs=include_oirs)
    trace: list[IterateRecord] = []
    kept: list[tuple[float, SolutionState, MetricsReport]] = []
    converged = False

    for it in range(1, s_max + 1):
        prev = state
        p_alloc, b_alloc, lam, q = state.P, state.B, state.lam, state.q
        # blocks run best-effort: an unattainable target at the current
        # channel is not fatal while the later blocks can still improve it;
        # the loop issues the infeasibility verdict at convergence
        if "power" not in skip_blocks:
            p_alloc = solve_power(
                s, bases, b_alloc, lam, epsilon, opts,
                p_start=state.P.per_led_watts, best_effort=True,
            )
        if "allocation" not in skip_blocks:
            b_alloc = solve_allocation(
                s, bases, p_alloc, lam, epsilon, opts, b_start=b_alloc, best_effort=True
            )
        if "orientation" not in skip_blocks:
            lam = solve_orientation(
                s, bases, p_alloc, b_alloc, epsilon, opts, lam_start=lam, best_effort=True
            )
        if "placement" not in skip_blocks:
            q_new = solve_placement(
                s, p_alloc, b_alloc, lam, epsilon, opts,
                q_start=q, include_oirs=include_oirs, best_effort=True,
            )
            if not np.array_equal(q_new, q):
                bases = compute_bases(s, q_new, include_oirs=include_oirs)
            q = q_new

        state = SolutionState(p_alloc, b_alloc, lam, q)
        report = evaluate_state(s, state, include_oirs=include_oirs)
        deltas = (
            float(np.linalg.norm(state.P.per_led_watts - prev.P.per_led_watts)),
            float(np.linalg.norm(state.B.b - prev.B.b)),
            float(np.linalg.norm(state.lam.as_vector() - prev.lam.as_vector())),
            float(np.linalg.norm(state.q - prev.q)),
        )
        viol = _violation(s, state, report, epsilon)
        trace.append(
            IterateRecord(
                iteration=it,
                p_transmit=state.P.total,
                r_tot=report.r_tot_bits,
                ee=report.ee,
                max_violation=viol,
                delta_p=deltas[0],
                delta_b=deltas[1],
                delta_lambda=deltas[2],
                delta_q=deltas[3],
                objective=-state.P.total,
            )
        )
        kept.append((state.P.total, state, report))
        if all(d <= m for d, m in zip(deltas, mu)):
            converged = True
            break

    if converged and not _is_feasible(s, state, report, epsilon):
        raise Infeasible(
            f"block iteration converged without meeting the rate target {epsilon:.6g} "
            f"or the per-user floor {s.r_min:.6g} under the {s.p_max_watt:.6g} W cap"
        )
    if not converged:
        feasible_iterates = [
            (p, st, rep) for p, st, rep in kept if _is_feasible(s, st, rep, epsilon)
        ]
        if not feasible_iterates:
            raise Infeasible(
                f"no iterate met the rate target {epsilon:.6g} within {s_max} outer iterations"
            )
        _, state, report = min(feasible_iterates, key=lambda t: t[0])
    feasible = _is_feasible(s, state, report, epsilon)
    return AlgorithmResult(
        state=state,
        trace=trace,
        converged=converged,
        iterations=len(trace),
        metrics=report,
        feasible=feasible,
    )


@dataclass(frozen=True)
class _ModeSetup:
    init: SolutionState
    skip_blocks: frozenset
    include_oirs: bool


def _mode_setup(s: Scenario, mode: str, seed: int) -> _ModeSetup:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    init = default_init(s)
    if mode == "proposed":
        return _ModeSetup(init, frozenset(), True)
    if mode == "no_irs":
        # zeroed reflected gains make the allocation/placement blocks no-ops
        return _ModeSetup(init, frozenset({"allocation", "placement"}), False)
    if mode == "fixed_P":
        return _ModeSetup(init, frozenset({"power"}), True)
    rng = np.random.default_rng(seed)
    if mode == "random_orientation":
        lam = OrientationSet(
            rng.uniform(0.0, s.fov_incidence, s.num_users),
            rng.uniform(0.0, s.fov_oirs, s.num_users),
        )
        return _ModeSetup(replace(init, lam=lam), frozenset({"orientation"}), True)
    # random_B: one-hot rows drawn uniformly over the LEDs
    cols = rng.integers(0, s.num_leds, s.oirs_element_count)
    b = np.zeros((s.oirs_element_count, s.num_leds))
    b[np.arange(s.oirs_element_count), cols] = 1.0
    return _ModeSetup(replace(init, B=AllocationMatrix(b)), frozenset({"allocation"}), True)


def _estimate_r_max(s: Scenario, opts: SolverOptions, setup: _ModeSetup, max_rounds: int = 20) -> float:
    """Achievable sum rate with the full power budget: ascend the
    allocation, orientation, and placement blocks until stagnation. A lower
    estimate of the true maximum."""
    state = setup.init
    bases = compute_bases(s, state.q, include_oirs=setup.include_oirs)
    report = evaluate_state(s, state, include_oirs=setup.include_oirs)
    r_curr = report.r_tot_bits
    for _ in range(max_rounds):
        b_alloc, lam, q = state.B, state.lam, state.q
        if "allocation" not in setup.skip_blocks:
            b_alloc = improve_allocation_rate(s, bases, state.P, lam, opts, b_start=b_alloc)
        if "orientation" not in setup.skip_blocks:
            lam = maximize_orientation_rate(s, bases, state.P, b_alloc, opts, lam_start=lam)
        if "placement" not in setup.skip_blocks:
            q_new = solve_placement(
                s,
                state.P,
                b_alloc,
                lam,
                0.0,
                opts,
                q_start=q,
                include_oirs=setup.include_oirs,
                require_qos=False,
            )
            if not np.array_equal(q_new, q):
                bases = compute_bases(s, q_new, include_oirs=setup.include_oirs)
            q = q_new
        state = SolutionState(state.P, b_alloc, lam, q)
        r_next = evaluate_state(s, state, include_oirs=setup.include_oirs).r_tot_bits
        if r_next - r_curr <= 1e-6:
            r_curr = max(r_curr, r_next)
            break
        r_curr = r_next
    return float(r_curr)


def compute_r_max(s: Scenario, opts: SolverOptions = SolverOptions(), mode: str = "proposed", seed: int = 0) -> float:
    return _estimate_r_max(s, opts, _mode_setup(s, mode, seed))


def baseline_run(
    s: Scenario,
    mode: str,
    epsilon: float,
    seed: int,
    opts: SolverOptions = SolverOptions(),
    alpha: float = float("nan"),
    mu: tuple = DEFAULT_MU,
    s_max: int = DEFAULT_S_MAX,
) -> ParetoPoint:
    """One efficiency point for a given mode and sum-rate target."""
    setup = _mode_setup(s, mode, seed)
    try:
        result = run_algorithm1(
            s,
            epsilon,
            setup.init,
            mu=mu,
            s_max=s_max,
            opts=opts,
            include_oirs=setup.include_oirs,
            skip_blocks=setup.skip_blocks,
        )
    except Infeasible:
        return ParetoPoint(alpha, epsilon, 0.0, 0.0, 0.0, False, 0, mode)
    return ParetoPoint(
        alpha=alpha,
        epsilon=epsilon,
        se=result.metrics.se,
        ee=result.metrics.ee,
        p_tot=result.metrics.p_tot,
        feasible=result.feasible,
        iterations=result.iterations,
        mode=mode,
    )


def _sweep_task(args):
    index, s, mode, alpha, r_max, seed, opts, mu, s_max = args
    point = baseline_run(s, mode, alpha * r_max, seed, opts, alpha=alpha, mu=mu, s_max=s_max)
    return index, point


def resolve_workers(max_workers: int | None) -> int:
    if max_workers is not None:
        return max(1, int(max_workers))
    env = os.environ.get("OWC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            return 1
    return 1


def pareto_sweep(
    s: Scenario,
    alphas,
    opts: SolverOptions = SolverOptions(),
    modes=("proposed",),
    seed: int = 0,
    max_workers: int | None = None,
    mu: tuple = DEFAULT_MU,
    s_max: int = DEFAULT_S_MAX,
) -> list[ParetoPoint]:
    """Frontier points for every (alpha, mode) pair, each solved cold from
    the default initialization. Points are grouped by mode and sorted by
    spectral efficiency within each mode."""
    alphas = [float(a) for a in alphas]
    for a in alphas:
        if not (0.0 < a <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {a}")
    tasks = []
    for mode in modes:
        setup = _mode_setup(s, mode, seed)
        r_max = _estimate_r_max(s, opts, setup)
        for a in alphas:
            tasks.append((len(tasks), s, mode, a, r_max, seed, opts, mu, s_max))

    workers = resolve_workers(max_workers)
    results: dict[int, ParetoPoint] = {}
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for index, point in pool.map(_sweep_task, tasks):
                results[index] = point
    else:
        for t in tasks:
            index, point = _sweep_task(t)
            results[index] = point
    points = [results[i] for i in range(len(tasks))]
    mode_order = {m: i for i, m in enumerate(modes)}
    points.sort(key=lambda p: (mode_order[p.mode], p.se, p.alpha))
    return points


def power_sweep(
    s: Scenario,
    pth_dbm_list,
    alpha: float,
    opts: SolverOptions = SolverOptions(),
    modes=("proposed",),
    seed: int = 0,
    max_workers: int | None = None,
) -> list[tuple[float, ParetoPoint]]:
    """One frontier point per (power budget, mode) at a fixed alpha,
    returned as (budget_dbm, point) pairs in input order per mode."""
    if len(pth_dbm_list) == 0:
        raise ValueError("power sweep needs at least one budget")
    del max_workers  # budgets are few; kept for interface symmetry
    points = []
    for mode in modes:
        for pth in pth_dbm_list:
            scen = s.with_power_budget_dbm(pth)
            setup = _mode_setup(scen, mode, seed)
            r_max = _estimate_r_max(scen, opts, setup)
            points.append(
                (float(pth), baseline_run(scen, mode, alpha * r_max, seed, opts, alpha=alpha))
            )
    return points


def pareto_front(points) -> list[ParetoPoint]:
    """Feasible points not dominated in (SE, EE) by another feasible point."""
    feas = [p for p in points if p.feasible]
    front = []
    for p in feas:
        dominated = any(
            (q.se >= p.se and q.ee >= p.ee and (q.se > p.se or q.ee > p.ee)) for q in feas
        )
        if not dominated:
            front.append(p)
    return front
