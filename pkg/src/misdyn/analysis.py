"""Dynamical analysis: period detection, the ergodic renormalizer,
irreducibility structure, constancy certificates and delta sweeps.
"""

import itertools
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from . import digraph as dg
from .rational import (
    find_dependent_row,
    format_rational,
    mat_mul,
    solve_unique,
    vec_dot,
    vec_mat,
)
from .system import (
    ON_DISCONTINUITY,
    BitSizeExceeded,
    DEFAULT_BIT_CAP,
    NoCellMatch,
    OrbitTrace,
    Periodic,
    SimplexVector,
    Unresolved,
    coefficient_of_ergodicity,
    is_primitive,
    locate_cell,
    perron_decomposition,
    sample_simplex,
)

EXACT_PERIODIC = "exact-periodic"
ASYMPTOTICALLY_PERIODIC = "asymptotically-periodic"
UNRESOLVED = "unresolved"


@dataclass
class PeriodVerdict:
    """Outcome of period detection.

    For an exact verdict the state at transient + period equals the
    state at transient. For an asymptotic verdict the itinerary repeats
    a period-long cell block (sustained for the configured number of
    repetitions) and tau_block, the coefficient of ergodicity of the
    block's matrix product, is below one, so the orbit contracts onto
    the periodic orbit of that product at a geometric rate.
    """

    status: str
    transient: int = None
    period: int = None
    tau_block: Fraction = None
    horizon: int = 0


class _RowsMatrix:
    """Adapter exposing raw rational rows to the spectral helpers."""

    __slots__ = ("n", "rows")

    def __init__(self, rows):
        self.rows = rows
        self.n = len(rows)


def block_product(system, cells):
    """Matrix product along a run of cell indices, in step order."""
    acc = None
    for c in cells:
        rows = system.cells[c].matrix.rows
        acc = rows if acc is None else mat_mul(acc, rows)
    return acc


def _scan_asymptotic(system, itinerary, sustained, sigma_cap):
    t = len(itinerary)
    max_sigma = min(t // sustained, sigma_cap)
    # The candidate block extends leftward as sigma grows, so its matrix
    # product accumulates by one left-multiplication per sigma.
    acc = None
    for sigma in range(1, max_sigma + 1):
        cell = itinerary[t - sigma]
        if cell is ON_DISCONTINUITY:
            return None
        rows = system.cells[cell].matrix.rows
        acc = rows if acc is None else mat_mul(rows, acc)
        block = itinerary[t - sigma :]
        ok = all(
            itinerary[t - r * sigma : t - (r - 1) * sigma] == block
            for r in range(2, sustained + 1)
        )
        if not ok:
            continue
        tau = coefficient_of_ergodicity(acc)
        if tau < 1:
            return sigma, tau
    return None


def detect_period(
    system,
    x0,
    horizon,
    sustained=3,
    scan_interval=16,
    sigma_cap=64,
    mode="capped",
    bit_cap=DEFAULT_BIT_CAP,
    return_trace=False,
):
    """Classify the orbit of x0 within the horizon.

    Exact periodicity means a state recurs exactly (rational equality);
    for a deterministic map the first recurrence pins both the transient
    and the minimal period. Otherwise the itinerary is scanned for a
    sustained repeating cell block whose matrix product contracts
    (tau < 1); a periodic symbolic itinerary plus contraction forces
    geometric convergence to a periodic orbit, so that outcome is
    reported as asymptotically periodic with the smallest such block
    length. Anything else is unresolved at this horizon.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    x = SimplexVector(x0)
    states = [x]
    itinerary = []
    seen = {x: 0}
    verdict = None
    for t in range(horizon):
        try:
            cell = locate_cell(system, x)
        except NoCellMatch as exc:
            exc.step = t
            raise
        itinerary.append(cell)
        if cell is ON_DISCONTINUITY:
            nxt = x
        else:
            nxt = SimplexVector(vec_mat(x, system.cells[cell].matrix.rows))
        if mode == "capped" and nxt.bit_size > bit_cap:
            raise BitSizeExceeded(nxt.bit_size, bit_cap, step=t)
        states.append(nxt)
        if nxt in seen:
            t0 = seen[nxt]
            sigma = t + 1 - t0
            block = itinerary[t0 : t0 + sigma]
            tau = None
            if ON_DISCONTINUITY not in block:
                tau = coefficient_of_ergodicity(block_product(system, block))
            verdict = PeriodVerdict(EXACT_PERIODIC, t0, sigma, tau, horizon)
            break
        seen[nxt] = t + 1
        x = nxt
        if (t + 1) % scan_interval == 0:
            hit = _scan_asymptotic(system, itinerary, sustained, sigma_cap)
            if hit is not None:
                sigma, tau = hit
                t0 = len(itinerary) - sustained * sigma
                verdict = PeriodVerdict(ASYMPTOTICALLY_PERIODIC, t0, sigma, tau, horizon)
                break
    if verdict is None:
        hit = _scan_asymptotic(system, itinerary, sustained, sigma_cap)
        if hit is not None:
            sigma, tau = hit
            t0 = len(itinerary) - sustained * sigma
            verdict = PeriodVerdict(ASYMPTOTICALLY_PERIODIC, t0, sigma, tau, horizon)
        else:
            verdict = PeriodVerdict(UNRESOLVED, horizon=horizon)
    if return_trace:
        if verdict.status == EXACT_PERIODIC:
            inner = Periodic(verdict.transient, verdict.period)
        else:
            inner = Unresolved(horizon)
        return verdict, OrbitTrace(states, itinerary, inner)
    return verdict


def estimate_eta(
    system,
    horizon,
    sample_budget,
    rng=None,
    exhaustive=False,
    denominator=1024,
):
    """Smallest t such that every observed t-long itinerary window has a
    primitive matrix product with coefficient of ergodicity below 1/2.

    Sampling mode draws sample_budget starting points and collects the
    windows their orbits realize; that under-approximates the set of
    reachable itineraries, so the true renormalizer may be larger.
    Exhaustive mode instead checks every symbolic cell sequence up to
    length `horizon`, an over-approximation that is sound but may
    overshoot (it includes itineraries no orbit realizes). Returns None
    when no t up to the horizon works.

    When every cell matrix has a positive diagonal, supports only grow
    with window length and tau is submultiplicative, so the first
    passing t is enough.
    """
    if exhaustive:
        n_cells = len(system.cells)
        for t in range(1, horizon + 1):
            windows = itertools.product(range(n_cells), repeat=t)
            if _all_windows_good(system, windows):
                return t
        return None
    rng = rng or random.Random(0)
    itineraries = []
    for _ in range(sample_budget):
        x0 = sample_simplex(rng, system.n, denominator)
        itinerary = _observed_itinerary(system, x0, horizon)
        if itinerary:
            itineraries.append(itinerary)
    max_t = max((len(it) for it in itineraries), default=0)
    for t in range(1, max_t + 1):
        windows = set()
        for it in itineraries:
            for start in range(len(it) - t + 1):
                windows.add(tuple(it[start : start + t]))
        if windows and _all_windows_good(system, windows):
            return t
    return None


def _observed_itinerary(system, x0, horizon):
    x = SimplexVector(x0)
    itinerary = []
    for _ in range(horizon):
        cell = locate_cell(system, x)
        if cell is ON_DISCONTINUITY:
            break
        itinerary.append(cell)
        x = SimplexVector(vec_mat(x, system.cells[cell].matrix.rows))
    return itinerary


def _all_windows_good(system, windows):
    half = Fraction(1, 2)
    for window in windows:
        prod = block_product(system, window)
        if not is_primitive(_RowsMatrix(prod)):
            return False
        if coefficient_of_ergodicity(prod) >= half:
            return False
    return True


def is_irreducible(system):
    """True iff every cell matrix has a strongly connected support."""
    return all(dg.is_strongly_connected(cell.matrix.support()) for cell in system.cells)


def weak_irreducibility_partition(system):
    """Vertex blocks within which every cell is strongly connected and
    between which no cell ever has an edge; None when no such partition
    exists. The candidate is the join of the per-cell strongly connected
    component partitions, then both properties are verified directly.
    """
    n = system.n
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri

    for cell in system.cells:
        for block in dg.scc_partition(cell.matrix.support()):
            members = sorted(block)
            for other in members[1:]:
                union(members[0], other)
    grouped = {}
    for i in range(n):
        grouped.setdefault(find(i), []).append(i)
    partition = [frozenset(b) for b in sorted(grouped.values())]
    lookup = {}
    for idx, block in enumerate(partition):
        for v in block:
            lookup[v] = idx
    for cell in system.cells:
        support = cell.matrix.support()
        for u, v in support.edges():
            if lookup[u] != lookup[v]:
                return None
        for block in partition:
            members = sorted(block)
            index = {v: k for k, v in enumerate(members)}
            rows = []
            for v in members:
                mask = 0
                for w in members:
                    if support.has_edge(v, w):
                        mask |= 1 << index[w]
                rows.append(mask)
            induced = dg.Digraph(len(members), rows)
            if not dg.is_strongly_connected(induced):
                return None
    return partition


def check_invariant_sums(system, partition, trace):
    """True iff the per-block coordinate sums are exactly constant along
    the trace."""
    reference = [
        sum((trace.states[0][v] for v in block), Fraction(0)) for block in partition
    ]
    for state in trace.states[1:]:
        for block, expected in zip(partition, reference):
            if sum((state[v] for v in block), Fraction(0)) != expected:
                return False
    return True


class PropertyUFailure(Exception):
    """The elimination ran out of dependent rows without a solution."""

    def __init__(self, residual_rows, residual_rhs):
        self.residual_rows = residual_rows
        self.residual_rhs = residual_rhs
        super().__init__(
            f"no constancy certificate: residual system has {len(residual_rows)} rows"
        )


def property_u_certificate(matrices, theta, a):
    """Rational u with unit coordinate sum making x^T M^(theta) u
    independent of x on the simplex.

    theta lists prefix lengths (1-based, strictly increasing); column i
    of M^(theta) is the product of the first theta[i] matrices applied
    to a. Writing each prefix product as 1 pi^T + Q, it suffices to
    solve Q^(theta) u = 0 with sum(u) = 1. The solver borders the first
    n active columns of Q^(theta) with one more column and a row of ones
    and solves R u = (0, ..., 0, 1); whenever R is singular it removes a
    Q-block row that is a linear combination of the others along with
    the last active column (pinning that u coordinate to zero) and
    recurses, down to the trivial one-column system, whose solution is
    the scalar one. Raises PropertyUFailure when no dependent row is
    available.

    The result is verified exactly before returning: sum(u) == 1 and
    M^(theta) u is a constant vector.
    """
    matrices = list(matrices)
    t_len = len(matrices)
    theta = list(theta)
    if any(k < 1 or k > t_len for k in theta):
        raise ValueError("theta indices must lie in 1..len(matrices)")
    if sorted(theta) != theta or len(set(theta)) != len(theta):
        raise ValueError("theta must be strictly increasing")
    n = matrices[0].n
    a = tuple(Fraction(v) for v in a)
    prefix_products = {}
    acc = None
    for k, m in enumerate(matrices, start=1):
        acc = m.rows if acc is None else mat_mul(acc, m.rows)
        prefix_products[k] = acc
    q_columns = []
    m_columns = []
    for k in theta:
        p_k = prefix_products[k]
        _, q_k = perron_decomposition(_RowsMatrix(p_k))
        q_columns.append(tuple(vec_dot(row, a) for row in q_k))
        m_columns.append(tuple(vec_dot(row, a) for row in p_k))
    m = len(theta)
    active_cols = list(range(min(m, n + 1)))
    active_rows = list(range(n))
    u = [Fraction(0)] * m
    while True:
        q_block = [[q_columns[c][r] for c in active_cols] for r in active_rows]
        rows = q_block + [[Fraction(1)] * len(active_cols)]
        rhs = [Fraction(0)] * len(active_rows) + [Fraction(1)]
        sol = solve_unique(rows, rhs)
        if sol is not None:
            for c, val in zip(active_cols, sol):
                u[c] = val
            break
        dep = find_dependent_row(q_block) if q_block else None
        if dep is None:
            raise PropertyUFailure(rows, rhs)
        del active_rows[dep]
        active_cols.pop()
        if not active_cols:
            raise PropertyUFailure(rows, rhs)
    assert sum(u) == 1
    constant = [
        sum((m_columns[c][r] * u[c] for c in range(m)), Fraction(0)) for r in range(n)
    ]
    if max(constant) != min(constant):
        raise PropertyUFailure([constant], [])
    return tuple(u)


@dataclass
class SweepEntry:
    delta: Fraction
    x0_index: int
    verdict: PeriodVerdict = None
    error: str = None


@dataclass
class SweepReport:
    grid: list
    entries: list

    def period_histogram(self):
        hist = {}
        for e in self.entries:
            if e.verdict is not None and e.verdict.period is not None:
                hist[e.verdict.period] = hist.get(e.verdict.period, 0) + 1
        return hist

    def resolved_fraction(self):
        if not self.entries:
            return 0.0
        good = sum(
            1
            for e in self.entries
            if e.verdict is not None and e.verdict.status != UNRESOLVED
        )
        return good / len(self.entries)

    def unresolved_fraction(self):
        if not self.entries:
            return 0.0
        return 1.0 - self.resolved_fraction()

    def write_csv(self, out):
        out.write("delta,x0_index,status,transient,period,tau_block\n")
        for e in self.entries:
            if e.error is not None:
                out.write(
                    f"{format_rational(e.delta)},{e.x0_index},error({e.error}),,,\n"
                )
                continue
            v = e.verdict
            transient = "" if v.transient is None else v.transient
            period = "" if v.period is None else v.period
            tau = "" if v.tau_block is None else format_rational(v.tau_block)
            out.write(
                f"{format_rational(e.delta)},{e.x0_index},{v.status},"
                f"{transient},{period},{tau}\n"
            )


def interior_grid(omega, count):
    """Evenly spaced rational grid strictly inside (-omega, omega); the
    interval endpoints are excluded so every point is a valid delta."""
    omega = Fraction(omega)
    return [-omega + Fraction(2 * (i + 1), count + 1) * omega for i in range(count)]


def delta_sweep(system, grid, x0_samples, horizon, workers=1, **detect_kwargs):
    """Run period detection over a delta grid times a set of starts.

    Cells are independent; per-cell failures are recorded and the sweep
    continues. Worker threads share only the immutable system, and the
    result order is fixed by (grid index, start index) regardless of
    scheduling.
    """
    grid = [Fraction(d) for d in grid]
    for d in grid:
        if abs(d) > system.omega:
            raise ValueError(f"grid point {d} outside [-omega, omega]")
    tasks = [
        (gi, delta, xi, x0)
        for gi, delta in enumerate(grid)
        for xi, x0 in enumerate(x0_samples)
    ]

    def run(task):
        _, delta, xi, x0 = task
        try:
            verdict = detect_period(
                system.with_delta(delta), x0, horizon, **detect_kwargs
            )
            return SweepEntry(delta, xi, verdict=verdict)
        except (NoCellMatch, BitSizeExceeded, ValueError) as exc:
            return SweepEntry(delta, xi, error=type(exc).__name__)

    if workers <= 1:
        entries = [run(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(run, tasks))
    return SweepReport(grid, entries)
