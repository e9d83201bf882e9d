"""Markov influence systems: exact simulation on the probability simplex.

A system picks a row-stochastic matrix per polyhedral cell of the
simplex; a step maps x to x^T S(x). Cells are cut out by hyperplanes
a.x = 1 + delta and matched by ordered sign patterns over {+,-,*}
(first match wins). States sitting exactly on a hyperplane are mapped
to themselves, so orbits hitting a discontinuity freeze there.

All arithmetic is exact rational. Long orbits grow entry bit sizes, so
simulation runs in one of three modes: unbounded exact, exact with a
bit-size cap (default), or lossy rounding to dyadics of a fixed
precision (the trace is then flagged inexact).
"""

from dataclasses import dataclass, field
from fractions import Fraction

from . import digraph as dg
from .rational import (
    as_fraction_matrix,
    as_fraction_vector,
    format_rational,
    kron,
    mat_inf_norm,
    parse_rational,
    rref,
    vec_dot,
    vec_mat,
)

DEFAULT_BIT_CAP = 1 << 16

ON_DISCONTINUITY = None  # locate_cell result for states on a hyperplane


class NoCellMatch(Exception):
    """No cell pattern covers the computed sign vector."""

    def __init__(self, signs, step=None):
        self.signs = signs
        self.step = step
        at = f" at step {step}" if step is not None else ""
        super().__init__(f"no cell matches sign vector {signs}{at}")


class BitSizeExceeded(Exception):
    def __init__(self, bits, cap, step=None):
        self.bits = bits
        self.cap = cap
        self.step = step
        at = f" at step {step}" if step is not None else ""
        super().__init__(f"state entry needs {bits} bits (cap {cap}){at}")


class NotPrimitive(Exception):
    pass


class ConfigFormatError(ValueError):
    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SimplexVector(tuple):
    """Exact point of the standard simplex: nonnegative, sums to one."""

    def __new__(cls, coords):
        coords = tuple(Fraction(c) for c in coords)
        if any(c < 0 for c in coords):
            raise ValueError("negative coordinate")
        if sum(coords) != 1:
            raise ValueError("coordinates do not sum to 1")
        return super().__new__(cls, coords)

    @property
    def bit_size(self):
        """Largest numerator-plus-denominator bit count over the entries."""
        return max(c.numerator.bit_length() + c.denominator.bit_length() for c in self)


class StochasticMatrix:
    """Square row-stochastic matrix with exact rational entries.

    The diagonal must be strictly positive unless allow_zero_diagonal is
    set (needed for constructions whose reset rows move all mass away).
    """

    __slots__ = ("n", "rows")

    def __init__(self, rows, allow_zero_diagonal=False):
        rows = as_fraction_matrix(rows)
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise ValueError("matrix is not square")
        for i, row in enumerate(rows):
            if any(v < 0 for v in row):
                raise ValueError(f"negative entry in row {i}")
            if sum(row) != 1:
                raise ValueError(f"row {i} does not sum to 1")
            if not allow_zero_diagonal and row[i] == 0:
                raise ValueError(f"zero diagonal at row {i}")
        self.n = n
        self.rows = rows

    def support(self):
        """Digraph view of the positive entries.

        Self-loops are forced into the view (the digraph type requires
        them); that never changes reachability or strong connectivity.
        Primitivity checks go through is_primitive, which inspects the
        raw support instead.
        """
        return dg.Digraph.from_rows(self.n, support_masks(self.rows))

    def has_positive_diagonal(self):
        return all(self.rows[i][i] > 0 for i in range(self.n))

    def __eq__(self, other):
        return isinstance(other, StochasticMatrix) and self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self):
        return f"StochasticMatrix({self.rows!r})"


@dataclass(frozen=True)
class Hyperplane:
    """Discontinuity a.x = 1 + delta (delta supplied by the system)."""

    normal: tuple

    def __post_init__(self):
        object.__setattr__(self, "normal", as_fraction_vector(self.normal))
        if all(v == 0 for v in self.normal):
            raise ValueError("hyperplane normal is zero")

    def evaluate(self, x):
        return vec_dot(self.normal, x)


@dataclass(frozen=True)
class Cell:
    pattern: str
    matrix: StochasticMatrix
    label: str = field(default="", compare=False)


class MISystem:
    """Immutable system description: hyperplanes, delta, cells.

    omega bounds the delta window [-omega, omega]. Validation enforces
    omega < 1/2 and delta inside the window; whether the cell partition
    stays combinatorially the same across the whole window is the
    caller's obligation (no algorithm is provided to certify it).
    """

    def __init__(self, n, hyperplanes, cells, delta=0, omega=Fraction(1, 4)):
        self.n = n
        self.hyperplanes = tuple(hyperplanes)
        self.cells = tuple(cells)
        self.delta = Fraction(delta)
        self.omega = Fraction(omega)
        if not 0 < self.omega < Fraction(1, 2):
            raise ValueError("omega must lie strictly between 0 and 1/2")
        if abs(self.delta) > self.omega:
            raise ValueError("delta outside [-omega, omega]")
        for h in self.hyperplanes:
            if len(h.normal) != n:
                raise ValueError("hyperplane dimension mismatch")
        if not self.cells:
            raise ValueError("system needs at least one cell")
        for cell in self.cells:
            if len(cell.pattern) != len(self.hyperplanes):
                raise ValueError(
                    f"pattern {cell.pattern!r} does not cover {len(self.hyperplanes)} hyperplanes"
                )
            if any(ch not in "+-*" for ch in cell.pattern):
                raise ValueError(f"bad pattern character in {cell.pattern!r}")
            if cell.matrix.n != n:
                raise ValueError("cell matrix dimension mismatch")

    def with_delta(self, delta):
        return MISystem(self.n, self.hyperplanes, self.cells, delta=delta, omega=self.omega)

    def sign_vector(self, x):
        threshold = 1 + self.delta
        return tuple(
            0 if (v := h.evaluate(x)) == threshold else (1 if v > threshold else -1)
            for h in self.hyperplanes
        )

    def __eq__(self, other):
        return (
            isinstance(other, MISystem)
            and self.n == other.n
            and self.hyperplanes == other.hyperplanes
            and self.cells == other.cells
            and self.delta == other.delta
            and self.omega == other.omega
        )


def locate_cell(system, x):
    """Index of the first cell whose pattern matches the sign vector of x,
    or ON_DISCONTINUITY when some hyperplane holds with equality."""
    signs = system.sign_vector(x)
    if any(s == 0 for s in signs):
        return ON_DISCONTINUITY
    for idx, cell in enumerate(system.cells):
        if all(
            p == "*" or (p == "+") == (s > 0) for p, s in zip(cell.pattern, signs)
        ):
            return idx
    raise NoCellMatch(signs)


def step(system, x, bit_cap=None):
    """One exact step of the dynamics; identity on discontinuities.

    With bit_cap set, a result whose entries outgrow the cap raises
    BitSizeExceeded instead of being returned.
    """
    cell = locate_cell(system, x)
    if cell is ON_DISCONTINUITY:
        return x
    nxt = SimplexVector(vec_mat(x, system.cells[cell].matrix.rows))
    if bit_cap is not None and nxt.bit_size > bit_cap:
        raise BitSizeExceeded(nxt.bit_size, bit_cap)
    return nxt


@dataclass
class Periodic:
    transient: int
    period: int


@dataclass
class Unresolved:
    horizon: int


@dataclass
class OrbitTrace:
    states: list
    itinerary: list  # cell index per step, or ON_DISCONTINUITY
    verdict: object
    inexact: bool = False

    @property
    def hit_discontinuity(self):
        """True when some state sat exactly on a hyperplane (the map is
        the identity there, so the orbit froze)."""
        return any(c is ON_DISCONTINUITY for c in self.itinerary)


def _round_dyadic(x, bits):
    scale = 1 << bits
    rounded = [Fraction(round(c * scale), scale) for c in x]
    residual = 1 - sum(rounded)
    if residual != 0:
        top = max(range(len(rounded)), key=lambda i: rounded[i])
        rounded[top] += residual
    return SimplexVector(rounded)


def orbit(system, x0, horizon, mode="capped", bit_cap=DEFAULT_BIT_CAP, dyadic_bits=53):
    """Iterate the system, recording states and the itinerary.

    Stops early when a state recurs exactly (the orbit is then periodic)
    or on error. mode is one of 'exact' (unbounded rationals), 'capped'
    (raise BitSizeExceeded past bit_cap) or 'dyadic' (round each state,
    marking the trace inexact).
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if mode not in ("exact", "capped", "dyadic"):
        raise ValueError(f"unknown arithmetic mode {mode!r}")
    x = SimplexVector(x0)
    states = [x]
    itinerary = []
    seen = {x: 0}
    inexact = False
    verdict = Unresolved(horizon)
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
        if mode == "dyadic":
            rounded = _round_dyadic(nxt, dyadic_bits)
            inexact = inexact or rounded != nxt
            nxt = rounded
        states.append(nxt)
        if nxt in seen:
            t0 = seen[nxt]
            verdict = Periodic(transient=t0, period=t + 1 - t0)
            break
        seen[nxt] = t + 1
        x = nxt
    return OrbitTrace(states, itinerary, verdict, inexact)


def _rows_of(m):
    return m.rows if hasattr(m, "rows") else as_fraction_matrix(m)


def coefficient_of_ergodicity(m):
    """Half the maximum l1 distance between two rows; submultiplicative
    contraction coefficient for stochastic matrices."""
    rows = _rows_of(m)
    best = Fraction(0)
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            d = sum((abs(a - b) for a, b in zip(rows[i], rows[j])), Fraction(0))
            if d > best:
                best = d
    return best / 2


def support_masks(rows):
    """Raw boolean support of a nonnegative matrix, one bitmask per row
    (no self-loops are added)."""
    return [sum(1 << j for j, v in enumerate(row) if v > 0) for row in rows]


def _bool_mul(a, b, n):
    out = []
    for i in range(n):
        r = a[i]
        m = 0
        while r:
            z = (r & -r).bit_length() - 1
            r &= r - 1
            m |= b[z]
        out.append(m)
    return out


def is_primitive(m):
    """True iff some power of the support is entrywise positive.

    With a positive diagonal this reduces to strong connectivity of the
    support. Otherwise the Wielandt power (n-1)^2 + 1 of the raw boolean
    support is checked for full positivity (self-loops are not assumed,
    since adding them could turn an imprimitive support primitive).
    """
    rows = _rows_of(m)
    n = len(rows)
    masks = support_masks(rows)
    if all(masks[i] >> i & 1 for i in range(n)):
        return dg.is_strongly_connected(dg.Digraph(n, masks))
    exponent = (n - 1) * (n - 1) + 1
    acc = None
    base = masks
    e = exponent
    while e:
        if e & 1:
            acc = base if acc is None else _bool_mul(acc, base, n)
        base = _bool_mul(base, base, n)
        e >>= 1
    full = (1 << n) - 1
    return all(r == full for r in acc)


def stationary_distribution(p):
    """Exact solve of pi^T P = pi^T with unit sum; requires a unique
    solution (primitive P)."""
    rows = _rows_of(p)
    n = len(rows)
    aug = []
    for j in range(n):
        coeffs = [rows[i][j] - (1 if i == j else 0) for i in range(n)]
        aug.append(coeffs + [Fraction(0)])
    aug.append([Fraction(1)] * n + [Fraction(1)])
    reduced, pivots = rref(aug, ncols=n)
    for row in reduced:
        if all(v == 0 for v in row[:n]) and row[n] != 0:
            raise NotPrimitive("stationary equations are inconsistent")
    if len(pivots) < n:
        raise NotPrimitive("stationary distribution is not unique")
    sol = [Fraction(0)] * n
    for r, c in enumerate(pivots):
        sol[c] = reduced[r][n]
    return SimplexVector(sol)


def perron_decomposition(p):
    """Split a primitive stochastic matrix as 1 pi^T + Q.

    Returns (pi, Q rows); the infinity norm of Q never exceeds twice the
    coefficient of ergodicity of P, which is asserted.
    """
    if not is_primitive(p):
        raise NotPrimitive("matrix support is not primitive")
    pi = stationary_distribution(p)
    rows = _rows_of(p)
    q = tuple(tuple(v - pi[j] for j, v in enumerate(row)) for row in rows)
    assert mat_inf_norm(q) <= 2 * coefficient_of_ergodicity(p)
    return pi, q


# ---------------------------------------------------------------------------
# Variance-threshold systems and their Kronecker lift


def variance_of(xi, x):
    """Variance of the observable xi under distribution x, written as the
    pair sum (1/2) sum_ij (xi_i - xi_j)^2 x_i x_j."""
    xi = as_fraction_vector(xi)
    total = Fraction(0)
    for i in range(len(xi)):
        for j in range(len(xi)):
            total += (xi[i] - xi[j]) ** 2 * x[i] * x[j]
    return total / 2


def lift_state(x):
    """Outer-product distribution y_(i,j) = x_i x_j, row-major."""
    return SimplexVector(tuple(a * b for a in x for b in x))


def kronecker_variance_lift(a, b, xi, threshold):
    """Lift the rule "use A when var_x(xi) > threshold, else B" to a
    system on n^2 states with a single linear discontinuity.

    The quadratic test becomes linear in y = x (x) x: using sum(y) = 1,
    var > threshold  iff  sum_ij (w_ij - threshold + 1) y_ij > 1, with
    w_ij = (xi_i - xi_j)^2 / 2. Matrices lift to Kronecker squares.
    """
    if a.n != b.n:
        raise ValueError("matrix dimensions differ")
    xi = as_fraction_vector(xi)
    if len(xi) != a.n:
        raise ValueError("observable length does not match matrix size")
    threshold = Fraction(threshold)
    n = a.n
    lifted_a = StochasticMatrix(kron(a.rows, a.rows))
    lifted_b = StochasticMatrix(kron(b.rows, b.rows))
    normal = tuple(
        (xi[i] - xi[j]) ** 2 / 2 - threshold + 1 for i in range(n) for j in range(n)
    )
    if all(v == 0 for v in normal):
        # Constant observable with threshold exactly 1: the variance test
        # is identically false, so the system is a single B-cell.
        return MISystem(n * n, (), (Cell("", lifted_b, label="low-variance"),))
    return MISystem(
        n * n,
        (Hyperplane(normal),),
        (
            Cell("+", lifted_a, label="high-variance"),
            Cell("-", lifted_b, label="low-variance"),
        ),
    )


# ---------------------------------------------------------------------------
# Config text format and trace output


def read_mis_config(text):
    """Parse the system config format.

    Lines: n=<k>, omega=<p/q>, delta=<p/q>, one `hyperplane: a_1 .. a_n`
    per discontinuity, then `cell: <pattern> matrix: <n*n rationals>`
    entries (the matrix may continue on following lines). A lone `.`
    stands for the empty pattern of a hyperplane-free system. Matrices
    must carry strictly positive diagonals unless the file opts out with
    `unchecked=1` (needed by constructions whose reset rows empty a
    vertex).
    """
    n = omega = delta = None
    unchecked = False
    hyperplanes = []
    cells = []
    pending = None  # (pattern, collected rationals, start line)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            n, omega, delta, unchecked, pending = _config_line(
                line, lineno, n, omega, delta, unchecked, pending, hyperplanes, cells
            )
        except ValueError as exc:
            if isinstance(exc, ConfigFormatError):
                raise
            raise ConfigFormatError(str(exc), lineno) from exc
    if pending is not None:
        raise ConfigFormatError("matrix entries missing", pending[2])
    if n is None:
        raise ConfigFormatError("missing n=", 1)
    kwargs = {}
    if omega is not None:
        kwargs["omega"] = omega
    if delta is not None:
        kwargs["delta"] = delta
    return MISystem(n, hyperplanes, cells, **kwargs)


def _config_line(line, lineno, n, omega, delta, unchecked, pending, hyperplanes, cells):
    if pending is not None:
        pattern, values, start = pending
        values.extend(parse_rational(tok) for tok in line.split())
        if len(values) > n * n:
            raise ConfigFormatError("too many matrix entries", lineno)
        if len(values) == n * n:
            cells.append(_finish_cell(pattern, values, n, start, unchecked))
            pending = None
        return n, omega, delta, unchecked, pending
    if line.startswith("n="):
        n = int(line[2:])
    elif line.startswith("omega="):
        omega = parse_rational(line[6:])
    elif line.startswith("delta="):
        delta = parse_rational(line[6:])
    elif line.startswith("unchecked="):
        unchecked = line[10:].strip() == "1"
    elif line.startswith("hyperplane:"):
        if n is None:
            raise ConfigFormatError("hyperplane before n=", lineno)
        coeffs = [parse_rational(tok) for tok in line[len("hyperplane:"):].split()]
        if len(coeffs) != n:
            raise ConfigFormatError(
                f"hyperplane needs {n} coefficients, got {len(coeffs)}", lineno
            )
        hyperplanes.append(Hyperplane(tuple(coeffs)))
    elif line.startswith("cell:"):
        if n is None:
            raise ConfigFormatError("cell before n=", lineno)
        rest = line[len("cell:"):].split()
        if not rest:
            raise ConfigFormatError("cell line needs a sign pattern", lineno)
        pattern = "" if rest[0] == "." else rest[0]
        if len(pattern) != len(hyperplanes):
            raise ConfigFormatError(
                f"pattern {pattern!r} does not cover {len(hyperplanes)} hyperplanes",
                lineno,
            )
        if len(rest) < 2 or rest[1] != "matrix:":
            raise ConfigFormatError("expected 'matrix:' after the pattern", lineno)
        values = [parse_rational(tok) for tok in rest[2:]]
        if len(values) > n * n:
            raise ConfigFormatError("too many matrix entries", lineno)
        if len(values) == n * n:
            cells.append(_finish_cell(pattern, values, n, lineno, unchecked))
        else:
            pending = (pattern, values, lineno)
    else:
        raise ConfigFormatError(f"unrecognized line {line!r}", lineno)
    return n, omega, delta, unchecked, pending


def _finish_cell(pattern, values, n, lineno, unchecked):
    rows = [values[i * n : (i + 1) * n] for i in range(n)]
    try:
        matrix = StochasticMatrix(rows, allow_zero_diagonal=True)
    except ValueError as exc:
        raise ConfigFormatError(str(exc), lineno) from exc
    if not unchecked and not matrix.has_positive_diagonal():
        raise ConfigFormatError(
            "cell matrix has a zero diagonal entry (set unchecked=1 to allow)",
            lineno,
        )
    return Cell(pattern, matrix)


def write_mis_config(system):
    lines = [
        f"n={system.n}",
        f"omega={format_rational(system.omega)}",
        f"delta={format_rational(system.delta)}",
    ]
    if any(not cell.matrix.has_positive_diagonal() for cell in system.cells):
        lines.append("unchecked=1")
    for h in system.hyperplanes:
        lines.append("hyperplane: " + " ".join(format_rational(v) for v in h.normal))
    for cell in system.cells:
        pattern = cell.pattern if cell.pattern else "."
        lines.append(f"cell: {pattern} matrix:")
        for row in cell.matrix.rows:
            lines.append("  " + " ".join(format_rational(v) for v in row))
    return "\n".join(lines) + "\n"


def write_trace_csv(trace, out, exact=True):
    """Write a trace as CSV: step, cell, then one column per coordinate.

    Each row pairs a state with the cell applied from it; the final
    state has an empty cell column. Discontinuity steps show 'D'.
    """
    n = len(trace.states[0])
    header = "step,cell," + ",".join(f"x_{i + 1}" for i in range(n))
    out.write(header + "\n")
    for t, state in enumerate(trace.states):
        if t < len(trace.itinerary):
            cell = trace.itinerary[t]
            cell_txt = "D" if cell is ON_DISCONTINUITY else str(cell)
        else:
            cell_txt = ""
        if exact:
            coords = ",".join(format_rational(c) for c in state)
        else:
            coords = ",".join(repr(float(c)) for c in state)
        out.write(f"{t},{cell_txt},{coords}\n")


def sample_simplex(rng, n, denominator=1024):
    """Uniform-ish exact rational simplex point with a fixed denominator."""
    cuts = sorted(rng.randint(0, denominator) for _ in range(n - 1))
    parts = []
    prev = 0
    for c in cuts:
        parts.append(c - prev)
        prev = c
    parts.append(denominator - prev)
    return SimplexVector(Fraction(p, denominator) for p in parts)
