"""Exact rational vector and matrix helpers.

Vectors are tuples of fractions.Fraction, matrices are tuples of row
tuples. Nothing in this module touches floating point.
"""

from fractions import Fraction


def parse_rational(token):
    """Parse 'p/q' or an integer literal into a Fraction."""
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"invalid rational literal {token!r}") from exc


def format_rational(q):
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def as_fraction_vector(values):
    return tuple(Fraction(v) for v in values)


def as_fraction_matrix(rows):
    return tuple(tuple(Fraction(v) for v in row) for row in rows)


def vec_dot(u, v):
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


def vec_mat(x, m):
    """Row vector times matrix: returns x^T M as a tuple."""
    n = len(m[0])
    return tuple(
        sum((x[i] * m[i][j] for i in range(len(x))), Fraction(0)) for j in range(n)
    )


def mat_vec(m, v):
    return tuple(vec_dot(row, v) for row in m)


def mat_mul(a, b):
    bt = tuple(zip(*b))
    return tuple(tuple(vec_dot(row, col) for col in bt) for row in a)


def mat_identity(n):
    one, zero = Fraction(1), Fraction(0)
    return tuple(tuple(one if i == j else zero for j in range(n)) for i in range(n))


def mat_sub(a, b):
    return tuple(tuple(x - y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_inf_norm(m):
    """Maximum absolute row sum."""
    return max(sum((abs(v) for v in row), Fraction(0)) for row in m)


def kron(a, b):
    """Kronecker product with row-major pairing of indices."""
    p, q = len(b), len(b[0])
    return tuple(
        tuple(a[i][k] * b[j][l] for k in range(len(a[0])) for l in range(q))
        for i in range(len(a))
        for j in range(p)
    )


def rref(rows, ncols=None):
    """Reduced row echelon form over the rationals.

    Returns (reduced rows as list of lists, pivot column list).
    """
    work = [list(r) for r in rows]
    if ncols is None:
        ncols = len(work[0]) if work else 0
    pivots = []
    r = 0
    for c in range(ncols):
        pivot = None
        for i in range(r, len(work)):
            if work[i][c] != 0:
                pivot = i
                break
        if pivot is None:
            continue
        work[r], work[pivot] = work[pivot], work[r]
        inv = Fraction(1) / work[r][c]
        work[r] = [v * inv for v in work[r]]
        for i in range(len(work)):
            if i != r and work[i][c] != 0:
                f = work[i][c]
                work[i] = [v - f * w for v, w in zip(work[i], work[r])]
        pivots.append(c)
        r += 1
        if r == len(work):
            break
    return work, pivots


def matrix_rank(rows):
    if not rows:
        return 0
    _, pivots = rref(rows)
    return len(pivots)


def solve_unique(a_rows, b):
    """Solve A u = b exactly when the solution exists and is unique.

    Accepts square or overdetermined systems. Returns the solution tuple,
    or None when the system is singular, inconsistent or underdetermined.
    """
    if not a_rows:
        return None
    ncols = len(a_rows[0])
    aug = [list(row) + [rhs] for row, rhs in zip(a_rows, b)]
    reduced, pivots = rref(aug, ncols=ncols)
    # Inconsistent if a zero row maps to a nonzero right-hand side.
    for row in reduced:
        if all(v == 0 for v in row[:ncols]) and row[ncols] != 0:
            return None
    if len(pivots) < ncols:
        return None
    sol = [Fraction(0)] * ncols
    for r, c in enumerate(pivots):
        sol[c] = reduced[r][ncols]
    return tuple(sol)


def find_dependent_row(rows):
    """Index of a row that is a linear combination of the other rows.

    Returns None when the rows are linearly independent.
    """
    if not rows:
        return None
    n = len(rows)
    if matrix_rank(rows) == n:
        return None
    # Eliminate top-down; the first row reduced to zero by the ones above
    # it lies in their span.
    work = [list(r) for r in rows]
    used = []  # (pivot column, reduced row) pairs
    for idx in range(n):
        row = work[idx]
        for c, base in used:
            if row[c] != 0:
                f = row[c]
                row = [v - f * w for v, w in zip(row, base)]
        pivot = next((c for c, v in enumerate(row) if v != 0), None)
        if pivot is None:
            return idx
        inv = Fraction(1) / row[pivot]
        used.append((pivot, [v * inv for v in row]))
    return None
