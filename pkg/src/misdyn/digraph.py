"""Digraphs with mandatory self-loops and their sequence algebra.

A digraph lives on vertices 0..n-1 and is stored as one bitmask per
vertex (bit j of rows[i] set iff the edge i->j is present). The product
g*h contains (x, y) whenever some z has (x, z) in g and (z, y) in h,
i.e. boolean matrix multiplication; cumulants are left folds of that
product. The transitive front tf(g) is the densest graph h with
g*h == g, and utf(g) its densest undirected counterpart.
"""

import warnings

MAX_DENSE_N = 64


class SelfLoopError(ValueError):
    """A vertex is missing its self-loop under strict construction."""


class SequenceFormatError(ValueError):
    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class Digraph:
    __slots__ = ("n", "rows")

    def __init__(self, n, rows):
        if not 1 <= n <= MAX_DENSE_N:
            raise ValueError(f"vertex count {n} outside dense range 1..{MAX_DENSE_N}")
        rows = tuple(rows)
        if len(rows) != n:
            raise ValueError("row count does not match vertex count")
        full = (1 << n) - 1
        for i, r in enumerate(rows):
            if r & ~full:
                raise ValueError(f"row {i} references vertices outside 0..{n - 1}")
            if not r & (1 << i):
                raise SelfLoopError(
                    f"vertex {i} has no self-loop; use Digraph.from_edges to apply "
                    "the loop policy"
                )
        self.n = n
        self.rows = rows

    @classmethod
    def from_edges(cls, n, edges, strict_self_loops=False):
        """Build from an edge list; missing self-loops are added with a
        warning unless strict_self_loops, in which case they are rejected."""
        rows = [1 << i for i in range(n)]
        loops_seen = [False] * n
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) outside vertex range")
            rows[u] |= 1 << v
            if u == v:
                loops_seen[u] = True
        if not all(loops_seen):
            missing = [i for i, seen in enumerate(loops_seen) if not seen]
            if strict_self_loops:
                raise SelfLoopError(f"vertices {missing} lack self-loops")
            warnings.warn(
                f"added missing self-loops at vertices {missing}",
                stacklevel=2,
            )
        return cls(n, rows)

    @classmethod
    def from_rows(cls, n, rows):
        """Build from bitmask rows, silently adding self-loops."""
        return cls(n, tuple(r | (1 << i) for i, r in enumerate(rows)))

    @classmethod
    def identity(cls, n):
        return cls(n, tuple(1 << i for i in range(n)))

    @classmethod
    def complete(cls, n):
        full = (1 << n) - 1
        return cls(n, (full,) * n)

    def has_edge(self, i, j):
        return bool(self.rows[i] & (1 << j))

    def edges(self, include_loops=False):
        for i in range(self.n):
            r = self.rows[i]
            while r:
                j = (r & -r).bit_length() - 1
                r &= r - 1
                if include_loops or i != j:
                    yield (i, j)

    def edge_count(self, include_loops=False):
        total = sum(r.bit_count() for r in self.rows)
        return total if include_loops else total - self.n

    def in_masks(self):
        """Column bitmasks: in_masks()[j] holds the in-neighborhood of j."""
        cols = [0] * self.n
        for i in range(self.n):
            r = self.rows[i]
            while r:
                j = (r & -r).bit_length() - 1
                r &= r - 1
                cols[j] |= 1 << i
        return tuple(cols)

    def __eq__(self, other):
        return (
            isinstance(other, Digraph) and self.n == other.n and self.rows == other.rows
        )

    def __hash__(self):
        return hash((self.n, self.rows))

    def __repr__(self):
        es = sorted(self.edges())
        return f"Digraph(n={self.n}, edges={es})"


def _check_same_n(g, h):
    if g.n != h.n:
        raise ValueError(f"vertex count mismatch: {g.n} != {h.n}")


def product(g, h):
    """Composition g*h: (x, y) present iff some z has (x, z) in g, (z, y) in h."""
    _check_same_n(g, h)
    out = []
    for i in range(g.n):
        r = g.rows[i]
        m = 0
        while r:
            z = (r & -r).bit_length() - 1
            r &= r - 1
            m |= h.rows[z]
        out.append(m)
    return Digraph(g.n, out)


def cumulant(seq):
    """Left fold of the product over a non-empty digraph sequence."""
    seq = list(seq)
    if not seq:
        raise ValueError("cumulant of an empty sequence")
    acc = seq[0]
    for g in seq[1:]:
        acc = product(acc, g)
    return acc


def transitive_closure(g):
    c = g
    while True:
        c2 = product(c, c)
        if c2 == c:
            return c
        c = c2


def transitive_front(g):
    """Densest h with g*h == g; edge (i, j) iff in-nbhd(i) is a subset of
    in-nbhd(j)."""
    cols = g.in_masks()
    out = []
    for i in range(g.n):
        m = 0
        ci = cols[i]
        for j in range(g.n):
            if ci & ~cols[j] == 0:
                m |= 1 << j
        out.append(m)
    return Digraph(g.n, out)


def undirected_transitive_front(g):
    """Densest undirected h with g*h == g; a disjoint union of cliques with
    edge (i, j) iff the in-neighborhoods of i and j coincide."""
    cols = g.in_masks()
    out = []
    for i in range(g.n):
        m = 0
        for j in range(g.n):
            if cols[i] == cols[j]:
                m |= 1 << j
        out.append(m)
    return Digraph(g.n, out)


def is_transitive(g):
    return product(g, g) == g


def is_clique(g):
    full = (1 << g.n) - 1
    return all(r == full for r in g.rows)


def is_undirected(g):
    return g.rows == reverse(g).rows


def is_strongly_connected(g):
    return is_clique(transitive_closure(g))


def reverse(g):
    cols = g.in_masks()
    return Digraph(g.n, cols)


def ordering_leq(g, h):
    """Edge-set inclusion g <= h."""
    _check_same_n(g, h)
    return all(rg & ~rh == 0 for rg, rh in zip(g.rows, h.rows))


def scc_partition(g):
    """Strongly connected components as frozensets, ordered by least vertex."""
    cl = transitive_closure(g)
    seen = 0
    blocks = []
    for i in range(g.n):
        if seen & (1 << i):
            continue
        members = 0
        for j in range(g.n):
            if cl.rows[i] >> j & 1 and cl.rows[j] >> i & 1:
                members |= 1 << j
        seen |= members
        blocks.append(frozenset(b for b in range(g.n) if members >> b & 1))
    return blocks


# ---------------------------------------------------------------------------
# Text format (1-based) and DOT export


def read_sequence_text(text):
    """Parse a sequence of digraphs.

    Each graph starts with a header line `n=<k>` followed by one `u v`
    edge per line (1-based vertices); a blank line or end of input
    terminates the graph. Self-loops are implicit.
    """
    graphs = []
    n = None
    rows = None
    in_graph = False
    lineno = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            if in_graph:
                graphs.append(Digraph(n, rows))
                in_graph = False
            continue
        if not in_graph:
            if not line.startswith("n="):
                raise SequenceFormatError(f"expected 'n=<k>' header, got {line!r}", lineno)
            try:
                k = int(line[2:])
            except ValueError:
                raise SequenceFormatError(f"bad vertex count in {line!r}", lineno) from None
            if n is not None and k != n:
                raise SequenceFormatError(f"vertex count changed from {n} to {k}", lineno)
            n = k
            rows = [1 << i for i in range(n)]
            in_graph = True
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SequenceFormatError(f"expected 'u v' edge, got {line!r}", lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise SequenceFormatError(f"non-integer edge {line!r}", lineno) from None
        if not (1 <= u <= n and 1 <= v <= n):
            raise SequenceFormatError(f"edge ({u}, {v}) outside 1..{n}", lineno)
        rows[u - 1] |= 1 << (v - 1)
    if in_graph:
        graphs.append(Digraph(n, rows))
    return graphs


def write_sequence_text(graphs):
    parts = []
    for g in graphs:
        lines = [f"n={g.n}"]
        lines.extend(f"{u + 1} {v + 1}" for u, v in sorted(g.edges()))
        parts.append("\n".join(lines))
    return "\n\n".join(parts) + "\n"


def to_dot(g, name="g"):
    """DOT rendering; self-loops are omitted since every vertex has one."""
    lines = [f"digraph {name} {{"]
    for i in range(g.n):
        lines.append(f"  {i + 1};")
    for u, v in sorted(g.edges()):
        lines.append(f"  {u + 1} -> {v + 1};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def edge_label(g):
    """Compact 1-based edge listing used to annotate tree dumps."""
    es = sorted(g.edges())
    if not es:
        return "loops"
    return ",".join(f"{u + 1}>{v + 1}" for u, v in es)
