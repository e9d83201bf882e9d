"""Shared generators and independent oracles for the test suite.

The oracles deliberately avoid the package's bitmask representation:
they work on explicit edge sets and nested loops so that agreement with
the fast paths is meaningful.
"""

from fractions import Fraction

from misdyn import digraph as dg
from misdyn.system import Cell, Hyperplane, MISystem, SimplexVector, StochasticMatrix


def random_digraph(rng, n, p):
    edges = [(i, i) for i in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < p:
                edges.append((i, j))
    return dg.Digraph.from_edges(n, edges)


def edge_set(g):
    return set(g.edges(include_loops=True))


def graph_from_edge_set(n, edges):
    return dg.Digraph.from_edges(n, sorted(edges) + [(i, i) for i in range(n)])


def oracle_product(g, h):
    """Triple-loop boolean matrix product on explicit edge sets."""
    eg, eh = edge_set(g), edge_set(h)
    out = set()
    for x in range(g.n):
        for y in range(g.n):
            for z in range(g.n):
                if (x, z) in eg and (z, y) in eh:
                    out.add((x, y))
    return graph_from_edge_set(g.n, out)


def oracle_closure(g):
    """Floyd-Warshall style reachability closure."""
    n = g.n
    reach = [[g.has_edge(i, j) for j in range(n)] for i in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                reach[i][j] = reach[i][j] or (reach[i][k] and reach[k][j])
    return graph_from_edge_set(n, {(i, j) for i in range(n) for j in range(n) if reach[i][j]})


def oracle_temporal_reach(seq):
    """Pairs joined by a temporal walk through the sequence, computed by
    stepwise set propagation (independent of the product code)."""
    n = seq[0].n
    reach = {i: {i} for i in range(n)}
    for g in seq:
        edges = edge_set(g)
        reach = {
            i: {y for z in reach[i] for y in range(n) if (z, y) in edges}
            for i in range(n)
        }
    return graph_from_edge_set(
        n, {(i, j) for i in range(n) for j in reach[i]}
    )


def all_digraphs(n):
    """Every digraph on n vertices (self-loops fixed)."""
    offdiag = [(i, j) for i in range(n) for j in range(n) if i != j]
    for bits in range(1 << len(offdiag)):
        edges = [e for k, e in enumerate(offdiag) if bits >> k & 1]
        yield graph_from_edge_set(n, set(edges))


def densest_completion(g, undirected=False):
    """Union of all h with g*h == g (the set is closed under union, so
    the union is the unique densest such graph)."""
    n = g.n
    best = set((i, i) for i in range(n))
    for h in all_digraphs(n):
        if undirected and not dg.is_undirected(h):
            continue
        if dg.product(g, h) == g:
            best |= edge_set(h)
    return graph_from_edge_set(n, best)


def oracle_scc(g):
    """Mutual-reachability classes computed from the closure oracle."""
    cl = oracle_closure(g)
    blocks = []
    seen = set()
    for i in range(g.n):
        if i in seen:
            continue
        block = {
            j for j in range(g.n) if cl.has_edge(i, j) and cl.has_edge(j, i)
        }
        seen |= block
        blocks.append(frozenset(block))
    return blocks


# ---------------------------------------------------------------------------
# Random systems


def random_stochastic(rng, n, denominator=12, dense=True, cycle=True):
    """Random row-stochastic rational matrix with a positive diagonal.

    With cycle=True a Hamiltonian cycle is forced into the support, so
    the matrix is irreducible (hence primitive, given the diagonal).
    """
    rows = []
    for i in range(n):
        weights = [rng.randint(1, denominator) if dense else rng.randint(0, denominator) for _ in range(n)]
        weights[i] = max(weights[i], 1)
        if cycle:
            weights[(i + 1) % n] = max(weights[(i + 1) % n], 1)
        total = sum(weights)
        rows.append([Fraction(w, total) for w in weights])
    return StochasticMatrix(rows)


def random_simplex(rng, n, denominator=1024):
    cuts = sorted(rng.randint(0, denominator) for _ in range(n - 1))
    parts = []
    prev = 0
    for c in cuts:
        parts.append(c - prev)
        prev = c
    parts.append(denominator - prev)
    return SimplexVector(Fraction(p, denominator) for p in parts)


def random_irreducible_system(rng, n, hyperplanes=1, denominator=12):
    """Random system with around-one hyperplane normals (so each plane
    cuts the simplex interior) and irreducible dense cell matrices."""
    planes = []
    for _ in range(hyperplanes):
        normal = tuple(
            1 + Fraction(rng.randint(-3, 3), 8) for _ in range(n)
        )
        planes.append(Hyperplane(normal))
    cells = []
    for bits in range(1 << hyperplanes):
        pattern = "".join("+" if bits >> k & 1 else "-" for k in range(hyperplanes))
        cells.append(Cell(pattern, random_stochastic(rng, n, denominator)))
    return MISystem(n, planes, cells, delta=0, omega=Fraction(1, 8))


def bipartite_single_edge_sequence(side):
    """One single-edge bipartite graph per pair of L x R, n = 2*side."""
    n = 2 * side
    loops = [(i, i) for i in range(n)]
    return [
        dg.Digraph.from_edges(n, loops + [(l, side + r)])
        for l in range(side)
        for r in range(side)
    ]


def undirected_clique_growth_sequence(k, rounds):
    """Repeated clique-extension rounds: a clique on the first k
    vertices, an undirected pendant edge to a new vertex, then the k-1
    undirected spokes of the old clique, growing the clique by one
    vertex per round."""
    n = k + rounds
    loops = [(i, i) for i in range(n)]
    seq = []
    clique = list(range(k))
    clique_edges = [(a, b) for a in clique for b in clique if a != b]
    seq.append(dg.Digraph.from_edges(n, loops + clique_edges))
    for _ in range(rounds):
        fresh = len(clique)
        seq.append(dg.Digraph.from_edges(n, loops + [(clique[0], fresh), (fresh, clique[0])]))
        for other in clique[1:]:
            seq.append(
                dg.Digraph.from_edges(n, loops + [(clique[0], other), (other, clique[0])])
            )
        clique.append(fresh)
    return seq


def quadratic_threshold_step(a, b, xi, threshold, x):
    """Reference stepper for the variance-threshold rule, mirroring the
    discontinuity convention of the lifted system (ties map to the
    identity)."""
    from misdyn.rational import vec_mat
    from misdyn.system import variance_of

    var = variance_of(xi, x)
    if var == threshold:
        return x
    m = a if var > threshold else b
    return SimplexVector(vec_mat(x, m.rows))
