"""Temporal parse trees for digraph sequences.

The tree tracks how the cumulant of a sequence grows. While the
cumulant grows strictly, appends stack a new root over the old one (a
"fishbone"). When the cumulant is stuck, the append descends to the
lowest internal node v on the rightmost path whose cumulant absorbs the
new graph (c_v * g == c_v) and edits below it. Four cases apply,
split on whether c_v is transitive and whether v's rightmost child is a
leaf; the non-transitive cases insert a special node annotated with the
transitive front tf(c_v), the densest graph that cannot extend any walk
recorded in c_v.

Every node caches the product of the leaf graphs below it. Sketches
(transitive coarse-grainings: cl(c_v) for ordinary nodes, the tf
annotation for special nodes) decrease along every root path once the
re-wrapped trailing-segment annotations, which merely repeat an
ancestor, are collapsed; their clique partitions then refine step by
step, and decorate_topological extracts that refinement structure.
"""

from dataclasses import dataclass

from .digraph import (
    Digraph,
    edge_label,
    is_transitive,
    ordering_leq,
    product,
    reverse,
    scc_partition,
    transitive_closure,
    transitive_front,
)

LEAF = "leaf"
INTERNAL = "internal"
SPECIAL = "special"

# Depth never exceeds this bound for n-vertex sequences; each level of
# the tree loses at least one cumulant edge every one or two steps.
def depth_bound(n):
    return 4 * n * n + 4


class ParseNode:
    __slots__ = ("kind", "graph_index", "graph", "annotation", "children", "cumulant", "height")

    def __init__(self, kind, *, graph_index=None, graph=None, annotation=None,
                 children=None, cumulant=None):
        self.kind = kind
        self.graph_index = graph_index
        self.graph = graph
        self.annotation = annotation
        self.children = children if children is not None else []
        self.cumulant = cumulant
        self.height = 0 if kind == LEAF else 1 + max(
            (c.height for c in self.children), default=-1
        )

    @property
    def is_leaf(self):
        return self.kind == LEAF

    @property
    def is_special(self):
        return self.kind == SPECIAL

    def sketch(self):
        """Transitive coarse-graining of this node's cumulant.

        Special nodes carry their annotation; other nodes use the
        transitive closure of the cached cumulant (recomputed on demand,
        since the cumulant of a node on the rightmost path may still
        grow)."""
        if self.kind == SPECIAL:
            return self.annotation
        return transitive_closure(self.cumulant)

    def structurally_equal(self, other):
        if self.kind != other.kind:
            return False
        if self.kind == LEAF:
            return self.graph_index == other.graph_index
        if self.kind == SPECIAL and self.annotation != other.annotation:
            return False
        if len(self.children) != len(other.children):
            return False
        return all(a.structurally_equal(b) for a, b in zip(self.children, other.children))

    def __eq__(self, other):
        if not isinstance(other, ParseNode):
            return NotImplemented
        return self.structurally_equal(other)

    def __hash__(self):
        return hash((self.kind, self.graph_index, self.annotation, len(self.children)))

    def clone(self):
        node = ParseNode(
            self.kind,
            graph_index=self.graph_index,
            graph=self.graph,
            annotation=self.annotation,
            children=[c.clone() for c in self.children],
            cumulant=self.cumulant,
        )
        node.height = self.height
        return node


class ParseTree:
    """Parse tree of a digraph sequence, built by appending graphs.

    Appends mutate the rightmost path only (single writer); use copy()
    for a what-if snapshot.
    """

    def __init__(self, n=0):
        self.n = n
        self.root = None
        self.length = 0

    @property
    def cumulant(self):
        return self.root.cumulant if self.root is not None else None

    def depth(self):
        return self.root.height if self.root is not None else 0

    def append(self, g):
        if self.root is None:
            if self.n and g.n != self.n:
                raise ValueError(f"vertex count mismatch: {g.n} != {self.n}")
            self.n = g.n
            leaf = _leaf(self.length, g)
            self.root = ParseNode(INTERNAL, children=[leaf], cumulant=g)
            self.length = 1
            return self
        if g.n != self.n:
            raise ValueError(f"vertex count mismatch: {g.n} != {self.n}")
        grown = product(self.root.cumulant, g)
        leaf = _leaf(self.length, g)
        if grown != self.root.cumulant:
            # Strict cumulant growth: stack a new root.
            self.root = ParseNode(
                INTERNAL, children=[self.root, leaf], cumulant=grown
            )
        else:
            self._append_stuck(leaf, g)
        self.length += 1
        assert self.depth() <= depth_bound(self.n), "parse tree depth bound exceeded"
        return self

    def _append_stuck(self, leaf, g):
        # Descend the rightmost path to the lowest internal node whose
        # cumulant absorbs g. The root qualifies, and absorption is
        # inherited upward, so a plain walk suffices.
        path = [self.root]
        v = self.root
        while True:
            w = v.children[-1]
            if w.is_leaf or product(w.cumulant, g) != w.cumulant:
                break
            v = w
            path.append(v)
        w = v.children[-1]
        cv = v.cumulant
        if is_transitive(cv):
            if w.is_leaf:
                # Case 1: absorb the leaf directly when g equals the local
                # cumulant, otherwise open a fresh segment below v.
                if g == cv:
                    v.children.append(leaf)
                else:
                    z = ParseNode(INTERNAL, children=[leaf], cumulant=g)
                    v.children.append(z)
            else:
                # Case 2: the leaf closes the current segment when it
                # completes c_v; otherwise the segment grows a new spine node.
                if product(w.cumulant, g) == cv:
                    v.children.append(leaf)
                else:
                    z = ParseNode(
                        INTERNAL, children=[w, leaf], cumulant=product(w.cumulant, g)
                    )
                    v.children[-1] = z
        else:
            h = transitive_front(cv)
            if w.is_leaf:
                # Case 3: start the trailing segment under a special node
                # annotated with tf(c_v).
                z_inner = ParseNode(INTERNAL, children=[leaf], cumulant=g)
                z = ParseNode(SPECIAL, annotation=h, children=[z_inner], cumulant=g)
                v.children.append(z)
            else:
                # Case 4: regrow the trailing segment under a fresh special
                # node; the displaced subtree keeps absorbing below tf(c_v).
                cw_g = product(w.cumulant, g)
                assert ordering_leq(cw_g, h) and h != cv, (
                    "trailing segment escaped the transitive front"
                )
                z_inner = ParseNode(INTERNAL, children=[w, leaf], cumulant=cw_g)
                z = ParseNode(SPECIAL, annotation=h, children=[z_inner], cumulant=cw_g)
                v.children[-1] = z
        new_child = v.children[-1]
        v.height = max(v.height, new_child.height + 1)
        for parent, child in zip(reversed(path[:-1]), reversed(path[1:])):
            parent.height = max(parent.height, child.height + 1)

    def copy(self):
        t = ParseTree(self.n)
        t.length = self.length
        t.root = self.root.clone() if self.root is not None else None
        return t

    def __eq__(self, other):
        if not isinstance(other, ParseTree):
            return NotImplemented
        if self.length != other.length or self.n != other.n:
            return False
        if self.root is None or other.root is None:
            return self.root is other.root
        return self.root.structurally_equal(other.root)

    def __hash__(self):
        return hash((self.n, self.length))

    def preorder(self):
        """Yield (node, parent_index) pairs; parents precede children."""
        if self.root is None:
            return
        stack = [(self.root, -1)]
        order = []
        while stack:
            node, parent = stack.pop()
            idx = len(order)
            order.append((node, parent))
            for child in reversed(node.children):
                stack.append((child, idx))
        yield from order

    def leaves(self):
        return [node for node, _ in self.preorder() if node.is_leaf]

    def dump(self):
        """Stable indented text rendering, one node per line."""
        lines = []

        def walk(node, indent):
            pad = "  " * indent
            if node.is_leaf:
                lines.append(f"{pad}leaf {node.graph_index + 1} [{edge_label(node.graph)}]")
                return
            if node.is_special:
                lines.append(f"{pad}special tf=[{edge_label(node.annotation)}]")
            else:
                lines.append(f"{pad}node")
            for child in node.children:
                walk(child, indent + 1)

        if self.root is None:
            return "(empty)\n"
        walk(self.root, 0)
        return "\n".join(lines) + "\n"

    def to_dot(self, name="parse"):
        lines = [f"digraph {name} {{", "  node [shape=box];"]
        ids = {}
        for idx, (node, parent) in enumerate(self.preorder()):
            ids[idx] = node
            if node.is_leaf:
                label = f"g{node.graph_index + 1}"
                shape = "ellipse"
            elif node.is_special:
                label = f"tf: {edge_label(node.annotation)}"
                shape = "diamond"
            else:
                label = "."
                shape = "box"
            lines.append(f'  n{idx} [label="{label}", shape={shape}];')
            if parent >= 0:
                lines.append(f"  n{parent} -> n{idx};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _leaf(index, g):
    return ParseNode(LEAF, graph_index=index, graph=g, cumulant=g)


def parser_append(tree, g):
    """Append one graph to the tree (mutating the rightmost path)."""
    return tree.append(g)


def parse(seq, n=None):
    """Parse a finite digraph sequence into its temporal parse tree."""
    tree = ParseTree(n or 0)
    for g in seq:
        tree.append(g)
    return tree


@dataclass
class Decomposition:
    """Top-level split of a sequence into minimal completing segments.

    segments[i] is the half-open index range of the i-th segment; for
    i < len(terminators) the segment product composed with the graph at
    terminators[i] equals the cumulant of the whole sequence, while each
    segment product alone stays strictly below it. The final segment is
    the (possibly empty) remainder.
    """

    n: int
    segments: list
    terminators: list
    total: Digraph


def temporal_decompose(seq):
    seq = list(seq)
    if not seq:
        raise ValueError("cannot decompose an empty sequence")
    total = seq[0]
    for g in seq[1:]:
        total = product(total, g)
    segments = []
    terminators = []
    start = 0
    acc = Digraph.identity(total.n)
    for t, g in enumerate(seq):
        nxt = product(acc, g)
        if nxt == total:
            segments.append((start, t))
            terminators.append(t)
            start = t + 1
            acc = Digraph.identity(total.n)
        else:
            acc = nxt
    segments.append((start, len(seq)))
    return Decomposition(total.n, segments, terminators, total)


@dataclass
class TopologicalDecoration:
    """Sketches per node plus the clique-refinement productions along
    every tree edge.

    nodes / parents mirror the preorder of the tree. sketches[i] is the
    transitive sketch of node i. A trailing segment that keeps growing is
    re-wrapped in special nodes repeating the annotation already present
    higher on the path; such a repeat adds no information and is marked
    skipped (productions[i] is None and the effective sketch passes
    through). For retained nodes, productions[i] maps each clique block V
    of the nearest retained ancestor's sketch to the blocks of node i's
    sketch partitioning it, as (V, [W, ...]) pairs. The root has no
    production either.
    """

    nodes: list
    parents: list
    sketches: list
    effective: list
    productions: list

    def sketch_chain(self, index):
        """Nested chain of effective sketches from the root to a node."""
        chain = []
        while index >= 0:
            if not chain or chain[-1] != self.effective[index]:
                chain.append(self.effective[index])
            index = self.parents[index]
        return list(reversed(chain))


def decorate_topological(tree):
    if tree.root is None:
        raise ValueError("cannot decorate an empty tree")
    nodes = []
    parents = []
    for node, parent in tree.preorder():
        nodes.append(node)
        parents.append(parent)
    sketches = [node.sketch() for node in nodes]
    effective = [None] * len(nodes)
    productions = [None] * len(nodes)
    effective[0] = sketches[0]
    for i in range(1, len(nodes)):
        above = effective[parents[i]]
        if ordering_leq(sketches[i], above):
            effective[i] = sketches[i]
            productions[i] = _refinement(above, sketches[i])
        else:
            # Re-wrapped special repeating an ancestor annotation.
            if not nodes[i].is_special:
                raise AssertionError("sketch chain broke at an ordinary node")
            effective[i] = above
    return TopologicalDecoration(nodes, parents, sketches, effective, productions)


def _refinement(coarse, fine):
    vs = scc_partition(coarse)
    ws = scc_partition(fine)
    out = []
    for v in vs:
        members = [w for w in ws if w <= v]
        covered = frozenset().union(*members) if members else frozenset()
        if covered != v:
            raise AssertionError("clique blocks do not refine cleanly")
        out.append((v, members))
    return out


def backward_parse(seq):
    """Parse the edge-reversed sequence, then restore stored directions.

    The result parses products taken right-to-left, the order arising in
    diffusive averaging dynamics.
    """
    seq = list(seq)
    tree = parse([reverse(g) for g in seq])
    _reverse_stored(tree.root)
    return tree


def _reverse_stored(node):
    if node is None:
        return
    if node.cumulant is not None:
        node.cumulant = reverse(node.cumulant)
    if node.graph is not None:
        node.graph = reverse(node.graph)
    if node.annotation is not None:
        node.annotation = reverse(node.annotation)
    for child in node.children:
        _reverse_stored(child)
