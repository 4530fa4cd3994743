"""Switch detection, switch trees and batch planning."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..goals import Conj, Disj, Label, Unify
from ..terms import Int, Struct, Term, Var, term_vars


@dataclass(frozen=True)
class Edge:
    src: int
    goal: Optional[Unify]  # None for the entry into a nested switch's disjunct
    dst: int


@dataclass
class SwitchTree:
    var: str
    roots: list
    edges: list
    leaves: list
    disjunctions: list = field(default_factory=list)  # absorbed Disj objects, outermost first

    @property
    def nodes(self) -> list:
        return simplified_execution_path(self)

    def children(self) -> dict:
        kids: dict = {}
        for e in self.edges:
            kids.setdefault(e.src, []).append(e)
        return kids


@dataclass
class BatchPlan:
    batches: dict  # leaf label -> tuple of labels
    pre: tuple = ()


@dataclass
class _Disjunct:
    functors: set
    region: list  # goals of the tree region (labels, unifications, absorbed Disj)
    nested: Optional["_Analysis"] = None


@dataclass
class _Analysis:
    var: str
    disjunction: Disj
    disjuncts: list


def _functor(term: Term):
    if isinstance(term, Int):
        return ("int", term.value)
    return (term.name, term.arity)


def _scan(disjunct: Conj, bound: set, aliases: set) -> _Disjunct:
    bound = set(bound)
    aliases = set(aliases)
    functors: set = set()
    region: list = []
    nested = None
    for goal in disjunct.goals:
        if isinstance(goal, Label):
            region.append(goal)
            continue
        if isinstance(goal, Unify):
            left, right = goal.left, goal.right
            if isinstance(right, Var) and isinstance(left, Var):
                if left.name in aliases and right.name not in bound:
                    aliases.add(right.name)
                elif right.name in aliases and left.name not in bound:
                    aliases.add(left.name)
                bound.update((left.name, right.name))
            elif isinstance(left, Var):
                if left.name in aliases and not functors:
                    functors.add(_functor(right))
                bound.add(left.name)
                bound.update(term_vars(right))
            else:
                break
            region.append(goal)
            continue
        if isinstance(goal, Disj) and not functors:
            inner = _analyse(goal, bound, candidates=sorted(aliases), aliases=aliases)
            if inner is not None:
                nested = inner
                region.append(goal)
                for d in inner.disjuncts:
                    functors |= d.functors
        break
    return _Disjunct(functors, region, nested)


def _analyse(disj: Disj, bound: set, candidates=None, aliases=None) -> Optional[_Analysis]:
    if candidates is None:
        candidates = []
        first = disj.goals[0] if disj.goals else None
        if isinstance(first, Conj):
            for goal in first.goals:
                if isinstance(goal, Label):
                    continue
                if not isinstance(goal, Unify):
                    break
                for name in list(term_vars(goal.left)) + list(term_vars(goal.right)):
                    if name in bound and name not in candidates:
                        candidates.append(name)
    for var in candidates:
        if var not in bound:
            continue
        alias_set = set(aliases) if aliases else {var}
        alias_set.add(var)
        parts = [_scan(d, bound, alias_set) for d in disj.goals]
        if any(not p.functors for p in parts):
            continue
        seen: set = set()
        clash = False
        for p in parts:
            if p.functors & seen:
                clash = True
                break
            seen |= p.functors
        if not clash:
            return _Analysis(var, disj, parts)
    return None


def is_switch(disj: Disj, bound: set) -> bool:
    """True when ``disj`` tests one bound variable against distinct functors.

    Label goals are transparent; any other call before a disjunct's switch
    condition disqualifies the disjunction.
    """
    return _analyse(disj, set(bound)) is not None


def detect_switch(disj: Disj, bound: set) -> Optional[SwitchTree]:
    """Build the switch tree of a labelled disjunction, or None."""
    analysis = _analyse(disj, set(bound))
    if analysis is None:
        return None
    tree = SwitchTree(analysis.var, [], [], [], [])
    try:
        _build(analysis, tree, parent=None)
    except _Unlabelled:
        return None
    return tree


class _Unlabelled(Exception):
    pass


def _build(analysis: _Analysis, tree: SwitchTree, parent: Optional[int]) -> None:
    tree.disjunctions.append(analysis.disjunction)
    for part in analysis.disjuncts:
        region = part.region
        if not region or not isinstance(region[0], Label):
            raise _Unlabelled()
        current = region[0].id
        if parent is None:
            tree.roots.append(current)
        else:
            tree.edges.append(Edge(parent, None, current))
        i = 1
        ended_in_nested = False
        while i < len(region):
            goal = region[i]
            if isinstance(goal, Unify):
                nxt = region[i + 1] if i + 1 < len(region) else None
                if not isinstance(nxt, Label):
                    raise _Unlabelled()
                tree.edges.append(Edge(current, goal, nxt.id))
                current = nxt.id
                i += 2
            elif isinstance(goal, Disj):
                _build(part.nested, tree, parent=current)
                ended_in_nested = True
                i += 1
            else:
                i += 1
        if not ended_in_nested:
            tree.leaves.append(current)


def simplified_execution_path(tree: SwitchTree) -> list:
    """Depth-first, disjunct-order listing of the tree's labels."""
    kids = tree.children()
    out: list = []

    def visit(node: int) -> None:
        out.append(node)
        for e in kids.get(node, ()):
            visit(e.dst)

    for root in tree.roots:
        visit(root)
    return out


def mark_nodes(tree: SwitchTree, edge_outcomes: dict) -> set:
    """Roots are marked; a node is marked when its parent is and its edge succeeded.

    ``edge_outcomes`` maps ``(src, dst)`` to a bool; edges without a
    unification count as succeeded.
    """
    kids = tree.children()
    marked: set = set()

    def visit(node: int) -> None:
        marked.add(node)
        for e in kids.get(node, ()):
            ok = True if e.goal is None else edge_outcomes.get((e.src, e.dst), False)
            if ok:
                visit(e.dst)

    for root in tree.roots:
        visit(root)
    return marked


def mark_and_batch(tree: SwitchTree, edge_outcomes: dict) -> BatchPlan:
    marked = mark_nodes(tree, edge_outcomes)
    leaves = set(tree.leaves)
    batches: dict = {}
    pending: list = []
    last_leaf = None
    for node in simplified_execution_path(tree):
        if node not in marked:
            continue
        pending.append(node)
        if node in leaves:
            batches[node] = tuple(pending)
            last_leaf = node
            pending = []
    if pending:
        if last_leaf is None:
            return BatchPlan({}, tuple(pending))
        batches[last_leaf] = batches[last_leaf] + tuple(pending)
    return BatchPlan(batches, ())


# -- tree <-> term encoding used by the instrumented program -------------------

def tree_to_term(tree: SwitchTree) -> Term:
    """Encode as a list of ``n(Label, [e(Unification, n(...)), ...])`` roots."""
    from ..terms import make_list
    kids = tree.children()

    def node(label: int) -> Term:
        edges = []
        for e in kids.get(label, ()):
            goal = Struct("true") if e.goal is None else Struct("=", (e.goal.left, e.goal.right))
            edges.append(Struct("e", (goal, node(e.dst))))
        return Struct("n", (Int(label), make_list(edges)))

    return make_list([node(r) for r in tree.roots])


def tree_from_term(term: Term) -> SwitchTree:
    from ..terms import list_items
    tree = SwitchTree("", [], [], [])

    def walk(n: Term, parent: Optional[int], goal) -> None:
        label = n.args[0].value
        if parent is None:
            tree.roots.append(label)
        else:
            tree.edges.append(Edge(parent, goal, label))
        edges = list_items(n.args[1])
        if not edges:
            tree.leaves.append(label)
        for e in edges:
            g = e.args[0]
            unify = None if (isinstance(g, Struct) and g.name == "true" and not g.args) \
                else Unify(g.args[0], g.args[1])
            walk(e.args[1], label, unify)

    for root in list_items(term) or ():
        walk(root, None, None)
    return tree


def plan_to_term(plan: BatchPlan) -> Term:
    from ..terms import make_list
    pairs = [Struct("-", (Int(leaf), make_list([Int(l) for l in seq])))
             for leaf, seq in sorted(plan.batches.items())]
    return Struct("plan", (make_list([Int(l) for l in plan.pre]), make_list(pairs)))


def plan_from_term(term: Term) -> BatchPlan:
    from ..terms import list_items
    pre = tuple(t.value for t in list_items(term.args[0]))
    batches = {}
    for pair in list_items(term.args[1]):
        batches[pair.args[0].value] = tuple(t.value for t in list_items(pair.args[1]))
    return BatchPlan(batches, pre)


__all__ = [
    "Edge", "SwitchTree", "BatchPlan", "is_switch", "detect_switch",
    "simplified_execution_path", "mark_nodes", "mark_and_batch",
    "tree_to_term", "tree_from_term", "plan_to_term", "plan_from_term",
]
