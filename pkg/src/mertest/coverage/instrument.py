"""Labelling and counter instrumentation of procedures."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from ..goals import (Call, Conj, Disj, Goal, GoalWriter, IfThenElse, Label,
                     Not)
from ..modes import Procedure, check_determinism, walk_disjunctions
from ..program import format_type_def
from ..terms import Int, Var, format_term, Struct
from .switches import SwitchTree, detect_switch, tree_to_term

KINDS = ("goal", "disjunction", "switch", "negation", "if_then_else", "procedure")


class InstrumentError(Exception):
    pass


@dataclass
class MetaEntry:
    enter: int
    exit: int
    kind: str
    proc_name: str
    span: Optional[tuple] = None
    note: str = ""


@dataclass
class CounterMeta:
    entries: list = field(default_factory=list)

    def labels(self) -> set:
        out: set = set()
        for e in self.entries:
            out.add(e.enter)
            out.add(e.exit)
        return out

    def dumps(self) -> str:
        lines = []
        for e in self.entries:
            if e.span:
                start, end = f"{e.span[0]}:{e.span[1]}", f"{e.span[2]}:{e.span[3]}"
            else:
                start = end = "-"
            cols = [str(e.enter), str(e.exit), e.kind, e.proc_name, start, end]
            if e.note:
                cols.append(e.note)
            lines.append("\t".join(cols) + "\n")
        return "".join(lines)

    @classmethod
    def loads(cls, text: str) -> "CounterMeta":
        entries = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) not in (6, 7) or cols[2] not in KINDS:
                raise ValueError(f"meta file line {lineno}: malformed entry")
            span = None
            if cols[4] != "-":
                sl, sc = cols[4].split(":")
                el, ec = cols[5].split(":")
                span = (int(sl), int(sc), int(el), int(ec))
            entries.append(MetaEntry(int(cols[0]), int(cols[1]), cols[2], cols[3], span,
                                     cols[6] if len(cols) == 7 else ""))
        return cls(entries)


def _kind(goal: Goal) -> str:
    if isinstance(goal, Disj):
        return "disjunction"
    if isinstance(goal, Not):
        return "negation"
    if isinstance(goal, IfThenElse):
        return "if_then_else"
    return "goal"


class _Labeller:
    def __init__(self, start: int = 1):
        self.next_id = start
        self.entries: list = []  # [goal object, MetaEntry]

    def new(self) -> Label:
        label = Label(self.next_id)
        self.next_id += 1
        return label

    def conj(self, c: Conj, proc_name: str) -> Conj:
        out: list = [self.new()]
        for g in c.goals:
            enter = out[-1]
            inner = self.goal(g, proc_name)
            exit_ = self.new()
            out += [inner, exit_]
            self.entries.append((inner, MetaEntry(enter.id, exit_.id, _kind(inner), proc_name)))
        return Conj(tuple(out), c.span)

    def goal(self, g: Goal, proc_name: str) -> Goal:
        if isinstance(g, Disj):
            return Disj(tuple(self.conj(d, proc_name) for d in g.goals), g.span)
        if isinstance(g, Not):
            return Not(self.conj(g.goal, proc_name), g.span)
        if isinstance(g, IfThenElse):
            return IfThenElse(self.conj(g.cond, proc_name), self.conj(g.then, proc_name),
                              self.conj(g.else_, proc_name), g.span)
        if isinstance(g, Conj):
            return self.conj(g, proc_name)
        # fresh object so that every occurrence gets its own printed span
        return dataclasses.replace(g)


def label_goal(goal: Goal, start: int = 1) -> Goal:
    """Label a goal fragment on its own, numbering from ``start``."""
    return _Labeller(start).goal(goal, "")


def _switch_kinds(proc: Procedure, entries: dict) -> None:
    for disj, bound, _outside, ctx in walk_disjunctions(proc.body, proc.input_vars(), set(proc.head_vars)):
        entry = entries.get(id(disj))
        if entry is None:
            continue
        if detect_switch(disj, bound) is not None:
            entry.kind = "switch"
            if ctx == "condition":
                entry.note = "switch inside if-then-else condition"
            elif ctx == "negation":
                entry.note = "switch inside negation; logged per label"


def label_program(procs: list, type_defs: Optional[dict] = None):
    """Insert labels at every position between goals, numbering densely in
    textual order across the program; returns ``(labelled procs, meta)``
    with spans pointing into ``labelled_source(labelled, type_defs)``."""
    labeller = _Labeller()
    labelled = []
    proc_entries = []
    for proc in procs:
        start = len(labeller.entries)
        body = labeller.conj(proc.body, proc.proc_name)
        lp = dataclasses.replace(proc, body=body)
        labelled.append(lp)
        proc_entry = MetaEntry(body.goals[0].id, body.goals[-1].id, "procedure", proc.proc_name)
        proc_entries.append((lp, proc_entry))
        by_goal = {id(g): e for g, e in labeller.entries[start:]}
        _switch_kinds(lp, by_goal)
    _, spans = render_procedures(labelled, type_defs)
    entries = []
    for goal, entry in labeller.entries:
        entry.span = spans.get(id(goal))
        entries.append(entry)
    for lp, entry in proc_entries:
        entry.span = spans.get(("proc", lp.proc_name))
        entries.append(entry)
    entries.sort(key=lambda e: (e.enter, -e.exit, e.kind != "procedure"))
    return labelled, CounterMeta(entries)


def naive_instrument(labelled: list) -> list:
    """Replace every label by a plain ``log/1`` call."""
    return [dataclasses.replace(p, body=_naive(p.body)) for p in labelled]


def _naive(goal: Goal) -> Goal:
    if isinstance(goal, Label):
        return Call("log", (Int(goal.id),))
    if isinstance(goal, Conj):
        return Conj(tuple(_naive(g) for g in goal.goals), goal.span)
    if isinstance(goal, Disj):
        return Disj(tuple(_naive(g) for g in goal.goals), goal.span)
    if isinstance(goal, Not):
        return Not(_naive(goal.goal), goal.span)
    if isinstance(goal, IfThenElse):
        return IfThenElse(_naive(goal.cond), _naive(goal.then), _naive(goal.else_), goal.span)
    return goal


def plan_var(tree: SwitchTree) -> str:
    return f"SwitchPlan__{tree.roots[0]}"


def switch_trees(proc: Procedure) -> dict:
    """Detected switches of a labelled procedure, keyed by ``id(disjunction)``.

    Nested switches on the same variable are absorbed into the outer tree;
    switches under a negation are left to per-label logging because a
    negation stops at its first solution.
    """
    trees: dict = {}
    absorbed: set = set()
    for disj, bound, _outside, ctx in walk_disjunctions(proc.body, proc.input_vars(), set(proc.head_vars)):
        if id(disj) in absorbed or ctx == "negation":
            continue
        tree = detect_switch(disj, bound)
        if tree is not None:
            trees[id(disj)] = tree
            absorbed.update(id(d) for d in tree.disjunctions[1:])
    return trees


class _Transformer:
    def __init__(self, trees: dict):
        self.trees = trees
        self.node_tree: dict = {}
        for tree in trees.values():
            for node in tree.nodes:
                self.node_tree[node] = tree

    def goal(self, goal: Goal) -> Goal:
        if isinstance(goal, Conj):
            out: list = []
            for g in goal.goals:
                if isinstance(g, Label):
                    tree = self.node_tree.get(g.id)
                    if tree is None:
                        out.append(Call("log", (Int(g.id),)))
                    elif g.id in tree.leaves:
                        out.append(Call("$batch", (Var(plan_var(tree)), Int(g.id))))
                    continue
                if isinstance(g, Disj) and id(g) in self.trees:
                    tree = self.trees[id(g)]
                    out.append(Call("$switch", (tree_to_term(tree), Var(plan_var(tree)))))
                out.append(self.goal(g))
            return Conj(tuple(out), goal.span)
        if isinstance(goal, Disj):
            return Disj(tuple(self.goal(g) for g in goal.goals), goal.span)
        if isinstance(goal, Not):
            return Not(self.goal(goal.goal), goal.span)
        if isinstance(goal, IfThenElse):
            return IfThenElse(self.goal(goal.cond), self.goal(goal.then), self.goal(goal.else_), goal.span)
        return goal


def instrument_labelled(labelled: list) -> list:
    out = []
    for proc in labelled:
        trees = switch_trees(proc)
        out.append(dataclasses.replace(proc, body=_Transformer(trees).goal(proc.body)))
    return out


def instrument(procs: list, type_defs: Optional[dict] = None):
    """Counter instrumentation with batch logging inside switches.

    Returns ``(instrumented procs, meta)``.  Raises :class:`InstrumentError`
    if a procedure that passed the determinism check fails it afterwards.
    """
    labelled, meta = label_program(procs, type_defs)
    result = instrument_labelled(labelled)
    before = {d.proc_name for d in check_determinism(procs)}
    after = [d for d in check_determinism(result) if d.proc_name not in before]
    if after:
        raise InstrumentError(f"instrumentation broke determinism: {after[0]}")
    return result, meta


def is_instrumented(procs_or_program) -> bool:
    from ..goals import subgoals
    from ..program import Program
    if isinstance(procs_or_program, Program):
        bodies = [c.body for p in procs_or_program.predicates.values() for c in p.clauses]
    else:
        bodies = [p.body for p in procs_or_program]
    for body in bodies:
        for g in subgoals(body):
            if isinstance(g, Call) and g.indicator in (("log", 1), ("$switch", 2), ("$batch", 2)):
                return True
    return False


# -- rendering ----------------------------------------------------------------

def render_procedures(procs: list, type_defs: Optional[dict] = None):
    """Print procedures as a program listing; returns ``(text, spans)``.

    ``spans`` maps ``id(goal)`` and ``("proc", name)`` to printed positions.
    """
    writer = GoalWriter()
    for tdef in (type_defs or {}).values():
        writer.write(format_type_def(tdef))
        writer.newline()
    if type_defs:
        writer.newline()
    for proc in procs:
        name = format_term(Struct(proc.proc_name))
        if proc.type_sig is not None:
            sig = ", ".join(str(t) for t in proc.type_sig)
            writer.write(f":- pred {name}({sig})." if sig else f":- pred {name}.")
            writer.newline()
        modes = f"({', '.join(proc.arg_modes)})" if proc.arg_modes else ""
        writer.write(f":- mode {name}{modes} is {proc.determinism.value}.")
        writer.newline()
        start = writer.pos()
        writer.write(format_term(Struct(proc.proc_name, tuple(Var(v) for v in proc.head_vars))))
        writer.write(" :-")
        writer.newline()
        writer.write(writer.indent)
        writer.goal(proc.body, 1)
        writer.write(".")
        end = writer.pos()
        writer.spans[("proc", proc.proc_name)] = (start[0], start[1], end[0], end[1])
        writer.newline()
        writer.newline()
    return writer.text(), writer.spans


def labelled_source(labelled: list, type_defs: Optional[dict] = None) -> str:
    return render_procedures(labelled, type_defs)[0]


def instrumented_source(procs: list, type_defs: Optional[dict] = None) -> str:
    return render_procedures(procs, type_defs)[0]


__all__ = [
    "CounterMeta", "MetaEntry", "InstrumentError", "label_program", "label_goal",
    "naive_instrument", "instrument", "instrument_labelled", "switch_trees",
    "render_procedures", "labelled_source", "instrumented_source", "is_instrumented",
]
