"""Superhomogeneous normalization, mode-directed reordering and determinism checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from .coverage.switches import is_switch
from .goals import (INSTRUMENT_CALLS, Call, Conj, Disj, Goal, IfThenElse,
                    Label, Not, Unify, atomic_vars, conj, goal_vars)
from .program import (Clause, Determinism, ModeDecl, PredicateDef, Program,
                      is_builtin)
from .terms import Int, Struct, Term, Var, term_vars

HEAD_VAR = "HeadVar__{}"


class ModeError(Exception):
    def __init__(self, message: str, span=None):
        self.message = message
        self.span = span
        where = f"{span[0]}:{span[1]}: " if span else ""
        super().__init__(where + message)


@dataclass
class Procedure:
    proc_name: str
    origin: tuple  # (name, arity, mode index)
    arg_modes: tuple
    determinism: Determinism
    head_vars: tuple
    body: Conj
    type_sig: Optional[tuple] = None
    span: Optional[tuple] = None

    @property
    def arity(self) -> int:
        return len(self.head_vars)

    @property
    def indicator(self) -> tuple:
        return (self.proc_name, len(self.head_vars))

    def input_vars(self) -> set:
        return {v for v, m in zip(self.head_vars, self.arg_modes) if m == "in"}


@dataclass(frozen=True)
class RenamingEntry:
    name: str
    arity: int
    mode_index: int
    new_name: str


@dataclass
class RenamingTable:
    entries: list = field(default_factory=list)

    def dumps(self) -> str:
        return "".join(f"{e.name}/{e.arity}\t{e.mode_index}\t{e.new_name}\n" for e in self.entries)

    @classmethod
    def loads(cls, text: str) -> "RenamingTable":
        entries = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 or "/" not in parts[0]:
                raise ValueError(f"renaming file line {lineno}: expected `name/arity<TAB>mode<TAB>new_name`")
            name, _, arity = parts[0].rpartition("/")
            entries.append(RenamingEntry(name, int(arity), int(parts[1]), parts[2]))
        names = [e.new_name for e in entries]
        if len(set(names)) != len(names):
            raise ValueError("renaming file maps two procedures to the same name")
        return cls(entries)


def proc_name_for(name: str, mode_index: int) -> str:
    return f"{name}__m{mode_index}"


# -- superhomogeneous form ------------------------------------------------------

class _Fresh:
    def __init__(self, used: set):
        self.used = set(used)
        self.n = 0

    def __call__(self) -> str:
        while True:
            self.n += 1
            name = f"V_{self.n}"
            if name not in self.used:
                self.used.add(name)
                return name


def _flatten_term(term: Term, fresh: _Fresh, out: list, span) -> Term:
    """Return a variable standing for ``term``, appending its construction
    (innermost first) to ``out``."""
    if isinstance(term, Var):
        return term
    if isinstance(term, Struct) and term.args:
        term = Struct(term.name, tuple(_flatten_term(a, fresh, out, span) for a in term.args), term.span)
    # numbered after the arguments, so fresh names follow construction order
    var = Var(fresh(), span)
    out.append(Unify(var, term, span))
    return var


def _flatten_unify(left: Term, right: Term, fresh: _Fresh, span) -> list:
    if not isinstance(left, Var):
        if isinstance(right, Var):
            left, right = right, left
        else:
            var = Var(fresh(), span)
            return _flatten_unify(var, left, fresh, span) + _flatten_unify(var, right, fresh, span)
    if isinstance(right, (Var, Int)):
        return [Unify(left, right, span)]
    out: list = []
    args = tuple(_flatten_term(a, fresh, out, span) for a in right.args)
    out.append(Unify(left, Struct(right.name, args, right.span), span))
    return out


def flatten_goal(goal: Goal, fresh: _Fresh) -> Goal:
    if isinstance(goal, Unify):
        parts = _flatten_unify(goal.left, goal.right, fresh, goal.span)
        return parts[0] if len(parts) == 1 else Conj(tuple(parts), goal.span)
    if isinstance(goal, Call):
        if goal.indicator in INSTRUMENT_CALLS:
            return goal
        out: list = []
        args = tuple(_flatten_term(a, fresh, out, goal.span) for a in goal.args)
        call = Call(goal.name, args, goal.span)
        return call if not out else Conj(tuple(out) + (call,), goal.span)
    if isinstance(goal, Conj):
        return conj([flatten_goal(g, fresh) for g in goal.goals], goal.span)
    if isinstance(goal, Disj):
        return Disj(tuple(_as_conj(flatten_goal(g, fresh)) for g in goal.goals), goal.span)
    if isinstance(goal, Not):
        return Not(_as_conj(flatten_goal(goal.goal, fresh)), goal.span)
    if isinstance(goal, IfThenElse):
        return IfThenElse(_as_conj(flatten_goal(goal.cond, fresh)),
                          _as_conj(flatten_goal(goal.then, fresh)),
                          _as_conj(flatten_goal(goal.else_, fresh)), goal.span)
    return goal


def _as_conj(goal: Goal) -> Conj:
    return goal if isinstance(goal, Conj) else Conj((goal,), getattr(goal, "span", None))


def rename_goal(goal: Goal, mapping: dict) -> Goal:
    from .terms import rename_vars
    if not mapping:
        return goal
    if isinstance(goal, Unify):
        return Unify(rename_vars(goal.left, mapping), rename_vars(goal.right, mapping), goal.span)
    if isinstance(goal, Call):
        return Call(goal.name, tuple(rename_vars(a, mapping) for a in goal.args), goal.span)
    if isinstance(goal, Conj):
        return Conj(tuple(rename_goal(g, mapping) for g in goal.goals), goal.span)
    if isinstance(goal, Disj):
        return Disj(tuple(rename_goal(g, mapping) for g in goal.goals), goal.span)
    if isinstance(goal, Not):
        return Not(rename_goal(goal.goal, mapping), goal.span)
    if isinstance(goal, IfThenElse):
        return IfThenElse(rename_goal(goal.cond, mapping), rename_goal(goal.then, mapping),
                          rename_goal(goal.else_, mapping), goal.span)
    return goal


def _all_var_names(goal: Goal) -> set:
    """Every variable name, including those in instrumentation payloads."""
    names: set = set()
    from .goals import subgoals
    for g in subgoals(goal):
        if isinstance(g, Unify):
            names.update(term_vars(g.left))
            names.update(term_vars(g.right))
        elif isinstance(g, Call):
            for a in g.args:
                names.update(term_vars(a))
    return names


def normalize_clause(clause: Clause, arity: int, fresh: _Fresh) -> Clause:
    """Canonical head ``HeadVar__1..k``; head unifications precede the body.

    A head argument that is a variable not seen earlier in the head is
    renamed to the canonical head variable instead of being unified with it.
    """
    head_vars = [HEAD_VAR.format(i + 1) for i in range(arity)]
    mapping: dict = {}
    head_unifs = []
    for hv, arg in zip(head_vars, clause.head_args):
        if isinstance(arg, Var) and arg.name not in mapping and arg.name not in head_vars:
            mapping[arg.name] = hv
        else:
            head_unifs.append((hv, arg))
    body_goals = []
    from .terms import rename_vars
    for hv, arg in head_unifs:
        body_goals.append(flatten_goal(Unify(Var(hv, arg.span), rename_vars(arg, mapping), arg.span), fresh))
    body = rename_goal(clause.body, mapping)
    body_goals.append(flatten_goal(body, fresh))
    goals = conj(body_goals).goals
    if not goals:
        goals = (Call("true"),)
    # drop `true` left behind by facts once head unifications exist
    if len(goals) > 1:
        goals = tuple(g for g in goals if not (isinstance(g, Call) and g.indicator == ("true", 0))) or goals
    return Clause(tuple(Var(h) for h in head_vars), Conj(goals, clause.body.span), clause.span)


def to_superhomogeneous(program: Program) -> Program:
    """Flatten every clause: unifications become ``X = Y`` or ``X = f(Y1..Yn)``
    and calls take only variables. Fresh variables are named ``V_<n>``,
    numbered per predicate, skipping names already used."""
    out = Program(dict(program.type_defs), {})
    for key, pred in program.predicates.items():
        used = set()
        for c in pred.clauses:
            used |= _all_var_names(c.body)
            for a in c.head_args:
                used.update(term_vars(a))
        used |= {HEAD_VAR.format(i + 1) for i in range(pred.arity)}
        fresh = _Fresh(used)
        clauses = [normalize_clause(c, pred.arity, fresh) for c in pred.clauses]
        out.predicates[key] = PredicateDef(pred.name, pred.arity, clauses, list(pred.modes), pred.type_sig)
    return out


# -- mode analysis -------------------------------------------------------------

@dataclass(frozen=True)
class CalleeMode:
    modes: tuple
    proc_name: str
    determinism: Determinism


def select_mode(candidates: list, bound_args: list) -> Optional[CalleeMode]:
    """Among modes whose ``in`` arguments are all bound, prefer the one with the
    most ``in`` arguments; ties go to declaration order."""
    best = None
    for cm in candidates:
        if all(b for b, m in zip(bound_args, cm.modes) if m == "in"):
            n_in = sum(1 for m in cm.modes if m == "in")
            if best is None or n_in > best[0]:
                best = (n_in, cm)
    return best[1] if best else None


class Scheduler:
    """Reorders conjunctions so that every goal's inputs are bound when it runs."""

    def __init__(self, callees: dict, fresh: _Fresh, where: str = ""):
        self.callees = callees
        self.fresh = fresh
        self.where = where

    def conj(self, goals, bound: set, outside: set):
        """Stable greedy scheduling; returns ``(goals, bound_after)``."""
        remaining = list(goals)
        vars_of = [goal_vars(g) for g in remaining]
        out: list = []
        bound = set(bound)
        while remaining:
            for i, g in enumerate(remaining):
                others = set().union(*(v for j, v in enumerate(vars_of) if j != i)) if len(vars_of) > 1 else set()
                result = self.goal(g, bound, outside | others | _done_vars(out))
                if result is not None:
                    new_goals, binds = result
                    out.extend(new_goals)
                    bound |= binds
                    del remaining[i]
                    del vars_of[i]
                    break
            else:
                g = remaining[0]
                raise ModeError(self._why(g, bound, outside), getattr(g, "span", None))
        return out, bound

    def _why(self, goal: Goal, bound: set, outside: set) -> str:
        from .goals import format_goal
        text = format_goal(goal, 0).replace("\n", " ")
        free = sorted(goal_vars(goal) - bound)
        where = f" in {self.where}" if self.where else ""
        return f"mode error{where}: no ordering makes `{text}` executable (free: {', '.join(free) or 'none'})"

    def goal(self, goal: Goal, bound: set, outside: set):
        if isinstance(goal, Unify):
            return self.unify(goal, bound)
        if isinstance(goal, Call):
            return self.call(goal, bound)
        if isinstance(goal, Label):
            return [goal], set()
        if isinstance(goal, Conj):
            try:
                goals, after = self.conj(goal.goals, bound, outside)
            except ModeError:
                return None
            return goals, after - bound
        if isinstance(goal, Disj):
            branches = []
            bound_sets = []
            for d in goal.goals:
                try:
                    goals, after = self.conj(d.goals, bound, outside)
                except ModeError:
                    return None
                branches.append(Conj(tuple(goals), d.span))
                bound_sets.append((after - bound) & outside)
            if any(b != bound_sets[0] for b in bound_sets):
                return None
            return [Disj(tuple(branches), goal.span)], bound_sets[0]
        if isinstance(goal, Not):
            try:
                goals, after = self.conj(goal.goal.goals, bound, outside)
            except ModeError:
                return None
            if (after - bound) & outside:
                return None
            return [Not(Conj(tuple(goals), goal.goal.span), goal.span)], set()
        if isinstance(goal, IfThenElse):
            then_vars = goal_vars(goal.then)
            try:
                cond, after_c = self.conj(goal.cond.goals, bound, outside | then_vars)
                if (after_c - bound) & outside:
                    return None
                then, after_t = self.conj(goal.then.goals, after_c, outside | goal_vars(goal.cond))
                else_, after_e = self.conj(goal.else_.goals, bound, outside)
            except ModeError:
                return None
            bt, be = (after_t - bound) & outside, (after_e - bound) & outside
            if bt != be:
                return None
            return [IfThenElse(Conj(tuple(cond), goal.cond.span), Conj(tuple(then), goal.then.span),
                               Conj(tuple(else_), goal.else_.span), goal.span)], bt
        raise TypeError(goal)

    def unify(self, goal: Unify, bound: set):
        left, right = goal.left, goal.right
        lv = set(term_vars(left))
        rv = set(term_vars(right))
        if isinstance(left, Var) and isinstance(right, Var):
            if left.name in bound or right.name in bound:
                return [goal], {left.name, right.name}
            return None
        if lv <= bound or rv <= bound:
            return [goal], lv | rv
        return None

    def call(self, goal: Call, bound: set):
        ind = goal.indicator
        arg_vars = [set(term_vars(a)) for a in goal.args]
        all_bound = all(v <= bound for v in arg_vars)
        if ind in INSTRUMENT_CALLS:
            if ind == ("$switch", 2):
                return [goal], set(term_vars(goal.args[1]))
            if ind == ("$batch", 2):
                return ([goal], set()) if arg_vars[0] <= bound else None
            return [goal], set()
        if is_builtin(ind):
            name = goal.name
            if name in ("true", "fail"):
                return [goal], set()
            if name == "is":
                return ([goal], arg_vars[0]) if arg_vars[1] <= bound else None
            if name == "length":
                return ([goal], arg_vars[1]) if arg_vars[0] <= bound else None
            return ([goal], set()) if all_bound else None
        candidates = self.callees.get(ind)
        if not candidates:
            raise ModeError(f"no mode declaration for {ind[0]}/{ind[1]}", goal.span)
        bound_args = [v <= bound for v in arg_vars]
        chosen = select_mode(candidates, bound_args)
        if chosen is None:
            return None
        args = list(goal.args)
        tests = []
        seen_out: set = set()
        binds: set = set()
        for i, (a, m) in enumerate(zip(goal.args, chosen.modes)):
            if m != "out":
                continue
            names = set(term_vars(a))
            if not isinstance(a, Var) or names & bound or names & seen_out:
                tmp = Var(self.fresh(), goal.span)
                args[i] = tmp
                tests.append(Unify(tmp, a, goal.span) if isinstance(a, Var) else Unify(tmp, a, goal.span))
                binds.add(tmp.name)
            else:
                seen_out |= names
            binds |= names
        new_call = Call(chosen.proc_name, tuple(args), goal.span)
        return [new_call] + tests, binds


def _done_vars(goals: list) -> set:
    out: set = set()
    for g in goals:
        out |= goal_vars(g)
    return out


def merged_body(clauses: list) -> Conj:
    if len(clauses) == 1:
        return clauses[0].body
    if not clauses:
        return Conj((Call("fail"),))
    return Conj((Disj(tuple(c.body for c in clauses)),))


def callee_table(program: Program) -> dict:
    table: dict = {}
    for (name, arity), pred in program.predicates.items():
        table[(name, arity)] = [CalleeMode(m.arg_modes, proc_name_for(name, k), m.determinism)
                                for k, m in enumerate(pred.modes)]
    return table


def reorder_and_split(program: Program, rename: bool = True):
    """One procedure per (predicate, mode) with mode-correct goal order.

    With ``rename=False`` the program must already consist of single-mode
    procedures (an instrumented program); names are kept as they are.
    """
    if rename:
        callees = callee_table(program)
    else:
        callees = {}
        for key, pred in program.predicates.items():
            if len(pred.modes) > 1:
                raise ModeError(f"{key[0]}/{key[1]} has several modes; expected one procedure per predicate")
            callees[key] = [CalleeMode(m.arg_modes, pred.name, m.determinism) for m in pred.modes]
    procs = []
    table = RenamingTable()
    for (name, arity), pred in program.predicates.items():
        for k, mode in enumerate(pred.modes):
            proc_name = proc_name_for(name, k) if rename else name
            head_vars = tuple(HEAD_VAR.format(i + 1) for i in range(arity))
            body = merged_body(pred.clauses)
            fresh = _Fresh(_all_var_names(body) | set(head_vars))
            sched = Scheduler(callees, fresh, where=f"{name}/{arity} mode {k}")
            bound = {v for v, m in zip(head_vars, mode.arg_modes) if m == "in"}
            goals, after = sched.conj(body.goals, bound, set(head_vars))
            missing = [v for v, m in zip(head_vars, mode.arg_modes) if m == "out" and v not in after]
            if missing:
                span = pred.clauses[0].span if pred.clauses else None
                raise ModeError(f"mode error in {name}/{arity} mode {k}: output {missing[0]} is never bound", span)
            span = pred.clauses[0].span if pred.clauses else None
            procs.append(Procedure(proc_name, (name, arity, k), mode.arg_modes, mode.determinism,
                                   head_vars, Conj(tuple(goals), body.span), pred.type_sig, span))
            if rename:
                table.entries.append(RenamingEntry(name, arity, k, proc_name))
    return procs, table


def compile_program(program: Program, rename: bool = True):
    return reorder_and_split(to_superhomogeneous(program), rename=rename)


def procedure_callees(procs: list) -> dict:
    table: dict = {}
    for p in procs:
        table.setdefault(p.indicator, []).append(CalleeMode(p.arg_modes, p.proc_name, p.determinism))
    return table


def compile_query(goals, callees: dict, bound: set = frozenset(), outside: Optional[set] = None) -> Conj:
    """Normalize and schedule a query (test code or an assertion condition)."""
    body = conj(list(goals))
    used = _all_var_names(body) | set(bound)
    fresh = _Fresh(used)
    flat = _as_conj(flatten_goal(body, fresh))
    visible = goal_vars(body) | set(bound) if outside is None else set(outside)
    sched = Scheduler(callees, fresh, where="query")
    scheduled, _ = sched.conj(flat.goals, set(bound), visible)
    return Conj(tuple(scheduled))


# -- determinism checking -------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    proc_name: str
    span: Optional[tuple]
    message: str

    def __str__(self) -> str:
        where = f"{self.span[0]}:{self.span[1]}: " if self.span else ""
        return f"{where}{self.message}"


def walk_disjunctions(body: Conj, bound: set, outside: set) -> Iterator[tuple]:
    """Yield ``(disj, bound_at_entry, outside, context)`` for every disjunction
    of a scheduled body; context is ``plain``, ``negation`` or ``condition``."""
    yield from _walk(body, set(bound), set(outside), "plain")


def _walk(goal: Goal, bound: set, outside: set, ctx: str):
    """Generator that also returns the bound set after ``goal``."""
    if isinstance(goal, Conj):
        vars_of = [goal_vars(g) for g in goal.goals]
        cur = set(bound)
        for i, g in enumerate(goal.goals):
            others = set().union(*(v for j, v in enumerate(vars_of) if j != i)) if len(vars_of) > 1 else set()
            cur = yield from _walk(g, cur, outside | others, ctx)
        return cur
    if isinstance(goal, Disj):
        yield (goal, set(bound), set(outside), ctx)
        afters = []
        for d in goal.goals:
            afters.append((yield from _walk(d, bound, outside, ctx)))
        common = set.intersection(*afters) if afters else set(bound)
        return bound | common
    if isinstance(goal, Not):
        yield from _walk(goal.goal, bound, outside, "negation")
        return bound
    if isinstance(goal, IfThenElse):
        inner = "negation" if ctx == "negation" else "condition"
        after_c = yield from _walk(goal.cond, bound, outside | goal_vars(goal.then), inner)
        after_t = yield from _walk(goal.then, after_c, outside | goal_vars(goal.cond), ctx)
        after_e = yield from _walk(goal.else_, bound, outside, ctx)
        return bound | (after_t & after_e)
    if isinstance(goal, Call) and goal.indicator == ("$switch", 2):
        return bound | set(term_vars(goal.args[1]))
    if isinstance(goal, (Unify, Call)):
        return bound | set(atomic_vars(goal))
    return bound


def disjunction_outputs(disj: Disj, bound: set, outside: set) -> set:
    """Non-local variables that the disjunction binds."""
    return (goal_vars(disj) - bound) & outside


def check_determinism(procs: list) -> list:
    """Every disjunction in a det/semidet procedure must be a switch, unless it
    binds no non-local variable (then it can commit to its first success)."""
    diags = []
    for proc in procs:
        if not proc.determinism.at_most_one:
            continue
        for disj, bound, outside, ctx in walk_disjunctions(proc.body, proc.input_vars(), set(proc.head_vars)):
            if ctx != "plain":
                continue
            if is_switch(disj, bound):
                continue
            if not disjunction_outputs(disj, bound, outside):
                continue
            diags.append(Diagnostic(
                proc.proc_name, disj.span,
                f"regular disjunction in {proc.determinism.value} procedure {proc.proc_name}"))
    return diags
