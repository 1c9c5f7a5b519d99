"""Type inequality systems: construction from terms, form checks, and solving.

``build_system(t, sigma, sig)`` produces the inequalities relating every
subterm position of ``t`` to the argument type expected by its parent.  The
declared types of the function at position ``p`` are copied with every
parameter ``v`` renamed to ``v^p``; a term variable ``x`` gets the parameter
``u^x``.  Positions are written ``ε``, ``1``, ``2.1``, ...; for a term vector
the components sit at positions ``1``..``n``.

``solve`` runs the four simplification rules until the system is either in
solved form (the principal solution) or stuck (no solution).  The same rewrite
machinery, with rigid parameters and a least-upper-bound variant of rule (4),
is exposed as :func:`solve_constraints` for the checker and the engine.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import FormViolation, PreconditionViolated
from .surface import App, Signature, Term, Var, is_linear, subst_term, subterms, term_vars
from .typesys import (
    Comp,
    ConstructorOrder,
    Param,
    Type,
    TypeSubst,
    pars,
    replace,
    size,
)

LE, EQ = "<=", "="
ROOT = "ε"


def pos_label(pos: tuple[int, ...]) -> str:
    return ".".join(map(str, pos)) if pos else ROOT


def var_param(x: str) -> str:
    return f"u^{x}"


@dataclass(frozen=True)
class Constraint:
    lhs: Type
    rhs: Type
    rel: str = LE
    origin: str | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return f"{self.lhs} {self.rel} {self.rhs}"


@dataclass
class InequalitySystem:
    constraints: list[Constraint]
    sigma: tuple[Type, ...] = ()
    provenance: dict[str, str] = field(default_factory=dict)
    rigid: frozenset[str] = frozenset()

    def __iter__(self):
        return iter(self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)

    def inequalities(self) -> list[Constraint]:
        return [c for c in self.constraints if c.rel == LE]

    def params(self) -> set[str]:
        return pars(*(t for c in self.constraints for t in (c.lhs, c.rhs)))

    def dump(self) -> str:
        return "\n".join(map(str, self.constraints))


# -- construction ------------------------------------------------------------

def _copy_decl(sig: Signature, fn: str, label: str, nargs: int) -> tuple[list[Type], Type]:
    decl = sig.func(fn)
    if decl.arity != nargs:
        raise PreconditionViolated(f"function {fn} applied to {nargs} arguments, declared {decl.arity}")
    ren = {p: Param(f"{p}^{label}") for p in pars(*decl.arg_types, decl.result)}
    return [replace(a, ren) for a in decl.arg_types], replace(decl.result, ren)


def build_system(
    t: Term | Sequence[Term],
    sigma: Type | Sequence[Type],
    sig: Signature,
) -> InequalitySystem:
    """The type inequality system of a term (or term vector) against a bound.

    Constraints are ordered deepest position first, then lexicographically,
    which reproduces the listing order used for the list examples.
    """
    if isinstance(t, (Var, App)):
        roots: list[tuple[tuple[int, ...], Term, Type]] = [((), t, sigma)]
    else:
        ts, ss = list(t), list(sigma)
        if len(ts) != len(ss):
            raise PreconditionViolated("term vector and type vector differ in length")
        roots = [((i,), ti, si) for i, (ti, si) in enumerate(zip(ts, ss), 1)]
    keyed: list[tuple[tuple[int, ...], Constraint]] = []
    prov: dict[str, str] = {}

    def visit(pos: tuple[int, ...], term: Term, bound: Type) -> None:
        label = pos_label(pos)
        if isinstance(term, Var):
            p = var_param(term.name)
            prov.setdefault(p, term.name)
            keyed.append((pos, Constraint(Param(p), bound, LE, label)))
            return
        arg_types, result = _copy_decl(sig, term.fn, label, len(term.args))
        for q in pars(result):
            prov[q] = label
        keyed.append((pos, Constraint(result, bound, LE, label)))
        for i, (sub, at) in enumerate(zip(term.args, arg_types), 1):
            visit(pos + (i,), sub, at)

    for pos, term, bound in roots:
        visit(pos, term, bound)
    keyed.sort(key=lambda kc: (-len(kc[0]), kc[0]))
    sigmas = (sigma,) if isinstance(t, (Var, App)) else tuple(sigma)
    return InequalitySystem(
        [c for _, c in keyed], sigmas, prov, frozenset(pars(*sigmas))
    )


# -- form checks ---------------------------------------------------------------

@dataclass(frozen=True)
class Form:
    left_linear: bool
    acyclic: bool


def _lhs_counts(constraints: Iterable[Constraint], ignore) -> dict[str, int]:
    counts: dict[str, int] = {}
    for c in constraints:
        for p in _par_occurrences(c.lhs):
            if p not in ignore:
                counts[p] = counts.get(p, 0) + 1
    return counts


def _par_occurrences(t: Type) -> list[str]:
    if isinstance(t, Param):
        return [t.name]
    out: list[str] = []
    for a in t.args:
        out.extend(_par_occurrences(a))
    return out


def _has_cycle(constraints: Sequence[Constraint], ignore, min_len: int) -> bool:
    """Cycle test of the 'rhs shares a parameter with the next lhs' relation."""
    n = len(constraints)
    lp = [pars(c.lhs) - ignore for c in constraints]
    rp = [pars(c.rhs) - ignore for c in constraints]
    succ = [[j for j in range(n) if rp[i] & lp[j]] for i in range(n)]
    if min_len <= 1 and any(i in succ[i] for i in range(n)):
        return True
    # colour-based DFS for cycles through distinct nodes, ignoring self loops
    WHITE, GREY, BLACK = 0, 1, 2
    colour = [WHITE] * n
    for root in range(n):
        if colour[root] != WHITE:
            continue
        stack = [(root, iter(succ[root]))]
        colour[root] = GREY
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                colour[node] = BLACK
                stack.pop()
            elif nxt == node:
                continue
            elif colour[nxt] == GREY:
                return True
            elif colour[nxt] == WHITE:
                colour[nxt] = GREY
                stack.append((nxt, iter(succ[nxt])))
    return False


def check_form(system: InequalitySystem | Sequence[Constraint], ignore: Iterable[str] | None = None) -> Form:
    """Left-linearity and acyclicity; rigid parameters are ignored."""
    cs = list(system)
    if ignore is None:
        ignore = system.rigid if isinstance(system, InequalitySystem) else ()
    ignore = set(ignore)
    ll = all(n <= 1 for n in _lhs_counts(cs, ignore).values())
    return Form(ll, not _has_cycle(cs, ignore, 1))


# -- solving -------------------------------------------------------------------

@dataclass(frozen=True)
class Step:
    rule: str
    before: Constraint
    produced: tuple[Constraint, ...]
    system: tuple[Constraint, ...]

    def __str__(self) -> str:
        out = ", ".join(map(str, self.produced)) or "∅"
        return f"({self.rule}) {self.before}  ==>  {out}"


@dataclass
class Solution:
    theta: TypeSubst
    principal: bool = True
    trace: list[Step] = field(default_factory=list)
    system: list[Constraint] = field(default_factory=list)

    def __bool__(self) -> bool:
        return True


@dataclass
class NoSolution:
    witness: Constraint
    reason: str
    trace: list[Step] = field(default_factory=list)
    system: list[Constraint] = field(default_factory=list)

    def __bool__(self) -> bool:
        return False

    def __str__(self) -> str:
        where = f" at position {self.witness.origin}" if self.witness.origin else ""
        return f"no solution: {self.witness} is irreducible{where} ({self.reason})"


class _Rewriter:
    """Applies the simplification rules to a private copy of a constraint list.

    ``rigid`` parameters are never bound.  ``bind_lower`` selects how a
    parameter with only lower bounds is bound: ``"max"`` is rule (4) as
    stated (maximum of one lower bound), ``"lub"`` binds to the least upper
    bound of all its lower bounds once they are free of unbound parameters,
    falling back to ``"max"`` when ``lub_fallback`` is set.
    """

    def __init__(
        self,
        order: ConstructorOrder,
        constraints: Iterable[Constraint],
        rigid: Iterable[str] = (),
        bind_lower: str = "max",
        lub_fallback: bool = False,
        record: bool = False,
        check: bool = False,
    ):
        self.order = order
        self.cs = list(constraints)
        self.rigid = frozenset(rigid)
        self.bind_lower = bind_lower
        self.lub_fallback = lub_fallback
        self.record = record
        self.check = check
        self.trace: list[Step] = []
        self.failure: tuple[Constraint, str] | None = None
        self.ambiguous = False

    def flexible(self, t: Type) -> bool:
        return isinstance(t, Param) and t.name not in self.rigid

    def _log(self, rule: str, before: Constraint, produced: Sequence[Constraint]) -> None:
        if self.record:
            self.trace.append(Step(rule, before, tuple(produced), tuple(self.cs)))

    def _lhs_measure(self) -> int:
        return sum(size(c.lhs) for c in self.cs if c.rel == LE)

    def _substitute(self, skip: int, name: str, value: Type) -> None:
        m = {name: value}
        for j, c in enumerate(self.cs):
            if j != skip and (name in pars(c.lhs) or name in pars(c.rhs)):
                self.cs[j] = Constraint(replace(c.lhs, m), replace(c.rhs, m), c.rel, c.origin)

    def _try_rule1(self) -> bool:
        for i, c in enumerate(self.cs):
            if c.rel != LE or not isinstance(c.lhs, Comp) or not isinstance(c.rhs, Comp):
                continue
            if not self.order.con_le(c.lhs.con, c.rhs.con):
                continue
            inj = self.order.injection(c.lhs.con, c.rhs.con)
            produced = [
                Constraint(c.lhs.args[k - 1], r, LE, c.origin) for k, r in zip(inj, c.rhs.args)
            ]
            self.cs[i:i + 1] = produced
            self._log("1", c, produced)
            return True
        return False

    def _try_rule2(self) -> bool:
        for i, c in enumerate(self.cs):
            if c.rel == LE and isinstance(c.lhs, Param) and c.lhs == c.rhs:
                del self.cs[i]
                self._log("2", c, ())
                return True
        return False

    def _try_rule3(self) -> bool:
        for i, c in enumerate(self.cs):
            if c.rel != LE or not self.flexible(c.lhs) or c.lhs == c.rhs:
                continue
            u = c.lhs.name
            if u in pars(c.rhs):
                continue
            eq = Constraint(c.lhs, c.rhs, EQ, c.origin)
            self.cs[i] = eq
            self._substitute(i, u, c.rhs)
            self._log("3", c, (eq,))
            return True
        return False

    def _lhs_pars(self) -> set[str]:
        out: set[str] = set()
        for c in self.cs:
            if c.rel == LE:
                out |= pars(c.lhs)
        return out

    def _try_rule4(self) -> bool:
        on_left = self._lhs_pars()
        for i, c in enumerate(self.cs):
            if c.rel != LE or isinstance(c.lhs, Param) or not self.flexible(c.rhs):
                continue
            u = c.rhs.name
            if u in on_left:
                continue
            top = self.order.max_type(c.lhs)
            if u in pars(top):
                continue
            eq = Constraint(c.rhs, top, EQ, c.origin)
            self.cs[i] = eq
            self._substitute(i, u, top)
            self._log("4", c, (eq,))
            return True
        return False

    def _try_lub(self) -> bool:
        on_left = self._lhs_pars()
        bounds: dict[str, list[int]] = {}
        for i, c in enumerate(self.cs):
            if c.rel == LE and self.flexible(c.rhs) and c.lhs != c.rhs:
                bounds.setdefault(c.rhs.name, []).append(i)
        # a parameter is still pending while it sits on a left side or has
        # lower bounds of its own; bounds mentioning it must wait
        pending = (on_left | set(bounds)) - self.rigid
        for u, idx in bounds.items():
            if u in on_left:
                continue
            lows = [self.cs[i].lhs for i in idx]
            # a single lower bound is its own least upper bound whatever its
            # parameters become; waiting here could deadlock on List(v) <= u
            if len(lows) > 1 and any(pars(lo) & pending for lo in lows):
                continue
            if u in pars(*lows):
                continue
            top = self.order.lub(lows)
            if top is None:
                top = self.order.max_type(lows[0])
                if not all(self.order.subtype_le(lo, top) for lo in lows):
                    continue  # no common upper bound: stays stuck
                self.ambiguous = True
                if not self.lub_fallback:
                    continue
            first = idx[0]
            before = self.cs[first]
            eq = Constraint(Param(u), top, EQ, before.origin)
            self.cs[first] = eq
            for j in reversed(idx[1:]):
                self._log("4", self.cs[j], ())
                del self.cs[j]
            first = self.cs.index(eq)
            self._substitute(first, u, top)
            self._log("4", before, (eq,))
            return True
        return False

    def run(self) -> bool:
        initial = check_form(self.cs, self.rigid) if self.check else None
        while True:
            before = self._lhs_measure() if self.check else 0
            progressed = (
                self._try_rule1()
                or self._try_rule2()
                or self._try_rule3()
                or (self._try_rule4() if self.bind_lower == "max" else self._try_lub())
            )
            if not progressed:
                break
            if self.check:
                after = self._lhs_measure()
                assert after < before, "termination measure did not decrease"
                form = check_form(self.cs, self.rigid)
                assert form.left_linear >= initial.left_linear, "rule application broke left-linearity"
                assert form.acyclic >= initial.acyclic, "rule application broke acyclicity"
        rest = [c for c in self.cs if c.rel == LE]
        if rest:
            self.failure = (rest[0], self._diagnose(rest[0]))
            return False
        return True

    def _diagnose(self, c: Constraint) -> str:
        if isinstance(c.lhs, Comp) and isinstance(c.rhs, Comp):
            return f"{c.lhs.con} is not below {c.rhs.con}"
        if self.flexible(c.lhs) and c.lhs.name in pars(c.rhs):
            return f"{c.lhs} occurs in {c.rhs}"
        if self.flexible(c.rhs) and c.rhs.name in pars(self.order.max_type(c.lhs)):
            return f"{c.rhs} occurs in the maximum of {c.lhs}"
        if isinstance(c.lhs, Param) and c.lhs.name in self.rigid:
            return f"fixed parameter {c.lhs} is only below itself"
        if isinstance(c.rhs, Param) and c.rhs.name in self.rigid:
            return f"fixed parameter {c.rhs} is only above itself"
        if self.ambiguous:
            return "lower bounds have no unique least upper bound; annotation required"
        return "no rule applies"

    def substitution(self) -> dict[str, Type]:
        return {c.lhs.name: c.rhs for c in self.cs if c.rel == EQ}


def solve(
    system: InequalitySystem,
    order: ConstructorOrder | Signature,
    *,
    trace: bool = False,
    check: bool = False,
) -> Solution | NoSolution:
    """Principal solution of a left-linear, acyclic system, or a witness of unsolvability.

    Rules are tried in priority order (1), (2), (3), (4), each scanning the
    constraints in their current order.  Parameters of the bound are rigid.
    Raises :class:`FormViolation` for systems that are not left-linear or
    contain a cycle through two or more constraints.
    """
    if isinstance(order, Signature):
        order = order.order
    rigid = system.rigid
    cs = system.constraints
    if not all(n <= 1 for n in _lhs_counts(cs, rigid).values()):
        raise FormViolation("system is not left-linear")
    if _has_cycle(cs, set(rigid), 2):
        raise FormViolation("system is cyclic")
    rw = _Rewriter(order, cs, rigid, "max", record=trace, check=check)
    if rw.run():
        return Solution(TypeSubst(rw.substitution()), True, rw.trace, rw.cs)
    c, why = rw.failure
    return NoSolution(c, why, rw.trace, rw.cs)


def solve_constraints(
    constraints: Iterable[Constraint],
    order: ConstructorOrder,
    rigid: Iterable[str],
    *,
    least: bool = True,
    lub_fallback: bool = False,
) -> tuple[dict[str, Type] | None, tuple[Constraint, str] | None]:
    """General entry used for typing checks with fixed variable types.

    Returns ``(substitution, None)`` or ``(None, (witness, reason))``.
    """
    rw = _Rewriter(order, constraints, rigid, "lub" if least else "max", lub_fallback)
    if rw.run():
        return rw.substitution(), None
    return None, rw.failure


# -- instance solutions ----------------------------------------------------------

def instance_solution(
    sol_t: Solution | TypeSubst,
    s: Term | Sequence[Term],
    t: Term | Sequence[Term],
    theta: dict[str, Term],
    sigma: Type | Sequence[Type],
    sig: Signature,
) -> Solution:
    """Extend a solution for the instance ``t`` to one for the linear pattern ``s``.

    Each variable ``x`` of ``s`` bound by ``theta`` at position ``p`` gets the
    type attached to position ``p`` in the system of ``t``, instantiated.
    """
    theta_t = sol_t.theta if isinstance(sol_t, Solution) else sol_t
    vec = not isinstance(s, (Var, App))
    ss = list(s) if vec else [s]
    ts = list(t) if vec else [t]
    if not is_linear(ss):
        raise PreconditionViolated("pattern is not linear")
    if len(ss) != len(ts):
        raise PreconditionViolated("pattern and instance differ in length")
    svars = set(term_vars(*ss))
    if any(x not in svars for x in theta):
        raise PreconditionViolated("substitution binds variables outside the pattern")
    if any(set(term_vars(v)) & set(theta) for v in theta.values()):
        raise PreconditionViolated("substitution is not idempotent")
    if [subst_term(x, theta) for x in ss] != ts:
        raise PreconditionViolated("pattern instantiated by the substitution is not the instance")
    ext = theta_t.as_dict()
    for k, (si, ti) in enumerate(zip(ss, ts), 1):
        prefix = (k,) if vec else ()
        for pos, sub in subterms(si):
            if not isinstance(sub, Var) or sub.name not in theta:
                continue
            full = prefix + pos
            inst = ti
            for i in pos:
                inst = inst.args[i - 1]
            if isinstance(inst, Var):
                attached: Type = Param(var_param(inst.name))
            else:
                _, attached = _copy_decl(sig, inst.fn, pos_label(full), len(inst.args))
            ext[var_param(sub.name)] = theta_t(attached)
    return Solution(TypeSubst(ext), principal=False)
