"""Moded resolution with a typing certificate carried through every step.

Each step double-matches the leftmost atom against a renamed clause head,
then rebuilds the resolvent's variable typing the way the subject-reduction
argument does: join the query typing with the clause typing instantiated to
the selected atom, adjust free type parameters so that both matchers become
ordered substitutions, and check the resulting certificate from scratch.
Any check that fails is reported as a subject-reduction violation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

from .checker import (
    Certificate,
    Failure,
    VariableTyping,
    _bounded_solve,
    check_atom,
    check_nicely_typed,
    check_term_bound,
    go_clause,
    nonprincipal_certificate,
    pred_decl,
    validate_certificate,
)
from .errors import SubredError
from .modes import ModedAtomView, check_nicely_moded, view
from .surface import (
    EQ_PRED,
    App,
    Atom,
    Clause,
    NameSupply,
    Program,
    Query,
    Signature,
    Term,
    Var,
    compose,
    format_term,
    rename_clause,
    subst_atom,
    subst_term,
    term_vars,
    vars_of,
)
from .typesys import Comp, Param, Type, match_type, pars, replace


class NotTyped(SubredError):
    """A substitution binding is not even a well-typed equation."""


class RuntimeModeError(SubredError):
    """Under strict checking: a head unifies with the selected atom but not by double matching."""


# -- matching ---------------------------------------------------------------------

@dataclass(frozen=True)
class NoMatch:
    reason: str

    def __bool__(self) -> bool:
        return False


def _match_into(p: Term, s: Term, b: dict[str, Term]) -> bool:
    if isinstance(p, Var):
        prev = b.get(p.name)
        if prev is None:
            b[p.name] = s
            return True
        return prev == s
    if not isinstance(s, App) or s.fn != p.fn or len(s.args) != len(p.args):
        return False
    return all(_match_into(x, y, b) for x, y in zip(p.args, s.args))


def match(pattern: Sequence[Term] | Term, subject: Sequence[Term] | Term) -> dict[str, Term] | NoMatch:
    """Minimal matcher: ``pattern`` instantiated by the result equals ``subject``."""
    if isinstance(pattern, (Var, App)):
        pattern, subject = [pattern], [subject]
    if len(pattern) != len(subject):
        return NoMatch("vectors differ in length")
    b: dict[str, Term] = {}
    for p, s in zip(pattern, subject):
        if not _match_into(p, s, b):
            return NoMatch(f"{format_term(p)} does not match {format_term(s)}")
    return {x: t for x, t in b.items() if t != Var(x)}


def unify(a: Sequence[Term], b: Sequence[Term]) -> dict[str, Term] | None:
    """Plain most general unifier with occurs check, or None."""
    theta: dict[str, Term] = {}
    work = list(zip(a, b))
    while work:
        s, t = work.pop()
        s, t = subst_term(s, theta), subst_term(t, theta)
        if s == t:
            continue
        if isinstance(t, Var) and not isinstance(s, Var):
            s, t = t, s
        if isinstance(s, Var):
            if s.name in term_vars(t):
                return None
            theta = compose(theta, {s.name: t})
            continue
        if s.fn != t.fn or len(s.args) != len(t.args):
            return None
        work.extend(zip(s.args, t.args))
    return theta


@dataclass(frozen=True)
class NotModed:
    cause: str  # "input", "disjoint" or "output"
    detail: str

    def __bool__(self) -> bool:
        return False

    def __str__(self) -> str:
        return f"not moded ({self.cause}): {self.detail}"


def moded_unify(selected: ModedAtomView, head: ModedAtomView) -> tuple[dict, dict] | NotModed:
    """Double matching: head inputs onto query inputs, then query outputs onto head outputs."""
    if selected.atom.pred != head.atom.pred:
        return NotModed("input", "different predicates")
    th1 = match(head.inputs, selected.inputs)
    if isinstance(th1, NoMatch):
        return NotModed("input", th1.reason)
    t1 = [subst_term(t, th1) for t in selected.outputs]
    v1 = [subst_term(v, th1) for v in head.outputs]
    shared = sorted(set(term_vars(*t1)) & set(term_vars(*v1)))
    if shared:
        return NotModed("disjoint", f"output sides share {', '.join(shared)}")
    th2 = match(t1, v1)
    if isinstance(th2, NoMatch):
        return NotModed("output", th2.reason)
    return th1, th2


# -- ordered substitutions -----------------------------------------------------------

@dataclass
class OrderedSubstCertificate:
    theta: dict[str, Term]
    typing: VariableTyping
    evidence: dict[str, Type] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return True

    def __str__(self) -> str:
        parts = [f"{x}/{format_term(t)}:{self.evidence[x]}<={self.typing[x]}" for x, t in self.theta.items()]
        return "{" + ", ".join(parts) + "}"


@dataclass(frozen=True)
class NotOrdered:
    var: str
    term: Term
    bound: Type
    message: str

    def __bool__(self) -> bool:
        return False

    def __str__(self) -> str:
        return f"not ordered at {self.var}/{format_term(self.term)}: {self.message}"


def certify_ordered(
    theta: Mapping[str, Term], U: Mapping[str, Type], sig: Signature, check_typed: bool = True
) -> OrderedSubstCertificate | NotOrdered:
    """Evidence that each binding ``x/t`` has ``t`` typed below ``U(x)``."""
    U = VariableTyping(U)
    cert = OrderedSubstCertificate(dict(theta), U)
    for x, t in theta.items():
        if check_typed:
            eq = check_atom(U, Atom(EQ_PRED, (Var(x), t)), False, sig)
            if isinstance(eq, Failure):
                raise NotTyped(f"{x} = {format_term(t)} is not typed: {eq.message}")
        j = check_term_bound(U, t, U[x], sig)
        if isinstance(j, Failure):
            return NotOrdered(x, t, U[x], j.message)
        cert.evidence[x] = j.derived
    return cert


# -- derivations ----------------------------------------------------------------------

@dataclass
class DerivationState:
    atoms: tuple[Atom, ...]
    cert: Certificate | None
    # bindings of every step so far, applied in order to read off answers
    answer: tuple[dict[str, Term], ...] = ()
    depth: int = 0
    bound: frozenset[str] = frozenset()

    @property
    def query(self) -> Query:
        return Query(self.atoms)


@dataclass
class StepRecord:
    index: int
    depth: int
    selected: Atom
    clause: int | None
    theta1: dict[str, Term]
    theta2: dict[str, Term]
    resolvent: tuple[Atom, ...]
    status: str
    typing: VariableTyping | None = None
    ordered: tuple = ()
    detail: str = ""

    def to_line(self) -> str:
        def sub(t):
            return "{" + ", ".join(f"{x}/{format_term(v)}" for x, v in sorted(t.items())) + "}"

        res = ", ".join(map(str, self.resolvent)) if self.resolvent else "□"
        line = (
            f"step {self.index}: {self.selected} with clause {self.clause} "
            f"theta1={sub(self.theta1)} theta2={sub(self.theta2)} -> {res}  [{self.status}]"
        )
        if self.typing is not None:
            line += f" typing {self.typing}"
        if self.detail:
            line += f"\n  {self.detail}"
        return line

    def to_json(self) -> dict:
        return {
            "step": self.index,
            "depth": self.depth,
            "selected": str(self.selected),
            "clause": self.clause,
            "theta1": {x: format_term(t) for x, t in sorted(self.theta1.items())},
            "theta2": {x: format_term(t) for x, t in sorted(self.theta2.items())},
            "resolvent": [str(a) for a in self.resolvent],
            "status": self.status,
            "typing": None if self.typing is None else {x: str(t) for x, t in sorted(self.typing.items())},
            "detail": self.detail,
        }


@dataclass
class SubjectReductionViolation:
    record: StepRecord
    message: str

    def __bool__(self) -> bool:
        return False

    def __str__(self) -> str:
        res = ", ".join(map(str, self.record.resolvent)) or "□"
        return f"subject reduction violated at resolvent {res}: {self.message}"


@dataclass(frozen=True)
class TooLarge:
    record: StepRecord

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class Stuck:
    selected: Atom

    def __bool__(self) -> bool:
        return False


@dataclass
class Outcome:
    status: str  # success, failure, timeout, limit, violation, ill-typed
    answer: dict[str, Term] | None = None
    steps: int = 0
    trace: list[StepRecord] = field(default_factory=list)
    violation: SubjectReductionViolation | None = None
    failure: Failure | None = None

    @property
    def ok(self) -> bool:
        return self.status == "success"


@dataclass
class Options:
    strict: bool = False
    check: bool = True
    require_principal: bool = True
    # caps the nodes of a resolvent's terms and of its variable typing
    max_term_size: int | None = None


def _rename_cert_params(cert: Certificate, keep: set[str], supply: NameSupply) -> Certificate:
    ren = {p: Param(supply.fresh_param(p)) for p in sorted(cert.params() - keep)}
    return cert.apply(ren)


def _fresh_clause(clause: Clause, avoid: set[str], supply: NameSupply) -> tuple[Clause, dict[str, Term]]:
    ren: dict[str, Term] = {}
    for v in sorted(vars_of(clause)):
        new = supply.fresh(v)
        while new in avoid:
            new = supply.fresh(v)
        ren[v] = Var(new)
    return rename_clause(clause, ren), ren


class Engine:
    """Leftmost selection, clause-order depth-first search, certified steps."""

    def __init__(
        self,
        program: Program,
        certs: Mapping[int, Certificate | None] | None = None,
        supply: NameSupply | None = None,
        options: Options | None = None,
    ):
        self.program = program
        self.sig = program.sig
        self.supply = supply or NameSupply()
        self.options = options or Options()
        self.certs = dict(certs) if certs is not None else {}
        self.steps = 0
        self.trace: list[StepRecord] = []

    # one step against one clause

    def try_clause(
        self, state: DerivationState, clause: Clause
    ) -> DerivationState | NotModed | SubjectReductionViolation:
        sig = self.sig
        sel = state.atoms[0]
        avoid = vars_of(*state.atoms) | state.bound
        fresh, ren = _fresh_clause(clause, avoid, self.supply)
        mu = moded_unify(view(sig, sel), view(sig, fresh.head))
        if isinstance(mu, NotModed):
            if self.options.strict and unify(sel.args, fresh.head.args) is not None:
                raise RuntimeModeError(
                    f"{sel} unifies with the head of clause {clause.ident} but not by double matching ({mu})"
                )
            return mu
        th1, th2 = mu
        theta = compose(th1, th2)
        resolvent = tuple(subst_atom(a, theta) for a in fresh.body + state.atoms[1:])
        self.steps += 1
        record = StepRecord(
            self.steps, state.depth, sel, clause.ident, th1, th2, resolvent, "unchecked"
        )
        self.trace.append(record)
        new = DerivationState(
            resolvent, None, state.answer + (theta,), state.depth + 1, state.bound | set(theta)
        )
        limit = self.options.max_term_size
        if limit is not None and _too_big(resolvent, limit):
            record.status = "too-large"
            return TooLarge(record)
        if not self.options.check:
            return new
        ccert = self.certs.get(clause.ident)
        if state.cert is None or ccert is None:
            got = check_nicely_typed(Query(resolvent), sig, supply=self.supply)
            if isinstance(got, Failure):
                record.status = "violation"
                record.detail = f"resolvent is not nicely typed: {got.message}"
                return SubjectReductionViolation(record, record.detail)
            record.status = "rechecked"
            record.typing = got.typing
            new.cert = got
            return new
        out = self._certified(state, clause, ccert, fresh, ren, th1, th2, resolvent, record)
        if isinstance(out, (SubjectReductionViolation, TooLarge)):
            return out
        new.cert = out
        return new

    def _certified(self, state, clause, ccert, fresh, ren, th1, th2, resolvent, record):
        sig = self.sig
        qcert = state.cert
        sel = state.atoms[0]
        decl = pred_decl(sig, sel)

        def violation(msg: str) -> SubjectReductionViolation:
            record.status = "violation"
            record.detail = msg
            return SubjectReductionViolation(record, msg)

        # clause certificate: fresh variables and fresh type parameters
        c = _rename_cert_params(ccert, decl.params, self.supply)
        c_typing = VariableTyping({ren[x].name if x in ren else x: t for x, t in c.typing.items()})
        inst_sel = qcert.instances[1]
        Th: dict[str, Type] = {}
        for d, t in zip(decl.arg_types, inst_sel):
            if match_type(d, t, Th) is None:
                return violation(f"recorded instance {inst_sel} of {sel.pred} is not an instance of its declaration")
        clause_side = c.params() - decl.params
        c_typing = c_typing.apply(Th)
        c_insts = [tuple(replace(t, Th) for t in inst) for inst in c.instances[1:]]
        try:
            U = VariableTyping(qcert.typing).union(c_typing)
        except ValueError as exc:
            return violation(str(exc))
        limit = self.options.max_term_size
        if limit is not None and _types_too_big(U.values(), limit):
            record.status = "too-large"
            return TooLarge(record)
        # first matcher: adjust clause-side parameters
        if th1:
            xs = list(th1)
            r = _bounded_solve(U, [th1[x] for x in xs], [U[x] for x in xs], sig, flexible=clause_side)
            if not r.ok:
                return violation(f"theta1 is not ordered: {r.witness} ({r.reason})")
            U = U.apply(r.subst)
            if limit is not None and _types_too_big(U.values(), limit):
                record.status = "too-large"
                return TooLarge(record)
            c_insts = [tuple(replace(t, r.subst) for t in inst) for inst in c_insts]
        o1 = certify_ordered(th1, U, sig, check_typed=False)
        if isinstance(o1, NotOrdered):
            return violation(f"theta1 {o1}")
        # second matcher: adjust query-side free parameters
        q_insts = [tuple(inst) for inst in qcert.instances[2:]]
        if th2:
            xs = list(th2)
            fixed = pars(*inst_sel)
            flex = pars(*(U[x] for x in xs)) - fixed
            r = _bounded_solve(U, [th2[x] for x in xs], [U[x] for x in xs], sig, flexible=flex)
            if not r.ok:
                return violation(f"theta2 is not ordered: {r.witness} ({r.reason})")
            U = U.apply(r.subst)
            if limit is not None and _types_too_big(U.values(), limit):
                record.status = "too-large"
                return TooLarge(record)
            c_insts = [tuple(replace(t, r.subst) for t in inst) for inst in c_insts]
            q_insts = [tuple(replace(t, r.subst) for t in inst) for inst in q_insts]
        o2 = certify_ordered(th2, U, sig, check_typed=False)
        if isinstance(o2, NotOrdered):
            return violation(f"theta2 {o2}")
        record.ordered = (o1, o2)
        mode = check_nicely_moded(resolvent, sig)
        if not mode.ok:
            return violation(f"resolvent is not nicely moded: {mode.problem}")
        cert = Certificate(
            go_clause(resolvent),
            U.restrict(vars_of(*resolvent)),
            ((),) + tuple(c_insts) + tuple(q_insts),
            principal=qcert.principal,
        )
        fail = validate_certificate(cert, sig, require_principal=self.options.require_principal)
        if fail is not None:
            return violation(f"certificate of the resolvent fails: {fail.message}")
        record.status = "certified"
        record.typing = cert.typing
        return cert

    def resolve_step(self, state: DerivationState):
        """First applicable clause in program order (no backtracking)."""
        if not state.atoms:
            return state
        for clause in self.program.clauses_for(state.atoms[0].pred):
            out = self.try_clause(state, clause)
            if not isinstance(out, NotModed):
                return out
        return Stuck(state.atoms[0])

    def run(self, state: DerivationState, max_steps: int = 1000) -> Outcome:
        query_vars = list(dict.fromkeys(term_vars(*(t for a in state.atoms for t in a.args))))

        def alternatives(st: DerivationState) -> Iterator[Clause]:
            return iter(self.program.clauses_for(st.atoms[0].pred)) if st.atoms else iter(())

        stack: list[tuple[DerivationState, Iterator[Clause]]] = [(state, alternatives(state))]
        while stack:
            st, it = stack[-1]
            if not st.atoms:
                ans = {x: _resolve(Var(x), st.answer) for x in query_vars}
                return Outcome("success", {x: t for x, t in ans.items() if t != Var(x)}, self.steps, self.trace)
            clause = next(it, None)
            if clause is None:
                stack.pop()
                continue
            if self.steps >= max_steps:
                return Outcome("timeout", None, self.steps, self.trace)
            out = self.try_clause(st, clause)
            if isinstance(out, NotModed):
                continue
            if isinstance(out, TooLarge):
                return Outcome("limit", None, self.steps, self.trace)
            if isinstance(out, SubjectReductionViolation):
                return Outcome("violation", None, self.steps, self.trace, out)
            stack.append((out, alternatives(out)))
        return Outcome("failure", None, self.steps, self.trace)


def _resolve(t: Term, chain: Sequence[Mapping[str, Term]]) -> Term:
    for theta in chain:
        t = subst_term(t, theta)
    return t


def _too_big(atoms: Sequence[Atom], limit: int) -> bool:
    n = 0
    stack = [t for a in atoms for t in a.args]
    while stack:
        t = stack.pop()
        n += 1
        if n > limit:
            return True
        if isinstance(t, App):
            stack.extend(t.args)
    return False


def _types_too_big(types, limit: int) -> bool:
    n = 0
    stack = list(types)
    while stack:
        t = stack.pop()
        n += 1
        if n > limit:
            return True
        if isinstance(t, Comp):
            stack.extend(t.args)
    return False


def prepare(
    program: Program,
    query: Query,
    *,
    unsafe: bool = False,
    supply: NameSupply | None = None,
    require_principal: bool = True,
) -> tuple[dict[int, Certificate | None], Certificate | None, Failure | None]:
    """Static checks: certificates for every clause and the query.

    Returns ``(clause_certs, query_cert, failure)``.  Without ``unsafe`` the
    first failing check is returned and nothing should be run.
    """
    supply = supply or NameSupply()
    sig = program.sig
    certs: dict[int, Certificate | None] = {}
    for c in program.clauses:
        got = check_nicely_typed(c, sig, supply=supply, require_principal=require_principal)
        if isinstance(got, Failure):
            if not unsafe:
                return certs, None, Failure(got.condition, f"clause {c.ident} ({c}): {got.message}", got.atom, got.arg, got.witness)
            got = nonprincipal_certificate(c, sig, supply)
        certs[c.ident] = got
    got = check_nicely_typed(query, sig, supply=supply, require_principal=require_principal)
    if isinstance(got, Failure):
        if not unsafe:
            return certs, None, got
        got = nonprincipal_certificate(query, sig, supply)
    if got is not None:
        # query parameters get fresh names so clause copies never meet them
        got = _rename_cert_params(got, set(), supply)
    return certs, got, None


def run(
    program: Program,
    query: Query,
    max_steps: int = 1000,
    *,
    unsafe: bool = False,
    strict: bool = False,
    supply: NameSupply | None = None,
    require_principal: bool = True,
) -> Outcome:
    supply = supply or NameSupply()
    certs, qcert, fail = prepare(
        program, query, unsafe=unsafe, supply=supply, require_principal=require_principal
    )
    if fail is not None:
        return Outcome("ill-typed", failure=fail)
    eng = Engine(program, certs, supply, Options(strict=strict, require_principal=True))
    return eng.run(DerivationState(query.atoms, qcert), max_steps)


def trace_jsonl(outcome: Outcome) -> str:
    return "\n".join(json.dumps(r.to_json(), sort_keys=True) for r in outcome.trace)
