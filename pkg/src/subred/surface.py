"""Concrete syntax, parser, printer and in-memory program representation.

A program file is a sequence of period-terminated items::

    kind Int/0.  kind Real/0.  kind List/1.  kind Anylist/0.
    sub Int < Real via [].
    sub List < Anylist via [].
    func Nil : -> List(u).
    func Cons : u, List(u) -> List(u).
    pred Fact : Int, Int mode (in, out).
    Fact(3, 6).
    Go(x) :- Fact(3, x) where x : Int.
    ?- Fact(3, x).

Identifiers starting with an upper-case letter name constructors, functions
and predicates; lower-case (or ``_``) identifiers are parameters inside types
and variables inside terms.  ``%`` starts a line comment.  Integer literals
are constants of type ``Int`` and decimal literals constants of type ``Real``;
a literal is legal only when its kind is declared.  ``[a, b | t]`` is
sugar for ``Cons``/``Nil``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .errors import (
    ArityMismatch,
    NonFlatResult,
    ParseError,
    SignatureError,
    TransparencyViolation,
    UndeclaredSymbol,
)
from .typesys import Comp, ConstructorOrder, Param, Type, is_flat, pars

IN, OUT = "in", "out"
EQ_PRED = "="


# -- terms, atoms, clauses -----------------------------------------------------

@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class App:
    fn: str
    args: tuple[Term, ...] = ()

    def __str__(self) -> str:
        return format_term(self)


Term = Var | App


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple[Term, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.pred
        return f"{self.pred}({', '.join(format_term(a) for a in self.args)})"


@dataclass(frozen=True)
class Clause:
    head: Atom
    body: tuple[Atom, ...] = ()
    annotations: tuple[tuple[str, Type], ...] = ()
    loc: tuple[int, int] | None = field(default=None, compare=False)
    ident: int | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return format_clause(self)

    @property
    def atoms(self) -> tuple[Atom, ...]:
        return (self.head, *self.body)


@dataclass(frozen=True)
class Query:
    atoms: tuple[Atom, ...] = ()
    annotations: tuple[tuple[str, Type], ...] = ()
    loc: tuple[int, int] | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return ", ".join(map(str, self.atoms)) if self.atoms else "□"


@dataclass(frozen=True)
class FuncDecl:
    name: str
    arg_types: tuple[Type, ...]
    result: Type

    @property
    def arity(self) -> int:
        return len(self.arg_types)


@dataclass(frozen=True)
class PredDecl:
    name: str
    arg_types: tuple[Type, ...]
    modes: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.arg_types)

    @property
    def params(self) -> set[str]:
        return pars(*self.arg_types)


_INT_RE = re.compile(r"\d+\Z")
_REAL_RE = re.compile(r"\d+\.\d+\Z")


class Signature:
    """Constructor order plus function and predicate declarations."""

    def __init__(
        self,
        order: ConstructorOrder,
        funcs: Mapping[str, FuncDecl] = (),
        preds: Mapping[str, PredDecl] = (),
    ):
        self.order = order
        self.funcs: dict[str, FuncDecl] = dict(funcs)
        self.preds: dict[str, PredDecl] = dict(preds)
        for f in self.funcs.values():
            validate_func(order, f)
        for p in self.preds.values():
            validate_pred(order, p)
        # reserved equality; never callable from clauses
        self.eq = PredDecl(EQ_PRED, (Param("u"), Param("u")), (IN, IN))

    def func(self, name: str) -> FuncDecl:
        decl = self.funcs.get(name)
        if decl is not None:
            return decl
        if _INT_RE.match(name) and "Int" in self.order.arities:
            return FuncDecl(name, (), Comp("Int"))
        if _REAL_RE.match(name) and "Real" in self.order.arities:
            return FuncDecl(name, (), Comp("Real"))
        raise UndeclaredSymbol(f"undeclared function {name}")

    def pred(self, name: str) -> PredDecl:
        if name == EQ_PRED:
            return self.eq
        try:
            return self.preds[name]
        except KeyError:
            raise UndeclaredSymbol(f"undeclared predicate {name}") from None


def validate_type(order: ConstructorOrder, t: Type, what: str) -> None:
    if isinstance(t, Param):
        return
    if t.con not in order.arities:
        raise UndeclaredSymbol(f"undeclared constructor {t.con} in {what}")
    if len(t.args) != order.arities[t.con]:
        raise ArityMismatch(
            f"constructor {t.con} has arity {order.arities[t.con]}, applied to {len(t.args)} in {what}"
        )
    for a in t.args:
        validate_type(order, a, what)


def validate_func(order: ConstructorOrder, f: FuncDecl) -> None:
    for t in (*f.arg_types, f.result):
        validate_type(order, t, f"declaration of {f.name}")
    if not is_flat(f.result):
        raise NonFlatResult(f"result type {f.result} of {f.name} is not a flat type")
    missing = pars(*f.arg_types) - pars(f.result)
    if missing:
        raise TransparencyViolation(
            f"function {f.name}: parameter {sorted(missing)[0]} of the argument types "
            f"does not occur in the result type {f.result}"
        )


def validate_pred(order: ConstructorOrder, p: PredDecl) -> None:
    for t in p.arg_types:
        validate_type(order, t, f"declaration of {p.name}")
    if len(p.modes) != len(p.arg_types):
        raise ArityMismatch(f"predicate {p.name}: mode has {len(p.modes)} positions, arity is {len(p.arg_types)}")
    bad = [m for m in p.modes if m not in (IN, OUT)]
    if bad:
        raise SignatureError(f"predicate {p.name}: unknown mode {bad[0]}")


@dataclass
class Program:
    sig: Signature
    clauses: list[Clause]
    queries: list[Query] = field(default_factory=list)

    def clauses_for(self, pred: str) -> list[Clause]:
        return [c for c in self.clauses if c.head.pred == pred]


# -- term utilities ------------------------------------------------------------

def term_vars(*terms: Term) -> list[str]:
    """Variables in left-to-right order of occurrence, with repetitions."""
    out: list[str] = []
    stack = list(reversed(terms))
    while stack:
        t = stack.pop()
        if isinstance(t, Var):
            out.append(t.name)
        else:
            stack.extend(reversed(t.args))
    return out


def vars_of(*objs: Term | Atom | Query | Clause) -> set[str]:
    out: set[str] = set()
    for o in objs:
        if isinstance(o, (Var, App)):
            out.update(term_vars(o))
        elif isinstance(o, Atom):
            out.update(term_vars(*o.args))
        elif isinstance(o, Query):
            for a in o.atoms:
                out.update(term_vars(*a.args))
        elif isinstance(o, Clause):
            for a in o.atoms:
                out.update(term_vars(*a.args))
    return out


def is_linear(terms: Iterable[Term]) -> bool:
    vs = term_vars(*terms)
    return len(vs) == len(set(vs))


def subst_term(t: Term, theta: Mapping[str, Term]) -> Term:
    if isinstance(t, Var):
        return theta.get(t.name, t)
    if not t.args:
        return t
    return App(t.fn, tuple(subst_term(a, theta) for a in t.args))


def subst_atom(a: Atom, theta: Mapping[str, Term]) -> Atom:
    return Atom(a.pred, tuple(subst_term(t, theta) for t in a.args))


def compose(theta1: Mapping[str, Term], theta2: Mapping[str, Term]) -> dict[str, Term]:
    """Substitution equal to applying ``theta1`` then ``theta2``."""
    out = {x: subst_term(t, theta2) for x, t in theta1.items()}
    for x, t in theta2.items():
        out.setdefault(x, t)
    return {x: t for x, t in out.items() if t != Var(x)}


def subterms(t: Term, pos: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], Term]]:
    yield pos, t
    if isinstance(t, App):
        for i, a in enumerate(t.args, 1):
            yield from subterms(a, pos + (i,))


class NameSupply:
    """Monotone counter for fresh variable and parameter names."""

    def __init__(self, start: int = 0):
        self.next = start

    def fresh(self, base: str) -> str:
        self.next += 1
        return f"{_strip_suffix(base)}_{self.next}"

    def fresh_param(self, base: str) -> str:
        """A parameter name no parsed program can contain (``base#N``)."""
        self.next += 1
        stem = re.split(r"[#^]", base, maxsplit=1)[0] or "u"
        return f"{stem}#{self.next}"


_SUFFIX = re.compile(r"_\d+\Z")


def _strip_suffix(name: str) -> str:
    stripped = _SUFFIX.sub("", name)
    return stripped or "v"


def rename_apart(clause: Clause, avoid: Iterable[str], supply: NameSupply | None = None) -> Clause:
    """Return a variant of ``clause`` with no variable in ``avoid``.

    Only variables that clash are renamed; the renaming is a bijection and the
    fresh names also avoid the clause's own variables, so nothing is captured.
    """
    supply = supply or NameSupply()
    avoid = set(avoid)
    own = sorted(vars_of(clause))
    taken = avoid | set(own)
    ren: dict[str, Term] = {}
    for v in own:
        if v not in avoid:
            continue
        new = supply.fresh(v)
        while new in taken:
            new = supply.fresh(v)
        taken.add(new)
        ren[v] = Var(new)
    return rename_clause(clause, ren)


def rename_clause(clause: Clause, ren: Mapping[str, Term]) -> Clause:
    return Clause(
        subst_atom(clause.head, ren),
        tuple(subst_atom(b, ren) for b in clause.body),
        tuple((ren[x].name if x in ren else x, t) for x, t in clause.annotations),
        clause.loc,
        clause.ident,
    )


def fresh_variant(clause: Clause, supply: NameSupply) -> tuple[Clause, dict[str, Term]]:
    """Rename every variable of ``clause`` to a fresh name from ``supply``."""
    ren = {v: Var(supply.fresh(v)) for v in sorted(vars_of(clause))}
    return rename_clause(clause, ren), ren


# -- printing ------------------------------------------------------------------

def format_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if t.fn == "Cons" and len(t.args) == 2:
        items = []
        while isinstance(t, App) and t.fn == "Cons" and len(t.args) == 2:
            items.append(format_term(t.args[0]))
            t = t.args[1]
        if isinstance(t, App) and t.fn == "Nil" and not t.args:
            return "[" + ", ".join(items) + "]"
        return "[" + ", ".join(items) + " | " + format_term(t) + "]"
    if t.fn == "Nil" and not t.args:
        return "[]"
    if not t.args:
        return t.fn
    return f"{t.fn}({', '.join(format_term(a) for a in t.args)})"


def _format_where(annotations) -> str:
    if not annotations:
        return ""
    return " where " + ", ".join(f"{x} : {t}" for x, t in annotations)


def format_clause(c: Clause) -> str:
    s = str(c.head)
    if c.body:
        s += " :- " + ", ".join(map(str, c.body))
    return s + _format_where(c.annotations) + "."


def format_query(q: Query) -> str:
    return "?- " + ", ".join(map(str, q.atoms)) + _format_where(q.annotations) + "."


def format_program(prog: Program) -> str:
    order = prog.sig.order
    lines = [f"kind {k}/{m}." for k, m in order.arities.items()]
    for lo, hi, inj in order.edges:
        lines.append(f"sub {lo} < {hi} via [{', '.join(map(str, inj))}].")
    for f in prog.sig.funcs.values():
        lines.append(f"func {f.name} : {', '.join(map(str, f.arg_types))} -> {f.result}.".replace(":  ->", ": ->"))
    for p in prog.sig.preds.values():
        lines.append(
            f"pred {p.name} : {', '.join(map(str, p.arg_types))} mode ({', '.join(p.modes)})."
        )
    lines.extend(format_clause(c) for c in prog.clauses)
    lines.extend(format_query(q) for q in prog.queries)
    return "\n".join(lines) + "\n"


# -- lexing and parsing --------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|%[^\n]*)
  | (?P<num>\d+\.\d+|\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<punct>:-|\?-|->|[()\[\],.|:</=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    loc: tuple[int, int]


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, col0 = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        loc = (line, pos - col0 + 1)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", loc)
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(Token(kind, chunk, loc))
        nl = chunk.count("\n")
        if nl:
            line += nl
            col0 = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", (line, pos - col0 + 1)))
    return tokens


def _is_upper(name: str) -> bool:
    return name[0].isupper()


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.anon = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("punct", "ident") and t.text in texts

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"unexpected {self.describe()}", (repr(text),))
        return self.advance()

    def describe(self) -> str:
        return "end of input" if self.tok.kind == "eof" else repr(self.tok.text)

    def fail(self, msg: str, expected: tuple[str, ...] = ()):
        raise ParseError(msg, self.tok.loc, expected)

    def ident(self, upper: bool | None = None, what: str = "identifier") -> Token:
        t = self.tok
        if t.kind != "ident" or (upper is not None and _is_upper(t.text) != upper):
            self.fail(f"unexpected {self.describe()}", (what,))
        return self.advance()

    def integer(self) -> int:
        t = self.tok
        if t.kind != "num" or "." in t.text:
            self.fail(f"unexpected {self.describe()}", ("integer",))
        self.advance()
        return int(t.text)

    # types
    def type_(self) -> Type:
        t = self.ident(what="type")
        if not _is_upper(t.text):
            return Param(t.text)
        args: list[Type] = []
        if self.at("("):
            self.advance()
            args.append(self.type_())
            while self.at(","):
                self.advance()
                args.append(self.type_())
            self.expect(")")
        return Comp(t.text, tuple(args))

    def type_list(self, stop: tuple[str, ...]) -> list[Type]:
        if self.at(*stop):
            return []
        out = [self.type_()]
        while self.at(","):
            self.advance()
            out.append(self.type_())
        return out

    # terms
    def term(self) -> Term:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return App(t.text)
        if self.at("["):
            return self.list_term()
        if t.kind != "ident":
            self.fail(f"unexpected {self.describe()}", ("term",))
        self.advance()
        if not _is_upper(t.text):
            if t.text == "_":
                self.anon += 1
                return Var(f"_{self.anon}")
            return Var(t.text)
        return App(t.text, tuple(self.arg_list()))

    def arg_list(self) -> list[Term]:
        if not self.at("("):
            return []
        self.advance()
        if self.at(")"):
            self.advance()
            return []
        args = [self.term()]
        while self.at(","):
            self.advance()
            args.append(self.term())
        self.expect(")")
        return args

    def list_term(self) -> Term:
        self.expect("[")
        items: list[Term] = []
        tail: Term = App("Nil")
        if not self.at("]"):
            items.append(self.term())
            while self.at(","):
                self.advance()
                items.append(self.term())
            if self.at("|"):
                self.advance()
                tail = self.term()
        self.expect("]")
        for it in reversed(items):
            tail = App("Cons", (it, tail))
        return tail

    def atom(self) -> Atom:
        if self.at("="):
            self.fail("the equality predicate is reserved and cannot be called")
        t = self.ident(upper=True, what="predicate name")
        args = tuple(self.arg_list())
        if self.at("="):
            self.fail("the equality predicate is reserved and cannot be called")
        return Atom(t.text, args)

    def atom_list(self) -> list[Atom]:
        if self.at(".", "where"):
            return []
        out = [self.atom()]
        while self.at(","):
            self.advance()
            out.append(self.atom())
        return out

    def where(self) -> tuple[tuple[str, Type], ...]:
        if not self.at("where"):
            return ()
        self.advance()
        out = []
        while True:
            v = self.ident(upper=False, what="variable")
            self.expect(":")
            out.append((v.text, self.type_()))
            if not self.at(","):
                break
            self.advance()
        return tuple(out)

    def program(self):
        kinds: dict[str, int] = {}
        edges: list[tuple[str, str, tuple[int, ...], tuple[int, int]]] = []
        funcs: list[tuple[FuncDecl, tuple[int, int]]] = []
        preds: list[tuple[PredDecl, tuple[int, int]]] = []
        clauses: list[Clause] = []
        queries: list[Query] = []
        while self.tok.kind != "eof":
            start = self.tok
            loc = start.loc
            if self.at("kind"):
                self.advance()
                name = self.ident(upper=True, what="constructor name").text
                self.expect("/")
                arity = self.integer()
                if name in kinds:
                    raise SignatureError(f"constructor {name} declared twice", loc)
                kinds[name] = arity
            elif self.at("sub"):
                self.advance()
                lo = self.ident(upper=True, what="constructor name").text
                self.expect("<")
                hi = self.ident(upper=True, what="constructor name").text
                self.expect("via")
                self.expect("[")
                inj: list[int] = []
                if not self.at("]"):
                    inj.append(self.integer())
                    while self.at(","):
                        self.advance()
                        inj.append(self.integer())
                self.expect("]")
                edges.append((lo, hi, tuple(inj), loc))
            elif self.at("func"):
                self.advance()
                name = self.ident(upper=True, what="function name").text
                self.expect(":")
                args = self.type_list(("->",))
                self.expect("->")
                res = self.type_()
                funcs.append((FuncDecl(name, tuple(args), res), loc))
            elif self.at("pred"):
                self.advance()
                name = self.ident(upper=True, what="predicate name").text
                self.expect(":")
                args = self.type_list((".", "mode"))
                modes: list[str] = [IN] * len(args)
                if self.at("mode"):
                    self.advance()
                    self.expect("(")
                    modes = []
                    if not self.at(")"):
                        modes.append(self.mode())
                        while self.at(","):
                            self.advance()
                            modes.append(self.mode())
                    self.expect(")")
                preds.append((PredDecl(name, tuple(args), tuple(modes)), loc))
            elif self.at("?-"):
                self.advance()
                atoms = self.atom_list()
                ann = self.where()
                queries.append(Query(tuple(atoms), ann, loc))
            else:
                head = self.atom()
                body: list[Atom] = []
                if self.at(":-"):
                    self.advance()
                    body = self.atom_list()
                ann = self.where()
                clauses.append(Clause(head, tuple(body), ann, loc, len(clauses) + 1))
            self.expect(".")
        return kinds, edges, funcs, preds, clauses, queries

    def mode(self) -> str:
        t = self.ident(upper=False, what="in or out")
        if t.text not in (IN, OUT):
            raise ParseError(f"unknown mode {t.text!r}", t.loc, ("in", "out"))
        return t.text


def _with_loc(exc: SignatureError, loc) -> SignatureError:
    if exc.loc is None:
        exc.loc = loc
    return exc


def parse_program(text: str) -> Program:
    """Parse and validate a program.

    Raises :class:`ParseError` for syntax errors and a :class:`SignatureError`
    subclass for ill-formed declarations or undeclared symbols.
    """
    p = _Parser(text)
    kinds, edges, funcs, preds, clauses, queries = p.program()
    edge_loc = {(lo, hi): loc for lo, hi, _, loc in edges}
    try:
        order = ConstructorOrder(kinds, [(lo, hi, inj) for lo, hi, inj, _ in edges])
    except SignatureError as exc:
        # point at the first edge named in the message, if any
        for (lo, hi), loc in edge_loc.items():
            if lo in exc.message and hi in exc.message:
                raise _with_loc(exc, loc)
        raise
    fdecls: dict[str, FuncDecl] = {}
    for f, loc in funcs:
        if f.name in fdecls:
            raise SignatureError(f"function {f.name} declared twice", loc)
        try:
            validate_func(order, f)
        except SignatureError as exc:
            raise _with_loc(exc, loc)
        fdecls[f.name] = f
    pdecls: dict[str, PredDecl] = {}
    for pd, loc in preds:
        if pd.name in pdecls:
            raise SignatureError(f"predicate {pd.name} declared twice", loc)
        try:
            validate_pred(order, pd)
        except SignatureError as exc:
            raise _with_loc(exc, loc)
        pdecls[pd.name] = pd
    sig = Signature(order, fdecls, pdecls)
    for c in clauses:
        for a in c.atoms:
            check_atom_syntax(sig, a, c.loc)
        _check_annotations(sig, c.annotations, c.loc)
    for q in queries:
        for a in q.atoms:
            check_atom_syntax(sig, a, q.loc)
        _check_annotations(sig, q.annotations, q.loc)
    return Program(sig, clauses, queries)


def _check_annotations(sig: Signature, ann, loc) -> None:
    for x, t in ann:
        try:
            validate_type(sig.order, t, f"annotation of {x}")
        except SignatureError as exc:
            raise _with_loc(exc, loc)


def check_atom_syntax(sig: Signature, a: Atom, loc=None) -> None:
    try:
        decl = sig.pred(a.pred)
    except SignatureError as exc:
        raise _with_loc(exc, loc)
    if decl.arity != len(a.args):
        raise ArityMismatch(f"predicate {a.pred}/{decl.arity} used with {len(a.args)} arguments", loc)
    for t in a.args:
        check_term_syntax(sig, t, loc)


def check_term_syntax(sig: Signature, t: Term, loc=None) -> None:
    if isinstance(t, Var):
        return
    try:
        decl = sig.func(t.fn)
    except SignatureError as exc:
        raise _with_loc(exc, loc)
    if decl.arity != len(t.args):
        raise ArityMismatch(f"function {t.fn}/{decl.arity} used with {len(t.args)} arguments", loc)
    for a in t.args:
        check_term_syntax(sig, a, loc)


def parse_term(text: str, sig: Signature | None = None) -> Term:
    p = _Parser(text)
    t = p.term()
    if p.tok.kind != "eof":
        p.fail(f"unexpected {p.describe()} after term", ("end of input",))
    if sig is not None:
        check_term_syntax(sig, t)
    return t


def parse_type(text: str, sig: Signature | None = None) -> Type:
    p = _Parser(text)
    t = p.type_()
    if p.tok.kind != "eof":
        p.fail(f"unexpected {p.describe()} after type", ("end of input",))
    if sig is not None:
        validate_type(sig.order, t, "type")
    return t


def parse_query(text: str, sig: Signature | None = None) -> Query:
    """Parse ``A1, ..., An`` with optional leading ``?-``, trailing ``where`` and ``.``."""
    p = _Parser(text)
    loc = p.tok.loc
    if p.at("?-"):
        p.advance()
    # the empty query is written as nothing at all (or a lone ".")
    empty = p.tok.kind == "eof" or p.at(".")
    atoms = [] if empty else p.atom_list()
    ann = () if empty else p.where()
    if p.at("."):
        p.advance()
    if p.tok.kind != "eof":
        p.fail(f"unexpected {p.describe()}", ("',' or end of query",))
    q = Query(tuple(atoms), ann, loc)
    if sig is not None:
        for a in q.atoms:
            check_atom_syntax(sig, a)
        _check_annotations(sig, q.annotations, q.loc)
    return q
