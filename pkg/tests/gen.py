"""Random signatures, programs and queries for property tests and fuzzing."""
from __future__ import annotations

import random
from dataclasses import dataclass

from subred.checker import Certificate, check_nicely_typed
from subred.errors import SignatureError
from subred.surface import (
    IN,
    OUT,
    App,
    Atom,
    Clause,
    FuncDecl,
    NameSupply,
    PredDecl,
    Program,
    Query,
    Signature,
    Var,
)
from subred.typesys import Comp, ConstructorOrder, Param, Type, pars

BASES = [
    # (arities, edges): small orders with varied injections
    ({"Int": 0, "Real": 0, "List": 1, "Anylist": 0},
     [("Int", "Real", []), ("List", "Anylist", [])]),
    ({"Int": 0, "Str": 0, "List": 1, "Top": 0},
     [("Int", "Top", []), ("Str", "Top", []), ("List", "Top", [])]),
    ({"Int": 0, "Real": 0, "Pair": 2, "Box": 1},
     [("Int", "Real", []), ("Pair", "Box", [2])]),
    ({"Nat": 0, "Int": 0, "Real": 0, "Tree": 1, "Coll": 1},
     [("Nat", "Int", []), ("Int", "Real", []), ("Tree", "Coll", [1])]),
    ({"A": 0, "B": 0, "Pair": 2, "Swap": 2},
     [("A", "B", []), ("Pair", "Swap", [2, 1])]),
]


def random_order(rng: random.Random) -> ConstructorOrder:
    """A valid constructor order, either a stock one or a random one."""
    if rng.random() < 0.6:
        ar, edges = rng.choice(BASES)
        return ConstructorOrder(ar, edges)
    for _ in range(100):
        n = rng.randint(2, 4)
        names = ["K0", "K1", "K2", "K3"][:n]
        ar = {k: rng.randint(0, 2) for k in names}
        if all(ar.values()):
            continue
        edges = []
        for lo in names:
            for hi in names:
                if names.index(lo) < names.index(hi) and ar[lo] >= ar[hi] and rng.random() < 0.35:
                    inj = rng.sample(range(1, ar[lo] + 1), ar[hi])
                    edges.append((lo, hi, inj))
        try:
            return ConstructorOrder(ar, edges)
        except SignatureError:
            continue
    ar, edges = BASES[0]
    return ConstructorOrder(ar, edges)


def random_type(rng: random.Random, order: ConstructorOrder, params: list[str], depth: int) -> Type:
    if params and (depth <= 0 or rng.random() < 0.35):
        return Param(rng.choice(params))
    nullary = [k for k in order.arities if order.arity(k) == 0]
    k = rng.choice(nullary if depth <= 0 else list(order.arities))
    return Comp(k, tuple(random_type(rng, order, params, depth - 1) for _ in range(order.arity(k))))


def random_signature(rng: random.Random) -> Signature:
    order = random_order(rng)
    funcs: dict[str, FuncDecl] = {}
    i = 0
    for k, n in order.arities.items():
        ps = [f"u{j}" for j in range(1, n + 1)]
        result = Comp(k, tuple(Param(p) for p in ps))
        for r in range(rng.randint(1, 3)):
            nargs = 0 if r == 0 else rng.randint(1, 2)
            args = tuple(random_type(rng, order, ps, 1) for _ in range(nargs))
            # constants of parameterised constructors keep the result flat and transparent
            if any(pars(a) - set(ps) for a in args):
                continue
            i += 1
            funcs[f"F{i}"] = FuncDecl(f"F{i}", args, result)
    preds: dict[str, PredDecl] = {}
    for j in range(rng.randint(2, 4)):
        n = rng.randint(1, 3)
        ps = ["u", "v"][: rng.randint(0, 2)]
        args = tuple(random_type(rng, order, ps, 1) for _ in range(n))
        modes = tuple(rng.choice([IN, OUT]) for _ in range(n))
        preds[f"P{j}"] = PredDecl(f"P{j}", args, modes)
    return Signature(order, funcs, preds)


class _Vars:
    def __init__(self, prefix: str):
        self.n = 0
        self.prefix = prefix

    def fresh(self) -> Var:
        self.n += 1
        return Var(f"{self.prefix}{self.n}")


def random_term(rng, sig: Signature, depth: int, var_source) -> App | Var:
    """var_source() returns a variable or None (meaning: use a function)."""
    if depth <= 0 or rng.random() < 0.4:
        v = var_source()
        if v is not None:
            return v
    fs = list(sig.funcs.values())
    if depth <= 0:
        fs = [f for f in fs if not f.arg_types] or fs
    f = rng.choice(fs)
    if depth <= 0 and f.arg_types:
        v = var_source(force=True)
        return v if v is not None else App(rng.choice([g for g in sig.funcs.values() if not g.arg_types]).name, ())
    return App(f.name, tuple(random_term(rng, sig, depth - 1, var_source) for _ in f.arg_types))


def _fresh_source(rng, vs: _Vars, used: list):
    def src(force=False):
        if force or rng.random() < 0.8:
            v = vs.fresh()
            used.append(v.name)
            return v
        return None
    return src


def _reuse_source(rng, pool: list[str]):
    def src(force=False):
        if pool and (force or rng.random() < 0.8):
            return Var(rng.choice(pool))
        return None
    return src


def random_clause(rng, sig: Signature, pred: str, ident: int, max_body: int = 3) -> Clause:
    vs = _Vars("x")
    decl = sig.pred(pred)
    head_in_vars: list[str] = []
    head_args: list = [None] * decl.arity
    for i, m in enumerate(decl.modes):
        if m == IN:
            head_args[i] = random_term(rng, sig, rng.randint(0, 2), _fresh_source(rng, vs, head_in_vars))
    avail = list(head_in_vars)
    body = []
    for _ in range(rng.randint(0, max_body)):
        p = rng.choice(list(sig.preds.values()))
        args: list = [None] * p.arity
        outs: list[str] = []
        for i, m in enumerate(p.modes):
            if m == IN:
                args[i] = random_term(rng, sig, rng.randint(0, 1), _reuse_source(rng, avail))
        for i, m in enumerate(p.modes):
            if m == OUT:
                args[i] = random_term(rng, sig, rng.randint(0, 1), _fresh_source(rng, vs, outs))
        avail.extend(outs)
        body.append(Atom(p.name, tuple(args)))
    for i, m in enumerate(decl.modes):
        if m == OUT:
            head_args[i] = random_term(rng, sig, rng.randint(0, 2), _reuse_source(rng, avail))
    return Clause(Atom(pred, tuple(head_args)), tuple(body), (), None, ident)


def random_query(rng, sig: Signature, n_atoms: int = 2) -> Query:
    vs = _Vars("q")
    avail: list[str] = []
    atoms = []
    for _ in range(n_atoms):
        p = rng.choice(list(sig.preds.values()))
        args: list = [None] * p.arity
        outs: list[str] = []
        for i, m in enumerate(p.modes):
            if m == IN:
                args[i] = random_term(rng, sig, rng.randint(0, 2), _reuse_source(rng, avail))
        for i, m in enumerate(p.modes):
            if m == OUT:
                args[i] = random_term(rng, sig, rng.randint(0, 1), _fresh_source(rng, vs, outs))
        avail.extend(outs)
        atoms.append(Atom(p.name, tuple(args)))
    return Query(tuple(atoms))


@dataclass
class Sample:
    program: Program
    certs: dict[int, Certificate]
    queries: list[tuple[Query, Certificate]]


def random_program(rng, tries: int = 60, clauses_per_pred: int = 3, require_principal: bool = True) -> Sample | None:
    """A random program whose clauses are all nicely typed, with typed queries."""
    sig = random_signature(rng)
    supply = NameSupply()
    clauses: list[Clause] = []
    certs: dict[int, Certificate] = {}
    for p in sig.preds:
        got = 0
        for _ in range(tries):
            c = random_clause(rng, sig, p, len(clauses) + 1)
            cert = check_nicely_typed(c, sig, supply=supply, require_principal=require_principal)
            if isinstance(cert, Certificate):
                clauses.append(c)
                certs[c.ident] = cert
                got += 1
                if got >= clauses_per_pred:
                    break
    if not clauses:
        return None
    prog = Program(sig, clauses)
    queries = []
    for _ in range(tries):
        q = random_query(rng, sig, rng.randint(1, 3))
        cert = check_nicely_typed(q, sig, supply=supply, require_principal=require_principal)
        if isinstance(cert, Certificate):
            queries.append((q, cert))
            if len(queries) >= 4:
                break
    return Sample(prog, certs, queries)
