"""Typing judgements, principal variable typings and the nicely-typed check.

Every check reduces to solving a type inequality system in which the
parameter of each term variable has been replaced by the type the variable
typing gives it.  Those replaced types are fixed; only the generated copy
parameters and the explicitly listed flexible parameters may be bound.

Clause checking proceeds in three stages.  Stage one takes principal typings
for the head inputs and for every body output vector, the latter against the
declared output types with fresh instance parameters.  Stage two walks the
body left to right, checks each input vector and binds instance parameters
to the least upper bound of their lower bounds.  Stage three replays the
resulting certificate independently, including principality.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import islice, product
from typing import Iterable, Mapping, Sequence

from .errors import FormViolation, PreconditionViolated
from .modes import check_nicely_moded_clause, split
from .subsolve import (
    Constraint,
    _copy_decl,
    build_system,
    solve,
    solve_constraints,
    var_param,
    pos_label,
)
from .surface import (
    App,
    Atom,
    Clause,
    NameSupply,
    PredDecl,
    Query,
    Signature,
    Term,
    Var,
    format_term,
    is_linear,
    subterms,
    term_vars,
)
from .typesys import Param, Type, TypeSubst, _variant, match_type, pars, replace

GO = "Go"


class VariableTyping(dict):
    """Finite map from variable names to types."""

    def restrict(self, names: Iterable[str]) -> "VariableTyping":
        keep = set(names)
        return VariableTyping({x: t for x, t in self.items() if x in keep})

    def union(self, other: Mapping[str, Type]) -> "VariableTyping":
        out = VariableTyping(self)
        for x, t in other.items():
            if x in out and out[x] != t:
                raise ValueError(f"typings disagree on {x}: {out[x]} vs {t}")
            out[x] = t
        return out

    def apply(self, theta: TypeSubst | Mapping[str, Type]) -> "VariableTyping":
        m = theta.as_dict() if isinstance(theta, TypeSubst) else dict(theta)
        return VariableTyping({x: replace(t, m) for x, t in self.items()})

    def le(self, other: Mapping[str, Type], order) -> bool:
        return self.keys() == other.keys() and all(
            order.subtype_le(t, other[x]) for x, t in self.items()
        )

    def params(self) -> set[str]:
        return pars(*self.values())

    def __str__(self) -> str:
        return "{" + ", ".join(f"{x}:{t}" for x, t in sorted(self.items())) + "}"

    def __repr__(self) -> str:
        return f"VariableTyping({self})"


@dataclass(frozen=True)
class Failure:
    """A negative verdict; ``condition`` names the sub-condition that failed."""

    condition: str
    message: str
    atom: int | None = None
    arg: int | None = None
    witness: Constraint | None = None
    typing: VariableTyping | None = None
    principal: VariableTyping | None = None

    def __bool__(self) -> bool:
        return False

    def __str__(self) -> str:
        return self.message


@dataclass
class TypingJudgement:
    kind: str
    subject: object
    typing: VariableTyping
    derived: Type | None = None
    thetas: tuple[dict[str, Type], ...] = ()
    positions: dict[str, Type] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class PrincipalProof:
    """Principal solution of one vector: head inputs (atom 0) or a body output."""

    atom: int
    terms: tuple[Term, ...]
    types: tuple[Type, ...]
    solved: TypeSubst
    renaming: dict[str, str]


@dataclass
class Certificate:
    """Variable typing plus the declared-type instance used at each atom.

    ``instances[0]`` belongs to the head and is always the declared type.
    """

    clause: Clause
    typing: VariableTyping
    instances: tuple[tuple[Type, ...], ...]
    proofs: tuple[PrincipalProof, ...] = ()
    principal: bool = True

    def params(self) -> set[str]:
        return self.typing.params() | pars(*(t for inst in self.instances for t in inst))

    def apply(self, theta: Mapping[str, Type]) -> "Certificate":
        m = dict(theta)
        return Certificate(
            self.clause,
            self.typing.apply(m),
            tuple(tuple(replace(t, m) for t in inst) for inst in self.instances),
            (),
            self.principal,
        )

    def thetas(self, sig: Signature) -> list[dict[str, Type]]:
        out = []
        for a, inst in zip(self.clause.atoms, self.instances):
            m: dict[str, Type] = {}
            for d, t in zip(pred_decl(sig, a).arg_types, inst):
                match_type(d, t, m)
            out.append({k: v for k, v in m.items() if v != Param(k)})
        return out

    def to_text(self, sig: Signature) -> str:
        lines = [f"clause {self.clause}", f"  typing {self.typing}"]
        for k, (a, inst, th) in enumerate(zip(self.clause.atoms, self.instances, self.thetas(sig))):
            if k == 0 and a.pred == GO and not a.args:
                continue
            tag = "head" if k == 0 else f"atom {k}"
            theta = ", ".join(f"{p}/{t}" for p, t in sorted(th.items()))
            lines.append(f"  {tag} {a}: ({', '.join(map(str, inst))}) theta {{{theta}}}")
        for pr in self.proofs:
            which = "head inputs" if pr.atom == 0 else f"atom {pr.atom} outputs"
            terms = ", ".join(format_term(t) for t in pr.terms)
            types = ", ".join(map(str, pr.types))
            lines.append(f"  principal {which} ({terms}) against ({types}): {pr.solved!r}")
        if not self.principal:
            lines.append("  NOT PRINCIPAL (accepted without the principality requirement)")
        return "\n".join(lines)

    def to_json(self, sig: Signature) -> dict:
        return {
            "clause": str(self.clause),
            "typing": {x: str(t) for x, t in sorted(self.typing.items())},
            "atoms": [
                {"atom": str(a), "instance": [str(t) for t in inst],
                 "theta": {p: str(t) for p, t in sorted(th.items())}}
                for a, inst, th in zip(self.clause.atoms, self.instances, self.thetas(sig))
            ],
            "principal": [
                {"atom": pr.atom, "terms": [format_term(t) for t in pr.terms],
                 "types": [str(t) for t in pr.types],
                 "solved": {p: str(t) for p, t in sorted(pr.solved.items())}}
                for pr in self.proofs
            ],
            "principal_required": self.principal,
        }

    def dumps(self, sig: Signature) -> str:
        return json.dumps(self.to_json(sig), sort_keys=True)


# -- declarations ----------------------------------------------------------------

def pred_decl(sig: Signature, atom: Atom) -> PredDecl:
    if atom.pred == GO and not atom.args and GO not in sig.preds:
        return PredDecl(GO, (), ())
    return sig.pred(atom.pred)


def go_clause(query: Query | Sequence[Atom]) -> Clause:
    if isinstance(query, Query):
        return Clause(Atom(GO), query.atoms, query.annotations, query.loc)
    return Clause(Atom(GO), tuple(query))


# -- the bounded solver ------------------------------------------------------------

@dataclass
class _Bounded:
    ok: bool
    subst: dict[str, Type] = field(default_factory=dict)
    roots: list[Type] = field(default_factory=list)
    positions: dict[str, Type] = field(default_factory=dict)
    witness: Constraint | None = None
    reason: str = ""

    @property
    def arg(self) -> int | None:
        if self.witness is None or not self.witness.origin:
            return None
        head = self.witness.origin.split(".")[0]
        return int(head) if head.isdigit() else 1


def _bounded_solve(
    U: Mapping[str, Type],
    terms: Sequence[Term],
    bounds: Sequence[Type],
    sig: Signature,
    flexible: Iterable[str] = (),
    fallback: bool = True,
    single: bool = False,
) -> _Bounded:
    """Solve I(terms, bounds) with each variable parameter replaced by its U type."""
    terms, bounds = list(terms), list(bounds)
    xs = term_vars(*terms)
    missing = [x for x in dict.fromkeys(xs) if x not in U]
    if missing:
        raise PreconditionViolated(f"variable(s) {', '.join(missing)} not in the typing")
    # parameter names with '^' are reserved for generated systems; hide any
    # that come from outside under temporary names
    ext = pars(*bounds, *(U[x] for x in xs))
    hide = {p: Param(f"?{i}") for i, p in enumerate(sorted(p for p in ext if "^" in p))}
    back = {v.name: Param(k) for k, v in hide.items()}
    bounds_h = [replace(b, hide) for b in bounds]
    Uh = {x: replace(U[x], hide) for x in dict.fromkeys(xs)}
    flex = {hide[p].name if p in hide else p for p in flexible}
    if single:
        system = build_system(terms[0], bounds_h[0], sig)
    else:
        system = build_system(terms, bounds_h, sig)
    prebind = {var_param(x): t for x, t in Uh.items()}
    cs = [
        Constraint(replace(c.lhs, prebind), replace(c.rhs, prebind), c.rel, c.origin)
        for c in system.constraints
    ]
    ext_h = pars(*bounds_h, *Uh.values())
    generated = system.params() - ext_h - set(prebind)
    allp = pars(*(t for c in cs for t in (c.lhs, c.rhs)))
    rigid = allp - generated - flex
    sub, fail = solve_constraints(cs, sig.order, rigid, least=True, lub_fallback=fallback)
    if sub is None:
        w, why = fail
        w = Constraint(replace(w.lhs, back), replace(w.rhs, back), w.rel, w.origin)
        return _Bounded(False, witness=w, reason=why)
    S = TypeSubst(sub)

    def res(pos: tuple[int, ...], t: Term) -> Type:
        if isinstance(t, Var):
            return replace(S(Uh[t.name]), back)
        _, result = _copy_decl(sig, t.fn, pos_label(pos), len(t.args))
        return replace(S(result), back)

    positions: dict[str, Type] = {}
    roots: list[Type] = []
    for k, t in enumerate(terms, 1):
        prefix = () if single else (k,)
        for pos, sub_t in subterms(t):
            positions[pos_label(prefix + pos)] = res(prefix + pos, sub_t)
        roots.append(positions[pos_label(prefix)])
    out = {}
    for p in flex:
        if p in S:
            name = back[p].name if p in back else p
            out[name] = replace(S[p], back)
    return _Bounded(True, out, roots, positions)


# -- judgements ----------------------------------------------------------------------

def check_term_bound(
    U: Mapping[str, Type], t: Term, sigma: Type, sig: Signature
) -> TypingJudgement | Failure:
    """Decide whether ``U |- t : s`` for some ``s <= sigma``."""
    r = _bounded_solve(U, [t], [sigma], sig, single=True)
    if not r.ok:
        return Failure(
            "typing",
            f"{format_term(t)} has no type below {sigma}: {r.witness} ({r.reason})",
            witness=r.witness,
        )
    return TypingJudgement("term", t, VariableTyping(U), r.roots[0], (), r.positions)


def check_atom(
    U: Mapping[str, Type],
    atom: Atom,
    head_position: bool,
    sig: Signature,
    instance: Sequence[Type] | None = None,
    supply: NameSupply | None = None,
) -> TypingJudgement | Failure:
    """Atom typing: an instance of the declared types must bound every argument.

    In head position the declared types are used as they are.  Otherwise an
    instance is searched for, unless ``instance`` fixes it.
    """
    decl = pred_decl(sig, atom)
    if decl.arity != len(atom.args):
        raise PreconditionViolated(f"{atom} has {len(atom.args)} arguments, declared {decl.arity}")
    if head_position:
        bounds, flex, ren = list(decl.arg_types), set(), {}
    elif instance is not None:
        bounds, flex, ren = list(instance), set(), {}
    else:
        supply = supply or NameSupply()
        ren = {p: Param(supply.fresh_param(p)) for p in sorted(decl.params)}
        bounds = [replace(t, ren) for t in decl.arg_types]
        flex = {v.name for v in ren.values()}
    r = _bounded_solve(U, atom.args, bounds, sig, flexible=flex)
    kind = "headatom" if head_position else "atom"
    if not r.ok:
        return Failure(
            "typing",
            f"argument {r.arg} of {atom}: {r.witness} ({r.reason})",
            arg=r.arg,
            witness=r.witness,
        )
    if instance is not None:
        m: dict[str, Type] = {}
        for d, t in zip(decl.arg_types, instance):
            if match_type(d, t, m) is None:
                return Failure("typing", f"({', '.join(map(str, instance))}) is not an instance of the declared types of {atom.pred}")
        theta = m
    else:
        # a simultaneous replacement; need not be idempotent (u may map to List(u))
        theta = {p: r.subst.get(v.name, v) for p, v in ren.items()}
    return TypingJudgement(kind, atom, VariableTyping(U), None, (theta,), r.positions)


def _principal(terms: Sequence[Term], types: Sequence[Type], sig: Signature, single: bool = False):
    if not is_linear(terms):
        raise FormViolation(
            f"({', '.join(format_term(t) for t in terms)}) is not linear"
        )
    if len(terms) == 1 and single:
        system = build_system(terms[0], types[0], sig)
    else:
        system = build_system(list(terms), list(types), sig)
    sol = solve(system, sig.order)
    if not sol:
        return None, sol
    xs = dict.fromkeys(term_vars(*terms))
    return VariableTyping({x: sol.theta(Param(var_param(x))) for x in xs}), sol


def principal_variable_typing(
    tvec: Term | Sequence[Term], svec: Type | Sequence[Type], sig: Signature
) -> VariableTyping | Failure:
    single = isinstance(tvec, (Var, App))
    if single:
        tvec, svec = [tvec], [svec]
    typing, sol = _principal(list(tvec), list(svec), sig, single)
    if typing is None:
        return Failure("typing", str(sol), witness=sol.witness)
    return typing


def _joint_variant(U: Mapping[str, Type], P: Mapping[str, Type], fixed: set[str]) -> dict[str, str] | None:
    ren: dict[str, str] = {}
    for x, t in P.items():
        if x not in U or not _variant(t, U[x], fixed, ren):
            return None
    if len(set(ren.values())) != len(ren):
        return None
    return ren


def is_principal(
    U: Mapping[str, Type], tvec: Sequence[Term], svec: Sequence[Type], sig: Signature
) -> tuple[bool, VariableTyping | Failure]:
    """Whether ``U`` agrees, up to renaming free parameters, with the principal typing."""
    P = principal_variable_typing(list(tvec), list(svec), sig)
    if isinstance(P, Failure):
        return False, P
    return _joint_variant(U, P, pars(*svec)) is not None, P


# -- certificates ----------------------------------------------------------------------

def _vectors(cert: Certificate, sig: Signature):
    """(atom index, terms, types) for head inputs and each body output."""
    atoms = cert.clause.atoms
    out = []
    for k, (a, inst) in enumerate(zip(atoms, cert.instances)):
        v = split(a, pred_decl(sig, a).modes)
        if k == 0:
            out.append((0, v.inputs, tuple(inst[i] for i in v.in_pos)))
        else:
            out.append((k, v.outputs, tuple(inst[i] for i in v.out_pos)))
    return out


def _validate(cert: Certificate, sig: Signature, require_principal: bool):
    clause = cert.clause
    mode = check_nicely_moded_clause(clause, sig)
    if not mode.ok:
        return Failure("moded", f"not nicely moded: {mode.problem}"), ()
    if not mode.head_input_linear:
        return Failure("input-linear", f"head {clause.head} is not input-linear", atom=0), ()
    need = set(term_vars(*(t for a in clause.atoms for t in a.args)))
    missing = sorted(need - cert.typing.keys())
    if missing:
        return Failure("typing", f"no type for {', '.join(missing)}"), ()
    if len(cert.instances) != len(clause.atoms):
        return Failure("typing", "certificate does not cover every atom"), ()
    for k, (a, inst) in enumerate(zip(clause.atoms, cert.instances)):
        decl = pred_decl(sig, a)
        if k == 0 and tuple(inst) != decl.arg_types:
            return Failure("typing", f"head instance of {a.pred} must be its declared type", atom=0), ()
        j = check_atom(cert.typing, a, k == 0, sig, instance=None if k == 0 else inst)
        if isinstance(j, Failure):
            return Failure("typing", f"{'head' if k == 0 else f'atom {k}'} {a}: {j.message}", k, j.arg, j.witness), ()
    proofs = []
    for k, terms, types in _vectors(cert, sig):
        P, sol = _principal(terms, types, sig)
        if P is None:
            return Failure("typing", f"{'head inputs' if k == 0 else f'outputs of atom {k}'}: {sol}", k, witness=sol.witness), ()
        ren = _joint_variant(cert.typing, P, pars(*types))
        if ren is None:
            if require_principal:
                return _not_principal(
                    cert.typing, k, terms, types, P, clause.atoms[k], cert.instances[k]
                ), ()
            continue
        proofs.append(PrincipalProof(k, tuple(terms), tuple(types), sol.theta, ren))
    if clause.annotations:
        for x, t in clause.annotations:
            if cert.typing.get(x) != t:
                return Failure("annotation", f"annotation {x}:{t} disagrees with {x}:{cert.typing.get(x)}"), ()
    return None, tuple(proofs)


def _not_principal(U, k, terms, types, P, atom: Atom | None = None, inst=None) -> Failure:
    bad = [x for x in P if U.get(x) != P[x]] or list(P)
    x = bad[0]
    if atom is not None and k > 0:
        # body outputs are shown in the context of the whole atom
        terms, types = atom.args, inst
    vec = "(" + ", ".join(format_term(t) for t in terms) + ")"
    tys = "(" + ", ".join(map(str, types)) + ")"
    return Failure(
        "principal",
        f"U({x})={U.get(x)} not principal for {vec} against {tys}; principal {P}",
        atom=k,
        typing=VariableTyping(U),
        principal=P,
    )


def validate_certificate(cert: Certificate, sig: Signature, require_principal: bool = True) -> Failure | None:
    """Independent replay of every judgement recorded in ``cert``."""
    fail, _ = _validate(cert, sig, require_principal)
    return fail


# -- inference ---------------------------------------------------------------------------

def _compose(S: dict[str, Type], new: Mapping[str, Type]) -> dict[str, Type]:
    out = {k: replace(v, new) for k, v in S.items()}
    out.update(new)
    return out


def _infer(clause: Clause, sig: Signature, supply: NameSupply) -> Certificate | Failure:
    atoms = clause.atoms
    decls = [pred_decl(sig, a) for a in atoms]
    views = [split(a, d.modes) for a, d in zip(atoms, decls)]
    inst_maps = [{}] + [
        {p: Param(supply.fresh_param(p)) for p in sorted(d.params)} for d in decls[1:]
    ]
    inst = [tuple(replace(t, m) for t in d.arg_types) for d, m in zip(decls, inst_maps)]
    U = VariableTyping()
    head = views[0]
    vectors = [(0, head.inputs, tuple(inst[0][i] for i in head.in_pos))]
    for k in range(1, len(atoms)):
        v = views[k]
        vectors.append((k, v.outputs, tuple(inst[k][i] for i in v.out_pos)))
    # stage 1: principal typings
    for k, terms, types in vectors:
        P, sol = _principal(terms, types, sig)
        if P is None:
            what = "head inputs" if k == 0 else f"outputs of atom {k} ({atoms[k]})"
            return Failure("typing", f"{what}: {sol}", k, witness=sol.witness)
        free = sorted(P.params() - pars(*types))
        ren = {p: Param(supply.fresh_param("t")) for p in free}
        for x, t in P.items():
            U[x] = replace(t, ren)
    flexible: set[str] = set()
    S: dict[str, Type] = {}
    ann = dict(clause.annotations)
    for x, t in ann.items():
        if x not in U:
            U[x] = t
            continue
        m = match_type(U[x], t, {})
        pfree = {v.name for mp in inst_maps for v in mp.values()}
        if m is not None and set(m) <= pfree:
            S = _compose(S, {k: v for k, v in m.items() if v != Param(k)})
    for x in dict.fromkeys(term_vars(*(t for a in atoms for t in a.args))):
        if x not in U:
            d = supply.fresh_param("d")
            U[x] = Param(d)
            flexible.add(d)
    # stage 2: body inputs left to right, then head outputs
    steps = [(k, views[k].inputs, views[k].in_pos) for k in range(1, len(atoms))]
    steps.append((0, head.outputs, head.out_pos))
    for k, terms, pos in steps:
        if k:
            flexible |= {v.name for v in inst_maps[k].values()}
        flexible -= S.keys()
        types = [replace(inst[k][i], S) for i in pos]
        r = _bounded_solve(U.apply(S), terms, types, sig, flexible=flexible, fallback=False)
        if not r.ok:
            arg = pos[r.arg - 1] + 1 if r.arg else None
            where = f"head {atoms[0]}" if k == 0 else f"atom {k} {atoms[k]}"
            cond = "annotation" if "annotation required" in r.reason else "typing"
            return Failure(cond, f"{where}, argument {arg}: {r.witness} ({r.reason})", k, arg, r.witness)
        S = _compose(S, r.subst)
    U = U.apply(S)
    instances = tuple(tuple(replace(t, S) for t in i) for i in inst)
    return Certificate(clause, U, instances)


def _candidate_typing(clause: Clause, sig: Signature, supply: NameSupply, limit: int = 256):
    """Search for any typing of the clause, ignoring principality."""
    atoms = clause.atoms
    cands: dict[str, list[Type]] = {}
    for k, a in enumerate(atoms):
        decl = pred_decl(sig, a)
        for t, ty in zip(a.args, decl.arg_types):
            if not is_linear([t]):
                continue
            P = principal_variable_typing(t, ty, sig)
            if isinstance(P, Failure):
                continue
            for x, s in P.items():
                if k == 0 or not (pars(s) & decl.params) and not any("^" in p for p in pars(s)):
                    cands.setdefault(x, [])
                    if s not in cands[x]:
                        cands[x].append(s)
    xs = list(dict.fromkeys(term_vars(*(t for a in atoms for t in a.args))))
    for x, t in clause.annotations:
        cands[x] = [t]
    choices = [sorted(cands.get(x, [Param(supply.fresh_param("d"))]), key=str) for x in xs]
    for combo in islice(product(*choices), limit):
        U = VariableTyping(zip(xs, combo))
        insts = []
        for k, a in enumerate(atoms):
            j = check_atom(U, a, k == 0, sig, supply=supply)
            if isinstance(j, Failure):
                break
            insts.append(tuple(replace(t, j.thetas[0]) for t in pred_decl(sig, a).arg_types))
        else:
            return Certificate(clause, U, tuple(insts), principal=False)
    return None


def check_nicely_typed(
    clause: Clause | Query,
    sig: Signature,
    *,
    require_principal: bool = True,
    supply: NameSupply | None = None,
) -> Certificate | Failure:
    """Certificate for a nicely typed clause (queries are wrapped as ``Go <- Q``)."""
    if isinstance(clause, Query):
        clause = go_clause(clause)
    supply = supply or NameSupply()
    mode = check_nicely_moded_clause(clause, sig)
    if not mode.ok:
        return Failure("moded", f"not nicely moded: {mode.problem}")
    if not mode.head_input_linear:
        return Failure("input-linear", f"head {clause.head} is not input-linear", atom=0)
    cert = _infer(clause, sig, supply)
    if isinstance(cert, Certificate):
        fail, proofs = _validate(cert, sig, require_principal)
        if fail is None:
            cert.proofs = proofs
            return cert
    else:
        fail = cert
    alt = _candidate_typing(clause, sig, supply)
    if alt is None:
        return fail
    fail2, proofs = _validate(alt, sig, require_principal=False)
    if fail2 is not None:
        return fail
    if not require_principal:
        alt.proofs = proofs
        return alt
    # report the first vector where the typing found is not principal
    for k, terms, types in _vectors(alt, sig):
        P, _ = _principal(terms, types, sig)
        if P is not None and _joint_variant(alt.typing, P, pars(*types)) is None:
            return _not_principal(
                alt.typing, k, terms, types, P, clause.atoms[k], alt.instances[k]
            )
    return fail


def nonprincipal_certificate(clause: Clause | Query, sig: Signature, supply: NameSupply | None = None) -> Certificate | None:
    """Some typing certificate with principality not required, if one exists."""
    got = check_nicely_typed(clause, sig, require_principal=False, supply=supply)
    return got if isinstance(got, Certificate) else None
