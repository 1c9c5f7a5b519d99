"""Mode bookkeeping: input/output splits and the nicely-moded conditions."""
from __future__ import annotations

from dataclasses import dataclass, field

from .surface import IN, OUT, Atom, Clause, Query, Signature, Term, term_vars


@dataclass(frozen=True)
class ModedAtomView:
    atom: Atom
    inputs: tuple[Term, ...]
    outputs: tuple[Term, ...]
    in_pos: tuple[int, ...]
    out_pos: tuple[int, ...]

    def rebuild(self) -> Atom:
        args: list[Term] = [None] * (len(self.inputs) + len(self.outputs))  # type: ignore[list-item]
        for i, t in zip(self.in_pos, self.inputs):
            args[i] = t
        for i, t in zip(self.out_pos, self.outputs):
            args[i] = t
        return Atom(self.atom.pred, tuple(args))


def split(atom: Atom, modes: tuple[str, ...]) -> ModedAtomView:
    in_pos = tuple(i for i, m in enumerate(modes) if m == IN)
    out_pos = tuple(i for i, m in enumerate(modes) if m == OUT)
    return ModedAtomView(
        atom,
        tuple(atom.args[i] for i in in_pos),
        tuple(atom.args[i] for i in out_pos),
        in_pos,
        out_pos,
    )


def view(sig: Signature, atom: Atom) -> ModedAtomView:
    if not atom.args and atom.pred not in sig.preds:
        return split(atom, ())
    return split(atom, sig.pred(atom.pred).modes)


@dataclass(frozen=True)
class ModeReport:
    ok: bool
    problem: str | None = None
    variable: str | None = None
    atoms: tuple[int, ...] = ()
    # clause-level extras, all True for queries
    head_input_linear: bool = True
    head_output_linear: bool = True
    head_io_disjoint: bool = True
    notes: tuple[str, ...] = field(default=())

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "nicely moded" + (f" ({'; '.join(self.notes)})" if self.notes else "")
        return self.problem or "not nicely moded"


def _query_report(views: list[ModedAtomView]) -> ModeReport:
    seen: dict[str, int] = {}
    for k, v in enumerate(views, 1):
        for x in term_vars(*v.outputs):
            if x in seen:
                return ModeReport(
                    False,
                    f"output vector is not linear: {x} occurs in the outputs of atoms {seen[x]} and {k}",
                    x,
                    (seen[x], k),
                )
            seen[x] = k
    outs_from = [set(term_vars(*v.outputs)) for v in views]
    for i, v in enumerate(views):
        later = set().union(*outs_from[i:]) if outs_from[i:] else set()
        for x in term_vars(*v.inputs):
            if x in later:
                j = next(j for j in range(i, len(views)) if x in outs_from[j])
                return ModeReport(
                    False,
                    f"input variable {x} of atom {i + 1} is produced by the output of atom {j + 1}",
                    x,
                    (i + 1, j + 1),
                )
    return ModeReport(True)


def check_nicely_moded(query: Query | tuple[Atom, ...], sig: Signature) -> ModeReport:
    atoms = query.atoms if isinstance(query, Query) else tuple(query)
    return _query_report([view(sig, a) for a in atoms])


def check_nicely_moded_clause(clause: Clause, sig: Signature) -> ModeReport:
    """Body nicely moded and head inputs disjoint from body outputs.

    The report also carries head input/output linearity and whether a head
    variable is shared between input and output positions; the latter is
    informational only.
    """
    head = view(sig, clause.head)
    body = [view(sig, a) for a in clause.body]
    in_vars = term_vars(*head.inputs)
    out_vars = term_vars(*head.outputs)
    in_lin = len(in_vars) == len(set(in_vars))
    out_lin = len(out_vars) == len(set(out_vars))
    shared = sorted(set(in_vars) & set(out_vars))
    notes = []
    if shared:
        notes.append(f"head not input/output disjoint: {', '.join(shared)}")
    extras = dict(
        head_input_linear=in_lin,
        head_output_linear=out_lin,
        head_io_disjoint=not shared,
        notes=tuple(notes),
    )
    rep = _query_report(body)
    if not rep.ok:
        return ModeReport(False, f"body: {rep.problem}", rep.variable, rep.atoms, **extras)
    body_out = [set(term_vars(*v.outputs)) for v in body]
    for x in in_vars:
        for j, outs in enumerate(body_out, 1):
            if x in outs:
                return ModeReport(
                    False,
                    f"head input variable {x} is produced by the output of body atom {j}",
                    x,
                    (0, j),
                    **extras,
                )
    return ModeReport(True, **extras)
