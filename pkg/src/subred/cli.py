"""Command-line driver: ``subred check``, ``subred solve`` and ``subred run``.

Exit status 0 means everything passed, 1 a failed check, query or
subject-reduction violation, 2 a usage or parse error.  Results go to
stdout, diagnostics to stderr.  ``SUBRED_SEED`` sets the first value of the
fresh-name counter.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

from .checker import Certificate, check_nicely_typed
from .engine import Engine, DerivationState, Options, RuntimeModeError, prepare
from .errors import FormViolation, ParseError, SignatureError, SubredError
from .modes import check_nicely_moded_clause
from .subsolve import build_system, check_form, solve, var_param
from .surface import NameSupply, Program, format_term, parse_program, parse_query, parse_term, parse_type, term_vars
from .typesys import Param

OK, FAIL, USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit with 2, as argparse does
        self.print_usage(sys.stderr)
        self.exit(USAGE, f"{self.prog}: error: {message}\n")


def _supply() -> NameSupply:
    seed = os.environ.get("SUBRED_SEED")
    try:
        return NameSupply(int(seed)) if seed else NameSupply()
    except ValueError:
        return NameSupply()


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load(path: str) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())


def _show(item) -> str:
    return str(item).rstrip(".")


def _loc(obj) -> str:
    return f"{obj.loc[0]}:{obj.loc[1]}: " if getattr(obj, "loc", None) else ""


def cmd_check(args) -> int:
    prog = _load(args.file)
    sig = prog.sig
    supply = _supply()
    results = []
    ok = True
    items = [("clause", c) for c in prog.clauses] + [("query", q) for q in prog.queries]
    for kind, item in items:
        got = check_nicely_typed(item, sig, supply=supply)
        good = isinstance(got, Certificate)
        ok &= good
        entry = {"kind": kind, "subject": _show(item), "loc": list(item.loc) if item.loc else None, "ok": good}
        if kind == "clause":
            notes = check_nicely_moded_clause(item, sig).notes
            if notes:
                entry["notes"] = list(notes)
        if good:
            entry["typing"] = {x: str(t) for x, t in sorted(got.typing.items())}
            if args.emit_cert:
                entry["certificate"] = got.to_json(sig)
        else:
            entry["condition"] = got.condition
            entry["message"] = got.message
        entry["_cert"] = got
        results.append(entry)
    n_cl = sum(1 for e in results if e["kind"] == "clause" and e["ok"])
    n_q = sum(1 for e in results if e["kind"] == "query" and e["ok"])
    summary = f"{n_cl} clause{'s' if n_cl != 1 else ''} nicely typed"
    if prog.queries:
        summary += f", {n_q} of {len(prog.queries)} quer{'ies' if len(prog.queries) != 1 else 'y'} nicely typed"
    if args.json:
        out = [{k: v for k, v in e.items() if k != "_cert"} for e in results]
        print(json.dumps({"ok": bool(ok), "results": out, "summary": summary}, sort_keys=True, indent=2))
        return OK if ok else FAIL
    for e, (kind, item) in zip(results, items):
        if e["ok"]:
            print(f"{_loc(item)}{kind} {_show(item)}: nicely typed {e['_cert'].typing}")
            for note in e.get("notes", ()):
                print(f"  note: {note}")
            if args.emit_cert:
                print(e["_cert"].to_text(sig))
        else:
            print(f"{_loc(item)}{kind} {_show(item)}: NOT nicely typed")
            _err(f"{_loc(item)}{kind} {_show(item)}: {e['condition']}: {e['message']}")
    print(summary)
    return OK if ok else FAIL


def cmd_solve(args) -> int:
    prog = _load(args.file)
    sig = prog.sig
    term = parse_term(args.term, sig)
    sigma = parse_type(args.type, sig)
    system = build_system(term, sigma, sig)
    print("system:")
    for c in system.constraints:
        print(f"  {c}")
    form = check_form(system)
    print(f"left-linear: {form.left_linear}, acyclic: {form.acyclic}")
    try:
        sol = solve(system, sig, trace=args.trace)
    except FormViolation as exc:
        _err(f"error: {exc}")
        return FAIL
    if args.trace:
        print("trace:")
        for st in sol.trace:
            print(f"  {st}")
    if not sol:
        print(str(sol))
        return FAIL
    print("solution:")
    for c in sol.system:
        print(f"  {c}")
    xs = dict.fromkeys(term_vars(term))
    typing = {x: sol.theta(Param(var_param(x))) for x in xs}
    print("principal typing: {" + ", ".join(f"{x}:{t}" for x, t in typing.items()) + "}")
    return OK


def cmd_run(args) -> int:
    prog = _load(args.file)
    sig = prog.sig
    if args.query is not None:
        queries = [parse_query(args.query, sig)]
    else:
        queries = list(prog.queries)
        if not queries:
            _err("error: no --query given and the file contains no queries")
            return USAGE
    supply = _supply()
    status = OK
    for query in queries:
        certs, qcert, fail = prepare(prog, query, unsafe=args.unsafe, supply=supply)
        if fail is not None:
            _err(f"{_loc(query)}query {query} rejected: {fail.condition}: {fail.message}")
            if args.json:
                print(json.dumps({"query": str(query), "status": "ill-typed", "message": fail.message}, sort_keys=True))
            else:
                print("rejected")
            status = FAIL
            continue
        eng = Engine(prog, certs, supply, Options(strict=args.strict, max_term_size=args.max_term_size))
        try:
            out = eng.run(DerivationState(query.atoms, qcert), args.max_steps)
        except RuntimeModeError as exc:
            _err(f"runtime mode error: {exc}")
            if args.json:
                for r in eng.trace:
                    print(json.dumps(r.to_json(), sort_keys=True))
                print(json.dumps({"query": str(query), "status": "mode-error", "message": str(exc)}, sort_keys=True))
            status = FAIL
            continue
        if args.json:
            for r in out.trace:
                print(json.dumps(r.to_json(), sort_keys=True))
            final = {
                "query": str(query),
                "status": out.status,
                "steps": out.steps,
                "answer": None if out.answer is None else {x: format_term(t) for x, t in sorted(out.answer.items())},
            }
            if out.violation is not None:
                final["violation"] = str(out.violation)
            print(json.dumps(final, sort_keys=True))
        else:
            if args.trace:
                for r in out.trace:
                    print(r.to_line())
            if out.status == "success":
                ans = ", ".join(f"{x} = {format_term(t)}" for x, t in sorted(out.answer.items()))
                print(f"yes{': ' + ans if ans else ''}")
            elif out.status == "failure":
                print("no")
            elif out.status == "timeout":
                print(f"timeout after {out.steps} steps")
            elif out.status == "limit":
                print(f"term size limit exceeded after {out.steps} steps")
            else:
                print("violation")
        if out.violation is not None:
            v = out.violation
            _err(str(v))
            _err(f"  step: {v.record.to_line()}")
        if out.status != "success":
            status = FAIL
    return status


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="subred", description="Typed logic programs with subtyping: check, solve, run.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="check every clause and query for nice typing")
    c.add_argument("file")
    c.add_argument("--emit-cert", action="store_true", help="print the certificate of each item")
    c.add_argument("--json", action="store_true", help="machine-readable output")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("solve", help="build and solve the inequality system of a term against a type")
    s.add_argument("file")
    s.add_argument("--term", required=True)
    s.add_argument("--type", required=True)
    s.add_argument("--trace", action="store_true", help="print each rule application")
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("run", help="execute a query with certified moded resolution")
    r.add_argument("file")
    r.add_argument("--query", help="query text; defaults to the queries in the file")
    r.add_argument("--max-steps", type=int, default=1000)
    r.add_argument("--max-term-size", type=int, default=None, help="stop once a resolvent has more term nodes")
    r.add_argument("--trace", action="store_true", help="print each resolution step")
    r.add_argument("--unsafe", action="store_true", help="run even if static checks fail")
    r.add_argument("--strict", action="store_true", help="make unifiable but non-moded heads an error")
    r.add_argument("--json", action="store_true", help="one JSON record per step, then the outcome")
    r.set_defaults(func=cmd_run)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        _err(f"{getattr(args, 'file', '')}:{exc}")
        return USAGE
    except OSError as exc:
        _err(f"error: {exc}")
        return USAGE
    except SignatureError as exc:
        _err(f"{args.file}:{exc} [{type(exc).__name__}]")
        return FAIL
    except SubredError as exc:
        _err(f"error: {exc} [{type(exc).__name__}]")
        return FAIL


if __name__ == "__main__":
    sys.exit(main())
