"""Why principality matters: two queries over Int < Real.

The first query is nicely typed and every resolvent is re-certified.  The
second gives x the type Int although 6 only forces Real; the checker
refuses it, and running it anyway shows the typing breaking at the very
next resolvent.  Run: python3 demos/subject_reduction.py
"""
from subred.checker import check_nicely_typed
from subred.engine import run
from subred.surface import parse_program, parse_query

SOURCE = """
kind Int/0.
kind Real/0.
sub Int < Real via [].
pred Fact : Int, Int mode (in, out).
pred Sqrt : Real, Real mode (in, out).
Fact(3, 6).
Sqrt(6, 2.449).
"""

prog = parse_program(SOURCE)
sig = prog.sig

for text in ["Fact(3, x), Sqrt(x, y)", "Sqrt(6, x), Fact(x, y)"]:
    q = parse_query(text, sig)
    print(f"?- {text}")
    verdict = check_nicely_typed(q, sig)
    print("  static check:", verdict if not verdict else f"nicely typed {verdict.typing}")
    out = run(prog, q, unsafe=True)
    for record in out.trace:
        print("  ", record.to_line())
    answer = ", ".join(f"{k} = {v}" for k, v in sorted((out.answer or {}).items()))
    print("  outcome:", out.status, answer)
    if out.violation is not None:
        print("  ", out.violation)
    print()
