"""Walk through typing the list term [x, [y]] against Anylist.

Builds the inequality system, solves it with a rule trace, and reads off
the principal variable typing.  Run: python3 demos/solve_walkthrough.py
"""
from collections import Counter

from subred.checker import principal_variable_typing
from subred.subsolve import build_system, solve
from subred.surface import parse_program, parse_term, parse_type

SOURCE = """
kind List/1.
kind Anylist/0.
sub List < Anylist via [].
func Nil : -> List(u).
func Cons : u, List(u) -> List(u).
"""

prog = parse_program(SOURCE)
sig = prog.sig
term = parse_term("[x, [y]]", sig)
bound = parse_type("Anylist", sig)

system = build_system(term, bound, sig)
print("inequalities, deepest position first:")
for c in system:
    print("  ", c)

sol = solve(system, sig, trace=True)
print("\nrewrite steps:")
for step in sol.trace:
    print("  ", step)
print("rule counts:", dict(Counter(s.rule for s in sol.trace)))

print("\nsolved form:")
for c in sol.system:
    print("  ", c)

# x sits in the outer list so it may be anything; y keeps a free parameter
print("\nprincipal typing:", principal_variable_typing(term, bound, sig))
