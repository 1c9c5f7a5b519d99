import random
from collections import Counter

import pytest

from gen import _fresh_source, _Vars, random_signature, random_term, random_type
from oracles import all_types, dominated, oracle_of, system_solutions
from subred.errors import FormViolation, PreconditionViolated
from subred.subsolve import (
    Constraint,
    InequalitySystem,
    NoSolution,
    build_system,
    check_form,
    instance_solution,
    solve,
)
from subred.surface import App, Var, parse_term, parse_type
from subred.typesys import Comp, Param, TypeSubst, pars, size

Anylist, Int = Comp("Anylist"), Comp("Int")


def P(name):
    return Param(name)


def L(t):
    return Comp("List", (t,))


GOLDEN_SYSTEM = [
    "u^y <= u^2.1",
    "List(u^2.1.2) <= List(u^2.1)",
    "List(u^2.1) <= u^2",
    "List(u^2.2) <= List(u^2)",
    "u^x <= u^ε",
    "List(u^2) <= List(u^ε)",
    "List(u^ε) <= Anylist",
]

SOLVED = [
    "u^y = u^2.1",
    "u^2.1.2 = u^2.1",
    "u^ε = Anylist",
    "u^2.2 = Anylist",
    "u^x = Anylist",
    "u^2 = Anylist",
]


def system_of(lists, term, ty):
    sig = lists.sig
    return build_system(parse_term(term, sig), parse_type(ty, sig), sig)


class TestBuild:
    def test_list_term(self, lists):
        assert [str(c) for c in system_of(lists, "[x,[y]]", "Anylist")] == GOLDEN_SYSTEM

    def test_open_tail(self, lists):
        got = [str(c) for c in system_of(lists, "[x|z]", "Anylist")]
        assert got == ["u^x <= u^ε", "u^z <= List(u^ε)", "List(u^ε) <= Anylist"]

    def test_two_element_pattern(self, lists):
        got = [str(c) for c in system_of(lists, "[x,z]", "Anylist")]
        assert got == [
            "u^z <= u^2",
            "List(u^2.2) <= List(u^2)",
            "u^x <= u^ε",
            "List(u^2) <= List(u^ε)",
            "List(u^ε) <= Anylist",
        ]

    def test_bare_variable(self, lists):
        assert [str(c) for c in build_system(Var("x"), Int, lists.sig)] == ["u^x <= Int"]

    def test_vector(self, lists):
        s = build_system([Var("x"), App("Nil", ())], [Anylist, Anylist], lists.sig)
        assert [str(c) for c in s] == ["u^x <= Anylist", "List(u^2) <= Anylist"]

    def test_wrong_arity(self, lists):
        with pytest.raises(PreconditionViolated):
            build_system(App("Cons", (Var("x"),)), Anylist, lists.sig)


class TestForm:
    def test_generated_systems(self, lists):
        f = check_form(system_of(lists, "[x,[y]]", "Anylist"))
        assert f.left_linear and f.acyclic

    def test_two_cycle(self):
        f = check_form([Constraint(P("u1"), P("u2")), Constraint(P("u2"), P("u1"))])
        assert not f.acyclic

    def test_not_left_linear(self):
        f = check_form([Constraint(P("u1"), Int), Constraint(P("u1"), Comp("Real"))])
        assert not f.left_linear

    def test_solver_refuses(self, lists):
        bad = InequalitySystem([Constraint(P("u1"), P("u2")), Constraint(P("u2"), P("u1"))])
        with pytest.raises(FormViolation):
            solve(bad, lists.sig)
        bad = InequalitySystem([Constraint(P("u1"), Anylist), Constraint(P("u1"), L(P("v")))])
        with pytest.raises(FormViolation):
            solve(bad, lists.sig)


class TestSolve:
    def test_golden_solved_form(self, lists):
        sol = solve(system_of(lists, "[x,[y]]", "Anylist"), lists.sig, trace=True)
        assert [str(c) for c in sol.system] == SOLVED
        assert sol.principal

    def test_golden_rule_counts(self, lists):
        sol = solve(system_of(lists, "[x,[y]]", "Anylist"), lists.sig, trace=True)
        counts = Counter(s.rule for s in sol.trace)
        # rule (1) must also remove List(u^ε) <= Anylist; see the ledger
        assert counts == {"1": 4, "3": 5, "4": 1}
        phases = [s.rule for s in sol.trace]
        assert phases == sorted(phases)

    def test_loop_variant_and_form_asserted(self, lists):
        # check=True asserts the decreasing measure and the form after every step
        assert solve(system_of(lists, "[x,[y]]", "Anylist"), lists.sig, check=True)

    def test_self_loop(self, lists):
        sol = solve(InequalitySystem([Constraint(P("u"), P("u"))]), lists.sig)
        assert sol and len(sol.theta) == 0

    def test_occurs(self, lists):
        got = solve(InequalitySystem([Constraint(P("u"), L(P("u")))]), lists.sig)
        assert isinstance(got, NoSolution)

    def test_constructor_clash(self, append):
        got = solve(InequalitySystem([Constraint(L(P("u1")), Int)]), append.sig)
        assert isinstance(got, NoSolution)
        assert str(got.witness) == "List(u1) <= Int"

    def test_nil_against_int(self, append):
        s = build_system(App("Nil", ()), Int, append.sig)
        got = solve(s, append.sig)
        assert not got and str(got.witness) == "List(u^ε) <= Int"

    def test_variable_against_int(self, lists):
        sol = solve(build_system(Var("x"), Int, lists.sig), lists.sig)
        assert sol.theta(P("u^x")) == Int

    def test_rigid_parameters_of_the_bound(self, lists):
        sol = solve(build_system(parse_term("[x]", lists.sig), L(P("v")), lists.sig), lists.sig)
        assert "v" not in sol.theta.domain
        assert sol.theta(P("u^x")) == P("v")


class TestInstanceSolution:
    def test_pattern_extension(self, lists):
        sig = lists.sig
        t = parse_term("[x,[y]]", sig)
        s = parse_term("[x,z]", sig)
        sol_t = solve(build_system(t, Anylist, sig), sig)
        theta = {"z": parse_term("[y]", sig)}
        ext = instance_solution(sol_t, s, t, theta, Anylist, sig)
        assert ext.theta(P("u^z")) == L(P("u^2.1"))
        for name in sol_t.theta:
            assert ext.theta[name] == sol_t.theta[name]
        # the extension solves the pattern's own system
        for c in build_system(s, Anylist, sig):
            assert sig.order.subtype_le(ext.theta(c.lhs), ext.theta(c.rhs))

    def test_identity(self, lists):
        sig = lists.sig
        t = parse_term("[x,[y]]", sig)
        sol_t = solve(build_system(t, Anylist, sig), sig)
        assert instance_solution(sol_t, t, t, {}, Anylist, sig).theta == sol_t.theta

    def test_variable_pattern(self, lists):
        sig = lists.sig
        nil = App("Nil", ())
        sol_t = solve(build_system(nil, Anylist, sig), sig)
        ext = instance_solution(sol_t, Var("x"), nil, {"x": nil}, Anylist, sig)
        assert ext.theta(P("u^x")) == L(P("u^ε"))
        assert sig.order.subtype_le(ext.theta(P("u^x")), Anylist)

    def test_preconditions(self, lists):
        sig = lists.sig
        x = Var("x")
        sol = solve(build_system(x, Anylist, sig), sig)
        with pytest.raises(PreconditionViolated):
            instance_solution(sol, [x, x], [x, x], {}, [Anylist, Anylist], sig)
        with pytest.raises(PreconditionViolated):
            instance_solution(sol, x, App("Nil", ()), {}, Anylist, sig)


# -- bounded brute-force oracle ------------------------------------------------------

def grounded(theta, system, filler):
    """The solver's solution with every leftover parameter set to ``filler``."""
    env = {}
    for c in system:
        for t in (c.lhs, c.rhs):
            for p in pars(theta(t)):
                env[p] = filler
    return lambda t: TypeSubst(env)(theta(t)) if env else theta(t)


def random_system(rng):
    sig = random_signature(rng)
    order = sig.order
    used: list[str] = []
    t = random_term(rng, sig, rng.randint(0, 3), _fresh_source(rng, _Vars("x"), used))
    sigma = random_type(rng, order, [], rng.randint(0, 2))
    if rng.random() < 0.5:
        sigma = order.max_type(sigma)
    return sig, t, sigma


def solver_oracle_run(seed: int, n_systems: int, bound: int = 4, cap: int = 20000) -> dict:
    """Compare ``solve`` with bounded enumeration on random systems.

    Returns counters; any entry under ``discrepancies`` is a real disagreement.
    """
    rng = random.Random(seed)
    stats = Counter()
    discrepancies = []
    while stats["systems"] < n_systems:
        sig, t, sigma = random_system(rng)
        if size(sigma) > bound:
            continue
        system = build_system(t, sigma, sig)
        sol = solve(system, sig)
        stats["systems"] += 1
        order = sig.order
        oracle = oracle_of(order)
        pool = all_types(order.arities, [], bound)
        _, sols = system_solutions(system.constraints, oracle, pool)
        found = 0
        for g in sols:
            found += 1
            if not sol:
                discrepancies.append(("incomplete", t, sigma))
                break
            if not dominated(system.constraints, sol.theta, g, oracle, pool):
                discrepancies.append(("not principal", t, sigma, g))
                break
            if found >= cap:
                stats["truncated"] += 1
                break
        stats["brute solutions"] += found
        if sol:
            stats["solvable"] += 1
            filler = next(Comp(k) for k, n in order.arities.items() if n == 0)
            g = grounded(sol.theta, system, filler)
            if not all(oracle.le(g(c.lhs), g(c.rhs)) for c in system):
                discrepancies.append(("unsound", t, sigma))
            if found == 0:
                # the solution exists but needs types beyond the enumeration bound
                if all(size(g(c.lhs)) <= bound and size(g(c.rhs)) <= bound for c in system):
                    discrepancies.append(("missed by enumeration", t, sigma))
                else:
                    stats["beyond bound"] += 1
    stats["discrepancies"] = len(discrepancies)
    return {"stats": dict(stats), "discrepancies": discrepancies}


def test_solver_agrees_with_enumeration():
    got = solver_oracle_run(seed=7, n_systems=150)
    assert got["discrepancies"] == []
    assert got["stats"].get("truncated", 0) == 0
    assert got["stats"]["solvable"] > 20
    assert got["stats"]["systems"] - got["stats"]["solvable"] > 10


def test_instantiation_stability():
    rng = random.Random(3)
    checked = 0
    for _ in range(300):
        sig = random_signature(rng)
        order = sig.order
        used: list[str] = []
        t = random_term(rng, sig, rng.randint(0, 3), _fresh_source(rng, _Vars("x"), used))
        sigma = random_type(rng, order, ["w"], rng.randint(0, 2))
        if "w" not in pars(sigma):
            continue
        sol = solve(build_system(t, sigma, sig), sig)
        if not sol:
            continue
        inst = TypeSubst({"w": random_type(rng, order, [], 1)})
        sys2 = build_system(t, inst(sigma), sig)
        sol2 = solve(sys2, sig)
        assert sol2, (t, sigma)
        for c in sys2:
            lhs, rhs = inst(sol.theta(c.lhs)), inst(sol.theta(c.rhs))
            assert order.subtype_le(lhs, rhs)
        for name in sol.theta:
            assert sol2.theta(P(name)) == inst(sol.theta(P(name)))
        checked += 1
    assert checked > 30
