"""The algebraic properties of the subtype order, as plain checks plus their input strategies.

Shared by the unit suite and the acceptance gate, which counts the cases run.
"""
from hypothesis import strategies as st

from strategies import ORDER, ground_types, substitutions, types, upper_bound_pairs
from subred.typesys import Param, contains_strictly, pars, replace, size


def size_decreases_upward(pair):
    s, t = pair
    assert ORDER.subtype_le(s, t)
    assert size(s) >= size(t)


def substitution_closure(pair, theta):
    s, t = pair
    assert ORDER.subtype_le(theta(s), theta(t))


def max_is_maximum(pair):
    s, t = pair
    top = ORDER.max_type(s)
    assert ORDER.subtype_le(s, top)
    assert ORDER.subtype_le(t, top)
    assert ORDER.max_type(t) == top


def max_distributes_over_replacement(tau, name, sigma):
    lhs = ORDER.max_type(replace(tau, {name: sigma}))
    rhs = replace(ORDER.max_type(tau), {name: ORDER.max_type(sigma)})
    assert lhs == rhs


def unsolvable_shapes(tau, sol, name):
    # u <= tau[u] never holds; tau[u] <= u never holds if u survives in Max(tau)
    u_ = Param(name)
    if contains_strictly(tau, u_):
        assert not ORDER.subtype_le(sol, replace(tau, {name: sol}))
    if name in pars(ORDER.max_type(tau)) and tau != u_:
        assert not ORDER.subtype_le(replace(tau, {name: sol}), sol)


NAMES = st.sampled_from(["a", "b", "c"])

PROPERTIES = {
    "size monotonicity": (size_decreases_upward, (upper_bound_pairs(),)),
    "substitution closure": (substitution_closure, (upper_bound_pairs(), substitutions())),
    "Max maximality": (max_is_maximum, (upper_bound_pairs(),)),
    "Max distribution": (
        max_distributes_over_replacement,
        (types(), NAMES, types(params=["p", "q"], max_leaves=4)),
    ),
    "unsolvable shapes": (unsolvable_shapes, (types(max_leaves=5), ground_types(max_leaves=4), NAMES)),
}
