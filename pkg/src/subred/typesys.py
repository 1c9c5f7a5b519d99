"""Type expressions, the constructor order with injections, and the subtyping order.

Types are immutable trees: a :class:`Param` is a type parameter, a :class:`Comp`
is a constructor applied to argument types.  A :class:`ConstructorOrder` holds
the declared constructors and direct subtype edges; it computes the
reflexive-transitive closure (composing injections along paths), validates it,
and answers ``subtype_le`` and ``max_type`` queries.

Injections are stored 1-based, exactly as written in ``sub K < K' via [...]``:
``inj[j-1] = i`` means argument ``j`` of ``K'`` corresponds to argument ``i``
of ``K``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator, Mapping

from .errors import (
    ArityMismatch,
    CyclicOrder,
    IncoherentInjections,
    NoMaximumConstructor,
    NonIdempotent,
    SignatureError,
)


@dataclass(frozen=True, order=True)
class Param:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class Comp:
    con: str
    args: tuple[Type, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.con
        return f"{self.con}({', '.join(map(str, self.args))})"


Type = Param | Comp


def size(t: Type) -> int:
    """Number of constructor and parameter occurrences in ``t``."""
    if isinstance(t, Param):
        return 1
    return 1 + sum(size(a) for a in t.args)


def pars(*types: Type) -> set[str]:
    out: set[str] = set()
    stack = list(types)
    while stack:
        t = stack.pop()
        if isinstance(t, Param):
            out.add(t.name)
        else:
            stack.extend(t.args)
    return out


def occurs(name: str, t: Type) -> bool:
    if isinstance(t, Param):
        return t.name == name
    return any(occurs(name, a) for a in t.args)


def replace(t: Type, mapping: Mapping[str, Type]) -> Type:
    """Simultaneous replacement of parameters, no idempotence requirement."""
    if isinstance(t, Param):
        return mapping.get(t.name, t)
    if not t.args:
        return t
    return Comp(t.con, tuple(replace(a, mapping) for a in t.args))


def contains_strictly(outer: Type, inner: Type) -> bool:
    if isinstance(outer, Param):
        return False
    return any(a == inner or contains_strictly(a, inner) for a in outer.args)


class TypeSubst:
    """An idempotent finite map from parameter names to types."""

    __slots__ = ("_map",)

    def __init__(self, mapping: Mapping[str, Type] | None = None):
        m = {k: v for k, v in (mapping or {}).items() if v != Param(k)}
        rng = pars(*m.values())
        clash = rng & m.keys()
        if clash:
            raise NonIdempotent(
                f"parameter(s) {', '.join(sorted(clash))} occur in both domain and range"
            )
        self._map = m

    def __call__(self, t: Type) -> Type:
        return replace(t, self._map)

    apply = __call__

    def __getitem__(self, name: str) -> Type:
        return self._map.get(name, Param(name))

    def __contains__(self, name: object) -> bool:
        return name in self._map

    def __iter__(self) -> Iterator[str]:
        return iter(self._map)

    def __len__(self) -> int:
        return len(self._map)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, TypeSubst):
            return self._map == other._map
        if isinstance(other, dict):
            return self._map == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset(self._map.items()))

    def items(self):
        return self._map.items()

    def as_dict(self) -> dict[str, Type]:
        return dict(self._map)

    @property
    def domain(self) -> set[str]:
        return set(self._map)

    @property
    def range_pars(self) -> set[str]:
        return pars(*self._map.values())

    def then(self, other: "TypeSubst") -> "TypeSubst":
        """Composition: apply ``self`` first, then ``other``."""
        m = {k: other(v) for k, v in self._map.items()}
        for k, v in other.items():
            m.setdefault(k, v)
        return TypeSubst(m)

    def restrict(self, names: Iterable[str]) -> "TypeSubst":
        keep = set(names)
        return TypeSubst({k: v for k, v in self._map.items() if k in keep})

    def __repr__(self) -> str:
        body = ", ".join(f"{k}/{v}" for k, v in sorted(self._map.items()))
        return "{" + body + "}"


class ConstructorOrder:
    """Constructors with arities, direct edges with injections, and their closure.

    Raises a :class:`SignatureError` subclass when the declared order breaks
    arity monotonicity, injection well-formedness, antisymmetry, coherence of
    composed injections, or existence of a maximum above each constructor.
    """

    def __init__(
        self,
        arities: Mapping[str, int],
        edges: Iterable[tuple[str, str, Iterable[int]]] = (),
    ):
        self.arities: dict[str, int] = dict(arities)
        self.edges: list[tuple[str, str, tuple[int, ...]]] = []
        for lo, hi, inj in edges:
            self._add_edge(lo, hi, tuple(inj))
        self._close()
        self._check_maxima()

    def _add_edge(self, lo: str, hi: str, inj: tuple[int, ...]) -> None:
        for k in (lo, hi):
            if k not in self.arities:
                raise SignatureError(f"undeclared constructor {k} in subtype edge")
        m, m2 = self.arities[lo], self.arities[hi]
        if m < m2:
            raise ArityMismatch(
                f"{lo}/{m} < {hi}/{m2}: the larger constructor may not have greater arity"
            )
        if len(inj) != m2:
            raise ArityMismatch(
                f"injection for {lo} < {hi} has {len(inj)} entries, expected {m2}"
            )
        if any(not 1 <= i <= m for i in inj) or len(set(inj)) != len(inj):
            raise ArityMismatch(f"injection {list(inj)} for {lo} < {hi} is not injective into 1..{m}")
        if lo == hi:
            if inj != tuple(range(1, m + 1)):
                raise IncoherentInjections(f"self edge {lo} < {lo} with non-identity injection")
            return
        self.edges.append((lo, hi, inj))

    def _close(self) -> None:
        # up[K][K'] = composed injection iota_{K,K'}
        up: dict[str, dict[str, tuple[int, ...]]] = {
            k: {k: tuple(range(1, m + 1))} for k, m in self.arities.items()
        }
        direct: dict[str, list[tuple[str, tuple[int, ...]]]] = {k: [] for k in self.arities}
        for lo, hi, inj in self.edges:
            prev = next((i for h, i in direct[lo] if h == hi), None)
            if prev is not None and prev != inj:
                raise IncoherentInjections(f"two injections declared for {lo} < {hi}")
            direct[lo].append((hi, inj))
        for start in self.arities:
            work = [start]
            while work:
                k = work.pop()
                base = up[start][k]
                for hi, inj in direct[k]:
                    # iota_{start,hi}(j) = iota_{start,k}(iota_{k,hi}(j))
                    composed = tuple(base[j - 1] for j in inj)
                    have = up[start].get(hi)
                    if have is None:
                        up[start][hi] = composed
                        work.append(hi)
                    elif have != composed:
                        raise IncoherentInjections(
                            f"paths from {start} to {hi} compose to different injections "
                            f"{list(have)} and {list(composed)}"
                        )
        for k, ups in up.items():
            for hi in ups:
                if hi != k and k in up[hi]:
                    raise CyclicOrder(f"{k} and {hi} are mutually below each other")
        self._up = up

    def _check_maxima(self) -> None:
        self._max: dict[str, str] = {}
        for k, ups in self._up.items():
            tops = [h for h in ups if all(h in self._up[o] for o in ups)]
            if len(tops) != 1:
                raise NoMaximumConstructor(
                    f"constructor {k} has no unique maximum among {sorted(ups)}"
                )
            self._max[k] = tops[0]

    @property
    def constructors(self) -> list[str]:
        return list(self.arities)

    def arity(self, k: str) -> int:
        return self.arities[k]

    def con_le(self, lo: str, hi: str) -> bool:
        return hi in self._up.get(lo, {})

    def injection(self, lo: str, hi: str) -> tuple[int, ...]:
        return self._up[lo][hi]

    def supers(self, k: str) -> dict[str, tuple[int, ...]]:
        return self._up[k]

    def max_con(self, k: str) -> str:
        return self._max[k]

    def well_formed(self, t: Type) -> bool:
        if isinstance(t, Param):
            return True
        return (
            t.con in self.arities
            and len(t.args) == self.arities[t.con]
            and all(self.well_formed(a) for a in t.args)
        )

    # -- the subtyping order ---------------------------------------------------

    def subtype_le(self, s: Type, t: Type) -> bool:
        if isinstance(s, Param) or isinstance(t, Param):
            return s == t
        inj = self._up.get(s.con, {}).get(t.con)
        if inj is None:
            return False
        return all(self.subtype_le(s.args[i - 1], ta) for i, ta in zip(inj, t.args))

    def max_type(self, t: Type) -> Type:
        if isinstance(t, Param):
            return t
        top = self._max[t.con]
        inj = self._up[t.con][top]
        return Comp(top, tuple(self.max_type(t.args[i - 1]) for i in inj))

    def upper_bounds(self, t: Type) -> Iterator[Type]:
        """Every type ``s`` with ``t <= s``; the set is finite."""
        if isinstance(t, Param):
            yield t
            return
        for hi, inj in self._up[t.con].items():
            choices = [list(self.upper_bounds(t.args[i - 1])) for i in inj]
            for combo in product(*choices):
                yield Comp(hi, tuple(combo))

    def lub(self, types: Iterable[Type]) -> Type | None:
        """Least upper bound of ``types``, or None if there is none."""
        types = list(dict.fromkeys(types))
        if not types:
            return None
        if len(types) == 1:
            return types[0]
        common = set(self.upper_bounds(types[0]))
        for t in types[1:]:
            common &= set(self.upper_bounds(t))
            if not common:
                return None
        least = [c for c in common if all(self.subtype_le(c, o) for o in common)]
        return least[0] if len(least) == 1 else None

    def glb(self, types: Iterable[Type]) -> Type | None:
        """Greatest lower bound among the given types themselves (no search below)."""
        types = list(dict.fromkeys(types))
        for t in types:
            if all(self.subtype_le(t, o) for o in types):
                return t
        return None


# Module-level conveniences mirroring the operation names.

def apply_subst(t: Type, theta: TypeSubst) -> Type:
    return theta(t)


def subtype_le(order: ConstructorOrder, s: Type, t: Type) -> bool:
    return order.subtype_le(s, t)


def max_type(order: ConstructorOrder, t: Type) -> Type:
    return order.max_type(t)


def is_flat(t: Type) -> bool:
    if isinstance(t, Param):
        return False
    names = [a.name for a in t.args if isinstance(a, Param)]
    return len(names) == len(t.args) and len(set(names)) == len(names)


def is_variant(a: Type, b: Type, fixed: set[str] = frozenset()) -> dict[str, str] | None:
    """Return a bijective renaming of non-fixed parameters taking ``a`` to ``b``."""
    ren: dict[str, str] = {}
    if _variant(a, b, fixed, ren) and len(set(ren.values())) == len(ren):
        return ren
    return None


def _variant(a: Type, b: Type, fixed, ren: dict[str, str]) -> bool:
    if isinstance(a, Param):
        if not isinstance(b, Param):
            return False
        if a.name in fixed or b.name in fixed:
            return a == b
        prev = ren.setdefault(a.name, b.name)
        return prev == b.name
    if not isinstance(b, Comp) or a.con != b.con or len(a.args) != len(b.args):
        return False
    return all(_variant(x, y, fixed, ren) for x, y in zip(a.args, b.args))


def match_type(pattern: Type, subject: Type, binding: dict[str, Type] | None = None) -> dict[str, Type] | None:
    """One-way matching of type ``pattern`` onto ``subject``."""
    b = {} if binding is None else binding
    if isinstance(pattern, Param):
        prev = b.get(pattern.name)
        if prev is None:
            b[pattern.name] = subject
            return b
        return b if prev == subject else None
    if not isinstance(subject, Comp) or subject.con != pattern.con:
        return None
    for p, s in zip(pattern.args, subject.args):
        if match_type(p, s, b) is None:
            return None
    return b
