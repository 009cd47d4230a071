"""Congruence n-permutability and modularity via strong colorings.

A clone is congruence n-permutable for some n exactly when it is NOT
strongly colorable by the two-element order, and congruence modular
exactly when it is not strongly colorable by the four-element structure
whose relations are the equivalence relations with blocks 12|34, 13|24
and 12|3|4 (elements stored 0-based; reports print 1-based labels).
Positive permutability answers additionally try to attach a
Hagemann-Mitschke chain found by direct search.
"""

from __future__ import annotations

from dataclasses import dataclass

from .clones import (
    CloneGenSet,
    FlatTerm,
    H1IdentitySystem,
    OperationTable,
    find_operation_satisfying,
    generate_to_arity,
    projection,
)
from .freestruct import ColoringResult, FreeStructure, find_coloring, free_structure
from .search import Outcome, SearchBudget
from .structures import RelStructure

DAY_LABELS = ("1", "2", "3", "4")


def _equivalence(blocks) -> list[tuple[int, int]]:
    out = []
    for blk in blocks:
        out.extend((x, y) for x in blk for y in blk)
    return out


def day_structure() -> RelStructure:
    """The four-element structure with equivalence relations 12|34, 13|24,
    12|3|4 (0-based storage)."""
    return RelStructure.make(4, {
        "alpha": _equivalence([(0, 1), (2, 3)]),
        "beta": _equivalence([(0, 2), (1, 3)]),
        "gamma": _equivalence([(0, 1), (2,), (3,)]),
    })


def boolean_order() -> RelStructure:
    return RelStructure.make(2, {"le": [(0, 0), (0, 1), (1, 1)]})


@dataclass(frozen=True)
class HMChain:
    """Ternary operations p_1..p_{n-1} witnessing n-permutability."""

    n: int
    ops: tuple[OperationTable, ...]

    def __post_init__(self):
        if self.n < 2 or len(self.ops) != self.n - 1:
            raise ValueError("chain for n needs exactly n-1 ternary operations")
        if any(op.arity != 3 for op in self.ops):
            raise ValueError("chain operations must be ternary")


def verify_hm_chain(chain: HMChain) -> bool:
    """Pointwise check of p1(x,y,y)=x, p_{n-1}(x,x,y)=y and the links."""
    ops = chain.ops
    d = ops[0].domain_size
    for x in range(d):
        for y in range(d):
            if ops[0].apply(x, y, y) != x:
                return False
            if ops[-1].apply(x, x, y) != y:
                return False
            for i in range(len(ops) - 1):
                if ops[i].apply(x, x, y) != ops[i + 1].apply(x, y, y):
                    return False
    return True


def hagemann_mitschke_system(n: int) -> H1IdentitySystem:
    if n < 2:
        raise ValueError("n-permutability needs n >= 2")
    names = [f"p{i}" for i in range(1, n)]
    x, y = 0, 1
    eqs = [
        (FlatTerm(names[0], (x, y, y)), FlatTerm(None, (x,))),
        (FlatTerm(names[-1], (x, x, y)), FlatTerm(None, (y,))),
    ]
    for i in range(len(names) - 1):
        eqs.append((FlatTerm(names[i], (x, x, y)), FlatTerm(names[i + 1], (x, y, y))))
    return H1IdentitySystem(tuple((nm, 3) for nm in names), tuple(eqs))


@dataclass(frozen=True)
class HMSearchResult:
    outcome: Outcome
    chain: HMChain | None = None

    @property
    def found(self) -> bool:
        return self.outcome is Outcome.FOUND


def find_hagemann_mitschke(target, n: int,
                           budget: SearchBudget | None = None) -> HMSearchResult:
    """Search for a Hagemann-Mitschke chain of length exactly n-1.

    For a relational structure the chain is sought among polymorphisms via
    the identity engine; for a generated clone the ternary members are
    materialized and chained through their binary faces p(x,x,y), p(x,y,y).
    """
    if isinstance(target, RelStructure):
        res = find_operation_satisfying(target, hagemann_mitschke_system(n), budget)
        if not res.found:
            return HMSearchResult(res.outcome)
        chain = HMChain(n, tuple(res.assignment[f"p{i}"] for i in range(1, n)))
        assert verify_hm_chain(chain)
        return HMSearchResult(Outcome.FOUND, chain)
    if not isinstance(target, CloneGenSet):
        raise TypeError("expected a RelStructure or CloneGenSet")
    gen = target
    members = generate_to_arity(gen, 3, budget)
    d = gen.domain_size
    # p(x,y,y) and p(x,x,y) as binary tables; a chain is a path from the
    # first projection to the second along these faces
    edges: dict[tuple[int, ...], list[tuple[tuple[int, ...], OperationTable]]] = {}
    for op in members:
        right = tuple(op.apply(x, y, y) for x in range(d) for y in range(d))
        left = tuple(op.apply(x, x, y) for x in range(d) for y in range(d))
        edges.setdefault(right, []).append((left, op))
    start = projection(d, 2, 1).table
    goal = projection(d, 2, 2).table

    def dfs(node, steps, path, dead):
        if steps == 0:
            return list(path) if node == goal else None
        if (node, steps) in dead:
            return None
        for nxt, op in edges.get(node, ()):
            path.append(op)
            got = dfs(nxt, steps - 1, path, dead)
            if got is not None:
                return got
            path.pop()
        dead.add((node, steps))
        return None

    ops = dfs(start, n - 1, [], set())
    if ops is None:
        return HMSearchResult(Outcome.REFUTED)
    chain = HMChain(n, tuple(ops))
    assert verify_hm_chain(chain)
    return HMSearchResult(Outcome.FOUND, chain)


@dataclass(frozen=True)
class MaltsevConditionResult:
    """Outcome of a strong-coloring based Maltsev condition test.

    ``holds`` is the condition itself (n-permutability for some n, or
    modularity): true exactly when the strong coloring search was
    exhaustively refuted.  A found coloring certifies failure; for
    n-permutability a Hagemann-Mitschke chain is attached as an extra
    certificate when one exists at small n.
    """

    condition: str
    holds: bool | None                # None when the budget ran out
    free: FreeStructure
    coloring: ColoringResult
    chain: HMChain | None = None


def is_n_permutable_somewhere(gen: CloneGenSet, budget: SearchBudget | None = None,
                              chain_cap: int = 4) -> MaltsevConditionResult:
    """Is the generated clone congruence n-permutable for some n?

    Decided as NOT(strongly colorable by the two-element order); positive
    answers try to attach a chain for n = 2..chain_cap (the chain may
    legitimately be absent at these small n).
    """
    free = free_structure(gen, boolean_order(), budget)
    col = find_coloring(free, strong=True, budget=budget)
    if col.outcome is Outcome.BUDGET:
        return MaltsevConditionResult("n-permutable", None, free, col)
    holds = col.outcome is Outcome.REFUTED
    chain = None
    if holds:
        for n in range(2, chain_cap + 1):
            res = find_hagemann_mitschke(gen, n, budget)
            if res.found:
                chain = res.chain
                break
    return MaltsevConditionResult("n-permutable", holds, free, col, chain)


def is_congruence_modular(gen: CloneGenSet,
                          budget: SearchBudget | None = None) -> MaltsevConditionResult:
    """Is the generated clone congruence modular?

    Decided as NOT(strongly colorable by the Day structure).
    """
    free = free_structure(gen, day_structure(), budget)
    col = find_coloring(free, strong=True, budget=budget)
    if col.outcome is Outcome.BUDGET:
        return MaltsevConditionResult("congruence-modular", None, free, col)
    return MaltsevConditionResult("congruence-modular",
                                  col.outcome is Outcome.REFUTED, free, col)
