"""Shared backtracking kernel: finite CSPs with generalized arc consistency.

Every decision procedure in the package (homomorphism search, polymorphism
enumeration, identity-constrained table search, coloring search) reduces to
the same problem shape: variables with bitmask domains and positive table
constraints.  Binary constraints get value-indexed support masks; wider
scopes are revised by scanning their allowed tuples.  Search is depth-first
with propagation at every node, ascending value order, and either
smallest-domain-first or static index variable order (the latter makes
solution enumeration lexicographic).
"""

from __future__ import annotations

import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Sequence


class Outcome(Enum):
    FOUND = "found"
    REFUTED = "refuted"
    BUDGET = "budget"


class BudgetExceededError(RuntimeError):
    """Search stopped by node or time limit; not a refutation."""


class CancelledError(RuntimeError):
    """Another worker already produced the answer (parallel mode only)."""


@dataclass(frozen=True)
class SearchBudget:
    """Resource limits for one search call.

    Exhaustion is reported as Outcome.BUDGET, never conflated with a
    completed refutation.  ``parallel_width`` > 1 lets callers split the
    root branching factor across worker threads; with ``deterministic``
    (the default) workers run to completion and the lexicographically
    least witness found is returned.
    """

    node_limit: int | None = None
    time_limit_ms: float | None = None
    parallel_width: int = 1
    deterministic: bool = True

    def __post_init__(self):
        if self.node_limit is not None and self.node_limit < 1:
            raise ValueError("node_limit must be positive")
        if self.time_limit_ms is not None and self.time_limit_ms <= 0:
            raise ValueError("time_limit_ms must be positive")
        if self.parallel_width < 1:
            raise ValueError("parallel_width must be positive")


DEFAULT_BUDGET = SearchBudget()


def _mask_of(values: Iterable[int]) -> int:
    m = 0
    for v in values:
        m |= 1 << v
    return m


def _bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class Csp:
    """A CSP over variables 0..n-1 with bitmask domains.

    Constraints are added via :meth:`add_constraint` with a variable scope
    and the list of allowed value tuples.  Repeated variables in a scope are
    collapsed by restricting the allowed tuples to the matching diagonal.
    Identical (scope, key) pairs are added once when ``key`` is given.
    """

    def __init__(self, nvars: int, domain_size: int):
        if nvars < 0 or domain_size < 1:
            raise ValueError("need nvars >= 0 and domain_size >= 1")
        self.nvars = nvars
        self.domain_size = domain_size
        self.full_mask = (1 << domain_size) - 1
        self.dom = [self.full_mask] * nvars
        # binary constraints: one support table per unordered var pair
        self._bin_pairs: dict[tuple[int, int], int] = {}
        self._bin_ends: list[tuple[int, int]] = []
        self._bin_sup: list[tuple[list[int], list[int]]] = []
        self._var_bins: list[list[int]] = [[] for _ in range(nvars)]
        # wider constraints
        self._nary: list[tuple[tuple[int, ...], tuple[tuple[int, ...], ...]]] = []
        self._var_narys: list[list[int]] = [[] for _ in range(nvars)]
        self._seen_keys: set = set()
        self._failed = False
        self.nodes_explored = 0

    def restrict(self, var: int, values: Iterable[int]):
        self.dom[var] &= _mask_of(values)
        if self.dom[var] == 0:
            self._failed = True

    def assign(self, var: int, value: int):
        self.restrict(var, (value,))

    def add_constraint(self, scope: Sequence[int], allowed: Sequence[Sequence[int]],
                       key=None):
        if key is not None:
            dedup = (tuple(scope), key)
            if dedup in self._seen_keys:
                return
            self._seen_keys.add(dedup)
        scope = tuple(scope)
        # collapse repeated variables onto the diagonal of the allowed set
        first_pos: dict[int, int] = {}
        positions = []
        for i, v in enumerate(scope):
            if v not in first_pos:
                first_pos[v] = i
                positions.append(i)
        if len(positions) != len(scope):
            kept_scope = tuple(scope[i] for i in positions)
            kept = []
            for t in allowed:
                if all(t[i] == t[first_pos[scope[i]]] for i in range(len(scope))):
                    kept.append(tuple(t[i] for i in positions))
            scope, allowed = kept_scope, kept
        arity = len(scope)
        if arity == 0:
            return
        if arity == 1:
            self.restrict(scope[0], (t[0] for t in allowed))
            return
        if arity == 2:
            self._add_binary(scope[0], scope[1], allowed)
            return
        tuples = tuple(sorted({tuple(t) for t in allowed}))
        idx = len(self._nary)
        self._nary.append((scope, tuples))
        for v in scope:
            self._var_narys[v].append(idx)

    def _add_binary(self, x: int, y: int, allowed):
        if x > y:
            x, y = y, x
            allowed = [(b, a) for a, b in allowed]
        pair = (x, y)
        if pair in self._bin_pairs:
            sup_xy, sup_yx = self._bin_sup[self._bin_pairs[pair]]
            new_xy = [0] * self.domain_size
            new_yx = [0] * self.domain_size
            for a, b in allowed:
                new_xy[a] |= 1 << b
                new_yx[b] |= 1 << a
            for v in range(self.domain_size):
                sup_xy[v] &= new_xy[v]
                sup_yx[v] &= new_yx[v]
            return
        sup_xy = [0] * self.domain_size
        sup_yx = [0] * self.domain_size
        for a, b in allowed:
            sup_xy[a] |= 1 << b
            sup_yx[b] |= 1 << a
        idx = len(self._bin_sup)
        self._bin_pairs[pair] = idx
        self._bin_ends.append(pair)
        self._bin_sup.append((sup_xy, sup_yx))
        self._var_bins[x].append(idx)
        self._var_bins[y].append(idx)

    def restricted_copy(self, var: int, values: Iterable[int]) -> "Csp":
        """Clone sharing the (immutable) constraint tables, with one domain cut."""
        other = Csp.__new__(Csp)
        other.nvars = self.nvars
        other.domain_size = self.domain_size
        other.full_mask = self.full_mask
        other.dom = list(self.dom)
        other._bin_pairs = self._bin_pairs
        other._bin_ends = self._bin_ends
        other._bin_sup = self._bin_sup
        other._var_bins = self._var_bins
        other._nary = self._nary
        other._var_narys = self._var_narys
        other._seen_keys = set()
        other._failed = self._failed
        other.nodes_explored = 0
        other.restrict(var, values)
        return other

    # -- propagation ---------------------------------------------------------

    def _propagate(self, dom: list[int], dirty_vars) -> bool:
        """Enforce GAC starting from the given dirty variables; False on wipeout."""
        ends = self._bin_ends
        sup = self._bin_sup
        nary = self._nary
        queue = deque(dirty_vars)
        queued = set(queue)
        while queue:
            var = queue.popleft()
            queued.discard(var)
            for bi in self._var_bins[var]:
                x, y = ends[bi]
                sup_xy, sup_yx = sup[bi]
                m = 0
                dx = dom[x]
                while dx:
                    low = dx & -dx
                    m |= sup_xy[low.bit_length() - 1]
                    dx ^= low
                new_y = dom[y] & m
                if new_y != dom[y]:
                    if not new_y:
                        return False
                    dom[y] = new_y
                    if y not in queued:
                        queue.append(y)
                        queued.add(y)
                m = 0
                dy = dom[y]
                while dy:
                    low = dy & -dy
                    m |= sup_yx[low.bit_length() - 1]
                    dy ^= low
                new_x = dom[x] & m
                if new_x != dom[x]:
                    if not new_x:
                        return False
                    dom[x] = new_x
                    if x not in queued:
                        queue.append(x)
                        queued.add(x)
            for ni in self._var_narys[var]:
                scope, allowed = nary[ni]
                k = len(scope)
                masks = [0] * k
                doms = [dom[v] for v in scope]
                for t in allowed:
                    ok = True
                    for i in range(k):
                        if not doms[i] >> t[i] & 1:
                            ok = False
                            break
                    if ok:
                        for i in range(k):
                            masks[i] |= 1 << t[i]
                for i in range(k):
                    v = scope[i]
                    new = dom[v] & masks[i]
                    if new != dom[v]:
                        if not new:
                            return False
                        dom[v] = new
                        if v not in queued:
                            queue.append(v)
                            queued.add(v)
        return True

    # -- search ----------------------------------------------------------------

    def solve(self, budget: SearchBudget | None = None, order: str = "mindom",
              stop_check=None) -> tuple[Outcome, tuple[int, ...] | None]:
        """First solution or refutation.  Node count in ``self.nodes_explored``."""
        it = self.solutions(budget=budget, order=order, stop_check=stop_check)
        try:
            sol = next(it)
        except StopIteration:
            return Outcome.REFUTED, None
        except BudgetExceededError:
            return Outcome.BUDGET, None
        it.close()
        return Outcome.FOUND, sol

    def solutions(self, budget: SearchBudget | None = None, order: str = "mindom",
                  stop_check=None) -> Iterator[tuple[int, ...]]:
        """Yield all solutions; lexicographic when order='index'.

        Raises BudgetExceededError when limits run out mid-enumeration.
        """
        budget = budget or DEFAULT_BUDGET
        self.nodes_explored = 0
        if self._failed:
            return
        dom = list(self.dom)
        if not self._propagate(dom, range(self.nvars)):
            return
        node_limit = budget.node_limit
        deadline = None
        if budget.time_limit_ms is not None:
            deadline = time.monotonic() + budget.time_limit_ms / 1000.0
        nodes = 0
        static = order == "index"
        nvars = self.nvars

        def pick_var(d: list[int]) -> int:
            if static:
                for v in range(nvars):
                    m = d[v]
                    if m & (m - 1):
                        return v
                return -1
            best = -1
            best_count = 1 << 62
            for v in range(nvars):
                m = d[v]
                if m & (m - 1):
                    c = m.bit_count()
                    if c < best_count:
                        best, best_count = v, c
                        if c == 2:
                            break
            return best

        # Explicit DFS stack: (domain snapshot, branch var, untried value bits).
        stack: list[tuple[list[int], int, int]] = []
        cur: list[int] | None = dom
        del dom
        while True:
            if cur is not None:
                var = pick_var(cur)
                if var < 0:
                    self.nodes_explored = nodes
                    yield tuple(m.bit_length() - 1 for m in cur)
                else:
                    stack.append((cur, var, cur[var]))
                cur = None
            if not stack:
                self.nodes_explored = nodes
                return
            base, var, pending = stack[-1]
            if not pending:
                stack.pop()
                continue
            low = pending & -pending
            stack[-1] = (base, var, pending ^ low)
            nodes += 1
            if node_limit is not None and nodes > node_limit:
                self.nodes_explored = nodes
                raise BudgetExceededError("node limit exceeded")
            if nodes % 64 == 0:
                if deadline is not None and time.monotonic() > deadline:
                    self.nodes_explored = nodes
                    raise BudgetExceededError("time limit exceeded")
                if stop_check is not None and stop_check():
                    self.nodes_explored = nodes
                    raise CancelledError()
            child = list(base)
            child[var] = low
            if self._propagate(child, (var,)):
                cur = child


def parallel_solve(csp: Csp, budget: SearchBudget):
    """Split the root branching factor across worker threads.

    Returns (outcome, witness, total nodes).  With ``deterministic`` every
    worker runs its slice to completion and the lexicographically least
    witness wins; otherwise the first winner cancels the rest.
    """
    root = next((v for v in range(csp.nvars) if csp.dom[v] & (csp.dom[v] - 1)), None)
    if root is None:
        outcome, sol = csp.solve(budget=budget)
        return outcome, sol, csp.nodes_explored
    values = [v for v in range(csp.domain_size) if csp.dom[root] >> v & 1]
    width = min(budget.parallel_width, len(values))
    slices = [values[i::width] for i in range(width)]
    stop = threading.Event()
    deterministic = budget.deterministic

    def run(slice_values):
        sub = csp.restricted_copy(root, slice_values)
        check = None if deterministic else stop.is_set
        try:
            outcome, sol = sub.solve(budget=budget, stop_check=check)
        except CancelledError:
            return Outcome.REFUTED, None, sub.nodes_explored, True
        if outcome is Outcome.FOUND and not deterministic:
            stop.set()
        return outcome, sol, sub.nodes_explored, False

    with ThreadPoolExecutor(max_workers=width) as pool:
        results = list(pool.map(run, slices))
    nodes = sum(r[2] for r in results)
    found = sorted(r[1] for r in results if r[0] is Outcome.FOUND)
    if found:
        return Outcome.FOUND, found[0], nodes
    if any(r[0] is Outcome.BUDGET or r[3] for r in results):
        return Outcome.BUDGET, None, nodes
    return Outcome.REFUTED, None, nodes
