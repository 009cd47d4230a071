"""Shared fixtures: the small structures and clones the suite revolves around."""

import pytest

from clonekit import CloneGenSet, OperationTable, RelStructure, add_singletons

# Boolean relations used throughout
LE = [(0, 0), (0, 1), (1, 1)]
RXOR = [(x, y, z) for x in (0, 1) for y in (0, 1) for z in (0, 1) if x ^ y ^ z == 0]
R1IN3 = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
NAE = [(x, y, z) for x in (0, 1) for y in (0, 1) for z in (0, 1)
       if (x, y, z) not in ((0, 0, 0), (1, 1, 1))]
DISEQ = [(0, 1), (1, 0)]

MINORITY = OperationTable(2, 3, tuple(x ^ y ^ z for x in (0, 1)
                                      for y in (0, 1) for z in (0, 1)))
MIN2 = OperationTable(2, 2, (0, 0, 0, 1))
MAX2 = OperationTable(2, 2, (0, 1, 1, 1))


@pytest.fixture
def le_plain():
    return RelStructure.make(2, {"le": LE})


@pytest.fixture
def le_struct():
    return RelStructure.make(2, {"le": LE, "s0": [(0,)], "s1": [(1,)]})


@pytest.fixture
def rxor_struct():
    return RelStructure.make(2, {"rxor": RXOR, "s0": [(0,)], "s1": [(1,)]})


@pytest.fixture
def k2():
    return RelStructure.make(2, {"edge": [(0, 1), (1, 0)]})


@pytest.fixture
def k3():
    return RelStructure.make(3, {"edge": [(a, b) for a in range(3)
                                          for b in range(3) if a != b]})


@pytest.fixture
def k3s(k3):
    return add_singletons(k3)


@pytest.fixture
def path3():
    return RelStructure.make(3, {"edge": [(0, 1), (1, 0), (1, 2), (2, 1)]})


# The Z2 x Z2 example: elements coded (a, b) -> 2a + b, so the group
# operation is xor of codes.  R{ab} holds the triples summing to (a, b).
def hepp_A() -> RelStructure:
    rels = {}
    for c in range(4):
        rels[f"R{c >> 1}{c & 1}"] = [(x, y, z) for x in range(4)
                                     for y in range(4) for z in range(4)
                                     if x ^ y ^ z == c]
    for c in range(4):
        rels[f"s{c >> 1}{c & 1}"] = [(c,)]
    return RelStructure.make(4, rels)


def hepp_Ap(a: RelStructure | None = None) -> RelStructure:
    a = a or hepp_A()
    return RelStructure.make(4, {
        "R00": a.relations["R00"], "R10": a.relations["R10"],
        "s00": [(0,)], "s10": [(2,)],
    })


def hepp_B() -> RelStructure:
    # named to match the reduct's signature so isomorphism checks line up
    return RelStructure.make(2, {
        "R00": [(x, y, z) for x in (0, 1) for y in (0, 1) for z in (0, 1)
                if x ^ y ^ z == 0],
        "R10": [(x, y, z) for x in (0, 1) for y in (0, 1) for z in (0, 1)
                if x ^ y ^ z == 1],
        "s00": [(0,)], "s10": [(1,)],
    })


@pytest.fixture
def hepp_a():
    return hepp_A()


@pytest.fixture
def hepp_ap():
    return hepp_Ap()


@pytest.fixture
def hepp_b():
    return hepp_B()


@pytest.fixture
def proj_clone():
    return CloneGenSet.of(2, [])


@pytest.fixture
def minority_clone():
    return CloneGenSet.of(2, [MINORITY])


@pytest.fixture
def lattice_clone():
    return CloneGenSet.of(2, [MIN2, MAX2])
