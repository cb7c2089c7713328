"""Exact arithmetic for the point group D4 and its torus extension.

Elements of D4 are written m^a r^b with a in {0,1} and b in {0,1,2,3},
where r is the 90-degree rotation and m the mirror reflection.  The
canonical 2x2 integer matrices are

    r -> [[0, -1], [1, 0]]        m -> [[-1, 0], [0, 1]]

so that composition of elements is plain integer matrix product.  The
full isometry group of the N x N torus (N odd) is generated by these
point-group matrices together with translations mod N, realized as
homogeneous 3x3 integer matrices [[R, T], [0, 1]].
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import GroupMismatchError, InvalidSubgroupError

ROT_MAT = np.array([[0, -1], [1, 0]])
MIR_MAT = np.array([[-1, 0], [0, 1]])

#: canonical element order used everywhere (matrices, characters, bases)
ELEMENT_NAMES = ("e", "r", "r2", "r3", "m", "mr", "mr2", "mr3")


@dataclass(frozen=True)
class DihedralElement:
    """One of the 8 elements of D4, stored as m^a r^b."""

    a: int  # reflection exponent, 0 or 1
    b: int  # rotation exponent, 0..3

    def __post_init__(self):
        if self.a not in (0, 1) or self.b not in (0, 1, 2, 3):
            raise ValueError(f"invalid exponents a={self.a}, b={self.b}")

    @property
    def name(self) -> str:
        return ELEMENT_NAMES[self.a * 4 + self.b]

    def matrix(self) -> np.ndarray:
        """Faithful 2x2 integer realization (E irrep)."""
        return np.linalg.matrix_power(MIR_MAT, self.a) @ np.linalg.matrix_power(
            ROT_MAT, self.b
        )

    def __mul__(self, other: "DihedralElement") -> "DihedralElement":
        if not isinstance(other, DihedralElement):
            return NotImplemented
        # m^a r^b * m^c r^d = m^(a+c) r^(d - b) if c else m^a r^(b+d),
        # from the relation r m = m r^-1.
        if other.a:
            return DihedralElement((self.a + other.a) % 2, (other.b - self.b) % 4)
        return DihedralElement(self.a, (self.b + other.b) % 4)

    def inverse(self) -> "DihedralElement":
        if self.a:
            return DihedralElement(1, self.b)  # reflections are involutions
        return DihedralElement(0, (-self.b) % 4)

    def act(self, x) -> tuple[int, int]:
        """Apply the 2x2 matrix to an integer point (no wrapping)."""
        v = self.matrix() @ np.asarray(x, dtype=int)
        return int(v[0]), int(v[1])

    def __repr__(self):
        return f"DihedralElement({self.name!r})"


IDENTITY = DihedralElement(0, 0)
R = DihedralElement(0, 1)
M = DihedralElement(1, 0)

#: all 8 elements in canonical order
ELEMENTS = tuple(DihedralElement(a, b) for a in (0, 1) for b in range(4))
_BY_NAME = {el.name: el for el in ELEMENTS}


def element(name: str) -> DihedralElement:
    """Look up an element by its text form ("e", "r", ..., "mr3")."""
    try:
        return _BY_NAME[name]
    except KeyError:
        raise KeyError(f"unknown D4 element {name!r}") from None


def element_index(el: DihedralElement) -> int:
    return el.a * 4 + el.b


@dataclass(frozen=True)
class TorusGrid:
    """An N x N grid with wrap-around arithmetic, N odd, origin at (0,0)."""

    n: int

    def __post_init__(self):
        if self.n < 1 or self.n % 2 == 0:
            raise ValueError(f"grid side must be odd and positive, got {self.n}")

    def wrap(self, x) -> tuple[int, int]:
        return int(x[0]) % self.n, int(x[1]) % self.n

    def points(self):
        return itertools.product(range(self.n), range(self.n))


@dataclass(frozen=True)
class IsometryElement:
    """Element tr of p4m on a torus: point-group part h, translation t."""

    h: DihedralElement
    t: tuple[int, int]
    grid: TorusGrid

    def __post_init__(self):
        object.__setattr__(self, "t", self.grid.wrap(self.t))

    def matrix(self) -> np.ndarray:
        """Homogeneous 3x3 integer realization [[R, T], [0, 1]]."""
        out = np.eye(3, dtype=int)
        out[:2, :2] = self.h.matrix()
        out[:2, 2] = self.t
        return out

    def __mul__(self, other: "IsometryElement") -> "IsometryElement":
        if not isinstance(other, IsometryElement):
            return NotImplemented
        if self.grid != other.grid:
            raise GroupMismatchError("cannot compose isometries over different grids")
        # [[R1,T1],[0,1]][[R2,T2],[0,1]] = [[R1R2, R1 T2 + T1],[0,1]]
        t = self.h.act(other.t)
        return IsometryElement(
            self.h * other.h,
            self.grid.wrap((t[0] + self.t[0], t[1] + self.t[1])),
            self.grid,
        )

    def inverse(self) -> "IsometryElement":
        hinv = self.h.inverse()
        t = hinv.act(self.t)
        return IsometryElement(hinv, self.grid.wrap((-t[0], -t[1])), self.grid)

    def act(self, x) -> tuple[int, int]:
        """x |-> R x + T mod N."""
        y = self.h.act(x)
        return self.grid.wrap((y[0] + self.t[0], y[1] + self.t[1]))

    def __repr__(self):
        return f"IsometryElement({self.h.name!r}, t={self.t}, N={self.grid.n})"


def identity_isometry(grid: TorusGrid) -> IsometryElement:
    return IsometryElement(IDENTITY, (0, 0), grid)


def point_isometry(h: DihedralElement, grid: TorusGrid) -> IsometryElement:
    """Embed a point-group element into p4m (zero translation)."""
    return IsometryElement(h, (0, 0), grid)


def section(x, grid: TorusGrid) -> IsometryElement:
    """The pure translation x-bar lifting a grid point into p4m."""
    return IsometryElement(IDENTITY, grid.wrap(x), grid)


def compose(g, h):
    """Compose two elements of the same group (D4 or p4m over one grid)."""
    if isinstance(g, DihedralElement) and isinstance(h, DihedralElement):
        return g * h
    if isinstance(g, IsometryElement) and isinstance(h, IsometryElement):
        return g * h
    raise GroupMismatchError(
        f"cannot compose {type(g).__name__} with {type(h).__name__}"
    )


def inverse(g):
    return g.inverse()


def act_on_point(g: IsometryElement, x, grid: TorusGrid | None = None):
    """Move a grid point by g (left action)."""
    if grid is not None and grid != g.grid:
        raise GroupMismatchError("isometry defined over a different grid")
    return g.act(x)


@dataclass(frozen=True)
class Subgroup:
    """A subgroup of D4, stored as a frozenset of elements."""

    elements: frozenset

    def __post_init__(self):
        els = frozenset(self.elements)
        object.__setattr__(self, "elements", els)
        if IDENTITY not in els:
            raise InvalidSubgroupError("subgroup must contain the identity")
        for g in els:
            if g.inverse() not in els:
                raise InvalidSubgroupError(f"not closed under inverse: {g.name}")
            for h in els:
                if g * h not in els:
                    raise InvalidSubgroupError(
                        f"not closed under composition: {g.name} * {h.name}"
                    )

    def __len__(self):
        return len(self.elements)

    def __contains__(self, el):
        return el in self.elements

    def sorted_elements(self):
        return sorted(self.elements, key=element_index)

    @property
    def name(self) -> str:
        return "{" + ",".join(el.name for el in self.sorted_elements()) + "}"


def enumerate_subgroups() -> list[Subgroup]:
    """All 10 subgroups of D4, smallest first."""
    found = set()
    for size in (1, 2, 4, 8):
        for combo in itertools.combinations(ELEMENTS, size):
            els = frozenset(combo)
            if IDENTITY not in els:
                continue
            if all(g * h in els for g in els for h in els):
                found.add(els)
    groups = [Subgroup(els) for els in found]
    groups.sort(key=lambda s: (len(s), [element_index(e) for e in s.sorted_elements()]))
    return groups


def cosets(subgroup: Subgroup) -> list[frozenset]:
    """Left cosets hK of a subgroup of D4, in order of their least element."""
    seen = []
    covered = set()
    for g in ELEMENTS:
        if g in covered:
            continue
        coset = frozenset(g * k for k in subgroup.elements)
        seen.append(coset)
        covered |= coset
    return seen
