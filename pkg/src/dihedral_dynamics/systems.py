"""Concrete Cantor minimal systems for the infinite dihedral group.

The group is Z x| Z_2 with product (n,s)(m,t) = (n + (-1)^s m, s+t mod 2),
generated by the translation (1,0) and the flip (0,1).  Three families of
systems are provided:

* :class:`DenjoyFlipSystem` -- the cut circle with rotation x -> x + theta
  and flip x -> -x (cut copies swapped, so the flip has the single fixed
  point 1/2);
* :class:`OdometerSystem` -- inverse limits of the finite quotients
  Z/n_i with (1,0) acting as +1 and (0,1) as negation, along a
  divisibility chain n_1 | n_2 | ...;
* :class:`DoubledSystem` -- two copies of a cut circle exchanged by the
  flip, with the rotation acting forwards on one copy and backwards on
  the other; the resulting action is free and its translation part is
  not minimal.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Optional, Sequence

from .errors import NonStabilizationError
from .exact_circle import Arc, ClopenSet, CutPoint, QuadExt, Theta

__all__ = [
    "GroupElement",
    "IDENTITY",
    "FLIP",
    "TRANSLATION",
    "FixedPointSet",
    "ThreadCount",
    "DenjoyFlipSystem",
    "DoubledClopen",
    "DoubledSystem",
    "LevelSet",
    "OdometerSystem",
    "CirclePartition",
    "OdometerPartition",
    "act",
    "fixed_points",
    "top_freeness_check",
    "cover_matrix",
    "pullback_matrix",
]


@dataclass(frozen=True)
class GroupElement:
    """The element (n, s) of Z x| Z_2; s = 1 conjugates Z by -1."""

    n: int
    s: int

    def __post_init__(self) -> None:
        if self.s not in (0, 1):
            raise ValueError("flip bit must be 0 or 1")

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        sign = -1 if self.s else 1
        return GroupElement(self.n + sign * other.n, self.s ^ other.s)

    def inverse(self) -> "GroupElement":
        return GroupElement(self.n if self.s else -self.n, self.s)

    def is_identity(self) -> bool:
        return self.n == 0 and self.s == 0

    def to_json(self) -> list:
        return [self.n, self.s]

    @classmethod
    def from_json(cls, data: Sequence[int]) -> "GroupElement":
        if len(data) != 2:
            raise ValueError("group element must be a pair [n, s]")
        return cls(int(data[0]), int(data[1]))

    def __str__(self) -> str:
        return f"({self.n},{self.s})"


IDENTITY = GroupElement(0, 0)
FLIP = GroupElement(0, 1)
TRANSLATION = GroupElement(1, 0)


@dataclass(frozen=True)
class FixedPointSet:
    """The exact fixed points of one group element in a circle system."""

    element: GroupElement
    points: tuple

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class ThreadCount:
    """Fixed-point count of an odometer element across levels.

    ``count`` is the number of level-compatible fixed threads surviving
    backward pruning from the computation horizon; ``stabilized_at`` is
    the first level from which that count is constant on the pruned
    range.
    """

    element: GroupElement
    count: int
    stabilized_at: int
    horizon: int
    per_level: tuple


# ---------------------------------------------------------------------------
# Circle systems
# ---------------------------------------------------------------------------


class DenjoyFlipSystem:
    """Rotation by theta plus the flip x -> -x on the cut circle."""

    kind = "denjoy_flip"

    def __init__(self, theta: Theta):
        self.theta = theta

    def __eq__(self, other) -> bool:
        return isinstance(other, DenjoyFlipSystem) and self.theta == other.theta

    def __hash__(self) -> int:
        return hash((self.kind, self.theta))

    def full(self) -> ClopenSet:
        return ClopenSet.full_circle(self.theta)

    def empty(self) -> ClopenSet:
        return ClopenSet.empty(self.theta)

    def act(self, g: GroupElement, s: ClopenSet) -> ClopenSet:
        """Exact image of a clopen set under (n,s): x -> (-1)^s x + n*theta.

        The flip sends [l+, r+) to [(-r)+, (-l)+) because it swaps the
        two copies of every cut point.
        """
        if s.full or s.is_empty():
            return s
        arcs = []
        for a in s.arcs:
            if g.s:
                left = a.right.negate().shift(g.n)
                right = a.left.negate().shift(g.n)
            else:
                left = a.left.shift(g.n)
                right = a.right.shift(g.n)
            arcs.append(Arc(left, right))
        arcs.sort(key=lambda a: a.left)
        return ClopenSet(self.theta, tuple(arcs))

    def fixed_points(self, g: GroupElement) -> FixedPointSet:
        """Solve (-1)^s x + n*theta = x on the cut circle.

        Rotations are free.  For a reflection the two circle solutions
        n*theta/2 and n*theta/2 + 1/2 are kept only when they avoid the
        cut lattice, where the flip exchanges the two copies instead of
        fixing anything.
        """
        if g.is_identity():
            raise ValueError("fixed points are only defined for non-identity elements")
        if g.s == 0:
            return FixedPointSet(g, ())
        theta = self.theta
        half = Fraction(1, 2)
        candidates = [
            QuadExt(Fraction(0), Fraction(g.n, 2), theta).frac(),
            QuadExt(half, Fraction(g.n, 2), theta).frac(),
        ]
        points = []
        for x in candidates:
            # x is a cut point iff x = m + k*theta with integers m, k.
            if x.a.denominator == 1 and x.b.denominator == 1:
                continue
            points.append(x)
        points.sort()
        return FixedPointSet(g, tuple(points))

    # -- level structure ----------------------------------------------

    def cut_window(self, lo: int, hi: int) -> list:
        return sorted(CutPoint.of(self.theta, n) for n in range(lo, hi + 1))

    def cells(self, lo: int, hi: int) -> list:
        """Arcs between consecutive cut points with indices in [lo, hi].

        A single cut yields one cell: the whole circle opened at that
        cut, represented by the full-circle set.
        """
        cuts = self.cut_window(lo, hi)
        if len(cuts) == 1:
            return [ClopenSet.full_circle(self.theta)]
        out = []
        for i, c in enumerate(cuts):
            nxt = cuts[(i + 1) % len(cuts)]
            out.append(ClopenSet(self.theta, (Arc(c, nxt),)))
        return out

    def symmetric_cells(self, level: int) -> list:
        return self.cells(-level, level)

    def shifted_cells(self, level: int) -> list:
        return self.cells(1 - level, level)

    def level_partition(self, level: int) -> "CirclePartition":
        """Level cells together with the induced maps.

        The symmetric window [-N, N] is flip-invariant and the rotation
        maps its cells into the level-(N+1) cells; the reflected
        rotation (1,1) permutes the cells of the shifted window
        [1-N, N] instead, since no finite window is invariant under
        both involutions.
        """
        if level < 0:
            raise ValueError("level must be >= 0")
        cells = self.symmetric_cells(level)
        finer = self.symmetric_cells(level + 1)
        sigma = permutation_of_cells(self, FLIP, cells)
        phi_cover = [cover_indices(self.act(TRANSLATION, c), finer) for c in cells]
        shifted = self.shifted_cells(level) if level >= 1 else []
        phi_sigma = permutation_of_cells(self, GroupElement(1, 1), shifted) if shifted else []
        return CirclePartition(
            cells=tuple(cells),
            sigma_perm=tuple(sigma),
            phi_cover=tuple(tuple(ix) for ix in phi_cover),
            shifted_cells=tuple(shifted),
            phi_sigma_perm=tuple(phi_sigma),
        )

    def to_json(self) -> dict:
        return {"type": self.kind, "theta": self.theta.to_json()}


@dataclass(frozen=True)
class CirclePartition:
    cells: tuple
    sigma_perm: tuple
    phi_cover: tuple
    shifted_cells: tuple
    phi_sigma_perm: tuple

    def sigma_matrix(self) -> list:
        return _perm_matrix(self.sigma_perm)

    def phi_matrix(self) -> list:
        """0/1 matrix: column j marks the finer cells covering phi(cell j)."""
        rows = 1 + max(max(ix) for ix in self.phi_cover)
        mat = [[0] * len(self.phi_cover) for _ in range(rows)]
        for j, ixs in enumerate(self.phi_cover):
            for i in ixs:
                mat[i][j] = 1
        return mat

    def phi_sigma_matrix(self) -> list:
        return _perm_matrix(self.phi_sigma_perm)


def _perm_matrix(perm: Sequence[int]) -> list:
    mat = [[0] * len(perm) for _ in range(len(perm))]
    for j, i in enumerate(perm):
        mat[i][j] = 1
    return mat


# ---------------------------------------------------------------------------
# Doubled system (free action whose translation part is not minimal)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DoubledClopen:
    """A clopen subset of two disjoint copies of the cut circle."""

    comp0: ClopenSet
    comp1: ClopenSet

    def union(self, other: "DoubledClopen") -> "DoubledClopen":
        return DoubledClopen(self.comp0.union(other.comp0), self.comp1.union(other.comp1))

    def intersection(self, other: "DoubledClopen") -> "DoubledClopen":
        return DoubledClopen(self.comp0.intersection(other.comp0),
                             self.comp1.intersection(other.comp1))

    def difference(self, other: "DoubledClopen") -> "DoubledClopen":
        return DoubledClopen(self.comp0.difference(other.comp0),
                             self.comp1.difference(other.comp1))

    def is_empty(self) -> bool:
        return self.comp0.is_empty() and self.comp1.is_empty()

    def measure(self) -> QuadExt:
        # Normalized so the two-copy space has total measure 1.
        return (self.comp0.measure() + self.comp1.measure()) * Fraction(1, 2)

    def to_json(self) -> dict:
        return {"components": [self.comp0.to_json(), self.comp1.to_json()]}


class DoubledSystem:
    """Two copies of the cut circle, exchanged by the flip.

    The translation rotates copy 0 forwards and copy 1 backwards, which
    makes the dihedral relations hold while leaving each copy
    translation-invariant.  The action is free: the flip part swaps the
    copies and the rotation part is an irrational rotation.
    """

    kind = "doubled"

    def __init__(self, theta: Theta):
        self.theta = theta
        self.base = DenjoyFlipSystem(theta)

    def __eq__(self, other) -> bool:
        return isinstance(other, DoubledSystem) and self.theta == other.theta

    def __hash__(self) -> int:
        return hash((self.kind, self.theta))

    def full(self) -> DoubledClopen:
        return DoubledClopen(self.base.full(), self.base.full())

    def empty(self) -> DoubledClopen:
        return DoubledClopen(self.base.empty(), self.base.empty())

    def act(self, g: GroupElement, s: DoubledClopen) -> DoubledClopen:
        a, b = (s.comp1, s.comp0) if g.s else (s.comp0, s.comp1)
        fwd = GroupElement(g.n, 0)
        return DoubledClopen(self.base.act(fwd, a), self.base.act(fwd.inverse(), b))

    def fixed_points(self, g: GroupElement) -> FixedPointSet:
        if g.is_identity():
            raise ValueError("fixed points are only defined for non-identity elements")
        # Reflections swap the two copies; translations restrict to free
        # irrational rotations on each copy.
        return FixedPointSet(g, ())

    def to_json(self) -> dict:
        return {"type": self.kind, "theta": self.theta.to_json()}


# ---------------------------------------------------------------------------
# Odometers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevelSet:
    """A clopen subset of the inverse limit, given at a finite level.

    ``residues`` collects the classes k mod ``modulus`` whose cylinder
    belongs to the set.
    """

    modulus: int
    residues: frozenset

    def __post_init__(self) -> None:
        if any(not (0 <= k < self.modulus) for k in self.residues):
            raise ValueError("residues must be reduced modulo the level modulus")

    def union(self, other: "LevelSet") -> "LevelSet":
        self._check(other)
        return LevelSet(self.modulus, self.residues | other.residues)

    def intersection(self, other: "LevelSet") -> "LevelSet":
        self._check(other)
        return LevelSet(self.modulus, self.residues & other.residues)

    def difference(self, other: "LevelSet") -> "LevelSet":
        self._check(other)
        return LevelSet(self.modulus, self.residues - other.residues)

    def is_empty(self) -> bool:
        return not self.residues

    def measure(self) -> Fraction:
        return Fraction(len(self.residues), self.modulus)

    def _check(self, other: "LevelSet") -> None:
        if self.modulus != other.modulus:
            raise ValueError("level sets at different levels")

    def to_json(self) -> dict:
        return {"modulus": self.modulus, "residues": sorted(self.residues)}


class OdometerSystem:
    """The odometer along a strict divisibility chain n_1 | n_2 | ..."""

    kind = "odometer"

    def __init__(self, chain: Sequence[int]):
        chain = tuple(int(n) for n in chain)
        if len(chain) < 2:
            raise ValueError("chain must contain at least two levels")
        for a, b in zip(chain, chain[1:]):
            if not (0 < a < b):
                raise ValueError("chain must be strictly increasing and positive")
            if b % a:
                raise ValueError("each level must divide the next")
        self.chain = chain

    def __eq__(self, other) -> bool:
        return isinstance(other, OdometerSystem) and self.chain == other.chain

    def __hash__(self) -> int:
        return hash((self.kind, self.chain))

    def modulus(self, level: int) -> int:
        if not (1 <= level <= len(self.chain)):
            raise ValueError(f"level must be in 1..{len(self.chain)}")
        return self.chain[level - 1]

    def full(self, level: int) -> LevelSet:
        n = self.modulus(level)
        return LevelSet(n, frozenset(range(n)))

    def empty(self, level: int) -> LevelSet:
        return LevelSet(self.modulus(level), frozenset())

    def act(self, g: GroupElement, s: LevelSet) -> LevelSet:
        sign = -1 if g.s else 1
        return LevelSet(s.modulus,
                        frozenset((g.n + sign * k) % s.modulus for k in s.residues))

    def fixed_fraction(self, g: GroupElement, level: int) -> Fraction:
        """|{x in Z/n_i : g x = x}| / n_i, exactly."""
        n = self.modulus(level)
        if g.s == 0:
            return Fraction(1) if g.n % n == 0 else Fraction(0)
        # g x = x  <=>  2x = n (mod modulus), solvable iff gcd(2, modulus) | n.
        g2 = gcd(2, n)
        return Fraction(g2, n) if g.n % g2 == 0 else Fraction(0)

    def level_fixed_set(self, g: GroupElement, level: int) -> frozenset:
        n = self.modulus(level)
        if g.s == 0:
            return frozenset(range(n)) if g.n % n == 0 else frozenset()
        g2 = gcd(2, n)
        if g.n % g2:
            return frozenset()
        # Solutions of 2x = g.n (mod n): one per residue class mod n//g2.
        half = n // g2
        if g2 == 2:
            x0 = (g.n // 2) % half
        else:
            x0 = (g.n * pow(2, -1, n)) % n
        return frozenset((x0 + t * half) % n for t in range(g2))

    def stable_fixed_count(self, g: GroupElement, max_level: int) -> ThreadCount:
        """Count inverse-limit fixed points of g by thread pruning.

        Level-wise fixed sets are chained by the reduction maps; threads
        that cannot be extended to the horizon are pruned away, and the
        count must be constant on the pruned range to be reported.
        """
        if g.is_identity():
            raise ValueError("count is only defined for non-identity elements")
        if max_level < 2:
            raise ValueError("max_level must be >= 2")
        if max_level > len(self.chain):
            raise ValueError("max_level exceeds the computed chain")
        forward = []
        for level in range(1, max_level + 1):
            fixed = self.level_fixed_set(g, level)
            if forward:
                prev = forward[-1]
                n_prev = self.modulus(level - 1)
                fixed = frozenset(x for x in fixed if (x % n_prev) in prev)
            forward.append(fixed)
        pruned = list(forward)
        for level in range(max_level - 1, 0, -1):
            n_here = self.modulus(level)
            reachable = {y % n_here for y in pruned[level]}
            pruned[level - 1] = frozenset(x for x in pruned[level - 1] if x in reachable)
        counts = [len(s) for s in pruned]
        usable = counts[:-1] if max_level >= 2 else counts
        final = usable[-1]
        stabilized_at = len(usable)
        while stabilized_at > 1 and usable[stabilized_at - 2] == final:
            stabilized_at -= 1
        if any(c != final for c in usable[stabilized_at - 1:]):
            raise NonStabilizationError(
                f"thread count for {g} still changing at level {max_level}", max_level)
        if stabilized_at == len(usable) and len(usable) > 1:
            raise NonStabilizationError(
                f"thread count for {g} settled only at the horizon", max_level)
        return ThreadCount(element=g, count=final, stabilized_at=stabilized_at,
                           horizon=max_level, per_level=tuple(counts))

    # -- level structure ----------------------------------------------

    def cylinder(self, level: int, residue: int) -> LevelSet:
        n = self.modulus(level)
        return LevelSet(n, frozenset({residue % n}))

    def refine(self, s: LevelSet, level_from: int, level_to: int) -> LevelSet:
        """Re-express a level set at a deeper level."""
        n_from, n_to = self.modulus(level_from), self.modulus(level_to)
        if s.modulus != n_from or n_to % n_from:
            raise ValueError("incompatible refinement levels")
        return LevelSet(n_to, frozenset(
            k + t * n_from for k in s.residues for t in range(n_to // n_from)))

    def cells(self, level: int) -> list:
        n = self.modulus(level)
        return [self.cylinder(level, k) for k in range(n)]

    def level_partition(self, level: int) -> "OdometerPartition":
        n = self.modulus(level)
        cells = self.cells(level)
        sigma = permutation_of_cells(self, FLIP, cells)
        phi = permutation_of_cells(self, TRANSLATION, cells)
        phi_sigma = permutation_of_cells(self, GroupElement(1, 1), cells)
        return OdometerPartition(cells=tuple(cells), sigma_perm=tuple(sigma),
                                 phi_perm=tuple(phi), phi_sigma_perm=tuple(phi_sigma))

    def coset_identification_ok(self, level: int, span: Optional[int] = None) -> bool:
        """Check that (k, j) |-> k mod n_i identifies the coset space.

        Exhaustive over a window of representatives: two elements name
        the same coset (their quotient lies in the level subgroup
        n_i Z x| Z_2) exactly when their translation parts agree modulo
        the level.
        """
        n = self.modulus(level)
        span = span if span is not None else n
        elems = [GroupElement(k, j) for k in range(-span, span + 1) for j in (0, 1)]
        for g1 in elems:
            for g2 in elems:
                same_coset = (g1.inverse() * g2).n % n == 0
                if same_coset != ((g1.n - g2.n) % n == 0):
                    return False
        return True

    def to_json(self) -> dict:
        return {"type": self.kind, "chain": list(self.chain)}


@dataclass(frozen=True)
class OdometerPartition:
    cells: tuple
    sigma_perm: tuple
    phi_perm: tuple
    phi_sigma_perm: tuple

    def sigma_matrix(self) -> list:
        return _perm_matrix(self.sigma_perm)

    def phi_matrix(self) -> list:
        return _perm_matrix(self.phi_perm)

    def phi_sigma_matrix(self) -> list:
        return _perm_matrix(self.phi_sigma_perm)


# ---------------------------------------------------------------------------
# Shared operations
# ---------------------------------------------------------------------------


def act(system, g: GroupElement, s):
    return system.act(g, s)


def fixed_points(system, g: GroupElement) -> FixedPointSet:
    return system.fixed_points(g)


def permutation_of_cells(system, g: GroupElement, cells: Sequence) -> list:
    """The permutation j -> index of g(cell_j); errors if g does not permute."""
    cells = list(cells)
    perm = []
    for j, c in enumerate(cells):
        image = system.act(g, c)
        try:
            perm.append(cells.index(image))
        except ValueError:
            raise ValueError(f"{g} does not permute the given cells (cell {j})")
    if sorted(perm) != list(range(len(cells))):
        raise ValueError(f"{g} does not act bijectively on the given cells")
    return perm


def cover_indices(target, cells: Sequence) -> list:
    """Indices of the cells whose union is exactly ``target``; exact check."""
    picked = []
    for i, c in enumerate(cells):
        inter = c.intersection(target)
        if inter.is_empty():
            continue
        if inter != c:
            raise ValueError("target is not a union of the given cells")
        picked.append(i)
    union = None
    for i in picked:
        union = cells[i] if union is None else union.union(cells[i])
    if union is None or union != target:
        raise ValueError("target is not covered by the given cells")
    return picked


def cover_matrix(coarse: Sequence, fine: Sequence) -> list:
    """Matrix of the refinement: column j sums the fine cells inside coarse j."""
    mat = [[0] * len(coarse) for _ in range(len(fine))]
    for j, c in enumerate(coarse):
        for i in cover_indices(c, fine):
            mat[i][j] = 1
    return mat


def pullback_matrix(system, g: GroupElement, src_cells: Sequence, dst_cells: Sequence) -> list:
    """Matrix of f -> f o g from functions on src_cells to functions on dst_cells.

    The indicator of a source cell pulls back to the indicator of its
    preimage, which must be an exact union of destination cells.
    """
    mat = [[0] * len(src_cells) for _ in range(len(dst_cells))]
    g_inv = g.inverse()
    for j, c in enumerate(src_cells):
        pre = system.act(g_inv, c)
        for i in cover_indices(pre, dst_cells):
            mat[i][j] = 1
    return mat


def top_freeness_check(chain: Sequence[int], max_level: int, search: int = 4) -> dict:
    """Search conjugation witnesses taking the flip out of the chain core.

    For a strict divisibility chain the intersection of the level
    subgroups is {identity, flip}; the check hunts, for every level j up
    to ``max_level``, an element b of the level subgroup with
    b^-1 (0,1) b outside that intersection, and reports the witnesses.
    """
    odo = OdometerSystem(chain)
    if max_level > len(odo.chain):
        raise ValueError("max_level exceeds the computed chain")
    core = {IDENTITY, FLIP}
    witnesses = {}
    ok = True
    for j in range(1, max_level + 1):
        n_j = odo.modulus(j)
        found = None
        for m in range(1, search + 1):
            for t in (0, 1):
                b = GroupElement(n_j * m, t)
                conj = b.inverse() * FLIP * b
                if conj not in core:
                    found = (b, conj)
                    break
            if found:
                break
        if found is None:
            ok = False
        else:
            witnesses[j] = found
    return {"topologically_free": ok, "witnesses": witnesses}


def system_from_json(data: dict):
    """Parse a system description; unknown fields are rejected."""
    if not isinstance(data, dict) or "type" not in data:
        raise ValueError("system description must be an object with a 'type'")
    kind = data["type"]
    if kind in ("denjoy_flip", "doubled"):
        extra = set(data) - {"type", "theta"}
        if extra:
            raise ValueError(f"unknown system fields: {sorted(extra)}")
        theta = Theta.from_json(data["theta"])
        return DenjoyFlipSystem(theta) if kind == "denjoy_flip" else DoubledSystem(theta)
    if kind == "odometer":
        if "chain" in data:
            extra = set(data) - {"type", "chain"}
            if extra:
                raise ValueError(f"unknown system fields: {sorted(extra)}")
            return OdometerSystem(data["chain"])
        extra = set(data) - {"type", "base", "growth", "levels"}
        if extra:
            raise ValueError(f"unknown system fields: {sorted(extra)}")
        if data.get("growth") != "geometric":
            raise ValueError("only geometric chain growth is supported")
        base, levels = int(data["base"]), int(data["levels"])
        return OdometerSystem([base ** i for i in range(1, levels + 1)])
    raise ValueError(f"unknown system type: {kind!r}")
