"""Clopen towers, castles, and almost-finiteness certificates.

A tower is a clopen base moved disjointly by a finite shape of group
elements; a castle is a disjoint family of towers, and every castle
produced here partitions the space.  Castles are built from the first
return of the translation to a flip-invariant clopen set Y: the return
time is constant on finitely many clopen pieces of Y, each piece gets
its return time as tower height, and the flip folds each tower onto
itself (the flip composed with the full climb fixes the base).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .amenability import folner, folner_ratio
from .errors import VerificationError
from .exact_circle import ClopenSet, CutPoint, Arc
from .systems import (
    FLIP,
    DenjoyFlipSystem,
    DoubledClopen,
    DoubledSystem,
    GroupElement,
    LevelSet,
    OdometerSystem,
)

__all__ = [
    "Tower",
    "Castle",
    "CastleReport",
    "first_return_castle",
    "verify_castle",
    "almost_finite_certificate",
    "base_from_json",
    "default_invariant_window",
]


@dataclass(frozen=True)
class Tower:
    """A clopen base together with the shape that moves it disjointly."""

    base: object
    shape: tuple
    return_time: int


@dataclass(frozen=True)
class CastleReport:
    disjoint: bool
    covers: bool
    sigma_compatible: bool

    def all_ok(self) -> bool:
        return self.disjoint and self.covers and self.sigma_compatible

    def to_json(self) -> dict:
        return {
            "disjoint": self.disjoint,
            "covers": self.covers,
            "sigmaCompatible": self.sigma_compatible,
        }


@dataclass(frozen=True)
class Castle:
    """A family of towers over one system; verification is exact."""

    system: object
    towers: tuple

    def return_times(self) -> tuple:
        return tuple(t.return_time for t in self.towers)

    def verify(self) -> CastleReport:
        return verify_castle(self)

    def min_return_time(self) -> int:
        return min(t.return_time for t in self.towers)

    def shape_ratios(self, test_set: Sequence[GroupElement]) -> list:
        return [folner_ratio(t.shape, test_set) for t in self.towers]

    def to_json(self) -> dict:
        report = self.verify()
        return {
            "system": self.system.to_json(),
            "towers": [
                {
                    "base": t.base.to_json(),
                    "J": t.return_time,
                    "shape": [g.to_json() for g in t.shape],
                }
                for t in self.towers
            ],
            "verified": report.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Castle":
        from .systems import system_from_json

        system = system_from_json(data["system"])
        towers = []
        for tj in data["towers"]:
            base = base_from_json(system, tj["base"])
            shape = tuple(GroupElement.from_json(g) for g in tj["shape"])
            towers.append(Tower(base=base, shape=shape, return_time=int(tj["J"])))
        return cls(system=system, towers=tuple(towers))


def base_from_json(system, data: dict):
    if isinstance(system, DenjoyFlipSystem):
        return ClopenSet.from_json(system.theta, data)
    if isinstance(system, DoubledSystem):
        c0, c1 = data["components"]
        return DoubledClopen(ClopenSet.from_json(system.theta, c0),
                             ClopenSet.from_json(system.theta, c1))
    if isinstance(system, OdometerSystem):
        return LevelSet(int(data["modulus"]), frozenset(int(k) for k in data["residues"]))
    raise ValueError(f"unsupported system for castle base: {system!r}")


def _full_like(system, sample):
    if isinstance(system, OdometerSystem):
        return LevelSet(sample.modulus, frozenset(range(sample.modulus)))
    return system.full()


def verify_castle(castle: Castle) -> CastleReport:
    """Exact disjointness, coverage, and flip-compatibility of a castle."""
    system = castle.system
    translates = []
    for t in castle.towers:
        for g in t.shape:
            translates.append(system.act(g, t.base))
    disjoint = True
    union = None
    for s in translates:
        if union is None:
            union = s
        else:
            if not union.intersection(s).is_empty():
                disjoint = False
            union = union.union(s)
    covers = union is not None and union == _full_like(system, castle.towers[0].base)
    # flip after the full climb: sigma o phi^J is the element (-J, 1)
    sigma_compatible = all(
        system.act(GroupElement(-t.return_time, 1), t.base) == t.base
        for t in castle.towers
    )
    return CastleReport(disjoint=disjoint, covers=covers, sigma_compatible=sigma_compatible)


def _ceil_inverse_measure(mu) -> int:
    """Smallest integer c with c * mu >= 1, for an exact measure mu > 0."""
    c = 1
    while (mu * c).shift(-1).sign() < 0:
        c *= 2
    lo, hi = c // 2, c
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if (mu * mid).shift(-1).sign() < 0:
            lo = mid
        else:
            hi = mid
    return hi


def first_return_castle(system, y, max_steps: Optional[int] = None) -> Castle:
    """Partition the space into towers over the return-time pieces of y.

    The translation is applied to the moving image of the part of y
    that has not yet come back; each nonempty intersection with y marks
    a return-time value, whose preimage piece becomes a tower base.
    Before returning, the castle is verified exactly: the translation
    climbs partition the space and the flip composed with each full
    climb fixes its base.
    """
    if not isinstance(system, (DenjoyFlipSystem, DoubledSystem)):
        raise ValueError("first-return castles require a circle or doubled system")
    if y.is_empty():
        raise ValueError("y must be nonempty")
    if system.act(FLIP, y) != y:
        raise ValueError("y must be flip-invariant")
    if max_steps is None:
        max_steps = 10 * _ceil_inverse_measure(y.measure()) + 10

    step = GroupElement(1, 0)
    bases = {}
    active = y
    k = 0
    while not active.is_empty():
        k += 1
        if k > max_steps:
            raise VerificationError(
                f"no full return after {max_steps} steps; malformed input?")
        moved = system.act(step, active)
        hit = moved.intersection(y)
        if not hit.is_empty():
            bases[k] = system.act(GroupElement(-k, 0), hit)
        active = moved.difference(y)

    towers = tuple(
        Tower(base=bases[j], shape=tuple(folner(j).elements), return_time=j)
        for j in sorted(bases)
    )
    castle = Castle(system=system, towers=towers)

    report = castle.verify()
    if not report.all_ok():
        raise VerificationError(f"first-return castle failed verification: {report}")
    # The translation climbs must partition the space as well; together
    # with flip-compatibility this matches the window-shape translates.
    climbs = [
        system.act(GroupElement(k, 0), t.base)
        for t in towers
        for k in range(t.return_time)
    ]
    if not _is_exact_partition(system, climbs):
        raise VerificationError("translation climbs do not partition the space")
    return castle


def _is_exact_partition(system, pieces) -> bool:
    union = None
    for s in pieces:
        if union is None:
            union = s
        else:
            if not union.intersection(s).is_empty():
                return False
            union = union.union(s)
    return union is not None and union == _full_like(system, pieces[0])


def _flip_symmetric_window_arc(system, window: int):
    """The arc [1-u, u) for the smallest window cut value u above 1/2.

    Such arcs are flip-invariant by construction and shrink to the flip
    fixed point 1/2 as the window grows.
    """
    theta = system.theta
    half = Fraction(1, 2)
    best = None
    for n in range(-window, window + 1):
        c = CutPoint.of(theta, n)
        # keep the smallest cut with value strictly above 1/2
        if theta.sign_of(c.value.a - half, c.value.b) > 0 and (best is None or c < best):
            best = c
    if best is None:
        return None
    return ClopenSet(theta, (Arc(best.negate(), best),))


def almost_finite_certificate(system, test_set: Sequence[GroupElement],
                              eps: Fraction, shrink_budget: int = 24) -> Castle:
    """A partitioning castle whose every shape is (test_set, eps)-invariant.

    The target height N is found by scanning window-set ratios; a
    flip-invariant set is then shrunk until its first N translates are
    disjoint, which forces every return time to be at least N.  All
    invariance claims are re-checked exactly on the realized shapes.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    test_set = tuple(test_set)

    n_target = 1
    while True:
        window = [folner_ratio(folner(j), test_set) for j in range(n_target, 4 * n_target + 1)]
        if all(r < eps for r in window):
            break
        n_target += 1
        if n_target > 10_000:
            raise VerificationError("no invariant window size found below 10^4")

    y = _shrink_until_disjoint(system, n_target, shrink_budget)
    castle = first_return_castle(system, y)

    if castle.min_return_time() < n_target:
        raise VerificationError("return times fell below the invariance target")
    bad = [r for r in castle.shape_ratios(test_set) if r >= eps]
    if bad:
        raise VerificationError(f"shape invariance violated: ratios {bad} >= {eps}")
    return castle


def default_invariant_window(system):
    """The widest flip-invariant window set used by the CLI defaults."""
    y = _candidate_invariant_set(system, 1)
    if y is None:
        raise ValueError("no flip-invariant window available")
    return y


def _shrink_until_disjoint(system, n_target: int, shrink_budget: int):
    """Find a flip-invariant y whose first n_target translates are disjoint."""
    window = 1
    for _ in range(shrink_budget):
        y = _candidate_invariant_set(system, window)
        if y is not None and _translates_disjoint(system, y, n_target):
            return y
        window *= 2
    raise VerificationError(
        f"no sufficiently small flip-invariant set within window 2^{shrink_budget}")


def _candidate_invariant_set(system, window: int):
    if isinstance(system, DenjoyFlipSystem):
        return _flip_symmetric_window_arc(system, window)
    if isinstance(system, DoubledSystem):
        theta = system.theta
        z = ClopenSet(theta, (Arc(CutPoint.of(theta, 0), _closest_cut_above_zero(theta, window)),))
        return DoubledClopen(z, z)
    raise ValueError("certificates require a circle or doubled system")


def _closest_cut_above_zero(theta, window: int) -> CutPoint:
    best = None
    for n in range(-window, window + 1):
        if n == 0:
            continue
        c = CutPoint.of(theta, n)
        if best is None or c < best:
            best = c
    return best


def _translates_disjoint(system, y, n_target: int) -> bool:
    union = y
    for k in range(1, n_target):
        img = system.act(GroupElement(k, 0), y)
        if not union.intersection(img).is_empty():
            return False
        union = union.union(img)
    return True
