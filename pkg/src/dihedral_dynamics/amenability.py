"""Folner sets for the infinite dihedral group and odometer castles.

The sets used here have a double role: F_m is simultaneously an
approximately invariant set (its translate boundary shrinks like 1/m)
and a complete set of coset representatives for the index-m subgroup
m*Z x| Z_2.  Castles for odometers are assembled from a single cylinder
base translated by such a transversal.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .systems import FLIP, GroupElement, IDENTITY, LevelSet, OdometerSystem

__all__ = [
    "FolnerSet",
    "folner",
    "is_transversal",
    "folner_ratio",
    "odometer_castle",
    "DEFAULT_TEST_SET",
]

#: The generating set {e, (1,0), (0,1)} used in invariance certificates.
DEFAULT_TEST_SET = (IDENTITY, GroupElement(1, 0), FLIP)


@dataclass(frozen=True)
class FolnerSet:
    """The m-element window: flips on [-k, -1], translations on [0, m-k).

    For even m the split is k = m/2 on both sides; for odd m the
    translation side gets the extra element.  Elements are materialized
    lazily; the integer ranges are the primary representation.
    """

    m: int

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("m must be >= 1")

    @property
    def flip_range(self) -> range:
        # [-m/2, -1] for even m, [-(m-1)/2, -1] for odd m.
        return range(-(self.m // 2), 0)

    @property
    def translation_range(self) -> range:
        # [0, m/2) for even m, [0, (m-1)/2] for odd m.
        return range(0, self.m - self.m // 2)

    @property
    def elements(self) -> tuple:
        flips = tuple(GroupElement(n, 1) for n in self.flip_range)
        slides = tuple(GroupElement(n, 0) for n in self.translation_range)
        return flips + slides

    def __len__(self) -> int:
        return self.m

    def __iter__(self):
        return iter(self.elements)

    def to_json(self) -> list:
        return [g.to_json() for g in self.elements]


def folner(m: int) -> FolnerSet:
    """The m-th window set; |F_m| = m with pairwise distinct elements."""
    return FolnerSet(m)


def is_transversal(elements, m: int) -> bool:
    """True iff the translation parts hit every class mod m exactly once.

    The coset of (k, s) in (Z x| Z_2) / (m Z x| Z_2) is determined by
    k mod m alone, since the subgroup contains the flip.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    seen = bytearray(m)
    if isinstance(elements, FolnerSet):
        for lo, hi in _residue_spans(elements, m):
            if any(seen[lo:hi]):
                return False
            seen[lo:hi] = b"\x01" * (hi - lo)
        return all(seen)
    count = 0
    for g in elements:
        r = g.n % m
        if seen[r]:
            return False
        seen[r] = 1
        count += 1
    return count == m


def _ranges_of(f: FolnerSet):
    return (f.flip_range, f.translation_range)


def _residue_spans(f: FolnerSet, m: int):
    """Residue intervals mod m of the two index ranges, split at wrap."""
    for rng in _ranges_of(f):
        span = len(rng)
        if span == 0:
            continue
        if span > m:
            # More elements than classes: forced collision.
            yield (0, m)
            yield (0, m)
            return
        start = rng.start % m
        end = start + span
        if end <= m:
            yield (start, end)
        else:
            yield (start, m)
            yield (0, end - m)


def folner_ratio(elements: Iterable[GroupElement], test_set: Iterable[GroupElement]) -> Fraction:
    """Exact |K F (symmetric difference) F| / |F|.

    Elements are encoded as integers 2n+s so the set algebra runs on
    machine ints; the result is an exact rational.
    """
    f_enc = {_encode(g) for g in elements}
    if not f_enc:
        raise ValueError("F must be nonempty")
    k_elems = list(test_set)
    kf = set()
    for k in k_elems:
        kn, ks = k.n, k.s
        if ks:
            kf.update(_encode_pair(kn - n, 1 ^ s) for n, s in map(_decode, f_enc))
        else:
            kf.update(_encode_pair(kn + n, s) for n, s in map(_decode, f_enc))
    return Fraction(len(kf.symmetric_difference(f_enc)), len(f_enc))


def _encode(g: GroupElement) -> int:
    return _encode_pair(g.n, g.s)


def _encode_pair(n: int, s: int) -> int:
    return (n << 1) | s


def _decode(code: int):
    return (code >> 1, code & 1)


def odometer_castle(system: OdometerSystem, n: int, j: int):
    """The one-tower castle of the level-n identity cylinder, seen at level j.

    The base is the class of 0 mod n_n inside Z/n_j and the shape is the
    n_n-element window, whose translates tile the level exactly because
    the window is a transversal.  The partition is verified before the
    castle is returned.
    """
    from .errors import VerificationError
    from .towers import Castle, Tower  # deferred; towers imports this module

    if not (1 <= n <= j <= len(system.chain)):
        raise ValueError("need 1 <= n <= j <= chain length")
    n_n = system.modulus(n)
    n_j = system.modulus(j)
    base = LevelSet(n_j, frozenset(range(0, n_j, n_n)))
    shape = folner(n_n)
    tower = Tower(base=base, shape=tuple(shape.elements), return_time=n_n)
    castle = Castle(system=system, towers=(tower,))
    report = castle.verify()
    if not report.all_ok():
        raise VerificationError(f"odometer castle failed verification: {report}")
    return castle
