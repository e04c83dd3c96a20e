"""Exact finitely generated abelian groups and integer lattice algebra.

Everything runs on arbitrary-precision integers: Smith normal forms with
unimodular transforms, integer linear solving, kernel and preimage
lattices, presented groups with homomorphisms, and direct systems with
stabilization detection.  Rank-one systems whose limit is not finitely
generated (Z -> Z by repeated multiplication) are reported through a
localization descriptor instead of being materialized.

Matrices are plain lists of rows; all functions are pure and
deterministic (smallest-absolute-pivot with fixed tie-breaking), so
outputs are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Tuple

__all__ = [
    "FGAbGroup",
    "Presentation",
    "AbHom",
    "DirectSystem",
    "LimitDescriptor",
    "LocalizationDescriptor",
    "smith_normal_form",
    "snf_diagonal",
    "kernel_basis",
    "solve_integer",
    "subquotient",
    "identity_matrix",
    "mat_mul",
    "mat_vec",
    "transpose",
]

Matrix = List[List[int]]


# ---------------------------------------------------------------------------
# Basic matrix helpers
# ---------------------------------------------------------------------------


def identity_matrix(n: int) -> Matrix:
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    if not a or not b:
        return []
    rows, inner, cols = len(a), len(b), len(b[0])
    out = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        ai = a[i]
        oi = out[i]
        for k in range(inner):
            aik = ai[k]
            if aik:
                bk = b[k]
                for j in range(cols):
                    oi[j] += aik * bk[j]
    return out


def mat_vec(a: Matrix, v: Sequence[int]) -> List[int]:
    return [sum(ai[k] * v[k] for k in range(len(v))) for ai in a]


def transpose(a: Matrix) -> Matrix:
    return [list(col) for col in zip(*a)] if a else []


def mat_add(a: Matrix, b: Matrix) -> Matrix:
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def mat_sub(a: Matrix, b: Matrix) -> Matrix:
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def columns(a: Matrix) -> List[List[int]]:
    return [list(col) for col in zip(*a)] if a else []


def from_columns(cols: Sequence[Sequence[int]], rows: Optional[int] = None) -> Matrix:
    if not cols:
        return [[] for _ in range(rows)] if rows else []
    return [list(row) for row in zip(*cols)]


# ---------------------------------------------------------------------------
# Smith normal form
# ---------------------------------------------------------------------------


class _SnfState:
    """Working state: S plus whichever transforms are being tracked."""

    def __init__(self, mat: Matrix, with_transforms: bool):
        self.s = [list(row) for row in mat]
        self.rows = len(self.s)
        self.cols = len(self.s[0]) if self.s else 0
        self.track = with_transforms
        if with_transforms:
            self.u = identity_matrix(self.rows)
            self.ui = identity_matrix(self.rows)   # inverse of u, kept in step
            self.v = identity_matrix(self.cols)

    def swap_rows(self, i, j):
        if i == j:
            return
        self.s[i], self.s[j] = self.s[j], self.s[i]
        if self.track:
            self.u[i], self.u[j] = self.u[j], self.u[i]
            for row in self.ui:
                row[i], row[j] = row[j], row[i]

    def swap_cols(self, i, j):
        if i == j:
            return
        for row in self.s:
            row[i], row[j] = row[j], row[i]
        if self.track:
            for row in self.v:
                row[i], row[j] = row[j], row[i]

    def add_row(self, dst, src, factor):
        """row_dst += factor * row_src"""
        if factor == 0:
            return
        sd, ss = self.s[dst], self.s[src]
        for k in range(self.cols):
            if ss[k]:
                sd[k] += factor * ss[k]
        if self.track:
            ud, us = self.u[dst], self.u[src]
            for k in range(self.rows):
                if us[k]:
                    ud[k] += factor * us[k]
            for row in self.ui:
                row[src] -= factor * row[dst]

    def add_col(self, dst, src, factor):
        """col_dst += factor * col_src"""
        if factor == 0:
            return
        for row in self.s:
            if row[src]:
                row[dst] += factor * row[src]
        if self.track:
            for row in self.v:
                if row[src]:
                    row[dst] += factor * row[src]

    def negate_row(self, i):
        self.s[i] = [-x for x in self.s[i]]
        if self.track:
            self.u[i] = [-x for x in self.u[i]]
            for row in self.ui:
                row[i] = -row[i]


def _find_pivot(s: Matrix, start: int, rows: int, cols: int):
    best = None
    best_val = None
    for i in range(start, rows):
        row = s[i]
        for j in range(start, cols):
            v = abs(row[j])
            if v and (best_val is None or v < best_val):
                best, best_val = (i, j), v
                if v == 1:
                    return best
    return best


def _smith(state: _SnfState) -> None:
    s, rows, cols = state.s, state.rows, state.cols
    t = 0
    while t < min(rows, cols):
        piv = _find_pivot(s, t, rows, cols)
        if piv is None:
            break
        state.swap_rows(t, piv[0])
        state.swap_cols(t, piv[1])
        while True:
            # clear column t
            restart = False
            for i in range(t + 1, rows):
                if s[i][t]:
                    q = s[i][t] // s[t][t]
                    state.add_row(i, t, -q)
                    if s[i][t]:
                        state.swap_rows(t, i)
                        restart = True
                        break
            if restart:
                continue
            # clear row t
            for j in range(t + 1, cols):
                if s[t][j]:
                    q = s[t][j] // s[t][t]
                    state.add_col(j, t, -q)
                    if s[t][j]:
                        state.swap_cols(t, j)
                        restart = True
                        break
            if restart:
                continue
            if all(s[i][t] == 0 for i in range(t + 1, rows)):
                break
        # enforce divisibility of the remaining block by the pivot
        d = s[t][t]
        viol = None
        for i in range(t + 1, rows):
            row = s[i]
            for j in range(t + 1, cols):
                if row[j] % d:
                    viol = i
                    break
            if viol is not None:
                break
        if viol is not None:
            state.add_row(t, viol, 1)
            continue
        t += 1
    for i in range(min(rows, cols)):
        if s[i][i] < 0:
            state.negate_row(i)


def smith_normal_form(mat: Matrix) -> Tuple[Matrix, Matrix, Matrix]:
    """U, S, V with U*mat*V = S diagonal in a divisibility chain.

    U and V are unimodular; the identity is verified by multiplication
    before returning.
    """
    state = _SnfState(mat, with_transforms=True)
    _smith(state)
    u, s, v = state.u, state.s, state.v
    if mat and mat_mul(mat_mul(u, mat), v) != s:
        raise AssertionError("smith normal form transform identity failed")
    return u, s, v


def snf_diagonal(mat: Matrix) -> List[int]:
    """The diagonal of the Smith form (same pivoting, no transforms)."""
    state = _SnfState(mat, with_transforms=False)
    _smith(state)
    return [state.s[i][i] for i in range(min(state.rows, state.cols))]


def _snf_full(mat: Matrix) -> _SnfState:
    state = _SnfState(mat, with_transforms=True)
    _smith(state)
    return state


def rank_of(mat: Matrix) -> int:
    return sum(1 for d in snf_diagonal(mat) if d)


def kernel_basis(mat: Matrix) -> List[List[int]]:
    """Columns spanning {x : mat x = 0}; a basis of the kernel lattice."""
    if not mat or not mat[0]:
        n = len(mat[0]) if mat else 0
        return [[1 if i == j else 0 for i in range(n)] for j in range(n)]
    state = _snf_full(mat)
    rank = sum(1 for i in range(min(state.rows, state.cols)) if state.s[i][i])
    return [ [state.v[i][j] for i in range(state.cols)] for j in range(rank, state.cols) ]


class SnfSolver:
    """Factor a matrix once, then answer mat x = rhs queries cheaply.

    Right-hand sides are usually sparse, so U*rhs is accumulated from
    the nonzero entries only.
    """

    def __init__(self, mat: Matrix):
        self.rows = len(mat)
        self.cols = len(mat[0]) if mat else 0
        if self.rows and self.cols:
            state = _snf_full(mat)
            self._state = state
            self._u_cols = transpose(state.u)
            self._diag = [state.s[i][i] for i in range(min(state.rows, state.cols))]
        else:
            self._state = None
            self._u_cols = []
            self._diag = []

    def _transformed(self, rhs: Sequence[int]) -> List[int]:
        c = [0] * self.rows
        for k, b in enumerate(rhs):
            if b:
                uk = self._u_cols[k]
                for i in range(self.rows):
                    if uk[i]:
                        c[i] += b * uk[i]
        return c

    def contains(self, rhs: Sequence[int]) -> bool:
        if self._state is None:
            return not any(rhs)
        c = self._transformed(rhs)
        for i, d in enumerate(self._diag):
            if d:
                if c[i] % d:
                    return False
            elif c[i]:
                return False
        return not any(c[len(self._diag):])

    def solve(self, rhs: Sequence[int]) -> Optional[List[int]]:
        if self._state is None:
            return [0] * self.cols if not any(rhs) else None
        c = self._transformed(rhs)
        y = [0] * self.cols
        for i, d in enumerate(self._diag):
            if d:
                if c[i] % d:
                    return None
                y[i] = c[i] // d
            elif c[i]:
                return None
        if any(c[len(self._diag):]):
            return None
        return mat_vec(self._state.v, y)


def solve_integer(mat: Matrix, rhs: Sequence[int]) -> Optional[List[int]]:
    """An integer solution x of mat x = rhs, or None."""
    if not mat:
        return [] if not any(rhs) else None
    return SnfSolver(mat).solve(rhs)


def lattice_contains(gens: Matrix, v: Sequence[int]) -> bool:
    """Whether v lies in the column lattice of gens."""
    return solve_integer(gens, v) is not None


def lattice_subset(a: Matrix, b: Matrix) -> bool:
    """Whether every column of a lies in the column lattice of b."""
    if not a or not a[0]:
        return True
    solver = SnfSolver(b)
    return all(solver.contains(col) for col in columns(a))


def preimage_lattice(mat: Matrix, lat: Matrix) -> Matrix:
    """Generators of {x : mat x lies in the column lattice of lat}.

    Computed as the projection of the kernel of the block [mat | -lat].
    """
    n = len(mat[0]) if mat else 0
    if not mat:
        return identity_matrix(n)
    k = len(lat[0]) if lat else 0
    block = [list(mat[i]) + [-lat[i][j] for j in range(k)] for i in range(len(mat))]
    gens = [col[:n] for col in kernel_basis(block)]
    return from_columns(gens, rows=n)


# ---------------------------------------------------------------------------
# Canonical groups and presentations
# ---------------------------------------------------------------------------


def _factorize(n: int) -> dict:
    out = {}
    f = 2
    while f * f <= n:
        while n % f == 0:
            out[f] = out.get(f, 0) + 1
            n //= f
        f += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


@dataclass(frozen=True)
class FGAbGroup:
    """Canonical form: free rank plus the divisor chain d1 | d2 | ..."""

    rank: int
    torsion: tuple = ()

    def __post_init__(self) -> None:
        if self.rank < 0:
            raise ValueError("rank must be >= 0")
        object.__setattr__(self, "torsion", tuple(int(d) for d in self.torsion))
        for a, b in zip(self.torsion, self.torsion[1:]):
            if b % a:
                raise ValueError("torsion divisors must form a chain d1 | d2 | ...")
        if any(d < 2 for d in self.torsion):
            raise ValueError("torsion divisors must be >= 2")

    def is_trivial(self) -> bool:
        return self.rank == 0 and not self.torsion

    def direct_sum(self, other: "FGAbGroup") -> "FGAbGroup":
        # Recombine prime powers into a divisor chain.
        primes = {}
        for d in self.torsion + other.torsion:
            for p, e in _factorize(d).items():
                primes.setdefault(p, []).append(e)
        depth = max((len(v) for v in primes.values()), default=0)
        chain = []
        for k in range(depth):
            d = 1
            for p, exps in primes.items():
                exps_sorted = sorted(exps, reverse=True)
                if k < len(exps_sorted):
                    d *= p ** exps_sorted[k]
            chain.append(d)
        chain.reverse()
        return FGAbGroup(self.rank + other.rank, tuple(chain))

    def __str__(self) -> str:
        parts = []
        if self.rank:
            parts.append("Z" if self.rank == 1 else f"Z^{self.rank}")
        parts.extend(f"Z/{d}" for d in self.torsion)
        return " + ".join(parts) if parts else "0"

    def to_json(self) -> dict:
        return {"rank": self.rank, "torsion": list(self.torsion)}

    @classmethod
    def from_json(cls, data: dict) -> "FGAbGroup":
        return cls(int(data["rank"]), tuple(int(d) for d in data.get("torsion", ())))

    @classmethod
    def free(cls, rank: int) -> "FGAbGroup":
        return cls(rank, ())

    @classmethod
    def cyclic(cls, n: int) -> "FGAbGroup":
        return cls(0, (n,)) if n > 1 else cls(0, ())

    @classmethod
    def elementary_two(cls, k: int) -> "FGAbGroup":
        return cls(0, (2,) * k)


@dataclass(frozen=True)
class Presentation:
    """Z^ngens modulo the column lattice of ``relations``."""

    ngens: int
    relations: tuple  # tuple of columns, each a tuple of length ngens

    @classmethod
    def of(cls, ngens: int, relation_columns: Iterable[Sequence[int]]) -> "Presentation":
        cols = tuple(tuple(int(x) for x in col) for col in relation_columns)
        for col in cols:
            if len(col) != ngens:
                raise ValueError("relation column length must equal ngens")
        return cls(ngens, cols)

    @classmethod
    def free(cls, ngens: int) -> "Presentation":
        return cls(ngens, ())

    def relation_matrix(self) -> Matrix:
        return from_columns(self.relations, rows=self.ngens)

    def canonical(self) -> FGAbGroup:
        if self.ngens == 0:
            return FGAbGroup(0)
        if not self.relations:
            return FGAbGroup(self.ngens)
        diag = snf_diagonal(self.relation_matrix())
        nonzero = [d for d in diag if d]
        return FGAbGroup(self.ngens - len(nonzero), tuple(d for d in nonzero if d > 1))

    @cached_property
    def _relation_solver(self) -> "SnfSolver":
        return SnfSolver(self.relation_matrix())

    def contains_relation(self, v: Sequence[int]) -> bool:
        if not self.relations:
            return not any(v)
        return self._relation_solver.contains(v)


@dataclass(frozen=True)
class AbHom:
    """A homomorphism of presented groups, given on generators.

    The matrix has shape (dst.ngens, src.ngens) and must map the source
    relation lattice into the destination one; that is checked at
    construction.
    """

    src: Presentation
    dst: Presentation
    matrix: tuple

    @classmethod
    def of(cls, src: Presentation, dst: Presentation, matrix: Matrix) -> "AbHom":
        mat = tuple(tuple(int(x) for x in row) for row in matrix)
        if len(mat) != dst.ngens or (mat and any(len(r) != src.ngens for r in mat)):
            raise ValueError("homomorphism matrix has wrong shape")
        m = [list(r) for r in mat]
        for col in src.relations:
            if not dst.contains_relation(mat_vec(m, list(col))):
                raise ValueError("matrix does not map relations into relations")
        return cls(src, dst, mat)

    def mat(self) -> Matrix:
        return [list(r) for r in self.matrix]

    def compose(self, earlier: "AbHom") -> "AbHom":
        if earlier.dst != self.src:
            raise ValueError("composition mismatch")
        return AbHom.of(earlier.src, self.dst, mat_mul(self.mat(), earlier.mat()))

    def apply(self, v: Sequence[int]) -> List[int]:
        return mat_vec(self.mat(), list(v))

    # -- structural predicates -----------------------------------------

    def is_surjective(self) -> bool:
        stacked = from_columns(
            columns(self.mat()) + list(self.dst.relations), rows=self.dst.ngens)
        diag = snf_diagonal(stacked)
        return sum(1 for d in diag if d == 1) == self.dst.ngens if self.dst.ngens else True

    def kernel_presentation(self) -> Presentation:
        """The kernel as a presented group."""
        pre = preimage_lattice(self.mat(), self.dst.relation_matrix())
        gens = columns(pre)
        inner = preimage_lattice(pre, self.src.relation_matrix())
        return Presentation.of(len(gens), columns(inner))

    def kernel_group(self) -> FGAbGroup:
        return self.kernel_presentation().canonical()

    def is_injective(self) -> bool:
        pre = preimage_lattice(self.mat(), self.dst.relation_matrix())
        return lattice_subset(pre, self.src.relation_matrix())

    def is_isomorphism(self) -> bool:
        return self.is_surjective() and self.is_injective()

    def image_presentation(self) -> Presentation:
        """The image subgroup of the destination, presented on the source
        generators (relations = preimages of destination relations)."""
        pre = preimage_lattice(self.mat(), self.dst.relation_matrix())
        return Presentation.of(self.src.ngens, columns(pre))

    def image_group(self) -> FGAbGroup:
        """Canonical form of the image subgroup of the destination."""
        return self.image_presentation().canonical()

    def cokernel(self) -> Presentation:
        cols = list(self.dst.relations) + columns(self.mat())
        return Presentation.of(self.dst.ngens, cols)

    def equals_hom(self, other: "AbHom") -> bool:
        """Equality as maps of presented groups (difference lands in relations)."""
        if self.src.ngens != other.src.ngens or self.dst != other.dst:
            return False
        diff = mat_sub(self.mat(), other.mat())
        return all(self.dst.contains_relation(col) for col in columns(diff))

    def free_multiplier(self) -> Optional[int]:
        """For rank-one torsion-free source and destination, the induced
        multiplier Z -> Z up to sign; None when not applicable."""
        if self.src.canonical() != FGAbGroup(1) or self.dst.canonical() != FGAbGroup(1):
            return None
        # Change coordinates so relations become diagonal; the free
        # coordinates are those with zero divisor.
        src_free, u_src_inv = _free_coordinate(self.src)
        dst_free, u_dst = _free_coordinate_u(self.dst)
        col = mat_vec(self.mat(), [u_src_inv[i][src_free] for i in range(self.src.ngens)])
        return abs(mat_vec(u_dst, col)[dst_free])


def _free_coordinate(p: Presentation):
    """Index of the free canonical coordinate and U^-1 for the SNF of rel."""
    if not p.relations:
        return 0, identity_matrix(p.ngens)
    state = _snf_full(p.relation_matrix())
    free = [i for i in range(p.ngens)
            if i >= min(state.rows, state.cols) or state.s[i][i] == 0]
    return free[0], state.ui


def _free_coordinate_u(p: Presentation):
    if not p.relations:
        return 0, identity_matrix(p.ngens)
    state = _snf_full(p.relation_matrix())
    free = [i for i in range(p.ngens)
            if i >= min(state.rows, state.cols) or state.s[i][i] == 0]
    return free[0], state.u


def subquotient(kernel_of: Matrix, image_of: Matrix) -> FGAbGroup:
    """ker(kernel_of) / im(image_of), canonical form.

    The containment im(image_of) in ker(kernel_of) is verified by the
    exact identity kernel_of * image_of = 0; the quotient is read off
    the Smith form of the image expressed in a kernel basis.
    """
    prod = mat_mul(kernel_of, image_of)
    if any(any(row) for row in prod):
        raise ValueError("image is not contained in the kernel")
    kb = kernel_basis(kernel_of)
    k = len(kb)
    if k == 0:
        return FGAbGroup(0)
    solver = SnfSolver(from_columns(kb))
    coords = []
    for col in columns(image_of):
        y = solver.solve(col)
        if y is None:
            raise AssertionError("image vector escaped the kernel lattice")
        coords.append(y)
    return Presentation.of(k, coords).canonical()


# ---------------------------------------------------------------------------
# Direct systems and limits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalizationDescriptor:
    """A rank-one limit Z -> Z -> ... described by its multipliers."""

    multipliers: tuple

    @property
    def primes(self) -> tuple:
        ps = set()
        for m in self.multipliers:
            ps.update(_factorize(m))
        return tuple(sorted(ps))

    @property
    def display(self) -> str:
        prod = 1
        for p in self.primes:
            prod *= p
        return f"Z[1/{prod}]" if prod > 1 else "Z"

    def to_json(self) -> dict:
        return {
            "localization": self.display,
            "multipliers": list(self.multipliers),
            "primes": list(self.primes),
        }


@dataclass(frozen=True)
class LimitDescriptor:
    kind: str  # "stabilized" | "localization" | "undetermined"
    group: Optional[FGAbGroup] = None
    level: Optional[int] = None
    localization: Optional[LocalizationDescriptor] = None

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.group is not None:
            out["group"] = self.group.to_json()
        if self.level is not None:
            out["level"] = self.level
        if self.localization is not None:
            out.update(self.localization.to_json())
        return out


@dataclass(frozen=True)
class DirectSystem:
    """Finitely many stages of a direct system, with connecting maps."""

    stages: tuple  # Presentations
    maps: tuple    # AbHoms, maps[i]: stages[i] -> stages[i+1]

    def __post_init__(self) -> None:
        if len(self.maps) != len(self.stages) - 1:
            raise ValueError("need exactly one connecting map between stages")
        for i, h in enumerate(self.maps):
            if h.src != self.stages[i] or h.dst != self.stages[i + 1]:
                raise ValueError(f"connecting map {i} does not match its stages")

    def limit(self) -> LimitDescriptor:
        """Stabilization detection; never materializes a non-f.g. limit."""
        if len(self.stages) < 3:
            raise ValueError("need at least 3 computed stages")
        iso = [h.is_isomorphism() for h in self.maps]
        if iso and iso[-1]:
            start = len(iso)
            while start > 0 and iso[start - 1]:
                start -= 1
            if start < len(iso):
                return LimitDescriptor(
                    kind="stabilized",
                    group=self.stages[start].canonical(),
                    level=start + 1,
                )
        mults = [h.free_multiplier() for h in self.maps]
        if all(m is not None and m >= 1 for m in mults) and any(m > 1 for m in mults):
            return LimitDescriptor(
                kind="localization",
                localization=LocalizationDescriptor(tuple(mults)),
            )
        return LimitDescriptor(kind="undetermined", level=len(self.stages))
