"""Group homology of the dihedral systems, with an independent oracle.

The coefficient module is the group C(X, Z) of integer continuous
functions, presented through its finite level modules.  Homology of the
order-2 subgroups is computed from the kernel/image formulas attached
to an involution matrix; the homology of the whole group is assembled
either from the closed-form case analysis (driven by exact fixed-point
evidence) or from the free-product exact sequence evaluated level by
level, and the two must agree.  An unnormalized bar-complex computation
serves as a brute-force cross-check for the involution formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

from .abgroups import (
    AbHom,
    DirectSystem,
    FGAbGroup,
    LimitDescriptor,
    LocalizationDescriptor,
    Matrix,
    Presentation,
    columns,
    from_columns,
    identity_matrix,
    kernel_basis,
    lattice_contains,
    lattice_subset,
    mat_add,
    mat_mul,
    mat_sub,
    preimage_lattice,
    SnfSolver,
    snf_diagonal,
    subquotient,
)
from .errors import NonStabilizationError, WitnessError
from .systems import (
    FLIP,
    TRANSLATION,
    DenjoyFlipSystem,
    DoubledSystem,
    GroupElement,
    OdometerSystem,
    cover_indices,
    cover_matrix,
    pullback_matrix,
)

__all__ = [
    "InvolutionModule",
    "odd_homology",
    "even_homology",
    "coinvariants",
    "coinvariants_presentation",
    "psi_check",
    "bar_homology",
    "TelescopeResult",
    "h0_translation_telescope",
    "free_product_fragment",
    "free_product_homology",
    "transfer_kernel",
    "transfer_report",
    "verify_complementary_witness",
    "HomologyTable",
    "homology_table",
    "split_orbit_table",
    "free_action_table",
    "nonfree_action_table",
    "GroupValue",
]

GroupValue = Union[FGAbGroup, LocalizationDescriptor]


def group_value_json(value: GroupValue) -> dict:
    return value.to_json()


# ---------------------------------------------------------------------------
# Involution modules and the order-2 subgroup formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InvolutionModule:
    """A free abelian module on finitely many cells with an order-2 action.

    ``matrix`` records f -> f o a on the cell basis; for system level
    modules it is a permutation matrix.
    """

    matrix: tuple
    labels: tuple = ()

    @classmethod
    def of(cls, matrix: Matrix, labels: Optional[Sequence[str]] = None) -> "InvolutionModule":
        mat = tuple(tuple(int(x) for x in row) for row in matrix)
        n = len(mat)
        if any(len(r) != n for r in mat):
            raise ValueError("involution matrix must be square")
        sq = mat_mul([list(r) for r in mat], [list(r) for r in mat])
        if sq != identity_matrix(n):
            raise ValueError("matrix must be an involution (A*A = I)")
        lab = tuple(labels) if labels is not None else tuple(str(i) for i in range(n))
        if len(lab) != n:
            raise ValueError("labels must match the number of cells")
        return cls(mat, lab)

    @classmethod
    def from_permutation(cls, perm: Sequence[int], labels: Optional[Sequence[str]] = None) -> "InvolutionModule":
        n = len(perm)
        mat = [[0] * n for _ in range(n)]
        for j, i in enumerate(perm):
            mat[i][j] = 1
        return cls.of(mat, labels)

    @property
    def ncells(self) -> int:
        return len(self.matrix)

    def mat(self) -> Matrix:
        return [list(r) for r in self.matrix]

    def is_permutation(self) -> bool:
        return all(
            sorted(col) == [0] * (self.ncells - 1) + [1] for col in columns(self.mat())
        )

    def fixed_cells(self) -> List[int]:
        return [i for i in range(self.ncells) if self.matrix[i][i] == 1 and
                sum(abs(x) for x in self.matrix[i]) == 1]


def _a_minus_i(module: InvolutionModule) -> Matrix:
    return mat_sub(module.mat(), identity_matrix(module.ncells))


def _a_plus_i(module: InvolutionModule) -> Matrix:
    return mat_add(module.mat(), identity_matrix(module.ncells))


def odd_homology(module: InvolutionModule) -> FGAbGroup:
    """ker(A - I) / im(A + I): the odd-degree homology of the order-2 action."""
    return subquotient(_a_minus_i(module), _a_plus_i(module))


def even_homology(module: InvolutionModule) -> FGAbGroup:
    """ker(A + I) / im(A - I): the positive even-degree homology."""
    return subquotient(_a_plus_i(module), _a_minus_i(module))


def coinvariants_presentation(module: InvolutionModule) -> Presentation:
    return Presentation.of(module.ncells, columns(_a_minus_i(module)))


def coinvariants(module: InvolutionModule) -> FGAbGroup:
    """coker(A - I), the degree-0 homology of the order-2 action."""
    return coinvariants_presentation(module).canonical()


def psi_check(module: InvolutionModule) -> bool:
    """Verify that [f] -> f + f o a embeds the coinvariants onto the
    invariant functions that are even on fixed cells.

    Only meaningful for permutation modules, where 'even on fixed cells'
    is a lattice condition with explicit generators.
    """
    if not module.is_permutation():
        raise ValueError("psi_check requires a permutation involution")
    plus = _a_plus_i(module)
    minus = _a_minus_i(module)
    # injectivity: kernel of (A + I) inside the coinvariant relations
    for v in kernel_basis(plus):
        if not lattice_contains(minus, v):
            return False
    # image: exactly the lattice spanned by pair sums and doubled fixed cells
    n = module.ncells
    target_cols = []
    seen = set()
    for j in range(n):
        i = next(r for r in range(n) if module.matrix[r][j])
        if i == j:
            col = [0] * n
            col[j] = 2
            target_cols.append(col)
        elif (j, i) not in seen:
            seen.add((i, j))
            col = [0] * n
            col[i] = col[j] = 1
            target_cols.append(col)
    target = from_columns(target_cols, rows=n)
    return lattice_subset(plus, target) and lattice_subset(target, plus)


# ---------------------------------------------------------------------------
# Bar-complex oracle
# ---------------------------------------------------------------------------

_BAR_MAX_DEGREE = 6
_BAR_MAX_CELLS = 8


def _bar_boundary(module: InvolutionModule, k: int) -> Matrix:
    """Boundary C_k -> C_{k-1} of M tensored over the group ring with the
    unnormalized bar resolution of the 2-element group.

    C_k is free on (cell, word) with word a k-bit mask (bit = the
    involution, 0 = identity); the first face acts on the module side.
    """
    n = module.ncells
    if k == 0:
        return []
    rows = n * (1 << (k - 1))
    cols = n * (1 << k)
    mat = [[0] * cols for _ in range(rows)]
    a = module.matrix
    for w in range(1 << k):
        for c in range(n):
            col = w * n + c
            # face 0: move g_1 onto the coefficient
            w_rest = w >> 1
            if w & 1:
                for cp in range(n):
                    if a[cp][c]:
                        mat[w_rest * n + cp][col] += a[cp][c]
            else:
                mat[w_rest * n + c][col] += 1
            # middle faces: merge adjacent letters
            sign = 1
            for i in range(1, k):
                sign = -sign
                low = w & ((1 << (i - 1)) - 1)
                merged = ((w >> (i - 1)) ^ (w >> i)) & 1
                high = (w >> (i + 1)) << i
                w_mid = low | (merged << (i - 1)) | high
                mat[w_mid * n + c][col] += sign
            # last face: drop g_k
            sign = -sign
            w_last = w & ((1 << (k - 1)) - 1)
            mat[w_last * n + c][col] += sign
    return mat


def bar_homology(module: InvolutionModule, degree: int) -> FGAbGroup:
    """H_degree of the order-2 action via the unnormalized bar complex.

    Independent of the periodic two-term formulas: the homology is read
    off ranks and elementary divisors of the raw bar boundaries.  Sizes
    are guarded since the complex grows like 2^degree.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    if degree > _BAR_MAX_DEGREE or module.ncells > _BAR_MAX_CELLS:
        raise ValueError(
            f"bar oracle guard: degree <= {_BAR_MAX_DEGREE} and cells <= {_BAR_MAX_CELLS}")
    n = module.ncells
    dim_n = n * (1 << degree)
    d_n = _bar_boundary(module, degree)
    rank_d_n = sum(1 for d in snf_diagonal(d_n) if d) if d_n else 0
    d_next = _bar_boundary(module, degree + 1)
    diag_next = snf_diagonal(d_next)
    rank_next = sum(1 for d in diag_next if d)
    torsion = tuple(d for d in diag_next if d > 1)
    # im(d_next) sits inside the pure sublattice ker(d_n), so the
    # elementary divisors of d_next are those of the inclusion.
    return FGAbGroup(dim_n - rank_d_n - rank_next, torsion)


# ---------------------------------------------------------------------------
# Level modules of the systems
# ---------------------------------------------------------------------------


def _denjoy_sigma_module(system: DenjoyFlipSystem, level: int) -> Tuple[list, InvolutionModule]:
    cells = system.symmetric_cells(level)
    mat = pullback_matrix(system, FLIP, cells, cells)
    return cells, InvolutionModule.of(mat)


def _denjoy_phisigma_module(system: DenjoyFlipSystem, level: int) -> Tuple[list, InvolutionModule]:
    cells = system.shifted_cells(level)
    mat = pullback_matrix(system, GroupElement(1, 1), cells, cells)
    return cells, InvolutionModule.of(mat)


def _odometer_modules(system: OdometerSystem, level: int):
    cells = system.cells(level)
    sig = pullback_matrix(system, FLIP, cells, cells)
    phisig = pullback_matrix(system, GroupElement(1, 1), cells, cells)
    return cells, InvolutionModule.of(sig), InvolutionModule.of(phisig)


def _refined_cover_matrix(system: OdometerSystem, level: int) -> Matrix:
    coarse = [system.refine(c, level, level + 1) for c in system.cells(level)]
    fine = system.cells(level + 1)
    mat = [[0] * len(coarse) for _ in range(len(fine))]
    for j, c in enumerate(coarse):
        for i in cover_indices(c, fine):
            mat[i][j] = 1
    return mat


# ---------------------------------------------------------------------------
# The H_0 telescope of the translation subaction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TelescopeResult:
    """Stages of H_0(Z, level module) with flip data on top.

    ``stages[i]`` presents the translation coinvariants at level
    ``first_level + i``; connecting maps are induced by refinement.
    The flip maps run one stage up, parallel to the connecting maps.
    """

    first_level: int
    stages: tuple
    connecting: tuple
    sigma_maps: tuple
    limit: LimitDescriptor
    sigma_trivial: bool
    h0: GroupValue
    h0_plus: GroupValue
    generator_vectors: tuple = ()
    generators_generate: Optional[bool] = None

    def stabilized_level(self) -> Optional[int]:
        if self.limit.kind != "stabilized":
            return None
        return self.first_level + self.limit.level - 1


def _denjoy_h0_stage(system: DenjoyFlipSystem, level: int) -> Presentation:
    cells = system.symmetric_cells(level)
    prev = system.symmetric_cells(level - 1)
    incl = cover_matrix(prev, cells)
    phi = pullback_matrix(system, TRANSLATION, prev, cells)
    return Presentation.of(len(cells), columns(mat_sub(incl, phi)))


def _odometer_h0_stage(system: OdometerSystem, level: int) -> Presentation:
    cells = system.cells(level)
    phi = pullback_matrix(system, TRANSLATION, cells, cells)
    return Presentation.of(len(cells), columns(mat_sub(identity_matrix(len(cells)), phi)))


_MAX_TELESCOPE_CELLS = 512
_MAX_FREEPRODUCT_CELLS = 128


def _capped_odometer_level(system: OdometerSystem, max_level: int, cell_cap: int) -> int:
    """Deepest usable level: within the chain, the request, and the cell cap."""
    top = 0
    for t in range(1, min(max_level, len(system.chain)) + 1):
        if system.chain[t - 1] > cell_cap:
            break
        top = t
    if top < 3:
        raise ValueError(
            f"need at least 3 odometer levels with at most {cell_cap} cosets")
    return top


def h0_translation_telescope(system, max_level: int, with_flip: bool = True) -> TelescopeResult:
    """H_0 of the translation action on C(X, Z), with the flip action.

    Circle systems grow a symmetric cut window per stage and stabilize
    to a finitely generated group; odometers produce a rank-one system
    whose limit is reported as a localization descriptor.  The subgroup
    (1 + flip)H_0 is returned in canonical form (for localizations the
    flip acts trivially stage by stage, and doubling a localization of Z
    is an isomorphism onto its image).
    """
    if max_level < 3:
        raise ValueError("max_level must be >= 3")

    if isinstance(system, DenjoyFlipSystem):
        first = 1
        levels = list(range(first, max_level + 1))
        stages = [_denjoy_h0_stage(system, t) for t in levels]
        cell_lists = [system.symmetric_cells(t) for t in levels]
        incls = [cover_matrix(cell_lists[i], cell_lists[i + 1]) for i in range(len(levels) - 1)]
        connecting = tuple(
            AbHom.of(stages[i], stages[i + 1], incls[i]) for i in range(len(levels) - 1))
        sigma_maps = ()
        if with_flip:
            sig_perms = [pullback_matrix(system, FLIP, cell_lists[i], cell_lists[i]) for i in range(len(levels))]
            sigma_maps = tuple(
                AbHom.of(stages[i], stages[i + 1], mat_mul(incls[i], sig_perms[i]))
                for i in range(len(levels) - 1))
    elif isinstance(system, OdometerSystem):
        first = 1
        top = _capped_odometer_level(system, max_level, _MAX_TELESCOPE_CELLS)
        levels = list(range(first, top + 1))
        stages = [_odometer_h0_stage(system, t) for t in levels]
        incls = [_refined_cover_matrix(system, t) for t in levels[:-1]]
        connecting = tuple(
            AbHom.of(stages[i], stages[i + 1], incls[i]) for i in range(len(levels) - 1))
        sigma_maps = ()
        if with_flip:
            cell_lists = [system.cells(t) for t in levels]
            sig_perms = [pullback_matrix(system, FLIP, cell_lists[i], cell_lists[i]) for i in range(len(levels))]
            sigma_maps = tuple(
                AbHom.of(stages[i], stages[i + 1], mat_mul(incls[i], sig_perms[i]))
                for i in range(len(levels) - 1))
    else:
        raise ValueError("telescope requires a circle or odometer system")

    ds = DirectSystem(tuple(stages), connecting)
    limit = _image_refined_limit(ds)

    sigma_trivial = True
    if with_flip:
        sigma_trivial = all(s.equals_hom(c) for s, c in zip(sigma_maps, connecting))

    generator_vectors = ()
    generators_generate = None
    if limit.kind == "stabilized":
        h0: GroupValue = limit.group
        if with_flip:
            if not sigma_trivial:
                raise NonStabilizationError(
                    "flip acts nontrivially on the translation H0; "
                    "the doubled subgroup is not computed at finite level", max_level)
            h0_plus: GroupValue = _doubled_subgroup(h0)
        else:
            h0_plus = h0
        if isinstance(system, DenjoyFlipSystem):
            level = levels[-1]
            cells = system.symmetric_cells(level)
            from .exact_circle import ClopenSet

            v1 = _indicator_vector(ClopenSet.arc(system.theta, 0, 1), cells)
            v2 = _indicator_vector(ClopenSet.arc(system.theta, 1, 0), cells)
            generator_vectors = (tuple(v1), tuple(v2))
            # the two classes generate the image of the previous stage,
            # hence the limit: check span(v1, v2, relations) contains the
            # included module
            span = from_columns([v1, v2] + list(stages[-1].relations),
                                rows=stages[-1].ngens)
            generators_generate = lattice_subset(connecting[-1].mat(), span)
    elif limit.kind == "localization":
        if with_flip and not sigma_trivial:
            raise NonStabilizationError(
                "flip acts nontrivially on a localization limit", max_level)
        h0 = limit.localization
        # (1 + flip) doubles each stage: an isomorphism onto an index-2
        # subgroup, so the descriptor is unchanged.
        h0_plus = limit.localization
    else:
        raise NonStabilizationError(
            f"translation H0 undetermined at level {max_level}", max_level)

    return TelescopeResult(
        first_level=first,
        stages=tuple(stages),
        connecting=connecting,
        sigma_maps=sigma_maps,
        limit=limit,
        sigma_trivial=sigma_trivial,
        h0=h0,
        h0_plus=h0_plus,
        generator_vectors=generator_vectors,
        generators_generate=generators_generate,
    )


def _doubled_subgroup(g: FGAbGroup) -> FGAbGroup:
    """The image of multiplication by 2 on a group in canonical form."""
    torsion = []
    for d in g.torsion:
        dd = d // 2 if d % 2 == 0 else d
        if dd > 1:
            torsion.append(dd)
    return FGAbGroup(g.rank, tuple(torsion))


def _indicator_vector(target, cells) -> List[int]:
    vec = [0] * len(cells)
    for i in cover_indices(target, cells):
        vec[i] = 1
    return vec


# ---------------------------------------------------------------------------
# Free-product assembly
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FreeProductFragment:
    """Degree-0/1 homology assembled from the two order-2 subgroups."""

    h0: FGAbGroup
    h1: FGAbGroup
    paired_injective: bool
    middle_exact: bool
    h0_presentation: Presentation


def free_product_fragment(msigma: InvolutionModule, mphisigma: InvolutionModule,
                          inclusion: Matrix) -> FreeProductFragment:
    """Assemble H_0 and H_1 from involution modules on matched windows.

    ``inclusion`` embeds the second module's cells into the first
    module's (the first is the finer one).  H_1 is the direct sum of the
    two odd homologies; H_0 is the quotient of the fine module by both
    families of coinvariant relations.  The four-term sequence built
    from the pair of coinvariants is checked exactly: the paired map
    (cor, -cor) must be injective and its image must exhaust the kernel
    of the summed map onto the total coinvariants.
    """
    n_fine = msigma.ncells
    n_coarse = mphisigma.ncells
    if len(inclusion) != n_fine or (inclusion and len(inclusion[0]) != n_coarse):
        raise ValueError("inclusion matrix shape mismatch")

    h1 = odd_homology(msigma).direct_sum(odd_homology(mphisigma))

    sig_rels = columns(_a_minus_i(msigma))
    phisig_rels = columns(mat_mul(inclusion, _a_minus_i(mphisigma)))
    h0_pres = Presentation.of(n_fine, sig_rels + phisig_rels)
    h0 = h0_pres.canonical()

    # middle term: coinvariants of the two modules, as one presentation
    mid_rels = []
    for col in columns(_a_minus_i(msigma)):
        mid_rels.append(tuple(col) + (0,) * n_coarse)
    for col in columns(_a_minus_i(mphisigma)):
        mid_rels.append((0,) * n_fine + tuple(col))
    middle = Presentation.of(n_fine + n_coarse, mid_rels)

    # (cor, -cor): defined on the coarse module, the intersection of the two
    paired_cols = []
    for col in columns(inclusion):
        paired_cols.append(list(col))
    paired = [[0] * n_coarse for _ in range(n_fine + n_coarse)]
    for j in range(n_coarse):
        for i in range(n_fine):
            paired[i][j] = inclusion[i][j]
        paired[n_fine + j][j] = -1
    paired_hom = AbHom.of(Presentation.free(n_coarse), middle, paired)
    paired_injective = paired_hom.kernel_group().is_trivial()

    # summed map onto the total coinvariants: [u] + [v] -> [u + incl(v)]
    summed = [[0] * (n_fine + n_coarse) for _ in range(n_fine)]
    for i in range(n_fine):
        summed[i][i] = 1
        for j in range(n_coarse):
            summed[i][n_fine + j] = inclusion[i][j]
    kernel_lat = preimage_lattice(summed, h0_pres.relation_matrix())
    image_lat = from_columns(
        columns(paired) + list(middle.relations), rows=n_fine + n_coarse)
    middle_exact = lattice_subset(kernel_lat, image_lat) and lattice_subset(image_lat, kernel_lat)

    return FreeProductFragment(h0=h0, h1=h1, paired_injective=paired_injective,
                               middle_exact=middle_exact, h0_presentation=h0_pres)


@dataclass(frozen=True)
class FreeProductResult:
    fragments: tuple          # (level, FreeProductFragment)
    h0: GroupValue
    h1: FGAbGroup
    stabilized_at: Optional[int]
    all_injective: bool
    all_exact: bool


def _odd_homology_stage(module: InvolutionModule) -> Tuple[Presentation, Matrix]:
    """Present ker(A-I)/im(A+I) on a kernel basis; also return the basis."""
    kb = kernel_basis(_a_minus_i(module))
    kb_mat = from_columns(kb, rows=module.ncells)
    solver = SnfSolver(kb_mat)
    coords = []
    for col in columns(_a_plus_i(module)):
        y = solver.solve(col)
        if y is None:
            raise AssertionError("im(A+I) escaped ker(A-I)")
        coords.append(y)
    return Presentation.of(len(kb), coords), kb_mat


def _odd_homology_system(modules: Sequence[InvolutionModule],
                         inclusions: Sequence[Matrix]) -> DirectSystem:
    """The odd-homology groups of a chain of involution modules.

    ``inclusions[i]`` embeds module i into module i+1 and must commute
    with the involutions; the induced maps are expressed on kernel bases.
    """
    stages = []
    kbases = []
    for m in modules:
        pres, kb = _odd_homology_stage(m)
        stages.append(pres)
        kbases.append(kb)
    homs = []
    for i, incl in enumerate(inclusions):
        solver = SnfSolver(kbases[i + 1])
        cols_out = []
        for col in columns(mat_mul(incl, kbases[i])):
            y = solver.solve(col)
            if y is None:
                raise AssertionError("inclusion does not respect the involutions")
            cols_out.append(y)
        homs.append(AbHom.of(stages[i], stages[i + 1],
                             from_columns(cols_out, rows=stages[i + 1].ngens)))
    return DirectSystem(tuple(stages), tuple(homs))


def _image_refined_limit(ds: DirectSystem):
    """limit(), retried on the system of images when undetermined.

    The colimit of a direct system equals the colimit of the images of
    its connecting maps, and classes that die under refinement only
    vanish in the image system.
    """
    lim = ds.limit()
    if lim.kind != "undetermined" or len(ds.maps) < 3:
        return lim
    im_stages = tuple(h.image_presentation() for h in ds.maps)
    im_homs = tuple(
        AbHom.of(im_stages[i], im_stages[i + 1], ds.maps[i].mat())
        for i in range(len(im_stages) - 1))
    lim2 = DirectSystem(im_stages, im_homs).limit()
    if lim2.kind == "stabilized":
        return LimitDescriptor(kind="stabilized", group=lim2.group, level=lim2.level + 1)
    return lim


def _block_diag(a: Matrix, b: Matrix) -> Matrix:
    ra, ca = len(a), len(a[0]) if a else 0
    rb, cb = len(b), len(b[0]) if b else 0
    out = [[0] * (ca + cb) for _ in range(ra + rb)]
    for i in range(ra):
        out[i][:ca] = list(a[i])
    for i in range(rb):
        out[ra + i][ca:] = list(b[i])
    return out


def free_product_homology(system, max_level: int, first_level: int = 2) -> FreeProductResult:
    """Run the free-product assembly across levels and take honest limits.

    For circle systems the flip module lives on the symmetric window and
    the reflected-flip module on the shifted window, joined by the
    refinement inclusion; for odometers both act on the same level
    cells.  Degree 0 is followed through the chain of total-coinvariant
    presentations (stabilizing for circles, a localization for
    odometers); degree 1 through the chain of odd homologies of the
    combined involution modules.
    """
    if isinstance(system, OdometerSystem):
        max_level = _capped_odometer_level(system, max_level, _MAX_FREEPRODUCT_CELLS)
    if max_level < first_level + 2:
        raise ValueError("need at least three levels")
    frags = []
    h0_data = []
    combined_modules = []
    levels = list(range(first_level, max_level + 1))
    for level in levels:
        if isinstance(system, DenjoyFlipSystem):
            fine_cells, msig = _denjoy_sigma_module(system, level)
            coarse_cells, mphisig = _denjoy_phisigma_module(system, level)
            incl = cover_matrix(coarse_cells, fine_cells)
        elif isinstance(system, OdometerSystem):
            cells, msig, mphisig = _odometer_modules(system, level)
            fine_cells = cells
            incl = identity_matrix(len(cells))
        else:
            raise ValueError("free-product assembly requires a circle or odometer system")
        frags.append((level, free_product_fragment(msig, mphisig, incl)))
        h0_data.append((level, fine_cells, frags[-1][1].h0_presentation))
        combined_modules.append(
            InvolutionModule.of(_block_diag(msig.mat(), mphisig.mat())))

    # inclusions between consecutive levels, for both windows at once
    sym_incls = []
    combined_incls = []
    for (l1, cells1, _), (l2, cells2, _) in zip(h0_data, h0_data[1:]):
        if isinstance(system, DenjoyFlipSystem):
            sym = cover_matrix(cells1, cells2)
            shift = cover_matrix(system.shifted_cells(l1), system.shifted_cells(l2))
        else:
            sym = _refined_cover_matrix(system, l1)
            shift = sym
        sym_incls.append(sym)
        combined_incls.append(_block_diag(sym, shift))

    h0_system = DirectSystem(
        tuple(p for _, _, p in h0_data),
        tuple(AbHom.of(h0_data[i][2], h0_data[i + 1][2], sym_incls[i])
              for i in range(len(sym_incls))))
    h0_limit = h0_system.limit()
    if h0_limit.kind == "stabilized":
        h0: GroupValue = h0_limit.group
        stabilized_at: Optional[int] = levels[h0_limit.level - 1]
    elif h0_limit.kind == "localization":
        h0 = h0_limit.localization
        stabilized_at = None
    else:
        raise NonStabilizationError(
            f"free-product H0 still moving at level {max_level}", max_level)

    h1_limit = _image_refined_limit(_odd_homology_system(combined_modules, combined_incls))
    if h1_limit.kind != "stabilized":
        raise NonStabilizationError(
            f"free-product H1 still moving at level {max_level}", max_level)

    return FreeProductResult(
        fragments=tuple(frags),
        h0=h0,
        h1=h1_limit.group,
        stabilized_at=stabilized_at,
        all_injective=all(f.paired_injective for _, f in frags),
        all_exact=all(f.middle_exact for _, f in frags),
    )


# ---------------------------------------------------------------------------
# Transfer map
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransferReport:
    kernel: FGAbGroup
    injective: bool
    image: FGAbGroup
    target_plus: FGAbGroup
    onto_plus: bool


def transfer_kernel(h0_gamma: Presentation, tr_map: AbHom,
                    target_plus: FGAbGroup) -> TransferReport:
    """Kernel and image of the summed-over-flip map out of the total
    coinvariants, compared against the doubled translation classes."""
    if tr_map.src != h0_gamma:
        raise ValueError("transfer map must start at the given presentation")
    kernel = tr_map.kernel_group()
    image = tr_map.image_group()
    return TransferReport(
        kernel=kernel,
        injective=kernel.is_trivial(),
        image=image,
        target_plus=target_plus,
        onto_plus=image == target_plus,
    )


def transfer_report(system: DenjoyFlipSystem, max_level: int) -> TransferReport:
    """The transfer on the circle system, evaluated at a deep level.

    The flip has a fixed point, so the kernel must vanish and the image
    must realize the doubled translation classes.
    """
    tele = h0_translation_telescope(system, max_level)
    idx = len(tele.stages) - 3
    if idx < 0:
        raise NonStabilizationError("not enough computed levels", max_level)
    level = tele.first_level + idx

    cells = system.symmetric_cells(level)
    sig = pullback_matrix(system, FLIP, cells, cells)
    coarse = system.shifted_cells(level)
    incl_b = cover_matrix(coarse, cells)
    phisig = pullback_matrix(system, GroupElement(1, 1), coarse, coarse)
    gamma_rels = columns(mat_sub(sig, identity_matrix(len(cells)))) + \
        columns(mat_mul(incl_b, mat_sub(phisig, identity_matrix(len(coarse)))))
    h0_gamma = Presentation.of(len(cells), gamma_rels)

    # into the telescope stage two levels up (relation windows widen once)
    target = tele.stages[idx + 2]
    up = mat_mul(cover_matrix(system.symmetric_cells(level + 1),
                              system.symmetric_cells(level + 2)),
                 cover_matrix(cells, system.symmetric_cells(level + 1)))
    tr_matrix = mat_mul(up, mat_add(identity_matrix(len(cells)), sig))
    tr_map = AbHom.of(h0_gamma, target, tr_matrix)
    return transfer_kernel(h0_gamma, tr_map, tele.h0_plus)


def verify_complementary_witness(system, witness, g: GroupElement):
    """Check X = witness | g(witness) disjointly; raise with the exact gap."""
    image = system.act(g, witness)
    overlap = witness.intersection(image)
    if not overlap.is_empty():
        raise WitnessError(f"witness overlaps its {g} image", leftover=overlap)
    union = witness.union(image)
    full = system.full()
    if union != full:
        raise WitnessError(f"witness and its {g} image do not cover",
                           leftover=full.difference(union))
    return True


# ---------------------------------------------------------------------------
# Closed-form case analysis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HomologyTable:
    """Homology in degrees 0..5 plus the eventual period-2 tail."""

    degrees: tuple
    tail_odd: GroupValue
    tail_even: GroupValue
    tail_from: int

    def entry(self, n: int) -> GroupValue:
        if n < 0:
            raise ValueError("degree must be >= 0")
        if n < len(self.degrees):
            return self.degrees[n]
        if n < self.tail_from:
            raise ValueError("degree below the tail rule but not stored")
        return self.tail_odd if n % 2 else self.tail_even

    def to_json(self) -> dict:
        out = {f"H{i}": group_value_json(g) for i, g in enumerate(self.degrees)}
        out["tail"] = {
            "odd": group_value_json(self.tail_odd),
            "even": group_value_json(self.tail_even),
            "from": self.tail_from,
        }
        return out


_ZERO = FGAbGroup(0)


def _table(h0: GroupValue, odd: GroupValue, even: GroupValue, tail_from: int,
           h1: Optional[GroupValue] = None) -> HomologyTable:
    degs = [h0]
    for n in range(1, 6):
        if n == 1 and h1 is not None:
            degs.append(h1)
        elif n % 2:
            degs.append(odd)
        else:
            degs.append(even)
    return HomologyTable(tuple(degs), tail_odd=odd, tail_even=even, tail_from=tail_from)


def split_orbit_table(h0_base: GroupValue) -> HomologyTable:
    """The case of a non-minimal translation: the space splits into two
    flip-exchanged halves and homology reduces to the half."""
    return _table(h0_base, _ZERO, _ZERO, tail_from=2, h1=FGAbGroup(1))


def free_action_table(h0_plus: GroupValue) -> HomologyTable:
    """The free case: degree 0 gains a single order-2 class, higher
    degrees vanish."""
    if isinstance(h0_plus, FGAbGroup):
        h0 = FGAbGroup(0, (2,)).direct_sum(h0_plus)
    else:
        raise ValueError("free case with a localization H0 is not representable "
                         "as one canonical group; keep the summands separate")
    return _table(h0, _ZERO, _ZERO, tail_from=1)


def nonfree_action_table(h0_plus: GroupValue, fixed_count: int) -> HomologyTable:
    """The non-free case: odd degrees carry one order-2 class per fixed
    point of the two reflections."""
    if fixed_count < 1:
        raise ValueError("the non-free case requires at least one fixed point")
    return _table(h0_plus, FGAbGroup.elementary_two(fixed_count), _ZERO, tail_from=1)


def homology_table(system, max_level: int = 16, method: str = "closed_form"):
    """The homology table of a system plus a provenance report.

    ``method`` chooses the closed-form case analysis, the level-by-level
    free-product assembly, or both (in which case their shared degrees
    must agree and the delta is reported).
    """
    if method not in ("closed_form", "freeproduct", "both"):
        raise ValueError("method must be closed_form, freeproduct or both")

    provenance = {"system": system.to_json(), "maxLevel": max_level, "method": method}

    if isinstance(system, DoubledSystem):
        for n in range(1, 21):
            for s in (0, 1):
                if system.fixed_points(GroupElement(n, s)).points:
                    raise ValueError("split-orbit case requires a free action")
        tele = h0_translation_telescope(system.base, max_level, with_flip=False)
        provenance.update({
            "case": "translation_not_minimal",
            "h0_base": group_value_json(tele.h0),
            "stabilizedAt": tele.stabilized_level(),
        })
        table = split_orbit_table(tele.h0)
        if method != "closed_form":
            raise ValueError("the free-product assembly needs both reflections "
                             "acting on one space; not available for the split case")
        return table, provenance

    if isinstance(system, DenjoyFlipSystem):
        fix_sigma = len(system.fixed_points(FLIP))
        fix_phisigma = len(system.fixed_points(GroupElement(1, 1)))
        fixed_count = fix_sigma + fix_phisigma
        if fixed_count == 0:
            raise ValueError("circle flip systems always have reflection fixed points")
        tele = h0_translation_telescope(system, max_level)
        provenance.update({
            "case": "not_free",
            "fixedPoints": {"sigma": fix_sigma, "phiSigma": fix_phisigma},
            "sigmaTrivialOnH0": tele.sigma_trivial,
            "stabilizedAt": tele.stabilized_level(),
        })
        closed = nonfree_action_table(tele.h0_plus, fixed_count)
        if method == "closed_form":
            return closed, provenance
        fp = free_product_homology(system, max_level)
        provenance["freeproduct"] = {
            "stabilizedAt": fp.stabilized_at,
            "pairedInjective": fp.all_injective,
            "middleExact": fp.all_exact,
        }
        if method == "freeproduct":
            return _table(fp.h0, fp.h1, _ZERO, tail_from=1), provenance
        delta = {}
        if fp.h0 != closed.entry(0):
            delta["H0"] = {"closed": group_value_json(closed.entry(0)),
                           "freeproduct": group_value_json(fp.h0)}
        if fp.h1 != closed.entry(1):
            delta["H1"] = {"closed": group_value_json(closed.entry(1)),
                           "freeproduct": group_value_json(fp.h1)}
        provenance["delta"] = delta
        return closed, provenance

    if isinstance(system, OdometerSystem):
        count_sigma = system.stable_fixed_count(FLIP, max_level=min(max_level, len(system.chain)))
        count_phisigma = system.stable_fixed_count(GroupElement(1, 1),
                                                   max_level=min(max_level, len(system.chain)))
        fixed_count = count_sigma.count + count_phisigma.count
        tele = h0_translation_telescope(system, min(max_level, len(system.chain)))
        provenance.update({
            "case": "not_free",
            "fixedThreads": {
                "sigma": {"count": count_sigma.count, "stabilizedAt": count_sigma.stabilized_at},
                "phiSigma": {"count": count_phisigma.count,
                             "stabilizedAt": count_phisigma.stabilized_at},
            },
            "sigmaTrivialOnH0": tele.sigma_trivial,
            "limit": tele.limit.to_json(),
        })
        closed = nonfree_action_table(tele.h0_plus, fixed_count)
        if method == "closed_form":
            return closed, provenance
        fp = free_product_homology(system, min(max_level, len(system.chain)))
        provenance["freeproduct"] = {
            "stabilizedAt": fp.stabilized_at,
            "pairedInjective": fp.all_injective,
            "middleExact": fp.all_exact,
        }
        if method == "freeproduct":
            return _table(fp.h0, fp.h1, _ZERO, tail_from=1), provenance
        delta = {}
        if fp.h1 != closed.entry(1):
            delta["H1"] = {"closed": group_value_json(closed.entry(1)),
                           "freeproduct": group_value_json(fp.h1)}
        provenance["delta"] = delta
        return closed, provenance

    raise ValueError(f"unsupported system: {system!r}")
