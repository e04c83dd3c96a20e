"""Exact castles, invariant windows and homology for dihedral Cantor systems.

The package realizes three families of minimal actions of the infinite
dihedral group on the Cantor set (cut-circle rotations with a flip,
odometers along divisibility chains, and doubled circle systems) in
exact arithmetic, builds and verifies the clopen castles behind their
almost finiteness, and computes the group homology of the actions with
independent cross-checks.
"""

from .exact_circle import (
    Arc,
    ClopenSet,
    CutPoint,
    GOLDEN,
    QuadExt,
    Theta,
    frac,
    is_partition,
    qe_cmp,
)
from .systems import (
    DenjoyFlipSystem,
    DoubledClopen,
    DoubledSystem,
    FLIP,
    GroupElement,
    IDENTITY,
    LevelSet,
    OdometerSystem,
    TRANSLATION,
    top_freeness_check,
)
from .amenability import FolnerSet, folner, folner_ratio, is_transversal, odometer_castle
from .towers import Castle, Tower, almost_finite_certificate, first_return_castle, verify_castle
from .abgroups import (
    AbHom,
    DirectSystem,
    FGAbGroup,
    Presentation,
    smith_normal_form,
    snf_diagonal,
    subquotient,
)
from .homology import (
    HomologyTable,
    InvolutionModule,
    bar_homology,
    coinvariants,
    even_homology,
    free_product_homology,
    h0_translation_telescope,
    homology_table,
    odd_homology,
    psi_check,
    transfer_report,
)

__version__ = "0.1.0"
