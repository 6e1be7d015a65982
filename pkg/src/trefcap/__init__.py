"""Direct Trefftz boundary solver for interior 2D Laplace problems and
hierarchical capacitance extraction for multilayer planar conductors.

The central object is the boundary capacitance matrix C = G^-1 H of a
discretized boundary: a dense map from nodal boundary potentials to nodal
outward fluxes.  C is independent of the domain position and scales
exactly as 1/s under uniform domain scaling, which lets a shape-keyed
cache serve every geometrically similar subdomain from one assembly.  The
extraction pipeline decomposes dielectric layers into rectangular
subdomains refined toward the conductors, condenses their matrices by
exact block elimination, and reads per-unit-length capacitances off the
retained conductor nodes.
"""

from .assembly import (
    Bcm,
    QuadratureRule,
    assemble_G,
    assemble_H,
    compute_bcm,
    condition_estimate,
    solve_mixed,
)
from .basis import (
    POLICY_DEFAULT,
    POLICY_SKIP_CONSTANT,
    BasisSet,
    Kind,
    TrefftzFunction,
    default_basis,
    q_star,
    u_star,
    u_star_cartesian,
)
from .decomposition import (
    Conductor,
    Footprint,
    Layer,
    LayerProblem,
    NodeTag,
    Rect,
    Subdomain,
    TreeNode,
    decompose_layer,
    decompose_problem,
    leaf_subdomains,
    shape_classes,
)
from .errors import (
    CacheFileError,
    ComparisonError,
    ConformityError,
    DegenerateBcError,
    FlatSingularityError,
    InvalidBasisError,
    InvalidGeometryError,
    InvalidScaleError,
    MergeSingularityError,
    PairingError,
    ProblemFormatError,
    QuadratureWarning,
    RefinementError,
    SingularSystemError,
    TrefcapError,
    UnderdeterminedProblemError,
)
from .geometry import (
    BoundaryElement,
    BoundaryMesh,
    FrameData,
    Point2,
    ShapeSignature,
    build_closed_curve_mesh,
    build_rect_mesh,
    frame_at,
    normalize,
    signature,
    transformed,
)
from .matio import export_matrix, import_matrix
from .merge import (
    CondensedOperator,
    GeneralizedCapacitanceMatrix,
    RetainedNode,
    RmseReport,
    eliminate_neumann,
    generalized_capacitance,
    lift_bcm,
    merge_pair,
    reduce_tree,
    rmse,
)
from .oracle import (
    ClosedFormMatrices,
    exact_rect4,
    exact_rect5,
    flat_reference,
    parallel_plate_reference,
)
from .pipeline import RunReport, bench, run_extract
from .problems import parse_problem, parse_problem_text, serialize_problem
from .scaling import BcmCache, CachedBcm, CacheStats, scale_bcm

__version__ = "0.1.0"
