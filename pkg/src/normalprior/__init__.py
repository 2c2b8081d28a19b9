"""Joint denoising and segmentation of triangle meshes guided by a set of
preferred unit normal directions, solved by an alternating splitting scheme
with a shape-Newton vertex update."""

from .admm import (
    IterationMetrics,
    RunResult,
    check_convergence,
    initial_state,
    labels_used,
    phi_solve,
    run,
    update_multipliers,
)
from .energy import (
    AdmmState,
    LabelSet,
    ModelParams,
    augmented_lagrangian,
    fidelity_f1,
    fidelity_f2,
    objective_value,
    shape_gradient,
    shape_hessian,
)
from .errors import (
    BreakdownNaNError,
    DegenerateFaceError,
    InconsistentOrientationError,
    LineSearchFailedError,
    NonFiniteStateError,
    NonManifoldError,
    NonTriangleFaceError,
    NormalPriorError,
    ParseError,
    PivotBreakdownError,
)
from .gen import (
    NoiseSpec,
    add_noise,
    axis_labels,
    gen_fibonacci_labels,
    gen_grid_cube,
    gen_icosphere,
    gen_platonic_labels,
    gen_skyline,
)
from .mesh import (
    GeometryCache,
    SurfaceMesh,
    build_mesh,
    edge_length,
    face_area,
    face_normal,
    mean_incident_edge_length,
    recompute_cache,
)
from .prox import (
    ShrinkResult,
    project_simplex,
    shrink,
    u_update,
    v_update,
    w_update,
)
from .shapeopt import StepReport, armijo_search, choose_direction, \
    newton_direction, vertex_update
from .sparse import (
    CgReport,
    assemble_p1_scalar,
    cg_solve,
    ic0,
    inner_product_matrix,
    truncated_cg,
)

__version__ = "0.1.0"
