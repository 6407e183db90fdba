"""Walls and flows for mapping tori of graph self-maps.

Pipeline: load a graph self-map, classify its strata and weights, build the
mapping torus and finite balls of its universal cover, place busts and
assemble immersed walls, lift and approximate them, and run desk-scale
separation and dual-cube-complex computations.
"""

from .graph import (
    EdgePath,
    Graph,
    GraphError,
    GraphMap,
    apply_map,
    direction_map,
    illegal_turns,
    inverse_name,
    iterate_tight,
    path_legal,
    tighten,
)
from .strata import (
    Filtration,
    Stratum,
    VerificationReport,
    analyze_strata,
    atoroidal_heuristic,
    classify_stratum,
    compute_maximal_filtration,
    edge_weight_limit_check,
    edge_weights,
    find_nielsen_paths,
    split_path,
    transition_matrix,
    verify_improved,
    verify_rtt,
)
from .torus import (
    BallComplex,
    GroupElement,
    MappingTorusComplex,
    build_ball,
    build_torus,
    build_torus_power,
    ge_identity,
    ge_inverse,
    ge_mul,
    geodesic_in_ball,
    normal_form,
)
from .flow import (
    BallPoint,
    LeafTrace,
    PointV,
    Tunnel,
    flow_step,
    flow_step_ball,
    leaf_intersections,
    leaf_trace,
    periodic_points,
    preimages,
    rtree_distance_estimate,
    tunnel,
)
from .walls import (
    Approximation,
    BustSet,
    ImmersedWall,
    WallTrace,
    approximate,
    build_eflat,
    build_immersed_wall,
    bust_separation_check,
    canonical_busts,
    classify_nuclei,
    cocycle_check,
    distortion_report,
    exceptional_zones,
    lift_wall,
    secondary_busts,
)
from .cutting import (
    CuttingConfig,
    DualCubeComplex,
    LevelTrace,
    SideAssignment,
    crossing_parity,
    cut_check,
    deviation_classify,
    dual_cube_complex,
    lifted_augmentation,
    path_from_vertices,
    push_crop,
    side_assignment,
)

__version__ = "0.1.0"
