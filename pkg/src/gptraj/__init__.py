"""Factor-graph trajectory estimation and planning on SE(2) x R^n.

A constant-velocity Gaussian-process prior ties trajectory states together,
obstacle factors built on a signed distance field keep them clear of the
world, and a Bayes tree supports incremental re-planning as measurements
arrive.  The runtime closes the loop against a stochastic simulator, and the
benchmark compares the simultaneous approach with filter-then-replan and
open-loop baselines.
"""

from __future__ import annotations

from .bayestree import (
    BayesTree,
    build_bayes_tree,
    compute_ordering,
    eliminate,
    relinearize_to_quiescence,
)
from .bench import (
    BenchConfig,
    aggregate_rows,
    benchmark_to_files,
    generate_obstacles,
    generate_world,
    make_problem,
    read_csv,
    run_benchmark,
    run_cell,
    write_aggregate_csv,
    write_runs_csv,
)
from .environment import (
    AxisBox,
    BodyModel,
    SignedDistanceField,
    WorldSpec,
    build_sdf,
    config_collides,
    default_body,
    forward_kinematics,
    hinge_loss,
    load_sdf,
    min_clearance,
    obstacle_error,
    save_sdf,
    sdf_query,
)
from .factors import (
    Factor,
    FactorGraph,
    FixFactor,
    GpPriorFactor,
    InterpObstacleFactor,
    LinearSystem,
    MeasurementFactor,
    NoiseModel,
    ObstacleFactor,
    evaluate_factor,
)
from .gp import (
    gp_error_lie,
    gp_error_lie_jacobians,
    interpolate_state,
    process_noise_cov,
    transition_matrix,
)
from .optimize import OptimizerConfig, SolveReport, optimize_batch, optimize_values
from .runtime import (
    ProblemSpec,
    RunMetrics,
    RunRecord,
    SimConfig,
    SolverConfig,
    build_steap_graph,
    compute_metrics,
    initialize_trajectory,
    run_mode,
    run_ol,
    run_slap,
    run_steap,
    segment_collision_free,
    simulate_execute,
    simulate_measurement,
)
from .se2 import Se2Pose
from .states import MarkovState, MobileConfig, Trajectory, VectorConfig
from .svgplot import render_run_svg, save_run_svg

__version__ = "0.1.0"

__all__ = [
    "AxisBox",
    "BayesTree",
    "BenchConfig",
    "BodyModel",
    "Factor",
    "FactorGraph",
    "FixFactor",
    "GpPriorFactor",
    "InterpObstacleFactor",
    "LinearSystem",
    "MarkovState",
    "MeasurementFactor",
    "MobileConfig",
    "NoiseModel",
    "ObstacleFactor",
    "OptimizerConfig",
    "ProblemSpec",
    "RunMetrics",
    "RunRecord",
    "Se2Pose",
    "SignedDistanceField",
    "SimConfig",
    "SolveReport",
    "SolverConfig",
    "Trajectory",
    "VectorConfig",
    "WorldSpec",
    "aggregate_rows",
    "benchmark_to_files",
    "build_bayes_tree",
    "build_sdf",
    "build_steap_graph",
    "compute_metrics",
    "compute_ordering",
    "config_collides",
    "default_body",
    "eliminate",
    "evaluate_factor",
    "forward_kinematics",
    "generate_obstacles",
    "generate_world",
    "gp_error_lie",
    "gp_error_lie_jacobians",
    "hinge_loss",
    "initialize_trajectory",
    "interpolate_state",
    "load_sdf",
    "make_problem",
    "min_clearance",
    "obstacle_error",
    "optimize_batch",
    "optimize_values",
    "process_noise_cov",
    "read_csv",
    "relinearize_to_quiescence",
    "render_run_svg",
    "run_benchmark",
    "run_cell",
    "run_mode",
    "run_ol",
    "run_slap",
    "run_steap",
    "save_run_svg",
    "save_sdf",
    "sdf_query",
    "segment_collision_free",
    "simulate_execute",
    "simulate_measurement",
    "transition_matrix",
    "write_aggregate_csv",
    "write_runs_csv",
]
