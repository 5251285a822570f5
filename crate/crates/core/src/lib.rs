//! Sampling-based motion planning over a fixed sequence of implicitly
//! defined constraint manifolds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub use nalgebra;

pub mod error;
pub mod kinematics;
pub mod linalg;
pub mod planner;
pub mod manifold;
pub mod scene;
pub mod steering;
pub mod tree;
pub mod validate;

pub use error::{Error, Result};
pub use manifold::{project, Configuration, Constraint, Manifold, ProjectionFailure};
pub use planner::{
    psm_star, psm_star_greedy, psm_star_single_tree, rrt_star_ik, Plan, PlannerKind, PlannerParams,
    SolutionPath,
};
pub use scene::{build_benchmark_scene, Task};
pub use validate::{validate_path, ValidateOptions, ValidationReport, Violation};
