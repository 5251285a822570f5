//! Independent replay of a solution path against its task.

use serde::{Deserialize, Serialize};

use crate::planner::{path_length, SolutionPath};
use crate::scene::{FreeSpaceState, Task};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidateOptions {
    /// Residual tolerance for every vertex.
    pub eps: f64,
    /// Longest allowed edge, if any.
    pub max_edge: Option<f64>,
    /// Tolerance on the start configuration and the recorded cost.
    pub tol: f64,
}

impl ValidateOptions {
    pub fn new(eps: f64) -> Self {
        ValidateOptions {
            eps,
            max_edge: None,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Structure { detail: String },
    Start { distance: f64 },
    Residual { vertex: usize, manifold: usize, residual: f64 },
    OutOfBounds { vertex: usize },
    Collision { segment: usize, edge: usize },
    EdgeLength { edge: usize, length: f64 },
    Cost { recorded: f64, recomputed: f64 },
    Transition { segment: usize, detail: String },
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Free space in force during each segment, as replayed from the path.
    pub free_spaces: Vec<FreeSpaceState>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_structure(task: &Task, path: &SolutionPath) -> Option<String> {
    let n = task.n_segments();
    let b = &path.segment_bounds;
    if path.configs.is_empty() {
        return Some("path has no configurations".into());
    }
    if b.len() != n + 1 {
        return Some(format!("expected {} segment bounds, found {}", n + 1, b.len()));
    }
    if b[0] != 0 || b[n] != path.configs.len() - 1 {
        return Some("segment bounds must span the whole path".into());
    }
    if b.windows(2).any(|w| w[1] < w[0]) {
        return Some("segment bounds are not ordered".into());
    }
    if let Some(i) = path.configs.iter().position(|q| q.dim() != task.ambient_dim()) {
        return Some(format!("configuration {i} has the wrong dimension"));
    }
    None
}

/// Checks constraint residuals per segment, shared boundaries, bounds,
/// collisions under the replayed free space, and the recorded cost.
pub fn validate_path(task: &Task, path: &SolutionPath, opts: &ValidateOptions) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Some(detail) = check_structure(task, path) {
        report.violations.push(Violation::Structure { detail });
        return report;
    }
    let v = &mut report.violations;
    let b = &path.segment_bounds;
    let n = task.n_segments();

    let distance = path.configs[0].distance(&task.start);
    if distance > opts.tol {
        v.push(Violation::Start { distance });
    }

    for i in 0..n {
        for idx in b[i]..=b[i + 1] {
            let residual = task.manifolds[i].residual(&path.configs[idx]);
            if !(residual <= opts.eps) {
                v.push(Violation::Residual {
                    vertex: idx,
                    manifold: i,
                    residual,
                });
            }
        }
        // the segment end also lies on the next manifold
        let end = b[i + 1];
        let residual = task.manifolds[i + 1].residual(&path.configs[end]);
        if !(residual <= opts.eps) {
            v.push(Violation::Residual {
                vertex: end,
                manifold: i + 1,
                residual,
            });
        }
    }

    for (idx, q) in path.configs.iter().enumerate() {
        if !task.in_bounds(q) {
            v.push(Violation::OutOfBounds { vertex: idx });
        }
    }

    if let Some(limit) = opts.max_edge {
        for (edge, w) in path.configs.windows(2).enumerate() {
            let length = w[0].distance(&w[1]);
            if length > limit {
                v.push(Violation::EdgeLength { edge, length });
            }
        }
    }

    let mut fs = task.free_space.clone();
    for i in 0..n {
        for edge in b[i]..b[i + 1] {
            if !task.segment_free(&path.configs[edge], &path.configs[edge + 1], &fs) {
                v.push(Violation::Collision { segment: i, edge });
            }
        }
        if b[i] == b[i + 1] && !task.body.config_free(path.configs[b[i]].as_slice(), &fs) {
            v.push(Violation::Collision { segment: i, edge: b[i] });
        }
        report.free_spaces.push(fs.clone());
        if i + 1 < n {
            match task.advance_free_space(i, &fs, &path.configs[b[i + 1]]) {
                Ok(next) => fs = next,
                Err(e) => {
                    v.push(Violation::Transition {
                        segment: i,
                        detail: e.to_string(),
                    });
                    break;
                }
            }
        }
    }

    let recomputed = path_length(&path.configs);
    if (recomputed - path.total_cost).abs() > opts.tol * (1.0 + recomputed) {
        v.push(Violation::Cost {
            recorded: path.total_cost,
            recomputed,
        });
    }
    report
}
