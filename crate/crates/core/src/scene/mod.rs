//! Obstacles, collision checking, the free-space update applied at manifold
//! transitions, and the planning task bundle.

mod builtin;
mod spec;

use std::sync::Arc;

use nalgebra::{DVector, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::kinematics::MultiRobotSystem;
use crate::manifold::{Configuration, Manifold};
use crate::{Error, Result};

pub use builtin::{build_benchmark_scene, builtin_spec, BENCHMARK_SCENES, SCENE_NAMES};
pub use spec::{
    BaseSpec, ChainSpec, JointSpec, ManifoldKind, ManifoldSpec, ObstacleSpec,
    RobotSpec, SceneSpec,
};

/// Default interpolation spacing for straight-line collision checks.
pub const DEFAULT_COLLISION_STEP: f64 = 0.05;

/// Axis-aligned box. Containment is inclusive on the boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Aabb {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::DimensionMismatch {
                expected: min.len(),
                got: max.len(),
            });
        }
        if min.iter().zip(&max).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidScene(format!(
                "box corners out of order: {min:?} / {max:?}"
            )));
        }
        Ok(Aabb { min, max })
    }

    pub fn centered(center: &[f64], half: &[f64]) -> Self {
        Aabb {
            min: center.iter().zip(half).map(|(c, h)| c - h).collect(),
            max: center.iter().zip(half).map(|(c, h)| c + h).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.min.iter().zip(&self.max).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn half_extents(&self) -> Vec<f64> {
        self.min.iter().zip(&self.max).map(|(a, b)| 0.5 * (b - a)).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        debug_assert_eq!(p.len(), self.dim());
        p.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..self.dim()).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub aabb: Aabb,
}

/// An object carried by a chain. `offset` is the world-frame vector from the
/// carrying point to the object's box center, fixed at attach time.
#[derive(Clone, Debug, PartialEq)]
pub struct AttachmentRecord {
    pub object: String,
    pub chain: usize,
    pub point: Vector3<f64>,
    pub offset: Vector3<f64>,
    pub half_extents: Vector3<f64>,
}

impl AttachmentRecord {
    pub fn aabb_at(&self, sys: &MultiRobotSystem, q: &[f64]) -> Aabb {
        let c = sys.fk_position(self.chain, &self.point, q) + self.offset;
        Aabb::centered(c.as_slice(), self.half_extents.as_slice())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FreeSpaceState {
    pub obstacles: Vec<SceneObject>,
    pub attachments: Vec<AttachmentRecord>,
}

impl FreeSpaceState {
    pub fn new(obstacles: Vec<SceneObject>) -> Self {
        FreeSpaceState {
            obstacles,
            attachments: Vec::new(),
        }
    }

    pub fn object_count(&self) -> usize {
        self.obstacles.len() + self.attachments.len()
    }

    pub fn is_attached(&self, object: &str) -> bool {
        self.attachments.iter().any(|a| a.object == object)
    }

    /// Order-insensitive equality, up to `tol` on box coordinates and offsets.
    pub fn set_equal(&self, other: &FreeSpaceState, tol: f64) -> bool {
        fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
        }
        let obstacles_match = |a: &FreeSpaceState, b: &FreeSpaceState| {
            a.obstacles.iter().all(|o| {
                b.obstacles.iter().any(|p| {
                    o.id == p.id
                        && close(&o.aabb.min, &p.aabb.min, tol)
                        && close(&o.aabb.max, &p.aabb.max, tol)
                })
            })
        };
        let attachments_match = |a: &FreeSpaceState, b: &FreeSpaceState| {
            a.attachments.iter().all(|x| {
                b.attachments.iter().any(|y| {
                    x.object == y.object
                        && x.chain == y.chain
                        && (x.point - y.point).amax() <= tol
                        && (x.half_extents - y.half_extents).amax() <= tol
                })
            })
        };
        self.obstacles.len() == other.obstacles.len()
            && self.attachments.len() == other.attachments.len()
            && obstacles_match(self, other)
            && obstacles_match(other, self)
            && attachments_match(self, other)
            && attachments_match(other, self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Effect {
    None,
    /// Pick up `object`; it travels with `point` on `chain`.
    Attach {
        object: String,
        chain: usize,
        point: [f64; 3],
    },
    /// Put `object` down where the carrying point is at `q_end`.
    Detach { object: String },
}

/// Free-space update applied once segment `trigger` (0-based) is complete.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionRule {
    pub trigger: usize,
    pub effect: Effect,
}

/// What occupies space for a given configuration.
#[derive(Clone, Debug)]
pub enum Body {
    /// The configuration itself is the point that must avoid the boxes.
    Point,
    Robot(Arc<MultiRobotSystem>),
}

impl Body {
    /// Whether `q` is outside every static obstacle (including carried
    /// objects, which are tested box-against-box).
    pub fn config_free(&self, q: &[f64], fs: &FreeSpaceState) -> bool {
        match self {
            Body::Point => fs.obstacles.iter().all(|o| !o.aabb.contains(q)),
            Body::Robot(sys) => {
                let pts = sys.sample_points(q);
                let links_clear = fs
                    .obstacles
                    .iter()
                    .all(|o| pts.iter().all(|p| !o.aabb.contains(p.as_slice())));
                links_clear
                    && fs.attachments.iter().all(|a| {
                        let held = a.aabb_at(sys, q);
                        fs.obstacles.iter().all(|o| !o.aabb.overlaps(&held))
                    })
            }
        }
    }

    /// Straight ambient segment check at spacing `<= step`. The endpoints are
    /// put in a canonical order first so the result is symmetric.
    pub fn segment_free(&self, qa: &[f64], qb: &[f64], fs: &FreeSpaceState, step: f64) -> bool {
        assert_eq!(qa.len(), qb.len(), "segment endpoints differ in dimension");
        assert!(step > 0.0, "collision step must be positive");
        if fs.obstacles.is_empty() {
            return true;
        }
        let (a, b) = if lexicographic_le(qa, qb) { (qa, qb) } else { (qb, qa) };
        let len = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let n = ((len / step).ceil() as usize).max(1);
        let mut buf = vec![0.0; a.len()];
        (0..=n).all(|j| {
            let t = j as f64 / n as f64;
            for (i, v) in buf.iter_mut().enumerate() {
                *v = a[i] + t * (b[i] - a[i]);
            }
            self.config_free(&buf, fs)
        })
    }

    pub fn system(&self) -> Option<&Arc<MultiRobotSystem>> {
        match self {
            Body::Point => None,
            Body::Robot(sys) => Some(sys),
        }
    }
}

fn lexicographic_le(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    true
}

/// Point-body collision check of the segment `qa -> qb`.
pub fn collision_free_segment(
    qa: &Configuration,
    qb: &Configuration,
    fs: &FreeSpaceState,
    step: f64,
) -> bool {
    Body::Point.segment_free(qa.as_slice(), qb.as_slice(), fs, step)
}

/// Applies `rule` to `fs` with the transition happening at `q_end`.
/// The input state is left untouched.
pub fn apply_transition(
    fs: &FreeSpaceState,
    rule: &TransitionRule,
    q_end: &Configuration,
    body: &Body,
) -> Result<FreeSpaceState> {
    let mut out = fs.clone();
    match &rule.effect {
        Effect::None => {}
        Effect::Attach {
            object,
            chain,
            point,
        } => {
            let sys = body.system().ok_or_else(|| {
                Error::InvalidScene("attach effects need a robot body".into())
            })?;
            let idx = out
                .obstacles
                .iter()
                .position(|o| o.id.as_deref() == Some(object.as_str()))
                .ok_or_else(|| Error::UnknownObject(object.clone()))?;
            let obj = out.obstacles.remove(idx);
            let point = Vector3::from(*point);
            let carrier = sys.fk_position(*chain, &point, q_end.as_slice());
            let center = Vector3::from_column_slice(&obj.aabb.center());
            out.attachments.push(AttachmentRecord {
                object: object.clone(),
                chain: *chain,
                point,
                offset: center - carrier,
                half_extents: Vector3::from_column_slice(&obj.aabb.half_extents()),
            });
        }
        Effect::Detach { object } => {
            let sys = body.system().ok_or_else(|| {
                Error::InvalidScene("detach effects need a robot body".into())
            })?;
            let idx = out
                .attachments
                .iter()
                .position(|a| &a.object == object)
                .ok_or_else(|| Error::UnknownObject(object.clone()))?;
            let held = out.attachments.remove(idx);
            out.obstacles.push(SceneObject {
                id: Some(held.object.clone()),
                aabb: held.aabb_at(sys, q_end.as_slice()),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Bounds {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        q.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    /// Largest side length of the box.
    pub fn span(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let v: Vec<f64> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(&lo, &hi)| if lo < hi { rng.gen_range(lo..hi) } else { lo })
            .collect();
        Configuration::from(v)
    }
}

/// Everything a planner needs: the manifold sequence `M_1..M_{n+1}`, the
/// start, the sampling box and the initial free space with its updates.
#[derive(Clone, Debug)]
pub struct Task {
    pub name: String,
    pub manifolds: Vec<Manifold>,
    pub start: Configuration,
    pub bounds: Bounds,
    pub free_space: FreeSpaceState,
    pub transitions: Vec<TransitionRule>,
    pub body: Body,
    pub collision_step: f64,
}

impl Task {
    pub fn new(
        name: impl Into<String>,
        manifolds: Vec<Manifold>,
        start: Configuration,
        bounds: Bounds,
    ) -> Result<Self> {
        let task = Task {
            name: name.into(),
            manifolds,
            start,
            bounds,
            free_space: FreeSpaceState::default(),
            transitions: Vec::new(),
            body: Body::Point,
            collision_step: DEFAULT_COLLISION_STEP,
        };
        task.check()?;
        Ok(task)
    }

    pub fn with_obstacles(mut self, obstacles: Vec<SceneObject>) -> Result<Self> {
        self.free_space = FreeSpaceState::new(obstacles);
        self.check()?;
        Ok(self)
    }

    pub fn ambient_dim(&self) -> usize {
        self.start.dim()
    }

    /// Number of path segments `n` (one fewer than the manifolds).
    pub fn n_segments(&self) -> usize {
        self.manifolds.len() - 1
    }

    pub fn goal_manifold(&self) -> &Manifold {
        self.manifolds.last().expect("task has manifolds")
    }

    pub fn segment_free(&self, qa: &Configuration, qb: &Configuration, fs: &FreeSpaceState) -> bool {
        self.body
            .segment_free(qa.as_slice(), qb.as_slice(), fs, self.collision_step)
    }

    pub fn in_bounds(&self, q: &Configuration) -> bool {
        self.bounds.contains(q.as_slice())
    }

    /// Applies every rule triggered by the end of segment `segment`, in
    /// declaration order.
    pub fn advance_free_space(
        &self,
        segment: usize,
        fs: &FreeSpaceState,
        q_end: &Configuration,
    ) -> Result<FreeSpaceState> {
        let mut out = fs.clone();
        for rule in self.transitions.iter().filter(|r| r.trigger == segment) {
            out = apply_transition(&out, rule, q_end, &self.body)?;
        }
        Ok(out)
    }

    /// Free-space states seen along a path whose segment `i` ends at
    /// `boundaries[i]`.
    pub fn replay_free_space(&self, boundaries: &[Configuration]) -> Result<Vec<FreeSpaceState>> {
        let mut states = vec![self.free_space.clone()];
        for (i, q) in boundaries.iter().enumerate().take(self.n_segments().saturating_sub(1)) {
            let next = self.advance_free_space(i, &states[i], q)?;
            states.push(next);
        }
        Ok(states)
    }

    fn check(&self) -> Result<()> {
        let k = self.ambient_dim();
        if self.manifolds.len() < 2 {
            return Err(Error::InvalidScene(
                "a task needs at least two manifolds".into(),
            ));
        }
        for m in &self.manifolds {
            if m.ambient_dim() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: m.ambient_dim(),
                });
            }
        }
        if self.bounds.dim() != k || self.bounds.hi.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: self.bounds.dim(),
            });
        }
        if !self.start.is_finite() {
            return Err(Error::NonFinite);
        }
        let box_dim = match &self.body {
            Body::Point => k,
            Body::Robot(sys) => {
                if sys.dof() != k {
                    return Err(Error::DimensionMismatch {
                        expected: k,
                        got: sys.dof(),
                    });
                }
                3
            }
        };
        for o in &self.free_space.obstacles {
            if o.aabb.dim() != box_dim {
                return Err(Error::DimensionMismatch {
                    expected: box_dim,
                    got: o.aabb.dim(),
                });
            }
        }
        let mut ids: Vec<&str> = self
            .free_space
            .obstacles
            .iter()
            .filter_map(|o| o.id.as_deref())
            .collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidScene("duplicate object ids".into()));
        }
        for r in &self.transitions {
            if r.trigger + 1 >= self.n_segments() {
                return Err(Error::InvalidScene(format!(
                    "transition trigger {} has no following segment (n = {})",
                    r.trigger,
                    self.n_segments()
                )));
            }
        }
        if !(self.collision_step > 0.0) {
            return Err(Error::InvalidScene("collision step must be positive".into()));
        }
        Ok(())
    }
}

pub(crate) fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
