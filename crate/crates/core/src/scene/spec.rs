//! JSON scene descriptions.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{dvec, Aabb, Body, Bounds, FreeSpaceState, SceneObject, Task, TransitionRule};
use crate::kinematics::{self, Joint, JointType, MultiRobotSystem, SerialChain};
use crate::manifold::{self, Configuration, Manifold};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub name: String,
    pub ambient_dim: usize,
    pub bounds: Bounds,
    pub manifolds: Vec<ManifoldSpec>,
    pub start: Vec<f64>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub transitions: Vec<TransitionRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot: Option<RobotSpec>,
    #[serde(default = "default_step")]
    pub collision_step: f64,
}

fn default_step() -> f64 {
    super::DEFAULT_COLLISION_STEP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ManifoldKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "snake_case")]
pub enum ManifoldKind {
    /// Rows of `A` and the right-hand side `b` of `A q = b`.
    Affine { a: Vec<Vec<f64>>, b: Vec<f64> },
    Sphere { center: Vec<f64>, radius: f64 },
    /// `coeff (q0² + q1²) + offset - q2 = 0`.
    Paraboloid { coeff: f64, offset: f64 },
    /// `(q0² + q1²) / radius² = 1`.
    Cylinder { radius: f64 },
    Point { target: Vec<f64> },
    JointLock { indices: Vec<usize>, values: Vec<f64> },
    Pick {
        chain: usize,
        point: [f64; 3],
        target: [f64; 3],
    },
    Handover {
        first: usize,
        first_point: [f64; 3],
        second: usize,
        second_point: [f64; 3],
    },
    Orientation {
        chain: usize,
        axis: [f64; 3],
        up: [f64; 3],
    },
    Intersection { parts: Vec<ManifoldKind> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    pub chains: Vec<ChainSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub name: String,
    pub base: BaseSpec,
    pub joints: Vec<JointSpec>,
    pub tool: [f64; 3],
}

/// Translation plus roll/pitch/yaw in radians.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BaseSpec {
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl BaseSpec {
    fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(
            Translation3::from(Vector3::from(self.xyz)),
            UnitQuaternion::from_euler_angles(self.rpy[0], self.rpy[1], self.rpy[2]),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub axis: [f64; 3],
    #[serde(rename = "type")]
    pub kind: JointKindSpec,
    pub origin: BaseSpec,
    pub limits: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKindSpec {
    Revolute,
    Prismatic,
}

impl RobotSpec {
    pub fn build(&self) -> Result<MultiRobotSystem> {
        let chains = self
            .chains
            .iter()
            .map(|c| {
                let joints = c
                    .joints
                    .iter()
                    .map(|j| {
                        let axis = Vector3::from(j.axis);
                        if !(axis.norm() > 0.0) {
                            return Err(Error::InvalidScene(format!(
                                "chain '{}' has a zero joint axis",
                                c.name
                            )));
                        }
                        if !(j.limits[0] <= j.limits[1]) {
                            return Err(Error::InvalidScene(format!(
                                "chain '{}' has joint limits out of order",
                                c.name
                            )));
                        }
                        let kind = match j.kind {
                            JointKindSpec::Revolute => JointType::Revolute,
                            JointKindSpec::Prismatic => JointType::Prismatic,
                        };
                        Ok(Joint::new(axis, kind, j.origin.isometry(), (j.limits[0], j.limits[1])))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(SerialChain {
                    name: c.name.clone(),
                    base: c.base.isometry(),
                    joints,
                    tool: Vector3::from(c.tool),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiRobotSystem::new(chains))
    }
}

impl ManifoldKind {
    fn build(
        &self,
        name: &str,
        k: usize,
        robot: Option<&Arc<MultiRobotSystem>>,
    ) -> Result<Manifold> {
        let need_robot = || {
            robot.cloned().ok_or_else(|| {
                Error::InvalidScene(format!("manifold '{name}' needs a robot description"))
            })
        };
        let check_chain = |sys: &MultiRobotSystem, c: usize| {
            if c < sys.chains().len() {
                Ok(())
            } else {
                Err(Error::InvalidScene(format!(
                    "manifold '{name}' refers to chain {c}, which does not exist"
                )))
            }
        };
        let check_len = |n: usize| {
            if n == k {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected: k, got: n })
            }
        };
        let m = match self {
            ManifoldKind::Affine { a, b } => {
                if a.is_empty() || a.len() != b.len() || a.len() > k {
                    return Err(Error::InvalidScene(format!(
                        "affine manifold '{name}' has inconsistent rows"
                    )));
                }
                for row in a {
                    check_len(row.len())?;
                }
                let flat: Vec<f64> = a.iter().flatten().copied().collect();
                Manifold::new(
                    name,
                    manifold::Affine {
                        a: DMatrix::from_row_slice(a.len(), k, &flat),
                        b: dvec(b),
                    },
                )
            }
            ManifoldKind::Sphere { center, radius } => {
                check_len(center.len())?;
                Manifold::new(
                    name,
                    manifold::Sphere {
                        center: dvec(center),
                        radius: *radius,
                    },
                )
            }
            ManifoldKind::Paraboloid { coeff, offset } => {
                if k < 3 {
                    return Err(Error::InvalidScene(format!("paraboloid '{name}' needs k >= 3")));
                }
                Manifold::new(
                    name,
                    manifold::Paraboloid {
                        ambient_dim: k,
                        coeff: *coeff,
                        offset: *offset,
                    },
                )
            }
            ManifoldKind::Cylinder { radius } => {
                if k < 2 || !(*radius > 0.0) {
                    return Err(Error::InvalidScene(format!("cylinder '{name}' is degenerate")));
                }
                Manifold::new(
                    name,
                    manifold::Cylinder {
                        ambient_dim: k,
                        radius: *radius,
                    },
                )
            }
            ManifoldKind::Point { target } => {
                check_len(target.len())?;
                Manifold::new(name, manifold::PointGoal { target: dvec(target) })
            }
            ManifoldKind::JointLock { indices, values } => {
                if indices.is_empty()
                    || indices.len() != values.len()
                    || indices.iter().any(|&i| i >= k)
                {
                    return Err(Error::InvalidScene(format!(
                        "joint lock '{name}' has invalid indices"
                    )));
                }
                Manifold::new(
                    name,
                    manifold::JointLock {
                        ambient_dim: k,
                        indices: indices.clone(),
                        values: values.clone(),
                    },
                )
            }
            ManifoldKind::Pick { chain, point, target } => {
                let sys = need_robot()?;
                check_chain(&sys, *chain)?;
                kinematics::pick_constraint(name, sys, *chain, (*point).into(), (*target).into())
            }
            ManifoldKind::Handover {
                first,
                first_point,
                second,
                second_point,
            } => {
                let sys = need_robot()?;
                check_chain(&sys, *first)?;
                check_chain(&sys, *second)?;
                kinematics::handover_constraint(
                    name,
                    sys,
                    (*first, (*first_point).into()),
                    (*second, (*second_point).into()),
                )
            }
            ManifoldKind::Orientation { chain, axis, up } => {
                let sys = need_robot()?;
                check_chain(&sys, *chain)?;
                kinematics::orientation_constraint(name, sys, *chain, (*axis).into(), (*up).into())
            }
            ManifoldKind::Intersection { parts } => {
                let mut built = parts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| p.build(&format!("{name}.{i}"), k, robot));
                let first = built.next().ok_or_else(|| {
                    Error::InvalidScene(format!("intersection '{name}' has no parts"))
                })??;
                let mut acc = first;
                for part in built {
                    acc = acc.intersect(&part?);
                }
                acc.renamed(name)
            }
        };
        Ok(m)
    }
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<Task> {
        let k = self.ambient_dim;
        if self.start.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: self.start.len(),
            });
        }
        let system = self.robot.as_ref().map(|r| r.build().map(Arc::new)).transpose()?;
        let manifolds = self
            .manifolds
            .iter()
            .map(|m| m.kind.build(&m.name, k, system.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let obstacles = self
            .obstacles
            .iter()
            .map(|o| {
                Ok(SceneObject {
                    id: o.id.clone(),
                    aabb: Aabb::new(o.min.clone(), o.max.clone())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let task = Task {
            name: self.name.clone(),
            manifolds,
            start: Configuration::try_new(dvec(&self.start))?,
            bounds: self.bounds.clone(),
            free_space: FreeSpaceState::new(obstacles),
            transitions: self.transitions.clone(),
            body: match system {
                Some(sys) => Body::Robot(sys),
                None => Body::Point,
            },
            collision_step: self.collision_step,
        };
        task.check()?;
        Ok(task)
    }
}
