//! Serial-chain forward kinematics for stacked multi-robot configurations,
//! and the pick / handover / orientation constraints built on top of it.

use std::sync::Arc;

use nalgebra::{DVector, Isometry3, Translation3, Unit, UnitQuaternion, Vector3};

use crate::manifold::{Constraint, Manifold};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JointType {
    Revolute,
    Prismatic,
}

#[derive(Clone, Debug)]
pub struct Joint {
    pub axis: Unit<Vector3<f64>>,
    pub kind: JointType,
    /// Fixed transform from the previous frame to this joint's frame.
    pub origin: Isometry3<f64>,
    pub limits: (f64, f64),
}

impl Joint {
    pub fn new(axis: Vector3<f64>, kind: JointType, origin: Isometry3<f64>, limits: (f64, f64)) -> Self {
        assert!(limits.0 <= limits.1, "joint limits out of order");
        Joint {
            axis: Unit::new_normalize(axis),
            kind,
            origin,
            limits,
        }
    }

    pub fn revolute(axis: Vector3<f64>, offset: Vector3<f64>, limits: (f64, f64)) -> Self {
        Joint::new(axis, JointType::Revolute, translation(offset), limits)
    }

    pub fn prismatic(axis: Vector3<f64>, offset: Vector3<f64>, limits: (f64, f64)) -> Self {
        Joint::new(axis, JointType::Prismatic, translation(offset), limits)
    }

    fn motion(&self, value: f64) -> Isometry3<f64> {
        match self.kind {
            JointType::Revolute => Isometry3::from_parts(
                Translation3::identity(),
                UnitQuaternion::from_axis_angle(&self.axis, value),
            ),
            JointType::Prismatic => Isometry3::from_parts(
                Translation3::from(self.axis.into_inner() * value),
                UnitQuaternion::identity(),
            ),
        }
    }
}

pub fn translation(offset: Vector3<f64>) -> Isometry3<f64> {
    Isometry3::from_parts(Translation3::from(offset), UnitQuaternion::identity())
}

#[derive(Clone, Debug)]
pub struct SerialChain {
    pub name: String,
    pub base: Isometry3<f64>,
    pub joints: Vec<Joint>,
    /// End-effector point, expressed in the last joint frame.
    pub tool: Vector3<f64>,
}

impl SerialChain {
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    /// World frame of every joint after its motion has been applied.
    pub fn frames(&self, q: &[f64]) -> Vec<Isometry3<f64>> {
        assert_eq!(q.len(), self.dof(), "chain '{}' expects {} joints", self.name, self.dof());
        let mut frame = self.base;
        self.joints
            .iter()
            .zip(q)
            .map(|(joint, &v)| {
                frame = frame * joint.origin * joint.motion(v);
                frame
            })
            .collect()
    }

    pub fn end_frame(&self, q: &[f64]) -> Isometry3<f64> {
        self.frames(q).pop().unwrap_or(self.base)
    }

    pub fn point(&self, q: &[f64], local: &Vector3<f64>) -> Vector3<f64> {
        let f = self.end_frame(q);
        f.translation.vector + f.rotation * local
    }

    /// Collision sample points: joint frame origins, the tool point, and the
    /// midpoints between consecutive ones.
    pub fn sample_points(&self, q: &[f64]) -> Vec<Vector3<f64>> {
        let frames = self.frames(q);
        let mut anchors: Vec<Vector3<f64>> = frames.iter().map(|f| f.translation.vector).collect();
        if let Some(last) = frames.last() {
            anchors.push(last.translation.vector + last.rotation * self.tool);
        }
        let mut pts = Vec::with_capacity(anchors.len() * 2);
        for (i, a) in anchors.iter().enumerate() {
            pts.push(*a);
            if let Some(b) = anchors.get(i + 1) {
                pts.push((a + b) * 0.5);
            }
        }
        pts
    }
}

/// Several chains whose joint values are stacked into one configuration.
#[derive(Clone, Debug)]
pub struct MultiRobotSystem {
    chains: Vec<SerialChain>,
    offsets: Vec<usize>,
}

impl MultiRobotSystem {
    pub fn new(chains: Vec<SerialChain>) -> Self {
        let mut offsets = Vec::with_capacity(chains.len());
        let mut acc = 0;
        for c in &chains {
            offsets.push(acc);
            acc += c.dof();
        }
        MultiRobotSystem { chains, offsets }
    }

    pub fn dof(&self) -> usize {
        self.chains.iter().map(SerialChain::dof).sum()
    }

    pub fn chains(&self) -> &[SerialChain] {
        &self.chains
    }

    pub fn chain(&self, index: usize) -> &SerialChain {
        self.chains
            .get(index)
            .unwrap_or_else(|| panic!("chain index {index} out of range ({} chains)", self.chains.len()))
    }

    /// Index range of chain `index` inside the stacked configuration.
    pub fn dof_range(&self, index: usize) -> std::ops::Range<usize> {
        let start = self.offsets[index];
        start..start + self.chain(index).dof()
    }

    pub fn joint_values<'a>(&self, index: usize, q: &'a [f64]) -> &'a [f64] {
        assert_eq!(q.len(), self.dof(), "stacked configuration has wrong length");
        &q[self.dof_range(index)]
    }

    pub fn limits(&self) -> Vec<(f64, f64)> {
        self.chains
            .iter()
            .flat_map(|c| c.joints.iter().map(|j| j.limits))
            .collect()
    }

    /// World position of `point` (local to the chain's last frame).
    pub fn fk_position(&self, chain: usize, point: &Vector3<f64>, q: &[f64]) -> Vector3<f64> {
        self.chain(chain).point(self.joint_values(chain, q), point)
    }

    pub fn fk_frame(&self, chain: usize, q: &[f64]) -> Isometry3<f64> {
        self.chain(chain).end_frame(self.joint_values(chain, q))
    }

    pub fn sample_points(&self, q: &[f64]) -> Vec<Vector3<f64>> {
        (0..self.chains.len())
            .flat_map(|i| self.chains[i].sample_points(self.joint_values(i, q)))
            .collect()
    }
}

/// `h(q) = x_g - f_pos(q)`.
#[derive(Debug)]
pub struct PickConstraint {
    pub system: Arc<MultiRobotSystem>,
    pub chain: usize,
    pub point: Vector3<f64>,
    pub target: Vector3<f64>,
}

impl Constraint for PickConstraint {
    fn ambient_dim(&self) -> usize {
        self.system.dof()
    }

    fn codim(&self) -> usize {
        3
    }

    fn value(&self, q: &DVector<f64>) -> DVector<f64> {
        let p = self.system.fk_position(self.chain, &self.point, q.as_slice());
        DVector::from_column_slice((self.target - p).as_slice())
    }
}

/// `h(q) = f_pos,a(q) - f_pos,b(q)`.
#[derive(Debug)]
pub struct HandoverConstraint {
    pub system: Arc<MultiRobotSystem>,
    pub first: (usize, Vector3<f64>),
    pub second: (usize, Vector3<f64>),
}

impl Constraint for HandoverConstraint {
    fn ambient_dim(&self) -> usize {
        self.system.dof()
    }

    fn codim(&self) -> usize {
        3
    }

    fn value(&self, q: &DVector<f64>) -> DVector<f64> {
        let a = self.system.fk_position(self.first.0, &self.first.1, q.as_slice());
        let b = self.system.fk_position(self.second.0, &self.second.1, q.as_slice());
        DVector::from_column_slice((a - b).as_slice())
    }
}

/// `h(q) = (R(q) axis)ᵀ up - 1`: zero iff the end-effector axis points along `up`.
#[derive(Debug)]
pub struct OrientationConstraint {
    pub system: Arc<MultiRobotSystem>,
    pub chain: usize,
    pub axis: Unit<Vector3<f64>>,
    pub up: Unit<Vector3<f64>>,
}

impl Constraint for OrientationConstraint {
    fn ambient_dim(&self) -> usize {
        self.system.dof()
    }

    fn codim(&self) -> usize {
        1
    }

    fn value(&self, q: &DVector<f64>) -> DVector<f64> {
        let f = self.system.fk_frame(self.chain, q.as_slice());
        let dir = f.rotation * self.axis.into_inner();
        DVector::from_element(1, dir.dot(&self.up) - 1.0)
    }
}

pub fn pick_constraint(
    name: impl Into<String>,
    system: Arc<MultiRobotSystem>,
    chain: usize,
    point: Vector3<f64>,
    target: Vector3<f64>,
) -> Manifold {
    system.chain(chain);
    Manifold::new(
        name,
        PickConstraint {
            system,
            chain,
            point,
            target,
        },
    )
}

pub fn handover_constraint(
    name: impl Into<String>,
    system: Arc<MultiRobotSystem>,
    first: (usize, Vector3<f64>),
    second: (usize, Vector3<f64>),
) -> Manifold {
    system.chain(first.0);
    system.chain(second.0);
    Manifold::new(name, HandoverConstraint { system, first, second })
}

/// Alignment of the chain's local `axis` with world `up` (usually `e_z`).
pub fn orientation_constraint(
    name: impl Into<String>,
    system: Arc<MultiRobotSystem>,
    chain: usize,
    axis: Vector3<f64>,
    up: Vector3<f64>,
) -> Manifold {
    system.chain(chain);
    Manifold::new(
        name,
        OrientationConstraint {
            system,
            chain,
            axis: Unit::new_normalize(axis),
            up: Unit::new_normalize(up),
        },
    )
}
