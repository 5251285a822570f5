//! Implicit constraint manifolds `{q | h(q) = 0}` and the operations the
//! planners need on them: evaluation, Jacobians, Newton projection and
//! tangent-space bases.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{self, SV_TOL};
use crate::Error;

/// Step used for finite-difference Jacobians when a constraint has no
/// analytic one.
pub const FD_STEP: f64 = 1e-6;

/// Default Newton iteration cap for [`project`].
pub const DEFAULT_MAX_PROJECT_ITERS: usize = 200;

/// Number of consecutive residual increases after which projection gives up.
const DIVERGENCE_STREAK: usize = 10;

/// A point in the ambient configuration space. Serialized as a plain list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", from = "Vec<f64>")]
pub struct Configuration(DVector<f64>);

impl Configuration {
    pub fn new(coords: DVector<f64>) -> Self {
        Configuration(coords)
    }

    /// Builds a configuration, rejecting NaN and infinite entries.
    pub fn try_new(coords: DVector<f64>) -> Result<Self, Error> {
        if coords.iter().all(|v| v.is_finite()) {
            Ok(Configuration(coords))
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Configuration(DVector::from_column_slice(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Configuration(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn distance(&self, other: &Configuration) -> f64 {
        (&self.0 - &other.0).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }
}

impl Deref for Configuration {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl From<DVector<f64>> for Configuration {
    fn from(v: DVector<f64>) -> Self {
        Configuration(v)
    }
}

impl From<Configuration> for Vec<f64> {
    fn from(q: Configuration) -> Self {
        q.0.as_slice().to_vec()
    }
}

impl From<Vec<f64>> for Configuration {
    fn from(v: Vec<f64>) -> Self {
        Configuration(DVector::from_vec(v))
    }
}

/// An equality constraint `h: R^k -> R^l`.
///
/// Implementors that return `None` from [`Constraint::jacobian`] get a
/// central finite-difference Jacobian.
pub trait Constraint: Send + Sync + fmt::Debug {
    fn ambient_dim(&self) -> usize;

    fn codim(&self) -> usize;

    fn value(&self, q: &DVector<f64>) -> DVector<f64>;

    fn jacobian(&self, _q: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

/// A named implicit manifold. Cheap to clone; the constraint is shared.
#[derive(Clone)]
pub struct Manifold {
    name: String,
    constraint: Arc<dyn Constraint>,
}

impl fmt::Debug for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Manifold")
            .field("name", &self.name)
            .field("ambient_dim", &self.ambient_dim())
            .field("codim", &self.codim())
            .finish()
    }
}

impl Manifold {
    /// Wraps a constraint. Panics unless `1 <= codim <= ambient_dim`.
    pub fn new(name: impl Into<String>, constraint: impl Constraint + 'static) -> Self {
        let k = constraint.ambient_dim();
        let l = constraint.codim();
        assert!(
            l >= 1 && l <= k,
            "manifold codimension {l} must lie in 1..={k}"
        );
        Manifold {
            name: name.into(),
            constraint: Arc::new(constraint),
        }
    }

    /// A manifold defined by its constraint map alone; the Jacobian is
    /// obtained by finite differences.
    pub fn from_fn<F>(name: impl Into<String>, ambient_dim: usize, codim: usize, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Manifold::new(
            name,
            FnConstraint {
                ambient_dim,
                codim,
                f: Box::new(f),
            },
        )
    }

    /// `self ∩ other`, realised by stacking both constraints. The stacked
    /// codimension may exceed the ambient dimension (overdetermined but
    /// consistent systems are fine for projection).
    pub fn intersect(&self, other: &Manifold) -> Manifold {
        assert_eq!(
            self.ambient_dim(),
            other.ambient_dim(),
            "cannot intersect manifolds of different ambient dimension"
        );
        Manifold {
            name: format!("{}∩{}", self.name, other.name),
            constraint: Arc::new(Intersection {
                first: self.clone(),
                second: other.clone(),
            }),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Manifold {
        self.name = name.into();
        self
    }

    pub fn ambient_dim(&self) -> usize {
        self.constraint.ambient_dim()
    }

    pub fn codim(&self) -> usize {
        self.constraint.codim()
    }

    pub fn has_analytic_jacobian(&self, q: &Configuration) -> bool {
        self.constraint.jacobian(q).is_some()
    }

    /// `h(q)`.
    pub fn evaluate(&self, q: &Configuration) -> DVector<f64> {
        self.check_dim(q);
        self.constraint.value(q)
    }

    /// `‖h(q)‖`.
    pub fn residual(&self, q: &Configuration) -> f64 {
        self.evaluate(q).norm()
    }

    /// Analytic Jacobian when available, central differences otherwise.
    pub fn jacobian(&self, q: &Configuration) -> DMatrix<f64> {
        self.check_dim(q);
        let j = match self.constraint.jacobian(q) {
            Some(j) => j,
            None => fd_jacobian(self, q, FD_STEP),
        };
        debug_assert_eq!(j.shape(), (self.codim(), self.ambient_dim()));
        j
    }

    fn check_dim(&self, q: &Configuration) {
        assert_eq!(
            q.dim(),
            self.ambient_dim(),
            "configuration dimension does not match manifold '{}'",
            self.name
        );
    }
}

/// Central finite-difference Jacobian of `m` at `q`.
pub fn fd_jacobian(m: &Manifold, q: &Configuration, step: f64) -> DMatrix<f64> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let k = m.ambient_dim();
    let mut jac = DMatrix::zeros(m.codim(), k);
    let mut probe = q.coords().clone();
    for j in 0..k {
        let orig = probe[j];
        probe[j] = orig + step;
        let plus = m.constraint.value(&probe);
        probe[j] = orig - step;
        let minus = m.constraint.value(&probe);
        probe[j] = orig;
        jac.set_column(j, &((plus - minus) / (2.0 * step)));
    }
    jac
}

/// Why a projection did not reach the manifold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionFailure {
    MaxIterations,
    Diverged,
    NonFinite,
    SingularJacobian,
}

impl fmt::Display for ProjectionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProjectionFailure::MaxIterations => "iteration limit reached",
            ProjectionFailure::Diverged => "residual diverged",
            ProjectionFailure::NonFinite => "non-finite iterate",
            ProjectionFailure::SingularJacobian => "jacobian vanished",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionOptions {
    pub eps: f64,
    pub max_iters: usize,
    pub sv_tol: f64,
}

impl ProjectionOptions {
    pub fn new(eps: f64, max_iters: usize) -> Self {
        ProjectionOptions {
            eps,
            max_iters,
            sv_tol: SV_TOL,
        }
    }
}

/// Newton projection `q <- q - J(q)^+ h(q)` until `‖h(q)‖ <= eps`.
pub fn project(
    q: &Configuration,
    m: &Manifold,
    eps: f64,
    max_iters: usize,
) -> Result<Configuration, ProjectionFailure> {
    project_with(q, m, &ProjectionOptions::new(eps, max_iters))
}

pub fn project_with(
    q: &Configuration,
    m: &Manifold,
    opts: &ProjectionOptions,
) -> Result<Configuration, ProjectionFailure> {
    assert!(opts.eps > 0.0 && opts.max_iters >= 1);
    let mut x = q.coords().clone();
    let mut h = m.evaluate(&Configuration::new(x.clone()));
    let mut res = h.norm();
    let mut rising = 0;
    for _ in 0..opts.max_iters {
        if !res.is_finite() {
            return Err(ProjectionFailure::NonFinite);
        }
        if res <= opts.eps {
            return Ok(Configuration::new(x));
        }
        let jac = m.jacobian(&Configuration::new(x.clone()));
        let step = linalg::pinv_solve(&jac, &h, opts.sv_tol)
            .ok_or(ProjectionFailure::SingularJacobian)?;
        x -= step;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ProjectionFailure::NonFinite);
        }
        h = m.evaluate(&Configuration::new(x.clone()));
        let next = h.norm();
        if next > res {
            rising += 1;
            if rising >= DIVERGENCE_STREAK {
                return Err(ProjectionFailure::Diverged);
            }
        } else {
            rising = 0;
        }
        res = next;
    }
    if res.is_finite() && res <= opts.eps {
        Ok(Configuration::new(x))
    } else {
        Err(ProjectionFailure::MaxIterations)
    }
}

/// Orthonormal basis (k x (k - rank)) of the tangent space of `m` at `q`,
/// i.e. the right nullspace of `J(q)`. A vanishing Jacobian yields the
/// identity.
pub fn tangent_nullspace(m: &Manifold, q: &Configuration, sv_tol: f64) -> DMatrix<f64> {
    assert!(sv_tol > 0.0);
    linalg::nullspace_basis(&m.jacobian(q), sv_tol)
}

type ResidualFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

struct FnConstraint {
    ambient_dim: usize,
    codim: usize,
    f: ResidualFn,
}

impl fmt::Debug for FnConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnConstraint")
            .field("ambient_dim", &self.ambient_dim)
            .field("codim", &self.codim)
            .finish()
    }
}

impl Constraint for FnConstraint {
    fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    fn codim(&self) -> usize {
        self.codim
    }

    fn value(&self, q: &DVector<f64>) -> DVector<f64> {
        (self.f)(q)
    }
}

/// Two constraints stacked vertically.
#[derive(Debug)]
pub struct Intersection {
    pub first: Manifold,
    pub second: Manifold,
}

impl Constraint for Intersection {
    fn ambient_dim(&self) -> usize {
        self.first.ambient_dim()
    }

    fn codim(&self) -> usize {
        self.first.codim() + self.second.codim()
    }

    fn value(&self, q: &DVector<f64>) -> DVector<f64> {
        let a = self.first.constraint.value(q);
        let b = self.second.constraint.value(q);
        let mut out = DVector::zeros(a.len() + b.len());
        out.rows_mut(0, a.len()).copy_from(&a);
        out.rows_mut(a.len(), b.len()).copy_from(&b);
        out
    }

    fn jacobian(&self, q: &DVector<f64>) -> Option<DMatrix<f64>> {
        let cfg = Configuration::new(q.clone());
        let a = self.first.jacobian(&cfg);
        let b = self.second.jacobian(&cfg);
        let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
        out.view_mut((0, 0), a.shape()).copy_from(&a);
        out.view_mut((a.nrows(), 0), b.shape()).copy_from(&b);
        Some(out)
    }
}

/// `h(q) = A q - b`.
#[derive(Clone, Debug)]
pub struct Affine {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Constraint for Affine {
    fn ambient_dim(&self) -> usize {
        self.a.ncols()
    }

    fn codim(&self) -> usize {
        self.a.nrows()
    }

    fn value(&self, q: &DVector<f64>) -> DVector<f64> {
        &self.a * q - &self.b
    }

    fn jacobian(&self, _q: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.a.clone())
    }
}

/// `h(q) = ‖q - center‖ - radius`.
#[derive(Clone, Debug)]
pub struct Sphere {
    pub center: DVector<f64>,
    pub radius: f64,
}

impl Constraint for Sphere {
    fn ambient_dim(&self) -> usize {
        self.center.len()
    }

    fn codim(&self) -> usize {
        1
    }

    fn value(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, (q - &self.center).norm() - self.radius)
    }

    fn jacobian(&self, q: &DVector<f64>) -> Option<DMatrix<f64>> {
        let d = q - &self.center;
        let n = d.norm();
        if n == 0.0 {
            return Some(DMatrix::zeros(1, q.len()));
        }
        Some(DMatrix::from_row_slice(1, q.len(), (d / n).as_slice()))
    }
}

/// `h(q) = coeff * (q0² + q1²) + offset - q2`, higher coordinates unused.
#[derive(Clone, Debug)]
pub struct Paraboloid {
    pub ambient_dim: usize,
    pub coeff: f64,
    pub offset: f64,
}

impl Constraint for Paraboloid {
    fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    fn codim(&self) -> usize {
        1
    }

    fn value(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(
            1,
            self.coeff * (q[0] * q[0] + q[1] * q[1]) + self.offset - q[2],
        )
    }

    fn jacobian(&self, q: &DVector<f64>) -> Option<DMatrix<f64>> {
        let mut j = DMatrix::zeros(1, self.ambient_dim);
        j[(0, 0)] = 2.0 * self.coeff * q[0];
        j[(0, 1)] = 2.0 * self.coeff * q[1];
        j[(0, 2)] = -1.0;
        Some(j)
    }
}

/// Vertical circular cylinder `(q0² + q1²) / radius² - 1 = 0`.
#[derive(Clone, Debug)]
pub struct Cylinder {
    pub ambient_dim: usize,
    pub radius: f64,
}

impl Constraint for Cylinder {
    fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    fn codim(&self) -> usize {
        1
    }

    fn value(&self, q: &DVector<f64>) -> DVector<f64> {
        let s = 1.0 / (self.radius * self.radius);
        DVector::from_element(1, s * (q[0] * q[0] + q[1] * q[1]) - 1.0)
    }

    fn jacobian(&self, q: &DVector<f64>) -> Option<DMatrix<f64>> {
        let s = 1.0 / (self.radius * self.radius);
        let mut j = DMatrix::zeros(1, self.ambient_dim);
        j[(0, 0)] = 2.0 * s * q[0];
        j[(0, 1)] = 2.0 * s * q[1];
        Some(j)
    }
}

/// `h(q) = q - target`.
#[derive(Clone, Debug)]
pub struct PointGoal {
    pub target: DVector<f64>,
}

impl Constraint for PointGoal {
    fn ambient_dim(&self) -> usize {
        self.target.len()
    }

    fn codim(&self) -> usize {
        self.target.len()
    }

    fn value(&self, q: &DVector<f64>) -> DVector<f64> {
        q - &self.target
    }

    fn jacobian(&self, q: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(q.len(), q.len()))
    }
}

/// Pins the listed coordinates: `h(q) = q[indices] - values`.
#[derive(Clone, Debug)]
pub struct JointLock {
    pub ambient_dim: usize,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Constraint for JointLock {
    fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    fn codim(&self) -> usize {
        self.indices.len()
    }

    fn value(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.indices.len(),
            self.indices
                .iter()
                .zip(&self.values)
                .map(|(&i, &v)| q[i] - v),
        )
    }

    fn jacobian(&self, _q: &DVector<f64>) -> Option<DMatrix<f64>> {
        let mut j = DMatrix::zeros(self.indices.len(), self.ambient_dim);
        for (row, &i) in self.indices.iter().enumerate() {
            j[(row, i)] = 1.0;
        }
        Some(j)
    }
}
