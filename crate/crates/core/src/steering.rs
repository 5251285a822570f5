//! Extension directions on a manifold and the randomized steer-and-project
//! step used by every planner variant.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, SV_TOL};
use crate::manifold::{project_with, tangent_nullspace, Configuration, Manifold, ProjectionFailure, ProjectionOptions};

/// Directions shorter than this are treated as zero and the attempt is
/// dropped.
pub const MIN_DIRECTION_NORM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteerParams {
    /// Step length.
    pub alpha: f64,
    /// Probability of steering toward the next manifold.
    pub beta: f64,
    /// Scale of the random threshold for projecting onto the intersection.
    pub r: f64,
}

impl SteerParams {
    pub fn new(alpha: f64, beta: f64, r: f64) -> Self {
        assert!(alpha > 0.0, "alpha must be positive");
        assert!((0.0..=1.0).contains(&beta), "beta must lie in [0, 1]");
        assert!(r > 0.0, "r must be positive");
        SteerParams { alpha, beta, r }
    }
}

/// Tangent-space component of `q_rand - q_near`: `V V^T (q_rand - q_near)`
/// with `V` the nullspace basis of `J(q_near)`.
pub fn steer_point(q_near: &Configuration, q_rand: &Configuration, m: &Manifold) -> DVector<f64> {
    let v = tangent_nullspace(m, q_near, SV_TOL);
    let delta = q_rand.coords() - q_near.coords();
    if v.ncols() == 0 {
        return DVector::zeros(delta.len());
    }
    &v * (v.transpose() * delta)
}

/// Direction that best reduces the linearized residual of `m_next` while
/// staying in the tangent space of `m_cur`:
///
/// `min ½‖h₂ + J₂ d‖²  s.t.  J₁ d = 0`, solved through its KKT system
/// `[[J₂ᵀJ₂, J₁ᵀ], [J₁, 0]] (d, λ) = (-J₂ᵀh₂, 0)` in the least-squares sense.
pub fn steer_constraint(q_near: &Configuration, m_cur: &Manifold, m_next: &Manifold) -> DVector<f64> {
    let k = q_near.dim();
    let j1 = m_cur.jacobian(q_near);
    let j2 = m_next.jacobian(q_near);
    let h2 = m_next.evaluate(q_near);
    let l1 = j1.nrows();

    let mut kkt = DMatrix::zeros(k + l1, k + l1);
    kkt.view_mut((0, 0), (k, k)).copy_from(&(j2.transpose() * &j2));
    kkt.view_mut((0, k), (k, l1)).copy_from(&j1.transpose());
    kkt.view_mut((k, 0), (l1, k)).copy_from(&j1);
    let mut rhs = DVector::zeros(k + l1);
    rhs.rows_mut(0, k).copy_from(&(-(j2.transpose() * h2)));

    match linalg::pinv_solve(&kkt, &rhs, SV_TOL) {
        Some(sol) => sol.rows(0, k).into_owned(),
        None => DVector::zeros(k),
    }
}

/// A manifold of the sequence together with its successor and their
/// intersection, built once per phase.
#[derive(Clone, Debug)]
pub struct ManifoldPair {
    pub current: Manifold,
    pub next: Manifold,
    pub both: Manifold,
}

impl ManifoldPair {
    pub fn new(current: &Manifold, next: &Manifold) -> Self {
        ManifoldPair {
            current: current.clone(),
            next: next.clone(),
            both: current.intersect(next),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Point,
    Constraint,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SteerFailure {
    ZeroDirection,
    Projection(ProjectionFailure),
}

/// Record of one steering call.
#[derive(Clone, Debug)]
pub struct SteerAttempt {
    pub strategy: Strategy,
    /// The unprojected step `q_near + alpha d/‖d‖`, when a direction existed.
    pub stepped: Option<Configuration>,
    /// Whether projection onto the intersection was chosen.
    pub intersection: bool,
    pub result: Result<Configuration, SteerFailure>,
}

/// One steering step from `q_near` toward `q_rand` on `pair.current`.
///
/// Both random numbers (strategy choice and projection threshold) are drawn
/// up front on every call, so the stream does not depend on which branch is
/// taken.
pub fn psm_steer<R: Rng + ?Sized>(
    params: &SteerParams,
    proj: &ProjectionOptions,
    pair: &ManifoldPair,
    q_near: &Configuration,
    q_rand: &Configuration,
    rng: &mut R,
) -> SteerAttempt {
    let u_strategy: f64 = rng.gen();
    let u_threshold: f64 = rng.gen::<f64>() * params.r;

    let strategy = if u_strategy < params.beta {
        Strategy::Constraint
    } else {
        Strategy::Point
    };
    let d = match strategy {
        Strategy::Constraint => steer_constraint(q_near, &pair.current, &pair.next),
        Strategy::Point => steer_point(q_near, q_rand, &pair.current),
    };
    let norm = d.norm();
    if !(norm >= MIN_DIRECTION_NORM) {
        return SteerAttempt {
            strategy,
            stepped: None,
            intersection: false,
            result: Err(SteerFailure::ZeroDirection),
        };
    }
    let stepped = Configuration::new(q_near.coords() + d * (params.alpha / norm));
    let intersection = pair.next.residual(&stepped) < u_threshold;
    let target = if intersection { &pair.both } else { &pair.current };
    let result = project_with(&stepped, target, proj).map_err(SteerFailure::Projection);
    SteerAttempt {
        strategy,
        stepped: Some(stepped),
        intersection,
        result,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{Affine, Cylinder, Paraboloid};
    use proptest::prelude::{prop, prop_assert, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plane(normal: [f64; 3], offset: f64) -> Manifold {
        Manifold::new(
            "plane",
            Affine {
                a: DMatrix::from_row_slice(1, 3, &normal),
                b: DVector::from_element(1, offset),
            },
        )
    }

    fn cylinder() -> Manifold {
        Manifold::new("cyl", Cylinder { ambient_dim: 3, radius: 2.0 })
    }

    fn paraboloid() -> Manifold {
        Manifold::new(
            "para",
            Paraboloid {
                ambient_dim: 3,
                coeff: 0.1,
                offset: 2.0,
            },
        )
    }

    fn cfg(v: &[f64]) -> Configuration {
        Configuration::from_slice(v)
    }

    #[test]
    fn steer_point_drops_normal_component() {
        let d = steer_point(&cfg(&[2.0, 0.0, 0.0]), &cfg(&[3.0, 1.0, 1.0]), &cylinder());
        assert!((d - DVector::from_vec(vec![0.0, 1.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn steer_point_to_self_is_zero() {
        let q = cfg(&[2.0, 0.0, 0.5]);
        assert_eq!(steer_point(&q, &q, &cylinder()).norm(), 0.0);
    }

    #[test]
    fn steer_constraint_plane_to_plane() {
        let d = steer_constraint(&cfg(&[0.0, 0.0, 0.0]), &plane([0.0, 0.0, 1.0], 0.0), &plane([1.0, 0.0, 0.0], 1.0));
        assert!(d[0] > 0.0);
        assert!(d[1].abs() < 1e-12 && d[2].abs() < 1e-12);
    }

    #[test]
    fn steer_constraint_zero_when_on_next() {
        let d = steer_constraint(&cfg(&[1.0, 0.3, 0.0]), &plane([0.0, 0.0, 1.0], 0.0), &plane([1.0, 0.0, 0.0], 1.0));
        assert!(d.norm() < 1e-12);
    }

    /// Nullspace route to the same least-squares problem: `d = N y` with
    /// `y = argmin ‖h₂ + J₂ N y‖`.
    fn nullspace_oracle(q: &Configuration, m1: &Manifold, m2: &Manifold) -> DVector<f64> {
        let n = tangent_nullspace(m1, q, SV_TOL);
        let a = m2.jacobian(q) * &n;
        let y = linalg::pinv_solve(&a, &(-m2.evaluate(q)), SV_TOL).unwrap();
        n * y
    }

    fn on_cylinder(theta: f64, z: f64) -> Configuration {
        cfg(&[2.0 * theta.cos(), 2.0 * theta.sin(), z])
    }

    fn on_paraboloid(x: f64, y: f64) -> Configuration {
        cfg(&[x, y, 0.1 * (x * x + y * y) + 2.0])
    }

    proptest! {
        #[test]
        fn steer_point_is_tangent_and_contracting(x in -4.0..4.0f64, y in -4.0..4.0f64,
                                                  r in prop::collection::vec(-6.0..6.0f64, 3)) {
            let m = paraboloid();
            let q = on_paraboloid(x, y);
            let target = cfg(&r);
            let d = steer_point(&q, &target, &m);
            prop_assert!((m.jacobian(&q) * &d).norm() <= 1e-8);
            prop_assert!(d.norm() <= (target.coords() - q.coords()).norm() + 1e-12);
            // idempotent projector
            let again = steer_point(&q, &Configuration::new(q.coords() + &d), &m);
            prop_assert!((again - d).amax() <= 1e-10);
        }

        #[test]
        fn steer_constraint_tangent_and_descending(theta in -3.1..3.1f64, z in -3.0..5.0f64) {
            let (m1, m2) = (cylinder(), paraboloid());
            let q = on_cylinder(theta, z);
            let d = steer_constraint(&q, &m1, &m2);
            prop_assert!((m1.jacobian(&q) * &d).norm() <= 1e-8);
            let h2 = m2.evaluate(&q);
            prop_assert!(h2.dot(&(m2.jacobian(&q) * &d)) <= 1e-12);
            let oracle = nullspace_oracle(&q, &m1, &m2);
            prop_assert!((&d - &oracle).norm() <= 1e-8 * (1.0 + oracle.norm()));
        }
    }

    #[test]
    fn steer_constraint_beats_tangent_grid_search() {
        let (m1, m2) = (cylinder(), paraboloid());
        for &(theta, z) in &[(0.3, 0.0), (1.2, 4.0), (-2.0, 2.0), (2.9, -1.0)] {
            let q = on_cylinder(theta, z);
            let d = steer_constraint(&q, &m1, &m2);
            let r0 = m2.residual(&q);
            let t = 1e-4 / d.norm();
            assert!(m2.residual(&Configuration::new(q.coords() + &d * t)) < r0);

            // Among unit tangent directions the normalized d is (nearly) the
            // steepest first-order decrease of ‖h₂‖².
            let basis = tangent_nullspace(&m1, &q, SV_TOL);
            let grad = m2.jacobian(&q).transpose() * m2.evaluate(&q);
            let slope = |v: &DVector<f64>| grad.dot(v) / v.norm();
            let mut best = f64::INFINITY;
            for i in 0..3600 {
                let a = i as f64 * std::f64::consts::TAU / 3600.0;
                let v = basis.column(0) * a.cos() + basis.column(1) * a.sin();
                best = best.min(slope(&v));
            }
            assert!(slope(&d) <= best + 1e-5 * best.abs(), "theta {theta} z {z}: {} vs {best}", slope(&d));
        }
    }

    fn plane_pair() -> ManifoldPair {
        ManifoldPair::new(&plane([0.0, 0.0, 1.0], 0.0), &plane([1.0, 0.0, 0.0], 1.0))
    }

    #[test]
    fn psm_steer_constraint_step_on_planes() {
        let params = SteerParams::new(0.5, 1.0, 0.1);
        let proj = ProjectionOptions::new(1e-9, 200);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q = cfg(&[0.0, 0.0, 0.0]);
        let out = psm_steer(&params, &proj, &plane_pair(), &q, &cfg(&[5.0, 5.0, 5.0]), &mut rng);
        assert_eq!(out.strategy, Strategy::Constraint);
        // residual of the next plane is 0.5 > r, so only the current plane is used
        assert!(!out.intersection);
        let p = out.result.unwrap();
        assert!((p.coords() - DVector::from_vec(vec![0.5, 0.0, 0.0])).norm() < 1e-12);
    }

    #[test]
    fn psm_steer_step_length_is_alpha() {
        let params = SteerParams::new(0.7, 0.5, 1.5);
        let proj = ProjectionOptions::new(1e-9, 200);
        let pair = ManifoldPair::new(&cylinder(), &paraboloid());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let q = on_cylinder(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let target = cfg(&[rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)]);
            let out = psm_steer(&params, &proj, &pair, &q, &target, &mut rng);
            if let Some(s) = &out.stepped {
                assert!((s.distance(&q) - 0.7).abs() < 1e-12);
            }
            if let Ok(p) = &out.result {
                let m = if out.intersection { &pair.both } else { &pair.current };
                assert!(m.residual(p) <= 1e-9);
            }
        }
    }

    #[test]
    fn beta_zero_never_uses_constraint_steering() {
        let params = SteerParams::new(1.0, 0.0, 1.5);
        let proj = ProjectionOptions::new(1e-6, 200);
        let pair = ManifoldPair::new(&cylinder(), &paraboloid());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let target = cfg(&[rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)]);
            let out = psm_steer(&params, &proj, &pair, &on_cylinder(0.4, 1.0), &target, &mut rng);
            assert_eq!(out.strategy, Strategy::Point);
        }
    }

    #[test]
    fn two_draws_per_call_regardless_of_branch() {
        let params = SteerParams::new(1.0, 0.5, 1.5);
        let proj = ProjectionOptions::new(1e-6, 200);
        let pair = plane_pair();
        let q = cfg(&[0.0, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut reference = ChaCha8Rng::seed_from_u64(21);
        for i in 0..50 {
            // alternate a target that makes steer_point vanish
            let target = if i % 2 == 0 { q.clone() } else { cfg(&[1.0, 2.0, 0.0]) };
            psm_steer(&params, &proj, &pair, &q, &target, &mut rng);
            let _: f64 = reference.gen();
            let _: f64 = reference.gen();
            assert_eq!(rng.gen::<u64>(), reference.gen::<u64>());
        }
    }

    #[test]
    fn intersection_frequency_matches_threshold_law() {
        // Stepping from the origin along y keeps the next-plane residual at
        // exactly c, so the intersection branch fires with probability (r-c)/r.
        let (r, c) = (1.5, 0.6);
        let params = SteerParams::new(0.5, 0.0, r);
        let proj = ProjectionOptions::new(1e-9, 200);
        let pair = ManifoldPair::new(&plane([0.0, 0.0, 1.0], 0.0), &plane([1.0, 0.0, 0.0], c));
        let q = cfg(&[0.0, 0.0, 0.0]);
        let target = cfg(&[0.0, 1.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(12345);
        let trials = 10_000;
        let hits = (0..trials)
            .filter(|_| psm_steer(&params, &proj, &pair, &q, &target, &mut rng).intersection)
            .count();
        let p = (r - c) / r;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        let freq = hits as f64 / trials as f64;
        assert!((freq - p).abs() <= 3.0 * sigma, "freq {freq} vs {p} (sigma {sigma})");
    }
}
