//! Small SVD-based helpers shared by projection and steering.

use nalgebra::{DMatrix, DVector, SVD};

/// Default relative cutoff: singular values below `SV_TOL * sigma_max` are
/// treated as zero.
pub const SV_TOL: f64 = 1e-9;

fn sigma_cutoff(singular: &DVector<f64>, rel_tol: f64) -> f64 {
    let sigma_max = singular.iter().cloned().fold(0.0, f64::max);
    rel_tol * sigma_max
}

/// Minimum-norm least-squares solution of `a x = b` via a truncated
/// pseudo-inverse. Returns `None` when `a` is numerically zero or the result
/// is not finite.
pub fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> Option<DVector<f64>> {
    assert_eq!(a.nrows(), b.len(), "pinv_solve: row count mismatch");
    let svd = SVD::new(a.clone(), true, true);
    let u = svd.u.as_ref()?;
    let v_t = svd.v_t.as_ref()?;
    let cutoff = sigma_cutoff(&svd.singular_values, rel_tol);
    let mut x = DVector::zeros(a.ncols());
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            let coeff = u.column(i).dot(b) / s;
            x += v_t.row(i).transpose() * coeff;
        }
    }
    if rank == 0 || x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(x)
}

/// Full right-singular basis of `a` (columns of V, `ncols x ncols`) together
/// with the numerical rank.
fn right_basis(a: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, Vec<bool>) {
    let k = a.ncols();
    // Pad with zero rows so the decomposition yields the complete V.
    let padded = if a.nrows() < k {
        let mut p = DMatrix::zeros(k, k);
        p.view_mut((0, 0), (a.nrows(), k)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let cutoff = sigma_cutoff(&svd.singular_values, rel_tol);
    let in_range = svd
        .singular_values
        .iter()
        .map(|&s| s > cutoff && s > 0.0)
        .collect();
    (v_t.transpose(), in_range)
}

/// Orthonormal basis (as columns) of the right nullspace of `a`.
/// A zero matrix yields the identity.
pub fn nullspace_basis(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let (v, in_range) = right_basis(a, rel_tol);
    let cols: Vec<_> = in_range
        .iter()
        .enumerate()
        .filter(|(_, &r)| !r)
        .map(|(i, _)| v.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        return DMatrix::zeros(a.ncols(), 0);
    }
    DMatrix::from_columns(&cols)
}

/// Orthogonal projection of `x` onto the nullspace of `a`.
pub fn project_onto_nullspace(a: &DMatrix<f64>, x: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    let basis = nullspace_basis(a, rel_tol);
    if basis.ncols() == 0 {
        return DVector::zeros(x.len());
    }
    &basis * (basis.transpose() * x)
}
