//! Small dense linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::expr::{Dual, NUM_VARS};

/// Singular values sorted descending with the matching right singular vectors
/// (columns of the returned matrix). Wide inputs are zero-padded so every
/// direction of the domain is represented.
fn right_singular(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (r, n) = m.shape();
    let padded = if r < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (r, n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let v = DMatrix::from_fn(n, order.len(), |i, j| vt[(order[j], i)]);
    (sv, v)
}

/// Numerical rank: singular values above `tol`.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    m.clone().svd(false, false).singular_values.iter().filter(|s| **s > tol).count()
}

/// Orthonormal basis (columns) of `{v : m v = 0}`, singular values `≤ tol`
/// counting as zero.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let (sv, v) = right_singular(m);
    let keep: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] <= tol).collect();
    DMatrix::from_fn(n, keep.len(), |i, j| v[(i, keep[j])])
}

/// Minimum-norm least-squares solution and the residual norm `|a x - b|`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> (DVector<f64>, f64) {
    if a.ncols() == 0 {
        return (DVector::zeros(0), b.norm());
    }
    let svd = a.clone().svd(true, true);
    let x = svd.solve(b, tol).expect("both factors computed");
    let r = (a * &x - b).norm();
    (x, r)
}

/// Solves a square system with partial pivoting; `None` when the pivots
/// indicate (near) singularity relative to the matrix scale.
pub fn solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let lu = m.clone().lu();
    let u = lu.u();
    let min_pivot = (0..u.nrows()).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-12 * scale) {
        return None;
    }
    lu.solve(b)
}

/// Smallest singular value of a square matrix relative to its largest.
pub fn inverse_condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Solves `M x = r` where `M` and `r` carry first derivatives, returning `x`
/// with derivatives from implicit differentiation: `∂x = M⁻¹(∂r - ∂M x)`.
pub fn solve_jet(m: &[Vec<Dual>], r: &[Dual]) -> Option<Vec<Dual>> {
    let n = r.len();
    let mv = DMatrix::from_fn(n, n, |i, j| m[i][j].v);
    let lu = mv.clone().lu();
    let scale = mv.amax().max(f64::MIN_POSITIVE);
    let u = lu.u();
    if (0..n).any(|i| !(u[(i, i)].abs() > 1e-12 * scale)) {
        return None;
    }
    let x = lu.solve(&DVector::from_fn(n, |i, _| r[i].v))?;
    let mut out: Vec<Dual> = (0..n).map(|i| Dual::constant(x[i])).collect();
    for k in 0..NUM_VARS {
        let rhs = DVector::from_fn(n, |i, _| {
            let mut s = r[i].d[k];
            for j in 0..n {
                s -= m[i][j].d[k] * x[j];
            }
            s
        });
        if rhs.iter().all(|v| *v == 0.0) {
            continue;
        }
        let dx = lu.solve(&rhs)?;
        for i in 0..n {
            out[i].d[k] = dx[i];
        }
    }
    Some(out)
}

/// Determinant of the matrix whose columns are the given vectors.
pub fn det_columns(cols: &[DVector<f64>]) -> f64 {
    let n = cols.first().map(|c| c.len()).unwrap_or(0);
    if cols.len() != n {
        return 0.0;
    }
    DMatrix::from_columns(cols).determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = null_space(&m, 1e-12);
        assert_eq!(k.ncols(), 2);
        assert!((&m * &k).amax() < 1e-14);
        assert!((k.transpose() * &k - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn lstsq_min_norm() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0]);
        let (x, r) = lstsq(&a, &b, 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        assert!(r < 1e-14);
    }

    #[test]
    fn singular_detection() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(solve(&m, &DVector::from_vec(vec![1.0, 0.0])).is_none());
    }

    #[test]
    fn jet_solve_matches_finite_differences() {
        // M(s) = [[2 + s, 1], [0, 1 + s^2]], r(s) = [s, 1]
        let build = |s: f64| {
            let sd = Dual::variable(s, 0);
            let two = Dual::constant(2.0);
            let one = Dual::constant(1.0);
            use crate::expr::Scalar;
            let m = vec![vec![two.add(sd), one], vec![Dual::constant(0.0), one.add(sd.mul(sd))]];
            let r = vec![sd, one];
            (m, r)
        };
        let s = 0.3;
        let (m, r) = build(s);
        let x = solve_jet(&m, &r).unwrap();
        let h = 1e-6;
        let value = |s: f64| {
            let (m, r) = build(s);
            solve_jet(&m, &r).unwrap().iter().map(|d| d.v).collect::<Vec<_>>()
        };
        let (p, q) = (value(s + h), value(s - h));
        for i in 0..2 {
            let fd = (p[i] - q[i]) / (2.0 * h);
            assert!((x[i].d[0] - fd).abs() < 1e-8);
        }
    }
}
