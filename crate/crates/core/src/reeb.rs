//! Pointwise solvers for Reeb fields, the Reeb distribution and the
//! leafwise Reeb fields, with the commutation and projection checks.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::algebra::{subsets, FormValue};
use crate::error::{Error, Result};
use crate::expr::{Dual, Scalar};
use crate::form::DifferentialForm;
use crate::linalg::{lstsq, null_space, rank, solve_jet};
use crate::model::CoframeModel;
use crate::rank::{kernel_of_value, GeometricStructure, Witness, ZERO_TOL};
use crate::sample::Sampling;

/// Residual bound for the defining equations of every Reeb object.
pub const SOLVE_TOL: f64 = 1e-10;
/// Bound on `|[A, B]|` for the fields to count as commuting.
pub const BRACKET_TOL: f64 = 1e-9;
/// Agreement bound for the leafwise projection check.
pub const PROJECTION_TOL: f64 = 1e-8;
/// Smallest determinant of the splitting `F ⊕ G` before it is flagged.
pub const SPLITTING_TOL: f64 = 1e-6;

fn row(v: &FormValue) -> DMatrix<f64> {
    DMatrix::from_row_slice(1, v.n, &v.comps)
}

/// Rows of `v ↦ i_v Ω` for a 2-form value.
fn contraction_rows(w: &FormValue) -> DMatrix<f64> {
    w.matrix().transpose()
}

fn vstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = blocks[0].ncols();
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut m = DMatrix::zeros(rows, n);
    let mut r = 0;
    for b in blocks {
        m.view_mut((r, 0), (b.nrows(), n)).copy_from(b);
        r += b.nrows();
    }
    m
}

fn unit(len: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(len);
    v[i] = 1.0;
    v
}

/// Unique solution of a consistent (possibly overdetermined) system.
fn solve_unique(m: &DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let n = m.ncols();
    if rank(m, ZERO_TOL) != n {
        return Err(Error::Singular(format!("{what}: solution is not unique")));
    }
    let (x, r) = lstsq(m, b, ZERO_TOL);
    if r > SOLVE_TOL * (1.0 + x.amax()) {
        return Err(Error::Singular(format!("{what}: inconsistent system (residual {r:.3e})")));
    }
    Ok(x)
}

/// `R` with `α(R) = 1`, `i_R dα = 0`, `i_R η = 0`.
pub fn cs_pair_at(a: &FormValue, da: &FormValue, eta: &FormValue) -> Result<DVector<f64>> {
    let m = vstack(&[row(a), contraction_rows(da), contraction_rows(eta)]);
    solve_unique(&m, &unit(m.nrows(), 0), "Reeb field of the pair")
}

/// `(A, B)` with `α(A) = β(B) = 1`, `α(B) = β(A) = 0` and both fields in the
/// kernels of `dα` and `dβ`.
pub fn contact_pair_at(
    a: &FormValue,
    b: &FormValue,
    da: &FormValue,
    db: &FormValue,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let m = vstack(&[row(a), row(b), contraction_rows(da), contraction_rows(db)]);
    let fa = solve_unique(&m, &unit(m.nrows(), 0), "Reeb field A")?;
    let fb = solve_unique(&m, &unit(m.nrows(), 1), "Reeb field B")?;
    Ok((fa, fb))
}

/// `R` with `α(R) = 1` and `i_R (dα + η) = 0`.
pub fn cs_structure_at(a: &FormValue, da: &FormValue, eta: &FormValue) -> Result<DVector<f64>> {
    let omega = da.add(eta);
    let ker = null_space(&omega.matrix(), ZERO_TOL);
    if ker.ncols() == 0 {
        return Err(Error::Singular("dα + η is nondegenerate".into()));
    }
    if (row(a) * &ker).amax() <= ZERO_TOL {
        return Err(Error::Structure("kernel of dα + η lies in the kernel of α".into()));
    }
    let m = vstack(&[row(a), contraction_rows(&omega)]);
    solve_unique(&m, &unit(m.nrows(), 0), "Reeb field of the structure")
}

/// Reeb distribution of a contact-contact structure: an orthonormal basis of
/// `{Y : i_Y(dα + dβ) vanishes on Ker α ∩ Ker β}` and the fields `A, B`
/// inside it normalized against `α, β`.
pub fn cc_distribution_at(
    a: &FormValue,
    b: &FormValue,
    da: &FormValue,
    db: &FormValue,
) -> Result<(DMatrix<f64>, DVector<f64>, DVector<f64>)> {
    let n = a.n;
    let ab = vstack(&[row(a), row(b)]);
    let w = null_space(&ab, ZERO_TOL);
    if w.ncols() + 2 != n {
        return Err(Error::Singular("α and β are linearly dependent".into()));
    }
    let omega = da.add(db).matrix();
    let s = w.transpose() * omega.transpose();
    let dist = null_space(&s, ZERO_TOL);
    if dist.ncols() != 2 {
        return Err(Error::Dimension(format!(
            "Reeb distribution has dimension {} instead of 2",
            dist.ncols()
        )));
    }
    let pair = &ab * &dist;
    let inv = pair
        .clone()
        .try_inverse()
        .filter(|_| pair.determinant().abs() > ZERO_TOL)
        .ok_or_else(|| Error::Singular("α, β degenerate on the Reeb distribution".into()))?;
    let fa = &dist * inv.column(0);
    let fb = &dist * inv.column(1);
    Ok((dist, fa, fb))
}

/// Leafwise Reeb field of `α`: tangent to `Ker ρ`, `α(R) = 1` and
/// `(i_R dα) ∧ ρ = 0`, where `ρ` defines the leaves `α` is contact on.
pub fn leafwise_at(a: &FormValue, da: &FormValue, rho: &FormValue) -> Result<DVector<f64>> {
    let l = kernel_of_value(rho);
    if l.ncols() == 0 {
        return Err(Error::Singular("leaves are points".into()));
    }
    let om = da.matrix();
    let m = vstack(&[row(a) * &l, l.transpose() * om.transpose() * &l]);
    let c = solve_unique(&m, &unit(m.nrows(), 0), "leafwise Reeb field")?;
    Ok(&l * c)
}

/// Residuals of the leafwise Reeb equations: tangency, normalization and the
/// wedge condition, evaluated directly on the forms.
pub fn leafwise_residual(r: &[f64], a: &FormValue, da: &FormValue, rho: &FormValue) -> f64 {
    let tangency = rho.interior(r).sup();
    let norm = (a.comps.iter().zip(r).map(|(x, y)| x * y).sum::<f64>() - 1.0).abs();
    let wedge = da.interior(r).wedge(rho).sup();
    tangency.max(norm).max(wedge)
}

/// Pointwise values of the forms a structure's Reeb objects need.
struct Values {
    a: FormValue,
    b: FormValue,
    da: FormValue,
    db: FormValue,
}

/// Precomputed differentials for sweeps.
struct Prepared<'a> {
    a: &'a DifferentialForm,
    b: &'a DifferentialForm,
    da: DifferentialForm,
    db: DifferentialForm,
}

impl<'a> Prepared<'a> {
    fn new(a: &'a DifferentialForm, b: &'a DifferentialForm) -> Prepared<'a> {
        Prepared {
            a,
            b,
            da: a.d(),
            db: b.d(),
        }
    }

    fn at(&self, p: &[f64], t: f64) -> Result<Values> {
        Ok(Values {
            a: self.a.evaluate(p, t)?,
            b: self.b.evaluate(p, t)?,
            da: self.da.evaluate(p, t)?,
            db: self.db.evaluate(p, t)?,
        })
    }
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

pub fn reeb_cs_pair(alpha: &DifferentialForm, eta: &DifferentialForm, p: &[f64], t: f64) -> Result<Vec<f64>> {
    let v = Prepared::new(alpha, eta).at(p, t)?;
    Ok(to_vec(&cs_pair_at(&v.a, &v.da, &v.b)?))
}

pub fn reeb_pair_contact(
    alpha: &DifferentialForm,
    beta: &DifferentialForm,
    p: &[f64],
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let v = Prepared::new(alpha, beta).at(p, t)?;
    let (a, b) = contact_pair_at(&v.a, &v.b, &v.da, &v.db)?;
    Ok((to_vec(&a), to_vec(&b)))
}

pub fn reeb_cs_structure(alpha: &DifferentialForm, eta: &DifferentialForm, p: &[f64], t: f64) -> Result<Vec<f64>> {
    let v = Prepared::new(alpha, eta).at(p, t)?;
    Ok(to_vec(&cs_structure_at(&v.a, &v.da, &v.b)?))
}

/// Basis of the Reeb distribution (columns) and the fields `A, B`.
pub fn reeb_distribution_cc(
    alpha: &DifferentialForm,
    beta: &DifferentialForm,
    p: &[f64],
    t: f64,
) -> Result<(DMatrix<f64>, Vec<f64>, Vec<f64>)> {
    let v = Prepared::new(alpha, beta).at(p, t)?;
    let (d, a, b) = cc_distribution_at(&v.a, &v.b, &v.da, &v.db)?;
    Ok((d, to_vec(&a), to_vec(&b)))
}

/// Defining forms `α ∧ (dα)^h` and `β ∧ (dβ)^k` of the two foliations of a
/// contact-contact structure of type `(h, k)`.
pub fn cc_foliation_forms(
    alpha: &DifferentialForm,
    beta: &DifferentialForm,
    h: usize,
    k: usize,
) -> Result<(DifferentialForm, DifferentialForm)> {
    Ok((alpha.wedge(&alpha.d().power(h)?)?, beta.wedge(&beta.d().power(k)?)?))
}

/// `(R_α, R_β)` for a contact-contact structure of type `(h, k)`.
pub fn leafwise_reeb(
    alpha: &DifferentialForm,
    beta: &DifferentialForm,
    h: usize,
    k: usize,
    p: &[f64],
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (rf, rg) = cc_foliation_forms(alpha, beta, h, k)?;
    let v = Prepared::new(alpha, beta).at(p, t)?;
    let (rf, rg) = (rf.evaluate(p, t)?, rg.evaluate(p, t)?);
    let ra = leafwise_at(&v.a, &v.da, &rg)?;
    let rb = leafwise_at(&v.b, &v.db, &rf)?;
    Ok((to_vec(&ra), to_vec(&rb)))
}

pub(crate) fn dual_matrix(n: usize, comps: &[Dual]) -> Vec<Vec<Dual>> {
    let mut m = vec![vec![Dual::constant(0.0); n]; n];
    for (c, mask) in comps.iter().zip(subsets(n, 2)) {
        let i = mask.trailing_zeros() as usize;
        let j = (31 - mask.leading_zeros()) as usize;
        m[i][j] = *c;
        m[j][i] = c.scale(-1.0);
    }
    m
}

/// `A, B` with first derivatives, from the square bordered system
/// `i_Y(dα + dβ) = λα + κβ`, `α(Y), β(Y)` prescribed.
fn cc_fields_jet(
    a: &[Dual],
    b: &[Dual],
    da: &[Dual],
    db: &[Dual],
) -> Option<(Vec<Dual>, Vec<Dual>)> {
    let n = a.len();
    let om: Vec<Vec<Dual>> = {
        let x = dual_matrix(n, da);
        let y = dual_matrix(n, db);
        (0..n).map(|i| (0..n).map(|j| x[i][j].add(y[i][j])).collect()).collect()
    };
    let zero = Dual::constant(0.0);
    let mut m = vec![vec![zero; n + 2]; n + 2];
    for j in 0..n {
        for i in 0..n {
            // row j of Ω^T
            m[j][i] = om[i][j];
        }
        m[j][n] = a[j].scale(-1.0);
        m[j][n + 1] = b[j].scale(-1.0);
        m[n][j] = a[j];
        m[n + 1][j] = b[j];
    }
    let mut ra = vec![zero; n + 2];
    ra[n] = Dual::constant(1.0);
    let mut rb = vec![zero; n + 2];
    rb[n + 1] = Dual::constant(1.0);
    let fa = solve_jet(&m, &ra)?;
    let fb = solve_jet(&m, &rb)?;
    Some((fa[..n].to_vec(), fb[..n].to_vec()))
}

/// Frame components of `[U, V]` from component jets.
pub fn bracket(model: &CoframeModel, p: &[f64], u: &[Dual], v: &[Dual]) -> Vec<f64> {
    let n = model.dim;
    let f = model.frame_matrix(p);
    let frame_d = |g: &Dual, i: usize| (0..n).map(|a| f[(i, a)] * g.d[a]).sum::<f64>();
    (0..n)
        .map(|k| {
            let mut s = 0.0;
            for i in 0..n {
                s += u[i].v * frame_d(&v[k], i) - v[i].v * frame_d(&u[k], i);
            }
            for &(kk, i, j, c) in &model.structure_constants {
                if kk == k {
                    s -= c * (u[i].v * v[j].v - u[j].v * v[i].v);
                }
            }
            s
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutationReport {
    /// Rank of `dα + dβ` per sample.
    #[serde(skip)]
    pub ranks: Vec<usize>,
    /// Smallest and largest rank seen.
    pub rank_range: (usize, usize),
    pub expected_rank: usize,
    pub constant_rank: bool,
    pub bracket_sup: f64,
    pub commuting: bool,
    /// Constant expected rank holds exactly when the fields commute.
    pub agrees: bool,
    pub bracket_witness: Option<Witness>,
    pub rank_witness: Option<Witness>,
}

/// Rank of `dα + dβ` and the bracket `[A, B]` over the sampling.
pub fn check_commutation_rank_prop(
    alpha: &DifferentialForm,
    beta: &DifferentialForm,
    sampling: &Sampling,
) -> Result<CommutationReport> {
    let model = alpha.model().clone();
    let n = model.dim;
    let expected_rank = n - 2;
    let prep = Prepared::new(alpha, beta);
    let sum = prep.da.add(&prep.db)?;
    let mut ranks = Vec::new();
    let mut bracket_sup = 0.0f64;
    let mut bracket_witness = None;
    let mut rank_witness = None;
    for p in &sampling.points {
        for &t in &sampling.ts {
            let r = crate::algebra::rank_2form(&sum.evaluate(p, t)?, ZERO_TOL);
            if r != expected_rank && rank_witness.is_none() {
                rank_witness = Some(Witness {
                    point: p.clone(),
                    t,
                    value: r as f64,
                });
            }
            ranks.push(r);
            let (fa, fb) = cc_fields_jet(
                &alpha.evaluate_dual(p, t)?,
                &beta.evaluate_dual(p, t)?,
                &prep.da.evaluate_dual(p, t)?,
                &prep.db.evaluate_dual(p, t)?,
            )
            .ok_or_else(|| Error::Singular(format!("Reeb fields undefined at {p:?}")))?;
            let br = bracket(&model, p, &fa, &fb);
            let s = br.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if s > bracket_sup {
                bracket_sup = s;
                bracket_witness = Some(Witness {
                    point: p.clone(),
                    t,
                    value: s,
                });
            }
        }
    }
    let constant_rank = ranks.iter().all(|&r| r == expected_rank);
    let commuting = bracket_sup <= BRACKET_TOL;
    let rank_range = (
        ranks.iter().copied().min().unwrap_or(0),
        ranks.iter().copied().max().unwrap_or(0),
    );
    Ok(CommutationReport {
        rank_range,
        ranks,
        expected_rank,
        constant_rank,
        bracket_sup,
        commuting,
        agrees: constant_rank == commuting,
        bracket_witness,
        rank_witness,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionReport {
    /// Largest `|proj(A) − R_α|` and `|proj(B) − R_β|` over the sampling.
    pub max_error: f64,
    pub min_splitting_det: f64,
    pub ill_conditioned: bool,
    pub holds: bool,
    pub witness: Option<Witness>,
}

/// Projects `v` onto the columns of `onto` along the columns of `along`.
pub fn project_along(v: &DVector<f64>, onto: &DMatrix<f64>, along: &DMatrix<f64>) -> Option<(DVector<f64>, f64)> {
    let n = v.len();
    if onto.ncols() + along.ncols() != n {
        return None;
    }
    let mut m = DMatrix::zeros(n, n);
    m.view_mut((0, 0), (n, onto.ncols())).copy_from(onto);
    m.view_mut((0, onto.ncols()), (n, along.ncols())).copy_from(along);
    let det = m.determinant().abs();
    let c = m.lu().solve(v)?;
    Some((onto * c.rows(0, onto.ncols()), det))
}

/// Leafwise Reeb fields against projections of `A, B` in the splitting of
/// the two characteristic foliations.
pub fn check_leafwise_projection(
    alpha: &DifferentialForm,
    beta: &DifferentialForm,
    h: usize,
    k: usize,
    sampling: &Sampling,
) -> Result<ProjectionReport> {
    let (rf, rg) = cc_foliation_forms(alpha, beta, h, k)?;
    let prep = Prepared::new(alpha, beta);
    let mut max_error = 0.0f64;
    let mut min_det = f64::INFINITY;
    let mut witness = None;
    for p in &sampling.points {
        for &t in &sampling.ts {
            let v = prep.at(p, t)?;
            let (fv, gv) = (rf.evaluate(p, t)?, rg.evaluate(p, t)?);
            let (_, fa, fb) = cc_distribution_at(&v.a, &v.b, &v.da, &v.db)?;
            let ra = leafwise_at(&v.a, &v.da, &gv)?;
            let rb = leafwise_at(&v.b, &v.db, &fv)?;
            let kf = kernel_of_value(&fv);
            let kg = kernel_of_value(&gv);
            let (pa, det) = project_along(&fa, &kg, &kf)
                .ok_or_else(|| Error::Dimension("foliations are not complementary".into()))?;
            let (pb, _) = project_along(&fb, &kf, &kg)
                .ok_or_else(|| Error::Dimension("foliations are not complementary".into()))?;
            min_det = min_det.min(det);
            let e = (pa - ra).amax().max((pb - rb).amax());
            if e > max_error {
                max_error = e;
                witness = Some(Witness {
                    point: p.clone(),
                    t,
                    value: e,
                });
            }
        }
    }
    let ill_conditioned = min_det < SPLITTING_TOL;
    Ok(ProjectionReport {
        max_error,
        min_splitting_det: min_det,
        ill_conditioned,
        holds: !ill_conditioned && max_error <= PROJECTION_TOL,
        witness,
    })
}

/// Worst `|dα(X, Y)|` over `X ∈ Ker α` and `Y` tangent to the
/// characteristic foliation `Ker(α ∧ (dα)^h)` (or `Ker (dα)^h` for even class).
pub fn kernel_pairing_residual(alpha: &DifferentialForm, sampling: &Sampling) -> Result<f64> {
    let dist = crate::rank::characteristic_distribution(alpha, sampling)?;
    let c = dist.class.min;
    let da = alpha.d();
    let rho = if c % 2 == 1 {
        alpha.wedge(&da.power(c / 2)?)?
    } else {
        da.power(c / 2)?
    };
    let mut worst = 0.0f64;
    for p in &sampling.points {
        for &t in &sampling.ts {
            let a = alpha.evaluate(p, t)?;
            let om = da.evaluate(p, t)?.matrix();
            let xs = null_space(&row(&a), ZERO_TOL);
            let ys = kernel_of_value(&rho.evaluate(p, t)?);
            worst = worst.max((xs.transpose() * om * ys).amax());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReebKind {
    Single,
    Pair,
    Distribution,
    Leafwise,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReebSample {
    pub point: Vec<f64>,
    pub t: f64,
    pub fields: Vec<Vec<f64>>,
    pub residual: f64,
}

/// Reeb objects of one kind over a sampling with their defining-equation
/// residuals (recomputed from the forms, not from the solver).
#[derive(Debug, Clone, Serialize)]
pub struct ReebSolution {
    pub kind: ReebKind,
    pub field_names: Vec<String>,
    #[serde(skip)]
    pub samples: Vec<ReebSample>,
    pub max_residual: f64,
    /// Largest change of the difference quotient between steps `h` and `2h`
    /// at a few sample points; small values mean smooth dependence.
    pub smoothness: f64,
}

/// Everything the Reeb command reports for one structure.
#[derive(Debug, Clone, Serialize)]
pub struct ReebSuite {
    pub solutions: Vec<ReebSolution>,
    pub max_residual: f64,
    /// Pair-level against structure-level Reeb field, where both apply.
    pub consistency: Option<f64>,
    pub commutation: Option<CommutationReport>,
    pub projection: Option<ProjectionReport>,
}

fn pair_residual(fields: &[&DVector<f64>], v: &Values) -> f64 {
    let mut r = 0.0f64;
    for (idx, f) in fields.iter().enumerate() {
        let x = f.as_slice();
        let dot = |w: &FormValue| w.comps.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let (ta, tb) = if idx == 0 { (1.0, 0.0) } else { (0.0, 1.0) };
        r = r
            .max((dot(&v.a) - ta).abs())
            .max((dot(&v.b) - tb).abs())
            .max(v.da.interior(x).sup())
            .max(v.db.interior(x).sup());
    }
    r
}

/// `A, B` satisfy `α(A) = β(B) = 1`, `α(B) = β(A) = 0` and `i(dα + dβ)`
/// vanishes on `Ker α ∩ Ker β`.
fn distribution_residual(fa: &DVector<f64>, fb: &DVector<f64>, v: &Values) -> f64 {
    let ab = vstack(&[row(&v.a), row(&v.b)]);
    let w = null_space(&ab, ZERO_TOL);
    let om = v.da.add(&v.db).matrix();
    let mut r = 0.0f64;
    for (f, target) in [(fa, [1.0, 0.0]), (fb, [0.0, 1.0])] {
        let vals = &ab * f;
        r = r.max((vals[0] - target[0]).abs()).max((vals[1] - target[1]).abs());
        r = r.max((w.transpose() * om.transpose() * f).amax());
    }
    r
}

fn smoothness(f: impl Fn(&[f64]) -> Result<Vec<f64>>, points: &[Vec<f64>]) -> Result<f64> {
    let h = 1e-4;
    let mut worst = 0.0f64;
    for p in points.iter().take(8) {
        for a in 0..p.len() {
            let shifted = |s: f64| -> Result<Vec<f64>> {
                let mut q = p.clone();
                q[a] += s;
                f(&q)
            };
            let (p1, m1, p2, m2) = (shifted(h)?, shifted(-h)?, shifted(2.0 * h)?, shifted(-2.0 * h)?);
            for i in 0..p1.len() {
                let d1 = (p1[i] - m1[i]) / (2.0 * h);
                let d2 = (p2[i] - m2[i]) / (4.0 * h);
                worst = worst.max((d1 - d2).abs() / (1.0 + d1.abs()));
            }
        }
    }
    Ok(worst)
}

fn flatten(fields: &[&DVector<f64>]) -> Vec<f64> {
    fields.iter().flat_map(|f| f.iter().copied()).collect()
}

fn single(
    names: &[&str],
    kind: ReebKind,
    sampling: &Sampling,
    solve: impl Fn(&[f64], f64) -> Result<(Vec<DVector<f64>>, f64)>,
) -> Result<ReebSolution> {
    let mut samples = Vec::new();
    let mut max_residual = 0.0f64;
    for p in &sampling.points {
        for &t in &sampling.ts {
            let (fields, residual) = solve(p, t)?;
            max_residual = max_residual.max(residual);
            samples.push(ReebSample {
                point: p.clone(),
                t,
                fields: fields.iter().map(to_vec).collect(),
                residual,
            });
        }
    }
    let t0 = sampling.ts[0];
    let smooth = smoothness(
        |q| solve(q, t0).map(|(f, _)| flatten(&f.iter().collect::<Vec<_>>())),
        &sampling.points,
    )?;
    Ok(ReebSolution {
        kind,
        field_names: names.iter().map(|s| s.to_string()).collect(),
        samples,
        max_residual,
        smoothness: smooth,
    })
}

/// Solves every Reeb object attached to the structure on the sampling.
pub fn solve_structure(s: &GeometricStructure, sampling: &Sampling) -> Result<ReebSuite> {
    let mut solutions = Vec::new();
    let mut consistency = None;
    let mut commutation = None;
    let mut projection = None;
    match s {
        GeometricStructure::SymplecticPair { .. } => {}
        GeometricStructure::ContactSymplecticPair { alpha, eta, .. } => {
            let prep = Prepared::new(alpha, eta);
            solutions.push(single(&["R"], ReebKind::Single, sampling, |p, t| {
                let v = prep.at(p, t)?;
                let r = cs_pair_at(&v.a, &v.da, &v.b)?;
                let x = r.as_slice();
                let res = (v.a.comps.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - 1.0)
                    .abs()
                    .max(v.da.interior(x).sup())
                    .max(v.b.interior(x).sup());
                Ok((vec![r], res))
            })?);
            let mut worst = 0.0f64;
            for p in &sampling.points {
                for &t in &sampling.ts {
                    let v = prep.at(p, t)?;
                    let d = cs_pair_at(&v.a, &v.da, &v.b)? - cs_structure_at(&v.a, &v.da, &v.b)?;
                    worst = worst.max(d.amax());
                }
            }
            consistency = Some(worst);
        }
        GeometricStructure::ContactSymplecticStructure { alpha, eta, .. } => {
            let prep = Prepared::new(alpha, eta);
            solutions.push(single(&["R"], ReebKind::Single, sampling, |p, t| {
                let v = prep.at(p, t)?;
                let r = cs_structure_at(&v.a, &v.da, &v.b)?;
                let x = r.as_slice();
                let res = (v.a.comps.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - 1.0)
                    .abs()
                    .max(v.da.add(&v.b).interior(x).sup());
                Ok((vec![r], res))
            })?);
        }
        GeometricStructure::ContactPair { alpha, beta, .. }
        | GeometricStructure::ContactContactStructure { alpha, beta, .. } => {
            let (h, k) = s.type_pair();
            let prep = Prepared::new(alpha, beta);
            if matches!(s, GeometricStructure::ContactPair { .. }) {
                solutions.push(single(&["A", "B"], ReebKind::Pair, sampling, |p, t| {
                    let v = prep.at(p, t)?;
                    let (fa, fb) = contact_pair_at(&v.a, &v.b, &v.da, &v.db)?;
                    let res = pair_residual(&[&fa, &fb], &v);
                    Ok((vec![fa, fb], res))
                })?);
            }
            solutions.push(single(&["A", "B"], ReebKind::Distribution, sampling, |p, t| {
                let v = prep.at(p, t)?;
                let (_, fa, fb) = cc_distribution_at(&v.a, &v.b, &v.da, &v.db)?;
                let res = distribution_residual(&fa, &fb, &v);
                Ok((vec![fa, fb], res))
            })?);
            let (rf, rg) = cc_foliation_forms(alpha, beta, h, k)?;
            solutions.push(single(&["R_alpha", "R_beta"], ReebKind::Leafwise, sampling, |p, t| {
                let v = prep.at(p, t)?;
                let (fv, gv) = (rf.evaluate(p, t)?, rg.evaluate(p, t)?);
                let ra = leafwise_at(&v.a, &v.da, &gv)?;
                let rb = leafwise_at(&v.b, &v.db, &fv)?;
                let res = leafwise_residual(ra.as_slice(), &v.a, &v.da, &gv)
                    .max(leafwise_residual(rb.as_slice(), &v.b, &v.db, &fv));
                Ok((vec![ra, rb], res))
            })?);
            commutation = Some(check_commutation_rank_prop(alpha, beta, sampling)?);
            projection = Some(check_leafwise_projection(alpha, beta, h, k, sampling)?);
        }
    }
    let max_residual = solutions.iter().map(|s| s.max_residual).fold(0.0, f64::max);
    Ok(ReebSuite {
        solutions,
        max_residual,
        consistency,
        commutation,
        projection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn torus(n: usize) -> Arc<CoframeModel> {
        Arc::new(CoframeModel::torus(n))
    }

    #[test]
    fn cs_pair_on_t3() {
        let m = torus(3);
        let a = DifferentialForm::basis(&m, &[2]);
        let eta = DifferentialForm::basis(&m, &[0, 1]);
        let r = reeb_cs_pair(&a, &eta, &[0.3, 0.2, 0.1], 0.0).unwrap();
        assert!((r[2] - 1.0).abs() < 1e-14 && r[0].abs() < 1e-14 && r[1].abs() < 1e-14);
        let s = reeb_cs_structure(&a, &eta, &[0.3, 0.2, 0.1], 0.0).unwrap();
        assert!((s[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scaled_form_halves_reeb_field() {
        let m = torus(3);
        let a = DifferentialForm::basis(&m, &[2]).scale(2.0);
        let eta = DifferentialForm::basis(&m, &[0, 1]);
        let r = reeb_cs_structure(&a, &eta, &[0.0; 3], 0.0).unwrap();
        assert!((r[2] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn contact_pair_on_t4() {
        let m = torus(4);
        let a = DifferentialForm::parse(&m, 1, &[(vec![1], "cos(th3)"), (vec![2], "sin(th3)")]).unwrap();
        let b = DifferentialForm::basis(&m, &[3]);
        let p = [0.1, 0.2, 0.7, 0.4];
        let (fa, fb) = reeb_pair_contact(&a, &b, &p, 0.0).unwrap();
        let want = [0.7f64.cos(), 0.7f64.sin(), 0.0, 0.0];
        for i in 0..4 {
            assert!((fa[i] - want[i]).abs() < 1e-12);
        }
        assert!((fb[3] - 1.0).abs() < 1e-12);
        let (d, ca, cb) = reeb_distribution_cc(&a, &b, &p, 0.0).unwrap();
        assert_eq!(d.ncols(), 2);
        for i in 0..4 {
            assert!((ca[i] - fa[i]).abs() < 1e-9 && (cb[i] - fb[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_pair_is_singular() {
        let m = torus(4);
        let a = DifferentialForm::basis(&m, &[0]);
        let b = DifferentialForm::basis(&m, &[3]);
        assert!(matches!(reeb_pair_contact(&a, &b, &[0.0; 4], 0.0), Err(Error::Singular(_))));
    }

    #[test]
    fn bracket_of_heisenberg_frame() {
        let h = CoframeModel::heisenberg_circle();
        let e = |i: usize| -> Vec<Dual> {
            (0..4).map(|j| Dual::constant(if i == j { 1.0 } else { 0.0 })).collect()
        };
        let b = bracket(&h, &[0.2, 0.0, 0.0, 0.0], &e(0), &e(1));
        assert_eq!(b, vec![0.0, 0.0, 1.0, 0.0]);
    }
}
