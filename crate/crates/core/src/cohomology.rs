//! Ideal, basic and leafwise complexes of a foliation: membership tests,
//! Fourier-truncated basic complexes, primitives, truncated basic H², the
//! Reeb class and de Rham periods.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::algebra::{mask_indices, subsets, FormValue};
use crate::error::{Error, Result};
use crate::expr::ScalarField;
use crate::form::{frame_derivative, mask_label, DifferentialForm, VectorFieldRep};
use crate::linalg::{lstsq, null_space};
use crate::model::CoframeModel;
use crate::rank::{FoliationSpec, Witness, ZERO_TOL};
use crate::sample::{halton_points, Grid, Sampling};

/// Relative least-squares residual below which a primitive is accepted.
pub const PRIMITIVE_TOL: f64 = 1e-8;
/// Bound on `d(primitive) − target` for an accepted primitive.
pub const SOUNDNESS_TOL: f64 = 1e-8;
/// Default Fourier truncation order.
pub const DEFAULT_ORDER: usize = 4;
/// Quadrature nodes per direction for period integrals.
pub const PERIOD_NODES: usize = 64;

fn restrict(a: &FormValue, basis: &DMatrix<f64>) -> f64 {
    let d = basis.ncols();
    if a.p == 0 {
        return a.comps[0].abs();
    }
    if a.p > d {
        return 0.0;
    }
    let cols: Vec<Vec<f64>> = (0..d).map(|j| basis.column(j).iter().copied().collect()).collect();
    let mut worst = 0.0f64;
    for mask in subsets(d, a.p) {
        let vs: Vec<&[f64]> = mask_indices(mask).iter().map(|&j| cols[j].as_slice()).collect();
        worst = worst.max(a.apply(&vs).abs());
    }
    worst
}

/// Whether `a` vanishes on tuples of vectors tangent to the foliation.
pub fn is_in_ideal(a: &DifferentialForm, spec: &FoliationSpec, sampling: &Sampling) -> Result<(bool, f64)> {
    let n = a.dim();
    let mut worst = 0.0f64;
    for p in &sampling.points {
        for &t in &sampling.ts {
            let k = spec.tangent_basis(n, p, t)?;
            worst = worst.max(restrict(&a.evaluate(p, t)?, &k));
        }
    }
    Ok((worst <= ZERO_TOL, worst))
}

#[derive(Debug, Clone, Serialize)]
pub struct BasicReport {
    pub basic: bool,
    pub interior_residual: f64,
    pub lie_residual: f64,
}

/// `i_X a = 0` and `L_X a = 0` for all `X` tangent to the foliation. Frame
/// spans use the spanning frame fields symbolically; kernels use the
/// pointwise equivalent `i_X a = 0`, `i_X da = 0` on kernel vectors.
pub fn is_basic(a: &DifferentialForm, spec: &FoliationSpec, sampling: &Sampling) -> Result<BasicReport> {
    let model = a.model();
    let (mut ir, mut lr) = (0.0f64, 0.0f64);
    match spec {
        FoliationSpec::FrameSpan(s) => {
            for &i in s {
                let x = VectorFieldRep::frame(model, i);
                ir = ir.max(a.interior(&x)?.sup_norm(sampling.point_refs(), &sampling.ts)?.0);
                lr = lr.max(a.lie_derivative(&x)?.sup_norm(sampling.point_refs(), &sampling.ts)?.0);
            }
        }
        FoliationSpec::KernelOf { .. } => {
            let da = a.d();
            for p in &sampling.points {
                for &t in &sampling.ts {
                    let k = spec.tangent_basis(a.dim(), p, t)?;
                    let (av, dv) = (a.evaluate(p, t)?, da.evaluate(p, t)?);
                    for j in 0..k.ncols() {
                        let v: Vec<f64> = k.column(j).iter().copied().collect();
                        ir = ir.max(av.interior(&v).sup());
                        lr = lr.max(dv.interior(&v).sup());
                    }
                }
            }
        }
    }
    Ok(BasicReport {
        basic: ir <= ZERO_TOL && lr <= ZERO_TOL,
        interior_residual: ir,
        lie_residual: lr,
    })
}

/// Coordinates untouched by every spanning frame field; basic coefficient
/// functions may depend only on these.
pub fn transverse_coordinates(model: &CoframeModel, span: &[usize]) -> Vec<usize> {
    (0..model.dim)
        .filter(|&a| span.iter().all(|&i| model.frame[i][a].is_zero()))
        .collect()
}

/// A mode survives the lattice action when no shear moves a coordinate the
/// mode oscillates in.
pub fn mode_survives(model: &CoframeModel, coords: &[usize], mode: &[i32]) -> bool {
    model.shears.iter().all(|s| {
        s.coef == 0.0
            || coords
                .iter()
                .position(|&a| a == s.target)
                .is_none_or(|k| mode[k] == 0)
    })
}

/// Multi-indices in `[-order, order]^len` with first nonzero entry positive,
/// preceded by the zero mode.
pub fn half_modes(len: usize, order: usize) -> Vec<Vec<i32>> {
    let o = order as i32;
    let side = (2 * order + 1) as usize;
    let total = side.pow(len as u32);
    let mut out = vec![vec![0; len]];
    for idx in 0..total {
        let mut m = Vec::with_capacity(len);
        let mut r = idx;
        for _ in 0..len {
            m.push((r % side) as i32 - o);
            r /= side;
        }
        if m.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0) {
            out.push(m);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrigKind {
    Const,
    Cos,
    Sin,
}

#[derive(Debug, Clone)]
pub struct TrigFunction {
    pub mode: Vec<i32>,
    pub kind: TrigKind,
    pub field: ScalarField,
}

/// Real trigonometric functions for the given modes over `coords`.
pub fn trig_functions(model: &CoframeModel, coords: &[usize], modes: &[Vec<i32>]) -> Vec<TrigFunction> {
    let mut out = Vec::new();
    for m in modes {
        if m.iter().all(|&x| x == 0) {
            out.push(TrigFunction {
                mode: m.clone(),
                kind: TrigKind::Const,
                field: ScalarField::one(),
            });
            continue;
        }
        let mut arg = ScalarField::zero();
        for (k, &a) in coords.iter().enumerate() {
            if m[k] != 0 {
                let freq = 2.0 * PI * m[k] as f64 / model.periods[a];
                arg = arg.add(&ScalarField::coord(a).scale(freq));
            }
        }
        out.push(TrigFunction {
            mode: m.clone(),
            kind: TrigKind::Cos,
            field: arg.cos(),
        });
        out.push(TrigFunction {
            mode: m.clone(),
            kind: TrigKind::Sin,
            field: arg.sin(),
        });
    }
    out
}

/// Constant-coefficient form `Σ c_I e^I`.
pub type CoframeVector = Vec<(u32, f64)>;

fn coframe_label(v: &CoframeVector) -> String {
    let parts: Vec<String> = v
        .iter()
        .map(|(m, c)| {
            let idx: String = mask_indices(*m).iter().map(|i| (i + 1).to_string()).collect();
            if *c == 1.0 {
                format!("e^{idx}")
            } else {
                format!("{c}*e^{idx}")
            }
        })
        .collect();
    parts.join(" + ")
}

/// Fourier truncation of the basic complex of a frame-span foliation.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub model: Arc<CoframeModel>,
    pub span: Vec<usize>,
    pub transverse: Vec<usize>,
    pub order: usize,
    pub functions: Vec<TrigFunction>,
    /// Per degree, the basic constant-coefficient forms.
    pub coframe: Vec<Vec<CoframeVector>>,
}

#[derive(Debug, Clone)]
pub struct BasisForm {
    pub function: usize,
    pub coframe: usize,
    pub form: DifferentialForm,
}

impl SpectralBasis {
    pub fn new(model: &Arc<CoframeModel>, spec: &FoliationSpec, order: usize) -> Result<SpectralBasis> {
        let span = spec
            .frame_span()
            .ok_or_else(|| Error::Unsupported("spectral basis needs a frame-span foliation".into()))?
            .to_vec();
        let n = model.dim;
        let transverse = transverse_coordinates(model, &span);
        let modes: Vec<Vec<i32>> = half_modes(transverse.len(), order)
            .into_iter()
            .filter(|m| mode_survives(model, &transverse, m))
            .collect();
        let functions = trig_functions(model, &transverse, &modes);
        for f in &functions {
            for &i in &span {
                if !frame_derivative(model, i, &f.field).is_zero() {
                    return Err(Error::Structure(format!(
                        "basis function of mode {:?} is not constant along X_{}",
                        f.mode,
                        i + 1
                    )));
                }
            }
        }
        let complement: u32 = (0..n).filter(|i| !span.contains(i)).fold(0, |m, i| m | (1 << i));
        let probe = halton_points(&model.periods, 1).remove(0);
        let mut coframe = Vec::with_capacity(n + 1);
        for p in 0..=n {
            let masks: Vec<u32> = subsets(n, p).into_iter().filter(|m| m & !complement == 0).collect();
            if masks.is_empty() {
                coframe.push(Vec::new());
                continue;
            }
            let mut rows: Vec<Vec<f64>> = Vec::new();
            for &i in &span {
                let x = VectorFieldRep::frame(model, i);
                let lie: Vec<FormValue> = masks
                    .iter()
                    .map(|&m| {
                        DifferentialForm::new(model, p, [(m, ScalarField::one())])
                            .lie_derivative(&x)?
                            .evaluate(&probe, 0.0)
                    })
                    .collect::<Result<_>>()?;
                for r in 0..lie[0].comps.len() {
                    rows.push(lie.iter().map(|l| l.comps[r]).collect());
                }
            }
            let cons = DMatrix::from_fn(rows.len(), masks.len(), |r, c| rows[r][c]);
            let vecs: Vec<CoframeVector> = if cons.amax() == 0.0 {
                masks.iter().map(|&m| vec![(m, 1.0)]).collect()
            } else {
                let ns = null_space(&cons, 1e-12);
                (0..ns.ncols())
                    .map(|j| {
                        masks
                            .iter()
                            .enumerate()
                            .filter(|(k, _)| ns[(*k, j)].abs() > 1e-14)
                            .map(|(k, &m)| (m, ns[(k, j)]))
                            .collect()
                    })
                    .collect()
            };
            for v in &vecs {
                let form = DifferentialForm::new(model, p, v.iter().map(|&(m, c)| (m, ScalarField::constant(c))));
                for &i in &span {
                    let l = form.lie_derivative(&VectorFieldRep::frame(model, i))?;
                    if l.evaluate(&probe, 0.0)?.sup() > 1e-12 {
                        return Err(Error::Structure(format!("coframe part {} is not basic", coframe_label(v))));
                    }
                }
            }
            coframe.push(vecs);
        }
        Ok(SpectralBasis {
            model: model.clone(),
            span,
            transverse,
            order,
            functions,
            coframe,
        })
    }

    pub fn dim(&self, p: usize) -> usize {
        self.functions.len() * self.coframe.get(p).map_or(0, |c| c.len())
    }

    pub fn forms(&self, p: usize) -> Vec<BasisForm> {
        let mut out = Vec::new();
        let Some(parts) = self.coframe.get(p) else {
            return out;
        };
        for (fi, f) in self.functions.iter().enumerate() {
            for (ci, v) in parts.iter().enumerate() {
                let form = DifferentialForm::new(&self.model, p, v.iter().map(|&(m, c)| (m, f.field.scale(c))));
                out.push(BasisForm {
                    function: fi,
                    coframe: ci,
                    form,
                });
            }
        }
        out
    }

    /// Points per transverse axis used for fitting.
    pub fn nodes(&self) -> usize {
        (2 * self.order + 2).max(12)
    }

    /// Product grid over the transverse coordinates; the remaining
    /// coordinates sit at a fixed generic position.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        let base: Vec<f64> = self.model.periods.iter().map(|p| 0.37 * p).collect();
        let sub: Vec<f64> = self.transverse.iter().map(|&a| self.model.periods[a]).collect();
        Grid::new(&sub, self.nodes())
            .points()
            .map(|q| {
                let mut p = base.clone();
                for (k, &a) in self.transverse.iter().enumerate() {
                    p[a] = q[k];
                }
                p
            })
            .collect()
    }

    fn complement_masks(&self, p: usize) -> Vec<u32> {
        let span_mask: u32 = self.span.iter().fold(0, |m, &i| m | (1 << i));
        subsets(self.model.dim, p).into_iter().filter(|m| m & span_mask == 0).collect()
    }

    /// Values of degree-`p` forms on the grid, restricted to complement
    /// components, one column per form.
    fn evaluation_matrix(&self, forms: &[DifferentialForm], p: usize, grid: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        self.evaluation_matrix_at(forms, p, grid, 0.0)
    }

    fn evaluation_matrix_at(&self, forms: &[DifferentialForm], p: usize, grid: &[Vec<f64>], t: f64) -> Result<DMatrix<f64>> {
        let masks = self.complement_masks(p);
        let all = subsets(self.model.dim, p);
        let rows_per = masks.len();
        let pos: Vec<usize> = masks.iter().map(|m| all.iter().position(|x| x == m).unwrap()).collect();
        let mut m = DMatrix::zeros(grid.len() * rows_per, forms.len());
        for (j, f) in forms.iter().enumerate() {
            for (g, pt) in grid.iter().enumerate() {
                let v = f.evaluate(pt, t)?;
                for (r, &k) in pos.iter().enumerate() {
                    m[(g * rows_per + r, j)] = v.comps[k];
                }
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ObstructionTerm {
    pub mode: Vec<i32>,
    pub kind: TrigKind,
    pub coframe: String,
    pub coefficient: f64,
}

#[derive(Debug, Clone)]
pub struct PrimitiveResult {
    pub order: usize,
    pub primitive: Option<DifferentialForm>,
    /// `‖d(Σ c_j b_j) − target‖ / ‖target‖` on the fitting grid.
    pub residual: f64,
    /// Sup of `d(primitive) − target` when a primitive was accepted.
    pub soundness: Option<f64>,
    /// Largest components of the unexplained part of the target.
    pub witness: Vec<ObstructionTerm>,
}

impl PrimitiveResult {
    pub fn found(&self) -> bool {
        self.primitive.is_some()
    }
}

fn rel_norm(r: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let nb = b.norm();
    if nb == 0.0 {
        r.norm()
    } else {
        r.norm() / nb
    }
}

/// Searches for a basic 1-form `β` in the truncated basic complex with
/// `dβ = target`. Requires a closed basic target.
pub fn find_basic_primitive(target: &DifferentialForm, basis: &SpectralBasis) -> Result<PrimitiveResult> {
    if target.depends_on_t() {
        return Err(Error::Unsupported("primitive target depends on t".into()));
    }
    basic_primitive_at(target, basis, 0.0)
}

/// Primitive search for the target frozen at parameter `t`.
pub fn basic_primitive_at(target: &DifferentialForm, basis: &SpectralBasis, t: f64) -> Result<PrimitiveResult> {
    if target.degree() != 2 {
        return Err(Error::Degree("primitive target must be a 2-form".into()));
    }
    let model = &basis.model;
    let grid = basis.grid();
    let sampling = Sampling::with_points(grid.clone(), vec![t]);
    if target.sup_norm(sampling.point_refs(), &[t])?.0 <= ZERO_TOL * 1e-3 {
        return Ok(PrimitiveResult {
            order: basis.order,
            primitive: Some(DifferentialForm::zero(model, 1)),
            residual: 0.0,
            soundness: Some(0.0),
            witness: Vec::new(),
        });
    }
    let probe = Sampling::with_points(halton_points(&model.periods, 16), vec![t]);
    let closed = target.d().sup_norm(probe.point_refs(), &[t])?.0;
    if closed > ZERO_TOL {
        return Err(Error::Structure(format!("primitive target is not closed (|d| = {closed:.3e})")));
    }
    let spec = FoliationSpec::FrameSpan(basis.span.clone());
    let br = is_basic(target, &spec, &probe)?;
    if !br.basic {
        return Err(Error::Structure(format!(
            "primitive target is not basic (interior {:.3e}, Lie {:.3e})",
            br.interior_residual, br.lie_residual
        )));
    }
    let ones = basis.forms(1);
    let d_ones: Vec<DifferentialForm> = ones.iter().map(|b| b.form.d()).collect();
    let a = basis.evaluation_matrix(&d_ones, 2, &grid)?;
    let b = basis.evaluation_matrix_at(std::slice::from_ref(target), 2, &grid, t)?.column(0).into_owned();
    let (coef, residual) = if a.ncols() == 0 {
        (DVector::zeros(0), rel_norm(&b, &b))
    } else {
        let (x, _) = lstsq(&a, &b, 1e-10 * a.amax().max(1.0));
        let r = &a * &x - &b;
        (x, rel_norm(&r, &b))
    };
    if residual <= PRIMITIVE_TOL {
        let mut prim = DifferentialForm::zero(model, 1);
        for (j, bf) in ones.iter().enumerate() {
            if coef[j].abs() > 1e-13 {
                prim = prim.add(&bf.form.scale(coef[j]))?;
            }
        }
        let err = prim.d().sub(target)?.sup_norm(sampling.point_refs(), &[t])?.0;
        return Ok(PrimitiveResult {
            order: basis.order,
            primitive: (err <= SOUNDNESS_TOL).then_some(prim),
            residual,
            soundness: Some(err),
            witness: Vec::new(),
        });
    }
    let r = if a.ncols() == 0 { b.clone() } else { &b - &a * &coef };
    let twos = basis.forms(2);
    let e2 = basis.evaluation_matrix(&twos.iter().map(|f| f.form.clone()).collect::<Vec<_>>(), 2, &grid)?;
    let mut witness = Vec::new();
    if e2.ncols() > 0 {
        let (w, _) = lstsq(&e2, &r, 1e-10);
        let mut order: Vec<usize> = (0..w.len()).filter(|&j| w[j].abs() > 1e-6).collect();
        order.sort_by(|&i, &j| w[j].abs().total_cmp(&w[i].abs()).then(i.cmp(&j)));
        for j in order.into_iter().take(8) {
            let f = &basis.functions[twos[j].function];
            witness.push(ObstructionTerm {
                mode: f.mode.clone(),
                kind: f.kind,
                coframe: coframe_label(&basis.coframe[2][twos[j].coframe]),
                coefficient: w[j],
            });
        }
    }
    Ok(PrimitiveResult {
        order: basis.order,
        primitive: None,
        residual,
        soundness: None,
        witness,
    })
}

/// Primitive search for a frame-span foliation at the given order.
pub fn basic_primitive(target: &DifferentialForm, spec: &FoliationSpec, order: usize) -> Result<PrimitiveResult> {
    find_basic_primitive(target, &SpectralBasis::new(target.model(), spec, order)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct H2Report {
    pub order: usize,
    pub dim_forms: usize,
    pub rank_d1: usize,
    pub rank_d2: usize,
    pub dim: usize,
}

fn numeric_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|s| **s > 1e-9 * max.max(1.0)).count()
}

/// Dimension of the truncated basic H²: closed basic 2-forms modulo
/// differentials of basic 1-forms.
pub fn basic_h2_dimension(basis: &SpectralBasis) -> Result<H2Report> {
    let grid = basis.grid();
    let ones: Vec<DifferentialForm> = basis.forms(1).into_iter().map(|b| b.form.d()).collect();
    let twos: Vec<DifferentialForm> = basis.forms(2).into_iter().map(|b| b.form).collect();
    let d_twos: Vec<DifferentialForm> = twos.iter().map(|f| f.d()).collect();
    let dim_forms = numeric_rank(&basis.evaluation_matrix(&twos, 2, &grid)?);
    let rank_d1 = numeric_rank(&basis.evaluation_matrix(&ones, 2, &grid)?);
    let rank_d2 = numeric_rank(&basis.evaluation_matrix(&d_twos, 3, &grid)?);
    Ok(H2Report {
        order: basis.order,
        dim_forms,
        rank_d1,
        rank_d2,
        dim: dim_forms - rank_d2 - rank_d1,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReebClassReport {
    /// Sup of `|dρ − ρ ∧ β|` for the pointwise solution.
    pub equation_residual: f64,
    pub beta_sup: f64,
    /// Relative residual of the leafwise primitive fit of `β`.
    pub leafwise_residual: f64,
    pub class_vanishes: bool,
}

fn wedge_matrix(rho: &FormValue) -> DMatrix<f64> {
    let n = rho.n;
    let cols: Vec<FormValue> = (0..n)
        .map(|i| rho.wedge(&FormValue::from_fn(n, 1, |m| f64::from(u8::from(m == 1 << i)))))
        .collect();
    let rows = cols[0].comps.len();
    DMatrix::from_fn(rows, n, |r, c| cols[c].comps[r])
}

fn pointwise_reeb_one_form(rho: &FormValue, drho: &FormValue) -> (DVector<f64>, f64) {
    let m = wedge_matrix(rho);
    let b = DVector::from_column_slice(&drho.comps);
    lstsq(&m, &b, 1e-12)
}

/// Solves `dρ = ρ ∧ β` pointwise and tests whether `β` is exact along the
/// leaves of `Ker ρ` within a Fourier truncation of the given order.
pub fn reeb_class(rho: &DifferentialForm, sampling: &Sampling, order: usize) -> Result<ReebClassReport> {
    let drho = rho.d();
    let model = rho.model().clone();
    let mut eq = 0.0f64;
    let mut beta_sup = 0.0f64;
    let mut witness = None;
    for p in &sampling.points {
        for &t in &sampling.ts {
            let (b, r) = pointwise_reeb_one_form(&rho.evaluate(p, t)?, &drho.evaluate(p, t)?);
            beta_sup = beta_sup.max(b.amax());
            if r > eq {
                eq = r;
                witness = Some(Witness {
                    point: p.clone(),
                    t,
                    value: r,
                });
            }
        }
    }
    if eq > ZERO_TOL {
        let w = witness.expect("residual recorded");
        return Err(Error::Structure(format!(
            "dρ = ρ∧β has no solution at {:?} (residual {:.3e}); the kernel of ρ is not integrable",
            w.point, w.value
        )));
    }
    let leafwise_residual = if beta_sup <= ZERO_TOL {
        0.0
    } else {
        let coords: Vec<usize> = (0..model.dim)
            .filter(|&a| rho.components().values().any(|f| f.depends_on(crate::expr::Var::coord(a))))
            .collect();
        let points = fit_points(&model, &coords, order);
        let t = sampling.ts[0];
        let mut betas = Vec::new();
        let mut kernels = Vec::new();
        for p in &points {
            let rv = rho.evaluate(p, t)?;
            betas.push(pointwise_reeb_one_form(&rv, &drho.evaluate(p, t)?).0);
            kernels.push(crate::rank::kernel_of_value(&rv));
        }
        leafwise_fit(&model, &coords, order, &points, &betas, &kernels, t)?
    };
    Ok(ReebClassReport {
        equation_residual: eq,
        beta_sup,
        leafwise_residual,
        class_vanishes: leafwise_residual <= PRIMITIVE_TOL,
    })
}

fn fit_points(model: &CoframeModel, coords: &[usize], order: usize) -> Vec<Vec<f64>> {
    let base: Vec<f64> = model.periods.iter().map(|p| 0.37 * p).collect();
    let sub: Vec<f64> = coords.iter().map(|&a| model.periods[a]).collect();
    Grid::new(&sub, (2 * order + 2).max(12))
        .points()
        .map(|q| {
            let mut p = base.clone();
            for (k, &a) in coords.iter().enumerate() {
                p[a] = q[k];
            }
            p
        })
        .collect()
}

/// Relative residual of the best fit `X(g) = β(X)` over kernel vectors `X`,
/// with `g` a trigonometric polynomial in `coords`.
fn leafwise_fit(
    model: &Arc<CoframeModel>,
    coords: &[usize],
    order: usize,
    points: &[Vec<f64>],
    betas: &[DVector<f64>],
    kernels: &[DMatrix<f64>],
    t: f64,
) -> Result<f64> {
    let funcs = trig_functions(model, coords, &half_modes(coords.len(), order));
    let grads: Vec<DifferentialForm> = funcs
        .iter()
        .map(|f| DifferentialForm::scalar(model, f.field.clone()).d())
        .collect();
    let rows: usize = kernels.iter().map(|k| k.ncols()).sum();
    let mut a = DMatrix::zeros(rows, grads.len());
    let mut b = DVector::zeros(rows);
    let mut r = 0;
    for (idx, p) in points.iter().enumerate() {
        let k = &kernels[idx];
        let gv: Vec<FormValue> = grads.iter().map(|g| g.evaluate(p, t)).collect::<Result<_>>()?;
        for c in 0..k.ncols() {
            for (j, g) in gv.iter().enumerate() {
                a[(r, j)] = (0..model.dim).map(|i| g.comps[i] * k[(i, c)]).sum();
            }
            b[r] = (0..model.dim).map(|i| betas[idx][i] * k[(i, c)]).sum();
            r += 1;
        }
    }
    if b.norm() <= ZERO_TOL {
        return Ok(0.0);
    }
    let (x, _) = lstsq(&a, &b, 1e-10);
    Ok(rel_norm(&(&a * x - &b), &b))
}

/// Leafwise exactness of a 1-form along a foliation: relative residual of
/// the best trigonometric fit `X(g) = β(X)` on tangent vectors.
pub fn leafwise_exact(beta: &DifferentialForm, spec: &FoliationSpec, order: usize) -> Result<(bool, f64)> {
    let model = beta.model().clone();
    let coords: Vec<usize> = (0..model.dim)
        .filter(|&a| beta.components().values().any(|f| f.depends_on(crate::expr::Var::coord(a))))
        .collect();
    let mut fit_coords: Vec<usize> = coords.clone();
    if let FoliationSpec::FrameSpan(s) = spec {
        for &i in s {
            if let Some(a) = model.frame_coordinate_direction(i) {
                if !fit_coords.contains(&a) {
                    fit_coords.push(a);
                }
            }
        }
        fit_coords.sort_unstable();
    }
    let points = fit_points(&model, &fit_coords, order);
    let mut betas = Vec::new();
    let mut kernels = Vec::new();
    for p in &points {
        betas.push(beta.evaluate(p, 0.0)?.vector());
        kernels.push(spec.tangent_basis(model.dim, p, 0.0)?);
    }
    let r = leafwise_fit(&model, &fit_coords, order, &points, &betas, &kernels, 0.0)?;
    Ok((r <= PRIMITIVE_TOL, r))
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodReport {
    /// 1-based coordinate pairs.
    pub cycles: Vec<(usize, usize)>,
    pub ts: Vec<f64>,
    /// `periods[c][k]` for cycle `c` at `ts[k]`.
    pub periods: Vec<Vec<f64>>,
    /// Largest spread of a period over the t samples.
    pub variation: f64,
}

/// Integrals of a 2-form over coordinate 2-tori through the origin. Cycles
/// along a coordinate whose lattice translation shears other coordinates
/// are rejected.
pub fn de_rham_periods(a: &DifferentialForm, cycles: &[(usize, usize)], ts: &[f64]) -> Result<PeriodReport> {
    if a.degree() != 2 {
        return Err(Error::Degree("periods need a 2-form".into()));
    }
    let model = a.model();
    let n = model.dim;
    let m = PERIOD_NODES;
    let mut periods = Vec::new();
    for &(x, y) in cycles {
        if x == y || x >= n || y >= n {
            return Err(Error::Dimension(format!("invalid cycle ({}, {})", x + 1, y + 1)));
        }
        if model.shears.iter().any(|s| s.coef != 0.0 && (s.shift == x || s.shift == y)) {
            return Err(Error::Structure(format!(
                "coordinate torus ({}, {}) is not closed in the model",
                model.coord_names[x], model.coord_names[y]
            )));
        }
        let (px, py) = (model.periods[x], model.periods[y]);
        let mut row = Vec::new();
        for &t in ts {
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    let mut p = vec![0.0; n];
                    p[x] = px * i as f64 / m as f64;
                    p[y] = py * j as f64 / m as f64;
                    s += a.coordinate_matrix(&p, t)?[(x, y)];
                }
            }
            row.push(s * px * py / (m * m) as f64);
        }
        periods.push(row);
    }
    let variation = periods
        .iter()
        .map(|r| {
            let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        })
        .fold(0.0, f64::max);
    Ok(PeriodReport {
        cycles: cycles.iter().map(|&(x, y)| (x + 1, y + 1)).collect(),
        ts: ts.to_vec(),
        periods,
        variation,
    })
}

/// Searches for a primitive in the Fourier-truncated ideal complex: 1-forms
/// `Σ_{i ∉ S} g_i e^i` with `g_i` trigonometric in all coordinates. Abelian
/// models only.
pub fn ideal_primitive_residual(target: &DifferentialForm, span: &[usize], order: usize) -> Result<f64> {
    let model = target.model().clone();
    if !model.is_abelian() || !model.shears.is_empty() {
        return Err(Error::Unsupported("ideal complex truncation needs an abelian model".into()));
    }
    let n = model.dim;
    let coords: Vec<usize> = (0..n).collect();
    let funcs = trig_functions(&model, &coords, &half_modes(n, order));
    let mut cols = Vec::new();
    for i in (0..n).filter(|i| !span.contains(i)) {
        for f in &funcs {
            cols.push(DifferentialForm::new(&model, 1, [(1u32 << i, f.field.clone())]).d());
        }
    }
    let grid: Vec<Vec<f64>> = Grid::new(&model.periods, 2 * order + 2).points().collect();
    let rows_per = subsets(n, 2).len();
    let mut a = DMatrix::zeros(grid.len() * rows_per, cols.len());
    let mut b = DVector::zeros(grid.len() * rows_per);
    for (g, p) in grid.iter().enumerate() {
        let tv = target.evaluate(p, 0.0)?;
        for r in 0..rows_per {
            b[g * rows_per + r] = tv.comps[r];
        }
    }
    for (j, c) in cols.iter().enumerate() {
        for (g, p) in grid.iter().enumerate() {
            let v = c.evaluate(p, 0.0)?;
            for r in 0..rows_per {
                a[(g * rows_per + r, j)] = v.comps[r];
            }
        }
    }
    if b.norm() == 0.0 {
        return Ok(0.0);
    }
    let (x, _) = lstsq(&a, &b, 1e-10);
    Ok(rel_norm(&(&a * x - &b), &b))
}

#[derive(Debug, Clone, Serialize)]
pub struct InclusionCase {
    pub label: String,
    pub basic_residual: f64,
    pub ideal_residual: f64,
    /// An ideal primitive implies a basic one.
    pub holds: bool,
}

/// Injectivity of basic H² into the cohomology of the ideal complex, tested
/// on closed basic targets: whenever the ideal truncation finds a
/// primitive, the basic truncation must find one too.
pub fn basic_to_ideal_injectivity(
    instances: &[(String, DifferentialForm, Vec<usize>)],
    order: usize,
) -> Result<Vec<InclusionCase>> {
    instances
        .iter()
        .map(|(label, target, span)| {
            let basic = basic_primitive(target, &FoliationSpec::FrameSpan(span.clone()), order)?;
            let ideal = ideal_primitive_residual(target, span, order)?;
            Ok(InclusionCase {
                label: label.clone(),
                basic_residual: basic.residual,
                ideal_residual: ideal,
                holds: ideal > PRIMITIVE_TOL || basic.residual <= PRIMITIVE_TOL,
            })
        })
        .collect()
}

/// Label of a component mask for reports.
pub fn component_label(mask: u32) -> String {
    mask_label(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t4() -> Arc<CoframeModel> {
        Arc::new(CoframeModel::torus(4))
    }

    fn fiber() -> FoliationSpec {
        FoliationSpec::FrameSpan(vec![2, 3])
    }

    fn small(m: &Arc<CoframeModel>) -> Sampling {
        Sampling::new(&m.periods, 4, 1)
    }

    #[test]
    fn ideal_membership() {
        let m = t4();
        let s = small(&m);
        let e = |i: &[usize]| DifferentialForm::basis(&m, i);
        assert!(is_in_ideal(&e(&[0, 1]), &fiber(), &s).unwrap().0);
        assert!(is_in_ideal(&e(&[0, 2]), &fiber(), &s).unwrap().0);
        let (ok, r) = is_in_ideal(&e(&[2, 3]), &fiber(), &s).unwrap();
        assert!(!ok);
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn basic_forms() {
        let m = t4();
        let s = small(&m);
        let a = DifferentialForm::parse(&m, 2, &[(vec![1, 2], "1 + 0.5*cos(th1)")]).unwrap();
        assert!(is_basic(&a, &fiber(), &s).unwrap().basic);
        let b = DifferentialForm::parse(&m, 2, &[(vec![1, 2], "cos(th3)")]).unwrap();
        assert!(!is_basic(&b, &fiber(), &s).unwrap().basic);
    }

    #[test]
    fn primitive_of_exact_target() {
        let m = t4();
        let target = DifferentialForm::parse(&m, 2, &[(vec![1, 2], "cos(th1)")]).unwrap();
        let r = basic_primitive(&target, &fiber(), 2).unwrap();
        assert!(r.residual < 1e-12, "{}", r.residual);
        assert!(r.soundness.unwrap() < 1e-12);
        let p = r.primitive.unwrap();
        assert!(p.d().sub(&target).unwrap().sup_norm([[0.3, 1.1, 0.2, 0.5].as_slice()], &[0.0]).unwrap().0 < 1e-12);
    }

    #[test]
    fn harmonic_target_has_no_primitive() {
        let m = t4();
        let target = DifferentialForm::basis(&m, &[0, 1]);
        let r = basic_primitive(&target, &fiber(), 2).unwrap();
        assert!(r.primitive.is_none());
        assert!((r.residual - 1.0).abs() < 1e-12);
        assert_eq!(r.witness[0].mode, vec![0, 0]);
        assert!((r.witness[0].coefficient - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fiber_h2_is_one() {
        let m = t4();
        for order in [1, 2, 3] {
            let b = SpectralBasis::new(&m, &fiber(), order).unwrap();
            assert_eq!(basic_h2_dimension(&b).unwrap().dim, 1);
        }
    }

    #[test]
    fn periods_of_basic_forms() {
        let m = t4();
        let a = DifferentialForm::basis(&m, &[0, 1]);
        let r = de_rham_periods(&a, &[(0, 1)], &[0.0]).unwrap();
        assert!((r.periods[0][0] - 4.0 * PI * PI).abs() < 1e-12);
        let b = DifferentialForm::parse(&m, 2, &[(vec![1, 2], "cos(th1)")]).unwrap();
        assert!(de_rham_periods(&b, &[(0, 1)], &[0.0]).unwrap().periods[0][0].abs() < 1e-12);
    }

    #[test]
    fn sheared_cycle_is_rejected() {
        let h = Arc::new(CoframeModel::heisenberg_circle());
        let a = DifferentialForm::basis(&h, &[1, 2]);
        assert!(de_rham_periods(&a, &[(1, 2)], &[0.0]).is_ok());
        assert!(matches!(de_rham_periods(&a, &[(0, 3)], &[0.0]), Err(Error::Structure(_))));
    }

    #[test]
    fn reeb_class_cases() {
        let m = Arc::new(CoframeModel::torus(3));
        let s = Sampling::new(&m.periods, 4, 1);
        let r = reeb_class(&DifferentialForm::basis(&m, &[2]), &s, 2).unwrap();
        assert!(r.class_vanishes && r.beta_sup == 0.0);
        let rho = DifferentialForm::parse(&m, 1, &[(vec![1], "exp(sin(th2))")]).unwrap();
        let r = reeb_class(&rho, &s, 3).unwrap();
        assert!(r.beta_sup > 0.5);
        assert!(r.class_vanishes, "{}", r.leafwise_residual);
        let h = Arc::new(CoframeModel::heisenberg_circle());
        let sh = Sampling::new(&h.periods, 3, 1);
        assert!(matches!(
            reeb_class(&DifferentialForm::basis(&h, &[2]), &sh, 2),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn leafwise_non_exact_form() {
        let m = Arc::new(CoframeModel::torus(3));
        let b = DifferentialForm::basis(&m, &[1]);
        let (exact, r) = leafwise_exact(&b, &FoliationSpec::FrameSpan(vec![1, 2]), 2).unwrap();
        assert!(!exact);
        assert!(r > 0.5);
    }

    #[test]
    fn inclusion_on_t4() {
        let m = t4();
        let cases = vec![
            (
                "exact".to_string(),
                DifferentialForm::parse(&m, 2, &[(vec![1, 2], "cos(th1)")]).unwrap(),
                vec![2, 3],
            ),
            ("harmonic".to_string(), DifferentialForm::basis(&m, &[0, 1]), vec![2, 3]),
        ];
        let r = basic_to_ideal_injectivity(&cases, 1).unwrap();
        assert!(r[0].ideal_residual < 1e-10 && r[0].basic_residual < 1e-10);
        assert!(r[1].ideal_residual > 0.5 && r[1].basic_residual > 0.5);
        assert!(r.iter().all(|c| c.holds));
    }
}

#[cfg(test)]
mod ghys_tests {
    use super::*;

    #[test]
    fn nil_obstruction() {
        let h = Arc::new(CoframeModel::heisenberg_circle());
        let spec = FoliationSpec::FrameSpan(vec![0, 3]);
        let target = DifferentialForm::parse(&h, 2, &[(vec![2, 3], "0.5*cos(y)")]).unwrap();
        for order in [2, 4] {
            let b = SpectralBasis::new(&h, &spec, order).unwrap();
            let r = find_basic_primitive(&target, &b).unwrap();
            assert!(r.primitive.is_none());
            assert!(r.residual >= 1.0 - 1e-9, "{}", r.residual);
            assert_eq!(basic_h2_dimension(&b).unwrap().dim, 2 * order + 1);
        }
    }
}
