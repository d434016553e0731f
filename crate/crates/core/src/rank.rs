//! Rank and class of forms, characteristic foliations, and validation of
//! the five geometric structures.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::algebra::{class_1form, interior_matrix, rank_2form, FormValue};
use crate::error::{Error, Result};
use crate::form::DifferentialForm;
use crate::linalg::null_space;
use crate::model::CoframeModel;
use crate::sample::Sampling;

/// Absolute tolerance on coframe components for vanishing conditions.
pub const ZERO_TOL: f64 = 1e-9;
/// A kernel counts as a frame span when every basis vector is this close to it.
pub const SPAN_TOL: f64 = 1e-8;
/// Minimum determinant of the stacked kernel bases of two complementary foliations.
pub const COMPLEMENT_TOL: f64 = 1e-6;
/// Allowed mismatch between values at lattice-equivalent points.
pub const LATTICE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub t: f64,
    pub value: f64,
}

/// Per-sample rank (2-forms) or class (1-forms) over a sampling.
#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub samples: usize,
    /// One entry per (point, t) in point-major order.
    pub values: Vec<usize>,
    pub min: usize,
    pub max: usize,
    pub constant_class: bool,
    /// Samples where a 1-form vanished.
    pub degenerate: usize,
    pub witness: Option<Witness>,
}

impl ClassReport {
    fn from_values(values: Vec<usize>, degenerate: usize, sampling: &Sampling) -> ClassReport {
        let min = values.iter().copied().min().unwrap_or(0);
        let max = values.iter().copied().max().unwrap_or(0);
        let witness = values.first().and_then(|&first| {
            values.iter().position(|&v| v != first).map(|k| {
                let nt = sampling.ts.len();
                Witness {
                    point: sampling.points[k / nt].clone(),
                    t: sampling.ts[k % nt],
                    value: values[k] as f64,
                }
            })
        });
        ClassReport {
            samples: values.len(),
            min,
            max,
            constant_class: min == max,
            degenerate,
            witness,
            values,
        }
    }
}

pub fn pointwise_rank_2form(eta: &DifferentialForm, p: &[f64], t: f64) -> Result<usize> {
    expect_degree(eta, 2)?;
    Ok(rank_2form(&eta.evaluate(p, t)?, ZERO_TOL))
}

/// Class of a 1-form at a point; the flag marks a vanishing form.
pub fn class_of_1form(alpha: &DifferentialForm, p: &[f64], t: f64) -> Result<(usize, bool)> {
    expect_degree(alpha, 1)?;
    let da = alpha.d();
    Ok(class_1form(&alpha.evaluate(p, t)?, &da.evaluate(p, t)?, ZERO_TOL))
}

pub fn rank_report(eta: &DifferentialForm, sampling: &Sampling) -> Result<ClassReport> {
    expect_degree(eta, 2)?;
    let mut values = Vec::with_capacity(sampling.points.len() * sampling.ts.len());
    for p in &sampling.points {
        for &t in &sampling.ts {
            values.push(rank_2form(&eta.evaluate(p, t)?, ZERO_TOL));
        }
    }
    Ok(ClassReport::from_values(values, 0, sampling))
}

pub fn class_report(alpha: &DifferentialForm, sampling: &Sampling) -> Result<ClassReport> {
    expect_degree(alpha, 1)?;
    let da = alpha.d();
    let mut values = Vec::new();
    let mut degenerate = 0;
    for p in &sampling.points {
        for &t in &sampling.ts {
            let (c, deg) = class_1form(&alpha.evaluate(p, t)?, &da.evaluate(p, t)?, ZERO_TOL);
            degenerate += usize::from(deg);
            values.push(c);
        }
    }
    Ok(ClassReport::from_values(values, degenerate, sampling))
}

fn expect_degree(a: &DifferentialForm, p: usize) -> Result<()> {
    if a.degree() == p {
        Ok(())
    } else {
        Err(Error::Degree(format!("expected a {p}-form, got degree {}", a.degree())))
    }
}

/// An integrable distribution: a span of frame fields (0-based indices) or
/// the kernel `{v : i_v ρ = 0}` of a form.
#[derive(Debug, Clone, PartialEq)]
pub enum FoliationSpec {
    FrameSpan(Vec<usize>),
    KernelOf { form: DifferentialForm, corank: usize },
}

impl FoliationSpec {
    /// Orthonormal basis of the tangent space at `(p, t)` in frame components.
    pub fn tangent_basis(&self, n: usize, p: &[f64], t: f64) -> Result<DMatrix<f64>> {
        match self {
            FoliationSpec::FrameSpan(s) => Ok(DMatrix::from_fn(n, s.len(), |i, j| f64::from(u8::from(i == s[j])))),
            FoliationSpec::KernelOf { form, .. } => Ok(kernel_of_value(&form.evaluate(p, t)?)),
        }
    }

    pub fn frame_span(&self) -> Option<&[usize]> {
        match self {
            FoliationSpec::FrameSpan(s) => Some(s),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            FoliationSpec::FrameSpan(s) => {
                let idx: Vec<String> = s.iter().map(|i| (i + 1).to_string()).collect();
                format!("span{{{}}}", idx.join(","))
            }
            FoliationSpec::KernelOf { form, corank } => {
                format!("kernel of a {}-form (corank {corank})", form.degree())
            }
        }
    }
}

/// `{v : i_v a = 0}` for a pointwise form.
pub fn kernel_of_value(a: &FormValue) -> DMatrix<f64> {
    if a.p == 0 {
        return DMatrix::identity(a.n, a.n);
    }
    null_space(&interior_matrix(a), ZERO_TOL)
}

/// Kernel bases per sample and the frame span they coincide with, if any.
#[derive(Debug, Clone)]
pub struct CharacteristicDistribution {
    pub spec: FoliationSpec,
    pub dim: usize,
    /// Per sample, point-major, `n × dim` orthonormal columns.
    pub kernels: Vec<DMatrix<f64>>,
    pub class: ClassReport,
}

/// Characteristic distribution of a 1-form (`Ker α ∩ Ker dα`) or a 2-form
/// (its kernel). Requires constant class on the sampling.
pub fn characteristic_distribution(a: &DifferentialForm, sampling: &Sampling) -> Result<CharacteristicDistribution> {
    let model = a.model().clone();
    let n = model.dim;
    match a.degree() {
        1 => {
            let class = class_report(a, sampling)?;
            if !class.constant_class {
                return Err(Error::NonConstantClass(Box::new(class)));
            }
            let c = class.min;
            let da = a.d();
            let mut kernels = Vec::new();
            for p in &sampling.points {
                for &t in &sampling.ts {
                    let av = a.evaluate(p, t)?;
                    let om = da.evaluate(p, t)?.matrix();
                    let mut stacked = DMatrix::zeros(n + 1, n);
                    for i in 0..n {
                        stacked[(0, i)] = av.comps[i];
                    }
                    stacked.view_mut((1, 0), (n, n)).copy_from(&om.transpose());
                    kernels.push(null_space(&stacked, ZERO_TOL));
                }
            }
            let rho = if c % 2 == 1 {
                a.wedge(&da.power(c / 2)?)?
            } else {
                da.power(c / 2)?
            };
            finish_distribution(&model, kernels, rho, class)
        }
        2 => {
            let class = rank_report(a, sampling)?;
            if !class.constant_class {
                return Err(Error::NonConstantClass(Box::new(class)));
            }
            let mut kernels = Vec::new();
            for p in &sampling.points {
                for &t in &sampling.ts {
                    kernels.push(null_space(&a.evaluate(p, t)?.matrix(), ZERO_TOL));
                }
            }
            finish_distribution(&model, kernels, a.clone(), class)
        }
        d => Err(Error::Unsupported(format!("characteristic distribution of a {d}-form"))),
    }
}

/// Kernel distribution `{v : i_v ρ = 0}` over the sampling. Fails when the
/// kernel dimension varies.
pub fn kernel_distribution(rho: &DifferentialForm, sampling: &Sampling) -> Result<CharacteristicDistribution> {
    let mut kernels = Vec::new();
    let mut dims = Vec::new();
    for p in &sampling.points {
        for &t in &sampling.ts {
            let k = kernel_of_value(&rho.evaluate(p, t)?);
            dims.push(k.ncols());
            kernels.push(k);
        }
    }
    let class = ClassReport::from_values(dims, 0, sampling);
    if !class.constant_class {
        return Err(Error::NonConstantClass(Box::new(class)));
    }
    finish_distribution(rho.model(), kernels, rho.clone(), class)
}

fn finish_distribution(
    model: &Arc<CoframeModel>,
    kernels: Vec<DMatrix<f64>>,
    rho: DifferentialForm,
    class: ClassReport,
) -> Result<CharacteristicDistribution> {
    let n = model.dim;
    let dim = kernels.first().map(|k| k.ncols()).unwrap_or(n);
    if kernels.iter().any(|k| k.ncols() != dim) {
        return Err(Error::Dimension("kernel dimension varies over the grid".into()));
    }
    let spec = match detect_frame_span(&kernels, n, dim) {
        Some(s) => FoliationSpec::FrameSpan(s),
        None => FoliationSpec::KernelOf {
            form: rho,
            corank: n - dim,
        },
    };
    Ok(CharacteristicDistribution {
        spec,
        dim,
        kernels,
        class,
    })
}

fn detect_frame_span(kernels: &[DMatrix<f64>], n: usize, dim: usize) -> Option<Vec<usize>> {
    let mut weight = vec![0.0f64; n];
    for k in kernels {
        for i in 0..n {
            for j in 0..k.ncols() {
                weight[i] = weight[i].max(k[(i, j)].abs());
            }
        }
    }
    let span: Vec<usize> = (0..n).filter(|&i| weight[i] > SPAN_TOL).collect();
    (span.len() == dim).then_some(span)
}

#[derive(Debug, Clone, Serialize)]
pub struct FrobeniusReport {
    pub integrable: bool,
    pub worst_residual: f64,
    pub witness: Option<Witness>,
}

/// Integrability of a distribution. Frame spans use the structure constants
/// exactly; kernels of `ρ` use `i_v i_u dρ = 0` for kernel vectors `u, v`.
pub fn frobenius_check(spec: &FoliationSpec, model: &Arc<CoframeModel>, sampling: &Sampling) -> Result<FrobeniusReport> {
    match spec {
        FoliationSpec::FrameSpan(s) => {
            let mut worst = 0.0f64;
            for &i in s {
                for &j in s {
                    for k in (0..model.dim).filter(|k| !s.contains(k)) {
                        worst = worst.max(model.c(k, i, j).abs());
                    }
                }
            }
            Ok(FrobeniusReport {
                integrable: worst == 0.0,
                worst_residual: worst,
                witness: None,
            })
        }
        FoliationSpec::KernelOf { form, .. } => {
            let drho = form.d();
            let mut worst = 0.0f64;
            let mut witness = None;
            let mut dim = None;
            for p in &sampling.points {
                for &t in &sampling.ts {
                    let k = kernel_of_value(&form.evaluate(p, t)?);
                    if *dim.get_or_insert(k.ncols()) != k.ncols() {
                        return Err(Error::Dimension("kernel dimension varies over the grid".into()));
                    }
                    let dv = drho.evaluate(p, t)?;
                    for a in 0..k.ncols() {
                        let u: Vec<f64> = k.column(a).iter().copied().collect();
                        let iu = dv.interior(&u);
                        for b in a + 1..k.ncols() {
                            let v: Vec<f64> = k.column(b).iter().copied().collect();
                            let r = iu.interior(&v).sup();
                            if r > worst {
                                worst = r;
                                witness = Some(Witness {
                                    point: p.clone(),
                                    t,
                                    value: r,
                                });
                            }
                        }
                    }
                }
            }
            Ok(FrobeniusReport {
                integrable: worst <= ZERO_TOL,
                worst_residual: worst,
                witness,
            })
        }
    }
}

/// The five structures with their types.
#[derive(Debug, Clone)]
pub enum GeometricStructure {
    /// Closed 2-forms with `ω^k ∧ η^l` a volume form, `ω^{k+1} = η^{l+1} = 0`.
    SymplecticPair { omega: DifferentialForm, eta: DifferentialForm, k: usize, l: usize },
    ContactPair { alpha: DifferentialForm, beta: DifferentialForm, h: usize, k: usize },
    ContactSymplecticPair { alpha: DifferentialForm, eta: DifferentialForm, h: usize, k: usize },
    ContactSymplecticStructure { alpha: DifferentialForm, eta: DifferentialForm, h: usize },
    ContactContactStructure { alpha: DifferentialForm, beta: DifferentialForm, h: usize },
}

impl GeometricStructure {
    pub fn kind(&self) -> &'static str {
        match self {
            GeometricStructure::SymplecticPair { .. } => "symplectic_pair",
            GeometricStructure::ContactPair { .. } => "contact_pair",
            GeometricStructure::ContactSymplecticPair { .. } => "contact_symplectic_pair",
            GeometricStructure::ContactSymplecticStructure { .. } => "contact_symplectic_structure",
            GeometricStructure::ContactContactStructure { .. } => "contact_contact_structure",
        }
    }

    pub fn forms(&self) -> [&DifferentialForm; 2] {
        match self {
            GeometricStructure::SymplecticPair { omega, eta, .. } => [omega, eta],
            GeometricStructure::ContactPair { alpha, beta, .. }
            | GeometricStructure::ContactContactStructure { alpha, beta, .. } => [alpha, beta],
            GeometricStructure::ContactSymplecticPair { alpha, eta, .. }
            | GeometricStructure::ContactSymplecticStructure { alpha, eta, .. } => [alpha, eta],
        }
    }

    pub fn model(&self) -> &Arc<CoframeModel> {
        self.forms()[0].model()
    }

    /// The type `(h, k)`; for the hyperplane-field structures the second entry
    /// is derived from the dimension.
    pub fn type_pair(&self) -> (usize, usize) {
        let n = self.model().dim;
        match *self {
            GeometricStructure::SymplecticPair { k, l, .. } => (k, l),
            GeometricStructure::ContactPair { h, k, .. } | GeometricStructure::ContactSymplecticPair { h, k, .. } => (h, k),
            GeometricStructure::ContactSymplecticStructure { h, .. } => (h, ((n - 1) / 2).saturating_sub(h)),
            GeometricStructure::ContactContactStructure { h, .. } => (h, (n.saturating_sub(2) / 2).saturating_sub(h)),
        }
    }

    /// Degree and dimension bookkeeping for the variant.
    pub fn check_dimension(&self) -> Result<()> {
        let [a, b] = self.forms();
        if a.model() != b.model() && **a.model() != **b.model() {
            return Err(Error::ModelMismatch);
        }
        let n = self.model().dim;
        let (want_a, want_b) = match self {
            GeometricStructure::SymplecticPair { .. } => (2, 2),
            GeometricStructure::ContactPair { .. } | GeometricStructure::ContactContactStructure { .. } => (1, 1),
            _ => (1, 2),
        };
        if a.degree() != want_a || b.degree() != want_b {
            return Err(Error::Degree(format!(
                "{} needs forms of degrees ({want_a}, {want_b}), got ({}, {})",
                self.kind(),
                a.degree(),
                b.degree()
            )));
        }
        let (h, k) = self.type_pair();
        let ok = match self {
            GeometricStructure::SymplecticPair { .. } => 2 * h + 2 * k == n,
            GeometricStructure::ContactPair { .. } => 2 * h + 2 * k + 2 == n,
            GeometricStructure::ContactSymplecticPair { .. } => 2 * h + 2 * k + 1 == n,
            GeometricStructure::ContactSymplecticStructure { h, .. } => n % 2 == 1 && 2 * h < n,
            GeometricStructure::ContactContactStructure { h, .. } => n % 2 == 0 && n >= 2 && 2 * h + 2 <= n,
        };
        if !ok {
            return Err(Error::Dimension(format!(
                "{} of type ({h}, {k}) does not fit a {n}-dimensional model",
                self.kind()
            )));
        }
        Ok(())
    }

    /// Defining forms `(ρ_F, ρ_G)` whose kernels are the two characteristic
    /// foliations `F` and `G`.
    pub fn foliation_forms(&self) -> Result<(DifferentialForm, DifferentialForm)> {
        let (h, k) = self.type_pair();
        let char_form = |a: &DifferentialForm, h: usize| -> Result<DifferentialForm> { a.wedge(&a.d().power(h)?) };
        Ok(match self {
            GeometricStructure::SymplecticPair { omega, eta, .. } => (eta.clone(), omega.clone()),
            GeometricStructure::ContactPair { alpha, beta, .. }
            | GeometricStructure::ContactContactStructure { alpha, beta, .. } => {
                (char_form(alpha, h)?, char_form(beta, k)?)
            }
            GeometricStructure::ContactSymplecticPair { alpha, eta, .. }
            | GeometricStructure::ContactSymplecticStructure { alpha, eta, .. } => {
                (eta.clone(), char_form(alpha, h)?)
            }
        })
    }

    /// `(name, form, must vanish)` for every defining condition.
    fn conditions(&self) -> Result<Vec<(&'static str, DifferentialForm, bool)>> {
        let (h, k) = self.type_pair();
        let mut out = Vec::new();
        match self {
            GeometricStructure::SymplecticPair { omega, eta, .. } => {
                out.push(("d_omega_zero", omega.d(), true));
                out.push(("d_eta_zero", eta.d(), true));
                out.push(("volume", omega.power(h)?.wedge(&eta.power(k)?)?, false));
                out.push(("omega_power_vanishes", omega.power(h + 1)?, true));
                out.push(("eta_power_vanishes", eta.power(k + 1)?, true));
            }
            GeometricStructure::ContactPair { alpha, beta, .. } => {
                let (da, db) = (alpha.d(), beta.d());
                let vol = alpha.wedge(&da.power(h)?)?.wedge(beta)?.wedge(&db.power(k)?)?;
                out.push(("volume", vol, false));
                out.push(("d_alpha_power_vanishes", da.power(h + 1)?, true));
                out.push(("d_beta_power_vanishes", db.power(k + 1)?, true));
            }
            GeometricStructure::ContactSymplecticPair { alpha, eta, .. } => {
                let da = alpha.d();
                out.push(("d_eta_zero", eta.d(), true));
                out.push(("volume", alpha.wedge(&da.power(h)?)?.wedge(&eta.power(k)?)?, false));
                out.push(("d_alpha_power_vanishes", da.power(h + 1)?, true));
                out.push(("eta_power_vanishes", eta.power(k + 1)?, true));
            }
            GeometricStructure::ContactSymplecticStructure { alpha, eta, .. } => {
                let da = alpha.d();
                out.push(("d_eta_zero", eta.d(), true));
                out.push(("volume", alpha.wedge(&da.power(h)?)?.wedge(&eta.power(k)?)?, false));
                out.push(("alpha_wedge_d_alpha_power_vanishes", alpha.wedge(&da.power(h + 1)?)?, true));
                out.push(("eta_power_vanishes", eta.power(k + 1)?, true));
            }
            GeometricStructure::ContactContactStructure { alpha, beta, .. } => {
                let (da, db) = (alpha.d(), beta.d());
                let vol = alpha.wedge(&da.power(h)?)?.wedge(beta)?.wedge(&db.power(k)?)?;
                out.push(("volume", vol, false));
                out.push(("alpha_wedge_d_alpha_power_vanishes", alpha.wedge(&da.power(h + 1)?)?, true));
                out.push(("beta_wedge_d_beta_power_vanishes", beta.wedge(&db.power(k + 1)?)?, true));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionResult {
    pub name: String,
    /// `true` for the defining conditions, `false` for derived checks.
    pub defining: bool,
    pub passed: bool,
    /// Sup-norm for vanishing conditions, minimum |coefficient| for the
    /// volume, worst residual for derived checks.
    pub value: f64,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FoliationSummary {
    pub name: String,
    pub dim: Option<usize>,
    /// 1-based frame indices when the foliation is a frame span.
    pub frame_span: Option<Vec<usize>>,
    pub integrable: Option<bool>,
    pub frobenius_residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub structure: String,
    pub type_hk: (usize, usize),
    pub grid_points_per_axis: usize,
    pub samples: usize,
    pub t_samples: Vec<f64>,
    pub conditions: Vec<ConditionResult>,
    pub foliations: Vec<FoliationSummary>,
    /// Minimum |volume coefficient| over the sampling.
    pub volume_margin: f64,
    pub valid: bool,
    /// Conditions are certified on the sampling only.
    pub certification: String,
}

impl ValidationReport {
    pub fn failed(&self) -> Vec<&str> {
        self.conditions.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }

    pub fn failed_defining(&self) -> Vec<&str> {
        self.conditions
            .iter()
            .filter(|c| c.defining && !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

fn sup_sweep(a: &DifferentialForm, sampling: &Sampling) -> Result<(f64, Option<Witness>)> {
    let (v, at) = a.sup_norm(sampling.point_refs(), &sampling.ts)?;
    Ok((v, at.map(|(point, t)| Witness { point, t, value: v })))
}

fn min_top_sweep(a: &DifferentialForm, sampling: &Sampling) -> Result<(f64, Option<Witness>)> {
    let mut best = f64::INFINITY;
    let mut witness = None;
    for p in &sampling.points {
        for &t in &sampling.ts {
            let v = a.evaluate(p, t)?.top().abs();
            if v < best {
                best = v;
                witness = Some(Witness {
                    point: p.clone(),
                    t,
                    value: v,
                });
            }
        }
    }
    Ok((best, witness))
}

/// Worst mismatch of `a` between grid points on the lower boundary of each
/// coordinate and their lattice images.
pub fn lattice_invariance(a: &DifferentialForm, sampling: &Sampling) -> Result<(f64, Option<Witness>)> {
    let model = a.model();
    let mut worst = 0.0f64;
    let mut witness = None;
    for axis in 0..model.dim {
        for p in sampling.points.iter().filter(|p| p[axis] == 0.0) {
            let q = model.lattice_generator(axis, p);
            for &t in &sampling.ts {
                let d = a.evaluate(p, t)?.sub(&a.evaluate(&q, t)?).sup();
                if d > worst {
                    worst = d;
                    witness = Some(Witness {
                        point: p.clone(),
                        t,
                        value: d,
                    });
                }
            }
        }
    }
    Ok((worst, witness))
}

/// Both characteristic foliations of a structure, `(F, G)`.
pub fn structure_foliations(
    s: &GeometricStructure,
    sampling: &Sampling,
) -> Result<(CharacteristicDistribution, CharacteristicDistribution)> {
    let (rf, rg) = s.foliation_forms()?;
    Ok((kernel_distribution(&rf, sampling)?, kernel_distribution(&rg, sampling)?))
}

/// Checks the defining conditions of `s` on the sampling, extracts both
/// characteristic foliations, runs the Frobenius check on each and tests
/// complementarity and lattice invariance.
pub fn validate_structure(s: &GeometricStructure, sampling: &Sampling) -> Result<ValidationReport> {
    s.check_dimension()?;
    let mut conditions = Vec::new();
    let mut volume_margin = f64::INFINITY;
    for (name, form, vanishes) in s.conditions()? {
        if vanishes {
            let (v, w) = sup_sweep(&form, sampling)?;
            conditions.push(ConditionResult {
                name: name.into(),
                defining: true,
                passed: v <= ZERO_TOL,
                value: v,
                witness: w.filter(|_| v > ZERO_TOL),
            });
        } else {
            let (v, w) = min_top_sweep(&form, sampling)?;
            volume_margin = v;
            conditions.push(ConditionResult {
                name: name.into(),
                defining: true,
                passed: v > ZERO_TOL,
                value: v,
                witness: w.filter(|_| v <= ZERO_TOL),
            });
        }
    }

    let model = s.model().clone();
    let (rf, rg) = s.foliation_forms()?;
    let mut foliations = Vec::new();
    let mut kernels: Vec<Option<Vec<DMatrix<f64>>>> = Vec::new();
    for (label, rho) in [("F", &rf), ("G", &rg)] {
        match kernel_distribution(rho, sampling) {
            Ok(dist) => {
                let fro = frobenius_check(&dist.spec, &model, sampling)?;
                conditions.push(ConditionResult {
                    name: format!("foliation_{label}_constant_rank"),
                    defining: false,
                    passed: true,
                    value: dist.dim as f64,
                    witness: None,
                });
                conditions.push(ConditionResult {
                    name: format!("frobenius_{label}"),
                    defining: false,
                    passed: fro.integrable,
                    value: fro.worst_residual,
                    witness: fro.witness.clone(),
                });
                foliations.push(FoliationSummary {
                    name: label.into(),
                    dim: Some(dist.dim),
                    frame_span: dist.spec.frame_span().map(|s| s.iter().map(|i| i + 1).collect()),
                    integrable: Some(fro.integrable),
                    frobenius_residual: Some(fro.worst_residual),
                });
                kernels.push(Some(dist.kernels));
            }
            Err(Error::NonConstantClass(rep)) => {
                conditions.push(ConditionResult {
                    name: format!("foliation_{label}_constant_rank"),
                    defining: false,
                    passed: false,
                    value: rep.max as f64 - rep.min as f64,
                    witness: rep.witness.clone(),
                });
                foliations.push(FoliationSummary {
                    name: label.into(),
                    dim: None,
                    frame_span: None,
                    integrable: None,
                    frobenius_residual: None,
                });
                kernels.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    if let (Some(kf), Some(kg)) = (&kernels[0], &kernels[1]) {
        let nt = sampling.ts.len();
        let mut worst = f64::INFINITY;
        let mut witness = None;
        for (idx, (a, b)) in kf.iter().zip(kg.iter()).enumerate() {
            let det = if a.ncols() + b.ncols() == model.dim {
                let mut m = DMatrix::zeros(model.dim, model.dim);
                m.view_mut((0, 0), (model.dim, a.ncols())).copy_from(a);
                m.view_mut((0, a.ncols()), (model.dim, b.ncols())).copy_from(b);
                m.determinant().abs()
            } else {
                0.0
            };
            if det < worst {
                worst = det;
                witness = Some(Witness {
                    point: sampling.points[idx / nt].clone(),
                    t: sampling.ts[idx % nt],
                    value: det,
                });
            }
        }
        conditions.push(ConditionResult {
            name: "complementary".into(),
            defining: false,
            passed: worst >= COMPLEMENT_TOL,
            value: worst,
            witness: witness.filter(|_| worst < COMPLEMENT_TOL),
        });
    }
    let mut lattice = 0.0f64;
    let mut lattice_witness = None;
    for a in s.forms() {
        let (v, w) = lattice_invariance(a, sampling)?;
        if v > lattice {
            lattice = v;
            lattice_witness = w;
        }
    }
    conditions.push(ConditionResult {
        name: "lattice_invariant".into(),
        defining: false,
        passed: lattice <= LATTICE_TOL,
        value: lattice,
        witness: lattice_witness,
    });
    let valid = conditions.iter().all(|c| c.passed);
    Ok(ValidationReport {
        structure: s.kind().into(),
        type_hk: s.type_pair(),
        grid_points_per_axis: sampling.k,
        samples: sampling.points.len() * sampling.ts.len(),
        t_samples: sampling.ts.clone(),
        conditions,
        foliations,
        volume_margin,
        valid,
        certification: "sampled grid".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(n: usize) -> Arc<CoframeModel> {
        Arc::new(CoframeModel::torus(n))
    }

    fn small(m: &Arc<CoframeModel>) -> Sampling {
        Sampling::new(&m.periods, 5, 1)
    }

    #[test]
    fn ranks() {
        let m = t(4);
        let e12 = DifferentialForm::basis(&m, &[0, 1]);
        let e34 = DifferentialForm::basis(&m, &[2, 3]);
        assert_eq!(pointwise_rank_2form(&e12, &[0.0; 4], 0.0).unwrap(), 2);
        assert_eq!(pointwise_rank_2form(&e12.add(&e34).unwrap(), &[0.0; 4], 0.0).unwrap(), 4);
    }

    #[test]
    fn classes() {
        let m = t(3);
        let e3 = DifferentialForm::basis(&m, &[2]);
        assert_eq!(class_of_1form(&e3, &[0.1, 0.2, 0.3], 0.0).unwrap(), (1, false));
        let a = DifferentialForm::parse(&m, 1, &[(vec![1], "cos(th3)"), (vec![2], "sin(th3)")]).unwrap();
        assert_eq!(class_of_1form(&a, &[0.1, 0.2, 0.3], 0.0).unwrap(), (3, false));
        let h = Arc::new(CoframeModel::heisenberg_circle());
        let e3h = DifferentialForm::basis(&h, &[2]);
        assert_eq!(class_of_1form(&e3h, &[0.1, 0.2, 0.3, 0.4], 0.0).unwrap(), (3, false));
    }

    #[test]
    fn characteristic_span_of_e12() {
        let m = t(4);
        let e12 = DifferentialForm::basis(&m, &[0, 1]);
        let c = characteristic_distribution(&e12, &small(&m)).unwrap();
        assert_eq!(c.spec, FoliationSpec::FrameSpan(vec![2, 3]));
    }

    #[test]
    fn contact_form_has_trivial_characteristic_space() {
        let m = t(3);
        let a = DifferentialForm::parse(&m, 1, &[(vec![1], "cos(th3)"), (vec![2], "sin(th3)")]).unwrap();
        let c = characteristic_distribution(&a, &small(&m)).unwrap();
        assert_eq!(c.dim, 0);
        assert_eq!(c.spec, FoliationSpec::FrameSpan(vec![]));
    }

    #[test]
    fn non_constant_class_is_an_error() {
        let m = t(3);
        let a = DifferentialForm::parse(&m, 1, &[(vec![1], "sin(th2)")]).unwrap();
        assert!(matches!(
            characteristic_distribution(&a, &small(&m)),
            Err(Error::NonConstantClass(_))
        ));
    }

    #[test]
    fn frobenius_on_heisenberg() {
        let h = Arc::new(CoframeModel::heisenberg_circle());
        let s = small(&h);
        let r = frobenius_check(&FoliationSpec::FrameSpan(vec![0, 1]), &h, &s).unwrap();
        assert!(!r.integrable);
        assert_eq!(r.worst_residual, 1.0);
        let r = frobenius_check(&FoliationSpec::FrameSpan(vec![0, 3]), &h, &s).unwrap();
        assert!(r.integrable);
    }

    #[test]
    fn frobenius_kernel_forms() {
        let m = t(4);
        let s = small(&m);
        let k = FoliationSpec::KernelOf {
            form: DifferentialForm::basis(&m, &[0, 1]),
            corank: 2,
        };
        assert!(frobenius_check(&k, &m, &s).unwrap().integrable);
        // kernel of the contact form cos e^1 + sin e^2 on T^3 is not integrable
        let m3 = t(3);
        let a = DifferentialForm::parse(&m3, 1, &[(vec![1], "cos(th3)"), (vec![2], "sin(th3)")]).unwrap();
        let k = FoliationSpec::KernelOf { form: a, corank: 1 };
        assert!(!frobenius_check(&k, &m3, &small(&m3)).unwrap().integrable);
    }

    #[test]
    fn validates_cs_pair_on_t3() {
        let m = t(3);
        let s = GeometricStructure::ContactSymplecticPair {
            alpha: DifferentialForm::basis(&m, &[2]),
            eta: DifferentialForm::basis(&m, &[0, 1]),
            h: 0,
            k: 1,
        };
        let r = validate_structure(&s, &small(&m)).unwrap();
        assert!(r.valid, "{:?}", r.failed());
    }

    #[test]
    fn dimension_parity_is_checked() {
        let m = t(3);
        let s = GeometricStructure::ContactPair {
            alpha: DifferentialForm::basis(&m, &[0]),
            beta: DifferentialForm::basis(&m, &[1]),
            h: 0,
            k: 0,
        };
        assert!(matches!(validate_structure(&s, &small(&m)), Err(Error::Dimension(_))));
    }
}
