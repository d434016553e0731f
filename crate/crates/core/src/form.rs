//! Differential forms and vector fields in coframe components.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;

use crate::algebra::{indices_mask, mask_indices, subsets, wedge_sign, FormValue};
use crate::error::{Error, Result};
use crate::expr::{dual_vars_at, parse_field, vars_at, Dual, EvalError, ScalarField, Tape, Var};
use crate::model::CoframeModel;

fn same_model(a: &Arc<CoframeModel>, b: &Arc<CoframeModel>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Component label such as `(1,2)` for a mask, 1-based.
pub fn mask_label(mask: u32) -> String {
    let idx: Vec<String> = mask_indices(mask).iter().map(|i| (i + 1).to_string()).collect();
    format!("({})", idx.join(","))
}

/// Applies the frame field `X_i` to a scalar field.
pub fn frame_derivative(model: &CoframeModel, i: usize, f: &ScalarField) -> ScalarField {
    let mut acc = ScalarField::zero();
    for (a, fa) in model.frame[i].iter().enumerate() {
        if fa.is_zero() || !f.depends_on(Var::coord(a)) {
            continue;
        }
        acc = acc + fa * &f.derivative(Var::coord(a));
    }
    acc
}

#[derive(Clone)]
pub struct DifferentialForm {
    model: Arc<CoframeModel>,
    degree: usize,
    comps: BTreeMap<u32, ScalarField>,
    tape: OnceLock<Arc<Tape>>,
}

impl std::fmt::Debug for DifferentialForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .comps
            .iter()
            .map(|(m, c)| format!("{}: {}", mask_label(*m), c.to_source(&self.model.coord_names)))
            .collect();
        write!(f, "{}-form {{{}}}", self.degree, parts.join(", "))
    }
}

impl PartialEq for DifferentialForm {
    fn eq(&self, o: &Self) -> bool {
        same_model(&self.model, &o.model) && self.degree == o.degree && self.comps == o.comps
    }
}

impl DifferentialForm {
    pub fn new(
        model: &Arc<CoframeModel>,
        degree: usize,
        comps: impl IntoIterator<Item = (u32, ScalarField)>,
    ) -> DifferentialForm {
        let mut map = BTreeMap::new();
        if degree <= model.dim {
            for (m, f) in comps {
                assert_eq!(m.count_ones() as usize, degree, "component degree mismatch");
                assert!(m < (1 << model.dim), "component index out of range");
                if !f.is_zero() {
                    map.insert(m, f);
                }
            }
        }
        DifferentialForm {
            model: model.clone(),
            degree,
            comps: map,
            tape: OnceLock::new(),
        }
    }

    pub fn zero(model: &Arc<CoframeModel>, degree: usize) -> DifferentialForm {
        DifferentialForm::new(model, degree, [])
    }

    pub fn scalar(model: &Arc<CoframeModel>, f: ScalarField) -> DifferentialForm {
        DifferentialForm::new(model, 0, [(0, f)])
    }

    /// `e^{i1} ∧ ... ∧ e^{ip}` for strictly increasing 0-based indices.
    pub fn basis(model: &Arc<CoframeModel>, idx: &[usize]) -> DifferentialForm {
        assert!(idx.windows(2).all(|w| w[0] < w[1]), "indices must increase");
        DifferentialForm::new(model, idx.len(), [(indices_mask(idx), ScalarField::one())])
    }

    /// Builds a form from 1-based increasing index tuples and expression sources.
    pub fn parse(model: &Arc<CoframeModel>, degree: usize, comps: &[(Vec<usize>, &str)]) -> Result<DifferentialForm> {
        let mut out = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for (idx, src) in comps {
            check_indices(model.dim, degree, idx)?;
            let mask = idx.iter().fold(0u32, |m, i| m | (1 << (i - 1)));
            if !seen.insert(mask) {
                return Err(Error::Scenario(format!("duplicate component {}", mask_label(mask))));
            }
            out.push((mask, parse_field(src, &model.coord_names)?));
        }
        Ok(DifferentialForm::new(model, degree, out))
    }

    pub fn model(&self) -> &Arc<CoframeModel> {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &BTreeMap<u32, ScalarField> {
        &self.comps
    }

    pub fn component(&self, mask: u32) -> ScalarField {
        self.comps.get(&mask).cloned().unwrap_or_else(ScalarField::zero)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn depends_on_t(&self) -> bool {
        self.comps.values().any(|f| f.depends_on(Var::T))
    }

    /// Component sources keyed by 1-based index tuples.
    pub fn to_sources(&self) -> Vec<(Vec<usize>, String)> {
        self.comps
            .iter()
            .map(|(m, f)| {
                (
                    mask_indices(*m).iter().map(|i| i + 1).collect(),
                    f.to_source(&self.model.coord_names),
                )
            })
            .collect()
    }

    fn check_model(&self, o: &DifferentialForm) -> Result<()> {
        if same_model(&self.model, &o.model) {
            Ok(())
        } else {
            Err(Error::ModelMismatch)
        }
    }

    fn map(&self, f: impl Fn(&ScalarField) -> ScalarField) -> DifferentialForm {
        DifferentialForm::new(&self.model, self.degree, self.comps.iter().map(|(m, c)| (*m, f(c))))
    }

    pub fn add(&self, o: &DifferentialForm) -> Result<DifferentialForm> {
        self.check_model(o)?;
        if self.degree != o.degree {
            return Err(Error::Degree(format!("cannot add degrees {} and {}", self.degree, o.degree)));
        }
        let mut map = self.comps.clone();
        for (m, f) in &o.comps {
            let e = map.entry(*m).or_insert_with(ScalarField::zero);
            *e = &*e + f;
        }
        Ok(DifferentialForm::new(&self.model, self.degree, map))
    }

    pub fn sub(&self, o: &DifferentialForm) -> Result<DifferentialForm> {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> DifferentialForm {
        self.map(|f| f.scale(c))
    }

    pub fn mul_field(&self, g: &ScalarField) -> DifferentialForm {
        self.map(|f| f * g)
    }

    pub fn wedge(&self, o: &DifferentialForm) -> Result<DifferentialForm> {
        self.check_model(o)?;
        let q = self.degree + o.degree;
        let mut map: BTreeMap<u32, ScalarField> = BTreeMap::new();
        if q <= self.dim() {
            for (ma, fa) in &self.comps {
                for (mb, fb) in &o.comps {
                    if ma & mb != 0 {
                        continue;
                    }
                    let term = (fa * fb).scale(wedge_sign(*ma, *mb));
                    let e = map.entry(ma | mb).or_insert_with(ScalarField::zero);
                    *e = &*e + &term;
                }
            }
        }
        Ok(DifferentialForm::new(&self.model, q, map))
    }

    /// `k`-fold wedge power (`k = 0` gives the constant 1).
    pub fn power(&self, k: usize) -> Result<DifferentialForm> {
        let mut acc = DifferentialForm::scalar(&self.model, ScalarField::one());
        for _ in 0..k {
            acc = acc.wedge(self)?;
        }
        Ok(acc)
    }

    pub fn exterior_derivative(&self) -> DifferentialForm {
        let n = self.dim();
        let q = self.degree + 1;
        let mut map: BTreeMap<u32, ScalarField> = BTreeMap::new();
        if q <= n {
            for (m, f) in &self.comps {
                for i in 0..n {
                    if m & (1 << i) != 0 {
                        continue;
                    }
                    let xf = frame_derivative(&self.model, i, f);
                    if xf.is_zero() {
                        continue;
                    }
                    let term = xf.scale(wedge_sign(1 << i, *m));
                    let e = map.entry(m | (1 << i)).or_insert_with(ScalarField::zero);
                    *e = &*e + &term;
                }
                for &(dm, c) in self.model.d_basis(*m) {
                    let e = map.entry(dm).or_insert_with(ScalarField::zero);
                    *e = &*e + &f.scale(c);
                }
            }
        }
        DifferentialForm::new(&self.model, q, map)
    }

    pub fn d(&self) -> DifferentialForm {
        self.exterior_derivative()
    }

    pub fn interior(&self, x: &VectorFieldRep) -> Result<DifferentialForm> {
        if !same_model(&self.model, &x.model) {
            return Err(Error::ModelMismatch);
        }
        if self.degree == 0 {
            return Ok(DifferentialForm::zero(&self.model, 0));
        }
        let mut map: BTreeMap<u32, ScalarField> = BTreeMap::new();
        for (m, f) in &self.comps {
            for i in mask_indices(*m) {
                let xi = &x.comps[i];
                if xi.is_zero() {
                    continue;
                }
                let j = m & !(1 << i);
                let below = (j & ((1u32 << i) - 1)).count_ones();
                let sign = if below % 2 == 0 { 1.0 } else { -1.0 };
                let term = (xi * f).scale(sign);
                let e = map.entry(j).or_insert_with(ScalarField::zero);
                *e = &*e + &term;
            }
        }
        Ok(DifferentialForm::new(&self.model, self.degree - 1, map))
    }

    /// Lie derivative through `L_X = i_X d + d i_X`.
    pub fn lie_derivative(&self, x: &VectorFieldRep) -> Result<DifferentialForm> {
        let a = self.d().interior(x)?;
        if self.degree == 0 {
            return Ok(a);
        }
        let b = self.interior(x)?.d();
        a.add(&b)
    }

    pub fn t_derivative(&self) -> DifferentialForm {
        self.map(|f| f.derivative(Var::T))
    }

    fn tape(&self) -> &Arc<Tape> {
        self.tape.get_or_init(|| {
            let fields: Vec<ScalarField> = subsets(self.dim(), self.degree.min(self.dim()))
                .into_iter()
                .map(|m| self.component(m))
                .collect();
            let fields = if self.degree > self.dim() { Vec::new() } else { fields };
            Arc::new(Tape::compile(&fields))
        })
    }

    fn eval_error(&self, e: EvalError, p: &[f64], t: f64) -> Error {
        let EvalError::DivisionByZero { component } = e;
        let mask = subsets(self.dim(), self.degree)[component];
        Error::Eval {
            component: mask_label(mask),
            point: p.to_vec(),
            t,
        }
    }

    /// All increasing-tuple component values at `(p, t)`.
    pub fn evaluate(&self, p: &[f64], t: f64) -> Result<FormValue> {
        let n = self.dim();
        if self.degree > n {
            return Ok(FormValue {
                n,
                p: self.degree,
                comps: Vec::new(),
            });
        }
        let tape = self.tape();
        let mut out = vec![0.0; tape.num_outputs()];
        tape.eval(&vars_at(p, t), &mut out).map_err(|e| self.eval_error(e, p, t))?;
        Ok(FormValue {
            n,
            p: self.degree,
            comps: out,
        })
    }

    /// Component values with first derivatives in every coordinate and `t`.
    pub fn evaluate_dual(&self, p: &[f64], t: f64) -> Result<Vec<Dual>> {
        let tape = self.tape();
        let mut out = vec![Dual::constant(0.0); tape.num_outputs()];
        tape.eval(&dual_vars_at(p, t), &mut out)
            .map_err(|e| self.eval_error(e, p, t))?;
        Ok(out)
    }

    /// Largest component magnitude over `points` at the given `t` values,
    /// with the point and parameter where it occurs.
    pub fn sup_norm<'a>(
        &self,
        points: impl IntoIterator<Item = &'a [f64]>,
        ts: &[f64],
    ) -> Result<(f64, Option<(Vec<f64>, f64)>)> {
        let mut best = 0.0;
        let mut at = None;
        if self.comps.is_empty() {
            return Ok((0.0, None));
        }
        let tape = self.tape();
        let mut out = vec![0.0; tape.num_outputs()];
        let mut slots = Vec::new();
        for p in points {
            for &t in ts {
                tape.eval_with(&vars_at(p, t), &mut out, &mut slots)
                    .map_err(|e| self.eval_error(e, p, t))?;
                let v = out.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                if v > best || at.is_none() {
                    if v > best {
                        best = v;
                    }
                    at = Some((p.to_vec(), t));
                }
            }
        }
        Ok((best, at))
    }

    /// Whether every component stays within `tol` on the sample.
    pub fn is_zero_on<'a>(&self, points: impl IntoIterator<Item = &'a [f64]>, ts: &[f64], tol: f64) -> Result<bool> {
        Ok(self.sup_norm(points, ts)?.0 <= tol)
    }

    /// Coordinate-chart matrix `ω_ab` of a 2-form at `p`.
    pub fn coordinate_matrix(&self, p: &[f64], t: f64) -> Result<DMatrix<f64>> {
        if self.degree != 2 {
            return Err(Error::Degree("coordinate matrix needs a 2-form".into()));
        }
        let w = self.evaluate(p, t)?.matrix();
        let e = self.model.coframe_matrix(p);
        Ok(e.transpose() * w * e)
    }
}

fn check_indices(n: usize, degree: usize, idx: &[usize]) -> Result<()> {
    if idx.len() != degree {
        return Err(Error::Degree(format!(
            "component {idx:?} has {} indices, expected {degree}",
            idx.len()
        )));
    }
    if idx.iter().any(|&i| i == 0 || i > n) {
        return Err(Error::Dimension(format!("component {idx:?} has an index outside 1..={n}")));
    }
    if !idx.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Scenario(format!("component {idx:?} is not strictly increasing")));
    }
    Ok(())
}

/// A vector field in frame components.
#[derive(Clone, PartialEq)]
pub struct VectorFieldRep {
    model: Arc<CoframeModel>,
    pub comps: Vec<ScalarField>,
}

impl std::fmt::Debug for VectorFieldRep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.comps.iter()).finish()
    }
}

impl VectorFieldRep {
    pub fn new(model: &Arc<CoframeModel>, comps: Vec<ScalarField>) -> VectorFieldRep {
        assert_eq!(comps.len(), model.dim);
        VectorFieldRep {
            model: model.clone(),
            comps,
        }
    }

    /// The frame field `X_i`.
    pub fn frame(model: &Arc<CoframeModel>, i: usize) -> VectorFieldRep {
        let comps = (0..model.dim)
            .map(|j| if j == i { ScalarField::one() } else { ScalarField::zero() })
            .collect();
        VectorFieldRep::new(model, comps)
    }

    pub fn parse(model: &Arc<CoframeModel>, comps: &[&str]) -> Result<VectorFieldRep> {
        if comps.len() != model.dim {
            return Err(Error::Dimension(format!("vector field needs {} components", model.dim)));
        }
        let comps = comps
            .iter()
            .map(|s| parse_field(s, &model.coord_names))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(VectorFieldRep::new(model, comps))
    }

    pub fn model(&self) -> &Arc<CoframeModel> {
        &self.model
    }

    pub fn evaluate(&self, p: &[f64], t: f64) -> Result<Vec<f64>> {
        let vars = vars_at(p, t);
        self.comps
            .iter()
            .enumerate()
            .map(|(i, f)| {
                f.eval(&vars).map_err(|_| Error::Eval {
                    component: format!("({})", i + 1),
                    point: p.to_vec(),
                    t,
                })
            })
            .collect()
    }

    /// Coordinate components `V^a = Σ_i v^i F_ia`.
    pub fn to_coordinates(&self, p: &[f64], t: f64) -> Result<Vec<f64>> {
        let v = self.evaluate(p, t)?;
        let f = self.model.frame_matrix(p);
        Ok((0..self.model.dim)
            .map(|a| (0..self.model.dim).map(|i| v[i] * f[(i, a)]).sum())
            .collect())
    }

    /// Directional derivative `X(f)`.
    pub fn apply(&self, f: &ScalarField) -> ScalarField {
        let mut acc = ScalarField::zero();
        for (i, vi) in self.comps.iter().enumerate() {
            if vi.is_zero() {
                continue;
            }
            acc = acc + vi * &frame_derivative(&self.model, i, f);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t4() -> Arc<CoframeModel> {
        Arc::new(CoframeModel::torus(4))
    }

    fn heis() -> Arc<CoframeModel> {
        Arc::new(CoframeModel::heisenberg_circle())
    }

    #[test]
    fn basis_wedge() {
        let m = t4();
        let w = DifferentialForm::basis(&m, &[0]).wedge(&DifferentialForm::basis(&m, &[1])).unwrap();
        assert_eq!(w, DifferentialForm::basis(&m, &[0, 1]));
    }

    #[test]
    fn d_of_e3_on_heisenberg() {
        let m = heis();
        let d = DifferentialForm::basis(&m, &[2]).d();
        assert_eq!(d, DifferentialForm::basis(&m, &[0, 1]).scale(-1.0));
    }

    #[test]
    fn d_of_trig_coefficient() {
        let m = t4();
        let a = DifferentialForm::parse(&m, 1, &[(vec![2], "sin(th1)")]).unwrap();
        let want = DifferentialForm::parse(&m, 2, &[(vec![1, 2], "cos(th1)")]).unwrap();
        assert_eq!(a.d(), want);
    }

    #[test]
    fn d_squared_vanishes_structurally() {
        let m = heis();
        let f = DifferentialForm::parse(&m, 0, &[(vec![], "sin(y)*cos(w) + x*x*cos(y)")]).unwrap();
        assert!(f.d().d().is_identically_zero());
        let a = DifferentialForm::parse(&m, 1, &[(vec![3], "cos(y)"), (vec![1], "sin(w)*x")]).unwrap();
        assert!(a.d().d().is_identically_zero());
    }

    #[test]
    fn interior_of_basis() {
        let m = t4();
        let e12 = DifferentialForm::basis(&m, &[0, 1]);
        let x1 = VectorFieldRep::frame(&m, 0);
        assert_eq!(e12.interior(&x1).unwrap(), DifferentialForm::basis(&m, &[1]));
        let x2 = VectorFieldRep::frame(&m, 1);
        assert_eq!(e12.interior(&x2).unwrap(), DifferentialForm::basis(&m, &[0]).scale(-1.0));
    }

    #[test]
    fn lie_of_constant_form_along_coordinate_field() {
        let m = t4();
        let e12 = DifferentialForm::basis(&m, &[0, 1]);
        assert!(e12.lie_derivative(&VectorFieldRep::frame(&m, 2)).unwrap().is_identically_zero());
    }

    #[test]
    fn evaluation_reports_component_on_division_by_zero() {
        let m = t4();
        let a = DifferentialForm::parse(&m, 2, &[(vec![1, 2], "1"), (vec![2, 4], "1/sin(th1)")]).unwrap();
        let err = a.evaluate(&[0.0; 4], 0.0).unwrap_err();
        assert!(err.to_string().contains("(2,4)"), "{err}");
    }

    #[test]
    fn parse_rejects_unsorted_indices() {
        let m = t4();
        assert!(DifferentialForm::parse(&m, 2, &[(vec![2, 1], "1")]).is_err());
        assert!(DifferentialForm::parse(&m, 2, &[(vec![1, 5], "1")]).is_err());
    }

    #[test]
    fn t_derivative_of_family() {
        let m = t4();
        let a = DifferentialForm::parse(&m, 2, &[(vec![1, 2], "1 + t*cos(th1)")]).unwrap();
        let want = DifferentialForm::parse(&m, 2, &[(vec![1, 2], "cos(th1)")]).unwrap();
        assert_eq!(a.t_derivative(), want);
    }

    #[test]
    fn coordinate_matrix_on_heisenberg() {
        let m = heis();
        // e^2∧e^3 = dy∧(dz - x dy) = dy∧dz in the chart
        let a = DifferentialForm::basis(&m, &[1, 2]);
        let c = a.coordinate_matrix(&[0.7, 0.1, 0.2, 0.3], 0.0).unwrap();
        assert!((c[(1, 2)] - 1.0).abs() < 1e-15);
        assert!(c[(0, 1)].abs() < 1e-15);
    }
}
