#![allow(dead_code)]

use std::sync::Arc;

use pairflow::algebra::{mask_indices, subsets};
use pairflow::expr::ScalarField;
use pairflow::form::frame_derivative;
use pairflow::sample::Sampling;
use pairflow::{CoframeModel, DifferentialForm, VectorFieldRep};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Models used by the shipped scenarios.
pub const SHIPPED_MODELS: [&str; 5] = ["torus3", "torus4", "torus5", "torus6", "heisenberg-circle"];

pub fn model(name: &str) -> Arc<CoframeModel> {
    Arc::new(CoframeModel::builtin(name).expect("builtin model"))
}

/// A short random trigonometric polynomial in the model coordinates.
pub fn random_expr(m: &CoframeModel, rng: &mut ChaCha8Rng) -> String {
    let n = m.dim;
    let terms = rng.gen_range(1..=3);
    let mut parts = Vec::new();
    for _ in 0..terms {
        let c: f64 = rng.gen_range(-1.0..1.0);
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let (ka, kb) = (rng.gen_range(1..=2), rng.gen_range(0..=1));
        let f = if rng.gen_bool(0.5) { "sin" } else { "cos" };
        let mut term = format!(
            "{c:.3}*{f}({ka}*{} + {kb}*{})",
            m.coord_names[a], m.coord_names[b]
        );
        if rng.gen_bool(0.2) {
            term.push_str("*(1 + t)");
        }
        parts.push(term);
    }
    if rng.gen_bool(0.5) {
        parts.push(format!("{:.3}", rng.gen_range(-1.0..1.0)));
    }
    parts.join(" + ")
}

pub fn random_form(m: &Arc<CoframeModel>, degree: usize, rng: &mut ChaCha8Rng) -> DifferentialForm {
    // About three nonzero components whatever the dimension, so residual
    // tapes stay small on large grids.
    let masks = subsets(m.dim, degree);
    let density = (3.0 / masks.len() as f64).min(0.6);
    let mut comps: Vec<(u32, ScalarField)> = Vec::new();
    for mask in masks {
        if rng.gen_bool(density) {
            let src = random_expr(m, rng);
            comps.push((mask, pairflow::expr::parse_field(&src, &m.coord_names).expect("generated expression parses")));
        }
    }
    DifferentialForm::new(m, degree, comps)
}

pub fn random_field(m: &Arc<CoframeModel>, rng: &mut ChaCha8Rng) -> VectorFieldRep {
    let density = (3.0 / m.dim as f64).min(1.0);
    let comps = (0..m.dim)
        .map(|_| {
            if rng.gen_bool(density) {
                pairflow::expr::parse_field(&random_expr(m, rng), &m.coord_names).unwrap()
            } else {
                ScalarField::zero()
            }
        })
        .collect();
    VectorFieldRep::new(m, comps)
}

/// Sign of the permutation sorting `v` (zero on repeats).
fn sort_sign(v: &mut [usize]) -> f64 {
    let mut sign = 1.0;
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] == v[j + 1] {
                return 0.0;
            }
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    sign
}

/// Lie derivative from the evaluation formula
/// `(L_X a)(X_I) = X(a(X_I)) - Σ_m a(.., [X, X_{i_m}], ..)` on frame fields,
/// with `[X_j, X_k] = -Σ_l c^l_{jk} X_l`. Independent of `d`.
pub fn lie_by_evaluation(a: &DifferentialForm, x: &VectorFieldRep) -> DifferentialForm {
    let m = a.model().clone();
    let n = m.dim;
    let p = a.degree();
    // bracket[j][l]: X_l component of [X, X_j].
    let bracket: Vec<Vec<ScalarField>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|l| {
                    let mut acc = frame_derivative(&m, j, &x.comps[l]).neg();
                    for k in 0..n {
                        let c = m.c(l, k, j);
                        if c != 0.0 {
                            acc = acc.sub(&x.comps[k].scale(c));
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let comps = subsets(n, p).into_iter().map(|mask| {
        let idx = mask_indices(mask);
        let mut val = x.apply(&a.component(mask));
        for (slot, &j) in idx.iter().enumerate() {
            for l in 0..n {
                let coef = &bracket[j][l];
                if coef.is_zero() {
                    continue;
                }
                let mut replaced = idx.clone();
                replaced[slot] = l;
                let s = sort_sign(&mut replaced);
                if s == 0.0 {
                    continue;
                }
                let comp = a.component(replaced.iter().fold(0u32, |acc, i| acc | (1 << i)));
                val = val.sub(&coef.mul(&comp).scale(s));
            }
        }
        (mask, val)
    });
    DifferentialForm::new(&m, p, comps.collect::<Vec<_>>())
}

/// Sup residual of each identity over the sampling.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityResiduals {
    pub d_squared: f64,
    pub graded_commutativity: f64,
    pub leibniz: f64,
    pub cartan: f64,
    pub duality: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.d_squared
            .max(self.graded_commutativity)
            .max(self.leibniz)
            .max(self.cartan)
            .max(self.duality)
    }

    pub fn merge(&mut self, o: &IdentityResiduals) {
        self.d_squared = self.d_squared.max(o.d_squared);
        self.graded_commutativity = self.graded_commutativity.max(o.graded_commutativity);
        self.leibniz = self.leibniz.max(o.leibniz);
        self.cartan = self.cartan.max(o.cartan);
        self.duality = self.duality.max(o.duality);
    }
}

fn sup(f: &DifferentialForm, s: &Sampling) -> f64 {
    f.sup_norm(s.point_refs(), &s.ts).unwrap().0
}

/// Checks all identities on one pair of forms and one field.
pub fn identity_residuals(
    a: &DifferentialForm,
    b: &DifferentialForm,
    x: &VectorFieldRep,
    s: &Sampling,
) -> IdentityResiduals {
    let (p, q) = (a.degree(), b.degree());
    let mut r = IdentityResiduals {
        d_squared: sup(&a.d().d(), s),
        ..Default::default()
    };
    let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
    let ab = a.wedge(b).unwrap();
    let ba = b.wedge(a).unwrap();
    r.graded_commutativity = sup(&ab.sub(&ba.scale(sign)).unwrap(), s);
    if p >= 1 && q >= 1 {
        let lhs = ab.interior(x).unwrap();
        let sp = if p % 2 == 0 { 1.0 } else { -1.0 };
        let rhs = a
            .interior(x)
            .unwrap()
            .wedge(b)
            .unwrap()
            .add(&a.wedge(&b.interior(x).unwrap()).unwrap().scale(sp))
            .unwrap();
        r.leibniz = sup(&lhs.sub(&rhs).unwrap(), s);
    }
    let cartan = a.lie_derivative(x).unwrap();
    r.cartan = sup(&cartan.sub(&lie_by_evaluation(a, x)).unwrap(), s);
    r
}

/// `E F^T = I` over the sampling points.
pub fn duality_residual(m: &CoframeModel, s: &Sampling) -> f64 {
    let mut worst = 0.0f64;
    for p in &s.points {
        let prod = m.coframe_matrix(p) * m.frame_matrix(p).transpose();
        let id = nalgebra::DMatrix::<f64>::identity(m.dim, m.dim);
        worst = worst.max((prod - id).amax());
    }
    worst
}
