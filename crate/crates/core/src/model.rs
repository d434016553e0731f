//! Parallelizable model manifolds described by a global coframe with
//! constant structure constants.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::algebra::{subsets, wedge_sign};
use crate::error::ModelError;
use crate::expr::{parse_field, vars_at, ScalarField, Var, MAX_DIM, RESERVED};
use crate::sample::halton_points;

/// Translating coordinate `shift` by its period adds `coef * x[source]` to
/// `x[target]`. Describes the non-abelian part of a lattice action.
#[derive(Debug, Clone, PartialEq)]
pub struct Shear {
    pub shift: usize,
    pub target: usize,
    pub source: usize,
    pub coef: f64,
}

#[derive(Debug, Clone)]
pub struct CoframeModel {
    pub name: String,
    pub dim: usize,
    pub coord_names: Vec<String>,
    pub periods: Vec<f64>,
    /// `(i, j, k, c)` with `j < k`: `de^i = Σ c e^j ∧ e^k`.
    pub structure_constants: Vec<(usize, usize, usize, f64)>,
    /// `frame[i][a]`: coordinate component `a` of `X_i`.
    pub frame: Vec<Vec<ScalarField>>,
    /// `coframe[i][a]`: coefficient of `dx^a` in `e^i`.
    pub coframe: Vec<Vec<ScalarField>>,
    pub shears: Vec<Shear>,
    d_basis: Vec<Vec<(u32, f64)>>,
}

impl PartialEq for CoframeModel {
    fn eq(&self, o: &Self) -> bool {
        self.name == o.name
            && self.dim == o.dim
            && self.coord_names == o.coord_names
            && self.periods == o.periods
            && self.structure_constants == o.structure_constants
            && self.frame == o.frame
            && self.coframe == o.coframe
            && self.shears == o.shears
    }
}

/// Raw description of a model before validation.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub name: String,
    pub coord_names: Vec<String>,
    pub periods: Vec<f64>,
    pub structure_constants: Vec<(usize, usize, usize, f64)>,
    pub frame: Vec<Vec<String>>,
    pub coframe: Vec<Vec<String>>,
    pub shears: Vec<Shear>,
}

const DUALITY_TOL: f64 = 1e-12;
const CHART_TOL: f64 = 1e-10;

impl CoframeModel {
    pub fn from_spec(spec: &ModelSpec) -> Result<CoframeModel, ModelError> {
        let n = spec.coord_names.len();
        if n == 0 || n > MAX_DIM {
            return Err(ModelError::Dimension(format!(
                "dimension {n} outside 1..={MAX_DIM}"
            )));
        }
        for (a, name) in spec.coord_names.iter().enumerate() {
            if RESERVED.contains(&name.as_str()) {
                return Err(ModelError::Invalid(format!("coordinate name '{name}' is reserved")));
            }
            if spec.coord_names[..a].contains(name) {
                return Err(ModelError::Invalid(format!("duplicate coordinate name '{name}'")));
            }
        }
        if spec.periods.len() != n || spec.periods.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(ModelError::Invalid("periods must be n positive reals".into()));
        }
        let mut consts: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        for &(i, j, k, c) in &spec.structure_constants {
            if i >= n || j >= n || k >= n {
                return Err(ModelError::Invalid(format!(
                    "structure constant index ({}, {}, {}) out of range",
                    i + 1,
                    j + 1,
                    k + 1
                )));
            }
            if j == k {
                if c != 0.0 {
                    return Err(ModelError::Invalid(format!(
                        "structure constant c^{}_{}{} must vanish by antisymmetry",
                        i + 1,
                        j + 1,
                        k + 1
                    )));
                }
                continue;
            }
            let (key, val) = if j < k { ((i, j, k), c) } else { ((i, k, j), -c) };
            if let Some(prev) = consts.insert(key, val) {
                if prev != val {
                    return Err(ModelError::Invalid(format!(
                        "structure constants for c^{}_{}{} are not antisymmetric",
                        i + 1,
                        key.1 + 1,
                        key.2 + 1
                    )));
                }
            }
        }
        let parse_matrix = |m: &Vec<Vec<String>>, what: &str| -> Result<Vec<Vec<ScalarField>>, ModelError> {
            if m.len() != n || m.iter().any(|r| r.len() != n) {
                return Err(ModelError::Dimension(format!("{what} must be {n}x{n}")));
            }
            m.iter()
                .enumerate()
                .map(|(i, row)| {
                    row.iter()
                        .enumerate()
                        .map(|(a, src)| {
                            let f = parse_field(src, &spec.coord_names).map_err(|e| ModelError::Parse {
                                location: format!("{what}[{}][{}]", i + 1, a + 1),
                                source: e,
                            })?;
                            if f.depends_on(Var::T) {
                                return Err(ModelError::Invalid(format!("{what} entries must not depend on t")));
                            }
                            Ok(f)
                        })
                        .collect()
                })
                .collect()
        };
        let frame = parse_matrix(&spec.frame, "frame")?;
        let coframe = parse_matrix(&spec.coframe, "coframe")?;
        for s in &spec.shears {
            if s.shift >= n || s.target >= n || s.source >= n || s.target == s.shift {
                return Err(ModelError::Invalid("shear indices out of range".into()));
            }
        }
        let structure_constants: Vec<_> = consts
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|((i, j, k), c)| (i, j, k, c))
            .collect();
        let mut model = CoframeModel {
            name: spec.name.clone(),
            dim: n,
            coord_names: spec.coord_names.clone(),
            periods: spec.periods.clone(),
            structure_constants,
            frame,
            coframe,
            shears: spec.shears.clone(),
            d_basis: Vec::new(),
        };
        model.d_basis = model.build_d_basis();
        model.check_jacobi()?;
        model.check_duality_and_chart()?;
        Ok(model)
    }

    /// Flat torus `T^n` with periods `2π` and coordinates `th1..thn`.
    pub fn torus(n: usize) -> CoframeModel {
        let names: Vec<String> = (1..=n).map(|i| format!("th{i}")).collect();
        let id: Vec<Vec<String>> = (0..n)
            .map(|i| (0..n).map(|a| if a == i { "1" } else { "0" }.to_string()).collect())
            .collect();
        CoframeModel::from_spec(&ModelSpec {
            name: format!("torus{n}"),
            coord_names: names,
            periods: vec![2.0 * PI; n],
            structure_constants: Vec::new(),
            frame: id.clone(),
            coframe: id,
            shears: Vec::new(),
        })
        .expect("torus model is valid")
    }

    /// Heisenberg nilmanifold times a circle: `e^3 = dz - x dy`,
    /// `de^3 = -e^1 ∧ e^2`.
    pub fn heisenberg_circle() -> CoframeModel {
        CoframeModel::from_spec(&heisenberg_circle_spec()).expect("heisenberg model is valid")
    }

    pub fn builtin(name: &str) -> Option<CoframeModel> {
        if name == "heisenberg-circle" {
            return Some(CoframeModel::heisenberg_circle());
        }
        let n: usize = name.strip_prefix("torus")?.parse().ok()?;
        (1..=MAX_DIM).contains(&n).then(|| CoframeModel::torus(n))
    }

    pub fn spec(&self) -> ModelSpec {
        let render = |m: &Vec<Vec<ScalarField>>| {
            m.iter()
                .map(|r| r.iter().map(|f| f.to_source(&self.coord_names)).collect())
                .collect()
        };
        ModelSpec {
            name: self.name.clone(),
            coord_names: self.coord_names.clone(),
            periods: self.periods.clone(),
            structure_constants: self.structure_constants.clone(),
            frame: render(&self.frame),
            coframe: render(&self.coframe),
            shears: self.shears.clone(),
        }
    }

    pub fn is_abelian(&self) -> bool {
        self.structure_constants.is_empty()
    }

    /// Full antisymmetric structure constant `c^i_{jk}`.
    pub fn c(&self, i: usize, j: usize, k: usize) -> f64 {
        if j == k {
            return 0.0;
        }
        let (a, b, s) = if j < k { (j, k, 1.0) } else { (k, j, -1.0) };
        self.structure_constants
            .iter()
            .find(|&&(ii, jj, kk, _)| ii == i && jj == a && kk == b)
            .map(|&(_, _, _, c)| s * c)
            .unwrap_or(0.0)
    }

    /// `d(e^I)` for the basis form with index mask `mask`, as (mask, coefficient) pairs.
    pub fn d_basis(&self, mask: u32) -> &[(u32, f64)] {
        &self.d_basis[mask as usize]
    }

    fn build_d_basis(&self) -> Vec<Vec<(u32, f64)>> {
        let n = self.dim;
        let mut out = vec![Vec::new(); 1 << n];
        for p in 1..=n {
            for mask in subsets(n, p) {
                let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
                let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
                for (r, &i) in idx.iter().enumerate() {
                    let rest = mask & !(1 << i);
                    let before = idx[..r].iter().fold(0u32, |m, &j| m | (1 << j));
                    let after = rest & !before;
                    let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                    for &(ii, j, k, c) in &self.structure_constants {
                        if ii != i {
                            continue;
                        }
                        let pair = (1u32 << j) | (1u32 << k);
                        if pair & rest != 0 {
                            continue;
                        }
                        // e^{before} ∧ (e^j∧e^k) ∧ e^{after}, with `sign` from moving d past e^{before}
                        let s1 = wedge_sign(before, pair);
                        let s2 = wedge_sign(before | pair, after);
                        *acc.entry(rest | pair).or_insert(0.0) += sign * c * s1 * s2;
                    }
                }
                out[mask as usize] = acc.into_iter().filter(|(_, c)| *c != 0.0).collect();
            }
        }
        out
    }

    fn check_jacobi(&self) -> Result<(), ModelError> {
        let n = self.dim;
        for i in 0..n {
            for a in 0..n {
                for b in a + 1..n {
                    for c in b + 1..n {
                        let mut s = 0.0;
                        for j in 0..n {
                            s += self.c(i, j, c) * self.c(j, a, b)
                                + self.c(i, j, a) * self.c(j, b, c)
                                + self.c(i, j, b) * self.c(j, c, a);
                        }
                        if s != 0.0 {
                            return Err(ModelError::Invalid(format!(
                                "structure constants violate d^2 = 0 on e^{} (residual {s:e})",
                                i + 1
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn check_duality_and_chart(&self) -> Result<(), ModelError> {
        let n = self.dim;
        for p in halton_points(&self.periods, 12) {
            let f = self.frame_matrix(&p);
            let e = self.coframe_matrix(&p);
            let prod = &e * f.transpose();
            let dev = (prod - DMatrix::<f64>::identity(n, n)).abs().max();
            if dev > DUALITY_TOL {
                return Err(ModelError::Invalid(format!(
                    "frame and coframe are not dual (deviation {dev:e})"
                )));
            }
            // de^i computed in the chart against the structure constants
            let vars = vars_at(&p, 0.0);
            for i in 0..n {
                for a in 0..n {
                    for b in a + 1..n {
                        let chart = self.coframe[i][b].derivative(Var::coord(a)).eval(&vars).unwrap_or(f64::NAN)
                            - self.coframe[i][a].derivative(Var::coord(b)).eval(&vars).unwrap_or(f64::NAN);
                        let mut model = 0.0;
                        for &(ii, j, k, c) in &self.structure_constants {
                            if ii == i {
                                model += c * (e[(j, a)] * e[(k, b)] - e[(j, b)] * e[(k, a)]);
                            }
                        }
                        if !((chart - model).abs() <= CHART_TOL) {
                            return Err(ModelError::Invalid(format!(
                                "structure constants disagree with the coframe's chart differential on e^{}",
                                i + 1
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `F[i][a]` at `p`.
    pub fn frame_matrix(&self, p: &[f64]) -> DMatrix<f64> {
        eval_matrix(&self.frame, p)
    }

    /// `E[i][a]` at `p`.
    pub fn coframe_matrix(&self, p: &[f64]) -> DMatrix<f64> {
        eval_matrix(&self.coframe, p)
    }

    /// Frame index `i` has a constant coordinate expression equal to `∂/∂x^a`
    /// for a single `a`; returns that `a`.
    pub fn frame_coordinate_direction(&self, i: usize) -> Option<usize> {
        let row = &self.frame[i];
        let mut hit = None;
        for (a, f) in row.iter().enumerate() {
            match f.as_constant() {
                Some(0.0) => {}
                Some(1.0) if hit.is_none() => hit = Some(a),
                _ => return None,
            }
        }
        hit
    }

    /// Canonical representative of `p` in the fundamental domain.
    pub fn reduce(&self, p: &[f64]) -> Vec<f64> {
        let mut x = p.to_vec();
        for a in 0..self.dim {
            let k = (x[a] / self.periods[a]).floor();
            if k != 0.0 {
                x[a] -= k * self.periods[a];
                for s in self.shears.iter().filter(|s| s.shift == a) {
                    x[s.target] -= k * s.coef * x[s.source];
                }
            }
            if x[a] >= self.periods[a] {
                x[a] = 0.0;
            }
        }
        x
    }

    /// Image of `p` under the lattice generator attached to coordinate `a`.
    pub fn lattice_generator(&self, a: usize, p: &[f64]) -> Vec<f64> {
        let mut x = p.to_vec();
        for s in self.shears.iter().filter(|s| s.shift == a) {
            x[s.target] += s.coef * p[s.source];
        }
        x[a] += self.periods[a];
        x
    }

    /// Coordinates involved in a shear (either shifted into or read from).
    pub fn sheared_coordinates(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .shears
            .iter()
            .flat_map(|s| [s.shift, s.target, s.source])
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

fn eval_matrix(m: &[Vec<ScalarField>], p: &[f64]) -> DMatrix<f64> {
    let n = m.len();
    let vars = vars_at(p, 0.0);
    DMatrix::from_fn(n, n, |i, a| m[i][a].eval(&vars).unwrap_or(f64::NAN))
}

pub fn heisenberg_circle_spec() -> ModelSpec {
    let s = |rows: [[&str; 4]; 4]| -> Vec<Vec<String>> {
        rows.iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect()
    };
    ModelSpec {
        name: "heisenberg-circle".into(),
        coord_names: vec!["x".into(), "y".into(), "z".into(), "w".into()],
        periods: vec![1.0, 2.0 * PI, 2.0 * PI, 2.0 * PI],
        structure_constants: vec![(2, 0, 1, -1.0)],
        frame: s([
            ["1", "0", "0", "0"],
            ["0", "1", "x", "0"],
            ["0", "0", "1", "0"],
            ["0", "0", "0", "1"],
        ]),
        coframe: s([
            ["1", "0", "0", "0"],
            ["0", "1", "0", "0"],
            ["0", "-x", "1", "0"],
            ["0", "0", "0", "1"],
        ]),
        shears: vec![Shear {
            shift: 0,
            target: 2,
            source: 1,
            coef: 1.0,
        }],
    }
}
