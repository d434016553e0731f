//! Scalar fields kept in a canonical sum-of-products form.
//!
//! A field is `c + Σ coef·monomial`, where a monomial is a sorted product of
//! atoms raised to nonzero integer powers. Atoms are variables, `sin`, `cos`
//! and `exp` of fields, and `base` atoms that stand for a multi-term field in
//! a denominator (only negative powers). Sums and products are expanded on
//! construction, so algebraic identities such as `d(d f) = 0` cancel term by
//! term instead of leaving rounding noise.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::ops;
use std::sync::{Arc, OnceLock};

use super::tape::{EvalError, Tape};

/// Maximum number of manifold coordinates.
pub const MAX_DIM: usize = 8;
/// Coordinates plus the family parameter `t`.
pub const NUM_VARS: usize = MAX_DIM + 1;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Var(u8);

impl Var {
    pub const T: Var = Var(MAX_DIM as u8);

    pub fn coord(i: usize) -> Var {
        assert!(i < MAX_DIM, "coordinate index {i} out of range");
        Var(i as u8)
    }

    /// Position in an evaluation vector: coordinates first, `t` last.
    pub fn slot(self) -> usize {
        self.0 as usize
    }

    pub fn coord_index(self) -> Option<usize> {
        (self != Var::T).then_some(self.0 as usize)
    }

    fn bit(self) -> u16 {
        1 << self.0
    }
}

fn mix(h: u64, x: u64) -> u64 {
    let mut z = h ^ x.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn norm_zero(x: f64) -> f64 {
    x + 0.0
}

#[derive(Clone)]
pub(crate) enum AtomKind {
    Var(Var),
    Sin(ScalarField),
    Cos(ScalarField),
    Exp(ScalarField),
    Base(ScalarField),
}

impl AtomKind {
    fn rank(&self) -> u8 {
        match self {
            AtomKind::Var(_) => 0,
            AtomKind::Sin(_) => 1,
            AtomKind::Cos(_) => 2,
            AtomKind::Exp(_) => 3,
            AtomKind::Base(_) => 4,
        }
    }

    fn inner(&self) -> Option<&ScalarField> {
        match self {
            AtomKind::Var(_) => None,
            AtomKind::Sin(u) | AtomKind::Cos(u) | AtomKind::Exp(u) | AtomKind::Base(u) => Some(u),
        }
    }
}

pub(crate) struct AtomNode {
    pub(crate) kind: AtomKind,
    hash: u64,
    deps: u16,
}

#[derive(Clone)]
pub(crate) struct Atom(pub(crate) Arc<AtomNode>);

impl Atom {
    fn new(kind: AtomKind) -> Atom {
        let (hash, deps) = match &kind {
            AtomKind::Var(v) => (mix(1, v.0 as u64), v.bit()),
            other => {
                let u = other.inner().expect("non-variable atom");
                (mix(other.rank() as u64 + 1, u.0.hash), u.0.deps)
            }
        };
        Atom(Arc::new(AtomNode { kind, hash, deps }))
    }

    pub(crate) fn kind(&self) -> &AtomKind {
        &self.0.kind
    }
}

impl Ord for Atom {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        self.0
            .hash
            .cmp(&other.0.hash)
            .then_with(|| self.0.kind.rank().cmp(&other.0.kind.rank()))
            .then_with(|| match (&self.0.kind, &other.0.kind) {
                (AtomKind::Var(a), AtomKind::Var(b)) => a.cmp(b),
                (a, b) => a.inner().unwrap().cmp(b.inner().unwrap()),
            })
    }
}

impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Atom {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Atom {}

impl Hash for Atom {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

#[derive(Clone)]
pub(crate) struct Monomial {
    pub(crate) factors: Arc<[(Atom, i32)]>,
    hash: u64,
    deps: u16,
}

impl Monomial {
    fn new(factors: Vec<(Atom, i32)>) -> Monomial {
        let mut hash = 7;
        let mut deps = 0;
        for (a, e) in &factors {
            hash = mix(mix(hash, a.0.hash), *e as i64 as u64);
            deps |= a.0.deps;
        }
        Monomial {
            factors: factors.into(),
            hash,
            deps,
        }
    }

    fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.factors, &other.factors);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    let e = a[i].1 + b[j].1;
                    if e != 0 {
                        out.push((a[i].0.clone(), e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial::new(out)
    }

    fn inverse(&self) -> Monomial {
        Monomial::new(self.factors.iter().map(|(a, e)| (a.clone(), -e)).collect())
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.factors, &other.factors) {
            return Ordering::Equal;
        }
        self.hash
            .cmp(&other.hash)
            .then_with(|| self.factors.len().cmp(&other.factors.len()))
            .then_with(|| {
                for ((a, ea), (b, eb)) in self.factors.iter().zip(other.factors.iter()) {
                    let c = a.cmp(b).then(ea.cmp(eb));
                    if c != Ordering::Equal {
                        return c;
                    }
                }
                Ordering::Equal
            })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Monomial {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Monomial {}

impl Hash for Monomial {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.hash);
    }
}

#[derive(Clone)]
pub(crate) struct Term {
    pub(crate) coef: f64,
    pub(crate) mono: Monomial,
}

pub(crate) struct Poly {
    pub(crate) constant: f64,
    pub(crate) terms: Vec<Term>,
    hash: u64,
    deps: u16,
    tape: OnceLock<Arc<Tape>>,
}

/// A smooth scalar expression in the coordinates and `t`.
#[derive(Clone)]
pub struct ScalarField(pub(crate) Arc<Poly>);

impl ScalarField {
    fn from_sorted(constant: f64, terms: Vec<Term>) -> ScalarField {
        let constant = norm_zero(constant);
        let mut hash = mix(3, constant.to_bits());
        let mut deps = 0;
        for t in &terms {
            hash = mix(mix(hash, t.coef.to_bits()), t.mono.hash);
            deps |= t.mono.deps;
        }
        ScalarField(Arc::new(Poly {
            constant,
            terms,
            hash,
            deps,
            tape: OnceLock::new(),
        }))
    }

    /// Sorts terms, merges equal monomials and folds empty monomials into
    /// the constant.
    fn collect(mut constant: f64, mut terms: Vec<Term>) -> ScalarField {
        terms.sort_by(|a, b| a.mono.cmp(&b.mono));
        let mut out: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            if t.mono.is_empty() {
                constant += t.coef;
                continue;
            }
            match out.last_mut() {
                Some(last) if last.mono == t.mono => last.coef += t.coef,
                _ => out.push(t),
            }
        }
        out.retain(|t| t.coef != 0.0);
        for t in &mut out {
            t.coef = norm_zero(t.coef);
        }
        ScalarField::from_sorted(constant, out)
    }

    pub fn constant(c: f64) -> ScalarField {
        ScalarField::from_sorted(c, Vec::new())
    }

    pub fn zero() -> ScalarField {
        ScalarField::constant(0.0)
    }

    pub fn one() -> ScalarField {
        ScalarField::constant(1.0)
    }

    pub fn var(v: Var) -> ScalarField {
        ScalarField::from_atom(Atom::new(AtomKind::Var(v)), 1)
    }

    pub fn coord(i: usize) -> ScalarField {
        ScalarField::var(Var::coord(i))
    }

    pub fn t() -> ScalarField {
        ScalarField::var(Var::T)
    }

    fn from_atom(a: Atom, e: i32) -> ScalarField {
        ScalarField::from_sorted(
            0.0,
            vec![Term {
                coef: 1.0,
                mono: Monomial::new(vec![(a, e)]),
            }],
        )
    }

    fn from_term(coef: f64, mono: Monomial) -> ScalarField {
        if coef == 0.0 {
            return ScalarField::zero();
        }
        if mono.is_empty() {
            return ScalarField::constant(coef);
        }
        ScalarField::from_sorted(0.0, vec![Term { coef, mono }])
    }

    pub(crate) fn poly(&self) -> &Poly {
        &self.0
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.0.terms.is_empty().then_some(self.0.constant)
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    pub fn depends_on(&self, v: Var) -> bool {
        self.0.deps & v.bit() != 0
    }

    /// Bit `i` set iff the field mentions variable slot `i`.
    pub fn dependency_mask(&self) -> u16 {
        self.0.deps
    }

    /// Number of terms, a rough size measure.
    pub fn term_count(&self) -> usize {
        self.0.terms.len() + usize::from(self.0.constant != 0.0)
    }

    pub fn neg(&self) -> ScalarField {
        self.scale(-1.0)
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        if c == 0.0 {
            return ScalarField::zero();
        }
        if c == 1.0 {
            return self.clone();
        }
        let terms = self
            .0
            .terms
            .iter()
            .map(|t| Term {
                coef: t.coef * c,
                mono: t.mono.clone(),
            })
            .collect();
        ScalarField::collect(self.0.constant * c, terms)
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return other.clone();
        }
        let (a, b) = (&self.0.terms, &other.0.terms);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].mono.cmp(&b[j].mono) {
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    let coef = norm_zero(a[i].coef + b[j].coef);
                    if coef != 0.0 {
                        out.push(Term {
                            coef,
                            mono: a[i].mono.clone(),
                        });
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        ScalarField::from_sorted(self.0.constant + other.0.constant, out)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        if let Some(c) = other.as_constant() {
            return self.scale(c);
        }
        if let Some(c) = self.as_constant() {
            return other.scale(c);
        }
        let (ca, cb) = (self.0.constant, other.0.constant);
        let mut terms = Vec::with_capacity(
            self.0.terms.len() * other.0.terms.len() + self.0.terms.len() + other.0.terms.len(),
        );
        if cb != 0.0 {
            for t in &self.0.terms {
                terms.push(Term {
                    coef: t.coef * cb,
                    mono: t.mono.clone(),
                });
            }
        }
        if ca != 0.0 {
            for t in &other.0.terms {
                terms.push(Term {
                    coef: t.coef * ca,
                    mono: t.mono.clone(),
                });
            }
        }
        let mut extra: Vec<ScalarField> = Vec::new();
        for s in &self.0.terms {
            for o in &other.0.terms {
                let mono = s.mono.mul(&o.mono);
                let coef = s.coef * o.coef;
                if mono.factors.iter().any(|(a, e)| *e > 0 && matches!(a.kind(), AtomKind::Base(_))) {
                    extra.push(expand_positive_bases(coef, &mono));
                } else {
                    terms.push(Term { coef, mono });
                }
            }
        }
        let mut out = ScalarField::collect(ca * cb, terms);
        for e in extra {
            out = out.add(&e);
        }
        out
    }

    /// Division. Dividing by the literal zero yields a field whose
    /// evaluation reports a division by zero.
    pub fn div(&self, other: &ScalarField) -> ScalarField {
        if let Some(c) = other.as_constant() {
            if c != 0.0 {
                let terms = self
                    .0
                    .terms
                    .iter()
                    .map(|t| Term {
                        coef: t.coef / c,
                        mono: t.mono.clone(),
                    })
                    .collect();
                return ScalarField::collect(self.0.constant / c, terms);
            }
            let zero_base = Atom::new(AtomKind::Base(ScalarField::zero()));
            return self.mul(&ScalarField::from_atom(zero_base, -1));
        }
        if other.0.constant == 0.0 && other.0.terms.len() == 1 {
            let t = &other.0.terms[0];
            let inv = expand_positive_bases(1.0 / t.coef, &t.mono.inverse());
            return self.mul(&inv);
        }
        let lead = other.0.terms[0].coef;
        let q = other.scale(1.0 / lead);
        let inv = ScalarField::from_atom(Atom::new(AtomKind::Base(q)), -1).scale(1.0 / lead);
        self.mul(&inv)
    }

    pub fn sin(&self) -> ScalarField {
        if let Some(c) = self.as_constant() {
            return ScalarField::constant(c.sin());
        }
        if self.0.terms[0].coef < 0.0 {
            return self.neg().sin().neg();
        }
        ScalarField::from_atom(Atom::new(AtomKind::Sin(self.clone())), 1)
    }

    pub fn cos(&self) -> ScalarField {
        if let Some(c) = self.as_constant() {
            return ScalarField::constant(c.cos());
        }
        if self.0.terms[0].coef < 0.0 {
            return self.neg().cos();
        }
        ScalarField::from_atom(Atom::new(AtomKind::Cos(self.clone())), 1)
    }

    pub fn exp(&self) -> ScalarField {
        if let Some(c) = self.as_constant() {
            return ScalarField::constant(c.exp());
        }
        let c = self.0.constant;
        if c != 0.0 {
            let rest = ScalarField::from_sorted(0.0, self.0.terms.clone());
            return rest.exp().scale(c.exp());
        }
        ScalarField::from_atom(Atom::new(AtomKind::Exp(self.clone())), 1)
    }

    /// Exact partial derivative with respect to `v`.
    pub fn derivative(&self, v: Var) -> ScalarField {
        if !self.depends_on(v) {
            return ScalarField::zero();
        }
        let mut acc = ScalarField::zero();
        for term in &self.0.terms {
            if term.mono.deps & v.bit() == 0 {
                continue;
            }
            let factors = &term.mono.factors;
            for (k, (atom, e)) in factors.iter().enumerate() {
                if atom.0.deps & v.bit() == 0 {
                    continue;
                }
                let datom = atom_derivative(atom, v);
                if datom.is_zero() {
                    continue;
                }
                let mut rest: Vec<(Atom, i32)> = Vec::with_capacity(factors.len());
                for (j, (a, ej)) in factors.iter().enumerate() {
                    let ej = if j == k { ej - 1 } else { *ej };
                    if ej != 0 {
                        rest.push((a.clone(), ej));
                    }
                }
                let part = ScalarField::from_term(term.coef * *e as f64, Monomial::new(rest));
                acc = acc.add(&part.mul(&datom));
            }
        }
        acc
    }

    /// Compiled evaluator for this field, built on first use.
    pub fn tape(&self) -> &Arc<Tape> {
        self.0
            .tape
            .get_or_init(|| Arc::new(Tape::compile(std::slice::from_ref(self))))
    }

    /// Evaluates at `vars` (coordinates in slots `0..n`, `t` in the last slot).
    pub fn eval(&self, vars: &[f64; NUM_VARS]) -> Result<f64, EvalError> {
        if let Some(c) = self.as_constant() {
            return Ok(c);
        }
        let mut out = [0.0];
        self.tape().eval(vars, &mut out)?;
        Ok(out[0])
    }

    /// Renders the field in the input grammar using `names` for coordinates.
    pub fn to_source(&self, names: &[String]) -> String {
        let mut s = String::new();
        write_field(self, names, &mut s);
        s
    }
}

fn expand_positive_bases(coef: f64, mono: &Monomial) -> ScalarField {
    let mut keep = Vec::new();
    let mut expand = Vec::new();
    for (a, e) in mono.factors.iter() {
        match a.kind() {
            AtomKind::Base(q) if *e > 0 => expand.push((q.clone(), *e)),
            _ => keep.push((a.clone(), *e)),
        }
    }
    let mut out = ScalarField::from_term(coef, Monomial::new(keep));
    for (q, e) in expand {
        for _ in 0..e {
            out = out.mul(&q);
        }
    }
    out
}

fn atom_derivative(atom: &Atom, v: Var) -> ScalarField {
    match atom.kind() {
        AtomKind::Var(w) => {
            if *w == v {
                ScalarField::one()
            } else {
                ScalarField::zero()
            }
        }
        AtomKind::Sin(u) => u.cos().mul(&u.derivative(v)),
        AtomKind::Cos(u) => u.sin().neg().mul(&u.derivative(v)),
        AtomKind::Exp(_) => ScalarField::from_atom(atom.clone(), 1).mul(&atom_inner(atom).derivative(v)),
        AtomKind::Base(q) => q.derivative(v),
    }
}

fn atom_inner(atom: &Atom) -> &ScalarField {
    atom.kind().inner().expect("function atom")
}

fn var_name(v: Var, names: &[String]) -> String {
    match v.coord_index() {
        None => "t".to_string(),
        Some(i) => names.get(i).cloned().unwrap_or_else(|| format!("x{}", i + 1)),
    }
}

fn write_atom(a: &Atom, names: &[String], s: &mut String) {
    let (fname, u) = match a.kind() {
        AtomKind::Var(v) => {
            s.push_str(&var_name(*v, names));
            return;
        }
        AtomKind::Sin(u) => ("sin", u),
        AtomKind::Cos(u) => ("cos", u),
        AtomKind::Exp(u) => ("exp", u),
        AtomKind::Base(u) => ("", u),
    };
    s.push_str(fname);
    s.push('(');
    write_field(u, names, s);
    s.push(')');
}

fn write_term(coef: f64, mono: &Monomial, names: &[String], s: &mut String) {
    let mut parts: Vec<String> = Vec::new();
    if coef != 1.0 {
        parts.push(format!("{coef}"));
    }
    for (a, e) in mono.factors.iter().filter(|(_, e)| *e > 0) {
        let mut f = String::new();
        write_atom(a, names, &mut f);
        for _ in 0..*e {
            parts.push(f.clone());
        }
    }
    if parts.is_empty() {
        parts.push("1".to_string());
    }
    s.push_str(&parts.join("*"));
    for (a, e) in mono.factors.iter().filter(|(_, e)| *e < 0) {
        for _ in 0..(-*e) {
            s.push('/');
            write_atom(a, names, s);
        }
    }
}

fn write_field(f: &ScalarField, names: &[String], s: &mut String) {
    let p = f.poly();
    let mut first = true;
    if p.constant != 0.0 || p.terms.is_empty() {
        let _ = write!(s, "{}", p.constant);
        first = false;
    }
    for t in &p.terms {
        if first {
            if t.coef == -1.0 {
                s.push('-');
                write_term(1.0, &t.mono, names, s);
            } else {
                write_term(t.coef, &t.mono, names, s);
            }
            first = false;
        } else if t.coef < 0.0 {
            s.push_str(" - ");
            write_term(-t.coef, &t.mono, names, s);
        } else {
            s.push_str(" + ");
            write_term(t.coef, &t.mono, names, s);
        }
    }
}

impl Ord for ScalarField {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        let (a, b) = (&self.0, &other.0);
        a.hash
            .cmp(&b.hash)
            .then_with(|| a.constant.total_cmp(&b.constant))
            .then_with(|| a.terms.len().cmp(&b.terms.len()))
            .then_with(|| {
                for (x, y) in a.terms.iter().zip(b.terms.iter()) {
                    let c = x.coef.total_cmp(&y.coef).then_with(|| x.mono.cmp(&y.mono));
                    if c != Ordering::Equal {
                        return c;
                    }
                }
                Ordering::Equal
            })
    }
}

impl PartialOrd for ScalarField {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ScalarField {}

impl Hash for ScalarField {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_source(&[]))
    }
}

impl From<f64> for ScalarField {
    fn from(c: f64) -> Self {
        ScalarField::constant(c)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $imp:ident) => {
        impl ops::$tr<&ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $m(self, rhs: &ScalarField) -> ScalarField {
                ScalarField::$imp(self, rhs)
            }
        }
        impl ops::$tr<ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $m(self, rhs: ScalarField) -> ScalarField {
                ScalarField::$imp(&self, &rhs)
            }
        }
        impl ops::$tr<&ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $m(self, rhs: &ScalarField) -> ScalarField {
                ScalarField::$imp(&self, rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl ops::Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        ScalarField::neg(self)
    }
}

impl ops::Neg for ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        ScalarField::neg(&self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> ScalarField {
        ScalarField::coord(0)
    }

    fn y() -> ScalarField {
        ScalarField::coord(1)
    }

    fn at(x0: f64, y0: f64, t: f64) -> [f64; NUM_VARS] {
        let mut v = [0.0; NUM_VARS];
        v[0] = x0;
        v[1] = y0;
        v[Var::T.slot()] = t;
        v
    }

    #[test]
    fn expansion_cancels() {
        let a = (&x() + &y()) * (&x() - &y());
        let b = &x() * &x() - &y() * &y();
        assert_eq!(a, b);
        assert!((a - b).is_zero());
    }

    #[test]
    fn commuted_products_are_equal() {
        let a = x().sin() * y().cos() * ScalarField::t();
        let b = ScalarField::t() * y().cos() * x().sin();
        assert_eq!(a, b);
    }

    #[test]
    fn sin_argument_sign_is_normalized() {
        let a = x().neg().sin();
        assert_eq!(a, x().sin().neg());
        assert_eq!(x().neg().cos(), x().cos());
    }

    #[test]
    fn division_by_monomial_cancels() {
        let f = (&x() * &y()) / x();
        assert_eq!(f, y());
    }

    #[test]
    fn division_by_sum_round_trip() {
        let q = ScalarField::one() + x().cos().scale(0.5);
        let f = x().sin() / &q;
        let v = f.eval(&at(0.7, 0.0, 0.0)).unwrap();
        assert!((v - 0.7f64.sin() / (1.0 + 0.5 * 0.7f64.cos())).abs() < 1e-15);
    }

    #[test]
    fn exp_constant_is_factored() {
        let f = (x() + ScalarField::constant(2.0)).exp();
        let g = x().exp().scale(2f64.exp());
        assert_eq!(f, g);
    }

    #[test]
    fn derivative_rules() {
        let f = x().sin() * y();
        assert_eq!(f.derivative(Var::coord(0)), x().cos() * y());
        assert_eq!(f.derivative(Var::coord(1)), x().sin());
        assert!(f.derivative(Var::T).is_zero());
        let g = ScalarField::one() / (ScalarField::one() + x() * x());
        let dg = g.derivative(Var::coord(0));
        let v = dg.eval(&at(0.5, 0.0, 0.0)).unwrap();
        assert!((v + 2.0 * 0.5 / (1.25f64 * 1.25)).abs() < 1e-14);
    }

    #[test]
    fn mixed_partials_commute() {
        let f = (x() * y()).sin() * (ScalarField::t() * x()).exp();
        let a = f.derivative(Var::coord(0)).derivative(Var::coord(1));
        let b = f.derivative(Var::coord(1)).derivative(Var::coord(0));
        assert_eq!(a, b);
    }

    #[test]
    fn division_by_literal_zero_fails_at_evaluation() {
        let f = x() / ScalarField::zero();
        assert!(f.eval(&at(1.0, 0.0, 0.0)).is_err());
    }
}
