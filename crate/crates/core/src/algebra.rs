//! Pointwise exterior algebra on `R^n` with forms stored densely over
//! increasing index sets (bit masks).

use nalgebra::{DMatrix, DVector};

/// Increasing index sets of size `p` in `0..n`, as bit masks, ordered
/// lexicographically by their index tuples.
pub fn subsets(n: usize, p: usize) -> Vec<u32> {
    fn rec(start: usize, n: usize, p: usize, acc: u32, out: &mut Vec<u32>) {
        if p == 0 {
            out.push(acc);
            return;
        }
        for i in start..n {
            if n - i < p {
                break;
            }
            rec(i + 1, n, p - 1, acc | (1 << i), out);
        }
    }
    let mut out = Vec::new();
    if p <= n {
        rec(0, n, p, 0, &mut out);
    }
    out
}

pub fn mask_indices(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask & (1 << i) != 0).collect()
}

pub fn indices_mask(idx: &[usize]) -> u32 {
    idx.iter().fold(0, |m, &i| m | (1 << i))
}

/// Sign of `e^I ∧ e^J` relative to `e^{I∪J}`; zero when the sets meet.
pub fn wedge_sign(i: u32, j: u32) -> f64 {
    if i & j != 0 {
        return 0.0;
    }
    let mut swaps = 0;
    let mut rest = j;
    while rest != 0 {
        let b = rest.trailing_zeros();
        rest &= rest - 1;
        swaps += (i >> (b + 1)).count_ones();
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Position lookup for the masks of one degree.
#[derive(Debug, Clone)]
pub struct Basis {
    pub n: usize,
    pub p: usize,
    pub masks: Vec<u32>,
    pos: Vec<usize>,
}

impl Basis {
    pub fn new(n: usize, p: usize) -> Basis {
        let masks = subsets(n, p);
        let mut pos = vec![usize::MAX; 1 << n];
        for (k, &m) in masks.iter().enumerate() {
            pos[m as usize] = k;
        }
        Basis { n, p, masks, pos }
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn index(&self, mask: u32) -> usize {
        self.pos[mask as usize]
    }
}

/// A `p`-form at a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct FormValue {
    pub n: usize,
    pub p: usize,
    pub comps: Vec<f64>,
}

impl FormValue {
    pub fn zero(n: usize, p: usize) -> FormValue {
        FormValue {
            n,
            p,
            comps: vec![0.0; subsets(n, p).len()],
        }
    }

    pub fn from_fn(n: usize, p: usize, mut f: impl FnMut(u32) -> f64) -> FormValue {
        let comps = subsets(n, p).into_iter().map(&mut f).collect();
        FormValue { n, p, comps }
    }

    pub fn masks(&self) -> Vec<u32> {
        subsets(self.n, self.p)
    }

    pub fn get(&self, mask: u32) -> f64 {
        let masks = self.masks();
        masks
            .iter()
            .position(|&m| m == mask)
            .map(|k| self.comps[k])
            .unwrap_or(0.0)
    }

    pub fn sup(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn add(&self, o: &FormValue) -> FormValue {
        assert_eq!((self.n, self.p), (o.n, o.p));
        FormValue {
            n: self.n,
            p: self.p,
            comps: self.comps.iter().zip(&o.comps).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &FormValue) -> FormValue {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> FormValue {
        FormValue {
            n: self.n,
            p: self.p,
            comps: self.comps.iter().map(|a| a * c).collect(),
        }
    }

    pub fn wedge(&self, o: &FormValue) -> FormValue {
        assert_eq!(self.n, o.n);
        let q = self.p + o.p;
        if q > self.n {
            return FormValue {
                n: self.n,
                p: q,
                comps: Vec::new(),
            };
        }
        let target = Basis::new(self.n, q);
        let mut out = vec![0.0; target.len()];
        let (ma, mb) = (self.masks(), o.masks());
        for (a, &ia) in self.comps.iter().zip(&ma) {
            if *a == 0.0 {
                continue;
            }
            for (b, &ib) in o.comps.iter().zip(&mb) {
                if *b == 0.0 || ia & ib != 0 {
                    continue;
                }
                out[target.index(ia | ib)] += wedge_sign(ia, ib) * a * b;
            }
        }
        FormValue {
            n: self.n,
            p: q,
            comps: out,
        }
    }

    /// `k`-fold wedge power; the zeroth power is the constant 1.
    pub fn power(&self, k: usize) -> FormValue {
        let mut acc = FormValue {
            n: self.n,
            p: 0,
            comps: vec![1.0],
        };
        for _ in 0..k {
            acc = acc.wedge(self);
        }
        acc
    }

    pub fn interior(&self, v: &[f64]) -> FormValue {
        if self.p == 0 {
            return FormValue::zero(self.n, 0);
        }
        let basis = Basis::new(self.n, self.p);
        FormValue::from_fn(self.n, self.p - 1, |j| {
            let mut s = 0.0;
            for (i, vi) in v.iter().enumerate() {
                if j & (1 << i) != 0 || *vi == 0.0 {
                    continue;
                }
                let below = (j & ((1u32 << i) - 1)).count_ones();
                let sign = if below % 2 == 0 { 1.0 } else { -1.0 };
                s += vi * sign * self.comps[basis.index(j | (1 << i))];
            }
            s
        })
    }

    /// Evaluates the form on `p` vectors.
    pub fn apply(&self, vs: &[&[f64]]) -> f64 {
        assert_eq!(vs.len(), self.p);
        let mut cur = self.clone();
        for v in vs {
            cur = cur.interior(v);
        }
        cur.comps.first().copied().unwrap_or(0.0)
    }

    /// Top-degree coefficient (volume component).
    pub fn top(&self) -> f64 {
        if self.p == self.n {
            self.comps[0]
        } else {
            0.0
        }
    }

    /// Antisymmetric matrix `Ω_ij = Ω(e_i, e_j)` of a 2-form.
    pub fn matrix(&self) -> DMatrix<f64> {
        assert_eq!(self.p, 2);
        let mut m = DMatrix::zeros(self.n, self.n);
        for (c, mask) in self.comps.iter().zip(self.masks()) {
            let idx = mask_indices(mask);
            m[(idx[0], idx[1])] = *c;
            m[(idx[1], idx[0])] = -*c;
        }
        m
    }

    pub fn vector(&self) -> DVector<f64> {
        assert_eq!(self.p, 1);
        DVector::from_column_slice(&self.comps)
    }
}

/// Rank of a 2-form: `2k` for the largest `k` with `η^k` above `tol`.
pub fn rank_2form(eta: &FormValue, tol: f64) -> usize {
    let mut k = 0;
    let mut pw = FormValue {
        n: eta.n,
        p: 0,
        comps: vec![1.0],
    };
    while 2 * (k + 1) <= eta.n {
        pw = pw.wedge(eta);
        if pw.sup() <= tol {
            break;
        }
        k += 1;
    }
    2 * k
}

/// Class of a 1-form from its value and the value of its differential.
/// Returns `(class, degenerate)` where degenerate marks a vanishing form.
pub fn class_1form(alpha: &FormValue, dalpha: &FormValue, tol: f64) -> (usize, bool) {
    if alpha.sup() <= tol {
        return (0, true);
    }
    let k = rank_2form(dalpha, tol) / 2;
    if alpha.wedge(&dalpha.power(k)).sup() > tol {
        (2 * k + 1, false)
    } else {
        (2 * k, false)
    }
}

/// Linear map `v ↦ i_v a` as a matrix with one column per vector slot.
pub fn interior_matrix(a: &FormValue) -> DMatrix<f64> {
    let rows = subsets(a.n, a.p.saturating_sub(1)).len();
    let mut m = DMatrix::zeros(rows, a.n);
    for i in 0..a.n {
        let mut e = vec![0.0; a.n];
        e[i] = 1.0;
        let col = a.interior(&e);
        for (r, c) in col.comps.iter().enumerate() {
            m[(r, i)] = *c;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis1(n: usize, i: usize) -> FormValue {
        FormValue::from_fn(n, 1, |m| if m == 1 << i { 1.0 } else { 0.0 })
    }

    #[test]
    fn subsets_are_lexicographic() {
        let s = subsets(4, 2);
        let tuples: Vec<_> = s.iter().map(|&m| mask_indices(m)).collect();
        assert_eq!(
            tuples,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
    }

    #[test]
    fn wedge_signs() {
        let e1 = basis1(3, 0);
        let e2 = basis1(3, 1);
        let e3 = basis1(3, 2);
        assert_eq!(e2.wedge(&e1).comps, vec![-1.0, 0.0, 0.0]);
        assert_eq!(e3.wedge(&e1).wedge(&e2).top(), 1.0);
        assert_eq!(e2.wedge(&e2).sup(), 0.0);
    }

    #[test]
    fn interior_of_basis() {
        let e12 = basis1(3, 0).wedge(&basis1(3, 1));
        assert_eq!(e12.interior(&[1.0, 0.0, 0.0]).comps, vec![0.0, 1.0, 0.0]);
        assert_eq!(e12.interior(&[0.0, 1.0, 0.0]).comps, vec![-1.0, 0.0, 0.0]);
        assert_eq!(e12.apply(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]), 1.0);
    }

    #[test]
    fn ranks_and_classes() {
        let n = 4;
        let e = |i| basis1(n, i);
        let eta = e(0).wedge(&e(1)).add(&e(2).wedge(&e(3)));
        assert_eq!(rank_2form(&eta, 1e-12), 4);
        assert_eq!(rank_2form(&e(0).wedge(&e(1)), 1e-12), 2);
        let zero2 = FormValue::zero(n, 2);
        assert_eq!(class_1form(&e(3), &zero2, 1e-12), (1, false));
        assert_eq!(class_1form(&e(3), &e(0).wedge(&e(1)), 1e-12), (3, false));
        assert_eq!(class_1form(&FormValue::zero(n, 1), &zero2, 1e-12), (0, true));
        assert_eq!(class_1form(&e(0), &e(0).wedge(&e(1)), 1e-12), (2, false));
    }

    #[test]
    fn matrix_is_antisymmetric() {
        let eta = FormValue::from_fn(3, 2, |m| m as f64);
        let m = eta.matrix();
        assert_eq!(m.clone() + m.transpose(), DMatrix::zeros(3, 3));
        let v = [0.3, -1.0, 2.0];
        let iv = eta.interior(&v);
        let mv = m.transpose() * DVector::from_column_slice(&v);
        for k in 0..3 {
            assert!((iv.comps[k] - mv[k]).abs() < 1e-14);
        }
    }
}
