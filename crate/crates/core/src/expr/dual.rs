//! Forward-mode dual numbers carrying a gradient over all variable slots.

use super::field::NUM_VARS;

/// Value and first partial derivatives with respect to every variable slot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: [f64; NUM_VARS],
}

impl Dual {
    pub fn constant(v: f64) -> Dual {
        Dual { v, d: [0.0; NUM_VARS] }
    }

    /// Independent variable seeded in `slot`.
    pub fn variable(v: f64, slot: usize) -> Dual {
        let mut d = [0.0; NUM_VARS];
        d[slot] = 1.0;
        Dual { v, d }
    }

    fn chain(self, v: f64, dv: f64) -> Dual {
        let mut d = self.d;
        for x in &mut d {
            *x *= dv;
        }
        Dual { v, d }
    }
}

/// Arithmetic needed by the tape evaluator.
pub trait Scalar: Copy {
    fn from_f64(c: f64) -> Self;
    fn value(&self) -> f64;
    fn add(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn scale(self, c: f64) -> Self;
    /// `self * c + o`
    fn axpy(self, c: f64, o: Self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn recip(self) -> Self;
    fn powi(self, n: i32) -> Self;
}

impl Scalar for f64 {
    fn from_f64(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn scale(self, c: f64) -> Self {
        self * c
    }
    fn axpy(self, c: f64, o: Self) -> Self {
        self * c + o
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn recip(self) -> Self {
        1.0 / self
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

impl Scalar for Dual {
    fn from_f64(c: f64) -> Self {
        Dual::constant(c)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn add(self, o: Self) -> Self {
        let mut d = self.d;
        for (x, y) in d.iter_mut().zip(o.d.iter()) {
            *x += y;
        }
        Dual { v: self.v + o.v, d }
    }
    fn mul(self, o: Self) -> Self {
        let mut d = [0.0; NUM_VARS];
        for i in 0..NUM_VARS {
            d[i] = self.d[i] * o.v + self.v * o.d[i];
        }
        Dual { v: self.v * o.v, d }
    }
    fn scale(self, c: f64) -> Self {
        self.chain(self.v * c, c)
    }
    fn axpy(self, c: f64, o: Self) -> Self {
        let mut d = o.d;
        for (x, y) in d.iter_mut().zip(self.d.iter()) {
            *x += c * y;
        }
        Dual { v: self.v * c + o.v, d }
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r)
    }
    fn powi(self, n: i32) -> Self {
        let p = self.v.powi(n - 1);
        self.chain(p * self.v, n as f64 * p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let x = Dual::variable(2.0, 0);
        let y = Dual::variable(3.0, 1);
        let p = x.mul(y).add(x.sin());
        assert_eq!(p.v, 6.0 + 2f64.sin());
        assert!((p.d[0] - (3.0 + 2f64.cos())).abs() < 1e-15);
        assert_eq!(p.d[1], 2.0);
    }

    #[test]
    fn powi_and_recip() {
        let x = Dual::variable(1.5, 2);
        let a = x.powi(3);
        assert!((a.d[2] - 3.0 * 1.5 * 1.5).abs() < 1e-14);
        let r = x.recip();
        assert!((r.d[2] + 1.0 / 2.25).abs() < 1e-15);
    }
}
