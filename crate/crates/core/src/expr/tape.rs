//! Flat evaluation programs compiled from scalar fields.
//!
//! Shared atoms, monomials and sub-fields are compiled once, so a tape for a
//! whole form evaluates each distinct `sin(...)` a single time.

use std::collections::HashMap;

use thiserror::Error;

use super::dual::Scalar;
use super::field::{Atom, AtomKind, Monomial, ScalarField, NUM_VARS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero while evaluating component {component}")]
    DivisionByZero { component: usize },
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Var(u8),
    Sin(u32),
    Cos(u32),
    Exp(u32),
    Recip(u32),
    Powi(u32, i32),
    Mul(u32, u32),
    Lin { constant: f64, start: u32, len: u32 },
}

#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    /// First output that needed each slot.
    owner: Vec<u32>,
    lin: Vec<(f64, u32)>,
    outputs: Vec<u32>,
}

struct Compiler {
    ops: Vec<Op>,
    owner: Vec<u32>,
    lin: Vec<(f64, u32)>,
    fields: HashMap<ScalarField, u32>,
    monos: HashMap<Monomial, u32>,
    atoms: HashMap<Atom, u32>,
    current: u32,
}

impl Compiler {
    fn push(&mut self, op: Op) -> u32 {
        self.ops.push(op);
        self.owner.push(self.current);
        (self.ops.len() - 1) as u32
    }

    fn field(&mut self, f: &ScalarField) -> u32 {
        if let Some(&s) = self.fields.get(f) {
            return s;
        }
        let p = f.poly();
        let slot = if p.terms.is_empty() {
            self.push(Op::Const(p.constant))
        } else if p.constant == 0.0 && p.terms.len() == 1 && p.terms[0].coef == 1.0 {
            self.mono(&p.terms[0].mono)
        } else {
            let mut entries = Vec::with_capacity(p.terms.len());
            for t in &p.terms {
                entries.push((t.coef, self.mono(&t.mono)));
            }
            let start = self.lin.len() as u32;
            self.lin.extend(entries);
            self.push(Op::Lin {
                constant: p.constant,
                start,
                len: p.terms.len() as u32,
            })
        };
        self.fields.insert(f.clone(), slot);
        slot
    }

    fn mono(&mut self, m: &Monomial) -> u32 {
        if let Some(&s) = self.monos.get(m) {
            return s;
        }
        let mut acc: Option<u32> = None;
        for (a, e) in m.factors.iter() {
            let base = self.atom(a);
            let p = match *e {
                1 => base,
                -1 => self.push(Op::Recip(base)),
                e => self.push(Op::Powi(base, e)),
            };
            acc = Some(match acc {
                None => p,
                Some(q) => self.push(Op::Mul(q, p)),
            });
        }
        let slot = acc.unwrap_or_else(|| self.push(Op::Const(1.0)));
        self.monos.insert(m.clone(), slot);
        slot
    }

    fn atom(&mut self, a: &Atom) -> u32 {
        if let Some(&s) = self.atoms.get(a) {
            return s;
        }
        let slot = match a.kind() {
            AtomKind::Var(v) => self.push(Op::Var(v.slot() as u8)),
            AtomKind::Sin(u) => {
                let s = self.field(u);
                self.push(Op::Sin(s))
            }
            AtomKind::Cos(u) => {
                let s = self.field(u);
                self.push(Op::Cos(s))
            }
            AtomKind::Exp(u) => {
                let s = self.field(u);
                self.push(Op::Exp(s))
            }
            AtomKind::Base(q) => self.field(q),
        };
        self.atoms.insert(a.clone(), slot);
        slot
    }
}

impl Tape {
    pub fn compile(fields: &[ScalarField]) -> Tape {
        let mut c = Compiler {
            ops: Vec::new(),
            owner: Vec::new(),
            lin: Vec::new(),
            fields: HashMap::new(),
            monos: HashMap::new(),
            atoms: HashMap::new(),
            current: 0,
        };
        let mut outputs = Vec::with_capacity(fields.len());
        for (k, f) in fields.iter().enumerate() {
            c.current = k as u32;
            outputs.push(c.field(f));
        }
        Tape {
            ops: c.ops,
            owner: c.owner,
            lin: c.lin,
            outputs,
        }
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Evaluates every output. `vars` holds coordinates then `t`.
    pub fn eval<S: Scalar>(&self, vars: &[S; NUM_VARS], out: &mut [S]) -> Result<(), EvalError> {
        self.eval_with(vars, out, &mut Vec::with_capacity(self.ops.len()))
    }

    /// As [`Tape::eval`], reusing `slots` as scratch space.
    pub fn eval_with<S: Scalar>(&self, vars: &[S; NUM_VARS], out: &mut [S], slots: &mut Vec<S>) -> Result<(), EvalError> {
        slots.clear();
        for (i, op) in self.ops.iter().enumerate() {
            let v = match *op {
                Op::Const(c) => S::from_f64(c),
                Op::Var(k) => vars[k as usize],
                Op::Sin(a) => slots[a as usize].sin(),
                Op::Cos(a) => slots[a as usize].cos(),
                Op::Exp(a) => slots[a as usize].exp(),
                Op::Recip(a) => {
                    let x = slots[a as usize];
                    if x.value() == 0.0 {
                        return Err(self.div_error(i));
                    }
                    x.recip()
                }
                Op::Powi(a, n) => {
                    let x = slots[a as usize];
                    if n < 0 && x.value() == 0.0 {
                        return Err(self.div_error(i));
                    }
                    x.powi(n)
                }
                Op::Mul(a, b) => slots[a as usize].mul(slots[b as usize]),
                Op::Lin { constant, start, len } => {
                    let mut acc = S::from_f64(constant);
                    for &(c, s) in &self.lin[start as usize..(start + len) as usize] {
                        acc = slots[s as usize].axpy(c, acc);
                    }
                    acc
                }
            };
            if !v.value().is_finite() && matches!(op, Op::Recip(_) | Op::Powi(..)) {
                return Err(self.div_error(i));
            }
            slots.push(v);
        }
        for (o, &s) in out.iter_mut().zip(self.outputs.iter()) {
            *o = slots[s as usize];
        }
        Ok(())
    }

    fn div_error(&self, slot: usize) -> EvalError {
        EvalError::DivisionByZero {
            component: self.owner[slot] as usize,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::dual::Dual;
    use crate::expr::field::Var;

    #[test]
    fn shared_atoms_compile_once() {
        let x = ScalarField::coord(0);
        let s = x.sin();
        let f = &s * &s + s.scale(2.0);
        let g = s.scale(3.0);
        let tape = Tape::compile(&[f, g]);
        let sins = tape.ops.iter().filter(|o| matches!(o, Op::Sin(_))).count();
        assert_eq!(sins, 1);
    }

    #[test]
    fn dual_gradient_matches_symbolic() {
        let x = ScalarField::coord(0);
        let t = ScalarField::t();
        let f = (&x * &t).cos() / (ScalarField::constant(2.0) + x.sin());
        let tape = Tape::compile(&[f.clone()]);
        let mut vars = [Dual::constant(0.0); NUM_VARS];
        vars[0] = Dual::variable(0.4, 0);
        vars[Var::T.slot()] = Dual::variable(0.9, Var::T.slot());
        let mut out = [Dual::constant(0.0)];
        tape.eval(&vars, &mut out).unwrap();
        let mut p = [0.0; NUM_VARS];
        p[0] = 0.4;
        p[Var::T.slot()] = 0.9;
        let dx = f.derivative(Var::coord(0)).eval(&p).unwrap();
        let dt = f.derivative(Var::T).eval(&p).unwrap();
        assert!((out[0].d[0] - dx).abs() < 1e-14);
        assert!((out[0].d[Var::T.slot()] - dt).abs() < 1e-14);
    }

    #[test]
    fn division_error_names_component() {
        let x = ScalarField::coord(0);
        let ok = x.clone();
        let bad = ScalarField::one() / &x;
        let tape = Tape::compile(&[ok, bad]);
        let err = tape.eval(&[0.0; NUM_VARS], &mut [0.0, 0.0]).unwrap_err();
        assert_eq!(err, EvalError::DivisionByZero { component: 1 });
    }
}
