//! Coefficient expressions: parsing, canonical fields and compiled evaluation.

pub mod dual;
pub mod field;
pub mod syntax;
pub mod tape;

pub use dual::{Dual, Scalar};
pub use field::{ScalarField, Var, MAX_DIM, NUM_VARS};
pub use syntax::{parse, ParseError, Syntax};
pub use tape::{EvalError, Tape};

use syntax::{BinOp, Func};

/// Reserved identifiers that cannot name a coordinate.
pub const RESERVED: [&str; 4] = ["t", "sin", "cos", "exp"];

/// Parses `src` and resolves identifiers against `coords` (and `t`).
pub fn parse_field(src: &str, coords: &[String]) -> Result<ScalarField, ParseError> {
    let tree = parse(src)?;
    lower(&tree, coords)
}

pub fn lower(tree: &Syntax, coords: &[String]) -> Result<ScalarField, ParseError> {
    Ok(match tree {
        Syntax::Num(v) => ScalarField::constant(*v),
        Syntax::Ident(name, span) => {
            if name == "t" {
                ScalarField::t()
            } else if let Some(i) = coords.iter().position(|c| c == name) {
                ScalarField::coord(i)
            } else {
                return Err(ParseError {
                    line: span.line,
                    column: span.column,
                    message: format!("unknown identifier '{name}'"),
                });
            }
        }
        Syntax::Neg(inner) => lower(inner, coords)?.neg(),
        Syntax::Bin(op, a, b) => {
            let (a, b) = (lower(a, coords)?, lower(b, coords)?);
            match op {
                BinOp::Add => a.add(&b),
                BinOp::Sub => a.sub(&b),
                BinOp::Mul => a.mul(&b),
                BinOp::Div => a.div(&b),
            }
        }
        Syntax::Call(func, arg) => {
            let u = lower(arg, coords)?;
            match func {
                Func::Sin => u.sin(),
                Func::Cos => u.cos(),
                Func::Exp => u.exp(),
            }
        }
    })
}

/// Evaluation vector from coordinates and `t`.
pub fn vars_at(coords: &[f64], t: f64) -> [f64; NUM_VARS] {
    let mut v = [0.0; NUM_VARS];
    v[..coords.len()].copy_from_slice(coords);
    v[Var::T.slot()] = t;
    v
}

/// Dual evaluation vector seeding every coordinate and `t`.
pub fn dual_vars_at(coords: &[f64], t: f64) -> [Dual; NUM_VARS] {
    let mut v = [Dual::constant(0.0); NUM_VARS];
    for (i, &c) in coords.iter().enumerate() {
        v[i] = Dual::variable(c, i);
    }
    v[Var::T.slot()] = Dual::variable(t, Var::T.slot());
    v
}
