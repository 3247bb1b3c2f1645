//! Unnormalized expression trees, as produced by a parser.

use super::{Expr, ExprError, Symbol, Q};

#[derive(Clone, Debug, PartialEq)]
pub enum RawExpr {
    Num(Q),
    Sym(Symbol),
    Add(Box<RawExpr>, Box<RawExpr>),
    Sub(Box<RawExpr>, Box<RawExpr>),
    Mul(Box<RawExpr>, Box<RawExpr>),
    Div(Box<RawExpr>, Box<RawExpr>),
    Neg(Box<RawExpr>),
    Pow(Box<RawExpr>, Q),
    Exp(Box<RawExpr>),
    Log(Box<RawExpr>),
}

/// Brings a raw tree into canonical form.
pub fn normalize(r: &RawExpr) -> Result<Expr, ExprError> {
    Ok(match r {
        RawExpr::Num(c) => Expr::rational(c.clone()),
        RawExpr::Sym(s) => Expr::symbol(s.clone()),
        RawExpr::Add(a, b) => &normalize(a)? + &normalize(b)?,
        RawExpr::Sub(a, b) => &normalize(a)? - &normalize(b)?,
        RawExpr::Mul(a, b) => &normalize(a)? * &normalize(b)?,
        RawExpr::Div(a, b) => normalize(a)?.checked_div(&normalize(b)?)?,
        RawExpr::Neg(a) => -normalize(a)?,
        RawExpr::Pow(a, e) => normalize(a)?.pow_rational(e)?,
        RawExpr::Exp(a) => Expr::exp(normalize(a)?),
        RawExpr::Log(a) => Expr::log(normalize(a)?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::q_int;

    #[test]
    fn normalizes_nested_quotients() {
        let t = || Box::new(RawExpr::Sym(Symbol::Indep(0)));
        let r = RawExpr::Div(Box::new(RawExpr::Mul(t(), t())), t());
        assert_eq!(normalize(&r).unwrap(), Expr::indep(0));
        let z = RawExpr::Div(t(), Box::new(RawExpr::Sub(t(), t())));
        assert!(matches!(normalize(&z), Err(ExprError::Malformed(_))));
        let p = RawExpr::Pow(t(), q_int(-2));
        assert_eq!(normalize(&p).unwrap(), &Expr::one() / &(&Expr::indep(0) * &Expr::indep(0)));
    }
}
