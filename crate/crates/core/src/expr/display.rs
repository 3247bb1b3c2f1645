//! Text rendering of expressions in the input syntax.

use std::fmt;

use num_traits::{One, Signed};

use super::{Atom, Expr, Monomial, Poly, Symbol, Q};

/// Supplies printable names for non-atom symbols.
pub trait SymbolNames {
    fn symbol_name(&self, s: &Symbol) -> String;
}

/// Positional names used by `Debug`.
pub(super) struct DebugNames;

impl SymbolNames for DebugNames {
    fn symbol_name(&self, s: &Symbol) -> String {
        let idx = |m: &super::MultiIndex| format!("{:?}", m.entries());
        match s {
            Symbol::Indep(i) => format!("x{i}"),
            Symbol::Jet(j) if j.alpha.is_zero() => format!("u{}", j.dep),
            Symbol::Jet(j) => format!("u{}{}", j.dep, idx(&j.alpha)),
            Symbol::Fun { id, deriv } if deriv.is_zero() => format!("f{id}"),
            Symbol::Fun { id, deriv } => format!("f{id}{}", idx(deriv)),
            Symbol::Param(i) => format!("c{i}"),
            Symbol::Inv(i) => format!("w{i}"),
            Symbol::Unknown { id, deriv } if deriv.is_zero() => format!("phi{id}"),
            Symbol::Unknown { id, deriv } => format!("phi{id}{}", idx(deriv)),
            Symbol::Atom(_) => "atom".into(),
        }
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a dyn SymbolNames,
}

impl<'a> ExprDisplay<'a> {
    pub(super) fn new(expr: &'a Expr, names: &'a dyn SymbolNames) -> Self {
        ExprDisplay { expr, names }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = self.expr;
        let num = poly_string(e.numer(), self.names);
        if e.denom().is_one() {
            return f.write_str(&num);
        }
        let den = poly_string(e.denom(), self.names);
        let num = if e.numer().len() > 1 { format!("({num})") } else { num };
        let simple_den = e.denom().is_monomial()
            && e.denom().leading().is_some_and(|(m, c)| c.is_one() && m.len() == 1 && m.iter().all(|(_, k)| *k == 1));
        if simple_den {
            write!(f, "{num}/{den}")
        } else {
            write!(f, "{num}/({den})")
        }
    }
}

fn rational_string(c: &Q) -> String {
    if c.denom().is_one() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn symbol_power(s: &Symbol, e: u32, names: &dyn SymbolNames) -> String {
    let base = match s {
        Symbol::Atom(a) => match a.as_ref() {
            Atom::Exp(arg) => format!("exp({})", arg.display(names)),
            Atom::Log(arg) => format!("log({})", arg.display(names)),
            Atom::Root { base, q } => {
                return format!("({})^({}/{})", base.display(names), e, q);
            }
        },
        _ => names.symbol_name(s),
    };
    if e == 1 {
        base
    } else {
        format!("{base}^{e}")
    }
}

fn monomial_string(m: &Monomial, names: &dyn SymbolNames) -> String {
    m.iter().map(|(s, e)| symbol_power(s, *e, names)).collect::<Vec<_>>().join("*")
}

/// Highest derivative order in a monomial; orders terms for printing.
fn derivative_weight(m: &Monomial) -> u32 {
    m.iter()
        .map(|(s, _)| match s {
            Symbol::Jet(j) => j.order() + 1,
            Symbol::Unknown { deriv, .. } => deriv.order() + 1,
            _ => 0,
        })
        .max()
        .unwrap_or(0)
}

pub(super) fn poly_string(p: &Poly, names: &dyn SymbolNames) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut terms: Vec<(&Monomial, &Q)> = p.terms().rev().collect();
    terms.sort_by_key(|(m, _)| std::cmp::Reverse(derivative_weight(m)));
    let mut out = String::new();
    for (i, (m, c)) in terms.into_iter().enumerate() {
        let neg = c.is_negative();
        let abs = c.abs();
        if i == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        if m.is_one() {
            out.push_str(&rational_string(&abs));
        } else if abs.is_one() {
            out.push_str(&monomial_string(m, names));
        } else {
            out.push_str(&rational_string(&abs));
            out.push('*');
            out.push_str(&monomial_string(m, names));
        }
    }
    out
}
