//! Canonical symbolic expressions over jet coordinates.
//!
//! An [`Expr`] is a quotient of two polynomials with exact rational
//! coefficients. Numerator and denominator are coprime and the denominator is
//! monic, so two expressions are equal as values iff they are structurally
//! equal. Transcendental atoms (`exp`, `log`, rational roots) are treated as
//! extra symbols; a few rewrite rules keep them close to canonical, and zero
//! testing falls back to numerical evaluation when they are present.

mod display;
mod poly;
mod raw;
mod symbol;
mod zero;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use display::{ExprDisplay, SymbolNames};
pub use poly::{q_int, Monomial, Poly, Q};
pub use raw::{normalize, RawExpr};
pub use symbol::{Atom, JetVar, MultiIndex, Symbol};
pub use zero::{Confidence, ZeroTest, ZeroVerdict};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    #[error("malformed expression: {0}")]
    Malformed(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unsupported form: {0}")]
    UnsupportedForm(String),
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Expr {
    num: Poly,
    den: Poly,
}

impl Default for Expr {
    fn default() -> Self {
        Expr::zero()
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display(&display::DebugNames))
    }
}

impl Expr {
    pub fn zero() -> Self {
        Expr { num: Poly::zero(), den: Poly::one() }
    }

    pub fn one() -> Self {
        Expr::int(1)
    }

    pub fn int(n: i64) -> Self {
        Expr::rational(q_int(n))
    }

    pub fn rational(c: Q) -> Self {
        Expr { num: Poly::constant(c), den: Poly::one() }
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Expr::rational(Q::new(n.into(), d.into()))
    }

    pub fn symbol(s: Symbol) -> Self {
        Expr { num: Poly::symbol(s), den: Poly::one() }
    }

    pub fn indep(i: usize) -> Self {
        Expr::symbol(Symbol::Indep(i as u16))
    }

    pub fn jet(dep: usize, alpha: MultiIndex) -> Self {
        Expr::symbol(Symbol::jet(dep, alpha))
    }

    pub fn jet_var(j: &JetVar) -> Self {
        Expr::symbol(Symbol::Jet(j.clone()))
    }

    /// A polynomial taken as an expression; canonicalizes atom products.
    pub fn from_poly(p: Poly) -> Self {
        if poly_has_atoms(&p) {
            return Expr::from_parts_unchecked(p, Poly::one());
        }
        Expr { num: p, den: Poly::one() }
    }

    /// `num / den`, reduced to canonical form.
    pub fn from_parts(num: Poly, den: Poly) -> Result<Self, ExprError> {
        if den.is_zero() {
            return Err(ExprError::Malformed("division by an identically zero denominator".into()));
        }
        Ok(Expr::from_parts_unchecked(num, den))
    }

    fn from_parts_unchecked(num: Poly, den: Poly) -> Self {
        let (num, den) = cancel(num, den);
        if poly_has_atoms(&num) || poly_has_atoms(&den) {
            canon_atoms(num, den)
        } else {
            Expr { num, den }
        }
    }

    pub fn numer(&self) -> &Poly {
        &self.num
    }

    pub fn denom(&self) -> &Poly {
        &self.den
    }

    /// The numerator as an expression.
    pub fn numerator(&self) -> Expr {
        Expr::from_poly(self.num.clone())
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_one() && self.num.is_one()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn as_constant(&self) -> Option<Q> {
        if self.den.is_one() {
            self.num.as_constant()
        } else {
            None
        }
    }

    /// A nonzero rational constant.
    pub fn is_nonzero_constant(&self) -> bool {
        self.as_constant().is_some_and(|c| !c.is_zero())
    }

    pub fn has_atoms(&self) -> bool {
        poly_has_atoms(&self.num) || poly_has_atoms(&self.den)
    }

    /// Symbols appearing at top level (atoms count as single symbols).
    pub fn top_symbols(&self) -> BTreeSet<Symbol> {
        let mut s = self.num.symbols();
        s.extend(self.den.symbols());
        s
    }

    /// All non-atom symbols, including those inside atom arguments.
    pub fn base_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        for s in self.top_symbols() {
            match &s {
                Symbol::Atom(a) => out.extend(a.args().base_symbols()),
                _ => {
                    out.insert(s);
                }
            }
        }
        out
    }

    /// True if some base symbol satisfies `pred`.
    pub fn mentions(&self, pred: &dyn Fn(&Symbol) -> bool) -> bool {
        self.top_symbols().iter().any(|s| match s {
            Symbol::Atom(a) => a.args().mentions(pred),
            _ => pred(s),
        })
    }

    pub fn contains_symbol(&self, s: &Symbol) -> bool {
        self.mentions(&|x| x == s)
    }

    /// Highest order of a jet variable, if any jet variable appears.
    pub fn jet_order(&self) -> Option<u32> {
        self.base_symbols().iter().filter_map(|s| s.as_jet().map(|j| j.order())).max()
    }

    /// Jet variables of positive order appearing anywhere.
    pub fn derivative_vars(&self) -> BTreeSet<JetVar> {
        self.base_symbols()
            .into_iter()
            .filter_map(|s| match s {
                Symbol::Jet(j) if j.order() > 0 => Some(j),
                _ => None,
            })
            .collect()
    }

    pub fn has_derivatives(&self) -> bool {
        self.mentions(&|s| s.is_derivative())
    }

    pub fn checked_div(&self, other: &Expr) -> Result<Expr, ExprError> {
        Ok(self * &other.recip()?)
    }

    pub fn recip(&self) -> Result<Expr, ExprError> {
        if self.num.is_zero() {
            return Err(ExprError::Malformed("division by an identically zero denominator".into()));
        }
        Ok(Expr::from_parts_unchecked(self.den.clone(), self.num.clone()))
    }

    pub fn powi(&self, e: i64) -> Result<Expr, ExprError> {
        if e < 0 {
            return self.recip()?.powi(-e);
        }
        let mut e = e as u64;
        let mut base = self.clone();
        let mut acc = Expr::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Ok(acc)
    }

    /// `self^(p/q)` for a rational exponent.
    pub fn pow_rational(&self, exp: &Q) -> Result<Expr, ExprError> {
        let p = exp.numer().to_i64().ok_or_else(|| ExprError::UnsupportedForm("exponent too large".into()))?;
        let q = exp.denom().to_u32().ok_or_else(|| ExprError::UnsupportedForm("exponent too large".into()))?;
        if q == 1 {
            return self.powi(p);
        }
        if self.is_zero() {
            return if p > 0 {
                Ok(Expr::zero())
            } else {
                Err(ExprError::Malformed("zero raised to a negative power".into()))
            };
        }
        if let Some(c) = self.as_constant() {
            if let Some(r) = rational_root(&c, q) {
                return Expr::rational(r).powi(p);
            }
        }
        let top = root_of_poly(&self.num, q)?;
        let bottom = root_of_poly(&self.den, q)?;
        top.checked_div(&bottom)?.powi(p)
    }

    pub fn exp(arg: Expr) -> Expr {
        if arg.is_zero() {
            return Expr::one();
        }
        if let Some(Symbol::Atom(a)) = arg.single_symbol() {
            if let Atom::Log(inner) = a.as_ref() {
                return inner.clone();
            }
        }
        Expr::symbol(Symbol::Atom(Arc::new(Atom::Exp(arg))))
    }

    pub fn log(arg: Expr) -> Result<Expr, ExprError> {
        if arg.is_zero() {
            return Err(ExprError::Malformed("log of zero".into()));
        }
        if arg.is_one() {
            return Ok(Expr::zero());
        }
        if let Some(Symbol::Atom(a)) = arg.single_symbol() {
            if let Atom::Exp(inner) = a.as_ref() {
                return Ok(inner.clone());
            }
        }
        Ok(Expr::symbol(Symbol::Atom(Arc::new(Atom::Log(arg)))))
    }

    /// The symbol if `self` is exactly one symbol with coefficient 1.
    pub fn single_symbol(&self) -> Option<&Symbol> {
        if !self.den.is_one() || !self.num.is_monomial() {
            return None;
        }
        let (m, c) = self.num.leading()?;
        if !c.is_one() || m.len() != 1 {
            return None;
        }
        let (s, e) = m.iter().next()?;
        (*e == 1).then_some(s)
    }

    // ---- differentiation ------------------------------------------------

    /// Partial derivative treating every symbol as independent; atoms are
    /// differentiated by the chain rule.
    pub fn diff_symbol(&self, s: &Symbol) -> Expr {
        let dn = poly_diff(&self.num, s);
        if self.den.is_one() {
            return dn;
        }
        let dd = poly_diff(&self.den, s);
        if dd.is_zero() {
            return &dn / &Expr::from_poly(self.den.clone());
        }
        quotient_rule(&self.num, &self.den, &dn, &dd)
    }

    /// Applies the derivation determined by its values `action(s)` on base
    /// symbols: `Σ_s ∂self/∂s · action(s)`.
    pub fn derive_by(&self, action: &dyn Fn(&Symbol) -> Option<Expr>) -> Expr {
        let mut dn = Expr::zero();
        let mut dd = Expr::zero();
        for s in self.base_symbols() {
            if let Some(v) = action(&s) {
                if v.is_zero() {
                    continue;
                }
                let a = poly_diff(&self.num, &s);
                if !a.is_zero() {
                    dn = &dn + &(&a * &v);
                }
                if !self.den.is_one() {
                    let b = poly_diff(&self.den, &s);
                    if !b.is_zero() {
                        dd = &dd + &(&b * &v);
                    }
                }
            }
        }
        if dd.is_zero() {
            return if self.den.is_one() { dn } else { &dn / &Expr::from_poly(self.den.clone()) };
        }
        quotient_rule(&self.num, &self.den, &dn, &dd)
    }

    // ---- substitution ---------------------------------------------------

    pub fn substitute(&self, bindings: &BTreeMap<Symbol, Expr>) -> Expr {
        if bindings.is_empty() {
            return self.clone();
        }
        self.substitute_with(&|s| bindings.get(s).cloned())
    }

    /// Simultaneous substitution driven by a lookup function; atom arguments
    /// are substituted recursively.
    pub fn substitute_with(&self, lookup: &dyn Fn(&Symbol) -> Option<Expr>) -> Expr {
        let n = subst_poly(&self.num, lookup);
        if self.den.is_one() {
            return n;
        }
        let d = subst_poly(&self.den, lookup);
        n.checked_div(&d).unwrap_or_else(|_| {
            panic!("substitution made a denominator vanish identically")
        })
    }

    pub fn substitute_checked(&self, bindings: &BTreeMap<Symbol, Expr>) -> Result<Expr, ExprError> {
        let lookup = |s: &Symbol| bindings.get(s).cloned();
        let n = subst_poly(&self.num, &lookup);
        if self.den.is_one() {
            return Ok(n);
        }
        n.checked_div(&subst_poly(&self.den, &lookup))
    }

    // ---- coefficient extraction -----------------------------------------

    /// Splits `self` as `Σ coeff · monomial` where monomials are built from
    /// the symbols selected by `pred`.
    pub fn coefficients_in(&self, pred: &dyn Fn(&Symbol) -> bool) -> Result<BTreeMap<Monomial, Expr>, ExprError> {
        let bad_den = self.den.symbols().iter().any(|s| match s {
            Symbol::Atom(a) => a.args().mentions(pred),
            _ => pred(s),
        });
        if bad_den {
            return Err(ExprError::UnsupportedForm("selected variable appears in a denominator".into()));
        }
        for s in self.num.symbols() {
            if let Symbol::Atom(a) = &s {
                if a.args().mentions(pred) {
                    return Err(ExprError::UnsupportedForm(
                        "selected variable appears inside a transcendental atom".into(),
                    ));
                }
            }
        }
        let mut grouped: BTreeMap<Monomial, Poly> = BTreeMap::new();
        for (m, c) in self.num.terms() {
            let (sel, rest) = m.partition(pred);
            grouped.entry(sel).or_default().add_term(rest, c.clone());
        }
        let den = Expr::from_poly(self.den.clone());
        let mut out = BTreeMap::new();
        for (m, p) in grouped {
            if p.is_zero() {
                continue;
            }
            let c = &Expr::from_poly(p) / &den;
            out.insert(m, c);
        }
        Ok(out)
    }

    /// Coefficient list of `self` viewed as a polynomial in `s` (numerator
    /// only; `s` must not appear in the denominator or in atoms).
    pub fn as_polynomial_in(&self, s: &Symbol) -> Result<Vec<Expr>, ExprError> {
        let map = self.coefficients_in(&|x| x == s)?;
        let deg = map.keys().map(|m| m.degree_of(s)).max().unwrap_or(0) as usize;
        let mut out = vec![Expr::zero(); deg + 1];
        for (m, c) in map {
            out[m.degree_of(s) as usize] = c;
        }
        Ok(out)
    }

    pub fn display<'a>(&'a self, names: &'a dyn SymbolNames) -> ExprDisplay<'a> {
        ExprDisplay::new(self, names)
    }

    pub fn eval_f64(&self, values: &dyn Fn(&Symbol) -> Option<f64>) -> Option<f64> {
        zero::eval(self, values)
    }

    /// Term count of numerator and denominator, a rough size measure.
    pub fn size(&self) -> usize {
        self.num.weight() + self.den.weight()
    }
}

// ---- canonical form helpers --------------------------------------------

fn poly_has_atoms(p: &Poly) -> bool {
    p.any_symbol(|s| matches!(s, Symbol::Atom(_)))
}

fn cancel(num: Poly, den: Poly) -> (Poly, Poly) {
    if num.is_zero() {
        return (Poly::zero(), Poly::one());
    }
    if let Some(c) = den.as_constant() {
        if c.is_one() {
            return (num, den);
        }
        return (num.scale(&(Q::one() / c)), Poly::one());
    }
    let g = num.gcd(&den);
    let (num, den) = if g.is_one() {
        (num, den)
    } else {
        (num.div_exact(&g).expect("gcd divides"), den.div_exact(&g).expect("gcd divides"))
    };
    let lc = den.leading_coeff();
    if lc.is_one() {
        (num, den)
    } else {
        let k = Q::one() / lc;
        (num.scale(&k), den.scale(&k))
    }
}

fn rational_root(c: &Q, q: u32) -> Option<Q> {
    if c.is_negative() && q % 2 == 0 {
        return None;
    }
    let n = c.numer().abs().nth_root(q);
    let d = c.denom().nth_root(q);
    let cand = Q::new(n, d);
    let cand = if c.is_negative() { -cand } else { cand };
    let mut p = Q::one();
    for _ in 0..q {
        p *= &cand;
    }
    (&p == c).then_some(cand)
}

/// `p^(1/q)` as a product of root atoms.
fn root_of_poly(p: &Poly, q: u32) -> Result<Expr, ExprError> {
    if p.is_one() {
        return Ok(Expr::one());
    }
    if p.is_monomial() {
        let (m, c) = p.leading().expect("nonzero");
        let mut acc = if c.is_one() {
            Expr::one()
        } else {
            match rational_root(c, q) {
                Some(r) => Expr::rational(r),
                None => root_atom(Poly::constant(c.clone()), q),
            }
        };
        for (s, e) in m.iter() {
            let (whole, part) = e.div_rem(&q);
            let base = Expr::symbol(s.clone());
            acc = &acc * &base.powi(whole as i64)?;
            if part > 0 {
                acc = &acc * &root_atom(Poly::symbol(s.clone()), q).powi(part as i64)?;
            }
        }
        return Ok(acc);
    }
    Ok(root_atom(p.clone(), q))
}

fn root_atom(base: Poly, q: u32) -> Expr {
    Expr::symbol(Symbol::Atom(Arc::new(Atom::Root { base: Expr { num: base, den: Poly::one() }, q })))
}

/// Brings atom products into normal form: at most one `exp` per term,
/// root powers below their index, and atom-only single-term denominators
/// moved to the numerator.
fn canon_atoms(mut num: Poly, mut den: Poly) -> Expr {
    for _ in 0..8 {
        let mut changed = false;
        if den.is_monomial() {
            let (m, c) = den.leading().map(|(m, c)| (m.clone(), c.clone())).expect("nonzero");
            let (atoms, rest) = m.partition(|s| matches!(s, Symbol::Atom(a) if !matches!(a.as_ref(), Atom::Log(_))));
            if !atoms.is_one() {
                let mut mult = Poly::one();
                let mut new_den = Poly::term(c, rest);
                for (s, e) in atoms.iter() {
                    let Symbol::Atom(a) = s else { unreachable!() };
                    match a.as_ref() {
                        Atom::Exp(arg) => {
                            let inv = Expr::exp(-(arg * &Expr::int(i64::from(*e))));
                            mult = mult.mul(&inv.num);
                        }
                        Atom::Root { base, q } => {
                            let pad = (q - e % q) % q;
                            let whole = (e + pad) / q;
                            mult = mult.mul(&Poly::term(Q::one(), Monomial::var(s.clone(), pad)));
                            new_den = new_den.mul(&base.num.pow(whole));
                        }
                        Atom::Log(_) => unreachable!(),
                    }
                }
                num = num.mul(&mult);
                den = new_den;
                changed = true;
            }
        }
        let (n2, c1) = canon_atom_terms(&num);
        let (d2, c2) = canon_atom_terms(&den);
        changed |= c1 | c2;
        let (n3, d3) = cancel(n2, d2);
        num = n3;
        den = d3;
        if !changed {
            break;
        }
    }
    Expr { num, den }
}

fn canon_atom_terms(p: &Poly) -> (Poly, bool) {
    let mut changed = false;
    let mut out = Poly::zero();
    for (m, c) in p.terms() {
        let exps: Vec<(&Expr, u32)> = m
            .iter()
            .filter_map(|(s, e)| match s {
                Symbol::Atom(a) => match a.as_ref() {
                    Atom::Exp(arg) => Some((arg, *e)),
                    _ => None,
                },
                _ => None,
            })
            .collect();
        let roots_over = m.iter().any(|(s, e)| matches!(s, Symbol::Atom(a) if matches!(a.as_ref(), Atom::Root { q, .. } if e >= q)));
        let merge_exp = exps.len() > 1 || exps.iter().any(|(_, e)| *e > 1);
        if !merge_exp && !roots_over {
            out.add_term(m.clone(), c.clone());
            continue;
        }
        changed = true;
        let mut rest_pairs = Vec::new();
        let mut factor = Poly::one();
        let mut exp_arg = Expr::zero();
        for (s, e) in m.iter() {
            match s {
                Symbol::Atom(a) => match a.as_ref() {
                    Atom::Exp(arg) => exp_arg = &exp_arg + &(arg * &Expr::int(i64::from(*e))),
                    Atom::Root { base, q } => {
                        let (whole, part) = e.div_rem(q);
                        if whole > 0 {
                            factor = factor.mul(&base.num.pow(whole));
                        }
                        rest_pairs.push((s.clone(), part));
                    }
                    Atom::Log(_) => rest_pairs.push((s.clone(), *e)),
                },
                _ => rest_pairs.push((s.clone(), *e)),
            }
        }
        let e = Expr::exp(exp_arg);
        let term = Poly::term(c.clone(), Monomial::from_pairs(rest_pairs));
        out = out.add(&term.mul(&factor).mul(&e.num));
    }
    (out, changed)
}

fn atom_depends_on(a: &Atom, s: &Symbol) -> bool {
    a.args().contains_symbol(s)
}

fn atom_diff(sym: &Symbol, a: &Atom, s: &Symbol) -> Expr {
    match a {
        Atom::Exp(arg) => &Expr::symbol(sym.clone()) * &arg.diff_symbol(s),
        Atom::Log(arg) => &arg.diff_symbol(s) / arg,
        Atom::Root { base, q } => {
            let k = Expr::rational(Q::new(1.into(), (*q as i64).into()));
            &(&(&k * &Expr::symbol(sym.clone())) * &base.diff_symbol(s)) / base
        }
    }
}

/// `(dn·d − n·dd) / d²` for a reduced fraction `n/d`. With `g = gcd(d, dd)`
/// this is `(dn·(d/g) − n·(dd/g)) / (d·(d/g))`, and any factor left to
/// cancel divides `g`.
fn quotient_rule(n: &Poly, d: &Poly, dn: &Expr, dd: &Expr) -> Expr {
    let plain = dn.den.is_one() && dd.den.is_one();
    if plain && !poly_has_atoms(n) && !poly_has_atoms(d) && !poly_has_atoms(&dn.num) && !poly_has_atoms(&dd.num) {
        let g = d.gcd(&dd.num);
        let dg = d.div_exact(&g).expect("gcd divides");
        let ddg = dd.num.div_exact(&g).expect("gcd divides");
        let mut num = dn.num.mul(&dg).sub(&n.mul(&ddg));
        if num.is_zero() {
            return Expr::zero();
        }
        let mut den = d.mul(&dg);
        if !g.is_constant() {
            let h = num.gcd(&g);
            if !h.is_one() {
                num = num.div_exact(&h).expect("gcd divides");
                den = den.div_exact(&h).expect("gcd divides");
            }
        }
        if den.is_constant() {
            return Expr::from_poly(num.scale(&(Q::one() / den.leading_coeff())));
        }
        let k = Q::one() / den.leading_coeff();
        return Expr { num: num.scale(&k), den: den.scale(&k) };
    }
    let ne = Expr::from_poly(n.clone());
    let de = Expr::from_poly(d.clone());
    &(&(dn * &de) - &(&ne * dd)) / &(&de * &de)
}

fn poly_diff(p: &Poly, s: &Symbol) -> Expr {
    let mut plain = Poly::zero();
    let mut extra = Expr::zero();
    for (m, c) in p.terms() {
        for (x, e) in m.iter() {
            if x == s {
                let rest = m.div(&Monomial::var(x.clone(), 1)).expect("divides");
                plain.add_term(rest, c * q_int(i64::from(*e)));
            } else if let Symbol::Atom(a) = x {
                if atom_depends_on(a, s) {
                    let rest = m.div(&Monomial::var(x.clone(), 1)).expect("divides");
                    let coeff = Expr::from_poly(Poly::term(c * q_int(i64::from(*e)), rest));
                    extra = &extra + &(&coeff * &atom_diff(x, a, s));
                }
            }
        }
    }
    &Expr::from_poly(plain) + &extra
}

fn rebuild_atom(a: &Atom, lookup: &dyn Fn(&Symbol) -> Option<Expr>) -> Option<Expr> {
    let arg = a.args();
    let touched = arg.mentions(&|s| lookup(s).is_some());
    if !touched {
        return None;
    }
    let new_arg = arg.substitute_with(lookup);
    Some(match a {
        Atom::Exp(_) => Expr::exp(new_arg),
        Atom::Log(_) => Expr::log(new_arg).expect("log argument stays nonzero"),
        Atom::Root { q, .. } => new_arg
            .pow_rational(&Q::new(1.into(), (*q as i64).into()))
            .expect("root base stays nonzero"),
    })
}

fn subst_poly(p: &Poly, lookup: &dyn Fn(&Symbol) -> Option<Expr>) -> Expr {
    // values of the symbols that change
    let mut values: BTreeMap<Symbol, Expr> = BTreeMap::new();
    for s in p.symbols() {
        let v = match &s {
            Symbol::Atom(a) => lookup(&s).or_else(|| rebuild_atom(a, lookup)),
            _ => lookup(&s),
        };
        if let Some(v) = v {
            values.insert(s, v);
        }
    }
    if values.is_empty() {
        return Expr::from_poly(p.clone());
    }
    let mut plain = Poly::zero();
    let mut groups: BTreeMap<Monomial, Poly> = BTreeMap::new();
    for (m, c) in p.terms() {
        let (hit, rest) = m.partition(|s| values.contains_key(s));
        if hit.is_one() {
            plain.add_term(rest, c.clone());
        } else {
            groups.entry(hit).or_default().add_term(rest, c.clone());
        }
    }
    let atom_free = !poly_has_atoms(p) && values.values().all(|v| !poly_has_atoms(&v.num) && !poly_has_atoms(&v.den));
    if atom_free && values.values().any(|v| !v.den.is_one()) {
        return subst_common_denominator(plain, groups, &values);
    }
    let mut powers: BTreeMap<(Symbol, u32), Expr> = BTreeMap::new();
    let mut acc = Expr::from_poly(plain);
    for (hit, rest) in groups {
        let mut v = Expr::from_poly(rest);
        for (s, e) in hit.iter() {
            let pw = powers
                .entry((s.clone(), *e))
                .or_insert_with(|| values[s].powi(i64::from(*e)).expect("positive power"))
                .clone();
            v = &v * &pw;
        }
        acc = &acc + &v;
    }
    acc
}

/// Evaluates `plain + Σ rest·hit(values)` over the common denominator
/// `Π b_s^{E_s}`, then cancels one denominator factor at a time.
fn subst_common_denominator(plain: Poly, groups: BTreeMap<Monomial, Poly>, values: &BTreeMap<Symbol, Expr>) -> Expr {
    let mut top: BTreeMap<&Symbol, u32> = BTreeMap::new();
    for hit in groups.keys() {
        for (s, e) in hit.iter() {
            let t = top.entry(s).or_insert(0);
            *t = (*t).max(*e);
        }
    }
    let mut num_pow: BTreeMap<(Symbol, u32), Poly> = BTreeMap::new();
    let mut den_pow: BTreeMap<(Symbol, u32), Poly> = BTreeMap::new();
    fn pow(cache: &mut BTreeMap<(Symbol, u32), Poly>, s: &Symbol, base: &Poly, e: u32) -> Poly {
        if e == 0 {
            return Poly::one();
        }
        cache.entry((s.clone(), e)).or_insert_with(|| base.pow(e)).clone()
    }
    let mut full_den = Poly::one();
    for (&s, &e) in &top {
        full_den = full_den.mul(&pow(&mut den_pow, s, &values[s].den, e));
    }
    let mut num = plain.mul(&full_den);
    for (hit, rest) in &groups {
        let mut term = rest.clone();
        for (&s, &e_top) in &top {
            let e = hit.degree_of(s);
            let v = &values[s];
            term = term.mul(&pow(&mut num_pow, s, &v.num, e));
            term = term.mul(&pow(&mut den_pow, s, &v.den, e_top - e));
        }
        num = num.add(&term);
    }
    if num.is_zero() {
        return Expr::zero();
    }
    let mut den = full_den;
    for (&s, &e) in &top {
        let f = &values[s].den;
        if f.is_constant() {
            continue;
        }
        for _ in 0..e {
            let g = num.gcd(f);
            if g.is_constant() {
                break;
            }
            num = num.div_exact(&g).expect("gcd divides");
            den = den.div_exact(&g).expect("gcd divides");
        }
    }
    let k = Q::one() / den.leading_coeff();
    if den.is_constant() {
        return Expr::from_poly(num.scale(&k));
    }
    Expr { num: num.scale(&k), den: den.scale(&k) }
}

// ---- arithmetic ---------------------------------------------------------

fn add_exprs(a: &Expr, b: &Expr) -> Expr {
    if a.is_zero() {
        return b.clone();
    }
    if b.is_zero() {
        return a.clone();
    }
    if a.den.is_one() && b.den.is_one() {
        return Expr { num: a.num.add(&b.num), den: Poly::one() };
    }
    if a.den == b.den {
        return reduced_sum(a.num.add(&b.num), a.den.clone(), &a.den);
    }
    let g = a.den.gcd(&b.den);
    let ad = a.den.div_exact(&g).expect("gcd divides");
    let bd = b.den.div_exact(&g).expect("gcd divides");
    let num = a.num.mul(&bd).add(&b.num.mul(&ad));
    let den = a.den.mul(&bd);
    reduced_sum(num, den, &g)
}

/// Canonical form of a sum of two reduced fractions; any common factor of
/// `num` and `den` divides `g`, the gcd of the summand denominators.
fn reduced_sum(num: Poly, den: Poly, g: &Poly) -> Expr {
    if poly_has_atoms(&num) || poly_has_atoms(&den) {
        return Expr::from_parts_unchecked(num, den);
    }
    if num.is_zero() {
        return Expr::zero();
    }
    let (num, den) = if g.is_constant() {
        (num, den)
    } else {
        let h = num.gcd(g);
        if h.is_one() {
            (num, den)
        } else {
            (num.div_exact(&h).expect("gcd divides"), den.div_exact(&h).expect("gcd divides"))
        }
    };
    let lc = den.leading_coeff();
    if den.is_constant() {
        return Expr { num: num.scale(&(Q::one() / lc)), den: Poly::one() };
    }
    if lc.is_one() {
        Expr { num, den }
    } else {
        let k = Q::one() / lc;
        Expr { num: num.scale(&k), den: den.scale(&k) }
    }
}

fn mul_exprs(a: &Expr, b: &Expr) -> Expr {
    if a.is_zero() || b.is_zero() {
        return Expr::zero();
    }
    if a.den.is_one() && b.den.is_one() {
        return Expr::from_poly(a.num.mul(&b.num));
    }
    let g1 = a.num.gcd(&b.den);
    let g2 = b.num.gcd(&a.den);
    let an = a.num.div_exact(&g1).expect("gcd divides");
    let bd = b.den.div_exact(&g1).expect("gcd divides");
    let bn = b.num.div_exact(&g2).expect("gcd divides");
    let ad = a.den.div_exact(&g2).expect("gcd divides");
    let num = an.mul(&bn);
    let den = ad.mul(&bd);
    if poly_has_atoms(&num) || poly_has_atoms(&den) {
        return Expr::from_parts_unchecked(num, den);
    }
    let lc = den.leading_coeff();
    if lc.is_one() {
        Expr { num, den }
    } else {
        let k = Q::one() / lc;
        Expr { num: num.scale(&k), den: den.scale(&k) }
    }
}

impl Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        add_exprs(self, rhs)
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        add_exprs(&self, &rhs)
    }
}

impl Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        add_exprs(self, &-rhs)
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        add_exprs(&self, &-&rhs)
    }
}

impl Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        mul_exprs(self, rhs)
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        mul_exprs(&self, &rhs)
    }
}

/// Panics on an identically zero divisor; use [`Expr::checked_div`] when the
/// divisor is not known to be nonzero.
impl Div for &Expr {
    type Output = Expr;
    fn div(self, rhs: &Expr) -> Expr {
        self.checked_div(rhs).expect("division by zero expression")
    }
}

impl Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        &self / &rhs
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr { num: self.num.neg(), den: self.den.clone() }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        iter.fold(Expr::zero(), |a, b| &a + &b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> Expr {
        Expr::indep(0)
    }
    fn x() -> Expr {
        Expr::indep(1)
    }
    fn u() -> Expr {
        Expr::jet(0, MultiIndex::zero(2))
    }
    fn ux() -> Expr {
        Expr::jet(0, MultiIndex::delta(2, 1))
    }
    fn uxx() -> Expr {
        Expr::jet(0, MultiIndex::from_slice(&[0, 2]))
    }
    fn ut() -> Expr {
        Expr::jet(0, MultiIndex::delta(2, 0))
    }

    #[test]
    fn binomial_identity_cancels() {
        let one = Expr::one();
        let sq = (&ux() + &one).powi(2).unwrap();
        let e = &(&(&sq - &(&ux() * &ux())) - &(&Expr::int(2) * &ux())) - &one;
        assert!(e.is_zero());
    }

    #[test]
    fn commutativity_collects() {
        let e = &(&t() * &ux()) + &(&ux() * &t());
        assert_eq!(e, &Expr::int(2) * &(&t() * &ux()));
        let z = &(&u() * &uxx()) - &(&uxx() * &u());
        assert!(z.is_zero());
    }

    #[test]
    fn partial_derivatives() {
        let e = &t() * &ux();
        assert_eq!(e.diff_symbol(&Symbol::Indep(0)), ux());
        assert_eq!(e.diff_symbol(&Symbol::jet(0, MultiIndex::delta(2, 1))), t());
        let sq = &u() * &u();
        assert_eq!(sq.diff_symbol(&Symbol::jet(0, MultiIndex::zero(2))), &Expr::int(2) * &u());
    }

    #[test]
    fn rational_functions_cancel() {
        let a = &(&u() * &u()) + &Expr::one();
        let e = &(&a * &ut()) / &a;
        assert_eq!(e, ut());
        let f = &Expr::one() / &t();
        let g = &(&f + &f) - &(&Expr::int(2) / &t());
        assert!(g.is_zero());
        let h = &(&x() / &t()) * &(&t() / &x());
        assert!(h.is_one());
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let z = &ux() - &ux();
        assert!(matches!(ux().checked_div(&z), Err(ExprError::Malformed(_))));
        assert!(Expr::from_parts(Poly::one(), Poly::zero()).is_err());
    }

    #[test]
    fn exp_products_merge() {
        let e = &Expr::exp(x()) * &Expr::exp(-x());
        assert!(e.is_one());
        let f = &Expr::exp(x()) * &Expr::exp(x());
        assert_eq!(f, Expr::exp(&Expr::int(2) * &x()));
        let g = &Expr::one() / &Expr::exp(x());
        assert_eq!(g, Expr::exp(-x()));
    }

    #[test]
    fn roots_reduce() {
        let half = Q::new(1.into(), 2.into());
        let r = t().pow_rational(&half).unwrap();
        assert_eq!(&r * &r, t());
        let inv = t().pow_rational(&-half.clone()).unwrap();
        assert!((&inv * &r).is_one());
        // x·t^(-1/2) · t^(1/2) = x
        assert_eq!(&(&x() * &inv) * &r, x());
        let four = Expr::int(4).pow_rational(&half).unwrap();
        assert_eq!(four, Expr::int(2));
    }

    #[test]
    fn substitution_is_simultaneous() {
        let mut b = BTreeMap::new();
        b.insert(Symbol::jet(0, MultiIndex::delta(2, 0)), uxx());
        let e = &(&ut() * &ut()) + &u();
        assert_eq!(e.substitute(&b), &(&uxx() * &uxx()) + &u());
        assert_eq!(ux().substitute(&b), ux());
        let mut c = BTreeMap::new();
        c.insert(Symbol::jet(0, MultiIndex::from_slice(&[0, 2])), -&(&t() * &ux()));
        assert!((&uxx() + &(&t() * &ux())).substitute(&c).is_zero());
    }

    #[test]
    fn substitution_enters_atoms() {
        let mut b = BTreeMap::new();
        b.insert(Symbol::Indep(1), Expr::int(0));
        assert!(Expr::exp(x()).substitute(&b).is_one());
    }

    #[test]
    fn collect_coefficients() {
        let xi = Expr::symbol(Symbol::Param(0));
        let eta = Expr::symbol(Symbol::Param(1));
        let e = &(&xi * &(&ux() * &ux())) + &eta;
        let pred = |s: &Symbol| s.is_derivative();
        let m = e.coefficients_in(&pred).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[&Monomial::var(Symbol::jet(0, MultiIndex::delta(2, 1)), 2)], xi);
        assert_eq!(m[&Monomial::one()], eta);
        assert!(Expr::zero().coefficients_in(&pred).unwrap().is_empty());
        let bad = &Expr::one() / &ux();
        assert!(matches!(bad.coefficients_in(&pred), Err(ExprError::UnsupportedForm(_))));
    }
}
