//! Ansätze for single operators and verification of the reductions they give.
//!
//! The automatic catalogue is closed:
//!
//! * constant ξ with η^a = a·u^a + b (a, b constants);
//! * scalings ξ^i = c_i x_i, η^a = c_a u^a with rational weights;
//! * one nonzero ξ^k free of x_k and u, with η^a = A u^a or η^a = B, where
//!   A and B are polynomial in x_k.
//!
//! Anything else needs a user-supplied ansatz.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};

use crate::context::VariableContext;
use crate::error::{Error, Result};
use crate::expr::{Expr, Monomial, MultiIndex, Poly, Symbol, ZeroTest, Q};
use crate::jet::{check_transversality, VectorField, VectorFieldFamily};
use crate::linalg::Matrix;
use crate::manifold::DifferentialSystem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AnsatzSource {
    Translation,
    Scaling,
    Characteristics,
    User,
}

impl AnsatzSource {
    pub fn as_str(self) -> &'static str {
        match self {
            AnsatzSource::Translation => "catalogue:translation",
            AnsatzSource::Scaling => "catalogue:scaling",
            AnsatzSource::Characteristics => "catalogue:characteristics",
            AnsatzSource::User => "user",
        }
    }
}

/// u^a = F^a(x, φ(ω)) with invariants ω_j(x).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ansatz {
    /// The original context extended by invariant and unknown names.
    pub ctx: VariableContext,
    pub invariants: Vec<Expr>,
    pub forms: Vec<Expr>,
    /// Independent variables kept alongside the invariants.
    pub pivots: Vec<usize>,
    /// The remaining x_i in terms of the invariants and the pivots.
    pub inverse: BTreeMap<Symbol, Expr>,
    pub source: AnsatzSource,
}

fn fresh(ctx: &VariableContext, base: &str) -> String {
    let names = ctx.names();
    let mut s = base.to_string();
    while names.contains(&s) {
        s.push('_');
    }
    s
}

fn extended_context(ctx: &VariableContext, n_inv: usize) -> Result<VariableContext> {
    if !ctx.invariants().is_empty() || !ctx.unknowns().is_empty() {
        return Err(Error::Invalid("context already declares ansatz variables".into()));
    }
    let mut c = ctx.clone();
    for j in 0..n_inv {
        let name = if n_inv == 1 { fresh(&c, "w") } else { fresh(&c, &format!("w{}", j + 1)) };
        c.add_invariant(&name)?;
    }
    for a in 0..ctx.m() {
        let name = if ctx.m() == 1 { fresh(&c, "phi") } else { fresh(&c, &format!("phi{}", a + 1)) };
        c.add_unknown(&name)?;
    }
    Ok(c)
}

fn unknown(ctx: &VariableContext, a: usize) -> Expr {
    Expr::symbol(Symbol::Unknown { id: a as u16, deriv: MultiIndex::zero(ctx.invariants().len()) })
}

fn u(ctx: &VariableContext, a: usize) -> Symbol {
    Symbol::jet(a, MultiIndex::zero(ctx.n()))
}

fn is_jet(s: &Symbol) -> bool {
    matches!(s, Symbol::Jet(_))
}

/// η^a = A·u^a + B with A, B free of u; returns (A, B).
fn affine_in_u(ctx: &VariableContext, eta: &Expr, a: usize) -> Option<(Expr, Expr)> {
    let coeffs = eta.as_polynomial_in(&u(ctx, a)).ok()?;
    if coeffs.len() > 2 || coeffs.iter().any(|c| c.mentions(&is_jet)) {
        return None;
    }
    let b = coeffs[0].clone();
    let k = coeffs.get(1).cloned().unwrap_or_else(Expr::zero);
    Some((k, b))
}

fn ratio(p: &Q, q: &Q) -> Q {
    p / q
}

/// Builds an ansatz from the closed catalogue.
pub fn build_ansatz(ctx: &VariableContext, q: &VectorField) -> Result<Ansatz> {
    let tr = check_transversality(&VectorFieldFamily::single(q.clone()));
    if !tr.transversal {
        return Err(Error::UnsupportedOperator("operator has no nonzero ξ component".into()));
    }
    let ans = translation_ansatz(ctx, q)?
        .or(scaling_ansatz(ctx, q)?)
        .or(characteristic_ansatz(ctx, q)?)
        .ok_or_else(|| {
            Error::UnsupportedOperator(format!(
                "no catalogue ansatz for {}; supply one explicitly",
                q.render(ctx)
            ))
        })?;
    ans.check_operator(q, ZeroTest::default())?;
    Ok(ans)
}

fn is_constant_coefficient(e: &Expr) -> bool {
    !e.mentions(&|s| matches!(s, Symbol::Indep(_) | Symbol::Jet(_) | Symbol::Fun { .. }))
}

fn translation_ansatz(ctx: &VariableContext, q: &VectorField) -> Result<Option<Ansatz>> {
    if !q.xi.iter().all(is_constant_coefficient) {
        return Ok(None);
    }
    let mut lin = Vec::new();
    for a in 0..ctx.m() {
        let Some((ka, kb)) = affine_in_u(ctx, &q.eta[a], a) else { return Ok(None) };
        if !is_constant_coefficient(&ka) || !is_constant_coefficient(&kb) {
            return Ok(None);
        }
        lin.push((ka, kb));
    }
    let k = q.xi.iter().position(|c| !c.is_zero()).expect("transversal");
    let xik = &q.xi[k];
    let c = extended_context(ctx, ctx.n() - 1)?;
    let xk = Expr::indep(k);
    let mut invariants = Vec::new();
    let mut inverse = BTreeMap::new();
    for (j, i) in (0..ctx.n()).filter(|&i| i != k).enumerate() {
        let r = q.xi[i].checked_div(xik)?;
        invariants.push(&Expr::indep(i) - &(&r * &xk));
        inverse.insert(Symbol::Indep(i as u16), &Expr::symbol(Symbol::Inv(j as u16)) + &(&r * &xk));
    }
    let mut forms = Vec::new();
    for (a, (ka, kb)) in lin.into_iter().enumerate() {
        let phi = unknown(&c, a);
        let f = if ka.is_zero() {
            &phi + &(&kb.checked_div(xik)? * &xk)
        } else {
            let growth = Expr::exp(&ka.checked_div(xik)? * &xk);
            &(&growth * &phi) - &kb.checked_div(&ka)?
        };
        forms.push(f);
    }
    Ok(Some(Ansatz { ctx: c, invariants, forms, pivots: vec![k], inverse, source: AnsatzSource::Translation }))
}

fn scaling_ansatz(ctx: &VariableContext, q: &VectorField) -> Result<Option<Ansatz>> {
    let mut weights = Vec::new();
    for (i, c) in q.xi.iter().enumerate() {
        let Some(w) = (c / &Expr::indep(i)).as_constant() else { return Ok(None) };
        weights.push(w);
    }
    let mut uweights = Vec::new();
    for a in 0..ctx.m() {
        let ua = Expr::symbol(u(ctx, a));
        let Some(w) = (&q.eta[a] / &ua).as_constant() else { return Ok(None) };
        uweights.push(w);
    }
    let k = weights.iter().position(|c| !c.is_zero()).expect("transversal");
    let c = extended_context(ctx, ctx.n() - 1)?;
    let xk = Expr::indep(k);
    let mut invariants = Vec::new();
    let mut inverse = BTreeMap::new();
    for (j, i) in (0..ctx.n()).filter(|&i| i != k).enumerate() {
        let r = ratio(&weights[i], &weights[k]);
        let w = Expr::symbol(Symbol::Inv(j as u16));
        if r.is_zero() {
            invariants.push(Expr::indep(i));
            inverse.insert(Symbol::Indep(i as u16), w);
        } else {
            invariants.push(&Expr::indep(i) * &xk.pow_rational(&-r.clone())?);
            inverse.insert(Symbol::Indep(i as u16), &w * &xk.pow_rational(&r)?);
        }
    }
    let mut forms = Vec::new();
    for (a, wa) in uweights.iter().enumerate() {
        let r = ratio(wa, &weights[k]);
        forms.push(&xk.pow_rational(&r)? * &unknown(&c, a));
    }
    Ok(Some(Ansatz { ctx: c, invariants, forms, pivots: vec![k], inverse, source: AnsatzSource::Scaling }))
}

/// ∫ p dx_k for p polynomial in x_k.
fn integrate_in(p: &Expr, k: usize) -> Option<Expr> {
    let coeffs = p.as_polynomial_in(&Symbol::Indep(k as u16)).ok()?;
    let xk = Expr::indep(k);
    let mut acc = Expr::zero();
    for (d, c) in coeffs.iter().enumerate() {
        if c.contains_symbol(&Symbol::Indep(k as u16)) {
            return None;
        }
        let term = &(c * &xk.powi(d as i64 + 1).ok()?) / &Expr::int(d as i64 + 1);
        acc = &acc + &term;
    }
    Some(acc)
}

fn characteristic_ansatz(ctx: &VariableContext, q: &VectorField) -> Result<Option<Ansatz>> {
    let nonzero: Vec<usize> = (0..ctx.n()).filter(|&i| !q.xi[i].is_zero()).collect();
    let [k] = nonzero[..] else { return Ok(None) };
    let g = &q.xi[k];
    if g.contains_symbol(&Symbol::Indep(k as u16)) || g.mentions(&is_jet) {
        return Ok(None);
    }
    let c = extended_context(ctx, ctx.n() - 1)?;
    let mut forms = Vec::new();
    for a in 0..ctx.m() {
        let Some((ka, kb)) = affine_in_u(ctx, &q.eta[a], a) else { return Ok(None) };
        let phi = unknown(&c, a);
        let f = match (ka.is_zero(), kb.is_zero()) {
            (true, true) => phi,
            (false, true) => {
                let Some(p) = integrate_in(&ka.checked_div(g)?, k) else { return Ok(None) };
                &Expr::exp(p) * &phi
            }
            (true, false) => {
                let Some(p) = integrate_in(&kb.checked_div(g)?, k) else { return Ok(None) };
                &phi + &p
            }
            (false, false) => return Ok(None),
        };
        forms.push(f);
    }
    let mut invariants = Vec::new();
    let mut inverse = BTreeMap::new();
    for (j, i) in (0..ctx.n()).filter(|&i| i != k).enumerate() {
        invariants.push(Expr::indep(i));
        inverse.insert(Symbol::Indep(i as u16), Expr::symbol(Symbol::Inv(j as u16)));
    }
    Ok(Some(Ansatz { ctx: c, invariants, forms, pivots: vec![k], inverse, source: AnsatzSource::Characteristics }))
}

impl Ansatz {
    /// A user-supplied ansatz. `ctx` must already declare the invariants
    /// and one unknown per dependent variable; forms may mention x, the
    /// invariants and the unknowns.
    pub fn user(ctx: VariableContext, invariants: Vec<Expr>, forms: Vec<Expr>) -> Result<Self> {
        let n = ctx.n();
        if invariants.is_empty() || invariants.len() >= n {
            return Err(Error::Invalid(format!("an ansatz needs between 1 and {} invariants", n - 1)));
        }
        if ctx.invariants().len() != invariants.len() || ctx.unknowns().len() != ctx.m() || forms.len() != ctx.m() {
            return Err(Error::Invalid("ansatz needs one unknown and one form per dependent variable".into()));
        }
        for w in &invariants {
            ctx.check_expr(w)?;
            if w.mentions(&|s| !matches!(s, Symbol::Indep(_) | Symbol::Param(_))) {
                return Err(Error::Invalid("invariants may depend on the independent variables only".into()));
            }
        }
        let mut to_x = BTreeMap::new();
        for (j, w) in invariants.iter().enumerate() {
            to_x.insert(Symbol::Inv(j as u16), w.clone());
        }
        let forms: Vec<Expr> = forms.iter().map(|f| f.substitute(&to_x)).collect();
        for f in &forms {
            ctx.check_expr(f)?;
            if f.mentions(&is_jet) {
                return Err(Error::Invalid("ansatz forms may not mention the dependent variables".into()));
            }
            if f.mentions(&|s| matches!(s, Symbol::Unknown { deriv, .. } if !deriv.is_zero())) {
                return Err(Error::Invalid("ansatz forms may not mention derivatives of the unknowns".into()));
            }
        }
        let (pivots, inverse) = invert(&invariants, n)?;
        Ok(Ansatz { ctx, invariants, forms, pivots, inverse, source: AnsatzSource::User })
    }

    pub fn invariant_count(&self) -> usize {
        self.invariants.len()
    }

    fn dw(&self) -> Vec<Vec<Expr>> {
        self.invariants
            .iter()
            .map(|w| (0..self.ctx.n()).map(|i| w.diff_symbol(&Symbol::Indep(i as u16))).collect())
            .collect()
    }

    /// Total derivative D_i of an expression in x and φ-derivatives.
    fn total(&self, dw: &[Vec<Expr>], e: &Expr, i: usize) -> Expr {
        e.derive_by(&|s| match s {
            Symbol::Indep(j) if usize::from(*j) == i => Some(Expr::one()),
            Symbol::Unknown { id, deriv } => {
                let mut acc = Expr::zero();
                for (j, row) in dw.iter().enumerate() {
                    if !row[i].is_zero() {
                        let d = Expr::symbol(Symbol::Unknown { id: *id, deriv: deriv.bump(j) });
                        acc = &acc + &(&row[i] * &d);
                    }
                }
                Some(acc)
            }
            _ => None,
        })
    }

    /// Checks Q(ω_j) = 0 and that Q[u] vanishes on the ansatz.
    pub fn check_operator(&self, q: &VectorField, zero_test: ZeroTest) -> Result<()> {
        for w in &self.invariants {
            let v = q.apply_point(&self.ctx, w);
            if !zero_test.check(&v).is_zero {
                return Err(Error::Invalid(format!(
                    "{} is not an invariant of the operator",
                    self.ctx.display_expr(w)
                )));
            }
        }
        let dw = self.dw();
        let mut on_form = BTreeMap::new();
        for a in 0..self.ctx.m() {
            on_form.insert(u(&self.ctx, a), self.forms[a].clone());
        }
        for a in 0..self.ctx.m() {
            let mut acc = q.eta[a].substitute(&on_form);
            for i in 0..self.ctx.n() {
                let xi = q.xi[i].substitute(&on_form);
                if !xi.is_zero() {
                    acc = &acc - &(&xi * &self.total(&dw, &self.forms[a], i));
                }
            }
            if !zero_test.check(&acc).is_zero {
                return Err(Error::Invalid("the characteristic of the operator does not vanish on the ansatz".into()));
            }
        }
        Ok(())
    }

    /// Chain-rule expansion of `eq` on the ansatz.
    pub fn substitute(&self, eq: &Expr) -> Result<Expr> {
        if eq.mentions(&|s| matches!(s, Symbol::Fun { .. })) {
            return Err(Error::Invalid("cannot substitute an ansatz into arbitrary functions".into()));
        }
        let dw = self.dw();
        let mut cache: HashMap<(u16, MultiIndex), Expr> = HashMap::new();
        let mut bindings = BTreeMap::new();
        let mut jets: Vec<_> = eq.base_symbols().into_iter().filter_map(|s| s.as_jet().cloned()).collect();
        jets.sort_by(|a, b| a.rank_cmp(b));
        for j in jets {
            let mut alpha = MultiIndex::zero(self.ctx.n());
            let mut cur = self.forms[usize::from(j.dep)].clone();
            for slot in j.alpha.slots() {
                alpha = alpha.bump(slot);
                cur = match cache.get(&(j.dep, alpha.clone())) {
                    Some(v) => v.clone(),
                    None => {
                        let v = self.total(&dw, &cur, slot);
                        cache.insert((j.dep, alpha.clone()), v.clone());
                        v
                    }
                };
            }
            bindings.insert(Symbol::Jet(j), cur);
        }
        Ok(eq.substitute(&bindings))
    }

    /// Rewrites an expression in (x, φ) into the coordinates (ω, pivots).
    pub fn to_invariant_coordinates(&self, e: &Expr) -> Expr {
        e.substitute(&self.inverse)
    }

    /// Rewrites an expression in (ω, pivots) back into x.
    pub fn to_original_coordinates(&self, e: &Expr) -> Expr {
        let mut b = BTreeMap::new();
        for (j, w) in self.invariants.iter().enumerate() {
            b.insert(Symbol::Inv(j as u16), w.clone());
        }
        e.substitute(&b)
    }
}

/// Solves ω_j(x) = w_j for as many x as there are invariants, one linear
/// unknown at a time.
fn invert(invariants: &[Expr], n: usize) -> Result<(Vec<usize>, BTreeMap<Symbol, Expr>)> {
    let mut used = vec![false; n];
    let mut solved: BTreeMap<Symbol, Expr> = BTreeMap::new();
    for (j, w) in invariants.iter().enumerate() {
        let w = w.substitute(&solved);
        let mut done = false;
        for i in (0..n).rev() {
            if used[i] {
                continue;
            }
            let xi = Symbol::Indep(i as u16);
            let Ok(coeffs) = w.as_polynomial_in(&xi) else { continue };
            if coeffs.len() != 2 || coeffs.iter().any(|c| c.contains_symbol(&xi)) {
                continue;
            }
            let wj = Expr::symbol(Symbol::Inv(j as u16));
            let value = (&wj - &coeffs[0]).checked_div(&coeffs[1])?;
            let mut b = BTreeMap::new();
            b.insert(xi.clone(), value.clone());
            for v in solved.values_mut() {
                *v = v.substitute(&b);
            }
            solved.insert(xi, value);
            used[i] = true;
            done = true;
            break;
        }
        if !done {
            return Err(Error::UnsupportedForm("cannot invert the invariants by linear solving".into()));
        }
    }
    let pivots = (0..n).filter(|&i| !used[i]).collect();
    Ok((pivots, solved))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReductionStatus {
    Reduced,
    NotReduced,
}

impl ReductionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ReductionStatus::Reduced => "reduced",
            ReductionStatus::NotReduced => "not-reduced",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionReport {
    pub status: ReductionStatus,
    pub equations: Vec<String>,
    /// The system after ansatz substitution, in x and φ.
    pub substituted: Vec<Expr>,
    /// Equations in ω and φ, each with leading coefficient 1, ordered by
    /// increasing leading derivative.
    pub reduced: Vec<Expr>,
    /// substituted = multiplier · reduced; entries depend on x.
    pub multiplier: Vec<Vec<Expr>>,
    pub determinant: Option<Expr>,
    /// Independent variables that survive in the reduced coefficients.
    pub blocking: Vec<String>,
}

fn derivative_weight(m: &Monomial) -> (u32, u32) {
    let ord = m
        .iter()
        .map(|(s, _)| match s {
            Symbol::Unknown { deriv, .. } => deriv.order(),
            _ => 0,
        })
        .max()
        .unwrap_or(0);
    (ord, m.total_degree())
}

/// Substitutes the ansatz into every target equation and tries to write
/// the result as an x-dependent matrix times equations in (ω, φ) alone.
pub fn verify_reduction(ansatz: &Ansatz, targets: &[(String, Expr)], zero_test: ZeroTest) -> Result<ReductionReport> {
    let mut substituted = Vec::new();
    let mut transformed = Vec::new();
    let mut rows: Vec<BTreeMap<Monomial, Expr>> = Vec::new();
    for (_, e) in targets {
        let s = ansatz.substitute(e)?;
        let w = ansatz.to_invariant_coordinates(&s);
        rows.push(w.coefficients_in(&|s| matches!(s, Symbol::Unknown { .. }))?);
        substituted.push(s);
        transformed.push(w);
    }
    let mut columns: Vec<Monomial> = rows.iter().flat_map(|r| r.keys().cloned()).collect();
    columns.sort();
    columns.dedup();
    columns.sort_by(|a, b| (derivative_weight(b), b).cmp(&(derivative_weight(a), a)));
    let mut c = Matrix::zeros(rows.len(), columns.len());
    for (i, r) in rows.iter().enumerate() {
        for (j, m) in columns.iter().enumerate() {
            if let Some(v) = r.get(m) {
                c.set(i, j, v.clone());
            }
        }
    }
    let (red, pivots) = c.rref();
    let equations = targets.iter().map(|(l, _)| l.clone()).collect();
    let blocking: Vec<String> = ansatz
        .pivots
        .iter()
        .filter(|&&k| {
            let xk = Symbol::Indep(k as u16);
            (0..pivots.len()).any(|r| red.row(r).iter().any(|e| e.contains_symbol(&xk)))
        })
        .map(|&k| ansatz.ctx.independent()[k].clone())
        .collect();
    if !blocking.is_empty() {
        return Ok(ReductionReport {
            status: ReductionStatus::NotReduced,
            equations,
            substituted,
            reduced: Vec::new(),
            multiplier: Vec::new(),
            determinant: None,
            blocking,
        });
    }
    // ascending by leading derivative
    let order: Vec<usize> = (0..pivots.len()).rev().collect();
    let reduced: Vec<Expr> = order
        .iter()
        .map(|&r| {
            red.row(r)
                .iter()
                .zip(&columns)
                .filter(|(v, _)| !v.is_zero())
                .map(|(v, m)| v * &Expr::from_poly(Poly::term(Q::one(), m.clone())))
                .sum()
        })
        .collect();
    let piv_cols: Vec<usize> = order.iter().map(|&r| pivots[r]).collect();
    let m = c.columns(&piv_cols);
    for (i, w) in transformed.iter().enumerate() {
        let recombined: Expr = m.row(i).iter().zip(&reduced).map(|(a, b)| a * b).sum();
        if !zero_test.check(&(&recombined - w)).is_zero {
            return Err(Error::Invalid("multiplier does not reproduce the substituted system".into()));
        }
    }
    let m = m.map(|e| ansatz.to_original_coordinates(e));
    let determinant = (m.rows() == m.cols()).then(|| m.det());
    Ok(ReductionReport {
        status: ReductionStatus::Reduced,
        equations,
        substituted,
        reduced,
        multiplier: m.to_rows(),
        determinant,
        blocking: Vec::new(),
    })
}

/// [`verify_reduction`] over every equation of a system.
pub fn verify_system_reduction(ansatz: &Ansatz, sys: &DifferentialSystem, zero_test: ZeroTest) -> Result<ReductionReport> {
    let targets: Vec<(String, Expr)> =
        sys.labels().iter().cloned().zip(sys.equations().iter().cloned()).collect();
    verify_reduction(ansatz, &targets, zero_test)
}
