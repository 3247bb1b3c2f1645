//! Classical and conditional invariance criteria and their certificates.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::context::VariableContext;
use crate::error::{Error, PreconditionViolation, Result};
use crate::expr::{Confidence, Expr, Monomial, MultiIndex, Symbol, ZeroTest};
use crate::jet::{
    apply_prolonged, check_involution, check_transversality, total_derivative, total_derivative_multi,
    CharacteristicJets, InvolutionCertificate, TransversalityReport, VectorField, VectorFieldFamily,
};
use crate::linalg::Matrix;
use crate::manifold::{
    characteristic_manifold, derivative_label, differential_consequences, insert_characteristic, joint_manifold,
    ConsequenceSet, DifferentialSystem, Insertion, JointManifold, ManifoldBuilder, SolvedManifold,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SystemVariant {
    Raw,
    ProlongedOriginal,
    ProlongedAll,
}

impl SystemVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemVariant::Raw => "raw",
            SystemVariant::ProlongedOriginal => "prolonged-original",
            SystemVariant::ProlongedAll => "prolonged-all",
        }
    }
}

impl FromStr for SystemVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(SystemVariant::Raw),
            "prolonged-original" => Ok(SystemVariant::ProlongedOriginal),
            "prolonged-all" => Ok(SystemVariant::ProlongedAll),
            _ => Err(Error::Invalid(format!("unknown criterion variant `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CriterionKind {
    Lie,
    Conditional,
    System(SystemVariant),
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriterionKind::Lie => f.write_str("lie"),
            CriterionKind::Conditional => f.write_str("conditional"),
            CriterionKind::System(v) => write!(f, "system/{}", v.as_str()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Holds {
    Yes,
    No,
    /// The joint manifold is empty.
    Vacuous,
}

impl Holds {
    pub fn as_str(self) -> &'static str {
        match self {
            Holds::Yes => "yes",
            Holds::No => "no",
            Holds::Vacuous => "vacuous",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Residual {
    /// Index of the operator in the family.
    pub operator: usize,
    /// Label of the equation the prolonged operator was applied to.
    pub equation: String,
    pub expr: Expr,
    pub vanishes: bool,
    pub confidence: Confidence,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CriterionReport {
    pub kind: CriterionKind,
    pub holds: Holds,
    /// Prolongation order used.
    pub order: u32,
    pub residuals: Vec<Residual>,
    pub manifold: Option<SolvedManifold>,
    /// Nonzero residue proving the joint manifold empty.
    pub empty_witness: Option<Expr>,
    pub assumptions: Vec<Expr>,
    pub confidence: Confidence,
    pub involution: Option<InvolutionCertificate>,
    pub transversality: Option<TransversalityReport>,
    /// Labels of the equations whose residuals were taken.
    pub equations: Vec<String>,
}

impl CriterionReport {
    pub fn holds(&self) -> bool {
        self.holds == Holds::Yes
    }
}

fn check_preconditions(ctx: &VariableContext, f: &VectorFieldFamily) -> Result<(InvolutionCertificate, TransversalityReport)> {
    let inv = check_involution(ctx, f);
    let tr = check_transversality(f);
    if !inv.involutive || !tr.transversal {
        return Err(Error::Precondition(Box::new(PreconditionViolation { involution: inv, transversality: tr })));
    }
    Ok((inv, tr))
}

/// Residuals of Q^s_(order) applied to `targets`, reduced on `joint`.
fn evaluate(
    ctx: &VariableContext,
    kind: CriterionKind,
    family: &VectorFieldFamily,
    order: u32,
    joint: JointManifold,
    targets: &[(String, Expr)],
    zero_test: ZeroTest,
) -> Result<CriterionReport> {
    let equations = targets.iter().map(|(l, _)| l.clone()).collect();
    let m = match joint {
        JointManifold::Empty { witness, .. } => {
            return Ok(CriterionReport {
                kind,
                holds: Holds::Vacuous,
                order,
                residuals: Vec::new(),
                manifold: None,
                empty_witness: Some(witness),
                assumptions: Vec::new(),
                confidence: Confidence::Exact,
                involution: None,
                transversality: None,
                equations,
            })
        }
        JointManifold::Solved(m) => m,
    };
    let mut residuals = Vec::new();
    let mut confidence = m.confidence();
    for (s, q) in family.members.iter().enumerate() {
        for (label, l) in targets {
            let applied = apply_prolonged(ctx, q, order, l)?;
            let red = m.reduce(&applied);
            let v = zero_test.check(&red);
            confidence = confidence.meet(v.confidence);
            residuals.push(Residual {
                operator: s,
                equation: label.clone(),
                expr: if v.is_zero { Expr::zero() } else { red },
                vanishes: v.is_zero,
                confidence: v.confidence,
            });
        }
    }
    let holds = if residuals.iter().all(|r| r.vanishes) { Holds::Yes } else { Holds::No };
    Ok(CriterionReport {
        kind,
        holds,
        order,
        residuals,
        assumptions: m.assumptions().to_vec(),
        manifold: Some(m),
        empty_witness: None,
        confidence,
        involution: None,
        transversality: None,
        equations,
    })
}

fn system_targets(system: &DifferentialSystem) -> Vec<(String, Expr)> {
    system.labels().iter().cloned().zip(system.equations().iter().cloned()).collect()
}

/// Classical criterion: Q_(r)L^μ reduced on the solved ℒ_(r).
pub fn lie_criterion(
    ctx: &VariableContext,
    system: &DifferentialSystem,
    q: &VectorField,
    zero_test: ZeroTest,
) -> Result<CriterionReport> {
    let r = system.order();
    let cs = differential_consequences(ctx, system, r, zero_test)?;
    let joint = joint_manifold(&cs, &SolvedManifold::default(), zero_test)?;
    let family = VectorFieldFamily::single(q.clone());
    evaluate(ctx, CriterionKind::Lie, &family, r, joint, &system_targets(system), zero_test)
}

/// Q^s_(r)L reduced on ℒ ∩ 𝒬_(r).
pub fn conditional_criterion(
    ctx: &VariableContext,
    eq: &Expr,
    family: &VectorFieldFamily,
    zero_test: ZeroTest,
) -> Result<CriterionReport> {
    let system = DifferentialSystem::single(ctx, "L", eq.clone())?;
    let (inv, tr) = check_preconditions(ctx, family)?;
    let r = system.order();
    let qm = characteristic_manifold(ctx, family, r, zero_test)?;
    let joint = joint_manifold(&ConsequenceSet::plain(&system), &qm, zero_test)?;
    let mut rep = evaluate(ctx, CriterionKind::Conditional, family, r, joint, &system_targets(&system), zero_test)?;
    rep.involution = Some(inv);
    rep.transversality = Some(tr);
    Ok(rep)
}

/// The three candidate criteria for systems.
pub fn system_criterion(
    ctx: &VariableContext,
    system: &DifferentialSystem,
    family: &VectorFieldFamily,
    variant: SystemVariant,
    zero_test: ZeroTest,
) -> Result<CriterionReport> {
    let (inv, tr) = check_preconditions(ctx, family)?;
    let r = system.order();
    let mut rep = prolonged_criterion(ctx, system, family, r, variant, zero_test)?;
    rep.involution = Some(inv);
    rep.transversality = Some(tr);
    Ok(rep)
}

fn prolonged_criterion(
    ctx: &VariableContext,
    system: &DifferentialSystem,
    family: &VectorFieldFamily,
    r: u32,
    variant: SystemVariant,
    zero_test: ZeroTest,
) -> Result<CriterionReport> {
    let qm = characteristic_manifold(ctx, family, r, zero_test)?;
    let kind = CriterionKind::System(variant);
    match variant {
        SystemVariant::Raw => {
            let joint = joint_manifold(&ConsequenceSet::plain(system), &qm, zero_test)?;
            evaluate(ctx, kind, family, r, joint, &system_targets(system), zero_test)
        }
        SystemVariant::ProlongedOriginal => {
            let cs = differential_consequences(ctx, system, r, zero_test)?;
            let joint = joint_manifold(&cs, &qm, zero_test)?;
            evaluate(ctx, kind, family, r, joint, &system_targets(system), zero_test)
        }
        SystemVariant::ProlongedAll => {
            let cs = differential_consequences(ctx, system, r, zero_test)?;
            let joint = joint_manifold(&cs, &qm, zero_test)?;
            let targets: Vec<(String, Expr)> = cs.members.iter().map(|m| (m.label.clone(), m.expr.clone())).collect();
            evaluate(ctx, kind, family, r, joint, &targets, zero_test)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeakSymmetrySearch {
    /// Smallest ρ for which the prolonged-all criterion holds.
    pub order: Option<u32>,
    /// One report per tried order.
    pub attempts: Vec<CriterionReport>,
}

/// Smallest ρ ≤ `max_order` with ℒ_(ρ) ∩ 𝒬_(ρ) invariant under `family`.
pub fn weak_symmetry_order(
    ctx: &VariableContext,
    system: &DifferentialSystem,
    family: &VectorFieldFamily,
    max_order: u32,
    zero_test: ZeroTest,
) -> Result<WeakSymmetrySearch> {
    let r = system.order();
    if max_order < r {
        return Err(Error::Invalid(format!("maximal order {max_order} is below the equation order {r}")));
    }
    let (inv, tr) = check_preconditions(ctx, family)?;
    let mut attempts = Vec::new();
    for rho in r..=max_order {
        let mut rep = prolonged_criterion(ctx, system, family, rho, SystemVariant::ProlongedAll, zero_test)?;
        rep.involution = Some(inv.clone());
        rep.transversality = Some(tr.clone());
        let found = rep.holds == Holds::Yes;
        attempts.push(rep);
        if found {
            return Ok(WeakSymmetrySearch { order: Some(rho), attempts });
        }
    }
    Ok(WeakSymmetrySearch { order: None, attempts })
}

/// A term c·D^α applied to the a-th component of the characteristic of
/// the s-th operator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorTerm {
    pub operator: usize,
    pub dep: usize,
    pub alpha: MultiIndex,
    pub coeff: Expr,
}

/// Q_(r)L = ξ^i D_i L + Σ_α (∂L/∂u_α) D^α Q[u].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TautologyDecomposition {
    pub prolonged: Expr,
    /// ξ^i D_i L.
    pub transport: Expr,
    pub terms: Vec<OperatorTerm>,
    pub verified: bool,
}

pub fn tautology_decomposition(ctx: &VariableContext, eq: &Expr, q: &VectorField) -> Result<TautologyDecomposition> {
    let r = eq.jet_order().unwrap_or(0);
    let prolonged = apply_prolonged(ctx, q, r, eq)?;
    let mut transport = Expr::zero();
    for (i, c) in q.xi.iter().enumerate() {
        if !c.is_zero() {
            transport = &transport + &(c * &total_derivative(ctx, eq, i));
        }
    }
    let mut dq = CharacteristicJets::new(ctx, q);
    let mut terms = Vec::new();
    let mut rhs = transport.clone();
    for s in eq.base_symbols() {
        let Symbol::Jet(j) = &s else { continue };
        let c = eq.diff_symbol(&s);
        if c.is_zero() {
            continue;
        }
        rhs = &rhs + &(&c * &dq.get(usize::from(j.dep), &j.alpha));
        terms.push(OperatorTerm { operator: 0, dep: usize::from(j.dep), alpha: j.alpha.clone(), coeff: c });
    }
    terms.sort_by(|a, b| (a.alpha.order(), &a.alpha, a.dep).cmp(&(b.alpha.order(), &b.alpha, b.dep)));
    let verified = (&prolonged - &rhs).is_zero();
    Ok(TautologyDecomposition { prolonged, transport, terms, verified })
}

/// Q_(r)L = λ¹ L + λ²(Q[u]) with λ² of order at most r − 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiplierCertificate {
    pub lambda1: Expr,
    pub lambda2: Vec<OperatorTerm>,
    /// Bound on the order of λ².
    pub operator_order: u32,
    pub verified: bool,
}

impl MultiplierCertificate {
    /// Q_(r)L − λ¹L − λ²(Q[u]); zero for a valid certificate.
    pub fn defect(&self, ctx: &VariableContext, eq: &Expr, family: &VectorFieldFamily, operator: usize) -> Result<Expr> {
        let r = eq.jet_order().unwrap_or(0);
        let q = &family.members[operator];
        let mut acc = &apply_prolonged(ctx, q, r, eq)? - &(&self.lambda1 * eq);
        let chars: Vec<Vec<Expr>> = family.members.iter().map(|m| crate::jet::characteristic(ctx, m)).collect();
        for t in &self.lambda2 {
            let d = total_derivative_multi(ctx, &chars[t.operator][t.dep], &t.alpha);
            acc = &acc - &(&t.coeff * &d);
        }
        Ok(acc)
    }
}

/// Builds λ¹ and λ² by tracked reduction of Q_(r)L on ℒ ∩ 𝒬_(r). Returns
/// `None` when the criterion fails.
pub fn multiplier_certificate(
    ctx: &VariableContext,
    eq: &Expr,
    family: &VectorFieldFamily,
    operator: usize,
    zero_test: ZeroTest,
) -> Result<Option<MultiplierCertificate>> {
    check_preconditions(ctx, family)?;
    let r = eq.jet_order().unwrap_or(0);
    let mut b = ManifoldBuilder::tracked(zero_test);
    let layout = insert_characteristic(ctx, &mut b, family, r)?;
    if let Insertion::Inconsistent(_) = b.insert(eq, "L")? {
        return Ok(None);
    }
    let target = apply_prolonged(ctx, &family.members[operator], r, eq)?;
    let (rest, comb) = b.certificate(&target);
    if !zero_test.check(&rest).is_zero {
        return Ok(None);
    }
    let lambda1 = comb[layout.len()].clone();
    let lambda2: Vec<OperatorTerm> = layout
        .iter()
        .zip(&comb)
        .filter(|(_, c)| !c.is_zero())
        .map(|((s, a, alpha), c)| OperatorTerm { operator: *s, dep: *a, alpha: alpha.clone(), coeff: c.clone() })
        .collect();
    let mut cert = MultiplierCertificate { lambda1, lambda2, operator_order: r.saturating_sub(1), verified: false };
    let defect = cert.defect(ctx, eq, family, operator)?;
    cert.verified = zero_test.check(&defect).is_zero;
    Ok(Some(cert))
}

/// Determining equations for the coefficient functions of a template field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeterminingSystem {
    /// Names of the unknown coefficient functions.
    pub unknowns: Vec<String>,
    pub equations: Vec<Expr>,
    /// The parametric jet monomial each equation is the coefficient of;
    /// `None` for side conditions met while solving.
    pub monomials: Vec<Option<Monomial>>,
    pub assumptions: Vec<Expr>,
}

impl DeterminingSystem {
    /// Residues of every equation after substituting concrete coefficients.
    pub fn evaluate(&self, ctx: &VariableContext, values: &BTreeMap<u16, Expr>) -> Vec<Expr> {
        self.equations.iter().map(|e| instantiate_functions(ctx, e, values)).collect()
    }
}

/// Replaces arbitrary functions and their derivatives by concrete expressions.
pub fn instantiate_functions(ctx: &VariableContext, e: &Expr, values: &BTreeMap<u16, Expr>) -> Expr {
    let n = ctx.n();
    e.substitute_with(&|s| match s {
        Symbol::Fun { id, deriv } => values.get(id).map(|f| {
            deriv.slots().into_iter().fold(f.clone(), |acc, slot| {
                let v = if slot < n { Symbol::Indep(slot as u16) } else { Symbol::jet(slot - n, MultiIndex::zero(n)) };
                acc.diff_symbol(&v)
            })
        }),
        _ => None,
    })
}

/// A template field with arbitrary coefficient functions `xi_<x>` and
/// `eta_<u>`, except for components fixed by the gauge.
pub fn template_field(ctx: &mut VariableContext, gauge: &BTreeMap<String, Expr>) -> Result<(VectorField, Vec<String>)> {
    for key in gauge.keys() {
        let ok = key
            .strip_prefix("xi_")
            .map(|v| ctx.indep_index(v).is_some())
            .or_else(|| key.strip_prefix("eta_").map(|v| ctx.dep_index(v).is_some()))
            .unwrap_or(false);
        if !ok {
            return Err(Error::Invalid(format!("unknown gauge component `{key}`")));
        }
    }
    let mut unknowns = Vec::new();
    let mut comp = |ctx: &mut VariableContext, name: String| -> Result<Expr> {
        if let Some(v) = gauge.get(&name) {
            return Ok(v.clone());
        }
        let id = ctx.add_function(&name)?;
        unknowns.push(name);
        Ok(Expr::symbol(Symbol::Fun { id, deriv: MultiIndex::zero(ctx.n() + ctx.m()) }))
    };
    let xnames: Vec<String> = ctx.independent().to_vec();
    let unames: Vec<String> = ctx.dependent().to_vec();
    let mut xi = Vec::new();
    for x in xnames {
        xi.push(comp(ctx, format!("xi_{x}"))?);
    }
    let mut eta = Vec::new();
    for u in unames {
        eta.push(comp(ctx, format!("eta_{u}"))?);
    }
    Ok((VectorField { xi, eta }, unknowns))
}

pub fn determining_equations(
    ctx: &VariableContext,
    eq: &Expr,
    template: &VectorField,
    unknowns: Vec<String>,
    zero_test: ZeroTest,
) -> Result<DeterminingSystem> {
    let system = DifferentialSystem::single(ctx, "L", eq.clone())?;
    let family = VectorFieldFamily::single(template.clone());
    let r = system.order();
    let qm = characteristic_manifold(ctx, &family, r, zero_test)?;
    let joint = joint_manifold(&ConsequenceSet::plain(&system), &qm, zero_test)?;
    let m = match joint {
        JointManifold::Solved(m) => m,
        JointManifold::Empty { .. } => {
            return Err(Error::Invalid("equation and characteristic system are inconsistent".into()))
        }
    };
    let residual = m.reduce(&apply_prolonged(ctx, template, r, eq)?);
    let num = residual.numerator();
    let split = num.coefficients_in(&|s| s.is_derivative())?;
    let mut equations = Vec::new();
    let mut monomials = Vec::new();
    for c in m.conditions() {
        equations.push(c.clone());
        monomials.push(None);
    }
    for (mono, c) in split {
        let c = c.numerator();
        if c.is_zero() {
            continue;
        }
        equations.push(c);
        monomials.push(Some(mono));
    }
    let mut assumptions = m.assumptions().to_vec();
    let den = residual.denom();
    if !den.is_constant() {
        let d = Expr::from_poly(den.clone());
        if !assumptions.contains(&d) {
            assumptions.push(d);
        }
    }
    Ok(DeterminingSystem { unknowns, equations, monomials, assumptions })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivalenceWitness {
    /// Rows s: Q̃^s = λ^{sσ} Q^σ.
    pub lambda: Vec<Vec<Expr>>,
    pub determinant: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Equivalence {
    Equivalent(EquivalenceWitness),
    NotEquivalent { reason: String },
}

pub fn family_equivalence(
    f: &VectorFieldFamily,
    g: &VectorFieldFamily,
    zero_test: ZeroTest,
) -> Result<Equivalence> {
    if f.len() != g.len() {
        return Err(Error::Invalid("families of different sizes".into()));
    }
    let a = Matrix::from_rows(f.members.iter().map(VectorField::components).collect()).transpose();
    let mut lambda = Vec::new();
    for (s, q) in g.members.iter().enumerate() {
        match a.solve(&q.components()) {
            Some(row) => lambda.push(row),
            None => {
                return Ok(Equivalence::NotEquivalent {
                    reason: format!("member {} is not a combination of the first family", s + 1),
                })
            }
        }
    }
    let determinant = Matrix::from_rows(lambda.clone()).det();
    if zero_test.check(&determinant).is_zero {
        return Ok(Equivalence::NotEquivalent { reason: "the multiplier matrix is singular".into() });
    }
    Ok(Equivalence::Equivalent(EquivalenceWitness { lambda, determinant }))
}

/// Label of the derivative D^α applied to an operator characteristic.
pub fn operator_term_label(ctx: &VariableContext, t: &OperatorTerm) -> String {
    derivative_label(ctx, &format!("Q{}[{}]", t.operator + 1, ctx.dependent()[t.dep]), &t.alpha)
}
