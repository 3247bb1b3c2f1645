//! Total derivatives, characteristics and prolongations of point vector fields.

use std::collections::{BTreeMap, HashMap};

use crate::context::VariableContext;
use crate::error::{Error, Result};
use crate::expr::{Expr, JetVar, MultiIndex, Symbol};
use crate::linalg::Matrix;

/// ∂e/∂x_i, with arbitrary functions f(x, u) differentiated formally.
pub fn partial_x(ctx: &VariableContext, e: &Expr, i: usize) -> Expr {
    let _ = ctx;
    e.derive_by(&|s| match s {
        Symbol::Indep(j) if usize::from(*j) == i => Some(Expr::one()),
        Symbol::Fun { id, deriv } => Some(Expr::symbol(Symbol::Fun { id: *id, deriv: deriv.bump(i) })),
        _ => None,
    })
}

/// ∂e/∂u^a.
pub fn partial_u(ctx: &VariableContext, e: &Expr, a: usize) -> Expr {
    let n = ctx.n();
    e.derive_by(&|s| match s {
        Symbol::Jet(j) if usize::from(j.dep) == a && j.alpha.is_zero() => Some(Expr::one()),
        Symbol::Fun { id, deriv } => Some(Expr::symbol(Symbol::Fun { id: *id, deriv: deriv.bump(n + a) })),
        _ => None,
    })
}

/// Formal partial derivative with respect to a named variable or jet variable.
pub fn partial_diff(e: &Expr, v: &Symbol) -> Expr {
    e.diff_symbol(v)
}

/// D_i e = ∂_i e + Σ u^a_{α+δ_i} ∂e/∂u^a_α.
pub fn total_derivative(ctx: &VariableContext, e: &Expr, i: usize) -> Expr {
    let n = ctx.n();
    let m = ctx.m();
    e.derive_by(&|s| match s {
        Symbol::Indep(j) if usize::from(*j) == i => Some(Expr::one()),
        Symbol::Jet(j) => Some(Expr::symbol(Symbol::Jet(JetVar { dep: j.dep, alpha: j.alpha.bump(i) }))),
        Symbol::Fun { id, deriv } => {
            let mut acc = Expr::symbol(Symbol::Fun { id: *id, deriv: deriv.bump(i) });
            for a in 0..m {
                let ua = Expr::jet(a, MultiIndex::delta(n, i));
                let fa = Expr::symbol(Symbol::Fun { id: *id, deriv: deriv.bump(n + a) });
                acc = &acc + &(&ua * &fa);
            }
            Some(acc)
        }
        _ => None,
    })
}

/// D^α e.
pub fn total_derivative_multi(ctx: &VariableContext, e: &Expr, alpha: &MultiIndex) -> Expr {
    alpha.slots().into_iter().fold(e.clone(), |acc, i| total_derivative(ctx, &acc, i))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorField {
    pub xi: Vec<Expr>,
    pub eta: Vec<Expr>,
}

impl VectorField {
    pub fn new(ctx: &VariableContext, xi: Vec<Expr>, eta: Vec<Expr>) -> Result<Self> {
        if xi.len() != ctx.n() || eta.len() != ctx.m() {
            return Err(Error::Invalid(format!(
                "vector field needs {} xi and {} eta components",
                ctx.n(),
                ctx.m()
            )));
        }
        for c in xi.iter().chain(&eta) {
            ctx.check_expr(c)?;
            if c.has_derivatives() {
                return Err(Error::Invalid("vector field coefficients may depend on x and u only".into()));
            }
        }
        Ok(VectorField { xi, eta })
    }

    /// ∂_{x_i}.
    pub fn translation(ctx: &VariableContext, i: usize) -> Self {
        let mut xi = vec![Expr::zero(); ctx.n()];
        xi[i] = Expr::one();
        VectorField { xi, eta: vec![Expr::zero(); ctx.m()] }
    }

    pub fn scaled(&self, lambda: &Expr) -> Self {
        VectorField {
            xi: self.xi.iter().map(|c| c * lambda).collect(),
            eta: self.eta.iter().map(|c| c * lambda).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.xi.iter().chain(&self.eta).all(Expr::is_zero)
    }

    /// Components ξ^1..ξ^n, η^1..η^m as one vector.
    pub fn components(&self) -> Vec<Expr> {
        self.xi.iter().chain(&self.eta).cloned().collect()
    }

    /// Action on a function of (x, u).
    pub fn apply_point(&self, ctx: &VariableContext, f: &Expr) -> Expr {
        let mut acc = Expr::zero();
        for (i, c) in self.xi.iter().enumerate() {
            if !c.is_zero() {
                acc = &acc + &(c * &partial_x(ctx, f, i));
            }
        }
        for (a, c) in self.eta.iter().enumerate() {
            if !c.is_zero() {
                acc = &acc + &(c * &partial_u(ctx, f, a));
            }
        }
        acc
    }

    pub fn render(&self, ctx: &VariableContext) -> String {
        let mut parts = Vec::new();
        for (i, c) in self.xi.iter().enumerate() {
            parts.push(format!("xi[{}] = {}", ctx.independent()[i], ctx.display_expr(c)));
        }
        for (a, c) in self.eta.iter().enumerate() {
            parts.push(format!("eta[{}] = {}", ctx.dependent()[a], ctx.display_expr(c)));
        }
        parts.join("; ")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorFieldFamily {
    pub members: Vec<VectorField>,
}

impl VectorFieldFamily {
    pub fn new(ctx: &VariableContext, members: Vec<VectorField>) -> Result<Self> {
        if members.is_empty() || members.len() > ctx.n() {
            return Err(Error::Invalid(format!("family size must lie between 1 and {}", ctx.n())));
        }
        Ok(VectorFieldFamily { members })
    }

    pub fn single(q: VectorField) -> Self {
        VectorFieldFamily { members: vec![q] }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Q^a[u] = η^a − ξ^i u^a_i.
pub fn characteristic(ctx: &VariableContext, q: &VectorField) -> Vec<Expr> {
    let n = ctx.n();
    (0..ctx.m())
        .map(|a| {
            let mut acc = q.eta[a].clone();
            for i in 0..n {
                if !q.xi[i].is_zero() {
                    acc = &acc - &(&q.xi[i] * &Expr::jet(a, MultiIndex::delta(n, i)));
                }
            }
            acc
        })
        .collect()
}

/// Memoized D^α Q[u] for one field.
pub struct CharacteristicJets<'a> {
    ctx: &'a VariableContext,
    base: Vec<Expr>,
    cache: HashMap<(usize, MultiIndex), Expr>,
}

impl<'a> CharacteristicJets<'a> {
    pub fn new(ctx: &'a VariableContext, q: &VectorField) -> Self {
        CharacteristicJets { ctx, base: characteristic(ctx, q), cache: HashMap::new() }
    }

    pub fn get(&mut self, a: usize, alpha: &MultiIndex) -> Expr {
        if alpha.is_zero() {
            return self.base[a].clone();
        }
        if let Some(v) = self.cache.get(&(a, alpha.clone())) {
            return v.clone();
        }
        let last = alpha.entries().iter().rposition(|&e| e > 0).expect("nonzero index");
        let lower = alpha.lower(last).expect("positive slot");
        let prev = self.get(a, &lower);
        let v = total_derivative(self.ctx, &prev, last);
        self.cache.insert((a, alpha.clone()), v.clone());
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProlongedField {
    pub base: VectorField,
    pub order: u32,
    pub coeffs: BTreeMap<JetVar, Expr>,
}

fn prolongation_coeff(ctx: &VariableContext, q: &VectorField, dq: &mut CharacteristicJets<'_>, j: &JetVar) -> Expr {
    let a = usize::from(j.dep);
    if j.alpha.is_zero() {
        return q.eta[a].clone();
    }
    let mut acc = dq.get(a, &j.alpha);
    for i in 0..ctx.n() {
        if !q.xi[i].is_zero() {
            acc = &acc + &(&q.xi[i] * &Expr::jet(a, j.alpha.bump(i)));
        }
    }
    acc
}

/// The r-th prolongation via coeff[u_α] = D^α Q[u] + ξ^i u_{α+δ_i}.
pub fn prolong(ctx: &VariableContext, q: &VectorField, r: u32) -> ProlongedField {
    let mut dq = CharacteristicJets::new(ctx, q);
    let mut coeffs = BTreeMap::new();
    for alpha in MultiIndex::all_up_to(ctx.n(), r) {
        for a in 0..ctx.m() {
            let j = JetVar::new(a, alpha.clone());
            let c = prolongation_coeff(ctx, q, &mut dq, &j);
            coeffs.insert(j, c);
        }
    }
    ProlongedField { base: q.clone(), order: r, coeffs }
}

/// Q_(r) e, computing prolongation coefficients only for jets present in `e`.
pub fn apply_prolonged(ctx: &VariableContext, q: &VectorField, r: u32, e: &Expr) -> Result<Expr> {
    if let Some(ord) = e.jet_order() {
        if ord > r {
            return Err(Error::Invalid(format!("expression of order {ord} exceeds prolongation order {r}")));
        }
    }
    let mut dq = CharacteristicJets::new(ctx, q);
    let mut coeff: BTreeMap<JetVar, Expr> = BTreeMap::new();
    for s in e.base_symbols() {
        if let Symbol::Jet(j) = &s {
            coeff.insert(j.clone(), prolongation_coeff(ctx, q, &mut dq, j));
        }
    }
    Ok(e.derive_by(&|s| match s {
        Symbol::Indep(i) => Some(q.xi[usize::from(*i)].clone()),
        Symbol::Jet(j) => coeff.get(j).cloned(),
        Symbol::Fun { .. } => Some(q.apply_point(ctx, &Expr::symbol(s.clone()))),
        _ => None,
    }))
}

/// [Q¹, Q²] with coefficients Q¹(c²) − Q²(c¹).
pub fn commutator(ctx: &VariableContext, q1: &VectorField, q2: &VectorField) -> VectorField {
    let comp = |c1: &Expr, c2: &Expr| &q1.apply_point(ctx, c2) - &q2.apply_point(ctx, c1);
    VectorField {
        xi: q1.xi.iter().zip(&q2.xi).map(|(a, b)| comp(a, b)).collect(),
        eta: q1.eta.iter().zip(&q2.eta).map(|(a, b)| comp(a, b)).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommutatorRelation {
    pub pair: (usize, usize),
    pub commutator: VectorField,
    /// ζ^σ with [Q^s, Q^s′] = ζ^σ Q^σ, or `None` when the commutator is not in the span.
    pub zeta: Option<Vec<Expr>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvolutionCertificate {
    pub involutive: bool,
    pub relations: Vec<CommutatorRelation>,
}

impl InvolutionCertificate {
    pub fn witness(&self) -> Option<&CommutatorRelation> {
        self.relations.iter().find(|r| r.zeta.is_none())
    }
}

fn coefficient_matrix(f: &VectorFieldFamily) -> Matrix {
    // columns are members, rows are components
    Matrix::from_rows(f.members.iter().map(VectorField::components).collect()).transpose()
}

pub fn check_involution(ctx: &VariableContext, f: &VectorFieldFamily) -> InvolutionCertificate {
    let a = coefficient_matrix(f);
    let mut relations = Vec::new();
    for s in 0..f.len() {
        for s2 in s + 1..f.len() {
            let c = commutator(ctx, &f.members[s], &f.members[s2]);
            let zeta = a.solve(&c.components());
            relations.push(CommutatorRelation { pair: (s, s2), commutator: c, zeta });
        }
    }
    let involutive = relations.iter().all(|r| r.zeta.is_some());
    InvolutionCertificate { involutive, relations }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransversalityReport {
    pub transversal: bool,
    pub rank: usize,
    pub size: usize,
    /// Columns (independent-variable indices) of the chosen nonvanishing minor.
    pub columns: Vec<usize>,
    /// The chosen l×l minor; transversality degenerates where it vanishes.
    pub minor: Option<Expr>,
}

pub fn check_transversality(f: &VectorFieldFamily) -> TransversalityReport {
    let xi = Matrix::from_rows(f.members.iter().map(|q| q.xi.clone()).collect());
    let (_, pivots) = xi.rref();
    let rank = pivots.len();
    let transversal = rank == f.len();
    let minor = transversal.then(|| xi.columns(&pivots).det());
    TransversalityReport { transversal, rank, size: f.len(), columns: pivots, minor }
}
