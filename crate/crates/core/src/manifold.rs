//! Solved forms of differential systems and reduction modulo them.
//!
//! Equations are triangularized one at a time: each is reduced by the rules
//! found so far and, if something remains, solved for its highest-ranked
//! jet variable. Rule right-hand sides never mention rule leaders, so
//! reduction is a single simultaneous substitution.

use std::collections::{BTreeMap, HashMap};

use crate::context::VariableContext;
use crate::error::{Error, Result};
use crate::expr::{Confidence, Expr, JetVar, MultiIndex, Symbol, ZeroTest};
use crate::jet::{check_transversality, total_derivative, CharacteristicJets, VectorFieldFamily};

/// Equations L^μ = 0 over a fixed context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DifferentialSystem {
    equations: Vec<Expr>,
    labels: Vec<String>,
}

impl DifferentialSystem {
    pub fn new(ctx: &VariableContext, equations: Vec<(String, Expr)>) -> Result<Self> {
        if equations.is_empty() {
            return Err(Error::Invalid("a differential system needs at least one equation".into()));
        }
        let mut eqs = Vec::new();
        let mut labels = Vec::new();
        for (label, e) in equations {
            ctx.check_expr(&e)?;
            if e.is_zero() {
                return Err(Error::Invalid(format!("equation `{label}` is identically zero")));
            }
            if labels.contains(&label) {
                return Err(Error::Invalid(format!("equation label `{label}` used twice")));
            }
            eqs.push(e);
            labels.push(label);
        }
        Ok(DifferentialSystem { equations: eqs, labels })
    }

    pub fn single(ctx: &VariableContext, label: &str, e: Expr) -> Result<Self> {
        Self::new(ctx, vec![(label.to_string(), e)])
    }

    pub fn equations(&self) -> &[Expr] {
        &self.equations
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.equations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }

    pub fn order_of(&self, i: usize) -> u32 {
        self.equations[i].jet_order().unwrap_or(0)
    }

    /// The system order r = max ord L^μ.
    pub fn order(&self) -> u32 {
        (0..self.len()).map(|i| self.order_of(i)).max().unwrap_or(0)
    }
}

/// A solved relation `leader = rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub leader: JetVar,
    pub rhs: Expr,
    /// Label of the equation the rule was solved from.
    pub source: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolvedManifold {
    rules: BTreeMap<JetVar, Rule>,
    assumptions: Vec<Expr>,
    conditions: Vec<Expr>,
    confidence: Option<Confidence>,
}

impl SolvedManifold {
    /// Rules ordered by increasing rank of their leaders.
    pub fn rules(&self) -> Vec<&Rule> {
        let mut v: Vec<&Rule> = self.rules.values().collect();
        v.sort_by(|a, b| a.leader.rank_cmp(&b.leader));
        v
    }

    pub fn rule(&self, leader: &JetVar) -> Option<&Expr> {
        self.rules.get(leader).map(|r| &r.rhs)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Nonzero assumptions made when dividing by non-constant leading coefficients.
    pub fn assumptions(&self) -> &[Expr] {
        &self.assumptions
    }

    /// Relations free of jet variables but involving arbitrary functions or parameters.
    pub fn conditions(&self) -> &[Expr] {
        &self.conditions
    }

    /// Exact unless a probabilistic zero test decided a dependency.
    pub fn confidence(&self) -> Confidence {
        self.confidence.unwrap_or(Confidence::Exact)
    }

    /// Normal form of `e` on the manifold.
    pub fn reduce(&self, e: &Expr) -> Expr {
        if self.rules.is_empty() {
            return e.clone();
        }
        e.substitute_with(&|s| match s {
            Symbol::Jet(j) => self.rules.get(j).map(|r| r.rhs.clone()),
            _ => None,
        })
    }
}

pub fn reduce_modulo(e: &Expr, m: &SolvedManifold) -> Expr {
    m.reduce(e)
}

/// Outcome of adding one equation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Insertion {
    /// Reduced to zero.
    Dependent,
    Solved(JetVar),
    /// Relation among coefficient functions only.
    Condition(Expr),
    /// Nonzero relation among independent variables only.
    Inconsistent(Expr),
}

/// Incremental triangularizer. With tracking enabled it also records, for
/// every rule, coefficients μ_j with `leader − rhs = Σ μ_j g_j` over the
/// inserted generators g_j.
#[derive(Clone, Debug)]
pub struct ManifoldBuilder {
    manifold: SolvedManifold,
    zero_test: ZeroTest,
    tracking: Option<Tracking>,
}

#[derive(Clone, Debug, Default)]
struct Tracking {
    generators: Vec<Expr>,
    mu: BTreeMap<JetVar, Vec<Expr>>,
}

fn add_scaled(acc: &mut Vec<Expr>, k: &Expr, v: &[Expr]) {
    if acc.len() < v.len() {
        acc.resize(v.len(), Expr::zero());
    }
    for (a, b) in acc.iter_mut().zip(v) {
        if !b.is_zero() {
            *a = &*a + &(k * b);
        }
    }
}

impl ManifoldBuilder {
    pub fn new(zero_test: ZeroTest) -> Self {
        ManifoldBuilder { manifold: SolvedManifold::default(), zero_test, tracking: None }
    }

    pub fn tracked(zero_test: ZeroTest) -> Self {
        ManifoldBuilder { manifold: SolvedManifold::default(), zero_test, tracking: Some(Tracking::default()) }
    }

    pub fn from_manifold(m: &SolvedManifold, zero_test: ZeroTest) -> Self {
        ManifoldBuilder { manifold: m.clone(), zero_test, tracking: None }
    }

    pub fn manifold(&self) -> &SolvedManifold {
        &self.manifold
    }

    pub fn finish(self) -> SolvedManifold {
        self.manifold
    }

    pub fn generators(&self) -> &[Expr] {
        self.tracking.as_ref().map_or(&[], |t| &t.generators)
    }

    fn is_zero(&mut self, e: &Expr) -> bool {
        if e.is_zero() {
            return true;
        }
        if !e.has_atoms() {
            return false;
        }
        let v = self.zero_test.check(e);
        if v.is_zero {
            self.manifold.confidence = Some(Confidence::Probabilistic);
        }
        v.is_zero
    }

    /// Reduces `e` and returns coefficients c_j with `e − reduced = Σ c_j g_j`.
    pub fn reduce_tracked(&self, e: &Expr) -> (Expr, Vec<Expr>) {
        let Some(tr) = &self.tracking else {
            return (self.manifold.reduce(e), Vec::new());
        };
        let mut comb = vec![Expr::zero(); tr.generators.len()];
        let mut cur = e.clone();
        let present: Vec<JetVar> = cur.base_symbols().into_iter().filter_map(|s| s.as_jet().cloned()).collect();
        for v in present {
            let Some(rule) = self.manifold.rules.get(&v) else { continue };
            let mut b = BTreeMap::new();
            b.insert(Symbol::Jet(v.clone()), rule.rhs.clone());
            let next = cur.substitute(&b);
            let diff = &cur - &next;
            if !diff.is_zero() {
                let lin = &Expr::jet_var(&v) - &rule.rhs;
                let q = &diff / &lin;
                add_scaled(&mut comb, &q, &tr.mu[&v]);
            }
            cur = next;
        }
        (cur, comb)
    }

    /// Adds the equation `e = 0`.
    pub fn insert(&mut self, e: &Expr, source: &str) -> Result<Insertion> {
        let (r, comb) = match &mut self.tracking {
            Some(tr) => {
                tr.generators.push(e.clone());
                self.reduce_tracked(e)
            }
            None => (self.manifold.reduce(e), Vec::new()),
        };
        if self.is_zero(&r) {
            return Ok(Insertion::Dependent);
        }
        let num = r.numerator();
        let mut jets: Vec<JetVar> = num.base_symbols().into_iter().filter_map(|s| s.as_jet().cloned()).collect();
        if jets.is_empty() {
            let free = num.mentions(&|s| matches!(s, Symbol::Fun { .. } | Symbol::Param(_)));
            return Ok(if free {
                self.manifold.conditions.push(num.clone());
                Insertion::Condition(num)
            } else {
                Insertion::Inconsistent(num)
            });
        }
        jets.sort_by(|a, b| b.rank_cmp(a));
        let leader = jets[0].clone();
        let lsym = Symbol::Jet(leader.clone());
        let coeffs = num.as_polynomial_in(&lsym).map_err(|_| {
            Error::UnsupportedForm(format!("cannot solve `{source}` rationally for its leading derivative"))
        })?;
        if coeffs.len() != 2 {
            return Err(Error::UnsupportedForm(format!(
                "`{source}` is not linear in its leading derivative"
            )));
        }
        let init = coeffs[1].clone();
        let rhs = (-&coeffs[0]).checked_div(&init)?;
        if init.as_constant().is_none() && !self.manifold.assumptions.contains(&init) {
            self.manifold.assumptions.push(init.clone());
        }

        // leader − rhs = num / init = r · den(r) / init
        let new_mu = self.tracking.as_ref().map(|tr| {
            let scale = &Expr::from_poly(r.denom().clone()) / &init;
            let mut own = vec![Expr::zero(); tr.generators.len()];
            own[tr.generators.len() - 1] = Expr::one();
            add_scaled(&mut own, &Expr::int(-1), &comb);
            own.iter().map(|c| c * &scale).collect::<Vec<_>>()
        });

        let mut b = BTreeMap::new();
        b.insert(lsym, rhs.clone());
        let lin = &Expr::jet_var(&leader) - &rhs;
        for (k, rule) in self.manifold.rules.iter_mut() {
            if !rule.rhs.contains_symbol(&Symbol::Jet(leader.clone())) {
                continue;
            }
            let updated = rule.rhs.substitute(&b);
            if let (Some(tr), Some(nm)) = (&mut self.tracking, &new_mu) {
                let q = &(&rule.rhs - &updated) / &lin;
                let mu = tr.mu.get_mut(k).expect("tracked rule");
                add_scaled(mu, &q, nm);
            }
            rule.rhs = updated;
        }
        if let (Some(tr), Some(nm)) = (&mut self.tracking, new_mu) {
            tr.mu.insert(leader.clone(), nm);
        }
        self.manifold.rules.insert(leader.clone(), Rule { leader: leader.clone(), rhs, source: source.to_string() });
        Ok(Insertion::Solved(leader))
    }

    /// Coefficients expressing `e − reduce(e)` through the generators, padded
    /// to the current generator count.
    pub fn certificate(&self, e: &Expr) -> (Expr, Vec<Expr>) {
        let (r, mut comb) = self.reduce_tracked(e);
        comb.resize(self.generators().len(), Expr::zero());
        (r, comb)
    }
}

/// D^α L for growing α, cached per equation.
struct DerivativeCache<'a> {
    ctx: &'a VariableContext,
    cache: HashMap<(usize, MultiIndex), Expr>,
    base: Vec<Expr>,
}

impl<'a> DerivativeCache<'a> {
    fn new(ctx: &'a VariableContext, base: Vec<Expr>) -> Self {
        DerivativeCache { ctx, cache: HashMap::new(), base }
    }

    fn get(&mut self, mu: usize, alpha: &MultiIndex) -> Expr {
        if alpha.is_zero() {
            return self.base[mu].clone();
        }
        if let Some(v) = self.cache.get(&(mu, alpha.clone())) {
            return v.clone();
        }
        let last = alpha.entries().iter().rposition(|&e| e > 0).expect("nonzero index");
        let prev = self.get(mu, &alpha.lower(last).expect("positive slot"));
        let v = total_derivative(self.ctx, &prev, last);
        self.cache.insert((mu, alpha.clone()), v.clone());
        v
    }
}

pub fn derivative_label(ctx: &VariableContext, label: &str, alpha: &MultiIndex) -> String {
    if alpha.is_zero() {
        return label.to_string();
    }
    let names: Vec<&str> = alpha.slots().iter().map(|&i| ctx.independent()[i].as_str()).collect();
    format!("D[{}]{}", names.join(","), label)
}

/// One member of a consequence set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Consequence {
    pub expr: Expr,
    pub label: String,
    /// Index of the original equation and the applied derivative D^α.
    pub equation: usize,
    pub alpha: MultiIndex,
    /// True when the member is a reduced relation of lower order than the
    /// derivative it came from (an integrability condition).
    pub projected: bool,
    /// Numerator of the member reduced by the relations found before it.
    pub normal_form: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsequenceSet {
    pub order: u32,
    pub members: Vec<Consequence>,
    /// Set when the consequences contain a nonzero relation in x alone.
    pub inconsistency: Option<Expr>,
}

impl ConsequenceSet {
    /// A consequence set holding just the given equations.
    pub fn plain(system: &DifferentialSystem) -> Self {
        ConsequenceSet {
            order: system.order(),
            members: system
                .equations()
                .iter()
                .enumerate()
                .map(|(i, e)| Consequence {
                    expr: e.clone(),
                    label: system.labels()[i].clone(),
                    equation: i,
                    alpha: MultiIndex::default(),
                    projected: false,
                    normal_form: e.clone(),
                })
                .collect(),
            inconsistency: None,
        }
    }

    pub fn exprs(&self) -> Vec<Expr> {
        self.members.iter().map(|m| m.expr.clone()).collect()
    }
}

/// A maximal set of independent consequences of order ≤ k, found by
/// triangularizing all D^α L^μ up to order k + 1 and keeping the relations
/// whose leaders have order ≤ k.
pub fn differential_consequences(
    ctx: &VariableContext,
    system: &DifferentialSystem,
    k: u32,
    zero_test: ZeroTest,
) -> Result<ConsequenceSet> {
    if k < system.order() {
        return Err(Error::Invalid(format!("consequence order {k} is below the system order {}", system.order())));
    }
    let mut gens = Vec::new();
    for mu in 0..system.len() {
        let ord = system.order_of(mu);
        for alpha in MultiIndex::all_up_to(ctx.n(), k + 1 - ord) {
            gens.push((ord + alpha.order(), mu, alpha));
        }
    }
    gens.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(b.2.cmp(&a.2)));
    let mut cache = DerivativeCache::new(ctx, system.equations().to_vec());
    let mut builder = ManifoldBuilder::new(zero_test);
    let mut produced: Vec<(JetVar, usize, Expr)> = Vec::new();
    let mut exprs = Vec::new();
    let mut inconsistency = None;
    for (idx, (_, mu, alpha)) in gens.iter().enumerate() {
        let e = cache.get(*mu, alpha);
        let label = derivative_label(ctx, &system.labels()[*mu], alpha);
        let normal = builder.manifold().reduce(&e).numerator();
        match builder.insert(&e, &label)? {
            Insertion::Solved(v) => produced.push((v, idx, normal)),
            Insertion::Inconsistent(w) => {
                inconsistency.get_or_insert(w);
            }
            Insertion::Dependent | Insertion::Condition(_) => {}
        }
        exprs.push(e);
    }
    let m = builder.finish();
    let mut members = Vec::new();
    for (v, idx, normal_form) in produced {
        if v.order() > k {
            continue;
        }
        let (gen_order, mu, alpha) = &gens[idx];
        let label = derivative_label(ctx, &system.labels()[*mu], alpha);
        if *gen_order <= k {
            members.push(Consequence {
                expr: exprs[idx].clone(),
                label,
                equation: *mu,
                alpha: alpha.clone(),
                projected: false,
                normal_form,
            });
        } else {
            let rhs = m.rule(&v).expect("rule exists");
            let rel = (&Expr::jet_var(&v) - rhs).numerator();
            members.push(Consequence {
                expr: rel.clone(),
                label,
                equation: *mu,
                alpha: alpha.clone(),
                projected: true,
                normal_form: rel,
            });
        }
    }
    Ok(ConsequenceSet { order: k, members, inconsistency })
}

/// The solved manifold 𝒬_(r): D^α Q^s[u] = 0 for |α| < r.
pub fn characteristic_manifold(
    ctx: &VariableContext,
    family: &VectorFieldFamily,
    r: u32,
    zero_test: ZeroTest,
) -> Result<SolvedManifold> {
    let mut b = ManifoldBuilder::new(zero_test);
    insert_characteristic(ctx, &mut b, family, r)?;
    Ok(b.finish())
}

/// Labels of the characteristic generators, in insertion order.
pub fn insert_characteristic(
    ctx: &VariableContext,
    b: &mut ManifoldBuilder,
    family: &VectorFieldFamily,
    r: u32,
) -> Result<Vec<(usize, usize, MultiIndex)>> {
    let tr = check_transversality(family);
    if !tr.transversal {
        return Err(Error::Invalid(format!(
            "family is not transversal (rank {} < {}); no solvable pivot",
            tr.rank, tr.size
        )));
    }
    let mut jets: Vec<CharacteristicJets<'_>> = family.members.iter().map(|q| CharacteristicJets::new(ctx, q)).collect();
    let mut order = Vec::new();
    for alpha in MultiIndex::all_up_to(ctx.n(), r.saturating_sub(1)) {
        for (s, cj) in jets.iter_mut().enumerate() {
            for a in 0..ctx.m() {
                let e = cj.get(a, &alpha);
                let label = derivative_label(ctx, &format!("Q{}[{}]", s + 1, ctx.dependent()[a]), &alpha);
                match b.insert(&e, &label)? {
                    Insertion::Inconsistent(w) => {
                        return Err(Error::Invalid(format!(
                            "characteristic system is inconsistent: {} = 0",
                            ctx.display_expr(&w)
                        )))
                    }
                    _ => order.push((s, a, alpha.clone())),
                }
            }
        }
    }
    Ok(order)
}

/// Result of intersecting consequences with a characteristic manifold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum JointManifold {
    Solved(SolvedManifold),
    /// No jet satisfies all relations; `witness` is a nonzero residue in x alone.
    Empty { witness: Expr, source: String },
}

impl JointManifold {
    pub fn solved(&self) -> Option<&SolvedManifold> {
        match self {
            JointManifold::Solved(m) => Some(m),
            JointManifold::Empty { .. } => None,
        }
    }
}

pub fn joint_manifold(cs: &ConsequenceSet, qm: &SolvedManifold, zero_test: ZeroTest) -> Result<JointManifold> {
    if let Some(w) = &cs.inconsistency {
        return Ok(JointManifold::Empty { witness: w.clone(), source: "consequences".into() });
    }
    let mut b = ManifoldBuilder::from_manifold(qm, zero_test);
    for m in &cs.members {
        if let Insertion::Inconsistent(w) = b.insert(&m.expr, &m.label)? {
            return Ok(JointManifold::Empty { witness: w, source: m.label.clone() });
        }
    }
    Ok(JointManifold::Solved(b.finish()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::VectorField;

    fn ctx() -> VariableContext {
        VariableContext::new(&["t", "x"], &["u"]).unwrap()
    }

    fn j(c: &VariableContext, v: &[&str]) -> Expr {
        c.jet("u", v).unwrap()
    }

    fn jv(c: &VariableContext, v: &[&str]) -> JetVar {
        c.jet_symbol("u", v).unwrap().as_jet().unwrap().clone()
    }

    fn drift_diffusion(c: &VariableContext) -> Expr {
        let t = c.var("t").unwrap();
        &(&j(c, &["t"]) + &j(c, &["x", "x"])) + &(&t * &j(c, &["x"]))
    }

    fn dt(c: &VariableContext) -> VectorFieldFamily {
        VectorFieldFamily::single(VectorField::translation(c, 0))
    }

    #[test]
    fn characteristic_manifold_of_time_translation() {
        let c = ctx();
        let m = characteristic_manifold(&c, &dt(&c), 2, ZeroTest::default()).unwrap();
        assert_eq!(m.len(), 3);
        for v in [&["t"][..], &["t", "t"], &["t", "x"]] {
            assert!(m.rule(&jv(&c, v)).unwrap().is_zero());
        }
        let m3 = characteristic_manifold(&c, &dt(&c), 3, ZeroTest::default()).unwrap();
        assert_eq!(m3.len(), 6);
        for v in [&["t", "t", "t"][..], &["t", "t", "x"], &["t", "x", "x"]] {
            assert!(m3.rule(&jv(&c, v)).unwrap().is_zero());
        }
        let q = VectorField { xi: vec![Expr::one(), Expr::one()], eta: vec![Expr::zero()] };
        let m = characteristic_manifold(&c, &VectorFieldFamily::single(q), 1, ZeroTest::default()).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.rule(&jv(&c, &["t"])).unwrap(), &-j(&c, &["x"]));
    }

    #[test]
    fn consequences_of_drift_diffusion() {
        let c = ctx();
        let s = DifferentialSystem::single(&c, "L", drift_diffusion(&c)).unwrap();
        let cs = differential_consequences(&c, &s, 3, ZeroTest::default()).unwrap();
        let labels: Vec<&str> = cs.members.iter().map(|m| m.label.as_str()).collect();
        assert_eq!(labels, vec!["L", "D[t]L", "D[x]L"]);
        let heat = DifferentialSystem::single(&c, "H", &j(&c, &["t"]) - &j(&c, &["x", "x"])).unwrap();
        let cs = differential_consequences(&c, &heat, 2, ZeroTest::default()).unwrap();
        assert_eq!(cs.members.len(), 1);
        assert!(differential_consequences(&c, &heat, 1, ZeroTest::default()).is_err());
    }

    #[test]
    fn joint_manifold_of_drift_diffusion() {
        let c = ctx();
        let t = c.var("t").unwrap();
        let s = DifferentialSystem::single(&c, "L", drift_diffusion(&c)).unwrap();
        let qm = characteristic_manifold(&c, &dt(&c), 2, ZeroTest::default()).unwrap();
        let jm = joint_manifold(&ConsequenceSet::plain(&s), &qm, ZeroTest::default()).unwrap();
        let m = jm.solved().unwrap();
        assert_eq!(m.len(), 4);
        assert_eq!(m.rule(&jv(&c, &["x", "x"])).unwrap(), &-(&t * &j(&c, &["x"])));
        assert_eq!(m.reduce(&j(&c, &["x"])), j(&c, &["x"]));
        assert!(m.reduce(&j(&c, &["t", "x"])).is_zero());
        assert!(m.reduce(&drift_diffusion(&c)).is_zero());

        let cs = differential_consequences(&c, &s, 3, ZeroTest::default()).unwrap();
        let qm3 = characteristic_manifold(&c, &dt(&c), 3, ZeroTest::default()).unwrap();
        let m = joint_manifold(&cs, &qm3, ZeroTest::default()).unwrap();
        let m = m.solved().unwrap();
        for v in [&["x"][..], &["x", "x"], &["x", "x", "x"]] {
            assert!(m.rule(&jv(&c, v)).unwrap().is_zero(), "{v:?}");
        }
    }

    #[test]
    fn heat_with_space_translation() {
        let c = ctx();
        let heat = DifferentialSystem::single(&c, "H", &j(&c, &["t"]) - &j(&c, &["x", "x"])).unwrap();
        let q = VectorFieldFamily::single(VectorField::translation(&c, 1));
        let qm = characteristic_manifold(&c, &q, 2, ZeroTest::default()).unwrap();
        let m = joint_manifold(&ConsequenceSet::plain(&heat), &qm, ZeroTest::default()).unwrap();
        let m = m.solved().unwrap();
        for v in [&["x"][..], &["x", "x"], &["t"]] {
            assert!(m.rule(&jv(&c, v)).unwrap().is_zero(), "{v:?}");
        }
    }

    #[test]
    fn inconsistency_is_reported_not_raised() {
        let c = ctx();
        let t = c.var("t").unwrap();
        let s = DifferentialSystem::new(
            &c,
            vec![("A".into(), j(&c, &["x"])), ("B".into(), &j(&c, &["x"]) - &t)],
        )
        .unwrap();
        let jm = joint_manifold(&ConsequenceSet::plain(&s), &SolvedManifold::default(), ZeroTest::default()).unwrap();
        assert!(matches!(jm, JointManifold::Empty { .. }));
    }

    #[test]
    fn tracked_reduction_reconstructs_input() {
        let c = ctx();
        let t = c.var("t").unwrap();
        let mut b = ManifoldBuilder::tracked(ZeroTest::default());
        let g1 = &j(&c, &["t"]) - &(&t * &j(&c, &["x"]));
        let g2 = &(&j(&c, &["x", "x"]) * &t) + &j(&c, &["t"]);
        b.insert(&g1, "g1").unwrap();
        b.insert(&g2, "g2").unwrap();
        let e = &(&j(&c, &["x", "x"]) * &j(&c, &["x", "x"])) + &(&j(&c, &["t"]) * &t);
        let (r, comb) = b.certificate(&e);
        let recon = &r + &(&(&comb[0] * &g1) + &(&comb[1] * &g2));
        assert_eq!(recon, e);
    }

    #[test]
    fn nonlinear_leader_is_unsupported() {
        let c = ctx();
        let mut b = ManifoldBuilder::new(ZeroTest::default());
        let e = &(&j(&c, &["x"]) * &j(&c, &["x"])) - &j(&c, &[]);
        assert!(matches!(b.insert(&e, "E"), Err(Error::UnsupportedForm(_))));
    }
}
