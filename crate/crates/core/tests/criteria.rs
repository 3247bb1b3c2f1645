//! Randomized checks of the invariance criteria and of ansatz reductions.

use std::collections::BTreeMap;

use jetred_core::expr::ZeroTest;
use jetred_core::invariance::{conditional_criterion, determining_equations, lie_criterion, template_field, Holds};
use jetred_core::jet::{VectorField, VectorFieldFamily};
use jetred_core::linalg::Matrix;
use jetred_core::manifold::DifferentialSystem;
use jetred_core::reduction::{build_ansatz, verify_reduction, Ansatz, ReductionStatus};
use jetred_core::{Error, Expr, MultiIndex, Symbol, VariableContext};
use proptest::prelude::*;

fn ctx() -> VariableContext {
    VariableContext::new(&["t", "x"], &["u"]).unwrap()
}

fn j(v: &[&str]) -> Expr {
    ctx().jet("u", v).unwrap()
}

fn t() -> Expr {
    Expr::indep(0)
}

fn x() -> Expr {
    Expr::indep(1)
}

fn u() -> Expr {
    j(&[])
}

fn field(a: Expr, b: Expr, c: Expr) -> VectorField {
    VectorField { xi: vec![a, b], eta: vec![c] }
}

fn int(n: i64) -> Expr {
    Expr::int(n)
}

fn heat() -> Expr {
    &j(&["t"]) - &j(&["x", "x"])
}

fn burgers() -> Expr {
    &(&j(&["t"]) + &(&u() * &j(&["x"]))) - &j(&["x", "x"])
}

fn reaction_diffusion() -> Expr {
    &(&j(&["t"]) - &j(&["x", "x"])) - &(&u() * &u())
}

fn drifting() -> Expr {
    &(&j(&["t"]) + &j(&["x", "x"])) + &(&t() * &j(&["x"]))
}

/// Basis of the heat point symmetries modulo the linear superposition.
fn heat_symmetries() -> Vec<VectorField> {
    let (t, x, u) = (t(), x(), u());
    vec![
        field(int(1), int(0), int(0)),
        field(int(0), int(1), int(0)),
        field(int(0), int(0), u.clone()),
        field(&int(2) * &t, x.clone(), int(0)),
        field(int(0), &int(2) * &t, -(&x * &u)),
        field(&int(4) * &(&t * &t), &int(4) * &(&t * &x), -(&(&(&x * &x) + &(&int(2) * &t)) * &u)),
    ]
}

fn burgers_symmetries() -> Vec<VectorField> {
    let (t, x, u) = (t(), x(), u());
    vec![
        field(int(1), int(0), int(0)),
        field(int(0), int(1), int(0)),
        field(&int(2) * &t, x, -u),
        field(int(0), t, int(1)),
    ]
}

fn combination(basis: &[VectorField], coeffs: &[i64]) -> VectorField {
    let mut acc = field(int(0), int(0), int(0));
    for (q, &c) in basis.iter().zip(coeffs) {
        let s = q.scaled(&int(c));
        acc = VectorField {
            xi: acc.xi.iter().zip(&s.xi).map(|(a, b)| a + b).collect(),
            eta: acc.eta.iter().zip(&s.eta).map(|(a, b)| a + b).collect(),
        };
    }
    acc
}

fn point_poly() -> impl Strategy<Value = Expr> {
    prop::collection::vec((-2i64..=2, 0u32..=1, 0u32..=1, 0u32..=1), 1..=2).prop_map(|terms| {
        terms
            .iter()
            .map(|&(c, a, b, e)| {
                &int(c) * &(&(&t().powi(a as i64).unwrap() * &x().powi(b as i64).unwrap()) * &u().powi(e as i64).unwrap())
            })
            .sum()
    })
}

fn random_field() -> impl Strategy<Value = VectorField> {
    (point_poly(), point_poly(), point_poly()).prop_map(|(a, b, c)| field(a, b, c))
}

fn conditional(eq: &Expr, q: &VectorField) -> Result<Holds, Error> {
    conditional_criterion(&ctx(), eq, &VectorFieldFamily::single(q.clone()), ZeroTest::default()).map(|r| r.holds)
}

fn lie(eq: &Expr, q: &VectorField) -> Holds {
    let c = ctx();
    let sys = DifferentialSystem::single(&c, "L", eq.clone()).unwrap();
    lie_criterion(&c, &sys, q, ZeroTest::default()).unwrap().holds
}

fn equations() -> Vec<Expr> {
    vec![heat(), burgers(), reaction_diffusion(), drifting()]
}

fn multipliers() -> Vec<Expr> {
    vec![&(&u() * &u()) + &int(1), &int(1) + &(&x() * &x()), Expr::exp(x())]
}

/// Replaces every jet of u by the corresponding partial derivative of `f(t, x)`.
fn evaluate_on(e: &Expr, f: &Expr) -> Expr {
    e.substitute_with(&|s| match s {
        Symbol::Jet(v) => Some(v.alpha.slots().into_iter().fold(f.clone(), |acc, i| acc.diff_symbol(&Symbol::Indep(i as u16)))),
        _ => None,
    })
}

/// Form of the ansatz with φ replaced by `g` composed with the invariant.
fn instantiate(a: &Ansatz, g: &dyn Fn(&Expr) -> Expr) -> Expr {
    let w = g(&a.invariants[0]);
    a.forms[0].substitute_with(&|s| match s {
        Symbol::Unknown { deriv, .. } if deriv.is_zero() => Some(w.clone()),
        _ => None,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lie_symmetries_are_conditional_symmetries(coeffs in prop::collection::vec(-2i64..=2, 6), burgers_case in any::<bool>()) {
        let (eq, basis) = if burgers_case { (burgers(), burgers_symmetries()) } else { (heat(), heat_symmetries()) };
        let q = combination(&basis, &coeffs);
        prop_assume!(q.xi.iter().any(|c| !c.is_zero()));
        prop_assert_eq!(lie(&eq, &q), Holds::Yes);
        prop_assert_eq!(conditional(&eq, &q).unwrap(), Holds::Yes);
    }

    #[test]
    fn lie_implies_conditional_for_random_fields(q in random_field(), which in 0usize..4) {
        let eq = &equations()[which];
        prop_assume!(q.xi.iter().any(|c| !c.is_zero()));
        if lie(eq, &q) == Holds::Yes {
            prop_assert_eq!(conditional(eq, &q).unwrap(), Holds::Yes);
        }
    }

    #[test]
    fn conditional_verdict_ignores_rescaling(q in random_field(), which in 0usize..4, m in 0usize..3) {
        let eq = &equations()[which];
        let lambda = &multipliers()[m];
        let before = conditional(eq, &q).map_err(|e| e.to_string());
        let after = conditional(eq, &q.scaled(lambda)).map_err(|e| e.to_string());
        prop_assert_eq!(before.is_ok(), after.is_ok());
        if let (Ok(a), Ok(b)) = (before, after) {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn determining_equations_are_free_of_jets(f in prop::collection::vec(-2i64..=2, 4), gauge in any::<bool>()) {
        let mut c = ctx();
        let source: Expr = f.iter().enumerate().map(|(k, &a)| &int(a) * &u().powi(k as i64).unwrap()).sum();
        let eq = &(&j(&["t"]) - &j(&["x", "x"])) - &source;
        let mut g = BTreeMap::new();
        if gauge {
            g.insert("xi_t".to_string(), int(1));
        }
        let (template, unknowns) = template_field(&mut c, &g).unwrap();
        let sys = determining_equations(&c, &eq, &template, unknowns.clone(), ZeroTest::default()).unwrap();
        prop_assert!(!sys.equations.is_empty());
        for e in &sys.equations {
            prop_assert!(!e.has_derivatives());
        }
        // ∂_t solves the system of every autonomous equation.
        let values: BTreeMap<u16, Expr> = unknowns
            .iter()
            .map(|n| (c.function_index(n).unwrap() as u16, if n == "xi_t" { int(1) } else { int(0) }))
            .collect();
        for r in sys.evaluate(&c, &values) {
            prop_assert!(r.is_zero());
        }
    }
}

/// Operators covered by the ansatz catalogue on (t, x, u).
fn catalogue_field() -> impl Strategy<Value = VectorField> {
    prop_oneof![
        (-3i64..=3, -3i64..=3).prop_map(|(a, b)| field(int(a), int(b), int(0))),
        (1i64..=2, 1i64..=2, -2i64..=2).prop_map(|(a, b, k)| field(&int(a) * &t(), &int(b) * &x(), &int(k) * &u())),
        (1i64..=3, -2i64..=2).prop_map(|(a, k)| field(int(0), &int(a) * &t(), &(&int(k) * &x()) * &u())),
        (-2i64..=2).prop_map(|k| field(int(0), &t() * &t(), &int(k) * &t())),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operator_annihilates_its_ansatz(q in catalogue_field(), p in 0i64..3) {
        prop_assume!(!q.is_zero());
        let c = ctx();
        let a = match build_ansatz(&c, &q) {
            Ok(a) => a,
            Err(_) => return Ok(()),
        };
        for w in &a.invariants {
            prop_assert!(q.apply_point(&c, w).is_zero());
        }
        let g = |w: &Expr| &(&w.powi(p).unwrap() + &Expr::exp(w.clone())) + &int(1);
        let f = instantiate(&a, &g);
        let on_f: BTreeMap<Symbol, Expr> = [(Symbol::jet(0, MultiIndex::zero(2)), f.clone())].into_iter().collect();
        let mut r = q.eta[0].substitute(&on_f);
        for i in 0..2 {
            r = &r - &(&q.xi[i].substitute(&on_f) * &f.diff_symbol(&Symbol::Indep(i as u16)));
        }
        prop_assert!(r.is_zero(), "{}", c.display_expr(&r));
    }
}

/// Linear equations with polynomial coefficients in u and its derivatives.
fn linear_equation() -> impl Strategy<Value = Expr> {
    prop_oneof![
        Just(heat()),
        Just(drifting()),
        (1i64..=2, -2i64..=2, prop::sample::select(vec![0i64, 0, 1, -1])).prop_map(|(a, b, k)| {
            &(&(&j(&["t"]) - &(&int(a) * &j(&["x", "x"]))) - &(&int(b) * &j(&["x"]))) - &(&int(k) * &u())
        }),
    ]
}

/// Basis of the polynomial solutions of degree ≤ `deg` of a linear reduced equation.
fn polynomial_solutions(reduced: &Expr, deg: u32) -> Vec<Expr> {
    let w = Expr::symbol(Symbol::Inv(0));
    let phi_of = |p: &Expr| {
        reduced.substitute_with(&|s| match s {
            Symbol::Unknown { deriv, .. } => {
                Some((0..deriv.order()).fold(p.clone(), |acc, _| acc.diff_symbol(&Symbol::Inv(0))))
            }
            _ => None,
        })
    };
    let images: Vec<Vec<Expr>> = (0..=deg)
        .map(|k| {
            let img = phi_of(&w.powi(k as i64).unwrap());
            img.as_polynomial_in(&Symbol::Inv(0)).unwrap()
        })
        .collect();
    let rows = images.iter().map(Vec::len).max().unwrap_or(0);
    let mut m = Matrix::zeros(rows, images.len());
    for (col, img) in images.iter().enumerate() {
        for (row, v) in img.iter().enumerate() {
            m.set(row, col, v.clone());
        }
    }
    let (r, pivots) = m.rref();
    let mut basis = Vec::new();
    for free in (0..images.len()).filter(|c| !pivots.contains(c)) {
        let mut v = vec![Expr::zero(); images.len()];
        v[free] = Expr::one();
        for (row, &p) in pivots.iter().enumerate() {
            v[p] = -r.get(row, free);
        }
        basis.push(v.iter().enumerate().map(|(k, a)| a * &w.powi(k as i64).unwrap()).sum());
    }
    basis
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduced_solutions_solve_the_original_equation(eq in linear_equation(), q in catalogue_field()) {
        prop_assume!(!q.is_zero());
        let c = ctx();
        let a = match build_ansatz(&c, &q) {
            Ok(a) => a,
            Err(_) => return Ok(()),
        };
        let rep = verify_reduction(&a, &[("L".into(), eq.clone())], ZeroTest::default()).unwrap();
        if rep.status != ReductionStatus::Reduced {
            return Ok(());
        }
        let reduced = &rep.reduced[0].numerator();
        let at_zero = reduced.substitute_with(&|s| matches!(s, Symbol::Unknown { .. }).then(Expr::zero));
        prop_assert!(at_zero.is_zero());
        for p in polynomial_solutions(reduced, 4) {
            let back = a.to_original_coordinates(&p);
            let f = instantiate(&a, &|_| back.clone());
            let r = evaluate_on(&eq, &f);
            prop_assert!(r.is_zero(), "{} on {}", c.display_expr(&r), c.display_expr(&f));
        }
    }
}

#[test]
fn heat_reductions_have_constant_solutions() {
    let c = ctx();
    let a = build_ansatz(&c, &field(int(0), int(1), int(0))).unwrap();
    let rep = verify_reduction(&a, &[("H".into(), heat())], ZeroTest::default()).unwrap();
    let sols = polynomial_solutions(&rep.reduced[0], 3);
    assert_eq!(sols.len(), 1);
    let scaling = build_ansatz(&c, &field(&int(2) * &t(), x(), int(0))).unwrap();
    let rep = verify_reduction(&scaling, &[("H".into(), heat())], ZeroTest::default()).unwrap();
    assert_eq!(rep.status, ReductionStatus::Reduced);
    assert_eq!(polynomial_solutions(&rep.reduced[0], 3).len(), 1);
}
