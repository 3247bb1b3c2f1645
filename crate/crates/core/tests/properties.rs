//! Randomized identities for expressions, total derivatives, prolongation
//! and reduction modulo solved manifolds.

use std::collections::BTreeMap;

use jetred_core::expr::{q_int, ZeroTest};
use jetred_core::jet::{apply_prolonged, characteristic, commutator, partial_diff, total_derivative, VectorField};
use jetred_core::manifold::{differential_consequences, joint_manifold, reduce_modulo, DifferentialSystem, SolvedManifold};
use jetred_core::{Expr, JetVar, MultiIndex, Symbol, VariableContext};
use proptest::prelude::*;

fn ctx() -> VariableContext {
    VariableContext::new(&["t", "x"], &["u"]).unwrap()
}

/// Jets of order at most two, plus u itself.
fn jet(k: usize) -> Expr {
    let alphas: [[u8; 2]; 6] = [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]];
    Expr::jet(0, MultiIndex::from_slice(&alphas[k]))
}

/// c·t^a·x^b terms.
fn coeff_terms() -> impl Strategy<Value = Vec<(i64, u32, u32)>> {
    prop::collection::vec((-3i64..=3, 0u32..=2, 0u32..=2), 1..=3)
}

fn coeff(terms: &[(i64, u32, u32)]) -> Expr {
    terms
        .iter()
        .filter(|(_, a, b)| a + b <= 2)
        .map(|&(c, a, b)| &Expr::int(c) * &(&Expr::indep(0).powi(a as i64).unwrap() * &Expr::indep(1).powi(b as i64).unwrap()))
        .sum()
}

/// Polynomial differential function of order ≤ 2, degree ≤ 2 in jets.
fn differential_function() -> impl Strategy<Value = Expr> {
    prop::collection::vec((coeff_terms(), 0usize..6, prop::option::of(0usize..6)), 1..=4).prop_map(|terms| {
        terms
            .iter()
            .map(|(c, j1, j2)| {
                let mut m = jet(*j1);
                if let Some(j2) = j2 {
                    m = &m * &jet(*j2);
                }
                &coeff(c) * &m
            })
            .sum()
    })
}

/// Polynomial in (t, x, u) of degree ≤ 2.
fn point_function() -> impl Strategy<Value = Expr> {
    prop::collection::vec((-3i64..=3, 0u32..=2, 0u32..=2, 0u32..=2), 1..=3).prop_map(|terms| {
        terms
            .iter()
            .filter(|(_, a, b, e)| a + b + e <= 2)
            .map(|&(c, a, b, e)| {
                let mono = &(&Expr::indep(0).powi(a as i64).unwrap() * &Expr::indep(1).powi(b as i64).unwrap())
                    * &jet(0).powi(e as i64).unwrap();
                &Expr::int(c) * &mono
            })
            .sum()
    })
}

fn field() -> impl Strategy<Value = VectorField> {
    (point_function(), point_function(), point_function()).prop_map(|(a, b, c)| VectorField { xi: vec![a, b], eta: vec![c] })
}

fn rational() -> impl Strategy<Value = Expr> {
    (point_function(), point_function()).prop_map(|(n, d)| {
        let d = &d * &d + Expr::one();
        &n / &d
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ring_laws(a in rational(), b in rational(), c in differential_function()) {
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert!((&a - &a).is_zero());
        prop_assert_eq!(&a * &Expr::one(), a.clone());
    }

    #[test]
    fn division_inverts_multiplication(a in rational(), b in rational()) {
        prop_assume!(!b.is_zero());
        prop_assert_eq!(&(&a * &b) / &b, a.clone());
        prop_assert_eq!(&(&a / &b) * &b, a);
    }

    #[test]
    fn canonical_form_is_stable_under_substitution_of_itself(a in differential_function()) {
        let same: BTreeMap<Symbol, Expr> = a.base_symbols().into_iter().map(|s| (s.clone(), Expr::symbol(s))).collect();
        prop_assert_eq!(a.substitute(&same), a);
    }

    #[test]
    fn partial_derivatives_commute(a in differential_function(), b in rational()) {
        let e = &a * &b;
        let s: Vec<Symbol> = vec![Symbol::Indep(0), Symbol::Indep(1), Symbol::jet(0, MultiIndex::zero(2)), Symbol::jet(0, MultiIndex::from_slice(&[0, 1]))];
        for p in &s {
            for q in &s {
                prop_assert_eq!(partial_diff(&partial_diff(&e, p), q), partial_diff(&partial_diff(&e, q), p));
            }
        }
    }

    #[test]
    fn product_rule(a in differential_function(), b in differential_function()) {
        let c = ctx();
        for i in 0..2 {
            let lhs = total_derivative(&c, &(&a * &b), i);
            let rhs = &(&total_derivative(&c, &a, i) * &b) + &(&a * &total_derivative(&c, &b, i));
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn total_derivatives_commute(a in differential_function(), b in rational()) {
        let c = ctx();
        let e = &a * &b;
        let tx = total_derivative(&c, &total_derivative(&c, &e, 0), 1);
        let xt = total_derivative(&c, &total_derivative(&c, &e, 1), 0);
        prop_assert_eq!(tx, xt);
    }

    #[test]
    fn substitution_commutes_with_arithmetic(a in differential_function(), b in differential_function(), v in point_function()) {
        let mut bind = BTreeMap::new();
        bind.insert(Symbol::jet(0, MultiIndex::from_slice(&[0, 1])), v);
        prop_assert_eq!((&a * &b).substitute(&bind), &a.substitute(&bind) * &b.substitute(&bind));
        prop_assert_eq!((&a + &b).substitute(&bind), &a.substitute(&bind) + &b.substitute(&bind));
    }

    #[test]
    fn tautology_identity(l in differential_function(), q in field()) {
        let c = ctx();
        let r = l.jet_order().unwrap_or(0);
        let qu = characteristic(&c, &q)[0].clone();
        let mut rhs = Expr::zero();
        for i in 0..2 {
            rhs = &rhs + &(&q.xi[i] * &total_derivative(&c, &l, i));
        }
        for j in l.base_symbols().into_iter().filter_map(|s| s.as_jet().cloned()) {
            let d = jetred_core::jet::total_derivative_multi(&c, &qu, &j.alpha);
            rhs = &rhs + &(&partial_diff(&l, &Symbol::Jet(j)) * &d);
        }
        prop_assert_eq!(apply_prolonged(&c, &q, r, &l).unwrap(), rhs);
    }

    #[test]
    fn characteristic_identity(q in field()) {
        let c = ctx();
        let qu = characteristic(&c, &q)[0].clone();
        let u = Symbol::jet(0, MultiIndex::zero(2));
        let mut factor = partial_diff(&q.eta[0], &u);
        for j in 0..2 {
            factor = &factor - &(&partial_diff(&q.xi[j], &u) * &Expr::jet(0, MultiIndex::delta(2, j)));
        }
        let lhs = apply_prolonged(&c, &q, 1, &qu).unwrap();
        prop_assert_eq!(lhs, &factor * &qu);
    }

    #[test]
    fn commutator_is_antisymmetric(a in field(), b in field()) {
        let c = ctx();
        let ab = commutator(&c, &a, &b);
        let ba = commutator(&c, &b, &a);
        for (x, y) in ab.components().iter().zip(ba.components()) {
            prop_assert!((x + &y).is_zero());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn jacobi_identity(a in field(), b in field(), d in field()) {
        let c = ctx();
        let j1 = commutator(&c, &commutator(&c, &a, &b), &d);
        let j2 = commutator(&c, &commutator(&c, &b, &d), &a);
        let j3 = commutator(&c, &commutator(&c, &d, &a), &b);
        for ((x, y), z) in j1.components().iter().zip(j2.components()).zip(j3.components()) {
            prop_assert!((&(x + &y) + &z).is_zero());
        }
    }
}

fn manifold(c: &VariableContext, eq: &Expr, k: u32) -> SolvedManifold {
    let sys = DifferentialSystem::single(c, "L", eq.clone()).unwrap();
    let cs = differential_consequences(c, &sys, k, ZeroTest::default()).unwrap();
    joint_manifold(&cs, &SolvedManifold::default(), ZeroTest::default()).unwrap().solved().unwrap().clone()
}

fn test_equations(c: &VariableContext) -> Vec<Expr> {
    let (u, ut, ux, uxx) = (jet(0), jet(1), jet(2), jet(5));
    let t = c.var("t").unwrap();
    vec![
        &ut - &uxx,
        &(&ut + &(&u * &ux)) - &uxx,
        &(&ut + &uxx) + &(&t * &ux),
        &(&ut - &uxx) - &(&u * &u),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduction_is_idempotent_and_kills_generators(e in differential_function(), which in 0usize..4) {
        let c = ctx();
        let eq = test_equations(&c)[which].clone();
        let m = manifold(&c, &eq, 3);
        let once = reduce_modulo(&e, &m);
        prop_assert_eq!(reduce_modulo(&once, &m), once);
        prop_assert!(reduce_modulo(&eq, &m).is_zero());
        for i in 0..2 {
            prop_assert!(reduce_modulo(&total_derivative(&c, &eq, i), &m).is_zero());
        }
    }

    #[test]
    fn reduction_is_consistent_with_prolonged_rules(e in differential_function(), which in 0usize..4, i in 0usize..2) {
        let c = ctx();
        let eq = test_equations(&c)[which].clone();
        let m2 = manifold(&c, &eq, 2);
        let m3 = manifold(&c, &eq, 3);
        let direct = reduce_modulo(&total_derivative(&c, &e, i), &m3);
        let staged = reduce_modulo(&total_derivative(&c, &reduce_modulo(&e, &m2), i), &m3);
        prop_assert_eq!(direct, staged);
    }

    #[test]
    fn rule_right_sides_are_free_of_leaders(which in 0usize..4, k in 2u32..5) {
        let c = ctx();
        let m = manifold(&c, &test_equations(&c)[which], k);
        let leaders: Vec<JetVar> = m.rules().iter().map(|r| r.leader.clone()).collect();
        for r in m.rules() {
            for l in &leaders {
                prop_assert!(!r.rhs.contains_symbol(&Symbol::Jet(l.clone())));
            }
            prop_assert!(r.rhs.jet_order().unwrap_or(0) <= k);
        }
    }
}

#[test]
fn consequences_grow_with_the_order() {
    let c = ctx();
    for eq in test_equations(&c) {
        let sys = DifferentialSystem::single(&c, "L", eq).unwrap();
        let mut previous: Vec<String> = Vec::new();
        for k in 2..=5 {
            let cs = differential_consequences(&c, &sys, k, ZeroTest::default()).unwrap();
            let labels: Vec<String> = cs.members.iter().filter(|m| !m.projected).map(|m| m.label.clone()).collect();
            for l in &previous {
                assert!(labels.contains(l), "{l} missing at order {k}");
            }
            assert!(labels.len() > previous.len());
            previous = labels;
        }
    }
}

#[test]
fn binomial_and_cancellation() {
    let ux = jet(2);
    let one = Expr::one();
    let sq = &(&ux + &one) * &(&ux + &one);
    assert!((&(&(&sq - &(&ux * &ux)) - &(&Expr::int(2) * &ux)) - &one).is_zero());
    let t = Expr::indep(0);
    assert_eq!(&(&t * &ux) + &(&ux * &t), &Expr::rational(q_int(2)) * &(&t * &ux));
    assert!((&(&jet(0) * &jet(5)) - &(&jet(5) * &jet(0))).is_zero());
}
