//! Zero testing with a numerical fallback for transcendental atoms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use num_traits::ToPrimitive;

use super::{Atom, Expr, Poly, Symbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Confidence {
    Exact,
    Probabilistic,
}

impl Confidence {
    pub fn as_str(self) -> &'static str {
        match self {
            Confidence::Exact => "exact",
            Confidence::Probabilistic => "probabilistic",
        }
    }

    /// The weaker of two confidences.
    pub fn meet(self, other: Confidence) -> Confidence {
        self.max(other)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ZeroVerdict {
    pub is_zero: bool,
    pub confidence: Confidence,
}

/// Configuration of the zero test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ZeroTest {
    pub points: usize,
    pub seed: u64,
}

impl Default for ZeroTest {
    fn default() -> Self {
        ZeroTest { points: 8, seed: 0x6a65_7472_6564 }
    }
}

const REL_TOL: f64 = 1e-9;

impl ZeroTest {
    pub fn new(points: usize, seed: u64) -> Self {
        ZeroTest { points: points.max(1), seed }
    }

    pub fn check(&self, e: &Expr) -> ZeroVerdict {
        if e.is_zero() {
            return ZeroVerdict { is_zero: true, confidence: Confidence::Exact };
        }
        if !e.has_atoms() {
            return ZeroVerdict { is_zero: false, confidence: Confidence::Exact };
        }
        let symbols: Vec<Symbol> = e.base_symbols().into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut accepted = 0;
        let mut attempts = 0;
        while accepted < self.points && attempts < self.points * 4 {
            attempts += 1;
            let values: Vec<f64> = symbols.iter().map(|_| rng.gen_range(0.5..2.0)).collect();
            let lookup = |s: &Symbol| symbols.binary_search(s).ok().map(|i| values[i]);
            let Some((val, mag)) = eval_poly_mag(e.numer(), &lookup) else {
                continue;
            };
            accepted += 1;
            if val.abs() > REL_TOL * mag.max(1.0) {
                return ZeroVerdict { is_zero: false, confidence: Confidence::Probabilistic };
            }
        }
        ZeroVerdict { is_zero: accepted > 0, confidence: Confidence::Probabilistic }
    }
}

pub(super) fn eval(e: &Expr, values: &dyn Fn(&Symbol) -> Option<f64>) -> Option<f64> {
    let (n, _) = eval_poly_mag(e.numer(), values)?;
    let (d, _) = eval_poly_mag(e.denom(), values)?;
    if d == 0.0 {
        return None;
    }
    let v = n / d;
    v.is_finite().then_some(v)
}

fn eval_symbol(s: &Symbol, values: &dyn Fn(&Symbol) -> Option<f64>) -> Option<f64> {
    match s {
        Symbol::Atom(a) => match a.as_ref() {
            Atom::Exp(arg) => Some(eval(arg, values)?.exp()),
            Atom::Log(arg) => {
                let v = eval(arg, values)?;
                (v > 0.0).then(|| v.ln())
            }
            Atom::Root { base, q } => {
                let v = eval(base, values)?;
                let k = 1.0 / f64::from(*q);
                if v >= 0.0 {
                    Some(v.powf(k))
                } else if q % 2 == 1 {
                    Some(-(-v).powf(k))
                } else {
                    None
                }
            }
        },
        _ => values(s),
    }
}

/// Value and sum of absolute term values.
fn eval_poly_mag(p: &Poly, values: &dyn Fn(&Symbol) -> Option<f64>) -> Option<(f64, f64)> {
    let mut sum = 0.0;
    let mut mag = 0.0;
    for (m, c) in p.terms() {
        let mut t = c.to_f64()?;
        for (s, e) in m.iter() {
            t *= eval_symbol(s, values)?.powi(*e as i32);
        }
        if !t.is_finite() {
            return None;
        }
        sum += t;
        mag += t.abs();
    }
    Some((sum, mag))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_expressions_are_exact() {
        let x = Expr::indep(1);
        let v = ZeroTest::default().check(&(&x - &x));
        assert_eq!(v, ZeroVerdict { is_zero: true, confidence: Confidence::Exact });
        let v = ZeroTest::default().check(&x);
        assert_eq!(v, ZeroVerdict { is_zero: false, confidence: Confidence::Exact });
    }

    #[test]
    fn atoms_fall_back_to_sampling() {
        let x = Expr::indep(1);
        let e = &Expr::exp(&x + &x) - &(&Expr::exp(x.clone()) * &Expr::exp(x.clone()));
        assert!(ZeroTest::default().check(&e).is_zero);
        let log_prod = &Expr::log(&x * &x).unwrap() - &(&Expr::int(2) * &Expr::log(x.clone()).unwrap());
        let v = ZeroTest::default().check(&log_prod);
        assert!(v.is_zero);
        assert_eq!(v.confidence, Confidence::Probabilistic);
        let v = ZeroTest::default().check(&Expr::exp(x));
        assert!(!v.is_zero);
    }
}
