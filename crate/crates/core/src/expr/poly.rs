//! Sparse multivariate polynomials with exact rational coefficients.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use smallvec::SmallVec;

use super::symbol::Symbol;

pub type Q = BigRational;

pub fn q_int(n: i64) -> Q {
    BigRational::from_integer(BigInt::from(n))
}

/// Power product of symbols, kept sorted by symbol with positive exponents.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(SmallVec<[(Symbol, u32); 4]>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(SmallVec::new())
    }

    pub fn var(s: Symbol, exp: u32) -> Self {
        if exp == 0 {
            return Self::one();
        }
        let mut v = SmallVec::new();
        v.push((s, exp));
        Monomial(v)
    }

    pub fn from_pairs(mut pairs: Vec<(Symbol, u32)>) -> Self {
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: SmallVec<[(Symbol, u32); 4]> = SmallVec::new();
        for (s, e) in pairs {
            if e == 0 {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.0 == s => last.1 += e,
                _ => out.push((s, e)),
            }
        }
        Monomial(out)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Symbol, u32)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree_of(&self, s: &Symbol) -> u32 {
        self.0
            .binary_search_by(|(x, _)| x.cmp(s))
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = SmallVec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0.clone(), a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend(a[i..].iter().cloned());
        out.extend(b[j..].iter().cloned());
        Monomial(out)
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = SmallVec::with_capacity(self.0.len());
        let mut j = 0;
        for (s, e) in self.0.iter() {
            if j < other.0.len() {
                match other.0[j].0.cmp(s) {
                    Ordering::Less => return None,
                    Ordering::Equal => {
                        let f = other.0[j].1;
                        j += 1;
                        match e.cmp(&f) {
                            Ordering::Less => return None,
                            Ordering::Equal => continue,
                            Ordering::Greater => {
                                out.push((s.clone(), e - f));
                                continue;
                            }
                        }
                    }
                    Ordering::Greater => {}
                }
            }
            out.push((s.clone(), *e));
        }
        if j < other.0.len() {
            return None;
        }
        Some(Monomial(out))
    }

    pub fn gcd(&self, other: &Monomial) -> Monomial {
        let mut out = SmallVec::new();
        for (s, e) in self.0.iter() {
            let f = other.degree_of(s);
            if f > 0 {
                out.push((s.clone(), (*e).min(f)));
            }
        }
        Monomial(out)
    }

    /// Splits off the power of `s`.
    pub fn split(&self, s: &Symbol) -> (Monomial, u32) {
        let mut out = SmallVec::with_capacity(self.0.len());
        let mut deg = 0;
        for (x, e) in self.0.iter() {
            if x == s {
                deg = *e;
            } else {
                out.push((x.clone(), *e));
            }
        }
        (Monomial(out), deg)
    }

    /// Splits into the part made of symbols satisfying `pred` and the rest.
    pub fn partition(&self, pred: impl Fn(&Symbol) -> bool) -> (Monomial, Monomial) {
        let mut yes = SmallVec::new();
        let mut no = SmallVec::new();
        for (x, e) in self.0.iter() {
            if pred(x) {
                yes.push((x.clone(), *e));
            } else {
                no.push((x.clone(), *e));
            }
        }
        (Monomial(yes), Monomial(no))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic order with the smallest symbol most significant.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((sa, ea)), Some((sb, eb))) => match sa.cmp(sb) {
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => match ea.cmp(eb) {
                        Ordering::Equal => {
                            i += 1;
                            j += 1;
                        }
                        o => return o,
                    },
                },
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Q>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Self::constant(Q::one())
    }

    pub fn constant(c: Q) -> Self {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(Monomial::one(), c);
        }
        p
    }

    pub fn symbol(s: Symbol) -> Self {
        Self::term(Q::one(), Monomial::var(s, 1))
    }

    pub fn term(c: Q, m: Monomial) -> Self {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms.contains_key(&Monomial::one()))
    }

    pub fn as_constant(&self) -> Option<Q> {
        if self.terms.is_empty() {
            return Some(Q::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Monomial::one()) {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Q)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> impl Iterator<Item = (Monomial, Q)> {
        self.terms.into_iter()
    }

    pub fn leading(&self) -> Option<(&Monomial, &Q)> {
        self.terms.iter().next_back()
    }

    pub fn add_term(&mut self, m: Monomial, c: Q) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in other.terms.iter() {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in other.terms.iter() {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }

    pub fn scale(&self, k: &Q) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    pub fn mul_term(&self, m: &Monomial, k: &Q) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(n, c)| (n.mul(m), c * k)).collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        if let Some(c) = self.as_constant() {
            return other.scale(&c);
        }
        if let Some(c) = other.as_constant() {
            return self.scale(&c);
        }
        let mut out = Poly::zero();
        for (ma, ca) in self.terms.iter() {
            for (mb, cb) in other.terms.iter() {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, mut e: u32) -> Poly {
        let mut base = self.clone();
        let mut acc = Poly::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Exact quotient, or `None` if `divisor` does not divide `self`.
    pub fn div_exact(&self, divisor: &Poly) -> Option<Poly> {
        if divisor.is_zero() {
            return None;
        }
        if let Some(c) = divisor.as_constant() {
            return Some(self.scale(&(Q::one() / c)));
        }
        let (lm, lc) = divisor.leading().map(|(m, c)| (m.clone(), c.clone()))?;
        let mut rem = self.clone();
        let mut quot = Poly::zero();
        while let Some((rm, rc)) = rem.leading().map(|(m, c)| (m.clone(), c.clone())) {
            let qm = rm.div(&lm)?;
            let qc = rc / &lc;
            rem = rem.sub(&divisor.mul_term(&qm, &qc));
            quot.add_term(qm, qc);
        }
        Some(quot)
    }

    /// Scales so that the leading coefficient is 1.
    pub fn monic(&self) -> Poly {
        match self.leading() {
            None => Poly::zero(),
            Some((_, c)) if c.is_one() => self.clone(),
            Some((_, c)) => self.scale(&(Q::one() / c)),
        }
    }

    pub fn leading_coeff(&self) -> Q {
        self.leading().map(|(_, c)| c.clone()).unwrap_or_else(Q::zero)
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        for m in self.terms.keys() {
            for (s, _) in m.iter() {
                out.insert(s.clone());
            }
        }
        out
    }

    pub fn any_symbol(&self, pred: impl Fn(&Symbol) -> bool) -> bool {
        self.terms.keys().any(|m| m.iter().any(|(s, _)| pred(s)))
    }

    pub fn contains(&self, s: &Symbol) -> bool {
        self.terms.keys().any(|m| m.degree_of(s) > 0)
    }

    pub fn degree_in(&self, s: &Symbol) -> u32 {
        self.terms.keys().map(|m| m.degree_of(s)).max().unwrap_or(0)
    }

    /// Coefficients as a polynomial in `s`, indexed by degree.
    pub fn to_univariate(&self, s: &Symbol) -> Vec<Poly> {
        let deg = self.degree_in(s) as usize;
        let mut out = vec![Poly::zero(); deg + 1];
        for (m, c) in self.terms.iter() {
            let (rest, d) = m.split(s);
            out[d as usize].add_term(rest, c.clone());
        }
        out
    }

    pub fn from_univariate(coeffs: &[Poly], s: &Symbol) -> Poly {
        let mut out = Poly::zero();
        for (d, c) in coeffs.iter().enumerate() {
            let m = Monomial::var(s.clone(), d as u32);
            for (n, k) in c.terms.iter() {
                out.add_term(n.mul(&m), k.clone());
            }
        }
        out
    }

    /// The largest monomial dividing every term.
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else {
            return Monomial::one();
        };
        let mut g = first.clone();
        for m in it {
            if g.is_one() {
                break;
            }
            g = g.gcd(m);
        }
        g
    }

    pub fn div_monomial(&self, m: &Monomial) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(n, c)| (n.div(m).expect("monomial divides every term"), c.clone()))
                .collect(),
        }
    }

    /// Monic greatest common divisor.
    pub fn gcd(&self, other: &Poly) -> Poly {
        if self.is_zero() {
            return other.monic();
        }
        if other.is_zero() {
            return self.monic();
        }
        if self.is_constant() || other.is_constant() {
            return Poly::one();
        }
        let ma = self.monomial_content();
        let mb = other.monomial_content();
        let gm = ma.gcd(&mb);
        if self.is_monomial() || other.is_monomial() {
            return Poly::term(Q::one(), gm);
        }
        let a = self.div_monomial(&ma);
        let b = other.div_monomial(&mb);
        let g = gcd_no_monomial(&a, &b);
        g.mul_term(&gm, &Q::one()).monic()
    }

    /// Largest absolute numerator/denominator bit size, a rough size measure.
    pub fn weight(&self) -> usize {
        self.terms
            .iter()
            .map(|(m, c)| 1 + m.total_degree() as usize + c.numer().bits() as usize / 32)
            .sum()
    }

    pub fn map_coefficients(&self, f: impl Fn(&Q) -> Q) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in self.terms.iter() {
            out.add_term(m.clone(), f(c));
        }
        out
    }

    /// Value at a point assigning every symbol of `self`.
    pub fn eval_at(&self, point: &BTreeMap<Symbol, Q>) -> Q {
        let mut acc = Q::zero();
        for (m, c) in self.terms.iter() {
            let mut t = c.clone();
            for (s, e) in m.iter() {
                t *= point[s].pow(*e as i32);
            }
            acc += t;
        }
        acc
    }

    pub fn is_negative_leading(&self) -> bool {
        self.leading().is_some_and(|(_, c)| c.is_negative())
    }
}

fn gcd_no_monomial(a: &Poly, b: &Poly) -> Poly {
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    let sa = a.symbols();
    let sb = b.symbols();
    if sa.iter().any(|s| !sb.contains(s)) {
        return gcd_with_coefficients(b, a, &sb);
    }
    if sb.iter().any(|s| !sa.contains(s)) {
        return gcd_with_coefficients(a, b, &sa);
    }
    // pick the shared variable of lowest combined degree
    let v = sa
        .iter()
        .min_by_key(|s| a.degree_in(s) + b.degree_in(s))
        .expect("nonconstant polynomial has a symbol")
        .clone();
    let ua = a.to_univariate(&v);
    let ub = b.to_univariate(&v);
    let ca = univariate_content(&ua);
    let cb = univariate_content(&ub);
    let c = ca.gcd(&cb);
    if coprime_image(&ua, &ub) {
        return c.monic();
    }
    let mut pa = primitive(&ua, &ca);
    let mut pb = primitive(&ub, &cb);
    if pa.len() < pb.len() {
        std::mem::swap(&mut pa, &mut pb);
    }
    loop {
        if pb.len() == 1 {
            // nonzero constant in v: primitive gcd is trivial
            pb = vec![Poly::one()];
            break;
        }
        let r = pseudo_remainder(&pa, &pb);
        if r.is_empty() {
            break;
        }
        let cr = univariate_content(&r);
        pa = pb;
        pb = primitive(&r, &cr);
    }
    let g = Poly::from_univariate(&pb, &v);
    c.mul(&g).monic()
}

/// gcd of `small` with every coefficient of `big` taken with respect to the
/// symbols outside `keep`.
fn gcd_with_coefficients(small: &Poly, big: &Poly, keep: &BTreeSet<Symbol>) -> Poly {
    let mut parts: BTreeMap<Monomial, Poly> = BTreeMap::new();
    for (m, c) in big.terms() {
        let (inner, outer) = m.partition(|s| keep.contains(s));
        parts.entry(outer).or_default().add_term(inner, c.clone());
    }
    let mut coeffs: Vec<Poly> = parts.into_values().filter(|p| !p.is_zero()).collect();
    coeffs.sort_by_key(Poly::weight);
    let mut g = small.clone();
    for c in &coeffs {
        g = g.gcd(c);
        if g.is_constant() {
            return Poly::one();
        }
    }
    g.monic()
}

/// True when the images of `a`, `b` under a fixed integer evaluation of the
/// coefficient symbols keep their degrees and are coprime; the gcd then has
/// degree zero in the main variable.
fn coprime_image(a: &[Poly], b: &[Poly]) -> bool {
    let mut syms = BTreeSet::new();
    for c in a.iter().chain(b) {
        syms.extend(c.symbols());
    }
    if syms.iter().any(|s| matches!(s, Symbol::Atom(_))) {
        return false;
    }
    let point: BTreeMap<Symbol, Q> = syms.into_iter().enumerate().map(|(i, s)| (s, q_int(EVAL_POINTS[i % EVAL_POINTS.len()]))).collect();
    let ia: Vec<Q> = a.iter().map(|c| c.eval_at(&point)).collect();
    let ib: Vec<Q> = b.iter().map(|c| c.eval_at(&point)).collect();
    if ia.last().is_none_or(Q::is_zero) || ib.last().is_none_or(Q::is_zero) {
        return false;
    }
    univariate_gcd_degree(ia, ib) == 0
}

const EVAL_POINTS: [i64; 8] = [7, -3, 11, 5, -13, 17, 2, -19];

fn univariate_gcd_degree(mut a: Vec<Q>, mut b: Vec<Q>) -> usize {
    if a.len() < b.len() {
        std::mem::swap(&mut a, &mut b);
    }
    loop {
        while b.last().is_some_and(Q::is_zero) {
            b.pop();
        }
        if b.is_empty() {
            return a.len().saturating_sub(1);
        }
        if b.len() == 1 {
            return 0;
        }
        let lb = b.last().unwrap().clone();
        while a.len() >= b.len() {
            let k = a.last().unwrap() / &lb;
            let shift = a.len() - b.len();
            for (i, c) in b.iter().enumerate() {
                a[i + shift] = &a[i + shift] - &(&k * c);
            }
            a.pop();
            while a.last().is_some_and(Q::is_zero) {
                a.pop();
            }
        }
        std::mem::swap(&mut a, &mut b);
    }
}

fn univariate_content(coeffs: &[Poly]) -> Poly {
    let mut g = Poly::zero();
    for c in coeffs.iter().filter(|c| !c.is_zero()) {
        g = g.gcd(c);
        if g.is_one() {
            break;
        }
    }
    g
}

fn primitive(coeffs: &[Poly], content: &Poly) -> Vec<Poly> {
    let mut out: Vec<Poly> = coeffs
        .iter()
        .map(|c| c.div_exact(content).expect("content divides coefficients"))
        .collect();
    trim(&mut out);
    // normalize the rational scale by the top coefficient
    if let Some(top) = out.last() {
        let lc = top.leading_coeff();
        if !lc.is_one() && !lc.is_zero() {
            let k = Q::one() / lc;
            for c in out.iter_mut() {
                *c = c.scale(&k);
            }
        }
    }
    out
}

fn trim(p: &mut Vec<Poly>) {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

/// Pseudo-remainder of univariate polynomials with polynomial coefficients.
fn pseudo_remainder(a: &[Poly], b: &[Poly]) -> Vec<Poly> {
    let mut r: Vec<Poly> = a.to_vec();
    trim(&mut r);
    let db = b.len() - 1;
    let lb = &b[db];
    while !r.is_empty() && r.len() > db {
        let dr = r.len() - 1;
        let lr = r[dr].clone();
        let shift = dr - db;
        let mut next: Vec<Poly> = r.iter().map(|c| c.mul(lb)).collect();
        for (i, bc) in b.iter().enumerate() {
            next[i + shift] = next[i + shift].sub(&bc.mul(&lr));
        }
        debug_assert!(next[dr].is_zero());
        next.truncate(dr);
        trim(&mut next);
        r = next;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Poly {
        Poly::symbol(Symbol::Indep(0))
    }
    fn y() -> Poly {
        Poly::symbol(Symbol::Indep(1))
    }
    fn z() -> Poly {
        Poly::symbol(Symbol::Indep(2))
    }
    fn k(n: i64) -> Poly {
        Poly::constant(q_int(n))
    }

    #[test]
    fn monomial_order_is_multiplicative() {
        let a = Monomial::from_pairs(vec![(Symbol::Indep(0), 1)]);
        let b = Monomial::from_pairs(vec![(Symbol::Indep(1), 3)]);
        let c = Monomial::from_pairs(vec![(Symbol::Indep(0), 1), (Symbol::Indep(2), 1)]);
        assert!(a > b);
        assert!(a.mul(&c) > b.mul(&c));
        assert!(Monomial::one() < b);
    }

    #[test]
    fn exact_division() {
        let p = x().add(&y()).mul(&x().sub(&k(2)));
        assert_eq!(p.div_exact(&x().add(&y())).unwrap(), x().sub(&k(2)));
        assert!(p.div_exact(&x().add(&k(1))).is_none());
    }

    #[test]
    fn gcd_of_products() {
        let f = x().mul(&y()).add(&k(1));
        let g1 = x().sub(&z());
        let g2 = y().mul(&y()).add(&x());
        let a = f.mul(&g1).mul(&k(3));
        let b = f.mul(&g2).mul(&x());
        assert_eq!(a.gcd(&b), f.monic());
        assert_eq!(g1.gcd(&g2), Poly::one());
        let sq = f.pow(2).mul(&g1);
        assert_eq!(sq.gcd(&f.pow(3)), f.pow(2).monic());
    }

    #[test]
    fn gcd_with_monomial_content() {
        let a = x().pow(2).mul(&y().add(&k(1)));
        let b = x().mul(&y().add(&k(1))).mul(&z());
        assert_eq!(a.gcd(&b), x().mul(&y().add(&k(1))).monic());
    }

    #[test]
    fn gcd_against_extra_variables() {
        let f = x().mul(&y()).add(&k(1));
        let a = f.mul(&z().pow(3).add(&x()));
        let b = f.mul(&x().add(&k(2)));
        assert_eq!(a.gcd(&b), f.monic());
        let c = z().mul(&x()).add(&y());
        assert!(c.gcd(&b).is_one());
    }

    #[test]
    fn coprime_images_and_shared_factors() {
        let f = x().add(&y().pow(2)).add(&k(3));
        let a = f.pow(2).mul(&x().sub(&y()));
        let b = f.mul(&x().add(&y()));
        assert_eq!(a.gcd(&b), f.monic());
        let p = x().pow(2).add(&y().pow(2)).add(&k(1));
        let q = x().pow(2).sub(&y()).add(&k(5));
        assert!(p.gcd(&q).is_one());
        assert_eq!(p.eval_at(&[(Symbol::Indep(0), q_int(2)), (Symbol::Indep(1), q_int(3))].into_iter().collect()), q_int(14));
    }
}
