//! Symbols that may appear inside an expression.

use std::fmt;
use std::sync::Arc;

use smallvec::SmallVec;

use super::Expr;

/// A tuple of derivative counts, one slot per variable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(SmallVec<[u8; 8]>);

impl MultiIndex {
    pub fn zero(len: usize) -> Self {
        MultiIndex(SmallVec::from_elem(0, len))
    }

    /// The multi-index with a single 1 in `slot`.
    pub fn delta(len: usize, slot: usize) -> Self {
        let mut m = Self::zero(len);
        m.0[slot] = 1;
        m
    }

    pub fn from_slice(entries: &[u8]) -> Self {
        MultiIndex(SmallVec::from_slice(entries))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, slot: usize) -> u8 {
        self.0[slot]
    }

    /// |α|
    pub fn order(&self) -> u32 {
        self.0.iter().map(|&e| u32::from(e)).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// α + δ_slot
    pub fn bump(&self, slot: usize) -> Self {
        let mut m = self.clone();
        m.0[slot] += 1;
        m
    }

    /// α − δ_slot, if that stays nonnegative.
    pub fn lower(&self, slot: usize) -> Option<Self> {
        if self.0[slot] == 0 {
            return None;
        }
        let mut m = self.clone();
        m.0[slot] -= 1;
        Some(m)
    }

    pub fn plus(&self, other: &MultiIndex) -> Self {
        debug_assert_eq!(self.len(), other.len());
        MultiIndex(self.0.iter().zip(other.0.iter()).map(|(a, b)| a + b).collect())
    }

    /// `other − self` when `self ≤ other` componentwise.
    pub fn complement_in(&self, other: &MultiIndex) -> Option<Self> {
        let mut out = SmallVec::new();
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            if a > b {
                return None;
            }
            out.push(b - a);
        }
        Some(MultiIndex(out))
    }

    /// Slots listed once per derivative, e.g. (1,2) → [0,1,1].
    pub fn slots(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.order() as usize);
        for (i, &e) in self.0.iter().enumerate() {
            for _ in 0..e {
                out.push(i);
            }
        }
        out
    }

    pub fn from_slots(len: usize, slots: &[usize]) -> Self {
        let mut m = Self::zero(len);
        for &s in slots {
            m.0[s] += 1;
        }
        m
    }

    /// All multi-indices of length `len` with order ≤ `max_order`, sorted by
    /// order and then lexicographically.
    pub fn all_up_to(len: usize, max_order: u32) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::zero(len)];
        let mut frontier = vec![MultiIndex::zero(len)];
        for _ in 0..max_order {
            let mut next: Vec<MultiIndex> = Vec::new();
            for m in &frontier {
                // only bump slots at or after the last nonzero slot to avoid duplicates
                let start = m.0.iter().rposition(|&e| e > 0).unwrap_or(0);
                for slot in start..len {
                    next.push(m.bump(slot));
                }
            }
            next.sort();
            next.dedup();
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

/// A derivative coordinate u^a_α of the jet space.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JetVar {
    pub dep: u16,
    pub alpha: MultiIndex,
}

impl JetVar {
    pub fn new(dep: usize, alpha: MultiIndex) -> Self {
        JetVar { dep: dep as u16, alpha }
    }

    pub fn order(&self) -> u32 {
        self.alpha.order()
    }

    /// Ranking key: order first, then the multi-index compared with the first
    /// independent variable most significant, then the dependent index.
    pub fn rank_key(&self) -> (u32, &[u8], u16) {
        (self.order(), self.alpha.entries(), self.dep)
    }

    pub fn rank_cmp(&self, other: &JetVar) -> std::cmp::Ordering {
        self.rank_key().cmp(&other.rank_key())
    }
}

/// Transcendental atoms of the coefficient class.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Exp(Expr),
    Log(Expr),
    /// `base^(1/q)` with `q ≥ 2` and a polynomial base.
    Root { base: Expr, q: u32 },
}

impl Atom {
    pub fn args(&self) -> &Expr {
        match self {
            Atom::Exp(a) | Atom::Log(a) => a,
            Atom::Root { base, .. } => base,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    /// Independent variable x_i.
    Indep(u16),
    /// Jet coordinate u^a_α; α = 0 is the dependent variable itself.
    Jet(JetVar),
    /// Derivative ∂^β f of an arbitrary function f(x, u); β has n + m slots.
    Fun { id: u16, deriv: MultiIndex },
    /// Free constant parameter.
    Param(u16),
    /// Invariant independent variable ω_j of an ansatz.
    Inv(u16),
    /// Derivative φ_β of a new unknown function φ(ω).
    Unknown { id: u16, deriv: MultiIndex },
    Atom(Arc<Atom>),
}

impl Symbol {
    pub fn jet(dep: usize, alpha: MultiIndex) -> Self {
        Symbol::Jet(JetVar::new(dep, alpha))
    }

    pub fn as_jet(&self) -> Option<&JetVar> {
        match self {
            Symbol::Jet(j) => Some(j),
            _ => None,
        }
    }

    /// Jet variable of positive order.
    pub fn is_derivative(&self) -> bool {
        matches!(self, Symbol::Jet(j) if j.order() > 0)
    }

    pub fn as_atom(&self) -> Option<&Atom> {
        match self {
            Symbol::Atom(a) => Some(a),
            _ => None,
        }
    }
}
