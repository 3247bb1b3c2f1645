//! Names of the variables an expression may mention.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::expr::{Expr, MultiIndex, Symbol, SymbolNames};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableContext {
    independent: Vec<String>,
    dependent: Vec<String>,
    functions: Vec<String>,
    params: Vec<String>,
    invariants: Vec<String>,
    unknowns: Vec<String>,
}

impl VariableContext {
    pub fn new<S: AsRef<str>>(independent: &[S], dependent: &[S]) -> Result<Self> {
        if independent.is_empty() || dependent.is_empty() {
            return Err(Error::Context("need at least one independent and one dependent variable".into()));
        }
        let mut ctx = VariableContext {
            independent: Vec::new(),
            dependent: Vec::new(),
            functions: Vec::new(),
            params: Vec::new(),
            invariants: Vec::new(),
            unknowns: Vec::new(),
        };
        for s in independent {
            ctx.check_fresh(s.as_ref())?;
            ctx.independent.push(s.as_ref().to_string());
        }
        for s in dependent {
            ctx.check_fresh(s.as_ref())?;
            ctx.dependent.push(s.as_ref().to_string());
        }
        Ok(ctx)
    }

    fn all_names(&self) -> impl Iterator<Item = &String> {
        self.independent
            .iter()
            .chain(&self.dependent)
            .chain(&self.functions)
            .chain(&self.params)
            .chain(&self.invariants)
            .chain(&self.unknowns)
    }

    fn check_fresh(&self, name: &str) -> Result<()> {
        if name.is_empty() {
            return Err(Error::Context("empty variable name".into()));
        }
        if self.all_names().any(|n| n == name) {
            return Err(Error::Context(format!("name `{name}` declared twice")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.independent.len()
    }

    pub fn m(&self) -> usize {
        self.dependent.len()
    }

    pub fn independent(&self) -> &[String] {
        &self.independent
    }

    pub fn dependent(&self) -> &[String] {
        &self.dependent
    }

    pub fn functions(&self) -> &[String] {
        &self.functions
    }

    pub fn invariants(&self) -> &[String] {
        &self.invariants
    }

    pub fn unknowns(&self) -> &[String] {
        &self.unknowns
    }

    /// Declares an arbitrary function of all of (x, u).
    pub fn add_function(&mut self, name: &str) -> Result<u16> {
        self.check_fresh(name)?;
        self.functions.push(name.to_string());
        Ok((self.functions.len() - 1) as u16)
    }

    pub fn add_param(&mut self, name: &str) -> Result<u16> {
        self.check_fresh(name)?;
        self.params.push(name.to_string());
        Ok((self.params.len() - 1) as u16)
    }

    pub fn add_invariant(&mut self, name: &str) -> Result<u16> {
        self.check_fresh(name)?;
        self.invariants.push(name.to_string());
        Ok((self.invariants.len() - 1) as u16)
    }

    pub fn add_unknown(&mut self, name: &str) -> Result<u16> {
        self.check_fresh(name)?;
        self.unknowns.push(name.to_string());
        Ok((self.unknowns.len() - 1) as u16)
    }

    pub fn indep_index(&self, name: &str) -> Option<usize> {
        self.independent.iter().position(|n| n == name)
    }

    pub fn dep_index(&self, name: &str) -> Option<usize> {
        self.dependent.iter().position(|n| n == name)
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|n| n == name)
    }

    pub fn invariant_index(&self, name: &str) -> Option<usize> {
        self.invariants.iter().position(|n| n == name)
    }

    pub fn unknown_index(&self, name: &str) -> Option<usize> {
        self.unknowns.iter().position(|n| n == name)
    }

    /// Resolves a plain name (no derivative brackets) to a symbol.
    pub fn resolve(&self, name: &str) -> Option<Symbol> {
        if let Some(i) = self.indep_index(name) {
            return Some(Symbol::Indep(i as u16));
        }
        if let Some(a) = self.dep_index(name) {
            return Some(Symbol::jet(a, MultiIndex::zero(self.n())));
        }
        if let Some(f) = self.function_index(name) {
            return Some(Symbol::Fun { id: f as u16, deriv: MultiIndex::zero(self.n() + self.m()) });
        }
        if let Some(p) = self.params.iter().position(|n| n == name) {
            return Some(Symbol::Param(p as u16));
        }
        if let Some(w) = self.invariant_index(name) {
            return Some(Symbol::Inv(w as u16));
        }
        if let Some(k) = self.unknown_index(name) {
            return Some(Symbol::Unknown { id: k as u16, deriv: MultiIndex::zero(self.invariants.len()) });
        }
        None
    }

    pub fn var(&self, name: &str) -> Result<Expr> {
        self.resolve(name).map(Expr::symbol).ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// The jet variable `dep[v1,…,vk]`.
    pub fn jet_symbol(&self, dep: &str, vars: &[&str]) -> Result<Symbol> {
        let a = self.dep_index(dep).ok_or_else(|| Error::UnknownVariable(dep.to_string()))?;
        let mut slots = Vec::with_capacity(vars.len());
        for v in vars {
            slots.push(self.indep_index(v).ok_or_else(|| Error::UnknownVariable(v.to_string()))?);
        }
        Ok(Symbol::jet(a, MultiIndex::from_slots(self.n(), &slots)))
    }

    pub fn jet(&self, dep: &str, vars: &[&str]) -> Result<Expr> {
        self.jet_symbol(dep, vars).map(Expr::symbol)
    }

    /// Checks that every base symbol of `e` refers to a declared variable.
    pub fn check_expr(&self, e: &Expr) -> Result<()> {
        for s in e.base_symbols() {
            let ok = match &s {
                Symbol::Indep(i) => usize::from(*i) < self.n(),
                Symbol::Jet(j) => usize::from(j.dep) < self.m() && j.alpha.len() == self.n(),
                Symbol::Fun { id, deriv } => {
                    usize::from(*id) < self.functions.len() && deriv.len() == self.n() + self.m()
                }
                Symbol::Param(p) => usize::from(*p) < self.params.len(),
                Symbol::Inv(w) => usize::from(*w) < self.invariants.len(),
                Symbol::Unknown { id, .. } => usize::from(*id) < self.unknowns.len(),
                Symbol::Atom(_) => true,
            };
            if !ok {
                return Err(Error::UnknownVariable(format!("{s:?}")));
            }
        }
        Ok(())
    }

    pub fn display_expr(&self, e: &Expr) -> String {
        e.display(self).to_string()
    }

    /// Names of all declared variables, used to detect clashes.
    pub fn names(&self) -> BTreeSet<String> {
        self.all_names().cloned().collect()
    }

    fn slot_names(&self, slots: &[usize], arg_names: &dyn Fn(usize) -> String) -> String {
        slots.iter().map(|&i| arg_names(i)).collect::<Vec<_>>().join(",")
    }
}

impl SymbolNames for VariableContext {
    fn symbol_name(&self, s: &Symbol) -> String {
        let indep = |i: usize| self.independent.get(i).cloned().unwrap_or_else(|| format!("x{i}"));
        match s {
            Symbol::Indep(i) => indep(usize::from(*i)),
            Symbol::Jet(j) => {
                let base = self.dependent.get(usize::from(j.dep)).cloned().unwrap_or_else(|| format!("u{}", j.dep));
                if j.alpha.is_zero() {
                    base
                } else {
                    format!("{base}[{}]", self.slot_names(&j.alpha.slots(), &indep))
                }
            }
            Symbol::Fun { id, deriv } => {
                let base = self.functions.get(usize::from(*id)).cloned().unwrap_or_else(|| format!("f{id}"));
                if deriv.is_zero() {
                    base
                } else {
                    let n = self.n();
                    let arg = |i: usize| {
                        if i < n {
                            indep(i)
                        } else {
                            self.dependent.get(i - n).cloned().unwrap_or_else(|| format!("u{}", i - n))
                        }
                    };
                    format!("{base}[{}]", self.slot_names(&deriv.slots(), &arg))
                }
            }
            Symbol::Param(p) => self.params.get(usize::from(*p)).cloned().unwrap_or_else(|| format!("c{p}")),
            Symbol::Inv(w) => self.invariants.get(usize::from(*w)).cloned().unwrap_or_else(|| format!("w{w}")),
            Symbol::Unknown { id, deriv } => {
                let base = self.unknowns.get(usize::from(*id)).cloned().unwrap_or_else(|| format!("phi{id}"));
                if deriv.is_zero() {
                    base
                } else {
                    let inv = |i: usize| self.invariants.get(i).cloned().unwrap_or_else(|| format!("w{i}"));
                    format!("{base}[{}]", self.slot_names(&deriv.slots(), &inv))
                }
            }
            Symbol::Atom(_) => "atom".into(),
        }
    }
}
