//! Resolution of a parsed document against its declarations.

use std::collections::BTreeMap;

use jetred_core::jet::{VectorField, VectorFieldFamily};
use jetred_core::manifold::DifferentialSystem;
use jetred_core::reduction::Ansatz;
use jetred_core::{Expr, MultiIndex, Symbol, VariableContext};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use crate::syntax::{Ast, AstKind, BinOp, ComponentKind, Diagnostic, Document, Item, Name, Span};

type LResult<T> = Result<T, Diagnostic>;

#[derive(Clone, Debug)]
pub struct Equation {
    pub name: String,
    pub expr: Expr,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub struct Operator {
    pub name: String,
    pub field: VectorField,
    pub span: Span,
}

#[derive(Clone, Debug, Default)]
pub struct AnsatzSpec {
    pub invariants: Vec<Expr>,
    /// One form per dependent variable; `None` where not given.
    pub forms: Vec<Option<Expr>>,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub ctx: VariableContext,
    pub equations: Vec<Equation>,
    pub operators: Vec<Operator>,
    pub families: Vec<(String, Vec<String>)>,
    pub ansatz: AnsatzSpec,
    pub options: BTreeMap<String, String>,
}

fn number(text: &str, span: Span) -> LResult<BigRational> {
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    let digits = format!("{int}{frac}");
    let n: BigInt = digits.parse().map_err(|_| Diagnostic::at(span, format!("malformed number `{text}`")))?;
    let d = num_traits::pow(BigInt::from(10), frac.len());
    Ok(BigRational::new(n, d))
}

fn map_err<T, E: std::fmt::Display>(r: Result<T, E>, span: Span) -> LResult<T> {
    r.map_err(|e| Diagnostic::at(span, e.to_string()))
}

/// Converts an expression tree to a canonical expression over `ctx`.
pub fn lower_expr(ctx: &VariableContext, ast: &Ast) -> LResult<Expr> {
    let span = ast.span;
    match &ast.kind {
        AstKind::Num(s) => Ok(Expr::rational(number(s, span)?)),
        AstKind::Var(name) => {
            ctx.resolve(name).map(Expr::symbol).ok_or_else(|| Diagnostic::at(span, format!("undeclared name `{name}`")))
        }
        AstKind::Jet { name, vars } => jet(ctx, name, vars, span),
        AstKind::Neg(e) => Ok(-lower_expr(ctx, e)?),
        AstKind::Bin(op, a, b) => {
            let x = lower_expr(ctx, a)?;
            let y = lower_expr(ctx, b)?;
            match op {
                BinOp::Add => Ok(&x + &y),
                BinOp::Sub => Ok(&x - &y),
                BinOp::Mul => Ok(&x * &y),
                BinOp::Div => map_err(x.checked_div(&y), b.span),
                BinOp::Pow => {
                    let Some(q) = y.as_constant() else {
                        return Err(Diagnostic::at(b.span, "exponent must be a rational constant"));
                    };
                    map_err(x.pow_rational(&q), span)
                }
            }
        }
        AstKind::Call(f, args) => {
            if args.len() != 1 {
                return Err(Diagnostic::at(span, format!("`{f}` takes one argument")));
            }
            let a = lower_expr(ctx, &args[0])?;
            match f.as_str() {
                "exp" => Ok(Expr::exp(a)),
                "log" => map_err(Expr::log(a), span),
                "sqrt" => map_err(a.pow_rational(&BigRational::new(BigInt::one(), BigInt::from(2))), span),
                _ => Err(Diagnostic::at(span, format!("unknown function `{f}`"))),
            }
        }
    }
}

fn jet(ctx: &VariableContext, name: &str, vars: &[Name], span: Span) -> LResult<Expr> {
    let slot = |v: &Name, find: &dyn Fn(&str) -> Option<usize>| {
        find(&v.text).ok_or_else(|| Diagnostic::at(v.span, format!("`{}` is not a variable of `{name}`", v.text)))
    };
    if let Some(a) = ctx.dep_index(name) {
        let slots = vars.iter().map(|v| slot(v, &|s| ctx.indep_index(s))).collect::<LResult<Vec<_>>>()?;
        return Ok(Expr::symbol(Symbol::jet(a, MultiIndex::from_slots(ctx.n(), &slots))));
    }
    if let Some(k) = ctx.unknown_index(name) {
        let slots = vars.iter().map(|v| slot(v, &|s| ctx.invariant_index(s))).collect::<LResult<Vec<_>>>()?;
        let deriv = MultiIndex::from_slots(ctx.invariants().len(), &slots);
        return Ok(Expr::symbol(Symbol::Unknown { id: k as u16, deriv }));
    }
    if let Some(f) = ctx.function_index(name) {
        let n = ctx.n();
        let find = |s: &str| ctx.indep_index(s).or_else(|| ctx.dep_index(s).map(|a| n + a));
        let slots = vars.iter().map(|v| slot(v, &find)).collect::<LResult<Vec<_>>>()?;
        let deriv = MultiIndex::from_slots(n + ctx.m(), &slots);
        return Ok(Expr::symbol(Symbol::Fun { id: f as u16, deriv }));
    }
    Err(Diagnostic::at(span, format!("`{name}` is not a dependent variable, unknown or function")))
}

fn declare(
    ctx: &mut VariableContext,
    names: &[Name],
    add: fn(&mut VariableContext, &str) -> jetred_core::Result<u16>,
) -> LResult<()> {
    for n in names {
        map_err(add(ctx, &n.text), n.span)?;
    }
    Ok(())
}

impl Model {
    pub fn lower(doc: &Document) -> LResult<Model> {
        let mut indep = Vec::new();
        let mut dep = Vec::new();
        for item in &doc.items {
            match item {
                Item::Independent(v) => indep.extend(v.iter().cloned()),
                Item::Dependent(v) => dep.extend(v.iter().cloned()),
                _ => {}
            }
        }
        let start = Span { line: 1, col: 1 };
        if indep.is_empty() {
            return Err(Diagnostic::at(start, "no independent variables declared"));
        }
        if dep.is_empty() {
            return Err(Diagnostic::at(start, "no dependent variables declared"));
        }
        let text = |v: &[Name]| v.iter().map(|n| n.text.clone()).collect::<Vec<_>>();
        let ctx = map_err(VariableContext::new(&text(&indep), &text(&dep)), indep[0].span)?;
        let mut model = Model {
            ctx,
            equations: Vec::new(),
            operators: Vec::new(),
            families: Vec::new(),
            ansatz: AnsatzSpec::default(),
            options: BTreeMap::new(),
        };
        model.ansatz.forms = vec![None; model.ctx.m()];
        model.absorb(doc)?;
        Ok(model)
    }

    /// Adds the items of a further document, such as a separate ansatz file.
    pub fn absorb(&mut self, doc: &Document) -> LResult<()> {
        let mut seen: BTreeMap<String, Span> = BTreeMap::new();
        for e in &self.equations {
            seen.insert(e.name.clone(), e.span);
        }
        for o in &self.operators {
            seen.insert(o.name.clone(), o.span);
        }
        let mut unique = |n: &Name| -> LResult<()> {
            if seen.insert(n.text.clone(), n.span).is_some() {
                return Err(Diagnostic::at(n.span, format!("`{}` is defined twice", n.text)));
            }
            Ok(())
        };
        for item in &doc.items {
            match item {
                Item::Independent(_) | Item::Dependent(_) => {}
                Item::Param(v) => declare(&mut self.ctx, v, VariableContext::add_param)?,
                Item::Function(v) => declare(&mut self.ctx, v, VariableContext::add_function)?,
                Item::Unknown(v) => declare(&mut self.ctx, v, VariableContext::add_unknown)?,
                Item::Invariant { name, value } => {
                    if !self.ctx.unknowns().is_empty() {
                        return Err(Diagnostic::at(name.span, "invariants must be declared before unknowns"));
                    }
                    let w = lower_expr(&self.ctx, value)?;
                    if w.mentions(&|s| !matches!(s, Symbol::Indep(_) | Symbol::Param(_))) {
                        return Err(Diagnostic::at(value.span, "an invariant may mention independent variables only"));
                    }
                    map_err(self.ctx.add_invariant(&name.text), name.span)?;
                    self.ansatz.invariants.push(w);
                }
                Item::Ansatz { target, value } => {
                    let Some(a) = self.ctx.dep_index(&target.text) else {
                        return Err(Diagnostic::at(target.span, format!("`{}` is not a dependent variable", target.text)));
                    };
                    if self.ansatz.forms[a].is_some() {
                        return Err(Diagnostic::at(target.span, format!("second ansatz for `{}`", target.text)));
                    }
                    self.ansatz.forms[a] = Some(lower_expr(&self.ctx, value)?);
                }
                Item::Equation { name, lhs, rhs } => {
                    unique(name)?;
                    let e = &lower_expr(&self.ctx, lhs)? - &lower_expr(&self.ctx, rhs)?;
                    self.equations.push(Equation { name: name.text.clone(), expr: e, span: name.span });
                }
                Item::Operator { name, components } => {
                    unique(name)?;
                    let mut xi = vec![None; self.ctx.n()];
                    let mut eta = vec![None; self.ctx.m()];
                    for c in components {
                        let (slot, idx) = match c.kind {
                            ComponentKind::Xi => (&mut xi, self.ctx.indep_index(&c.var.text)),
                            ComponentKind::Eta => (&mut eta, self.ctx.dep_index(&c.var.text)),
                        };
                        let Some(i) = idx else {
                            return Err(Diagnostic::at(c.var.span, format!("`{}` does not name a component", c.var.text)));
                        };
                        if slot[i].is_some() {
                            return Err(Diagnostic::at(c.var.span, format!("component `{}` given twice", c.var.text)));
                        }
                        slot[i] = Some(lower_expr(&self.ctx, &c.value)?);
                    }
                    let fill = |v: Vec<Option<Expr>>| v.into_iter().map(|e| e.unwrap_or_else(Expr::zero)).collect();
                    let field = map_err(VectorField::new(&self.ctx, fill(xi), fill(eta)), name.span)?;
                    self.operators.push(Operator { name: name.text.clone(), field, span: name.span });
                }
                Item::Family { name, members } => {
                    unique(name)?;
                    for m in members {
                        if !self.operators.iter().any(|o| o.name == m.text) {
                            return Err(Diagnostic::at(m.span, format!("unknown operator `{}`", m.text)));
                        }
                    }
                    self.families.push((name.text.clone(), members.iter().map(|m| m.text.clone()).collect()));
                }
                Item::Option { key, value } => {
                    self.options.insert(key.text.clone(), value.text.clone());
                }
            }
        }
        Ok(())
    }

    pub fn operator(&self, name: &str) -> Option<&VectorField> {
        self.operators.iter().find(|o| o.name == name).map(|o| &o.field)
    }

    /// The named operator or family; a single operator is a family of one.
    pub fn family(&self, name: &str) -> Option<VectorFieldFamily> {
        if let Some(q) = self.operator(name) {
            return Some(VectorFieldFamily::single(q.clone()));
        }
        let (_, members) = self.families.iter().find(|(n, _)| n == name)?;
        let fields = members.iter().filter_map(|m| self.operator(m).cloned()).collect();
        VectorFieldFamily::new(&self.ctx, fields).ok()
    }

    /// All operators of the document, in order.
    pub fn all_operators(&self) -> VectorFieldFamily {
        VectorFieldFamily { members: self.operators.iter().map(|o| o.field.clone()).collect() }
    }

    pub fn equation(&self, name: &str) -> Option<&Expr> {
        self.equations.iter().find(|e| e.name == name).map(|e| &e.expr)
    }

    pub fn system(&self, only: &[String]) -> jetred_core::Result<DifferentialSystem> {
        let eqs: Vec<(String, Expr)> = self
            .equations
            .iter()
            .filter(|e| only.is_empty() || only.contains(&e.name))
            .map(|e| (e.name.clone(), e.expr.clone()))
            .collect();
        if eqs.is_empty() {
            return Err(jetred_core::Error::Invalid("no equations selected".into()));
        }
        DifferentialSystem::new(&self.ctx, eqs)
    }

    pub fn has_ansatz(&self) -> bool {
        !self.ansatz.invariants.is_empty() || self.ansatz.forms.iter().any(Option::is_some)
    }

    /// The declared ansatz; dependent variables without a form get the
    /// corresponding unknown.
    pub fn user_ansatz(&self) -> jetred_core::Result<Ansatz> {
        let mut forms = Vec::new();
        for (a, f) in self.ansatz.forms.iter().enumerate() {
            match f {
                Some(f) => forms.push(f.clone()),
                None => {
                    let name = self.ctx.unknowns().get(a).ok_or_else(|| {
                        jetred_core::Error::Invalid(format!("no ansatz for `{}`", self.ctx.dependent()[a]))
                    })?;
                    forms.push(self.ctx.var(name)?);
                }
            }
        }
        Ansatz::user(self.ctx.clone(), self.ansatz.invariants.clone(), forms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, parse_expr};

    fn model(src: &str) -> Model {
        Model::lower(&parse(src).unwrap()).unwrap()
    }

    #[test]
    fn example_equation_has_order_two() {
        let m = model("independent t,x; dependent u; eq L: u[t]+u[x,x]+t*u[x]=0;");
        assert_eq!(m.equations[0].expr.jet_order(), Some(2));
        assert_eq!(m.ctx.display_expr(&m.equations[0].expr), "u[x,x] + t*u[x] + u[t]");
    }

    #[test]
    fn operator_with_missing_components() {
        let m = model("independent t,x; dependent u; op Q: xi[t]=1;");
        assert_eq!(m.operator("Q").unwrap(), &VectorField::translation(&m.ctx, 0));
    }

    #[test]
    fn undeclared_names_are_located() {
        let d = parse("independent t,x; dependent u;\neq L: u[t] + v = 0;").unwrap();
        let e = Model::lower(&d).unwrap_err();
        assert_eq!((e.line, e.col), (2, 14));
        let d = parse("independent t,x; dependent u;\neq L: u[y] = 0;").unwrap();
        assert!(Model::lower(&d).unwrap_err().message.contains("`y`"));
    }

    #[test]
    fn exponents_must_be_rational() {
        let d = parse("independent t,x; dependent u; eq L: u^x = 0;").unwrap();
        assert!(Model::lower(&d).unwrap_err().message.contains("rational"));
        let m = model("independent t,x; dependent u; eq L: u[t] - t^(1/2)*u^0.5 = 0;");
        assert!(m.equations[0].expr.has_atoms());
    }

    #[test]
    fn displayed_expressions_reparse() {
        let m = model("independent t,x; dependent u; param c; eq L: u[t] - exp(-x^2/(4*t))*u[x]/(1+u^2) + c*sqrt(t) = 0;");
        let e = &m.equations[0].expr;
        let text = m.ctx.display_expr(e);
        assert_eq!(&lower_expr(&m.ctx, &parse_expr(&text).unwrap()).unwrap(), e);
    }

    #[test]
    fn user_ansatz_from_declarations() {
        let m = model("independent t,x; dependent u; invariant w = x - 2*t; unknown phi; ansatz u = phi;");
        let a = m.user_ansatz().unwrap();
        assert_eq!(a.invariants.len(), 1);
        let m = model("independent t,x; dependent u; invariant w = x; unknown phi;");
        assert!(m.user_ansatz().is_ok());
    }
}
