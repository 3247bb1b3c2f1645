//! Command-line surface: argument types, command execution and reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use jetred_core::expr::{Confidence, Monomial, Poly, ZeroTest};
use jetred_core::invariance::{
    conditional_criterion, determining_equations, family_equivalence, lie_criterion, system_criterion,
    template_field, weak_symmetry_order, CriterionReport, Equivalence, Holds, SystemVariant,
};
use jetred_core::jet::{apply_prolonged, prolong, InvolutionCertificate, TransversalityReport, VectorFieldFamily};
use jetred_core::manifold::{differential_consequences, joint_manifold, JointManifold, SolvedManifold};
use jetred_core::reduction::{build_ansatz, verify_reduction, Ansatz, ReductionStatus};
use jetred_core::{Error, Expr, Symbol, VariableContext};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::lower::Model;
use crate::syntax::{self, Diagnostic};

pub const SCHEMA_VERSION: &str = "1";
pub const SEED_ENV: &str = "JETRED_RANDOM_SEED";

#[derive(Parser, Debug)]
#[command(name = "jetred", version, about = "Symmetry and reduction-operator analysis for PDEs")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    /// Sample points for the randomized zero test.
    #[arg(long = "random-checks", default_value_t = 8, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub random_checks: u32,
    /// Seed for the randomized zero test; falls back to JETRED_RANDOM_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Raw,
    ProlongedOriginal,
    ProlongedAll,
}

impl From<Variant> for SystemVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Raw => SystemVariant::Raw,
            Variant::ProlongedOriginal => SystemVariant::ProlongedOriginal,
            Variant::ProlongedAll => SystemVariant::ProlongedAll,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct Target {
    /// Input document.
    pub file: PathBuf,
    /// Operator to test.
    #[arg(long, conflicts_with = "family")]
    pub operator: Option<String>,
    /// Operator family to test.
    #[arg(long)]
    pub family: Option<String>,
    /// Restrict to these equations.
    #[arg(long = "equation")]
    pub equations: Vec<String>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Classical Lie invariance of the system.
    CheckLie(Target),
    /// Conditional invariance of one equation.
    CheckConditional(Target),
    /// Conditional invariance of a system under one of three criteria.
    CheckSystem {
        #[command(flatten)]
        target: Target,
        #[arg(long, value_enum)]
        variant: Variant,
    },
    /// Prolongation coefficients of an operator.
    Prolong {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        order: u32,
    },
    /// Differential consequences of the system up to an order.
    Consequences {
        file: PathBuf,
        #[arg(long)]
        order: u32,
        #[arg(long = "equation")]
        equations: Vec<String>,
    },
    /// Determining equations for reduction operators.
    Determining {
        file: PathBuf,
        /// Fixed coefficient, e.g. `xi_t=1`.
        #[arg(long)]
        gauge: Vec<String>,
        #[arg(long = "equation")]
        equations: Vec<String>,
    },
    /// Smallest prolongation order at which an operator becomes a symmetry.
    WeakOrder {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        max: u32,
    },
    /// Whether two operator families are equivalent.
    Equivalent {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        family: Option<String>,
    },
    /// Substitutes an ansatz and checks that it reduces the system.
    Reduce {
        #[command(flatten)]
        target: Target,
        /// Document with `invariant`, `unknown` and `ansatz` declarations.
        #[arg(long)]
        ansatz: Option<PathBuf>,
        /// Reduce the differential consequences up to this order instead.
        #[arg(long)]
        order: Option<u32>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CheckLie(_) => "check-lie",
            Command::CheckConditional(_) => "check-conditional",
            Command::CheckSystem { .. } => "check-system",
            Command::Prolong { .. } => "prolong",
            Command::Consequences { .. } => "consequences",
            Command::Determining { .. } => "determining",
            Command::WeakOrder { .. } => "weak-order",
            Command::Equivalent { .. } => "equivalent",
            Command::Reduce { .. } => "reduce",
        }
    }
}

#[derive(Debug)]
pub enum AppError {
    Io(PathBuf, std::io::Error),
    Parse(PathBuf, Diagnostic),
    Usage(String),
    Core(Error),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            AppError::Parse(p, d) => write!(f, "{}:{d}", p.display()),
            AppError::Usage(m) => f.write_str(m),
            AppError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for AppError {
    fn from(e: Error) -> Self {
        AppError::Core(e)
    }
}

type AResult<T> = Result<T, AppError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
    Vacuous,
    Output,
    Found,
    NotFound,
    Equivalent,
    NotEquivalent,
    Reduced,
    NotReduced,
    Error,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Vacuous => "vacuous",
            Verdict::Output => "output",
            Verdict::Found => "found",
            Verdict::NotFound => "not-found",
            Verdict::Equivalent => "equivalent",
            Verdict::NotEquivalent => "not-equivalent",
            Verdict::Reduced => "reduced",
            Verdict::NotReduced => "not-reduced",
            Verdict::Error => "error",
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Verdict::Holds | Verdict::Output | Verdict::Found | Verdict::Equivalent | Verdict::Reduced => 0,
            Verdict::Error => 2,
            _ => 1,
        }
    }
}

/// The rendered result of one command.
pub struct Outcome {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

struct Run {
    verdict: Verdict,
    result: Value,
    text: String,
    assumptions: Vec<String>,
    confidence: Confidence,
}

struct Session {
    zero_test: ZeroTest,
    inputs: Vec<u8>,
}

impl Session {
    fn read(&mut self, path: &Path) -> AResult<String> {
        let bytes = std::fs::read(path).map_err(|e| AppError::Io(path.to_path_buf(), e))?;
        if !self.inputs.is_empty() {
            self.inputs.push(0);
        }
        self.inputs.extend_from_slice(&bytes);
        String::from_utf8(bytes).map_err(|_| AppError::Usage(format!("{}: input is not UTF-8", path.display())))
    }

    fn document(&mut self, path: &Path) -> AResult<syntax::Document> {
        let src = self.read(path)?;
        syntax::parse(&src).map_err(|d| AppError::Parse(path.to_path_buf(), d))
    }

    fn model(&mut self, path: &Path) -> AResult<Model> {
        let doc = self.document(path)?;
        Model::lower(&doc).map_err(|d| AppError::Parse(path.to_path_buf(), d))
    }
}

pub fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok()))
        .unwrap_or(ZeroTest::default().seed)
}

pub fn execute(cli: &Cli) -> Outcome {
    let seed = resolve_seed(cli.global.seed);
    let mut session = Session { zero_test: ZeroTest::new(cli.global.random_checks as usize, seed), inputs: Vec::new() };
    let outcome = dispatch(&cli.command, &mut session);
    let hash = format!("sha256:{:x}", Sha256::digest(&session.inputs));
    let envelope = |verdict: Verdict, confidence: Confidence, assumptions: &[String], result: Value| {
        json!({
            "schema_version": SCHEMA_VERSION,
            "tool": "jetred",
            "version": env!("CARGO_PKG_VERSION"),
            "command": cli.command.name(),
            "input_hash": hash,
            "seed": seed,
            "random_checks": cli.global.random_checks,
            "assumptions": assumptions,
            "zero_test": confidence.as_str(),
            "verdict": verdict.as_str(),
            "result": result,
        })
    };
    match outcome {
        Ok(run) => {
            let stdout = match cli.global.format {
                Format::Json => {
                    let v = envelope(run.verdict, run.confidence, &run.assumptions, run.result);
                    serde_json::to_string_pretty(&v).expect("serializable") + "\n"
                }
                Format::Text => {
                    let mut s = format!("verdict: {}\n{}", run.verdict.as_str(), run.text);
                    for a in &run.assumptions {
                        let _ = writeln!(s, "assuming: {a}");
                    }
                    let _ = writeln!(s, "zero test: {}", run.confidence.as_str());
                    s
                }
            };
            Outcome { code: run.verdict.exit_code(), stdout, stderr: String::new() }
        }
        Err(e) => {
            let mut stderr = format!("error: {e}\n");
            let mut result = json!({ "error": e.to_string() });
            if let AppError::Core(Error::Precondition(p)) = &e {
                let names = session_names(&cli.command, &mut Session { zero_test: session.zero_test, inputs: Vec::new() });
                if let Some((ctx, ops)) = names {
                    let _ = write!(stderr, "{}", precondition_text(&ctx, &ops, &p.involution, &p.transversality));
                    result["involution"] = involution_json(&ctx, &ops, &p.involution);
                    result["transversality"] = transversality_json(&ctx, &p.transversality);
                }
            }
            let stdout = match cli.global.format {
                Format::Json => {
                    let v = envelope(Verdict::Error, Confidence::Exact, &[], result);
                    serde_json::to_string_pretty(&v).expect("serializable") + "\n"
                }
                Format::Text => String::new(),
            };
            Outcome { code: 2, stdout, stderr }
        }
    }
}

/// Context and operator names for rendering a precondition failure.
fn session_names(cmd: &Command, s: &mut Session) -> Option<(VariableContext, Vec<String>)> {
    let t = match cmd {
        Command::CheckLie(t) | Command::CheckConditional(t) => t,
        Command::CheckSystem { target, .. } | Command::WeakOrder { target, .. } | Command::Reduce { target, .. } => target,
        Command::Prolong { target, .. } => target,
        _ => return None,
    };
    let m = s.model(&t.file).ok()?;
    let (names, _) = select_family(&m, t).ok()?;
    Some((m.ctx, names))
}

fn dispatch(cmd: &Command, s: &mut Session) -> AResult<Run> {
    match cmd {
        Command::CheckLie(t) => check_lie(s, t),
        Command::CheckConditional(t) => check_conditional(s, t),
        Command::CheckSystem { target, variant } => check_system(s, target, (*variant).into()),
        Command::Prolong { target, order } => run_prolong(s, target, *order),
        Command::Consequences { file, order, equations } => run_consequences(s, file, *order, equations),
        Command::Determining { file, gauge, equations } => run_determining(s, file, gauge, equations),
        Command::WeakOrder { target, max } => run_weak_order(s, target, *max),
        Command::Equivalent { first, second, family } => run_equivalent(s, first, second, family.as_deref()),
        Command::Reduce { target, ansatz, order } => run_reduce(s, target, ansatz.as_deref(), *order),
    }
}

fn show(ctx: &VariableContext, e: &Expr) -> String {
    ctx.display_expr(e)
}

fn nonzero(ctx: &VariableContext, es: &[Expr]) -> Vec<String> {
    es.iter().map(|e| format!("{} != 0", show(ctx, e))).collect()
}

fn input_confidence<'a>(es: impl IntoIterator<Item = &'a Expr>) -> Confidence {
    if es.into_iter().any(Expr::has_atoms) {
        Confidence::Probabilistic
    } else {
        Confidence::Exact
    }
}

fn select_family(m: &Model, t: &Target) -> AResult<(Vec<String>, VectorFieldFamily)> {
    if let Some(name) = &t.family {
        let (_, members) = m
            .families
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| AppError::Usage(format!("unknown family `{name}`")))?;
        let fam = m.family(name).ok_or_else(|| AppError::Usage(format!("family `{name}` is not admissible")))?;
        return Ok((members.clone(), fam));
    }
    let name = match &t.operator {
        Some(n) => n.clone(),
        None if m.operators.len() == 1 => m.operators[0].name.clone(),
        None => return Err(AppError::Usage("specify --operator or --family".into())),
    };
    let q = m.operator(&name).ok_or_else(|| AppError::Usage(format!("unknown operator `{name}`")))?;
    Ok((vec![name], VectorFieldFamily::single(q.clone())))
}

fn single_equation(m: &Model, only: &[String]) -> AResult<(String, Expr)> {
    let picked: Vec<_> = m.equations.iter().filter(|e| only.is_empty() || only.contains(&e.name)).collect();
    for name in only {
        if m.equation(name).is_none() {
            return Err(AppError::Usage(format!("unknown equation `{name}`")));
        }
    }
    match picked[..] {
        [e] => Ok((e.name.clone(), e.expr.clone())),
        [] => Err(AppError::Usage("the document has no equations".into())),
        _ => Err(AppError::Usage("this command takes one equation; select it with --equation".into())),
    }
}

fn check_selected(m: &Model, only: &[String]) -> AResult<()> {
    for name in only {
        if m.equation(name).is_none() {
            return Err(AppError::Usage(format!("unknown equation `{name}`")));
        }
    }
    Ok(())
}

fn manifold_json(ctx: &VariableContext, m: &SolvedManifold) -> Value {
    Value::Array(
        m.rules()
            .iter()
            .map(|r| {
                json!({
                    "leader": show(ctx, &Expr::symbol(Symbol::Jet(r.leader.clone()))),
                    "rhs": show(ctx, &r.rhs),
                    "source": r.source,
                })
            })
            .collect(),
    )
}

fn manifold_text(ctx: &VariableContext, m: &SolvedManifold) -> String {
    let mut s = String::new();
    for r in m.rules() {
        let _ = writeln!(s, "  {} = {}", show(ctx, &Expr::symbol(Symbol::Jet(r.leader.clone()))), show(ctx, &r.rhs));
    }
    s
}

fn involution_json(ctx: &VariableContext, ops: &[String], c: &InvolutionCertificate) -> Value {
    let rel: Vec<Value> = c
        .relations
        .iter()
        .map(|r| {
            json!({
                "pair": [ops.get(r.pair.0), ops.get(r.pair.1)],
                "commutator": r.commutator.render(ctx),
                "zeta": r.zeta.as_ref().map(|z| z.iter().map(|e| show(ctx, e)).collect::<Vec<_>>()),
            })
        })
        .collect();
    json!({ "involutive": c.involutive, "relations": rel })
}

fn transversality_json(ctx: &VariableContext, t: &TransversalityReport) -> Value {
    json!({
        "transversal": t.transversal,
        "rank": t.rank,
        "size": t.size,
        "columns": t.columns.iter().map(|&i| ctx.independent()[i].clone()).collect::<Vec<_>>(),
        "minor": t.minor.as_ref().map(|e| show(ctx, e)),
    })
}

fn precondition_text(ctx: &VariableContext, ops: &[String], inv: &InvolutionCertificate, tr: &TransversalityReport) -> String {
    let mut s = String::new();
    if let Some(w) = inv.witness() {
        let name = |i: usize| ops.get(i).cloned().unwrap_or_else(|| format!("#{}", i + 1));
        let _ = writeln!(s, "  [{}, {}] = {} is not in the span of the family", name(w.pair.0), name(w.pair.1), w.commutator.render(ctx));
    }
    if !tr.transversal {
        let _ = writeln!(s, "  rank of the xi matrix is {} for a family of {}", tr.rank, tr.size);
    }
    s
}

fn criterion_run(ctx: &VariableContext, ops: &[String], rep: &CriterionReport) -> Run {
    let verdict = match rep.holds {
        Holds::Yes => Verdict::Holds,
        Holds::No => Verdict::Fails,
        Holds::Vacuous => Verdict::Vacuous,
    };
    let residuals: Vec<Value> = rep
        .residuals
        .iter()
        .map(|r| {
            json!({
                "operator": ops[r.operator],
                "equation": r.equation,
                "expr": show(ctx, &r.expr),
                "vanishes": r.vanishes,
                "confidence": r.confidence.as_str(),
            })
        })
        .collect();
    let result = json!({
        "criterion": rep.kind.to_string(),
        "holds": rep.holds.as_str(),
        "order": rep.order,
        "operators": ops,
        "equations": rep.equations,
        "residuals": residuals,
        "manifold": rep.manifold.as_ref().map(|m| manifold_json(ctx, m)),
        "empty_witness": rep.empty_witness.as_ref().map(|e| show(ctx, e)),
        "involution": rep.involution.as_ref().map(|c| involution_json(ctx, ops, c)),
        "transversality": rep.transversality.as_ref().map(|t| transversality_json(ctx, t)),
    });
    let mut text = format!("criterion: {}\norder: {}\n", rep.kind, rep.order);
    for r in &rep.residuals {
        let _ = writeln!(text, "residual {} on {}: {}", ops[r.operator], r.equation, show(ctx, &r.expr));
    }
    if let Some(w) = &rep.empty_witness {
        let _ = writeln!(text, "joint manifold is empty: {} = 0", show(ctx, w));
    }
    if let Some(m) = &rep.manifold {
        text.push_str("manifold:\n");
        text.push_str(&manifold_text(ctx, m));
    }
    Run { verdict, result, text, assumptions: nonzero(ctx, &rep.assumptions), confidence: rep.confidence }
}

fn check_lie(s: &mut Session, t: &Target) -> AResult<Run> {
    let m = s.model(&t.file)?;
    check_selected(&m, &t.equations)?;
    let (ops, fam) = select_family(&m, t)?;
    if fam.len() != 1 {
        return Err(AppError::Usage("the Lie criterion takes a single operator".into()));
    }
    let sys = m.system(&t.equations)?;
    let rep = lie_criterion(&m.ctx, &sys, &fam.members[0], s.zero_test)?;
    Ok(criterion_run(&m.ctx, &ops, &rep))
}

fn check_conditional(s: &mut Session, t: &Target) -> AResult<Run> {
    let m = s.model(&t.file)?;
    let (_, eq) = single_equation(&m, &t.equations)?;
    let (ops, fam) = select_family(&m, t)?;
    let rep = conditional_criterion(&m.ctx, &eq, &fam, s.zero_test)?;
    Ok(criterion_run(&m.ctx, &ops, &rep))
}

fn check_system(s: &mut Session, t: &Target, v: SystemVariant) -> AResult<Run> {
    let m = s.model(&t.file)?;
    check_selected(&m, &t.equations)?;
    let (ops, fam) = select_family(&m, t)?;
    let sys = m.system(&t.equations)?;
    let rep = system_criterion(&m.ctx, &sys, &fam, v, s.zero_test)?;
    Ok(criterion_run(&m.ctx, &ops, &rep))
}

fn run_prolong(s: &mut Session, t: &Target, order: u32) -> AResult<Run> {
    let m = s.model(&t.file)?;
    check_selected(&m, &t.equations)?;
    let (ops, fam) = select_family(&m, t)?;
    let ctx = &m.ctx;
    let mut result = Vec::new();
    let mut text = String::new();
    for (name, q) in ops.iter().zip(&fam.members) {
        let p = prolong(ctx, q, order);
        let _ = writeln!(text, "operator {name}: {}", q.render(ctx));
        let mut coeffs = Vec::new();
        for (j, c) in &p.coeffs {
            let jet = show(ctx, &Expr::symbol(Symbol::Jet(j.clone())));
            let _ = writeln!(text, "  {jet}: {}", show(ctx, c));
            coeffs.push(json!({ "jet": jet, "coefficient": show(ctx, c) }));
        }
        let mut applied = Vec::new();
        for e in m.equations.iter().filter(|e| t.equations.is_empty() || t.equations.contains(&e.name)) {
            if e.expr.jet_order().unwrap_or(0) > order {
                continue;
            }
            let v = apply_prolonged(ctx, q, order, &e.expr)?;
            let _ = writeln!(text, "  applied to {}: {}", e.name, show(ctx, &v));
            applied.push(json!({ "equation": e.name, "expr": show(ctx, &v) }));
        }
        result.push(json!({ "operator": name, "field": q.render(ctx), "coefficients": coeffs, "applied": applied }));
    }
    let confidence = input_confidence(fam.members.iter().flat_map(|q| q.xi.iter().chain(&q.eta)));
    Ok(Run {
        verdict: Verdict::Output,
        result: json!({ "order": order, "operators": result }),
        text,
        assumptions: Vec::new(),
        confidence,
    })
}

fn run_consequences(s: &mut Session, file: &Path, order: u32, only: &[String]) -> AResult<Run> {
    let m = s.model(file)?;
    check_selected(&m, only)?;
    let ctx = &m.ctx;
    let sys = m.system(only)?;
    let cs = differential_consequences(ctx, &sys, order, s.zero_test)?;
    let mut text = format!("order: {order}\n");
    let members: Vec<Value> = cs
        .members
        .iter()
        .map(|c| {
            let _ = writeln!(
                text,
                "{}{}: {} = 0",
                c.label,
                if c.projected { " (projected)" } else { "" },
                show(ctx, &c.expr)
            );
            json!({
                "label": c.label,
                "equation": sys.labels()[c.equation],
                "expr": show(ctx, &c.expr),
                "projected": c.projected,
                "normal_form": show(ctx, &c.normal_form),
            })
        })
        .collect();
    let joint = joint_manifold(&cs, &SolvedManifold::default(), s.zero_test)?;
    let (rules, assumptions, confidence) = match &joint {
        JointManifold::Solved(sm) => {
            text.push_str("manifold:\n");
            text.push_str(&manifold_text(ctx, sm));
            (manifold_json(ctx, sm), nonzero(ctx, sm.assumptions()), sm.confidence())
        }
        JointManifold::Empty { .. } => (Value::Null, Vec::new(), Confidence::Exact),
    };
    if let Some(w) = &cs.inconsistency {
        let _ = writeln!(text, "inconsistent: {} = 0", show(ctx, w));
    }
    Ok(Run {
        verdict: Verdict::Output,
        result: json!({
            "order": order,
            "members": members,
            "manifold": rules,
            "inconsistency": cs.inconsistency.as_ref().map(|e| show(ctx, e)),
        }),
        text,
        assumptions,
        confidence: confidence.meet(input_confidence(sys.equations())),
    })
}

/// Parses `name=value` gauge fixings against the context.
pub fn parse_gauge(ctx: &VariableContext, items: &[String]) -> AResult<BTreeMap<String, Expr>> {
    let mut out = BTreeMap::new();
    for g in items {
        let (k, v) = g.split_once('=').ok_or_else(|| AppError::Usage(format!("gauge `{g}` is not of the form name=value")))?;
        let ast = syntax::parse_expr(v).map_err(|d| AppError::Usage(format!("gauge `{g}`: {}", d.message)))?;
        let e = crate::lower::lower_expr(ctx, &ast).map_err(|d| AppError::Usage(format!("gauge `{g}`: {}", d.message)))?;
        out.insert(k.trim().to_string(), e);
    }
    Ok(out)
}

fn run_determining(s: &mut Session, file: &Path, gauge: &[String], only: &[String]) -> AResult<Run> {
    let m = s.model(file)?;
    let (_, eq) = single_equation(&m, only)?;
    let mut ctx = m.ctx.clone();
    let fixed = parse_gauge(&ctx, gauge)?;
    let (template, unknowns) = template_field(&mut ctx, &fixed)?;
    let ds = determining_equations(&ctx, &eq, &template, unknowns, s.zero_test)?;
    let mut text = format!("unknowns: {}\n", ds.unknowns.join(", "));
    let equations: Vec<Value> = ds
        .equations
        .iter()
        .zip(&ds.monomials)
        .map(|(e, mono)| {
            let mono = mono.as_ref().map(|m: &Monomial| show(&ctx, &Expr::from_poly(Poly::term(num_traits::One::one(), m.clone()))));
            let _ = writeln!(text, "[{}] {} = 0", mono.as_deref().unwrap_or("condition"), show(&ctx, e));
            json!({ "monomial": mono, "expr": show(&ctx, e) })
        })
        .collect();
    let gauge_json: BTreeMap<&String, String> = fixed.iter().map(|(k, v)| (k, show(&ctx, v))).collect();
    Ok(Run {
        verdict: Verdict::Output,
        result: json!({ "unknowns": ds.unknowns, "gauge": gauge_json, "equations": equations }),
        text,
        assumptions: nonzero(&ctx, &ds.assumptions),
        confidence: input_confidence(std::iter::once(&eq).chain(fixed.values())),
    })
}

fn run_weak_order(s: &mut Session, t: &Target, max: u32) -> AResult<Run> {
    let m = s.model(&t.file)?;
    check_selected(&m, &t.equations)?;
    let (ops, fam) = select_family(&m, t)?;
    let sys = m.system(&t.equations)?;
    let search = weak_symmetry_order(&m.ctx, &sys, &fam, max, s.zero_test)?;
    let mut text = String::new();
    let mut confidence = Confidence::Exact;
    let mut attempts = Vec::new();
    for rep in &search.attempts {
        confidence = confidence.meet(rep.confidence);
        let _ = writeln!(text, "order {}: {}", rep.order, rep.holds.as_str());
        let run = criterion_run(&m.ctx, &ops, rep);
        attempts.push(json!({ "order": rep.order, "holds": rep.holds.as_str(), "residuals": run.result["residuals"] }));
    }
    match search.order {
        Some(r) => {
            let _ = writeln!(text, "weak symmetry order: {r}");
        }
        None => {
            let _ = writeln!(text, "no order up to {max}");
        }
    }
    let assumptions = search.attempts.last().map(|r| nonzero(&m.ctx, &r.assumptions)).unwrap_or_default();
    Ok(Run {
        verdict: if search.order.is_some() { Verdict::Found } else { Verdict::NotFound },
        result: json!({ "max": max, "order": search.order, "operators": ops, "attempts": attempts }),
        text,
        assumptions,
        confidence,
    })
}

fn pick_family(m: &Model, name: Option<&str>) -> AResult<VectorFieldFamily> {
    match name {
        Some(n) => m.family(n).ok_or_else(|| AppError::Usage(format!("unknown family `{n}`"))),
        None if !m.operators.is_empty() => Ok(m.all_operators()),
        None => Err(AppError::Usage("the document declares no operators".into())),
    }
}

fn run_equivalent(s: &mut Session, first: &Path, second: &Path, family: Option<&str>) -> AResult<Run> {
    let a = s.model(first)?;
    let b = s.model(second)?;
    if a.ctx.independent() != b.ctx.independent() || a.ctx.dependent() != b.ctx.dependent() || a.ctx.names() != b.ctx.names() {
        return Err(AppError::Usage("the two documents declare different variables".into()));
    }
    let f = pick_family(&a, family)?;
    let g = pick_family(&b, family)?;
    let ctx = &a.ctx;
    let confidence = input_confidence(f.members.iter().chain(&g.members).flat_map(|q| q.xi.iter().chain(&q.eta)));
    match family_equivalence(&f, &g, s.zero_test)? {
        Equivalence::Equivalent(w) => {
            let lambda: Vec<Vec<String>> = w.lambda.iter().map(|r| r.iter().map(|e| show(ctx, e)).collect()).collect();
            let mut text = String::from("lambda:\n");
            for r in &lambda {
                let _ = writeln!(text, "  [{}]", r.join(", "));
            }
            let _ = writeln!(text, "determinant: {}", show(ctx, &w.determinant));
            Ok(Run {
                verdict: Verdict::Equivalent,
                result: json!({ "equivalent": true, "lambda": lambda, "determinant": show(ctx, &w.determinant), "reason": null }),
                text,
                assumptions: if w.determinant.as_constant().is_some() { Vec::new() } else { nonzero(ctx, &[w.determinant.clone()]) },
                confidence,
            })
        }
        Equivalence::NotEquivalent { reason } => Ok(Run {
            verdict: Verdict::NotEquivalent,
            text: format!("{reason}\n"),
            result: json!({ "equivalent": false, "lambda": null, "determinant": null, "reason": reason }),
            assumptions: Vec::new(),
            confidence,
        }),
    }
}

fn ansatz_json(a: &Ansatz) -> Value {
    let ctx = &a.ctx;
    json!({
        "source": a.source.as_str(),
        "invariants": a.invariants.iter().zip(ctx.invariants()).map(|(e, n)| json!({ "name": n, "expr": show(ctx, e) })).collect::<Vec<_>>(),
        "forms": a.forms.iter().zip(ctx.dependent()).map(|(e, n)| json!({ "dependent": n, "expr": show(ctx, e) })).collect::<Vec<_>>(),
        "pivots": a.pivots.iter().map(|&k| ctx.independent()[k].clone()).collect::<Vec<_>>(),
    })
}

fn run_reduce(s: &mut Session, t: &Target, ansatz_file: Option<&Path>, order: Option<u32>) -> AResult<Run> {
    let mut m = s.model(&t.file)?;
    if let Some(p) = ansatz_file {
        let doc = s.document(p)?;
        m.absorb(&doc).map_err(|d| AppError::Parse(p.to_path_buf(), d))?;
    }
    check_selected(&m, &t.equations)?;
    let q = if t.operator.is_some() || t.family.is_some() || (!m.has_ansatz() && m.operators.len() == 1) {
        let (_, fam) = select_family(&m, t)?;
        if fam.len() != 1 {
            return Err(AppError::Usage("automatic ansätze need a single operator".into()));
        }
        Some(fam.members[0].clone())
    } else {
        None
    };
    let ansatz = if m.has_ansatz() {
        let a = m.user_ansatz()?;
        if let Some(q) = &q {
            a.check_operator(q, s.zero_test)?;
        }
        a
    } else {
        let q = q.ok_or_else(|| AppError::Usage("specify --operator or supply an ansatz".into()))?;
        build_ansatz(&m.ctx, &q)?
    };
    let sys = m.system(&t.equations)?;
    let targets: Vec<(String, Expr)> = match order {
        Some(k) => {
            let cs = differential_consequences(&m.ctx, &sys, k, s.zero_test)?;
            cs.members.into_iter().map(|c| (c.label, c.expr)).collect()
        }
        None => sys.labels().iter().cloned().zip(sys.equations().iter().cloned()).collect(),
    };
    let rep = verify_reduction(&ansatz, &targets, s.zero_test)?;
    let ctx = &ansatz.ctx;
    let mut text = String::new();
    let _ = writeln!(text, "ansatz ({}):", ansatz.source.as_str());
    for (e, n) in ansatz.invariants.iter().zip(ctx.invariants()) {
        let _ = writeln!(text, "  {n} = {}", show(ctx, e));
    }
    for (e, n) in ansatz.forms.iter().zip(ctx.dependent()) {
        let _ = writeln!(text, "  {n} = {}", show(ctx, e));
    }
    for ((label, _), e) in targets.iter().zip(&rep.substituted) {
        let _ = writeln!(text, "substituted {label}: {}", show(ctx, e));
    }
    let substituted: Vec<Value> = targets
        .iter()
        .zip(&rep.substituted)
        .map(|((l, _), e)| json!({ "equation": l, "expr": show(ctx, e) }))
        .collect();
    let multiplier: Vec<Vec<String>> = rep.multiplier.iter().map(|r| r.iter().map(|e| show(ctx, e)).collect()).collect();
    let reduced: Vec<String> = rep.reduced.iter().map(|e| show(ctx, e)).collect();
    match rep.status {
        ReductionStatus::Reduced => {
            text.push_str("reduced:\n");
            for r in &reduced {
                let _ = writeln!(text, "  {r} = 0");
            }
            text.push_str("multiplier:\n");
            for r in &multiplier {
                let _ = writeln!(text, "  [{}]", r.join(", "));
            }
            if let Some(d) = &rep.determinant {
                let _ = writeln!(text, "determinant: {}", show(ctx, d));
            }
        }
        ReductionStatus::NotReduced => {
            let _ = writeln!(text, "blocked by: {}", rep.blocking.join(", "));
        }
    }
    let mut assumptions = Vec::new();
    if let Some(d) = &rep.determinant {
        if d.as_constant().is_none() {
            assumptions.push(format!("{} != 0", show(ctx, d)));
        }
    }
    let confidence = input_confidence(targets.iter().map(|(_, e)| e).chain(&ansatz.forms).chain(&ansatz.invariants));
    Ok(Run {
        verdict: if rep.status == ReductionStatus::Reduced { Verdict::Reduced } else { Verdict::NotReduced },
        result: json!({
            "ansatz": ansatz_json(&ansatz),
            "equations": rep.equations,
            "status": rep.status.as_str(),
            "substituted": substituted,
            "reduced": reduced,
            "multiplier": multiplier,
            "determinant": rep.determinant.as_ref().map(|d| show(ctx, d)),
            "blocking": rep.blocking,
        }),
        text,
        assumptions,
        confidence,
    })
}
