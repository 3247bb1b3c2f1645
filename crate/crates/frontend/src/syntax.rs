//! The `.pde` source language: tokens, syntax tree, parser and printer.
//!
//! ```text
//! independent t, x;
//! dependent u;
//! eq L: u[t] + u[x,x] + t*u[x] = 0;
//! op Qt: xi[t] = 1; xi[x] = 0; eta[u] = 0;
//! ```

use std::fmt;

#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl Diagnostic {
    pub fn at(span: Span, message: impl Into<String>) -> Self {
        Diagnostic { line: span.line, col: span.col, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for Diagnostic {}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(String),
    Semi,
    Colon,
    Comma,
    Eq,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(s) => format!("number `{s}`"),
            Tok::Eof => "end of input".into(),
            t => format!("`{}`", t.punct()),
        }
    }

    fn punct(&self) -> &'static str {
        match self {
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Comma => ",",
            Tok::Eq => "=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Caret => "^",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrack => "[",
            Tok::RBrack => "]",
            _ => "",
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Span)>, Diagnostic> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1u32, 1u32);
    while let Some(&c) = chars.peek() {
        let span = Span { line, col };
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars);
            continue;
        }
        if c == '#' {
            while chars.peek().is_some_and(|&c| c != '\n') {
                bump(&mut chars);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while chars.peek().is_some_and(|&c| c.is_ascii_alphanumeric() || c == '_') {
                s.push(bump(&mut chars).unwrap());
            }
            out.push((Tok::Ident(s), span));
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while chars.peek().is_some_and(|&c| c.is_ascii_digit() || c == '.') {
                s.push(bump(&mut chars).unwrap());
            }
            if s.matches('.').count() > 1 || s.ends_with('.') {
                return Err(Diagnostic::at(span, format!("malformed number `{s}`")));
            }
            out.push((Tok::Num(s), span));
            continue;
        }
        let tok = match c {
            ';' => Tok::Semi,
            ':' => Tok::Colon,
            ',' => Tok::Comma,
            '=' => Tok::Eq,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBrack,
            ']' => Tok::RBrack,
            other => return Err(Diagnostic::at(span, format!("unexpected character `{other}`"))),
        };
        bump(&mut chars);
        out.push((tok, span));
    }
    out.push((Tok::Eof, Span { line, col }));
    Ok(out)
}

/// A name with its position; equality ignores the position.
#[derive(Clone, Debug)]
pub struct Name {
    pub text: String,
    pub span: Span,
}

impl PartialEq for Name {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
    }
}

impl Eq for Name {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn prec(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AstKind {
    Num(String),
    Var(String),
    /// `u[t,x]`; an empty list is the function itself.
    Jet { name: String, vars: Vec<Name> },
    Neg(Box<Ast>),
    Bin(BinOp, Box<Ast>, Box<Ast>),
    Call(String, Vec<Ast>),
}

/// An expression node; equality ignores positions.
#[derive(Clone, Debug)]
pub struct Ast {
    pub kind: AstKind,
    pub span: Span,
}

impl PartialEq for Ast {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Eq for Ast {}

impl Ast {
    fn prec(&self) -> u8 {
        match &self.kind {
            AstKind::Bin(op, ..) => op.prec(),
            AstKind::Neg(_) => 3,
            _ => 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComponentKind {
    Xi,
    Eta,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub kind: ComponentKind,
    pub var: Name,
    pub value: Ast,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Independent(Vec<Name>),
    Dependent(Vec<Name>),
    Param(Vec<Name>),
    Function(Vec<Name>),
    Equation { name: Name, lhs: Ast, rhs: Ast },
    Operator { name: Name, components: Vec<Component> },
    Family { name: Name, members: Vec<Name> },
    Invariant { name: Name, value: Ast },
    Unknown(Vec<Name>),
    Ansatz { target: Name, value: Ast },
    Option { key: Name, value: Name },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Document {
    pub items: Vec<Item>,
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn next(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        Err(Diagnostic::at(self.span(), format!("expected {expected}, found {}", self.peek().describe())))
    }

    fn expect(&mut self, t: Tok) -> PResult<Span> {
        if *self.peek() == t {
            Ok(self.next().1)
        } else {
            self.error(&format!("`{}`", t.punct()))
        }
    }

    fn name(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(text) => {
                let span = self.next().1;
                Ok(Name { text, span })
            }
            _ => self.error("a name"),
        }
    }

    fn name_list(&mut self) -> PResult<Vec<Name>> {
        let mut v = vec![self.name()?];
        while *self.peek() == Tok::Comma {
            self.next();
            v.push(self.name()?);
        }
        Ok(v)
    }

    fn document(&mut self) -> PResult<Document> {
        let mut items = Vec::new();
        while *self.peek() != Tok::Eof {
            items.push(self.item()?);
        }
        Ok(Document { items })
    }

    fn item(&mut self) -> PResult<Item> {
        let Tok::Ident(kw) = self.peek().clone() else { return self.error("a declaration") };
        let kw_span = self.span();
        self.next();
        let item = match kw.as_str() {
            "independent" => Item::Independent(self.name_list()?),
            "dependent" => Item::Dependent(self.name_list()?),
            "param" => Item::Param(self.name_list()?),
            "function" => Item::Function(self.name_list()?),
            "unknown" => Item::Unknown(self.name_list()?),
            "eq" => {
                let name = self.name()?;
                self.expect(Tok::Colon)?;
                let lhs = self.expr()?;
                self.expect(Tok::Eq)?;
                let rhs = self.expr()?;
                Item::Equation { name, lhs, rhs }
            }
            "op" => {
                let name = self.name()?;
                self.expect(Tok::Colon)?;
                let mut components = vec![self.component()?];
                while matches!(self.peek(), Tok::Ident(s) if s == "xi" || s == "eta") && *self.peek_at(1) == Tok::LBrack {
                    components.push(self.component()?);
                }
                return Ok(Item::Operator { name, components });
            }
            "family" => {
                let name = self.name()?;
                self.expect(Tok::Colon)?;
                Item::Family { name, members: self.name_list()? }
            }
            "invariant" => {
                let name = self.name()?;
                self.expect(Tok::Eq)?;
                Item::Invariant { name, value: self.expr()? }
            }
            "ansatz" => {
                let target = self.name()?;
                self.expect(Tok::Eq)?;
                Item::Ansatz { target, value: self.expr()? }
            }
            "option" => {
                let key = self.name()?;
                self.expect(Tok::Eq)?;
                let value = match self.peek().clone() {
                    Tok::Ident(text) | Tok::Num(text) => Name { text, span: self.next().1 },
                    _ => return self.error("an option value"),
                };
                Item::Option { key, value }
            }
            _ => return Err(Diagnostic::at(kw_span, format!("unknown declaration `{kw}`"))),
        };
        self.expect(Tok::Semi)?;
        Ok(item)
    }

    fn component(&mut self) -> PResult<Component> {
        let head = self.name()?;
        let kind = match head.text.as_str() {
            "xi" => ComponentKind::Xi,
            "eta" => ComponentKind::Eta,
            _ => return Err(Diagnostic::at(head.span, "expected `xi[..]` or `eta[..]`")),
        };
        self.expect(Tok::LBrack)?;
        let var = self.name()?;
        self.expect(Tok::RBrack)?;
        self.expect(Tok::Eq)?;
        let value = self.expr()?;
        self.expect(Tok::Semi)?;
        Ok(Component { kind, var, value })
    }

    fn expr(&mut self) -> PResult<Ast> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.term()?;
            let span = lhs.span;
            lhs = Ast { kind: AstKind::Bin(op, Box::new(lhs), Box::new(rhs)), span };
        }
    }

    fn term(&mut self) -> PResult<Ast> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.unary()?;
            let span = lhs.span;
            lhs = Ast { kind: AstKind::Bin(op, Box::new(lhs), Box::new(rhs)), span };
        }
    }

    fn unary(&mut self) -> PResult<Ast> {
        if *self.peek() == Tok::Minus {
            let span = self.next().1;
            let inner = self.unary()?;
            return Ok(Ast { kind: AstKind::Neg(Box::new(inner)), span });
        }
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.next();
            let exp = self.unary()?;
            let span = base.span;
            return Ok(Ast { kind: AstKind::Bin(BinOp::Pow, Box::new(base), Box::new(exp)), span });
        }
        Ok(base)
    }

    fn atom(&mut self) -> PResult<Ast> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Num(s) => {
                self.next();
                Ok(Ast { kind: AstKind::Num(s), span })
            }
            Tok::LParen => {
                self.next();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.next();
                match self.peek() {
                    Tok::LBrack => {
                        self.next();
                        let vars = if *self.peek() == Tok::RBrack { Vec::new() } else { self.name_list()? };
                        self.expect(Tok::RBrack)?;
                        Ok(Ast { kind: AstKind::Jet { name, vars }, span })
                    }
                    Tok::LParen => {
                        self.next();
                        let mut args = vec![self.expr()?];
                        while *self.peek() == Tok::Comma {
                            self.next();
                            args.push(self.expr()?);
                        }
                        self.expect(Tok::RParen)?;
                        Ok(Ast { kind: AstKind::Call(name, args), span })
                    }
                    _ => Ok(Ast { kind: AstKind::Var(name), span }),
                }
            }
            _ => self.error("an expression"),
        }
    }
}

pub fn parse(src: &str) -> Result<Document, Diagnostic> {
    let toks = lex(src)?;
    Parser { toks, pos: 0 }.document()
}

/// Parses a single expression.
pub fn parse_expr(src: &str) -> Result<Ast, Diagnostic> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.error("end of expression");
    }
    Ok(e)
}

fn names(v: &[Name]) -> String {
    v.iter().map(|n| n.text.as_str()).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Ast, paren: bool| {
            if paren {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match &self.kind {
            AstKind::Num(s) | AstKind::Var(s) => f.write_str(s),
            AstKind::Jet { name, vars } => {
                let v: Vec<&str> = vars.iter().map(|n| n.text.as_str()).collect();
                write!(f, "{name}[{}]", v.join(","))
            }
            AstKind::Neg(e) => {
                f.write_str("-")?;
                wrap(f, e, e.prec() < 3)
            }
            AstKind::Bin(BinOp::Pow, a, b) => {
                wrap(f, a, a.prec() <= 4)?;
                f.write_str("^")?;
                wrap(f, b, b.prec() < 3)
            }
            AstKind::Bin(op, a, b) => {
                wrap(f, a, a.prec() < op.prec())?;
                f.write_str(op.symbol())?;
                wrap(f, b, b.prec() <= op.prec())
            }
            AstKind::Call(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Item::Independent(v) => write!(f, "independent {};", names(v)),
            Item::Dependent(v) => write!(f, "dependent {};", names(v)),
            Item::Param(v) => write!(f, "param {};", names(v)),
            Item::Function(v) => write!(f, "function {};", names(v)),
            Item::Unknown(v) => write!(f, "unknown {};", names(v)),
            Item::Equation { name, lhs, rhs } => write!(f, "eq {}: {lhs} = {rhs};", name.text),
            Item::Operator { name, components } => {
                write!(f, "op {}:", name.text)?;
                for c in components {
                    let head = match c.kind {
                        ComponentKind::Xi => "xi",
                        ComponentKind::Eta => "eta",
                    };
                    write!(f, " {head}[{}] = {};", c.var.text, c.value)?;
                }
                Ok(())
            }
            Item::Family { name, members } => write!(f, "family {}: {};", name.text, names(members)),
            Item::Invariant { name, value } => write!(f, "invariant {} = {value};", name.text),
            Item::Ansatz { target, value } => write!(f, "ansatz {} = {value};", target.text),
            Item::Option { key, value } => write!(f, "option {} = {};", key.text, value.text),
        }
    }
}

impl fmt::Display for Document {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for item in &self.items {
            writeln!(f, "{item}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_equation_and_operator() {
        let d = parse("independent t,x; dependent u; eq L: u[t]+u[x,x]+t*u[x]=0;").unwrap();
        assert_eq!(d.items.len(), 3);
        let Item::Equation { name, lhs, .. } = &d.items[2] else { panic!() };
        assert_eq!(name.text, "L");
        assert_eq!(lhs.to_string(), "u[t] + u[x,x] + t*u[x]");

        let d = parse("op Q: xi[t]=1; xi[x]=0; eta[u]=0;").unwrap();
        let Item::Operator { components, .. } = &d.items[0] else { panic!() };
        assert_eq!(components.len(), 3);
        assert_eq!(components[0].kind, ComponentKind::Xi);
        assert_eq!(components[2].var.text, "u");
    }

    #[test]
    fn unclosed_bracket_reports_position() {
        let e = parse("independent t;\neq E: u[t = 0;").unwrap_err();
        assert_eq!((e.line, e.col), (2, 11));
        assert!(e.message.contains("expected `]`"), "{}", e.message);
    }

    #[test]
    fn precedence_and_printing() {
        let cases = [
            ("a - (b - c)", "a - (b - c)"),
            ("a - b - c", "a - b - c"),
            ("-x^2", "-x^2"),
            ("(-x)^2", "(-x)^2"),
            ("a^b^c", "a^b^c"),
            ("(a^b)^c", "(a^b)^c"),
            ("x^(1/2)", "x^(1/2)"),
            ("x^-1", "x^-1"),
            ("2*(a + b)/c", "2*(a + b)/c"),
            ("a/(b*c)", "a/(b*c)"),
            ("exp(-x^2/(4*t))", "exp(-x^2/(4*t))"),
        ];
        for (src, want) in cases {
            let a = parse_expr(src).unwrap();
            assert_eq!(a.to_string(), want);
            assert_eq!(parse_expr(&a.to_string()).unwrap(), a);
        }
    }

    #[test]
    fn comments_and_options() {
        let d = parse("# heading\noption seed = 7; # trailing\nfamily F: A, B;").unwrap();
        assert_eq!(d.to_string(), "option seed = 7;\nfamily F: A, B;\n");
    }

    #[test]
    fn bad_tokens() {
        assert!(parse("eq L: u[t] $ 1 = 0;").is_err());
        assert!(parse("eq L: 1.2.3 = 0;").is_err());
        assert!(parse("bogus x;").unwrap_err().message.contains("unknown declaration"));
        assert!(parse("op Q: zeta[t] = 1;").is_err());
    }
}
