use std::path::PathBuf;

use jetred::lower::{lower_expr, Model};
use jetred::syntax::{parse, parse_expr, Ast, AstKind, BinOp, Span};
use proptest::prelude::*;

fn corpus_files() -> Vec<PathBuf> {
    let dir: PathBuf = [env!("CARGO_MANIFEST_DIR"), "corpus"].iter().collect();
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn printed_corpus_reparses_identically() {
    let files = corpus_files();
    assert!(files.len() >= 8);
    for p in files {
        let src = std::fs::read_to_string(&p).unwrap();
        let doc = parse(&src).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let printed = doc.to_string();
        assert_eq!(parse(&printed).unwrap(), doc, "{}", p.display());
        assert_eq!(parse(&printed).unwrap().to_string(), printed);
    }
}

#[test]
fn corpus_documents_lower() {
    for p in corpus_files() {
        let src = std::fs::read_to_string(&p).unwrap();
        let doc = parse(&src).unwrap();
        if p.file_name().unwrap().to_str().unwrap().contains("ansatz") {
            continue;
        }
        let m = Model::lower(&doc).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(!m.operators.is_empty(), "{}", p.display());
    }
}

fn leaf() -> impl Strategy<Value = Ast> {
    let span = Span::default();
    prop_oneof![
        (0u32..20).prop_map(move |n| Ast { kind: AstKind::Num(n.to_string()), span }),
        prop::sample::select(vec!["t", "x", "u", "c"]).prop_map(move |v| Ast { kind: AstKind::Var(v.into()), span }),
        prop::collection::vec(prop::sample::select(vec!["t", "x"]), 0..3).prop_map(move |vars| Ast {
            kind: AstKind::Jet {
                name: "u".into(),
                vars: vars.into_iter().map(|v| jetred::syntax::Name { text: v.into(), span }).collect(),
            },
            span,
        }),
    ]
}

fn ast() -> impl Strategy<Value = Ast> {
    let span = Span::default();
    leaf().prop_recursive(4, 32, 2, move |inner| {
        prop_oneof![
            inner.clone().prop_map(move |a| Ast { kind: AstKind::Neg(Box::new(a)), span }),
            (prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]), inner.clone(), inner.clone())
                .prop_map(move |(op, a, b)| Ast { kind: AstKind::Bin(op, Box::new(a), Box::new(b)), span }),
            inner.prop_map(move |a| Ast { kind: AstKind::Call("exp".into(), vec![a]), span }),
        ]
    })
}

proptest! {
    #[test]
    fn printed_expressions_reparse(a in ast()) {
        let text = a.to_string();
        prop_assert_eq!(parse_expr(&text).unwrap(), a);
    }

    #[test]
    fn displayed_canonical_forms_reparse(a in ast()) {
        let m = Model::lower(&parse("independent t, x; dependent u; param c;").unwrap()).unwrap();
        if let Ok(e) = lower_expr(&m.ctx, &a) {
            let text = m.ctx.display_expr(&e);
            let back = lower_expr(&m.ctx, &parse_expr(&text).unwrap()).unwrap();
            prop_assert_eq!(back, e);
        }
    }
}
