use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn corpus(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "corpus", name].iter().collect();
    p.to_string_lossy().into_owned()
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn jetred_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_jetred"));
    cmd.args(args).env_remove("JETRED_RANDOM_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn jetred(args: &[&str]) -> Run {
    jetred_env(args, &[])
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut a = vec!["--format", "json"];
    a.extend_from_slice(args);
    let r = jetred(&a);
    (r.code, serde_json::from_str(&r.stdout).unwrap_or_else(|e| panic!("{e}: {}", r.stdout)))
}

fn schema() -> jsonschema::JSONSchema {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "schema", "report-v1.json"].iter().collect();
    let v: Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
    jsonschema::JSONSchema::compile(&v).expect("schema compiles")
}

/// (arguments, expected exit code) over the corpus.
fn catalogue() -> Vec<(Vec<String>, i32)> {
    let e1 = corpus("drift_diffusion.pde");
    let heat = corpus("heat.pde");
    let burgers = corpus("burgers.pde");
    let ns = corpus("navier_stokes.pde");
    let rd = corpus("reaction_diffusion.pde");
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    vec![
        (s(&["check-conditional", &e1, "--operator", "Qt"]), 1),
        (s(&["check-conditional", &e1, "--operator", "Qx"]), 0),
        (s(&["check-lie", &e1, "--operator", "Qt"]), 1),
        (s(&["check-lie", &heat, "--operator", "P"]), 0),
        (s(&["check-lie", &heat, "--operator", "Tx"]), 1),
        (s(&["check-conditional", &heat, "--operator", "Tx"]), 0),
        (s(&["check-conditional", &heat, "--family", "F"]), 0),
        (s(&["check-conditional", &burgers, "--operator", "Q"]), 0),
        (s(&["check-conditional", &rd, "--operator", "S0"]), 1),
        (s(&["check-system", &ns, "--operator", "T1", "--variant", "raw"]), 1),
        (s(&["check-system", &ns, "--operator", "T1", "--variant", "prolonged-original"]), 0),
        (s(&["check-system", &ns, "--operator", "T1", "--variant", "prolonged-all"]), 0),
        (s(&["prolong", &e1, "--operator", "Qt", "--order", "2"]), 0),
        (s(&["consequences", &e1, "--order", "3"]), 0),
        (s(&["determining", &heat, "--gauge", "xi_t=1"]), 0),
        (s(&["weak-order", &e1, "--operator", "Qt", "--max", "4"]), 0),
        (s(&["weak-order", &e1, "--operator", "Qt", "--max", "2"]), 1),
        (s(&["equivalent", &corpus("translations.vf"), &corpus("translations_mixed.vf")]), 0),
        (s(&["equivalent", &corpus("translations.vf"), &corpus("scaled.vf")]), 0),
        (s(&["reduce", &e1, "--operator", "Qt"]), 1),
        (s(&["reduce", &e1, "--ansatz", &corpus("drift_diffusion_ansatz.pde"), "--order", "3"]), 0),
        (s(&["reduce", &heat, "--operator", "D"]), 0),
        (s(&["reduce", &heat, "--operator", "P"]), 2),
        (s(&["check-conditional", &corpus("noninvolutive.pde"), "--family", "F"]), 2),
        (s(&["check-conditional", &heat]), 2),
        (s(&["check-conditional", &corpus("missing.pde"), "--operator", "Q"]), 2),
    ]
}

#[test]
fn exit_codes_across_the_corpus() {
    for (args, want) in catalogue() {
        let a: Vec<&str> = args.iter().map(String::as_str).collect();
        let r = jetred(&a);
        assert_eq!(r.code, want, "{args:?}\n{}{}", r.stdout, r.stderr);
        if want == 2 {
            assert!(r.stderr.starts_with("error: "), "{}", r.stderr);
        }
    }
}

#[test]
fn reports_validate_against_the_schema() {
    let schema = schema();
    for (args, want) in catalogue() {
        let a: Vec<&str> = args.iter().map(String::as_str).collect();
        let (code, v) = json(&a);
        assert_eq!(code, want, "{args:?}");
        if let Err(errors) = schema.validate(&v) {
            let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
            panic!("{args:?}: {msgs:#?}");
        }
        let again: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(again, v);
    }
}

#[test]
fn schema_rejects_malformed_reports() {
    let schema = schema();
    let (_, mut v) = json(&["check-conditional", &corpus("drift_diffusion.pde"), "--operator", "Qt"]);
    assert!(schema.is_valid(&v));
    v["verdict"] = Value::from("reduced");
    assert!(!schema.is_valid(&v));
    v["verdict"] = Value::from("fails");
    v["result"]["residuals"][0]["vanishes"] = Value::from("no");
    assert!(!schema.is_valid(&v));
}

#[test]
fn identical_inputs_give_identical_reports() {
    for (args, _) in catalogue().into_iter().take(16) {
        let mut a: Vec<&str> = vec!["--format", "json", "--seed", "11"];
        a.extend(args.iter().map(String::as_str));
        assert_eq!(jetred(&a).stdout, jetred(&a).stdout, "{args:?}");
    }
}

#[test]
fn seed_flag_and_environment_fallback() {
    let e1 = corpus("drift_diffusion.pde");
    let args = ["--format", "json", "check-conditional", e1.as_str(), "--operator", "Qt"];
    let seed = |r: Run| serde_json::from_str::<Value>(&r.stdout).unwrap()["seed"].as_u64().unwrap();
    let default = seed(jetred(&args));
    assert_eq!(seed(jetred_env(&args, &[("JETRED_RANDOM_SEED", "99")])), 99);
    let mut with_flag = args.to_vec();
    with_flag.extend(["--seed", "5"]);
    assert_eq!(seed(jetred_env(&with_flag, &[("JETRED_RANDOM_SEED", "99")])), 5);
    assert_ne!(default, 99);
}

#[test]
fn input_hash_tracks_content() {
    let dir = std::env::temp_dir().join(format!("jetred-hash-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let a = dir.join("a.pde");
    let b = dir.join("b.pde");
    let src = std::fs::read_to_string(corpus("drift_diffusion.pde")).unwrap();
    std::fs::write(&a, &src).unwrap();
    std::fs::write(&b, format!("{src}\n# changed\n")).unwrap();
    let hash = |p: &std::path::Path| {
        let (_, v) = json(&["check-conditional", p.to_str().unwrap(), "--operator", "Qt"]);
        v["input_hash"].as_str().unwrap().to_string()
    };
    let (ha, hb) = (hash(&a), hash(&b));
    assert_ne!(ha, hb);
    assert_eq!(ha, hash(&a));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn worked_examples_through_the_cli() {
    let e1 = corpus("drift_diffusion.pde");
    let (code, v) = json(&["check-conditional", &e1, "--operator", "Qt"]);
    assert_eq!(code, 1);
    assert_eq!(v["result"]["residuals"][0]["expr"], "u[x]");

    let (code, v) = json(&["weak-order", &e1, "--operator", "Qt", "--max", "4"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["order"], 3);

    let (code, v) = json(&["equivalent", &corpus("translations.vf"), &corpus("translations_mixed.vf")]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["lambda"], serde_json::json!([["1", "1"], ["0", "1"]]));

    let (code, v) = json(&["reduce", &corpus("travelling_wave.pde"), "--operator", "W"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["reduced"], serde_json::json!(["phi[w,w] + c*phi[w]"]));
    assert_eq!(v["result"]["multiplier"], serde_json::json!([["-1"]]));
}

#[test]
fn diagnostics_carry_positions() {
    let dir = std::env::temp_dir().join(format!("jetred-diag-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("bad.pde");
    std::fs::write(&p, "independent t, x;\ndependent u;\neq E: u[t = 0;\n").unwrap();
    let r = jetred(&["check-lie", p.to_str().unwrap(), "--operator", "Q"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("bad.pde:3:11:"), "{}", r.stderr);
    std::fs::write(&p, "independent t, x;\ndependent u;\neq E: u[t] + v = 0;\n").unwrap();
    let r = jetred(&["check-lie", p.to_str().unwrap(), "--operator", "Q"]);
    assert!(r.stderr.contains("bad.pde:3:14: undeclared name `v`"), "{}", r.stderr);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(jetred(&["frobnicate"]).code, 2);
    assert_eq!(jetred(&["check-lie", &corpus("heat.pde"), "--bogus"]).code, 2);
    assert_eq!(jetred(&["check-system", &corpus("heat.pde"), "--operator", "Pt", "--variant", "other"]).code, 2);
    assert_eq!(jetred(&["--random-checks", "0", "check-lie", &corpus("heat.pde")]).code, 2);
    assert_eq!(jetred(&["--help"]).code, 0);
}

#[test]
fn text_output_lists_verdict_first() {
    let r = jetred(&["check-conditional", &corpus("drift_diffusion.pde"), "--operator", "Qt"]);
    assert!(r.stdout.starts_with("verdict: fails\n"));
    assert!(r.stdout.contains("residual Qt on L: u[x]\n"));
    assert!(r.stdout.ends_with("zero test: exact\n"));
}
