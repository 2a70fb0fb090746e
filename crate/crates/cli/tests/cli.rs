use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const H: &str = "@relation H over D(a,b,c)\n1 2 3 4\na b b a\nb a a b\nc b c b\nb c b c\n";
const I4: &str = "@relation I over D(a,b,c)\n1 2 3 4\na a a a\nb b b b\nc c c c\n";
const TABLE: &str = "@relation R over D(a,b)\n1 2 3\na a a\na a b\na b a\na b b\nb a b\n";

fn relred(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relred")).current_dir(dir).env_remove("RELRED_CAPS").args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("H.rel"), H).unwrap();
    fs::write(dir.path().join("I4.rel"), I4).unwrap();
    fs::write(dir.path().join("R.rel"), TABLE).unwrap();
    dir
}

#[test]
fn herzberger_key_reduction_bundle() {
    let dir = workspace();
    let o = relred(dir.path(), &["reduce", "H.rel", "--key", "1,2", "--out", "hk"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("factor arities: 3 3"));
    for f in ["certificate.json", "target.rel", "R3.rel", "R4.rel"] {
        assert!(dir.path().join("hk").join(f).exists(), "{f} missing");
    }
    assert_eq!(relred(dir.path(), &["verify", "hk"]).status.code(), Some(0));

    let factor = dir.path().join("hk/R3.rel");
    let text = fs::read_to_string(&factor).unwrap();
    let tampered: Vec<&str> = text.lines().take(text.lines().count() - 1).collect();
    fs::write(&factor, tampered.join("\n") + "\n").unwrap();
    let o = relred(dir.path(), &["verify", "hk"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stdout(&o).contains("valid: false"));
}

#[test]
fn every_reduction_verifies() {
    let dir = workspace();
    let runs: &[&[&str]] = &[
        &["reduce", "I4.rel", "--key", "1", "--out", "a"],
        &["reduce", "R.rel", "--fagin", "1:2|3", "--out", "b"],
        &["reduce", "I4.rel", "--hypostatic", "1", "--out", "c"],
        &["reduce", "--neg-join", "a", "1", "--out", "d"],
        &["reduce", "--identity-chain", "5", "--d", "3", "--out", "e"],
        &["explicate", "c", "--out", "f"],
        &["merge", "f", "--out", "g"],
    ];
    for args in runs {
        let o = relred(dir.path(), args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let out = args[args.len() - 1];
        assert_eq!(relred(dir.path(), &["verify", out]).status.code(), Some(0), "{args:?}");
    }
    let merged = stdout(&relred(dir.path(), &["verify", "g", "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&merged).unwrap();
    assert_eq!(v["class"]["ternaries"], 2);
}

#[test]
fn exit_codes() {
    let dir = workspace();
    fs::write(dir.path().join("bad.rel"), "@relation X over D(a,b)\n1 2\na z\n").unwrap();
    assert_eq!(relred(dir.path(), &["analyze", "bad.rel", "--degenerate"]).status.code(), Some(2));
    let o = relred(dir.path(), &["--format", "json", "reduce", "H.rel", "--key", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["refused"]["precondition"], "not-a-key");
    assert_eq!(relred(dir.path(), &["census", "--d", "2", "--n", "5"]).status.code(), Some(4));
    let o = Command::new(env!("CARGO_BIN_EXE_relred"))
        .current_dir(dir.path())
        .env("RELRED_CAPS", "census=4")
        .args(["census", "--d", "2", "--n", "3"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn census_is_stable_across_threads() {
    let dir = workspace();
    let one = relred(dir.path(), &["--threads", "1", "census", "--d", "2", "--n", "3"]);
    let four = relred(dir.path(), &["--threads", "4", "census", "--d", "2", "--n", "3"]);
    assert_eq!(stdout(&one), "d,n,total,degenerate,join_reducible,bound_ndeg,bound_njred\n2,3,256,82,166,192,4096\n");
    assert_eq!(one.stdout, four.stdout);
    let a = relred(dir.path(), &["--threads", "1", "census", "--d", "2", "--n", "4", "--sample", "300"]);
    let b = relred(dir.path(), &["--threads", "3", "census", "--d", "2", "--n", "4", "--sample", "300"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn diagrams_are_byte_stable() {
    let dir = workspace();
    fs::write(dir.path().join("f.txt"), "exists t . P(x1) & Q(x1,t) & R(t,x2)\n").unwrap();
    for kind in ["projoin", "bonding", "bond"] {
        let a = relred(dir.path(), &["diagram", "f.txt", "--kind", kind]);
        let b = relred(dir.path(), &["diagram", "f.txt", "--kind", kind]);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout);
    }
    let o = relred(dir.path(), &["diagram", "f.txt", "--dot", "out.dot"]);
    assert!(stdout(&o).starts_with("V="));
    assert!(fs::read_to_string(dir.path().join("out.dot")).unwrap().starts_with("digraph bonding {"));
}

#[test]
fn evaluation_and_reports() {
    let dir = workspace();
    fs::write(dir.path().join("f.txt"), "exists t . P(x,t) & Q(t,y)").unwrap();
    fs::write(dir.path().join("P.rel"), "@relation P over D(a,b)\n1 2\na b\n").unwrap();
    fs::write(dir.path().join("Q.rel"), "@relation Q over D(a,b)\n1 2\nb a\nb b\n").unwrap();
    let o = relred(dir.path(), &["eval", "f.txt", "--env", "P.rel", "Q.rel"]);
    assert_eq!(stdout(&o), "@relation value over D(a,b)\nx y\na a\na b\n");

    let o = relred(dir.path(), &["--format", "json", "ternarity", "H.rel"]);
    let t: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((t["lower"].as_u64(), t["upper"].as_u64()), (Some(4), Some(4)));

    let o = relred(dir.path(), &["deps", "H.rel", "--keys", "2"]);
    assert_eq!(stdout(&o).lines().count(), 6);
    let o = relred(dir.path(), &["deps", "R.rel", "--mvd", "1:2|3"]);
    assert!(stdout(&o).contains("holds"));
    let o = relred(dir.path(), &["analyze", "H.rel", "--relprod2", "1,3"]);
    assert_eq!(stdout(&o), "relative-product-of-two: no\n");
}
