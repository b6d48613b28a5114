//! End-to-end checks of the `qlam` binary: subcommands, exit codes and the
//! stability of machine output.

use std::path::PathBuf;
use std::process::{Command, Output};

fn programs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../programs")
}

fn qlam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlam"))
        .current_dir(programs())
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn check_teleport_against_its_type() {
    let out = qlam(&[
        "check",
        "teleport.qlam",
        "--type",
        "(qbit -o bit (*) bit) (*) (bit (*) bit -o qbit)",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("well-typed"));
}

#[test]
fn check_reports_documented_categories() {
    let out = qlam(&["check", "badgate.qlam"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("subtype mismatch"), "{}", stderr(&out));

    let out = qlam(&["check", "badpair.qlam"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("linearity violation"), "{}", stderr(&out));
    assert!(stderr(&out).contains("p0"));
}

#[test]
fn parse_errors_exit_2() {
    let dir = std::env::temp_dir().join("qlam-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let empty = dir.join("empty.qlam");
    std::fs::write(&empty, "").unwrap();
    let out = qlam(&["check", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = qlam(&["run", "no-such-file.qlam"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infer_prints_types_and_untypable() {
    let out = qlam(&["infer", "new_bit.qlam"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "qbit");

    let dir = std::env::temp_dir().join("qlam-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let selfapp = dir.join("selfapp.qlam");
    std::fs::write(&selfapp, "\\x.x x").unwrap();
    let out = qlam(&["infer", selfapp.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("untypable"));

    // The skeleton of the inferred type for \x.\y.x y.
    let curried = dir.join("curried.qlam");
    std::fs::write(&curried, "\\x.\\y.x y").unwrap();
    let out = qlam(&["infer", curried.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let shown = stdout(&out);
    let compact: String = shown.trim().replace('!', "").replace(['(', ')'], "");
    assert_eq!(compact, "X -o Y -o X -o Y", "unexpected skeleton in {shown}");
}

#[test]
fn explore_prints_the_distribution() {
    let out = qlam(&["explore", "plus_cbv.qlam", "--depth", "30"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "0 : 1.000000000");

    let out = qlam(&["explore", "plus_dup.qlam", "--depth", "30"]);
    let text = stdout(&out);
    assert!(text.contains("0 : 0.500000000"), "{text}");
    assert!(text.contains("1 : 0.500000000"), "{text}");
}

#[test]
fn run_requires_typing_unless_unsafe() {
    let out = qlam(&["run", "badpair.qlam"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--unsafe"));

    let out = qlam(&["run", "--unsafe", "badpair.qlam"]);
    assert_eq!(out.status.code(), Some(3));

    let out = qlam(&["run", "plus_cbv.qlam", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("result (value): 0"));
}

#[test]
fn consistency_verdicts() {
    let out = qlam(&["consistency", "plus_cbv.qlam", "--depth", "200"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("consistent"));

    let out = qlam(&["consistency", "badgate.qlam"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn machine_output_is_byte_identical_across_runs() {
    for args in [
        vec!["--machine", "explore", "plus_dup.qlam", "--depth", "30"],
        vec!["--machine", "run", "bell_meas.qlam", "--seed", "5"],
        vec!["--machine", "explore", "teleport.qlam", "--depth", "60"],
    ] {
        let a = qlam(&args);
        let b = qlam(&args);
        assert_eq!(a.status.code(), b.status.code());
        assert_eq!(stdout(&a), stdout(&b), "non-deterministic output for {args:?}");
        assert!(!stdout(&a).is_empty());
    }
}

#[test]
fn gate_table_files_extend_the_parser() {
    let dir = std::env::temp_dir().join("qlam-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let prog = dir.join("sgate.qlam");
    std::fs::write(&prog, "meas (S (H (new 0)))").unwrap();

    // Without the table S is a free variable, so the program is open.
    let out = qlam(&["run", prog.to_str().unwrap()]);
    assert_ne!(out.status.code(), Some(0));

    let out = qlam(&["--gates", "custom_gates.txt", "run", prog.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn explain_prints_a_derivation_tree() {
    let out = qlam(&["check", "id.qlam", "--type", "bit -o bit", "--explain"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("[lam1]"), "{text}");
    assert!(text.contains("[ax1]"), "{text}");
}

#[test]
fn infer_all_lists_alternative_decorations() {
    let dir = std::env::temp_dir().join("qlam-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let prog = dir.join("curried2.qlam");
    std::fs::write(&prog, "\\x.\\y.x y").unwrap();
    let out = qlam(&["infer", prog.to_str().unwrap(), "--all"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.lines().count() > 2, "expected several decorations:\n{text}");
    assert!(text.contains("(X -o Y) -o X -o Y"), "fully linear variant missing:\n{text}");
}
