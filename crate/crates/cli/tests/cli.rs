use std::path::PathBuf;
use std::process::{Command, Output};

fn acg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acg"))
        .args(args)
        .env("ACG_THREADS", "2")
        .output()
        .expect("spawn acg")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acg-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field<'a>(report: &'a str, key: &str) -> Option<&'a str> {
    report.lines().find_map(|l| l.strip_prefix(key)?.strip_prefix(" = "))
}

const NEAR_POVM: &str = "dim 2\n1.1 0\n0 -0.1\ndim 2\n-0.1 0\n0 1.1\n";

#[test]
fn classical_chsh_is_three_quarters() {
    let o = acg(&["classical", "--game", "builtin:chsh"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&stdout(&o), "value"), Some("3/4"));
}

#[test]
fn value_of_tsirelson_strategy() {
    let o = acg(&["value", "--game", "builtin:chsh", "--strategy", "builtin:tsirelson"]);
    assert_eq!(o.status.code(), Some(0));
    let v: f64 = field(&stdout(&o), "value").unwrap().parse().unwrap();
    assert!((v - (2.0 + 2f64.sqrt()) / 4.0).abs() < 1e-9);
}

#[test]
fn value_from_files_matches_builtins() {
    let game = scratch("chsh.game");
    let strat = scratch("tsirelson.strat");
    std::fs::write(&game, acg_core::game::make_chsh().serialize()).unwrap();
    std::fs::write(
        &strat,
        acg_core::strategy::serialize_strategy(&acg_core::strategy::tsirelson_strategy()),
    )
    .unwrap();
    let a = acg(&[
        "value",
        "--game",
        game.to_str().unwrap(),
        "--strategy",
        strat.to_str().unwrap(),
    ]);
    let b = acg(&["value", "--game", "builtin:chsh", "--strategy", "builtin:tsirelson"]);
    assert_eq!(field(&stdout(&a), "value"), field(&stdout(&b), "value"));
}

#[test]
fn toy_parity_one_times_out_with_exit_3() {
    let o = acg(&["semidecide", "--family", "toy", "--z", "1", "--budget", "1000"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(field(&stdout(&o), "outcome"), Some("timeout"));
}

#[test]
fn witness_round_trip_and_tampering() {
    let w = scratch("toy.witness");
    let o = acg(&[
        "semidecide",
        "--family",
        "toy",
        "--z",
        "01",
        "--budget",
        "10",
        "--witness-out",
        w.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = acg(&["verify", "--witness", w.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(0));
    assert_eq!(field(&stdout(&v), "verified"), Some("true"));

    let text = std::fs::read_to_string(&w).unwrap();
    let tampered = text.replacen("bound 1/1", "bound 2/1", 1);
    assert_ne!(tampered, text);
    let bad = scratch("toy-bad.witness");
    std::fs::write(&bad, tampered).unwrap();
    let v = acg(&["verify", "--witness", bad.to_str().unwrap()]);
    assert_eq!(v.status.code(), Some(2));
    assert_eq!(field(&stdout(&v), "verified"), Some("false"));
}

#[test]
fn invalid_inputs_exit_2() {
    let bad = scratch("bad.game");
    std::fs::write(&bad, "game broken\nquestions 2\n").unwrap();
    for args in [
        vec!["classical", "--game", bad.to_str().unwrap()],
        vec!["classical", "--game", "/nonexistent/file.game"],
        vec!["classical", "--game", "builtin:nope"],
        vec!["optimize", "--game", "builtin:chsh", "--delta", "3/2"],
        vec!["optimize", "--game", "builtin:chsh", "--mode", "sideways"],
        vec!["semidecide", "--family", "toy", "--z", "012", "--budget", "5"],
        vec!["semidecide", "--family", "toy", "--budget", "0"],
        vec!["classical", "--game", "builtin:chsh", "--frobnicate"],
    ] {
        let o = acg(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn round_reports_distance() {
    let input = scratch("near.povm");
    std::fs::write(&input, NEAR_POVM).unwrap();
    let out = scratch("rounded.povm");
    let o = acg(&[
        "round",
        "--input",
        input.to_str().unwrap(),
        "--povm-out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r = stdout(&o);
    assert_eq!(field(&r, "k"), Some("2"));
    let phi: f64 = field(&r, "phi_k").unwrap().parse().unwrap();
    assert!((phi - 0.1).abs() < 1e-9);
    assert!(std::fs::read_to_string(out).unwrap().starts_with("dim 2"));
}

#[test]
fn output_flag_writes_the_same_report() {
    let path = scratch("classical.report");
    let o = acg(&[
        "classical",
        "--game",
        "builtin:chsh",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let direct = acg(&["classical", "--game", "builtin:chsh"]);
    assert_eq!(std::fs::read(path).unwrap(), direct.stdout);
}

#[test]
fn every_subcommand_is_deterministic() {
    let input = scratch("det.povm");
    std::fs::write(&input, NEAR_POVM).unwrap();
    let w = scratch("det.witness");
    acg(&[
        "semidecide",
        "--family",
        "chsh",
        "--budget",
        "200",
        "--witness-out",
        w.to_str().unwrap(),
    ]);
    let runs: Vec<Vec<&str>> = vec![
        vec!["value", "--game", "builtin:chsh", "--strategy", "builtin:tsirelson"],
        vec!["classical", "--game", "builtin:chsh"],
        vec![
            "optimize",
            "--game",
            "builtin:chsh",
            "--dims",
            "2,2",
            "--restarts",
            "2",
            "--seed",
            "3",
        ],
        vec![
            "optimize",
            "--game",
            "builtin:chsh",
            "--dims",
            "2",
            "--delta",
            "1/10",
            "--restarts",
            "2",
            "--max-iters",
            "150",
        ],
        vec!["round", "--input", input.to_str().unwrap()],
        vec!["semidecide", "--family", "chsh", "--budget", "200"],
        vec!["verify", "--witness", w.to_str().unwrap()],
    ];
    for args in runs {
        let a = acg(&args);
        let b = acg(&args);
        assert_eq!(a.status.code(), Some(0), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn thread_count_does_not_change_reports() {
    let args = ["semidecide", "--family", "chsh", "--budget", "200"];
    let seq = Command::new(env!("CARGO_BIN_EXE_acg"))
        .args(args)
        .env("ACG_THREADS", "0")
        .output()
        .unwrap();
    let par = Command::new(env!("CARGO_BIN_EXE_acg"))
        .args(args)
        .env("ACG_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(seq.stdout, par.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_acg"))
        .args(args)
        .env("ACG_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn every_subcommand_has_help() {
    let flags: &[(&str, &[&str])] = &[
        ("value", &["--game", "--strategy", "--output"]),
        ("classical", &["--game", "--output"]),
        (
            "optimize",
            &["--dims", "--delta", "--mode", "--restarts", "--seed", "--output"],
        ),
        ("round", &["--input", "--output"]),
        ("semidecide", &["--family", "--z", "--budget", "--output"]),
        ("verify", &["--witness", "--output"]),
    ];
    for (cmd, wanted) in flags {
        let o = acg(&[cmd, "--help"]);
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        for f in *wanted {
            assert!(text.contains(f), "{cmd} --help lacks {f}");
        }
    }
    assert_eq!(acg(&["--help"]).status.code(), Some(0));
}
