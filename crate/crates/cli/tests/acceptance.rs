//! Acceptance criterion 11: every command repeated with identical inputs and
//! seed produces byte-identical output files.

use std::path::{Path, PathBuf};
use std::process::Command;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run_ok(args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_hfsolve"))
        .args(args)
        .output()
        .expect("spawn hfsolve");
    out.status.code().expect("exit code")
}

#[test]
fn acceptance_11_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let molecule = fixture("he6.molecule.json");
    let basis = fixture("he6.basis.json");
    let m = molecule.to_str().unwrap();
    let b = basis.to_str().unwrap();

    let rec = dir.path().join("rec.json");
    let mut commands: Vec<(&str, Vec<String>)> = Vec::new();
    commands.push((
        "scf",
        vec![
            "scf", "--molecule", m, "--basis", b, "--seed", "11", "--out",
        ]
        .into_iter()
        .map(String::from)
        .collect(),
    ));
    commands.push((
        "search",
        vec![
            "search", "--molecule", m, "--basis", b, "--seed", "11", "--n-starts", "4", "--out",
        ]
        .into_iter()
        .map(String::from)
        .collect(),
    ));
    commands.push((
        "threshold",
        vec![
            "threshold", "--molecule", m, "--basis", b, "--seed", "11", "--n-starts", "3", "--out",
        ]
        .into_iter()
        .map(String::from)
        .collect(),
    ));

    for (name, args) in &commands {
        let out1 = dir.path().join(format!("{name}.1.json"));
        let out2 = dir.path().join(format!("{name}.2.json"));
        for out in [&out1, &out2] {
            let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
            full.push(out.to_str().unwrap());
            assert_eq!(run_ok(&full), 0, "command {name} failed");
        }
        assert_eq!(
            std::fs::read(&out1).unwrap(),
            std::fs::read(&out2).unwrap(),
            "{name} outputs differ"
        );
    }

    // analyze and continue consume the scf record
    assert_eq!(
        run_ok(&[
            "scf", "--molecule", m, "--basis", b, "--seed", "11", "--out",
            rec.to_str().unwrap(),
        ]),
        0
    );
    for (name, extra) in [
        ("analyze", vec!["--record", rec.to_str().unwrap()]),
        (
            "continue",
            vec![
                "--record",
                rec.to_str().unwrap(),
                "--direction",
                "phase",
                "--steps",
                "5",
            ],
        ),
    ] {
        let out1 = dir.path().join(format!("{name}.1.json"));
        let out2 = dir.path().join(format!("{name}.2.json"));
        for out in [&out1, &out2] {
            let mut args = vec![name, "--molecule", m, "--basis", b, "--seed", "11"];
            args.extend(extra.iter());
            args.push("--out");
            args.push(out.to_str().unwrap());
            assert_eq!(run_ok(&args), 0, "command {name} failed");
        }
        assert_eq!(
            std::fs::read(&out1).unwrap(),
            std::fs::read(&out2).unwrap(),
            "{name} outputs differ"
        );
    }
    println!("ACCEPTANCE 11 (byte-identical outputs for scf/search/threshold/analyze/continue): PASS");
}
