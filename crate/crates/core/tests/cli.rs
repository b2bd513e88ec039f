use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cartan_synth::matcore;
use cartan_synth::synth::{FactorizationJson, MatrixJson};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cartan-synth"))
        .args(args)
        .env_remove("CARTAN_SYNTH_TOL")
        .output()
        .expect("binary runs")
}

fn read_output(path: &Path) -> FactorizationJson {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn swap_decomposes_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("swap.json");
    let swap = fixture("swap8.json");
    let res = cli(&[
        "--scheme",
        "ccd-new",
        "--qubits",
        "3",
        "--input",
        swap.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--verify",
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let f = read_output(&out);
    let report = f.report.expect("report attached");
    assert!(report.passed);
    assert!(report.reconstruction_error <= 1e-10);
    assert!(!f.leaves.is_empty());
    assert!(f.leaves.iter().all(|l| l.label.starts_with('L')));
}

#[test]
fn identity_has_empty_leaf_list() {
    let id = fixture("identity8.json");
    let res = cli(&["--scheme", "kg", "--qubits", "3", "--input", id.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let f: FactorizationJson = serde_json::from_slice(&res.stdout).unwrap();
    assert!(f.leaves.is_empty());
    assert!(f.report.is_none());
}

#[test]
fn random_two_qubit_input_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = matcore::expm_skew(&matcore::random_skew_hermitian(4, &mut rng));
    let input = dir.path().join("random4.json");
    std::fs::write(&input, serde_json::to_string(&MatrixJson::from_matrix(&u)).unwrap()).unwrap();
    let res = cli(&["--scheme", "ccd-new", "--qubits", "2", "--input", input.to_str().unwrap(), "--verify"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let f: FactorizationJson = serde_json::from_slice(&res.stdout).unwrap();
    assert!(f.report.unwrap().reconstruction_error <= 1e-8);
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let finagler = fixture("finagler.json");
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}.json"));
        let res = cli(&[
            "--scheme",
            "ccd-new",
            "--input",
            finagler.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
            "--verify",
            "--emit-matrices",
        ]);
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let f: FactorizationJson = serde_json::from_slice(&outputs[0]).unwrap();
    assert!(f.leaves.iter().all(|l| l.matrix.is_some()));
}

#[test]
fn verification_failure_still_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pruned.json");
    let swap = fixture("swap8.json");
    // pruning everything leaves the identity, which cannot reproduce the shift
    let res = cli(&[
        "--scheme",
        "ccd-new",
        "--qubits",
        "3",
        "--input",
        swap.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--prune-tol",
        "10",
        "--verify",
    ]);
    assert_eq!(res.status.code(), Some(2));
    let report = read_output(&out).report.expect("report written");
    assert!(!report.passed);
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let swap = fixture("swap8.json");
    let res = cli(&["--scheme", "ccd-new", "--qubits", "2", "--input", swap.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("dimension mismatch"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"n": 2, "entries": [[1,0],[1,0],[0,0],[1,0]]}"#).unwrap();
    let res = cli(&["--scheme", "ccd-new", "--qubits", "1", "--input", bad.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("not unitary"));

    let res = cli(&["--scheme", "ccd-new", "--qubits", "3"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn tolerance_from_environment() {
    let id = fixture("identity8.json");
    let run = |tol: &str| {
        Command::new(env!("CARGO_BIN_EXE_cartan-synth"))
            .args(["--scheme", "kg", "--qubits", "3", "--input", id.to_str().unwrap()])
            .env("CARTAN_SYNTH_TOL", tol)
            .output()
            .unwrap()
    };
    assert_eq!(run("1e-10").status.code(), Some(0));
    assert_eq!(run("not-a-number").status.code(), Some(1));
}
