use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cdqc::experiment::{self, CSV_HEADER};
use cdqc::problems::{Family, ProblemInstance};
use tempfile::TempDir;

const TWO_QUBIT: &str = "\
# hand-written: h_final = 0.5 Z0 - Z0 Z1, ground state |11>
family=random_qubo
n_qubits=2
seed=7
[params]
coeff 0 0.5
coeff 0,1 -1.0
[h_initial]
n_qubits=2
XI -1.0 0.0
IX -1.0 0.0
[h_final]
n_qubits=2
ZI 0.5 0.0
ZZ -1.0 0.0
[end]
";

fn cdqc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdqc"))
        .args(args)
        .current_dir(dir)
        .env_remove("CDQC_WORKERS")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

const TINY: &str = "\
family = \"random_qubo\"
n_qubits = 3
ensemble_size = 2
orders = [0, 1]
workers = 3
[t_grid]
values = [0.05, 2.0]
[integrator]
n_samples = 41
[output]
csv = \"rows.csv\"
summary = \"summary.csv\"
series = \"series.csv\"
";

#[test]
fn run_writes_fixed_schema_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "tiny.toml", TINY);
    let out = cdqc(&["run", "tiny.toml"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let first = fs::read(dir.path().join("rows.csv")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
    assert!(dir.path().join("summary.csv").exists());
    assert!(dir.path().join("series.csv").exists());

    let out = Command::new(env!("CARGO_BIN_EXE_cdqc"))
        .args(["run", "tiny.toml", "--out", "again.csv"])
        .current_dir(dir.path())
        .env("CDQC_WORKERS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(fs::read(dir.path().join("again.csv")).unwrap(), first);
}

#[test]
fn bad_config_exits_one() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "bad.toml", "family = \"random_qubo\"\norders = [1, 1]\n");
    let out = cdqc(&["run", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("distinct"), "{}", stderr(&out));
    let out = cdqc(&["run", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    write(dir.path(), "env.toml", TINY);
    let out = Command::new(env!("CARGO_BIN_EXE_cdqc"))
        .args(["run", "env.toml"])
        .current_dir(dir.path())
        .env("CDQC_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn hand_written_instance_runs_end_to_end() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "two.txt", TWO_QUBIT);
    write(
        dir.path(),
        "two.toml",
        "instance_files = [\"two.txt\"]\norders = [0, 1, 2]\n[t_grid]\nvalues = [0.05, 50.0]\n[output]\ncsv = \"two.csv\"\n",
    );
    let out = cdqc(&["run", "two.toml"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = experiment::read_rows_csv(fs::File::open(dir.path().join("two.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert_eq!((r.instance_seed, r.n_qubits), (7, 2));
        assert!(r.tau_qsl <= r.total_time);
        if r.t_delta == 50.0 {
            assert!(r.p_success > 0.99, "{r:?}");
        }
    }
}

#[test]
fn gapless_instance_is_flagged_with_exit_two() {
    let dir = TempDir::new().unwrap();
    let flat = TWO_QUBIT
        .replace("coeff 0 0.5\ncoeff 0,1 -1.0\n", "")
        .replace("ZI 0.5 0.0\nZZ -1.0 0.0\n", "");
    write(dir.path(), "flat.txt", &flat);
    write(
        dir.path(),
        "flat.toml",
        "instance_files = [\"flat.txt\"]\norders = [0]\n[t_grid]\nvalues = [1.0]\n",
    );
    let out = cdqc(&["run", "flat.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let rows = experiment::read_rows_csv(&out.stdout[..]).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].is_flagged());
    assert!(String::from_utf8_lossy(&out.stdout).lines().nth(1).unwrap().contains(",,"));
}

#[test]
fn single_edge_adiabatic_row() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "edge.toml",
        "family = \"max_cut\"\norders = [0]\n[params]\nedges = [[0, 1, 1.0]]\n[t_grid]\nvalues = [50.0]\n[integrator]\nn_steps = 400000\n",
    );
    let out = cdqc(&["run", "edge.toml"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = experiment::read_rows_csv(&out.stdout[..]).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].p_success >= 0.99, "{:?}", rows[0]);
}

#[test]
fn dump_and_load_round_trip() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "q.toml", "family = \"random_4local\"\nn_qubits = 4\nseed_base = 3\n");
    let out = cdqc(&["dump-instance", "--config", "q.toml", "--index", "2", "--out", "i.txt"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("i.txt")).unwrap();
    let inst = ProblemInstance::from_text(&text).unwrap();
    assert_eq!((inst.family, inst.seed, inst.n_qubits), (Family::Random4Local, 5, 4));
    let out = cdqc(&["dump-instance", "--load", "i.txt"], dir.path());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), text);
    let reloaded = ProblemInstance::from_text(&text).unwrap();
    assert_eq!(reloaded.h_final, inst.h_final);
}

#[test]
fn truncated_instance_names_the_line() {
    let dir = TempDir::new().unwrap();
    let cut: String = TWO_QUBIT.lines().take(12).map(|l| format!("{l}\n")).collect();
    write(dir.path(), "cut.txt", &cut);
    let out = cdqc(&["dump-instance", "--load", "cut.txt"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 12"), "{}", stderr(&out));
}

#[test]
fn gamma_diagnostics_table() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "two.txt", TWO_QUBIT);
    let out = cdqc(&["gamma-diagnostics", "--instance", "two.txt", "-l", "2", "--points", "5"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "lambda,gamma_1,gamma_2,gamma_3,gamma_4,alpha_1,alpha_2,residual"
    );
    assert_eq!(lines.count(), 5);
}

#[test]
fn plots_every_kind_and_rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "tiny.toml", TINY);
    assert_eq!(cdqc(&["run", "tiny.toml"], dir.path()).status.code(), Some(0));
    for kind in ["cp-vs-tdelta", "cp-vs-success", "de-vs-t"] {
        let svg = format!("{kind}.svg");
        let out = cdqc(&["plot", "rows.csv", "--kind", kind, "--out", &svg], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        assert!(fs::read_to_string(dir.path().join(&svg)).unwrap().starts_with("<svg"));
    }
    let out = cdqc(&["plot", "series.csv", "--kind", "coherence-time", "--out", "ct.svg"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let rows = fs::read_to_string(dir.path().join("rows.csv")).unwrap();
    let header = rows.lines().next().unwrap();
    write(dir.path(), "empty.csv", &format!("{header}\n"));
    let out = cdqc(&["plot", "empty.csv", "--kind", "cp-vs-tdelta", "--out", "empty.svg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("empty.svg").exists());

    let single: String = rows.lines().take(2).map(|l| format!("{l}\n")).collect();
    write(dir.path(), "one.csv", &single);
    let out = cdqc(&["plot", "one.csv", "--kind", "cp-vs-tdelta", "--out", "one.svg"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(dir.path().join("one.svg")).unwrap().matches("<circle").count(), 1);

    write(dir.path(), "bad.csv", &rows.replacen("C_P", "coherence", 1));
    let out = cdqc(&["plot", "bad.csv", "--kind", "cp-vs-tdelta", "--out", "bad.svg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("missing columns [\"C_P\"]"), "{}", stderr(&out));
    assert!(!dir.path().join("bad.svg").exists());
}
