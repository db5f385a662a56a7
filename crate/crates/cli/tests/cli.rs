use std::path::{Path, PathBuf};
use std::process::Command;

/// Scratch directory removed on drop.
struct TempDir(PathBuf);

impl TempDir {
    fn new(name: &str) -> Self {
        let p = std::env::temp_dir().join(format!("gcmf-cli-{}-{name}", std::process::id()));
        let _ = std::fs::remove_dir_all(&p);
        std::fs::create_dir_all(&p).unwrap();
        TempDir(p)
    }

    fn path(&self) -> &Path {
        &self.0
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn gcmf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gcmf"))
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

fn stdout_of(args: &[&str], config: &PathBuf) -> (i32, String) {
    let out = gcmf().args(args).arg("--config").arg(config).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

fn table_rows(text: &str) -> Vec<(String, f64, usize)> {
    text.lines()
        .skip_while(|l| *l != "coarse,probability,count")
        .skip(1)
        .take_while(|l| !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

const EXAMPLE: &str = "group = [[2, 2], [2, 1]]\nsubgroup = [1, 1]\nmu = [[0, 1], [0, 0]]\nn = 3\n";

#[test]
fn verify_abelian_example_passes() {
    let dir = TempDir::new("verify_abelian_example_passes");
    let cfg = write_config(&dir, "c.toml", EXAMPLE);
    let (code, out) = stdout_of(&["verify-abelian"], &cfg);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("summary passed=10 total=10"));
    assert!(!out.contains("FAIL"));
}

#[test]
fn verify_abelian_trivial_group() {
    let dir = TempDir::new("verify_abelian_trivial_group");
    let cfg = write_config(&dir, "c.toml", "group = []\n");
    let (code, _) = stdout_of(&["verify-abelian"], &cfg);
    assert_eq!(code, 0);
}

#[test]
fn unreduced_mu_is_a_config_error() {
    let dir = TempDir::new("unreduced_mu_is_a_config_error");
    let cfg = write_config(&dir, "c.toml", "group = [[2, 2], [2, 1]]\nsubgroup = [1, 1]\nmu = [[0, 2], [0, 0]]\n");
    assert_eq!(code(gcmf().arg("verify-abelian").arg("--config").arg(&cfg)), 2);
}

#[test]
fn schema_errors_exit_two() {
    let dir = TempDir::new("schema_errors_exit_two");
    let unknown = write_config(&dir, "a.toml", "groop = [[2, 1]]\n");
    assert_eq!(code(gcmf().arg("run-abelian").arg("--config").arg(&unknown)), 2);
    let missing = write_config(&dir, "b.toml", "n = 3\n");
    assert_eq!(code(gcmf().arg("run-abelian").arg("--config").arg(&missing)), 2);
    let kind = write_config(&dir, "c.toml", "kind = \"cluster\"\n");
    assert_eq!(code(gcmf().arg("run-d8").arg("--config").arg(&kind)), 2);
    assert_eq!(code(gcmf().arg("run-d8").arg("--config").arg(dir.path().join("absent.toml"))), 2);
}

#[test]
fn spt_table_n4() {
    let dir = TempDir::new("spt_table_n4");
    let cfg = write_config(&dir, "c.toml", "kind = \"spt\"\nn = 4\n");
    let (code, out) = stdout_of(&["run-d8", "--out", dir.path().join("t.txt").to_str().unwrap()], &cfg);
    assert_eq!(code, 0);
    let rows = table_rows(&out);
    assert_eq!(rows.len(), 16);
    for (s, p, _) in &rows {
        let odd = s.chars().filter(|&c| c == 'f').count() % 2 == 1;
        let want = if odd { 0.0 } else { 0.125 };
        assert!((p - want).abs() < 1e-10, "{s}: {p}");
    }
    assert!(out.contains("success=1.000000000000e0"));
    let records = std::fs::read_to_string(dir.path().join("t.txt")).unwrap();
    assert!(records.lines().all(|l| l.starts_with("round1=")));
}

#[test]
fn ghz_table_n3_is_flat_over_even_strings() {
    let dir = TempDir::new("ghz_table_n3_is_flat_over_even_strings");
    let cfg = write_config(&dir, "c.toml", "kind = \"ghz\"\nn = 3\n");
    let (code, out) = stdout_of(&["run-d8", "--out", dir.path().join("t.txt").to_str().unwrap()], &cfg);
    assert_eq!(code, 0);
    let nonzero: Vec<_> = table_rows(&out).into_iter().filter(|r| r.1 > 1e-12).collect();
    assert_eq!(nonzero.len(), 4);
    for (s, p, _) in nonzero {
        assert_eq!(s.chars().filter(|&c| c == 'f').count() % 2, 0);
        assert!((p - 0.25).abs() < 1e-10);
    }
}

#[test]
fn zero_trials_give_empty_transcript() {
    let dir = TempDir::new("zero_trials_give_empty_transcript");
    let cfg = write_config(&dir, "c.toml", "kind = \"spt\"\nn = 4\nmode = \"sample\"\ntrials = 0\n");
    let t = dir.path().join("t.txt");
    let (code, out) = stdout_of(&["run-d8", "--out", t.to_str().unwrap()], &cfg);
    assert_eq!(code, 0);
    assert!(table_rows(&out).is_empty());
    assert_eq!(std::fs::read_to_string(t).unwrap(), "");
}

#[test]
fn sample_reports_are_byte_identical() {
    let dir = TempDir::new("sample_reports_are_byte_identical");
    let cfg = write_config(&dir, "c.toml", "kind = \"ghz\"\nn = 3\nmode = \"sample\"\ntrials = 40\nseed = 11\n");
    let a = gcmf().arg("run-d8").arg("--config").arg(&cfg).output().unwrap();
    let b = gcmf().arg("run-d8").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(a.stdout, b.stdout);
    let c = gcmf().arg("run-d8").arg("--config").arg(&cfg).args(["--seed", "12"]).output().unwrap();
    assert_ne!(a.stdout, c.stdout);

    let ab = write_config(&dir, "ab.toml", "group = [[2, 1], [2, 1]]\nmu = [[0, 1], [0, 0]]\nn = 4\nmode = \"sample\"\ntrials = 25\nseed = 3\n");
    let x = gcmf().arg("run-abelian").arg("--config").arg(&ab).output().unwrap();
    let y = gcmf().arg("run-abelian").arg("--config").arg(&ab).output().unwrap();
    assert_eq!(x.status.code(), Some(0));
    assert_eq!(x.stdout, y.stdout);
    let records = String::from_utf8(x.stdout).unwrap();
    assert_eq!(records.lines().filter(|l| l.starts_with("outcomes=")).count(), 25);
}

#[test]
fn trials_flag_overrides_config() {
    let dir = TempDir::new("trials_flag_overrides_config");
    let cfg = write_config(&dir, "c.toml", "kind = \"spt\"\nn = 3\nmode = \"sample\"\ntrials = 30\n");
    let t = dir.path().join("t.txt");
    assert!(gcmf().arg("run-d8").arg("--config").arg(&cfg).args(["--trials", "7", "--out"]).arg(&t).output().unwrap().status.success());
    assert_eq!(std::fs::read_to_string(t).unwrap().lines().count(), 7);
}

#[test]
fn phase_diagram_lists_every_label() {
    let dir = TempDir::new("phase_diagram_lists_every_label");
    let cfg = write_config(&dir, "c.toml", "group = [[2, 2], [2, 1]]\n");
    let (code, out) = stdout_of(&["phase-diagram"], &cfg);
    assert_eq!(code, 0);
    let g = gcmf::group_core::GroupSpec::new(&[(2, 2), (2, 1)]).unwrap();
    let labels = gcmf::group_core::enumerate_phase_labels(&g).len();
    assert_eq!(out.lines().count(), labels + 1);
    assert!(out.lines().skip(1).all(|l| l.ends_with(",PASS")));
}

#[test]
fn lift_check_passes() {
    let dir = TempDir::new("lift_check_passes");
    let cfg = write_config(&dir, "c.toml", EXAMPLE);
    let (code, out) = stdout_of(&["lift-check"], &cfg);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("check locc_obstruction.d8"));
}
