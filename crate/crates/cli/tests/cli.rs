use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use levi_cli::Manifest;
use levi_core::bounds::ValidationReport;

const ATOMS: &str = r#"atoms = [
    { direction = [1.0], weight = 0.3183098861837907 },
    { direction = [-1.0], weight = 0.3183098861837907 },
]"#;

fn config(modulation: &str, points: usize, nodes: usize, validation: &str) -> String {
    format!(
        r#"[problem]
d = 1
alpha = 1.0
gamma = 1.0
m0 = 2.0
{ATOMS}
modulation = {modulation}

[grid]
half_width = 10.0
points = {points}

[time]
horizon = 1.0
nodes = {nodes}

{validation}

[output]
directory = "out"
formats = ["csv"]
"#
    )
}

const CAUCHY: &str = r#"{ family = "constant" }"#;
const COSINE: &str = r#"{ family = "cosine", amplitude = 0.3, wavevector = [0.3141592653589793], factors = [1.0, 1.0] }"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn levi(args: &[&str], cache_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_levi"));
    cmd.args(args).env_remove("LEVI_CACHE_DIR");
    if let Some(dir) = cache_env {
        cmd.env("LEVI_CACHE_DIR", dir);
    }
    cmd.output().unwrap()
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&fs::read_to_string(dir.join("out/manifest.json")).unwrap()).unwrap()
}

#[test]
fn cauchy_run_passes_degeneration() {
    let dir = tempfile::tempdir().unwrap();
    let validation = "[validation]\nchecks = [\"degeneration\", \"mass\", \"chapman_kolmogorov\"]";
    let cfg = write_config(dir.path(), &config(CAUCHY, 64, 8, validation));
    let out = levi(&["run", cfg.to_str().unwrap(), "--no-cache"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("out/report.json")).unwrap();
    let report: ValidationReport = serde_json::from_str(&text).unwrap();
    assert!(report.passed);
    assert!(report.check("degeneration").unwrap().passed);
    assert!(report.metadata.config_hash.is_some());
    assert!(report.metadata.tolerances.contains_key("eps_quad"));
    // re-serializing the parsed report reproduces every number
    let again: ValidationReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(again, report);
    let csv = fs::read_to_string(dir.path().join("out/p_t1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 64 * 64 + 1);
    assert_eq!(csv.lines().next(), Some("t,x,y,value"));
}

#[test]
fn failed_check_exits_with_one_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let validation = "[validation]\nchecks = [\"mass\", \"cross_method\"]\n\n[validation.tolerances]\ncross_method = 0.0";
    let cfg = write_config(dir.path(), &config(COSINE, 64, 8, validation));
    let out = levi(&["run", cfg.to_str().unwrap(), "--no-cache", "--export", "report"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cross_method"));
    assert!(!dir.path().join("out/p_t1.csv").exists());
    assert_eq!(manifest(dir.path()).failing_checks, vec!["cross_method".to_string()]);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &config(CAUCHY, 64, 8, "").replace("points = 64", "points = 64\npionts = 1"));
    let out = levi(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pionts"));
    let cfg = write_config(dir.path(), &config(CAUCHY, 64, 8, "").replace("alpha = 1.0", "alpha = 2.0"));
    let out = levi(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    let out = levi(&["run", dir.path().join("missing.toml").to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn warm_cache_reproduces_the_cold_run() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("kc");
    let cfg = write_config(dir.path(), &config(COSINE, 256, 16, "[validation]\nchecks = [\"mass\"]"));
    let cold = levi(&["run", cfg.to_str().unwrap(), "--export", "kernels"], Some(&cache));
    assert_eq!(cold.status.code(), Some(0), "{}", String::from_utf8_lossy(&cold.stderr));
    let m1 = manifest(dir.path());
    let csv1 = fs::read(dir.path().join("out/p_t1.csv")).unwrap();
    assert_eq!((m1.cache.hits, m1.cache.misses), (0, 16));
    assert_eq!(m1.cache.directory.as_deref(), Some(cache.as_path()));

    let warm = levi(&["run", cfg.to_str().unwrap(), "--export", "kernels"], Some(&cache));
    assert_eq!(warm.status.code(), Some(0));
    let m2 = manifest(dir.path());
    assert_eq!((m2.cache.hits, m2.cache.misses), (16, 0));
    assert_eq!(fs::read(dir.path().join("out/p_t1.csv")).unwrap(), csv1);
    let speedup = m1.frozen_stage_seconds / m2.frozen_stage_seconds;
    assert!(speedup >= 5.0, "frozen stage {:.4}s cold, {:.4}s warm", m1.frozen_stage_seconds, m2.frozen_stage_seconds);

    // the flag overrides the environment
    let other = dir.path().join("other");
    let flagged = levi(&["run", cfg.to_str().unwrap(), "--export", "kernels", "--cache-dir", other.to_str().unwrap()], Some(&cache));
    assert_eq!(flagged.status.code(), Some(0));
    assert_eq!(manifest(dir.path()).cache.misses, 16);
    assert!(other.join(&m1.config_hash).is_dir());
}

#[test]
fn corrupt_cache_entry_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("kc");
    let cfg = write_config(dir.path(), &config(COSINE, 64, 8, "[validation]\nchecks = [\"mass\"]"));
    assert_eq!(levi(&["run", cfg.to_str().unwrap()], Some(&cache)).status.code(), Some(0));
    let hash = manifest(dir.path()).config_hash;
    let entry = cache.join(hash).join("p0-00003.bin");
    let mut bytes = fs::read(&entry).unwrap();
    let k = bytes.len() / 2;
    bytes[k] ^= 1;
    fs::write(&entry, bytes).unwrap();
    let out = levi(&["run", cfg.to_str().unwrap()], Some(&cache));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt cache entry"));
}

#[test]
fn uncached_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &config(COSINE, 64, 8, "[validation]\nchecks = [\"mass\"]"));
    let mut outputs = Vec::new();
    for threads in ["1", "2"] {
        let out = levi(&["run", cfg.to_str().unwrap(), "--no-cache", "--threads", threads], None);
        assert_eq!(out.status.code(), Some(0));
        outputs.push(fs::read(dir.path().join("out/p_t1.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["cauchy.toml", "cosine03.toml"] {
        let c = levi_cli::ExperimentConfig::load(&dir.join(name)).unwrap();
        c.experiment().unwrap();
    }
}

#[test]
fn help_documents_exit_codes() {
    let out = levi(&["run", "--help"], None);
    let text = String::from_utf8_lossy(&out.stdout);
    for needle in ["0  every", "1  at least", "2  configuration", "3  numerical", "LEVI_CACHE_DIR"] {
        assert!(text.contains(needle), "{needle}");
    }
}
