use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
strategies = ["random", "heal"]
batch_size = 20
n_init = 20
seeds = [0]
label_budget = 80
output = "out"

[dataset]
kind = "blobs"
classes = 4
features = 8
train_per_class = 50
test_per_class = 20
seed = 9

[ensemble]
dim = 512
members = 4
bandwidth = 0.35
"#;

const ENTROPY: &str = r#"
seeds = [0]
bins = 10

[ensemble]
dim = 500
members = 4
bandwidth = 0.18
"#;

fn hdal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdal")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", CONFIG);
    let out = hdal(&["run", &config]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out_dir = dir.path().join("out");
    for file in ["manifest.json", "pairwise.csv", "curve_random_seed0.csv", "curve_heal_seed0.csv"] {
        assert!(out_dir.join(file).exists(), "{file} missing");
    }
    assert!(String::from_utf8_lossy(&out.stdout).contains("2/2 runs complete"));
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (CONFIG.replace("batch_size = 20", "batchsize = 20"), "batchsize"),
        (CONFIG.replace("batch_size = 20", "batch_size = \"twenty\""), "batch_size"),
        (CONFIG.replace("members = 4", "members = 4\nmembrs = 2"), "membrs"),
        (CONFIG.replace("batch_size = 20", "batch_size = 0"), "batch_size"),
    ];
    for (text, key) in cases {
        let config = write_config(dir.path(), "bad.toml", &text);
        let out = hdal(&["run", &config]);
        assert!(!out.status.success());
        assert!(stderr(&out).contains(key), "expected `{key}` in: {}", stderr(&out));
    }
    let out = hdal(&["run", &dir.path().join("missing.toml").to_string_lossy()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("missing.toml"));
}

#[test]
fn resume_completes_remaining_rounds() {
    let full = tempfile::tempdir().unwrap();
    let config = write_config(full.path(), "run.toml", CONFIG);
    assert!(hdal(&["run", &config]).status.success());

    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", CONFIG);
    let out = hdal(&["run", &config, "--max-rounds", "2", "--workers", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0/2 runs complete"));
    let timing = dir.path().join("out/timing_heal_seed0.csv");
    let early = fs::read_to_string(&timing).unwrap();

    let out = hdal(&["run", &config, "--resume"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(fs::read_to_string(&timing).unwrap().starts_with(&early));
    for file in ["curve_random_seed0.csv", "curve_heal_seed0.csv", "pairwise.csv"] {
        assert_eq!(
            fs::read(dir.path().join("out").join(file)).unwrap(),
            fs::read(full.path().join("out").join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn entropy_hist_prints_three_modes_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "entropy.toml", &format!("output = \"hist\"\n{ENTROPY}"));
    let first = hdal(&["entropy-hist", &config]);
    assert!(first.status.success(), "{}", stderr(&first));
    let text = String::from_utf8_lossy(&first.stdout).into_owned();
    for mode in ["none", "combined", "isolated"] {
        assert!(text.contains(&format!("# prior_mode={mode} ")), "{text}");
        assert!(dir.path().join(format!("hist/entropy_{mode}.csv")).exists());
        // One row per bin.
        assert_eq!(text.lines().filter(|l| l.starts_with(&format!("{mode},"))).count(), 10);
    }
    let second = hdal(&["entropy-hist", &config]);
    assert_eq!(first.stdout, second.stdout);

    let bad = write_config(dir.path(), "bad.toml", &ENTROPY.replace("bins = 10", "binz = 10"));
    let out = hdal(&["entropy-hist", &bad]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("binz"));
}

#[test]
fn serve_rejects_unwritable_state_dir() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"").unwrap();
    let state_dir = blocker.join("sessions");
    let out = hdal(&["serve", "--addr", "127.0.0.1:0", "--state-dir", &state_dir.to_string_lossy()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("state dir"), "{}", stderr(&out));
}

#[test]
fn serve_rejects_busy_port() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let dir = tempfile::tempdir().unwrap();
    let out = hdal(&["serve", "--addr", &addr, "--state-dir", &dir.path().to_string_lossy()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("cannot listen"), "{}", stderr(&out));
}
