use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gmm_opt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmm-opt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_CLUSTERING: &str = r#"
problem = "clustering"
dataset = "gmm20"
k = 20
init = "forgy"
selector = "walk"
eta = 0.1
trials = 2
seed = 3
"#;

#[test]
fn gen_writes_gmm20_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gmm20.csv");
    let res = gmm_opt(&["gen", "gmm20", "--out", out.to_str().unwrap(), "--seed", "1"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1000);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 3);
}

#[test]
fn gen_writes_latent_shift_task_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("task.csv");
    let res = gmm_opt(&["gen", "latent-shift", "--out", out.to_str().unwrap(), "--task-n", "8"]);
    assert!(res.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x1,x2,y,true_shift");
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn cluster_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_CLUSTERING);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let res = gmm_opt(&["cluster", "run", "--config", &config, "--out", out.to_str().unwrap()]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        let stdout = String::from_utf8_lossy(&res.stdout);
        assert!(stdout.contains("hard-em") && stdout.contains("gmm-walk"), "{stdout}");
    }
    let a = fs::read(out_a.join("stats.json")).unwrap();
    let b = fs::read(out_b.join("stats.json")).unwrap();
    // The configs differ only in `out`, which is echoed; compare everything else.
    let strip = |bytes: &[u8]| {
        String::from_utf8_lossy(bytes)
            .lines()
            .filter(|l| !l.contains("\"out\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&a), strip(&b));
    assert!(out_a.join("results.csv").exists());
    assert!(out_a.join("traces").join("hard-em-eta1-trial000.csv").exists());
    let header = fs::read_to_string(out_a.join("traces").join("gmm-walk-eta0.1-trial001.csv")).unwrap();
    assert!(header.starts_with("t,objective,bound,v,d,latent_changes,wall_ms\n"));
}

#[test]
fn rerun_into_same_directory_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_CLUSTERING);
    let out = dir.path().join("run");
    let args = [
        "cluster",
        "run",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--trials",
        "1",
    ];
    assert!(gmm_opt(&args).status.success());
    let first = fs::read(out.join("stats.json")).unwrap();
    assert!(gmm_opt(&args).status.success());
    assert_eq!(first, fs::read(out.join("stats.json")).unwrap());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_CLUSTERING);
    let out = dir.path().join("o");
    let res = gmm_opt(&[
        "cluster",
        "run",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--selector",
        "greedy",
        "--eta",
        "1",
        "--trials",
        "1",
    ]);
    assert!(res.status.success());
    let stats = fs::read_to_string(out.join("stats.json")).unwrap();
    assert!(stats.contains("\"trials\": 1"));
    assert!(!stats.contains("gmm-walk"));
}

#[test]
fn sweep_writes_long_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_CLUSTERING);
    let out = dir.path().join("sweep");
    let res = gmm_opt(&[
        "sweep",
        "--config",
        &config,
        "--etas",
        "0.5,1.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "eta,trial,final_objective,iters");
    assert_eq!(lines.count(), 4);
}

#[test]
fn invalid_eta_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_CLUSTERING);
    let res = gmm_opt(&["cluster", "run", "--config", &config, "--eta", "1.5"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("eta"));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &format!("{SMALL_CLUSTERING}\nbogus = 1\n"));
    let res = gmm_opt(&["cluster", "run", "--config", &config]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn wrong_subcommand_for_problem_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_CLUSTERING);
    let res = gmm_opt(&["lssvm", "run", "--config", &config]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let res = gmm_opt(&["cluster", "run", "--config", "/nonexistent/exp.toml"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn unreadable_input_data_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "problem = \"clustering\"\ndataset = \"file\"\npath = \"/nonexistent/points.csv\"\nk = 3\ninit = \"forgy\"\nselector = \"greedy\"\n",
    );
    let res = gmm_opt(&[
        "cluster",
        "run",
        "--config",
        &config,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn lssvm_run_reports_latent_changes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "problem = \"latent-svm\"\ndataset = \"latent-shift\"\ntask_n = 12\ninit = \"adversarial\"\nselector = \"subset\"\neta = 0.5\nlambda = 0.1\n",
    );
    let out = dir.path().join("o");
    let res = gmm_opt(&["lssvm", "run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(results.lines().next().unwrap().ends_with("latent_change_fraction"));
    assert!(results.contains("cccp") && results.contains("gmm-subset"));
}

#[test]
fn compare_refuses_different_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_CLUSTERING);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let run = |out: &Path, seed: &str| {
        gmm_opt(&[
            "cluster",
            "run",
            "--config",
            &config,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
            "--trials",
            "1",
        ])
    };
    assert!(run(&a, "1").status.success());
    assert!(run(&b, "2").status.success());
    let same = gmm_opt(&[
        "compare",
        a.join("stats.json").to_str().unwrap(),
        a.join("stats.json").to_str().unwrap(),
    ]);
    assert!(same.status.success());
    let res = gmm_opt(&[
        "compare",
        a.join("stats.json").to_str().unwrap(),
        b.join("stats.json").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("fingerprint"));
}
