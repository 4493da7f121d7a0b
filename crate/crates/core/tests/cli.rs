use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use deep_core::analysis::random_certified_network;
use deep_core::io::{load_network, save_network};
use deep_core::Network;

fn deep(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_deep"));
    cmd.args(args).env_remove("DEEP_OUT_DIR");
    if let Some(dir) = out {
        cmd.arg("--out").arg(dir);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const QUICK: &[&str] = &["--runs", "2", "--epochs", "5"];

#[test]
fn unknown_task_lists_valid_names() {
    let tmp = tempfile::tempdir().unwrap();
    let o = deep(&["train", "--task", "nand"], Some(tmp.path()));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("and, or, xor"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "betta = 0.2\n").unwrap();
    let o = deep(
        &["train", "--config", cfg.to_str().unwrap()],
        Some(tmp.path()),
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("betta"));
}

#[test]
fn train_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec![
        "train", "--task", "xor", "--rule", "deep", "--seed", "42", "--prune",
    ];
    args.extend_from_slice(QUICK);
    let o = deep(&args, Some(tmp.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    let root = tmp.path();
    for f in [
        "manifest.toml",
        "summary.txt",
        "deep/metrics.csv",
        "deep/aggregate.csv",
        "deep/run_42/initial.net",
        "deep/run_42/final.net",
        "deep/run_42/prune_events.csv",
        "deep/run_43/final.net",
    ] {
        assert!(root.join(f).is_file(), "missing {f}");
    }
    let aggregate = std::fs::read_to_string(root.join("deep/aggregate.csv")).unwrap();
    let lines: Vec<&str> = aggregate.lines().collect();
    assert_eq!(lines[0], "epoch,min,q25,median,q75,max");
    assert_eq!(lines.len(), 1 + 5);
    let metrics = std::fs::read_to_string(root.join("deep/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 2 * 5);
    let manifest = std::fs::read_to_string(root.join("manifest.toml")).unwrap();
    assert!(manifest.contains("# run seeds: 42, 43"));
    assert!(stdout(&o).contains("converged"));
}

#[test]
fn rules_share_initial_networks_but_not_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("deep"), tmp.path().join("asym"));
    for (rule, dir) in [("deep", &a), ("asym", &b)] {
        let mut args = vec!["train", "--task", "and", "--rule", rule];
        args.extend_from_slice(QUICK);
        assert!(deep(&args, Some(dir)).status.success());
    }
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(
        read(&a.join("deep/run_0/initial.net")),
        read(&b.join("asym/run_0/initial.net"))
    );
    assert_ne!(
        read(&a.join("deep/metrics.csv")),
        read(&b.join("asym/metrics.csv"))
    );
}

#[test]
fn env_var_sets_default_output_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_deep"))
        .args(["train", "--runs", "1", "--epochs", "1"])
        .env("DEEP_OUT_DIR", tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("manifest.toml").is_file());
}

fn write_net(dir: &Path, name: &str, net: &Network) -> String {
    let p = dir.join(name);
    save_network(net, &p).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn analyze_reports_certificate_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let good = random_certified_network(6, 2, 1, 1.0, 0.1, &[1.0, 0.0], &mut rng).unwrap();
    let good = write_net(tmp.path(), "good.net", &good);
    let o = deep(&["analyze", &good, "--input", "1,0", "--probe", "5"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("CERTIFIED: locally asymptotically stable (sufficient conditions met)"));
    assert!(text.contains("probe: 5/5"), "{text}");

    let bad = Network::new_complete(8, 2, 1, 0.5, 0).unwrap();
    let bad = write_net(tmp.path(), "bad.net", &bad);
    let o = deep(&["analyze", &bad], None);
    assert!(o.status.success());
    assert!(stdout(&o).contains("NOT CERTIFIED (conditions are sufficient, not necessary)"));
}

#[test]
fn corrupt_file_names_line() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("broken.net");
    std::fs::write(&p, "DEEP v1 N=2 P=1 roles=IO\n. 0.5\n. ?\n. 0.1\n").unwrap();
    let o = deep(&["analyze", p.to_str().unwrap()], None);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn export_dot_and_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let net = Network::new_complete(8, 2, 1, 0.5, 1).unwrap();
    let path = write_net(tmp.path(), "n.net", &net);
    let dot_path = tmp.path().join("n.dot");
    let o = deep(&["export-dot", &path, dot_path.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let dot = std::fs::read_to_string(&dot_path).unwrap();
    assert!(dot.starts_with("digraph"));
    assert_eq!(dot.matches("->").count(), 48);

    let o = deep(&["eval", &path, "--task", "or"], None);
    assert!(o.status.success());
    assert!(stdout(&o).contains("accuracy"));
    assert_eq!(load_network(Path::new(&path)).unwrap(), net);
}
