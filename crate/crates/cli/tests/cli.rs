//! End-to-end checks of the meshsim binary: exit codes, output files,
//! reproducibility, sweep resume and fixed-topology runs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn meshsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

#[test]
fn run_writes_report_files_with_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let output = meshsim(&[
        "run",
        "--seed",
        "3",
        "--slots",
        "120",
        "--policy",
        "Wr",
        "--trace",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let label = "Wr_n10_seed3_t120";
    for name in [
        format!("flows_{label}.csv"),
        format!("gateways_{label}.csv"),
        format!("jfi_{label}.csv"),
        format!("aggregate_{label}.csv"),
        format!("summary_{label}.json"),
        format!("topology_{label}.txt"),
        format!("trace_{label}.csv"),
    ] {
        let path = out.join(&name);
        assert!(path.exists(), "missing {name}");
        let text = fs::read_to_string(&path).unwrap();
        assert!(
            text.starts_with("# seed=3 policy=Wr") || text.starts_with("{"),
            "{name} lacks a manifest header"
        );
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join(format!("summary_{label}.json"))).unwrap())
            .unwrap();
    assert_eq!(summary["manifest"]["seed"], 3);
    assert_eq!(summary["manifest"]["policy"], "Wr");
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let output = meshsim(&[
            "run",
            "--seed",
            "5",
            "--slots",
            "150",
            "--trace",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(output.status.success());
    }
    let mut names: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 7);
    for name in names {
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn invalid_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    write(&cfg, "[phy]\nnot_a_field = 1\n");
    let output = meshsim(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");

    let output = meshsim(&["run", "--policy", "Q"]);
    assert_eq!(output.status.code(), Some(2));

    let cfg2 = tmp.path().join("bad2.toml");
    write(&cfg2, "[net]\nnodes = 3\n");
    let output = meshsim(&["run", "--config", cfg2.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn disconnected_topology_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let topo = tmp.path().join("disconnected.txt");
    // Two far-apart clusters with no bridging edge.
    write(
        &topo,
        "# node 1 0 0\n# node 2 10 0\n# node 3 1000000 0\n# node 4 1000010 0\n\
         1 2 1\n3 4 1\n",
    );
    let cfg = tmp.path().join("fixed.toml");
    write(
        &cfg,
        &format!(
            "[net]\ntopology_file = \"{}\"\ngateways = [1]\n[flows]\nmode = \"explicit\"\nsources = [3]\n",
            topo.display()
        ),
    );
    let output = meshsim(&["run", "--config", cfg.to_str().unwrap(), "--slots", "10"]);
    assert_eq!(output.status.code(), Some(3), "{output:?}");
}

#[test]
fn topology_round_trips_into_a_fixed_run() {
    let tmp = tempfile::tempdir().unwrap();
    let topo_file = tmp.path().join("topo.txt");
    let output = meshsim(&[
        "topology",
        "--seed",
        "4",
        "--out",
        topo_file.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");

    let cfg = tmp.path().join("fixed.toml");
    write(
        &cfg,
        &format!(
            "[net]\ntopology_file = \"{}\"\nslots = 80\n",
            topo_file.display()
        ),
    );
    let out = tmp.path().join("out");
    let output = meshsim(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");

    // The fixed-topology run reproduces the generated edge set.
    let emitted = fs::read_to_string(&topo_file).unwrap();
    let rerun = fs::read_to_string(out.join("topology_W_n10_seed1_t80.txt")).unwrap();
    let edges = |s: &str| -> Vec<String> {
        s.lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .map(String::from)
            .collect()
    };
    assert_eq!(edges(&emitted), edges(&rerun));
}

#[test]
fn sweep_writes_summary_and_resumes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let args = [
        "sweep",
        "--policies",
        "W,WrD",
        "--seeds",
        "3",
        "--slots",
        "100",
        "--out",
        out.to_str().unwrap(),
    ];
    let first = meshsim(&args);
    assert!(first.status.success(), "{first:?}");
    let summary = out.join("sweep_n10_t100.csv");
    assert!(summary.exists());
    let text = fs::read_to_string(&summary).unwrap();
    assert!(text.contains("policy,seed,aggregate_throughput_mbps"));
    assert_eq!(text.lines().count(), 2 + 2, "header comment + header + 2 rows");

    let bytes_before = fs::read(&summary).unwrap();
    let second = meshsim(&args);
    assert!(second.status.success());
    let stdout = String::from_utf8_lossy(&second.stdout);
    assert!(
        stdout.matches("skipped (complete)").count() == 2,
        "resume should skip completed runs: {stdout}"
    );
    assert_eq!(fs::read(&summary).unwrap(), bytes_before);
}
