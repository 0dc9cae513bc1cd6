use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use busshare_cli::artifacts::sha256_file;
use busshare_cli::fixture::{write_fixture, FixtureOptions};
use busshare_core::geo_network::{cluster_fof, largest_component, load_blacklist, load_network, write_road_network};

fn busshare(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_busshare")).arg("--config").arg(config).args(args).output().unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fixture(dir: &Path) -> PathBuf {
    write_fixture(dir, &FixtureOptions::default()).unwrap()
}

/// Every artifact under `out`, relative path and checksum, manifest excluded.
fn artifacts(out: &Path) -> Vec<(String, String)> {
    let mut files = Vec::new();
    let mut stack = vec![out.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                files.push((p.strip_prefix(out).unwrap().display().to_string(), sha256_file(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn counts(stdout: &str, prefix: &str) -> (usize, usize) {
    let line = stdout.lines().find(|l| l.contains(prefix)).unwrap_or_else(|| panic!("no `{prefix}` in {stdout}"));
    let nums: Vec<usize> = line.split_whitespace().filter_map(|w| w.parse().ok()).collect();
    (nums[nums.len() - 2], nums[nums.len() - 1])
}

#[test]
fn network_counts_equal_api_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let stdout = ok(busshare(&cfg, &["network-prepare"]));

    let (mut raw, _) = load_network(&dir.path().join("nodes.csv"), &dir.path().join("edges.csv"), None).unwrap();
    assert_eq!(counts(&stdout, "input:"), (raw.nodes().len(), raw.edges().len()));
    raw.remove_edges(&load_blacklist(&dir.path().join("blacklist.csv")).unwrap());
    let clustered = cluster_fof(&raw, 20.0).unwrap();
    assert_eq!(counts(&stdout, "clustered"), (clustered.len(), clustered.edges().len()));
    let net = largest_component(&clustered).unwrap();
    assert_eq!(counts(&stdout, "largest component"), (net.len(), net.edges().len()));
    assert_eq!((net.len(), net.edges().len()), (400, 757));

    let mut api = Vec::new();
    write_road_network(&net, &mut api).unwrap();
    assert_eq!(std::fs::read(dir.path().join("out/network.json")).unwrap(), api);
}

#[test]
fn forced_rerun_reproduces_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    ok(busshare(&cfg, &["run-all"]));
    let first = artifacts(&dir.path().join("out"));
    ok(busshare(&cfg, &["run-all", "--force"]));
    assert_eq!(artifacts(&dir.path().join("out")), first);
}

#[test]
fn unchanged_stages_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    ok(busshare(&cfg, &["run-all"]));
    let again = ok(busshare(&cfg, &["run-all"]));
    assert_eq!(again.lines().filter(|l| l.ends_with("up to date")).count(), 5, "{again}");

    // a new seed only affects bus synthesis and what depends on it
    let reseeded = ok(busshare(&cfg, &["run-all", "--seed", "7"]));
    for stage in ["network-prepare", "map-match"] {
        assert!(reseeded.contains(&format!("[{stage}] up to date")), "{reseeded}");
    }
    for stage in ["bus-synth", "match", "report"] {
        assert!(!reseeded.contains(&format!("[{stage}] up to date")), "{reseeded}");
    }

    // a damaged output makes its stage stale
    std::fs::write(dir.path().join("out/report/stats.csv"), "garbage").unwrap();
    let repaired = ok(busshare(&cfg, &["report", "--seed", "7"]));
    assert!(!repaired.contains("up to date"));
    assert!(std::fs::read_to_string(dir.path().join("out/report/stats.csv")).unwrap().starts_with("day,"));

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["stages"].as_object().unwrap().len(), 5);
    for (_, s) in manifest["stages"].as_object().unwrap() {
        assert_eq!(s["status"], "complete");
        assert!(!s["outputs"].as_object().unwrap().is_empty());
    }
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let one = tempfile::tempdir().unwrap();
    let four = tempfile::tempdir().unwrap();
    ok(busshare(&fixture(one.path()), &["run-all", "--threads", "1"]));
    ok(busshare(&fixture(four.path()), &["run-all", "--threads", "4"]));
    assert_eq!(artifacts(&one.path().join("out")), artifacts(&four.path().join("out")));
}

#[test]
fn missing_upstream_names_producer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    for (stage, producer) in [("map-match", "network-prepare"), ("match", "network-prepare"), ("report", "bus-synth")] {
        let out = busshare(&cfg, &[stage]);
        assert!(!out.status.success());
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(&format!("[{stage}]")), "{err}");
        assert!(err.contains(&format!("run `busshare {producer}` first")), "{err}");
    }
}

#[test]
fn empty_inputs_give_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    std::fs::write(dir.path().join("taxi_gps.csv"), "trip_id,lat,lon,timestamp\n").unwrap();
    std::fs::write(dir.path().join("demand.csv"), "origin_stop,dest_stop,hour,day_type,monthly_count\n").unwrap();
    ok(busshare(&cfg, &["run-all"]));
    let out = dir.path().join("out");
    assert_eq!(std::fs::read_to_string(out.join("trajectories.csv")).unwrap(), "trip_id,seq,node_id,timestamp\n");
    assert_eq!(std::fs::read_to_string(out.join("bus_trips.csv")).unwrap(), "trip_id,origin_stop,dest_stop,t_start,t_end\n");
    assert_eq!(
        std::fs::read_to_string(out.join("match/assignment_d200_tb300.csv")).unwrap(),
        "bus_id,taxi_id,tau_s,bus_start_hour\n"
    );
    let stats = std::fs::read_to_string(out.join("report/stats.csv")).unwrap();
    assert_eq!(stats.lines().count(), 1 + 6 * 17);
    assert!(stats.lines().skip(1).all(|l| l.ends_with(",0,0,0,")), "{stats}");
}

#[test]
fn bad_input_is_tagged_with_its_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    ok(busshare(&cfg, &["network-prepare"]));
    std::fs::write(dir.path().join("taxi_gps.csv"), "trip_id,lat,lon,timestamp\nt1,abc,103.8,0\n").unwrap();
    let out = busshare(&cfg, &["map-match"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: [map-match]"), "{err}");
    assert!(err.contains("taxi_gps.csv"), "{err}");
    assert!(!dir.path().join("out/trajectories.csv").exists());

    let manifest = std::fs::read_to_string(dir.path().join("out/manifest.json")).unwrap();
    assert!(manifest.contains("\"failed\""));
}

#[test]
fn invalid_config_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_busshare"))
        .arg("--config")
        .arg(&cfg)
        .arg("run-all")
        .env("BUSSHARE_SWEEP_TB_S", "[]")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`sweep_tb_s` is empty"));
    assert!(!dir.path().join("out/network.json").exists());
}

#[test]
fn pre_matched_inputs_reproduce_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    ok(busshare(&cfg, &["run-all"]));
    let out = dir.path().join("out");
    std::fs::copy(out.join("trajectories.csv"), dir.path().join("given_trajectories.csv")).unwrap();
    std::fs::copy(out.join("bus_trips.csv"), dir.path().join("given_trips.csv")).unwrap();

    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("taxi_traces = \"taxi_gps.csv\"", "taxi_trajectories = \"given_trajectories.csv\"")
        .replace("bus_demand = \"demand.csv\"", "bus_trips = \"given_trips.csv\"")
        .replace("output_dir = \"out\"", "output_dir = \"out2\"");
    let cfg2 = dir.path().join("given.toml");
    std::fs::write(&cfg2, text).unwrap();
    ok(busshare(&cfg2, &["run-all"]));
    for rel in ["trajectories.csv", "bus_trips.csv", "report/stats.csv", "match/assignment_d200_tb300.csv"] {
        assert_eq!(
            std::fs::read(out.join(rel)).unwrap(),
            std::fs::read(dir.path().join("out2").join(rel)).unwrap(),
            "{rel}"
        );
    }
}
