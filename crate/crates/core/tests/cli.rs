use std::fs;
use std::path::Path;

use fedsecure::cli::run_with_output;
use fedsecure::config::DEFAULT_SCENARIO;
use fedsecure::fl::ROUNDS_CSV_HEADER;

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut argv = vec!["fedsecure"];
    argv.extend_from_slice(args);
    let code = run_with_output(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn small_scenario(dir: &Path) -> String {
    let path = dir.join("small.conf");
    fs::write(&path, DEFAULT_SCENARIO.replace("group.bits = 2048", "group.bits = 64")).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_one_round_on_default_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let (code, text) = run(&["simulate", "--max-rounds", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let rounds = fs::read_to_string(out.join("rounds.csv")).unwrap();
    let rows: Vec<_> = rounds.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], ROUNDS_CSV_HEADER);
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("1,0.000,"));
    assert_eq!(rows[1].split(',').count(), ROUNDS_CSV_HEADER.split(',').count());
    // one report time per orbit
    assert_eq!(rows[1].split(',').nth(3).unwrap().split(';').count(), 4);
    assert!(rounds.contains("# seed_crypto=1"));
    assert!(rounds.contains("# seed_train=2"));

    let windows = fs::read_to_string(out.join("windows.csv")).unwrap();
    assert_eq!(windows.lines().next(), Some("satellite_id,start_s,end_s"));
    assert!(windows.lines().count() > 1);
    let overhead = fs::read_to_string(out.join("overhead.txt")).unwrap();
    assert!(overhead.contains("group_bits = 2048"));
    assert!(overhead.contains("key_setup_bytes = 2048"));
}

#[test]
fn simulate_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_scenario(dir.path());
    let out = dir.path().join("direct");
    let (code, text) = run(&[
        "simulate",
        "--config",
        &conf,
        "--mode",
        "direct_sync",
        "--max-rounds",
        "2",
        "--seed-crypto",
        "11",
        "--seed-train",
        "12",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("mode: direct_sync"));
    let rounds = fs::read_to_string(out.join("rounds.csv")).unwrap();
    assert!(rounds.contains("# mode=direct_sync"));
    assert!(rounds.contains("# seed_crypto=11"));
    assert!(rounds.contains("# seed_train=12"));
    assert_eq!(rounds.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

#[test]
fn seeds_change_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let conf = small_scenario(dir.path());
    let read = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let (code, _) = run(&[
            "simulate",
            "--config",
            &conf,
            "--max-rounds",
            "2",
            "--seed-train",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        fs::read_to_string(out.join("rounds.csv")).unwrap()
    };
    let a = read("5", "a");
    let b = read("5", "b");
    let c = read("6", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn config_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conf");
    fs::write(&bad, DEFAULT_SCENARIO.replace("altitude_km = 1200", "altitude_km = -5")).unwrap();
    let (code, _) = run(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_ne!(code, 0);
    let (code, _) = run(&[
        "simulate",
        "--config",
        dir.path().join("missing.conf").to_str().unwrap(),
    ]);
    assert_ne!(code, 0);
    let (code, _) = run(&["simulate", "--mode", "turbo"]);
    assert_ne!(code, 0);
}

#[test]
fn unknown_subcommand_fails() {
    let (code, _) = run(&["launch"]);
    assert_ne!(code, 0);
    let (code, _) = run(&[]);
    assert_ne!(code, 0);
}

#[test]
fn keydemo_verifies_the_aggregation_key() {
    let (code, text) = run(&["keydemo", "--parties", "4", "--bits", "64"]);
    assert_eq!(code, 0);
    assert_eq!(text.matches("party ").count(), 4);
    assert!(text.contains("AK == g^Σs: true"), "{text}");
    assert!(text.contains("Σ x·y mod q = 0: true"));
}

#[test]
fn bench_reports_timing_and_sizes() {
    let (code, text) = run(&["bench", "-e", "10000", "--bits", "2048", "--samples", "1"]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("encrypt one entry:"));
    assert!(text.contains("recovered sum matches plaintext: true"));
    assert!(text.contains("point bytes uncompressed: 5120000"));
    assert!(text.contains("point bytes compressed: 2561250"));
    assert!(text.contains("e = 24800000"));
}

#[test]
fn metrics_command_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.txt");
    let truth = dir.path().join("truth.txt");
    fs::write(&pred, "# prediction\n3 1\n1 1 0\n").unwrap();
    fs::write(&truth, "3 1\n1 0 0\n").unwrap();
    let (code, text) = run(&["metrics", pred.to_str().unwrap(), truth.to_str().unwrap()]);
    assert_eq!(code, 0);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "class,iou,dice");
    assert_eq!(lines[1], "0,0.500000,0.666667");
    assert_eq!(lines[2], "1,0.500000,0.666667");
    assert_eq!(lines[3], "mean,0.500000,0.666667");
}

#[test]
fn readme_documents_the_emitted_headers() {
    let readme = include_str!("../../../README.md");
    assert!(readme.contains(ROUNDS_CSV_HEADER));
    assert!(readme.contains("satellite_id,start_s,end_s"));
    for key in DEFAULT_SCENARIO
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .filter_map(|l| l.split_once('=').map(|(k, _)| k.trim()))
    {
        assert!(readme.contains(&format!("`{key}`")), "README lacks {key}");
    }
}
