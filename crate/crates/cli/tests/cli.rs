use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tagspot::analysis::{pd_single, pf_single_with, AnalysisModel, ModelFading};
use tagspot::channel::apply_awgn;
use tagspot::fft::UnitaryFft;
use tagspot::iq::{read_iq, write_iq};
use tagspot::trials::trial_rng;
use tagspot::{CarrierLayout, Codebook, IqFrame};
use tempfile::TempDir;

fn tagspot(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tagspot"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = tagspot(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    tagspot(dir, args).status.code().expect("exit code")
}

/// Rows of the named table as column -> cell maps.
fn table(text: &str, name: &str) -> Vec<HashMap<String, String>> {
    let marker = format!("# table: {name}");
    let mut lines = text.lines().skip_while(|l| *l != marker).skip(1);
    let header: Vec<String> = lines.next().expect("table present").split('\t').map(String::from).collect();
    lines
        .take_while(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| header.iter().cloned().zip(l.split('\t').map(String::from)).collect())
        .collect()
}

fn num(row: &HashMap<String, String>, col: &str) -> f64 {
    row[col].parse().unwrap()
}

fn noise_file(dir: &Path, name: &str, samples: usize, seed: u64) {
    let silent = IqFrame::new(vec![Default::default(); samples], 1.0e6).unwrap();
    let noise = apply_awgn(&silent, 1.0, &mut trial_rng(seed, 0));
    write_iq(dir.join(name), &noise, &CarrierLayout::reference()).unwrap();
}

#[test]
fn modulate_writes_one_tag_frame() {
    let dir = TempDir::new().unwrap();
    let stdout = ok(dir.path(), &["modulate", "--seed", "1", "--index", "0", "--out", "tag.iq"]);
    assert_eq!(fs::metadata(dir.path().join("tag.iq")).unwrap().len(), 640 * 8);
    let (frame, meta) = read_iq(dir.path().join("tag.iq")).unwrap();
    assert_eq!(frame.len(), 640);
    assert_eq!(meta.layout, CarrierLayout::reference());
    let row = &table(&stdout, "tag")[0];
    assert_eq!(row["samples"], "640");
    assert_eq!(row["codeword"], Codebook::sloane_seidel().words()[0].to_string());
    assert!((num(row, "body_energy") - 112.0).abs() < 1e-9);
}

#[test]
fn modulate_is_reproducible_per_seed() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let a = ok(d, &["modulate", "--seed", "42", "--out", "a.iq"]);
    let b = ok(d, &["modulate", "--seed", "42", "--out", "b.iq"]);
    ok(d, &["modulate", "--seed", "43", "--out", "c.iq"]);
    let bytes = |n: &str| fs::read(d.join(n)).unwrap();
    assert_eq!(bytes("a.iq"), bytes("b.iq"));
    assert_eq!(bytes("a.iq.json"), bytes("b.iq.json"));
    assert_ne!(bytes("a.iq"), bytes("c.iq"));
    assert_eq!(a.replace("a.iq", ""), b.replace("b.iq", ""));
}

#[test]
fn modulate_papr_cap() {
    let dir = TempDir::new().unwrap();
    let stdout = ok(dir.path(), &["modulate", "--seed", "5", "--index", "3", "--papr-cap", "9", "--out", "t.iq"]);
    let row = &table(&stdout, "tag")[0];
    assert_eq!(row["within_cap"], "true");
    assert!(num(row, "papr_db") <= 9.0);
}

#[test]
fn impair_identity_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["modulate", "--seed", "2", "--out", "t.iq"]);
    ok(d, &["impair", "--input", "t.iq", "--out", "u.iq"]);
    assert_eq!(fs::read(d.join("t.iq")).unwrap(), fs::read(d.join("u.iq")).unwrap());
    assert_eq!(fs::read(d.join("t.iq.json")).unwrap(), fs::read(d.join("u.iq.json")).unwrap());
}

#[test]
fn impair_noise_power_matches_snr() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["modulate", "--seed", "2", "--out", "t.iq"]);
    // 0 dB with unit thin-carrier power: noise variance beta / alpha = 0.5
    let mut added = 0.0;
    for seed in 0..20 {
        let s = seed.to_string();
        let stdout = ok(d, &["impair", "--input", "t.iq", "--out", "n.iq", "--snr", "0", "--seed", &s]);
        let row = &table(&stdout, "power")[0];
        added += num(row, "output_mean_power") - num(row, "input_mean_power");
    }
    let mean = added / 20.0;
    assert!((mean - 0.5).abs() < 0.05, "added noise power {mean}");
}

#[test]
fn impair_integer_cfo_rotates_the_spectrum() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["modulate", "--seed", "8", "--out", "t.iq"]);
    ok(d, &["impair", "--input", "t.iq", "--out", "s.iq", "--cfo", "1"]);
    let fft = UnitaryFft::new(512);
    let periodogram = |name: &str| {
        let (frame, _) = read_iq(d.join(name)).unwrap();
        let mut body = frame.samples()[128..].to_vec();
        fft.forward(&mut body);
        body.iter().map(|x| x.norm_sqr()).collect::<Vec<f64>>()
    };
    let before = periodogram("t.iq");
    let after = periodogram("s.iq");
    for k in 0..512 {
        assert!((after[(k + 1) % 512] - before[k]).abs() < 1e-4, "bin {k}");
    }
}

#[test]
fn spot_finds_a_clean_tag_once() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["modulate", "--seed", "4", "--index", "17", "--out", "t.iq"]);
    let stdout = ok(d, &["spot", "--input", "t.iq"]);
    let events = table(&stdout, "events");
    assert_eq!(events.len(), 1);
    assert_eq!(events[0]["codeword_index"], "17");
    assert_eq!(table(&stdout, "summary")[0]["detections"], "1");
}

#[test]
fn spot_finds_a_30db_tag() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    for seed in 0..5 {
        let s = seed.to_string();
        ok(d, &["modulate", "--seed", &s, "--index", "40", "--out", "t.iq"]);
        ok(d, &["impair", "--input", "t.iq", "--out", "n.iq", "--snr", "30", "--seed", &s]);
        let events = table(&ok(d, &["spot", "--input", "n.iq"]), "events");
        assert_eq!(events.len(), 1, "seed {seed}");
        assert_eq!(events[0]["codeword_index"], "40");
    }
}

#[test]
fn spot_on_noise_depends_on_threshold() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    noise_file(d, "noise.iq", 1 << 19, 11);
    let quiet = ok(d, &["spot", "--input", "noise.iq", "--gamma", "0.62"]);
    assert_eq!(table(&quiet, "events").len(), 0);
    let summary = &table(&quiet, "summary")[0];
    let windows = ((1usize << 19) - 512) / 128 + 1;
    assert_eq!(summary["windows_total"], windows.to_string());
    let loud = ok(d, &["spot", "--input", "noise.iq", "--gamma", "0.3", "--no-carrier-sense"]);
    assert!(table(&loud, "events").len() > 100);
}

#[test]
fn spot_writes_json_when_asked() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["modulate", "--seed", "4", "--index", "9", "--out", "t.iq"]);
    ok(d, &["spot", "--input", "t.iq", "--format", "json", "--out", "events.json"]);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("events.json")).unwrap()).unwrap();
    assert_eq!(doc["command"], "spot");
    assert_eq!(doc["config"]["gamma"], 0.62);
    assert_eq!(doc["tables"][0]["rows"][0][2], 9);
}

#[test]
fn codebook_verify_reports_distance() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let row = table(&ok(d, &["codebook-verify"]), "codebook").remove(0);
    assert_eq!(row["words"], "60");
    assert_eq!(row["measured_min_distance"], "13");
    assert_eq!(row["fits_layout"], "true");

    fs::write(d.join("good.txt"), Codebook::sloane_seidel().to_text()).unwrap();
    assert_eq!(code(d, &["codebook-verify", "good.txt"]), 0);
    let bad = "# name: bad\n# word_length: 4\n# min_distance: 3\n0000\n0001\n";
    fs::write(d.join("bad.txt"), bad).unwrap();
    assert_eq!(code(d, &["codebook-verify", "bad.txt"]), 1);
    assert_eq!(code(d, &["codebook-verify", "absent.txt"]), 2);
    let short = "# name: short\n# word_length: 4\n# min_distance: 4\n0000\n1111\n";
    fs::write(d.join("short.txt"), short).unwrap();
    assert_eq!(code(d, &["codebook-verify", "short.txt"]), 1);
}

#[test]
fn range_and_overhead_tables() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let rows = table(&ok(d, &["range", "--gap", "20", "--exponent", "3,6"]), "range");
    assert!((num(&rows[0], "range_gain") - 4.6416).abs() < 1e-4);
    assert!((num(&rows[1], "range_gain") - 2.1544).abs() < 1e-4);
    let rows = table(&ok(d, &["overhead", "--bytes", "1500,750"]), "overhead");
    assert_eq!(num(&rows[0], "overhead"), 8.0 / 131.0);
    assert_eq!(num(&rows[1], "overhead"), 8.0 / 69.0);
    assert_eq!(rows[0]["payload_frames"], "125");
}

#[test]
fn leakage_and_sweep_tables() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let out = ok(d, &["leakage"]);
    let block = &table(&out, "block_bound")[0];
    assert!((num(block, "bound") - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-15);
    let leak = num(&table(&out, "expected")[0], "expected_leak_percent");
    assert!(leak > 2.0 && leak < 2.5, "{leak}");

    let out = ok(d, &["sweep"]);
    let q: usize = table(&out, "optimum")[0]["q"].parse().unwrap();
    assert!(q < 28);
    assert_eq!(table(&out, "sweep").len(), 55);
}

#[test]
fn single_word_curves_match_closed_form() {
    let dir = TempDir::new().unwrap();
    let out = ok(
        dir.path(),
        &["curves", "--families", "single", "--fading", "wideband", "--snr-grid", "1", "--gammas", "0.6,0.62"],
    );
    let rows = table(&out, "roc");
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let gamma = num(row, "gamma");
        let model = AnalysisModel::new(1.0, ModelFading::Wideband, gamma);
        assert_eq!(num(row, "pd"), pd_single(&model));
        assert_eq!(num(row, "pf"), pf_single_with(gamma, &model.layout, model.denominator));
    }
}

#[test]
fn monte_carlo_curves_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let args = ["curves", "--seed", "9", "--trials", "1000", "--snr-grid", "1", "--fading", "wideband", "--families", "code"];
    let a = ok(d, &args);
    let b = ok(d, &args);
    let mut seq = args.to_vec();
    seq.push("--sequential");
    let c = ok(d, &seq);
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert!(a.contains("# seed = 9"));
    let at = table(&a, "roc").into_iter().find(|r| r["gamma"] == "0.62").unwrap();
    assert!(num(&at, "pd") > 0.95);
}

#[test]
fn config_document_and_overrides() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("run.toml"), "version = 1\n\n[range]\ngap_db = [10.0]\nexponents = [2.0]\n").unwrap();
    let rows = table(&ok(d, &["range", "--config", "run.toml"]), "range");
    assert!((num(&rows[0], "range_gain") - 10f64.sqrt()).abs() < 1e-12);
    let out = ok(d, &["range", "--config", "run.toml", "--exponent", "1"]);
    assert!(out.contains("exponents = [1.0]"));
    assert!((num(&table(&out, "range")[0], "range_gain") - 10.0).abs() < 1e-12);

    fs::write(d.join("old.toml"), "version = 7\n").unwrap();
    assert_eq!(code(d, &["range", "--config", "old.toml"]), 1);
    fs::write(d.join("typo.toml"), "version = 1\nsed = 4\n").unwrap();
    assert_eq!(code(d, &["range", "--config", "typo.toml"]), 1);
    assert_eq!(code(d, &["range", "--config", "missing.toml"]), 2);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(d, &["--help"]), 0);
    assert_eq!(code(d, &["modulate", "--frobnicate"]), 1);
    assert_eq!(code(d, &["modulate", "--out", "t.iq"]), 1);
    assert_eq!(code(d, &["modulate", "--seed", "1", "--index", "60", "--out", "t.iq"]), 1);
    assert_eq!(code(d, &["impair", "--input", "nothing.iq", "--out", "x.iq"]), 2);
    assert_eq!(code(d, &["spot", "--input", "nothing.iq"]), 2);
    assert_eq!(code(d, &["modulate", "--seed", "1", "--out", "no/such/dir/t.iq"]), 2);
    assert_eq!(code(d, &["curves", "--families", "code"]), 1);
    assert_eq!(code(d, &["overhead", "--bytes", "0"]), 1);
}
