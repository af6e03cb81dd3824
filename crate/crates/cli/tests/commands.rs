use std::fs;
use std::process::{Command, Output};

use pskhad::detection::{ConfusionKind, Splitting};
use pskhad::grid::log_grid;
use pskhad::rates::{receiver_rate, separable_rate};
use pskhad::spectra::optimal_rate;
use pskhad::{CodeParams, QuadratureConfig};

fn pskhad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pskhad")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = pskhad(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Data rows of a CSV, skipping comments and the header row.
fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn float(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn optimal_rate_saturates_capacity() {
    let csv = stdout(&["optimal-rate", "--n", "2", "--M", "4", "--emin", "1e-5", "--emax", "10"]);
    assert!(csv.contains("# columns: E, R_opt, C, R_opt/E, C/E\n"));
    assert!(!csv.contains('\r'));
    let data = rows(&csv);
    assert_eq!(data.len(), 151);
    let first = &data[0];
    assert!(float(&first[1]) / float(&first[2]) > 0.99);
    for row in &data {
        let (e, r) = (float(&row[0]), float(&row[1]));
        assert_eq!(r, optimal_rate(&CodeParams::new(2, 4, e).unwrap()).unwrap());
    }
}

#[test]
fn single_mode_single_phase_is_zero() {
    let csv = stdout(&["optimal-rate", "--n", "1", "--M", "1", "--emin", "1e-3", "--emax", "1"]);
    assert!(rows(&csv).iter().all(|r| float(&r[1]) == 0.0));
}

#[test]
fn heatmap_peaks_at_eight_for_one_phase() {
    let csv = stdout(&["heatmap", "--E", "0.05"]);
    let data = rows(&csv);
    let best = data
        .iter()
        .filter(|r| r[1] == "1")
        .max_by(|a, b| float(&a[2]).total_cmp(&float(&b[2])))
        .unwrap();
    assert_eq!(best[0], "8");
    let m4: Vec<f64> = data
        .iter()
        .filter(|r| r[1] == "4" && ["2", "4", "8"].contains(&r[0].as_str()))
        .map(|r| float(&r[2]))
        .collect();
    let (lo, hi) = m4.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    assert!(hi / lo < 1.1);
    assert!(data.iter().any(|r| r[0] == "1" && r[1] == "1" && float(&r[2]) == 0.0));
}

#[test]
fn receiver_rates_equal_library_values() {
    let quad = QuadratureConfig::default();
    let grid = log_grid(1e-3, 1.0, 4.0).unwrap();
    for (kind, n, m, extra) in [
        ("vp-helstrom", 8, 3, vec!["--limit"]),
        ("vp-realistic", 4, 4, vec!["--N", "30"]),
        ("separable", 1, 3, vec![]),
    ] {
        let (n_s, m_s) = (n.to_string(), m.to_string());
        let mut args = vec!["receiver-rate", "--kind", kind, "--n", &n_s, "--M", &m_s, "--emin", "1e-3", "--emax", "1", "--points-per-decade", "4"];
        args.extend(extra);
        let data = rows(&stdout(&args));
        assert_eq!(data.len(), grid.len());
        for (row, &e) in data.iter().zip(&grid) {
            assert_eq!(float(&row[0]), e);
            let expected = match kind {
                "vp-helstrom" => receiver_rate(ConfusionKind::VpHelstrom, n, m, e, Splitting::Limit, &quad).unwrap(),
                "vp-realistic" => receiver_rate(ConfusionKind::VpRealistic, n, m, e, Splitting::finite(30).unwrap(), &quad).unwrap(),
                _ => separable_rate(m, e).unwrap(),
            };
            assert_eq!(float(&row[1]), expected, "{kind} at E = {e}");
        }
    }
}

#[test]
fn delta_shows_a_gain_window() {
    let csv = stdout(&["delta", "--M", "3", "--emin", "4e-3", "--emax", "1e-1", "--points-per-decade", "10"]);
    let max = rows(&csv).iter().map(|r| float(&r[1])).fold(f64::NEG_INFINITY, f64::max);
    assert!((0.03..=0.09).contains(&max), "max gain {max}");
}

#[test]
fn file_output_writes_manifest_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rate.csv");
    let path_s = path.to_str().unwrap();
    let args = ["receiver-rate", "--kind", "vp-realistic", "--n", "4", "--M", "3", "--energy", "0.02", "--out", path_s];
    assert!(pskhad(&args).status.success());
    let first = fs::read_to_string(&path).unwrap();
    let manifest: toml::Value = toml::from_str(&fs::read_to_string(dir.path().join("rate.csv.manifest")).unwrap()).unwrap();
    assert_eq!(manifest["command"].as_str(), Some("receiver-rate"));
    assert_eq!(manifest["parameters"]["M"].as_integer(), Some(3));
    assert_eq!(manifest["grid"]["energy"].as_float(), Some(0.02));
    assert_eq!(manifest["quadrature"]["rel_tol"].as_float(), Some(1e-9));
    assert!(manifest["duration_seconds"].as_float().unwrap() >= 0.0);

    let replay: Vec<String> = manifest["command_line"]
        .as_array()
        .unwrap()
        .iter()
        .skip(1)
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let replay: Vec<&str> = replay.iter().map(String::as_str).collect();
    assert!(pskhad(&replay).status.success());
    assert_eq!(fs::read_to_string(&path).unwrap(), first);
}

#[test]
fn simulate_is_seeded_and_reports_errors() {
    let args = ["simulate", "--scenario", "vp-realistic", "--M", "3", "--energy", "1", "--N", "50", "--trials", "20000", "--seed", "5"];
    let a = stdout(&args);
    assert_eq!(a, stdout(&args));
    let data = rows(&a);
    assert_eq!(data.len(), 3 * 4);
    for row in &data {
        let (p, se, exact) = (float(&row[3]), float(&row[4]), float(&row[5]));
        assert!(se >= 0.0);
        assert!((p - exact).abs() <= 5.0 * (exact * (1.0 - exact) / 20000.0).sqrt() + 1e-12);
    }
    assert!(data.iter().filter(|r| r[1] == "vacuum").all(|r| (float(&r[5]) - (-1f64).exp()).abs() < 1e-12));
}

#[test]
fn selftest_passes_and_reports_each_property() {
    let out = stdout(&["selftest"]);
    assert!(out.lines().all(|l| l.starts_with("PASS")));
    assert!(out.contains("trace normalization"));
    assert!(out.contains("row stochasticity"));
}

#[test]
fn corrupted_tolerance_fails_selftest() {
    let out = pskhad(&["selftest", "--tolerance-scale", "-1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn invalid_input_exits_nonzero_with_diagnostic() {
    for args in [
        vec!["optimal-rate", "--n", "3"],
        vec!["optimal-rate", "--energy", "0.1", "--emin", "1e-3"],
        vec!["delta", "--M", "5"],
        vec!["receiver-rate", "--kind", "vp-helstrom", "--N", "10", "--limit"],
        vec!["simulate", "--scenario", "vp-realistic", "--M", "3", "--energy", "-1"],
        vec!["heatmap", "--E", "0"],
    ] {
        let out = pskhad(&args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty(), "{args:?} printed no diagnostic");
    }
}
