use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn eeio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eeio"))
        .args(args)
        .env_remove("EEIO_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn build(dir: &tempfile::TempDir, fixture: &str) -> String {
    let out = dir.path().join(format!("{fixture}.json"));
    let data = fixtures().join(fixture);
    stdout(&eeio(&["build", data.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    out.to_str().unwrap().to_string()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn build_writes_model_and_clean_report() {
    let dir = tempfile::tempdir().unwrap();
    let model = build(&dir, "3sector");
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("3sector.report.json")).unwrap()).unwrap();
    assert_eq!(report["errors"].as_array().unwrap().len(), 0);
    assert!(Path::new(&model).exists());
}

#[test]
fn malformed_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for (fixture, needle) in [
        ("bad-weights", "concordance.csv:3"),
        ("nan-cell", "use.csv:5"),
        ("non-productive", "not productive"),
    ] {
        let data = fixtures().join(fixture);
        let out = dir.path().join("m.json");
        let o = eeio(&["build", data.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{fixture}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "{fixture}: {err}");
    }
}

#[test]
fn unknown_scope_sector_and_level() {
    let dir = tempfile::tempdir().unwrap();
    let m = build(&dir, "3sector");
    for args in [
        vec!["footprint", &m, "--scope", "none"],
        vec!["contribute", &m, "--sector", "Mining"],
        vec!["contribute", &m, "--sector", "Services", "--level", "nowhere"],
    ] {
        let o = eeio(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    let o = eeio(&["footprint", "no-such-model.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no-such-model.json"));
}

#[test]
fn footprint_csv_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let m = build(&dir, "road");
    let csv = stdout(&eeio(&["footprint", &m, "--per-capita", "38400000"]));
    let json: serde_json::Value =
        serde_json::from_str(&stdout(&eeio(&["footprint", &m, "--per-capita", "38400000", "--format", "json"])))
            .unwrap();
    let rows = csv_rows(&csv);
    assert_eq!(rows.len(), json.as_array().unwrap().len());
    for (row, obj) in rows.iter().zip(json.as_array().unwrap()) {
        assert_eq!(row[0], obj["indicator"].as_str().unwrap());
        assert_eq!(row[2].parse::<f64>().unwrap(), obj["total"].as_f64().unwrap());
        assert_eq!(row[4].parse::<f64>().unwrap(), obj["per_capita"].as_f64().unwrap());
    }
    let climate = &rows[0];
    assert_eq!(climate[5], "t CO2 eq/capita");
    assert!((climate[4].parse::<f64>().unwrap() - 18.0).abs() < 0.1);
}

#[test]
fn level5_contribution_has_eight_groups_summing_to_100() {
    let dir = tempfile::tempdir().unwrap();
    let m = build(&dir, "road");
    let plot = dir.path().join("plot.csv");
    let table = stdout(&eeio(&[
        "contribute",
        &m,
        "--sector",
        "Road construction",
        "--level",
        "level5",
        "--plot",
        plot.to_str().unwrap(),
    ]));
    let rows = csv_rows(&table);
    let mut by_indicator: std::collections::BTreeMap<String, (usize, f64)> = Default::default();
    for r in &rows {
        let e = by_indicator.entry(r[1].clone()).or_default();
        e.0 += 1;
        e.1 += r[4].parse::<f64>().unwrap();
    }
    for (ind, (groups, sum)) in by_indicator {
        assert_eq!(groups, 8, "{ind}");
        // printed shares carry six significant digits
        assert!((sum - 100.0).abs() < 1e-3, "{ind}: {sum}");
    }
    let plot = std::fs::read_to_string(plot).unwrap();
    assert!(plot.starts_with("group,indicator,share_percent\n"));
    assert!(plot.contains("Direct emissions,\"Climate change, short term\",1.70000e1"));
}

#[test]
fn correlation_on_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let three = build(&dir, "3sector");
    let rows = csv_rows(&stdout(&eeio(&["correlate", &three, "--sector", "Services"])));
    assert_eq!(rows[0][4], "1.00000e0");

    let road = build(&dir, "road");
    let base = ["correlate", &road, "--sector", "Road construction", "--level", "level4"];
    let without = csv_rows(&stdout(&eeio(&base)));
    let mut args = base.to_vec();
    args.push("--include-direct");
    let with = csv_rows(&stdout(&eeio(&args)));
    let r2 = |rows: &[Vec<String>], k: usize| rows[k][4].parse::<f64>().unwrap();
    assert_eq!(without[0][1], "Ecosystem quality");
    assert_eq!(r2(&without, 0), 0.995);
    assert_eq!(r2(&without, 1), 0.991);
    assert!(r2(&with, 0) > r2(&without, 0));
    assert!(r2(&with, 1) > r2(&without, 1));
}

#[test]
fn lifecycle_shares() {
    let table = stdout(&eeio(&["lifecycle", fixtures().join("road-lifecycle.csv").to_str().unwrap()]));
    let rows = csv_rows(&table);
    let group = |name: &str| {
        rows.iter()
            .find(|r| r[0] == "group" && r[1] == name)
            .map(|r| r[4].parse::<f64>().unwrap())
            .unwrap()
    };
    assert_eq!(group("Infrastructure").round(), 5.0);
    assert!((group("Tailpipe emissions") + group("Fuel supply chain") - 72.0).abs() < 1.0);

    let single = stdout(&eeio(&["lifecycle", fixtures().join("single-lifecycle.csv").to_str().unwrap()]));
    assert!(single.contains("component,Infrastructure,Roads,8.23000e9,1.00000e2"));
}

#[test]
fn thread_count_is_validated() {
    let single = fixtures().join("single-lifecycle.csv");
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_eeio"))
            .args(["lifecycle", single.to_str().unwrap()])
            .env("EEIO_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(run("zero").status.code(), Some(2));
    assert!(run("2").status.success());
}
