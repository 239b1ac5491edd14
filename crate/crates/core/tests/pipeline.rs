//! End-to-end pipeline behaviour on the bundled dataset: error
//! surfacing, format selection, and report round-trips.

use std::path::PathBuf;
use tandem_core::pipeline::{self, report::sig6, ExperimentConfig};
use tandem_core::Error;

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tandem-pipe-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn fixture_config(output: &str) -> ExperimentConfig {
    let dir = fixtures_dir();
    ExperimentConfig::from_json(&format!(
        r#"{{"btc_csv": "{}", "eth_csv": "{}", "output_dir": "{}"}}"#,
        dir.join("BTC.csv").display(),
        dir.join("ETH.csv").display(),
        scratch_dir(output).display()
    ))
    .unwrap()
}

#[test]
fn duplicate_asset_files_fail_in_cca_stage() {
    let mut cfg = fixture_config("dup");
    cfg.eth_csv = cfg.btc_csv.clone();
    match pipeline::run_experiment(&cfg) {
        Err(Error::Stage { stage, source }) => {
            assert_eq!(stage, "cca");
            assert!(
                matches!(*source, Error::NotPositiveDefinite { .. }),
                "unexpected source: {source}"
            );
        }
        other => panic!("expected a stage-tagged failure, got {other:?}"),
    }
}

#[test]
fn duplicate_columns_are_pruned_before_cca() {
    let mut cfg = fixture_config("dup-prune");
    cfg.eth_csv = cfg.btc_csv.clone();
    let prep = pipeline::prepare(&cfg).unwrap();
    let dropped: Vec<&str> = prep
        .provenance
        .dropped_columns
        .iter()
        .map(|d| d.name.as_str())
        .collect();
    assert_eq!(dropped, vec!["ETH_Return", "ETH_Volume", "ETH_IV"]);
    assert!(prep.eth.columns.is_empty());
    assert_eq!(prep.btc.columns.len(), 6);
}

#[test]
fn json_only_format_writes_single_file() {
    let mut cfg = fixture_config("json-only");
    cfg.formats = vec![pipeline::OutputFormat::Json];
    let report = pipeline::run_experiment(&cfg).unwrap();
    let written = pipeline::emit_report(&report, &cfg).unwrap();
    assert_eq!(written.len(), 1);
    assert!(written[0].ends_with("report.json"));
    let entries: Vec<_> = std::fs::read_dir(&cfg.output_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(entries.len(), 1);
}

#[test]
fn markdown_tables_round_trip_at_six_digits() {
    let cfg = fixture_config("md-roundtrip");
    let report = pipeline::run_experiment(&cfg).unwrap();
    let md = pipeline::report::render_markdown(&report);

    // in-sample metrics table
    let section = md
        .split("## Forecast accuracy — in-sample")
        .nth(1)
        .unwrap()
        .split("##")
        .next()
        .unwrap();
    let mut parsed = Vec::new();
    for line in section.lines().filter(|l| l.starts_with('|')) {
        let cells: Vec<&str> = line.trim_matches('|').split('|').map(str::trim).collect();
        if cells.len() == 3 && cells[1].parse::<f64>().is_ok() {
            parsed.push((
                cells[0].to_string(),
                cells[1].parse::<f64>().unwrap(),
                cells[2].parse::<f64>().unwrap(),
            ));
        }
    }
    assert_eq!(parsed.len(), report.models.len());
    for (row, model) in parsed.iter().zip(&report.models) {
        assert_eq!(row.0, model.display_name);
        // parsing the printed value and re-printing it reproduces the
        // same six significant digits
        assert_eq!(sig6(row.1), sig6(model.in_sample.rmse));
        assert_eq!(sig6(row.2), sig6(model.in_sample.mae));
    }

    // Wilks table: correlation, lambda, df1, df2, F, p per pair
    let section = md
        .split("## CCA — canonical correlations and Wilks' lambda")
        .nth(1)
        .unwrap()
        .split("###")
        .next()
        .unwrap();
    let mut rows = 0;
    for line in section.lines().filter(|l| l.starts_with('|')) {
        let cells: Vec<&str> = line.trim_matches('|').split('|').map(str::trim).collect();
        if cells.len() == 6 && cells[0].parse::<f64>().is_ok() {
            let w = &report.cca.wilks[rows];
            assert_eq!(sig6(cells[0].parse().unwrap()), sig6(report.cca.correlations[rows]));
            assert_eq!(sig6(cells[1].parse().unwrap()), sig6(w.lambda));
            assert_eq!(sig6(cells[3].parse().unwrap()), sig6(w.df2));
            assert_eq!(sig6(cells[4].parse().unwrap()), sig6(w.f_value));
            assert_eq!(sig6(cells[5].parse().unwrap()), sig6(w.p_value));
            rows += 1;
        }
    }
    assert_eq!(rows, report.cca.wilks.len());
}

#[test]
fn plot_csvs_have_expected_shapes() {
    let mut cfg = fixture_config("csv-plots");
    cfg.formats = vec![pipeline::OutputFormat::Csv];
    let report = pipeline::run_experiment(&cfg).unwrap();
    let written = pipeline::emit_report(&report, &cfg).unwrap();

    let names: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert!(names.contains(&"scree.csv".to_string()));
    assert!(names.contains(&"variate_pair_1.csv".to_string()));
    assert!(names.contains(&"variate_pair_3.csv".to_string()));
    assert!(names.contains(&"features_btc.csv".to_string()));
    assert!(names.contains(&"features_eth.csv".to_string()));

    let scree = std::fs::read_to_string(written.iter().find(|p| p.ends_with("scree.csv")).unwrap())
        .unwrap();
    let mut lines = scree.lines();
    assert_eq!(lines.next(), Some("component,explained_ratio,cumulative_ratio"));
    assert_eq!(lines.count(), 6);

    let feats =
        std::fs::read_to_string(written.iter().find(|p| p.ends_with("features_btc.csv")).unwrap())
            .unwrap();
    let header = feats.lines().next().unwrap();
    assert_eq!(
        header,
        "date,BTC_Close,BTC_Return,BTC_Volume,BTC_HML,BTC_VMOM,BTC_IV"
    );
    // full panel: in-sample plus out-of-sample rows
    let n_rows = feats.lines().count() - 1;
    assert_eq!(
        n_rows,
        report.provenance.n_in_sample + report.provenance.n_out_sample
    );

    let pair = std::fs::read_to_string(
        written.iter().find(|p| p.ends_with("variate_pair_1.csv")).unwrap(),
    )
    .unwrap();
    assert_eq!(pair.lines().next(), Some("date,v_y,v_x"));
    assert_eq!(pair.lines().count() - 1, report.provenance.n_in_sample);
}

#[test]
fn intercept_flag_prepends_constant_regressor() {
    let mut cfg = fixture_config("intercept");
    cfg.intercept = true;
    let report = pipeline::run_experiment(&cfg).unwrap();
    for m in &report.models {
        assert_eq!(m.coefficients[0].regressor, "Intercept");
        // standardized target and regressors: the constant stays near 0
        assert!(m.coefficients[0].coefficient.abs() < 0.05);
    }
    // the nesting argument is unchanged, so the tie survives an intercept
    let rmse: Vec<f64> = report.models.iter().map(|m| m.in_sample.rmse).collect();
    assert!((rmse[0] - rmse[1]).abs() < 1e-9);
}

#[test]
fn unreadable_input_is_stage_tagged_io_error() {
    let mut cfg = fixture_config("io-err");
    cfg.btc_csv = PathBuf::from("/nonexistent/btc.csv");
    match pipeline::run_experiment(&cfg) {
        Err(Error::Stage { stage, source }) => {
            assert_eq!(stage, "ingest");
            assert!(matches!(*source, Error::Io { .. }));
        }
        other => panic!("expected ingest failure, got {other:?}"),
    }
}

#[test]
fn provenance_reflects_injected_data_blemishes() {
    let cfg = fixture_config("prov");
    let report = pipeline::run_experiment(&cfg).unwrap();
    let pv = &report.provenance;
    assert!(pv.eth_rows_skipped > 0, "null rows should be skipped");
    assert!(pv.unmatched_dates_dropped > 0, "gap dates should be dropped");
    assert!(
        pv.validation_warnings.iter().any(|w| w.contains("swapped")),
        "the inverted bar should surface as a repair warning"
    );
    assert!(pv.dropped_columns.is_empty());
    assert_eq!(pv.n_out_sample, 47);

    // wilks table is reproducible from the reported correlations and n
    for (k, w) in report.cca.wilks.iter().enumerate() {
        let lambda: f64 = report.cca.correlations[k..]
            .iter()
            .map(|r| 1.0 - r * r)
            .product();
        assert!((lambda - w.lambda).abs() < 1e-10);
    }
}
