//! Report assembly and emission: a JSON report, a markdown rendering of
//! the analysis tables, and plot-ready CSV series. Output bytes are a
//! pure function of config and input data.

use super::{Analysis, ExperimentConfig, LabeledMatrix, OosEvaluation, OutputFormat, Prepared};
use crate::cca::WilksTest;
use crate::error::{Error, Result};
use crate::features::{DroppedColumn, FeatureMatrix};
use crate::regression::ForecastMetrics;
use chrono::NaiveDate;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Format a real with 6 significant digits (round-half-even, trailing
/// zeros trimmed), switching to scientific notation outside
/// [1e-4, 1e6).
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    // `{:.5e}` rounds ties-to-even and normalizes the exponent
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:.5e} output");
    let exp: i32 = exp.parse().expect("numeric exponent");
    let neg = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    debug_assert_eq!(digits.len(), 6);

    let sign = if neg { "-" } else { "" };
    if !(-4..6).contains(&exp) {
        let trimmed = trim_zeros(&format!("{}.{}", &digits[..1], &digits[1..]));
        return format!("{sign}{trimmed}e{exp}");
    }
    let body = if exp >= 5 {
        digits
    } else if exp >= 0 {
        let cut = (exp + 1) as usize;
        trim_zeros(&format!("{}.{}", &digits[..cut], &digits[cut..]))
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        trim_zeros(&format!("0.{zeros}{digits}"))
    };
    format!("{sign}{body}")
}

fn trim_zeros(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub btc_sha256: String,
    pub eth_sha256: String,
    pub in_sample: super::DateRange,
    pub out_sample: super::DateRange,
    pub n_in_sample: usize,
    pub n_out_sample: usize,
    pub btc_rows_skipped: usize,
    pub eth_rows_skipped: usize,
    pub unmatched_dates_dropped: usize,
    pub validation_warnings: Vec<String>,
    pub dropped_columns: Vec<DroppedColumn>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdSelection {
    pub threshold: f64,
    pub components: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PcaReport {
    pub feature_names: Vec<String>,
    pub eigenvalues: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    pub cumulative_ratio: Vec<f64>,
    /// Eigenvector columns, one inner vector per component.
    pub components: Vec<Vec<f64>>,
    /// loadings[i][j] = corr(feature i, component j).
    pub loadings: Vec<Vec<f64>>,
    pub selections: Vec<ThresholdSelection>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CcaReport {
    pub y_names: Vec<String>,
    pub x_names: Vec<String>,
    pub correlations: Vec<f64>,
    pub n: usize,
    pub wilks: Vec<WilksTest>,
    /// alpha[i] is the i-th y-side coefficient column.
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub x_loadings: Vec<Vec<f64>>,
    pub y_loadings: Vec<Vec<f64>>,
    pub y_cross_loadings: Vec<Vec<f64>>,
    pub x_cross_loadings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientRow {
    pub regressor: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelReport {
    pub name: String,
    pub display_name: String,
    pub coefficients: Vec<CoefficientRow>,
    pub in_sample: ForecastMetrics,
}

#[derive(Debug, Clone, Serialize)]
pub struct OosModelMetrics {
    pub name: String,
    pub metrics: ForecastMetrics,
}

#[derive(Debug, Clone, Serialize)]
pub struct OosReport {
    pub n_rows: usize,
    pub metrics: Vec<OosModelMetrics>,
}

/// Data series for the plot CSVs; emitted as files, not serialized into
/// the JSON report.
#[derive(Debug, Clone, Default)]
pub struct PlotData {
    pub scree: Vec<(usize, f64, f64)>,
    pub variate_dates: Vec<NaiveDate>,
    /// per pair: (v_y series, v_x series)
    pub variate_pairs: Vec<(Vec<f64>, Vec<f64>)>,
    /// (file label, standardized feature block over the full panel)
    pub features: Vec<(String, FeatureMatrix)>,
}

/// The complete experiment report.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub provenance: Provenance,
    pub pearson: LabeledMatrix,
    pub pca: PcaReport,
    pub cca: CcaReport,
    pub models: Vec<ModelReport>,
    pub out_of_sample: OosReport,
    #[serde(skip)]
    pub plots: PlotData,
}

fn matrix_cols(m: &crate::linalg::Matrix) -> Vec<Vec<f64>> {
    (0..m.cols()).map(|j| m.col(j)).collect()
}

fn matrix_rows(m: &crate::linalg::Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Build the full report structure from the pipeline artifacts. With no
/// out-of-sample evaluation the corresponding section is empty.
pub fn assemble_report(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    analysis: &Analysis,
    oos: Option<&OosEvaluation>,
) -> EvalReport {
    let provenance = Provenance {
        config_sha256: super::sha256_hex(cfg.canonical_json().as_bytes()),
        btc_sha256: prep.provenance.btc_sha256.clone(),
        eth_sha256: prep.provenance.eth_sha256.clone(),
        in_sample: cfg.in_sample,
        out_sample: cfg.out_sample,
        n_in_sample: analysis.n_in_sample,
        n_out_sample: oos.map_or(0, |o| o.n_rows),
        btc_rows_skipped: prep.provenance.btc_rows_skipped,
        eth_rows_skipped: prep.provenance.eth_rows_skipped,
        unmatched_dates_dropped: prep.provenance.unmatched_dates_dropped,
        validation_warnings: prep.provenance.validation_warnings.clone(),
        dropped_columns: prep.provenance.dropped_columns.clone(),
    };

    let pca = PcaReport {
        feature_names: analysis.pca_model.feature_names.clone(),
        eigenvalues: analysis.pca_model.eigenvalues.clone(),
        explained_ratio: analysis.pca_model.explained_ratio.clone(),
        cumulative_ratio: analysis.pca_model.cumulative_ratio.clone(),
        components: matrix_cols(&analysis.pca_model.components),
        loadings: matrix_rows(&analysis.pca_loadings),
        selections: analysis
            .selections
            .iter()
            .map(|(t, k)| ThresholdSelection {
                threshold: *t,
                components: *k,
            })
            .collect(),
    };

    let cca = CcaReport {
        y_names: analysis.cca_model.y_names.clone(),
        x_names: analysis.cca_model.x_names.clone(),
        correlations: analysis.cca_model.correlations.clone(),
        n: analysis.cca_model.n,
        wilks: analysis.wilks.clone(),
        alpha: matrix_cols(&analysis.cca_model.alpha),
        beta: matrix_cols(&analysis.cca_model.beta),
        x_loadings: matrix_rows(&analysis.cca_loadings.x_own),
        y_loadings: matrix_rows(&analysis.cca_loadings.y_own),
        y_cross_loadings: matrix_rows(&analysis.cca_loadings.y_cross),
        x_cross_loadings: matrix_rows(&analysis.cca_loadings.x_cross),
    };

    let models = analysis
        .models
        .iter()
        .map(|m| ModelReport {
            name: m.name.clone(),
            display_name: m.display_name.clone(),
            coefficients: m
                .fit
                .regressor_names
                .iter()
                .enumerate()
                .map(|(i, n)| CoefficientRow {
                    regressor: n.clone(),
                    coefficient: m.fit.coefficients[i],
                    std_error: m.fit.std_errors[i],
                    t_stat: m.fit.t_stats[i],
                    p_value: m.fit.p_values[i],
                })
                .collect(),
            in_sample: m.in_sample,
        })
        .collect();

    let out_of_sample = OosReport {
        n_rows: oos.map_or(0, |o| o.n_rows),
        metrics: oos.map_or_else(Vec::new, |o| {
            o.metrics
                .iter()
                .map(|(name, metrics)| OosModelMetrics {
                    name: name.clone(),
                    metrics: *metrics,
                })
                .collect()
        }),
    };

    let in_dates: Vec<NaiveDate> = prep
        .in_rows
        .iter()
        .map(|&i| prep.btc.dates[i])
        .collect();
    let p = analysis.in_variates_y.cols();
    let plots = PlotData {
        scree: analysis
            .pca_model
            .explained_ratio
            .iter()
            .zip(&analysis.pca_model.cumulative_ratio)
            .enumerate()
            .map(|(i, (r, c))| (i + 1, *r, *c))
            .collect(),
        variate_dates: in_dates,
        variate_pairs: (0..p)
            .map(|i| {
                (
                    analysis.in_variates_y.col(i),
                    analysis.in_variates_x.col(i),
                )
            })
            .collect(),
        features: vec![
            ("features_btc".into(), prep.btc.clone()),
            ("features_eth".into(), prep.eth.clone()),
        ],
    };

    EvalReport {
        provenance,
        pearson: analysis.pearson.clone(),
        pca,
        cca,
        models,
        out_of_sample,
        plots,
    }
}

fn md_table(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(
        out,
        "|{}|",
        header.iter().map(|_| " --- ").collect::<Vec<_>>().join("|")
    );
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    let _ = writeln!(out);
}

fn loading_table(out: &mut String, title: &str, variate_prefix: &str, names: &[String], table: &[Vec<f64>]) {
    let _ = writeln!(out, "### {title}\n");
    let p = table.first().map_or(0, |r| r.len());
    let mut header = vec!["Feature".to_string()];
    header.extend((1..=p).map(|i| format!("{variate_prefix}{i}")));
    let rows: Vec<Vec<String>> = names
        .iter()
        .zip(table)
        .map(|(n, r)| {
            let mut row = vec![n.clone()];
            row.extend(r.iter().map(|v| sig6(*v)));
            row
        })
        .collect();
    md_table(out, &header, &rows);
}

/// Render the markdown report (the tabular mirror of the JSON report).
pub fn render_markdown(r: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Two-asset factor analysis report\n");

    let _ = writeln!(out, "## Provenance\n");
    let pv = &r.provenance;
    let _ = writeln!(out, "- config sha256: `{}`", pv.config_sha256);
    let _ = writeln!(out, "- BTC input sha256: `{}`", pv.btc_sha256);
    let _ = writeln!(out, "- ETH input sha256: `{}`", pv.eth_sha256);
    let _ = writeln!(
        out,
        "- in-sample window {} .. {} ({} rows)",
        pv.in_sample.start, pv.in_sample.end, pv.n_in_sample
    );
    let _ = writeln!(
        out,
        "- out-of-sample window {} .. {} ({} rows)",
        pv.out_sample.start, pv.out_sample.end, pv.n_out_sample
    );
    let _ = writeln!(
        out,
        "- rows skipped at parse: BTC {}, ETH {}; unmatched dates dropped: {}",
        pv.btc_rows_skipped, pv.eth_rows_skipped, pv.unmatched_dates_dropped
    );
    if pv.dropped_columns.is_empty() {
        let _ = writeln!(out, "- pruned columns: none");
    } else {
        for d in &pv.dropped_columns {
            let _ = writeln!(out, "- pruned column `{}`: {}", d.name, d.reason);
        }
    }
    if !pv.validation_warnings.is_empty() {
        for w in &pv.validation_warnings {
            let _ = writeln!(out, "- data warning: {w}");
        }
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "## Pearson correlations\n");
    let mut header = vec![String::new()];
    header.extend(r.pearson.labels.iter().cloned());
    let rows: Vec<Vec<String>> = r
        .pearson
        .labels
        .iter()
        .zip(&r.pearson.values)
        .map(|(l, vals)| {
            let mut row = vec![l.clone()];
            row.extend(vals.iter().map(|v| sig6(*v)));
            row
        })
        .collect();
    md_table(&mut out, &header, &rows);

    let _ = writeln!(out, "## PCA — total variance explained\n");
    let header: Vec<String> = ["Component", "Eigenvalue", "% of variance", "Cumulative %"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = (0..r.pca.eigenvalues.len())
        .map(|i| {
            vec![
                format!("Component {}", i + 1),
                sig6(r.pca.eigenvalues[i]),
                sig6(r.pca.explained_ratio[i] * 100.0),
                sig6(r.pca.cumulative_ratio[i] * 100.0),
            ]
        })
        .collect();
    md_table(&mut out, &header, &rows);
    for s in &r.pca.selections {
        let _ = writeln!(
            out,
            "- threshold {}: keep {} components",
            sig6(s.threshold),
            s.components
        );
    }
    let _ = writeln!(out);

    loading_table(
        &mut out,
        "PCA — correlation between components and features",
        "PC",
        &r.pca.feature_names,
        &r.pca.loadings,
    );

    let _ = writeln!(out, "## CCA — canonical correlations and Wilks' lambda\n");
    let header: Vec<String> = [
        "Canonical correlation",
        "Wilks' lambda",
        "Num DF",
        "Den DF",
        "F value",
        "Pr > F",
    ]
    .map(String::from)
    .to_vec();
    let rows: Vec<Vec<String>> = r
        .cca
        .correlations
        .iter()
        .zip(&r.cca.wilks)
        .map(|(rho, w)| {
            vec![
                sig6(*rho),
                sig6(w.lambda),
                sig6(w.df1),
                sig6(w.df2),
                sig6(w.f_value),
                sig6(w.p_value),
            ]
        })
        .collect();
    md_table(&mut out, &header, &rows);

    loading_table(
        &mut out,
        "CCA — x-side features vs x-side variates",
        "V_X",
        &r.cca.x_names,
        &r.cca.x_loadings,
    );
    loading_table(
        &mut out,
        "CCA — y-side features vs y-side variates",
        "V_Y",
        &r.cca.y_names,
        &r.cca.y_loadings,
    );
    loading_table(
        &mut out,
        "CCA — y-side features vs x-side variates (cross)",
        "V_X",
        &r.cca.y_names,
        &r.cca.y_cross_loadings,
    );
    loading_table(
        &mut out,
        "CCA — x-side features vs y-side variates (cross)",
        "V_Y",
        &r.cca.x_names,
        &r.cca.x_cross_loadings,
    );

    let _ = writeln!(out, "## Regression models\n");
    for m in &r.models {
        let _ = writeln!(out, "### {}\n", m.display_name);
        let header: Vec<String> = ["Regressor", "Coefficient", "t-stat", "p-value"]
            .map(String::from)
            .to_vec();
        let rows: Vec<Vec<String>> = m
            .coefficients
            .iter()
            .map(|c| {
                vec![
                    c.regressor.clone(),
                    sig6(c.coefficient),
                    sig6(c.t_stat),
                    sig6(c.p_value),
                ]
            })
            .collect();
        md_table(&mut out, &header, &rows);
    }

    let _ = writeln!(out, "## Forecast accuracy — in-sample\n");
    let header: Vec<String> = ["Model", "RMSE", "MAE"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = r
        .models
        .iter()
        .map(|m| {
            vec![
                m.display_name.clone(),
                sig6(m.in_sample.rmse),
                sig6(m.in_sample.mae),
            ]
        })
        .collect();
    md_table(&mut out, &header, &rows);

    let _ = writeln!(out, "## Forecast accuracy — out-of-sample\n");
    let display = |name: &str| -> String {
        r.models
            .iter()
            .find(|m| m.name == name)
            .map(|m| m.display_name.clone())
            .unwrap_or_else(|| name.to_string())
    };
    let rows: Vec<Vec<String>> = r
        .out_of_sample
        .metrics
        .iter()
        .map(|m| vec![display(&m.name), sig6(m.metrics.rmse), sig6(m.metrics.mae)])
        .collect();
    md_table(&mut out, &header, &rows);

    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.display().to_string(),
            source: e,
        })?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Write the report files selected by `cfg.formats` into
/// `cfg.output_dir`; returns the paths written. Bytes are deterministic
/// for fixed inputs.
pub fn emit_report(r: &EvalReport, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let dir = &cfg.output_dir;

    if cfg.formats.contains(&OutputFormat::Json) {
        let path = dir.join("report.json");
        let mut json = serde_json::to_string_pretty(r).expect("report serializes");
        json.push('\n');
        write_file(&path, json.as_bytes())?;
        written.push(path);
    }

    if cfg.formats.contains(&OutputFormat::Markdown) {
        let path = dir.join("report.md");
        write_file(&path, render_markdown(r).as_bytes())?;
        written.push(path);
    }

    if cfg.formats.contains(&OutputFormat::Csv) {
        let plots = dir.join("plots");

        let mut scree = String::from("component,explained_ratio,cumulative_ratio\n");
        for (i, ratio, cum) in &r.plots.scree {
            let _ = writeln!(scree, "{i},{},{}", sig6(*ratio), sig6(*cum));
        }
        let path = plots.join("scree.csv");
        write_file(&path, scree.as_bytes())?;
        written.push(path);

        for (idx, (vy, vx)) in r.plots.variate_pairs.iter().enumerate() {
            let mut csv = String::from("date,v_y,v_x\n");
            for ((d, a), b) in r.plots.variate_dates.iter().zip(vy).zip(vx) {
                let _ = writeln!(csv, "{},{},{}", d.format("%Y-%m-%d"), sig6(*a), sig6(*b));
            }
            let path = plots.join(format!("variate_pair_{}.csv", idx + 1));
            write_file(&path, csv.as_bytes())?;
            written.push(path);
        }

        for (label, block) in &r.plots.features {
            let path = plots.join(format!("{label}.csv"));
            write_file(&path, block.to_csv_with(sig6).as_bytes())?;
            written.push(path);
        }
    }

    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rust_float_formatting_rounds_half_even() {
        assert_eq!(format!("{:.0}", 2.5), "2");
        assert_eq!(format!("{:.0}", 3.5), "4");
        assert_eq!(format!("{:.1}", 0.25), "0.2");
        assert_eq!(format!("{:.1}", 0.75), "0.8");
    }

    #[test]
    fn sig6_positional_range() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(-1.0), "-1");
        assert_eq!(sig6(0.45374), "0.45374");
        assert_eq!(sig6(123.456), "123.456");
        assert_eq!(sig6(123456.0), "123456");
        assert_eq!(sig6(0.0001234567), "0.000123457");
        assert_eq!(sig6(199.117), "199.117");
        assert_eq!(sig6(0.965987), "0.965987");
        assert_eq!(sig6(100.0), "100");
        assert_eq!(sig6(-0.5457752), "-0.545775");
    }

    #[test]
    fn sig6_scientific_range() {
        assert_eq!(sig6(3.16494e-124), "3.16494e-124");
        assert_eq!(sig6(1.23456789e7), "1.23457e7"); // rounded at 6 digits
        assert_eq!(sig6(1e-5), "1e-5");
        assert_eq!(sig6(-2.5e10), "-2.5e10");
    }

    #[test]
    fn sig6_rounding_across_magnitude() {
        // 999999.5 rounds to 1e6, leaving the positional range
        assert_eq!(sig6(999999.6), "1e6");
        assert_eq!(sig6(0.99999996), "1");
    }

    #[test]
    fn sig6_round_trips_at_six_digits() {
        for &x in &[0.45374_f64, 3.16494e-124, 620.778, 1912.0, 0.00977338] {
            let s = sig6(x);
            let parsed: f64 = s.parse().unwrap();
            assert_eq!(sig6(parsed), s, "{x} -> {s}");
            assert!(((parsed - x) / x).abs() < 1e-5);
        }
    }
}
