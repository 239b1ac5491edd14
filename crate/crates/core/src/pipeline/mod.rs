//! End-to-end experiment orchestration: ingest two OHLCV files, build
//! and standardize the factor panel, run the Pearson/PCA/CCA analyses,
//! fit the competing forecasting models, and score them in and out of
//! sample — all from one JSON configuration.

pub mod report;

use crate::cca::{self, CcaModel, VariateLoadings, WilksTest};
use crate::error::{Error, Result};
use crate::features::{self, DroppedColumn, FeatureColumn, FeatureMatrix};
use crate::linalg::{self, Matrix};
use crate::market_data;
use crate::pca::{self, PcaModel};
use crate::regression::{self, ForecastMetrics, RegressionFit};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub use report::{emit_report, EvalReport};

/// Inclusive calendar-date window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn contains(&self, d: NaiveDate) -> bool {
        d >= self.start && d <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Markdown,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<OutputFormat> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "md" | "markdown" => Ok(OutputFormat::Markdown),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::Config(format!("unknown output format `{other}`"))),
        }
    }
}

fn default_in_sample() -> DateRange {
    DateRange {
        start: NaiveDate::from_ymd_opt(2017, 12, 15).unwrap(),
        end: NaiveDate::from_ymd_opt(2020, 12, 15).unwrap(),
    }
}

fn default_out_sample() -> DateRange {
    DateRange {
        start: NaiveDate::from_ymd_opt(2020, 12, 16).unwrap(),
        end: NaiveDate::from_ymd_opt(2021, 1, 31).unwrap(),
    }
}

fn default_prune_threshold() -> f64 {
    0.995
}

fn default_pca_thresholds() -> Vec<f64> {
    vec![0.75, 0.85]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("report")
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Json, OutputFormat::Markdown, OutputFormat::Csv]
}

/// Experiment configuration, readable from JSON. Dates use `YYYY-MM-DD`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub btc_csv: PathBuf,
    pub eth_csv: PathBuf,
    #[serde(default = "default_in_sample")]
    pub in_sample: DateRange,
    #[serde(default = "default_out_sample")]
    pub out_sample: DateRange,
    #[serde(default = "default_prune_threshold")]
    pub prune_threshold: f64,
    #[serde(default = "default_pca_thresholds")]
    pub pca_thresholds: Vec<f64>,
    #[serde(default)]
    pub intercept: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_sample.start > self.in_sample.end {
            return Err(Error::Config("in_sample window is inverted".into()));
        }
        if self.out_sample.start > self.out_sample.end {
            return Err(Error::Config("out_sample window is inverted".into()));
        }
        if self.in_sample.end >= self.out_sample.start {
            return Err(Error::Config(
                "in_sample must precede and not overlap out_sample".into(),
            ));
        }
        for t in &self.pca_thresholds {
            if !(*t > 0.0 && *t <= 1.0) {
                return Err(Error::Config(format!(
                    "pca threshold {t} outside (0, 1]"
                )));
            }
        }
        if !(self.prune_threshold > 0.0 && self.prune_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "prune threshold {} outside (0, 1]",
                self.prune_threshold
            )));
        }
        if self.formats.is_empty() {
            return Err(Error::Config("no output formats selected".into()));
        }
        Ok(())
    }

    /// Canonical JSON used for the provenance hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything the in-sample analysis and out-of-sample evaluation draw
/// on: the standardized, pruned feature blocks over the full panel plus
/// the row split and ingestion bookkeeping.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub btc: FeatureMatrix,
    pub eth: FeatureMatrix,
    pub in_rows: Vec<usize>,
    pub oos_rows: Vec<usize>,
    pub eth_return_name: String,
    pub provenance: ProvenanceInputs,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProvenanceInputs {
    pub btc_sha256: String,
    pub eth_sha256: String,
    pub btc_rows_skipped: usize,
    pub eth_rows_skipped: usize,
    pub unmatched_dates_dropped: usize,
    pub validation_warnings: Vec<String>,
    pub dropped_columns: Vec<DroppedColumn>,
}

/// Stages 1–2: ingest, validate, align, build features, standardize on
/// the in-sample window, prune near-duplicates on in-sample
/// correlations.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let read = |path: &Path| -> Result<Vec<u8>> {
        std::fs::read(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    };
    let btc_bytes = read(&cfg.btc_csv).map_err(|e| e.in_stage("ingest"))?;
    let eth_bytes = read(&cfg.eth_csv).map_err(|e| e.in_stage("ingest"))?;

    let mut btc = market_data::parse_ohlcv_csv(&btc_bytes, "BTC").map_err(|e| e.in_stage("ingest"))?;
    let mut eth = market_data::parse_ohlcv_csv(&eth_bytes, "ETH").map_err(|e| e.in_stage("ingest"))?;

    let mut warnings: Vec<String> = Vec::new();
    for (series, label) in [(&mut btc, "BTC"), (&mut eth, "ETH")] {
        for w in market_data::validate_series(series) {
            warnings.push(format!("{label} {w}"));
        }
    }

    let panel = market_data::align(&btc, &eth, cfg.in_sample.start, cfg.out_sample.end)
        .map_err(|e| e.in_stage("align"))?;

    let (btc_feat, eth_feat) = features::assemble_panel(&panel).map_err(|e| e.in_stage("features"))?;

    // union of both blocks shares one date vector; standardize with the
    // in-sample scaler, then prune on in-sample correlations
    let mut union_cols: Vec<FeatureColumn> = btc_feat.columns.clone();
    union_cols.extend(eth_feat.columns.clone());
    let union = FeatureMatrix::new(btc_feat.dates.clone(), union_cols)?;

    let union = features::standardize(&union, cfg.in_sample.start, cfg.in_sample.end)
        .map_err(|e| e.in_stage("standardize"))?;

    let in_rows = union.rows_in(cfg.in_sample.start, cfg.in_sample.end);
    let oos_rows = union.rows_in(cfg.out_sample.start, cfg.out_sample.end);
    if in_rows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "in-sample window holds {} usable rows",
            in_rows.len()
        ))
        .in_stage("standardize"));
    }

    let pruned = features::prune_correlated_on(&union, cfg.prune_threshold, &in_rows)
        .map_err(|e| e.in_stage("prune"))?;

    // partition the surviving union columns back into the two blocks
    let btc_names = btc_feat.names();
    let take = |names: &[String]| -> Result<FeatureMatrix> {
        let cols: Vec<FeatureColumn> = pruned
            .columns
            .iter()
            .filter(|c| names.contains(&c.name))
            .cloned()
            .collect();
        let scaler = pruned.scaler.as_ref().map(|s| {
            pruned
                .columns
                .iter()
                .zip(s)
                .filter(|(c, _)| names.contains(&c.name))
                .map(|(_, sc)| *sc)
                .collect()
        });
        let mut m = FeatureMatrix::new(pruned.dates.clone(), cols)?;
        m.scaler = scaler;
        m.dropped = pruned
            .dropped
            .iter()
            .filter(|d| names.contains(&d.name))
            .cloned()
            .collect();
        Ok(m)
    };
    let btc_block = take(&btc_names)?;
    let eth_block = take(&eth_feat.names())?;

    let eth_return_name = "ETH_Return".to_string();

    Ok(Prepared {
        btc: btc_block,
        eth: eth_block,
        in_rows,
        oos_rows,
        eth_return_name,
        provenance: ProvenanceInputs {
            btc_sha256: sha256_hex(&btc_bytes),
            eth_sha256: sha256_hex(&eth_bytes),
            btc_rows_skipped: btc.skipped_rows,
            eth_rows_skipped: eth.skipped_rows,
            unmatched_dates_dropped: panel.dropped_dates,
            validation_warnings: warnings,
            dropped_columns: pruned.dropped.clone(),
        },
    })
}

/// A labelled symmetric correlation matrix.
#[derive(Debug, Clone, Serialize)]
pub struct LabeledMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

/// Pearson correlations across the union of the given blocks' columns.
/// All blocks must share dates.
pub fn pearson_matrix(blocks: &[&FeatureMatrix]) -> Result<LabeledMatrix> {
    let mut labels = Vec::new();
    let mut cols: Vec<&[f64]> = Vec::new();
    let mut n_rows = None;
    for b in blocks {
        match n_rows {
            None => n_rows = Some(b.n_rows()),
            Some(n) if n == b.n_rows() => {}
            Some(n) => {
                return Err(Error::Shape(format!(
                    "blocks with {n} and {} rows",
                    b.n_rows()
                )))
            }
        }
        for c in &b.columns {
            labels.push(c.name.clone());
            cols.push(&c.values);
        }
    }
    if n_rows.unwrap_or(0) < 2 {
        return Err(Error::InsufficientRows(n_rows.unwrap_or(0)));
    }
    let k = cols.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in (i + 1)..k {
            let r = linalg::pearson(cols[i], cols[j])?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(LabeledMatrix { labels, values })
}

/// One fitted forecasting model with its in-sample score.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub name: String,
    pub display_name: String,
    pub fit: RegressionFit,
    pub in_sample: ForecastMetrics,
    pub spec: ModelSpec,
}

/// How a model derives its regressors from the BTC feature block.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// All (pruned) BTC features as-is.
    Initial,
    /// The BTC-side canonical variates X·beta.
    CanonicalVariates,
    /// The first k principal component projections.
    Principal { threshold: f64, k: usize },
}

/// Everything computed on the in-sample window: analyses and fitted
/// models.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub pearson: LabeledMatrix,
    pub pca_model: PcaModel,
    pub pca_loadings: Matrix,
    pub selections: Vec<(f64, usize)>,
    pub cca_model: CcaModel,
    pub wilks: Vec<WilksTest>,
    pub cca_loadings: VariateLoadings,
    pub in_variates_y: Matrix,
    pub in_variates_x: Matrix,
    pub models: Vec<FittedModel>,
    pub n_in_sample: usize,
}

fn design_for(
    spec: &ModelSpec,
    btc: &FeatureMatrix,
    analysis_pca: &PcaModel,
    analysis_cca: &CcaModel,
    intercept: bool,
) -> Result<(Matrix, Vec<String>)> {
    let (m, mut names): (Matrix, Vec<String>) = match spec {
        ModelSpec::Initial => (btc.to_matrix(), btc.names()),
        ModelSpec::CanonicalVariates => {
            let vx = cca::x_variates(analysis_cca, btc)?;
            let names = (1..=vx.cols()).map(|i| format!("V_X{i}")).collect();
            (vx, names)
        }
        ModelSpec::Principal { k, .. } => {
            let w = pca::project(btc, analysis_pca, *k)?;
            let names = (1..=*k).map(|i| format!("PC{i}")).collect();
            (w, names)
        }
    };
    if !intercept {
        return Ok((m, names));
    }
    let mut cols = vec![vec![1.0; m.rows()]];
    for j in 0..m.cols() {
        cols.push(m.col(j));
    }
    names.insert(0, "Intercept".into());
    Ok((Matrix::from_cols(&cols)?, names))
}

/// Stages 3–6: Pearson matrix, PCA with threshold selection, CCA with
/// Wilks tests and loadings, and the four competing OLS fits — all on
/// the in-sample rows only.
pub fn analyze(prep: &Prepared, cfg: &ExperimentConfig) -> Result<Analysis> {
    let btc_in = prep.btc.select_rows(&prep.in_rows);
    let eth_in = prep.eth.select_rows(&prep.in_rows);

    let pearson = pearson_matrix(&[&btc_in, &eth_in]).map_err(|e| e.in_stage("pearson"))?;

    let pca_model = pca::fit_pca(&btc_in).map_err(|e| e.in_stage("pca"))?;
    let full_w = pca::project(&btc_in, &pca_model, pca_model.eigenvalues.len())
        .map_err(|e| e.in_stage("pca"))?;
    let pca_loadings = pca::pc_loadings(&btc_in, &full_w).map_err(|e| e.in_stage("pca"))?;
    let mut selections: Vec<(f64, usize)> = cfg
        .pca_thresholds
        .iter()
        .map(|t| (*t, pca::select_components(&pca_model, *t)))
        .collect();
    selections.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));

    if eth_in.columns.is_empty() {
        return Err(Error::NotPositiveDefinite {
            pivot: 0,
            hint: "; y-block covariance collapsed: every column was pruned as a duplicate".into(),
        }
        .in_stage("cca"));
    }
    let cca_model = cca::fit_cca(&eth_in, &btc_in).map_err(|e| e.in_stage("cca"))?;
    let wilks = cca::wilks_tests(&cca_model).map_err(|e| e.in_stage("cca"))?;
    let cca_loadings =
        cca::variate_loadings(&cca_model, &eth_in, &btc_in).map_err(|e| e.in_stage("cca"))?;
    let (in_variates_y, in_variates_x) =
        cca::variates(&cca_model, &eth_in, &btc_in).map_err(|e| e.in_stage("cca"))?;

    let target = eth_in
        .column(&prep.eth_return_name)
        .ok_or_else(|| {
            Error::InsufficientData(format!(
                "target column `{}` was pruned away",
                prep.eth_return_name
            ))
            .in_stage("regression")
        })?
        .values
        .clone();

    let mut specs: Vec<(String, String, ModelSpec)> = vec![
        ("initial".into(), "initial dataset".into(), ModelSpec::Initial),
        ("cca".into(), "CCA".into(), ModelSpec::CanonicalVariates),
    ];
    for (t, k) in &selections {
        specs.push((
            format!("pca@{t}"),
            format!("PCA with threshold {:.0}%", t * 100.0),
            ModelSpec::Principal {
                threshold: *t,
                k: *k,
            },
        ));
    }

    let mut models = Vec::new();
    for (name, display_name, spec) in specs {
        let (x, names) = design_for(&spec, &btc_in, &pca_model, &cca_model, cfg.intercept)
            .map_err(|e| e.in_stage("regression"))?;
        let fit = regression::fit_ols(&x, &target, &names).map_err(|e| e.in_stage("regression"))?;
        let y_hat = regression::predict(&fit, &x).map_err(|e| e.in_stage("regression"))?;
        let in_sample =
            regression::forecast_metrics(&target, &y_hat).map_err(|e| e.in_stage("regression"))?;
        models.push(FittedModel {
            name,
            display_name,
            fit,
            in_sample,
            spec,
        });
    }

    Ok(Analysis {
        pearson,
        pca_model,
        pca_loadings,
        selections,
        cca_model,
        wilks,
        cca_loadings,
        in_variates_y,
        in_variates_x,
        models,
        n_in_sample: prep.in_rows.len(),
    })
}

/// Per-model out-of-sample scores over the held-out window.
#[derive(Debug, Clone)]
pub struct OosEvaluation {
    pub metrics: Vec<(String, ForecastMetrics)>,
    pub n_rows: usize,
}

/// Stage 7: transform the held-out rows with the in-sample scaler and
/// fitted projections, predict, and score.
pub fn evaluate_out_of_sample(
    prep: &Prepared,
    analysis: &Analysis,
    cfg: &ExperimentConfig,
) -> Result<OosEvaluation> {
    if prep.oos_rows.is_empty() {
        return Err(Error::EmptyWindow.in_stage("out-of-sample"));
    }
    let btc_oos = prep.btc.select_rows(&prep.oos_rows);
    let eth_oos = prep.eth.select_rows(&prep.oos_rows);
    let target = eth_oos
        .column(&prep.eth_return_name)
        .ok_or_else(|| {
            Error::InsufficientData("target column missing out of sample".into())
                .in_stage("out-of-sample")
        })?
        .values
        .clone();

    let mut metrics = Vec::new();
    for model in &analysis.models {
        let (x, _) = design_for(
            &model.spec,
            &btc_oos,
            &analysis.pca_model,
            &analysis.cca_model,
            cfg.intercept,
        )
        .map_err(|e| e.in_stage("out-of-sample"))?;
        let y_hat = regression::predict(&model.fit, &x).map_err(|e| e.in_stage("out-of-sample"))?;
        let m = regression::forecast_metrics(&target, &y_hat)
            .map_err(|e| e.in_stage("out-of-sample"))?;
        metrics.push((model.name.clone(), m));
    }
    Ok(OosEvaluation {
        metrics,
        n_rows: prep.oos_rows.len(),
    })
}

/// Run the whole experiment: prepare, analyze in-sample, evaluate
/// out-of-sample, and assemble the report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let analysis = analyze(&prep, cfg)?;
    let oos = evaluate_out_of_sample(&prep, &analysis, cfg)?;
    Ok(report::assemble_report(cfg, &prep, &analysis, Some(&oos)))
}
