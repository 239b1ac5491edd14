//! Factor engineering: log returns, the high-minus-low range factor,
//! weekly volatility momentum, an intraday variance proxy, plus
//! standardization and near-duplicate pruning of the assembled feature
//! matrices.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::market_data::AlignedPanel;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Number of trailing bars a row must see before volatility momentum is
/// defined (the denominator averages bars t−22..t).
pub const VMOM_WARMUP: usize = 22;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureColumn {
    pub name: String,
    pub values: Vec<f64>,
}

/// Per-column standardization parameters, fitted on a stated window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    pub reason: String,
}

/// A column-labelled numeric matrix with row dates. `scaler` is present
/// once the matrix has been standardized; `dropped` records columns
/// removed by pruning.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<FeatureColumn>,
    pub scaler: Option<Vec<ColumnScaler>>,
    pub dropped: Vec<DroppedColumn>,
}

impl FeatureMatrix {
    pub fn new(dates: Vec<NaiveDate>, columns: Vec<FeatureColumn>) -> Result<FeatureMatrix> {
        let n = dates.len();
        for c in &columns {
            if c.values.len() != n {
                return Err(Error::Shape(format!(
                    "column `{}` has {} values for {} dates",
                    c.name,
                    c.values.len(),
                    n
                )));
            }
        }
        for (i, a) in columns.iter().enumerate() {
            for b in &columns[i + 1..] {
                if a.name == b.name {
                    return Err(Error::Alignment(format!("duplicate column `{}`", a.name)));
                }
            }
        }
        Ok(FeatureMatrix {
            dates,
            columns,
            scaler: None,
            dropped: Vec::new(),
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn column(&self, name: &str) -> Option<&FeatureColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Row indices whose date falls in `[start, end]`.
    pub fn rows_in(&self, start: NaiveDate, end: NaiveDate) -> Vec<usize> {
        self.dates
            .iter()
            .enumerate()
            .filter(|(_, d)| **d >= start && **d <= end)
            .map(|(i, _)| i)
            .collect()
    }

    /// Copy of the matrix restricted to the given row indices.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            dates: rows.iter().map(|&i| self.dates[i]).collect(),
            columns: self
                .columns
                .iter()
                .map(|c| FeatureColumn {
                    name: c.name.clone(),
                    values: rows.iter().map(|&i| c.values[i]).collect(),
                })
                .collect(),
            scaler: self.scaler.clone(),
            dropped: self.dropped.clone(),
        }
    }

    /// Column-stacked dense matrix view of the data.
    pub fn to_matrix(&self) -> Matrix {
        let cols: Vec<Vec<f64>> = self.columns.iter().map(|c| c.values.clone()).collect();
        Matrix::from_cols(&cols).expect("columns share length by construction")
    }

    /// Render as CSV (date column plus named feature columns) using the
    /// supplied number formatter.
    pub fn to_csv_with(&self, fmt: impl Fn(f64) -> String) -> String {
        let mut out = String::from("date");
        for c in &self.columns {
            out.push(',');
            out.push_str(&c.name);
        }
        out.push('\n');
        for (i, d) in self.dates.iter().enumerate() {
            let _ = write!(out, "{}", d.format("%Y-%m-%d"));
            for c in &self.columns {
                out.push(',');
                out.push_str(&fmt(c.values[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Log returns ln(P_{t+1}/P_t); element t is aligned to the later date.
pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = prices.iter().find(|p| **p <= 0.0) {
        return Err(Error::Domain(format!(
            "log return of non-positive price {bad}"
        )));
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Daily range factor H_t − L_t.
pub fn hml(high: &[f64], low: &[f64]) -> Result<Vec<f64>> {
    if high.len() != low.len() {
        return Err(Error::Shape(format!(
            "hml over {} highs and {} lows",
            high.len(),
            low.len()
        )));
    }
    Ok(high.iter().zip(low).map(|(h, l)| h - l).collect())
}

/// Weekly volatility momentum: (P_t − P_{t−7}) divided by the trailing
/// mean of the range factor, (1/22)·Σ_{τ=t−22..t} HML_τ. Undefined for
/// the first [`VMOM_WARMUP`] rows and wherever the denominator is
/// exactly zero.
pub fn vmom(prices: &[f64], hml: &[f64]) -> Result<Vec<Option<f64>>> {
    if prices.len() != hml.len() {
        return Err(Error::Shape(format!(
            "vmom over {} prices and {} hml values",
            prices.len(),
            hml.len()
        )));
    }
    let n = prices.len();
    let mut out = vec![None; n];
    for t in VMOM_WARMUP..n {
        let denom: f64 = hml[t - VMOM_WARMUP..=t].iter().sum::<f64>() / VMOM_WARMUP as f64;
        if denom == 0.0 {
            continue;
        }
        out[t] = Some((prices[t] - prices[t - 7]) / denom);
    }
    Ok(out)
}

/// Intraday variance proxy: the squared signed log range. The sign
/// convention (positive on down days, negative on up days) washes out
/// under the square, so the result is (ln(H/L))² either way.
pub fn intraday_variance(o: &[f64], h: &[f64], l: &[f64], c: &[f64]) -> Result<Vec<f64>> {
    let n = o.len();
    if h.len() != n || l.len() != n || c.len() != n {
        return Err(Error::Shape("intraday variance over ragged inputs".into()));
    }
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        if h[t] <= 0.0 || l[t] <= 0.0 {
            return Err(Error::Domain(format!(
                "intraday variance of non-positive range bounds (H={}, L={})",
                h[t], l[t]
            )));
        }
        let log_range = (h[t] / l[t]).ln();
        let psi = if o[t] >= c[t] { log_range } else { -log_range };
        out.push(psi * psi);
    }
    Ok(out)
}

/// Z-score every column using mean and sample standard deviation
/// (divisor n−1) computed on the rows inside `[fit_start, fit_end]`
/// only. All rows are transformed; the fitted scaler is stored for
/// out-of-sample reuse.
pub fn standardize(
    m: &FeatureMatrix,
    fit_start: NaiveDate,
    fit_end: NaiveDate,
) -> Result<FeatureMatrix> {
    let fit_rows = m.rows_in(fit_start, fit_end);
    if fit_rows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "standardization window [{fit_start}, {fit_end}] covers {} rows",
            fit_rows.len()
        )));
    }
    let nf = fit_rows.len() as f64;
    let mut scalers = Vec::with_capacity(m.columns.len());
    let mut columns = Vec::with_capacity(m.columns.len());
    for col in &m.columns {
        let mean = fit_rows.iter().map(|&i| col.values[i]).sum::<f64>() / nf;
        let ss = fit_rows
            .iter()
            .map(|&i| {
                let d = col.values[i] - mean;
                d * d
            })
            .sum::<f64>();
        let stddev = (ss / (nf - 1.0)).sqrt();
        if stddev == 0.0 {
            return Err(Error::DegenerateColumn {
                column: col.name.clone(),
            });
        }
        scalers.push(ColumnScaler { mean, stddev });
        columns.push(FeatureColumn {
            name: col.name.clone(),
            values: col.values.iter().map(|v| (v - mean) / stddev).collect(),
        });
    }
    Ok(FeatureMatrix {
        dates: m.dates.clone(),
        columns,
        scaler: Some(scalers),
        dropped: m.dropped.clone(),
    })
}

/// Drop near-duplicate columns: scan pairs in declared order and, while
/// any pair's |pearson| exceeds `threshold`, drop the later column of
/// the first offending pair. Correlations are measured on `rows` (all
/// rows via [`prune_correlated`]).
pub fn prune_correlated_on(
    m: &FeatureMatrix,
    threshold: f64,
    rows: &[usize],
) -> Result<FeatureMatrix> {
    let mut kept: Vec<FeatureColumn> = m.columns.clone();
    let mut kept_scalers: Option<Vec<ColumnScaler>> = m.scaler.clone();
    let mut dropped = m.dropped.clone();

    'rescan: loop {
        for i in 0..kept.len() {
            for j in (i + 1)..kept.len() {
                let a: Vec<f64> = rows.iter().map(|&r| kept[i].values[r]).collect();
                let b: Vec<f64> = rows.iter().map(|&r| kept[j].values[r]).collect();
                let r = linalg::pearson(&a, &b)?;
                if r.abs() > threshold {
                    dropped.push(DroppedColumn {
                        name: kept[j].name.clone(),
                        reason: format!(
                            "|pearson| {:.6} with `{}` above {}",
                            r.abs(),
                            kept[i].name,
                            threshold
                        ),
                    });
                    kept.remove(j);
                    if let Some(s) = kept_scalers.as_mut() {
                        s.remove(j);
                    }
                    continue 'rescan;
                }
            }
        }
        break;
    }

    Ok(FeatureMatrix {
        dates: m.dates.clone(),
        columns: kept,
        scaler: kept_scalers,
        dropped,
    })
}

/// [`prune_correlated_on`] over every row. The default threshold used by
/// the pipeline is 0.995.
pub fn prune_correlated(m: &FeatureMatrix, threshold: f64) -> Result<FeatureMatrix> {
    let rows: Vec<usize> = (0..m.n_rows()).collect();
    prune_correlated_on(m, threshold, &rows)
}

/// Build the per-asset factor blocks from an aligned two-asset panel.
///
/// The left asset carries {Close, Return, Volume, HML, VMOM, IV}; the
/// right asset carries {Return, Volume, IV}. Rows where any feature of
/// either side is undefined (volatility-momentum warmup or a zero
/// denominator) are dropped from both matrices, so the two share one
/// date vector.
pub fn assemble_panel(p: &AlignedPanel) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let close_l: Vec<f64> = p.left.iter().map(|b| b.close).collect();
    let close_r: Vec<f64> = p.right.iter().map(|b| b.close).collect();

    let ret_l = log_returns(&close_l)?;
    let ret_r = log_returns(&close_r)?;

    let high_l: Vec<f64> = p.left.iter().map(|b| b.high).collect();
    let low_l: Vec<f64> = p.left.iter().map(|b| b.low).collect();
    let hml_l = hml(&high_l, &low_l)?;
    let vmom_l = vmom(&close_l, &hml_l)?;

    let open_l: Vec<f64> = p.left.iter().map(|b| b.open).collect();
    let iv_l = intraday_variance(&open_l, &high_l, &low_l, &close_l)?;

    let open_r: Vec<f64> = p.right.iter().map(|b| b.open).collect();
    let high_r: Vec<f64> = p.right.iter().map(|b| b.high).collect();
    let low_r: Vec<f64> = p.right.iter().map(|b| b.low).collect();
    let iv_r = intraday_variance(&open_r, &high_r, &low_r, &close_r)?;

    let usable: Vec<usize> = (VMOM_WARMUP..p.dates.len())
        .filter(|&i| vmom_l[i].is_some())
        .collect();
    if usable.is_empty() {
        return Err(Error::InsufficientData(
            "no rows survive the volatility-momentum warmup".into(),
        ));
    }

    let dates: Vec<NaiveDate> = usable.iter().map(|&i| p.dates[i]).collect();
    let take = |v: &[f64]| -> Vec<f64> { usable.iter().map(|&i| v[i]).collect() };
    // returns are aligned to the later date: element i-1 belongs to date i
    let take_ret = |v: &[f64]| -> Vec<f64> { usable.iter().map(|&i| v[i - 1]).collect() };

    let left = FeatureMatrix::new(
        dates.clone(),
        vec![
            FeatureColumn {
                name: format!("{}_Close", p.left_id),
                values: take(&close_l),
            },
            FeatureColumn {
                name: format!("{}_Return", p.left_id),
                values: take_ret(&ret_l),
            },
            FeatureColumn {
                name: format!("{}_Volume", p.left_id),
                values: take(&p.left.iter().map(|b| b.volume).collect::<Vec<_>>()),
            },
            FeatureColumn {
                name: format!("{}_HML", p.left_id),
                values: take(&hml_l),
            },
            FeatureColumn {
                name: format!("{}_VMOM", p.left_id),
                values: usable.iter().map(|&i| vmom_l[i].unwrap()).collect(),
            },
            FeatureColumn {
                name: format!("{}_IV", p.left_id),
                values: take(&iv_l),
            },
        ],
    )?;

    let right = FeatureMatrix::new(
        dates,
        vec![
            FeatureColumn {
                name: format!("{}_Return", p.right_id),
                values: take_ret(&ret_r),
            },
            FeatureColumn {
                name: format!("{}_Volume", p.right_id),
                values: take(&p.right.iter().map(|b| b.volume).collect::<Vec<_>>()),
            },
            FeatureColumn {
                name: format!("{}_IV", p.right_id),
                values: take(&iv_r),
            },
        ],
    )?;

    Ok((left, right))
}
