//! OHLCV ingestion: parsing the seven-column vendor CSV layout,
//! sanity-checking bars, and date-aligning two assets into a joint panel.

use crate::error::{Error, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;

pub const CSV_HEADER: &str = "Date,Open,High,Low,Close,Adj Close,Volume";

/// One daily bar. Prices are in the quote currency, volume in traded
/// units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcvBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

/// Daily history for one asset. Dates are strictly increasing with no
/// duplicates; both properties are enforced at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct OhlcvSeries {
    pub asset_id: String,
    pub bars: Vec<OhlcvBar>,
    /// Data rows skipped for missing ("null" or empty) numeric fields.
    pub skipped_rows: usize,
}

/// Two assets joined on their common dates.
#[derive(Debug, Clone)]
pub struct AlignedPanel {
    pub dates: Vec<NaiveDate>,
    pub left_id: String,
    pub right_id: String,
    pub left: Vec<OhlcvBar>,
    pub right: Vec<OhlcvBar>,
    /// In-window dates present in exactly one of the two series.
    pub dropped_dates: usize,
}

/// Parse the vendor CSV layout (`Date,Open,High,Low,Close,Adj Close,Volume`).
///
/// Rows whose numeric fields are empty or the literal `null` are skipped
/// and counted. The `Adj Close` column is read and discarded. Bars come
/// back sorted by date; a repeated date is an error.
pub fn parse_ohlcv_csv(bytes: &[u8], asset_id: &str) -> Result<OhlcvSeries> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::Format {
        expected: "UTF-8 text".into(),
        got: "invalid UTF-8".into(),
    })?;

    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h.trim().trim_start_matches('\u{feff}'),
        None => {
            return Err(Error::Format {
                expected: CSV_HEADER.into(),
                got: "<empty input>".into(),
            })
        }
    };
    if header != CSV_HEADER {
        return Err(Error::Format {
            expected: CSV_HEADER.into(),
            got: header.into(),
        });
    }

    let mut bars = Vec::new();
    let mut skipped = 0usize;
    for (idx, raw) in lines {
        let line_no = idx + 1; // 1-based, counting the header as line 1
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 7 {
            return Err(Error::Row {
                line: line_no,
                reason: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let date = NaiveDate::parse_from_str(fields[0], "%Y-%m-%d").map_err(|e| Error::Row {
            line: line_no,
            reason: format!("bad date `{}`: {e}", fields[0]),
        })?;
        // numeric fields: open, high, low, close, adj close, volume
        if fields[1..].iter().any(|f| f.is_empty() || *f == "null") {
            skipped += 1;
            continue;
        }
        let mut nums = [0.0f64; 6];
        for (k, field) in fields[1..].iter().enumerate() {
            nums[k] = field.parse().map_err(|e| Error::Row {
                line: line_no,
                reason: format!("bad number `{field}`: {e}"),
            })?;
        }
        bars.push(OhlcvBar {
            date,
            open: nums[0],
            high: nums[1],
            low: nums[2],
            close: nums[3],
            // nums[4] is Adj Close, intentionally unused
            volume: nums[5],
        });
    }

    bars.sort_by_key(|b| b.date);
    for w in bars.windows(2) {
        if w[0].date == w[1].date {
            return Err(Error::DuplicateDate {
                asset: asset_id.into(),
                date: w[0].date,
            });
        }
    }

    Ok(OhlcvSeries {
        asset_id: asset_id.into(),
        bars,
        skipped_rows: skipped,
    })
}

/// Re-emit a series in the same CSV layout it was parsed from. `Adj
/// Close` is written equal to `Close`.
pub fn serialize_ohlcv_csv(series: &OhlcvSeries) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for b in &series.bars {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            b.date.format("%Y-%m-%d"),
            b.open,
            b.high,
            b.low,
            b.close,
            b.close,
            b.volume
        )
        .expect("string write");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WarningKind {
    /// high < low; the two were swapped in place.
    HighLowSwapped,
    NonPositivePrice,
    ZeroVolume,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationWarning {
    pub date: NaiveDate,
    pub kind: WarningKind,
}

impl std::fmt::Display for ValidationWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let what = match self.kind {
            WarningKind::HighLowSwapped => "high < low, values swapped",
            WarningKind::NonPositivePrice => "non-positive price",
            WarningKind::ZeroVolume => "zero volume",
        };
        write!(f, "{}: {}", self.date, what)
    }
}

/// Sanity-check a series without aborting: returns a warning per anomaly
/// and repairs high<low bars by swapping the two values.
pub fn validate_series(series: &mut OhlcvSeries) -> Vec<ValidationWarning> {
    let mut warnings = Vec::new();
    for bar in &mut series.bars {
        if bar.high < bar.low {
            std::mem::swap(&mut bar.high, &mut bar.low);
            warnings.push(ValidationWarning {
                date: bar.date,
                kind: WarningKind::HighLowSwapped,
            });
        }
        if bar.open <= 0.0 || bar.high <= 0.0 || bar.low <= 0.0 || bar.close <= 0.0 {
            warnings.push(ValidationWarning {
                date: bar.date,
                kind: WarningKind::NonPositivePrice,
            });
        }
        if bar.volume == 0.0 {
            warnings.push(ValidationWarning {
                date: bar.date,
                kind: WarningKind::ZeroVolume,
            });
        }
    }
    warnings
}

/// Join two series on the dates both have inside `[start, end]`
/// (inclusive). Window dates carried by only one series are dropped and
/// counted.
pub fn align(
    a: &OhlcvSeries,
    b: &OhlcvSeries,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<AlignedPanel> {
    if start > end {
        return Err(Error::Config(format!(
            "alignment window starts after it ends ({start} > {end})"
        )));
    }
    let in_window = |bar: &&OhlcvBar| bar.date >= start && bar.date <= end;
    let dates_a: BTreeSet<NaiveDate> = a.bars.iter().filter(in_window).map(|b| b.date).collect();
    let dates_b: BTreeSet<NaiveDate> = b.bars.iter().filter(in_window).map(|b| b.date).collect();

    let common: Vec<NaiveDate> = dates_a.intersection(&dates_b).copied().collect();
    if common.is_empty() {
        return Err(Error::EmptyPanel {
            left: a.asset_id.clone(),
            right: b.asset_id.clone(),
        });
    }
    let dropped = dates_a.symmetric_difference(&dates_b).count();

    let keep: BTreeSet<NaiveDate> = common.iter().copied().collect();
    let pick = |s: &OhlcvSeries| -> Vec<OhlcvBar> {
        s.bars.iter().filter(|b| keep.contains(&b.date)).copied().collect()
    };

    Ok(AlignedPanel {
        dates: common,
        left_id: a.asset_id.clone(),
        right_id: b.asset_id.clone(),
        left: pick(a),
        right: pick(b),
        dropped_dates: dropped,
    })
}
