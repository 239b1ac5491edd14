//! The bundled synthetic two-asset dataset: a deterministic generator
//! and a hash manifest verifier.
//!
//! The series mimic the broad shape of 2018–2021 crypto majors — a deep
//! bear market, a recovery, a crash, then a strong late-2020 rally that
//! keeps accelerating through the held-out window — with a shared
//! return factor, strongly coupled volumes, and a common range/activity
//! regime. A handful of vendor-style blemishes are injected on purpose:
//! missing dates, `null` fields, and one inverted high/low bar.

use chrono::NaiveDate;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use tandem_core::pipeline::sha256_hex;
use tandem_core::{Error, Result};

pub const SEED: u64 = 20171215;

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

/// Daily drift and volatility of the common log-return factor.
fn regime(d: NaiveDate) -> (f64, f64) {
    if d <= date(2018, 2, 5) {
        (-0.012, 0.068) // post-peak washout
    } else if d <= date(2018, 12, 15) {
        (-0.004, 0.042) // long bear
    } else if d <= date(2019, 6, 30) {
        (0.004, 0.032) // recovery
    } else if d <= date(2020, 3, 9) {
        (-0.001, 0.024) // quiet chop
    } else if d <= date(2020, 3, 25) {
        (-0.020, 0.095) // crash
    } else if d <= date(2020, 9, 30) {
        (0.0045, 0.030) // rebuild
    } else if d <= date(2020, 12, 15) {
        (0.010, 0.038) // breakout
    } else {
        (0.016, 0.055) // parabolic continuation (held-out window)
    }
}

struct Gauss {
    rng: ChaCha8Rng,
}

impl Gauss {
    fn new(seed: u64) -> Gauss {
        Gauss {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Standard normal via Box–Muller.
    fn normal(&mut self) -> f64 {
        loop {
            let u1 = self.rng.gen::<f64>();
            if u1 > 1e-300 {
                let u2 = self.rng.gen::<f64>();
                return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            }
        }
    }
}

struct Row {
    date: NaiveDate,
    open: f64,
    high: f64,
    low: f64,
    close: f64,
    volume: f64,
}

struct AssetSeries {
    rows: Vec<Row>,
}

impl AssetSeries {
    fn to_csv(
        &self,
        missing_dates: &[NaiveDate],
        null_volume_dates: &[NaiveDate],
        swapped_dates: &[NaiveDate],
    ) -> String {
        let mut out = String::from("Date,Open,High,Low,Close,Adj Close,Volume\n");
        for r in &self.rows {
            if missing_dates.contains(&r.date) {
                continue;
            }
            let (high, low) = if swapped_dates.contains(&r.date) {
                (r.low, r.high)
            } else {
                (r.high, r.low)
            };
            let volume = if null_volume_dates.contains(&r.date) {
                "null".to_string()
            } else {
                format!("{:.0}", r.volume)
            };
            let _ = writeln!(
                out,
                "{},{:.2},{:.2},{:.2},{:.2},{:.2},{}",
                r.date.format("%Y-%m-%d"),
                r.open,
                high,
                low,
                r.close,
                r.close,
                volume
            );
        }
        out
    }
}

/// Generate both assets over 2017-12-15 .. 2021-01-31.
fn generate_series() -> (AssetSeries, AssetSeries) {
    let mut g = Gauss::new(SEED);

    let start = date(2017, 12, 15);
    let end = date(2021, 1, 31);

    let mut btc_rows = Vec::new();
    let mut eth_rows = Vec::new();

    let mut ln_btc = 17500.0_f64.ln();
    let mut ln_eth = 700.0_f64.ln();
    let ln_btc0 = ln_btc;
    let ln_eth0 = ln_eth;
    let mut btc_close_prev = ln_btc.exp();
    let mut eth_close_prev = ln_eth.exp();
    let mut activity = 0.0_f64; // shared AR(1) trading-activity factor

    let mut d = start;
    while d <= end {
        let (mu, sigma) = regime(d);

        let z_common = g.normal();
        let z_btc = g.normal();
        let z_eth = g.normal();
        let r_btc = mu + sigma * (0.97 * z_common + 0.243 * z_btc);
        let r_eth = 1.1 * mu + 1.2 * sigma * (0.90 * z_common + 0.436 * z_eth);
        ln_btc += r_btc;
        ln_eth += r_eth;

        let g_range = g.normal();
        let e_btc = g.normal();
        let e_eth = g.normal();
        let intensity_btc = 0.55 + 0.95 * (0.7 * g_range + 0.714 * e_btc).abs();
        let intensity_eth = 0.55 + 0.95 * (0.7 * g_range + 0.714 * e_eth).abs();
        // percentage ranges widen as price falls (bear markets trade
        // proportionally wilder), which keeps the dollar range factor
        // from just tracking the price level
        let tilt_btc = (0.85 * (ln_btc0 - ln_btc)).exp();
        let tilt_eth = (0.85 * (ln_eth0 - ln_eth)).exp();
        let range_btc = sigma * intensity_btc * tilt_btc;
        let range_eth = 1.2 * sigma * intensity_eth * tilt_eth;

        activity = 0.96 * activity + 0.18 * g.normal();
        let regime_boost = 2.0 * (sigma - 0.030) / 0.030;
        let z_vol_btc = g.normal();
        let z_vol_eth = g.normal();
        let ln_vol_btc = 21.4
            + 1.0 * (ln_btc - ln_btc0)
            + 0.75 * activity
            + 0.6 * regime_boost
            + 0.25 * intensity_btc
            + 0.18 * z_vol_btc;
        let ln_vol_eth = 20.2
            + 1.0 * (ln_eth - ln_eth0)
            + 0.75 * activity
            + 0.6 * regime_boost
            + 0.25 * intensity_eth
            + 0.18 * z_vol_eth;

        let gap_btc = 0.0015 * g.normal();
        let gap_eth = 0.0015 * g.normal();
        let split_btc = 0.3 + 0.4 * g.uniform();
        let split_eth = 0.3 + 0.4 * g.uniform();

        let push = |rows: &mut Vec<Row>,
                        close_prev: f64,
                        close: f64,
                        gap: f64,
                        range: f64,
                        split: f64,
                        volume: f64| {
            let open = close_prev * gap.exp();
            let top = open.max(close);
            let bottom = open.min(close);
            rows.push(Row {
                date: d,
                open,
                high: top * (range * split).exp(),
                low: bottom * (-range * (1.0 - split)).exp(),
                close,
                volume,
            });
        };

        let btc_close = ln_btc.exp();
        let eth_close = ln_eth.exp();
        push(
            &mut btc_rows,
            btc_close_prev,
            btc_close,
            gap_btc,
            range_btc,
            split_btc,
            ln_vol_btc.exp(),
        );
        push(
            &mut eth_rows,
            eth_close_prev,
            eth_close,
            gap_eth,
            range_eth,
            split_eth,
            ln_vol_eth.exp(),
        );
        btc_close_prev = btc_close;
        eth_close_prev = eth_close;

        d += chrono::Duration::days(1);
    }

    (AssetSeries { rows: btc_rows }, AssetSeries { rows: eth_rows })
}

/// Vendor-style blemishes, fixed by seed.
fn blemishes(rows: &[Row], seed: u64, p_missing: f64, p_null: f64) -> (Vec<NaiveDate>, Vec<NaiveDate>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut missing = Vec::new();
    let mut nulls = Vec::new();
    for r in rows {
        let roll: f64 = rng.gen();
        // keep the first month intact so the warmup window stays dense
        if r.date < date(2018, 2, 1) {
            continue;
        }
        if roll < p_missing {
            missing.push(r.date);
        } else if roll < p_missing + p_null {
            nulls.push(r.date);
        }
    }
    (missing, nulls)
}

pub fn generate(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let (btc, eth) = generate_series();

    let (btc_missing, _) = blemishes(&btc.rows, SEED ^ 0xB7C, 0.008, 0.0);
    let (eth_missing, eth_nulls) = blemishes(&eth.rows, SEED ^ 0xE74, 0.004, 0.008);
    let swapped = vec![date(2018, 6, 13)];

    let btc_csv = btc.to_csv(&btc_missing, &[], &[]);
    let eth_csv = eth.to_csv(&eth_missing, &eth_nulls, &swapped);

    let config = serde_json::json!({
        "btc_csv": "fixtures/BTC.csv",
        "eth_csv": "fixtures/ETH.csv",
        "output_dir": "report",
    });
    let mut config_text = serde_json::to_string_pretty(&config).expect("serializes");
    config_text.push('\n');

    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;

    let mut written = Vec::new();
    let mut entries = Vec::new();
    for (name, text) in [
        ("BTC.csv", &btc_csv),
        ("ETH.csv", &eth_csv),
        ("config.json", &config_text),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        entries.push(ManifestEntry {
            path: name.to_string(),
            sha256: sha256_hex(text.as_bytes()),
        });
        written.push(path);
    }

    let manifest = Manifest { files: entries };
    let manifest_path = dir.join("manifest.json");
    let mut manifest_text = serde_json::to_string_pretty(&manifest).expect("serializes");
    manifest_text.push('\n');
    std::fs::write(&manifest_path, manifest_text).map_err(|e| Error::Io {
        path: manifest_path.display().to_string(),
        source: e,
    })?;
    written.push(manifest_path);

    Ok(written)
}

/// Recompute every manifest hash; returns per-file results.
pub fn verify(dir: &Path) -> Result<Vec<(String, bool)>> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::Io {
        path: manifest_path.display().to_string(),
        source: e,
    })?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad manifest: {e}")))?;

    let mut results = Vec::new();
    for entry in &manifest.files {
        let path = dir.join(&entry.path);
        let ok = match std::fs::read(&path) {
            Ok(bytes) => sha256_hex(&bytes) == entry.sha256,
            Err(_) => false,
        };
        results.push((entry.path.clone(), ok));
    }
    Ok(results)
}
