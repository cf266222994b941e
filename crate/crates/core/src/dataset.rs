//! Labeled dataset construction, stratified splitting, CSV serialization,
//! and the autocorrelation diagnostic.
//!
//! One row is one EV-day of 48 reported SoC values plus a label. The
//! honest set is built from traces via the battery model; the malicious
//! set applies each of the four attacks to every honest row, so it is
//! exactly four times as large.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::attacks::{apply_attack, AttackError, AttackKind, AttackSpec};
use crate::seed::{derive_seed, stream_rng};
use crate::soc::{simulate_day, ChargePolicy, EvParams, SocError, SLOTS_PER_DAY};
use crate::trace::{minutize, parked_day, TraceError, VehicleTrace, DAY_SECONDS};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no traces supplied")]
    NoTraces,
    #[error("dataset is empty")]
    Empty,
    #[error("build_malicious input must be all honest, found lying row {0}")]
    NotHonest(usize),
    #[error("train fraction {0} not in (0, 1)")]
    BadFraction(f64),
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("bad header: expected {expected:?}, got {got:?}")]
    BadHeader { expected: String, got: String },
    #[error("series too short for max_lag {max_lag} (length {len})")]
    SeriesTooShort { len: usize, max_lag: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Soc(#[from] SocError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Class label; lying is the positive class downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Honest,
    Lying,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Honest => "honest",
            Label::Lying => "lying",
        }
    }
}

/// One labeled EV-day.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRow {
    pub ev_id: String,
    pub day: u32,
    /// 48 reported SoC values in [0, 1].
    pub features: Vec<f64>,
    pub label: Label,
    /// 0 for honest, 1..=4 for the attack that produced the row.
    pub attack_id: u8,
}

impl LabeledRow {
    pub fn validate(&self, row: usize) -> Result<(), DatasetError> {
        if self.features.len() != SLOTS_PER_DAY {
            return Err(DatasetError::Malformed {
                row,
                message: format!("expected {SLOTS_PER_DAY} features, got {}", self.features.len()),
            });
        }
        if self.features.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(DatasetError::Malformed {
                row,
                message: "feature outside [0, 1]".into(),
            });
        }
        let consistent = match self.label {
            Label::Honest => self.attack_id == 0,
            Label::Lying => (1..=4).contains(&self.attack_id),
        };
        if !consistent {
            return Err(DatasetError::Malformed {
                row,
                message: format!(
                    "label {} inconsistent with attack id {}",
                    self.label.as_str(),
                    self.attack_id
                ),
            });
        }
        Ok(())
    }
}

/// A set of labeled rows plus a human-readable provenance string.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub rows: Vec<LabeledRow>,
    pub provenance: String,
}

impl LabeledDataset {
    pub fn count(&self, label: Label) -> usize {
        self.rows.iter().filter(|r| r.label == label).count()
    }
}

/// Options for honest dataset construction.
#[derive(Debug, Clone, Copy)]
pub struct HonestBuildOptions {
    /// Days simulated per vehicle.
    pub days: u32,
    /// GPS noise speed cap passed to minutize.
    pub max_speed_mph: f64,
    /// Initial SoC for each EV-day is drawn uniformly from this range.
    pub initial_soc_range: (f64, f64),
    pub seed: u64,
}

impl Default for HonestBuildOptions {
    fn default() -> Self {
        HonestBuildOptions {
            days: 24,
            max_speed_mph: crate::trace::DEFAULT_MAX_SPEED_MPH,
            initial_soc_range: (0.3, 1.0),
            seed: 0,
        }
    }
}

/// Builds the honest dataset: one row per vehicle per day.
///
/// Days with no trace coverage are treated as parked all day, so the
/// output has exactly `traces.len() * days` rows.
pub fn build_honest(
    traces: &[VehicleTrace],
    params: &EvParams,
    policy: &ChargePolicy,
    options: &HonestBuildOptions,
) -> Result<LabeledDataset, DatasetError> {
    if traces.is_empty() {
        return Err(DatasetError::NoTraces);
    }
    let mut rows = Vec::with_capacity(traces.len() * options.days as usize);
    for (ev_idx, trace) in traces.iter().enumerate() {
        let base = trace.first_day_start();
        for day in 0..options.days {
            let day_start = base + day as i64 * DAY_SECONDS;
            let covered = trace.start() < day_start + DAY_SECONDS && trace.end() > day_start;
            let minutes = if covered {
                minutize(trace, day_start, options.max_speed_mph)?
            } else {
                parked_day()
            };
            let mut rng = stream_rng(options.seed, &[0x1417, ev_idx as u64, day as u64]);
            let (lo, hi) = options.initial_soc_range;
            let initial = rng.gen_range(lo..=hi);
            let soc_day = simulate_day(&trace.vehicle_id, day, &minutes, initial, params, policy)?;
            rows.push(LabeledRow {
                ev_id: soc_day.ev_id,
                day,
                features: soc_day.soc,
                label: Label::Honest,
                attack_id: 0,
            });
        }
    }
    Ok(LabeledDataset {
        rows,
        provenance: format!(
            "honest: {} vehicles x {} days, seed {}",
            traces.len(),
            options.days,
            options.seed
        ),
    })
}

/// Builds the malicious dataset: all four attacks applied to every honest
/// row, 4x the input size.
///
/// Per-row attack parameters (A1's alpha, A2's multipliers, A3/A4 windows)
/// are sampled from streams derived from `seed` and the row index, so the
/// output is reproducible from the provenance.
pub fn build_malicious(honest: &LabeledDataset, seed: u64) -> Result<LabeledDataset, DatasetError> {
    if honest.rows.is_empty() {
        return Err(DatasetError::Empty);
    }
    if let Some(pos) = honest.rows.iter().position(|r| r.label != Label::Honest) {
        return Err(DatasetError::NotHonest(pos));
    }

    let mut rows = Vec::with_capacity(honest.rows.len() * 4);
    for (row_idx, row) in honest.rows.iter().enumerate() {
        let day = crate::soc::SocDay {
            ev_id: row.ev_id.clone(),
            day: row.day,
            soc: row.features.clone(),
            depleted: false,
        };
        for kind in [AttackKind::A1, AttackKind::A2, AttackKind::A3, AttackKind::A4] {
            let spec = sample_attack_spec(kind, seed, row_idx as u64);
            let attacked = apply_attack(&day, &spec)?;
            rows.push(LabeledRow {
                ev_id: row.ev_id.clone(),
                day: row.day,
                features: attacked.soc,
                label: Label::Lying,
                attack_id: kind.id(),
            });
        }
    }
    Ok(LabeledDataset {
        rows,
        provenance: format!("malicious: 4 attacks x {} honest rows, seed {}", honest.rows.len(), seed),
    })
}

/// Per-row attack parameters: alpha uniform in [0.1, 0.8], window start
/// uniform in [4, 30], window length uniform in [8, 20] clamped to the day.
fn sample_attack_spec(kind: AttackKind, seed: u64, row_idx: u64) -> AttackSpec {
    let mut rng = stream_rng(seed, &[0xa77ac4, row_idx, kind.id() as u64]);
    let mut spec = AttackSpec::new(kind);
    spec.seed = derive_seed(seed, &[0xbeef, row_idx, kind.id() as u64]);
    match kind {
        AttackKind::A1 => {
            spec.alpha = rng.gen_range(0.1..=0.8);
        }
        AttackKind::A2 => {}
        AttackKind::A3 | AttackKind::A4 => {
            spec.t_begin = rng.gen_range(4..=30);
            let len: usize = rng.gen_range(8..=20);
            spec.t_end = (spec.t_begin + len - 1).min(SLOTS_PER_DAY - 1);
        }
    }
    spec
}

/// Stratified train/test split.
///
/// Rows are shuffled per class with a seeded RNG; the global train size is
/// `round(fraction * N)` apportioned across classes by largest remainder,
/// which keeps each class ratio within one row of the target.
pub fn split(
    dataset: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset), DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::BadFraction(train_fraction));
    }
    if dataset.rows.is_empty() {
        return Err(DatasetError::Empty);
    }

    let classes = [Label::Honest, Label::Lying];
    let mut per_class: Vec<Vec<usize>> = classes
        .iter()
        .map(|&label| {
            (0..dataset.rows.len())
                .filter(|&i| dataset.rows[i].label == label)
                .collect()
        })
        .collect();
    for (c, idxs) in per_class.iter_mut().enumerate() {
        let mut rng = stream_rng(seed, &[0x5b17, c as u64]);
        idxs.shuffle(&mut rng);
    }

    let total = dataset.rows.len();
    let train_total = (train_fraction * total as f64).round() as usize;
    // Largest-remainder apportionment of train_total across classes.
    let targets: Vec<f64> = per_class
        .iter()
        .map(|idxs| train_fraction * idxs.len() as f64)
        .collect();
    let mut take: Vec<usize> = targets.iter().map(|t| t.floor() as usize).collect();
    let mut leftover = train_total.saturating_sub(take.iter().sum::<usize>());
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = targets[a] - targets[a].floor();
        let rb = targets[b] - targets[b].floor();
        rb.partial_cmp(&ra).unwrap()
    });
    for &c in &order {
        if leftover == 0 {
            break;
        }
        if take[c] < per_class[c].len() {
            take[c] += 1;
            leftover -= 1;
        }
    }

    let mut train_rows = Vec::with_capacity(train_total);
    let mut test_rows = Vec::with_capacity(total - train_total);
    for (c, idxs) in per_class.iter().enumerate() {
        for (pos, &i) in idxs.iter().enumerate() {
            if pos < take[c] {
                train_rows.push(dataset.rows[i].clone());
            } else {
                test_rows.push(dataset.rows[i].clone());
            }
        }
    }

    let note = |part: &str, n: usize| {
        format!(
            "{part} of split(fraction={train_fraction}, seed={seed}) from [{}]: {n} rows",
            dataset.provenance
        )
    };
    Ok((
        LabeledDataset {
            provenance: note("train", train_rows.len()),
            rows: train_rows,
        },
        LabeledDataset {
            provenance: note("test", test_rows.len()),
            rows: test_rows,
        },
    ))
}

/// Exact CSV header written and required by the dataset serialization.
pub fn csv_header() -> String {
    let mut h = String::from("ev_id,day,label,attack");
    for t in 0..SLOTS_PER_DAY {
        let _ = write!(h, ",s{t:02}");
    }
    h
}

/// Serializes a dataset to CSV with 6-decimal features.
pub fn write_csv(dataset: &LabeledDataset) -> String {
    let mut out = csv_header();
    out.push('\n');
    for row in &dataset.rows {
        let _ = write!(out, "{},{},{},{}", row.ev_id, row.day, row.label.as_str(), row.attack_id);
        for f in &row.features {
            let _ = write!(out, ",{f:.6}");
        }
        out.push('\n');
    }
    out
}

/// Parses a dataset from the CSV format of [`write_csv`], validating the
/// header, the row width, and the label/attack consistency.
pub fn read_csv(text: &str) -> Result<LabeledDataset, DatasetError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let expected = csv_header();
    if header != expected {
        return Err(DatasetError::BadHeader {
            expected,
            got: header.to_string(),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 + SLOTS_PER_DAY {
            return Err(DatasetError::Malformed {
                row: row_no,
                message: format!("expected {} fields, got {}", 4 + SLOTS_PER_DAY, fields.len()),
            });
        }
        let day: u32 = fields[1].parse().map_err(|_| DatasetError::Malformed {
            row: row_no,
            message: format!("bad day {:?}", fields[1]),
        })?;
        let label = match fields[2] {
            "honest" => Label::Honest,
            "lying" => Label::Lying,
            other => {
                return Err(DatasetError::Malformed {
                    row: row_no,
                    message: format!("bad label {other:?}"),
                })
            }
        };
        let attack_id: u8 = fields[3].parse().map_err(|_| DatasetError::Malformed {
            row: row_no,
            message: format!("bad attack id {:?}", fields[3]),
        })?;
        let mut features = Vec::with_capacity(SLOTS_PER_DAY);
        for f in &fields[4..] {
            let v: f64 = f.parse().map_err(|_| DatasetError::Malformed {
                row: row_no,
                message: format!("bad feature {f:?}"),
            })?;
            features.push(v);
        }
        let row = LabeledRow {
            ev_id: fields[0].to_string(),
            day,
            features,
            label,
            attack_id,
        };
        row.validate(row_no)?;
        rows.push(row);
    }
    Ok(LabeledDataset {
        rows,
        provenance: "read from csv".into(),
    })
}

/// Sample autocorrelation of `series` at lags `0..=max_lag`.
///
/// Standard biased estimator: covariance at each lag divided by the
/// variance, so the value at lag 0 is 1.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>, DatasetError> {
    let n = series.len();
    if n <= max_lag {
        return Err(DatasetError::SeriesTooShort { len: n, max_lag });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|x| (x - mean).powi(2)).sum();
    if var == 0.0 {
        return Err(DatasetError::ZeroVariance);
    }
    let acf = (0..=max_lag)
        .map(|lag| {
            let cov: f64 = (lag..n)
                .map(|t| (series[t] - mean) * (series[t - lag] - mean))
                .sum();
            cov / var
        })
        .collect();
    Ok(acf)
}
