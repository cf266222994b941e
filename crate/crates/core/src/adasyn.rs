//! ADASYN oversampling of the minority class.
//!
//! For each minority sample, the share of majority members among its k
//! nearest neighbors (over the full dataset) decides how many synthetic
//! samples to generate near it; each synthetic sample is an interpolation
//! toward one of its k nearest minority neighbors.

use rand::Rng;
use thiserror::Error;

use crate::seed::stream_rng;

#[derive(Debug, Error)]
pub enum AdasynError {
    #[error("class counts must be at least 1")]
    ZeroCount,
    #[error("minority count {min} exceeds majority count {max}")]
    MinorityLarger { min: usize, max: usize },
    #[error("need at least k+1 = {need} minority rows, got {got}")]
    TooFewMinority { need: usize, got: usize },
    #[error("k must be at least 1")]
    BadK,
    #[error("xi {0} outside [0, 1]")]
    BadXi(f64),
    #[error("ratio threshold {0} outside (0, 1]")]
    BadThreshold(f64),
    #[error("feature width mismatch at row {0}")]
    WidthMismatch(usize),
}

/// ADASYN parameters.
#[derive(Debug, Clone, Copy)]
pub struct AdasynParams {
    /// Neighbor count k.
    pub k: usize,
    /// Balance degree: 1 aims for a fully balanced dataset.
    pub xi: f64,
    /// Balancing only runs when minority/majority is below this.
    pub ratio_threshold: f64,
    pub seed: u64,
}

impl Default for AdasynParams {
    fn default() -> Self {
        AdasynParams {
            k: 5,
            xi: 1.0,
            ratio_threshold: 0.75,
            seed: 0,
        }
    }
}

/// One generated sample together with its two minority parents.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub features: Vec<f64>,
    /// Index of the minority sample the interpolation starts from.
    pub parent: usize,
    /// Index of the minority neighbor the interpolation moves toward.
    pub neighbor: usize,
}

/// Everything the balancing pass computed.
#[derive(Debug, Clone)]
pub struct AdasynReport {
    /// Class imbalance m_min / m_max.
    pub ratio: f64,
    /// Total synthetic count target (m_max - m_min) * xi.
    pub total_target: f64,
    /// Per-minority raw majority-neighbor ratios.
    pub raw_ratios: Vec<f64>,
    /// Normalized ratios summing to one.
    pub normalized_ratios: Vec<f64>,
    /// Per-minority synthetic counts (rounded).
    pub counts: Vec<usize>,
    pub synthetic: Vec<SyntheticSample>,
}

impl AdasynReport {
    fn no_op(ratio: f64, m_min: usize) -> Self {
        AdasynReport {
            ratio,
            total_target: 0.0,
            raw_ratios: vec![0.0; m_min],
            normalized_ratios: vec![0.0; m_min],
            counts: vec![0; m_min],
            synthetic: Vec::new(),
        }
    }
}

/// Degree of class imbalance, `m_min / m_max` in (0, 1].
pub fn imbalance_ratio(m_min: usize, m_max: usize) -> Result<f64, AdasynError> {
    if m_min == 0 || m_max == 0 {
        return Err(AdasynError::ZeroCount);
    }
    if m_min > m_max {
        return Err(AdasynError::MinorityLarger { min: m_min, max: m_max });
    }
    Ok(m_min as f64 / m_max as f64)
}

/// Runs ADASYN, generating synthetic minority samples.
pub fn balance(
    minority: &[Vec<f64>],
    majority: &[Vec<f64>],
    params: &AdasynParams,
) -> Result<AdasynReport, AdasynError> {
    balance_with_lambda(minority, majority, params, None)
}

/// [`balance`] with an optional fixed interpolation coefficient, used by
/// tests to pin the segment position.
pub fn balance_with_lambda(
    minority: &[Vec<f64>],
    majority: &[Vec<f64>],
    params: &AdasynParams,
    fixed_lambda: Option<f64>,
) -> Result<AdasynReport, AdasynError> {
    if params.k < 1 {
        return Err(AdasynError::BadK);
    }
    if !(0.0..=1.0).contains(&params.xi) {
        return Err(AdasynError::BadXi(params.xi));
    }
    if !(params.ratio_threshold > 0.0 && params.ratio_threshold <= 1.0) {
        return Err(AdasynError::BadThreshold(params.ratio_threshold));
    }
    let m_min = minority.len();
    let m_max = majority.len();
    let ratio = imbalance_ratio(m_min, m_max)?;
    if ratio >= params.ratio_threshold {
        return Ok(AdasynReport::no_op(ratio, m_min));
    }
    if m_min < params.k + 1 {
        return Err(AdasynError::TooFewMinority {
            need: params.k + 1,
            got: m_min,
        });
    }
    let width = minority[0].len();
    for (i, row) in minority.iter().chain(majority.iter()).enumerate() {
        if row.len() != width {
            return Err(AdasynError::WidthMismatch(i));
        }
    }

    let total_target = (m_max - m_min) as f64 * params.xi;

    // Majority share among the k nearest neighbors in the full dataset.
    // The full dataset is minority rows 0..m_min followed by majority rows.
    let mut raw_ratios = Vec::with_capacity(m_min);
    let mut minority_neighbors: Vec<Vec<usize>> = Vec::with_capacity(m_min);
    for (i, x) in minority.iter().enumerate() {
        let mut dist_all: Vec<(f64, usize)> = Vec::with_capacity(m_min + m_max - 1);
        for (j, other) in minority.iter().enumerate() {
            if j != i {
                dist_all.push((euclidean(x, other), j));
            }
        }
        for (j, other) in majority.iter().enumerate() {
            dist_all.push((euclidean(x, other), m_min + j));
        }
        dist_all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let majority_among_k = dist_all
            .iter()
            .take(params.k)
            .filter(|&&(_, idx)| idx >= m_min)
            .count();
        raw_ratios.push(majority_among_k as f64 / params.k as f64);

        let nearest_minority: Vec<usize> = dist_all
            .iter()
            .filter(|&&(_, idx)| idx < m_min)
            .take(params.k)
            .map(|&(_, idx)| idx)
            .collect();
        minority_neighbors.push(nearest_minority);
    }

    let ratio_sum: f64 = raw_ratios.iter().sum();
    let normalized_ratios: Vec<f64> = if ratio_sum > 0.0 {
        raw_ratios.iter().map(|r| r / ratio_sum).collect()
    } else {
        // No majority anywhere near the minority: spread uniformly.
        vec![1.0 / m_min as f64; m_min]
    };

    let counts: Vec<usize> = normalized_ratios
        .iter()
        .map(|r| (r * total_target).round() as usize)
        .collect();

    let mut synthetic = Vec::with_capacity(counts.iter().sum());
    for (i, &g) in counts.iter().enumerate() {
        if g == 0 {
            continue;
        }
        let mut rng = stream_rng(params.seed, &[0xada5, i as u64]);
        let neighbors = &minority_neighbors[i];
        for _ in 0..g {
            let j = neighbors[rng.gen_range(0..neighbors.len())];
            let lambda = fixed_lambda.unwrap_or_else(|| rng.gen_range(0.0..=1.0));
            let features = minority[i]
                .iter()
                .zip(&minority[j])
                .map(|(a, b)| a + (b - a) * lambda)
                .collect();
            synthetic.push(SyntheticSample {
                features,
                parent: i,
                neighbor: j,
            });
        }
    }

    Ok(AdasynReport {
        ratio,
        total_target,
        raw_ratios,
        normalized_ratios,
        counts,
        synthetic,
    })
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
