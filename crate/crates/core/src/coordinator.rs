//! Per-slot charging coordination: priority computation and greedy
//! knapsack allocation under a fixed energy capacity.
//!
//! Each request is weighted by a priority index
//! `PI = epsilon * f1(SoC) + (1 - epsilon) * f2(TCC)`, demands are
//! `(1 - reported SoC) * battery_units`, and the per-slot budget is handed
//! out greedily in descending `PI / demand` order. Whatever is left after
//! the greedy pass goes to the unserved request with the highest PI.
//!
//! `f1` is decreasing in SoC (1 up to 0.4, then 0.1) so that low batteries
//! are prioritized, which is exactly what a lying EV exploits by
//! under-reporting.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::seed::stream_rng;

#[derive(Debug, Error)]
pub enum CoordError {
    #[error("reported SoC {0} outside [0, 1]")]
    BadSoc(f64),
    #[error("tcc must be at least 1")]
    BadTcc,
    #[error("tcc {0} outside the domain of f2")]
    TccOutsideDomain(u32),
    #[error("SoC {0} outside the domain of f1")]
    SocOutsideDomain(f64),
    #[error("capacity must be non-negative, got {0}")]
    NegativeCapacity(f64),
    #[error("epsilon {0} outside [0, 1]")]
    BadEpsilon(f64),
}

/// A charging request as submitted to the coordinator.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargingRequest {
    pub ev_id: String,
    /// Reported state of charge in [0, 1]; liars under-report.
    pub reported_soc: f64,
    /// Remaining slots until the request expires, >= 1.
    pub tcc: u32,
}

impl ChargingRequest {
    pub fn validate(&self) -> Result<(), CoordError> {
        if !(0.0..=1.0).contains(&self.reported_soc) {
            return Err(CoordError::BadSoc(self.reported_soc));
        }
        if self.tcc < 1 {
            return Err(CoordError::BadTcc);
        }
        Ok(())
    }
}

/// Weights and maps of the priority index, plus the battery size that
/// converts SoC deficit into energy units.
#[derive(Debug, Clone, Copy)]
pub struct PriorityParams {
    /// Weight on the SoC term, in [0, 1].
    pub epsilon: f64,
    /// SoC map into [0, 1]; `None` marks inputs outside its domain.
    pub f1: fn(f64) -> Option<f64>,
    /// TCC map into [0, 1]; `None` marks inputs outside its domain.
    pub f2: fn(u32) -> Option<f64>,
    /// Energy units of a full battery.
    pub battery_units: f64,
}

/// 1 for SoC <= 0.4, 0.1 otherwise: low batteries get high priority.
pub fn default_f1(soc: f64) -> Option<f64> {
    if !(0.0..=1.0).contains(&soc) {
        return None;
    }
    Some(if soc <= 0.4 { 1.0 } else { 0.1 })
}

/// 0.4 on the domain 0 < tcc <= 4.
pub fn default_f2(tcc: u32) -> Option<f64> {
    if (1..=4).contains(&tcc) {
        Some(0.4)
    } else {
        None
    }
}

impl Default for PriorityParams {
    fn default() -> Self {
        PriorityParams {
            epsilon: 0.5,
            f1: default_f1,
            f2: default_f2,
            battery_units: 200.0,
        }
    }
}

/// The outcome of scheduling one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotAllocation {
    /// Energy units granted per EV (every request appears, possibly 0).
    pub grants: BTreeMap<String, f64>,
    /// Capacity left unallocated.
    pub leftover: f64,
    /// EVs whose grant covers their full reported demand.
    pub selected_full: Vec<String>,
}

impl SlotAllocation {
    pub fn granted(&self, ev_id: &str) -> f64 {
        self.grants.get(ev_id).copied().unwrap_or(0.0)
    }
}

/// Priority index of one request: `epsilon*f1(soc) + (1-epsilon)*f2(tcc)`.
pub fn priority_index(
    reported_soc: f64,
    tcc: u32,
    params: &PriorityParams,
) -> Result<f64, CoordError> {
    if !(0.0..=1.0).contains(&params.epsilon) {
        return Err(CoordError::BadEpsilon(params.epsilon));
    }
    if !(0.0..=1.0).contains(&reported_soc) {
        return Err(CoordError::BadSoc(reported_soc));
    }
    let f1 = (params.f1)(reported_soc).ok_or(CoordError::SocOutsideDomain(reported_soc))?;
    let f2 = (params.f2)(tcc).ok_or(CoordError::TccOutsideDomain(tcc))?;
    Ok(params.epsilon * f1 + (1.0 - params.epsilon) * f2)
}

/// Allocates one slot's capacity across the given requests.
///
/// Demands are `(1 - reported_soc) * battery_units`; zero-demand requests
/// are skipped. Requests are sorted descending by `PI/demand` with ties
/// broken by a seeded shuffle. The greedy pass grants each full demand
/// that still fits, and the residual capacity is then granted to the
/// unserved request with the highest PI.
pub fn schedule_slot(
    requests: &[ChargingRequest],
    capacity: f64,
    params: &PriorityParams,
    rng_seed: u64,
) -> Result<SlotAllocation, CoordError> {
    if capacity < 0.0 {
        return Err(CoordError::NegativeCapacity(capacity));
    }

    struct Entry {
        idx: usize,
        demand: f64,
        pi: f64,
    }

    let mut grants: BTreeMap<String, f64> = BTreeMap::new();
    let mut entries = Vec::with_capacity(requests.len());
    for (idx, req) in requests.iter().enumerate() {
        req.validate()?;
        grants.insert(req.ev_id.clone(), 0.0);
        let demand = (1.0 - req.reported_soc) * params.battery_units;
        if demand <= 0.0 {
            continue;
        }
        let pi = priority_index(req.reported_soc, req.tcc, params)?;
        entries.push(Entry { idx, demand, pi });
    }

    // Shuffle first, then stable-sort: equal ratios keep a seeded random
    // relative order while distinct ratios are strictly descending.
    let mut rng = stream_rng(rng_seed, &[0x5107]);
    entries.shuffle(&mut rng);
    entries.sort_by(|a, b| {
        let ra = a.pi / a.demand;
        let rb = b.pi / b.demand;
        rb.partial_cmp(&ra).expect("priority ratios are finite")
    });

    let mut remaining = capacity;
    let mut unserved: Vec<&Entry> = Vec::new();
    for entry in &entries {
        if entry.demand <= remaining {
            *grants.get_mut(&requests[entry.idx].ev_id).unwrap() = entry.demand;
            remaining -= entry.demand;
        } else {
            unserved.push(entry);
        }
    }

    // Residual goes to the unserved request with the highest PI.
    if remaining > 0.0 {
        if let Some(best) = unserved.iter().max_by(|a, b| {
            a.pi.partial_cmp(&b.pi)
                .expect("priority indices are finite")
        }) {
            *grants.get_mut(&requests[best.idx].ev_id).unwrap() = remaining;
            remaining = 0.0;
        }
    }

    let selected_full: Vec<String> = requests
        .iter()
        .filter(|r| {
            let demand = (1.0 - r.reported_soc) * params.battery_units;
            demand > 0.0 && grants[&r.ev_id] >= demand
        })
        .map(|r| r.ev_id.clone())
        .collect();

    Ok(SlotAllocation {
        grants,
        leftover: remaining,
        selected_full,
    })
}
