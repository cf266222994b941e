//! Fleet-level impact of lying EVs on the charging coordinator.
//!
//! Runs the per-slot allocation over a horizon with a replacement queue:
//! an EV that charges in full, or whose request expires unserved, leaves
//! and is replaced next slot by a fresh EV of the same type. Reports the
//! probability of charging per type and the average unused power.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::coordinator::{
    schedule_slot, ChargingRequest, CoordError, PriorityParams, SlotAllocation,
};
use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum ImpactError {
    #[error("n_liars {liars} exceeds fleet size {fleet}")]
    TooManyLiars { liars: u32, fleet: u32 },
    #[error("beta {0} outside [0, 1)")]
    BadBeta(f64),
    #[error("initial SoC {0} outside [0, 1]")]
    BadInitialSoc(f64),
    #[error("fleet must be non-empty")]
    EmptyFleet,
    #[error(transparent)]
    Coord(#[from] CoordError),
}

/// Configuration of one impact experiment.
#[derive(Debug, Clone)]
pub struct ImpactConfig {
    /// Total fleet size.
    pub n_evs: u32,
    /// How many of those EVs lie.
    pub n_liars: u32,
    /// Lying multiplier: liars report `beta * true_soc`.
    pub beta: f64,
    /// Energy units available per slot.
    pub capacity: f64,
    /// Number of slots simulated.
    pub n_slots: u32,
    /// True SoC every EV starts (and re-enters) with.
    pub initial_soc: f64,
    /// TCC every EV starts (and re-enters) with.
    pub initial_tcc: u32,
    /// Priority parameters of the coordinator.
    pub priority: PriorityParams,
    pub seed: u64,
}

impl Default for ImpactConfig {
    fn default() -> Self {
        ImpactConfig {
            n_evs: 100,
            n_liars: 0,
            beta: 0.2,
            capacity: 2160.0,
            n_slots: 30,
            initial_soc: 0.5,
            initial_tcc: 4,
            priority: PriorityParams::default(),
            seed: 0,
        }
    }
}

/// Outcome of one impact experiment.
#[derive(Debug, Clone)]
pub struct ImpactReport {
    /// Fraction of lying EVs that fully charged before expiry;
    /// `None` when the config has no liars.
    pub p_liar_charged: Option<f64>,
    /// Fraction of honest EVs that fully charged before expiry;
    /// `None` when the config has no honest EVs.
    pub p_honest_charged: Option<f64>,
    /// Mean of `per_slot_unused`.
    pub avg_unused_power: f64,
    /// Capacity granted but not consumable, per slot.
    pub per_slot_unused: Vec<f64>,
}

/// Energy granted beyond what recipients can actually absorb this slot.
pub fn unused_power(
    alloc: &SlotAllocation,
    true_demands: &BTreeMap<String, f64>,
    capacity: f64,
) -> f64 {
    let consumed: f64 = alloc
        .grants
        .iter()
        .map(|(ev, &grant)| {
            let demand = true_demands.get(ev).copied().unwrap_or(0.0);
            grant.min(demand)
        })
        .sum();
    (capacity - consumed).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EvKind {
    Honest,
    Liar,
}

#[derive(Debug, Clone)]
struct FleetEv {
    kind: EvKind,
    true_soc: f64,
    tcc: u32,
}

/// Runs the replacement-queue simulation described on [`ImpactConfig`].
pub fn run_impact(config: &ImpactConfig) -> Result<ImpactReport, ImpactError> {
    if config.n_evs == 0 {
        return Err(ImpactError::EmptyFleet);
    }
    if config.n_liars > config.n_evs {
        return Err(ImpactError::TooManyLiars {
            liars: config.n_liars,
            fleet: config.n_evs,
        });
    }
    if !(0.0..1.0).contains(&config.beta) {
        return Err(ImpactError::BadBeta(config.beta));
    }
    if !(0.0..=1.0).contains(&config.initial_soc) {
        return Err(ImpactError::BadInitialSoc(config.initial_soc));
    }

    let fresh = |kind: EvKind| FleetEv {
        kind,
        true_soc: config.initial_soc,
        tcc: config.initial_tcc,
    };
    let mut fleet: Vec<FleetEv> = (0..config.n_evs)
        .map(|i| fresh(if i < config.n_liars { EvKind::Liar } else { EvKind::Honest }))
        .collect();

    let mut charged = BTreeMap::from([(EvKind::Honest, 0u64), (EvKind::Liar, 0u64)]);
    let mut expired = charged.clone();
    let mut per_slot_unused = Vec::with_capacity(config.n_slots as usize);
    let battery = config.priority.battery_units;

    for slot in 0..config.n_slots {
        let mut requests = Vec::with_capacity(fleet.len());
        let mut true_demands = BTreeMap::new();
        for (i, ev) in fleet.iter().enumerate() {
            let ev_id = format!("ev{i:04}");
            let reported = match ev.kind {
                EvKind::Honest => ev.true_soc,
                EvKind::Liar => config.beta * ev.true_soc,
            };
            true_demands.insert(ev_id.clone(), (1.0 - ev.true_soc) * battery);
            requests.push(ChargingRequest {
                ev_id,
                reported_soc: reported,
                tcc: ev.tcc,
            });
        }

        let slot_seed = derive_seed(config.seed, &[slot as u64]);
        let alloc = schedule_slot(&requests, config.capacity, &config.priority, slot_seed)?;
        per_slot_unused.push(unused_power(&alloc, &true_demands, config.capacity));

        for (i, ev) in fleet.iter_mut().enumerate() {
            let ev_id = format!("ev{i:04}");
            let grant = alloc.granted(&ev_id);
            let true_demand = (1.0 - ev.true_soc) * battery;
            if grant >= true_demand && true_demand > 0.0 {
                *charged.get_mut(&ev.kind).unwrap() += 1;
                *ev = fresh(ev.kind);
            } else {
                ev.true_soc = (ev.true_soc + grant / battery).min(1.0);
                ev.tcc -= 1;
                if ev.tcc == 0 {
                    *expired.get_mut(&ev.kind).unwrap() += 1;
                    *ev = fresh(ev.kind);
                }
            }
        }
    }

    let prob = |kind: EvKind| {
        let c = charged[&kind] as f64;
        let e = expired[&kind] as f64;
        if c + e == 0.0 {
            None
        } else {
            Some(c / (c + e))
        }
    };

    let avg = per_slot_unused.iter().sum::<f64>() / per_slot_unused.len().max(1) as f64;
    Ok(ImpactReport {
        p_liar_charged: if config.n_liars == 0 { None } else { prob(EvKind::Liar) },
        p_honest_charged: if config.n_liars == config.n_evs {
            None
        } else {
            prob(EvKind::Honest)
        },
        avg_unused_power: avg,
        per_slot_unused,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n_liars: u32, beta: f64, capacity: f64) -> ImpactConfig {
        ImpactConfig {
            n_liars,
            beta,
            capacity,
            seed: 7,
            ..ImpactConfig::default()
        }
    }

    #[test]
    fn twelve_liars_beta02_starve_honest() {
        let report = run_impact(&config(12, 0.2, 2160.0)).unwrap();
        assert_eq!(report.p_honest_charged, Some(0.0));
        assert_eq!(report.p_liar_charged, Some(1.0));
    }

    #[test]
    fn eighteen_liars_beta08_starve_honest() {
        let report = run_impact(&config(18, 0.8, 2160.0)).unwrap();
        assert_eq!(report.p_honest_charged, Some(0.0));
        assert_eq!(report.p_liar_charged, Some(1.0));
    }

    #[test]
    fn no_liars_reports_sentinel() {
        let report = run_impact(&config(0, 0.5, 2160.0)).unwrap();
        assert!(report.p_liar_charged.is_none());
        assert!(report.p_honest_charged.is_some());
    }

    #[test]
    fn honest_probability_positive_below_threshold() {
        let report = run_impact(&config(11, 0.2, 2160.0)).unwrap();
        assert!(report.p_honest_charged.unwrap() > 0.0);
        assert_eq!(report.p_liar_charged, Some(1.0));
    }

    #[test]
    fn unused_power_twelve_liars() {
        // 12 liars granted 180 against a true demand of 100 each.
        let report = run_impact(&config(12, 0.2, 2160.0)).unwrap();
        assert!((report.avg_unused_power - 960.0).abs() < 1e-9);
        for &u in &report.per_slot_unused {
            assert!((u - 960.0).abs() < 1e-9);
        }
    }

    #[test]
    fn unused_power_all_honest_is_zero() {
        let report = run_impact(&config(0, 0.2, 2160.0)).unwrap();
        assert_eq!(report.avg_unused_power, 0.0);
    }

    #[test]
    fn unused_power_helper_arithmetic() {
        // Isolated check of the helper on a hand-built allocation.
        let mut grants = BTreeMap::new();
        let mut demands = BTreeMap::new();
        for i in 0..12 {
            grants.insert(format!("l{i}"), 180.0);
            demands.insert(format!("l{i}"), 100.0);
        }
        let alloc = SlotAllocation {
            grants,
            leftover: 0.0,
            selected_full: vec![],
        };
        assert!((unused_power(&alloc, &demands, 2160.0) - 960.0).abs() < 1e-9);

        let empty = SlotAllocation {
            grants: BTreeMap::new(),
            leftover: 2160.0,
            selected_full: vec![],
        };
        assert_eq!(unused_power(&empty, &BTreeMap::new(), 2160.0), 2160.0);
    }

    #[test]
    fn unused_power_within_bounds() {
        for liars in [0, 5, 12, 20, 40] {
            let report = run_impact(&config(liars, 0.2, 2160.0)).unwrap();
            for &u in &report.per_slot_unused {
                assert!((0.0..=2160.0).contains(&u));
            }
            let mean =
                report.per_slot_unused.iter().sum::<f64>() / report.per_slot_unused.len() as f64;
            assert!((mean - report.avg_unused_power).abs() < 1e-12);
        }
    }

    #[test]
    fn honest_probability_non_increasing_in_liars() {
        let mut prev = f64::INFINITY;
        for liars in [0, 4, 8, 12, 16] {
            let p = run_impact(&config(liars, 0.2, 2160.0))
                .unwrap()
                .p_honest_charged
                .unwrap();
            assert!(p <= prev + 1e-12, "{liars} liars increased honest probability");
            prev = p;
        }
    }

    #[test]
    fn liar_plateau_extends_to_capacity_bound() {
        // Liars keep probability one up to capacity / ((1-beta*s0)*B).
        let bound = (2160.0_f64 / ((1.0 - 0.2 * 0.5) * 200.0)).floor() as u32;
        assert_eq!(bound, 12);
        for liars in [1, 6, bound] {
            let report = run_impact(&config(liars, 0.2, 2160.0)).unwrap();
            assert_eq!(report.p_liar_charged, Some(1.0), "{liars} liars");
        }
    }

    #[test]
    fn unused_power_monotone_and_beta_ordered() {
        let mut prev = -1.0;
        for liars in 0..=12 {
            let report = run_impact(&config(liars, 0.2, 2160.0)).unwrap();
            assert!(report.avg_unused_power >= prev - 1e-9);
            prev = report.avg_unused_power;
        }
        let sat_low_beta = run_impact(&config(30, 0.2, 2160.0)).unwrap().avg_unused_power;
        let sat_high_beta = run_impact(&config(30, 0.8, 2160.0)).unwrap().avg_unused_power;
        assert!(sat_low_beta >= sat_high_beta);
    }

    #[test]
    fn config_validation() {
        assert!(matches!(
            run_impact(&config(101, 0.2, 2160.0)),
            Err(ImpactError::TooManyLiars { .. })
        ));
        assert!(matches!(
            run_impact(&config(5, 1.0, 2160.0)),
            Err(ImpactError::BadBeta(_))
        ));
    }
}
