//! Per-minute battery state-of-charge evolution.
//!
//! SoC drains linearly with driven distance, charges at the vehicle's
//! maximum AC rate while parked long enough, and is reported at the end of
//! every 30-minute slot, 48 readings per day.

use thiserror::Error;

use crate::trace::{MinuteActivity, DAY_MINUTES};

/// Number of SoC reporting slots per day.
pub const SLOTS_PER_DAY: usize = 48;

/// Minutes per reporting slot.
pub const SLOT_MINUTES: usize = 30;

#[derive(Debug, Error)]
pub enum SocError {
    #[error("expected {DAY_MINUTES} minutes of activity, got {0}")]
    WrongMinuteCount(usize),
    #[error("initial SoC {0} outside [0, 1]")]
    BadInitialSoc(f64),
    #[error("invalid EV parameters: {0}")]
    BadParams(String),
}

/// Operational parameters of the simulated EV.
#[derive(Debug, Clone, Copy)]
pub struct EvParams {
    /// Battery capacity in kWh.
    pub battery_kwh: f64,
    /// Average electric range in miles.
    pub range_mi: f64,
    /// Maximum charge rate in kW.
    pub max_charge_kw: f64,
    /// Power consumption in Wh per mile.
    pub consumption_wh_per_mi: f64,
}

impl EvParams {
    /// The Kia Soul EV figures used throughout.
    pub fn kia_soul() -> Self {
        EvParams {
            battery_kwh: 64.0,
            range_mi: 230.0,
            max_charge_kw: 7.2,
            consumption_wh_per_mi: 275.0,
        }
    }

    /// Checks positivity and that consumption x range is consistent with
    /// capacity within 2%.
    pub fn validate(&self) -> Result<(), SocError> {
        if self.battery_kwh <= 0.0
            || self.range_mi <= 0.0
            || self.max_charge_kw <= 0.0
            || self.consumption_wh_per_mi <= 0.0
        {
            return Err(SocError::BadParams("all fields must be positive".into()));
        }
        let implied_wh = self.consumption_wh_per_mi * self.range_mi;
        let capacity_wh = self.battery_kwh * 1000.0;
        let rel = (implied_wh - capacity_wh).abs() / capacity_wh;
        if rel > 0.02 {
            return Err(SocError::BadParams(format!(
                "consumption x range deviates {:.1}% from capacity",
                rel * 100.0
            )));
        }
        Ok(())
    }
}

/// When a parked EV starts and stops charging.
#[derive(Debug, Clone, Copy)]
pub struct ChargePolicy {
    /// Consecutive parked minutes before charging may begin.
    pub min_parked_minutes: u32,
    /// Charging starts only if SoC is below this.
    pub soc_start_threshold: f64,
    /// Charging stops at this SoC.
    pub target_soc: f64,
}

impl Default for ChargePolicy {
    fn default() -> Self {
        ChargePolicy {
            min_parked_minutes: 30,
            soc_start_threshold: 0.9,
            target_soc: 1.0,
        }
    }
}

/// One EV-day of slot-sampled SoC readings.
#[derive(Debug, Clone, PartialEq)]
pub struct SocDay {
    pub ev_id: String,
    pub day: u32,
    /// Exactly 48 values in [0, 1], one per 30-minute slot.
    pub soc: Vec<f64>,
    /// Set when the battery clamped at zero during the day.
    pub depleted: bool,
}

/// Advances SoC by one minute of activity.
///
/// Driving drains `distance * consumption / capacity`; charging adds one
/// minute of the maximum charge rate; idle leaves SoC unchanged. The result
/// is clamped to [0, 1].
pub fn step_soc(soc: f64, activity: &MinuteActivity, charging: bool, params: &EvParams) -> f64 {
    let next = if !activity.parked {
        soc - activity.distance * params.consumption_wh_per_mi / (params.battery_kwh * 1000.0)
    } else if charging {
        soc + params.max_charge_kw * (1.0 / 60.0) / params.battery_kwh
    } else {
        soc
    };
    next.clamp(0.0, 1.0)
}

/// Whether a parked EV should begin charging.
///
/// True iff it has been parked at least `min_parked_minutes` and SoC is
/// below the start threshold. Once started, charging continues until the
/// target SoC or departure (handled by [`simulate_day`]).
pub fn charging_decision(parked_run_minutes: u32, soc: f64, policy: &ChargePolicy) -> bool {
    parked_run_minutes >= policy.min_parked_minutes && soc < policy.soc_start_threshold
}

/// Simulates one day minute-by-minute and samples SoC at each slot end.
pub fn simulate_day(
    ev_id: &str,
    day: u32,
    minutes: &[MinuteActivity],
    initial_soc: f64,
    params: &EvParams,
    policy: &ChargePolicy,
) -> Result<SocDay, SocError> {
    if minutes.len() != DAY_MINUTES {
        return Err(SocError::WrongMinuteCount(minutes.len()));
    }
    if !(0.0..=1.0).contains(&initial_soc) {
        return Err(SocError::BadInitialSoc(initial_soc));
    }

    let mut soc = initial_soc;
    let mut depleted = false;
    let mut charging = false;
    let mut parked_run = 0u32;
    let mut readings = Vec::with_capacity(SLOTS_PER_DAY);

    for (i, activity) in minutes.iter().enumerate() {
        if activity.parked {
            if charging {
                charging = soc < policy.target_soc;
            } else {
                charging = charging_decision(parked_run, soc, policy);
            }
            parked_run += 1;
        } else {
            parked_run = 0;
            charging = false;
        }
        soc = step_soc(soc, activity, charging, params);
        if soc == 0.0 && !activity.parked {
            depleted = true;
        }
        if (i + 1) % SLOT_MINUTES == 0 {
            readings.push(soc);
        }
    }

    Ok(SocDay {
        ev_id: ev_id.to_string(),
        day,
        soc: readings,
        depleted,
    })
}
