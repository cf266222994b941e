//! False-SoC reporting attacks applied to honest SoC day rows.
//!
//! Four attack shapes: constant partial reduction (A1), per-slot random
//! partial reduction (A2), zero reporting inside a slot window (A3), and a
//! gradual ramp down from the window-start truth (A4).

use rand::Rng;
use thiserror::Error;

use crate::seed::stream_rng;
use crate::soc::{SocDay, SLOTS_PER_DAY};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("window [{begin}, {end}] invalid for {SLOTS_PER_DAY} slots")]
    BadWindow { begin: usize, end: usize },
    #[error("multiplier {name} = {value} outside [0, 1)")]
    BadMultiplier { name: &'static str, value: f64 },
    #[error("attack requires {SLOTS_PER_DAY} slots, got {0}")]
    BadRowWidth(usize),
}

/// Attack family identifier; the CSV encoding is 1..=4 (0 means honest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackKind {
    /// Constant multiplicative under-reporting.
    A1,
    /// Per-slot random multiplicative under-reporting.
    A2,
    /// Zero reporting inside a slot window.
    A3,
    /// Gradual ramp-down inside a slot window.
    A4,
}

impl AttackKind {
    pub fn id(self) -> u8 {
        match self {
            AttackKind::A1 => 1,
            AttackKind::A2 => 2,
            AttackKind::A3 => 3,
            AttackKind::A4 => 4,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(AttackKind::A1),
            2 => Some(AttackKind::A2),
            3 => Some(AttackKind::A3),
            4 => Some(AttackKind::A4),
            _ => None,
        }
    }
}

/// Full specification of one attack application.
#[derive(Debug, Clone, Copy)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Constant multiplier for A1.
    pub alpha: f64,
    /// Per-slot multiplier bounds for A2.
    pub beta_low: f64,
    pub beta_high: f64,
    /// Inclusive slot window for A3/A4.
    pub t_begin: usize,
    pub t_end: usize,
    /// Ramp endpoints for A4.
    pub ramp_start: f64,
    pub ramp_end: f64,
    /// Seed for A2's per-slot draws.
    pub seed: u64,
}

impl AttackSpec {
    pub fn new(kind: AttackKind) -> Self {
        AttackSpec {
            kind,
            alpha: 0.5,
            beta_low: 0.1,
            beta_high: 0.8,
            t_begin: 10,
            t_end: 20,
            ramp_start: 0.9,
            ramp_end: 0.1,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), AttackError> {
        let check = |name: &'static str, value: f64| {
            if (0.0..1.0).contains(&value) {
                Ok(())
            } else {
                Err(AttackError::BadMultiplier { name, value })
            }
        };
        check("alpha", self.alpha)?;
        check("beta_low", self.beta_low)?;
        check("beta_high", self.beta_high)?;
        check("ramp_start", self.ramp_start)?;
        check("ramp_end", self.ramp_end)?;
        if self.t_begin > self.t_end || self.t_end >= SLOTS_PER_DAY {
            return Err(AttackError::BadWindow {
                begin: self.t_begin,
                end: self.t_end,
            });
        }
        Ok(())
    }
}

/// Applies an attack to a true SoC day, producing the reported values.
pub fn apply_attack(day: &SocDay, spec: &AttackSpec) -> Result<SocDay, AttackError> {
    spec.validate()?;
    if day.soc.len() != SLOTS_PER_DAY {
        return Err(AttackError::BadRowWidth(day.soc.len()));
    }

    let reported: Vec<f64> = match spec.kind {
        AttackKind::A1 => day.soc.iter().map(|s| spec.alpha * s).collect(),
        AttackKind::A2 => {
            let mut rng = stream_rng(spec.seed, &[0xa2]);
            day.soc
                .iter()
                .map(|s| rng.gen_range(spec.beta_low..=spec.beta_high) * s)
                .collect()
        }
        AttackKind::A3 => day
            .soc
            .iter()
            .enumerate()
            .map(|(t, &s)| {
                if t >= spec.t_begin && t <= spec.t_end {
                    0.0
                } else {
                    s
                }
            })
            .collect(),
        AttackKind::A4 => {
            let anchor = day.soc[spec.t_begin];
            let len = spec.t_end - spec.t_begin + 1;
            day.soc
                .iter()
                .enumerate()
                .map(|(t, &s)| {
                    if t >= spec.t_begin && t <= spec.t_end {
                        ramp_multiplier(spec.ramp_start, spec.ramp_end, t - spec.t_begin, len)
                            * anchor
                    } else {
                        s
                    }
                })
                .collect()
        }
    };

    debug_assert!(reported.iter().all(|&r| (0.0..=1.0).contains(&r)));
    Ok(SocDay {
        ev_id: day.ev_id.clone(),
        day: day.day,
        soc: reported,
        depleted: day.depleted,
    })
}

/// Linear multiplier from `start` to `end` inclusive across `len` slots.
fn ramp_multiplier(start: f64, end: f64, offset: usize, len: usize) -> f64 {
    if len <= 1 {
        start
    } else {
        start + (end - start) * offset as f64 / (len - 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day_with(soc: Vec<f64>) -> SocDay {
        SocDay {
            ev_id: "ev".into(),
            day: 0,
            soc,
            depleted: false,
        }
    }

    fn ramp_day() -> SocDay {
        day_with((0..SLOTS_PER_DAY).map(|t| 0.3 + 0.01 * t as f64).collect())
    }

    #[test]
    fn a1_scales_every_slot() {
        let mut soc = vec![0.5; SLOTS_PER_DAY];
        soc[0] = 0.8;
        soc[1] = 0.6;
        let day = day_with(soc);
        let spec = AttackSpec {
            alpha: 0.5,
            ..AttackSpec::new(AttackKind::A1)
        };
        let out = apply_attack(&day, &spec).unwrap();
        assert!((out.soc[0] - 0.4).abs() < 1e-12);
        assert!((out.soc[1] - 0.3).abs() < 1e-12);
        assert!((out.soc[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn a3_zeroes_window_only() {
        let day = ramp_day();
        let spec = AttackSpec {
            t_begin: 10,
            t_end: 20,
            ..AttackSpec::new(AttackKind::A3)
        };
        let out = apply_attack(&day, &spec).unwrap();
        for t in 0..SLOTS_PER_DAY {
            if (10..=20).contains(&t) {
                assert_eq!(out.soc[t], 0.0);
            } else {
                assert_eq!(out.soc[t], day.soc[t]);
            }
        }
    }

    #[test]
    fn a4_ramps_from_window_start_truth() {
        let mut soc = vec![0.5; SLOTS_PER_DAY];
        soc[10] = 0.8;
        let day = day_with(soc);
        let spec = AttackSpec {
            t_begin: 10,
            t_end: 14,
            ramp_start: 0.9,
            ramp_end: 0.1,
            ..AttackSpec::new(AttackKind::A4)
        };
        let out = apply_attack(&day, &spec).unwrap();
        let expected = [0.72, 0.56, 0.40, 0.24, 0.08];
        for (i, &e) in expected.iter().enumerate() {
            assert!((out.soc[10 + i] - e).abs() < 1e-12, "slot {}", 10 + i);
        }
        assert_eq!(out.soc[9], 0.5);
        assert_eq!(out.soc[15], 0.5);
    }

    #[test]
    fn a2_respects_bounds_and_seed() {
        let day = ramp_day();
        let spec = AttackSpec::new(AttackKind::A2);
        let a = apply_attack(&day, &spec).unwrap();
        let b = apply_attack(&day, &spec).unwrap();
        assert_eq!(a, b);
        for t in 0..SLOTS_PER_DAY {
            assert!(a.soc[t] >= 0.1 * day.soc[t] - 1e-12);
            assert!(a.soc[t] <= 0.8 * day.soc[t] + 1e-12);
        }
        let c = apply_attack(
            &day,
            &AttackSpec {
                seed: 1,
                ..AttackSpec::new(AttackKind::A2)
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn reporting_never_exceeds_truth_for_reduction_attacks() {
        let day = ramp_day();
        for kind in [AttackKind::A1, AttackKind::A2, AttackKind::A3] {
            let out = apply_attack(&day, &AttackSpec::new(kind)).unwrap();
            for t in 0..SLOTS_PER_DAY {
                assert!(out.soc[t] <= day.soc[t] + 1e-12);
            }
        }
    }

    #[test]
    fn a4_below_truth_when_anchor_is_minimum() {
        // On an increasing series the window anchor is the smallest value
        // in the window, so reported stays below truth there too.
        let day = ramp_day();
        let out = apply_attack(&day, &AttackSpec::new(AttackKind::A4)).unwrap();
        for t in 10..=20 {
            assert!(out.soc[t] <= day.soc[t] + 1e-12);
        }
    }

    #[test]
    fn invalid_window_errors() {
        let day = ramp_day();
        let spec = AttackSpec {
            t_begin: 30,
            t_end: 20,
            ..AttackSpec::new(AttackKind::A3)
        };
        assert!(matches!(
            apply_attack(&day, &spec),
            Err(AttackError::BadWindow { .. })
        ));
        let spec = AttackSpec {
            t_begin: 40,
            t_end: 48,
            ..AttackSpec::new(AttackKind::A3)
        };
        assert!(matches!(
            apply_attack(&day, &spec),
            Err(AttackError::BadWindow { .. })
        ));
    }

    #[test]
    fn single_slot_window_uses_ramp_start() {
        let mut soc = vec![0.5; SLOTS_PER_DAY];
        soc[5] = 0.6;
        let day = day_with(soc);
        let spec = AttackSpec {
            t_begin: 5,
            t_end: 5,
            ..AttackSpec::new(AttackKind::A4)
        };
        let out = apply_attack(&day, &spec).unwrap();
        assert!((out.soc[5] - 0.9 * 0.6).abs() < 1e-12);
    }
}
