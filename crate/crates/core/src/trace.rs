//! GPS trace ingestion and synthetic trace generation.
//!
//! Traces arrive as newline-delimited text records
//! `"latitude longitude occupied timestamp"` (the public taxi-trace
//! convention). Parsing normalizes them to ascending timestamp order,
//! and [`minutize`] resamples a trace onto a 1440-minute day grid of
//! per-minute driven distance, which is what the battery model consumes.

use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::seed::stream_rng;

/// Mean earth radius in miles, used by [`haversine_miles`].
pub const EARTH_RADIUS_MILES: f64 = 3958.8;

/// Seconds per simulated day.
pub const DAY_SECONDS: i64 = 86_400;

/// Minutes per simulated day.
pub const DAY_MINUTES: usize = 1440;

/// Default cap on implied speed between fixes; excess distance is
/// discarded as GPS noise.
pub const DEFAULT_MAX_SPEED_MPH: f64 = 80.0;

/// Per-minute distance below which the vehicle counts as parked.
pub const PARKED_DISTANCE_MILES: f64 = 0.005;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: expected 4 fields `lat lon occupied epoch`, got {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: field `{field}` is not numeric: {value:?}")]
    NonNumeric {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: {field} {value} out of range")]
    OutOfRange {
        line: usize,
        field: &'static str,
        value: f64,
    },
    #[error("trace is empty")]
    Empty,
    #[error("trace does not overlap day starting at {day_start}")]
    OutsideDay { day_start: i64 },
    #[error("num_days must be at least 1")]
    NoDays,
}

/// One GPS observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsFix {
    /// Latitude in degrees, [-90, 90].
    pub latitude: f64,
    /// Longitude in degrees, [-180, 180].
    pub longitude: f64,
    /// Occupancy flag from the source format; unused downstream.
    pub occupied: bool,
    /// Seconds since epoch, > 0.
    pub timestamp: i64,
}

/// A per-vehicle, time-ordered sequence of fixes.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleTrace {
    pub vehicle_id: String,
    /// Strictly increasing in timestamp after normalization, non-empty.
    pub fixes: Vec<GpsFix>,
}

impl VehicleTrace {
    /// Earliest fix timestamp.
    pub fn start(&self) -> i64 {
        self.fixes[0].timestamp
    }

    /// Latest fix timestamp.
    pub fn end(&self) -> i64 {
        self.fixes[self.fixes.len() - 1].timestamp
    }

    /// Midnight (epoch multiple of a day) at or before the first fix.
    pub fn first_day_start(&self) -> i64 {
        self.start().div_euclid(DAY_SECONDS) * DAY_SECONDS
    }
}

/// One minute of vehicle activity on the day grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinuteActivity {
    /// Minute of day, 0..1439.
    pub minute_index: u16,
    /// Miles driven during this minute, >= 0.
    pub distance: f64,
    /// True when the vehicle did not move this minute.
    pub parked: bool,
}

/// Parameters of the synthetic two-state (trip/idle) mobility model.
#[derive(Debug, Clone, Copy)]
pub struct MobilityParams {
    /// Mean trip duration in minutes (exponential).
    pub trip_mean_minutes: f64,
    /// Mean idle duration in minutes (exponential).
    pub idle_mean_minutes: f64,
    /// Trip speed is drawn uniformly from this range (mph).
    pub speed_range_mph: (f64, f64),
    /// Seconds between generated fixes.
    pub fix_interval_secs: i64,
    /// Base coordinates the walk stays near.
    pub base_latitude: f64,
    pub base_longitude: f64,
    /// First fix timestamp; a multiple of 86400 keeps days aligned.
    pub start_timestamp: i64,
}

impl Default for MobilityParams {
    fn default() -> Self {
        MobilityParams {
            trip_mean_minutes: 20.0,
            idle_mean_minutes: 40.0,
            speed_range_mph: (10.0, 40.0),
            fix_interval_secs: 60,
            base_latitude: 37.75,
            base_longitude: -122.39,
            // 2008-05-17 00:00:00 UTC, aligned to a day boundary.
            start_timestamp: 1_211_068_800,
        }
    }
}

/// Parses one trace from newline-delimited `"lat lon occupied epoch"` records.
///
/// Accepts any input ordering; output fixes are sorted ascending by
/// timestamp with duplicate timestamps collapsed to the first occurrence.
pub fn parse_trace(text: &str, vehicle_id: &str) -> Result<VehicleTrace, TraceError> {
    let mut fixes = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(TraceError::FieldCount {
                line,
                found: fields.len(),
            });
        }
        let latitude = parse_f64(fields[0], line, "latitude")?;
        let longitude = parse_f64(fields[1], line, "longitude")?;
        let occupied_raw = parse_f64(fields[2], line, "occupied")?;
        let timestamp = fields[3].parse::<i64>().map_err(|_| TraceError::NonNumeric {
            line,
            field: "timestamp",
            value: fields[3].to_string(),
        })?;

        if !(-90.0..=90.0).contains(&latitude) {
            return Err(TraceError::OutOfRange {
                line,
                field: "latitude",
                value: latitude,
            });
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(TraceError::OutOfRange {
                line,
                field: "longitude",
                value: longitude,
            });
        }
        if timestamp <= 0 {
            return Err(TraceError::OutOfRange {
                line,
                field: "timestamp",
                value: timestamp as f64,
            });
        }
        fixes.push(GpsFix {
            latitude,
            longitude,
            occupied: occupied_raw != 0.0,
            timestamp,
        });
    }
    if fixes.is_empty() {
        return Err(TraceError::Empty);
    }
    fixes.sort_by_key(|f| f.timestamp);
    fixes.dedup_by_key(|f| f.timestamp);
    Ok(VehicleTrace {
        vehicle_id: vehicle_id.to_string(),
        fixes,
    })
}

/// Serializes a trace back to the line format accepted by [`parse_trace`].
///
/// Coordinates use the shortest round-tripping decimal form, so
/// `parse_trace(serialize_trace(t)) == t` for normalized traces.
pub fn serialize_trace(trace: &VehicleTrace) -> String {
    let mut out = String::new();
    for fix in &trace.fixes {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            fix.latitude,
            fix.longitude,
            u8::from(fix.occupied),
            fix.timestamp
        );
    }
    out
}

fn parse_f64(s: &str, line: usize, field: &'static str) -> Result<f64, TraceError> {
    s.parse::<f64>().map_err(|_| TraceError::NonNumeric {
        line,
        field,
        value: s.to_string(),
    })
}

/// Great-circle distance in miles between two fixes (mean radius 3958.8 mi).
pub fn haversine_miles(a: &GpsFix, b: &GpsFix) -> f64 {
    let lat1 = a.latitude.to_radians();
    let lat2 = b.latitude.to_radians();
    let dlat = (b.latitude - a.latitude).to_radians();
    let dlon = (b.longitude - a.longitude).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_MILES * h.sqrt().asin()
}

/// Resamples a trace onto the 1440-minute grid of the day starting at
/// `day_start` (epoch seconds).
///
/// The distance between bracketing fixes is apportioned uniformly over the
/// gap. Implied speed above `max_speed_mph` is treated as GPS noise and the
/// excess distance discarded. Minutes that move less than
/// [`PARKED_DISTANCE_MILES`], and minutes outside trace coverage, are parked.
pub fn minutize(
    trace: &VehicleTrace,
    day_start: i64,
    max_speed_mph: f64,
) -> Result<Vec<MinuteActivity>, TraceError> {
    let day_end = day_start + DAY_SECONDS;
    if trace.end() <= day_start || trace.start() >= day_end {
        return Err(TraceError::OutsideDay { day_start });
    }

    let mut distance = vec![0.0f64; DAY_MINUTES];
    for pair in trace.fixes.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let t0 = a.timestamp.max(day_start);
        let t1 = b.timestamp.min(day_end);
        if t1 <= t0 {
            continue;
        }
        let gap_secs = (b.timestamp - a.timestamp) as f64;
        let mut dist = haversine_miles(a, b);
        let max_dist = max_speed_mph * gap_secs / 3600.0;
        if dist > max_dist {
            dist = max_dist;
        }
        let rate_per_sec = dist / gap_secs;
        // Spread over the minutes the (clipped) gap overlaps.
        let mut t = t0;
        while t < t1 {
            let minute = ((t - day_start) / 60) as usize;
            let minute_end = day_start + 60 * (minute as i64 + 1);
            let span = (t1.min(minute_end) - t) as f64;
            distance[minute] += rate_per_sec * span;
            t = minute_end;
        }
    }

    let per_minute_cap = max_speed_mph / 60.0;
    let minutes = distance
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let d = d.min(per_minute_cap);
            if d < PARKED_DISTANCE_MILES {
                MinuteActivity {
                    minute_index: i as u16,
                    distance: 0.0,
                    parked: true,
                }
            } else {
                MinuteActivity {
                    minute_index: i as u16,
                    distance: d,
                    parked: false,
                }
            }
        })
        .collect();
    Ok(minutes)
}

/// An all-parked day, used when a vehicle has no trace coverage for a day.
pub fn parked_day() -> Vec<MinuteActivity> {
    (0..DAY_MINUTES)
        .map(|i| MinuteActivity {
            minute_index: i as u16,
            distance: 0.0,
            parked: true,
        })
        .collect()
}

/// Generates a synthetic trace from a two-state trip/idle renewal process.
///
/// Trip durations are exponential with mean `trip_mean_minutes`, idle
/// durations exponential with mean `idle_mean_minutes`, trip speed uniform
/// over `speed_range_mph`, one fix every `fix_interval_secs`. Deterministic
/// for a given seed.
pub fn generate_synthetic_trace(
    seed: u64,
    vehicle_id: &str,
    num_days: u32,
    mobility: &MobilityParams,
) -> Result<VehicleTrace, TraceError> {
    if num_days < 1 {
        return Err(TraceError::NoDays);
    }
    let mut rng = stream_rng(seed, &[0x7ace]);
    let total_secs = num_days as i64 * DAY_SECONDS;
    let end_ts = mobility.start_timestamp + total_secs;

    let mut fixes = Vec::with_capacity((total_secs / mobility.fix_interval_secs) as usize + 1);
    let mut lat = mobility.base_latitude;
    let mut lon = mobility.base_longitude;
    let mut ts = mobility.start_timestamp;

    // Episode state: remaining seconds and, for trips, speed and heading.
    let mut driving = false;
    let mut remaining_secs = sample_exponential(&mut rng, mobility.idle_mean_minutes * 60.0);
    let mut speed_mph = 0.0;
    let mut heading = 0.0f64;

    while ts <= end_ts {
        fixes.push(GpsFix {
            latitude: lat,
            longitude: lon,
            occupied: false,
            timestamp: ts,
        });
        let step = mobility.fix_interval_secs as f64;
        let mut advanced = 0.0;
        while advanced < step {
            if remaining_secs <= 0.0 {
                driving = !driving;
                if driving {
                    remaining_secs =
                        sample_exponential(&mut rng, mobility.trip_mean_minutes * 60.0);
                    speed_mph = rng.gen_range(mobility.speed_range_mph.0..mobility.speed_range_mph.1);
                    heading = pick_heading(&mut rng, lat, lon, mobility);
                } else {
                    remaining_secs =
                        sample_exponential(&mut rng, mobility.idle_mean_minutes * 60.0);
                }
            }
            let chunk = remaining_secs.min(step - advanced);
            if driving {
                let miles = speed_mph * chunk / 3600.0;
                let (dlat, dlon) = offset_degrees(miles, heading, lat);
                lat += dlat;
                lon += dlon;
            }
            remaining_secs -= chunk;
            advanced += chunk;
        }
        ts += mobility.fix_interval_secs;
    }

    Ok(VehicleTrace {
        vehicle_id: vehicle_id.to_string(),
        fixes,
    })
}

fn sample_exponential(rng: &mut impl Rng, mean: f64) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    -mean * u.ln()
}

/// New trip heading; biased back toward base when the walk strays.
fn pick_heading(rng: &mut impl Rng, lat: f64, lon: f64, mobility: &MobilityParams) -> f64 {
    let base = GpsFix {
        latitude: mobility.base_latitude,
        longitude: mobility.base_longitude,
        occupied: false,
        timestamp: 1,
    };
    let here = GpsFix {
        latitude: lat,
        longitude: lon,
        occupied: false,
        timestamp: 1,
    };
    if haversine_miles(&base, &here) > 30.0 {
        (mobility.base_longitude - lon).atan2(mobility.base_latitude - lat)
    } else {
        rng.gen_range(0.0..std::f64::consts::TAU)
    }
}

/// Degree offsets for moving `miles` along `heading` (0 = north) at `lat`.
fn offset_degrees(miles: f64, heading: f64, lat: f64) -> (f64, f64) {
    let deg_per_mile_lat = 360.0 / (2.0 * std::f64::consts::PI * EARTH_RADIUS_MILES);
    let dlat = miles * heading.cos() * deg_per_mile_lat;
    let dlon = miles * heading.sin() * deg_per_mile_lat / lat.to_radians().cos();
    (dlat, dlon)
}
