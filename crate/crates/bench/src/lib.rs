//! Shared fixtures for the criterion benchmarks.

use evcoord_core::coordinator::ChargingRequest;
use evcoord_core::dataset::Label;
use evcoord_core::evolution::Objectives;
use evcoord_core::seed::stream_rng;
use rand::Rng as _;

/// The 12-liar / 88-honest fleet of the capacity experiments.
pub fn impact_requests() -> Vec<ChargingRequest> {
    let mut requests = Vec::with_capacity(100);
    for i in 0..12 {
        requests.push(ChargingRequest {
            ev_id: format!("liar{i:02}"),
            reported_soc: 0.1,
            tcc: 4,
        });
    }
    for i in 0..88 {
        requests.push(ChargingRequest {
            ev_id: format!("honest{i:02}"),
            reported_soc: 0.5,
            tcc: 4,
        });
    }
    requests
}

/// A random 48-feature row in [0, 1].
pub fn random_row(seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, &[0xbe]);
    (0..48).map(|_| rng.gen_range(0.0..1.0)).collect()
}

/// A batch of rows with alternating labels.
pub fn random_batch(n: usize) -> Vec<(Vec<f64>, Label)> {
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Lying } else { Label::Honest };
            (random_row(i as u64), label)
        })
        .collect()
}

/// Random objective points for sorting benchmarks.
pub fn random_objectives(n: usize, seed: u64) -> Vec<Objectives> {
    let mut rng = stream_rng(seed, &[0x0b]);
    (0..n)
        .map(|_| Objectives {
            dr: rng.gen_range(0.0..1.0),
            fa: rng.gen_range(0.0..1.0),
        })
        .collect()
}
