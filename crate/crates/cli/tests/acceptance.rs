//! Acceptance suite. Each test enforces one numbered criterion at its
//! stated tolerance and prints one PASS line. Run with:
//!
//! ```sh
//! cargo test -p evcoord-cli --test acceptance -- --nocapture --test-threads 1
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use evcoord_core::adasyn::{balance, AdasynParams};
use evcoord_core::dataset::{
    build_honest, build_malicious, split, HonestBuildOptions, Label, LabeledDataset, LabeledRow,
};
use evcoord_core::detector::{
    train, Activation, ArchSpec, InitKind, Loss, Model, ModelKind, OptimizerKind, TrainConfig,
};
use evcoord_core::eval::{confusion, metrics, roc_auc, ConfusionCounts, EvalError};
use evcoord_core::evolution::{
    dominates, evolve, non_dominated_sort, Chromosome, GaConfig, Objectives, SearchSpace,
};
use evcoord_core::impact::{run_impact, ImpactConfig};
use evcoord_core::seed::{derive_seed, stream_rng};
use evcoord_core::trace::{generate_synthetic_trace, MobilityParams, VehicleTrace};
use rand::Rng;

fn pass(n: u32, name: &str) {
    println!("ACCEPTANCE {n} {name}: PASS");
}

fn impact(n_liars: u32, beta: f64, capacity: f64) -> evcoord_core::impact::ImpactReport {
    run_impact(&ImpactConfig {
        n_liars,
        beta,
        capacity,
        seed: 7,
        ..ImpactConfig::default()
    })
    .unwrap()
}

// ---------------------------------------------------------------------
// 1. Capacity-threshold anchors.
// ---------------------------------------------------------------------
#[test]
fn acceptance_1_capacity_threshold_anchors() {
    let budget = Duration::from_secs(10);

    // beta = 0.2, capacity 2160: honest probability is exactly zero from
    // 12 liars on; liar probability is exactly one up to 12 liars.
    for n_liars in [12u32, 13, 16, 25] {
        let t = Instant::now();
        let report = impact(n_liars, 0.2, 2160.0);
        assert!(t.elapsed() < budget, "sweep point took {:?}", t.elapsed());
        assert_eq!(
            report.p_honest_charged,
            Some(0.0),
            "beta 0.2, {n_liars} liars: honest probability not zero"
        );
    }
    for n_liars in [1u32, 6, 11, 12] {
        let report = impact(n_liars, 0.2, 2160.0);
        assert_eq!(
            report.p_liar_charged,
            Some(1.0),
            "beta 0.2, {n_liars} liars: liar probability not one"
        );
    }
    // Threshold exactness: one fewer liar and honest EVs charge again.
    assert!(impact(11, 0.2, 2160.0).p_honest_charged.unwrap() > 0.0);

    // beta = 0.8: the honest-zero threshold sits exactly at 18.
    assert!(impact(17, 0.8, 2160.0).p_honest_charged.unwrap() > 0.0);
    for n_liars in [18u32, 19, 24] {
        assert_eq!(impact(n_liars, 0.8, 2160.0).p_honest_charged, Some(0.0));
    }

    // The same anchor through the CLI.
    let out = Command::new(env!("CARGO_BIN_EXE_evcoord"))
        .args([
            "simulate-impact",
            "--liars",
            "12",
            "--beta",
            "0.2",
            "--capacity",
            "2160",
            "--seed",
            "7",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.contains("12,0.200000,2160.000000,0.000000,1.000000,960.000000"),
        "CLI row missing: {stdout}"
    );

    pass(1, "capacity-threshold anchors");
}

// ---------------------------------------------------------------------
// 2. Unused-power behavior.
// ---------------------------------------------------------------------
#[test]
fn acceptance_2_unused_power() {
    // Saturated plateaus, exact: 12 x 80 = 960 at beta 0.2 and
    // 18 x 20 = 360 at beta 0.8.
    for n_liars in [12u32, 20, 40] {
        let report = impact(n_liars, 0.2, 2160.0);
        assert_eq!(report.avg_unused_power, 960.0, "beta 0.2, {n_liars} liars");
    }
    for n_liars in [18u32, 24, 40] {
        let report = impact(n_liars, 0.8, 2160.0);
        assert_eq!(report.avg_unused_power, 360.0, "beta 0.8, {n_liars} liars");
    }

    // Non-decreasing in liar count up to saturation; zero at zero liars.
    let mut prev = -1.0;
    for n_liars in 0..=12 {
        let u = impact(n_liars, 0.2, 2160.0).avg_unused_power;
        assert!(u >= prev, "{n_liars} liars decreased unused power");
        prev = u;
    }
    assert_eq!(impact(0, 0.2, 2160.0).avg_unused_power, 0.0);
    assert_eq!(impact(0, 0.8, 2160.0).avg_unused_power, 0.0);

    pass(2, "unused-power behavior");
}

// ---------------------------------------------------------------------
// 3. Dataset arithmetic.
// ---------------------------------------------------------------------
fn fleet(evs: usize, days: u32, seed: u64, fix_interval_secs: i64) -> Vec<VehicleTrace> {
    let mobility = MobilityParams {
        fix_interval_secs,
        ..MobilityParams::default()
    };
    (0..evs)
        .map(|i| {
            generate_synthetic_trace(
                derive_seed(seed, &[0x9e4, i as u64]),
                &format!("ev{i:03}"),
                days,
                &mobility,
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn acceptance_3_dataset_arithmetic() {
    let t = Instant::now();

    // Full-size anchor: 536 vehicles x 24 days.
    let traces = fleet(536, 24, 1, 300);
    let honest = build_honest(
        &traces,
        &evcoord_core::soc::EvParams::kia_soul(),
        &evcoord_core::soc::ChargePolicy::default(),
        &HonestBuildOptions {
            days: 24,
            seed: 1,
            ..HonestBuildOptions::default()
        },
    )
    .unwrap();
    assert_eq!(honest.rows.len(), 12_864);
    let malicious = build_malicious(&honest, 2).unwrap();
    assert_eq!(malicious.rows.len(), 51_456);

    // 70/30 split arithmetic on the full 64,320 rows.
    let mut all = honest;
    all.rows.extend(malicious.rows);
    let (train_set, test_set) = split(&all, 0.7, 3).unwrap();
    assert_eq!(train_set.rows.len(), 45_024);
    assert_eq!(test_set.rows.len(), 19_296);
    drop(train_set);
    drop(test_set);
    drop(all);
    drop(traces);

    // Desk-scale default: 64 x 24.
    let traces = fleet(64, 24, 1, 60);
    let honest = build_honest(
        &traces,
        &evcoord_core::soc::EvParams::kia_soul(),
        &evcoord_core::soc::ChargePolicy::default(),
        &HonestBuildOptions {
            days: 24,
            seed: 1,
            ..HonestBuildOptions::default()
        },
    )
    .unwrap();
    assert_eq!(honest.rows.len(), 1_536);
    let malicious = build_malicious(&honest, 2).unwrap();
    assert_eq!(malicious.rows.len(), 6_144);

    let elapsed = t.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    pass(3, "dataset arithmetic");
}

// ---------------------------------------------------------------------
// 4. ADASYN properties.
// ---------------------------------------------------------------------
#[test]
fn acceptance_4_adasyn_properties() {
    let traces = fleet(32, 12, 1, 60);
    let honest = build_honest(
        &traces,
        &evcoord_core::soc::EvParams::kia_soul(),
        &evcoord_core::soc::ChargePolicy::default(),
        &HonestBuildOptions {
            days: 12,
            seed: 1,
            ..HonestBuildOptions::default()
        },
    )
    .unwrap();
    let malicious = build_malicious(&honest, 2).unwrap();
    let mut all = honest;
    all.rows.extend(malicious.rows);
    let (train_set, _) = split(&all, 0.7, 3).unwrap();

    let minority: Vec<Vec<f64>> = train_set
        .rows
        .iter()
        .filter(|r| r.label == Label::Honest)
        .map(|r| r.features.clone())
        .collect();
    let majority: Vec<Vec<f64>> = train_set
        .rows
        .iter()
        .filter(|r| r.label == Label::Lying)
        .map(|r| r.features.clone())
        .collect();

    let report = balance(&minority, &majority, &AdasynParams::default()).unwrap();

    // Sum of normalized ratios is one.
    let sum: f64 = report.normalized_ratios.iter().sum();
    assert!((sum - 1.0).abs() <= 1e-9, "sum of normalized ratios {sum}");

    // Synthetic count target is exact: (m_max - m_min) * xi with xi = 1.
    let expected_target = (majority.len() - minority.len()) as f64;
    assert_eq!(report.total_target, expected_target);

    // Componentwise convexity between the recorded parents.
    assert!(!report.synthetic.is_empty());
    for s in &report.synthetic {
        for ((&v, &a), &b) in s
            .features
            .iter()
            .zip(&minority[s.parent])
            .zip(&minority[s.neighbor])
        {
            assert!(
                v >= a.min(b) - 1e-12 && v <= a.max(b) + 1e-12,
                "synthetic feature off the parent segment"
            );
        }
    }

    // Post-balance class ratio at xi = 1.
    let post_minority = minority.len() + report.synthetic.len();
    let ratio = post_minority as f64 / majority.len() as f64;
    assert!(ratio >= 0.95, "post-balance ratio {ratio}");

    pass(4, "adasyn properties");
}

// ---------------------------------------------------------------------
// 5. Gradient correctness.
// ---------------------------------------------------------------------
#[test]
fn acceptance_5_gradient_correctness() {
    let t = Instant::now();
    let step = 1e-5;
    let tolerance = 1e-4;

    let mut checked_models = 0;
    for seed in 0..20u64 {
        let kind = if seed % 2 == 0 {
            ModelKind::Mlp
        } else {
            ModelKind::Gru
        };
        let activations = [
            Activation::Sigmoid,
            Activation::Tanh,
            Activation::Softsign,
            Activation::Relu,
        ];
        let arch = ArchSpec {
            kind,
            hidden_layers: 1 + (seed as usize % 2),
            width: 3 + (seed as usize % 3),
            // Relu's kink is fine for the MLP batch here but keep the
            // recurrent nets on smooth activations.
            hidden_activation: if kind == ModelKind::Gru {
                activations[seed as usize % 3]
            } else {
                activations[seed as usize % 4]
            },
        };
        let config = TrainConfig {
            loss: if seed % 3 == 0 {
                Loss::MeanSquaredError
            } else {
                Loss::CrossEntropy
            },
            dropout_rate: 0.0,
            ..TrainConfig::default()
        };
        let mut model = Model::build(&arch, InitKind::Glorot, 500 + seed);

        let mut rng = stream_rng(700 + seed, &[1]);
        let batch_rows: Vec<(Vec<f64>, Label)> = (0..2)
            .map(|_| {
                let features: Vec<f64> = (0..48).map(|_| rng.gen_range(0.0..1.0)).collect();
                let label = if rng.gen_range(0.0..1.0) < 0.5 {
                    Label::Lying
                } else {
                    Label::Honest
                };
                (features, label)
            })
            .collect();
        let batch: Vec<(&[f64], Label)> = batch_rows
            .iter()
            .map(|(f, l)| (f.as_slice(), *l))
            .collect();

        let (_, grads) = model.loss_and_gradients(&batch, &config, 0).unwrap();
        let mut analytic = Vec::new();
        model.zip_params_mut(&grads, |_, _, g| analytic.push(g));

        for (k, &analytic_grad) in analytic.iter().enumerate() {
            model.for_each_param_mut(|i, w| {
                if i == k {
                    *w += step;
                }
            });
            let (loss_plus, _) = model.loss_and_gradients(&batch, &config, 0).unwrap();
            model.for_each_param_mut(|i, w| {
                if i == k {
                    *w -= 2.0 * step;
                }
            });
            let (loss_minus, _) = model.loss_and_gradients(&batch, &config, 0).unwrap();
            model.for_each_param_mut(|i, w| {
                if i == k {
                    *w += step;
                }
            });
            let numeric = (loss_plus - loss_minus) / (2.0 * step);
            let rel =
                (analytic_grad - numeric).abs() / (analytic_grad.abs() + numeric.abs()).max(1e-8);
            assert!(
                rel <= tolerance,
                "model {seed} ({kind:?}) param {k}: rel error {rel:.2e}"
            );
        }
        checked_models += 1;
    }
    assert_eq!(checked_models, 20);
    let elapsed = t.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    pass(5, "gradient correctness (20 models vs central differences)");
}

// ---------------------------------------------------------------------
// 6. Detector quality at desk scale.
// ---------------------------------------------------------------------
fn eval_on(model: &Model, test_set: &LabeledDataset) -> (f64, f64, f64) {
    let labels: Vec<Label> = test_set.rows.iter().map(|r| r.label).collect();
    let mut preds = Vec::with_capacity(labels.len());
    let mut scores = Vec::with_capacity(labels.len());
    for row in &test_set.rows {
        let p = model.predict(&row.features).unwrap();
        scores.push(p.lying_score());
        preds.push(p.label());
    }
    let counts = confusion(&labels, &preds).unwrap();
    let m = metrics(&counts).unwrap();
    let (_, auc) = roc_auc(&scores, &labels).unwrap();
    (auc, m.hd, m.acc)
}

#[test]
fn acceptance_6_detector_quality() {
    let t = Instant::now();

    // Seed-fixed desk-scale dataset: 64 vehicles x 24 days, 70/30 split,
    // ADASYN-balanced train.
    let traces = fleet(64, 24, 1, 60);
    let honest = build_honest(
        &traces,
        &evcoord_core::soc::EvParams::kia_soul(),
        &evcoord_core::soc::ChargePolicy::default(),
        &HonestBuildOptions {
            days: 24,
            seed: 1,
            ..HonestBuildOptions::default()
        },
    )
    .unwrap();
    let malicious = build_malicious(&honest, 2).unwrap();
    assert_eq!(honest.rows.len(), 1_536);
    assert_eq!(malicious.rows.len(), 6_144);
    let mut all = honest;
    all.rows.extend(malicious.rows);
    let (train_set, test_set) = split(&all, 0.7, 3).unwrap();

    let minority: Vec<Vec<f64>> = train_set
        .rows
        .iter()
        .filter(|r| r.label == Label::Honest)
        .map(|r| r.features.clone())
        .collect();
    let majority_count = train_set.rows.len() - minority.len();
    let report = balance(
        &minority,
        &train_set
            .rows
            .iter()
            .filter(|r| r.label == Label::Lying)
            .map(|r| r.features.clone())
            .collect::<Vec<_>>(),
        &AdasynParams {
            seed: 4,
            ..AdasynParams::default()
        },
    )
    .unwrap();
    let mut balanced = train_set;
    for (i, s) in report.synthetic.iter().enumerate() {
        balanced.rows.push(LabeledRow {
            ev_id: format!("adasyn{i:05}"),
            day: 0,
            features: s.features.clone(),
            label: Label::Honest,
            attack_id: 0,
        });
    }
    assert!(minority.len() + report.synthetic.len() >= (majority_count as f64 * 0.95) as usize);

    // Identical training budget for both architectures.
    let (train_part, valid_part) = split(&balanced, 0.9, 5).unwrap();
    let config = TrainConfig {
        learning_rate: 0.002,
        batch_size: 32,
        epochs: 6,
        loss: Loss::CrossEntropy,
        dropout_rate: 0.1,
        max_norm: 3.0,
        init: InitKind::Glorot,
        optimizer: OptimizerKind::Adam,
        seed: 6,
    };

    // The best GRU shape: two layers of 128, softsign hidden, softmax out.
    let gru_arch = ArchSpec {
        kind: ModelKind::Gru,
        hidden_layers: 2,
        width: 128,
        hidden_activation: Activation::Softsign,
    };
    let gru = train(&gru_arch, &train_part.rows, &valid_part.rows, &config).unwrap();
    let (gru_auc, gru_hd, gru_acc) = eval_on(&gru.model, &test_set);
    println!("  gru 2x128 softsign: auc {gru_auc:.4} hd {gru_hd:.4} acc {gru_acc:.4}");

    // The best MLP shape: six layers of 768, relu hidden, softmax out.
    let mlp_arch = ArchSpec {
        kind: ModelKind::Mlp,
        hidden_layers: 6,
        width: 768,
        hidden_activation: Activation::Relu,
    };
    let mlp = train(&mlp_arch, &train_part.rows, &valid_part.rows, &config).unwrap();
    let (mlp_auc, mlp_hd, mlp_acc) = eval_on(&mlp.model, &test_set);
    println!("  mlp 6x768 relu:     auc {mlp_auc:.4} hd {mlp_hd:.4} acc {mlp_acc:.4}");

    assert!(gru_auc >= 0.90, "GRU test AUC {gru_auc:.4} below 0.90");
    assert!(gru_hd >= 0.80, "GRU test HD {gru_hd:.4} below 0.80");
    assert!(
        gru_hd >= mlp_hd,
        "GRU HD {gru_hd:.4} below MLP HD {mlp_hd:.4}"
    );

    let elapsed = t.elapsed();
    assert!(elapsed < Duration::from_secs(30 * 60), "took {elapsed:?}");
    pass(6, "detector quality at desk scale");
}

// ---------------------------------------------------------------------
// 7. NSGA-II correctness.
// ---------------------------------------------------------------------

/// Brute-force front extraction: repeatedly peel the set of points not
/// dominated by any remaining point.
fn brute_force_fronts(points: &[Objectives]) -> Vec<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !remaining.is_empty() {
        let front: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&p| {
                !remaining
                    .iter()
                    .any(|&q| q != p && dominates(&points[q], &points[p]))
            })
            .collect();
        remaining.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

fn utopia() -> Chromosome {
    Chromosome {
        hidden_layers: 2,
        width: 128,
        optimizer: OptimizerKind::Adam,
        init: InitKind::Glorot,
        dropout_tenths: 1,
        max_norm: 3,
        hidden_activation: Activation::Softsign,
    }
}

fn hamming_fitness(c: &Chromosome) -> Objectives {
    let t = utopia();
    let mut h = 0u32;
    h += u32::from(c.hidden_layers != t.hidden_layers);
    h += u32::from(c.width != t.width);
    h += u32::from(c.optimizer != t.optimizer);
    h += u32::from(c.init != t.init);
    h += u32::from(c.dropout_tenths != t.dropout_tenths);
    h += u32::from(c.max_norm != t.max_norm);
    h += u32::from(c.hidden_activation != t.hidden_activation);
    let f = h as f64 / 8.0;
    Objectives {
        dr: 1.0 - f,
        fa: f,
    }
}

#[test]
fn acceptance_7_nsga_correctness() {
    let t = Instant::now();

    // Non-dominated sort vs the brute-force oracle on 200 populations.
    for seed in 0..200u64 {
        let mut rng = stream_rng(seed, &[0x50f7]);
        let points: Vec<Objectives> = (0..20)
            .map(|_| Objectives {
                dr: (rng.gen_range(0..20) as f64) / 20.0,
                fa: (rng.gen_range(0..20) as f64) / 20.0,
            })
            .collect();
        let got = non_dominated_sort(&points);
        let expected = brute_force_fronts(&points);
        assert_eq!(got.len(), expected.len(), "front count differs, seed {seed}");
        for (g, e) in got.iter().zip(&expected) {
            let mut g = g.clone();
            let mut e = e.clone();
            g.sort_unstable();
            e.sort_unstable();
            assert_eq!(g, e, "front membership differs, seed {seed}");
        }
    }

    // Planted-optimum recovery in at least 9 of 10 seeds within the
    // default 8 generations.
    let mut hits = 0;
    for seed in 0..10 {
        let config = GaConfig {
            population_size: 60,
            seed,
            ..GaConfig::default()
        };
        assert_eq!(config.generations, 8);
        let archive = evolve(&config, &SearchSpace::default(), hamming_fitness).unwrap();
        if archive.iter().any(|(c, _)| *c == utopia()) {
            hits += 1;
        }
    }
    assert!(hits >= 9, "planted optimum recovered in {hits}/10 seeds");

    let elapsed = t.elapsed();
    assert!(elapsed < Duration::from_secs(5 * 60), "took {elapsed:?}");
    pass(7, "nsga-ii correctness");
}

// ---------------------------------------------------------------------
// 8. Metrics oracle.
// ---------------------------------------------------------------------
#[test]
fn acceptance_8_metrics_oracle() {
    let to_labels = |bits: u32| -> Vec<Label> {
        (0..4)
            .map(|i| {
                if bits >> i & 1 == 1 {
                    Label::Lying
                } else {
                    Label::Honest
                }
            })
            .collect()
    };

    // Every labels x predictions pattern on 4 samples, checked against
    // direct hand counting and re-derived ratios.
    for label_bits in 0..16u32 {
        for pred_bits in 0..16u32 {
            let labels = to_labels(label_bits);
            let preds = to_labels(pred_bits);
            let counts = confusion(&labels, &preds).unwrap();

            let mut hand = ConfusionCounts {
                true_pos: 0,
                true_neg: 0,
                false_pos: 0,
                false_neg: 0,
            };
            for i in 0..4 {
                match (labels[i], preds[i]) {
                    (Label::Lying, Label::Lying) => hand.true_pos += 1,
                    (Label::Honest, Label::Honest) => hand.true_neg += 1,
                    (Label::Honest, Label::Lying) => hand.false_pos += 1,
                    (Label::Lying, Label::Honest) => hand.false_neg += 1,
                }
            }
            assert_eq!(counts, hand);

            match metrics(&counts) {
                Ok(m) => {
                    let tp = counts.true_pos as f64;
                    let tn = counts.true_neg as f64;
                    let fp = counts.false_pos as f64;
                    let fn_ = counts.false_neg as f64;
                    assert_eq!(m.acc, (tp + tn) / 4.0);
                    assert_eq!(m.tpr, tp / (tp + fn_));
                    assert_eq!(m.fpr, fp / (fp + tn));
                    assert_eq!(m.dr, tp / (tp + fp));
                    assert_eq!(m.fa, fp / (tn + fp));
                    assert_eq!(m.hd, m.dr - m.fa);
                    assert_eq!(m.fa, m.fpr);
                }
                Err(EvalError::Undefined(_)) => {
                    // Raised exactly when some denominator is zero.
                    let undefined = counts.true_pos + counts.false_neg == 0
                        || counts.false_pos + counts.true_neg == 0
                        || counts.true_pos + counts.false_pos == 0;
                    assert!(undefined, "spurious undefined error for {counts:?}");
                }
                Err(other) => panic!("unexpected error {other}"),
            }
        }
    }

    // The worked 4-point ROC: AUC 0.75.
    let scores = [0.9, 0.8, 0.7, 0.1];
    let labels = [Label::Lying, Label::Honest, Label::Lying, Label::Honest];
    let (curve, auc) = roc_auc(&scores, &labels).unwrap();
    assert!((auc - 0.75).abs() < 1e-12);
    let path: Vec<(f64, f64)> = curve.iter().map(|p| (p.fpr, p.tpr)).collect();
    assert_eq!(
        path,
        vec![(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]
    );

    pass(8, "metrics oracle");
}

// ---------------------------------------------------------------------
// 9. End-to-end determinism.
// ---------------------------------------------------------------------
fn run_cli(args: &[&str], dir: &Path) {
    let out = Command::new(env!("CARGO_BIN_EXE_evcoord"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "evcoord {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn full_pipeline(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    run_cli(
        &[
            "build-dataset",
            "--evs", "6", "--days", "4", "--seed", "1",
            "--out-honest", "honest.csv",
            "--out-malicious", "malicious.csv",
        ],
        dir,
    );
    run_cli(
        &[
            "split",
            "--honest", "honest.csv",
            "--malicious", "malicious.csv",
            "--seed", "2",
            "--out-train", "train.csv",
            "--out-test", "test.csv",
        ],
        dir,
    );
    run_cli(
        &["balance", "--input", "train.csv", "--seed", "3", "--out", "balanced.csv"],
        dir,
    );
    run_cli(
        &[
            "train",
            "--train", "balanced.csv",
            "--arch", "gru",
            "--layers", "1",
            "--units", "8",
            "--epochs", "3",
            "--batch-size", "16",
            "--learning-rate", "0.02",
            "--valid-fraction", "0.2",
            "--seed", "4",
            "--out-model", "model.txt",
            "--out-history", "history.csv",
        ],
        dir,
    );
    run_cli(
        &[
            "evaluate",
            "--model", "model.txt",
            "--test", "test.csv",
            "--out-metrics", "metrics.csv",
            "--out-roc", "roc.csv",
        ],
        dir,
    );
    run_cli(
        &[
            "simulate-impact",
            "--liars", "0..14",
            "--beta", "0.2",
            "--capacity", "2160",
            "--seed", "7",
            "--out", "impact.csv",
        ],
        dir,
    );
    run_cli(
        &[
            "report",
            "--impact", "impact.csv",
            "--metrics", "metrics.csv",
            "--out", "report.csv",
        ],
        dir,
    );

    [
        "honest.csv", "malicious.csv", "train.csv", "test.csv", "balanced.csv",
        "model.txt", "history.csv", "metrics.csv", "roc.csv", "impact.csv", "report.csv",
    ]
    .into_iter()
    .map(|name| (name.to_string(), std::fs::read(dir.join(name)).unwrap()))
    .collect()
}

fn fresh_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("evcoord_accept_{tag}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn acceptance_9_end_to_end_determinism() {
    let a = full_pipeline(&fresh_dir("a"));
    let b = full_pipeline(&fresh_dir("b"));
    assert_eq!(a.len(), b.len());
    for (name, bytes) in &a {
        assert_eq!(bytes, &b[name], "artifact {name} differs between runs");
    }
    pass(9, "end-to-end determinism");
}
