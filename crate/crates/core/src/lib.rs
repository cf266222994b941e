//! Desk-scale workbench for EV charging coordination under false-SoC
//! reporting: a knapsack-based per-slot coordinator with lying-EV impact
//! experiments, trace-driven SoC dataset synthesis with four reporting
//! attacks, ADASYN class balancing, from-scratch MLP and GRU detectors
//! trained by mini-batch SGD/BPTT, NSGA-II hyperparameter search, and
//! confusion-matrix/ROC evaluation.

pub mod adasyn;
pub mod attacks;
pub mod coordinator;
pub mod dataset;
pub mod detector;
pub mod eval;
pub mod evolution;
pub mod impact;
pub mod seed;
pub mod soc;
pub mod trace;

pub use adasyn::{balance, imbalance_ratio, AdasynParams, AdasynReport};
pub use attacks::{apply_attack, AttackKind, AttackSpec};
pub use coordinator::{priority_index, schedule_slot, ChargingRequest, PriorityParams, SlotAllocation};
pub use dataset::{
    autocorrelation, build_honest, build_malicious, read_csv, split, write_csv,
    HonestBuildOptions, Label, LabeledDataset, LabeledRow,
};
pub use detector::{
    load_model, save_model, train, Activation, ArchSpec, InitKind, Model, ModelKind,
    OptimizerKind, Prediction, TrainConfig,
};
pub use eval::{confusion, metrics, roc_auc, ConfusionCounts, MetricSet};
pub use evolution::{
    crowding_distance, dominates, evolve, non_dominated_sort, Chromosome, GaConfig, Objectives,
    SearchSpace,
};
pub use impact::{run_impact, unused_power, ImpactConfig, ImpactReport};
pub use trace::{
    generate_synthetic_trace, haversine_miles, minutize, parse_trace, serialize_trace, GpsFix,
    MinuteActivity, MobilityParams, VehicleTrace,
};
pub use soc::{charging_decision, simulate_day, step_soc, ChargePolicy, EvParams, SocDay};
