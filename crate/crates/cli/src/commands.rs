//! Subcommand implementations. Each reads and writes only its declared
//! paths, never mutates an input, and derives all randomness from the
//! resolved seeds.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use evcoord_core::adasyn::{balance, AdasynParams};
use evcoord_core::dataset::{
    build_honest, build_malicious, read_csv, split, write_csv, HonestBuildOptions, Label,
    LabeledDataset, LabeledRow,
};
use evcoord_core::detector::{
    load_model, save_model, train, Activation, ArchSpec, InitKind, Loss, Model, ModelKind,
    OptimizerKind, TrainConfig,
};
use evcoord_core::eval::{confusion, metrics, roc_auc};
use evcoord_core::evolution::{evolve, Chromosome, GaConfig, Objectives, SearchSpace};
use evcoord_core::impact::{run_impact, ImpactConfig};
use evcoord_core::seed::derive_seed;
use evcoord_core::trace::{
    generate_synthetic_trace, parse_trace, serialize_trace, MobilityParams, VehicleTrace,
};

/// Writes a file, refusing to clobber any of the run's input paths.
pub fn write_output(path: &Path, contents: &str, inputs: &[&Path]) -> Result<()> {
    for input in inputs {
        if same_path(path, input) {
            bail!("refusing to overwrite input {}", input.display());
        }
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn same_path(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(ca), Ok(cb)) => ca == cb,
        _ => a == b,
    }
}

fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    read_csv(&text).with_context(|| format!("parsing {}", path.display()))
}

fn fmt6(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.6}")
    }
}

pub fn mobility_with_interval(fix_interval_secs: i64) -> MobilityParams {
    MobilityParams {
        fix_interval_secs,
        ..MobilityParams::default()
    }
}

/// Generates the synthetic fleet used whenever real traces are absent.
pub fn synthetic_fleet(
    evs: usize,
    days: u32,
    seed: u64,
    mobility: &MobilityParams,
) -> Result<Vec<VehicleTrace>> {
    (0..evs)
        .map(|i| {
            let ev_seed = derive_seed(seed, &[0x9e4, i as u64]);
            generate_synthetic_trace(ev_seed, &format!("ev{i:03}"), days, mobility)
                .map_err(Into::into)
        })
        .collect()
}

pub fn gen_traces(evs: usize, days: u32, seed: u64, fix_interval: i64, out_dir: &Path) -> Result<()> {
    let mobility = mobility_with_interval(fix_interval);
    std::fs::create_dir_all(out_dir)?;
    let traces = synthetic_fleet(evs, days, seed, &mobility)?;
    for trace in &traces {
        let path = out_dir.join(format!("{}.txt", trace.vehicle_id));
        write_output(&path, &serialize_trace(trace), &[])?;
    }
    println!("wrote {} traces to {}", traces.len(), out_dir.display());
    Ok(())
}

/// Loads traces from a directory of `.txt` files (sorted by name) or a
/// single file.
pub fn load_traces(path: &Path) -> Result<Vec<VehicleTrace>> {
    let mut files: Vec<PathBuf> = if path.is_dir() {
        std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "txt"))
            .collect()
    } else {
        vec![path.to_path_buf()]
    };
    files.sort();
    if files.is_empty() {
        bail!("no .txt trace files under {}", path.display());
    }
    files
        .iter()
        .map(|file| {
            let id = file
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("vehicle")
                .to_string();
            let text = std::fs::read_to_string(file)
                .with_context(|| format!("reading {}", file.display()))?;
            parse_trace(&text, &id).with_context(|| format!("parsing {}", file.display()))
        })
        .collect()
}

pub fn ingest(traces_path: &Path, out_dir: &Path) -> Result<()> {
    let traces = load_traces(traces_path)?;
    std::fs::create_dir_all(out_dir)?;
    for trace in &traces {
        let out = out_dir.join(format!("{}.txt", trace.vehicle_id));
        write_output(&out, &serialize_trace(trace), &[traces_path])?;
        println!(
            "{}: {} fixes, {}..{}",
            trace.vehicle_id,
            trace.fixes.len(),
            trace.start(),
            trace.end()
        );
    }
    println!("normalized {} traces into {}", traces.len(), out_dir.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn build_dataset(
    traces_path: Option<&Path>,
    evs: usize,
    days: u32,
    seed: u64,
    attack_seed: u64,
    max_speed_mph: f64,
    fix_interval: i64,
    out_honest: &Path,
    out_malicious: &Path,
) -> Result<()> {
    let traces = match traces_path {
        Some(path) => load_traces(path)?,
        None => synthetic_fleet(evs, days, seed, &mobility_with_interval(fix_interval))?,
    };
    let options = HonestBuildOptions {
        days,
        max_speed_mph,
        seed,
        ..HonestBuildOptions::default()
    };
    let honest = build_honest(
        &traces,
        &evcoord_core::soc::EvParams::kia_soul(),
        &evcoord_core::soc::ChargePolicy::default(),
        &options,
    )?;
    let malicious = build_malicious(&honest, attack_seed)?;
    let inputs: Vec<&Path> = traces_path.into_iter().collect();
    write_output(out_honest, &write_csv(&honest), &inputs)?;
    write_output(out_malicious, &write_csv(&malicious), &inputs)?;
    println!(
        "honest rows: {} -> {}",
        honest.rows.len(),
        out_honest.display()
    );
    println!(
        "malicious rows: {} -> {}",
        malicious.rows.len(),
        out_malicious.display()
    );
    Ok(())
}

pub fn split_cmd(
    honest_path: &Path,
    malicious_path: &Path,
    fraction: f64,
    seed: u64,
    out_train: &Path,
    out_test: &Path,
) -> Result<()> {
    let honest = read_dataset(honest_path)?;
    let malicious = read_dataset(malicious_path)?;
    let mut all = honest;
    all.rows.extend(malicious.rows);
    all.provenance = format!(
        "{} + {}",
        honest_path.display(),
        malicious_path.display()
    );
    let (train_set, test_set) = split(&all, fraction, seed)?;
    let inputs = [honest_path, malicious_path];
    write_output(out_train, &write_csv(&train_set), &inputs)?;
    write_output(out_test, &write_csv(&test_set), &inputs)?;
    println!(
        "train {} / test {} (fraction {fraction})",
        train_set.rows.len(),
        test_set.rows.len()
    );
    Ok(())
}

pub fn balance_cmd(
    input: &Path,
    k: usize,
    xi: f64,
    ratio_threshold: f64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let dataset = read_dataset(input)?;
    let minority: Vec<Vec<f64>> = dataset
        .rows
        .iter()
        .filter(|r| r.label == Label::Honest)
        .map(|r| r.features.clone())
        .collect();
    let majority: Vec<Vec<f64>> = dataset
        .rows
        .iter()
        .filter(|r| r.label == Label::Lying)
        .map(|r| r.features.clone())
        .collect();
    let params = AdasynParams {
        k,
        xi,
        ratio_threshold,
        seed,
    };
    let report = balance(&minority, &majority, &params)?;

    let mut out_set = dataset;
    for (i, sample) in report.synthetic.iter().enumerate() {
        out_set.rows.push(LabeledRow {
            ev_id: format!("adasyn{i:05}"),
            day: 0,
            features: sample.features.clone(),
            label: Label::Honest,
            attack_id: 0,
        });
    }
    write_output(out, &write_csv(&out_set), &[input])?;
    let honest_after = minority.len() + report.synthetic.len();
    println!(
        "ratio {:.4}, target {}, generated {}, honest {} vs lying {}",
        report.ratio,
        report.total_target,
        report.synthetic.len(),
        honest_after,
        majority.len()
    );
    Ok(())
}

pub struct TrainArgs {
    pub arch: ModelKind,
    pub layers: usize,
    pub units: usize,
    pub hidden_activation: Activation,
    pub optimizer: OptimizerKind,
    pub init: InitKind,
    pub dropout: f64,
    pub max_norm: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: u32,
    pub loss: Loss,
    pub valid_fraction: f64,
    pub seed: u64,
}

pub fn train_cmd(
    train_path: &Path,
    args: &TrainArgs,
    out_model: &Path,
    out_history: Option<&Path>,
) -> Result<()> {
    let dataset = read_dataset(train_path)?;
    let (train_part, valid_part) = split(&dataset, 1.0 - args.valid_fraction, args.seed)?;
    let arch = ArchSpec {
        kind: args.arch,
        hidden_layers: args.layers,
        width: args.units,
        hidden_activation: args.hidden_activation,
    };
    let config = TrainConfig {
        learning_rate: args.learning_rate,
        batch_size: args.batch_size,
        epochs: args.epochs,
        loss: args.loss,
        dropout_rate: args.dropout,
        max_norm: args.max_norm,
        init: args.init,
        optimizer: args.optimizer,
        seed: args.seed,
    };
    let report = train(&arch, &train_part.rows, &valid_part.rows, &config)?;
    write_output(out_model, &save_model(&report.model), &[train_path])?;

    let mut history = String::from("epoch,train_loss,val_dr,val_fa,val_acc,val_hd\n");
    for s in &report.history {
        let _ = writeln!(
            history,
            "{},{},{},{},{},{}",
            s.epoch,
            fmt6(s.train_loss),
            fmt6(s.val_dr),
            fmt6(s.val_fa),
            fmt6(s.val_acc),
            fmt6(s.val_hd)
        );
        println!(
            "epoch {:>3}: loss {:.4} val_dr {:.4} val_fa {:.4} val_hd {:.4}",
            s.epoch, s.train_loss, s.val_dr, s.val_fa, s.val_hd
        );
    }
    if let Some(path) = out_history {
        write_output(path, &history, &[train_path])?;
    }
    println!("model -> {}", out_model.display());
    Ok(())
}

pub fn evaluate_cmd(
    model_path: &Path,
    test_path: &Path,
    out_metrics: &Path,
    out_roc: Option<&Path>,
) -> Result<()> {
    let model_text = std::fs::read_to_string(model_path)
        .with_context(|| format!("reading {}", model_path.display()))?;
    let model = load_model(&model_text)?;
    let test_set = read_dataset(test_path)?;

    let labels: Vec<Label> = test_set.rows.iter().map(|r| r.label).collect();
    let mut predicted = Vec::with_capacity(test_set.rows.len());
    let mut scores = Vec::with_capacity(test_set.rows.len());
    for row in &test_set.rows {
        let p = model.predict(&row.features)?;
        scores.push(p.lying_score());
        predicted.push(p.label());
    }
    let counts = confusion(&labels, &predicted)?;
    let mut m = metrics(&counts)?;
    let (curve, auc) = roc_auc(&scores, &labels)?;
    m.auc = Some(auc);

    let name = match &model {
        Model::Mlp(_) => "mlp",
        Model::Gru(_) => "gru",
    };
    let mut metrics_csv = String::from("model,acc,tpr,fpr,dr,fa,hd,auc\n");
    let _ = writeln!(
        metrics_csv,
        "{name},{},{},{},{},{},{},{}",
        fmt6(m.acc),
        fmt6(m.tpr),
        fmt6(m.fpr),
        fmt6(m.dr),
        fmt6(m.fa),
        fmt6(m.hd),
        fmt6(auc)
    );
    write_output(out_metrics, &metrics_csv, &[model_path, test_path])?;

    if let Some(path) = out_roc {
        let mut roc_csv = String::from("threshold,fpr,tpr\n");
        for p in &curve {
            let _ = writeln!(roc_csv, "{},{},{}", fmt6(p.threshold), fmt6(p.fpr), fmt6(p.tpr));
        }
        write_output(path, &roc_csv, &[model_path, test_path])?;
    }
    println!(
        "{name}: acc {:.4} dr {:.4} fa {:.4} hd {:.4} auc {:.4}",
        m.acc, m.dr, m.fa, m.hd, auc
    );
    Ok(())
}

pub struct TuneArgs {
    pub arch: ModelKind,
    pub population: usize,
    pub generations: u32,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub epochs: u32,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub valid_fraction: f64,
    pub seed: u64,
    /// Optional domain restrictions for desk-scale runs.
    pub widths: Option<Vec<u16>>,
    pub max_layers: Option<u8>,
}

pub fn tune_cmd(train_path: &Path, args: &TuneArgs, out_archive: &Path) -> Result<()> {
    let dataset = read_dataset(train_path)?;
    let (train_part, valid_part) = split(&dataset, 1.0 - args.valid_fraction, args.seed)?;

    let mut space = SearchSpace::default();
    if let Some(widths) = &args.widths {
        space.widths = widths.clone();
    }
    if let Some(max_layers) = args.max_layers {
        space.hidden_layers.retain(|&l| l <= max_layers);
    }

    let ga = GaConfig {
        population_size: args.population,
        generations: args.generations,
        crossover_rate: args.crossover_rate,
        mutation_rate: args.mutation_rate,
        elite_count: 1,
        seed: args.seed,
    };

    let train_seed = derive_seed(args.seed, &[0x7a1]);
    let fitness = |c: &Chromosome| -> Objectives {
        let arch = ArchSpec {
            kind: args.arch,
            hidden_layers: c.hidden_layers as usize,
            width: c.width as usize,
            hidden_activation: c.hidden_activation,
        };
        let config = TrainConfig {
            learning_rate: args.learning_rate,
            batch_size: args.batch_size,
            epochs: args.epochs,
            loss: Loss::CrossEntropy,
            dropout_rate: c.dropout_rate(),
            max_norm: c.max_norm as f64,
            init: c.init,
            optimizer: c.optimizer,
            seed: train_seed,
        };
        match train(&arch, &train_part.rows, &valid_part.rows, &config) {
            Ok(report) => {
                let best = report
                    .history
                    .iter()
                    .max_by(|a, b| a.val_hd.partial_cmp(&b.val_hd).unwrap())
                    .expect("non-empty history");
                Objectives {
                    dr: best.val_dr,
                    fa: best.val_fa,
                }
            }
            // A diverging configuration scores as a worst-case point.
            Err(_) => Objectives { dr: 0.0, fa: 1.0 },
        }
    };

    let archive = evolve(&ga, &space, fitness)?;
    let mut csv = String::from(
        "layers,units,optimizer,init,dropout,max_norm,hidden_activation,output_activation,dr,fa\n",
    );
    for (c, o) in &archive {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},softmax,{},{}",
            c.hidden_layers,
            c.width,
            c.optimizer.name(),
            c.init.name(),
            fmt6(c.dropout_rate()),
            c.max_norm,
            c.hidden_activation.name(),
            fmt6(o.dr),
            fmt6(o.fa)
        );
        println!(
            "pareto: {}x{} {} {} dropout {:.1} max_norm {} {} -> dr {:.4} fa {:.4}",
            c.hidden_layers,
            c.width,
            c.optimizer.name(),
            c.init.name(),
            c.dropout_rate(),
            c.max_norm,
            c.hidden_activation.name(),
            o.dr,
            o.fa
        );
    }
    write_output(out_archive, &csv, &[train_path])?;
    println!("archive ({} entries) -> {}", archive.len(), out_archive.display());
    Ok(())
}

/// Parses `--liars` as a single count or an inclusive `a..b` range.
pub fn parse_liar_range(spec: &str) -> Result<Vec<u32>> {
    if let Some((a, b)) = spec.split_once("..") {
        let lo: u32 = a.trim().parse().context("bad range start")?;
        let hi: u32 = b.trim().parse().context("bad range end")?;
        if lo > hi {
            bail!("empty liar range {spec:?}");
        }
        Ok((lo..=hi).collect())
    } else {
        Ok(vec![spec.trim().parse().context("bad liar count")?])
    }
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_impact(
    liars: &[u32],
    beta: f64,
    capacity: f64,
    slots: u32,
    evs: u32,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let mut csv = String::from("n_liars,beta,capacity,p_honest,p_liar,avg_unused\n");
    for &n_liars in liars {
        let config = ImpactConfig {
            n_evs: evs,
            n_liars,
            beta,
            capacity,
            n_slots: slots,
            seed,
            ..ImpactConfig::default()
        };
        let report = run_impact(&config)?;
        let _ = writeln!(
            csv,
            "{n_liars},{},{},{},{},{}",
            fmt6(beta),
            fmt6(capacity),
            fmt6(report.p_honest_charged.unwrap_or(f64::NAN)),
            fmt6(report.p_liar_charged.unwrap_or(f64::NAN)),
            fmt6(report.avg_unused_power)
        );
    }
    match out {
        Some(path) => {
            write_output(path, &csv, &[])?;
            println!("impact rows -> {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

pub fn report_cmd(impact_path: Option<&Path>, metrics_path: Option<&Path>, out: &Path) -> Result<()> {
    let mut csv = String::from(
        "source,n_liars,beta,capacity,p_honest,p_liar,avg_unused,model,acc,tpr,fpr,dr,fa,hd,auc\n",
    );
    let mut inputs: Vec<&Path> = Vec::new();
    if let Some(path) = impact_path {
        inputs.push(path);
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                if line != "n_liars,beta,capacity,p_honest,p_liar,avg_unused" {
                    bail!("{}: unexpected impact header", path.display());
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let _ = writeln!(csv, "impact,{line},,,,,,,,");
        }
    }
    if let Some(path) = metrics_path {
        inputs.push(path);
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                if line != "model,acc,tpr,fpr,dr,fa,hd,auc" {
                    bail!("{}: unexpected metrics header", path.display());
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let _ = writeln!(csv, "detector,,,,,,,{line}");
        }
    }
    write_output(out, &csv, &inputs)?;
    println!("report -> {}", out.display());
    Ok(())
}
