//! NSGA-II hyperparameter search over detector chromosomes.
//!
//! Objectives: maximize detection rate, minimize false acceptance.
//! Generational loop with binary tournament selection on (front rank,
//! crowding distance), single-point crossover on the 8-gene string,
//! per-gene uniform mutation, and elitist environmental selection of the
//! best n from parents plus offspring. Fitness evaluations are memoized
//! per chromosome.

use std::collections::HashMap;

use rand::Rng;
use thiserror::Error;

use crate::detector::{Activation, InitKind, OptimizerKind};
use crate::seed::stream_rng;

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("search space has an empty gene domain: {0}")]
    EmptyDomain(&'static str),
    #[error("population size must be at least 2")]
    PopulationTooSmall,
    #[error("rate {name} = {value} outside [0, 1]")]
    BadRate { name: &'static str, value: f64 },
}

/// One hyperparameter configuration. The output activation is fixed to
/// softmax and participates as a constant eighth gene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Chromosome {
    /// Hidden layer count, 1..=6.
    pub hidden_layers: u8,
    /// Neurons per layer, from {32, 64, 128, 256, 512, 768}.
    pub width: u16,
    pub optimizer: OptimizerKind,
    pub init: InitKind,
    /// Dropout rate in tenths, 0..=5 (0.0 to 0.5).
    pub dropout_tenths: u8,
    /// Max-norm constraint, 1..=5.
    pub max_norm: u8,
    pub hidden_activation: Activation,
}

impl Chromosome {
    pub fn dropout_rate(&self) -> f64 {
        self.dropout_tenths as f64 / 10.0
    }
}

/// Number of genes in the crossover string (A_op included as a constant).
pub const GENE_COUNT: usize = 8;

/// Gene domains the search draws from.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    pub hidden_layers: Vec<u8>,
    pub widths: Vec<u16>,
    pub optimizers: Vec<OptimizerKind>,
    pub inits: Vec<InitKind>,
    pub dropout_tenths: Vec<u8>,
    pub max_norms: Vec<u8>,
    pub hidden_activations: Vec<Activation>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            hidden_layers: (1..=6).collect(),
            widths: vec![32, 64, 128, 256, 512, 768],
            optimizers: vec![OptimizerKind::Sgd, OptimizerKind::Momentum, OptimizerKind::Adam],
            inits: vec![InitKind::Uniform, InitKind::Normal, InitKind::Glorot],
            dropout_tenths: (0..=5).collect(),
            max_norms: (1..=5).collect(),
            hidden_activations: vec![
                Activation::Sigmoid,
                Activation::Tanh,
                Activation::Relu,
                Activation::Softsign,
            ],
        }
    }
}

impl SearchSpace {
    fn validate(&self) -> Result<(), EvolveError> {
        if self.hidden_layers.is_empty() {
            return Err(EvolveError::EmptyDomain("hidden_layers"));
        }
        if self.widths.is_empty() {
            return Err(EvolveError::EmptyDomain("widths"));
        }
        if self.optimizers.is_empty() {
            return Err(EvolveError::EmptyDomain("optimizers"));
        }
        if self.inits.is_empty() {
            return Err(EvolveError::EmptyDomain("inits"));
        }
        if self.dropout_tenths.is_empty() {
            return Err(EvolveError::EmptyDomain("dropout_tenths"));
        }
        if self.max_norms.is_empty() {
            return Err(EvolveError::EmptyDomain("max_norms"));
        }
        if self.hidden_activations.is_empty() {
            return Err(EvolveError::EmptyDomain("hidden_activations"));
        }
        Ok(())
    }

    fn random(&self, rng: &mut impl Rng) -> Chromosome {
        Chromosome {
            hidden_layers: *pick(rng, &self.hidden_layers),
            width: *pick(rng, &self.widths),
            optimizer: *pick(rng, &self.optimizers),
            init: *pick(rng, &self.inits),
            dropout_tenths: *pick(rng, &self.dropout_tenths),
            max_norm: *pick(rng, &self.max_norms),
            hidden_activation: *pick(rng, &self.hidden_activations),
        }
    }

    /// Redraws gene `g` (0..8) uniformly from its domain.
    fn mutate_gene(&self, c: &mut Chromosome, g: usize, rng: &mut impl Rng) {
        match g {
            0 => c.hidden_layers = *pick(rng, &self.hidden_layers),
            1 => c.width = *pick(rng, &self.widths),
            2 => c.optimizer = *pick(rng, &self.optimizers),
            3 => c.init = *pick(rng, &self.inits),
            4 => c.dropout_tenths = *pick(rng, &self.dropout_tenths),
            5 => c.max_norm = *pick(rng, &self.max_norms),
            6 => c.hidden_activation = *pick(rng, &self.hidden_activations),
            // Gene 7 is the fixed softmax output activation.
            _ => {}
        }
    }
}

fn pick<'a, T>(rng: &mut impl Rng, domain: &'a [T]) -> &'a T {
    &domain[rng.gen_range(0..domain.len())]
}

/// Copies genes `0..point` from `a` and `point..` from `b`.
fn splice(a: &Chromosome, b: &Chromosome, point: usize) -> Chromosome {
    let mut child = *b;
    if point > 0 {
        child.hidden_layers = a.hidden_layers;
    }
    if point > 1 {
        child.width = a.width;
    }
    if point > 2 {
        child.optimizer = a.optimizer;
    }
    if point > 3 {
        child.init = a.init;
    }
    if point > 4 {
        child.dropout_tenths = a.dropout_tenths;
    }
    if point > 5 {
        child.max_norm = a.max_norm;
    }
    if point > 6 {
        child.hidden_activation = a.hidden_activation;
    }
    child
}

/// GA loop configuration.
#[derive(Debug, Clone, Copy)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: u32,
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Minimum number of elites preserved; mu+lambda environmental
    /// selection keeps at least this many by construction.
    pub elite_count: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 12,
            generations: 8,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            elite_count: 1,
            seed: 0,
        }
    }
}

/// Fitness of a chromosome: detection rate (maximize) and false
/// acceptance (minimize).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objectives {
    pub dr: f64,
    pub fa: f64,
}

/// Pareto dominance: at least as good in both objectives, better in one.
pub fn dominates(a: &Objectives, b: &Objectives) -> bool {
    a.dr >= b.dr && a.fa <= b.fa && (a.dr > b.dr || a.fa < b.fa)
}

/// Fast non-dominated sort; returns fronts as index lists, best first.
pub fn non_dominated_sort(points: &[Objectives]) -> Vec<Vec<usize>> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let mut dominated: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            if dominates(&points[a], &points[b]) {
                dominated[a].push(b);
            } else if dominates(&points[b], &points[a]) {
                domination_count[a] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated[p] {
                domination_count[q] -= 1;
                if domination_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance within one front; boundary points per objective get
/// infinity, zero objective ranges contribute nothing.
pub fn crowding_distance(front: &[Objectives]) -> Vec<f64> {
    let n = front.len();
    let mut distance = vec![0.0f64; n];
    if n == 0 {
        return distance;
    }
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    for objective in 0..2 {
        let value = |i: usize| match objective {
            0 => front[i].dr,
            _ => front[i].fa,
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| value(a).partial_cmp(&value(b)).unwrap());
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        let range = value(order[n - 1]) - value(order[0]);
        if range == 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            let gap = value(order[w + 1]) - value(order[w - 1]);
            distance[order[w]] += gap / range;
        }
    }
    distance
}

/// A scored population member.
#[derive(Debug, Clone, Copy)]
struct Scored {
    chromosome: Chromosome,
    objectives: Objectives,
    rank: usize,
    crowding: f64,
}

/// Runs the NSGA-II loop; returns the all-time non-dominated archive as
/// (chromosome, objectives) pairs in a deterministic order.
pub fn evolve(
    config: &GaConfig,
    space: &SearchSpace,
    mut fitness: impl FnMut(&Chromosome) -> Objectives,
) -> Result<Vec<(Chromosome, Objectives)>, EvolveError> {
    space.validate()?;
    if config.population_size < 2 {
        return Err(EvolveError::PopulationTooSmall);
    }
    for (name, value) in [
        ("crossover_rate", config.crossover_rate),
        ("mutation_rate", config.mutation_rate),
    ] {
        if !(0.0..=1.0).contains(&value) {
            return Err(EvolveError::BadRate { name, value });
        }
    }

    let mut memo: HashMap<Chromosome, Objectives> = HashMap::new();
    let mut evaluate = |c: &Chromosome, memo: &mut HashMap<Chromosome, Objectives>| {
        *memo.entry(*c).or_insert_with(|| fitness(c))
    };

    let mut rng = stream_rng(config.seed, &[0x65a]);
    let mut population: Vec<Chromosome> = (0..config.population_size)
        .map(|_| space.random(&mut rng))
        .collect();
    let mut archive: Vec<(Chromosome, Objectives)> = Vec::new();

    for _generation in 0..config.generations {
        let scored = score(&population, &mut evaluate, &mut memo);
        update_archive(&mut archive, &scored);

        // Offspring via binary tournament, crossover, mutation.
        let mut offspring = Vec::with_capacity(config.population_size);
        while offspring.len() < config.population_size {
            let a = tournament(&scored, &mut rng);
            let b = tournament(&scored, &mut rng);
            let (mut c1, mut c2) = if rng.gen_range(0.0..1.0) < config.crossover_rate {
                let point = rng.gen_range(1..GENE_COUNT);
                (splice(&a, &b, point), splice(&b, &a, point))
            } else {
                (a, b)
            };
            for child in [&mut c1, &mut c2] {
                for g in 0..GENE_COUNT {
                    if rng.gen_range(0.0..1.0) < config.mutation_rate {
                        space.mutate_gene(child, g, &mut rng);
                    }
                }
            }
            offspring.push(c1);
            if offspring.len() < config.population_size {
                offspring.push(c2);
            }
        }

        // mu + lambda environmental selection.
        let mut pool = population.clone();
        pool.extend(offspring);
        let pool_scored = score(&pool, &mut evaluate, &mut memo);
        update_archive(&mut archive, &pool_scored);
        population = select_next(&pool_scored, config.population_size);
    }

    let final_scored = score(&population, &mut evaluate, &mut memo);
    update_archive(&mut archive, &final_scored);
    archive.sort_by(|a, b| {
        b.1.dr
            .partial_cmp(&a.1.dr)
            .unwrap()
            .then(a.1.fa.partial_cmp(&b.1.fa).unwrap())
            .then_with(|| format!("{:?}", a.0).cmp(&format!("{:?}", b.0)))
    });
    Ok(archive)
}

fn score(
    population: &[Chromosome],
    evaluate: &mut impl FnMut(&Chromosome, &mut HashMap<Chromosome, Objectives>) -> Objectives,
    memo: &mut HashMap<Chromosome, Objectives>,
) -> Vec<Scored> {
    let objectives: Vec<Objectives> = population.iter().map(|c| evaluate(c, memo)).collect();
    let fronts = non_dominated_sort(&objectives);
    let mut rank = vec![0usize; population.len()];
    let mut crowding = vec![0.0f64; population.len()];
    for (front_idx, front) in fronts.iter().enumerate() {
        let front_objs: Vec<Objectives> = front.iter().map(|&i| objectives[i]).collect();
        let distances = crowding_distance(&front_objs);
        for (&i, &d) in front.iter().zip(&distances) {
            rank[i] = front_idx;
            crowding[i] = d;
        }
    }
    population
        .iter()
        .enumerate()
        .map(|(i, &chromosome)| Scored {
            chromosome,
            objectives: objectives[i],
            rank: rank[i],
            crowding: crowding[i],
        })
        .collect()
}

/// Binary tournament on (rank, crowding); deterministic tie toward the
/// first candidate.
fn tournament(scored: &[Scored], rng: &mut impl Rng) -> Chromosome {
    let a = &scored[rng.gen_range(0..scored.len())];
    let b = &scored[rng.gen_range(0..scored.len())];
    if b.rank < a.rank || (b.rank == a.rank && b.crowding > a.crowding) {
        b.chromosome
    } else {
        a.chromosome
    }
}

/// Fills the next generation front by front, crowd-sorting the split front.
fn select_next(pool: &[Scored], n: usize) -> Vec<Chromosome> {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| {
        pool[a]
            .rank
            .cmp(&pool[b].rank)
            .then(pool[b].crowding.partial_cmp(&pool[a].crowding).unwrap())
            .then(a.cmp(&b))
    });
    order.truncate(n);
    order.into_iter().map(|i| pool[i].chromosome).collect()
}

/// Keeps the all-time non-dominated set, deduplicated by chromosome.
fn update_archive(archive: &mut Vec<(Chromosome, Objectives)>, scored: &[Scored]) {
    for s in scored {
        if archive
            .iter()
            .any(|(c, o)| *c == s.chromosome || dominates(o, &s.objectives))
        {
            continue;
        }
        archive.retain(|(_, o)| !dominates(&s.objectives, o));
        archive.push((s.chromosome, s.objectives));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(dr: f64, fa: f64) -> Objectives {
        Objectives { dr, fa }
    }

    #[test]
    fn dominance_basic_cases() {
        assert!(dominates(&obj(0.9, 0.05), &obj(0.7, 0.10)));
        assert!(!dominates(&obj(0.9, 0.05), &obj(0.8, 0.02)));
        assert!(!dominates(&obj(0.8, 0.02), &obj(0.9, 0.05)));
        let a = obj(0.5, 0.5);
        assert!(!dominates(&a, &a));
    }

    #[test]
    fn sort_three_point_example() {
        let points = vec![obj(0.9, 0.05), obj(0.8, 0.02), obj(0.7, 0.10)];
        let fronts = non_dominated_sort(&points);
        assert_eq!(fronts.len(), 2);
        let mut first = fronts[0].clone();
        first.sort_unstable();
        assert_eq!(first, vec![0, 1]);
        assert_eq!(fronts[1], vec![2]);
    }

    #[test]
    fn sort_single_and_identical_points() {
        assert_eq!(non_dominated_sort(&[obj(0.5, 0.5)]), vec![vec![0]]);
        let same = vec![obj(0.5, 0.5); 4];
        let fronts = non_dominated_sort(&same);
        assert_eq!(fronts.len(), 1);
        assert_eq!(fronts[0].len(), 4);
    }

    #[test]
    fn fronts_partition_and_respect_dominance() {
        let mut rng = stream_rng(3, &[1]);
        let points: Vec<Objectives> = (0..40)
            .map(|_| obj(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
            .collect();
        let fronts = non_dominated_sort(&points);
        let mut seen: Vec<usize> = fronts.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..points.len()).collect::<Vec<_>>());
        // Members of a later front never dominate members of an earlier
        // (or the same) front.
        for (k, front) in fronts.iter().enumerate() {
            for earlier in fronts.iter().take(k + 1) {
                for &p in front {
                    for &q in earlier {
                        assert!(!dominates(&points[p], &points[q]));
                    }
                }
            }
        }
    }

    #[test]
    fn crowding_two_point_front() {
        let d = crowding_distance(&[obj(0.9, 0.1), obj(0.8, 0.2)]);
        assert!(d.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn crowding_three_point_arithmetic() {
        let front = vec![obj(0.7, 0.1), obj(0.8, 0.05), obj(0.9, 0.02)];
        let d = crowding_distance(&front);
        assert!(d[0].is_infinite());
        assert!(d[2].is_infinite());
        assert!((d[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn crowding_degenerate_front() {
        let front = vec![obj(0.5, 0.5); 5];
        let d = crowding_distance(&front);
        // Boundary picks are infinite; interior points get zero.
        assert_eq!(d.iter().filter(|v| v.is_infinite()).count(), 2);
        assert!(d.iter().filter(|v| v.is_finite()).all(|&v| v == 0.0));
    }

    /// Oracle fitness: hamming distance to a planted utopia chromosome.
    fn planted_fitness(target: Chromosome) -> impl Fn(&Chromosome) -> Objectives {
        move |c: &Chromosome| {
            let mut h = 0u32;
            h += u32::from(c.hidden_layers != target.hidden_layers);
            h += u32::from(c.width != target.width);
            h += u32::from(c.optimizer != target.optimizer);
            h += u32::from(c.init != target.init);
            h += u32::from(c.dropout_tenths != target.dropout_tenths);
            h += u32::from(c.max_norm != target.max_norm);
            h += u32::from(c.hidden_activation != target.hidden_activation);
            let f = h as f64 / 8.0;
            Objectives { dr: 1.0 - f, fa: f }
        }
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

    #[test]
    fn evolve_is_deterministic() {
        let config = GaConfig::default();
        let space = SearchSpace::default();
        let f = planted_fitness(utopia());
        let a = evolve(&config, &space, &f).unwrap();
        let b = evolve(&config, &space, &f).unwrap();
        assert_eq!(
            a.iter().map(|(c, _)| *c).collect::<Vec<_>>(),
            b.iter().map(|(c, _)| *c).collect::<Vec<_>>()
        );
    }

    #[test]
    fn evolve_finds_planted_optimum_most_seeds() {
        // Default generation budget; the population is sized so the
        // 38,880-point space is reliably searchable in 8 generations.
        let space = SearchSpace::default();
        let mut hits = 0;
        for seed in 0..10 {
            let config = GaConfig {
                population_size: 60,
                seed,
                ..GaConfig::default()
            };
            let archive = evolve(&config, &space, planted_fitness(utopia())).unwrap();
            if archive.iter().any(|(c, _)| *c == utopia()) {
                hits += 1;
            }
        }
        assert!(hits >= 9, "planted optimum recovered in only {hits}/10 seeds");
    }

    #[test]
    fn archive_converges_to_utopia_alone() {
        let space = SearchSpace::default();
        let config = GaConfig {
            population_size: 60,
            seed: 1,
            ..GaConfig::default()
        };
        let archive = evolve(&config, &space, planted_fitness(utopia())).unwrap();
        // Utopia dominates every other point of this fitness, so once
        // found the archive contains exactly it.
        assert_eq!(archive.len(), 1);
        assert_eq!(archive[0].0, utopia());
    }

    #[test]
    fn empty_domain_errors() {
        let mut space = SearchSpace::default();
        space.widths.clear();
        let config = GaConfig::default();
        assert!(matches!(
            evolve(&config, &space, |_| obj(0.5, 0.5)),
            Err(EvolveError::EmptyDomain("widths"))
        ));
    }

    #[test]
    fn archive_is_mutually_non_dominated() {
        let space = SearchSpace::default();
        let config = GaConfig {
            seed: 5,
            ..GaConfig::default()
        };
        // A fitness with a genuine trade-off between the objectives.
        let archive = evolve(&config, &space, |c| {
            let aggressiveness = c.hidden_layers as f64 / 6.0;
            Objectives {
                dr: 0.5 + 0.4 * aggressiveness,
                fa: 0.05 + 0.3 * aggressiveness,
            }
        })
        .unwrap();
        assert!(!archive.is_empty());
        for (i, (_, a)) in archive.iter().enumerate() {
            for (j, (_, b)) in archive.iter().enumerate() {
                if i != j {
                    assert!(!dominates(a, b));
                }
            }
        }
    }
}
