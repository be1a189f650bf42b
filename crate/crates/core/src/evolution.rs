//! The evolutionary outer loop: linear rank selection, elitism, blend
//! crossover and non-uniform mutation, with every offspring refined by
//! gradient descent before it is scored.

use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fuzzy::MfKind;
use crate::genome::{decode, encode, BoundsConfig, Chromosome, EvoNfCandidate, GeneBounds, Template};
use crate::local_search::{loss, refine, TuneMask};

/// Settings of one evolutionary run. Defaults follow the reference
/// experiment: 40 individuals, 35 generations, rank pressure 0.5, 5 %
/// elitism, starting mutation rate 0.5 and 10 descent epochs per
/// evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub selection_pressure: f64,
    pub elitism_fraction: f64,
    pub mutation_rate_start: f64,
    /// Per-gene mutation probability reached at the last generation.
    pub mutation_rate_end: f64,
    pub mutation_shape_b: f64,
    pub gd_epochs_per_eval: usize,
    pub rng_seed: u64,
    /// Stop as soon as the best training RMSE reaches this value.
    pub target_rmse: Option<f64>,
    pub mf_kind: MfKind,
    pub mf_per_input: usize,
    pub tune: TuneMask,
    /// Mutate consequent angles. When off they change only by crossover and
    /// descent.
    pub evolve_consequents: bool,
    pub mf_jitter: f64,
    pub consequent_init_deg: f64,
    pub bounds: BoundsConfig,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 40,
            max_generations: 35,
            selection_pressure: 0.50,
            elitism_fraction: 0.05,
            mutation_rate_start: 0.50,
            mutation_rate_end: 0.05,
            mutation_shape_b: 5.0,
            gd_epochs_per_eval: 10,
            rng_seed: 0,
            target_rmse: None,
            mf_kind: MfKind::Gaussian,
            mf_per_input: 2,
            tune: TuneMask::default(),
            evolve_consequents: true,
            mf_jitter: 0.1,
            consequent_init_deg: 5.0,
            bounds: BoundsConfig::default(),
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.population_size < 2 {
            return bad(format!("population_size must be >= 2, got {}", self.population_size));
        }
        if !(self.elitism_fraction > 0.0 && self.elitism_fraction < 1.0) {
            return bad(format!("elitism_fraction must lie in (0, 1), got {}", self.elitism_fraction));
        }
        if !(self.mutation_rate_start > 0.0 && self.mutation_rate_start <= 1.0) {
            return bad(format!("mutation_rate_start must lie in (0, 1], got {}", self.mutation_rate_start));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate_end) {
            return bad(format!("mutation_rate_end must lie in [0, 1], got {}", self.mutation_rate_end));
        }
        if !(self.mutation_shape_b > 0.0 && self.mutation_shape_b.is_finite()) {
            return bad(format!("mutation_shape_b must be positive, got {}", self.mutation_shape_b));
        }
        if !(0.0..=1.0).contains(&self.selection_pressure) {
            return bad(format!("selection_pressure must lie in [0, 1], got {}", self.selection_pressure));
        }
        if self.mf_per_input == 0 {
            return bad("mf_per_input must be >= 1".into());
        }
        Ok(())
    }

    /// Number of individuals copied unchanged into each new generation.
    pub fn n_elite(&self) -> usize {
        ((self.elitism_fraction * self.population_size as f64).ceil() as usize)
            .clamp(1, self.population_size - 1)
    }

    /// Per-gene mutation probability at generation `t`, linear from start to
    /// end.
    pub fn mutation_rate(&self, t: usize) -> f64 {
        let frac = if self.max_generations == 0 { 1.0 } else { t as f64 / self.max_generations as f64 };
        self.mutation_rate_start + (self.mutation_rate_end - self.mutation_rate_start) * frac.min(1.0)
    }
}

/// Where a non-uniform mutation sits in the run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MutationSchedule {
    pub t: usize,
    pub t_max: usize,
    pub b: f64,
}

impl MutationSchedule {
    /// Exponent `(1 - t / t_max)^b` applied to the uniform draw.
    pub fn exponent(&self) -> f64 {
        let frac = if self.t_max == 0 { 1.0 } else { (self.t as f64 / self.t_max as f64).min(1.0) };
        (1.0 - frac).powf(self.b)
    }
}

/// Step `y (1 - gamma^((1 - t/t_max)^b))`, which lies in `[0, y]` and
/// concentrates near zero as `t` approaches `t_max`.
pub fn mutation_delta(y: f64, sched: MutationSchedule, gamma: f64) -> f64 {
    y * (1.0 - gamma.powf(sched.exponent()))
}

/// Deterministic core of [`nonuniform_mutate`]: `up` moves toward `hi`,
/// otherwise toward `lo`.
pub fn nonuniform_step(gene: f64, bounds: GeneBounds, sched: MutationSchedule, up: bool, gamma: f64) -> f64 {
    let moved = if up {
        gene + mutation_delta(bounds.hi - gene, sched, gamma)
    } else {
        gene - mutation_delta(gene - bounds.lo, sched, gamma)
    };
    bounds.clamp(moved)
}

/// Non-uniform mutation of one real gene with a fair coin for the
/// direction.
pub fn nonuniform_mutate<R: Rng + ?Sized>(gene: f64, bounds: GeneBounds, sched: MutationSchedule, rng: &mut R) -> f64 {
    let up = rng.gen_bool(0.5);
    let gamma: f64 = rng.gen();
    nonuniform_step(gene, bounds, sched, up, gamma)
}

/// Linear-ranking selection probabilities for a minimised fitness.
///
/// The worst individual gets weight `pressure / n`, the best `(2 - pressure)
/// / n`, interpolating linearly by rank. Tied fitness values share the mean
/// weight of the ranks they span.
pub fn rank_probabilities(fitness: &[f64], pressure: f64) -> Result<Vec<f64>> {
    let n = fitness.len();
    if n == 0 {
        return Err(Error::EmptyPopulation);
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let mut order: Vec<usize> = (0..n).collect();
    // worst (largest RMSE) first
    order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));
    let weight = |r: usize| (pressure + (2.0 - 2.0 * pressure) * r as f64 / (n - 1) as f64) / n as f64;
    let mut probs = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && fitness[order[end]] == fitness[order[start]] {
            end += 1;
        }
        let mean = (start..end).map(weight).sum::<f64>() / (end - start) as f64;
        for &i in &order[start..end] {
            probs[i] = mean;
        }
        start = end;
    }
    Ok(probs)
}

/// Draws one parent index by linear ranking.
pub fn rank_select<R: Rng + ?Sized>(fitness: &[f64], pressure: f64, rng: &mut R) -> Result<usize> {
    let probs = rank_probabilities(fitness, pressure)?;
    if probs.len() == 1 {
        return Ok(0);
    }
    let dist = WeightedIndex::new(&probs).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// Whole-arithmetic blend of the real genes with factor `lambda`, plus a
/// uniform exchange of the bits flagged in `swap`.
pub fn crossover_with(a: &Chromosome, b: &Chromosome, lambda: f64, swap: &[bool]) -> Result<(Chromosome, Chromosome)> {
    if !a.same_layout(b) || swap.len() != a.bits().len() {
        return Err(Error::LayoutMismatch("crossover parents differ in layout".into()));
    }
    let mut c1 = a.clone();
    let mut c2 = b.clone();
    for ((x, y), (ga, gb)) in c1.real_mut().iter_mut().zip(c2.real_mut().iter_mut()).zip(a.real().iter().zip(b.real())) {
        *x = lambda * ga + (1.0 - lambda) * gb;
        *y = (1.0 - lambda) * ga + lambda * gb;
        // keep blends inside the parents' interval despite rounding
        let (lo, hi) = if ga <= gb { (*ga, *gb) } else { (*gb, *ga) };
        *x = x.clamp(lo, hi);
        *y = y.clamp(lo, hi);
    }
    for (i, &s) in swap.iter().enumerate() {
        if s {
            c1.bits_mut()[i] = b.bits()[i];
            c2.bits_mut()[i] = a.bits()[i];
        }
    }
    Ok((c1, c2))
}

/// Blend crossover with `lambda ~ U[0, 1]` and a fair coin per bit.
pub fn crossover<R: Rng + ?Sized>(a: &Chromosome, b: &Chromosome, rng: &mut R) -> Result<(Chromosome, Chromosome)> {
    let lambda: f64 = rng.gen();
    let swap: Vec<bool> = (0..a.bits().len()).map(|_| rng.gen_bool(0.5)).collect();
    crossover_with(a, b, lambda, &swap)
}

/// Scores a chromosome after `gd_epochs` of descent, returning the training
/// RMSE and the refined genes written back into the chromosome.
///
/// The returned fitness is the RMSE of the refined chromosome as decoded,
/// so it stays consistent with the genes carried forward. If descent ends
/// on a non-finite loss the unrefined chromosome is kept.
pub fn evaluate_fitness(
    chrom: &Chromosome,
    template: &Template,
    train: &Dataset,
    gd_epochs: usize,
    tune: TuneMask,
) -> Result<(f64, Chromosome)> {
    let mut cand = decode(chrom, template)?;
    let raw = loss(&cand.model, train)?;
    if gd_epochs == 0 {
        return Ok((raw, chrom.clone()));
    }
    let refined_loss = refine(&mut cand.model, train, cand.learn, gd_epochs, tune);
    let all_finite = refined_loss.as_ref().is_ok_and(|l| l.is_finite())
        && cand.model.rulebase().rules().iter().all(|r| r.consequent().iter().all(|c| c.is_finite()));
    if !all_finite {
        return Ok((raw, chrom.clone()));
    }
    let refined = encode(&cand, template)?;
    let check = decode(&refined, template)?;
    let fitness = loss(&check.model, train)?;
    if fitness.is_finite() {
        Ok((fitness, refined))
    } else {
        Ok((raw, chrom.clone()))
    }
}

/// Summary of one generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationLog {
    pub generation: usize,
    pub best_train_rmse: f64,
    pub mean_train_rmse: f64,
    pub best_test_rmse: f64,
    pub active_rules: usize,
}

pub const GENERATION_LOG_HEADER: &str = "generation,best_train_rmse,mean_train_rmse,best_test_rmse,active_rules";

pub fn write_generation_csv<W: Write>(log: &[GenerationLog], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{GENERATION_LOG_HEADER}")?;
    for g in log {
        writeln!(
            w,
            "{},{},{},{},{}",
            g.generation, g.best_train_rmse, g.mean_train_rmse, g.best_test_rmse, g.active_rules
        )?;
    }
    Ok(())
}

/// An evaluated member of the population.
#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub chromosome: Chromosome,
    pub fitness: f64,
}

/// Outcome of [`evolve`].
#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub best: EvoNfCandidate,
    pub best_chromosome: Chromosome,
    pub log: Vec<GenerationLog>,
    pub template: Template,
}

/// Per-slot random stream derived from `(seed, generation, slot)`.
pub fn slot_rng(seed: u64, generation: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | slot as u64);
    rng
}

pub fn evolve(config: &EvolutionConfig, train: &Dataset, test: &Dataset) -> Result<EvolutionResult> {
    evolve_with(config, train, test, |_, _| {})
}

/// [`evolve`] with a callback invoked with each generation's index and
/// evaluated population, worst-to-best order not guaranteed.
pub fn evolve_with<F>(config: &EvolutionConfig, train: &Dataset, test: &Dataset, mut observe: F) -> Result<EvolutionResult>
where
    F: FnMut(usize, &[Individual]),
{
    config.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::DatasetEmpty);
    }
    if train.n_inputs() != test.n_inputs() {
        return Err(Error::DimensionMismatch { expected: train.n_inputs(), actual: test.n_inputs() });
    }
    let template = Template::grid(config.mf_kind, config.mf_per_input, &train.input_ranges(), &config.bounds)?;
    let n = config.population_size;
    let epochs = config.gd_epochs_per_eval;

    let mut population = Vec::with_capacity(n);
    for slot in 0..n {
        let mut rng = slot_rng(config.rng_seed, 0, slot);
        let chrom = template.random_chromosome(&mut rng, config.mf_jitter, config.consequent_init_deg)?;
        let (fitness, chromosome) = evaluate_fitness(&chrom, &template, train, epochs, config.tune)?;
        population.push(Individual { chromosome, fitness });
    }

    let mut log = Vec::with_capacity(config.max_generations + 1);
    log.push(summarise(0, &population, &template, test)?);
    observe(0, &population);

    let n_elite = config.n_elite();
    let consequent = template.layout().consequent.clone();
    let frozen = (!config.evolve_consequents).then_some(&consequent);
    for generation in 1..=config.max_generations {
        if config.target_rmse.is_some_and(|t| log.last().is_some_and(|l| l.best_train_rmse <= t)) {
            break;
        }
        let t = generation - 1;
        let sched = MutationSchedule { t, t_max: config.max_generations, b: config.mutation_shape_b };
        let rate = config.mutation_rate(t);
        population.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));
        let fitness: Vec<f64> = population.iter().map(|i| i.fitness).collect();

        let mut next: Vec<Individual> = population[..n_elite].to_vec();
        let mut slot = n_elite;
        while next.len() < n {
            let mut rng = slot_rng(config.rng_seed, generation, slot);
            let pa = rank_select(&fitness, config.selection_pressure, &mut rng)?;
            let pb = rank_select(&fitness, config.selection_pressure, &mut rng)?;
            let (c1, c2) = crossover(&population[pa].chromosome, &population[pb].chromosome, &mut rng)?;
            for mut child in [c1, c2] {
                if next.len() == n {
                    break;
                }
                mutate(&mut child, sched, rate, frozen, &mut rng);
                let (fitness, chromosome) = evaluate_fitness(&child, &template, train, epochs, config.tune)?;
                next.push(Individual { chromosome, fitness });
            }
            slot += 2;
        }
        population = next;
        log.push(summarise(generation, &population, &template, test)?);
        observe(generation, &population);
    }

    let best = population
        .iter()
        .min_by(|a, b| a.fitness.total_cmp(&b.fitness))
        .ok_or(Error::EmptyPopulation)?;
    let mut cand = decode(&best.chromosome, &template)?;
    cand.fitness = Some(best.fitness);
    Ok(EvolutionResult { best: cand, best_chromosome: best.chromosome.clone(), log, template })
}

/// Mutates each real gene with probability `rate` (skipping `frozen`) and
/// flips each selection bit with the same probability.
fn mutate<R: Rng + ?Sized>(
    chrom: &mut Chromosome,
    sched: MutationSchedule,
    rate: f64,
    frozen: Option<&std::ops::Range<usize>>,
    rng: &mut R,
) {
    let bounds = std::sync::Arc::clone(chrom.shared_bounds());
    for (i, g) in chrom.real_mut().iter_mut().enumerate() {
        if frozen.is_some_and(|r| r.contains(&i)) {
            continue;
        }
        if rng.gen_bool(rate) {
            *g = nonuniform_mutate(*g, bounds[i], sched, rng);
        }
    }
    for b in chrom.bits_mut() {
        if rng.gen_bool(rate) {
            *b = !*b;
        }
    }
    chrom.repair();
}

fn summarise(generation: usize, pop: &[Individual], template: &Template, test: &Dataset) -> Result<GenerationLog> {
    let best = pop
        .iter()
        .min_by(|a, b| a.fitness.total_cmp(&b.fitness))
        .ok_or(Error::EmptyPopulation)?;
    let mean = pop.iter().map(|i| i.fitness).sum::<f64>() / pop.len() as f64;
    let cand = decode(&best.chromosome, template)?;
    Ok(GenerationLog {
        generation,
        best_train_rmse: best.fitness,
        mean_train_rmse: mean.max(best.fitness),
        best_test_rmse: loss(&cand.model, test)?,
        active_rules: cand.model.rulebase().count_active(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::BoundsConfig;
    use approx::assert_relative_eq;

    fn unit() -> GeneBounds {
        GeneBounds::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn mutation_vanishes_at_t_max() {
        let sched = MutationSchedule { t: 35, t_max: 35, b: 5.0 };
        for gamma in [0.0, 0.3, 0.99] {
            assert_eq!(mutation_delta(0.7, sched, gamma), 0.0);
            assert_eq!(nonuniform_step(0.4, unit(), sched, true, gamma), 0.4);
            assert_eq!(nonuniform_step(0.4, unit(), sched, false, gamma), 0.4);
        }
    }

    #[test]
    fn mutation_with_gamma_one_is_identity() {
        for t in [0, 10, 20] {
            let sched = MutationSchedule { t, t_max: 35, b: 5.0 };
            assert_eq!(nonuniform_step(0.25, unit(), sched, true, 1.0), 0.25);
            assert_eq!(nonuniform_step(0.25, unit(), sched, false, 1.0), 0.25);
        }
    }

    #[test]
    fn mutation_at_t0_is_uniform_toward_the_bound() {
        let sched = MutationSchedule { t: 0, t_max: 10, b: 5.0 };
        assert_relative_eq!(nonuniform_step(0.2, unit(), sched, true, 0.25), 0.2 + 0.8 * 0.75);
        assert_relative_eq!(nonuniform_step(0.2, unit(), sched, false, 0.25), 0.2 - 0.2 * 0.75);
        assert_eq!(nonuniform_step(0.2, unit(), sched, true, 0.0), 1.0);
        assert_eq!(nonuniform_step(0.2, unit(), sched, false, 0.0), 0.0);
    }

    #[test]
    fn rank_probabilities_linear() {
        let p = rank_probabilities(&[0.1, 0.2, 0.4], 0.5).unwrap();
        assert_relative_eq!(p[0], 1.5 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(p[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(p[2], 0.5 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_eq!(rank_probabilities(&[3.0], 0.5).unwrap(), vec![1.0]);
        let eq = rank_probabilities(&[0.2; 5], 0.5).unwrap();
        assert!(eq.iter().all(|&x| (x - 0.2).abs() < 1e-15));
        assert!(matches!(rank_probabilities(&[], 0.5), Err(Error::EmptyPopulation)));
    }

    #[test]
    fn crossover_examples() {
        let t = Template::grid(MfKind::Gaussian, 2, &[(0.0, 1.0); 2], &BoundsConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = t.random_chromosome(&mut rng, 0.2, 60.0).unwrap();
        let b = t.random_chromosome(&mut rng, 0.2, 60.0).unwrap();
        let (c1, c2) = crossover(&a, &a, &mut rng).unwrap();
        assert_eq!(c1, a);
        assert_eq!(c2, a);
        let (c1, _) = crossover_with(&a, &b, 1.0, &vec![false; 4]).unwrap();
        assert_eq!(c1.real(), a.real());

        let other = Template::grid(MfKind::Gaussian, 2, &[(0.0, 1.0); 3], &BoundsConfig::default()).unwrap();
        let c = other.random_chromosome(&mut rng, 0.2, 60.0).unwrap();
        assert!(matches!(crossover(&a, &c, &mut rng), Err(Error::LayoutMismatch(_))));
    }

    #[test]
    fn config_validation() {
        assert!(EvolutionConfig::default().validate().is_ok());
        let bad = EvolutionConfig { population_size: 1, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::ConfigInvalid(_))));
        let bad = EvolutionConfig { elitism_fraction: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = EvolutionConfig { mutation_rate_start: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        assert_eq!(EvolutionConfig::default().n_elite(), 2);
        let c = EvolutionConfig::default();
        assert_eq!(c.mutation_rate(0), 0.5);
        assert_relative_eq!(c.mutation_rate(35), 0.05, epsilon = 1e-15);
    }

    fn linear_data(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let ys = xs.iter().map(|x| 0.3 + 0.5 * x[0] * x[1] + 0.2 * x[1]).collect();
        Dataset::new(xs, ys).unwrap()
    }

    #[test]
    fn zero_generations_returns_initial_best() {
        let train = linear_data(20, 1);
        let test = linear_data(5, 2);
        let cfg = EvolutionConfig { population_size: 6, max_generations: 0, gd_epochs_per_eval: 2, ..Default::default() };
        let res = evolve(&cfg, &train, &test).unwrap();
        assert_eq!(res.log.len(), 1);
        assert_eq!(res.best.fitness, Some(res.log[0].best_train_rmse));
    }

    #[test]
    fn elitism_and_determinism_on_small_run() {
        let train = linear_data(30, 3);
        let test = linear_data(6, 4);
        let cfg = EvolutionConfig { population_size: 8, max_generations: 6, gd_epochs_per_eval: 3, rng_seed: 11, ..Default::default() };
        let mut sizes = Vec::new();
        let res = evolve_with(&cfg, &train, &test, |_, pop| {
            sizes.push(pop.len());
            assert!(pop.iter().all(|i| i.chromosome.in_bounds()));
        })
        .unwrap();
        assert_eq!(res.log.len(), 7);
        assert!(sizes.iter().all(|&s| s == 8));
        for w in res.log.windows(2) {
            assert!(w[1].best_train_rmse <= w[0].best_train_rmse);
        }
        for g in &res.log {
            assert!(g.best_train_rmse <= g.mean_train_rmse);
        }
        let again = evolve(&cfg, &train, &test).unwrap();
        assert_eq!(res.log, again.log);
    }

    #[test]
    fn early_stop_on_target() {
        let train = linear_data(20, 5);
        let test = linear_data(5, 6);
        let cfg = EvolutionConfig {
            population_size: 4,
            max_generations: 10,
            gd_epochs_per_eval: 1,
            target_rmse: Some(10.0),
            ..Default::default()
        };
        assert_eq!(evolve(&cfg, &train, &test).unwrap().log.len(), 1);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let train = linear_data(20, 5);
        let empty = Dataset::new(vec![], vec![]).unwrap();
        assert!(matches!(evolve(&EvolutionConfig::default(), &train, &empty), Err(Error::DatasetEmpty)));
    }
}
