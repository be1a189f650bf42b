//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::Instant;

use evonf::dataset::{metrics, split, synth_generate, Dataset, Scaling};
use evonf::evolution::{evolve, nonuniform_mutate, write_generation_csv, EvolutionConfig, EvolutionResult, MutationSchedule};
use evonf::fuzzy::{eval_bell, tnorm_ss, MfKind, TNormParam};
use evonf::genome::{angular_decode, angular_encode, decode, encode, BoundsConfig, GeneBounds, Template};
use evonf::inference::grid_partition_init;
use evonf::local_search::{gradient, loss, model_params, set_model_params};
use evonf::mlp::{mlp_train, Mlp, MlpConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

const SYNTH_N: usize = 69;
const SYNTH_SEED: u64 = 3;
const NOISE_SD: f64 = 0.05;
const TRAIN_FRACTION: f64 = 0.9;
const SPLIT_SEED: u64 = 3;
const MONOTONICITY_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const COMPARISON_SEEDS: [u64; 3] = [1, 2, 3];

/// Mean test RMSE of the first certified benchmark run, frozen as
/// regression numbers. The tolerance absorbs libm differences across
/// platforms but catches behavioural drift.
const PINNED_EVONF_TEST_RMSE: f64 = 0.048805;
const PINNED_MLP_TEST_RMSE: f64 = 0.081372;
const PIN_TOLERANCE: f64 = 2e-3;

struct Report {
    failures: usize,
}

impl Report {
    fn record(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        println!("criterion {id:>2} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failures += 1;
        }
    }
}

fn tp(p: f64) -> TNormParam {
    TNormParam::new(p).unwrap()
}

fn operator_laws(r: &mut Report) {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_identity = 0.0f64;
    let mut commutative = true;
    let mut monotone = true;
    for _ in 0..100_000 {
        let a: f64 = rng.gen();
        let b: f64 = rng.gen();
        let a2 = (a + rng.gen::<f64>() * (1.0 - a)).min(1.0);
        let p = tp(rng.gen_range(1e-6..=200.0));
        worst_identity = worst_identity.max((tnorm_ss(a, 1.0, p) - a).abs());
        commutative &= tnorm_ss(a, b, p) == tnorm_ss(b, a, p);
        monotone &= tnorm_ss(a, b, p) <= tnorm_ss(a2, b, p);
    }
    let mut worst_product = 0.0f64;
    let mut worst_min = 0.0f64;
    for i in 1..=100 {
        for j in 1..=100 {
            let (a, b) = (i as f64 / 100.0, j as f64 / 100.0);
            worst_product = worst_product.max((tnorm_ss(a, b, tp(1e-6)) - a * b).abs());
            worst_min = worst_min.max((tnorm_ss(a, b, tp(200.0)) - a.min(b)).abs());
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let pass = worst_identity <= 1e-9 && commutative && monotone && worst_product < 1e-4 && worst_min < 1e-2 && secs < 5.0;
    r.record(
        1,
        "T-norm operator laws",
        pass,
        format!(
            "identity err {worst_identity:.1e}, commutative {commutative}, monotone {monotone}, \
             product-limit err {worst_product:.1e}, min-limit err {worst_min:.1e}, {secs:.2} s"
        ),
    );
}

fn bell_identities(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_center = 0.0f64;
    let mut worst_half = 0.0f64;
    for _ in 0..1000 {
        let p = dyadic(10f64.powf(rng.gen_range(-3.0..3.0)));
        let q = 10f64.powf(rng.gen_range(-2.0..1.5));
        let c = dyadic(rng.gen_range(-1e3..1e3));
        worst_center = worst_center.max((eval_bell(p, q, c, c).unwrap() - 1.0).abs());
        for x in [c + p, c - p] {
            worst_half = worst_half.max((eval_bell(p, q, c, x).unwrap() - 0.5).abs());
        }
    }
    let pass = worst_center <= 1e-12 && worst_half <= 1e-12;
    r.record(2, "bell MF identities", pass, format!("center err {worst_center:.1e}, half-width err {worst_half:.1e}"));
}

fn gradient_oracle(r: &mut Report) {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_ts = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=3);
        let rules = rng.gen_range(1..=6);
        let model = random_model(&mut rng, n, 2, rules);
        let data = random_dataset(&mut rng, n, 16);
        let analytic = gradient(&model, &data).unwrap();
        let numeric = central_difference(&model_params(&model), 1e-5, |th| {
            let mut m = model.clone();
            set_model_params(&mut m, th).unwrap();
            loss(&m, &data).unwrap().powi(2)
        });
        worst_ts = worst_ts.max(max_relative_error(&analytic, &numeric, GRADIENT_FLOOR));
    }
    let mut worst_mlp = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(1..=7);
        let hidden = rng.gen_range(1..=6);
        let net = random_mlp(&mut rng, n, hidden);
        let data = random_dataset(&mut rng, n, 16);
        let (analytic, _) = net.gradient(&data).unwrap();
        let numeric = central_difference(&net.params(), 1e-5, |th| {
            let mut m = net.clone();
            m.set_params(th).unwrap();
            m.rmse(&data).unwrap().powi(2)
        });
        worst_mlp = worst_mlp.max(max_relative_error(&analytic, &numeric, GRADIENT_FLOOR));
    }
    let secs = started.elapsed().as_secs_f64();
    let pass = worst_ts < 1e-4 && worst_mlp < 1e-4 && secs < 30.0;
    r.record(
        3,
        "gradient oracle",
        pass,
        format!("max rel err TS {worst_ts:.1e}, MLP {worst_mlp:.1e} over 50 instances each, {secs:.2} s"),
    );
}

fn inference_oracle(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(1..=3);
        let m: usize = rng.gen_range(1..=2);
        let rules = rng.gen_range(1..=m.pow(n as u32) + 2);
        let model = random_model(&mut rng, n, m, rules);
        for _ in 0..10 {
            let x = random_input(&mut rng, n);
            worst = worst.max((model.infer(&x).unwrap() - reference_infer(&model, &x)).abs());
        }
    }
    r.record(4, "inference oracle", worst <= 1e-10, format!("max abs err {worst:.1e} over 200 models"));
}

fn grid_count(r: &mut Report) {
    let rb = grid_partition_init(7, 2).unwrap();
    let one_label = rb.rules().iter().all(|rule| rule.antecedent().iter().all(|m| m.count_ones() == 1));
    let pass = rb.len() == 128 && rb.count_active() == 128 && one_label;
    r.record(5, "grid partition count", pass, format!("{} rules, {} active", rb.len(), rb.count_active()));
}

fn codec_round_trip(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut bits_equal = true;
    for i in 0..1000 {
        let n = 1 + i % 4;
        let kind = if i % 2 == 0 { MfKind::Gaussian } else { MfKind::Bell };
        let ranges: Vec<(f64, f64)> = (0..n).map(|k| (k as f64, k as f64 + rng.gen_range(0.5..5.0))).collect();
        let t = Template::grid(kind, 2, &ranges, &BoundsConfig::default()).unwrap();
        let mut chrom = t.random_chromosome(&mut rng, 0.5, 89.0).unwrap();
        for bit in chrom.bits_mut() {
            *bit = rng.gen_bool(0.5);
        }
        chrom.repair();
        let cand = decode(&chrom, &t).unwrap();
        let again = decode(&encode(&cand, &t).unwrap(), &t).unwrap();
        let (a, b) = (model_params(&cand.model), model_params(&again.model));
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs() / x.abs().max(1.0));
        }
        bits_equal &= cand.model.rulebase().active() == again.model.rulebase().active();
        worst = worst.max((cand.learn.rate - again.learn.rate).abs());
        worst = worst.max((cand.learn.momentum - again.learn.momentum).abs());
    }
    let mut worst_angle = 0.0f64;
    for _ in 0..100_000 {
        let x = rng.gen_range(-1e6..1e6);
        worst_angle = worst_angle.max((angular_decode(angular_encode(x)).unwrap() - x).abs() / x.abs().max(1e-300));
    }
    let pass = worst <= 1e-10 && bits_equal && worst_angle <= 1e-9;
    r.record(
        6,
        "codec round trip",
        pass,
        format!("candidate err {worst:.1e} over 1000, angular rel err {worst_angle:.1e}"),
    );
}

fn mutation_schedule(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t_max = 35;
    let mut closed = true;
    let mut zero_at_end = true;
    let mut mean_step = [0.0f64; 3];
    let samples = 100_000;
    for _ in 0..samples {
        let lo = rng.gen_range(-10.0..10.0);
        let b = GeneBounds::new(lo, lo + rng.gen_range(0.01..20.0)).unwrap();
        let gene = rng.gen_range(b.lo..=b.hi);
        for (k, t) in [0, t_max / 2, t_max].into_iter().enumerate() {
            let sched = MutationSchedule { t, t_max, b: 5.0 };
            let next = nonuniform_mutate(gene, b, sched, &mut rng);
            closed &= b.contains(next);
            mean_step[k] += (next - gene).abs() / b.width() / samples as f64;
            if t == t_max {
                zero_at_end &= next == gene;
            }
        }
    }
    let decreasing = mean_step[0] > mean_step[1] && mean_step[1] > mean_step[2];
    r.record(
        7,
        "mutation schedule",
        closed && zero_at_end && decreasing,
        format!(
            "closed {closed}, zero at t_max {zero_at_end}, mean relative step {:.3e} > {:.3e} > {:.3e}",
            mean_step[0], mean_step[1], mean_step[2]
        ),
    );
}

fn benchmark_data() -> (Dataset, Dataset) {
    let raw = synth_generate(SYNTH_N, SYNTH_SEED, NOISE_SD).unwrap();
    let (train, test) = split(&raw, TRAIN_FRACTION, SPLIT_SEED).unwrap();
    let scaling = Scaling::fit(&train).unwrap();
    (scaling.apply(&train).unwrap(), scaling.apply(&test).unwrap())
}

fn reference_config(seed: u64) -> EvolutionConfig {
    EvolutionConfig { rng_seed: seed, ..EvolutionConfig::default() }
}

/// The generation log plus final train and test metrics, as CSV text.
fn metric_csv(result: &EvolutionResult, train: &Dataset, test: &Dataset) -> String {
    let mut buf = Vec::new();
    write_generation_csv(&result.log, &mut buf).unwrap();
    let model = &result.best.model;
    let pred = |d: &Dataset| d.inputs().iter().map(|x| model.infer(x).unwrap()).collect::<Vec<_>>();
    let tr = metrics(&pred(train), train.targets()).unwrap();
    let te = metrics(&pred(test), test.targets()).unwrap();
    let mut text = String::from_utf8(buf).unwrap();
    text.push_str(&format!("split,rmse,cc\ntrain,{},{}\ntest,{},{}\n", tr.rmse, tr.cc, te.rmse, te.cc));
    text
}

struct Run {
    seed: u64,
    result: EvolutionResult,
    csv: String,
}

fn elitist_monotonicity(r: &mut Report, runs: &[Run]) {
    let mut violations = 0;
    let mut generations = 0;
    for run in runs {
        generations = generations.max(run.result.log.len() - 1);
        violations += run.result.log.windows(2).filter(|w| w[1].best_train_rmse > w[0].best_train_rmse).count();
    }
    let bests: Vec<String> = runs
        .iter()
        .map(|run| format!("{:.4}", run.result.log.last().unwrap().best_train_rmse))
        .collect();
    r.record(
        8,
        "elitist monotonicity",
        violations == 0 && runs.len() == 5,
        format!("{} runs x {generations} generations, {violations} increases, final best {}", runs.len(), bests.join("/")),
    );
}

fn comparison(r: &mut Report, runs: &[Run], train: &Dataset, test: &Dataset) {
    let chosen: Vec<&Run> = runs.iter().filter(|run| COMPARISON_SEEDS.contains(&run.seed)).collect();
    let mut evo_rmse = 0.0;
    let mut evo_cc = 0.0;
    for run in &chosen {
        let model = &run.result.best.model;
        let pred: Vec<f64> = test.inputs().iter().map(|x| model.infer(x).unwrap()).collect();
        let m = metrics(&pred, test.targets()).unwrap();
        evo_rmse += m.rmse / chosen.len() as f64;
        evo_cc += m.cc / chosen.len() as f64;
    }

    let mc = MlpConfig::default();
    let mut mlp_rmse = 0.0;
    let mut mlp_cc = 0.0;
    for &seed in &COMPARISON_SEEDS {
        let mut net = Mlp::random(train.n_inputs(), mc.hidden, mc.init_scale, seed);
        mlp_train(&mut net, train, mc.rate, mc.momentum, mc.epochs).unwrap();
        let pred: Vec<f64> = test.inputs().iter().map(|x| net.forward(x).unwrap()).collect();
        let m = metrics(&pred, test.targets()).unwrap();
        mlp_rmse += m.rmse / COMPARISON_SEEDS.len() as f64;
        mlp_cc += m.cc / COMPARISON_SEEDS.len() as f64;
    }
    let pinned = (evo_rmse - PINNED_EVONF_TEST_RMSE).abs() <= PIN_TOLERANCE
        && (mlp_rmse - PINNED_MLP_TEST_RMSE).abs() <= PIN_TOLERANCE;
    let pass = evo_rmse < mlp_rmse && evo_cc > 0.9 && pinned;
    r.record(
        9,
        "EvoNF vs MLP on synthetic benchmark",
        pass,
        format!(
            "mean test RMSE EvoNF {evo_rmse:.6} vs MLP {mlp_rmse:.6}, mean test CC EvoNF {evo_cc:.4} vs MLP {mlp_cc:.4}, \
             matches pinned values: {pinned}"
        ),
    );

    let counts: Vec<usize> = chosen.iter().map(|run| run.result.best.model.rulebase().count_active()).collect();
    let pass = counts.iter().all(|&c| c < 128) && counts.len() == COMPARISON_SEEDS.len();
    r.record(10, "rule compaction", pass, format!("active rules {:?} of 128", counts));
}

fn determinism(r: &mut Report, runs: &[Run], train: &Dataset, test: &Dataset) {
    let first = &runs[0];
    let again = evolve(&reference_config(first.seed), train, test).unwrap();
    let same = metric_csv(&again, train, test) == first.csv;
    r.record(
        11,
        "determinism",
        same,
        format!("seed {} repeated, metric CSV of {} bytes identical: {same}", first.seed, first.csv.len()),
    );
}

fn main() {
    let mut r = Report { failures: 0 };
    operator_laws(&mut r);
    bell_identities(&mut r);
    gradient_oracle(&mut r);
    inference_oracle(&mut r);
    grid_count(&mut r);
    codec_round_trip(&mut r);
    mutation_schedule(&mut r);

    let started = Instant::now();
    let (train, test) = benchmark_data();
    let runs: Vec<Run> = MONOTONICITY_SEEDS
        .iter()
        .map(|&seed| {
            let result = evolve(&reference_config(seed), &train, &test).unwrap();
            let csv = metric_csv(&result, &train, &test);
            Run { seed, result, csv }
        })
        .collect();
    elitist_monotonicity(&mut r, &runs);
    comparison(&mut r, &runs, &train, &test);
    determinism(&mut r, &runs, &train, &test);
    println!("benchmark runs took {:.1} s", started.elapsed().as_secs_f64());

    if r.failures > 0 {
        println!("{} criteria failed", r.failures);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
