//! Runs the synthetic EvoNF vs MLP comparison and prints one row per seed.
//!
//! `cargo run --release -p evonf --example benchmark -- [generations] [seeds]`
//!
//! `DATA_SEED` picks the synthetic sample and split (default 3).

use std::time::Instant;

use evonf::dataset::{metrics, split, synth_generate, Scaling};
use evonf::evolution::{evolve, EvolutionConfig};
use evonf::mlp::{mlp_train, Mlp, MlpConfig};

fn main() -> evonf::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let generations = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(35);
    let seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3);

    let data_seed: u64 = std::env::var("DATA_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(3);
    let raw = synth_generate(69, data_seed, 0.05)?;
    let (train, test) = split(&raw, 0.9, data_seed)?;
    let scaling = Scaling::fit(&train)?;
    let (train, test) = (scaling.apply(&train)?, scaling.apply(&test)?);

    println!("paradigm,seed,train_rmse,test_rmse,test_cc,active_rules,seconds");
    for seed in 1..=seeds {
        let started = Instant::now();
        let cfg = EvolutionConfig { max_generations: generations, rng_seed: seed, ..Default::default() };
        let res = evolve(&cfg, &train, &test)?;
        let pred: Vec<f64> = test.inputs().iter().map(|x| res.best.model.infer(x)).collect::<Result<_, _>>()?;
        let m = metrics(&pred, test.targets())?;
        println!(
            "evonf,{seed},{:.5},{:.5},{:.4},{},{:.1}",
            res.best.fitness.unwrap_or(f64::NAN),
            m.rmse,
            m.cc,
            res.best.model.rulebase().count_active(),
            started.elapsed().as_secs_f64()
        );

        let started = Instant::now();
        let mc = MlpConfig::default();
        let mut net = Mlp::random(train.n_inputs(), mc.hidden, mc.init_scale, seed);
        let curve = mlp_train(&mut net, &train, mc.rate, mc.momentum, mc.epochs)?;
        let pred: Vec<f64> = test.inputs().iter().map(|x| net.forward(x)).collect::<Result<_, _>>()?;
        let m = metrics(&pred, test.targets())?;
        println!(
            "mlp,{seed},{:.5},{:.5},{:.4},,{:.1}",
            curve.last().copied().unwrap_or(f64::NAN),
            m.rmse,
            m.cc,
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
