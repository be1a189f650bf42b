use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use evonf::dataset::{metrics, synth_generate, write_csv, Dataset, Metrics, SYNTH_VERSION};
use evonf::evolution::{evolve, write_generation_csv, EvolutionConfig};
use evonf::mlp::{mlp_train, write_loss_curve_csv, Mlp};

use crate::artifacts::{
    create_dir, parse_predictions, parse_summary_mean, predictions_csv, read_artifact, seed_dir, summary_csv, write_file,
    ModelFile, SavedModel, SeedSummary,
};
use crate::config::{RunConfig, SynthSpec};
use crate::failure::Failure;

fn predict_all(data: &Dataset, f: impl Fn(&[f64]) -> evonf::Result<f64>) -> evonf::Result<Vec<f64>> {
    data.inputs().iter().map(|x| f(x)).collect()
}

/// Metrics with CC reported as NaN when the predictions are constant.
fn score(pred: &[f64], target: &[f64]) -> evonf::Result<Metrics> {
    match metrics(pred, target) {
        Err(evonf::Error::ZeroVariance) => Ok(Metrics { rmse: evonf::dataset::rmse(pred, target), cc: f64::NAN }),
        other => other,
    }
}

fn write_metadata(out: &Path, command: &str, argv: &[String], started: SystemTime, clock: Instant) -> anyhow::Result<()> {
    let unix = started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = serde_json::json!({
        "tool": "evonf",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": argv,
        "synth_version": SYNTH_VERSION,
        "started_unix": unix,
        "elapsed_seconds": clock.elapsed().as_secs_f64(),
    });
    write_file(&out.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

fn write_common(out: &Path, cfg: &RunConfig, rows: &[SeedSummary], test: &Dataset, pred_sum: &[f64]) -> anyhow::Result<()> {
    write_file(&out.join("summary.csv"), summary_csv(rows))?;
    let n = rows.len() as f64;
    let mean: Vec<f64> = pred_sum.iter().map(|p| p / n).collect();
    write_file(&out.join("predictions.csv"), predictions_csv(test.targets(), &mean))?;
    write_file(&out.join("config.toml"), cfg.to_toml()?)?;
    Ok(())
}

pub fn train_evonf(cfg: &RunConfig, argv: &[String]) -> anyhow::Result<PathBuf> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    cfg.evolution.validate()?;
    let data = cfg.prepare_data()?;
    let out = cfg.resolve_out_dir("evonf");
    create_dir(&out)?;

    let mut rows = Vec::with_capacity(cfg.seeds.len());
    let mut pred_sum = vec![0.0; data.test.len()];
    for &seed in &cfg.seeds {
        let ecfg = EvolutionConfig { rng_seed: seed, ..cfg.evolution.clone() };
        let result = evolve(&ecfg, &data.train, &data.test)?;
        let model = &result.best.model;
        let train_pred = predict_all(&data.train, |x| model.infer(x))?;
        let test_pred = predict_all(&data.test, |x| model.infer(x))?;
        let row = SeedSummary {
            seed,
            train: score(&train_pred, data.train.targets())?,
            test: score(&test_pred, data.test.targets())?,
            active_rules: Some(model.rulebase().count_active()),
        };

        let dir = seed_dir(&out, seed);
        create_dir(&dir)?;
        let saved = SavedModel::Evonf { model: model.clone(), learn: result.best.learn, train_rmse: row.train.rmse };
        write_file(&dir.join("model.json"), ModelFile::new(data.scaling.clone(), saved).to_json()?)?;
        let mut log = Vec::new();
        write_generation_csv(&result.log, &mut log)?;
        write_file(&dir.join("generations.csv"), log)?;
        write_file(&dir.join("rules.txt"), model.export_rules())?;
        write_file(&dir.join("metrics.csv"), crate::artifacts::metrics_csv(&row.train, &row.test))?;
        write_file(&dir.join("predictions.csv"), predictions_csv(data.test.targets(), &test_pred))?;

        eprintln!(
            "evonf: seed {seed}: train rmse {:.5}, test rmse {:.5}, test cc {:.4}, {} active rules",
            row.train.rmse,
            row.test.rmse,
            row.test.cc,
            row.active_rules.unwrap_or(0)
        );
        pred_sum.iter_mut().zip(&test_pred).for_each(|(s, p)| *s += p);
        rows.push(row);
    }

    write_common(&out, cfg, &rows, &data.test, &pred_sum)?;
    write_metadata(&out, "train-evonf", argv, started, clock)?;
    Ok(out)
}

pub fn train_mlp(cfg: &RunConfig, argv: &[String]) -> anyhow::Result<PathBuf> {
    let (started, clock) = (SystemTime::now(), Instant::now());
    let data = cfg.prepare_data()?;
    let out = cfg.resolve_out_dir("mlp");
    create_dir(&out)?;

    let mc = cfg.mlp;
    let mut rows = Vec::with_capacity(cfg.seeds.len());
    let mut pred_sum = vec![0.0; data.test.len()];
    for &seed in &cfg.seeds {
        let mut net = Mlp::random(data.train.n_inputs(), mc.hidden, mc.init_scale, seed);
        let curve = mlp_train(&mut net, &data.train, mc.rate, mc.momentum, mc.epochs)?;
        let train_pred = predict_all(&data.train, |x| net.forward(x))?;
        let test_pred = predict_all(&data.test, |x| net.forward(x))?;
        let row = SeedSummary {
            seed,
            train: score(&train_pred, data.train.targets())?,
            test: score(&test_pred, data.test.targets())?,
            active_rules: None,
        };

        let dir = seed_dir(&out, seed);
        create_dir(&dir)?;
        let saved = SavedModel::Mlp { network: net.clone() };
        write_file(&dir.join("model.json"), ModelFile::new(data.scaling.clone(), saved).to_json()?)?;
        let mut buf = Vec::new();
        write_loss_curve_csv(&curve, &mut buf)?;
        write_file(&dir.join("loss_curve.csv"), buf)?;
        write_file(&dir.join("metrics.csv"), crate::artifacts::metrics_csv(&row.train, &row.test))?;
        write_file(&dir.join("predictions.csv"), predictions_csv(data.test.targets(), &test_pred))?;

        eprintln!(
            "mlp: seed {seed}: train rmse {:.5}, test rmse {:.5}, test cc {:.4}",
            row.train.rmse, row.test.rmse, row.test.cc
        );
        pred_sum.iter_mut().zip(&test_pred).for_each(|(s, p)| *s += p);
        rows.push(row);
    }

    write_common(&out, cfg, &rows, &data.test, &pred_sum)?;
    write_metadata(&out, "train-mlp", argv, started, clock)?;
    Ok(out)
}

/// Builds the two-row comparison table and the joint prediction file.
pub fn compare(evonf_dir: &Path, mlp_dir: &Path, out: &Path) -> anyhow::Result<String> {
    let mut table = String::from("paradigm,train_rmse,test_rmse,test_cc\n");
    let mut columns = Vec::new();
    for (name, dir) in [("EvoNF", evonf_dir), ("MLP", mlp_dir)] {
        let summary = dir.join("summary.csv");
        let (train_rmse, test_rmse, test_cc) = parse_summary_mean(&read_artifact(&summary)?, &summary)?;
        table.push_str(&format!("{name},{train_rmse},{test_rmse},{test_cc}\n"));
        let preds = dir.join("predictions.csv");
        columns.push(parse_predictions(&read_artifact(&preds)?, &preds)?);
    }
    let (evonf_desired, evonf_pred) = &columns[0];
    let (mlp_desired, mlp_pred) = &columns[1];
    if evonf_desired != mlp_desired {
        return Err(Failure::new(
            "artifact-mismatch",
            format!("{} and {} were produced on different test sets", evonf_dir.display(), mlp_dir.display()),
        )
        .into());
    }
    let mut preds = String::from("index,desired,evonf,mlp\n");
    for (i, ((d, e), m)) in evonf_desired.iter().zip(evonf_pred).zip(mlp_pred).enumerate() {
        preds.push_str(&format!("{i},{d},{e},{m}\n"));
    }

    create_dir(out)?;
    write_file(&out.join("comparison.csv"), &table)?;
    write_file(&out.join("predictions.csv"), preds)?;
    Ok(table)
}

pub fn synth(spec: &SynthSpec, out: Option<&Path>) -> anyhow::Result<()> {
    let data = synth_generate(spec.n, spec.seed, spec.noise_sd)?;
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                create_dir(parent)?;
            }
            evonf::dataset::save_csv(&data, path)?;
        }
        None => write_csv(&data, std::io::stdout().lock())?,
    }
    Ok(())
}

/// Applies a saved model to raw rows; values are reported in raw units.
pub fn predict(model_path: &Path, data_path: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let file = ModelFile::from_json(&read_artifact(model_path)?)?;
    let raw = evonf::dataset::load_csv(data_path)?;
    let scaled = file.scaling.apply(&raw)?;
    let pred: Vec<f64> = predict_all(&scaled, |x| file.predict(x))?
        .into_iter()
        .map(|p| file.scaling.unscale_target(p))
        .collect();
    let text = predictions_csv(raw.targets(), &pred);
    match out {
        Some(path) => write_file(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
