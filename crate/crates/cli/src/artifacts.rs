//! On-disk artifact formats.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use evonf::dataset::{Metrics, Scaling};
use evonf::inference::TskModel;
use evonf::local_search::LearnParams;
use evonf::mlp::Mlp;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

pub const MODEL_FORMAT: &str = "evonf-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "paradigm", rename_all = "lowercase")]
pub enum SavedModel {
    Evonf { model: TskModel, learn: LearnParams, train_rmse: f64 },
    Mlp { network: Mlp },
}

/// Versioned JSON model file. Models operate on scaled data; `scaling`
/// maps raw rows into that space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub scaling: Scaling,
    #[serde(flatten)]
    pub model: SavedModel,
}

impl ModelFile {
    pub fn new(scaling: Scaling, model: SavedModel) -> Self {
        Self { format: MODEL_FORMAT.to_string(), version: MODEL_VERSION, scaling, model }
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Failure::new(
                "unsupported-version",
                format!("model format {} v{} is not {MODEL_FORMAT} v{MODEL_VERSION}", file.format, file.version),
            )
            .into());
        }
        Ok(file)
    }

    pub fn predict(&self, x: &[f64]) -> evonf::Result<f64> {
        match &self.model {
            SavedModel::Evonf { model, .. } => model.infer(x),
            SavedModel::Mlp { network } => network.forward(x),
        }
    }
}

pub fn create_dir(path: &Path) -> evonf::Result<()> {
    std::fs::create_dir_all(path).map_err(|source| evonf::Error::Io { path: path.to_path_buf(), source })
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> evonf::Result<()> {
    std::fs::write(path, contents).map_err(|source| evonf::Error::Io { path: path.to_path_buf(), source })
}

/// Reads an artifact another command produced.
pub fn read_artifact(path: &Path) -> anyhow::Result<String> {
    if !path.is_file() {
        return Err(Failure::new("missing-artifact", format!("{}: not found", path.display())).into());
    }
    std::fs::read_to_string(path)
        .map_err(|source| evonf::Error::Io { path: path.to_path_buf(), source }.into())
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

pub fn metrics_csv(train: &Metrics, test: &Metrics) -> String {
    format!("split,rmse,cc\ntrain,{},{}\ntest,{},{}\n", train.rmse, train.cc, test.rmse, test.cc)
}

pub fn predictions_csv(desired: &[f64], predicted: &[f64]) -> String {
    let mut s = String::from("index,desired,predicted\n");
    for (i, (d, p)) in desired.iter().zip(predicted).enumerate() {
        let _ = writeln!(s, "{i},{d},{p}");
    }
    s
}

/// One seed's outcome. `active_rules` is absent for the MLP.
#[derive(Clone, Debug)]
pub struct SeedSummary {
    pub seed: u64,
    pub train: Metrics,
    pub test: Metrics,
    pub active_rules: Option<usize>,
}

/// Per-seed rows followed by a `mean` row.
pub fn summary_csv(rows: &[SeedSummary]) -> String {
    let with_rules = rows.iter().all(|r| r.active_rules.is_some());
    let mut s = String::from("seed,train_rmse,train_cc,test_rmse,test_cc");
    if with_rules {
        s.push_str(",active_rules");
    }
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{},{},{},{},{}", r.seed, r.train.rmse, r.train.cc, r.test.rmse, r.test.cc);
        if let (true, Some(n)) = (with_rules, r.active_rules) {
            let _ = write!(s, ",{n}");
        }
        s.push('\n');
    }
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&SeedSummary) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let _ = write!(
        s,
        "mean,{},{},{},{}",
        mean(&|r| r.train.rmse),
        mean(&|r| r.train.cc),
        mean(&|r| r.test.rmse),
        mean(&|r| r.test.cc)
    );
    if with_rules {
        let _ = write!(s, ",{}", mean(&|r| r.active_rules.unwrap_or(0) as f64));
    }
    s.push('\n');
    s
}

/// Mean row of a summary file: `(train_rmse, test_rmse, test_cc)`.
pub fn parse_summary_mean(text: &str, path: &Path) -> anyhow::Result<(f64, f64, f64)> {
    let bad = |msg: &str| Failure::new("parse-error", format!("{}: {msg}", path.display()));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty file"))?.split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).ok_or_else(|| bad(&format!("missing column `{name}`")));
    let (tr, te, cc) = (col("train_rmse")?, col("test_rmse")?, col("test_cc")?);
    let row: Vec<&str> = lines
        .find(|l| l.starts_with("mean,"))
        .ok_or_else(|| bad("no `mean` row"))?
        .split(',')
        .collect();
    let num = |i: usize| -> anyhow::Result<f64> {
        row.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| bad("malformed `mean` row").into())
    };
    Ok((num(tr)?, num(te)?, num(cc)?))
}

/// `(desired, predicted)` columns of a predictions file.
pub fn parse_predictions(text: &str, path: &Path) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let bad = |line: usize| Failure::new("parse-error", format!("{}: malformed line {line}", path.display()));
    let mut desired = Vec::new();
    let mut predicted = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad(i + 1).into());
        }
        let d: f64 = fields[1].parse().map_err(|_| bad(i + 1))?;
        let p: f64 = fields[2].parse().map_err(|_| bad(i + 1))?;
        desired.push(d);
        predicted.push(p);
    }
    Ok((desired, predicted))
}
