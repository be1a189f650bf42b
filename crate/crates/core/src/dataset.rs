//! Export-behaviour data: the seven-input schema, CSV I/O, min-max scaling,
//! train/test splitting, regression metrics and the synthetic generator.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One ordinal survey input and its declared range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Column {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
}

pub const INPUT_COLUMNS: [Column; 7] = [
    Column { name: "product_manufactured", lo: 1.0, hi: 5.0 },
    Column { name: "resources", lo: 1.0, hi: 5.0 },
    Column { name: "tax_protection", lo: 1.0, hi: 5.0 },
    Column { name: "customers_market", lo: 1.0, hi: 4.0 },
    Column { name: "involvement_strategy", lo: 1.0, hi: 4.0 },
    Column { name: "financial_independence", lo: 1.0, hi: 5.0 },
    Column { name: "suppliers_relationship", lo: 1.0, hi: 5.0 },
];

pub const TARGET_COLUMN: &str = "export_intensity";

pub const N_INPUTS: usize = INPUT_COLUMNS.len();

/// Regression rows plus, once scaled, the record needed to undo the scaling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    scaling: Option<Scaling>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                actual: targets.len(),
            });
        }
        if let Some(first) = inputs.first() {
            if let Some(bad) = inputs.iter().find(|r| r.len() != first.len()) {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    actual: bad.len(),
                });
            }
        }
        Ok(Self { inputs, targets, scaling: None })
    }

    /// Checks every row against [`INPUT_COLUMNS`].
    pub fn validate_schema(&self) -> Result<()> {
        if self.n_inputs() != N_INPUTS {
            return Err(Error::DimensionMismatch {
                expected: N_INPUTS,
                actual: self.n_inputs(),
            });
        }
        for (row, x) in self.inputs.iter().enumerate() {
            for (v, col) in x.iter().zip(&INPUT_COLUMNS) {
                if !(col.lo..=col.hi).contains(v) {
                    return Err(Error::RangeViolation {
                        row: row + 1,
                        column: col.name.into(),
                        value: *v,
                        lo: col.lo,
                        hi: col.hi,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.inputs.iter().map(Vec::as_slice).zip(self.targets.iter().copied())
    }

    pub fn scaling(&self) -> Option<&Scaling> {
        self.scaling.as_ref()
    }

    /// Observed `(min, max)` of each input column.
    pub fn input_ranges(&self) -> Vec<(f64, f64)> {
        (0..self.n_inputs())
            .map(|j| {
                self.inputs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r[j]), hi.max(r[j]))
                })
            })
            .collect()
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            scaling: self.scaling.clone(),
        }
    }
}

/// Per-column min-max statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub input_min: Vec<f64>,
    pub input_max: Vec<f64>,
    pub target_min: f64,
    pub target_max: f64,
}

impl Scaling {
    /// Fits min-max statistics; fails on any constant column.
    pub fn fit(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::DatasetEmpty);
        }
        let ranges = data.input_ranges();
        for (j, &(lo, hi)) in ranges.iter().enumerate() {
            if !(hi > lo) {
                let name = if data.n_inputs() == N_INPUTS {
                    INPUT_COLUMNS[j].name.to_string()
                } else {
                    format!("x{}", j + 1)
                };
                return Err(Error::ZeroRange(name));
            }
        }
        let (tlo, thi) = data
            .targets
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| (lo.min(t), hi.max(t)));
        if !(thi > tlo) {
            return Err(Error::ZeroRange(TARGET_COLUMN.into()));
        }
        Ok(Self {
            input_min: ranges.iter().map(|r| r.0).collect(),
            input_max: ranges.iter().map(|r| r.1).collect(),
            target_min: tlo,
            target_max: thi,
        })
    }

    /// Maps `data` with these statistics. Values outside the fitted range
    /// land outside `[0, 1]`.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_inputs() != self.input_min.len() && !data.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: self.input_min.len(),
                actual: data.n_inputs(),
            });
        }
        let inputs = data
            .inputs
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .map(|(j, v)| (v - self.input_min[j]) / (self.input_max[j] - self.input_min[j]))
                    .collect()
            })
            .collect();
        let targets = data.targets.iter().map(|&t| self.scale_target(t)).collect();
        Ok(Dataset { inputs, targets, scaling: Some(self.clone()) })
    }

    pub fn scale_target(&self, t: f64) -> f64 {
        (t - self.target_min) / (self.target_max - self.target_min)
    }

    pub fn unscale_target(&self, t: f64) -> f64 {
        t * (self.target_max - self.target_min) + self.target_min
    }

    /// Inverse of [`Scaling::apply`].
    pub fn unscale(&self, data: &Dataset) -> Dataset {
        let inputs = data
            .inputs
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .map(|(j, v)| v * (self.input_max[j] - self.input_min[j]) + self.input_min[j])
                    .collect()
            })
            .collect();
        let targets = data.targets.iter().map(|&t| self.unscale_target(t)).collect();
        Dataset { inputs, targets, scaling: None }
    }
}

/// Min-max scales inputs and target to `[0, 1]`, recording the statistics.
pub fn scale(data: &Dataset) -> Result<Dataset> {
    Scaling::fit(data)?.apply(data)
}

/// Seeded shuffle, then the first `round(train_fraction * n)` rows train.
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if data.len() < 2 {
        return Err(Error::DatasetTooSmall(data.len()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = data.len();
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((data.subset(&idx[..n_train]), data.subset(&idx[n_train..])))
}

fn header() -> Vec<&'static str> {
    INPUT_COLUMNS.iter().map(|c| c.name).chain([TARGET_COLUMN]).collect()
}

/// Parses schema CSV from any reader.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut records = rdr.records();
    let head = match records.next() {
        None => return Err(Error::DatasetEmpty),
        Some(r) => r.map_err(|e| csv_error(e, 1))?,
    };
    let expected = header();
    if head.len() != expected.len() || head.iter().zip(&expected).any(|(a, b)| a != *b) {
        return Err(Error::Parse {
            row: 1,
            column: "header".into(),
            message: format!("expected `{}`", expected.join(",")),
        });
    }

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for record in records {
        let record = record.map_err(|e| csv_error(e, inputs.len() + 2))?;
        let line = record.position().map_or(inputs.len() + 2, |p| p.line() as usize);
        if record.len() != expected.len() {
            return Err(Error::Parse {
                row: line,
                column: "*".into(),
                message: format!("expected {} fields, found {}", expected.len(), record.len()),
            });
        }
        let mut values = Vec::with_capacity(expected.len());
        for (field, name) in record.iter().zip(&expected) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row: line,
                column: (*name).into(),
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    column: (*name).into(),
                    message: "value is not finite".into(),
                });
            }
            values.push(v);
        }
        for (v, col) in values.iter().zip(&INPUT_COLUMNS) {
            if !(col.lo..=col.hi).contains(v) {
                return Err(Error::RangeViolation {
                    row: line,
                    column: col.name.into(),
                    value: *v,
                    lo: col.lo,
                    hi: col.hi,
                });
            }
        }
        targets.push(values.pop().unwrap_or_default());
        inputs.push(values);
    }
    if inputs.is_empty() {
        return Err(Error::DatasetEmpty);
    }
    Dataset::new(inputs, targets)
}

fn csv_error(e: csv::Error, row: usize) -> Error {
    Error::Parse { row, column: "*".into(), message: e.to_string() }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_csv(file)
}

/// Writes schema CSV; the output parses back to an identical dataset.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(header()).map_err(ser)?;
    for (x, t) in data.rows() {
        let fields: Vec<String> = x.iter().chain([&t]).map(|v| v.to_string()).collect();
        w.write_record(&fields).map_err(ser)?;
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))
}

pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    write_csv(data, file)
}

/// Root-mean-square error and Pearson correlation of a prediction series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub cc: f64,
}

pub fn rmse(pred: &[f64], target: &[f64]) -> f64 {
    let sse: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    (sse / pred.len() as f64).sqrt()
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

pub fn metrics(pred: &[f64], target: &[f64]) -> Result<Metrics> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            actual: pred.len(),
        });
    }
    if pred.len() < 2 {
        return Err(Error::DatasetTooSmall(pred.len()));
    }
    Ok(Metrics { rmse: rmse(pred, target), cc: pearson(pred, target)? })
}

/// Version tag of the synthetic ground truth. Bump it whenever
/// [`synth_ground_truth`] or the sampling in [`synth_generate`] changes.
pub const SYNTH_VERSION: &str = "synth-v3";

/// Noise-free export intensity for one schema row.
///
/// With every input normalised to `u = (x - lo) / (hi - lo)`:
///
/// ```text
/// y = 0.05
///   + 0.60 * u_financial * u_involvement
///   + 0.30 * (1 - exp(-3 u_product)) / (1 - exp(-3))
///   + 0.20 * (1 - u_tax)
///   + 0.10 * u_customers
///   + 0.10 * u_resources
///   - 0.05 * u_suppliers
/// ```
pub fn synth_ground_truth(x: &[f64]) -> f64 {
    let u: Vec<f64> = x
        .iter()
        .zip(&INPUT_COLUMNS)
        .map(|(v, c)| (v - c.lo) / (c.hi - c.lo))
        .collect();
    let [prod, res, tax, cust, inv, fin, sup] = [u[0], u[1], u[2], u[3], u[4], u[5], u[6]];
    0.05 + 0.60 * fin * inv
        + 0.30 * (1.0 - (-3.0 * prod).exp()) / (1.0 - (-3.0f64).exp())
        + 0.20 * (1.0 - tax)
        + 0.10 * cust
        + 0.10 * res
        - 0.05 * sup
}

/// Draws `n` schema rows with integer inputs uniform over each declared
/// range and target `synth_ground_truth(x) + N(0, noise_sd)`.
pub fn synth_generate(n: usize, seed: u64, noise_sd: f64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::DatasetEmpty);
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise_sd must be >= 0, got {noise_sd}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = INPUT_COLUMNS
            .iter()
            .map(|c| rng.gen_range(c.lo as i64..=c.hi as i64) as f64)
            .collect();
        let eps = if noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        targets.push(synth_ground_truth(&x) + eps);
        inputs.push(x);
    }
    Dataset::new(inputs, targets)
}
