//! Gradient-descent refinement of a Takagi-Sugeno model.
//!
//! The model's tunable parameters are flattened in a fixed order: every
//! membership-function parameter (input-major, label-minor, parameter
//! innermost), then every consequent coefficient (rule-major), then the
//! T-norm exponent. Gradients are of the mean squared error.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fuzzy::{tnorm_step, MembershipFunction, TNormParam};
use crate::inference::{TskModel, FIRING_EPSILON};

/// Range the T-norm exponent is held to during descent.
pub const TNORM_RANGE: (f64, f64) = (0.01, 100.0);

/// Smallest width, slope or spread a descent step may leave behind.
pub const MIN_SHAPE: f64 = 1e-3;

/// Learning rate and momentum of the local search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnParams {
    pub rate: f64,
    pub momentum: f64,
}

impl LearnParams {
    pub fn new(rate: f64, momentum: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("learning rate must be >= 0, got {rate}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidParameter(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        Ok(Self { rate, momentum })
    }
}

/// Which parameter groups a descent step updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuneMask {
    pub membership: bool,
    pub consequents: bool,
    pub tnorm: bool,
}

impl Default for TuneMask {
    fn default() -> Self {
        Self { membership: true, consequents: true, tnorm: true }
    }
}

/// Offsets of each parameter group in the flat vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    /// Start of each MF's parameters, indexed `[input][label]`.
    pub mf_offsets: Vec<Vec<usize>>,
    pub consequent_offset: usize,
    pub consequent_width: usize,
    pub tnorm_index: usize,
    pub len: usize,
}

impl ParamLayout {
    pub fn of(model: &TskModel) -> Self {
        let mut off = 0;
        let mf_offsets = model
            .partitions()
            .iter()
            .map(|part| {
                part.iter()
                    .map(|mf| {
                        let o = off;
                        off += mf.n_params();
                        o
                    })
                    .collect()
            })
            .collect();
        let consequent_offset = off;
        let consequent_width = model.n_inputs() + 1;
        let tnorm_index = off + model.rulebase().len() * consequent_width;
        Self { mf_offsets, consequent_offset, consequent_width, tnorm_index, len: tnorm_index + 1 }
    }

    pub fn consequent_range(&self, rule: usize) -> std::ops::Range<usize> {
        let start = self.consequent_offset + rule * self.consequent_width;
        start..start + self.consequent_width
    }
}

/// Flattens the tunable parameters of `model`.
pub fn model_params(model: &TskModel) -> Vec<f64> {
    let mut out = Vec::with_capacity(ParamLayout::of(model).len);
    for mf in model.partitions().iter().flatten() {
        out.extend_from_slice(&mf.params()[..mf.n_params()]);
    }
    for rule in model.rulebase().rules() {
        out.extend_from_slice(rule.consequent());
    }
    out.push(model.tnorm().get());
    out
}

/// Writes a flat parameter vector back into `model`, validating each MF and
/// the T-norm exponent.
pub fn set_model_params(model: &mut TskModel, params: &[f64]) -> Result<()> {
    let layout = ParamLayout::of(model);
    if params.len() != layout.len {
        return Err(Error::DimensionMismatch { expected: layout.len, actual: params.len() });
    }
    let tnorm = TNormParam::new(params[layout.tnorm_index])?;
    for (part, offs) in model.partitions_mut().iter_mut().zip(&layout.mf_offsets) {
        for (mf, &o) in part.iter_mut().zip(offs) {
            let n = mf.n_params();
            *mf = MembershipFunction::from_params(mf.kind(), &params[o..o + n])?;
        }
    }
    for (k, rule) in model.rulebase_mut().rules_mut().iter_mut().enumerate() {
        rule.consequent_mut().copy_from_slice(&params[layout.consequent_range(k)]);
    }
    model.set_tnorm(tnorm);
    Ok(())
}

/// Root-mean-square error of `model` over `data`.
pub fn loss(model: &TskModel, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::DatasetEmpty);
    }
    let mut sse = 0.0;
    for (x, t) in data.rows() {
        let e = model.infer(x)? - t;
        sse += e * e;
    }
    Ok((sse / data.len() as f64).sqrt())
}

#[derive(Clone, Copy, Default)]
struct FoldStep {
    /// Flat `(input, label)` index of the membership entering this step.
    label: usize,
    d_acc: f64,
    d_mu: f64,
    d_p: f64,
}

/// Gradient of the mean squared error with respect to [`model_params`].
///
/// Max aggregation passes the gradient to the first maximising label; the
/// zero-firing fallback has no gradient through memberships.
pub fn gradient(model: &TskModel, data: &Dataset) -> Result<Vec<f64>> {
    Ok(gradient_with_loss(model, data)?.0)
}

/// Gradient together with the mean squared error it was computed at.
pub fn gradient_with_loss(model: &TskModel, data: &Dataset) -> Result<(Vec<f64>, f64)> {
    if data.is_empty() {
        return Err(Error::DatasetEmpty);
    }
    let n_in = model.n_inputs();
    if data.n_inputs() != n_in {
        return Err(Error::DimensionMismatch { expected: n_in, actual: data.n_inputs() });
    }
    let layout = ParamLayout::of(model);
    let p = model.tnorm().get();

    // flat (input, label) indexing
    let label_base: Vec<usize> = model
        .partitions()
        .iter()
        .scan(0, |acc, part| {
            let b = *acc;
            *acc += part.len();
            Some(b)
        })
        .collect();
    let mfs: Vec<&MembershipFunction> = model.partitions().iter().flatten().collect();
    let mf_input: Vec<usize> = model
        .partitions()
        .iter()
        .enumerate()
        .flat_map(|(i, part)| std::iter::repeat(i).take(part.len()))
        .collect();
    let mf_offset: Vec<usize> = layout.mf_offsets.iter().flatten().copied().collect();

    let active: Vec<usize> = model.active_rules().map(|(_, k)| k).collect();
    if active.is_empty() {
        return Err(Error::NoActiveRules);
    }
    let rules = model.rulebase().rules();

    let mut grad = vec![0.0; layout.len];
    let mut mu = vec![0.0; mfs.len()];
    let mut ln_mu = vec![0.0; mfs.len()];
    let mut g_mu = vec![0.0; mfs.len()];
    let mut steps = vec![FoldStep::default(); active.len() * n_in];
    let mut n_steps = vec![0usize; active.len()];
    let mut w = vec![0.0; active.len()];
    let mut f = vec![0.0; active.len()];
    let scale = 2.0 / data.len() as f64;
    let mut sse = 0.0;

    for (x, t) in data.rows() {
        for (j, mf) in mfs.iter().enumerate() {
            mu[j] = mf.eval(x[mf_input[j]]);
            ln_mu[j] = mu[j].ln();
        }

        let mut total = 0.0;
        for (a, &k) in active.iter().enumerate() {
            let rule = &rules[k];
            let chain = &mut steps[a * n_in..(a + 1) * n_in];
            let mut len = 0;
            let mut acc: Option<(f64, f64)> = None;
            for (i, &mask) in rule.antecedent().iter().enumerate() {
                if mask == 0 {
                    continue;
                }
                let mut best = usize::MAX;
                let mut m = mask;
                while m != 0 {
                    let j = label_base[i] + m.trailing_zeros() as usize;
                    if best == usize::MAX || mu[j] > mu[best] {
                        best = j;
                    }
                    m &= m - 1;
                }
                acc = Some(match acc {
                    None => {
                        chain[len] = FoldStep { label: best, d_acc: 0.0, d_mu: 1.0, d_p: 0.0 };
                        (mu[best], ln_mu[best])
                    }
                    Some((v, lv)) => {
                        if v <= 0.0 || mu[best] <= 0.0 {
                            chain[len] = FoldStep { label: best, d_acc: 0.0, d_mu: 0.0, d_p: 0.0 };
                            (0.0, f64::NEG_INFINITY)
                        } else {
                            let s = tnorm_step(v, lv, mu[best], ln_mu[best], p);
                            chain[len] = FoldStep { label: best, d_acc: s.d_a, d_mu: s.d_b, d_p: s.d_p };
                            (s.value, s.ln_value)
                        }
                    }
                });
                len += 1;
            }
            n_steps[a] = len;
            w[a] = acc.map_or(1.0, |(v, _)| v);
            f[a] = rule.consequent_at(x);
            total += w[a];
        }

        let fallback = total < FIRING_EPSILON;
        let y = if fallback {
            f.iter().sum::<f64>() / active.len() as f64
        } else {
            w.iter().zip(&f).map(|(w, f)| w * f).sum::<f64>() / total
        };
        let e = y - t;
        sse += e * e;
        let dy = scale * e;
        if dy == 0.0 {
            continue;
        }

        g_mu.iter_mut().for_each(|g| *g = 0.0);
        for (a, &k) in active.iter().enumerate() {
            let share = if fallback { 1.0 / active.len() as f64 } else { w[a] / total };
            let range = layout.consequent_range(k);
            let c = &mut grad[range];
            c[0] += dy * share;
            for (ci, xi) in c[1..].iter_mut().zip(x) {
                *ci += dy * share * xi;
            }
            if fallback {
                continue;
            }
            // back through the fold: g is dL/d(accumulator)
            let mut g = dy * (f[a] - y) / total;
            if g == 0.0 {
                continue;
            }
            let chain = &steps[a * n_in..a * n_in + n_steps[a]];
            for s in chain[1..].iter().rev() {
                g_mu[s.label] += g * s.d_mu;
                grad[layout.tnorm_index] += g * s.d_p;
                g *= s.d_acc;
            }
            if let Some(first) = chain.first() {
                g_mu[first.label] += g * first.d_mu;
            }
        }

        for (j, mf) in mfs.iter().enumerate() {
            if g_mu[j] == 0.0 {
                continue;
            }
            let dm = mf.gradient(x[mf_input[j]]);
            for (q, d) in dm[..mf.n_params()].iter().enumerate() {
                grad[mf_offset[j] + q] += g_mu[j] * d;
            }
        }
    }
    Ok((grad, sse / data.len() as f64))
}

/// Momentum buffer, one entry per flat parameter.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Velocity(pub Vec<f64>);

impl Velocity {
    pub fn zeros(model: &TskModel) -> Self {
        Self(vec![0.0; ParamLayout::of(model).len])
    }
}

/// One full-batch momentum step `v <- mu v - rate grad; theta <- theta + v`.
///
/// Parameters outside `mask` are left untouched. Afterwards every width,
/// slope and spread is at least [`MIN_SHAPE`] and the T-norm exponent lies
/// in [`TNORM_RANGE`]. Returns the mean squared error before the step.
pub fn gd_step(
    model: &mut TskModel,
    data: &Dataset,
    params: LearnParams,
    velocity: &mut Velocity,
    mask: TuneMask,
) -> Result<f64> {
    let layout = ParamLayout::of(model);
    if velocity.0.len() != layout.len {
        return Err(Error::DimensionMismatch { expected: layout.len, actual: velocity.0.len() });
    }
    let (grad, mse) = gradient_with_loss(model, data)?;
    let mut theta = model_params(model);

    let mut tunable = vec![false; layout.len];
    if mask.membership {
        tunable[..layout.consequent_offset].iter_mut().for_each(|t| *t = true);
    }
    if mask.consequents {
        for k in 0..model.rulebase().len() {
            if model.rulebase().is_active(k) {
                tunable[layout.consequent_range(k)].iter_mut().for_each(|t| *t = true);
            }
        }
    }
    tunable[layout.tnorm_index] = mask.tnorm;

    for (i, th) in theta.iter_mut().enumerate() {
        if !tunable[i] {
            continue;
        }
        let v = params.momentum * velocity.0[i] - params.rate * grad[i];
        velocity.0[i] = v;
        *th += v;
    }

    for (part, offs) in model.partitions().iter().zip(&layout.mf_offsets) {
        for (mf, &o) in part.iter().zip(offs) {
            for &q in mf.kind().positive_params() {
                theta[o + q] = theta[o + q].max(MIN_SHAPE);
            }
        }
    }
    theta[layout.tnorm_index] = theta[layout.tnorm_index].clamp(TNORM_RANGE.0, TNORM_RANGE.1);
    set_model_params(model, &theta)?;
    Ok(mse)
}

/// Runs `epochs` descent steps from a zero velocity and returns the final
/// RMSE.
pub fn refine(
    model: &mut TskModel,
    data: &Dataset,
    params: LearnParams,
    epochs: usize,
    mask: TuneMask,
) -> Result<f64> {
    let mut velocity = Velocity::zeros(model);
    for _ in 0..epochs {
        gd_step(model, data, params, &mut velocity, mask)?;
    }
    loss(model, data)
}
