//! Test-only helpers: random model generators and a straight-line
//! reference evaluator for Takagi-Sugeno inference.

#![allow(dead_code)]

use evonf::dataset::Dataset;
use evonf::fuzzy::{MembershipFunction, MfKind, TNormParam};
use evonf::inference::{Rule, RuleBase, TskModel};
use evonf::mlp::Mlp;
use rand::Rng;

/// Gaussian or bell partition of `[0, 1]` with randomised shapes.
pub fn random_partition<R: Rng>(rng: &mut R, kind: MfKind, m: usize) -> Vec<MembershipFunction> {
    (0..m)
        .map(|_| {
            let params: Vec<f64> = match kind {
                MfKind::Gaussian => vec![rng.gen_range(-0.2..1.2), rng.gen_range(0.25..1.0)],
                MfKind::Bell => vec![rng.gen_range(0.25..1.0), rng.gen_range(0.6..3.0), rng.gen_range(-0.2..1.2)],
            };
            MembershipFunction::from_params(kind, &params).unwrap()
        })
        .collect()
}

/// A model with `n` inputs and `m` labels per input; antecedents may set
/// several labels per variable or none ("don't care").
pub fn random_model<R: Rng>(rng: &mut R, n: usize, m: usize, n_rules: usize) -> TskModel {
    let kind = if rng.gen_bool(0.5) { MfKind::Gaussian } else { MfKind::Bell };
    let partitions = (0..n).map(|_| random_partition(rng, kind, m)).collect();
    let full = (1u64 << m) - 1;
    let rules = (0..n_rules)
        .map(|_| {
            let mut mask: Vec<u64> = (0..n).map(|_| rng.gen_range(0..=full)).collect();
            if mask.iter().all(|&b| b == 0) {
                let v = rng.gen_range(0..n);
                mask[v] = 1 << rng.gen_range(0..m);
            }
            let cons = (0..=n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            Rule::new(mask, cons).unwrap()
        })
        .collect();
    let mut active: Vec<bool> = (0..n_rules).map(|_| rng.gen_bool(0.7)).collect();
    if !active.iter().any(|&a| a) {
        active[rng.gen_range(0..n_rules)] = true;
    }
    let p = 10f64.powf(rng.gen_range(-1.3..1.7));
    TskModel::new(partitions, RuleBase::new(rules, active).unwrap(), TNormParam::new(p).unwrap()).unwrap()
}

pub fn random_input<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()
}

pub fn random_dataset<R: Rng>(rng: &mut R, n_inputs: usize, n_rows: usize) -> Dataset {
    let inputs: Vec<Vec<f64>> = (0..n_rows).map(|_| random_input(rng, n_inputs)).collect();
    let targets = (0..n_rows).map(|_| rng.gen_range(0.0..1.0)).collect();
    Dataset::new(inputs, targets).unwrap()
}

fn reference_membership(mf: &MembershipFunction, x: f64) -> f64 {
    let params = mf.params();
    match mf.kind() {
        MfKind::Gaussian => {
            let (c, s) = (params[0], params[1]);
            (-(x - c).powi(2) / (2.0 * s * s)).exp()
        }
        MfKind::Bell => {
            let (p, q, r) = (params[0], params[1], params[2]);
            1.0 / (1.0 + ((x - r) / p).abs().powf(2.0 * q))
        }
    }
}

/// Textbook Schweizer-Sklar form `(a^-p + b^-p - 1)^(-1/p)`.
pub fn reference_tnorm(a: f64, b: f64, p: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    (a.powf(-p) + b.powf(-p) - 1.0).powf(-1.0 / p)
}

/// Enumerates the active rules and sums the weighted consequents directly.
pub fn reference_infer(model: &TskModel, x: &[f64]) -> f64 {
    let p = model.tnorm().get();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut plain = 0.0;
    let mut n_active = 0.0;
    for (k, rule) in model.rulebase().rules().iter().enumerate() {
        if !model.rulebase().active()[k] {
            continue;
        }
        let mut w: Option<f64> = None;
        for (i, &mask) in rule.antecedent().iter().enumerate() {
            if mask == 0 {
                continue;
            }
            let mut mu = 0.0f64;
            for (j, mf) in model.partitions()[i].iter().enumerate() {
                if mask & (1 << j) != 0 {
                    mu = mu.max(reference_membership(mf, x[i]));
                }
            }
            w = Some(match w {
                None => mu,
                Some(acc) => reference_tnorm(acc, mu, p),
            });
        }
        let w = w.unwrap();
        let c = rule.consequent();
        let mut y = c[0];
        for i in 0..x.len() {
            y += c[i + 1] * x[i];
        }
        num += w * y;
        den += w;
        plain += y;
        n_active += 1.0;
    }
    if den < 1e-12 {
        plain / n_active
    } else {
        num / den
    }
}

/// Central finite-difference gradient of `f` at `theta`.
pub fn central_difference(theta: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut work = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let step = h * theta[i].abs().max(1.0);
            work[i] = theta[i] + step;
            let up = f(&work);
            work[i] = theta[i] - step;
            let down = f(&work);
            work[i] = theta[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Denominator floor for gradient comparisons. Central differences with a
/// step of 1e-5 carry absolute noise near 1e-10, so components that vanish
/// analytically are compared to roughly 1e-9 absolute.
pub const GRADIENT_FLOOR: f64 = 1e-5;

/// Largest componentwise relative error, with `floor` guarding components
/// that are zero in both vectors.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn random_mlp<R: Rng>(rng: &mut R, n_inputs: usize, n_hidden: usize) -> Mlp {
    Mlp::random(n_inputs, n_hidden, 1.0, rng.gen())
}

/// Rounds `v` to a multiple of 2^-30. Sums of such values below 2^22 in
/// magnitude are exact, so `c ± p` lands precisely on the half-width.
pub fn dyadic(v: f64) -> f64 {
    let scale = 2f64.powi(30);
    (v * scale).round() / scale
}
