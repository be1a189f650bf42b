//! Takagi-Sugeno rule bases: grid-partition construction, firing strengths
//! and weighted-average inference.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{tnorm_ss, MembershipFunction, MfKind, TNormParam};

/// Total firing below which `infer` falls back to the plain mean of the
/// active consequents.
pub const FIRING_EPSILON: f64 = 1e-12;

/// Default cap on the number of rules `grid_partition_init` will build.
pub const DEFAULT_RULE_CAP: usize = 1_000_000;

/// Largest partition a single antecedent mask can address.
pub const MAX_LABELS: usize = 64;

/// A fuzzy if-then rule with a linear consequent.
///
/// `antecedent[i]` has bit `l` set when label `l` of input `i` takes part in
/// the rule. Labels within one variable are OR-ed (max); a variable with no
/// bits set does not constrain the rule. `consequent` is `[p0, p1, .., pn]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    antecedent: Vec<u64>,
    consequent: Vec<f64>,
}

impl Rule {
    pub fn new(antecedent: Vec<u64>, consequent: Vec<f64>) -> Result<Self> {
        if antecedent.iter().all(|&m| m == 0) {
            return Err(Error::InvalidParameter(
                "rule antecedent selects no label in any variable".into(),
            ));
        }
        if consequent.len() != antecedent.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: antecedent.len() + 1,
                actual: consequent.len(),
            });
        }
        Ok(Self { antecedent, consequent })
    }

    pub fn antecedent(&self) -> &[u64] {
        &self.antecedent
    }

    pub fn consequent(&self) -> &[f64] {
        &self.consequent
    }

    pub fn consequent_mut(&mut self) -> &mut [f64] {
        &mut self.consequent
    }

    pub fn n_inputs(&self) -> usize {
        self.antecedent.len()
    }

    /// Consequent value `p0 + sum_i p_i x_i`.
    pub fn consequent_at(&self, x: &[f64]) -> f64 {
        self.consequent[1..]
            .iter()
            .zip(x)
            .fold(self.consequent[0], |acc, (p, xi)| acc + p * xi)
    }
}

/// Ordered rules plus a parallel selection mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleBase {
    rules: Vec<Rule>,
    active: Vec<bool>,
}

impl RuleBase {
    pub fn new(rules: Vec<Rule>, active: Vec<bool>) -> Result<Self> {
        if rules.len() != active.len() {
            return Err(Error::DimensionMismatch {
                expected: rules.len(),
                actual: active.len(),
            });
        }
        if !active.iter().any(|&a| a) {
            return Err(Error::NoActiveRules);
        }
        if let Some(first) = rules.first() {
            if let Some(bad) = rules.iter().find(|r| r.n_inputs() != first.n_inputs()) {
                return Err(Error::DimensionMismatch {
                    expected: first.n_inputs(),
                    actual: bad.n_inputs(),
                });
            }
        }
        Ok(Self { rules, active })
    }

    /// Rule base with every rule selected.
    pub fn all_active(rules: Vec<Rule>) -> Result<Self> {
        let active = vec![true; rules.len()];
        Self::new(rules, active)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rules_mut(&mut self) -> &mut [Rule] {
        &mut self.rules
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn is_active(&self, k: usize) -> bool {
        self.active[k]
    }

    /// Replaces the selection mask. At least one bit must remain set.
    pub fn set_active(&mut self, active: Vec<bool>) -> Result<()> {
        if active.len() != self.rules.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rules.len(),
                actual: active.len(),
            });
        }
        if !active.iter().any(|&a| a) {
            return Err(Error::NoActiveRules);
        }
        self.active = active;
        Ok(())
    }

    pub fn count_active(&self) -> usize {
        count_active(&self.active)
    }
}

/// Number of set bits in a rule-selection mask.
pub fn count_active(active: &[bool]) -> usize {
    active.iter().filter(|&&a| a).count()
}

/// One rule per element of the Cartesian product of labels, all active, with
/// zero consequents. Variable 0 varies slowest.
pub fn grid_partition_init(n_inputs: usize, mf_per_input: usize) -> Result<RuleBase> {
    grid_partition_init_capped(n_inputs, mf_per_input, DEFAULT_RULE_CAP)
}

pub fn grid_partition_init_capped(
    n_inputs: usize,
    mf_per_input: usize,
    cap: usize,
) -> Result<RuleBase> {
    if n_inputs == 0 || mf_per_input == 0 {
        return Err(Error::InvalidParameter(
            "grid partition needs at least one input and one MF per input".into(),
        ));
    }
    if mf_per_input > MAX_LABELS {
        return Err(Error::InvalidParameter(format!(
            "at most {MAX_LABELS} MF per input are supported"
        )));
    }
    let count = (mf_per_input as u128).checked_pow(n_inputs as u32).unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(Error::SizeOverflow { count, cap });
    }
    let count = count as usize;
    let mut rules = Vec::with_capacity(count);
    let mut labels = vec![0usize; n_inputs];
    for _ in 0..count {
        let antecedent = labels.iter().map(|&l| 1u64 << l).collect();
        rules.push(Rule::new(antecedent, vec![0.0; n_inputs + 1])?);
        for digit in labels.iter_mut().rev() {
            *digit += 1;
            if *digit < mf_per_input {
                break;
            }
            *digit = 0;
        }
    }
    RuleBase::all_active(rules)
}

/// Evenly spaced membership functions over `[lo, hi]` with neighbours
/// crossing at membership 0.5.
pub fn grid_partition_mfs(
    kind: MfKind,
    mf_per_input: usize,
    lo: f64,
    hi: f64,
) -> Result<Vec<MembershipFunction>> {
    if !(hi > lo) || mf_per_input == 0 {
        return Err(Error::InvalidParameter(format!(
            "cannot partition [{lo}, {hi}] into {mf_per_input} labels"
        )));
    }
    let (spacing, centers): (f64, Vec<f64>) = if mf_per_input == 1 {
        (hi - lo, vec![0.5 * (lo + hi)])
    } else {
        let step = (hi - lo) / (mf_per_input - 1) as f64;
        (step, (0..mf_per_input).map(|l| lo + step * l as f64).collect())
    };
    centers
        .into_iter()
        .map(|c| match kind {
            MfKind::Gaussian => {
                let s = spacing / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
                MembershipFunction::from_params(kind, &[c, s])
            }
            MfKind::Bell => MembershipFunction::from_params(kind, &[0.5 * spacing, 2.0, c]),
        })
        .collect()
}

/// A complete Takagi-Sugeno system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TskModel {
    partitions: Vec<Vec<MembershipFunction>>,
    rulebase: RuleBase,
    tnorm: TNormParam,
}

impl TskModel {
    pub fn new(
        partitions: Vec<Vec<MembershipFunction>>,
        rulebase: RuleBase,
        tnorm: TNormParam,
    ) -> Result<Self> {
        let model = Self { partitions, rulebase, tnorm };
        model.validate()?;
        Ok(model)
    }

    /// Grid-partitioned model over the given per-input ranges, consequents
    /// zero and T-norm exponent 1.
    pub fn grid(kind: MfKind, mf_per_input: usize, ranges: &[(f64, f64)]) -> Result<Self> {
        let partitions = ranges
            .iter()
            .map(|&(lo, hi)| grid_partition_mfs(kind, mf_per_input, lo, hi))
            .collect::<Result<Vec<_>>>()?;
        let rulebase = grid_partition_init(ranges.len(), mf_per_input)?;
        Self::new(partitions, rulebase, TNormParam::new(1.0)?)
    }

    fn validate(&self) -> Result<()> {
        for rule in self.rulebase.rules() {
            if rule.n_inputs() != self.partitions.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.partitions.len(),
                    actual: rule.n_inputs(),
                });
            }
            for (i, (&mask, part)) in rule.antecedent().iter().zip(&self.partitions).enumerate() {
                if part.len() > MAX_LABELS || (part.len() < MAX_LABELS && mask >> part.len() != 0) {
                    return Err(Error::InvalidParameter(format!(
                        "antecedent mask {mask:#b} invalid for input {i} with {} labels",
                        part.len()
                    )));
                }
            }
        }
        if self.rulebase.count_active() == 0 {
            return Err(Error::NoActiveRules);
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.partitions.len()
    }

    pub fn partitions(&self) -> &[Vec<MembershipFunction>] {
        &self.partitions
    }

    pub fn partitions_mut(&mut self) -> &mut [Vec<MembershipFunction>] {
        &mut self.partitions
    }

    pub fn rulebase(&self) -> &RuleBase {
        &self.rulebase
    }

    pub fn rulebase_mut(&mut self) -> &mut RuleBase {
        &mut self.rulebase
    }

    pub fn tnorm(&self) -> TNormParam {
        self.tnorm
    }

    pub fn set_tnorm(&mut self, p: TNormParam) {
        self.tnorm = p;
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Memberships of `x` in every label, one row per input.
    pub fn memberships(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(x)?;
        Ok(self
            .partitions
            .iter()
            .zip(x)
            .map(|(part, &xi)| part.iter().map(|mf| mf.eval(xi)).collect())
            .collect())
    }

    /// Antecedent truth degree of `rule` at `x`.
    pub fn firing_strength(&self, rule: &Rule, x: &[f64]) -> Result<f64> {
        let memb = self.memberships(x)?;
        if rule.n_inputs() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                actual: rule.n_inputs(),
            });
        }
        Ok(fold_firing(rule.antecedent(), &memb, self.tnorm))
    }

    /// Weighted-average output over the active rules.
    pub fn infer(&self, x: &[f64]) -> Result<f64> {
        let memb = self.memberships(x)?;
        let mut num = 0.0;
        let mut den = 0.0;
        let mut plain = 0.0;
        let mut n_active = 0usize;
        for (rule, _) in self.active_rules() {
            let w = fold_firing(rule.antecedent(), &memb, self.tnorm);
            let f = rule.consequent_at(x);
            num += w * f;
            den += w;
            plain += f;
            n_active += 1;
        }
        if n_active == 0 {
            return Err(Error::NoActiveRules);
        }
        if den < FIRING_EPSILON {
            Ok(plain / n_active as f64)
        } else {
            Ok(num / den)
        }
    }

    /// Active rules paired with their index in the rule base.
    pub fn active_rules(&self) -> impl Iterator<Item = (&Rule, usize)> {
        self.rulebase
            .rules()
            .iter()
            .zip(self.rulebase.active())
            .enumerate()
            .filter(|(_, (_, &a))| a)
            .map(|(k, (r, _))| (r, k))
    }

    /// Human-readable rule listing, one rule per line.
    pub fn export_rules(&self) -> String {
        let mut out = String::new();
        for (rule, &active) in self.rulebase.rules().iter().zip(self.rulebase.active()) {
            let clauses: Vec<String> = rule
                .antecedent()
                .iter()
                .enumerate()
                .filter(|(_, &m)| m != 0)
                .map(|(i, &m)| {
                    let labels: Vec<String> = (0..MAX_LABELS)
                        .filter(|l| m >> l & 1 == 1)
                        .map(|l| format!("A{}", l + 1))
                        .collect();
                    format!("x{} IS {{{}}}", i + 1, labels.join(","))
                })
                .collect();
            let c = rule.consequent();
            let _ = write!(out, "IF {} THEN y = {}", clauses.join(" AND "), c[0]);
            for (i, p) in c[1..].iter().enumerate() {
                let _ = write!(out, " + {}*x{}", p, i + 1);
            }
            let _ = writeln!(out, " ; active={}", u8::from(active));
        }
        out
    }
}

/// Max within each variable, T-norm folded left to right across variables.
pub(crate) fn fold_firing(masks: &[u64], memb: &[Vec<f64>], p: TNormParam) -> f64 {
    let mut acc: Option<f64> = None;
    for (&mask, row) in masks.iter().zip(memb) {
        if mask == 0 {
            continue;
        }
        let mu = row
            .iter()
            .enumerate()
            .filter(|(l, _)| mask >> l & 1 == 1)
            .map(|(_, &m)| m)
            .fold(0.0, f64::max);
        acc = Some(match acc {
            None => mu,
            Some(a) => tnorm_ss(a, mu, p),
        });
    }
    acc.unwrap_or(1.0)
}
