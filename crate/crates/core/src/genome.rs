//! Layered chromosome codec.
//!
//! Real genes are laid out as: membership-function parameters (input-major,
//! label-minor, parameter innermost), consequent angles in degrees
//! (rule-major), the T-norm exponent, then learning rate and momentum.
//! Rule-selection bits live in a separate binary segment, one per rule. The
//! inference type is fixed to Takagi-Sugeno and carries no gene.

use std::ops::Range;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::{MembershipFunction, MfKind, TNormParam};
use crate::inference::{grid_partition_init, Rule, RuleBase, TskModel};
use crate::local_search::{LearnParams, TNORM_RANGE};

/// Consequent angles are confined to `(-ANGLE_LIMIT, ANGLE_LIMIT)` degrees.
pub const ANGLE_LIMIT: f64 = 89.9;

/// Domain `[lo, hi]` of one real gene.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneBounds {
    pub lo: f64,
    pub hi: f64,
}

impl GeneBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!("gene bounds need lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.lo..=self.hi).contains(&v)
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// `arctan(coef)` in degrees.
pub fn angular_encode(coef: f64) -> f64 {
    coef.atan().to_degrees()
}

/// `tan(alpha)` for `alpha` in degrees, strictly inside `(-90, 90)`.
pub fn angular_decode(alpha: f64) -> Result<f64> {
    if !(alpha > -90.0 && alpha < 90.0) {
        return Err(Error::OutOfRange(alpha));
    }
    Ok(alpha.to_radians().tan())
}

/// Inference type tag. Only Takagi-Sugeno is built, so it is not evolved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum FisType {
    #[default]
    TakagiSugeno,
}

/// Search-space settings for the membership-function genes, relative to
/// each input's range `R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsConfig {
    /// Centers may move this fraction of `R` beyond either end of the range.
    pub center_margin: f64,
    /// Widths and spreads live in `[min_width * R, max_width * R]`.
    pub min_width: f64,
    pub max_width: f64,
    /// Bell slope exponent domain.
    pub slope: (f64, f64),
    pub rate: (f64, f64),
    pub momentum: (f64, f64),
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            center_margin: 0.5,
            min_width: 0.05,
            max_width: 1.0,
            slope: (0.5, 5.0),
            rate: (0.001, 0.5),
            momentum: (0.0, 0.95),
        }
    }
}

/// Segment boundaries of a chromosome.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub mf: Range<usize>,
    pub consequent: Range<usize>,
    pub tnorm: usize,
    pub learning: Range<usize>,
    pub n_real: usize,
    pub n_bits: usize,
}

impl Layout {
    /// Length of the first layer (MF shapes plus consequents).
    pub fn layer1_len(&self) -> usize {
        self.consequent.end - self.mf.start
    }
}

/// Fixed model topology plus per-gene bounds shared by every chromosome of
/// a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    kind: MfKind,
    mf_per_input: usize,
    input_ranges: Vec<(f64, f64)>,
    antecedents: Vec<Vec<u64>>,
    bounds: Arc<Vec<GeneBounds>>,
    layout: Layout,
}

impl Template {
    /// Grid-partitioned topology over `input_ranges`.
    pub fn grid(
        kind: MfKind,
        mf_per_input: usize,
        input_ranges: &[(f64, f64)],
        cfg: &BoundsConfig,
    ) -> Result<Self> {
        let n_inputs = input_ranges.len();
        let rb = grid_partition_init(n_inputs, mf_per_input)?;
        let antecedents: Vec<Vec<u64>> = rb.rules().iter().map(|r| r.antecedent().to_vec()).collect();

        let mut bounds = Vec::new();
        for &(lo, hi) in input_ranges {
            let range = hi - lo;
            if !(range > 0.0) {
                return Err(Error::InvalidParameter(format!("input range [{lo}, {hi}] is empty")));
            }
            let center = GeneBounds::new(lo - cfg.center_margin * range, hi + cfg.center_margin * range)?;
            let width = GeneBounds::new(cfg.min_width * range, cfg.max_width * range)?;
            for _ in 0..mf_per_input {
                match kind {
                    MfKind::Gaussian => bounds.extend([center, width]),
                    MfKind::Bell => bounds.extend([width, GeneBounds::new(cfg.slope.0, cfg.slope.1)?, center]),
                }
            }
        }
        let mf_end = bounds.len();
        let angle = GeneBounds::new(-ANGLE_LIMIT, ANGLE_LIMIT)?;
        bounds.extend(std::iter::repeat(angle).take(antecedents.len() * (n_inputs + 1)));
        let cons_end = bounds.len();
        bounds.push(GeneBounds::new(TNORM_RANGE.0, TNORM_RANGE.1)?);
        bounds.push(GeneBounds::new(cfg.rate.0, cfg.rate.1)?);
        bounds.push(GeneBounds::new(cfg.momentum.0, cfg.momentum.1)?);

        let layout = Layout {
            mf: 0..mf_end,
            consequent: mf_end..cons_end,
            tnorm: cons_end,
            learning: cons_end + 1..cons_end + 3,
            n_real: bounds.len(),
            n_bits: antecedents.len(),
        };
        Ok(Self {
            kind,
            mf_per_input,
            input_ranges: input_ranges.to_vec(),
            antecedents,
            bounds: Arc::new(bounds),
            layout,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn bounds(&self) -> &[GeneBounds] {
        &self.bounds
    }

    pub fn kind(&self) -> MfKind {
        self.kind
    }

    pub fn mf_per_input(&self) -> usize {
        self.mf_per_input
    }

    pub fn n_inputs(&self) -> usize {
        self.input_ranges.len()
    }

    pub fn n_rules(&self) -> usize {
        self.antecedents.len()
    }

    pub fn fis_type(&self) -> FisType {
        FisType::TakagiSugeno
    }

    /// Evenly partitioned starting model: grid MFs, zero consequents, all
    /// rules active, T-norm exponent 1.
    pub fn grid_model(&self) -> Result<TskModel> {
        TskModel::grid(self.kind, self.mf_per_input, &self.input_ranges)
    }

    /// A random chromosome.
    ///
    /// MF genes start at their grid-partition values displaced by up to
    /// `mf_jitter` of their bound width, consequent angles are uniform in
    /// `(-consequent_deg, consequent_deg)`, the T-norm exponent is
    /// log-uniform over its bounds and learning genes uniform. Every rule
    /// starts selected.
    pub fn random_chromosome<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        mf_jitter: f64,
        consequent_deg: f64,
    ) -> Result<Chromosome> {
        let grid = self.grid_model()?;
        let l = &self.layout;
        let mut real = Vec::with_capacity(l.n_real);
        for mf in grid.partitions().iter().flatten() {
            real.extend_from_slice(&mf.params()[..mf.n_params()]);
        }
        for (g, b) in real.iter_mut().zip(self.bounds.iter()) {
            let j = mf_jitter * b.width();
            *g = b.clamp(*g + if j > 0.0 { rng.gen_range(-j..=j) } else { 0.0 });
        }
        let a = consequent_deg.min(ANGLE_LIMIT);
        for _ in l.consequent.clone() {
            real.push(if a > 0.0 { rng.gen_range(-a..=a) } else { 0.0 });
        }
        let tb = self.bounds[l.tnorm];
        real.push(rng.gen_range(tb.lo.ln()..=tb.hi.ln()).exp().clamp(tb.lo, tb.hi));
        for i in l.learning.clone() {
            let b = self.bounds[i];
            real.push(rng.gen_range(b.lo..=b.hi));
        }
        Ok(Chromosome {
            real,
            bits: vec![true; l.n_bits],
            bounds: Arc::clone(&self.bounds),
        })
    }

    fn check(&self, chrom: &Chromosome) -> Result<()> {
        if chrom.real.len() != self.layout.n_real || chrom.bits.len() != self.layout.n_bits {
            return Err(Error::LayoutMismatch(format!(
                "expected {} real + {} binary genes, got {} + {}",
                self.layout.n_real,
                self.layout.n_bits,
                chrom.real.len(),
                chrom.bits.len()
            )));
        }
        Ok(())
    }
}

/// Flat real and binary gene vectors with per-gene bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct Chromosome {
    real: Vec<f64>,
    bits: Vec<bool>,
    bounds: Arc<Vec<GeneBounds>>,
}

impl Chromosome {
    /// Assembles a chromosome, clamping real genes into `bounds`.
    pub fn new(mut real: Vec<f64>, bits: Vec<bool>, bounds: Arc<Vec<GeneBounds>>) -> Result<Self> {
        if real.len() != bounds.len() {
            return Err(Error::LayoutMismatch(format!(
                "{} real genes but {} bounds",
                real.len(),
                bounds.len()
            )));
        }
        for (g, b) in real.iter_mut().zip(bounds.iter()) {
            *g = b.clamp(*g);
        }
        Ok(Self { real, bits, bounds })
    }

    pub fn real(&self) -> &[f64] {
        &self.real
    }

    pub fn real_mut(&mut self) -> &mut [f64] {
        &mut self.real
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn bounds(&self) -> &[GeneBounds] {
        &self.bounds
    }

    pub(crate) fn shared_bounds(&self) -> &Arc<Vec<GeneBounds>> {
        &self.bounds
    }

    pub fn same_layout(&self, other: &Chromosome) -> bool {
        self.real.len() == other.real.len()
            && self.bits.len() == other.bits.len()
            && (Arc::ptr_eq(&self.bounds, &other.bounds) || self.bounds == other.bounds)
    }

    pub fn layer1_mf<'a>(&'a self, layout: &Layout) -> &'a [f64] {
        &self.real[layout.mf.clone()]
    }

    pub fn layer1_consequent<'a>(&'a self, layout: &Layout) -> &'a [f64] {
        &self.real[layout.consequent.clone()]
    }

    pub fn layer2_rules(&self) -> &[bool] {
        &self.bits
    }

    pub fn layer3_tnorm(&self, layout: &Layout) -> f64 {
        self.real[layout.tnorm]
    }

    pub fn layer4_learning<'a>(&'a self, layout: &Layout) -> &'a [f64] {
        &self.real[layout.learning.clone()]
    }

    pub fn in_bounds(&self) -> bool {
        self.real.iter().zip(self.bounds.iter()).all(|(g, b)| b.contains(*g))
    }

    /// Sets the last selection bit when none is set.
    pub fn repair(&mut self) {
        if !self.bits.iter().any(|&b| b) {
            if let Some(last) = self.bits.last_mut() {
                *last = true;
            }
        }
    }
}

/// A decoded individual: model, learning hyperparameters and, once
/// evaluated, its training RMSE.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvoNfCandidate {
    pub model: TskModel,
    pub learn: LearnParams,
    pub fitness: Option<f64>,
}

/// Writes `candidate` into the template's gene layout. Out-of-bounds values
/// are clamped to the nearest bound.
pub fn encode(candidate: &EvoNfCandidate, template: &Template) -> Result<Chromosome> {
    let model = &candidate.model;
    let l = &template.layout;
    if model.n_inputs() != template.n_inputs()
        || model.rulebase().len() != template.n_rules()
        || model.partitions().iter().any(|p| p.len() != template.mf_per_input)
        || model.partitions().iter().flatten().any(|mf| mf.kind() != template.kind)
    {
        return Err(Error::LayoutMismatch("candidate topology differs from template".into()));
    }
    if model.rulebase().rules().iter().zip(&template.antecedents).any(|(r, a)| r.antecedent() != a.as_slice()) {
        return Err(Error::LayoutMismatch("candidate antecedents differ from template".into()));
    }
    let mut real = Vec::with_capacity(l.n_real);
    for mf in model.partitions().iter().flatten() {
        real.extend_from_slice(&mf.params()[..mf.n_params()]);
    }
    for rule in model.rulebase().rules() {
        real.extend(rule.consequent().iter().map(|&c| angular_encode(c)));
    }
    real.push(model.tnorm().get());
    real.push(candidate.learn.rate);
    real.push(candidate.learn.momentum);
    Chromosome::new(real, model.rulebase().active().to_vec(), Arc::clone(&template.bounds))
}

/// Rebuilds a candidate from `chrom`. Real genes are clamped into bounds and
/// an all-zero selection segment is repaired by activating the last rule.
pub fn decode(chrom: &Chromosome, template: &Template) -> Result<EvoNfCandidate> {
    template.check(chrom)?;
    let l = &template.layout;
    let genes: Vec<f64> = chrom
        .real
        .iter()
        .zip(template.bounds.iter())
        .map(|(g, b)| b.clamp(*g))
        .collect();

    let np = template.kind.n_params();
    let mut partitions = Vec::with_capacity(template.n_inputs());
    let mut it = genes[l.mf.clone()].chunks_exact(np);
    for _ in 0..template.n_inputs() {
        let part = (0..template.mf_per_input)
            .map(|_| MembershipFunction::from_params(template.kind, it.next().unwrap_or_default()))
            .collect::<Result<Vec<_>>>()?;
        partitions.push(part);
    }

    let width = template.n_inputs() + 1;
    let rules = template
        .antecedents
        .iter()
        .zip(genes[l.consequent.clone()].chunks_exact(width))
        .map(|(ante, angles)| {
            let coefs = angles.iter().map(|&a| angular_decode(a)).collect::<Result<Vec<_>>>()?;
            Rule::new(ante.clone(), coefs)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut active = chrom.bits.clone();
    if !active.iter().any(|&b| b) {
        if let Some(last) = active.last_mut() {
            *last = true;
        }
    }
    let rulebase = RuleBase::new(rules, active)?;
    let model = TskModel::new(partitions, rulebase, TNormParam::new(genes[l.tnorm])?)?;
    let learn = LearnParams::new(genes[l.learning.start], genes[l.learning.start + 1])?;
    Ok(EvoNfCandidate { model, learn, fitness: None })
}
