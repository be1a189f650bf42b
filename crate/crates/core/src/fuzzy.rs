//! Membership functions and the parameterised Schweizer-Sklar T-norm.
//!
//! Every operator here also exposes its analytic partial derivatives so the
//! local search can push gradients through firing strengths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generalised bell curve `1 / (1 + |(x - r) / p|^(2q))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellMf {
    p: f64,
    q: f64,
    r: f64,
}

impl BellMf {
    pub fn new(p: f64, q: f64, r: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) || !(q > 0.0 && q.is_finite()) || !r.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bell MF requires p > 0 and q > 0, got p={p}, q={q}, r={r}"
            )));
        }
        Ok(Self { p, q, r })
    }

    pub fn width(&self) -> f64 {
        self.p
    }

    pub fn slope(&self) -> f64 {
        self.q
    }

    pub fn center(&self) -> f64 {
        self.r
    }

    pub fn eval(&self, x: f64) -> f64 {
        let z = (x - self.r) / self.p;
        if z == 0.0 {
            return 1.0;
        }
        1.0 / (1.0 + z.abs().powf(2.0 * self.q))
    }

    /// Partials with respect to `(p, q, r)`.
    pub fn gradient(&self, x: f64) -> [f64; 3] {
        let d = x - self.r;
        if d == 0.0 {
            return [0.0; 3];
        }
        let z = d / self.p;
        let u = z.abs().powf(2.0 * self.q);
        if !u.is_finite() {
            return [0.0; 3];
        }
        let f = 1.0 / (1.0 + u);
        let df_du = -f * f;
        let du_dp = -2.0 * self.q * u / self.p;
        let du_dq = 2.0 * u * z.abs().ln();
        let du_dr = -2.0 * self.q * u / d;
        [df_du * du_dp, df_du * du_dq, df_du * du_dr]
    }
}

/// Gaussian curve `exp(-(x - c)^2 / (2 s^2))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMf {
    c: f64,
    s: f64,
}

impl GaussianMf {
    pub fn new(c: f64, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian MF requires s > 0, got c={c}, s={s}"
            )));
        }
        Ok(Self { c, s })
    }

    pub fn center(&self) -> f64 {
        self.c
    }

    pub fn spread(&self) -> f64 {
        self.s
    }

    pub fn eval(&self, x: f64) -> f64 {
        let d = x - self.c;
        (-d * d / (2.0 * self.s * self.s)).exp()
    }

    /// Partials with respect to `(c, s)`.
    pub fn gradient(&self, x: f64) -> [f64; 2] {
        let d = x - self.c;
        let s2 = self.s * self.s;
        let f = (-d * d / (2.0 * s2)).exp();
        [f * d / s2, f * d * d / (s2 * self.s)]
    }
}

/// The two parameterised families a partition can be built from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MfKind {
    Bell,
    #[default]
    Gaussian,
}

impl MfKind {
    pub fn n_params(self) -> usize {
        match self {
            MfKind::Bell => 3,
            MfKind::Gaussian => 2,
        }
    }

    /// Index of each strictly positive shape parameter within the parameter
    /// vector (bell: p and q, gaussian: s).
    pub fn positive_params(self) -> &'static [usize] {
        match self {
            MfKind::Bell => &[0, 1],
            MfKind::Gaussian => &[1],
        }
    }

    /// Index of the center parameter.
    pub fn center_param(self) -> usize {
        match self {
            MfKind::Bell => 2,
            MfKind::Gaussian => 0,
        }
    }
}

impl std::str::FromStr for MfKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bell" => Ok(MfKind::Bell),
            "gaussian" | "gauss" => Ok(MfKind::Gaussian),
            other => Err(Error::InvalidParameter(format!("unknown MF kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for MfKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MfKind::Bell => "bell",
            MfKind::Gaussian => "gaussian",
        })
    }
}

/// A membership function from either family behind one interface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MembershipFunction {
    Bell(BellMf),
    Gaussian(GaussianMf),
}

impl MembershipFunction {
    /// Builds a function of `kind` from its parameter slice, laid out as
    /// `(p, q, r)` for bell and `(c, s)` for gaussian.
    pub fn from_params(kind: MfKind, params: &[f64]) -> Result<Self> {
        if params.len() != kind.n_params() {
            return Err(Error::DimensionMismatch {
                expected: kind.n_params(),
                actual: params.len(),
            });
        }
        Ok(match kind {
            MfKind::Bell => Self::Bell(BellMf::new(params[0], params[1], params[2])?),
            MfKind::Gaussian => Self::Gaussian(GaussianMf::new(params[0], params[1])?),
        })
    }

    pub fn kind(&self) -> MfKind {
        match self {
            Self::Bell(_) => MfKind::Bell,
            Self::Gaussian(_) => MfKind::Gaussian,
        }
    }

    pub fn n_params(&self) -> usize {
        self.kind().n_params()
    }

    /// Parameters in the same order `from_params` expects. Unused trailing
    /// slots are zero.
    pub fn params(&self) -> [f64; 3] {
        match self {
            Self::Bell(b) => [b.p, b.q, b.r],
            Self::Gaussian(g) => [g.c, g.s, 0.0],
        }
    }

    pub fn center(&self) -> f64 {
        match self {
            Self::Bell(b) => b.r,
            Self::Gaussian(g) => g.c,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Bell(b) => b.eval(x),
            Self::Gaussian(g) => g.eval(x),
        }
    }

    /// Partials in parameter order; slots past `n_params()` are zero.
    pub fn gradient(&self, x: f64) -> [f64; 3] {
        match self {
            Self::Bell(b) => b.gradient(x),
            Self::Gaussian(g) => {
                let [dc, ds] = g.gradient(x);
                [dc, ds, 0.0]
            }
        }
    }
}

/// Free-function form of [`BellMf::eval`] that validates its parameters.
pub fn eval_bell(p: f64, q: f64, r: f64, x: f64) -> Result<f64> {
    Ok(BellMf::new(p, q, r)?.eval(x))
}

/// Free-function form of [`GaussianMf::eval`] that validates its parameters.
pub fn eval_gaussian(c: f64, s: f64, x: f64) -> Result<f64> {
    Ok(GaussianMf::new(c, s)?.eval(x))
}

/// Schweizer-Sklar exponent, strictly positive.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TNormParam(f64);

impl TNormParam {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p.is_finite() {
            Ok(Self(p))
        } else {
            Err(Error::InvalidParameter(format!(
                "T-norm exponent must be positive, got {p}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for TNormParam {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<TNormParam> for f64 {
    fn from(p: TNormParam) -> f64 {
        p.0
    }
}

/// Schweizer-Sklar T-norm `[max{0, a^-p + b^-p - 1}]^(-1/p)`.
///
/// Evaluated as `m * (1 + (m/M)^p - m^p)^(-1/p)` with `m = min(a, b)` and
/// `M = max(a, b)`, which never forms `a^-p` and so stays finite for large
/// `p`. A zero argument yields exactly zero.
pub fn tnorm_ss(a: f64, b: f64, p: TNormParam) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    let p = p.0;
    let (m, big) = if a <= b { (a, b) } else { (b, a) };
    let lm = m.ln();
    let d = (p * (lm - big.ln())).exp_m1() - (p * lm).exp_m1();
    m * (-d.ln_1p() / p).exp()
}

/// Value and partials of the T-norm at `(a, b, p)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TNormGrad {
    pub value: f64,
    pub d_a: f64,
    pub d_b: f64,
    pub d_p: f64,
}

/// [`tnorm_ss`] together with its partial derivatives.
pub fn tnorm_ss_grad(a: f64, b: f64, p: TNormParam) -> TNormGrad {
    if a <= 0.0 || b <= 0.0 {
        return TNormGrad { value: 0.0, d_a: 0.0, d_b: 0.0, d_p: 0.0 };
    }
    let step = tnorm_step(a, a.ln(), b, b.ln(), p.0);
    TNormGrad { value: step.value, d_a: step.d_a, d_b: step.d_b, d_p: step.d_p }
}

/// T-norm step on arguments whose logarithms are already known, returning
/// the log of the result as well so folds can carry it forward.
#[derive(Clone, Copy, Debug)]
pub(crate) struct TNormStep {
    pub value: f64,
    pub ln_value: f64,
    pub d_a: f64,
    pub d_b: f64,
    pub d_p: f64,
}

/// Requires `a, b > 0`.
#[inline]
pub(crate) fn tnorm_step(a: f64, ln_a: f64, b: f64, ln_b: f64, p: f64) -> TNormStep {
    let a_is_min = ln_a <= ln_b;
    let (lm, lbig) = if a_is_min { (ln_a, ln_b) } else { (ln_b, ln_a) };
    // ratio = (m/M)^p, mp = m^p, inner = 1 + ratio - mp >= 1
    let ratio_m1 = (p * (lm - lbig)).exp_m1();
    let mp_m1 = (p * lm).exp_m1();
    let d = ratio_m1 - mp_m1;
    let inner = 1.0 + d;
    let log_inner = d.ln_1p();
    let ln_value = lm - log_inner / p;
    let value = ln_value.exp();
    let ratio = 1.0 + ratio_m1;
    let mp = 1.0 + mp_m1;

    // dT/da = (T/a) (m/a)^p / inner, (m/a)^p is 1 for the smaller argument
    let (fa, fb) = if a_is_min { (1.0, ratio) } else { (ratio, 1.0) };
    let d_a = value / a * fa / inner;
    let d_b = value / b * fb / inner;
    let num = ratio * (lbig - lm) + mp * lm;
    let d_p = value * (log_inner / (p * p) + num / (p * inner));
    TNormStep { value, ln_value, d_a, d_b, d_p }
}
