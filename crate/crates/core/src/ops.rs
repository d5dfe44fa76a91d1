//! Parametric quasilinear operators `a(t, z) = e(t, |z|) z` and source terms.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Coefficient `h(t)` of the weighted family, defined for `t >= 0` and held
/// at `h(0)` for negative arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weight {
    Constant { c: f64 },
    /// `c0 + c1 t`, optionally frozen beyond `cap` by a C¹ quadratic blend on
    /// `[cap, cap + 1]`.
    Affine {
        c0: f64,
        c1: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<f64>,
    },
    /// `c0 + c1 t / (1 + t)`.
    Saturating { c0: f64, c1: f64 },
}

impl Weight {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Weight::Constant { c } => c > 0.0,
            Weight::Affine { c0, c1, cap } => c0 > 0.0 && c1 >= 0.0 && cap.map_or(true, |m| m >= 0.0),
            Weight::Saturating { c0, c1 } => c0 > 0.0 && c1 >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("weight must be positive and nondecreasing: {self:?}"))
        }
    }

    /// `(h(t), h'(t))`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let t = t.max(0.0);
        match *self {
            Weight::Constant { c } => (c, 0.0),
            Weight::Affine { c0, c1, cap } => match cap {
                Some(m) if t > m => {
                    let x = (t - m).min(1.0);
                    (c0 + c1 * (m + x - 0.5 * x * x), c1 * (1.0 - x))
                }
                _ => (c0 + c1 * t, c1),
            },
            Weight::Saturating { c0, c1 } => (c0 + c1 * t / (1.0 + t), c1 / ((1.0 + t) * (1.0 + t))),
        }
    }

    pub fn inf(&self) -> f64 {
        self.eval(0.0).0
    }

    /// Supremum over `t >= 0`, `None` when unbounded.
    pub fn sup(&self) -> Option<f64> {
        match *self {
            Weight::Constant { c } => Some(c),
            Weight::Affine { c0, c1, cap } => {
                if c1 == 0.0 {
                    Some(c0)
                } else {
                    cap.map(|m| c0 + c1 * (m + 0.5))
                }
            }
            Weight::Saturating { c0, c1 } => Some(c0 + c1),
        }
    }

    /// Supremum over `[0, t]`.
    pub fn sup_on(&self, t: f64) -> f64 {
        self.eval(t).0
    }
}

/// Built-in families of `e(t, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `e = κ s^{p-2}`.
    PurePower {
        p: f64,
        #[serde(default = "one")]
        kappa: f64,
    },
    /// `e = h(t) s^{p-2}`.
    WeightedPower { p: f64, weight: Weight },
    /// `s e(s) = s^{q0-1}` for `s <= 1` and `s^{q-1}` for `s >= 1`.
    TwoRegime { q0: f64, q: f64 },
}

fn one() -> f64 {
    1.0
}

/// Structural constants of an operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub p: f64,
    pub q: f64,
    pub q0: f64,
    pub c_s: f64,
    pub c_lower: f64,
    pub c_upper: f64,
    pub mu_h6: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub dim: usize,
    #[serde(flatten)]
    pub family: Family,
    /// Explicit constants; derived from the family when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<Constants>,
    /// Evaluate the coefficient at `t + t_shift`.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub t_shift: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

/// Outcome of sampling the structural hypotheses on a lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub flux_increasing: bool,
    pub h4_small: bool,
    pub h4_lower: bool,
    pub h4_upper: bool,
    pub h6: bool,
}

impl HypothesisReport {
    pub fn all(&self) -> bool {
        self.flux_increasing && self.h4_small && self.h4_lower && self.h4_upper && self.h6
    }
}

impl OperatorSpec {
    pub fn p_laplacian(dim: usize, p: f64) -> Self {
        Self::new(dim, Family::PurePower { p, kappa: 1.0 })
    }

    pub fn new(dim: usize, family: Family) -> Self {
        Self { dim, family, constants: None, t_shift: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return invalid("dimension must be at least 1");
        }
        match &self.family {
            Family::PurePower { p, kappa } => {
                if !(*p > 1.0) || !(*kappa > 0.0) {
                    return invalid(format!("pure power needs p > 1 and kappa > 0, got {p}, {kappa}"));
                }
            }
            Family::WeightedPower { p, weight } => {
                if !(*p > 1.0) {
                    return invalid(format!("weighted power needs p > 1, got {p}"));
                }
                weight.validate()?;
            }
            Family::TwoRegime { q0, q } => {
                if !(*q0 > 1.0) || !(*q > 1.0) {
                    return invalid(format!("two-regime needs q0, q > 1, got {q0}, {q}"));
                }
            }
        }
        if let Some(c) = &self.constants {
            if !(c.p >= c.q && c.q > 1.0 && c.q0 > 1.0) {
                return invalid("constants need p >= q > 1 and q0 > 1");
            }
            if !(c.c_s > 0.0 && c.c_lower > 0.0 && c.c_upper > 0.0) {
                return invalid("constants C_s, C_*, C^* must be positive");
            }
            if !(0.0..2.0).contains(&c.mu_h6) {
                return invalid("mu_H6 must lie in [0, 2)");
            }
        }
        Ok(())
    }

    /// Growth exponent `p` of the family.
    pub fn p(&self) -> f64 {
        match &self.family {
            Family::PurePower { p, .. } | Family::WeightedPower { p, .. } => *p,
            Family::TwoRegime { q, .. } => *q,
        }
    }

    pub fn constants(&self) -> Result<Constants> {
        if let Some(c) = self.constants {
            return Ok(c);
        }
        let h6 = |p: f64| if p > 2.0 { (p - 2.0) / (p - 1.0) } else { 0.0 };
        Ok(match &self.family {
            Family::PurePower { p, kappa } => Constants {
                p: *p,
                q: *p,
                q0: *p,
                c_s: *kappa,
                c_lower: *kappa,
                c_upper: *kappa,
                mu_h6: h6(*p),
            },
            Family::WeightedPower { p, weight } => {
                let sup = weight.sup().ok_or_else(|| {
                    Error::Hypothesis("unbounded weight has no finite C^*".into())
                })?;
                Constants {
                    p: *p,
                    q: *p,
                    q0: *p,
                    c_s: weight.inf(),
                    c_lower: weight.inf(),
                    c_upper: sup,
                    mu_h6: h6(*p),
                }
            }
            Family::TwoRegime { q0, q } => Constants {
                p: *q,
                q: *q,
                q0: *q0,
                c_s: 1.0,
                c_lower: 1.0,
                c_upper: 1.0,
                mu_h6: h6(*q0),
            },
        })
    }

    /// Copy with the coefficient evaluated at `t + s`.
    pub fn shifted(&self, s: f64) -> Self {
        let mut o = self.clone();
        o.t_shift += s;
        o
    }

    /// Coefficient of the weighted family at height `t` (1 otherwise).
    pub fn weight(&self, t: f64) -> (f64, f64) {
        match &self.family {
            Family::WeightedPower { weight, .. } => weight.eval(t + self.t_shift),
            Family::PurePower { kappa, .. } => (*kappa, 0.0),
            Family::TwoRegime { .. } => (1.0, 0.0),
        }
    }

    /// `b(s) / h(t)`: the t-independent part of the flux.
    fn base_flux(&self, s: f64) -> f64 {
        match &self.family {
            Family::PurePower { p, .. } | Family::WeightedPower { p, .. } => s.powf(p - 1.0),
            Family::TwoRegime { q0, q } => {
                if s <= 1.0 {
                    s.powf(q0 - 1.0)
                } else {
                    s.powf(q - 1.0)
                }
            }
        }
    }

    fn base_flux_inverse(&self, y: f64) -> f64 {
        match &self.family {
            Family::PurePower { p, .. } | Family::WeightedPower { p, .. } => y.powf(1.0 / (p - 1.0)),
            Family::TwoRegime { q0, q } => {
                if y <= 1.0 {
                    y.powf(1.0 / (q0 - 1.0))
                } else {
                    y.powf(1.0 / (q - 1.0))
                }
            }
        }
    }

    /// `e(t, s)`.
    pub fn e(&self, t: f64, s: f64) -> f64 {
        self.flux(t, s) / s
    }

    /// `b(t, s) = s e(t, s) = |a(t, s·unit)|`.
    pub fn flux(&self, t: f64, s: f64) -> f64 {
        self.weight(t).0 * self.base_flux(s)
    }

    /// Solves `b(t, s) = y` for `s >= 0` in closed form.
    pub fn invert_flux(&self, t: f64, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        self.base_flux_inverse(y / self.weight(t).0)
    }

    /// Solves `b(t, s) = y` by bracketing and bisection to `rel_tol`,
    /// reporting non-monotonicity met on the way.
    pub fn invert_flux_bisect(&self, t: f64, y: f64, rel_tol: f64) -> Result<f64> {
        if y <= 0.0 {
            return Ok(0.0);
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut prev = 0.0;
        loop {
            let b = self.flux(t, hi);
            if b < prev {
                return Err(Error::Hypothesis(format!("s e(t,s) decreases near s = {hi}")));
            }
            if b >= y {
                break;
            }
            prev = b;
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Hypothesis("flux bounded, cannot invert".into()));
            }
        }
        while hi - lo > rel_tol * hi {
            let mid = 0.5 * (lo + hi);
            if self.flux(t, mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Energy law `G(s)` with `G'(s) = b(s)/h(t)`, and `G'(s)/s`.
    pub fn energy_law(&self, s: f64) -> (f64, f64) {
        match &self.family {
            Family::PurePower { p, .. } | Family::WeightedPower { p, .. } => {
                let sp2 = if s > 0.0 { s.powf(p - 2.0) } else { 0.0 };
                (s * s * sp2 / p, sp2)
            }
            Family::TwoRegime { q0, q } => {
                if s <= 1.0 {
                    let sp2 = if s > 0.0 { s.powf(q0 - 2.0) } else { 0.0 };
                    (s * s * sp2 / q0, sp2)
                } else {
                    let sp2 = s.powf(q - 2.0);
                    (1.0 / q0 + (s * s * sp2 - 1.0) / q, sp2)
                }
            }
        }
    }

    /// Samples the structural hypotheses for `t ∈ [0, t_max]`.
    pub fn check_hypotheses(&self, t_max: f64) -> Result<HypothesisReport> {
        self.validate()?;
        let c = self.constants()?;
        let ts: Vec<f64> = (0..=16).map(|k| t_max * k as f64 / 16.0).collect();
        let ss: Vec<f64> = (0..=240).map(|k| 10f64.powf(-6.0 + 12.0 * k as f64 / 240.0)).collect();
        let slack = 1e-12;
        let mut rep = HypothesisReport {
            flux_increasing: true,
            h4_small: true,
            h4_lower: true,
            h4_upper: true,
            h6: true,
        };
        for &t in &ts {
            let mut prev = 0.0;
            for &s in &ss {
                let b = self.flux(t, s);
                if !(b > prev) {
                    rep.flux_increasing = false;
                }
                prev = b;
                let az = s * b;
                if s <= 1.0 {
                    if c.c_s * s.powf(c.q0) > az * (1.0 + slack) {
                        rep.h4_small = false;
                    }
                } else {
                    if c.c_lower * s.powf(c.q) > az * (1.0 + slack) {
                        rep.h4_lower = false;
                    }
                    if az > c.c_upper * (s.powf(c.p) + t.powf(c.p) + 1.0) * (1.0 + slack) {
                        rep.h4_upper = false;
                    }
                }
                if s <= 1e-3 {
                    let d = (self.flux(t, s * (1.0 + 1e-6)) - b) / (s * 1e-6);
                    if d < b.powf(c.mu_h6) * (1.0 - 1e-4) {
                        rep.h6 = false;
                    }
                }
            }
        }
        Ok(rep)
    }
}

/// Parametric nonlinearity `f(t)` on `t >= 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceFn {
    /// `Σ c_k t^k`.
    Poly { coeffs: Vec<f64> },
    /// `coef · t^exp`, `exp >= 0`.
    Power { coef: f64, exp: f64 },
    /// `min(inner(t), cap)` for nondecreasing `inner`.
    Clamped {
        inner: Box<SourceFn>,
        cap: f64,
        #[serde(skip)]
        crossing: OnceLock<f64>,
    },
    Sum { terms: Vec<SourceFn> },
}

impl PartialEq for SourceFn {
    fn eq(&self, other: &Self) -> bool {
        use SourceFn::*;
        match (self, other) {
            (Poly { coeffs: a }, Poly { coeffs: b }) => a == b,
            (Power { coef: a, exp: x }, Power { coef: b, exp: y }) => a == b && x == y,
            (Clamped { inner: a, cap: x, .. }, Clamped { inner: b, cap: y, .. }) => a == b && x == y,
            (Sum { terms: a }, Sum { terms: b }) => a == b,
            _ => false,
        }
    }
}

impl SourceFn {
    pub fn constant(c: f64) -> Self {
        SourceFn::Poly { coeffs: vec![c] }
    }

    pub fn affine(c0: f64, c1: f64) -> Self {
        SourceFn::Poly { coeffs: vec![c0, c1] }
    }

    pub fn power(coef: f64, exp: f64) -> Self {
        SourceFn::Power { coef, exp }
    }

    pub fn clamped(inner: SourceFn, cap: f64) -> Self {
        SourceFn::Clamped { inner: Box::new(inner), cap, crossing: OnceLock::new() }
    }

    fn validate(&self) -> Result<()> {
        match self {
            SourceFn::Poly { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return invalid("polynomial needs finite coefficients");
                }
            }
            SourceFn::Power { coef, exp } => {
                if !coef.is_finite() || !(*exp >= 0.0) {
                    return invalid("power needs finite coefficient and exponent >= 0");
                }
            }
            SourceFn::Clamped { inner, cap, .. } => {
                inner.validate()?;
                if !cap.is_finite() {
                    return invalid("cap must be finite");
                }
            }
            SourceFn::Sum { terms } => {
                for t in terms {
                    t.validate()?;
                }
            }
        }
        Ok(())
    }

    /// `f(t)` for `t >= 0`.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            SourceFn::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c),
            SourceFn::Power { coef, exp } => {
                if *exp == 0.0 {
                    *coef
                } else {
                    coef * t.powf(*exp)
                }
            }
            SourceFn::Clamped { inner, cap, .. } => inner.eval(t).min(*cap),
            SourceFn::Sum { terms } => terms.iter().map(|f| f.eval(t)).sum(),
        }
    }

    /// `∫_0^t f` for `t >= 0`.
    pub fn antiderivative(&self, t: f64) -> f64 {
        match self {
            SourceFn::Poly { coeffs } => {
                coeffs.iter().enumerate().rev().fold(0.0, |acc, (k, &c)| acc * t + c / (k + 1) as f64) * t
            }
            SourceFn::Power { coef, exp } => coef * t.powf(exp + 1.0) / (exp + 1.0),
            SourceFn::Clamped { inner, cap, crossing } => {
                let x = *crossing.get_or_init(|| clamp_crossing(inner, *cap));
                if t <= x {
                    inner.antiderivative(t)
                } else {
                    inner.antiderivative(x) + cap * (t - x)
                }
            }
            SourceFn::Sum { terms } => terms.iter().map(|f| f.antiderivative(t)).sum(),
        }
    }

    /// `t · f(t)` expressed in the same family, when closed.
    fn times_t(&self) -> Option<SourceFn> {
        match self {
            SourceFn::Poly { coeffs } => {
                let mut c = vec![0.0];
                c.extend_from_slice(coeffs);
                Some(SourceFn::Poly { coeffs: c })
            }
            SourceFn::Power { coef, exp } => Some(SourceFn::Power { coef: *coef, exp: exp + 1.0 }),
            SourceFn::Sum { terms } => {
                terms.iter().map(|f| f.times_t()).collect::<Option<Vec<_>>>().map(|terms| SourceFn::Sum { terms })
            }
            SourceFn::Clamped { .. } => None,
        }
    }

    fn scaled(&self, a: f64) -> Option<SourceFn> {
        match self {
            SourceFn::Poly { coeffs } => Some(SourceFn::Poly { coeffs: coeffs.iter().map(|c| a * c).collect() }),
            SourceFn::Power { coef, exp } => Some(SourceFn::Power { coef: a * coef, exp: *exp }),
            SourceFn::Sum { terms } => {
                terms.iter().map(|f| f.scaled(a)).collect::<Option<Vec<_>>>().map(|terms| SourceFn::Sum { terms })
            }
            SourceFn::Clamped { .. } => None,
        }
    }

    /// `(c0 + c1 t) · f(t)` symbolically.
    pub fn times_affine(&self, c0: f64, c1: f64) -> Result<SourceFn> {
        let a = self.scaled(c0);
        let b = self.times_t().and_then(|g| g.scaled(c1));
        match (a, b) {
            (Some(a), Some(b)) => Ok(SourceFn::Sum { terms: vec![a, b] }),
            _ => invalid("product with a clamped source has no closed form"),
        }
    }
}

fn clamp_crossing(inner: &SourceFn, cap: f64) -> f64 {
    if inner.eval(0.0) >= cap {
        return 0.0;
    }
    let mut hi = 1.0;
    while inner.eval(hi) < cap {
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if inner.eval(mid) < cap {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Flags sampled on a lattice of heights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceFlags {
    pub nonnegative: bool,
    pub nondecreasing: bool,
    pub positive_at_zero: bool,
    pub ratio_decreasing: bool,
}

/// Nonlinearity with growth constants: `f(t) <= α t^{q-1} + β`.
///
/// Evaluation uses `f(max(t, 0) + shift)`; the antiderivative is normalised to
/// vanish at 0 and is linear for negative `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub f: SourceFn,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub shift: f64,
}

impl SourceSpec {
    pub fn new(f: SourceFn, alpha: f64, beta: f64) -> Self {
        Self { f, alpha, beta, shift: 0.0 }
    }

    /// `f ≡ c` with `α = 0`, `β = c`.
    pub fn constant(c: f64) -> Self {
        Self::new(SourceFn::constant(c), 0.0, c.max(0.0))
    }

    pub fn validate(&self) -> Result<()> {
        self.f.validate()?;
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return invalid("growth constants must be nonnegative");
        }
        if !(self.shift >= 0.0) {
            return invalid("shift must be nonnegative");
        }
        Ok(())
    }

    pub fn shifted(&self, s: f64) -> Self {
        let mut o = self.clone();
        o.shift += s;
        o
    }

    pub fn f(&self, t: f64) -> f64 {
        self.f.eval(t.max(0.0) + self.shift)
    }

    pub fn f0(&self) -> f64 {
        self.f(0.0)
    }

    /// `F(t) = ∫_0^t f`.
    pub fn big_f(&self, t: f64) -> f64 {
        let base = self.f.antiderivative(self.shift);
        if t >= 0.0 {
            self.f.antiderivative(t + self.shift) - base
        } else {
            self.f0() * t
        }
    }

    /// Samples the flags on `(0, t_max]` for exponent `p`.
    pub fn flags(&self, p: f64, t_max: f64) -> SourceFlags {
        let ts: Vec<f64> = (1..=400).map(|k| t_max * k as f64 / 400.0).collect();
        let vals: Vec<f64> = ts.iter().map(|&t| self.f(t)).collect();
        let ratio: Vec<f64> = ts.iter().zip(&vals).map(|(t, v)| v / t.powf(p - 1.0)).collect();
        SourceFlags {
            nonnegative: self.f0() >= 0.0 && vals.iter().all(|&v| v >= 0.0),
            nondecreasing: self.f0() <= vals[0] && vals.windows(2).all(|w| w[1] >= w[0]),
            positive_at_zero: self.f0() > 0.0,
            ratio_decreasing: ratio.windows(2).all(|w| w[1] < w[0]),
        }
    }

    /// Copy with `β = max(f(0), 0)` and the smallest `α` such that
    /// `f(t) <= α t^{q-1} + β` on a geometric lattice in `[1e-6, 1e6]`.
    pub fn with_sampled_growth(mut self, q: f64) -> Self {
        let beta = self.f0().max(0.0);
        let alpha = (0..=1200)
            .map(|k| 10f64.powf(-6.0 + k as f64 / 100.0))
            .map(|t| (self.f(t) - beta) / t.powf(q - 1.0))
            .fold(0.0f64, f64::max);
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    /// Samples `0 < f(t) <= α t^{q-1} + β` on `(0, t_max]`.
    pub fn check_growth(&self, q: f64, t_max: f64) -> bool {
        (1..=400).all(|k| {
            let t = t_max * k as f64 / 400.0;
            let v = self.f(t);
            v > 0.0 && v <= (self.alpha * t.powf(q - 1.0) + self.beta) * (1.0 + 1e-12)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_integral(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let n = 64;
        let h = (b - a) / n as f64;
        let mut s = 0.0;
        for k in 0..n {
            for (x, w) in crate::profile::GL4 {
                s += 0.5 * h * w * f(a + h * (k as f64 + 0.5 * (x + 1.0)));
            }
        }
        s
    }

    #[test]
    fn antiderivatives_match_quadrature() {
        let sources = [
            SourceSpec::constant(1.0),
            SourceSpec::new(SourceFn::affine(1.0, 0.5), 0.25, 1.25),
            SourceSpec::new(SourceFn::power(1.0, 0.5), 0.0, 1.0),
            SourceSpec::new(SourceFn::clamped(SourceFn::power(1.0, 0.5), 1.0), 0.0, 1.0),
            SourceSpec::new(SourceFn::Poly { coeffs: vec![1.0, -0.5, 0.25] }, 1.0, 1.0).shifted(0.3),
        ];
        for s in &sources {
            for &t in &[0.1, 0.7, 1.0, 2.5, 4.0] {
                let q = gauss_integral(|x| s.f(x), 0.0, t);
                assert!((s.big_f(t) - q).abs() < 1e-5 * q.abs().max(1.0), "{s:?} t={t}: {} vs {q}", s.big_f(t));
            }
            assert_eq!(s.big_f(0.0), 0.0);
            assert!((s.big_f(-0.5) + 0.5 * s.f0()).abs() < 1e-15);
        }
    }

    #[test]
    fn affine_product() {
        let g = SourceFn::power(2.0, 0.5);
        let f = g.times_affine(1.0, 3.0).unwrap();
        for &t in &[0.0, 0.3, 2.0] {
            assert!((f.eval(t) - g.eval(t) * (1.0 + 3.0 * t)).abs() < 1e-12);
        }
        assert!(SourceFn::clamped(g, 1.0).times_affine(1.0, 1.0).is_err());
    }

    #[test]
    fn flags() {
        let f = SourceSpec::new(SourceFn::affine(1.0, 0.5), 0.25, 1.25);
        let fl = f.flags(2.0, 10.0);
        assert!(fl.nonnegative && fl.nondecreasing && fl.positive_at_zero && fl.ratio_decreasing);
        assert!(f.check_growth(3.0, 100.0));
        assert!(!f.check_growth(2.0, 100.0));
        let lin = SourceSpec::new(SourceFn::affine(0.0, 1.0), 1.0, 0.0);
        assert!(!lin.flags(2.0, 10.0).ratio_decreasing);
        assert!(!lin.flags(2.0, 10.0).positive_at_zero);
    }

    #[test]
    fn inversion_agrees_with_bisection() {
        let ops = [
            OperatorSpec::p_laplacian(2, 2.0),
            OperatorSpec::p_laplacian(3, 3.5),
            OperatorSpec::new(2, Family::WeightedPower { p: 1.6, weight: Weight::Saturating { c0: 1.0, c1: 1.0 } }),
            OperatorSpec::new(2, Family::TwoRegime { q0: 1.5, q: 3.0 }),
        ];
        for op in &ops {
            for &t in &[0.0, 0.5, 3.0] {
                for &y in &[1e-6, 0.3, 1.0, 7.0] {
                    let a = op.invert_flux(t, y);
                    let b = op.invert_flux_bisect(t, y, 1e-12).unwrap();
                    assert!((a - b).abs() <= 1e-11 * a.max(1e-300), "{op:?} {t} {y}");
                    assert!((op.flux(t, a) - y).abs() < 1e-10 * y);
                }
            }
        }
    }

    #[test]
    fn hypotheses_hold_for_builtin_families() {
        let ops = [
            OperatorSpec::p_laplacian(2, 2.0),
            OperatorSpec::p_laplacian(2, 3.0),
            OperatorSpec::p_laplacian(2, 1.5),
            OperatorSpec::new(2, Family::WeightedPower { p: 2.0, weight: Weight::Saturating { c0: 1.0, c1: 1.0 } }),
            OperatorSpec::new(2, Family::TwoRegime { q0: 1.5, q: 2.5 }),
        ];
        for op in &ops {
            let r = op.check_hypotheses(10.0).unwrap();
            assert!(r.all(), "{op:?}: {r:?}");
        }
        let bad = OperatorSpec { constants: Some(Constants { p: 2.0, q: 2.0, q0: 2.0, c_s: 1.0, c_lower: 2.0, c_upper: 1.0, mu_h6: 0.0 }), ..OperatorSpec::p_laplacian(2, 2.0) };
        assert!(!bad.check_hypotheses(1.0).unwrap().h4_lower);
    }

    #[test]
    fn energy_law_derivative() {
        let ops = [OperatorSpec::p_laplacian(2, 3.0), OperatorSpec::new(2, Family::TwoRegime { q0: 1.5, q: 2.5 })];
        for op in &ops {
            for &s in &[0.3, 0.99, 1.01, 2.0] {
                let h = 1e-6;
                let d = (op.energy_law(s + h).0 - op.energy_law(s - h).0) / (2.0 * h);
                assert!((d - op.energy_law(s).1 * s).abs() < 1e-6);
                assert!((d - op.flux(0.0, s)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn weight_blend_is_c1() {
        let w = Weight::Affine { c0: 1.0, c1: 1.0, cap: Some(2.0) };
        let (a, da) = w.eval(2.0);
        let (b, db) = w.eval(2.0 + 1e-9);
        assert!((a - b).abs() < 1e-8 && (da - db).abs() < 1e-8);
        assert_eq!(w.eval(3.0).1, 0.0);
        assert_eq!(w.sup(), Some(w.eval(10.0).0));
    }

    #[test]
    fn json_round_trip() {
        let op = OperatorSpec::new(2, Family::WeightedPower { p: 2.0, weight: Weight::Saturating { c0: 1.0, c1: 1.0 } });
        let s = serde_json::to_string(&op).unwrap();
        assert_eq!(serde_json::from_str::<OperatorSpec>(&s).unwrap(), op);
        let src = SourceSpec::new(SourceFn::clamped(SourceFn::power(1.0, 0.5), 1.0), 0.0, 1.0);
        let s = serde_json::to_string(&src).unwrap();
        assert_eq!(serde_json::from_str::<SourceSpec>(&s).unwrap(), src);
    }
}
