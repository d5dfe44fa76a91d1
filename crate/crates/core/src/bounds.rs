//! Explicit constants and a-priori inequalities: the `L^q` bound, Moser
//! sup estimates, ball eigenvalues and eigenfunction estimates.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ops::{OperatorSpec, SourceFn, SourceSpec};
use crate::profile::unit_ball_volume;
use crate::radial;

/// Relative slack used when deciding `holds`.
pub const BOUND_TOL: f64 = 1e-9;

/// An inequality `left <= right` with its named constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub left: f64,
    pub right: f64,
    pub holds: bool,
    pub constants: BTreeMap<String, f64>,
}

impl BoundReport {
    pub fn new(name: &str, left: f64, right: f64, constants: BTreeMap<String, f64>) -> Self {
        let holds = left <= right + BOUND_TOL * right.abs().max(1e-300);
        Self { name: name.into(), left, right, holds, constants }
    }
}

fn consts(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// `M(Ω′)`, the `L^q` bound of solutions on `Ω′` with `|Ω′| = measure`.
pub fn lq_bound(q: f64, c_lower: f64, alpha: f64, beta: f64, measure: f64, lambda: f64) -> Result<f64> {
    if !(q > 1.0) || !(measure > 0.0) {
        return invalid("lq_bound needs q > 1 and positive measure");
    }
    let margin = c_lower * lambda - alpha;
    if !(margin > 0.0) {
        return Err(Error::Margin { bound: c_lower * lambda, alpha });
    }
    let qp = q / (q - 1.0);
    let a = (2.0 * c_lower * measure / margin).powf(1.0 / q);
    let b = (2.0 * beta * measure.powf(1.0 / qp) / margin).powf(1.0 / (q - 1.0));
    Ok(a + b)
}

/// `M(Ω′)` from an operator and a source, with `λ_{B′}` from [`eigen_ball`].
pub fn lq_bound_for(op: &OperatorSpec, src: &SourceSpec, measure: f64) -> Result<f64> {
    let c = op.constants()?;
    let lambda = eigen_ball(op.dim, c.q, measure)?;
    lq_bound(c.q, c.c_lower, src.alpha, src.beta, measure, lambda)
}

/// Cached first eigenvalues of the unit-measure ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallTable {
    pub dim: usize,
    pub q: Vec<f64>,
    pub lambda: Vec<f64>,
    pub method: String,
    /// Second derivatives of the natural spline through `ln λ`.
    spline: Vec<f64>,
}

pub const BALL_TABLE_Q_MIN: f64 = 1.1;
pub const BALL_TABLE_Q_MAX: f64 = 4.0;
pub const BALL_TABLE_POINTS: usize = 33;
const BALL_TABLE_STEP: f64 = 2e-5;

impl BallTable {
    fn build(dim: usize) -> Result<Self> {
        let qs: Vec<f64> = (0..BALL_TABLE_POINTS)
            .map(|k| BALL_TABLE_Q_MIN + (BALL_TABLE_Q_MAX - BALL_TABLE_Q_MIN) * k as f64 / (BALL_TABLE_POINTS - 1) as f64)
            .collect();
        let omega = unit_ball_volume(dim);
        let mut lambda = Vec::with_capacity(qs.len());
        for &q in &qs {
            let rho = first_zero(dim, q)?;
            lambda.push(rho.powf(q) * omega.powf(q / dim as f64));
        }
        let logs: Vec<f64> = lambda.iter().map(|l| l.ln()).collect();
        let spline = natural_spline(&qs, &logs);
        Ok(Self {
            dim,
            q: qs,
            lambda,
            method: format!("radial shooting of -Δ_q w = w^(q-1), w(0) = 1, RK4 step {BALL_TABLE_STEP}"),
            spline,
        })
    }

    pub fn eval(&self, q: f64) -> Result<f64> {
        if !(BALL_TABLE_Q_MIN..=BALL_TABLE_Q_MAX).contains(&q) {
            return invalid(format!("q = {q} outside the ball table range [{BALL_TABLE_Q_MIN}, {BALL_TABLE_Q_MAX}]"));
        }
        let k = self.q.partition_point(|&x| x <= q).clamp(1, self.q.len() - 1);
        let (x0, x1) = (self.q[k - 1], self.q[k]);
        let h = x1 - x0;
        let a = (x1 - q) / h;
        let b = (q - x0) / h;
        let y0 = self.lambda[k - 1].ln();
        let y1 = self.lambda[k].ln();
        let v = a * y0 + b * y1 + ((a * a * a - a) * self.spline[k - 1] + (b * b * b - b) * self.spline[k]) * h * h / 6.0;
        Ok(v.exp())
    }
}

/// First zero of the radial solution of `-Δ_q w = w^{q-1}`, `w(0) = 1`.
fn first_zero(dim: usize, q: f64) -> Result<f64> {
    let op = OperatorSpec::p_laplacian(dim, q);
    let src = SourceSpec::new(SourceFn::power(1.0, q - 1.0), 1.0, 0.0);
    let shot = radial::integrate_to(&op, &src, 1.0, BALL_TABLE_STEP, 100.0)?;
    shot.terminal.ok_or_else(|| Error::Solver(format!("eigenfunction shot for q = {q} did not vanish")))
}

fn natural_spline(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    let mut u = vec![0.0; n];
    for i in 1..n - 1 {
        let sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
        let p = sig * m[i - 1] + 2.0;
        m[i] = (sig - 1.0) / p;
        let d = (y[i + 1] - y[i]) / (x[i + 1] - x[i]) - (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
        u[i] = (6.0 * d / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
    }
    m[n - 1] = 0.0;
    for i in (0..n - 1).rev() {
        m[i] = m[i] * m[i + 1] + u[i];
    }
    m
}

/// The table for dimension `dim`, built on first use.
pub fn ball_table(dim: usize) -> Result<Arc<BallTable>> {
    static TABLES: OnceLock<Mutex<HashMap<usize, Arc<BallTable>>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = tables.lock().expect("ball table lock");
    if let Some(t) = guard.get(&dim) {
        return Ok(t.clone());
    }
    let t = Arc::new(BallTable::build(dim)?);
    guard.insert(dim, t.clone());
    Ok(t)
}

/// First eigenvalue of `-Δ_q` on the ball of the given volume:
/// `λ_{B₁}(q) / volume^{q/n}` with `B₁` the ball of unit measure.
pub fn eigen_ball(dim: usize, q: f64, volume: f64) -> Result<f64> {
    if !(volume > 0.0) {
        return invalid("volume must be positive");
    }
    Ok(ball_table(dim)?.eval(q)? / volume.powf(q / dim as f64))
}

/// Parameters of the Moser sup estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoserParams {
    pub n: usize,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub c_lower: f64,
    pub measure: f64,
    /// Morrey constant for `q > n`; see [`morrey_constant`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morrey_c0: Option<f64>,
    /// Auxiliary exponent for `q = n`, default `3n/4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_tilde: Option<f64>,
}

impl MoserParams {
    pub fn from_specs(op: &OperatorSpec, src: &SourceSpec, measure: f64) -> Result<Self> {
        let c = op.constants()?;
        Ok(Self {
            n: op.dim,
            q: c.q,
            alpha: src.alpha,
            beta: src.beta,
            c_lower: c.c_lower,
            measure,
            morrey_c0: None,
            q_tilde: None,
        })
    }
}

/// Constant `C₀(n, q)` with `sup|w| <= C₀ (‖w‖_q + ‖∇w‖_q)` on `ℝⁿ`, `q > n`.
///
/// Mean-value estimate on the unit ball around each point:
/// `|w(x) - w_B| <= 2ⁿ/(n ω_n) ∫_B |∇w| |x - y|^{1-n}` and
/// `|w_B| <= ω_n^{-1/q} ‖w‖_q`, combined with Hölder.
pub fn morrey_constant(n: usize, q: f64) -> f64 {
    let nf = n as f64;
    let omega = unit_ball_volume(n);
    let grad = 2f64.powi(n as i32) / (nf * omega) * (nf * omega * (q - 1.0) / (q - nf)).powf(1.0 - 1.0 / q);
    grad.max(omega.powf(-1.0 / q))
}

/// Sup bound of the Moser iteration for a solution with `‖u‖_q = norm_q`.
pub fn moser_sup_value(p: &MoserParams, norm_q: f64) -> Result<(f64, BTreeMap<String, f64>)> {
    let n = p.n as f64;
    let q = p.q;
    if !(q > 1.0) || p.n == 0 || !(p.measure > 0.0) || !(p.c_lower > 0.0) || p.alpha < 0.0 || p.beta < 0.0 || norm_q < 0.0 {
        return invalid("Moser bound needs q > 1, n >= 1 and positive data");
    }
    let m = p.measure;
    let k = m.powf(1.0 / n);
    let x_term = |c0: f64| -> f64 { c0 * ((p.alpha + p.beta / k.powf(q - 1.0)) / p.c_lower + 1.0 / k.powf(q)).powf(1.0 / q) };
    if q > n {
        let c0 = p.morrey_c0.unwrap_or_else(|| morrey_constant(p.n, q));
        let x = x_term(1.0);
        let d1 = c0 * (1.0 + x);
        let d2 = d1 + c0;
        let value = d1 * norm_q + d2 * k * m.powf(1.0 / q);
        return Ok((value, consts(&[("C0", c0), ("K", k), ("X", x), ("D1", d1), ("D2", d2)])));
    }
    // q <= n: Sobolev chain, with an auxiliary exponent when q = n
    let (c0, chi) = if q < n {
        (q * (n - 1.0) / (n - q), n / (n - q))
    } else {
        let qt = p.q_tilde.unwrap_or(0.75 * n);
        if !(qt > n / 2.0 && qt < n) {
            return invalid(format!("q_tilde must lie in (n/2, n), got {qt}"));
        }
        let c0 = qt * (n - 1.0) / (n - qt) * m.powf((q - qt) / (q * qt));
        (c0, n * qt / ((n - qt) * q))
    };
    let a = chi / ((chi - 1.0) * (chi - 1.0));
    let b = chi / (chi - 1.0);
    let h = x_term(c0);
    let h0 = h + m.powf((1.0 / chi - 1.0) / q);
    let d = chi.powf(a) * 2f64.powf(b);
    let c1 = (c0 * 2f64.powf(2.0 / q) * (p.alpha / p.c_lower + p.beta / p.c_lower + 1.0)).powf(b);
    let chain = d * (h.powf(b) + m.powf(-1.0 / q)) * (norm_q + k * m.powf(1.0 / q));
    let value = if q < n {
        2.0 * d * c1 * (k + 1.0).powf(b) * (m.powf(-1.0 / q) * norm_q + k)
    } else {
        d * (c1 * (k + 1.0).powf(b) * k.powf(-b) + m.powf(-1.0 / q)) * (norm_q + k * m.powf(1.0 / q))
    };
    let mut c = consts(&[("chi", chi), ("A", a), ("B", b), ("C0", c0), ("K", k), ("H", h), ("H0", h0), ("D", d), ("C1", c1), ("chain", chain)]);
    if q == n {
        c.insert("q_tilde".into(), p.q_tilde.unwrap_or(0.75 * n));
    }
    Ok((value, c))
}

/// Moser sup estimate checked against a measured `sup u`.
pub fn moser_sup_bound(p: &MoserParams, norm_q: f64, sup_u: f64) -> Result<BoundReport> {
    let (value, c) = moser_sup_value(p, norm_q)?;
    Ok(BoundReport::new("moser_sup", sup_u, value, c))
}

/// Composed estimate: the Moser bound evaluated at `‖u‖_q = M(Ω′)`.
pub fn sup3(op: &OperatorSpec, src: &SourceSpec, measure: f64) -> Result<f64> {
    let m = lq_bound_for(op, src, measure)?;
    let p = MoserParams::from_specs(op, src, measure)?;
    Ok(moser_sup_value(&p, m)?.0)
}

fn check_eigen_exponents(p: f64, q: f64) -> Result<()> {
    if !(q > 1.0 && q <= p) {
        return invalid(format!("need 1 < q <= p, got p = {p}, q = {q}"));
    }
    Ok(())
}

/// Constant of the `L^∞` eigenfunction estimate, without the norm factor.
fn linf_constant(n: usize, p: f64, r: f64, lambda: f64) -> f64 {
    let nf = n as f64;
    2.0 / unit_ball_volume(n).powf(1.0 / r)
        * (2.0 * (p - 1.0) / p).powf(nf * (p - 1.0) / (r * p))
        * (lambda / nf).powf(nf / (r * p))
}

/// Right side of `(max|w|)^{1+n(p-q)/(rp)} <= RHS`.
pub fn eigen_linf_bound(n: usize, p: f64, q: f64, r: f64, lambda: f64, norm_r: f64) -> Result<f64> {
    check_eigen_exponents(p, q)?;
    if !(r > 0.0) || !(lambda > 0.0) {
        return invalid("need r > 0 and λ > 0");
    }
    Ok(linf_constant(n, p, r, lambda) * norm_r)
}

/// Checks the `L^∞` eigenfunction estimate for a measured maximum.
pub fn eigen_linf_report(n: usize, p: f64, q: f64, r: f64, lambda: f64, norm_r: f64, max_w: f64) -> Result<BoundReport> {
    let rhs = eigen_linf_bound(n, p, q, r, lambda, norm_r)?;
    let kappa = 1.0 + n as f64 * (p - q) / (r * p);
    Ok(BoundReport::new(
        "eigen_linf",
        max_w.powf(kappa),
        rhs,
        consts(&[("kappa", kappa), ("constant", linf_constant(n, p, r, lambda))]),
    ))
}

/// Lower bound for `|{ |w| > t }|` of an eigenfunction with `‖w‖_∞ = m`.
pub fn level_set_lower_bound(n: usize, p: f64, q: f64, lambda: f64, m: f64, t: f64) -> Result<f64> {
    check_eigen_exponents(p, q)?;
    if !(t >= 0.0) || t > m {
        return invalid(format!("level t = {t} must lie in [0, {m}]"));
    }
    let nf = n as f64;
    let e = nf * (p - 1.0) / p;
    Ok(unit_ball_volume(n)
        * (m - t).powf(e)
        * (p / (p - 1.0)).powf(e)
        * (nf / lambda).powf(nf / p)
        * m.powf(nf * (1.0 - q) / p))
}

/// Bound on `‖w‖_s` from `‖w‖_r`, `r < s`.
pub fn eigen_interp_bound(n: usize, p: f64, q: f64, r: f64, s: f64, lambda: f64, norm_r: f64) -> Result<f64> {
    check_eigen_exponents(p, q)?;
    if !(r > 0.0) || !(s > r) {
        return invalid(format!("need 0 < r < s, got r = {r}, s = {s}"));
    }
    let kappa = 1.0 + n as f64 * (p - q) / (r * p);
    let e = (s - r) / (kappa * s);
    Ok(linf_constant(n, p, r, lambda).powf(e) * norm_r.powf(e + r / s))
}

/// Constants `K`, `C₁`, `C₂` of the sup estimate for `|f(t)| <= c|t|^{q-1} + d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SublinearConstants {
    pub k: f64,
    pub c1: f64,
    pub c2: f64,
}

pub fn sublinear_constants(n: usize, p: f64, q: f64, r: f64, rho: f64, c: f64, d: f64) -> Result<SublinearConstants> {
    if !(rho > 1.0) {
        return invalid(format!("ρ must exceed 1, got {rho}"));
    }
    if !(p > 1.0 && q > 0.0 && q <= p && r > 0.0 && c >= 0.0 && d >= 0.0) {
        return invalid("need p > 1, 0 < q <= p, r > 0 and c, d >= 0");
    }
    let nf = n as f64;
    let e = nf * (p - 1.0) / p;
    let k = (1.0 / unit_ball_volume(n))
        * (1.0 - 1.0 / rho).powf(-e)
        * rho.powf(r)
        * ((p - 1.0) / p).powf(e)
        * (1.0 / nf).powf(nf / p);
    let den1 = nf * (p - q) + r * p;
    let den2 = nf * (p - 1.0) + r * p;
    let c1 = (2.0 * c).powf(nf / den1) * k.powf(p / den1);
    let c2 = (2.0 * d).powf(nf / den2) * k.powf(p / den2);
    Ok(SublinearConstants { k, c1, c2 })
}

/// `max{C₁ ‖w‖_r^{rp/(n(p-q)+rp)}, C₂ ‖w‖_r^{rp/(n(p-1)+rp)}}`.
#[allow(clippy::too_many_arguments)]
pub fn sublinear_sup_bound(n: usize, p: f64, q: f64, r: f64, rho: f64, c: f64, d: f64, norm_r: f64, sup_w: f64) -> Result<BoundReport> {
    let k = sublinear_constants(n, p, q, r, rho, c, d)?;
    let nf = n as f64;
    let t1 = k.c1 * norm_r.powf(r * p / (nf * (p - q) + r * p));
    let t2 = k.c2 * norm_r.powf(r * p / (nf * (p - 1.0) + r * p));
    Ok(BoundReport::new(
        "sublinear_sup",
        sup_w,
        t1.max(t2),
        consts(&[("K", k.k), ("C1", k.c1), ("C2", k.c2), ("rho", rho), ("term1", t1), ("term2", t2)]),
    ))
}

/// `ρ` minimizing `K(ρ)` on a lattice in `(1, 1 + 20]`.
pub fn optimal_rho(n: usize, p: f64, r: f64) -> Result<f64> {
    let mut best = (f64::INFINITY, 2.0);
    for k in 1..=20000 {
        let rho = 1.0 + 20.0 * k as f64 / 20000.0;
        let kk = sublinear_constants(n, p, p, r, rho, 0.0, 1.0)?.k;
        if kk < best.0 {
            best = (kk, rho);
        }
    }
    Ok(best.1)
}

/// Sup bound in terms of the first eigenvalue `λ_p(Ω)`.
#[allow(clippy::too_many_arguments)]
pub fn eigen_decay_bounds(n: usize, p: f64, q: f64, c: f64, d: f64, lambda: f64, measure: f64, rho: f64, sup_w: f64) -> Result<BoundReport> {
    if !(lambda > 0.0) || !(measure > 0.0) {
        return invalid("need λ > 0 and positive measure");
    }
    let nf = n as f64;
    let r = p;
    let k = sublinear_constants(n, p, q, r, rho, c, d)?;
    if q == p {
        if !(c < lambda) {
            return Err(Error::Precondition(format!("c = {c} must be below λ_p(Ω) = {lambda}")));
        }
        let kappa1 = p * p / (nf * (p - 1.0) + p * p);
        let x = (d / (lambda - c)).powf(1.0 / (p - 1.0)) * measure.powf(1.0 / p);
        let t1 = k.c1 * x;
        let t2 = k.c2 * (d / (lambda - c)).powf(kappa1 / (p - 1.0)) * measure.powf(kappa1 / p);
        Ok(BoundReport::new(
            "eigen_decay",
            sup_w,
            t1.max(t2),
            consts(&[("K", k.k), ("C1", k.c1), ("C2", k.c2), ("kappa1", kappa1), ("rho", rho)]),
        ))
    } else {
        let tau = measure.powf(1.0 / p)
            * (2.0 * c / lambda).powf(1.0 / (p - q)).max((2.0 * d / lambda).powf(1.0 / (p - 1.0)));
        let t1 = k.c1 * tau.powf(r * p / (nf * (p - q) + r * p));
        let t2 = k.c2 * tau.powf(r * p / (nf * (p - 1.0) + r * p));
        Ok(BoundReport::new(
            "eigen_decay",
            sup_w,
            t1.max(t2),
            consts(&[("K", k.k), ("C1", k.c1), ("C2", k.c2), ("tau", tau), ("rho", rho)]),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const J01: f64 = 2.404_825_557_695_773;

    #[test]
    fn lq_bound_arithmetic() {
        let m = lq_bound(2.0, 1.0, 0.0, 1.0, PI, 5.7832).unwrap();
        let a = (2.0 * PI / 5.7832f64).sqrt();
        let b = 2.0 * PI.sqrt() / 5.7832;
        assert!((a - 1.0423).abs() < 1e-4 && (b - 0.6130).abs() < 1e-4);
        assert!((m - a - b).abs() < 1e-12);
        let no_beta = lq_bound(2.0, 1.0, 0.0, 0.0, PI, 5.7832).unwrap();
        assert!((no_beta - a).abs() < 1e-12);
        assert!(matches!(lq_bound(2.0, 1.0, 6.0, 1.0, PI, 5.7832), Err(Error::Margin { .. })));
    }

    #[test]
    fn ball_eigenvalues() {
        let l = eigen_ball(2, 2.0, PI).unwrap();
        assert!((l - J01 * J01).abs() < 1e-5 * l, "{l}");
        let l4 = eigen_ball(2, 2.0, 4.0 * PI).unwrap();
        assert!((l4 - l / 4.0).abs() < 1e-12);
        assert!(eigen_ball(2, 2.0, 1e12).unwrap() < 1e-10);
        assert!(eigen_ball(2, 5.0, 1.0).is_err());
        // n = 1: λ = (π/2)^q on (-1, 1) for q = 2
        let l1 = eigen_ball(1, 2.0, 2.0).unwrap();
        assert!((l1 - (PI / 2.0).powi(2)).abs() < 1e-5);
        let t = ball_table(2).unwrap();
        assert_eq!(t.q.len(), 33);
        for (q, l) in t.q.iter().zip(&t.lambda) {
            assert!((t.eval(*q).unwrap() - l).abs() < 1e-12 * l);
        }
    }

    #[test]
    fn moser_q_below_n_arithmetic() {
        let p = MoserParams { n: 3, q: 2.0, alpha: 0.5, beta: 1.0, c_lower: 1.0, measure: 2.0, morrey_c0: None, q_tilde: None };
        let (v, c) = moser_sup_value(&p, 1.0).unwrap();
        assert_eq!(c["chi"], 3.0);
        assert_eq!(c["B"], 1.5);
        assert_eq!(c["A"], 0.75);
        assert_eq!(c["C0"], 4.0);
        assert!(v >= c["chain"]);
    }

    #[test]
    fn moser_monotone_in_data() {
        for &(n, q) in &[(2usize, 2.0), (2, 3.0), (3, 2.0)] {
            let base = MoserParams { n, q, alpha: 0.3, beta: 1.0, c_lower: 1.0, measure: 1.0, morrey_c0: None, q_tilde: None };
            let v0 = moser_sup_value(&base, 0.5).unwrap().0;
            assert!(moser_sup_value(&MoserParams { alpha: 0.6, ..base }, 0.5).unwrap().0 >= v0);
            assert!(moser_sup_value(&MoserParams { beta: 2.0, ..base }, 0.5).unwrap().0 >= v0);
            assert!(moser_sup_value(&base, 0.7).unwrap().0 >= v0);
        }
    }

    #[test]
    fn q_tilde_range_checked() {
        let p = MoserParams { n: 2, q: 2.0, alpha: 0.0, beta: 1.0, c_lower: 1.0, measure: 1.0, morrey_c0: None, q_tilde: Some(0.9) };
        assert!(moser_sup_value(&p, 1.0).is_err());
    }

    #[test]
    fn sup3_slopes() {
        // sup3 ~ measure^{1/n} for q <= n and measure^{1/q} for q > n, small measures
        for &(p, expect) in &[(2.0, 0.5), (3.0, 1.0 / 3.0)] {
            let op = OperatorSpec::p_laplacian(2, p);
            let src = SourceSpec::new(SourceFn::affine(1.0, 0.5), if p == 2.0 { 0.5 } else { 0.25 }, if p == 2.0 { 1.0 } else { 1.25 });
            let a = sup3(&op, &src, 1e-8).unwrap();
            let b = sup3(&op, &src, 1e-10).unwrap();
            let slope = (a / b).ln() / 100f64.ln();
            assert!((slope - expect).abs() < 0.02, "p={p} slope={slope}");
        }
    }

    #[test]
    fn disk_eigenfunction_estimates() {
        let lambda = J01 * J01;
        // w = J₀(j r), ‖w‖₂ = √π |J₁(j)|
        let j1 = 0.519_147_497_289_466_6;
        let norm2 = PI.sqrt() * j1;
        let rhs = eigen_linf_bound(2, 2.0, 2.0, 2.0, lambda, norm2).unwrap();
        assert!((rhs - 2.0 / PI.sqrt() * (lambda / 2.0).sqrt() * norm2).abs() < 1e-12);
        assert!((rhs - 1.7656).abs() < 1e-3, "{rhs}");
        let lb = level_set_lower_bound(2, 2.0, 2.0, lambda, 1.0, 0.0).unwrap();
        assert!((lb - 4.0 * PI / lambda).abs() < 1e-12);
        assert!((lb - 2.1729).abs() < 1e-3 && lb <= PI);
        assert_eq!(level_set_lower_bound(2, 2.0, 2.0, lambda, 1.0, 1.0).unwrap(), 0.0);
        assert!(level_set_lower_bound(2, 2.0, 2.0, lambda, 1.0, 1.5).is_err());
    }

    #[test]
    fn interpolation_limits() {
        let lambda = 5.0;
        let b = eigen_interp_bound(2, 2.0, 2.0, 2.0, 2.0 + 1e-9, lambda, 0.7).unwrap();
        assert!((b - 0.7).abs() < 1e-8);
        assert!(eigen_interp_bound(2, 2.0, 2.0, 2.0, 2.0, lambda, 0.7).is_err());
        // p = q: κ = 1 and s → ∞ recovers the L^∞ estimate
        let inf = eigen_linf_bound(2, 2.0, 2.0, 2.0, lambda, 0.7).unwrap();
        let big = eigen_interp_bound(2, 2.0, 2.0, 2.0, 1e12, lambda, 0.7).unwrap();
        assert!((big - inf).abs() < 1e-9);
    }

    #[test]
    fn linf_bound_large_r_limit() {
        // exponents tend to 1 and the constant to 1 as r → ∞ when p = q
        let c = eigen_linf_bound(2, 2.0, 2.0, 1e12, 10.0, 1.0).unwrap();
        assert!((c - 2.0).abs() < 1e-9);
    }

    #[test]
    fn sublinear_constants_example() {
        let k = sublinear_constants(2, 2.0, 2.0, 2.0, 2.0, 0.0, 1.0).unwrap();
        assert!((k.k - 2.0 / PI).abs() < 1e-12);
        assert_eq!(k.c1, 0.0);
        assert!((k.c2 - (4.0 / PI).powf(1.0 / 3.0)).abs() < 1e-12);
        assert!(sublinear_constants(2, 2.0, 2.0, 2.0, 1.0, 0.0, 1.0).is_err());
        // disk torsion u = (1 - r²)/4: ‖u‖₂ = √(π/48)
        let rep = sublinear_sup_bound(2, 2.0, 2.0, 2.0, 2.0, 0.0, 1.0, (PI / 48.0).sqrt(), 0.25).unwrap();
        assert!(rep.holds, "{rep:?}");
    }

    #[test]
    fn optimal_rho_is_interior() {
        // d/dρ ln K = 0 at ρ = 1 + n(p-1)/(p r)
        let rho = optimal_rho(2, 2.0, 2.0).unwrap();
        assert!((rho - 1.5).abs() < 2e-3, "{rho}");
        assert!(rho > 1.0 && rho < 21.0);
    }

    #[test]
    fn decay_bounds() {
        let sq = eigen_decay_bounds(2, 2.0, 2.0, 0.0, 1.0, 2.0 * PI, PI, 2.0, 0.2316).unwrap();
        assert!(sq.holds && (sq.right - 0.4662).abs() < 1e-3, "{sq:?}");
        let a = eigen_decay_bounds(2, 2.0, 2.0, 0.0, 1.0, 1e3, PI, 2.0, 0.0).unwrap().right;
        let b = eigen_decay_bounds(2, 2.0, 2.0, 0.0, 1.0, 1e6, PI, 2.0, 0.0).unwrap().right;
        assert!(b < a && b < 1e-2);
        assert!(eigen_decay_bounds(2, 2.0, 2.0, 7.0, 1.0, 2.0 * PI, PI, 2.0, 0.0).is_err());
        let t1 = eigen_decay_bounds(2, 3.0, 2.0, 1.0, 1.0, 10.0, PI, 2.0, 0.0).unwrap().constants["tau"];
        let t2 = eigen_decay_bounds(2, 3.0, 2.0, 1.0, 1.0, 20.0, PI, 2.0, 0.0).unwrap().constants["tau"];
        assert!(t2 < t1);
    }
}
